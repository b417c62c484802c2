import datetime

import numpy as np
from factory import Factory
from factory import LazyAttribute
from factory import Sequence

from escare_cli.config import DgpSpec
from escare_cli.config import McmcConfig
from escare_cli.config import MlConfig
from escare_cli.config import SimModel
from escare_cli.forecasting import ForecastRecord
from escare_cli.models.spec import ModelFamily
from escare_cli.models.spec import ModelSpec


class ModelSpecFactory(Factory):
    family = ModelFamily.ES_CARE
    alpha = 0.01
    measure_id = None

    class Meta:
        model = ModelSpec


class RealizedModelSpecFactory(ModelSpecFactory):
    family = ModelFamily.RE_ES_CARE
    measure_id = "x"


class DgpSpecFactory(Factory):
    model = SimModel.LINEAR
    n = 1900
    seed = Sequence(lambda index: index)
    burn_in = 200

    class Meta:
        model = DgpSpec


class MlConfigFactory(Factory):
    n_random_starts = 300
    expectile_starts = 20
    expectile_refine = 1
    max_iterations = 4000
    care_grid_size = 12

    class Meta:
        model = MlConfig


class McmcConfigFactory(Factory):
    epoch_length = 1500
    epoch_discard = 300
    final_epoch = 1500
    final_discard = 300
    max_epochs = 3
    tuning_interval = 50

    class Meta:
        model = McmcConfig


class ForecastRecordFactory(Factory):
    date = Sequence(
        lambda index: np.datetime64(datetime.date(2020, 1, 1) + datetime.timedelta(days=index), "D")
    )
    model = "es-care"
    alpha = 0.01
    var = -2.0
    es = LazyAttribute(lambda record: record.var * 1.15)
    tau = 0.0015
    step = Sequence(lambda index: index)

    class Meta:
        model = ForecastRecord
