from . import backtest_cli  # noqa
from . import fit_cli  # noqa
from . import forecast_cli  # noqa
from . import mcs_cli  # noqa
from . import measures_cli  # noqa
from . import report_cli  # noqa
from . import score_cli  # noqa
from . import simulate_cli  # noqa
from . import study_cli  # noqa
from .cli import cli

__ALL__ = [cli]

if __name__ == "__main__":
    cli()
