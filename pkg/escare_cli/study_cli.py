import json

import click

from .cli import cli
from .cli_helpers import format_number
from .cli_helpers import handle_cli_errors
from .cli_helpers import new_table
from .cli_helpers import print_table
from .cli_helpers import resolve_config
from .cli_helpers import run_options
from .cli_helpers import write_run_config
from .config import DgpSpec
from .config import Estimator
from .config import SimModel
from .config import StudyConfig
from .environment import Environment
from .environment import pass_env
from .study import run_study


@cli.command(
    name="study",
    help="Simulation study: fit replicates of a simulation model and compare with the truth",
)
@click.option(
    "--model",
    "sim_model",
    type=click.Choice(["1", "2"]),
    help="Simulation model, 1 linear and 2 threshold",
)
@click.option(
    "-r",
    "--reps",
    "--replicates",
    "replicates",
    type=click.IntRange(min=1),
    help="Number of replicates",
)
@click.option("-n", "--n", "--length", "n", type=click.IntRange(min=100), help="Days per replicate")
@click.option(
    "--method",
    "methods",
    type=click.Choice([estimator.value for estimator in Estimator]),
    multiple=True,
    help="Estimators to compare, repeat for several",
)
@click.option("--alpha", type=float, default=0.01, help="Tail probability level")
@run_options()
@pass_env
@handle_cli_errors()
def main(
    env: Environment,
    sim_model: str | None,
    replicates: int | None,
    n: int | None,
    methods: tuple[str, ...],
    alpha: float,
):
    config = resolve_config(env)
    dgp_updates = dict(n=n, model=SimModel(int(sim_model)) if sim_model else None)
    dgp = DgpSpec.model_validate(
        {
            **config.dgp.model_dump(),
            **{key: value for key, value in dgp_updates.items() if value is not None},
        }
    )
    study_updates = dict(replicates=replicates, estimators=list(methods) or None)
    study = StudyConfig.model_validate(
        {
            **config.study.model_dump(),
            **{key: value for key, value in study_updates.items() if value is not None},
        }
    )
    config = config.model_copy(update=dict(dgp=dgp, study=study))
    outcomes, summary = run_study(
        dgp,
        study.replicates,
        study.estimators,
        alpha=alpha,
        ml_config=config.ml,
        mcmc_config=config.mcmc,
        seed=config.seed,
        threads=env.threads,
    )

    env.out_dir.mkdir(parents=True, exist_ok=True)
    summary_path = env.out_dir / "study.csv"
    summary.table.to_csv(summary_path, float_format="%.10g")
    outcomes_path = env.out_dir / "replicates.json"
    outcomes_path.write_text(
        json.dumps(
            [
                dict(
                    replicate=outcome.replicate,
                    estimator=outcome.estimator.value,
                    params=outcome.params,
                    var_next=outcome.var_next,
                    es_next=outcome.es_next,
                    true_var_next=outcome.true_var_next,
                    true_es_next=outcome.true_es_next,
                    error=outcome.error,
                )
                for outcome in outcomes
            ],
            indent=2,
        )
    )
    env.logger.info(
        "Wrote study summary to [green]%s[/]",
        summary_path,
        extra={"markup": True, "highlighter": None},
    )
    write_run_config(env, config)

    table = new_table(
        f"Simulation model {dgp.model.value}, {study.replicates} replicates",
        ["Quantity", *summary.table.columns],
    )
    for quantity, row in summary.table.iterrows():
        table.add_row(quantity, *[format_number(value, 4) for value in row])
    for estimator in study.estimators:
        table.add_row(
            f"sign pattern {estimator.value}",
            format_number(summary.sign_agreement[estimator], 3),
        )
        table.add_row(f"failures {estimator.value}", str(summary.failures[estimator]))
    print_table(table)
