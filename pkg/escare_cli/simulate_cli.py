import json

import click
import numpy as np

from .cli import cli
from .cli_helpers import format_number
from .cli_helpers import handle_cli_errors
from .cli_helpers import new_table
from .cli_helpers import print_table
from .cli_helpers import resolve_config
from .cli_helpers import run_options
from .cli_helpers import write_run_config
from .config import DgpSpec
from .config import SimModel
from .environment import Environment
from .environment import pass_env
from .market_data import write_daily
from .simulator import map_to_escare
from .simulator import simulate
from .simulator import true_risk


@cli.command(
    name="simulate",
    help="Simulate return and realized measure series from the realized GARCH style models",
)
@click.option(
    "--model",
    "sim_model",
    type=click.Choice(["1", "2"]),
    help="Simulation model, 1 linear and 2 threshold",
)
@click.option("-n", "--n", "--length", "n", type=click.IntRange(min=100), help="Days per series")
@click.option("--burn-in", type=click.IntRange(min=0), help="Discarded leading days")
@click.option(
    "-r",
    "--reps",
    "--replicates",
    "replicates",
    type=click.IntRange(min=1),
    default=1,
    help="Number of series",
)
@click.option("--alpha", type=float, default=0.01, help="Level of the true risk values")
@run_options()
@pass_env
@handle_cli_errors()
def main(
    env: Environment,
    sim_model: str | None,
    n: int | None,
    burn_in: int | None,
    replicates: int,
    alpha: float,
):
    config = resolve_config(env)
    updates = dict(seed=config.seed if config.dgp.seed is None else config.dgp.seed)
    if sim_model is not None:
        updates["model"] = SimModel(int(sim_model))
    if n is not None:
        updates["n"] = n
    if burn_in is not None:
        updates["burn_in"] = burn_in
    dgp = DgpSpec.model_validate({**config.dgp.model_dump(), **updates})
    config = config.model_copy(update=dict(dgp=dgp))

    truth = map_to_escare(dgp.model, alpha)
    seeds = np.random.SeedSequence(dgp.seed).spawn(replicates)
    width = len(str(replicates - 1))
    next_day = []
    for index, seed in enumerate(seeds):
        path = simulate(dgp, rng=np.random.default_rng(seed))
        file_path = env.out_dir / f"sim-{index:0{width}d}.csv"
        write_daily(path.to_series(), file_path)
        risk = true_risk(np.array([path.sqrt_h_next]), alpha)
        next_day.append(
            dict(
                file=file_path.name,
                sqrt_h_next=path.sqrt_h_next,
                var_next=float(risk.var[0]),
                es_next=float(risk.es[0]),
            )
        )
        env.logger.info(
            "Wrote simulated series to [green]%s[/]",
            file_path,
            extra={"markup": True, "highlighter": None},
        )

    truth_path = env.out_dir / "truth.json"
    truth_path.write_text(
        json.dumps(
            dict(
                model=dgp.model.value,
                alpha=alpha,
                family=truth.params.family.value,
                params=truth.params.as_dict(),
                eps_sq_mean=truth.eps_sq_mean,
                next_day=next_day,
            ),
            indent=2,
        )
    )
    write_run_config(env, config)

    table = new_table(f"True parameters of simulation model {dgp.model.value}", ["Parameter", "Value"])
    for name, value in truth.params.as_dict().items():
        table.add_row(name, format_number(value))
    print_table(table)
