"""
`run` command: full config-driven experiment.
"""
import logging
from typing import Optional

import click

from ..models.result_models import CSV_COLUMNS
from ..services.experiment import run_experiment
from ..services.reporting import write_results_csv, write_results_json
from .common import config_option, load_with_base

logger = logging.getLogger(__name__)

RUN_HELP = (
    "Run every seed x sweep point x attack of an experiment config and write one CSV row per "
    "combination.\n\nCSV columns: " + ", ".join(CSV_COLUMNS) + " (plus seconds with --timings)."
)


@click.command(help=RUN_HELP)
@config_option
@click.option("--seed", type=int, default=None, help="Run only this seed instead of the config's seed list")
@click.option("--out", type=str, required=True, help="Result CSV path")
@click.option("--json", "json_out", type=str, default=None, help="Also write a JSON mirror (includes seconds)")
@click.option("--timings", is_flag=True, default=False, help="Add a wall-clock seconds column to the CSV")
@click.option("--progress/--no-progress", default=False, help="Show a progress bar over seeds")
def run(config_path: Optional[str], seed: Optional[int], out: str, json_out: Optional[str], timings: bool, progress: bool):
    cfg, base_dir = load_with_base(config_path)
    if seed is not None:
        cfg = cfg.model_copy(update={"seeds": [seed]})
    rows = run_experiment(cfg, progress=progress, base_dir=base_dir)
    write_results_csv(rows, out, timings=timings)
    if json_out:
        write_results_json(rows, json_out)
    failed = [row for row in rows if row.status != "ok"]
    click.echo(f"{len(rows)} rows written to {out} ({len(failed)} failed)")
