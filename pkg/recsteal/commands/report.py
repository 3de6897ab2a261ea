"""
`report` command: aggregate result CSVs into mean±std tables.
"""
from typing import Optional, Tuple

import click

from ..services.reporting import error_rows, format_table, read_results_csv, aggregate


@click.command()
@click.argument("results", nargs=-1, required=True, type=str)
@click.option("--out", type=str, default=None, help="Write the aggregate table as CSV")
def report(results: Tuple[str, ...], out: Optional[str]):
    """Aggregate one or more result CSVs per method and model kinds."""
    df = read_results_csv(list(results))
    summary = aggregate(df)
    click.echo(format_table(summary))
    for line in error_rows(df):
        click.echo(f"failed: {line}", err=True)
    if out:
        summary.to_csv(out, index=False)
