"""
`ingest` command: validate and summarize an interaction log.
"""
import logging
from typing import Optional

import click

from ..services.data_core import filter_min_interactions, load_interactions, summarize
from .common import echo_json

logger = logging.getLogger(__name__)


@click.command()
@click.argument("path", type=str)
@click.option("--format", "fmt", type=click.Choice(["csv", "tsv", "dat"]), default=None,
              help="Input format; inferred from the extension when omitted")
@click.option("--delimiter", type=str, default=None, help="Explicit column delimiter")
@click.option("--min-interactions", type=int, default=None,
              help="Also report the dataset after iterative min-count filtering")
@click.option("--out", type=str, default=None, help="Write the summary JSON here as well")
def ingest(path: str, fmt: Optional[str], delimiter: Optional[str], min_interactions: Optional[int], out: Optional[str]):
    """Validate a user,item[,rating,timestamp] file and print its statistics."""
    ds = load_interactions(path, fmt, delimiter)
    payload = {"path": path, "raw": summarize(ds).model_dump()}
    if min_interactions is not None:
        filtered = filter_min_interactions(ds, min_interactions)
        payload["min_interactions"] = min_interactions
        payload["filtered"] = summarize(filtered).model_dump()
    echo_json(payload, out)
