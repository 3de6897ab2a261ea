"""
recsteal command-line application

Entry point wiring every subcommand onto one click group.
Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""
import sys
import logging
from typing import List, Optional

import click

from . import __version__
from .commands import attack, ingest, report, run, train
from .services.errors import RecStealError
from .services.settings import RuntimeSettings

# Configure logging
logging.basicConfig(
    level=getattr(logging, RuntimeSettings.log_level(), logging.INFO),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    stream=sys.stderr,
)
logger = logging.getLogger(__name__)


@click.group()
@click.version_option(__version__, prog_name="recsteal")
def main():
    """Model-stealing attacks on embedding recommenders."""


main.add_command(ingest.ingest)
main.add_command(train.train)
main.add_command(attack.attack)
main.add_command(run.run)
main.add_command(report.report)


def cli_main(argv: Optional[List[str]] = None) -> int:
    """Run the CLI and return its exit code instead of exiting."""
    try:
        rv = main.main(args=argv, prog_name="recsteal", standalone_mode=False)
    except click.UsageError as e:
        e.show()
        return 1
    except click.Abort:
        click.echo("Aborted!", err=True)
        return 1
    except click.ClickException as e:
        e.show()
        return 2
    except (RecStealError, OSError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        click.echo(f"Error: {e}", err=True)
        return 2
    return rv if isinstance(rv, int) else 0


if __name__ == "__main__":
    sys.exit(cli_main())
