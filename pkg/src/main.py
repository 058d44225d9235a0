import logging
import os
import sys

import click
from dotenv import load_dotenv

from routes.corpus import cmd_generate
from routes.experiment import cmd_experiment
from routes.graph import cmd_build_graph
from routes.training import cmd_tag, cmd_train

__version__ = "1.0.0"

# Carrega as variáveis de ambiente
load_dotenv()

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def configure_logging(level: str):
    logging.basicConfig(level=level.upper(), format=LOG_FORMAT, stream=sys.stderr, force=True)


@click.group()
@click.option(
    "--log-level",
    type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False),
    default=lambda: os.getenv("LOG_LEVEL", "INFO"),
    show_default="LOG_LEVEL ou INFO",
)
@click.version_option(__version__, prog_name="slotcrf")
def cli(log_level: str):
    """slotcrf: CRF semi-supervisionado guiado por grafo para preenchimento de slots"""
    configure_logging(log_level)


# Registrar comandos
cli.add_command(cmd_generate)
cli.add_command(cmd_train)
cli.add_command(cmd_tag)
cli.add_command(cmd_build_graph)
cli.add_command(cmd_experiment)
