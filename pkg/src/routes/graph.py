import logging
from pathlib import Path

import click

from errors import exit_on_error
from routes.training import read_lexicon
from services.corpus_io import load_corpus
from services.graph_builder import build_graph, dump_graph, format_graph

logger = logging.getLogger(__name__)


@click.command("build-graph")
@click.option("--train", type=click.Path(path_type=Path), required=True)
@click.option("--unlabeled", type=click.Path(path_type=Path), default=None)
@click.option("--lexicon", type=click.Path(path_type=Path), default=None)
@click.option("--k", "k", type=click.IntRange(min=1), default=10, show_default=True)
@click.option("--out", type=str, default="-", show_default=True, help="Arquivo de saída ou - para stdout")
@exit_on_error
def cmd_build_graph(train, unlabeled, lexicon, k, out):
    """Constrói o grafo k-NN de trigramas e grava o dump"""
    lex = read_lexicon(lexicon)
    corpus, alphabet = load_corpus(train, lexicon=lex)
    if unlabeled is not None:
        extra, _ = load_corpus(unlabeled, alphabet, lex)
        corpus += [s.unlabeled() for s in extra]
    graph = build_graph(corpus, lex, k)
    if out == "-":
        click.echo(format_graph(graph), nl=False)
    else:
        dump_graph(graph, out)
