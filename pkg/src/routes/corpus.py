import logging
from pathlib import Path

import click

from errors import exit_on_error
from services.corpus_io import save_corpus, save_lexicon
from services.synthetic import generate_synthetic

logger = logging.getLogger(__name__)

CORPUS_FILE = "corpus.tsv"
LEXICON_FILE = "lexicon.txt"


@click.command("generate")
@click.option("--seed", type=int, default=1, show_default=True, help="Semente da gramática sintética")
@click.option("--count", type=click.IntRange(min=1), default=2000, show_default=True, help="Número de sentenças")
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), required=True, help="Diretório de saída")
@exit_on_error
def cmd_generate(seed: int, count: int, out: Path):
    """Gera um corpus sintético rotulado e o léxico correspondente"""
    sentences, alphabet, lexicon = generate_synthetic(seed, count)
    corpus_path = save_corpus(sentences, alphabet, out / CORPUS_FILE)
    lexicon_path = save_lexicon(lexicon, out / LEXICON_FILE)
    logger.info(f"✅ Corpus sintético gerado: {corpus_path}, {lexicon_path}")
