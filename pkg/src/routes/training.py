import logging
from pathlib import Path
from typing import List, Optional, Tuple

import click

from errors import ConfigError, exit_on_error
from models.config import METHODS, RunConfig
from models.corpus import AlignedSentence, LabelAlphabet, Lexicon, SplitSpec
from services import crf
from services.corpus_io import format_corpus, holdout_split, load_corpus, load_lexicon, split_corpus
from services.evaluation import evaluate_model
from services.ssl_trainer import train_method

logger = logging.getLogger(__name__)

_METHOD_CHOICE = click.Choice(list(METHODS) + ["self_train"], case_sensitive=False)


def read_lexicon(path: Optional[Path]) -> Lexicon:
    return load_lexicon(path) if path else Lexicon()


def training_data(
    cfg: RunConfig, lexicon: Lexicon
) -> Tuple[List[AlignedSentence], List[AlignedSentence], List[AlignedSentence], LabelAlphabet]:
    """(rotulado, não rotulado, teste, alfabeto) a partir dos caminhos da configuração"""
    if cfg.train is None:
        raise ConfigError("nenhum corpus de treino configurado (train)")
    corpus, alphabet = load_corpus(cfg.train, lexicon=lexicon)
    labeled = [s for s in corpus if s.is_labeled]
    unlabeled = [s for s in corpus if not s.is_labeled]

    if cfg.test is not None:
        test, alphabet = load_corpus(cfg.test, alphabet, lexicon)
        if any(not s.is_labeled for s in test):
            raise ConfigError(f"corpus de teste sem rótulos: {cfg.test}")
    else:
        labeled, test = holdout_split(labeled, cfg.test_fraction, cfg.seed)

    if cfg.labeled_fraction < 1.0:
        split = split_corpus(labeled, SplitSpec(cfg.labeled_fraction, cfg.seed))
        labeled = list(split.labeled)
        unlabeled += list(split.unlabeled)
    if cfg.unlabeled is not None:
        extra, alphabet = load_corpus(cfg.unlabeled, alphabet, lexicon)
        unlabeled += [s.unlabeled() for s in extra]
    return labeled, unlabeled, test, alphabet


@click.command("train")
@click.option("--method", type=_METHOD_CHOICE, default=None, help="supervised, selftrain ou ssl")
@click.option("--config", "config_path", type=click.Path(path_type=Path), default=None, help="Arquivo chave = valor")
@click.option("--train", type=click.Path(path_type=Path), default=None)
@click.option("--test", type=click.Path(path_type=Path), default=None)
@click.option("--unlabeled", type=click.Path(path_type=Path), default=None)
@click.option("--lexicon", type=click.Path(path_type=Path), default=None)
@click.option("--model-out", type=click.Path(path_type=Path), default=None)
@click.option("--labeled-fraction", type=float, default=None)
@click.option("--seed", type=int, default=None)
@exit_on_error
def cmd_train(method, config_path, train, test, unlabeled, lexicon, model_out, labeled_fraction, seed):
    """Treina um modelo e imprime a linha RESULT com P/R/F1 no teste"""
    cfg = RunConfig.load(config_path, dict(
        method=method, train=train, test=test, unlabeled=unlabeled, lexicon=lexicon,
        model_out=model_out, labeled_fraction=labeled_fraction, seed=seed,
    ))
    lex = read_lexicon(cfg.lexicon)
    labeled, unlabeled_sentences, test_sentences, alphabet = training_data(cfg, lex)
    logger.info(
        f"🔍 Treino {cfg.method}: {len(labeled)} rotuladas, {len(unlabeled_sentences)} não rotuladas, "
        f"{len(test_sentences)} de teste"
    )

    model = train_method(cfg.method, labeled, unlabeled_sentences, alphabet, lex, cfg.to_ssl_config())
    if cfg.model_out is not None:
        crf.save_model(model, cfg.model_out)

    total, _ = evaluate_model(model, test_sentences, alphabet)
    click.echo(
        f"RESULT method={cfg.method} fraction={cfg.labeled_fraction:.4f} "
        f"P={total.precision:.4f} R={total.recall:.4f} F1={total.f1:.4f}"
    )


@click.command("tag")
@click.option("--model", "model_path", type=click.Path(path_type=Path), required=True)
@click.option("--input", "input_path", type=click.Path(path_type=Path), required=True)
@click.option("--lexicon", type=click.Path(path_type=Path), default=None)
@click.option("--out", type=str, default="-", show_default=True, help="Arquivo de saída ou - para stdout")
@exit_on_error
def cmd_tag(model_path, input_path, lexicon, out):
    """Rotula um corpus com um modelo salvo (Viterbi simples)"""
    model = crf.load_model(model_path)
    sentences, _ = load_corpus(input_path, model.alphabet, read_lexicon(lexicon))
    tagged = [s.with_labels(y) for s, y in zip(sentences, crf.decode(model, sentences))]
    text = format_corpus(tagged, model.alphabet)
    if out == "-":
        click.echo(text, nl=False)
    else:
        Path(out).write_text(text, encoding="utf-8")
        logger.info(f"💾 Corpus rotulado salvo em {out}")
