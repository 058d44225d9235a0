import logging
from pathlib import Path

import click

from errors import ConfigError, exit_on_error
from models.config import RunConfig
from routes.training import read_lexicon
from services.corpus_io import load_corpus
from services.evaluation import format_report, run_experiment
from services.pdf_report import render_report_pdf
from services.synthetic import generate_synthetic

logger = logging.getLogger(__name__)


@click.command("experiment")
@click.option("--config", "config_path", type=click.Path(path_type=Path), default=None)
@click.option("--fractions", type=str, default=None, help="Lista separada por vírgulas, ex.: 0.1,0.2,0.3")
@click.option("--repeats", type=int, default=None)
@click.option("--methods", type=str, default=None, help="Lista separada por vírgulas")
@click.option("--seed", type=int, default=None)
@click.option("--train", type=click.Path(path_type=Path), default=None)
@click.option("--lexicon", type=click.Path(path_type=Path), default=None)
@click.option("--report-out", type=click.Path(path_type=Path), default=None)
@click.option("--pdf-out", type=click.Path(path_type=Path), default=None)
@exit_on_error
def cmd_experiment(config_path, fractions, repeats, methods, seed, train, lexicon, report_out, pdf_out):
    """Protocolo frações x repetições x métodos; relatório em texto (e PDF opcional)"""
    cfg = RunConfig.load(config_path, dict(
        fractions=fractions, repeats=repeats, methods=methods, seed=seed,
        train=train, lexicon=lexicon, report_out=report_out, pdf_out=pdf_out,
    ))

    test = None
    if cfg.train is not None:
        lex = read_lexicon(cfg.lexicon)
        corpus, alphabet = load_corpus(cfg.train, lexicon=lex)
        if cfg.test is not None:
            test, alphabet = load_corpus(cfg.test, alphabet, lex)
        if any(not s.is_labeled for s in list(corpus) + list(test or [])):
            raise ConfigError("experimentos exigem corpora totalmente rotulados")
    else:
        logger.info(f"🔄 Sem corpus de treino configurado; gerando {cfg.synthetic_count} sentenças sintéticas")
        corpus, alphabet, lex = generate_synthetic(cfg.seed, cfg.synthetic_count)

    report = run_experiment(
        corpus, alphabet, cfg.fractions, cfg.repeats, cfg.methods,
        config=cfg.to_ssl_config(), lexicon=lex, seed=cfg.seed,
        test_fraction=cfg.test_fraction, test=test,
    )

    text = format_report(report)
    if cfg.report_out is not None:
        cfg.report_out.parent.mkdir(parents=True, exist_ok=True)
        cfg.report_out.write_text(text, encoding="utf-8")
        logger.info(f"💾 Relatório salvo em {cfg.report_out}")
    else:
        click.echo(text, nl=False)
    if cfg.pdf_out is not None:
        render_report_pdf(report, cfg.pdf_out)
