"""Extração de pares slot/valor, precisão/revocação/F1 e o protocolo de experimentos."""
import concurrent.futures
import logging
import os
from collections import Counter
from numbers import Integral
from typing import Dict, Iterable, List, Optional, Sequence, Union

from tqdm import tqdm

from errors import ContractError
from models.config import SslConfig, canonical_method
from models.corpus import NULL_LABEL, AlignedSentence, LabelAlphabet, Lexicon, SplitSpec, Token
from models.report import ExperimentReport, PrfScore, RunRecord, SlotValue
from services import crf
from services.corpus_io import holdout_split, split_corpus
from services.ssl_trainer import train_method

logger = logging.getLogger(__name__)


def extract_slots(
    tokens: Sequence[Union[Token, str]],
    labels: Sequence[Union[int, str]],
    alphabet: Optional[LabelAlphabet] = None,
    sentence_id: int = 0,
) -> List[SlotValue]:
    """Cada sequência máxima de rótulos iguais e diferentes de O vira um SlotValue"""
    if len(tokens) != len(labels):
        raise ContractError(f"{len(tokens)} tokens para {len(labels)} rótulos")
    surfaces = [t.surface if isinstance(t, Token) else t for t in tokens]
    if alphabet is None and any(isinstance(y, Integral) for y in labels):
        raise ContractError("rótulos inteiros exigem o alfabeto para virar nomes")
    names = [alphabet.name(int(y)) if isinstance(y, Integral) else str(y) for y in labels]

    slots = []
    start = 0
    for i in range(1, len(names) + 1):
        if i == len(names) or names[i] != names[start]:
            if names[start] != NULL_LABEL:
                slots.append(SlotValue(sentence_id, names[start], " ".join(surfaces[start:i])))
            start = i
    return slots


def corpus_slots(
    sentences: Sequence[AlignedSentence], labels: Sequence[Sequence[int]], alphabet: LabelAlphabet
) -> List[SlotValue]:
    slots = []
    for s_id, (sentence, y) in enumerate(zip(sentences, labels)):
        slots.extend(extract_slots(sentence.tokens, list(y), alphabet, s_id))
    return slots


def score(predicted: Iterable[SlotValue], gold: Iterable[SlotValue]) -> PrfScore:
    """Casamento exato em multiconjunto de triplas (sentença, slot, valor)"""
    predicted, gold = Counter(predicted), Counter(gold)
    tp = sum((predicted & gold).values())
    return PrfScore(tp, sum(predicted.values()) - tp, sum(gold.values()) - tp)


def score_by_slot(predicted: Iterable[SlotValue], gold: Iterable[SlotValue]) -> Dict[str, PrfScore]:
    predicted, gold = list(predicted), list(gold)
    slots = sorted({s.slot for s in predicted} | {s.slot for s in gold})
    return {
        slot: score([p for p in predicted if p.slot == slot], [g for g in gold if g.slot == slot])
        for slot in slots
    }


def evaluate_model(model, test: Sequence[AlignedSentence], alphabet: LabelAlphabet):
    """Decodifica o teste e compara com o ouro; devolve (total, por slot)"""
    predicted = corpus_slots(test, crf.decode(model, test), alphabet)
    gold = corpus_slots(test, [s.labels for s in test], alphabet)
    return score(predicted, gold), score_by_slot(predicted, gold)


def _progress_enabled() -> bool:
    return os.getenv("SLOTCRF_PROGRESS", "1").lower() not in ("0", "false", "no", "off")


def run_experiment(
    corpus: Sequence[AlignedSentence],
    alphabet: LabelAlphabet,
    fractions: Sequence[float],
    repeats: int,
    methods: Iterable[str],
    config: Optional[SslConfig] = None,
    lexicon: Optional[Lexicon] = None,
    seed: int = 1,
    test_fraction: float = 0.2,
    test: Optional[Sequence[AlignedSentence]] = None,
    workers: Optional[int] = None,
) -> ExperimentReport:
    """Para cada (fração, repetição): divisão determinística, treino de cada método e
    pontuação na partição de teste fixa. Sem `test`, separa test_fraction do corpus."""
    if repeats < 1:
        raise ContractError(f"repeats deve ser >= 1 (recebido {repeats})")
    if any(not s.is_labeled for s in corpus):
        raise ContractError("o corpus do experimento precisa estar todo rotulado")
    methods = list(dict.fromkeys(canonical_method(m) for m in methods))
    config = config or SslConfig()
    if test is None:
        train, test = holdout_split(corpus, test_fraction, seed)
    else:
        train = list(corpus)
    workers = workers or int(os.getenv("SLOTCRF_WORKERS", "1"))

    report = ExperimentReport(seed=seed, test_size=len(test))
    logger.info(
        f"🔍 Experimento: {len(train)} treino / {len(test)} teste, frações {list(fractions)}, "
        f"{repeats} repetições, métodos {methods}, {workers} workers"
    )

    def run_one(method: str, fraction: float, repeat: int) -> RunRecord:
        split = split_corpus(train, SplitSpec(fraction, seed, repeat))
        model = train_method(method, split.labeled, split.unlabeled, alphabet, lexicon, config)
        total, per_slot = evaluate_model(model, test, alphabet)
        return RunRecord(method, fraction, repeat, total, per_slot)

    runs = [(m, f, r) for f in fractions for r in range(repeats) for m in methods]
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as executor:
        future_to_run = {executor.submit(run_one, *run): run for run in runs}
        completed = concurrent.futures.as_completed(future_to_run)
        for future in tqdm(completed, total=len(runs), desc="runs", disable=not _progress_enabled()):
            method, fraction, repeat = future_to_run[future]
            record = future.result()
            report.add(record)
            logger.debug(
                f"run method={method} fraction={fraction} repeat={repeat} "
                f"P={record.score.precision:.4f} R={record.score.recall:.4f} F1={record.score.f1:.4f}"
            )

    for row in report.summary():
        logger.info(f"✅ {row.method} fração={row.fraction:g}: F1 médio {row.f1:.4f} ({row.runs} execuções)")
    return report


def format_report(report: ExperimentReport) -> str:
    lines = [
        f"# seed={report.seed} test_sentences={report.test_size}",
        "method\tfraction\trepeat\tP\tR\tF1",
    ]
    for run in report.runs:
        s = run.score
        lines.append(
            f"{run.method}\t{run.fraction:.4f}\t{run.repeat}\t{s.precision:.4f}\t{s.recall:.4f}\t{s.f1:.4f}"
        )
    lines.append("# summary")
    lines.append("method\tfraction\truns\tP\tR\tF1")
    for row in report.summary():
        lines.append(
            f"{row.method}\t{row.fraction:.4f}\t{row.runs}\t{row.precision:.4f}\t{row.recall:.4f}\t{row.f1:.4f}"
        )
    return "\n".join(lines) + "\n"
