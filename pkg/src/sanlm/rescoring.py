"""N-best hypothesis rescoring.

Combined score = (1 - lambda) * acoustic + lambda * LM (both natural-log
domain, higher is better). Two LMs may first be mixed with weight alpha:
(1 - alpha) * unidirectional + alpha * bidirectional. The interpolation
weight is picked by sweeping a grid against corpus WER on development
lists.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from .corpus import tokenize
from .errors import DataError, ParameterError
from .evaluation import wer


@dataclass
class NBestEntry:
    text: str
    am_score: float

    def __post_init__(self):
        if not math.isfinite(self.am_score):
            raise DataError(f"non-finite acoustic score for {self.text!r}")


@dataclass
class NBestList:
    utterance_id: str
    entries: list[NBestEntry]
    reference: str | None = None

    def __post_init__(self):
        if not self.entries:
            raise DataError(f"empty N-best list for {self.utterance_id!r}")


@dataclass
class RescoreConfig:
    lam: float = 0.0
    alpha: float | None = None
    grid: Sequence[float] = field(
        default_factory=lambda: [round(0.05 * i, 2) for i in range(21)])

    def __post_init__(self):
        _check_weight(self.lam, "lambda")
        if self.alpha is not None:
            _check_weight(self.alpha, "alpha")
        for g in self.grid:
            _check_weight(g, "grid lambda")


@dataclass
class ScoredHypothesis:
    text: str
    am_score: float
    lm_score: float
    combined: float
    am_rank: int   # 1-based position in the input list
    rank: int      # 1-based position after rescoring


def _check_weight(w: float, name: str):
    if not 0.0 <= w <= 1.0:
        raise ParameterError(f"{name} must be in [0, 1], got {w}")


def combine(am_score: float, lm_score: float, lam: float) -> float:
    """(1 - lambda) * AM + lambda * LM."""
    _check_weight(lam, "lambda")
    return (1.0 - lam) * am_score + lam * lm_score


def combine_lms(uni_score: float, bi_score: float, alpha: float) -> float:
    """(1 - alpha) * uniLM + alpha * biLM."""
    _check_weight(alpha, "alpha")
    return (1.0 - alpha) * uni_score + alpha * bi_score


Scorer = Callable[[str], float]


def make_lm_scorer(uni=None, bi=None, alpha: float | None = None) -> Scorer:
    """Wrap sentence scorers into a text -> lm_score function.

    With both models, alpha mixes them; with one, it is used alone.
    """
    if uni is not None and bi is not None:
        if alpha is None:
            raise ParameterError("alpha is required when both LMs are supplied")
        _check_weight(alpha, "alpha")
        return lambda text: combine_lms(uni(text).total, bi(text).total, alpha)
    if bi is not None:
        return lambda text: bi(text).total
    if uni is not None:
        return lambda text: uni(text).total
    raise ParameterError("at least one LM scorer is required")


def lm_scores_for_list(nbest: NBestList, scorer: Scorer) -> list[float]:
    return [scorer(entry.text) for entry in nbest.entries]


def rescore_nbest(nbest: NBestList, lm_scores: Sequence[float],
                  lam: float) -> list[ScoredHypothesis]:
    """Rank entries by combined score; ties go to the better AM rank."""
    if len(lm_scores) != len(nbest.entries):
        raise ParameterError("one LM score per hypothesis is required")
    scored = [
        ScoredHypothesis(e.text, e.am_score, lm, combine(e.am_score, lm, lam),
                         am_rank=i + 1, rank=0)
        for i, (e, lm) in enumerate(zip(nbest.entries, lm_scores))
    ]
    scored.sort(key=lambda h: (-h.combined, h.am_rank, h.text))
    for i, h in enumerate(scored):
        h.rank = i + 1
    return scored


def sweep_lambda(dev_lists: Sequence[NBestList],
                 scorer_or_scores, grid: Sequence[float] | None = None):
    """Pick the grid lambda minimizing corpus WER of the rescored top-1.

    scorer_or_scores is either a text -> lm_score callable (hypotheses are
    scored once, then reused for every lambda) or a precomputed list of
    per-list LM score lists. Returns (best_lambda, table) where table rows
    are {"lambda", "wer", "errors", "ref_words"}; ties prefer smaller lambda.
    """
    if grid is None:
        grid = RescoreConfig().grid
    if not grid:
        raise ParameterError("lambda grid is empty")
    if not dev_lists:
        raise DataError("no development lists supplied")
    for nl in dev_lists:
        if nl.reference is None:
            raise DataError(f"list {nl.utterance_id!r} has no reference")
    if callable(scorer_or_scores):
        all_scores = [lm_scores_for_list(nl, scorer_or_scores) for nl in dev_lists]
    else:
        all_scores = list(scorer_or_scores)

    table = []
    best = None
    for lam in grid:
        _check_weight(lam, "lambda")
        errors = 0
        ref_words = 0
        for nl, scores in zip(dev_lists, all_scores):
            top = rescore_nbest(nl, scores, lam)[0]
            s, d, i, _ = wer(tokenize(nl.reference), tokenize(top.text))
            errors += s + d + i
            ref_words += len(tokenize(nl.reference))
        corpus_wer = errors / ref_words
        table.append({"lambda": lam, "wer": corpus_wer, "errors": errors,
                      "ref_words": ref_words})
        if best is None or corpus_wer < best[1]:
            best = (lam, corpus_wer)
    return best[0], table


# ---------------------------------------------------------------------------
# N-best file format: one JSON record per line
# ---------------------------------------------------------------------------

def load_nbest(path) -> list[NBestList]:
    """Read JSON-lines records: utterance_id, optional reference, hypotheses."""
    p = Path(path)
    if not p.exists():
        raise DataError(f"N-best file not found: {p}")
    lists = []
    for lineno, line in enumerate(p.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            lists.append(NBestList(
                utterance_id=rec["utterance_id"],
                reference=rec.get("reference"),
                entries=[NBestEntry(h["text"], float(h["am_score"]))
                         for h in rec["hypotheses"]],
            ))
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{p}:{lineno}: bad N-best record: {exc}") from exc
    if not lists:
        raise DataError(f"N-best file is empty: {p}")
    return lists


def save_nbest(lists: Sequence[NBestList], path,
               scored: dict[str, list[ScoredHypothesis]] | None = None) -> None:
    """Write lists back out; with `scored`, hypotheses carry rescoring fields."""
    with open(path, "w", encoding="utf-8") as f:
        for nl in lists:
            rec: dict = {"utterance_id": nl.utterance_id}
            if nl.reference is not None:
                rec["reference"] = nl.reference
            if scored is not None:
                rec["hypotheses"] = [
                    {"text": h.text, "am_score": h.am_score,
                     "lm_score": h.lm_score, "combined": h.combined,
                     "am_rank": h.am_rank, "rank": h.rank}
                    for h in scored[nl.utterance_id]
                ]
            else:
                rec["hypotheses"] = [{"text": e.text, "am_score": e.am_score}
                                     for e in nl.entries]
            f.write(json.dumps(rec, sort_keys=True) + "\n")
