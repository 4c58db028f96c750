"""Word error rate, oracle WER over N-best lists, and error-by-position
analysis, with CSV/JSON report emission."""

from __future__ import annotations

import csv
import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .errors import DataError

# Alignment ops: ("match"|"sub", ref_pos, hyp_pos), ("del", ref_pos, None),
# ("ins", None, hyp_pos).
Alignment = list[tuple[str, int | None, int | None]]


def wer(ref: Sequence[str], hyp: Sequence[str]):
    """Minimal-edit word alignment with unit costs.

    Returns (substitutions, deletions, insertions, alignment). The
    backtrace breaks cost ties preferring substitution, then deletion,
    then insertion, so alignments are deterministic.
    """
    if not ref:
        raise DataError("WER requires a non-empty reference")
    lr, lh = len(ref), len(hyp)
    # dist[i][j]: edits aligning ref[:i] to hyp[:j]
    dist = [[0] * (lh + 1) for _ in range(lr + 1)]
    for i in range(1, lr + 1):
        dist[i][0] = i
    dist[0] = list(range(lh + 1))
    for i in range(1, lr + 1):
        row = dist[i]
        prev = dist[i - 1]
        ref_word = ref[i - 1]
        for j in range(1, lh + 1):
            if ref_word == hyp[j - 1]:
                row[j] = prev[j - 1]
            else:
                best = prev[j - 1]
                if prev[j] < best:
                    best = prev[j]
                if row[j - 1] < best:
                    best = row[j - 1]
                row[j] = best + 1

    alignment: Alignment = []
    subs = dels = ins = 0
    i, j = lr, lh
    while i > 0 or j > 0:
        cur = dist[i][j]
        if i > 0 and j > 0 and ref[i - 1] == hyp[j - 1] and cur == dist[i - 1][j - 1]:
            alignment.append(("match", i - 1, j - 1))
            i -= 1
            j -= 1
        elif i > 0 and j > 0 and cur == dist[i - 1][j - 1] + 1:
            alignment.append(("sub", i - 1, j - 1))
            subs += 1
            i -= 1
            j -= 1
        elif i > 0 and cur == dist[i - 1][j] + 1:
            alignment.append(("del", i - 1, None))
            dels += 1
            i -= 1
        else:
            alignment.append(("ins", None, j - 1))
            ins += 1
            j -= 1
    alignment.reverse()
    return subs, dels, ins, alignment


@dataclass
class UtteranceErrors:
    utterance_id: str
    substitutions: int
    deletions: int
    insertions: int
    ref_words: int

    @property
    def errors(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    @property
    def wer(self) -> float:
        return self.errors / self.ref_words


@dataclass
class WerReport:
    utterances: list[UtteranceErrors] = field(default_factory=list)

    def add(self, utterance_id: str, ref: Sequence[str], hyp: Sequence[str]) -> Alignment:
        s, d, i, alignment = wer(ref, hyp)
        self.utterances.append(UtteranceErrors(utterance_id, s, d, i, len(ref)))
        return alignment

    @property
    def substitutions(self) -> int:
        return sum(u.substitutions for u in self.utterances)

    @property
    def deletions(self) -> int:
        return sum(u.deletions for u in self.utterances)

    @property
    def insertions(self) -> int:
        return sum(u.insertions for u in self.utterances)

    @property
    def ref_words(self) -> int:
        return sum(u.ref_words for u in self.utterances)

    @property
    def errors(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    @property
    def wer(self) -> float:
        if not self.utterances:
            raise DataError("WER report has no utterances")
        return self.errors / self.ref_words

    def summary(self) -> dict:
        return {
            "substitutions": self.substitutions,
            "deletions": self.deletions,
            "insertions": self.insertions,
            "errors": self.errors,
            "ref_words": self.ref_words,
            "wer": self.wer,
            "wer_percent": f"{100.0 * self.wer:.2f}",
            "utterances": len(self.utterances),
        }


def oracle_wer(nbest_list) -> tuple[UtteranceErrors, int]:
    """Lowest-error hypothesis in a list (ties go to the better AM rank).

    Returns (errors of the best hypothesis, its 0-based index).
    """
    from .corpus import tokenize  # local import to avoid a cycle

    if nbest_list.reference is None:
        raise DataError(
            f"list {nbest_list.utterance_id!r} has no reference for oracle WER")
    ref = tokenize(nbest_list.reference)
    best = None
    best_idx = 0
    for idx, entry in enumerate(nbest_list.entries):
        s, d, i, _ = wer(ref, tokenize(entry.text))
        cand = UtteranceErrors(nbest_list.utterance_id, s, d, i, len(ref))
        if best is None or cand.errors < best.errors:
            best, best_idx = cand, idx
    return best, best_idx


@dataclass
class PositionErrorHistogram:
    """Substituted/inserted hypothesis words counted by hypothesis position.

    Deletions occupy no hypothesis position and are excluded.
    """

    counts: Counter = field(default_factory=Counter)

    def add_alignment(self, alignment: Alignment) -> None:
        for op, _, hyp_pos in alignment:
            if op in ("sub", "ins"):
                self.counts[hyp_pos] += 1

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def as_rows(self) -> list[tuple[int, int]]:
        return sorted(self.counts.items())


def error_positions(alignment: Alignment) -> PositionErrorHistogram:
    hist = PositionErrorHistogram()
    hist.add_alignment(alignment)
    return hist


# ---------------------------------------------------------------------------
# Report files: CSV table + JSON summary record
# ---------------------------------------------------------------------------

def emit_wer_report(report: WerReport, csv_path, summary_path=None) -> None:
    csv_path = Path(csv_path)
    with open(csv_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["utterance_id", "substitutions", "deletions",
                         "insertions", "ref_words", "wer"])
        for u in report.utterances:
            writer.writerow([u.utterance_id, u.substitutions, u.deletions,
                             u.insertions, u.ref_words, f"{u.wer:.6f}"])
        writer.writerow(["__corpus__", report.substitutions, report.deletions,
                         report.insertions, report.ref_words,
                         f"{report.wer:.6f}"])
    if summary_path is None:
        summary_path = csv_path.with_suffix(".summary.json")
    Path(summary_path).write_text(
        json.dumps(report.summary(), sort_keys=True) + "\n", encoding="utf-8")


def parse_wer_report(csv_path) -> tuple[list[dict], dict]:
    """Round-trip reader for emit_wer_report output."""
    rows = []
    corpus_row = None
    with open(csv_path, newline="", encoding="utf-8") as f:
        for rec in csv.DictReader(f):
            parsed = {
                "utterance_id": rec["utterance_id"],
                "substitutions": int(rec["substitutions"]),
                "deletions": int(rec["deletions"]),
                "insertions": int(rec["insertions"]),
                "ref_words": int(rec["ref_words"]),
                "wer": float(rec["wer"]),
            }
            if rec["utterance_id"] == "__corpus__":
                corpus_row = parsed
            else:
                rows.append(parsed)
    return rows, corpus_row


def emit_histogram(hist: PositionErrorHistogram, csv_path,
                   summary_path=None) -> None:
    csv_path = Path(csv_path)
    with open(csv_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["position", "error_count"])
        for pos, count in hist.as_rows():
            writer.writerow([pos, count])
    if summary_path is None:
        summary_path = csv_path.with_suffix(".summary.json")
    Path(summary_path).write_text(
        json.dumps({"total_errors": hist.total,
                    "positions": len(hist.counts)}, sort_keys=True) + "\n",
        encoding="utf-8")


def parse_histogram(csv_path) -> PositionErrorHistogram:
    hist = PositionErrorHistogram()
    with open(csv_path, newline="", encoding="utf-8") as f:
        for rec in csv.DictReader(f):
            hist.counts[int(rec["position"])] = int(rec["error_count"])
    return hist
