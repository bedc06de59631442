"""ROUGE-1 and ROUGE-L with per-category aggregation over validation items.

ROUGE-1 is clipped unigram overlap, ROUGE-L is longest common subsequence,
both reported as precision/recall/F1 with the 0-convention on empty input.
Items score in three categories: the predicted date alone, the predicted
cause alone, and the full answer sentence.
"""

from __future__ import annotations

from dataclasses import dataclass
from collections import Counter
from typing import Mapping, Sequence

from .errors import EmptyEvaluation
from .postprocess import ExtractedPrediction, NormalizationConfig, tokenize

CATEGORIES = ("time", "cause", "full")


@dataclass(frozen=True)
class RougeScore:
    precision: float
    recall: float
    f1: float

    def __post_init__(self):
        for value in (self.precision, self.recall, self.f1):
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"score component {value} outside [0, 1]")


ZERO_SCORE = RougeScore(0.0, 0.0, 0.0)


def _prf(overlap: float, candidate_len: int, reference_len: int) -> RougeScore:
    if candidate_len == 0 or reference_len == 0:
        return ZERO_SCORE
    precision = overlap / candidate_len
    recall = overlap / reference_len
    if precision + recall == 0.0:
        return RougeScore(precision, recall, 0.0)
    return RougeScore(precision, recall, 2 * precision * recall / (precision + recall))


def rouge_1(candidate: Sequence[str], reference: Sequence[str]) -> RougeScore:
    """Clipped unigram overlap: each token counts at most its reference count."""
    cand_counts = Counter(candidate)
    ref_counts = Counter(reference)
    overlap = sum(min(count, ref_counts[token]) for token, count in cand_counts.items())
    return _prf(overlap, len(candidate), len(reference))


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    previous = [0] * (len(b) + 1)
    for token_a in a:
        current = [0]
        for j, token_b in enumerate(b, start=1):
            if token_a == token_b:
                current.append(previous[j - 1] + 1)
            else:
                current.append(max(previous[j], current[j - 1]))
        previous = current
    return previous[len(b)]


def rouge_l(candidate: Sequence[str], reference: Sequence[str]) -> RougeScore:
    """Longest-common-subsequence overlap with the balanced F-measure."""
    return _prf(lcs_length(candidate, reference), len(candidate), len(reference))


@dataclass(frozen=True)
class TruthTarget:
    """What the item should have answered, in all three scored forms."""

    target_date: str
    target_cause: str
    reference_sentence: str


def score_item(
    pred: ExtractedPrediction, truth: TruthTarget, config: NormalizationConfig
) -> dict[str, tuple[RougeScore, RougeScore]]:
    """Score one prediction in every category.

    Absent fields become empty candidates and score zero; a prediction
    with nothing extracted scores zero across the board, full category
    included, but is still counted.
    """
    time_candidate = tokenize(pred.time_text or "", config)
    cause_candidate = tokenize(pred.cause_text or "", config)
    if pred.extraction_status == "none":
        full_candidate: list[str] = []
    else:
        full_candidate = tokenize(pred.full_text, config)

    pairs = {
        "time": (time_candidate, tokenize(truth.target_date, config)),
        "cause": (cause_candidate, tokenize(truth.target_cause, config)),
        "full": (full_candidate, tokenize(truth.reference_sentence, config)),
    }
    return {
        category: (rouge_1(cand, ref), rouge_l(cand, ref))
        for category, (cand, ref) in pairs.items()
    }


@dataclass(frozen=True)
class ScoredItem:
    system_id: str
    index: int
    window_index: int | None
    extraction_status: str
    scores: Mapping[str, tuple[RougeScore, RougeScore]]


@dataclass(frozen=True)
class CategoryReport:
    category: str
    rouge1: RougeScore
    rougeL: RougeScore
    item_count: int
    items: tuple[ScoredItem, ...]


def _mean_score(scores: Sequence[RougeScore]) -> RougeScore:
    n = len(scores)
    return RougeScore(
        precision=sum(s.precision for s in scores) / n,
        recall=sum(s.recall for s in scores) / n,
        f1=sum(s.f1 for s in scores) / n,
    )


def aggregate(items: Sequence[ScoredItem]) -> list[CategoryReport]:
    """Arithmetic mean per category and metric; items kept for the report."""
    if not items:
        raise EmptyEvaluation("no items to aggregate")
    reports = []
    for category in CATEGORIES:
        r1 = _mean_score([item.scores[category][0] for item in items])
        rl = _mean_score([item.scores[category][1] for item in items])
        reports.append(
            CategoryReport(
                category=category,
                rouge1=r1,
                rougeL=rl,
                item_count=len(items),
                items=tuple(items),
            )
        )
    return reports
