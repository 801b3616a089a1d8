"""Objective, selection, and survival scores, plus the score-table pipeline.

Selection strategies consume a ScoreTable: the per-individual scores after
the optional normalize / round / rank transforms, grouped by distinct value.
Survival similarity scores combine score distance and genotype distance and
flow through the same pipeline.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .genome import Genotype, ncd
from .regress import RegressionModel

__all__ = [
    "ObjectiveSpec",
    "ScoreTable",
    "NormalizationState",
    "objective_score",
    "selection_scores",
    "selection_direction",
    "transform_scores",
    "survival_scores",
    "round_significant",
    "OBJECTIVE_KINDS",
    "SELECTION_AGGREGATES",
    "WORST_MIN_SCORE",
    "SIMILARITY_CAP",
]

logger = logging.getLogger(__name__)

OBJECTIVE_KINDS = ("se", "r2", "mt", "hr")
SELECTION_AGGREGATES = ("nalive", "min", "max", "avg")

# score handed to genotypes that sit in no valid regression
WORST_MIN_SCORE = 1e12
# pair similarity when both distance terms vanish (duplicates)
SIMILARITY_CAP = 1e12

_DEFAULT_S = {"se": 2.0, "r2": 1.0, "mt": 1.0, "hr": 2.0}


@dataclass(frozen=True)
class ObjectiveSpec:
    """One of the four regression objectives with its exponent.

    se: error sum (minimize); r2: determination power (maximize);
    mt: power mean of slope |t| significances (maximize);
    hr: entropy of determination in bits (minimize).
    """

    kind: str
    s: float | None = None

    def __post_init__(self):
        if self.kind not in OBJECTIVE_KINDS:
            raise ValueError(f"unknown objective kind {self.kind!r}")
        if self.s is None:
            object.__setattr__(self, "s", _DEFAULT_S[self.kind])
        if self.s <= 0:
            raise ValueError("objective exponent must be positive")
        if self.kind == "hr" and self.s == 1.0:
            raise ValueError("hr objective is undefined at s = 1")

    @property
    def direction(self) -> str:
        return "min" if self.kind in ("se", "hr") else "max"


def objective_score(model: RegressionModel, spec: ObjectiveSpec) -> float:
    """Evaluate one fitted model under the chosen objective."""
    s = spec.s
    if spec.kind == "se":
        return model.error_sum(s)
    if spec.kind == "r2":
        return model.r2**s
    if spec.kind == "mt":
        ts = model.slope_t_stats
        if not ts:
            raise ValueError("mt objective needs slope t statistics")
        return (sum(abs(t) ** s for t in ts) / len(ts)) ** (1.0 / s)
    # hr: entropy of the (r2, 1-r2) split, in bits
    r2 = model.r2
    return math.log2(r2**s + (1.0 - r2) ** s) / (1.0 - s)


def worst_score(direction: str) -> float:
    return 0.0 if direction == "max" else WORST_MIN_SCORE


def selection_direction(aggregate: str, objective: ObjectiveSpec) -> str:
    """Direction of the per-genotype selection score."""
    if aggregate not in SELECTION_AGGREGATES:
        raise ValueError(f"unknown selection aggregate {aggregate!r}")
    return "max" if aggregate == "nalive" else objective.direction


def selection_scores(
    n_genotypes: int,
    valid_models: Sequence[tuple[tuple[int, ...], RegressionModel]],
    aggregate: str,
    objective: ObjectiveSpec,
) -> np.ndarray:
    """Per-genotype score over the valid regressions that contain it.

    ``valid_models`` pairs each model with the sample indices of its members.
    Genotypes contained in no valid model get the worst score for the active
    direction, so selection disfavors them and survival removal favors them.
    """
    if aggregate not in SELECTION_AGGREGATES:
        raise ValueError(f"unknown selection aggregate {aggregate!r}")
    direction = selection_direction(aggregate, objective)
    if not valid_models:
        logger.warning("no valid regressions; all selection scores worst-valued")
        return np.full(n_genotypes, worst_score(direction))

    if aggregate == "nalive":
        counts = np.zeros(n_genotypes)
        for members, _ in valid_models:
            for i in members:
                counts[i] += 1.0
        return counts

    per_genotype: list[list[float]] = [[] for _ in range(n_genotypes)]
    for members, model in valid_models:
        value = objective_score(model, objective)
        for i in members:
            per_genotype[i].append(value)
    out = np.empty(n_genotypes)
    for i, values in enumerate(per_genotype):
        if not values:
            out[i] = worst_score(direction)
        elif aggregate == "min":
            out[i] = min(values)
        elif aggregate == "max":
            out[i] = max(values)
        else:
            out[i] = sum(values) / len(values)
    return out


@dataclass
class NormalizationState:
    """Running min/max references mapping scores onto a fixed [n0, n1] scale.

    The references are updated with each generation's extremes and persist
    for the whole evolution, so scores stay comparable across generations.
    """

    n0: float
    n1: float
    global_min: float | None = None
    global_max: float | None = None

    def __post_init__(self):
        if not self.n0 < self.n1:
            raise ValueError("need n0 < n1")

    def update(self, lo: float, hi: float) -> None:
        self.global_min = lo if self.global_min is None else min(self.global_min, lo)
        self.global_max = hi if self.global_max is None else max(self.global_max, hi)


@dataclass(frozen=True)
class ScoreTable:
    """Scores aligned with sample indices, grouped by distinct value."""

    fs: np.ndarray
    distinct: np.ndarray              # ascending
    counts: np.ndarray                # occurrences per distinct value
    direction: str
    groups: tuple[tuple[int, ...], ...]  # sample indices per distinct value
    degenerate: bool = False

    @property
    def size(self) -> int:
        return int(self.fs.size)


def round_significant(x: float, digits: int) -> float:
    """Round to a number of significant digits."""
    if digits < 1:
        raise ValueError("need at least one significant digit")
    if x == 0.0 or not math.isfinite(x):
        return x
    return round(x, digits - 1 - math.floor(math.log10(abs(x))))


def _midranks(values: np.ndarray) -> np.ndarray:
    """Spearman mid-ranks (1-based, ties averaged)."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size)
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def transform_scores(
    fs,
    state: NormalizationState | None = None,
    digits: int | None = None,
    use_ranks: bool = False,
    direction: str = "max",
) -> ScoreTable:
    """Run the score pipeline and group the result.

    Order: normalization against the running references, rounding to
    significant digits, tie-aware integer ranks (doubled mid-ranks shifted to
    start at 1), then sorting into distinct values with counts. Every step
    preserves the score ordering.
    """
    if direction not in ("min", "max"):
        raise ValueError(f"direction must be 'min' or 'max', got {direction!r}")
    values = np.array(fs, dtype=float)
    if values.size == 0:
        raise ValueError("empty score vector")
    if not np.all(np.isfinite(values)):
        raise ValueError("scores must be finite")

    degenerate = False
    if state is not None:
        state.update(float(values.min()), float(values.max()))
        span = state.global_max - state.global_min
        if span == 0.0:
            logger.warning("degenerate normalization: all scores map to n0")
            values = np.full_like(values, state.n0)
            degenerate = True
        else:
            values = state.n0 + (values - state.global_min) * (
                (state.n1 - state.n0) / span
            )
    if digits is not None:
        values = np.array([round_significant(v, digits) for v in values])
    if use_ranks:
        values = 2.0 * _midranks(values) - 1.0

    distinct, counts = np.unique(values, return_counts=True)
    by_value: dict[float, list[int]] = {v: [] for v in distinct}
    for i, v in enumerate(values):
        by_value[v].append(i)
    groups = tuple(tuple(by_value[v]) for v in distinct)
    return ScoreTable(values, distinct, counts, direction, groups, degenerate)


def survival_scores(
    genotypes: Sequence[Genotype],
    fs,
    q: float,
    r: float,
    cap: float = SIMILARITY_CAP,
) -> np.ndarray:
    """Similarity of each individual to the rest of the sample.

    Pair similarity is 2 / (|f_i - f_j|^q + (ncd/nc)^r), capped when both
    distance terms vanish (duplicate genotypes with equal scores); an
    individual's score is the worst case (minimum) over its pairings. High
    values mark redundant individuals, the preferred removal targets.
    """
    if q <= 0 or r <= 0:
        raise ValueError("survival exponents must be positive")
    values = np.asarray(fs, dtype=float)
    p = len(genotypes)
    if p < 2:
        raise ValueError("survival scores need a sample of at least 2")
    if values.shape != (p,):
        raise ValueError("one score per genotype required")
    nc = genotypes[0].topology.gene_count
    out = np.full(p, math.inf)
    for i in range(p):
        for j in range(i + 1, p):
            vsp = abs(values[i] - values[j]) ** q
            vsg = (ncd(genotypes[i], genotypes[j]) / nc) ** r
            denom = vsp + vsg
            vs = cap if denom == 0.0 else min(cap, 2.0 / denom)
            if vs < out[i]:
                out[i] = vs
            if vs < out[j]:
                out[j] = vs
    return out
