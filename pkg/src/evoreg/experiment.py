"""The selection x survival strategy grid, genotype bookkeeping over
improving generations, and the homogeneity analysis across strategy pairs.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field, replace

from .descriptors import Dataset
from .engine import EvolutionConfig, RunResult, run
from .genome import GeneticTopology
from .stats import ChiSquareReport, ContingencyTable, chi2_homogeneity

__all__ = [
    "STRATEGY_LABELS",
    "MEASURES",
    "CellStats",
    "GridAggregate",
    "run_grid",
    "accumulate_run",
    "homogeneity_analysis",
    "render_grid_report",
]

logger = logging.getLogger(__name__)

# row/column order of the strategy pairs in all reports
STRATEGY_LABELS = ("P", "T", "D")
_LABEL_TO_METHOD = {
    "P": "proportional",
    "T": "tournament",
    "D": "deterministic",
}

MEASURES = ("num", "occ", "par", "top_num", "top_occ", "top_par")


@dataclass
class CellStats:
    """Genotype counts over improving generations, accumulated across runs."""

    runs: int = 0
    occurrences: Counter = field(default_factory=Counter)
    participations: Counter = field(default_factory=Counter)
    error: str | None = None

    @property
    def num(self) -> int:
        return len(self.occurrences)

    @property
    def occ(self) -> int:
        return sum(self.occurrences.values())

    @property
    def par(self) -> int:
        return sum(self.participations.values())

    def top(self, threshold: int) -> tuple[int, int, int]:
        """(num, occ, par) restricted to genotypes with >= threshold
        occurrences."""
        keys = [g for g, c in self.occurrences.items() if c >= threshold]
        return (
            len(keys),
            sum(self.occurrences[g] for g in keys),
            sum(self.participations[g] for g in keys),
        )

    def measure(self, measure: str, threshold: int) -> int:
        if measure == "num":
            return self.num
        if measure == "occ":
            return self.occ
        if measure == "par":
            return self.par
        top = self.top(threshold)
        return {"top_num": top[0], "top_occ": top[1], "top_par": top[2]}[measure]


@dataclass
class GridAggregate:
    """Per-strategy-pair statistics; keys are (selection, survival) labels."""

    cells: dict[tuple[str, str], CellStats]
    threshold: int = 23
    runs_per_cell: int = 0
    master_seed: int = 0

    def cell(self, selection: str, survival: str) -> CellStats:
        return self.cells[(selection, survival)]

    def contingency(self, measure: str) -> ContingencyTable:
        if measure not in MEASURES:
            raise ValueError(f"unknown measure {measure!r}")
        counts = []
        for sel in STRATEGY_LABELS:
            row = []
            for sur in STRATEGY_LABELS:
                cell = self.cells[(sel, sur)]
                if cell.error is not None:
                    raise ValueError(
                        f"cell {sel}:{sur} failed: {cell.error}"
                    )
                value = cell.measure(measure, self.threshold)
                if value == 0:
                    raise ValueError(
                        f"cell {sel}:{sur} has zero {measure}; "
                        "homogeneity table needs positive margins"
                    )
                row.append(value)
            counts.append(row)
        return ContingencyTable(counts, STRATEGY_LABELS, STRATEGY_LABELS)


def accumulate_run(cell: CellStats, result: RunResult) -> None:
    """Fold one run's improving-generation records into a cell.

    A genotype counts once per improving generation it sits in the sample of
    (occurrences), plus its memberships in that generation's valid
    regressions (participations).
    """
    cell.runs += 1
    for rec in result.records:
        if not rec.improved:
            continue
        for slot, g in enumerate(rec.sample_genotypes):
            cell.occurrences[g] += 1
            cell.participations[g] += rec.participations[slot]


def run_grid(
    base_cfg: EvolutionConfig,
    topology: GeneticTopology,
    provider_factory,
    ds: Dataset,
    runs_per_cell: int,
    master_seed: int,
    threshold: int = 23,
) -> GridAggregate:
    """Run every selection x survival pair `runs_per_cell` times.

    Seeds derive deterministically from the master seed and the global run
    index, so the aggregate does not depend on execution order. A failing
    run aborts its cell (the error is recorded) without touching other cells.
    ``provider_factory`` is called once per run to give each run a fresh
    provider (providers may cache; the factory may return a shared one).
    """
    if runs_per_cell < 1:
        raise ValueError("runs_per_cell must be at least 1")
    cells: dict[tuple[str, str], CellStats] = {}
    cell_index = 0
    for sel in STRATEGY_LABELS:
        for sur in STRATEGY_LABELS:
            cell = CellStats()
            cells[(sel, sur)] = cell
            for run_i in range(runs_per_cell):
                seed = master_seed + cell_index * runs_per_cell + run_i
                cfg = replace(
                    base_cfg,
                    selection=replace(
                        base_cfg.selection, method=_LABEL_TO_METHOD[sel]
                    ),
                    survival=replace(
                        base_cfg.survival, method=_LABEL_TO_METHOD[sur]
                    ),
                    seed=seed,
                )
                try:
                    result = run(cfg, topology, provider_factory(), ds)
                except Exception as exc:  # cell-local failure
                    cell.error = f"run seed={seed}: {exc}"
                    logger.error("cell %s:%s aborted: %s", sel, sur, cell.error)
                    break
                accumulate_run(cell, result)
            cell_index += 1
    return GridAggregate(cells, threshold, runs_per_cell, master_seed)


def homogeneity_analysis(
    source: GridAggregate | ContingencyTable,
    measure: str | None = None,
    alpha: float = 0.05,
) -> ChiSquareReport:
    """Chi-square homogeneity of one grid measure (rows = selection,
    columns = survival), or of a ready-made contingency table."""
    if isinstance(source, ContingencyTable):
        return chi2_homogeneity(source, alpha)
    if measure is None:
        raise ValueError("measure required when analysing a grid aggregate")
    return chi2_homogeneity(source.contingency(measure), alpha)


_MEASURE_TITLES = {
    "num": "distinct genotypes in improving generations",
    "occ": "genotype occurrences in improving generations",
    "par": "participations in valid regressions",
    "top_num": "distinct genotypes above the occurrence threshold",
    "top_occ": "occurrences of genotypes above the threshold",
    "top_par": "participations of genotypes above the threshold",
}


def render_grid_report(agg: GridAggregate, alpha: float = 0.05) -> str:
    """Human-readable per-cell counts plus the homogeneity verdicts."""
    from .stats import format_report

    lines = [
        f"strategy grid: {agg.runs_per_cell} runs per cell, "
        f"master seed {agg.master_seed}, "
        f"occurrence threshold {agg.threshold}",
        "",
        "cell     runs  num     occ     par     "
        f"T{agg.threshold}num  T{agg.threshold}occ  T{agg.threshold}par",
    ]
    for sel in STRATEGY_LABELS:
        for sur in STRATEGY_LABELS:
            cell = agg.cells[(sel, sur)]
            if cell.error is not None:
                lines.append(f"{sel}:{sur}      FAILED: {cell.error}")
                continue
            tnum, tocc, tpar = cell.top(agg.threshold)
            lines.append(
                f"{sel}:{sur}      {cell.runs:<5d} {cell.num:<7d} "
                f"{cell.occ:<7d} {cell.par:<7d} {tnum:<7d} {tocc:<7d} {tpar}"
            )
    for measure in MEASURES:
        lines.append("")
        lines.append(f"== homogeneity of {_MEASURE_TITLES[measure]} ==")
        try:
            report = homogeneity_analysis(agg, measure, alpha)
        except ValueError as exc:
            lines.append(f"not testable: {exc}")
            continue
        lines.append(format_report(report).rstrip("\n"))
    return "\n".join(lines) + "\n"
