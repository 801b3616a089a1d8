"""Phenotype providers and the viability filter.

A provider maps genotypes to phenotypes (one descriptor value per molecule).
Two implementations: an exact-lookup table loaded from CSV, and a seeded
synthetic generator whose cells are uniform on an interval, with an optional
planted mode where designated genotypes track the activity linearly.
"""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .genome import GeneticTopology, Genotype
from . import stats

__all__ = [
    "Dataset",
    "Phenotype",
    "ViabilityPolicy",
    "ViabilityReport",
    "PlantedSignal",
    "TableProvider",
    "SyntheticProvider",
    "check_viability",
    "load_activity",
    "write_activity",
    "load_descriptor_table",
    "write_descriptor_table",
    "DescriptorDataError",
]


class DescriptorDataError(ValueError):
    """Raised for malformed activity or descriptor files."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Dataset:
    """The molecule set and its observed activity vector."""

    molecule_ids: tuple[str, ...]
    activity: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "activity", _readonly(self.activity))
        m = len(self.molecule_ids)
        if m < 3:
            raise ValueError("dataset needs at least 3 molecules")
        if self.activity.shape != (m,):
            raise ValueError("activity length does not match molecule count")
        if not np.all(np.isfinite(self.activity)):
            raise ValueError("activity values must be finite")
        if len(set(self.molecule_ids)) != m:
            raise ValueError("molecule ids must be distinct")

    @property
    def size(self) -> int:
        return len(self.molecule_ids)


@dataclass(frozen=True)
class Phenotype:
    """Realized descriptor values of a genotype over the molecule set."""

    values: np.ndarray
    source_genotype: Genotype

    def __post_init__(self):
        object.__setattr__(self, "values", _readonly(self.values))


@dataclass(frozen=True)
class ViabilityPolicy:
    """Optional extra screens on top of the finite/non-constant core rules."""

    min_cv: float | None = None
    jb_alpha: float | None = None
    min_simple_r2: float | None = None

    def __post_init__(self):
        if self.min_cv is not None and self.min_cv < 0:
            raise ValueError("min_cv must be nonnegative")
        for name in ("jb_alpha", "min_simple_r2"):
            v = getattr(self, name)
            if v is not None and not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")


@dataclass(frozen=True)
class ViabilityReport:
    """Per-criterion outcome; None marks a criterion that was not applied."""

    finite: bool
    non_constant: bool
    cv_ok: bool | None
    jb_ok: bool | None
    simple_r2_ok: bool | None

    @property
    def viable(self) -> bool:
        checks = (self.finite, self.non_constant, self.cv_ok, self.jb_ok,
                  self.simple_r2_ok)
        return all(c is not False for c in checks)

    def failed_criteria(self) -> tuple[str, ...]:
        names = ("finite", "non_constant", "cv", "jarque_bera", "simple_r2")
        flags = (self.finite, self.non_constant, self.cv_ok, self.jb_ok,
                 self.simple_r2_ok)
        return tuple(n for n, f in zip(names, flags) if f is False)


def simple_r2(x: np.ndarray, y: np.ndarray) -> float:
    """Squared Pearson correlation; 0 when either side has no variance."""
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        return 0.0
    sxy = float(dx @ dy)
    return min(1.0, sxy * sxy / (sxx * syy))


def check_viability(
    p: Phenotype, ds: Dataset, policy: ViabilityPolicy
) -> ViabilityReport:
    """Apply the viability rules: finite everywhere, not all identical, and
    any configured optional screens."""
    v = p.values
    if v.shape != ds.activity.shape:
        raise ValueError("phenotype length does not match dataset")
    finite = bool(np.all(np.isfinite(v)))
    non_constant = finite and bool(np.any(v != v[0]))
    cv_ok = jb_ok = r2_ok = None
    if finite:
        if policy.min_cv is not None:
            mean = float(v.mean())
            sd = float(v.std())
            if mean == 0.0:
                # zero mean with any spread is maximally variable
                cv_ok = sd > 0.0
            else:
                cv_ok = abs(sd / mean) >= policy.min_cv
        if policy.jb_alpha is not None:
            if non_constant and v.size >= 4:
                _, pval = stats.jarque_bera(v)
                jb_ok = pval >= policy.jb_alpha
            else:
                jb_ok = False
        if policy.min_simple_r2 is not None:
            r2_ok = simple_r2(v, ds.activity) >= policy.min_simple_r2
    return ViabilityReport(finite, non_constant, cv_ok, jb_ok, r2_ok)


# --- providers ---------------------------------------------------------------


class TableProvider:
    """Exact lookup in a descriptor table keyed by rendered genotype string."""

    def __init__(self, topology: GeneticTopology, table: dict[str, np.ndarray]):
        self.topology = topology
        self._table = {k: _readonly(v) for k, v in table.items()}

    def provide(self, genotype: Genotype) -> Phenotype | None:
        values = self._table.get(genotype.render())
        if values is None:
            return None
        return Phenotype(values, genotype)

    def known_genotypes(self) -> list[Genotype]:
        return [self.topology.parse(key) for key in self._table]

    def __len__(self) -> int:
        return len(self._table)


@dataclass(frozen=True)
class PlantedSignal:
    """Linear-in-activity cell: value = intercept + slope*Y + noise_sd*e."""

    slope: float = 1.0
    intercept: float = 0.0
    noise_sd: float = 0.0


class SyntheticProvider:
    """Deterministic synthetic descriptors for any genotype of the topology.

    Each genotype gets its own counter-based stream keyed by a hash of
    (seed, rendered genotype), so a cell's value depends only on the seed,
    the genotype, and the molecule index. Non-planted cells are uniform on
    [low, high); planted genotypes produce a linear function of the activity
    plus seeded gaussian noise.
    """

    def __init__(
        self,
        topology: GeneticTopology,
        dataset: Dataset,
        seed: int,
        low: float = 0.0,
        high: float = 1.0,
        planted: dict[str, PlantedSignal] | None = None,
    ):
        if not low < high:
            raise ValueError("need low < high for the uniform interval")
        self.topology = topology
        self.dataset = dataset
        self.seed = int(seed)
        self.low = float(low)
        self.high = float(high)
        self.planted = dict(planted or {})
        self._cache: dict[str, Phenotype] = {}

    def _stream(self, key: str) -> np.random.Generator:
        digest = hashlib.blake2b(
            f"{self.seed}|{key}".encode(), digest_size=16
        ).digest()
        words = np.frombuffer(digest, dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=words))

    def provide(self, genotype: Genotype) -> Phenotype:
        key = genotype.render()
        cached = self._cache.get(key)
        if cached is not None:
            return Phenotype(cached.values, genotype)
        rng = self._stream(key)
        m = self.dataset.size
        signal = self.planted.get(key)
        if signal is None:
            values = rng.uniform(self.low, self.high, m)
        else:
            values = signal.intercept + signal.slope * self.dataset.activity
            if signal.noise_sd > 0.0:
                values = values + signal.noise_sd * rng.standard_normal(m)
        ph = Phenotype(values, genotype)
        self._cache[key] = ph
        return ph

    def known_genotypes(self) -> None:
        return None  # defined on the whole space


def pick_planted_genotypes(
    topology: GeneticTopology, count: int, seed: int
) -> list[str]:
    """Deterministically designate `count` distinct genotypes for planting."""
    import random as _random

    from .genome import genome_size, random_genotype

    if count > genome_size(topology):
        raise ValueError("cannot plant more genotypes than the space holds")
    rng = _random.Random(seed)
    chosen: list[str] = []
    seen: set[str] = set()
    while len(chosen) < count:
        key = random_genotype(topology, rng).render()
        if key not in seen:
            seen.add(key)
            chosen.append(key)
    return chosen


# --- file formats -------------------------------------------------------------
#
# activity CSV:    header "molecule,activity", one molecule per row
# descriptor CSV:  header "genotype,<mol_1>,...,<mol_m>", one genotype per row


def load_activity(path) -> Dataset:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ["molecule", "activity"]:
        raise DescriptorDataError(f"{path}: expected header 'molecule,activity'")
    ids = []
    values = []
    for r in rows[1:]:
        if not r or not any(x.strip() for x in r):
            continue
        if len(r) != 2:
            raise DescriptorDataError(f"{path}: malformed row {r!r}")
        ids.append(r[0].strip())
        try:
            values.append(float(r[1]))
        except ValueError as exc:
            raise DescriptorDataError(
                f"{path}: non-numeric activity for {r[0]!r}"
            ) from exc
    return Dataset(tuple(ids), np.array(values))


def write_activity(ds: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["molecule", "activity"])
        for mol, y in zip(ds.molecule_ids, ds.activity):
            w.writerow([mol, repr(float(y))])


def _parse_cell(token: str) -> float:
    t = token.strip().lower()
    if t in ("nan", "+nan", "-nan"):
        return math.nan
    if t in ("inf", "+inf", "infinity", "+infinity"):
        return math.inf
    if t in ("-inf", "-infinity"):
        return -math.inf
    return float(token)


def load_descriptor_table(path, topology: GeneticTopology, ds: Dataset) -> TableProvider:
    """Load a wide descriptor CSV and validate it against the dataset.

    Columns must agree with the dataset's molecule ids (same order); NaN/Inf
    tokens are allowed and left to the viability filter.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DescriptorDataError(f"{path}: empty descriptor table")
    header = [c.strip() for c in rows[0]]
    if not header or header[0] != "genotype":
        raise DescriptorDataError(f"{path}: first header column must be 'genotype'")
    if tuple(header[1:]) != ds.molecule_ids:
        raise DescriptorDataError(
            f"{path}: molecule columns do not match the activity file"
        )
    table: dict[str, np.ndarray] = {}
    for r in rows[1:]:
        if not r or not any(x.strip() for x in r):
            continue
        if len(r) != len(header):
            raise DescriptorDataError(f"{path}: row {r[0]!r} has wrong width")
        key = r[0].strip()
        if key in table:
            raise DescriptorDataError(f"{path}: duplicate genotype {key!r}")
        topology.parse(key)  # malformed keys fail at load time
        try:
            table[key] = np.array([_parse_cell(v) for v in r[1:]])
        except ValueError as exc:
            raise DescriptorDataError(
                f"{path}: non-numeric value in row {key!r}"
            ) from exc
    return TableProvider(topology, table)


def write_descriptor_table(
    path, ds: Dataset, rows: dict[str, np.ndarray]
) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["genotype"] + list(ds.molecule_ids))
        for key, values in rows.items():
            w.writerow([key] + [repr(float(v)) for v in values])
