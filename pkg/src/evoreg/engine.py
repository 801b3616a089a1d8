"""The evolution loop: full-sweep regression scoring, selection of parent
pairs, crossover/mutation, viability filtering of children, and similarity-
driven survival replacement, generation after generation.

One run owns all its mutable state and a single random.Random seeded from the
config, so identical configs reproduce byte-identical logs.
"""

from __future__ import annotations

import hashlib
import json
import logging
import random
from collections import Counter
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from . import genome as gn
from .descriptors import Dataset, Phenotype, ViabilityPolicy, check_viability
from .genome import GeneticTopology, Genotype
from .regress import GramFitter, RegressionModel, fit_assessed
from .scores import (
    NormalizationState,
    ObjectiveSpec,
    objective_score,
    selection_direction,
    selection_scores,
    survival_scores,
    transform_scores,
)
from .strategy import StrategySpec, extract

__all__ = [
    "EvolutionConfig",
    "GenerationRecord",
    "RunResult",
    "EvolutionState",
    "InsufficientViableMaterialError",
    "init_sample",
    "run_generation",
    "run",
]

logger = logging.getLogger(__name__)

_INIT_ATTEMPTS_PER_SLOT = 200


class InsufficientViableMaterialError(RuntimeError):
    """The provider could not supply enough distinct viable genotypes."""


@dataclass(frozen=True)
class EvolutionConfig:
    """Everything one evolution run needs besides topology, provider, data."""

    p: int                      # sample size
    n: int                      # regression multiplicity
    k: int                      # parent pairs per generation
    pp: float = 0.05            # parent mutation probability
    cp: float = 0.05            # child mutation probability
    keep_best: bool = True      # elitism: protect best model's genotypes
    objective: ObjectiveSpec = field(default_factory=lambda: ObjectiveSpec("r2"))
    selection: StrategySpec = field(
        default_factory=lambda: StrategySpec("proportional")
    )
    survival: StrategySpec = field(
        default_factory=lambda: StrategySpec("proportional")
    )
    selection_aggregate: str = "nalive"
    q: float = 1.0              # survival score-distance exponent
    r: float = 1.0              # survival genotype-distance exponent
    alpha: float = 0.05         # coefficient significance level
    viability: ViabilityPolicy = field(default_factory=ViabilityPolicy)
    max_generations: int = 100
    target_objective: float | None = None
    seed: int = 0
    intercept_mode: str = "fallback"   # or "both"
    mutation_mode: str = "genotype"    # or "gene" (per-gene flips)

    def __post_init__(self):
        if not 1 <= self.n < self.p:
            raise ValueError("need 1 <= n < p")
        if not 1 <= self.k or 2 * self.k > self.p:
            raise ValueError("need 1 <= k and 2k <= p")
        for name in ("pp", "cp"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be a probability")
        if self.max_generations < 1:
            raise ValueError("max_generations must be at least 1")
        if self.q <= 0 or self.r <= 0:
            raise ValueError("q and r must be positive")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must be in (0, 1)")
        if self.intercept_mode not in ("fallback", "both"):
            raise ValueError(f"unknown intercept_mode {self.intercept_mode!r}")
        if self.mutation_mode not in ("genotype", "gene"):
            raise ValueError(f"unknown mutation_mode {self.mutation_mode!r}")
        if self.selection_aggregate not in ("nalive", "min", "max", "avg"):
            raise ValueError(
                f"unknown selection_aggregate {self.selection_aggregate!r}"
            )

    def fingerprint(self) -> str:
        blob = json.dumps(_config_dict(self), sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _config_dict(cfg: EvolutionConfig) -> dict:
    def plain(v):
        if isinstance(v, (ObjectiveSpec, StrategySpec, ViabilityPolicy)):
            return {k: plain(x) for k, x in vars(v).items()}
        if isinstance(v, tuple):
            return list(v)
        return v

    return {k: plain(v) for k, v in vars(cfg).items()}


@dataclass(frozen=True)
class Individual:
    genotype: Genotype
    phenotype: Phenotype
    rendered: str


@dataclass(frozen=True)
class GenerationRecord:
    generation: int
    best_objective: float          # this generation's best valid model (NaN if none)
    improved: bool                 # strictly better than all previous generations
    best_model_genotypes: tuple[str, ...]
    sample_genotypes: tuple[str, ...]
    valid_regression_count: int
    participations: tuple[int, ...]  # valid-model memberships per sample slot


@dataclass
class RunResult:
    config: EvolutionConfig
    records: list[GenerationRecord]
    best_model: RegressionModel | None
    best_objective: float
    best_genotypes: tuple[str, ...]

    @property
    def generations(self) -> int:
        return len(self.records)

    def log_text(self) -> str:
        """Line-oriented TSV run log with a config fingerprint header."""
        lines = [f"# config={self.config.fingerprint()}\tseed={self.config.seed}"]
        for rec in self.records:
            lines.append(
                f"{rec.generation}\t{int(rec.improved)}\t{rec.best_objective!r}"
                f"\tmodel={','.join(rec.best_model_genotypes)}"
                f"\tvalid={rec.valid_regression_count}"
                f"\tsample={','.join(rec.sample_genotypes)}"
            )
        return "\n".join(lines) + "\n"

    def summary_dict(self) -> dict:
        return {
            "config_fingerprint": self.config.fingerprint(),
            "seed": self.config.seed,
            "generations": self.generations,
            "best_objective": self.best_objective,
            "best_genotypes": list(self.best_genotypes),
            "best_coefficients": list(self.best_model.coefficients)
            if self.best_model
            else None,
            "best_with_intercept": self.best_model.with_intercept
            if self.best_model
            else None,
            "best_r2": self.best_model.r2 if self.best_model else None,
            "improving_generations": sum(r.improved for r in self.records),
        }


@dataclass
class EvolutionState:
    """Mutable state of one run."""

    cfg: EvolutionConfig
    topology: GeneticTopology
    provider: object
    dataset: Dataset
    rng: random.Random
    sample: list[Individual]
    generation: int = 0
    best_model: RegressionModel | None = None
    best_objective: float = float("nan")
    best_genotypes: tuple[str, ...] = ()
    sel_norm: NormalizationState | None = None
    sur_norm: NormalizationState | None = None

    def __post_init__(self):
        if self.cfg.selection.normalization is not None:
            n0, n1 = self.cfg.selection.normalization
            self.sel_norm = NormalizationState(n0, n1)
        if self.cfg.survival.normalization is not None:
            n0, n1 = self.cfg.survival.normalization
            self.sur_norm = NormalizationState(n0, n1)


def _better(a: float, b: float, direction: str) -> bool:
    return a > b if direction == "max" else a < b


def _make_individual(genotype: Genotype, phenotype: Phenotype) -> Individual:
    return Individual(genotype, phenotype, genotype.render())


def init_sample(
    cfg: EvolutionConfig,
    topology: GeneticTopology,
    provider,
    ds: Dataset,
    rng: random.Random,
) -> list[Individual]:
    """Assemble p distinct genotypes with viable phenotypes.

    Providers with an enumerable key set are sampled from that set (shuffled);
    open-ended providers are rejection-sampled up to a retry bound. Failure
    reports a histogram of the criteria that rejected candidates.
    """
    known = provider.known_genotypes()
    failures: Counter[str] = Counter()
    sample: list[Individual] = []
    seen: set[str] = set()

    def consider(g: Genotype) -> bool:
        key = g.render()
        if key in seen:
            failures["duplicate"] += 1
            return False
        ph = provider.provide(g)
        if ph is None:
            failures["no_phenotype"] += 1
            return False
        report = check_viability(ph, ds, cfg.viability)
        if not report.viable:
            failures.update(report.failed_criteria())
            return False
        seen.add(key)
        sample.append(_make_individual(g, ph))
        return True

    if known is not None:
        pool = list(known)
        rng.shuffle(pool)
        for g in pool:
            if consider(g) and len(sample) == cfg.p:
                return sample
    else:
        budget = _INIT_ATTEMPTS_PER_SLOT * cfg.p
        for _ in range(budget):
            if consider(gn.random_genotype(topology, rng)) and len(sample) == cfg.p:
                return sample
    raise InsufficientViableMaterialError(
        f"found {len(sample)} of {cfg.p} viable distinct genotypes; "
        f"rejections: {dict(failures) or 'none'}"
    )


def _mutate(g: Genotype, prob: float, cfg: EvolutionConfig, rng) -> Genotype:
    if cfg.mutation_mode == "gene":
        return gn.mutate_per_gene(g, prob, rng)
    return gn.mutate(g, prob, rng)


def run_generation(state: EvolutionState) -> GenerationRecord:
    """Advance the sample by one generation and record what happened."""
    cfg = state.cfg
    rng = state.rng
    sample = state.sample
    p = cfg.p
    direction = cfg.objective.direction

    # full sweep: fit every n-subset of the sample; only the error-sum
    # objective needs per-fit residual sums at its own exponent
    panel = np.vstack([ind.phenotype.values for ind in sample])
    fit_s = cfg.objective.s if cfg.objective.kind == "se" else 2.0
    fitter = GramFitter(
        panel, state.dataset.activity, [ind.rendered for ind in sample],
        s=fit_s,
    )
    valid_models: list[tuple[tuple[int, ...], RegressionModel]] = []
    gen_best: tuple[float, tuple[int, ...], RegressionModel] | None = None
    for subset in combinations(range(p), cfg.n):
        for model in fit_assessed(
            fitter.fit, subset, state.dataset, cfg.alpha, cfg.intercept_mode
        ):
            if not model.valid:
                continue
            valid_models.append((subset, model))
            value = objective_score(model, cfg.objective)
            if gen_best is None or _better(value, gen_best[0], direction):
                gen_best = (value, subset, model)

    participations = [0] * p
    for subset, _ in valid_models:
        for i in subset:
            participations[i] += 1

    improved = False
    if gen_best is not None:
        value, subset, model = gen_best
        if state.best_model is None or _better(value, state.best_objective, direction):
            improved = True
            state.best_model = model
            state.best_objective = value
            state.best_genotypes = tuple(sample[i].rendered for i in subset)

    # selection scores and parent extraction
    sel_fs = selection_scores(
        p, valid_models, cfg.selection_aggregate, cfg.objective
    )
    sel_dir = selection_direction(cfg.selection_aggregate, cfg.objective)
    sel_table = transform_scores(
        sel_fs,
        state.sel_norm,
        cfg.selection.significant_digits,
        cfg.selection.use_ranks,
        sel_dir,
    )
    parent_idx = extract(cfg.selection.method, sel_table, 2 * cfg.k, rng)

    # parents are mutated on copies; the sample itself is untouched here
    parents = [_mutate(sample[i].genotype, cfg.pp, cfg, rng) for i in parent_idx]
    children: list[Genotype] = []
    for a, b in zip(parents[0::2], parents[1::2]):
        c1, c2 = gn.crossover(a, b, rng)
        children.append(_mutate(c1, cfg.cp, cfg, rng))
        children.append(_mutate(c2, cfg.cp, cfg, rng))

    # viability filter; duplicates of sample members (or of earlier accepted
    # children) would corrupt the similarity scores, so they are nonviable here
    sample_keys = {ind.rendered for ind in sample}
    viable_children: list[Individual] = []
    for child in children:
        key = child.render()
        if key in sample_keys:
            continue
        ph = state.provider.provide(child)
        if ph is None:
            continue
        if not check_viability(ph, state.dataset, cfg.viability).viable:
            continue
        sample_keys.add(key)
        viable_children.append(_make_individual(child, ph))

    record = GenerationRecord(
        generation=state.generation + 1,
        best_objective=gen_best[0] if gen_best is not None else float("nan"),
        improved=improved,
        best_model_genotypes=tuple(sample[i].rendered for i in gen_best[1])
        if gen_best is not None
        else (),
        sample_genotypes=tuple(ind.rendered for ind in sample),
        valid_regression_count=len(valid_models),
        participations=tuple(participations),
    )

    if viable_children:
        elite: set[int] = set()
        if cfg.keep_best and gen_best is not None:
            elite = set(gen_best[1])
        eligible = [i for i in range(p) if i not in elite]
        if len(viable_children) > len(eligible):
            logger.warning(
                "more viable children (%d) than removable individuals (%d); "
                "extra children dropped", len(viable_children), len(eligible),
            )
            viable_children = viable_children[: len(eligible)]
        v = len(viable_children)
        if len(eligible) >= 2:
            vs = survival_scores(
                [sample[i].genotype for i in eligible],
                sel_table.fs[eligible],
                cfg.q,
                cfg.r,
            )
            sur_table = transform_scores(
                vs,
                state.sur_norm,
                cfg.survival.significant_digits,
                cfg.survival.use_ranks,
                "max",
            )
            victims_rel = extract(cfg.survival.method, sur_table, v, rng)
            victims = [eligible[i] for i in victims_rel]
        else:
            victims = eligible[:v]
        for slot, child in zip(victims, viable_children):
            sample[slot] = child
    else:
        logger.debug("generation %d: no viable children", state.generation + 1)

    state.generation += 1
    return record


def run(
    cfg: EvolutionConfig,
    topology: GeneticTopology,
    provider,
    ds: Dataset,
) -> RunResult:
    """Run the evolution until the objective target is met or the generation
    budget is exhausted."""
    n_space = gn.genome_size(topology)
    if not cfg.n < cfg.p < n_space:
        raise ValueError(
            f"need n < p < N (n={cfg.n}, p={cfg.p}, N={n_space})"
        )
    rng = random.Random(cfg.seed)
    sample = init_sample(cfg, topology, provider, ds, rng)
    state = EvolutionState(cfg, topology, provider, ds, rng, sample)
    records: list[GenerationRecord] = []
    for _ in range(cfg.max_generations):
        rec = run_generation(state)
        records.append(rec)
        if cfg.target_objective is not None and state.best_model is not None:
            if not _better(
                cfg.target_objective, state.best_objective,
                cfg.objective.direction,
            ):
                break
    return RunResult(
        config=cfg,
        records=records,
        best_model=state.best_model,
        best_objective=state.best_objective,
        best_genotypes=state.best_genotypes,
    )
