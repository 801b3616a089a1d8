"""Evolutionary search for best-subset multiple linear regressions over
combinatorially encoded descriptor families, with a statistical harness for
comparing selection and survival strategies."""

from .descriptors import (
    Dataset,
    Phenotype,
    PlantedSignal,
    SyntheticProvider,
    TableProvider,
    ViabilityPolicy,
    check_viability,
)
from .engine import EvolutionConfig, RunResult, run
from .experiment import GridAggregate, homogeneity_analysis, run_grid
from .genome import Gene, GeneticTopology, Genotype, genome_size, load_topology
from .regress import RegressionModel, ols_fit, search_space_size
from .scores import ObjectiveSpec
from .stats import ContingencyTable, chi2_homogeneity, chi2_sf, student_t_two_tail
from .strategy import StrategySpec

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "Phenotype",
    "PlantedSignal",
    "SyntheticProvider",
    "TableProvider",
    "ViabilityPolicy",
    "check_viability",
    "EvolutionConfig",
    "RunResult",
    "run",
    "GridAggregate",
    "homogeneity_analysis",
    "run_grid",
    "Gene",
    "GeneticTopology",
    "Genotype",
    "genome_size",
    "load_topology",
    "RegressionModel",
    "ols_fit",
    "search_space_size",
    "ObjectiveSpec",
    "ContingencyTable",
    "chi2_homogeneity",
    "chi2_sf",
    "student_t_two_tail",
    "StrategySpec",
    "__version__",
]
