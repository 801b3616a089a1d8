"""Genetic topologies, genotypes, and the operators acting on them.

A topology is an ordered list of genes, each carrying an ordered alphabet of
allele symbols. A genotype picks one allele per gene; its rendered form is the
concatenation of the chosen symbols. Alleles are opaque: nothing here knows
what a symbol means.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

__all__ = [
    "Gene",
    "GeneticTopology",
    "Genotype",
    "TopologyError",
    "TopologyMismatchError",
    "genome_size",
    "random_genotype",
    "crossover",
    "mutate",
    "mutate_per_gene",
    "ncd",
    "parse_topology",
    "serialize_topology",
    "load_topology",
]


class TopologyError(ValueError):
    """Raised for malformed topologies or topology files."""


class TopologyMismatchError(ValueError):
    """Raised when an operation pairs genotypes from different topologies."""


@dataclass(frozen=True)
class Gene:
    """One position of the encoding: a name and its allele alphabet."""

    name: str
    alleles: tuple[str, ...]

    def __post_init__(self):
        if not self.name or any(c.isspace() for c in self.name) or ":" in self.name:
            raise TopologyError(f"invalid gene name {self.name!r}")
        if len(self.alleles) < 2:
            raise TopologyError(f"gene {self.name!r} needs at least 2 alleles")
        for a in self.alleles:
            if not a or any(c.isspace() for c in a):
                raise TopologyError(f"invalid allele {a!r} in gene {self.name!r}")
        if len(set(self.alleles)) != len(self.alleles):
            raise TopologyError(f"duplicate alleles in gene {self.name!r}")


@dataclass(frozen=True)
class GeneticTopology:
    """Ordered genes; defines the genotype space."""

    genes: tuple[Gene, ...]

    def __post_init__(self):
        if not self.genes:
            raise TopologyError("topology needs at least one gene")
        names = [g.name for g in self.genes]
        if len(set(names)) != len(names):
            raise TopologyError("duplicate gene names")

    @property
    def gene_count(self) -> int:
        return len(self.genes)

    def genotype(self, allele_index) -> "Genotype":
        return Genotype(self, tuple(allele_index))

    def render(self, g: "Genotype", sep: str = "") -> str:
        return sep.join(
            gene.alleles[i] for gene, i in zip(self.genes, g.allele_index)
        )

    def parse(self, text: str, sep: str = "") -> "Genotype":
        """Inverse of render. Backtracks over allele lengths, so it also
        handles multi-character alleles without a separator as long as the
        rendering is unambiguous."""
        if sep:
            parts = text.split(sep)
            if len(parts) != self.gene_count:
                raise ValueError(f"expected {self.gene_count} genes in {text!r}")
            idx = []
            for gene, part in zip(self.genes, parts):
                try:
                    idx.append(gene.alleles.index(part))
                except ValueError:
                    raise ValueError(
                        f"unknown allele {part!r} for gene {gene.name!r}"
                    ) from None
            return Genotype(self, tuple(idx))

        result = self._parse_from(text, 0, 0)
        if result is None:
            raise ValueError(f"cannot parse {text!r} against topology")
        return Genotype(self, tuple(result))

    def _parse_from(self, text, pos, gene_i):
        if gene_i == self.gene_count:
            return [] if pos == len(text) else None
        for ai, allele in enumerate(self.genes[gene_i].alleles):
            if text.startswith(allele, pos):
                rest = self._parse_from(text, pos + len(allele), gene_i + 1)
                if rest is not None:
                    return [ai] + rest
        return None

    def all_genotypes(self):
        """Iterate the whole space in lexicographic allele-index order."""
        counts = [len(g.alleles) for g in self.genes]
        idx = [0] * len(counts)
        while True:
            yield Genotype(self, tuple(idx))
            for pos in reversed(range(len(counts))):
                idx[pos] += 1
                if idx[pos] < counts[pos]:
                    break
                idx[pos] = 0
            else:
                return


@dataclass(frozen=True)
class Genotype:
    """One allele choice per gene (0-based indices into the alphabets)."""

    topology: GeneticTopology
    allele_index: tuple[int, ...]

    def __post_init__(self):
        if len(self.allele_index) != self.topology.gene_count:
            raise TopologyError(
                f"expected {self.topology.gene_count} gene values, "
                f"got {len(self.allele_index)}"
            )
        for gene, i in zip(self.topology.genes, self.allele_index):
            if not 0 <= i < len(gene.alleles):
                raise TopologyError(
                    f"allele index {i} out of range for gene {gene.name!r}"
                )

    def render(self, sep: str = "") -> str:
        return self.topology.render(self, sep)


def genome_size(topology: GeneticTopology) -> int:
    """Number of genotypes in the space: the product of alphabet sizes."""
    n = 1
    for gene in topology.genes:
        n *= len(gene.alleles)
    return n


def random_genotype(topology: GeneticTopology, rng: random.Random) -> Genotype:
    """Uniform draw over the genotype space."""
    return Genotype(
        topology, tuple(rng.randrange(len(g.alleles)) for g in topology.genes)
    )


def _require_same_topology(a: Genotype, b: Genotype) -> None:
    # identity check first: topologies are shared objects in practice
    if a.topology is not b.topology and a.topology != b.topology:
        raise TopologyMismatchError("genotypes come from different topologies")


def crossover(
    a: Genotype, b: Genotype, rng: random.Random
) -> tuple[Genotype, Genotype]:
    """Exchange a contiguous gene range between two genotypes.

    The range [i, j] is uniform over all start <= end pairs, so segment
    lengths from one gene up to the whole chromosome are all possible.
    """
    _require_same_topology(a, b)
    nc = a.topology.gene_count
    k = rng.randrange(nc * (nc + 1) // 2)
    i = 0
    row = nc  # number of (i, j) pairs starting at i
    while k >= row:
        k -= row
        row -= 1
        i += 1
    j = i + k
    ai = list(a.allele_index)
    bi = list(b.allele_index)
    ai[i : j + 1], bi[i : j + 1] = bi[i : j + 1], ai[i : j + 1]
    return Genotype(a.topology, tuple(ai)), Genotype(b.topology, tuple(bi))


def mutate(g: Genotype, prob: float, rng: random.Random) -> Genotype:
    """With probability prob, set one uniformly chosen gene to a different
    allele; otherwise return the genotype unchanged."""
    if not 0.0 <= prob <= 1.0:
        raise ValueError(f"mutation probability {prob} outside [0, 1]")
    if rng.random() >= prob:
        return g
    pos = rng.randrange(g.topology.gene_count)
    alleles = g.topology.genes[pos].alleles
    shift = rng.randrange(len(alleles) - 1) + 1
    idx = list(g.allele_index)
    idx[pos] = (idx[pos] + shift) % len(alleles)
    return Genotype(g.topology, tuple(idx))


def mutate_per_gene(g: Genotype, prob: float, rng: random.Random) -> Genotype:
    """Alternative mutation mode: every gene flips independently with
    probability prob."""
    if not 0.0 <= prob <= 1.0:
        raise ValueError(f"mutation probability {prob} outside [0, 1]")
    idx = list(g.allele_index)
    changed = False
    for pos, gene in enumerate(g.topology.genes):
        if rng.random() < prob:
            shift = rng.randrange(len(gene.alleles) - 1) + 1
            idx[pos] = (idx[pos] + shift) % len(gene.alleles)
            changed = True
    return Genotype(g.topology, tuple(idx)) if changed else g


def ncd(a: Genotype, b: Genotype) -> int:
    """Number of gene positions at which two genotypes differ."""
    _require_same_topology(a, b)
    return sum(x != y for x, y in zip(a.allele_index, b.allele_index))


# --- topology file format -------------------------------------------------
#
# One line per gene, order significant:
#   gene <name> : <allele> <allele> ...
# '#' starts a comment; blank lines ignored.


def parse_topology(text: str) -> GeneticTopology:
    genes = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if fields[0] != "gene" or len(fields) < 3 or ":" not in fields:
            raise TopologyError(f"line {lineno}: expected 'gene <name> : <alleles>'")
        colon = fields.index(":")
        if colon != 2:
            raise TopologyError(f"line {lineno}: expected single-token gene name")
        name = fields[1]
        alleles = tuple(fields[colon + 1 :])
        genes.append(Gene(name, alleles))
    return GeneticTopology(tuple(genes))


def serialize_topology(topology: GeneticTopology) -> str:
    lines = [
        f"gene {g.name} : {' '.join(g.alleles)}" for g in topology.genes
    ]
    return "\n".join(lines) + "\n"


def load_topology(path) -> GeneticTopology:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_topology(fh.read())
