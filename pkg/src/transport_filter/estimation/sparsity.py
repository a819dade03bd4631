"""
Sparsity patterns for triangular maps.

A pattern lists, for every component k, the inputs A_k it may read.
Patterns come from a distance band (A_k = {i <= k : d(i, k) <= r}), from
an undirected conditional-independence graph through the marginal-graph
recursion, or are dense. An identity cutoff j turns every component past
the first j into the identity.

Indices are 0-based. Edge files use 1-based vertex labels.
"""

from __future__ import annotations

from collections.abc import Callable, Iterable
from dataclasses import dataclass, field
from pathlib import Path

from transport_filter.core.exceptions import MapArgumentError

Distance = Callable[[int, int], float]


def line_distance(i: int, j: int) -> float:
    """|i - j|."""
    return float(abs(i - j))


def cycle_distance(n: int) -> Distance:
    """Periodic index distance on n sites."""

    def distance(i: int, j: int) -> float:
        gap = abs(i - j)
        return float(min(gap, n - gap))

    return distance


@dataclass(frozen=True)
class SparsityPattern:
    """
    Per-component input sets for an n-dimensional map.

    ``per_component[k]`` is sorted and ends with ``data_dimension + k``;
    entries below ``data_dimension`` are data inputs.
    """

    n: int
    per_component: tuple[tuple[int, ...], ...]
    identity_cutoff: int | None = None
    data_dimension: int = 0

    def __post_init__(self) -> None:
        sets = tuple(tuple(sorted(set(int(i) for i in s))) for s in self.per_component)
        object.__setattr__(self, "per_component", sets)
        if len(sets) != self.n:
            raise MapArgumentError(f"{len(sets)} index sets for a {self.n}-dimensional map")
        for k, inputs in enumerate(sets):
            variable = self.data_dimension + k
            if not inputs or inputs[-1] != variable or inputs[0] < 0:
                raise MapArgumentError(f"A_{k} = {inputs} must end with its own variable {variable}")
        if self.identity_cutoff is not None and self.identity_cutoff < 0:
            raise MapArgumentError("identity cutoff must be nonnegative")

    def __len__(self) -> int:
        return self.n

    def __getitem__(self, k: int) -> tuple[int, ...]:
        return self.per_component[k]

    def is_identity(self, k: int) -> bool:
        """True when component k is forced to the identity by the cutoff."""
        return self.identity_cutoff is not None and k >= self.identity_cutoff

    @classmethod
    def dense(cls, n: int, identity_cutoff: int | None = None) -> SparsityPattern:
        return cls(n, tuple(tuple(range(k + 1)) for k in range(n)), identity_cutoff)

    def with_data(self, data_dimension: int, components: Iterable[int] | None = None) -> SparsityPattern:
        """
        Prepend data inputs and attach them to the given components.

        ``components=None`` attaches the data to every component.
        """
        if self.data_dimension:
            raise MapArgumentError("pattern already has a data slot")
        attached = set(range(self.n)) if components is None else set(components)
        data = tuple(range(data_dimension))
        sets = []
        for k, inputs in enumerate(self.per_component):
            shifted = tuple(i + data_dimension for i in inputs)
            sets.append((data + shifted) if k in attached else shifted)
        return SparsityPattern(self.n, tuple(sets), self.identity_cutoff, data_dimension)


@dataclass(frozen=True)
class UndirectedGraph:
    """Undirected graph on vertices 0..n-1 without self-loops."""

    n: int
    edges: frozenset[tuple[int, int]] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        normalized = set()
        for a, b in self.edges:
            if a == b:
                raise MapArgumentError(f"self-loop at vertex {a}")
            if not (0 <= a < self.n and 0 <= b < self.n):
                raise MapArgumentError(f"edge ({a}, {b}) outside {self.n} vertices")
            normalized.add((min(a, b), max(a, b)))
        object.__setattr__(self, "edges", frozenset(normalized))

    def __len__(self) -> int:
        return len(self.edges)

    def adjacency(self) -> list[set[int]]:
        neighbors: list[set[int]] = [set() for _ in range(self.n)]
        for a, b in self.edges:
            neighbors[a].add(b)
            neighbors[b].add(a)
        return neighbors

    @classmethod
    def complete(cls, n: int) -> UndirectedGraph:
        return cls(n, frozenset((i, j) for j in range(n) for i in range(j)))

    @classmethod
    def chain(cls, n: int) -> UndirectedGraph:
        return cls(n, frozenset((i, i + 1) for i in range(n - 1)))

    @classmethod
    def from_edge_file(cls, path: Path | str, n: int | None = None) -> UndirectedGraph:
        """
        Read ``i j`` pairs (1-based), one per line; ``#`` starts a comment.

        Without ``n`` the vertex count is the largest label seen.
        """
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"Graph file not found: {path}")
        edges = []
        for lineno, raw in enumerate(path.read_text().splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.replace(",", " ").split()
            if len(parts) != 2:
                raise MapArgumentError(f"{path}:{lineno}: expected 'i j', got {raw!r}")
            a, b = (int(x) - 1 for x in parts)
            edges.append((a, b))
        size = n if n is not None else max((max(e) + 1 for e in edges), default=0)
        return cls(size, frozenset(edges))


def distance_sparsity(
    distance: Distance,
    n: int,
    r: float | None,
    identity_cutoff: int | None = None,
) -> SparsityPattern:
    """A_k = {i <= k : distance(i, k) <= r}; ``r=None`` keeps the map dense."""
    if r is not None and r < 0:
        raise MapArgumentError(f"radius must be nonnegative, got {r}")
    if r is None:
        return SparsityPattern.dense(n, identity_cutoff)
    sets = tuple(
        tuple(i for i in range(k + 1) if i == k or distance(i, k) <= r) for k in range(n)
    )
    return SparsityPattern(n, sets, identity_cutoff)


def graph_sparsity(graph: UndirectedGraph, identity_cutoff: int | None = None) -> SparsityPattern:
    """
    Sparsity of the triangular map for a Markov random field.

    Walks k = n-1 .. 0: A_k is k plus its neighbors in the current marginal
    graph, then k is removed and its neighbors are joined into a clique.
    """
    neighbors = graph.adjacency()
    sets: list[tuple[int, ...]] = [()] * graph.n
    for k in range(graph.n - 1, -1, -1):
        nb = {i for i in neighbors[k] if i < k}
        sets[k] = tuple(sorted(nb | {k}))
        for i in nb:
            neighbors[i].discard(k)
            neighbors[i].update(nb - {i})
    return SparsityPattern(graph.n, tuple(sets), identity_cutoff)


def permutation_by_distance(distance: Distance, n: int, observed: int) -> tuple[int, ...]:
    """Observed component first, then the rest by increasing distance, ties by index."""
    rest = sorted((i for i in range(n) if i != observed), key=lambda i: (distance(i, observed), i))
    return (observed, *rest)
