"""Weighted multigraph representation, named constructions and file I/O.

Vertices are dense integers ``0..n-1``.  Edges are stored as an ordered
tuple of ``(u, v, w)`` triples with the orientation normalised to
``u < v``; parallel edges are allowed and keep their own identity (the
edge id is the position in the stored tuple).  Self loops and
non-positive weights are rejected, as are disconnected graphs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np


class DisconnectedGraphError(ValueError):
    """Raised when an edge list does not connect all vertices."""


class GraphFileError(ValueError):
    """Raised when a graph file cannot be parsed."""


class SizeGuardError(ValueError):
    """Raised when an exhaustive routine is asked to exceed its size cap."""


class UnionFind:
    """Array-based disjoint sets with path halving and union by size."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n
        self.count = n

    def find(self, x: int) -> int:
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, a: int, b: int) -> bool:
        """Merge the sets of a and b; return False if already merged."""
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        self.count -= 1
        return True


@dataclass(frozen=True)
class WeightedGraph:
    """Connected weighted multigraph on vertices ``0..n-1``.

    Parameters
    ----------
    n:
        Number of vertices, at least 2.
    edges:
        Sequence of ``(u, v, w)`` triples with ``u != v`` and ``w > 0``.
        Orientation is normalised to ``u < v`` on construction; the
        position of a triple in the tuple is its edge id.
    """

    n: int
    edges: tuple[tuple[int, int, float], ...]

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n < 2:
            raise ValueError(f"need at least 2 vertices, got n={self.n}")
        canon = []
        uf = UnionFind(self.n)
        for u, v, w in self.edges:
            u, v = int(u), int(v)
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ValueError(f"edge endpoint out of range: ({u}, {v})")
            if u == v:
                raise ValueError(f"self loop at vertex {u}")
            w = float(w)
            if not (w > 0.0) or not math.isfinite(w):
                raise ValueError(f"edge weight must be positive and finite, got {w}")
            if u > v:
                u, v = v, u
            canon.append((u, v, w))
            uf.union(u, v)
        if uf.count != 1:
            raise DisconnectedGraphError(
                f"graph on {self.n} vertices with {len(canon)} edges is disconnected"
            )
        object.__setattr__(self, "edges", tuple(canon))

    @property
    def m(self) -> int:
        return len(self.edges)

    @cached_property
    def edge_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Endpoint and weight arrays (us, vs, ws) aligned with edge ids."""
        us = np.fromiter((e[0] for e in self.edges), dtype=np.int64, count=self.m)
        vs = np.fromiter((e[1] for e in self.edges), dtype=np.int64, count=self.m)
        ws = np.fromiter((e[2] for e in self.edges), dtype=np.float64, count=self.m)
        return us, vs, ws

    @cached_property
    def adjacency(self) -> tuple[list, list, list, list, list]:
        """Per-vertex neighbour, edge-id and cumulative-weight lists.

        Entries follow stored edge order, one entry per incident edge, so
        parallel edges appear once each.  Returns ``(nbrs, eids, cumw,
        totw, uniform)`` where ``cumw[v]`` is the running sum of incident
        weights, ``totw[v]`` its total and ``uniform[v]`` says all
        incident weights are equal; random walk steps draw a uniform
        ``r`` and take the first index with ``cumw[v][i] > r * totw[v]``.
        """
        nbrs = [[] for _ in range(self.n)]
        eids = [[] for _ in range(self.n)]
        wts = [[] for _ in range(self.n)]
        for eid, (u, v, w) in enumerate(self.edges):
            nbrs[u].append(v)
            eids[u].append(eid)
            wts[u].append(w)
            nbrs[v].append(u)
            eids[v].append(eid)
            wts[v].append(w)
        cumw = []
        totw = []
        uniform = []
        for v in range(self.n):
            run = 0.0
            acc = []
            for w in wts[v]:
                run += w
                acc.append(run)
            cumw.append(acc)
            totw.append(run)
            uniform.append(bool(wts[v]) and min(wts[v]) == max(wts[v]))
        return nbrs, eids, cumw, totw, uniform

    def weighted_degrees(self) -> np.ndarray:
        """Sum of incident edge weights per vertex (Laplacian diagonal)."""
        us, vs, ws = self.edge_arrays
        deg = np.zeros(self.n)
        np.add.at(deg, us, ws)
        np.add.at(deg, vs, ws)
        return deg


def incidence_row(g: WeightedGraph, edge_id: int) -> np.ndarray:
    """Signed incidence vector of one edge: +1 at the smaller endpoint,
    -1 at the larger, 0 elsewhere."""
    if not (0 <= edge_id < g.m):
        raise ValueError(f"edge id {edge_id} out of range")
    u, v, _ = g.edges[edge_id]
    row = np.zeros(g.n)
    row[u] = 1.0
    row[v] = -1.0
    return row


def laplacian(g: WeightedGraph) -> np.ndarray:
    """Dense weighted Laplacian ``sum_e w_e (e_u - e_v)(e_u - e_v)^T``."""
    us, vs, ws = g.edge_arrays
    lap = np.zeros((g.n, g.n))
    np.add.at(lap, (us, vs), -ws)
    np.add.at(lap, (vs, us), -ws)
    np.add.at(lap, (us, us), ws)
    np.add.at(lap, (vs, vs), ws)
    return lap


def complete_graph(n: int, weight: float = 1.0) -> WeightedGraph:
    """Complete graph on n vertices with a common edge weight."""
    if n < 2:
        raise ValueError(f"complete graph needs n >= 2, got {n}")
    edges = tuple((u, v, weight) for u in range(n) for v in range(u + 1, n))
    return WeightedGraph(n, edges)


def ring_graph(n: int, weight: float = 1.0) -> WeightedGraph:
    """Cycle on n >= 3 vertices."""
    if n < 3:
        raise ValueError(f"ring needs n >= 3, got {n}")
    edges = tuple((v, (v + 1) % n, weight) for v in range(n))
    return WeightedGraph(n, edges)


def clique_star(num_cliques: int, clique_size: int, weight: float = 1.0) -> WeightedGraph:
    """Cliques glued at a shared hub vertex.

    Builds ``num_cliques`` copies of the complete graph on ``clique_size``
    vertices, all sharing vertex 0, so ``n = num_cliques * (clique_size - 1)
    + 1``.  Clique ``i`` occupies vertex 0 together with the block of
    ``clique_size - 1`` fresh vertices starting at ``1 + i * (clique_size -
    1)``, and its edges are emitted as one contiguous run.
    """
    if num_cliques < 1:
        raise ValueError(f"need at least one clique, got {num_cliques}")
    if clique_size < 3:
        raise ValueError(f"clique size must be >= 3, got {clique_size}")
    block = clique_size - 1
    edges = []
    for i in range(num_cliques):
        members = [0] + list(range(1 + i * block, 1 + (i + 1) * block))
        for a in range(clique_size):
            for b in range(a + 1, clique_size):
                edges.append((members[a], members[b], weight))
    return WeightedGraph(num_cliques * block + 1, tuple(edges))


def erdos_renyi_connected(
    n: int, p: float, seed: int, max_attempts: int = 1000
) -> WeightedGraph:
    """G(n, p) conditioned on connectivity by rejection sampling.

    Uses a Philox counter-based generator so the same seed reproduces the
    same graph.  Raises ValueError if no connected draw appears within
    ``max_attempts``.
    """
    if not (0.0 < p <= 1.0):
        raise ValueError(f"edge probability must lie in (0, 1], got {p}")
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    gen = np.random.Generator(np.random.Philox(seed))
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    for _ in range(max_attempts):
        draws = gen.random(len(pairs))
        picked = [pairs[i] for i in np.flatnonzero(draws < p)]
        uf = UnionFind(n)
        for u, v in picked:
            uf.union(u, v)
        if uf.count == 1:
            return WeightedGraph(n, tuple((u, v, 1.0) for u, v in picked))
    raise ValueError(
        f"no connected G({n}, {p}) draw within {max_attempts} attempts"
    )


def build_construction(kind: str, params: dict) -> WeightedGraph:
    """Dispatch to a named unit-weight construction.

    ``kind`` is one of ``complete`` (params: n), ``ring`` (n),
    ``clique_star`` (num_cliques, clique_size) or
    ``erdos_renyi_connected`` (n, p, seed).
    """
    builders = {
        "complete": (complete_graph, ("n",)),
        "ring": (ring_graph, ("n",)),
        "clique_star": (clique_star, ("num_cliques", "clique_size")),
        "erdos_renyi_connected": (erdos_renyi_connected, ("n", "p", "seed")),
    }
    if kind not in builders:
        raise ValueError(f"unknown construction kind {kind!r}")
    fn, names = builders[kind]
    missing = [name for name in names if name not in params]
    if missing:
        raise ValueError(f"{kind} construction needs parameters {missing}")
    extra = set(params) - set(names)
    if extra:
        raise ValueError(f"{kind} construction got unknown parameters {sorted(extra)}")
    return fn(**{name: params[name] for name in names})


def write_graph(g: WeightedGraph, path: str) -> None:
    """Write the text format: header ``n m`` then one ``u v w`` line per edge.

    Weights are printed with 17 significant digits so a read back
    reproduces the exact float64 values.
    """
    with open(path, "w") as fh:
        fh.write(f"{g.n} {g.m}\n")
        for u, v, w in g.edges:
            fh.write(f"{u} {v} {w:.17g}\n")


def read_graph(path: str) -> WeightedGraph:
    """Parse the text format written by :func:`write_graph`."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise GraphFileError(f"{path}: empty graph file")
    head = lines[0].split()
    if len(head) != 2:
        raise GraphFileError(f"{path}: header must be 'n m', got {lines[0]!r}")
    try:
        n, m = int(head[0]), int(head[1])
    except ValueError as exc:
        raise GraphFileError(f"{path}: bad header {lines[0]!r}") from exc
    if len(lines) - 1 != m:
        raise GraphFileError(
            f"{path}: header promises {m} edges, file has {len(lines) - 1}"
        )
    edges = []
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 3:
            raise GraphFileError(f"{path}: bad edge line {ln!r}")
        try:
            edges.append((int(parts[0]), int(parts[1]), float(parts[2])))
        except ValueError as exc:
            raise GraphFileError(f"{path}: bad edge line {ln!r}") from exc
    try:
        return WeightedGraph(n, tuple(edges))
    except DisconnectedGraphError:
        raise
    except ValueError as exc:
        raise GraphFileError(f"{path}: {exc}") from exc
