"""Random spanning tree sampling, exhaustive enumeration and reweighting.

Trees are drawn with probability proportional to the product of their
edge weights.  The sampler is the loop-erased random walk construction:
walks step to a neighbour with probability proportional to the incident
edge weight, loops are erased implicitly by overwriting each vertex's
last exit choice, and the walk tree rooted at vertex 0 is returned.
Randomness comes from a Philox counter-based generator, so a seed fully
determines the output at a fixed library version.

Enumeration recurses over edge subsets with cycle and cardinality
pruning and cross-checks the total tree weight against the Laplacian
minor determinant; the two routes must agree or enumeration aborts.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from .graph import SizeGuardError, UnionFind, WeightedGraph, laplacian
from .leverage import LeverageProfile

ENUMERATION_EDGE_CAP = 22

WEIGHT_MODES = ("original", "inverse_leverage")

# Refill sizes for buffered uniform draws: start small so tiny graphs do
# not pay for thousands of unused variates, grow so long walks amortise
# the generator call.
_BUF_START = 64
_BUF_MAX = 8192


@dataclass(frozen=True)
class SpanningTree:
    """Spanning tree of a parent graph, with per-edge weights.

    ``edge_ids`` index into the parent's edge list, sorted ascending.
    ``weights`` align with ``edge_ids`` and are either the parent's
    weights (``weight_mode == "original"``) or inverse-leverage weights.
    """

    graph: WeightedGraph
    edge_ids: tuple[int, ...]
    weights: tuple[float, ...]
    weight_mode: str

    def __post_init__(self):
        g = self.graph
        ids = tuple(sorted(int(e) for e in self.edge_ids))
        if len(ids) != g.n - 1:
            raise ValueError(f"expected {g.n - 1} edges, got {len(ids)}")
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate edge ids in tree")
        if ids and not (0 <= ids[0] and ids[-1] < g.m):
            raise ValueError("edge id out of range")
        uf = UnionFind(g.n)
        for eid in ids:
            u, v, _ = g.edges[eid]
            if not uf.union(u, v):
                raise ValueError(f"edge {eid} closes a cycle")
        if uf.count != 1:
            raise ValueError("edges do not span all vertices")
        if self.weight_mode not in WEIGHT_MODES:
            raise ValueError(f"unknown weight mode {self.weight_mode!r}")
        if len(self.weights) != len(ids):
            raise ValueError("weights do not align with edge ids")
        if ids != tuple(self.edge_ids):
            order = sorted(range(len(self.edge_ids)), key=lambda i: self.edge_ids[i])
            object.__setattr__(
                self, "weights", tuple(float(self.weights[i]) for i in order)
            )
            object.__setattr__(self, "edge_ids", ids)
        else:
            object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if any(not (w > 0.0) for w in self.weights):
            raise ValueError("tree weights must be positive")


def _wilson_edge_ids(g: WeightedGraph, gen: np.random.Generator) -> list[int]:
    nbrs, eids, cumw, totw, uniform = g.adjacency
    n = g.n
    in_tree = bytearray(n)
    in_tree[0] = 1
    nxt = [0] * n
    bufsize = _BUF_START
    buf = gen.random(bufsize).tolist()
    pos = 0
    tree = []
    for start in range(1, n):
        if in_tree[start]:
            continue
        u = start
        while not in_tree[u]:
            if pos == bufsize:
                bufsize = min(bufsize * 4, _BUF_MAX)
                buf = gen.random(bufsize).tolist()
                pos = 0
            r = buf[pos]
            pos += 1
            row = nbrs[u]
            deg = len(row)
            if uniform[u]:
                j = int(r * deg)
            else:
                j = bisect_right(cumw[u], r * totw[u])
            if j == deg:
                j = deg - 1
            nxt[u] = j
            u = row[j]
        u = start
        while not in_tree[u]:
            in_tree[u] = 1
            j = nxt[u]
            tree.append(eids[u][j])
            u = nbrs[u][j]
    return tree


def _tree_from_ids(g: WeightedGraph, ids) -> SpanningTree:
    ids = tuple(sorted(ids))
    return SpanningTree(g, ids, tuple(g.edges[e][2] for e in ids), "original")


def sample_tree_wilson(g: WeightedGraph, rng_seed: int) -> SpanningTree:
    """Draw one spanning tree with probability proportional to its weight.

    The same ``(graph, rng_seed)`` pair always yields the same tree.
    """
    gen = np.random.Generator(np.random.Philox(rng_seed))
    return _tree_from_ids(g, _wilson_edge_ids(g, gen))


def sample_tree_stream(g: WeightedGraph, gen: np.random.Generator) -> SpanningTree:
    """Draw one tree from a caller-owned generator (for multi-tree trials)."""
    return _tree_from_ids(g, _wilson_edge_ids(g, gen))


def edge_frequencies(g: WeightedGraph, samples: int, rng_seed: int) -> np.ndarray:
    """Fraction of sampled trees containing each edge.

    Draws ``samples`` trees from one seeded stream and counts edge
    occurrences; the result estimates the leverage scores.
    """
    if samples < 1:
        raise ValueError(f"need at least one sample, got {samples}")
    gen = np.random.Generator(np.random.Philox(rng_seed))
    counts = np.zeros(g.m)
    for _ in range(samples):
        for eid in _wilson_edge_ids(g, gen):
            counts[eid] += 1.0
    return counts / samples


@dataclass(frozen=True)
class TreeDistributionTable:
    """Every spanning tree with its exact sampling probability.

    ``trees`` holds sorted edge-id tuples in lexicographic order;
    ``probabilities`` are the normalised weight products and sum to 1
    within 1e-12.  ``total_tree_weight`` is the unnormalised sum, equal
    to the Laplacian minor determinant.
    """

    graph: WeightedGraph
    trees: tuple[tuple[int, ...], ...]
    probabilities: np.ndarray
    total_tree_weight: float

    def __post_init__(self):
        probs = np.asarray(self.probabilities, dtype=np.float64)
        if probs.shape != (len(self.trees),):
            raise ValueError("probabilities do not align with trees")
        if abs(float(probs.sum()) - 1.0) > 1e-12:
            raise ValueError("tree probabilities must sum to 1")
        object.__setattr__(self, "probabilities", probs)

    def marginals(self) -> np.ndarray:
        """Per-edge containment probabilities implied by the table."""
        out = np.zeros(self.graph.m)
        for tree, p in zip(self.trees, self.probabilities):
            out[list(tree)] += p
        return out

    def spanning_tree(self, index: int) -> SpanningTree:
        return _tree_from_ids(self.graph, self.trees[index])


def enumerate_trees(g: WeightedGraph) -> TreeDistributionTable:
    """List all spanning trees of a small graph with exact probabilities.

    Guarded at ``m <= 22`` edges.  The summed tree weight is checked
    against the Laplacian minor determinant; disagreement beyond 1e-9
    relative aborts with ArithmeticError since one of the two routes
    must then be wrong.
    """
    if g.m > ENUMERATION_EDGE_CAP:
        raise SizeGuardError(
            f"enumeration capped at m = {ENUMERATION_EDGE_CAP} edges, got m = {g.m}"
        )
    need = g.n - 1
    trees: list[tuple[int, ...]] = []
    products: list[float] = []

    def recurse(next_eid: int, chosen: list[int], product: float, uf: UnionFind):
        if len(chosen) == need:
            trees.append(tuple(chosen))
            products.append(product)
            return
        if g.m - next_eid < need - len(chosen):
            return
        u, v, w = g.edges[next_eid]
        if uf.find(u) != uf.find(v):
            sub = UnionFind(g.n)
            sub.parent = list(uf.parent)
            sub.size = list(uf.size)
            sub.count = uf.count
            sub.union(u, v)
            chosen.append(next_eid)
            recurse(next_eid + 1, chosen, product * w, sub)
            chosen.pop()
        recurse(next_eid + 1, chosen, product, uf)

    recurse(0, [], 1.0, UnionFind(g.n))
    total = math.fsum(products)
    minor = float(np.linalg.det(laplacian(g)[1:, 1:]))
    if abs(minor - total) > 1e-9 * max(abs(minor), abs(total), 1.0):
        raise ArithmeticError(
            f"tree weight mismatch: enumeration gives {total!r}, "
            f"Laplacian minor determinant gives {minor!r}"
        )
    probs = np.array(products) / total
    return TreeDistributionTable(g, tuple(trees), probs, total)


def reweight_tree(tree: SpanningTree, profile: LeverageProfile) -> SpanningTree:
    """Scale each tree edge weight by its inverse leverage score.

    The resulting random Laplacian has the parent graph's Laplacian as
    its exact expectation when trees are drawn weight-proportionally.
    """
    if profile.graph != tree.graph:
        raise ValueError("leverage profile belongs to a different graph")
    if tree.weight_mode != "original":
        raise ValueError(f"can only reweight original-weight trees, got {tree.weight_mode!r}")
    weights = tuple(
        w / float(profile.values[eid]) for eid, w in zip(tree.edge_ids, tree.weights)
    )
    return SpanningTree(tree.graph, tree.edge_ids, weights, "inverse_leverage")


def tree_laplacian(tree: SpanningTree) -> np.ndarray:
    """Dense Laplacian of the tree with its stored weights."""
    g = tree.graph
    lap = np.zeros((g.n, g.n))
    for eid, w in zip(tree.edge_ids, tree.weights):
        u, v, _ = g.edges[eid]
        lap[u, u] += w
        lap[v, v] += w
        lap[u, v] -= w
        lap[v, u] -= w
    return lap


def average_trees(trees: list[SpanningTree], probabilities=None) -> np.ndarray:
    """Laplacian of the average of several trees over one parent graph.

    Uniform coefficients by default; pass ``probabilities`` (summing to
    1) to form an exact expectation over an enumerated distribution.
    Mixing parent graphs or weight modes is an error.
    """
    if not trees:
        raise ValueError("cannot average an empty tree list")
    first = trees[0]
    if probabilities is None:
        coeffs = [1.0 / len(trees)] * len(trees)
    else:
        coeffs = [float(p) for p in probabilities]
        if len(coeffs) != len(trees):
            raise ValueError("probabilities do not align with trees")
        if any(c < 0.0 for c in coeffs):
            raise ValueError("probabilities must be nonnegative")
        if abs(math.fsum(coeffs) - 1.0) > 1e-9:
            raise ValueError("probabilities must sum to 1")
    lap = np.zeros((first.graph.n, first.graph.n))
    for tree, c in zip(trees, coeffs):
        if not (tree.graph is first.graph or tree.graph == first.graph):
            raise ValueError("trees come from different parent graphs")
        if tree.weight_mode != first.weight_mode:
            raise ValueError("trees mix weight modes")
        for eid, w in zip(tree.edge_ids, tree.weights):
            u, v, _ = tree.graph.edges[eid]
            cw = c * w
            lap[u, u] += cw
            lap[v, v] += cw
            lap[u, v] -= cw
            lap[v, u] -= cw
    return lap


def format_tree_line(tree: SpanningTree) -> str:
    """One-line text form: ``n; edge ids; weights`` with 17 digit weights."""
    ids = " ".join(str(e) for e in tree.edge_ids)
    ws = " ".join(f"{w:.17g}" for w in tree.weights)
    return f"{tree.graph.n}; {ids}; {ws}"


def parse_tree_line(
    line: str, g: WeightedGraph, weight_mode: str = "original"
) -> SpanningTree:
    """Parse :func:`format_tree_line` output against its parent graph."""
    parts = [p.strip() for p in line.split(";")]
    if len(parts) != 3:
        raise ValueError(f"bad tree line {line!r}")
    n = int(parts[0])
    if n != g.n:
        raise ValueError(f"tree line is for n = {n}, graph has n = {g.n}")
    ids = tuple(int(tok) for tok in parts[1].split())
    weights = tuple(float(tok) for tok in parts[2].split())
    return SpanningTree(g, ids, weights, weight_mode)
