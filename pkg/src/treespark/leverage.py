"""Effective resistances, leverage scores and edge contraction.

Leverage scores of a weighted graph are the spanning tree marginals:
``lev_e = w_e * reff(u_e, v_e)`` is the probability that edge ``e``
appears in a random spanning tree drawn with probability proportional to
the product of edge weights.  Conditioning such a tree on containing a
forest is the same as contracting the forest's edges, so conditional
marginals reduce to leverage scores of a quotient multigraph.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from .graph import SizeGuardError, UnionFind, WeightedGraph, laplacian
from .spectral import eig_sym

DENSE_SOLVE_CAP = 2000


class InvalidConditioningError(ValueError):
    """Raised when a conditioning edge set contains a cycle."""


@functools.lru_cache(maxsize=8)
def _laplacian_pinv(g: WeightedGraph) -> np.ndarray:
    if g.n > DENSE_SOLVE_CAP:
        raise SizeGuardError(
            f"dense Laplacian solve capped at n = {DENSE_SOLVE_CAP}, got n = {g.n}"
        )
    dec = eig_sym(laplacian(g))
    vals = dec.eigenvalues
    inv = np.zeros_like(vals)
    pos = vals > dec.zero_cutoff
    inv[pos] = 1.0 / vals[pos]
    return (dec.basis * inv) @ dec.basis.T


def effective_resistance(g: WeightedGraph, u: int, v: int) -> float:
    """Resistance between two vertices with conductances ``w_e``."""
    if not (0 <= u < g.n and 0 <= v < g.n):
        raise ValueError(f"vertex out of range: ({u}, {v})")
    if u == v:
        return 0.0
    pinv = _laplacian_pinv(g)
    return float(pinv[u, u] + pinv[v, v] - 2.0 * pinv[u, v])


@dataclass(frozen=True)
class LeverageProfile:
    """Per-edge leverage scores aligned with the parent graph's edge ids.

    Scores lie in ``(0, 1]`` and sum to ``n - 1``; both facts are
    checked on construction.
    """

    graph: WeightedGraph
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != (self.graph.m,):
            raise ValueError(
                f"expected {self.graph.m} scores, got shape {vals.shape}"
            )
        if float(vals.min(initial=1.0)) <= 0.0 or float(vals.max(initial=0.0)) > 1.0 + 1e-10:
            raise ValueError("leverage scores must lie in (0, 1]")
        total = float(vals.sum())
        target = self.graph.n - 1
        if abs(total - target) > 1e-8:
            raise ValueError(
                f"leverage scores sum to {total!r}, expected {target}"
            )
        object.__setattr__(self, "values", vals)


def leverage_scores(g: WeightedGraph) -> LeverageProfile:
    """Leverage score of every edge, via one pseudoinverse per graph."""
    pinv = _laplacian_pinv(g)
    us, vs, ws = g.edge_arrays
    reff = pinv[us, us] + pinv[vs, vs] - 2.0 * pinv[us, vs]
    return LeverageProfile(g, ws * reff)


@dataclass(frozen=True)
class ContractionState:
    """A forest of contracted edges over a parent graph.

    ``reps[v]`` is the canonical representative (smallest member) of the
    merged block containing vertex ``v``.  Growing the state with an edge
    whose endpoints are already merged would close a cycle, which cannot
    be conditioned on, so that raises :class:`InvalidConditioningError`.
    """

    graph: WeightedGraph
    contracted: tuple[int, ...]
    reps: tuple[int, ...]

    @classmethod
    def initial(cls, g: WeightedGraph) -> "ContractionState":
        return cls(g, (), tuple(range(g.n)))

    @classmethod
    def from_edges(cls, g: WeightedGraph, edge_ids) -> "ContractionState":
        state = cls.initial(g)
        for eid in edge_ids:
            state = state.contract(eid)
        return state

    def contract(self, edge_id: int) -> "ContractionState":
        if not (0 <= edge_id < self.graph.m):
            raise ValueError(f"edge id {edge_id} out of range")
        if edge_id in self.contracted:
            raise InvalidConditioningError(f"edge {edge_id} already contracted")
        u, v, _ = self.graph.edges[edge_id]
        ru, rv = self.reps[u], self.reps[v]
        if ru == rv:
            raise InvalidConditioningError(
                f"edge {edge_id} closes a cycle in the contracted set"
            )
        keep, drop = min(ru, rv), max(ru, rv)
        reps = tuple(keep if r == drop else r for r in self.reps)
        return ContractionState(
            self.graph, tuple(sorted(self.contracted + (edge_id,))), reps
        )

    def quotient(self):
        """Contracted multigraph and the edge bookkeeping to map back.

        Returns ``(quot, vmap, eid_map, loops)``: the quotient graph (or
        None when everything merged to a single vertex), the original
        vertex to quotient vertex map, a dict from surviving original
        edge ids to quotient edge ids, and the list of original edge ids
        that became self loops.
        """
        classes = sorted(set(self.reps))
        index = {r: i for i, r in enumerate(classes)}
        vmap = tuple(index[r] for r in self.reps)
        edges = []
        eid_map = {}
        loops = []
        contracted = set(self.contracted)
        for eid, (u, v, w) in enumerate(self.graph.edges):
            if eid in contracted:
                continue
            qu, qv = vmap[u], vmap[v]
            if qu == qv:
                loops.append(eid)
            else:
                eid_map[eid] = len(edges)
                edges.append((qu, qv, w))
        if len(classes) == 1:
            return None, vmap, eid_map, loops
        return WeightedGraph(len(classes), tuple(edges)), vmap, eid_map, loops


def conditional_marginals(g: WeightedGraph, state: ContractionState) -> np.ndarray:
    """Spanning tree marginals conditioned on the contracted forest.

    Returns an array over all edge ids of ``g``: contracted edges report
    1, edges whose endpoints were merged (self loops in the quotient)
    report 0, and every other edge reports its leverage score in the
    quotient multigraph.
    """
    if state.graph != g:
        raise ValueError("contraction state belongs to a different graph")
    out = np.zeros(g.m)
    for eid in state.contracted:
        out[eid] = 1.0
    quot, _, eid_map, _ = state.quotient()
    if quot is None:
        return out
    prof = leverage_scores(quot)
    for eid, qid in eid_map.items():
        out[eid] = prof.values[qid]
    return out
