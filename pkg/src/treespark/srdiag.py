"""Diagnostics for negative dependence and martingale concentration.

Spanning tree indicators are negatively dependent: conditioning on a
forest being present can only shrink the marginal of every other edge.
This module checks that exhaustively on small graphs, and instruments
the edge-by-edge Doob martingale of the normalised tree matrix sum.

The martingale works in the frame where the parent Laplacian becomes
the projector ``pi`` off the all-ones vector: each edge contributes
``A_e = w'_e * P b_e b_e^T P`` with ``P`` the inverse square root of
the Laplacian and ``w'`` inverse-leverage weights, so ``sum_e lev_e A_e
= pi`` and a sampled tree contributes ``sum_{e in T} A_e``.  Revealing
the tree's edges in uniform random order, step ``i`` conditions on a
partial edge set; conditional expectations are computed exactly by
contracting the revealed edges and reading leverage scores off the
quotient multigraph.  No sampled estimate enters the trace.

Binomial tail utilities run in log space with compensated summation so
tails far below 1e-300 keep their logarithms.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .graph import SizeGuardError, UnionFind, WeightedGraph, laplacian
from .leverage import ContractionState, conditional_marginals, leverage_scores
from .spectral import eig_sym, pinv_sqrt
from .treesample import sample_tree_stream

SHRINKING_EDGE_CAP = 10
TRACE_VERTEX_CAP = 12

STEP_SLACK = 1e-8
CUMULATIVE_SLACK = 1e-6


def _opnorm(a: np.ndarray) -> float:
    return float(np.abs(np.linalg.eigvalsh(a)).max())


# ---------------------------------------------------------------------------
# Shrinking marginals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ShrinkingMarginalsReport:
    """Exhaustive comparison of conditional vs unconditional marginals.

    ``max_excess`` is the largest value of ``conditional - unconditional``
    seen over every (forest, residual edge) pair; negative dependence
    predicts it never exceeds numerical noise.  ``worst`` records the
    pair achieving it as ``(forest ids, edge id, conditional,
    unconditional)``.
    """

    graph: WeightedGraph
    num_forests: int
    num_pairs: int
    max_excess: float
    worst: tuple
    passed: bool
    entries: tuple = ()


def shrinking_marginals_suite(
    g: WeightedGraph, tol: float = 1e-10, keep_entries: bool = False
) -> ShrinkingMarginalsReport:
    """Check marginal shrinkage for every forest of a small graph.

    Enumerates every forest S (the empty one included), contracts it,
    and compares each residual edge's conditional marginal against its
    plain leverage score.  Guarded at ``m <= 10`` edges.
    """
    if g.m > SHRINKING_EDGE_CAP:
        raise SizeGuardError(
            f"shrinking marginal suite capped at m = {SHRINKING_EDGE_CAP}, got m = {g.m}"
        )
    base = leverage_scores(g).values
    forests: list[tuple[int, ...]] = []

    def recurse(next_eid: int, chosen: list[int], uf: UnionFind):
        forests.append(tuple(chosen))
        for eid in range(next_eid, g.m):
            u, v, _ = g.edges[eid]
            if uf.find(u) == uf.find(v):
                continue
            sub = UnionFind(g.n)
            sub.parent = list(uf.parent)
            sub.size = list(uf.size)
            sub.count = uf.count
            sub.union(u, v)
            chosen.append(eid)
            recurse(eid + 1, chosen, sub)
            chosen.pop()

    recurse(0, [], UnionFind(g.n))

    num_pairs = 0
    max_excess = -math.inf
    worst = ()
    entries = []
    for forest in forests:
        state = ContractionState.from_edges(g, forest)
        cond = conditional_marginals(g, state)
        in_forest = set(forest)
        for eid in range(g.m):
            if eid in in_forest:
                continue
            num_pairs += 1
            excess = float(cond[eid] - base[eid])
            if keep_entries:
                entries.append((forest, eid, float(cond[eid]), float(base[eid])))
            if excess > max_excess:
                max_excess = excess
                worst = (forest, eid, float(cond[eid]), float(base[eid]))
    return ShrinkingMarginalsReport(
        graph=g,
        num_forests=len(forests),
        num_pairs=num_pairs,
        max_excess=max_excess,
        worst=worst,
        passed=max_excess <= tol,
        entries=tuple(entries),
    )


# ---------------------------------------------------------------------------
# Doob martingale trace
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MartingaleTrace:
    """Exact conditional-expectation path for one revealed tree ordering.

    ``cond_expectations[i]`` is the conditional expectation of the
    normalised tree matrix after revealing ``i`` edges; index 0 is the
    projector off the all-ones direction and index k is the realised
    tree matrix.  ``step_norms[i-1]`` is the norm of increment i,
    ``variation_norms[i-1]`` the norm of the running predictable
    quadratic variation, whose per-step summands are kept in
    ``second_moments``.  ``max_edge_norm`` is the largest single-edge
    matrix norm (the increment range) and ``frame_norm`` the norm of the
    full expectation; with inverse-leverage weights both are 1 up to
    rounding.
    """

    graph: WeightedGraph
    ordering: tuple[int, ...]
    cond_expectations: tuple
    step_norms: tuple[float, ...]
    variation_norms: tuple[float, ...]
    max_edge_norm: float
    frame_norm: float
    cond_mean_norms: tuple[float, ...]
    zero_mean_residuals: tuple[float, ...]
    second_moments: tuple
    variations: tuple

    @property
    def k(self) -> int:
        return len(self.ordering)

    def cumulative_bound(self) -> float:
        """Envelope ``10 * frame_norm * max_edge_norm * ln k``.

        At k = 1 this degenerates to 0, which is still valid: a
        2-vertex graph has a 1-dimensional normalised frame where every
        edge matrix coincides, so increments vanish identically.
        """
        return 10.0 * self.frame_norm * self.max_edge_norm * math.log(self.k)


def _edge_matrices(g: WeightedGraph) -> np.ndarray:
    """Stack of normalised inverse-leverage edge matrices, shape (m, n, n)."""
    lev = leverage_scores(g).values
    proot = pinv_sqrt(eig_sym(laplacian(g)))
    us, vs, ws = g.edge_arrays
    diffs = proot[:, us] - proot[:, vs]
    scaled = diffs * np.sqrt(ws / lev)
    return np.einsum("ie,je->eij", scaled, scaled)


def trace_for_ordering(g: WeightedGraph, ordering) -> MartingaleTrace:
    """Build the exact martingale trace for a given edge reveal order.

    ``ordering`` must list the edges of a spanning tree of ``g`` in the
    order they are revealed.  Each step averages over every edge the
    reveal could have produced next, weighting candidate e by its
    conditional marginal divided by the number of unrevealed slots, and
    records the realised increment, the mixture mean (which must vanish)
    and the mixture second moment.
    """
    if g.n > TRACE_VERTEX_CAP:
        raise SizeGuardError(
            f"martingale trace capped at n = {TRACE_VERTEX_CAP} vertices, got n = {g.n}"
        )
    ordering = tuple(int(e) for e in ordering)
    k = g.n - 1
    if len(ordering) != k or len(set(ordering)) != k:
        raise ValueError(f"ordering must list {k} distinct edges")

    mats = _edge_matrices(g)
    lev = leverage_scores(g).values
    max_edge_norm = max(_opnorm(mats[e]) for e in range(g.m))

    expect_0 = np.tensordot(lev, mats, axes=1)
    frame_norm = _opnorm(expect_0)

    marg_memo: dict[frozenset, np.ndarray] = {}

    def margs_for(state: ContractionState) -> np.ndarray:
        key = frozenset(state.contracted)
        if key not in marg_memo:
            marg_memo[key] = conditional_marginals(g, state)
        return marg_memo[key]

    state = ContractionState.initial(g)
    margs = margs_for(state)
    expect_prev = expect_0

    cond_expectations = [expect_0]
    step_norms = []
    variation_norms = []
    cond_mean_norms = []
    zero_mean_residuals = []
    second_moments = []
    variations = []
    variation = np.zeros_like(expect_0)

    for i in range(1, k + 1):
        slots = k - i + 1
        candidates = [
            e for e in range(g.m) if e not in state.contracted and margs[e] > 0.0
        ]
        probs = np.array([margs[e] / slots for e in candidates])
        cand_states = [state.contract(e) for e in candidates]
        cand_expect = [
            np.tensordot(margs_for(st), mats, axes=1) for st in cand_states
        ]
        increments = [exp - expect_prev for exp in cand_expect]

        cond_mean_norms.append(_opnorm(np.tensordot(probs, mats[candidates], axes=1)))
        zero_mean_residuals.append(
            _opnorm(sum(p * inc for p, inc in zip(probs, increments)))
        )
        second = sum(p * inc @ inc for p, inc in zip(probs, increments))
        second_moments.append(second)
        variation = variation + second
        variations.append(variation)
        variation_norms.append(_opnorm(variation))

        chosen = ordering[i - 1]
        if chosen not in candidates:
            raise ValueError(
                f"edge {chosen} cannot be revealed at step {i}: zero conditional marginal"
            )
        idx = candidates.index(chosen)
        step_norms.append(_opnorm(increments[idx]))
        state = cand_states[idx]
        margs = margs_for(state)
        expect_prev = cand_expect[idx]
        cond_expectations.append(expect_prev)

    return MartingaleTrace(
        graph=g,
        ordering=ordering,
        cond_expectations=tuple(cond_expectations),
        step_norms=tuple(step_norms),
        variation_norms=tuple(variation_norms),
        max_edge_norm=max_edge_norm,
        frame_norm=frame_norm,
        cond_mean_norms=tuple(cond_mean_norms),
        zero_mean_residuals=tuple(zero_mean_residuals),
        second_moments=tuple(second_moments),
        variations=tuple(variations),
    )


def martingale_trace(g: WeightedGraph, rng_seed: int) -> MartingaleTrace:
    """Sample a tree, shuffle its edges uniformly and trace the martingale."""
    gen = np.random.Generator(np.random.Philox(rng_seed))
    tree = sample_tree_stream(g, gen)
    order = gen.permutation(len(tree.edge_ids))
    ordering = tuple(tree.edge_ids[int(j)] for j in order)
    return trace_for_ordering(g, ordering)


def check_step_variance_bound(trace: MartingaleTrace, slack: float = STEP_SLACK) -> bool:
    """Per-step predictable variance and conditional mean bounds.

    Step i (with ``s = k - i + 1`` unrevealed slots) must satisfy
    ``lambda_max(E[X_i^2 | past]) <= 4 * mu * R / s`` up to slack, where
    ``mu`` is the frame norm and ``R`` the edge norm range.  Also
    verifies the per-edge conditional mean bound ``||E[A | past]|| <= mu
    / s`` at every step.
    """
    k = trace.k
    mu = trace.frame_norm
    mu_r = mu * trace.max_edge_norm
    for i, second in enumerate(trace.second_moments, start=1):
        slots = k - i + 1
        if trace.cond_mean_norms[i - 1] > mu / slots + slack:
            return False
        if float(np.linalg.eigvalsh(second)[-1]) > 4.0 * mu_r / slots + slack:
            return False
    return True


def check_trace_bounds(trace: MartingaleTrace, slack: float = STEP_SLACK) -> bool:
    """All trace invariants at once.

    Checks the zero-mean residuals, the increment range ``max step norm
    <= R``, the conditional mean norm bound ``mu / slots``, the per-step
    variance bound and the cumulative envelope ``10 mu R ln k`` on the
    final variation norm.  The envelope degenerates to zero at k = 1,
    where it still holds: every edge of a 2-vertex graph carries the
    same normalised matrix, so all increments vanish.
    """
    r = trace.max_edge_norm
    if any(res > slack for res in trace.zero_mean_residuals):
        return False
    if any(x > r + slack for x in trace.step_norms):
        return False
    if not check_step_variance_bound(trace, slack):
        return False
    if trace.variation_norms[-1] > trace.cumulative_bound() + CUMULATIVE_SLACK:
        return False
    return True


def trace_dump(trace: MartingaleTrace) -> str:
    """Text dump: one ``i x_norm w_norm bound`` line per step, then JSON.

    ``bound`` is the running sum of the per-step variance envelopes
    ``4 mu R / slots``, i.e. the proved cap on the variation norm after
    step i.  The JSON record summarises the trace and its verdict.
    """
    k = trace.k
    mu_r = trace.frame_norm * trace.max_edge_norm
    lines = []
    running = 0.0
    for i in range(1, k + 1):
        running += 4.0 * mu_r / (k - i + 1)
        lines.append(
            f"{i} {trace.step_norms[i - 1]:.12g} "
            f"{trace.variation_norms[i - 1]:.12g} {running:.12g}"
        )
    summary = {
        "k": k,
        "ordering": list(trace.ordering),
        "max_edge_norm": trace.max_edge_norm,
        "frame_norm": trace.frame_norm,
        "max_step_norm": max(trace.step_norms),
        "final_variation_norm": trace.variation_norms[-1],
        "cumulative_bound": trace.cumulative_bound(),
        "passed": check_trace_bounds(trace),
    }
    lines.append(json.dumps(summary))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Binomial tails, reverse concentration, Stirling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BinomialTailQuery:
    """Validated arguments of a binomial tail probability.

    ``k`` trials with success probability ``p`` in ``(0, 1/2]`` and an
    integer ``threshold`` in ``[0, k]``.
    """

    k: int
    p: float
    threshold: int

    def __post_init__(self):
        if not isinstance(self.k, int) or self.k < 1:
            raise ValueError(f"need integer k >= 1, got {self.k!r}")
        if not (0.0 < self.p <= 0.5):
            raise ValueError(f"success probability must lie in (0, 1/2], got {self.p}")
        if not isinstance(self.threshold, int) or not (0 <= self.threshold <= self.k):
            raise ValueError(
                f"threshold must be an integer in [0, {self.k}], got {self.threshold!r}"
            )


def _validate_tail_args(k: int, p: float, threshold: int) -> None:
    BinomialTailQuery(k, p, threshold)


def _log_terms(k: int, p: float, lo: int, hi: int) -> list[float]:
    logc = math.lgamma(k + 1)
    logp = math.log(p)
    logq = math.log1p(-p)
    return [
        logc - math.lgamma(i + 1) - math.lgamma(k - i + 1) + i * logp + (k - i) * logq
        for i in range(lo, hi + 1)
    ]


def log_binomial_tail(k: int, p: float, threshold: int) -> float:
    """``log Pr[Bin(k, p) >= threshold]`` without underflow."""
    _validate_tail_args(k, p, threshold)
    if threshold == 0:
        return 0.0
    terms = _log_terms(k, p, threshold, k)
    top = max(terms)
    return top + math.log(math.fsum(math.exp(t - top) for t in terms))


def binomial_tail(k: int, p: float, threshold: int) -> float:
    """``Pr[Bin(k, p) >= threshold]`` via compensated log-space summation."""
    return math.exp(log_binomial_tail(k, p, threshold))


def log_binomial_tail_lower(k: int, p: float, threshold: int) -> float:
    """``log Pr[Bin(k, p) <= threshold]`` without underflow."""
    _validate_tail_args(k, p, threshold)
    if threshold == k:
        return 0.0
    terms = _log_terms(k, p, 0, threshold)
    top = max(terms)
    return top + math.log(math.fsum(math.exp(t - top) for t in terms))


def binomial_tail_lower(k: int, p: float, threshold: int) -> float:
    """``Pr[Bin(k, p) <= threshold]``."""
    return math.exp(log_binomial_tail_lower(k, p, threshold))


def reverse_chernoff_check(k: int, p: float, eps: float) -> bool:
    """Anti-concentration floor on both binomial tails.

    Under the hypotheses ``eps in (0, 1/2]``, ``p in (0, 1/2]`` and
    ``eps^2 p k >= 3``, verifies ``Pr[S >= (1+eps) p k] >= exp(-9 eps^2
    p k)`` and the mirrored lower tail.  Tails at fractional thresholds
    are evaluated at the nearest admissible integer: ceil for the upper
    tail, floor for the lower.  Comparisons run in log space; a 1e-9
    inward nudge on the thresholds absorbs float noise when ``(1 +- eps)
    p k`` is an exact integer.
    """
    if not isinstance(k, int) or k < 1:
        raise ValueError(f"need integer k >= 1, got {k!r}")
    if not (0.0 < p <= 0.5):
        raise ValueError(f"success probability must lie in (0, 1/2], got {p}")
    if not (0.0 < eps <= 0.5):
        raise ValueError(f"deviation must lie in (0, 1/2], got {eps}")
    exponent = eps * eps * p * k
    if exponent < 3.0:
        raise ValueError(
            f"hypothesis eps^2 p k >= 3 fails: {exponent:g} with k={k} p={p} eps={eps}"
        )
    up = math.ceil((1.0 + eps) * p * k - 1e-9)
    lo = math.floor((1.0 - eps) * p * k + 1e-9)
    upper_ok = log_binomial_tail(k, p, up) >= -9.0 * exponent
    lower_ok = log_binomial_tail_lower(k, p, lo) >= -9.0 * exponent
    return upper_ok and lower_ok


def default_reverse_chernoff_grid() -> list[tuple[int, float, float]]:
    """Hypothesis-satisfying (k, p, eps) triples for grid checks."""
    grid = []
    for k in (50, 100, 200, 400, 800, 1600, 2400, 3200, 4000, 5000):
        for p in (0.05, 0.1, 0.2, 0.3, 0.4, 0.5):
            for eps in (0.1, 0.15, 0.2, 0.3, 0.4, 0.5):
                if eps * eps * p * k >= 3.0:
                    grid.append((k, p, eps))
    return grid


def check_stirling_binom_lower(k: int, l: int) -> bool:
    """Stirling-type floor on a binomial coefficient.

    Verifies ``C(k, l) >= (1 / (e sqrt(2 pi l))) (k/l)^l (k/(k-l))^(k-l)``
    for ``1 <= l <= k - 1``, compared in log space.
    """
    if not isinstance(k, int) or not isinstance(l, int) or not (1 <= l <= k - 1):
        raise ValueError(f"need integers with 1 <= l <= k - 1, got k={k!r} l={l!r}")
    log_binom = math.lgamma(k + 1) - math.lgamma(l + 1) - math.lgamma(k - l + 1)
    log_floor = (
        -1.0
        - 0.5 * math.log(2.0 * math.pi * l)
        + l * math.log(k / l)
        + (k - l) * math.log(k / (k - l))
    )
    return log_binom >= log_floor


# ---------------------------------------------------------------------------
# Deviation tail record
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TailEnvelopeRecord:
    """Observed deviation tail of single-tree matrices, with the implied
    constants for two exponential envelope shapes.

    For each threshold ``eps`` the record holds the fraction of sampled
    trees whose normalised matrix deviates from the projector by at
    least ``eps`` in norm, together with the constant ``c`` that would
    make ``n * exp(-c * E(eps))`` match the observed fraction for the
    exponent shapes ``E_a = eps^2 / (ln k + eps)`` and ``E_b = 3 eps^2 /
    (60 ln k + 2 eps)`` (unit range and frame norm).  Zero counts floor
    the fraction at ``1 / trials``, so those constants are lower bounds.
    """

    graph: WeightedGraph
    trials: int
    thresholds: tuple[float, ...]
    fractions: tuple[float, ...]
    implied_const_a: tuple[float, ...]
    implied_const_b: tuple[float, ...]


def tail_envelope_record(
    g: WeightedGraph, trials: int, thresholds, rng_seed: int
) -> TailEnvelopeRecord:
    """Sample single-tree deviations and fit envelope constants."""
    thresholds = tuple(sorted(float(t) for t in thresholds))
    mats = _edge_matrices(g)
    pi = np.eye(g.n) - 1.0 / g.n
    k = g.n - 1
    gen = np.random.Generator(np.random.Philox(rng_seed))
    deviations = []
    for _ in range(trials):
        tree = sample_tree_stream(g, gen)
        dev = mats[list(tree.edge_ids)].sum(axis=0) - pi
        deviations.append(_opnorm(dev))
    deviations = np.array(deviations)
    fractions = []
    const_a = []
    const_b = []
    logk = math.log(k)
    for eps in thresholds:
        frac = float((deviations >= eps).mean())
        floor = max(frac, 1.0 / trials)
        expo_a = eps * eps / (logk + eps)
        expo_b = 3.0 * eps * eps / (60.0 * logk + 2.0 * eps)
        fractions.append(frac)
        const_a.append(math.log(g.n / floor) / expo_a)
        const_b.append(math.log(g.n / floor) / expo_b)
    return TailEnvelopeRecord(
        graph=g,
        trials=trials,
        thresholds=thresholds,
        fractions=tuple(fractions),
        implied_const_a=tuple(const_a),
        implied_const_b=tuple(const_b),
    )
