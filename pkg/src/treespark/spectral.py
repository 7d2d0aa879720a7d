"""Dense symmetric eigen-utilities: decompositions, pseudo square roots,
relative condition numbers of Laplacian pencils and PSD order tests."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues (nondecreasing) and orthonormal eigenbasis columns.

    ``rank_tol`` is relative: eigenvalues at or below ``rank_tol *
    max_eigenvalue`` count as zero wherever rank matters.
    """

    eigenvalues: np.ndarray
    basis: np.ndarray
    rank_tol: float

    @property
    def zero_cutoff(self) -> float:
        return self.rank_tol * max(float(self.eigenvalues[-1]), 0.0)


def _check_symmetric(a: np.ndarray, rel: float = 1e-12) -> None:
    scale = max(float(np.abs(a).max()), 1e-300) if a.size else 1.0
    skew = float(np.abs(a - a.T).max())
    if skew > rel * scale:
        raise ValueError(f"matrix is not symmetric: max |A - A^T| = {skew:g}")


def eig_sym(a: np.ndarray, rank_tol: float | None = None) -> SpectralDecomposition:
    """Eigendecomposition of a symmetric matrix via LAPACK.

    The input must be symmetric to relative 1e-12; it is symmetrised
    before the solve so tiny asymmetries cannot leak into the result.
    The default ``rank_tol`` is ``n * 2.2e-16``.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"need a square matrix, got shape {a.shape}")
    _check_symmetric(a)
    if rank_tol is None:
        rank_tol = a.shape[0] * 2.2e-16
    vals, vecs = np.linalg.eigh((a + a.T) / 2.0)
    return SpectralDecomposition(vals, vecs, float(rank_tol))


def pinv_sqrt(dec: SpectralDecomposition) -> np.ndarray:
    """Inverse square root on the numerical range, zero on the null space.

    Eigenvalues at or below the zero cutoff map to 0; eigenvalues more
    negative than the cutoff are rejected because the matrix was supposed
    to be positive semidefinite.
    """
    cutoff = dec.zero_cutoff
    vals = dec.eigenvalues
    if float(vals[0]) < -max(cutoff, 1e-300):
        raise ValueError(
            f"matrix has a negative eigenvalue {float(vals[0]):g} beyond rank_tol"
        )
    inv = np.zeros_like(vals)
    pos = vals > cutoff
    inv[pos] = 1.0 / np.sqrt(vals[pos])
    return (dec.basis * inv) @ dec.basis.T


def normalized_pencil(
    lap_g: np.ndarray,
    lap_h: np.ndarray,
    dec: SpectralDecomposition | None = None,
) -> tuple[float, float]:
    """Extreme eigenvalues of ``lap_h`` relative to ``lap_g``.

    Conjugates ``lap_h`` by the inverse square root of ``lap_g`` and
    restricts to the range of ``lap_g``, deflating the null direction
    explicitly instead of trusting a tiny eigenvalue.  Returns
    ``(lambda_min_pos, lambda_max)``; the pair is ``(1, 1)`` exactly when
    the two matrices agree on that range.  A rank-deficient ``lap_h``
    reports ``lambda_min_pos = 0`` rather than raising.

    ``dec`` lets callers reuse a decomposition of ``lap_g`` across many
    right-hand sides.
    """
    lap_h = np.asarray(lap_h, dtype=np.float64)
    _check_symmetric(lap_h)
    if dec is None:
        dec = eig_sym(np.asarray(lap_g, dtype=np.float64))
    cutoff = dec.zero_cutoff
    keep = dec.eigenvalues > cutoff
    if not np.any(keep):
        raise ValueError("left Laplacian is identically zero")
    basis = dec.basis[:, keep]
    null = dec.basis[:, ~keep]
    if null.shape[1]:
        leak = float(np.abs(lap_h @ null).max())
        h_scale = max(float(np.abs(lap_h).max()), 1.0)
        if leak > 1e-8 * h_scale:
            raise ValueError(
                "right Laplacian does not vanish on the null space of the left"
            )
    inv_sqrt = 1.0 / np.sqrt(dec.eigenvalues[keep])
    core = (basis * inv_sqrt).T @ lap_h @ (basis * inv_sqrt)
    vals = np.linalg.eigvalsh((core + core.T) / 2.0)
    return float(vals[0]), float(vals[-1])


@dataclass(frozen=True)
class PsdOrderVerdict:
    """Outcome of a PSD order test ``A <= B``.

    ``witness_gap`` is the most negative eigenvalue of ``B - A`` after
    projecting off the common null space of the two inputs, so equality
    up to that null space reports a gap of 0.  ``scale`` is the larger
    operator norm (floored at 1) that verdicts are measured against.
    """

    holds: bool
    witness_gap: float
    tol: float
    scale: float


def _opnorm(a: np.ndarray) -> float:
    return float(np.abs(np.linalg.eigvalsh(a)).max()) if a.size else 0.0


def psd_leq(a: np.ndarray, b: np.ndarray, tol: float = 1e-9) -> PsdOrderVerdict:
    """Test ``a <= b`` in the PSD order, scale-invariantly.

    Holds iff the witness gap is at least ``-tol * scale`` with ``scale =
    max(opnorm(a), opnorm(b), 1)``.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    _check_symmetric(a)
    _check_symmetric(b)
    scale = max(_opnorm(a), _opnorm(b), 1.0)
    gram = a @ a + b @ b
    dec = eig_sym((gram + gram.T) / 2.0)
    keep = dec.eigenvalues > dec.zero_cutoff
    if not np.any(keep):
        return PsdOrderVerdict(True, 0.0, tol, scale)
    basis = dec.basis[:, keep]
    restricted = basis.T @ (b - a) @ basis
    gap = float(np.linalg.eigvalsh((restricted + restricted.T) / 2.0)[0])
    return PsdOrderVerdict(gap >= -tol * scale, gap, tol, scale)


def check_symmetric_triangle(a: np.ndarray, b: np.ndarray, tol: float = 1e-9) -> bool:
    """Verify ``(a - b)^2 <= 2 a^2 + 2 b^2`` for symmetric a, b."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    diff = a - b
    return psd_leq(diff @ diff, 2.0 * a @ a + 2.0 * b @ b, tol).holds
