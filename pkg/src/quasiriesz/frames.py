"""Finite sections of the Gram operator of integer exponentials on a multiband set.

Extreme eigenvalues of nested principal sections bound the Riesz constants
one-sidedly (Cauchy interlacing): the smallest eigenvalue can only decrease
and the largest only increase as the section grows.  Columns reported here
are therefore finite-section bounds, not limits.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np
from scipy.special import roots_legendre

from .diophantine import IrrationalAlpha
from .discrepancy import BmoReport, bmo_statistic
from .errors import ConvergenceFailure, MeasureMismatch
from .quasicrystal import FrequencySlice, centered_slice
from .torus_sets import MultibandSet, TorusInterval

MAX_DIM = 2048
MEASURE_TOL = 1e-12
# largest quadrature factor (rows * columns) used by the factored method
MAX_FACTOR_ENTRIES = 2 * 10**7


def indicator_fourier(S: MultibandSet, m):
    """``integral over S of exp(-2 pi i m t) dt`` in closed form (scalar or array ``m``)."""
    m_arr = np.asarray(m)
    scalar = m_arr.ndim == 0
    m_arr = np.atleast_1d(m_arr).astype(np.int64)
    out = np.zeros(m_arr.shape, dtype=complex)
    nz = m_arr != 0
    mf = m_arr[nz].astype(float)
    for c, iv in S.terms:
        left = float(iv.left)
        right = float(iv.left + iv.length)
        out[~nz] += c * float(iv.length)
        # reduce phases mod 1 before exponentiating
        ph_l = np.mod(m_arr[nz] * left, 1.0)
        ph_r = np.mod(m_arr[nz] * right, 1.0)
        out[nz] += c * (np.exp(-2j * np.pi * ph_l) - np.exp(-2j * np.pi * ph_r)) / (2j * np.pi * mf)
    return complex(out[0]) if scalar else out


@dataclass(frozen=True, eq=False)
class GramSection:
    """``entries[i, j] = <e_j, e_i>`` in ``L^2(S)``, i.e. the coefficient at ``lambda_i - lambda_j``."""

    lambdas: np.ndarray
    S: MultibandSet
    entries: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.lambdas)

    def dump(self, fp) -> None:
        """Binary dump: little-endian uint64 dim, then row-major (re, im) float64 pairs."""
        fp.write(struct.pack("<Q", self.dim))
        fp.write(np.ascontiguousarray(self.entries, dtype="<c16").tobytes())


def load_gram(fp) -> np.ndarray:
    (dim,) = struct.unpack("<Q", fp.read(8))
    data = np.frombuffer(fp.read(16 * dim * dim), dtype="<c16")
    return data.reshape(dim, dim).copy()


def gram_section(slice_or_lambdas, S: MultibandSet) -> GramSection:
    lam = slice_or_lambdas.elements if isinstance(slice_or_lambdas, FrequencySlice) \
        else np.asarray(slice_or_lambdas, dtype=np.int64)
    if len(lam) > MAX_DIM:
        raise ValueError(f"dimension {len(lam)} exceeds {MAX_DIM}")
    diff = lam[:, None] - lam[None, :]
    G = indicator_fourier(S, diff.ravel()).reshape(diff.shape)
    # enforce exact Hermitian symmetry and a real diagonal
    G = 0.5 * (G + G.conj().T)
    np.fill_diagonal(G, S.measure())
    return GramSection(lam, S, G)


@dataclass(frozen=True)
class EigenSummary:
    lambda_min: float
    lambda_max: float
    residual: float


def jacobi_eigh(A: np.ndarray, tol: float = 1e-14, max_rotations=None):
    """Cyclic Jacobi eigen-decomposition of a Hermitian matrix.

    Returns ``(w, V)`` with ascending eigenvalues.  Raises
    :class:`ConvergenceFailure` when the off-diagonal mass does not drop
    below ``tol * ||A||_F`` within ``max_rotations`` (default ``100 n^2``).
    """
    A = np.array(A, dtype=complex)
    n = A.shape[0]
    V = np.eye(n, dtype=complex)
    if max_rotations is None:
        max_rotations = 100 * n * n
    scale = np.linalg.norm(A) or 1.0
    rotations = 0
    while True:
        off = np.linalg.norm(A - np.diag(np.diag(A)))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                mag = abs(apq)
                if mag <= 1e-300:
                    continue
                if rotations >= max_rotations:
                    raise ConvergenceFailure(f"Jacobi did not converge within {max_rotations} rotations")
                rotations += 1
                phase = apq / mag
                tau = (A[q, q].real - A[p, p].real) / (2.0 * mag)
                t = (1.0 if tau >= 0 else -1.0) / (abs(tau) + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                J = np.array([[c, s], [-s * phase.conjugate(), c * phase.conjugate()]])
                idx = [p, q]
                A[:, idx] = A[:, idx] @ J
                A[idx, :] = J.conj().T @ A[idx, :]
                A[p, q] = A[q, p] = 0.0
                V[:, idx] = V[:, idx] @ J
    w = np.real(np.diag(A))
    order = np.argsort(w)
    return w[order], V[:, order]


def eigen_extremes(G, method: str = "lapack") -> EigenSummary:
    """Smallest and largest eigenvalue with a residual certificate.

    ``method`` is ``"lapack"`` (``numpy.linalg.eigh``) or ``"jacobi"``.
    """
    M = G.entries if isinstance(G, GramSection) else np.asarray(G)
    n = M.shape[0]
    if n < 1:
        raise ValueError("empty matrix")
    if method == "lapack":
        w, V = np.linalg.eigh(M)
    elif method == "jacobi":
        w, V = jacobi_eigh(M)
    else:
        raise ValueError(f"unknown method {method!r}")
    residual = 0.0
    for k in (0, n - 1):
        v = V[:, k]
        residual = max(residual, float(np.linalg.norm(M @ v - w[k] * v)))
    if residual > 1e-10 * n:
        raise ConvergenceFailure(f"eigen residual {residual:.3g} exceeds {1e-10 * n:.3g}")
    return EigenSummary(float(w[0]), float(w[-1]), residual)


@dataclass(frozen=True)
class TrendRow:
    N: int
    lambda_min: float
    lambda_max: float
    residual: float


def complement(S: MultibandSet) -> MultibandSet:
    """``T \\ S`` as sorted disjoint intervals with the same closure convention."""
    D = S.to_disjoint()
    ivs = sorted(D.intervals, key=lambda iv: iv.left)
    if not ivs:
        return MultibandSet.full(S.closure)
    out = []
    for i, iv in enumerate(ivs):
        gap = (ivs[(i + 1) % len(ivs)].left - iv.right).frac()
        if gap != 0:
            out.append(TorusInterval(iv.right, gap, S.closure))
    return MultibandSet.disjoint(out, S.closure)


def _quadrature_rows(lam: np.ndarray, S: MultibandSet) -> int:
    span = float(lam.max() - lam.min()) if len(lam) else 0.0
    return sum(int(math.ceil(math.pi * span * float(iv.length))) + 64 for iv in S.to_disjoint().intervals)


def quadrature_factor(lam: np.ndarray, S: MultibandSet) -> np.ndarray:
    """``A`` with ``A^H A`` equal to the Gram section on ``S`` (Gauss-Legendre per interval).

    Node counts exceed ``pi * span * length`` so the oscillatory integrands
    are resolved to rounding level.
    """
    lam = np.asarray(lam, dtype=np.int64)
    span = float(lam.max() - lam.min()) if len(lam) else 0.0
    blocks = [np.zeros((0, len(lam)), dtype=complex)]
    for iv in S.to_disjoint().intervals:
        left, length = float(iv.left), float(iv.length)
        x, w = roots_legendre(int(math.ceil(math.pi * span * length)) + 64)
        t = left + length * (x + 1) / 2
        phase = np.mod(np.outer(t, lam), 1.0)
        blocks.append(np.sqrt(w * length / 2)[:, None] * np.exp(2j * np.pi * phase))
    return np.vstack(blocks)


def _smallest_singular(A: np.ndarray, n: int):
    """Smallest eigenvalue of ``A^H A`` and a unit eigenvector."""
    if A.shape[0] == 0:
        v = np.zeros(n, dtype=complex)
        v[0] = 1.0
        return 0.0, v
    _, s, vh = np.linalg.svd(A, full_matrices=A.shape[0] < n)
    # fewer rows than columns: A has a null space
    smallest = 0.0 if A.shape[0] < n else float(s[-1]) ** 2
    return smallest, vh[-1].conj()


def factored_extremes(G: GramSection) -> EigenSummary:
    """Extreme eigenvalues from quadrature factors of ``S`` and of its complement.

    ``lambda_min = s_min(A)^2`` and ``lambda_max = 1 - s_min(B)^2`` where
    ``A^H A`` and ``B^H B`` are the Gram sections on ``S`` and ``T \\ S``
    (they sum to the identity).  Small eigenvalues of either side keep high
    relative accuracy, so nested sections interlace in floating point too.
    """
    M = G.entries
    n = G.dim
    lo, v_lo = _smallest_singular(quadrature_factor(G.lambdas, G.S), n)
    gap, v_hi = _smallest_singular(quadrature_factor(G.lambdas, complement(G.S)), n)
    hi = 1.0 - gap
    residual = max(float(np.linalg.norm(M @ v_lo - lo * v_lo)),
                   float(np.linalg.norm(M @ v_hi - hi * v_hi)))
    if residual > 1e-10 * n:
        raise ConvergenceFailure(f"eigen residual {residual:.3g} exceeds {1e-10 * n:.3g}")
    return EigenSummary(lo, hi, residual)


def _extremes(lam, S: MultibandSet, method: str) -> EigenSummary:
    G = gram_section(lam, S)
    if method == "auto" and S.measure_exact() == 1:
        # the closed-form section on the full circle is exactly the identity
        method = "lapack"
    if method == "auto":
        rows = _quadrature_rows(G.lambdas, S) + _quadrature_rows(G.lambdas, complement(S))
        method = "factored" if rows * G.dim <= MAX_FACTOR_ENTRIES else "lapack"
    if method == "factored":
        return factored_extremes(G)
    return eigen_extremes(G, method)


def _check_measure(I, S):
    length = I.measure() if isinstance(I, MultibandSet) else float(I.length)
    if abs(S.measure() - length) > MEASURE_TOL:
        raise MeasureMismatch(f"mes S = {S.measure():.15g} differs from |I| = {length:.15g}")


def _as_set(I) -> MultibandSet:
    return I if isinstance(I, MultibandSet) else MultibandSet.disjoint([I], I.closure)


def trend_for_frequencies(lambdas_by_size, S: MultibandSet, method: str = "auto") -> list:
    rows = []
    for N, lam in lambdas_by_size:
        e = _extremes(lam, S, method)
        rows.append(TrendRow(N, e.lambda_min, e.lambda_max, e.residual))
    return rows


def riesz_trend(alpha: IrrationalAlpha, I, S: MultibandSet, sizes, method: str = "auto") -> list:
    """Extreme Gram eigenvalues for centered slices of the quasicrystal of ``I`` in ``L^2(S)``."""
    sizes = [int(s) for s in sizes]
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ValueError("sizes must be increasing")
    _check_measure(I, S)
    I = _as_set(I)
    big = centered_slice(alpha, I, sizes[-1]).elements
    return trend_for_frequencies([(N, _centered_subset(big, N)) for N in sizes], S, method)


def _centered_subset(elements: np.ndarray, N: int) -> np.ndarray:
    neg = elements[elements < 0]
    pos = elements[elements >= 0]
    n_pos = N // 2
    return np.concatenate([neg[len(neg) - (N - n_pos):], pos[:n_pos]])


def duality_trend(alpha: IrrationalAlpha, I, S: MultibandSet, sizes, method: str = "auto"):
    """Primal table for the quasicrystal of ``I`` on ``S``; dual table for minus the quasicrystal of ``S`` on ``I``."""
    primal = riesz_trend(alpha, I, S, sizes, method)
    I_set = _as_set(I)
    big = centered_slice(alpha, S, sorted(sizes)[-1]).elements
    dual = trend_for_frequencies([(N, -_centered_subset(big, N)[::-1]) for N in sizes], I_set, method)
    return primal, dual


def check_interlacing(rows) -> bool:
    """Nested sections: lambda_min nonincreasing and lambda_max nondecreasing."""
    return all(b.lambda_min <= a.lambda_min and b.lambda_max >= a.lambda_max
               for a, b in zip(rows, rows[1:]))


def pavlov_bmo_diagnostic(slice_: FrequencySlice, a: float, family: str = "dyadic") -> BmoReport:
    """BMO statistics of ``f(n) = n_Lambda(n) - a*n`` sampled at the integers of the window.

    The counting function is normalized by ``n_Lambda(0) = 0``; samples run
    over ``n = max(lo, 0) + 1, ..., hi``.
    """
    if not 0 < a <= 1:
        raise ValueError("a must lie in (0, 1]")
    if slice_.lo > 0:
        raise ValueError("window must contain 0")
    ns = np.arange(1, slice_.hi + 1, dtype=np.int64)
    counts = np.searchsorted(slice_.elements, ns, side="left") - \
        int(np.searchsorted(slice_.elements, 0, side="left"))
    f = counts - a * ns.astype(np.float64)
    rep = bmo_statistic(f, family)
    # labels of ``f`` start at n = 1
    return BmoReport(rep.l1_norm, rep.l2_norm,
                     (rep.worst_window[0] + 1, rep.worst_window[1] + 1), family, rep.N)
