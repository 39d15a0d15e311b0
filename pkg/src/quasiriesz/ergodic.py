"""Ergodic sums under rotation: variance, spectral measures and coboundaries.

Trigonometric polynomials are ``f(x) = sum_k c_k exp(2 pi i k x)`` and the
rotation acts by ``(U f)(x) = f(x + alpha)``.  Variances are computed in
closed form from geometric sums; a uniform-grid quadrature is kept as an
independent oracle.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .coboundary import SawtoothSum, build_coboundary, verify_cocycle
from .diophantine import (
    FIXUP_TOL,
    IrrationalAlpha,
    LatticeElement,
    QuadNumber,
    TorusPoint,
    _sqrt_fraction,
    as_point,
    exact_orbit_point,
    frac_multiple,
    membership_z_alpha_z,
    near_points,
    orbit_values,
)
from .discrepancy import ALL_DYADIC, DiscrepancySeries, bmo_statistic, discrepancy_series
from .errors import MissingCertificate, NotMeanZero
from .torus_sets import MultibandSet

MAX_DEGREE = 10**4
SERIES_SWITCH = 1e-8
GRID_POINTS = 1 << 16


class TrigPolynomial:
    """Finitely supported Fourier coefficients ``{k: c_k}``."""

    def __init__(self, coeffs=None):
        items = {}
        for k, c in dict(coeffs or {}).items():
            k = int(k)
            if abs(k) > MAX_DEGREE:
                raise ValueError(f"degree {abs(k)} exceeds {MAX_DEGREE}")
            c = complex(c)
            if c != 0:
                items[k] = items.get(k, 0j) + c
        self.coeffs = dict(sorted(items.items()))

    @property
    def degree(self) -> int:
        return max((abs(k) for k in self.coeffs), default=0)

    @property
    def ks(self) -> np.ndarray:
        return np.fromiter(self.coeffs, dtype=np.int64, count=len(self.coeffs))

    @property
    def cs(self) -> np.ndarray:
        return np.fromiter(self.coeffs.values(), dtype=complex, count=len(self.coeffs))

    def mean(self) -> complex:
        return self.coeffs.get(0, 0j)

    def norm2(self) -> float:
        """Squared L^2 norm."""
        return float(np.sum(np.abs(self.cs) ** 2))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        phase = np.mod(np.multiply.outer(x, self.ks.astype(float)), 1.0)
        return np.exp(2j * np.pi * phase) @ self.cs

    def __sub__(self, other: "TrigPolynomial") -> "TrigPolynomial":
        out = dict(self.coeffs)
        for k, c in other.coeffs.items():
            out[k] = out.get(k, 0j) - c
        return TrigPolynomial(out)

    def rotate(self, alpha: IrrationalAlpha, n: int = 1) -> "TrigPolynomial":
        """``U^n f = f(. + n*alpha)``."""
        ph = rotation_phases(self.ks, alpha, n)
        return TrigPolynomial(dict(zip(self.ks.tolist(), (self.cs * ph).tolist())))

    def to_json(self) -> dict:
        return {str(k): [c.real, c.imag] for k, c in self.coeffs.items()}

    @classmethod
    def from_json(cls, data) -> "TrigPolynomial":
        if isinstance(data, str):
            data = json.loads(data)
        return cls({int(k): complex(v[0], v[1]) for k, v in data.items()})

    def __repr__(self):
        return f"TrigPolynomial({self.coeffs})"


def random_trig_polynomial(rng: np.random.Generator, degree: int, mean_zero: bool = False) -> TrigPolynomial:
    """Standard complex Gaussian coefficients on ``-degree..degree``."""
    ks = range(-degree, degree + 1)
    c = rng.normal(size=2 * degree + 1) + 1j * rng.normal(size=2 * degree + 1)
    coeffs = dict(zip(ks, c))
    if mean_zero:
        coeffs[0] = 0
    return TrigPolynomial(coeffs)


def rotation_phases(ks: np.ndarray, alpha: IrrationalAlpha, n: int = 1) -> np.ndarray:
    """``exp(2 pi i k n alpha)`` with the phase ``{k n alpha}`` reduced accurately."""
    return np.exp(2j * np.pi * orbit_values(alpha, np.asarray(ks, dtype=np.int64) * int(n)))


@dataclass(frozen=True)
class SpectralMeasure:
    """Atoms ``({k alpha}, |c_k|^2)`` of the spectral measure of ``f``."""

    alpha: IrrationalAlpha
    positions: tuple
    masses: np.ndarray
    ks: np.ndarray

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.masses))

    def position_values(self) -> np.ndarray:
        return np.array([p.value for p in self.positions], dtype=float)

    def fourier(self, n: int) -> complex:
        """``integral of exp(2 pi i n t) d mu``, i.e. ``<U^n f, f>``."""
        return complex(np.sum(self.masses * rotation_phases(self.ks, self.alpha, n)))


def spectral_measure(f: TrigPolynomial, alpha: IrrationalAlpha) -> SpectralMeasure:
    ks = f.ks
    positions = tuple(frac_multiple(alpha, int(k)) for k in ks)
    return SpectralMeasure(alpha, positions, np.abs(f.cs) ** 2, ks)


def correlation_on_grid(f: TrigPolynomial, alpha: IrrationalAlpha, n: int, M: int = GRID_POINTS) -> complex:
    """``<U^n f, f>`` by the uniform M-point rule (exact when ``M > 2*degree``)."""
    x = np.arange(M) / M
    return complex(np.mean(f(np.mod(x + float(frac_multiple(alpha, n).value), 1.0)) * np.conj(f(x))))


def variance_direct(f: TrigPolynomial, alpha: IrrationalAlpha, N: int) -> float:
    """``(1/N) sum_n ||S_n - mean_m S_m||^2`` with ``S_n = sum_{j<n} U^j f``.

    ``S_n`` has coefficients ``c_k (1 - z_k^n) / (1 - z_k)`` with
    ``z_k = exp(2 pi i k alpha)`` (``n c_0`` for ``k = 0``), so the deviation
    from the mean is ``c_k (mean_m z_k^m - z_k^n) / (1 - z_k)`` and the norms
    are finite sums over the support.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if not f.coeffs:
        return 0.0
    ns = np.arange(1, N + 1, dtype=np.int64)
    terms = []
    for k, c in zip(f.ks.tolist(), f.cs.tolist()):
        if k == 0:
            # S_n = n c_0: deviations (n - (N+1)/2) c_0, summed in integers
            dev2 = Fraction(sum((2 * n - N - 1) ** 2 for n in range(1, N + 1)), 4 * N)
            terms.append(float(dev2 * _abs2_exact(c)))
            continue
        zn = np.exp(2j * np.pi * orbit_values(alpha, k * ns))
        # |1 - z|^2 = 4 sin^2(pi {k alpha})
        denom = 4 * math.sin(math.pi * orbit_values(alpha, np.array([k]))[0]) ** 2
        terms.append(abs(c) ** 2 * float(np.mean(np.abs(zn - zn.mean()) ** 2)) / denom)
    return math.fsum(terms)


def _abs2_exact(c: complex) -> Fraction:
    return Fraction(c.real) ** 2 + Fraction(c.imag) ** 2


def kernel_q(t, N: int, nt=None) -> np.ndarray:
    """``Q_N(t) = (1 - sin^2(pi N t) / (N^2 sin^2 pi t)) / (4 sin^2 pi t)``.

    The removable singularity at integers uses the value ``(N^2 - 1)/12``
    and a fourth-order expansion whenever ``|sin pi t| < 1e-8``.  Between
    that and ``N |sin pi t| < 1`` the bracket cancels badly, so there the
    kernel is summed as ``sum_{d<N} (N - d) sin^2(pi d t) / (N^2 sin^2 pi t)``,
    which has only positive terms.  ``nt`` optionally supplies ``{N t}``
    computed more accurately than ``N * t``.
    """
    t = np.asarray(t, dtype=float)
    # distance to the nearest integer, signed
    u = np.mod(t + 0.5, 1.0) - 0.5
    s = np.sin(np.pi * u)
    out = np.empty(t.shape, dtype=float)
    small = np.abs(s) < SERIES_SWITCH
    n2 = float(N) * N
    x2 = (np.pi * u[small]) ** 2
    a0 = (n2 - 1) / 12
    a2 = (n2 - 1) * (n2 - 4) / 90
    a4 = (n2 - 1) * (n2 - 4) * (3 * n2 - 13) / 3780
    out[small] = a0 - a2 * x2 + a4 * x2 * x2
    mid = ~small & (N * np.abs(s) < 1)
    for i in np.argwhere(mid):
        out[tuple(i)] = _fejer_q(float(u[tuple(i)]), int(N))
    rest = ~small & ~mid
    sb = s[rest]
    nu = N * u if nt is None else np.broadcast_to(np.asarray(nt, dtype=float), t.shape)
    sn = np.sin(np.pi * nu[rest])
    out[rest] = (1 - sn * sn / (n2 * sb * sb)) / (4 * sb * sb)
    return out


def _fejer_q(u: float, N: int, chunk: int = 1 << 20) -> float:
    total = 0.0
    for start in range(1, N, chunk):
        d = np.arange(start, min(start + chunk, N), dtype=float)
        total += float(np.sum((N - d) * np.sin(np.pi * d * u) ** 2))
    s = math.sin(math.pi * u)
    return total / (float(N) * N * s * s)


def variance_kernel(f: TrigPolynomial, alpha: IrrationalAlpha, N: int) -> float:
    """``sum mass * Q_N(position)`` over the atoms of the spectral measure."""
    if N < 1:
        raise ValueError("N must be >= 1")
    if not f.coeffs:
        return 0.0
    mu = spectral_measure(f, alpha)
    nt = orbit_values(alpha, mu.ks * N)
    q = kernel_q(mu.position_values(), N, nt)
    terms = []
    for k, c, m, qk in zip(mu.ks.tolist(), f.cs.tolist(), mu.masses.tolist(), q.tolist()):
        if k == 0:
            # exact value of the removable singularity times the exact mass
            terms.append(float(Fraction(N * N - 1, 12) * _abs2_exact(c)))
        else:
            terms.append(m * qk)
    return math.fsum(terms)


def variance_limit(f: TrigPolynomial, alpha: IrrationalAlpha) -> float:
    """``(1/4) sum mass / sin^2(pi position)``; ``inf`` when an atom sits at 0."""
    mu = spectral_measure(f, alpha)
    total = 0.0
    for p, m in zip(mu.positions, mu.masses.tolist()):
        at_zero = p.exact == 0 if p.exact is not None else p.value == 0.0
        if at_zero:
            if m > 0:
                return math.inf
            continue
        total += m / (4 * math.sin(math.pi * p.value) ** 2)
    return total


def variance_quadrature(f: TrigPolynomial, alpha: IrrationalAlpha, N: int, M: int = GRID_POINTS) -> float:
    """Grid oracle for ``V_N``: streams ``S_n`` on ``M`` uniform points.

    ``f(. + n alpha)`` is sampled by an inverse FFT of phase-shifted
    coefficients; two passes avoid storing all partial sums.
    """
    if f.degree >= M // 2:
        raise ValueError("grid too coarse for the polynomial degree")
    if N < 1:
        raise ValueError("N must be >= 1")
    idx = np.mod(f.ks, M)
    cs = f.cs

    def samples(n):
        spec = np.zeros(M, dtype=complex)
        spec[idx] = cs * rotation_phases(f.ks, alpha, n)
        return np.fft.ifft(spec) * M

    def partial_sums():
        acc = np.zeros(M, dtype=complex)
        for n in range(N):
            acc = acc + samples(n)
            yield acc

    mean = np.zeros(M, dtype=complex)
    for s in partial_sums():
        mean += s
    mean /= N
    total = 0.0
    for s in partial_sums():
        total += float(np.mean(np.abs(s - mean) ** 2))
    return total / N


@dataclass
class VarianceCurve:
    N_list: list
    v_direct: np.ndarray
    v_kernel: np.ndarray
    v_limit: float

    def write_csv(self, fp) -> None:
        w = csv.writer(fp, lineterminator="\n")
        w.writerow(["N", "v_direct", "v_kernel", "v_limit"])
        lim = "inf" if math.isinf(self.v_limit) else repr(self.v_limit)
        for N, a, b in zip(self.N_list, self.v_direct.tolist(), self.v_kernel.tolist()):
            w.writerow([N, repr(a), repr(b), lim])


def variance_curve(f: TrigPolynomial, alpha: IrrationalAlpha, N_list) -> VarianceCurve:
    N_list = [int(n) for n in N_list]
    return VarianceCurve(
        N_list,
        np.array([variance_direct(f, alpha, N) for N in N_list]),
        np.array([variance_kernel(f, alpha, N) for N in N_list]),
        variance_limit(f, alpha),
    )


def solve_coboundary_trigpoly(f: TrigPolynomial, alpha: IrrationalAlpha) -> TrigPolynomial:
    """``g`` with ``f = g - U g``: ``g_k = c_k / (1 - exp(2 pi i k alpha))``, ``g_0 = 0``."""
    if f.mean() != 0:
        raise NotMeanZero(f"c_0 = {f.mean()} is not zero")
    z = rotation_phases(f.ks, alpha)
    return TrigPolynomial(dict(zip(f.ks.tolist(), (f.cs / (1 - z)).tolist())))


def coboundary_residual(f: TrigPolynomial, g: TrigPolynomial, alpha: IrrationalAlpha) -> float:
    """``||f - (g - U g)||`` in L^2."""
    return math.sqrt((f - (g - g.rotate(alpha))).norm2())


def _double_double(x: QuadNumber):
    approx = x.a + x.b * _sqrt_fraction(x.d) if x.d else x.a
    hi = float(approx)
    return hi, float(approx - Fraction(hi))


def indicator_ergodic_sums(S: MultibandSet, alpha: IrrationalAlpha, x0, N: int) -> np.ndarray:
    """``S_n(x0) = sum_{k<n} (1_S(x0 + k alpha) - mes S)`` for ``n = 1..N``.

    The orbit is generated by repeated double-double addition of alpha and
    points near an endpoint are decided exactly; this path shares no orbit
    code with :func:`quasiriesz.discrepancy.discrepancy_series`.
    """
    x0 = as_point(x0)
    a_hi, a_lo = _double_double(alpha.exact)
    x_hi, x_lo = _double_double(QuadNumber.coerce(x0))
    pts = np.empty(N, dtype=float)
    for k in range(N):
        pts[k] = x_hi
        # two-sum of the high parts, then fold in the low parts
        s = x_hi + a_hi
        bb = s - x_hi
        err = (x_hi - (s - bb)) + (a_hi - bb)
        lo = err + x_lo + a_lo
        hi = s + lo
        x_lo = lo - (hi - s)
        x_hi = hi
        if x_hi >= 1.0:
            x_hi -= 1.0
    pts[pts >= 1.0] = 0.0
    inside = S.contains_float(pts)
    for k in near_points(pts, S.endpoints(), FIXUP_TOL):
        inside[k] = S.contains(TorusPoint.from_exact(exact_orbit_point(alpha, int(k), x0)))
    return np.cumsum(inside) - S.measure() * np.arange(1, N + 1, dtype=np.float64)


@dataclass
class CoboundaryExperiment:
    alpha: str
    set_spec: str
    x0: float
    certificate: Optional[LatticeElement]
    bmo: dict = field(default_factory=dict)
    sup_abs_sums: dict = field(default_factory=dict)
    g: Optional[SawtoothSum] = None
    cocycle_residual: Optional[float] = None

    def to_json(self) -> dict:
        return {
            "alpha": self.alpha,
            "set": self.set_spec,
            "x0": self.x0,
            "certificate": None if self.certificate is None else [self.certificate.m, self.certificate.n],
            "bmo": {str(k): v.to_json() for k, v in self.bmo.items()},
            "sup_abs_sums": {str(k): v for k, v in self.sup_abs_sums.items()},
            "g": None if self.g is None else self.g.to_json(),
            "cocycle_residual": self.cocycle_residual,
        }


def bmo_coboundary_experiment(S: MultibandSet, alpha: IrrationalAlpha, x0, N,
                              family: str = ALL_DYADIC, m_bound: int = 10_000,
                              tol: float = 1e-9) -> CoboundaryExperiment:
    """Ergodic sums of ``1_S - mes S`` from ``x0`` with BMO statistics and, when available, ``g``.

    ``N`` is one length or an increasing list of lengths.  The sums come from
    the discrepancy series with base point ``x0``.
    """
    N_list = [int(N)] if np.ndim(N) == 0 else [int(n) for n in N]
    if any(b <= a for a, b in zip(N_list, N_list[1:])):
        raise ValueError("N list must be increasing")
    x0 = as_point(x0)
    cert = membership_z_alpha_z(S.measure_exact(), alpha, m_bound, tol)
    rep = CoboundaryExperiment(str(alpha), S.spec(), x0.value, cert)
    series = discrepancy_series(alpha, S, N_list[-1], base=x0)
    for n in N_list:
        sub = DiscrepancySeries(alpha, S, n, series.values[:n], series.hits[:n], x0)
        rep.bmo[n] = bmo_statistic(sub, family)
        rep.sup_abs_sums[n] = sub.sup_abs()
    if cert is not None and S.closure == "left":
        try:
            g = build_coboundary(S, alpha, True, m_bound, tol)
        except MissingCertificate:
            g = None
        if g is not None:
            rep.g = g
            rep.cocycle_residual = verify_cocycle(g, S, alpha)
    return rep

