"""Sawtooth coboundaries for multiband indicators and the Avdonin block check.

For a left semi-closed interval ``[a, a + L)`` with ``L = m*alpha + n`` the
function ``g(t) = sum_{k=1..m} theta(t - a - k*alpha)`` (``m > 0``) or
``g(t) = -sum_{k=0..|m|-1} theta(t - a + k*alpha)`` (``m < 0``) satisfies
``1_I(t) - |I| = g(t) - g(t + alpha)`` for every ``t``, where ``theta`` is
the 1-periodic sawtooth equal to ``t`` on ``[0, 1)``.  Integer combinations
of intervals combine linearly.
"""
from __future__ import annotations

import csv
import logging
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Optional

import numpy as np

from .diophantine import (
    FIXUP_TOL,
    IrrationalAlpha,
    Orbit,
    QuadNumber,
    as_point,
    make_orbit,
    membership_z_alpha_z,
    near_points,
)
from .errors import MissingCertificate, ReconstructionFailure
from .quasicrystal import FrequencySlice
from .torus_sets import LEFT, MultibandSet

log = logging.getLogger(__name__)

JUMP_GUARD = 1e-9


@dataclass(frozen=True)
class SawtoothSum:
    """``g(t) = offset + sum coeff * theta(t - shift)``; right-continuous."""

    terms: tuple
    offset: float = 0.0

    def shifts(self) -> list:
        return [s for _, s in self.terms]

    def sup_bound(self) -> float:
        return sum(abs(c) for c, _ in self.terms) + abs(self.offset)

    def with_offset(self, offset: float) -> "SawtoothSum":
        return SawtoothSum(self.terms, float(offset))

    def exact_sum(self, t) -> QuadNumber:
        """The sawtooth part (without offset) evaluated exactly."""
        t = QuadNumber.coerce(t)
        total = QuadNumber(0)
        for c, s in self.terms:
            total = total + c * (t - s).frac()
        return total

    def to_json(self) -> dict:
        return {
            "terms": [{"coeff": c, "shift": float(s), "shift_exact": repr(s)} for c, s in self.terms],
            "offset": self.offset,
        }


def evaluate(g: SawtoothSum, t) -> float:
    p = as_point(t)
    if p.exact is not None:
        return float(g.exact_sum(p.exact)) + g.offset
    return float(evaluate_float(g, np.array([p.value]))[0])


def evaluate_float(g: SawtoothSum, t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    out = np.full(t.shape, g.offset, dtype=float)
    for c, s in g.terms:
        out += c * np.mod(t - float(s), 1.0)
    return out


def evaluate_orbit(g: SawtoothSum, orbit: Orbit) -> np.ndarray:
    """Values of ``g`` at orbit points; points near a jump are evaluated exactly."""
    out = evaluate_float(g, orbit.values)
    for i in near_points(orbit.values, g.shifts(), FIXUP_TOL):
        out[i] = float(g.exact_sum(orbit.exact_at(i))) + g.offset
    return out


def _theta_antiderivative(x: QuadNumber) -> QuadNumber:
    # integral of theta over [0, x]
    fl = x.floor()
    fr = x - fl
    return Fraction(fl, 2) + fr * fr / 2


def integral_over(g_terms, S: MultibandSet) -> QuadNumber:
    """Exact integral over ``S`` of the sawtooth part of ``g``."""
    total = QuadNumber(0)
    for cj, iv in S.terms:
        for c, s in g_terms:
            lo = iv.left - s
            total = total + cj * c * (_theta_antiderivative(lo + iv.length) - _theta_antiderivative(lo))
    return total


def build_coboundary(S: MultibandSet, alpha: IrrationalAlpha, normalize: bool = True,
                     m_bound: int = 10_000, tol: float = 1e-9) -> SawtoothSum:
    """Sawtooth sum ``g`` with ``1_S - mes S = g - g(. + alpha)``.

    Every interval length of ``S`` needs an ``m*alpha + n`` certificate.
    With ``normalize`` the offset makes the integral of ``g`` over ``S``
    vanish.
    """
    if S.closure != LEFT:
        raise ValueError("build_coboundary expects a left semi-closed set")
    terms = []
    for cj, iv in S.terms:
        length = iv.length if alpha.is_exact else float(iv.length)
        cert = membership_z_alpha_z(length, alpha, m_bound, tol)
        if cert is None:
            raise MissingCertificate(
                f"interval length {float(iv.length):.17g} has no m*alpha+n certificate with |m| <= {m_bound}")
        m = cert.m
        if m > 0:
            terms.extend((cj, (iv.left + k * alpha.exact).frac()) for k in range(1, m + 1))
        elif m < 0:
            terms.extend((-cj, (iv.left - k * alpha.exact).frac()) for k in range(0, -m))
    # merge repeated shifts
    merged = defaultdict(int)
    for c, s in terms:
        merged[s] += c
    terms = tuple((c, s) for s, c in sorted(merged.items()) if c != 0)
    offset = 0.0
    mes = S.measure_exact()
    if normalize and mes != 0:
        offset = float(-integral_over(terms, S) / mes)
    return SawtoothSum(terms, offset)


def verify_cocycle(g: SawtoothSum, S: MultibandSet, alpha: IrrationalAlpha,
                   grid_size: int = 10_000, rng_seed=0) -> float:
    """Max of ``|1_S(t) - mes S - g(t) + g(t + alpha)|`` over seeded random ``t``.

    Points within 1e-9 of a jump of either side are nudged off it.
    """
    if grid_size < 1:
        raise ValueError("grid_size must be >= 1")
    rng = np.random.default_rng(rng_seed)
    t = rng.random(grid_size)
    a = alpha.value
    jumps = [float(s) for s in g.shifts()] + [(float(s) - a) % 1.0 for s in g.shifts()] \
        + [float(e) for e in S.endpoints()]
    nudged = 0
    for _ in range(8):
        idx = near_points(t, jumps, JUMP_GUARD)
        if idx.size == 0:
            break
        nudged += idx.size
        t[idx] = np.mod(t[idx] + 3 * JUMP_GUARD, 1.0)
    if nudged:
        log.debug("verify_cocycle: nudged %d points off jumps", nudged)
    lhs = S.contains_float(t).astype(float) - S.measure()
    rhs = evaluate_float(g, t) - evaluate_float(g, np.mod(t + a, 1.0))
    return float(np.max(np.abs(lhs - rhs)))


def cocycle_jumps(g: SawtoothSum, alpha: IrrationalAlpha) -> dict:
    """Exact jump set of ``g(t) - g(t + alpha)`` as ``{position: jump}``."""
    jumps = defaultdict(int)
    for c, s in g.terms:
        jumps[s] -= c
        jumps[(s - alpha.exact).frac()] += c
    return {p: j for p, j in sorted(jumps.items()) if j != 0}


def indicator_jumps(S: MultibandSet) -> dict:
    """Jumps of ``1_S`` for a left semi-closed set: +1 at left ends, -1 at right ends."""
    jumps = defaultdict(int)
    for c, iv in S.terms:
        if iv.is_full:
            continue
        jumps[iv.left] += c
        jumps[iv.right] -= c
    return {p: j for p, j in sorted(jumps.items()) if j != 0}


class AvdoninDeltas(NamedTuple):
    deltas: np.ndarray
    c: float


def slice_indices(slice_: FrequencySlice) -> np.ndarray:
    """Two-sided enumeration index ``j`` with ``lambda_0`` the first element >= 0."""
    if slice_.lo > 0:
        raise ValueError("slice window must contain 0 for the two-sided enumeration")
    j0 = int(np.searchsorted(slice_.elements, 0, side="left"))
    return np.arange(len(slice_.elements), dtype=np.int64) - j0


def avdonin_deltas(g: SawtoothSum, slice_: FrequencySlice, tol: float = 1e-9) -> AvdoninDeltas:
    """``delta_j = g({lambda_j alpha})`` and ``c = -g(0)``.

    Checks ``lambda_j = (j + delta_j + c) / mes S`` for every ``j`` and
    raises :class:`ReconstructionFailure` at the first violation.
    """
    js = slice_indices(slice_)
    lam = slice_.elements
    deltas = evaluate_orbit(g, make_orbit(slice_.alpha, lam))
    c = -evaluate(g, 0)
    mes = slice_.S.measure()
    if mes == 0:
        raise ReconstructionFailure("set has measure zero")
    recon = (js + deltas + c) / mes
    bad = np.nonzero(np.abs(recon - lam) > tol)[0]
    if bad.size:
        j = int(js[bad[0]])
        raise ReconstructionFailure(
            f"lambda_{j}={int(lam[bad[0]])} but (j+delta+c)/mes={recon[bad[0]]:.12g}", j=j)
    return AvdoninDeltas(deltas, c)


def write_deltas_csv(slice_: FrequencySlice, ad: AvdoninDeltas, fp) -> None:
    w = csv.writer(fp, lineterminator="\n")
    w.writerow(["j", "lambda_j", "delta_j"])
    for j, lam, d in zip(slice_indices(slice_).tolist(), slice_.elements.tolist(), ad.deltas.tolist()):
        w.writerow([j, lam, repr(d)])


def block_average_sup(deltas: np.ndarray, N: int) -> float:
    """``sup_n |mean(deltas[n:n+N])|`` over blocks inside the array."""
    cs = np.concatenate([[0.0], np.cumsum(deltas)])
    return float(np.max(np.abs(cs[N:] - cs[:-N])) / N)


def find_avdonin_N(deltas, threshold: float = 0.25, N_max: int = 1000) -> Optional[int]:
    """Smallest ``N <= N_max`` whose block averages all stay below ``threshold``."""
    deltas = np.asarray(deltas, dtype=float)
    if N_max > len(deltas):
        raise ValueError("window too short for blocks of length N_max")
    cs = np.concatenate([[0.0], np.cumsum(deltas)])
    for N in range(1, N_max + 1):
        if np.max(np.abs(cs[N:] - cs[:-N])) / N < threshold:
            return N
    return None
