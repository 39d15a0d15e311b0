"""Discrepancy of the rotation orbit and bounded-mean-oscillation statistics."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numba
import numpy as np

from .diophantine import IrrationalAlpha, LatticeElement, as_point, make_orbit, membership_z_alpha_z
from .quasicrystal import CHUNK
from .torus_sets import MultibandSet

ALL_DYADIC = "dyadic"
EXHAUSTIVE = "exhaustive"
EXHAUSTIVE_MAX_N = 2**13


@dataclass(frozen=True, eq=False)
class DiscrepancySeries:
    """``values[n-1] = D(n)`` for ``n = 1..N``.

    ``hits[n-1]`` is the exact integer hit count.  ``uncertain`` is the
    cumulative number of float-mode boundary-grazing points, so the true
    ``D(n)`` lies within ``values[n-1] +- uncertain[n-1]``.
    """

    alpha: IrrationalAlpha
    S: MultibandSet
    N: int
    values: np.ndarray
    hits: np.ndarray
    base_point: object
    uncertain: Optional[np.ndarray] = None

    @property
    def n(self) -> np.ndarray:
        return np.arange(1, self.N + 1)

    def sup_abs(self) -> float:
        return float(np.max(np.abs(self.values))) if self.N else 0.0


@dataclass(frozen=True)
class BmoReport:
    l1_norm: float
    l2_norm: float
    worst_window: tuple
    window_family: str
    N: int

    def to_json(self) -> dict:
        return {"l1": self.l1_norm, "l2": self.l2_norm,
                "worst_window": list(self.worst_window), "N": self.N,
                "family": self.window_family}


def _hit_indicator(alpha, S, N, base):
    parts, flag_parts = [], []
    for start in range(0, N, CHUNK):
        ks = np.arange(start, min(start + CHUNK, N), dtype=np.int64)
        inside, flagged = S.contains_orbit(make_orbit(alpha, ks, base))
        parts.append(inside)
        flag_parts.append(ks[flagged])
    if not parts:
        return np.zeros(0, dtype=bool), np.zeros(0, dtype=np.int64)
    return np.concatenate(parts), np.concatenate(flag_parts)


def hit_count(alpha: IrrationalAlpha, S: MultibandSet, n: int, base=0) -> int:
    """``#{0 <= k < n : {k*alpha + base} in S}``."""
    if n < 0:
        raise ValueError("n must be >= 0")
    inside, _ = _hit_indicator(alpha, S, n, as_point(base))
    return int(inside.sum())


def discrepancy_series(alpha: IrrationalAlpha, S: MultibandSet, N: int, base=0) -> DiscrepancySeries:
    if N > 10**8:
        raise ValueError("N must be <= 10^8")
    base = as_point(base)
    inside, flagged = _hit_indicator(alpha, S, N, base)
    hits = np.cumsum(inside, dtype=np.int64)
    mes = S.measure()
    values = hits - mes * np.arange(1, N + 1, dtype=np.float64)
    uncertain = None
    if flagged.size:
        marks = np.zeros(N, dtype=np.int64)
        marks[flagged] = 1
        uncertain = np.cumsum(marks)
    return DiscrepancySeries(alpha, S, N, values, hits, base, uncertain)


def _dyadic(c: np.ndarray):
    N = len(c)
    cands = []  # (l1, l2, start, length)
    k = 0
    while (1 << k) <= N:
        L = 1 << k
        nb = N // L
        blocks = c[: nb * L].reshape(nb, L)
        dev = blocks - blocks.mean(axis=1, keepdims=True)
        l1 = np.abs(dev).mean(axis=1)
        l2 = np.sqrt((dev * dev).mean(axis=1))
        j = int(np.argmax(l2))
        cands.append((float(l1.max()), float(l2[j]), j * L, L))
        tail = N - nb * L
        if tail > 1:
            t = c[nb * L:]
            d = t - t.mean()
            cands.append((float(np.abs(d).mean()), float(np.sqrt((d * d).mean())), nb * L, tail))
        k += 1
    l1 = max(x[0] for x in cands)
    best = min(cands, key=lambda x: (-x[1], x[2], x[3]))
    return l1, best[1], best[2], best[3]


@numba.njit(cache=True)
def _exhaustive_kernel(c, order_vals, ranks):
    N = c.shape[0]
    prefix = np.zeros(N + 1)
    prefix2 = np.zeros(N + 1)
    for i in range(N):
        prefix[i + 1] = prefix[i] + c[i]
        prefix2[i + 1] = prefix2[i] + c[i] * c[i]
    cnt = np.zeros(N + 1, dtype=np.int64)
    sm = np.zeros(N + 1)
    best1 = 0.0
    best2 = -1.0
    bn = 0
    bm = 1
    for n in range(N):
        cnt[:] = 0
        sm[:] = 0.0
        for m in range(n + 1, N + 1):
            # insert c[m-1] at its rank in a Fenwick tree
            i = ranks[m - 1] + 1
            v = c[m - 1]
            while i <= N:
                cnt[i] += 1
                sm[i] += v
                i += i & (-i)
            L = m - n
            tot = prefix[m] - prefix[n]
            mu = tot / L
            # number of sorted values <= mu
            lo_ = 0
            hi_ = N
            while lo_ < hi_:
                mid = (lo_ + hi_) // 2
                if order_vals[mid] <= mu:
                    lo_ = mid + 1
                else:
                    hi_ = mid
            i = lo_
            c_le = 0
            s_le = 0.0
            while i > 0:
                c_le += cnt[i]
                s_le += sm[i]
                i -= i & (-i)
            l1 = ((mu * c_le - s_le) + ((tot - s_le) - mu * (L - c_le))) / L
            var = (prefix2[m] - prefix2[n]) / L - mu * mu
            if var < 0.0:
                var = 0.0
            l2 = math.sqrt(var)
            if l1 > best1:
                best1 = l1
            if l2 > best2:
                best2 = l2
                bn = n
                bm = m
    return best1, best2, bn, bm


def _exhaustive(c: np.ndarray):
    c = np.ascontiguousarray(c - c.mean(), dtype=np.float64)
    order = np.argsort(c, kind="stable")
    ranks = np.empty(len(c), dtype=np.int64)
    ranks[order] = np.arange(len(c))
    l1, l2, n, m = _exhaustive_kernel(c, c[order], ranks)
    return float(l1), float(l2), int(n), int(m - n)


def bmo_statistic(series, family: str = ALL_DYADIC) -> BmoReport:
    """Mean-oscillation norms of a sequence over a window family.

    ``series`` is a :class:`DiscrepancySeries` (windows labelled by ``n``,
    starting at 1) or a plain array (labels starting at 0).  ``l1`` is the
    largest mean absolute deviation from the window mean, ``l2`` the largest
    root-mean-square deviation; ``worst_window`` is the half-open label range
    ``[n, m)`` attaining ``l2`` (ties: earliest start, then shortest).
    """
    if isinstance(series, DiscrepancySeries):
        c, offset = np.asarray(series.values, dtype=np.float64), 1
    else:
        c, offset = np.asarray(series, dtype=np.float64), 0
    N = len(c)
    if N == 0:
        return BmoReport(0.0, 0.0, (offset, offset), family, 0)
    if family == ALL_DYADIC:
        l1, l2, start, length = _dyadic(c)
    elif family == EXHAUSTIVE:
        if N > EXHAUSTIVE_MAX_N:
            raise ValueError(f"exhaustive family limited to N <= {EXHAUSTIVE_MAX_N}")
        l1, l2, start, length = _exhaustive(c)
    else:
        raise ValueError(f"unknown window family {family!r}")
    return BmoReport(l1, l2, (start + offset, start + length + offset), family, N)


@dataclass
class DichotomyReport:
    alpha: str
    set_spec: str
    measure: float
    certificate: Optional[LatticeElement]
    sup_abs_D: dict = field(default_factory=dict)
    bmo: dict = field(default_factory=dict)
    verdict: str = ""

    def to_json(self) -> dict:
        return {
            "alpha": self.alpha,
            "set": self.set_spec,
            "measure": self.measure,
            "certificate": None if self.certificate is None else [self.certificate.m, self.certificate.n],
            "sup_abs_D": {str(k): v for k, v in self.sup_abs_D.items()},
            "bmo": {str(k): v.to_json() for k, v in self.bmo.items()},
            "verdict": self.verdict,
        }


BOUNDED = "BoundedPredicted"
UNBOUNDED_BMO = "UnboundedBmoPredicted"


def dichotomy_report(alpha: IrrationalAlpha, I, N_list, family: str = ALL_DYADIC,
                     m_bound: int = 10_000, tol: float = 1e-9) -> DichotomyReport:
    """Bounded-versus-non-BMO report for an interval (or any multiband set).

    The verdict restates whether ``mes`` has an ``m*alpha + n`` certificate;
    the numbers alongside it are measurements, not proofs.
    """
    N_list = [int(n) for n in N_list]
    if any(b <= a for a, b in zip(N_list, N_list[1:])):
        raise ValueError("N_list must be increasing")
    S = I if isinstance(I, MultibandSet) else MultibandSet.disjoint([I], I.closure)
    mes = S.measure_exact()
    cert = membership_z_alpha_z(mes, alpha, m_bound, tol)
    series = discrepancy_series(alpha, S, N_list[-1])
    rep = DichotomyReport(str(alpha), S.spec(), float(mes), cert)
    for N in N_list:
        sub = DiscrepancySeries(alpha, S, N, series.values[:N], series.hits[:N], series.base_point)
        rep.sup_abs_D[N] = sub.sup_abs()
        rep.bmo[N] = bmo_statistic(sub, family)
    rep.verdict = BOUNDED if cert is not None else UNBOUNDED_BMO
    return rep
