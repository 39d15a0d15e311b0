"""Quasicrystal frequency sets ``{n : {n*alpha} in S}`` and their densities."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .diophantine import IrrationalAlpha, make_orbit
from .errors import OutOfWindow
from .torus_sets import MultibandSet

CHUNK = 1 << 20
MAX_WINDOW = 10**8
DEFAULT_R_VALUES = tuple(2**k for k in range(7, 15))


@dataclass(frozen=True, eq=False)
class FrequencySlice:
    """The elements of the quasicrystal inside the integer window ``[lo, hi)``."""

    alpha: IrrationalAlpha
    S: MultibandSet
    lo: int
    hi: int
    elements: np.ndarray
    boundary_warnings: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def __len__(self):
        return len(self.elements)


def _membership(alpha, S, lo, hi):
    inside_parts, flag_parts = [], []
    for start in range(lo, hi, CHUNK):
        ks = np.arange(start, min(start + CHUNK, hi), dtype=np.int64)
        inside, flagged = S.contains_orbit(make_orbit(alpha, ks))
        inside_parts.append(inside)
        flag_parts.append(ks[flagged])
    if not inside_parts:
        return np.zeros(0, dtype=bool), np.zeros(0, dtype=np.int64)
    return np.concatenate(inside_parts), np.concatenate(flag_parts)


def lambda_slice(alpha: IrrationalAlpha, S: MultibandSet, lo: int, hi: int) -> FrequencySlice:
    if not lo < hi:
        raise ValueError("need lo < hi")
    if hi - lo > MAX_WINDOW:
        raise ValueError(f"window wider than {MAX_WINDOW}")
    inside, flagged = _membership(alpha, S, lo, hi)
    elements = np.arange(lo, hi, dtype=np.int64)[inside]
    return FrequencySlice(alpha, S, lo, hi, elements, flagged)


def centered_slice(alpha: IrrationalAlpha, S: MultibandSet, size: int) -> FrequencySlice:
    """The ``size`` elements nearest 0: ``size//2`` nonnegative, the rest negative."""
    if size < 1:
        raise ValueError("size must be >= 1")
    mes = S.measure()
    if mes <= 0:
        raise ValueError("set has measure zero")
    n_pos = size // 2
    n_neg = size - n_pos
    half = int(math.ceil(size / (2 * mes) * 1.25)) + 16
    while True:
        sl = lambda_slice(alpha, S, -half, half)
        el = sl.elements
        pos = el[el >= 0]
        neg = el[el < 0]
        if len(pos) >= n_pos and len(neg) >= n_neg:
            break
        half *= 2
    chosen = np.concatenate([neg[len(neg) - n_neg:], pos[:n_pos]])
    lo = int(chosen[0])
    hi = int(chosen[-1]) + 1
    warn = sl.boundary_warnings
    warn = warn[(warn >= lo) & (warn < hi)]
    return FrequencySlice(alpha, S, lo, hi, chosen, warn)


def counting_function(slice_: FrequencySlice, x: float) -> int:
    """Counting function normalized to vanish at 0.

    ``n(b) - n(a) = #(elements in [a, b))``; both ``x`` and 0 must lie in
    ``[lo, hi]``.
    """
    if not (slice_.lo <= x <= slice_.hi) or not (slice_.lo <= 0 <= slice_.hi):
        raise OutOfWindow(f"x={x} (or 0) outside window [{slice_.lo}, {slice_.hi}]")
    el = slice_.elements
    at_x = int(np.searchsorted(el, x, side="left"))
    at_0 = int(np.searchsorted(el, 0, side="left"))
    return at_x - at_0


def density_profile(slice_: FrequencySlice, r_values=DEFAULT_R_VALUES):
    """Min and max of ``#(elements in [a, a+r)) / r`` over integer ``a``."""
    width = slice_.hi - slice_.lo
    indicator = np.zeros(width, dtype=np.int64)
    indicator[slice_.elements - slice_.lo] = 1
    prefix = np.concatenate([[0], np.cumsum(indicator)])
    rows = []
    for r in r_values:
        r = int(r)
        if r < 1 or r > width // 2:
            raise ValueError(f"r={r} must lie in [1, {width // 2}]")
        counts = prefix[r:] - prefix[:-r]
        rows.append((r, counts.min() / r, counts.max() / r))
    return rows


def write_slice_csv(slice_: FrequencySlice, fp) -> None:
    """Write every window index with its orbit point, membership and boundary flag."""
    ks = np.arange(slice_.lo, slice_.hi, dtype=np.int64)
    values = make_orbit(slice_.alpha, ks).values
    member = np.zeros(len(ks), dtype=np.int64)
    member[slice_.elements - slice_.lo] = 1
    flags = np.zeros(len(ks), dtype=np.int64)
    flags[slice_.boundary_warnings - slice_.lo] = 1
    w = csv.writer(fp, lineterminator="\n")
    w.writerow(["n", "frac_n_alpha", "in_S", "boundary_flag"])
    for k, v, m, f in zip(ks.tolist(), values.tolist(), member.tolist(), flags.tolist()):
        w.writerow([k, repr(v), m, f])
