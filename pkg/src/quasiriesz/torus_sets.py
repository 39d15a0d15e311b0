"""Semi-closed intervals and multiband sets on the circle R/Z.

Endpoints are kept as :class:`QuadNumber` so that membership of orbit
points can be decided exactly.  A set is either a disjoint union of
intervals or an integer combination of interval indicators whose sum takes
only the values 0 and 1.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .diophantine import (
    FIXUP_TOL,
    FLOAT_FLAG_TOL,
    IrrationalAlpha,
    Orbit,
    QuadNumber,
    as_point,
    near_points,
    parse_number,
)
from .errors import NotAnIndicator

LEFT = "left"
RIGHT = "right"


@dataclass(frozen=True)
class TorusInterval:
    """``[left, left+length)`` (left semi-closed) or ``(left, left+length]``."""

    left: QuadNumber
    length: QuadNumber
    closure: str = LEFT

    def __post_init__(self):
        object.__setattr__(self, "left", QuadNumber.coerce(self.left).frac())
        object.__setattr__(self, "length", QuadNumber.coerce(self.length))
        if not (0 < self.length <= 1):
            raise ValueError(f"interval length {float(self.length)} not in (0, 1]")
        if self.closure not in (LEFT, RIGHT):
            raise ValueError(f"closure must be {LEFT!r} or {RIGHT!r}")

    @property
    def right(self) -> QuadNumber:
        return (self.left + self.length).frac()

    @property
    def is_full(self) -> bool:
        return self.length == 1

    def contains_exact(self, t) -> bool:
        u = (QuadNumber.coerce(t) - self.left).frac()
        if self.closure == LEFT:
            return u < self.length
        if u == 0:
            return self.is_full
        return u <= self.length

    def contains_float(self, t: np.ndarray) -> np.ndarray:
        u = np.mod(np.asarray(t, dtype=float) - float(self.left), 1.0)
        L = float(self.length)
        if self.closure == LEFT:
            return u < L
        return ((u > 0) & (u <= L)) | ((u == 0) & self.is_full)

    def __str__(self):
        return f"I:{float(self.left):.17g},{float(self.length):.17g}"


class MultibandSet:
    """A finite union of disjoint intervals, or an integer combination of them.

    Use :meth:`disjoint`, :meth:`combination` or :meth:`interval` to build
    one; invariants are checked on construction.
    """

    def __init__(self, form: str, terms: Sequence[tuple], closure: str = LEFT):
        self.form = form
        self.closure = closure
        self.terms = tuple((int(c), iv) for c, iv in terms)
        for _, iv in self.terms:
            if iv.closure != closure:
                raise ValueError("closure must be uniform over all intervals")
        if form == "disjoint":
            self._check_disjoint()
        elif form == "combination":
            self._check_indicator()
        else:
            raise ValueError(f"unknown form {form!r}")

    @classmethod
    def disjoint(cls, intervals, closure: str = LEFT) -> "MultibandSet":
        return cls("disjoint", [(1, iv) for iv in intervals], closure)

    @classmethod
    def combination(cls, terms, closure: str = LEFT) -> "MultibandSet":
        return cls("combination", terms, closure)

    @classmethod
    def interval(cls, left, length, closure: str = LEFT) -> "MultibandSet":
        return cls.disjoint([TorusInterval(left, length, closure)], closure)

    @classmethod
    def full(cls, closure: str = LEFT) -> "MultibandSet":
        return cls.interval(0, 1, closure)

    @classmethod
    def empty(cls, closure: str = LEFT) -> "MultibandSet":
        return cls.disjoint([], closure)

    @property
    def intervals(self) -> tuple:
        return tuple(iv for _, iv in self.terms)

    def endpoints(self) -> list:
        """All distinct endpoints, sorted in [0, 1)."""
        pts = set()
        for _, iv in self.terms:
            if not iv.is_full:
                pts.add(iv.left)
                pts.add(iv.right)
            else:
                pts.add(iv.left)
        return sorted(pts)

    def step_value(self, t) -> int:
        return sum(c for c, iv in self.terms if iv.contains_exact(t))

    def _arcs(self):
        """Elementary arcs between consecutive endpoints with their step value."""
        pts = self.endpoints()
        if not pts:
            return []
        arcs = []
        for i, a in enumerate(pts):
            b = pts[(i + 1) % len(pts)]
            length = (b - a).frac() if len(pts) > 1 else QuadNumber(1)
            if length == 0:
                length = QuadNumber(1)
            # the semi-closed arc takes its value at the closed endpoint
            probe = a if self.closure == LEFT else (a + length).frac()
            arcs.append((a, length, self.step_value(probe)))
        return arcs

    def _check_indicator(self):
        for a, length, v in self._arcs():
            if v not in (0, 1):
                witness = (a + length / 3).frac()
                raise NotAnIndicator(
                    f"step value {v} on arc starting at {float(a):.6g}; witness t={float(witness):.6g}",
                    witness=float(witness), value=v)

    def _check_disjoint(self):
        total = QuadNumber(0)
        for _, iv in self.terms:
            total = total + iv.length
        if total > 1:
            raise ValueError("intervals of a disjoint set must have total length <= 1")
        if len(self.terms) > 1:
            for a, length, v in self._arcs():
                if v > 1:
                    raise ValueError(f"intervals overlap near t={float(a):.6g}")

    def measure_exact(self) -> QuadNumber:
        total = QuadNumber(0)
        for c, iv in self.terms:
            total = total + c * iv.length
        return total

    def measure(self) -> float:
        return float(self.measure_exact())

    def contains(self, t) -> bool:
        """Membership of one point; exact whenever the point carries an exact form."""
        p = as_point(t)
        if p.exact is not None:
            return self.step_value(p.exact) == 1
        return bool(self.contains_float(np.array([p.value]))[0])

    def contains_float(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.form == "disjoint":
            out = np.zeros(t.shape, dtype=bool)
            for _, iv in self.terms:
                out |= iv.contains_float(t)
            return out
        val = np.zeros(t.shape, dtype=np.int64)
        for c, iv in self.terms:
            val += c * iv.contains_float(t)
        return val == 1

    def contains_orbit(self, orbit: Orbit):
        """Vectorized membership of orbit points.

        Returns ``(inside, flagged)`` where ``flagged`` holds orbit indices
        whose decision depends on digits beyond a float-mode alpha.  Points
        near an endpoint are re-decided exactly.
        """
        inside = self.contains_float(orbit.values)
        ends = self.endpoints()
        for i in near_points(orbit.values, ends, FIXUP_TOL):
            inside[i] = self.step_value(orbit.exact_at(i)) == 1
        flagged = np.zeros(0, dtype=np.int64)
        if not orbit.alpha.is_exact:
            flagged = near_points(orbit.values, ends, FLOAT_FLAG_TOL)
        return inside, flagged

    def to_disjoint(self) -> "MultibandSet":
        return combination_to_disjoint(self)

    def __repr__(self):
        return f"MultibandSet({self.form}, {self.spec()})"

    def spec(self) -> str:
        if self.form == "disjoint" and len(self.terms) == 1:
            iv = self.terms[0][1]
            return _interval_text(iv)
        if self.form == "disjoint":
            return "C:" + "+".join(f"(1){_interval_body(iv)}" for _, iv in self.terms) \
                if self.terms else "C:"
        return "C:" + "+".join(f"({c}){_interval_body(iv)}" for c, iv in self.terms)


def _interval_body(iv: TorusInterval) -> str:
    return f"{float(iv.left)!r},{float(iv.length)!r}"


def _interval_text(iv: TorusInterval) -> str:
    return f"I:{_interval_body(iv)},{iv.closure}"


def contains(S: MultibandSet, t) -> bool:
    return S.contains(t)


def measure(S: MultibandSet) -> float:
    return S.measure()


def combination_to_disjoint(S: MultibandSet) -> MultibandSet:
    """Canonical sorted disjoint intervals with the same indicator."""
    arcs = S._arcs()
    for a, length, v in arcs:
        if v not in (0, 1):
            witness = (a + length / 3).frac()
            raise NotAnIndicator(f"step value {v}; witness t={float(witness):.6g}",
                                 witness=float(witness), value=v)
    on = [(a, length) for a, length, v in arcs if v == 1]
    if not on:
        return MultibandSet.empty(S.closure)
    if len(on) == len(arcs):
        return MultibandSet.full(S.closure)
    merged = []
    for a, length in on:
        if merged and (merged[-1][0] + merged[-1][1]).frac() == a:
            merged[-1] = (merged[-1][0], merged[-1][1] + length)
        else:
            merged.append((a, length))
    # wrap-around merge of the last run into the first
    if len(merged) > 1 and (merged[-1][0] + merged[-1][1]).frac() == merged[0][0]:
        last = merged.pop()
        merged[0] = (last[0], last[1] + merged[0][1])
    ivs = sorted((TorusInterval(a, length, S.closure) for a, length in merged),
                 key=lambda iv: iv.left)
    return MultibandSet.disjoint(ivs, S.closure)


_TERM_SPLIT = re.compile(r"\+(?=\()")
_TERM_RE = re.compile(r"^\(([+-]?\d+)\)(.+)$")


def parse_interval(text: str, alpha: IrrationalAlpha) -> TorusInterval:
    """Parse ``left,length[,closure]`` (an optional ``I:`` prefix is accepted)."""
    text = text.strip()
    if text.startswith("I:"):
        text = text[2:]
    parts = [p.strip() for p in text.split(",")]
    if len(parts) not in (2, 3):
        raise ValueError(f"interval spec {text!r} needs left,length[,closure]")
    closure = parts[2] if len(parts) == 3 else LEFT
    return TorusInterval(parse_number(parts[0], alpha), parse_number(parts[1], alpha), closure)


def parse_set(text: str, alpha: IrrationalAlpha) -> MultibandSet:
    """Parse ``I:left,length[,closure]`` or ``C:(c1)left,length+(c2)left,length...``.

    Numbers follow :func:`quasiriesz.diophantine.parse_number`; a closure,
    when given on combination terms, must be uniform.
    """
    text = text.strip()
    if text.startswith("I:"):
        iv = parse_interval(text, alpha)
        return MultibandSet.disjoint([iv], iv.closure)
    if text.startswith("C:"):
        body = text[2:].strip()
        if not body:
            return MultibandSet.empty()
        terms = []
        for chunk in _TERM_SPLIT.split(body):
            m = _TERM_RE.match(chunk.strip())
            if not m:
                raise ValueError(f"bad combination term {chunk!r}")
            terms.append((int(m.group(1)), parse_interval(m.group(2), alpha)))
        closures = {iv.closure for _, iv in terms}
        if len(closures) > 1:
            raise ValueError("closure must be uniform")
        return MultibandSet.combination(terms, closures.pop())
    raise ValueError(f"set spec must start with 'I:' or 'C:', got {text!r}")
