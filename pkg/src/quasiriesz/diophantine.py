"""Exact and high-precision arithmetic for the rotation number alpha.

Two representations of alpha are supported:

* ``exact`` -- a quadratic irrational ``(p + q*sqrt(d)) / r`` reduced mod 1.
  Orbit points ``{k*alpha}`` then live in Q(sqrt(d)) and every comparison
  against an exactly represented endpoint is an integer sign test.
* ``float`` -- a double-double ``hi + lo`` for arbitrary alpha.  Internally
  the double-double is used as an exact rational, and results that depend on
  digits beyond its precision are flagged by the callers.

Vectorized orbits split alpha into two 23-bit integer chunks and a small
float tail so that ``{k*alpha}`` is accurate to ~1e-15 for ``|k| < 2**30``.
Points landing within ``FIXUP_TOL`` of a critical point are re-decided with
exact arithmetic.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache, total_ordering
from typing import Optional

import numpy as np

from .errors import PrecisionExhausted

FIXUP_TOL = 1e-12
FLOAT_FLAG_TOL = 1e-9
MAX_ORBIT_INDEX = 2**30

_SQRT_BITS = 200


@lru_cache(maxsize=64)
def _sqrt_fraction(d: int) -> Fraction:
    # floor(sqrt(d) * 2**200) / 2**200
    return Fraction(math.isqrt(d << (2 * _SQRT_BITS)), 1 << _SQRT_BITS)


def _is_square(n: int) -> bool:
    return n >= 0 and math.isqrt(n) ** 2 == n


@total_ordering
class QuadNumber:
    """An element ``a + b*sqrt(d)`` of Q(sqrt(d)) with rational ``a, b``.

    Rationals are stored with ``b == 0`` and ``d == 0`` and mix freely with
    any field.  Mixing two irrational numbers from different fields raises
    ``ValueError``.
    """

    __slots__ = ("a", "b", "d")

    def __init__(self, a=0, b=0, d: int = 0):
        a = Fraction(a)
        b = Fraction(b)
        if b == 0:
            d = 0
        elif d <= 0 or _is_square(d):
            raise ValueError(f"sqrt({d}) is not irrational")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "d", d)

    def __setattr__(self, name, value):
        raise AttributeError("QuadNumber is immutable")

    @classmethod
    def coerce(cls, x) -> "QuadNumber":
        if isinstance(x, QuadNumber):
            return x
        if isinstance(x, TorusPoint):
            return x.exact if x.exact is not None else cls(Fraction(x.value))
        if isinstance(x, (int, Fraction, np.integer)):
            return cls(Fraction(int(x)) if isinstance(x, np.integer) else x)
        if isinstance(x, (float, np.floating)):
            return cls(Fraction(float(x)))
        raise TypeError(f"cannot convert {type(x).__name__} to QuadNumber")

    def _field(self, other: "QuadNumber") -> int:
        if self.d and other.d and self.d != other.d:
            raise ValueError(f"mixing Q(sqrt({self.d})) with Q(sqrt({other.d}))")
        return self.d or other.d

    @property
    def is_rational(self) -> bool:
        return self.b == 0

    def __add__(self, other):
        try:
            other = QuadNumber.coerce(other)
        except TypeError:
            return NotImplemented
        return QuadNumber(self.a + other.a, self.b + other.b, self._field(other))

    __radd__ = __add__

    def __neg__(self):
        return QuadNumber(-self.a, -self.b, self.d)

    def __sub__(self, other):
        try:
            other = QuadNumber.coerce(other)
        except TypeError:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return QuadNumber.coerce(other) - self

    def __mul__(self, other):
        try:
            other = QuadNumber.coerce(other)
        except TypeError:
            return NotImplemented
        d = self._field(other)
        return QuadNumber(
            self.a * other.a + self.b * other.b * d,
            self.a * other.b + self.b * other.a,
            d,
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        try:
            other = QuadNumber.coerce(other)
        except TypeError:
            return NotImplemented
        norm = other.a * other.a - other.b * other.b * other.d
        if norm == 0:
            raise ZeroDivisionError("division by zero QuadNumber")
        conj = QuadNumber(other.a / norm, -other.b / norm, other.d)
        return self * conj

    def __rtruediv__(self, other):
        return QuadNumber.coerce(other) / self

    def _scaled(self):
        """Return integers (A, B, L) with value == (A + B*sqrt(d)) / L, L > 0."""
        den = math.lcm(self.a.denominator, self.b.denominator)
        return self.a.numerator * (den // self.a.denominator), \
            self.b.numerator * (den // self.b.denominator), den

    def sign(self) -> int:
        A, B, _ = self._scaled()
        if B == 0:
            return (A > 0) - (A < 0)
        sa = (A > 0) - (A < 0)
        sb = 1 if B > 0 else -1
        if sa == 0 or sa == sb:
            return sb
        # opposite signs: compare A^2 with B^2 d (never equal, d non-square)
        return sa if A * A > B * B * self.d else sb

    def floor(self) -> int:
        A, B, L = self._scaled()
        if B == 0:
            fl = A
        else:
            s = math.isqrt(B * B * self.d)
            fl = A + s if B > 0 else A - s - 1
        return fl // L

    def frac(self) -> "QuadNumber":
        return self - self.floor()

    def __float__(self) -> float:
        if self.b == 0:
            return float(self.a)
        return float(self.a + self.b * _sqrt_fraction(self.d))

    def __eq__(self, other):
        try:
            other = QuadNumber.coerce(other)
        except TypeError:
            return NotImplemented
        if self.d and other.d and self.d != other.d:
            return False
        return self.a == other.a and self.b == other.b

    def __lt__(self, other):
        try:
            other = QuadNumber.coerce(other)
        except TypeError:
            return NotImplemented
        return (self - other).sign() < 0

    def __hash__(self):
        return hash((self.a, self.b, self.d))

    def __repr__(self):
        if self.b == 0:
            return f"QuadNumber({self.a})"
        return f"QuadNumber({self.a} + {self.b}*sqrt({self.d}))"


@dataclass(frozen=True)
class TorusPoint:
    """A point of R/Z; ``exact`` is present when the point is known exactly."""

    value: float
    exact: Optional[QuadNumber] = None

    @classmethod
    def from_exact(cls, x) -> "TorusPoint":
        x = QuadNumber.coerce(x).frac()
        v = float(x)
        if v >= 1.0:
            v = 0.0 if x == 0 else math.nextafter(1.0, 0.0)
        return cls(v, x)


def as_point(x) -> TorusPoint:
    if isinstance(x, TorusPoint):
        return x
    if isinstance(x, (QuadNumber, Fraction, int, np.integer)):
        return TorusPoint.from_exact(x)
    v = float(x) % 1.0
    return TorusPoint(v if v < 1.0 else 0.0)


@dataclass(frozen=True)
class LatticeElement:
    """The number ``m*alpha + n``."""

    m: int
    n: int
    value: float

    @classmethod
    def of(cls, m: int, n: int, alpha: "IrrationalAlpha") -> "LatticeElement":
        return cls(int(m), int(n), float(m * alpha.exact + n))

    def exact(self, alpha: "IrrationalAlpha") -> QuadNumber:
        return self.m * alpha.exact + self.n


@dataclass(frozen=True)
class ContinuedFraction:
    quotients: tuple
    convergents: tuple


@dataclass(frozen=True)
class IrrationalAlpha:
    """Rotation number; construct with :meth:`quadratic` or :meth:`from_decimal`."""

    mode: str
    p: Optional[int] = None
    q: Optional[int] = None
    d: Optional[int] = None
    r: Optional[int] = None
    hi: Optional[float] = None
    lo: Optional[float] = None
    description: str = field(default="", compare=False)

    @classmethod
    def quadratic(cls, p: int, q: int, d: int, r: int, description: str = "") -> "IrrationalAlpha":
        if d <= 0:
            raise ValueError("d must be positive")
        if _is_square(d):
            raise ValueError("d is a perfect square")
        if r == 0:
            raise ValueError("r must be nonzero")
        if q == 0:
            raise ValueError("q must be nonzero")
        return cls("exact", p=p, q=q, d=d, r=r,
                   description=description or f"({p}+{q}*sqrt({d}))/{r}")

    @classmethod
    def from_float(cls, hi: float, lo: float = 0.0, description: str = "") -> "IrrationalAlpha":
        total = Fraction(hi) + Fraction(lo)
        if not 0 < total < 1:
            raise ValueError("hi + lo must lie in (0, 1)")
        if abs(lo) > math.ulp(hi):
            raise ValueError("|lo| must not exceed ulp(hi)")
        return cls("float", hi=float(hi), lo=float(lo), description=description or repr(hi))

    @classmethod
    def from_decimal(cls, text: str, description: str = "") -> "IrrationalAlpha":
        x = Fraction(text.strip())
        x -= math.floor(x)
        if x == 0:
            raise ValueError("alpha must not be an integer")
        hi = float(x)
        lo = float(x - Fraction(hi))
        return cls.from_float(hi, lo, description or text.strip())

    @property
    def is_exact(self) -> bool:
        return self.mode == "exact"

    @cached_property
    def exact(self) -> QuadNumber:
        """alpha reduced mod 1; a rational in float mode (the double-double value)."""
        if self.is_exact:
            return QuadNumber(Fraction(self.p, self.r), Fraction(self.q, self.r), self.d).frac()
        return QuadNumber(Fraction(self.hi) + Fraction(self.lo))

    @cached_property
    def value(self) -> float:
        return float(self.exact)

    def to_float_mode(self) -> "IrrationalAlpha":
        if not self.is_exact:
            return self
        x = self.exact
        hi = float(x)
        approx = x.a + x.b * _sqrt_fraction(x.d)
        lo = float(approx - Fraction(hi))
        return IrrationalAlpha.from_float(hi, lo, self.description)

    @cached_property
    def _split(self):
        x = self.exact
        approx = x.a + x.b * _sqrt_fraction(x.d) if x.d else x.a
        m1 = math.floor(approx * (1 << 23))
        m2 = math.floor(approx * (1 << 46)) - (m1 << 23)
        tail = float(approx - Fraction(m1, 1 << 23) - Fraction(m2, 1 << 46))
        return m1, m2, tail

    def __str__(self):
        return self.description


def golden() -> IrrationalAlpha:
    return IrrationalAlpha.quadratic(-1, 1, 5, 2, "(sqrt5-1)/2")


def silver() -> IrrationalAlpha:
    return IrrationalAlpha.quadratic(-1, 1, 2, 1, "sqrt2-1")


def frac_multiple(alpha: IrrationalAlpha, k: int) -> TorusPoint:
    """Return ``{k*alpha}``; exact form attached in exact mode."""
    x = (int(k) * alpha.exact).frac()
    if alpha.is_exact:
        return TorusPoint.from_exact(x)
    return TorusPoint(TorusPoint.from_exact(x).value)


def exact_orbit_point(alpha: IrrationalAlpha, k: int, base=None) -> QuadNumber:
    x = int(k) * alpha.exact
    if base is not None:
        x = x + QuadNumber.coerce(base)
    return x.frac()


def orbit_values(alpha: IrrationalAlpha, ks, base=None) -> np.ndarray:
    """Float values of ``{k*alpha + base}`` for an integer array ``ks``."""
    ks = np.asarray(ks, dtype=np.int64)
    if ks.size and int(np.max(np.abs(ks))) >= MAX_ORBIT_INDEX:
        raise OverflowError(f"orbit index beyond {MAX_ORBIT_INDEX} would overflow int64 intermediates")
    m1, m2, tail = alpha._split
    f1 = np.mod(ks * m1, 1 << 23).astype(np.float64) / float(1 << 23)
    f2 = np.mod(ks * m2, 1 << 46).astype(np.float64) / float(1 << 46)
    x = f1 + f2 + ks.astype(np.float64) * tail
    if base is not None:
        x += as_point(base).value
    x = np.mod(x, 1.0)
    x[x >= 1.0] = 0.0
    return x


@dataclass(frozen=True, eq=False)
class Orbit:
    """Orbit points ``{k*alpha + base}`` for ``k`` in ``ks``.

    ``values`` are floats; :meth:`exact_at` recomputes a point exactly.
    """

    alpha: IrrationalAlpha
    ks: np.ndarray
    base: TorusPoint
    values: np.ndarray

    def exact_at(self, i: int) -> QuadNumber:
        return exact_orbit_point(self.alpha, int(self.ks[i]), self.base)

    def __len__(self):
        return len(self.ks)


def make_orbit(alpha: IrrationalAlpha, ks, base=None) -> Orbit:
    base = as_point(0 if base is None else base)
    ks = np.asarray(ks, dtype=np.int64)
    return Orbit(alpha, ks, base, orbit_values(alpha, ks, base))


def near_points(values: np.ndarray, points, tol: float) -> np.ndarray:
    """Indices of ``values`` within circular distance ``tol`` of any of ``points``."""
    mask = np.zeros(values.shape, dtype=bool)
    for p in points:
        dist = np.abs(values - float(p))
        mask |= np.minimum(dist, 1.0 - dist) < tol
    return np.nonzero(mask)[0]


def cf_expand(alpha: IrrationalAlpha, depth: int) -> ContinuedFraction:
    """First ``depth`` partial quotients of alpha (``a_0 = 0`` omitted)."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    x = alpha.exact
    quotients = []
    convergents = []
    p_prev, q_prev, p, q = 1, 0, 0, 1
    for _ in range(depth):
        if not alpha.is_exact:
            residual = abs(alpha.exact.a - Fraction(p, q))
            if residual < Fraction(1, 2**45):
                raise PrecisionExhausted(
                    f"residual {float(residual):.3g} below 2^-45 after {len(quotients)} quotients")
        inv = 1 / x
        a = inv.floor()
        x = inv - a
        quotients.append(a)
        p_prev, p = p, a * p + p_prev
        q_prev, q = q, a * q + q_prev
        convergents.append((p, q))
    return ContinuedFraction(tuple(quotients), tuple(convergents))


def _is_exact_input(x) -> bool:
    if isinstance(x, TorusPoint):
        return x.exact is not None
    return isinstance(x, (QuadNumber, Fraction, int, np.integer))


def membership_z_alpha_z(x, alpha: IrrationalAlpha, m_bound: int = 10_000,
                         tol: float = 1e-9) -> Optional[LatticeElement]:
    """Find ``(m, n)`` with ``x = m*alpha + n`` and the smallest ``|m|``.

    Exact inputs (QuadNumber, Fraction, int) with an exact alpha are decided
    exactly and ``tol`` is ignored.  Float inputs are matched to within
    ``tol``.  ``None`` means no certificate with ``|m| <= m_bound``; it is not
    a proof of non-membership.
    """
    if m_bound < 1:
        raise ValueError("m_bound must be >= 1")
    if alpha.is_exact and _is_exact_input(x):
        xq = QuadNumber.coerce(x)
        a = alpha.exact
        if xq.b != 0 and xq.d != alpha.d:
            return None
        m = xq.b / a.b
        if m.denominator != 1:
            return None
        m = int(m)
        n = xq.a - m * a.a
        if n.denominator != 1 or abs(m) > m_bound:
            return None
        return LatticeElement.of(m, int(n), alpha)

    xf = float(x.value if isinstance(x, TorusPoint) else x)
    ms = np.arange(-m_bound, m_bound + 1, dtype=np.int64)
    fr = orbit_values(alpha, ms)
    diff = xf - fr
    resid = np.abs(diff - np.round(diff))
    hits = np.nonzero(resid <= tol)[0]
    if hits.size == 0:
        return None
    best = None
    for i in hits:
        m = int(ms[i])
        n = int(round(diff[i])) - (m * alpha.exact).floor()
        key = (abs(m), abs(n), m < 0)
        if best is None or key < best[0]:
            best = (key, m, n)
    return LatticeElement.of(best[1], best[2], alpha)


_QUAD_RE = re.compile(r"^quad:\s*(-?\d+)\s*,\s*(-?\d+)\s*,\s*(-?\d+)\s*,\s*(-?\d+)\s*$")
_LATTICE_RE = re.compile(r"^([+-]?\d*)\*?a(?:([+-]\d+))?$")

ALIASES = {"golden": golden, "silver": silver}


def parse_alpha(text: str) -> IrrationalAlpha:
    """Parse ``quad:p,q,d,r``, an alias (golden, silver) or a decimal literal."""
    text = text.strip()
    if text in ALIASES:
        return ALIASES[text]()
    m = _QUAD_RE.match(text)
    if m:
        p, q, d, r = (int(g) for g in m.groups())
        return IrrationalAlpha.quadratic(p, q, d, r)
    if text.startswith("quad:"):
        raise ValueError(f"malformed quadratic alpha {text!r}; expected quad:p,q,d,r")
    try:
        return IrrationalAlpha.from_decimal(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"cannot parse alpha {text!r}: {exc}") from None


def parse_number(text: str, alpha: IrrationalAlpha) -> QuadNumber:
    """Parse a real number for set specs.

    Accepted forms: decimals (``0.25``), fractions (``1/3``), lattice values
    ``[m][*]a[+-n]`` such as ``3a-1`` or ``-a+1``, and ``{...}`` for the
    fractional part of any of these.
    """
    text = text.strip().replace(" ", "")
    if text.startswith("{") and text.endswith("}"):
        return parse_number(text[1:-1], alpha).frac()
    m = _LATTICE_RE.match(text)
    if m:
        coef, const = m.groups()
        coef = {"": 1, "+": 1, "-": -1}[coef] if coef in ("", "+", "-") else int(coef)
        const = int(const) if const else 0
        # ``a`` always denotes the reduced alpha in (0, 1)
        return coef * alpha.exact + const
    return QuadNumber(Fraction(text))
