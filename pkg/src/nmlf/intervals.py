"""Closed-interval arithmetic with outward rounding.

Intervals are the currency of the sound certifier: every primitive below
returns an enclosure of the true real-number range, with the final rounding
of each operation pushed outward via ``nextafter``. The functional layer
(`iadd`, `imul`, ...) works on paired ndarrays of lower/upper bounds so the
branch-and-bound loop can process many boxes at once; the `Interval`
dataclass is the scalar, user-facing view.

Transcendental bounds (sin, cos, tanh, exp) rely on the platform libm being
accurate to within an ulp or two; results are nudged outward by two ulps and
range-clipped where a hard bound exists.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_INF = np.inf
_TWO_PI = 2.0 * math.pi
_HALF_PI = 0.5 * math.pi


class EnclosureError(ValueError):
    """Interval evaluation cannot produce a finite enclosure.

    Raised when a divisor interval straddles zero or a tangent argument
    straddles a pole.
    """


@dataclass(frozen=True)
class Interval:
    """Closed interval [lo, hi] with finite endpoints."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValueError(f"interval endpoints must be finite: [{self.lo}, {self.hi}]")
        if self.lo > self.hi:
            raise ValueError(f"empty interval: lo={self.lo} > hi={self.hi}")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def contains(self, x: float) -> bool:
        return self.lo <= x <= self.hi

    def contains_interval(self, other: "Interval") -> bool:
        return self.lo <= other.lo and other.hi <= self.hi

    def __repr__(self) -> str:
        return f"[{self.lo}, {self.hi}]"


# ---------------------------------------------------------------------------
# Outward rounding helpers
# ---------------------------------------------------------------------------

def _down(x, ulps: int = 1):
    for _ in range(ulps):
        x = np.nextafter(x, -_INF)
    return x


def _up(x, ulps: int = 1):
    for _ in range(ulps):
        x = np.nextafter(x, _INF)
    return x


def outward(lo, hi, ulps: int = 1):
    return _down(lo, ulps), _up(hi, ulps)


# ---------------------------------------------------------------------------
# Vectorized primitives on (lo, hi) ndarray pairs
# ---------------------------------------------------------------------------

def iadd(al, ah, bl, bh):
    return _down(al + bl), _up(ah + bh)


def isub(al, ah, bl, bh):
    return _down(al - bh), _up(ah - bl)


def ineg(al, ah):
    return -ah, -al


def imul(al, ah, bl, bh):
    p1, p2, p3, p4 = al * bl, al * bh, ah * bl, ah * bh
    lo = np.minimum(np.minimum(p1, p2), np.minimum(p3, p4))
    hi = np.maximum(np.maximum(p1, p2), np.maximum(p3, p4))
    return _down(lo), _up(hi)


def iscale(c: float, al, ah):
    """Multiply by an exact scalar constant."""
    if c >= 0.0:
        return _down(c * al), _up(c * ah)
    return _down(c * ah), _up(c * al)


def idiv(al, ah, bl, bh):
    if np.any((np.asarray(bl) <= 0.0) & (np.asarray(bh) >= 0.0)):
        raise EnclosureError("division by an interval containing zero")
    q1, q2, q3, q4 = al / bl, al / bh, ah / bl, ah / bh
    lo = np.minimum(np.minimum(q1, q2), np.minimum(q3, q4))
    hi = np.maximum(np.maximum(q1, q2), np.maximum(q3, q4))
    return _down(lo), _up(hi)


def ipow(al, ah, n: int):
    """Integer power, n >= 0, with even-power tightening (x**2 >= 0)."""
    if n < 0:
        raise ValueError("pow exponent must be a non-negative integer")
    if n == 0:
        return np.ones_like(al), np.ones_like(ah)
    if n == 1:
        return al, ah
    pl, ph = al ** n, ah ** n
    if n % 2 == 1:
        return _down(pl), _up(ph)
    lo = np.where((al <= 0.0) & (ah >= 0.0), 0.0, np.minimum(pl, ph))
    hi = np.maximum(pl, ph)
    return _down(lo, 2), _up(hi, 2)


def iabs(al, ah):
    lo = np.where((al <= 0.0) & (ah >= 0.0), 0.0, np.minimum(np.abs(al), np.abs(ah)))
    hi = np.maximum(np.abs(al), np.abs(ah))
    return lo, hi


def iexp(al, ah):
    return _down(np.exp(al), 2), _up(np.exp(ah), 2)


def itanh(al, ah):
    lo = np.maximum(_down(np.tanh(al), 2), -1.0)
    hi = np.minimum(_up(np.tanh(ah), 2), 1.0)
    return lo, hi


def _contains_critical(al, ah, offset: float, period: float):
    """True where some offset + k*period lies in [al, ah] (slack outward)."""
    slack = 1e-9 * np.maximum(1.0, np.maximum(np.abs(al), np.abs(ah)))
    k = np.floor((ah + slack - offset) / period)
    return offset + k * period >= al - slack


def isin(al, ah):
    wide = (ah - al) >= _TWO_PI
    sl, sh = np.sin(al), np.sin(ah)
    lo = np.minimum(sl, sh)
    hi = np.maximum(sl, sh)
    lo, hi = _down(lo, 2), _up(hi, 2)
    hi = np.where(_contains_critical(al, ah, _HALF_PI, _TWO_PI), 1.0, hi)
    lo = np.where(_contains_critical(al, ah, -_HALF_PI, _TWO_PI), -1.0, lo)
    lo = np.where(wide, -1.0, np.maximum(lo, -1.0))
    hi = np.where(wide, 1.0, np.minimum(hi, 1.0))
    return lo, hi


def icos(al, ah):
    wide = (ah - al) >= _TWO_PI
    cl, ch = np.cos(al), np.cos(ah)
    lo = np.minimum(cl, ch)
    hi = np.maximum(cl, ch)
    lo, hi = _down(lo, 2), _up(hi, 2)
    hi = np.where(_contains_critical(al, ah, 0.0, _TWO_PI), 1.0, hi)
    lo = np.where(_contains_critical(al, ah, math.pi, _TWO_PI), -1.0, lo)
    lo = np.where(wide, -1.0, np.maximum(lo, -1.0))
    hi = np.where(wide, 1.0, np.minimum(hi, 1.0))
    return lo, hi


def itan(al, ah):
    if np.any((np.asarray(ah) - np.asarray(al)) >= math.pi) or np.any(
        _contains_critical(al, ah, _HALF_PI, math.pi)
    ):
        raise EnclosureError("tan over an interval containing a pole")
    return _down(np.tan(al), 2), _up(np.tan(ah), 2)


def isum(los, his, axis: int):
    """Interval sum reduction with per-addition outward rounding.

    Walks the reduction axis sequentially so every partial sum is rounded
    outward once, which keeps the result a true enclosure.
    """
    los = np.moveaxis(np.asarray(los), axis, 0)
    his = np.moveaxis(np.asarray(his), axis, 0)
    acc_lo = los[0].copy()
    acc_hi = his[0].copy()
    for j in range(1, los.shape[0]):
        acc_lo = _down(acc_lo + los[j])
        acc_hi = _up(acc_hi + his[j])
    return acc_lo, acc_hi


def affine_enclosure(W: np.ndarray, b, xl, xh):
    """Enclosure of W @ x + b for x in the box [xl, xh].

    W is an exact point matrix of shape (out, m); xl/xh have shape
    (..., m). Returns bounds of shape (..., out). b may be None.
    """
    pos = W >= 0.0
    xl = np.asarray(xl)[..., None, :]
    xh = np.asarray(xh)[..., None, :]
    p_lo = _down(np.where(pos, W * xl, W * xh))
    p_hi = _up(np.where(pos, W * xh, W * xl))
    lo, hi = isum(p_lo, p_hi, axis=-1)
    if b is not None:
        lo = _down(lo + b)
        hi = _up(hi + b)
    return lo, hi


def dot_enclosure(al, ah, bl, bh):
    """Enclosure of sum_k a_k * b_k over the trailing axis."""
    pl, ph = imul(al, ah, bl, bh)
    return isum(pl, ph, axis=-1)
