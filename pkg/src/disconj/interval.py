"""Real intervals with open/closed endpoints."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass

__all__ = ["Interval"]

_IV_RE = re.compile(r"^\s*([\[(])\s*([^,]+?)\s*,\s*([^,]+?)\s*([\])])\s*$")


def _parse_endpoint(s):
    s = s.strip().lower().replace("∞", "inf")
    if s in ("inf", "+inf", "infinity"):
        return math.inf
    if s in ("-inf", "-infinity"):
        return -math.inf
    if s == "pi":
        return math.pi
    return float(s)


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float
    lo_closed: bool = True
    hi_closed: bool = True

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"empty interval: lo={self.lo} >= hi={self.hi}")
        # infinite endpoints are never closed
        if math.isinf(self.lo) and self.lo_closed:
            object.__setattr__(self, "lo_closed", False)
        if math.isinf(self.hi) and self.hi_closed:
            object.__setattr__(self, "hi_closed", False)

    @classmethod
    def closed(cls, lo, hi):
        return cls(float(lo), float(hi), True, True)

    @classmethod
    def open(cls, lo, hi):
        return cls(float(lo), float(hi), False, False)

    @classmethod
    def closed_open(cls, lo, hi):
        return cls(float(lo), float(hi), True, False)

    @classmethod
    def open_closed(cls, lo, hi):
        return cls(float(lo), float(hi), False, True)

    @classmethod
    def real_line(cls):
        return cls(-math.inf, math.inf, False, False)

    @classmethod
    def parse(cls, text: str) -> "Interval":
        """Parse mathematical notation such as ``"[0, pi)"`` or ``"(-inf, 2]"``."""
        m = _IV_RE.match(text)
        if not m:
            raise ValueError(f"cannot parse interval {text!r}")
        lb, lo, hi, rb = m.groups()
        return cls(_parse_endpoint(lo), _parse_endpoint(hi), lb == "[", rb == "]")

    @property
    def length(self) -> float:
        return self.hi - self.lo

    @property
    def is_finite(self) -> bool:
        return math.isfinite(self.lo) and math.isfinite(self.hi)

    @property
    def is_closed(self) -> bool:
        return self.lo_closed and self.hi_closed

    def contains(self, t: float) -> bool:
        if t < self.lo or t > self.hi:
            return False
        if t == self.lo and not self.lo_closed:
            return False
        if t == self.hi and not self.hi_closed:
            return False
        return True

    __contains__ = contains

    def contains_interval(self, other: "Interval") -> bool:
        lo_ok = other.lo > self.lo or (other.lo == self.lo and (self.lo_closed or not other.lo_closed))
        hi_ok = other.hi < self.hi or (other.hi == self.hi and (self.hi_closed or not other.hi_closed))
        return lo_ok and hi_ok

    def truncate(self, lo: float, hi: float) -> "Interval":
        """Intersect with the finite window ``[lo, hi]``."""
        nlo, lc = (self.lo, self.lo_closed) if self.lo >= lo else (lo, True)
        nhi, hc = (self.hi, self.hi_closed) if self.hi <= hi else (hi, True)
        return Interval(nlo, nhi, lc, hc)

    def __str__(self):
        def f(x):
            return "inf" if x == math.inf else "-inf" if x == -math.inf else repr(float(x))
        return f"{'[' if self.lo_closed else '('}{f(self.lo)}, {f(self.hi)}{']' if self.hi_closed else ')'}"

    def to_json(self):
        return {"lo": _json_float(self.lo), "hi": _json_float(self.hi),
                "lo_closed": self.lo_closed, "hi_closed": self.hi_closed}


def _json_float(x):
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return float(x)
