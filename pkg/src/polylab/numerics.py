"""Precision policy and the two logarithmic working charts.

All quantities in this package are arbitrary-precision binary floats
(mpmath), rounded to nearest at a configured mantissa size.  Phase
points x in (0, 1) near a hyperbolic polycycle are handled in the
log chart y = -ln x, and parameter values eps in the double-log chart
z = ln(-ln eps); both stay moderate while x and eps underflow any
fixed-precision format.
"""

import os
from dataclasses import dataclass
from typing import Any, Optional

from mpmath import mp, mpf

from .errors import DomainError, InvalidInputError

ENV_BITS = "POLYLAB_BITS"
DEFAULT_BITS = 256
MIN_BITS = 64


def default_bits() -> int:
    raw = os.environ.get(ENV_BITS)
    if raw is None:
        return DEFAULT_BITS
    try:
        bits = int(raw)
    except ValueError as exc:
        raise InvalidInputError(f"{ENV_BITS} must be an integer, got {raw!r}") from exc
    if bits < MIN_BITS:
        raise InvalidInputError(f"{ENV_BITS} must be >= {MIN_BITS}, got {bits}")
    return bits


@dataclass(frozen=True)
class Precision:
    """Working mantissa size in bits plus the associated comparison tolerance.

    tol defaults to 2**(-bits/2): half the mantissa is reserved for
    verifying identities, the other half absorbs roundoff.
    """

    bits: int = DEFAULT_BITS
    tol: Optional[Any] = None

    def __post_init__(self):
        if self.bits < MIN_BITS:
            raise InvalidInputError(f"precision must be >= {MIN_BITS} bits, got {self.bits}")
        if self.tol is None:
            object.__setattr__(self, "tol", mpf(2) ** (-(self.bits // 2)))
        elif not (self.tol > 0):
            raise InvalidInputError("tol must be positive")

    def work(self):
        """Context manager setting the mpmath working precision."""
        return mp.workprec(self.bits)


def default_precision() -> Precision:
    return Precision(bits=default_bits())


def to_mpf(x, prec: Precision):
    """Convert x (mpf, int, float, or decimal string) at working precision."""
    with prec.work():
        return mpf(x)


@dataclass(frozen=True)
class LogValue:
    """y = -ln x for a phase point x > 0; y = +inf encodes the endpoint x = 0."""

    y: Any

    def __post_init__(self):
        if mp.isnan(self.y):
            raise InvalidInputError("LogValue must not be NaN")
        if self.y == mp.ninf:
            raise InvalidInputError("LogValue -inf (x = +inf) is outside the chart")

    @property
    def is_endpoint(self) -> bool:
        return self.y == mp.inf

    @classmethod
    def from_x(cls, x, prec: Precision) -> "LogValue":
        with prec.work():
            xv = mpf(x)
            if xv < 0:
                raise DomainError(f"phase point must be >= 0, got {xv}")
            if xv == 0:
                return cls(mp.inf)
            return cls(-mp.log(xv))

    def to_x(self, prec: Precision):
        with prec.work():
            return mpf(0) if self.is_endpoint else mp.exp(-mpf(self.y))


@dataclass(frozen=True)
class DoubleLogValue:
    """z = ln(-ln eps) for a parameter value eps in (0, 1)."""

    z: Any

    def __post_init__(self):
        if mp.isnan(self.z) or self.z in (mp.inf, mp.ninf):
            raise InvalidInputError("DoubleLogValue must be finite")

    @classmethod
    def from_eps(cls, eps, prec: Precision) -> "DoubleLogValue":
        with prec.work():
            ev = mpf(eps)
            if not (0 < ev < 1):
                raise DomainError(f"parameter must lie in (0, 1), got {ev}")
            return cls(mp.log(-mp.log(ev)))

    def to_eps(self, prec: Precision):
        with prec.work():
            return mp.exp(-mp.exp(mpf(self.z)))


def neg_log_add(y_a: LogValue, y_b: LogValue, prec: Precision) -> LogValue:
    """Return -ln(exp(-y_a) + exp(-y_b)) without leaving the log chart.

    Computed as min - ln(1 + exp(-|y_a - y_b|)), which never overflows;
    once the gap exceeds the mantissa size the smaller term is absorbed
    and the result equals min(y_a, y_b) exactly at working precision.
    """
    return LogValue(_neg_log_add_raw(mpf(y_a.y), mpf(y_b.y), prec))


def _neg_log_add_raw(ya, yb, prec: Precision):
    if ya == mp.inf:
        return yb
    if yb == mp.inf:
        return ya
    with prec.work():
        lo, hi = (ya, yb) if ya <= yb else (yb, ya)
        gap = hi - lo
        if gap > prec.bits * mp.log(2) + 2:
            return +lo
        with mp.extraprec(16):
            corr = mp.log(1 + mp.exp(-gap))
        return lo - corr


def to_double_log(y: LogValue, prec: Precision) -> DoubleLogValue:
    """Map y = -ln x to z = ln y.  Requires y > 0, i.e. x in (0, 1).

    The transform keeps guard bits so that a chart round-trip stays
    within 2 ulp of the working precision.
    """
    with prec.work():
        yv = mpf(y.y)
        if yv == mp.inf:
            raise DomainError("endpoint x = 0 has no finite double-log value")
        if yv <= 0:
            raise DomainError(f"double-log chart needs y > 0, got y = {yv}")
        with mp.extraprec(8):
            return DoubleLogValue(mp.log(yv))


def from_double_log(z: DoubleLogValue, prec: Precision) -> LogValue:
    """Inverse of to_double_log: y = exp z."""
    with prec.work():
        with mp.extraprec(8):
            return LogValue(mp.exp(mpf(z.z)))


def close(a, b, tol) -> bool:
    """Absolute-or-relative comparison used by verdicts and self-checks."""
    return abs(a - b) <= tol * max(1, abs(a), abs(b))
