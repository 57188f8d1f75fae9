"""
Arbitrary-precision numeric contract shared by every module of the laboratory.

All evaluation runs on mpmath. A NumericContext fixes the decimal precision,
the guard digits and the oversampling policy; modules enter the matching
mpmath working precision through ``ctx.workdps()``.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Union

import mpmath
from mpmath.libmp import repr_dps

DEFAULT_GUARD_DIGITS = 20
DEFAULT_OVERSAMPLE_FACTOR = Fraction(2)
MIN_PRECISION_DIGITS = 10
ROUNDING_MODE = "nearest"

HPComplex = mpmath.mpc

Agreement = Union[int, str]


class BaezDuarteError(Exception):
    """Base class for every error raised by the laboratory."""


class DomainError(BaezDuarteError, ValueError):
    """Argument outside the domain of an operation."""


class InsufficientPrecisionError(BaezDuarteError):
    def __init__(self, message, required_digits):
        super().__init__(f"{message} (required precision: {required_digits} digits)")
        self.detail = message
        self.required_digits = required_digits

    def __reduce__(self):
        return type(self), (self.detail, self.required_digits)


class NonConvergenceError(BaezDuarteError):
    def __init__(self, message, best_estimate=None, terms_used=None):
        super().__init__(message)
        self.best_estimate = best_estimate
        self.terms_used = terms_used

    def __reduce__(self):
        return type(self), (self.args[0], self.best_estimate, self.terms_used)


@dataclass(frozen=True)
class NumericContext:
    precision_digits: int
    guard_digits: int = DEFAULT_GUARD_DIGITS
    oversample_factor: Fraction = DEFAULT_OVERSAMPLE_FACTOR

    @property
    def working_digits(self):
        return self.precision_digits + self.guard_digits

    @property
    def oversampled_precision(self):
        return math.ceil(self.oversample_factor * self.precision_digits)

    @property
    def oversampled_digits(self):
        return self.oversampled_precision + self.guard_digits

    @property
    def epsilon(self):
        return mpmath.mpf(10) ** (-self.working_digits)

    def workdps(self, oversampled=False):
        """mpmath context manager for the working (or oversampled) precision."""
        return mpmath.workdps(self.oversampled_digits if oversampled else self.working_digits)

    def widen(self, extra_digits):
        """Same context with ``extra_digits`` more guard digits."""
        return replace(self, guard_digits=self.guard_digits + max(0, int(extra_digits)))

    def with_precision(self, precision_digits):
        return replace(self, precision_digits=int(precision_digits))

    def oversampled(self):
        """Context whose precision is the oversampled precision of this one."""
        return NumericContext(self.oversampled_precision, self.guard_digits, Fraction(1))

    def fingerprint(self):
        text = (f"precision_digits={self.precision_digits};guard_digits={self.guard_digits};"
                f"oversample_factor={self.oversample_factor};rounding={ROUNDING_MODE}")
        return hashlib.sha256(text.encode("ascii")).hexdigest()[:16]


def make_context(precision_digits, guard_digits=DEFAULT_GUARD_DIGITS,
                 oversample_factor=DEFAULT_OVERSAMPLE_FACTOR):
    if not isinstance(precision_digits, int) or precision_digits < MIN_PRECISION_DIGITS:
        raise DomainError(f"precision_digits must be an integer >= {MIN_PRECISION_DIGITS}, "
                          f"got {precision_digits!r}")
    if not isinstance(guard_digits, int) or guard_digits < 0:
        raise DomainError(f"guard_digits must be a non-negative integer, got {guard_digits!r}")
    factor = Fraction(oversample_factor)
    if factor < 1:
        raise DomainError(f"oversample_factor must be >= 1, got {oversample_factor!r}")
    return NumericContext(precision_digits, guard_digits, factor)


def cancellation_digits(k):
    """Decimal digits lost to the binomial peak of a k-term alternating sum."""
    if k <= 0:
        return 0
    return math.ceil(k * math.log10(2))


def digits_of_agreement(a, b):
    """
    Relative agreement of a with b: floor(-log10|a/b - 1|), or "all" when the
    two values are equal at the current working precision.
    """
    if b == 0:
        raise DomainError("digits_of_agreement: reference value b is zero")
    with mpmath.workdps(max(mpmath.mp.dps, 30)):
        ratio = abs(mpmath.mpmathify(a) / mpmath.mpmathify(b) - 1)
        if ratio == 0:
            return "all"
        if ratio >= 1:
            return 0
        d = int(mpmath.floor(-mpmath.log10(ratio)))
        # log10 may land one digit off at exact powers of ten
        while d > 0 and ratio > mpmath.mpf(10) ** (-d):
            d -= 1
        while ratio <= mpmath.mpf(10) ** (-(d + 1)):
            d += 1
        return max(d, 0)


def agreement_bracket(d):
    if d == "all":
        return "|ratio-1| = 0 at working precision"
    if d == 0:
        return "|ratio-1| > 10^-1"
    return f"10^-{d + 1} < |ratio-1| <= 10^-{d}"


def format_decimal(x, digits):
    """Scientific decimal rendering with ``digits`` significant digits, zeros kept."""
    return mpmath.nstr(x, digits, strip_zeros=False, min_fixed=0, max_fixed=0)


def exact_decimal(x):
    """Decimal string that reads back to the same binary value at the current precision."""
    return mpmath.nstr(x, repr_dps(mpmath.mp.prec), min_fixed=0, max_fixed=0)


def storage_digits(precision_digits):
    """Decimal precision at which persisted values are rounded and parsed."""
    return precision_digits + 10


def exact_complex(s):
    """s as an mpc that keeps every bit of its parts, whatever the ambient precision."""
    if isinstance(s, mpmath.mpc):
        return s
    bits = mpmath.mp.prec
    if isinstance(s, mpmath.mpf):
        bits = max(bits, s._mpf_[3])
    elif isinstance(s, int):
        bits = max(bits, s.bit_length())
    with mpmath.workprec(bits):
        return mpmath.mpc(s)
