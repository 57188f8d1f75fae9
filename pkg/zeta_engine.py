"""
Zeta-function evaluations used by the laboratory.

zeta_complex / zeta_prime go through the alternating eta series accelerated
by sumalt, zeta_integer picks the cheapest exact route for integer arguments,
and the Maslanka representation provides an independent continuation.
"""

from __future__ import annotations

import logging
import math
import threading
from dataclasses import dataclass
from typing import Tuple

import mpmath

from precision_core import (BaezDuarteError, DomainError, InsufficientPrecisionError,
                            cancellation_digits, exact_complex, exact_decimal)
from series_accel import ADAPTIVE, AccelRequest, sumalt
from special_functions import bernoulli, binomial, constant, ln_gamma

logger = logging.getLogger(__name__)

DIRECT_SUM_MAX_TERMS = 64
EULER_MACLAURIN_FACTOR = 0.4
EULER_MACLAURIN_MIN_TERMS = 10
MASLANKA_MIN_DIGITS = 10
CACHE_FORMAT_VERSION = 1


class PoleError(DomainError):
    pass


class RepresentationSingularityError(DomainError):
    """s sits on a zero of 1 - 2^(1-s); use zeta_integer or another height."""


@dataclass(frozen=True)
class MaslankaCoefficients:
    table: Tuple
    precision_digits: int

    @property
    def order(self):
        return len(self.table) - 1


# ---------------------------------------------------------------------------
# eta series on Re(s) > 0
# ---------------------------------------------------------------------------

class _EtaTerms:
    """(m+1)^-s and -ln(m+1) (m+1)^-s, each power evaluated once."""

    def __init__(self, s):
        self.s = s
        self.powers = []
        self.logs = []

    def _fill(self, m):
        while len(self.powers) <= m:
            n = len(self.powers) + 1
            log_n = mpmath.log(n)
            self.logs.append(log_n)
            self.powers.append(mpmath.exp(-self.s * log_n))

    def eta(self, m):
        self._fill(m)
        return self.powers[m]

    def eta_prime(self, m):
        self._fill(m)
        return -self.logs[m] * self.powers[m]


def _height_digits(s):
    # the accelerated eta sum cancels about pi|t|/(2 ln 10) digits
    return math.ceil(math.pi * abs(float(s.imag)) / (2 * math.log(10))) + 5


def _check_domain(s, ctx):
    if s.real <= 0:
        raise DomainError(f"eta representation needs Re(s) > 0, got s = {mpmath.nstr(s, 10)}")
    if s == 1:
        raise PoleError("zeta has a pole at s = 1")
    with ctx.workdps():
        period = 2 * mpmath.mp.pi / mpmath.mp.ln2
        k = int(mpmath.nint(s.imag / period))
        if k != 0:
            singular = mpmath.mpc(1, k * period)
            if abs(s - singular) < mpmath.mpf(10) ** (-(ctx.precision_digits - 2)):
                raise RepresentationSingularityError(
                    f"s = {mpmath.nstr(s, 15)} is a zero of 1 - 2^(1-s) (k = {k})")


def eta_and_derivative(s, ctx, with_derivative=True):
    """eta(s) and eta'(s) from one set of cached terms, at the working precision of ctx."""
    s = exact_complex(s)
    _check_domain(s, ctx)
    inner = ctx.widen(_height_digits(s))
    height = float(abs(s.imag))
    with inner.workdps():
        terms = _EtaTerms(+s)
        eta = sumalt(AccelRequest(terms.eta, ctx.working_digits, ADAPTIVE, height), inner)
        eta_prime = None
        if with_derivative:
            eta_prime = sumalt(AccelRequest(terms.eta_prime, ctx.working_digits, ADAPTIVE, height),
                               inner)
    return eta, eta_prime


def zeta_complex(s, ctx):
    s = exact_complex(s)
    eta, _ = eta_and_derivative(s, ctx, with_derivative=False)
    with ctx.widen(_height_digits(s)).workdps():
        value = eta.value / (1 - mpmath.power(2, 1 - s))
    with ctx.workdps():
        return +mpmath.mpc(value)


def _combine(s, eta, eta_prime):
    two_power = mpmath.power(2, 1 - s)
    prefactor = 1 - two_power
    zeta = eta / prefactor
    derivative = eta_prime / prefactor - mpmath.mp.ln2 * two_power * eta / (prefactor * prefactor)
    return zeta, derivative


def zeta_and_derivative(s, ctx):
    """zeta(s) and zeta'(s) at the working precision of ctx (no oversampling)."""
    s = exact_complex(s)
    eta, eta_prime = eta_and_derivative(s, ctx)
    with ctx.widen(_height_digits(s)).workdps():
        zeta, derivative = _combine(s, eta.value, eta_prime.value)
    with ctx.workdps():
        return +mpmath.mpc(zeta), +mpmath.mpc(derivative)


def zeta_prime(s, ctx):
    """zeta'(s) evaluated at the oversampled precision of ctx, rounded to precision_digits."""
    s = exact_complex(s)
    inner = ctx.oversampled()
    eta, eta_prime = eta_and_derivative(s, inner)
    with inner.widen(_height_digits(s)).workdps():
        _, value = _combine(s, eta.value, eta_prime.value)
    with mpmath.workdps(ctx.precision_digits):
        return +mpmath.mpc(value)


# ---------------------------------------------------------------------------
# zeta at integers
# ---------------------------------------------------------------------------

_integer_cache = {}
_integer_lock = threading.Lock()


def zeta_integer(m, ctx):
    if not isinstance(m, int) or m < 2:
        raise DomainError(f"zeta_integer needs an integer m >= 2, got {m!r}")
    digits = ctx.working_digits
    key = (m, digits)
    value = _integer_cache.get(key)
    if value is not None:
        return value

    with ctx.workdps():
        if m > math.ceil(digits * math.log2(10)):
            value = 1 + mpmath.mpf(2) ** (-m) + mpmath.mpf(3) ** (-m)
        elif digits / (m - 1) <= math.log10(DIRECT_SUM_MAX_TERMS):
            value = _zeta_direct(m, math.ceil(10 ** (digits / (m - 1))) + 1)
        elif m % 2 == 0:
            value = _zeta_even(m, ctx)
        else:
            value = _zeta_euler_maclaurin(m, digits)

    with _integer_lock:
        _integer_cache[key] = value
    return value


def _zeta_direct(m, terms):
    return mpmath.fsum(mpmath.mpf(n) ** (-m) for n in range(terms, 0, -1))


def _zeta_even(m, ctx):
    b = bernoulli(m)
    # |B_m| 2^(m-1) / m! is rational; only pi^m is rounded
    coefficient = abs(b) * 2 ** (m - 1) / math.factorial(m)
    pi = constant("pi", ctx)
    return mpmath.mpf(coefficient.numerator) / coefficient.denominator * pi ** m


def _zeta_euler_maclaurin(s, digits):
    n = max(EULER_MACLAURIN_MIN_TERMS, math.ceil(EULER_MACLAURIN_FACTOR * digits)) + 10
    bound = mpmath.mpf(10) ** (-(digits + 2))
    head = mpmath.fsum(mpmath.mpf(j) ** (-s) for j in range(n - 1, 0, -1))
    big_n = mpmath.mpf(n)
    tail = big_n ** (1 - s) / (s - 1) + big_n ** (-s) / 2
    power = big_n ** (-s - 1)
    inverse_square = 1 / (big_n * big_n)
    rising = s
    previous = None
    for j in range(1, 4 * digits + 40):
        b = bernoulli(2 * j)
        coefficient = b / math.factorial(2 * j)
        term = mpmath.mpf(coefficient.numerator) / coefficient.denominator * rising * power
        tail += term
        size = abs(term)
        if size < bound:
            return head + tail
        if previous is not None and size > previous:
            break
        previous = size
        rising *= (s + 2 * j - 1) * (s + 2 * j)
        power *= inverse_square
    raise BaezDuarteError(f"Euler-Maclaurin for zeta({s}) diverged before reaching {digits} digits")


def iter_even_zeta(ctx, start_j=0):
    """Yields (j, zeta(2j+2)) for j = start_j, start_j+1, ..."""
    j = start_j
    while True:
        yield j, zeta_integer(2 * j + 2, ctx)
        j += 1


def zeta_prime_trivial(n, ctx):
    """zeta'(-2n) = (-1)^n zeta(2n+1) (2n)! / (2^(2n+1) pi^(2n))."""
    if not isinstance(n, int) or n < 1:
        raise DomainError(f"trivial zero index must be a positive integer, got {n!r}")
    with ctx.workdps():
        pi = constant("pi", ctx)
        value = zeta_integer(2 * n + 1, ctx) * math.factorial(2 * n) \
            / (mpmath.mpf(2) ** (2 * n + 1) * pi ** (2 * n))
        return value if n % 2 == 0 else -value


# ---------------------------------------------------------------------------
# Maslanka representation
# ---------------------------------------------------------------------------

def maslanka_required_digits(order):
    return cancellation_digits(order) + MASLANKA_MIN_DIGITS


def maslanka_coefficients(order, ctx):
    if not isinstance(order, int) or order < 0:
        raise DomainError(f"Maslanka order must be a non-negative integer, got {order!r}")
    required = maslanka_required_digits(order)
    if ctx.precision_digits < required:
        raise InsufficientPrecisionError(
            f"A_0..A_{order} cancel {cancellation_digits(order)} digits", required)

    with ctx.workdps():
        weighted = [(2 * j + 1) * zeta_integer(2 * j + 2, ctx) for j in range(order + 1)]
        table = []
        for k in range(order + 1):
            row = 1
            acc = []
            for j in range(k + 1):
                acc.append(row * weighted[j] if j % 2 == 0 else -row * weighted[j])
                row = row * (k - j) // (j + 1)
            table.append(mpmath.fsum(acc))
    logger.debug("Computed Maslanka coefficients A_0..A_%d at %d digits", order, ctx.working_digits)
    return MaslankaCoefficients(tuple(table), ctx.precision_digits)


def maslanka_coefficient_bernoulli_form(k, ctx):
    """A_k = sum_j C(k,j) pi^(2j+2) B_(2j+2) / ((2)_j (1/2)_j)."""
    with ctx.workdps():
        pi = constant("pi", ctx)
        terms = []
        for j in range(k + 1):
            rising = math.factorial(j + 1) * mpmath.rf(mpmath.mpf(0.5), j)
            b = bernoulli(2 * j + 2)
            terms.append(binomial(k, j) * pi ** (2 * j + 2)
                         * (mpmath.mpf(b.numerator) / b.denominator) / rising)
        return mpmath.fsum(terms)


def zeta_via_maslanka(s, order, ctx, coefficients=None):
    """Partial sum through k = order of (s-1)^-1 sum_k Gamma(k+1-s/2)/Gamma(1-s/2) A_k / k!."""
    s = exact_complex(s)
    if s == 1:
        raise PoleError("zeta has a pole at s = 1")
    if coefficients is None or coefficients.order < order:
        coefficients = maslanka_coefficients(order, ctx)

    with ctx.workdps():
        base = 1 - s / 2
        degenerate = base.imag == 0 and base.real <= 0 and base.real == mpmath.floor(base.real)
        terms = []
        if degenerate:
            ratio = mpmath.mpc(1)
            for k in range(order + 1):
                terms.append(coefficients.table[k] * ratio)
                ratio *= (k + base) / (k + 1)
        else:
            ln_base = ln_gamma(base, ctx)
            for k in range(order + 1):
                log_ratio = ln_gamma(k + base, ctx) - ln_base - ln_gamma(mpmath.mpc(k + 1), ctx)
                terms.append(coefficients.table[k] * mpmath.exp(log_ratio))
        return mpmath.fsum(terms) / (s - 1)


# ---------------------------------------------------------------------------
# cache export
# ---------------------------------------------------------------------------

def write_zeta_cache(stream, values, ctx, first_m=2, step=2):
    """One value per line after '#' header lines (precision, generator, index layout)."""
    stream.write(f"# generator: zeta_engine.zeta_integer v{CACHE_FORMAT_VERSION}\n")
    stream.write(f"# precision_digits: {ctx.precision_digits}\n")
    stream.write(f"# working_digits: {ctx.working_digits}\n")
    stream.write(f"# first_m: {first_m}\n")
    stream.write(f"# step: {step}\n")
    with ctx.workdps():
        for value in values:
            stream.write(exact_decimal(value) + "\n")


def read_zeta_cache(stream, ctx):
    header = {}
    values = []
    with ctx.workdps():
        for line in stream:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].partition(":")
                header[key.strip()] = value.strip()
                continue
            values.append(mpmath.mpf(line))
    stored = int(header.get("working_digits", -1))
    if stored != ctx.working_digits:
        raise DomainError(f"zeta cache was written at {stored} working digits, "
                          f"context needs {ctx.working_digits}")
    first_m = int(header.get("first_m", 2))
    step = int(header.get("step", 2))
    return {first_m + step * i: v for i, v in enumerate(values)}


def seed_integer_cache(table, ctx):
    """Installs values read by read_zeta_cache into the zeta_integer cache."""
    with _integer_lock:
        for m, value in table.items():
            _integer_cache[(m, ctx.working_digits)] = value
