"""
Arbitrary-precision building blocks: Bernoulli numbers, exact binomials,
complex log-gamma and cached constants.
"""

from __future__ import annotations

import logging
import math
import threading
from dataclasses import dataclass
from fractions import Fraction

import mpmath
import numpy as np

from precision_core import DomainError, NonConvergenceError, exact_complex

logger = logging.getLogger(__name__)

STIRLING_THRESHOLD_FACTOR = 1.2
# float shift used only to pick the 2*pi*i branch of the principal log-gamma
BRANCH_ESTIMATE_SHIFT = 10


class BernoulliCache:
    """
    Exact even-index Bernoulli numbers, built from tangent numbers and
    extended by doubling. Reads are lock-free once a table covers the index.
    """

    def __init__(self):
        self._table = {0: Fraction(1)}
        self._max_index = 0
        self._lock = threading.Lock()

    @property
    def max_index(self):
        return self._max_index

    def get(self, n):
        if n > self._max_index:
            with self._lock:
                if n > self._max_index:
                    self._extend(max(n, 2 * self._max_index, 64))
        return self._table[n]

    def _extend(self, n):
        half = n // 2
        logger.debug("Extending Bernoulli table to B_%d", 2 * half)
        table = dict(self._table)
        for k, t in enumerate(_tangent_numbers(half), start=1):
            b = Fraction((-1) ** (k - 1) * 2 * k * t, 2 ** (2 * k) * (2 ** (2 * k) - 1))
            table[2 * k] = b
        self._table = table
        self._max_index = 2 * half


def _tangent_numbers(n):
    """T_1..T_n (1, 2, 16, 272, ...) by the in-place integer recurrence."""
    if n <= 0:
        return []
    t = [0] * (n + 1)
    t[1] = 1
    for k in range(2, n + 1):
        t[k] = (k - 1) * t[k - 1]
    for k in range(2, n + 1):
        for j in range(k, n + 1):
            t[j] = (j - k) * t[j - 1] + (j - k + 2) * t[j]
    return t[1:]


_BERNOULLI = BernoulliCache()


def bernoulli(n):
    if not isinstance(n, int) or n < 0:
        raise DomainError(f"bernoulli index must be a non-negative integer, got {n!r}")
    if n == 1:
        return Fraction(-1, 2)
    if n % 2:
        return Fraction(0)
    return _BERNOULLI.get(n)


def bernoulli_by_recurrence(n):
    """B_0..B_n from sum_{j=0}^{m} C(m+1, j) B_j = 0. Quadratic; used as an oracle."""
    values = [Fraction(1)]
    for m in range(1, n + 1):
        acc = sum(math.comb(m + 1, j) * values[j] for j in range(m))
        values.append(-acc / (m + 1))
    return values


def binomial(k, j):
    if not isinstance(k, int) or not isinstance(j, int) or k < 0 or j < 0:
        raise DomainError(f"binomial arguments must be non-negative integers, got ({k!r}, {j!r})")
    if j > k:
        raise DomainError(f"binomial: j={j} exceeds k={k}")
    return math.comb(k, j)


@dataclass
class BinomialScanner:
    """Walks C(k, 0), C(k, 1), ... with exact integer updates."""

    k: int
    j: int = 0
    value: int = 1

    @classmethod
    def at(cls, k, j):
        return cls(k, j, binomial(k, j))

    def advance(self):
        self.value = self.value * (self.k - self.j) // (self.j + 1)
        self.j += 1
        return self.value


_CONSTANTS = {
    "pi": lambda: +mpmath.mp.pi,
    "ln2": lambda: +mpmath.mp.ln2,
    "euler_gamma": lambda: +mpmath.mp.euler,
}
_constant_cache = {}
_constant_lock = threading.Lock()


def constant(name, ctx):
    if name not in _CONSTANTS:
        raise DomainError(f"unknown constant {name!r}; expected one of {sorted(_CONSTANTS)}")
    key = (name, ctx.working_digits)
    value = _constant_cache.get(key)
    if value is None:
        with _constant_lock:
            value = _constant_cache.get(key)
            if value is None:
                with ctx.workdps():
                    value = _CONSTANTS[name]()
                _constant_cache[key] = value
    return value


def _is_nonpositive_integer(z):
    return z.imag == 0 and z.real <= 0 and z.real == mpmath.floor(z.real)


def _magnitude_digits(z):
    """Extra digits needed so that an absolute error in ln Gamma(z) stays below one ulp."""
    size = abs(complex(z)) + 2.0
    return int(math.ceil(math.log10(size * math.log(size) + 1.0))) + 2


def ln_gamma(z, ctx):
    """Principal branch of log Gamma(z) at the working precision of ``ctx``."""
    z = exact_complex(z)
    if _is_nonpositive_integer(z):
        raise DomainError(f"ln_gamma: pole at z = {mpmath.nstr(z.real, 15)}")
    inner = ctx.widen(_magnitude_digits(z))
    with inner.workdps():
        if z.real < 0:
            value = _ln_gamma_reflected(z, inner)
        else:
            value = _ln_gamma_shifted(z, inner)
    with ctx.workdps():
        return +value


def gamma(z, ctx):
    with ctx.workdps():
        return mpmath.exp(ln_gamma(z, ctx))


def _stirling_series(w, digits):
    bound = mpmath.mpf(10) ** (-(digits + 2))
    value = (w - mpmath.mpf(0.5)) * mpmath.log(w) - w + mpmath.log(2 * mpmath.mp.pi) / 2
    w2 = w * w
    power = w
    for n in range(1, 4 * digits + 40):
        b = bernoulli(2 * n)
        term = (mpmath.mpf(b.numerator) / (b.denominator * 2 * n * (2 * n - 1))) / power
        value += term
        if abs(term) < bound * max(1, abs(value)):
            return value
        power *= w2
    raise NonConvergenceError(f"Stirling series did not settle at w = {mpmath.nstr(w, 10)}",
                              best_estimate=value)


def _ln_gamma_shifted(z, ctx):
    digits = ctx.working_digits
    shift = max(0, math.ceil(STIRLING_THRESHOLD_FACTOR * digits - float(z.real)))
    if shift == 0:
        return _stirling_series(z, digits)

    with mpmath.workdps(digits + len(str(shift))):
        product = mpmath.mpc(1)
        for j in range(shift):
            product *= z + j
        stirling = _stirling_series(z + shift, digits)
        value = stirling - mpmath.log(product)

    # the single log of the product is off by a multiple of 2*pi*i
    args = np.angle(complex(z) + np.arange(shift, dtype=np.float64))
    expected_imag = float(stirling.imag) - float(args.sum())
    return _snap_branch(value, expected_imag)


def log_sin_pi(z):
    """log sin(pi z) up to a multiple of 2*pi*i, kept finite for large |Im z|."""
    z = exact_complex(z)
    pi = mpmath.mp.pi
    y = z.imag
    if abs(y) < 1:
        return mpmath.log(mpmath.sin(pi * z))
    if y > 0:
        small = mpmath.exp(2j * pi * z)
        return -1j * pi * z + mpmath.log((1 - small) * 1j / 2)
    small = mpmath.exp(-2j * pi * z)
    return 1j * pi * z + mpmath.log((1 - small) / 2j)


def _ln_gamma_reflected(z, ctx):
    value = mpmath.log(mpmath.mp.pi) - log_sin_pi(z) - _ln_gamma_shifted(1 - z, ctx)
    return _snap_branch(value, _principal_imag_estimate(complex(z)))


def _principal_imag_estimate(z):
    """Float estimate of Im log Gamma(z) on the principal branch."""
    shift = max(0, math.ceil(BRANCH_ESTIMATE_SHIFT - z.real))
    w = np.complex128(z + shift)
    lw = np.log(w)
    stirling = (w - 0.5) * lw - w + 1 / (12 * w) - 1 / (360 * w ** 3) + 1 / (1260 * w ** 5)
    args = np.angle(z + np.arange(shift, dtype=np.float64))
    return float(stirling.imag) - float(args.sum())


def _snap_branch(value, expected_imag):
    two_pi = 2 * mpmath.mp.pi
    turns = round((expected_imag - float(value.imag)) / float(two_pi))
    if turns:
        value += mpmath.mpc(0, turns) * two_pi
    return value
