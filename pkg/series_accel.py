"""
Cohen-Villegas-Zagier acceleration of alternating series sum_{n>=0} (-1)^n a_n.

The fixed_n mode uses the classical term count for the requested digits. The
adaptive mode doubles the term count until two successive accelerated sums
agree; it is the only mode used for complex terms, where the classical bound
does not apply.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, Callable, Optional

import mpmath

from precision_core import DomainError, NonConvergenceError

logger = logging.getLogger(__name__)

FIXED_N = "fixed_n"
ADAPTIVE = "adaptive"

GUARD_TERMS = 2
HEIGHT_INFLATION = 1.0
TERM_CEILING_FACTOR = 64
CVZ_RATE = math.log(3 + math.sqrt(8))


@dataclass(frozen=True)
class AccelRequest:
    term_source: Callable[[int], Any]
    target_digits: int
    mode: str = FIXED_N
    height: float = 0.0
    term_ceiling: Optional[int] = None
    stop_when_negligible: bool = False
    extra_terms: int = 0


@dataclass(frozen=True)
class AccelResult:
    value: Any
    terms_used: int
    estimated_error: Any
    heuristic: bool


def initial_terms(target_digits, height=0.0):
    """ceil(D ln 10 / ln(3+sqrt 8)) + guard terms, inflated by the imaginary height."""
    base = math.ceil(target_digits * math.log(10) / CVZ_RATE)
    return base + GUARD_TERMS + math.ceil(HEIGHT_INFLATION * abs(height))


class _TermCache:
    def __init__(self, source):
        self.source = source
        self.terms = []

    def __getitem__(self, n):
        while len(self.terms) <= n:
            self.terms.append(self.source(len(self.terms)))
        return self.terms[n]


def _cvz(terms, n, negligible=None):
    """
    Accelerated sum with n terms; optionally stops once terms fall below
    ``negligible``. The third value bounds what an early stop leaves out: the
    weight deficit 1 - |c_k|/d over the summed terms plus the dropped tail.
    """
    d = (3 + mpmath.sqrt(8)) ** n
    d = (d + 1 / d) / 2
    b = mpmath.mpf(-1)
    c = -d
    s = 0
    used = n
    previous = None
    deficit = 0
    for k in range(n):
        c = b - c
        a = terms[k]
        s += c * a
        if negligible is not None:
            deficit += (1 - abs(c) / d) * abs(a)
        b = b * ((k + n) * (k - n)) / ((k + mpmath.mpf(0.5)) * (k + 1))
        if negligible is not None and k > 0:
            size = abs(a)
            if previous is not None and size < previous and size * abs(c) < negligible * abs(s):
                used = k + 1
                return s / d, used, deficit + negligible * abs(s) / d
            previous = size
    return s / d, used, None


def sumalt(request, ctx):
    if request.mode not in (FIXED_N, ADAPTIVE):
        raise DomainError(f"unknown acceleration mode {request.mode!r}")
    if request.target_digits < 1 or request.target_digits > ctx.working_digits:
        raise DomainError(f"target_digits {request.target_digits} outside 1..{ctx.working_digits}")

    base = initial_terms(request.target_digits, request.height)
    n0 = base + max(0, request.extra_terms)
    if request.mode == FIXED_N and request.stop_when_negligible:
        # early stops need the summed weights settled near 1
        n0 = max(n0, 2 * base)
    ceiling = request.term_ceiling or TERM_CEILING_FACTOR * n0

    with ctx.workdps():
        terms = _TermCache(request.term_source)
        tolerance = mpmath.mpf(10) ** (-request.target_digits)
        negligible = tolerance / 100 if request.stop_when_negligible else None

        if request.mode == FIXED_N:
            value, used, early = _cvz(terms, n0, negligible)
            bound = 3 * abs(terms[0]) * (3 + mpmath.sqrt(8)) ** (-n0)
            if early is not None:
                bound += early
            heuristic = isinstance(value, mpmath.mpc)
            return AccelResult(value, used, bound, heuristic)

        n = n0
        previous, _, _ = _cvz(terms, n)
        while True:
            if 2 * n > ceiling:
                raise NonConvergenceError(
                    f"sumalt: no agreement to {request.target_digits} digits within {ceiling} terms",
                    best_estimate=previous, terms_used=n)
            n *= 2
            current, _, _ = _cvz(terms, n)
            difference = abs(current - previous)
            scale = max(abs(current), abs(terms[0]), abs(terms[1]))
            if difference <= tolerance * scale:
                logger.debug("sumalt converged with %d terms (difference %s)",
                             n, mpmath.nstr(difference, 3))
                return AccelResult(current, n, difference, True)
            previous = current
