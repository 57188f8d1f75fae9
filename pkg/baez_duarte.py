"""
The Baez-Duarte sequence c_k = sum_j (-1)^j C(k,j) / zeta(2j+2) by independent routes.

    generic     the finite binomial sum, sequential in j (checkpointable)
    trend       closed series over the trivial zeros, summed with sumalt
    oscillation sum over nontrivial zeros, exact gamma-ratio or asymptotic form

plus the one-zero sine approximation, the envelope, the y(n) distance
diagnostic and the cutoff / violation-index estimators.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import mpmath

from precision_core import (DomainError, InsufficientPrecisionError, cancellation_digits,
                            exact_complex)
from series_accel import FIXED_N, AccelRequest, initial_terms, sumalt
from special_functions import BinomialScanner, constant, ln_gamma
from zeta_engine import zeta_integer
from zero_store import ZeroTable, ZeroTableError

logger = logging.getLogger(__name__)

GENERIC_GUARD_DIGITS = 50
GENERIC_MIN_TARGET_DIGITS = 10
CHECKPOINT_EVERY = 1000
SUMMATION_ORDER = "increasing ordinate, conjugate pairs folded into the real part"

EXACT = "exact"
ASYMPTOTIC = "asymptotic"
PRODUCT = "product"
GAMMA_RATIO = "gamma_ratio"


@dataclass(frozen=True)
class BaezDuarteResult:
    k: int
    c_generic: mpmath.mpf
    c_trend: mpmath.mpf
    c_osc_exact: mpmath.mpf
    c_osc_asymptotic: mpmath.mpf
    zeros_used: int
    agreement_digits: object
    context_fingerprint: str

    @property
    def c_explicit(self):
        return self.c_trend + self.c_osc_exact


@dataclass(frozen=True)
class SineApprox:
    amplitude_A: mpmath.mpf
    phase_phi: mpmath.mpf
    gamma_1: mpmath.mpf


@dataclass
class PartialSumTrace:
    rows: List[Tuple[int, mpmath.mpf]] = field(default_factory=list)
    peak_index: int = 0
    peak_value: mpmath.mpf = mpmath.mpf(0)

    def add(self, n, value):
        if self.rows and n <= self.rows[-1][0]:
            raise DomainError(f"trace rows must increase, got n={n} after {self.rows[-1][0]}")
        self.rows.append((n, value))


@dataclass
class GenericSumState:
    """Resumable position inside the generic sum: the next j and everything before it."""

    k: int
    next_j: int = 0
    partial_sum: mpmath.mpf = mpmath.mpf(0)
    binomial: int = 1
    trace: PartialSumTrace = field(default_factory=PartialSumTrace)

    @property
    def completed(self):
        return self.next_j > self.k


# ---------------------------------------------------------------------------
# generic sum
# ---------------------------------------------------------------------------

def required_precision_for_generic(k, target_digits, guard=GENERIC_GUARD_DIGITS):
    if k < 0 or target_digits < 1:
        raise DomainError(f"need k >= 0 and target_digits >= 1, got k={k}, target={target_digits}")
    return cancellation_digits(k) + target_digits + guard


def _is_trace_row(n, k, stride):
    if n == k:
        return True
    return stride is not None and stride <= k and n % stride == 0


def ck_generic(k, ctx, trace_stride=None, resume_state=None, on_checkpoint=None,
               checkpoint_every=CHECKPOINT_EVERY, target_digits=GENERIC_MIN_TARGET_DIGITS):
    """
    c_k by the binomial sum, accumulated strictly in increasing j.

    Trace rows hold S_n = sum_{j<=n} at n = 0, stride, 2*stride, ... and at n = k;
    a stride above k leaves only the final row. ``on_checkpoint`` receives the
    GenericSumState every ``checkpoint_every`` terms.
    """
    if not isinstance(k, int) or k < 0:
        raise DomainError(f"k must be a non-negative integer, got {k!r}")
    if trace_stride is not None and trace_stride < 1:
        raise DomainError(f"trace_stride must be positive, got {trace_stride}")
    needed = cancellation_digits(k) + target_digits
    if ctx.precision_digits < needed:
        raise InsufficientPrecisionError(
            f"c_{k} loses {cancellation_digits(k)} digits to cancellation",
            required_precision_for_generic(k, target_digits))

    state = resume_state or GenericSumState(k)
    if state.k != k:
        raise DomainError(f"resume state is for k={state.k}, not k={k}")
    if state.completed:
        logger.info("Generic sum for k=%d already complete", k)
        return state.partial_sum, state.trace

    start_time = time.time()
    report_every = trace_stride or checkpoint_every
    scanner = BinomialScanner(k, state.next_j, state.binomial)
    trace = state.trace
    with ctx.workdps():
        total = state.partial_sum
        for j in range(state.next_j, k + 1):
            term = scanner.value / zeta_integer(2 * j + 2, ctx)
            total = total + term if j % 2 == 0 else total - term
            magnitude = abs(total)
            if magnitude > trace.peak_value:
                trace.peak_value = magnitude
                trace.peak_index = j
            if _is_trace_row(j, k, trace_stride):
                trace.add(j, total)
            if j < k:
                scanner.advance()

            done = j + 1
            if done % report_every == 0 and j < k:
                elapsed = time.time() - start_time
                finished = done - state.next_j
                logger.info("[%s/%s] Generic sum  peak log10|S| = %.1f  Elapsed time: %.1f min  "
                            "Estimated time remaining: %.1f min", f"{done:,}", f"{k + 1:,}",
                            _log10(trace.peak_value), elapsed / 60,
                            elapsed / finished * (k + 1 - done) / 60)
            if on_checkpoint is not None and done % checkpoint_every == 0 and j < k:
                on_checkpoint(GenericSumState(k, done, total, scanner.value, trace))

    final = GenericSumState(k, k + 1, total, scanner.value, trace)
    if on_checkpoint is not None:
        on_checkpoint(final)
    return total, trace


def _log10(x):
    return float(mpmath.log10(x)) if x > 0 else float("-inf")


# ---------------------------------------------------------------------------
# trend over the trivial zeros
# ---------------------------------------------------------------------------

def _trend_growth_digits(k):
    """Digits by which the largest trend term exceeds the first one (float pre-scan)."""
    two_pi_sq = 2 * math.log(2 * math.pi)

    def log_weight(m):
        return (math.lgamma(k + 1) + math.lgamma(m) - math.lgamma(k + m + 1)
                - math.lgamma(2 * m - 1) + m * two_pi_sq)

    first = log_weight(2)
    peak = max(log_weight(m) for m in range(2, 200))
    return max(0, math.ceil((peak - first) / math.log(10)))


def ck_trend(k, ctx):
    """
    -(2 pi)^-2 sum_{m>=2} Gamma(k+1)Gamma(m)/(Gamma(k+m+1)Gamma(2m-1)) (-1)^m (2 pi)^(2m) / zeta(2m-1).
    The weight ratio starts at 1/(2(k+1)(k+2)) and is updated by m/((k+m+1)(2m-1)(2m)).
    """
    if not isinstance(k, int) or k < 0:
        raise DomainError(f"k must be a non-negative integer, got {k!r}")
    inner = ctx.widen(_trend_growth_digits(k) + 5)
    with inner.workdps():
        four_pi_sq = 4 * constant("pi", inner) ** 2
        weights = [four_pi_sq ** 2 / (2 * (k + 1) * (k + 2))]

        def term(n):
            m = n + 2
            while len(weights) <= n:
                last_m = len(weights) + 1
                weights.append(weights[-1] * four_pi_sq * last_m
                               / ((k + last_m + 1) * (2 * last_m - 1) * (2 * last_m)))
            return weights[n] / zeta_integer(2 * m - 1, inner)

        # the terms rise before they fall factorially; weights need twice the classical count
        request = AccelRequest(term, ctx.working_digits, FIXED_N, stop_when_negligible=True,
                               extra_terms=initial_terms(ctx.working_digits))
        result = sumalt(request, inner)
        value = -result.value / four_pi_sq
    with ctx.workdps():
        return +value


def trend_asymptote_constant(ctx):
    """-(2 pi)^2 / (2 zeta(3)), the limit of k^2 * c_trend(k)."""
    with ctx.workdps():
        return -(2 * constant("pi", ctx)) ** 2 / (2 * zeta_integer(3, ctx))


# ---------------------------------------------------------------------------
# Pochhammer product
# ---------------------------------------------------------------------------

def pochhammer_pk(k, s, ctx, method=PRODUCT):
    """P_k(s) = prod_{r=1}^k (1 - s/r) = (-1)^k Gamma(s) / (Gamma(k+1) Gamma(s-k))."""
    s = exact_complex(s)
    if method == PRODUCT:
        with ctx.workdps():
            value = mpmath.mpc(1)
            for r in range(1, k + 1):
                value *= 1 - s / r
            return value
    if method != GAMMA_RATIO:
        raise DomainError(f"unknown Pochhammer method {method!r}")
    if s.imag == 0 and s.real == mpmath.floor(s.real) and s.real <= k:
        raise DomainError(f"gamma_ratio form is degenerate at integer s = {int(s.real)}; "
                          f"use method='product'")
    with ctx.workdps():
        log_value = ln_gamma(s, ctx) - ln_gamma(mpmath.mpc(k + 1), ctx) - ln_gamma(s - k, ctx)
        value = mpmath.exp(log_value)
        return value if k % 2 == 0 else -value


# ---------------------------------------------------------------------------
# oscillation over the nontrivial zeros
# ---------------------------------------------------------------------------

def _usable_zeros(table, count, ctx, need_verified=True):
    if count < 0:
        raise DomainError(f"zero count must be non-negative, got {count}")
    if count > table.count:
        raise ZeroTableError(f"{count} zeros requested but the table holds {table.count}")
    zeros = table.zeros[:count]
    for zero in zeros:
        if zero.zeta_prime is None:
            raise ZeroTableError(f"zero {zero.index} has no derivative attached")
        if zero.precision_digits < ctx.precision_digits:
            raise InsufficientPrecisionError(
                f"zero {zero.index} is stored at {zero.precision_digits} digits",
                ctx.precision_digits)
        if need_verified and not zero.is_verified:
            raise ZeroTableError(f"zero {zero.index} is not verified")
    return zeros


def oscillation_terms(k, table, count, ctx, form=EXACT, method=GAMMA_RATIO):
    """Real contributions of the first ``count`` zeros, in increasing ordinate."""
    zeros = _usable_zeros(table, count, ctx)
    inner = ctx.widen(len(str(k + 2)) + 2)
    terms = []
    with inner.workdps():
        if form == EXACT and method == GAMMA_RATIO:
            sign = -1 if k % 2 == 0 else 1
            ln_factorial = ln_gamma(mpmath.mpc(k + 1), inner)
            for zero in zeros:
                half = zero.rho / 2
                log_term = (ln_factorial + ln_gamma(half - k - 1, inner)
                            - ln_gamma(half, inner) - mpmath.log(zero.zeta_prime))
                terms.append(sign * mpmath.exp(log_term).real)
        elif form == EXACT and method == PRODUCT:
            for zero in zeros:
                pk = pochhammer_pk(k + 1, zero.rho / 2, inner, PRODUCT)
                terms.append((1 / (zero.zeta_prime * pk)).real / (k + 1))
        elif form == ASYMPTOTIC:
            log_k = mpmath.log(k) if k > 0 else None
            for zero in zeros:
                half_gamma = zero.gamma / 2
                log_term = (ln_gamma(mpmath.mpc(mpmath.mpf(0.75), -half_gamma), inner)
                            - mpmath.log(zero.zeta_prime))
                if log_k is not None:
                    log_term += mpmath.mpc(-0.75 * log_k, half_gamma * log_k)
                terms.append(mpmath.exp(log_term).real)
        else:
            raise DomainError(f"unknown oscillation form {form!r} / method {method!r}")
    with ctx.workdps():
        return [+t for t in terms]


def ck_oscillation_exact(k, table, count, ctx, method=GAMMA_RATIO):
    with ctx.workdps():
        return mpmath.fsum(oscillation_terms(k, table, count, ctx, EXACT, method))


def ck_oscillation_asymptotic(k, table, count, ctx):
    if k < 1:
        raise DomainError("the asymptotic oscillation form needs k >= 1")
    with ctx.workdps():
        return mpmath.fsum(oscillation_terms(k, table, count, ctx, ASYMPTOTIC))


def ck_oscillation_general(k, rhos, zeta_primes, ctx):
    """Re sum k^(rho/2-1) Gamma(1-rho/2) / zeta'(rho) for arbitrary rho in the upper half plane."""
    if len(rhos) != len(zeta_primes):
        raise DomainError("rhos and zeta_primes must have equal length")
    with ctx.workdps():
        log_k = mpmath.log(k)
        terms = []
        for rho, derivative in zip(rhos, zeta_primes):
            rho = exact_complex(rho)
            log_term = (rho / 2 - 1) * log_k + ln_gamma(1 - rho / 2, ctx) - mpmath.log(derivative)
            terms.append(mpmath.exp(log_term).real)
        return mpmath.fsum(terms)


# ---------------------------------------------------------------------------
# one-zero approximation and envelope
# ---------------------------------------------------------------------------

def sine_approx_params(zero_1, ctx):
    """
    G = Gamma(3/4 - i gamma_1/2) / zeta'(rho_1); then
    Re(k^(-3/4 + i gamma_1/2) G) = (A / k^(3/4)) sin(phi - (gamma_1/2) ln k)
    with A = |G| and phi = pi/2 - arg G reduced to [0, 2 pi).
    """
    if zero_1.zeta_prime is None:
        raise ZeroTableError(f"zero {zero_1.index} has no derivative attached")
    with ctx.workdps():
        g = mpmath.exp(ln_gamma(mpmath.mpc(mpmath.mpf(0.75), -zero_1.gamma / 2), ctx)
                       - mpmath.log(zero_1.zeta_prime))
        pi = constant("pi", ctx)
        phase = mpmath.fmod(pi / 2 - mpmath.arg(g), 2 * pi)
        if phase < 0:
            phase += 2 * pi
        return SineApprox(abs(g), phase, zero_1.gamma)


def sine_approximation(k, params, ctx):
    with ctx.workdps():
        return (params.amplitude_A / mpmath.power(k, mpmath.mpf(0.75))
                * mpmath.sin(params.phase_phi - params.gamma_1 / 2 * mpmath.log(k)))


def envelope(k, params):
    if k < 1:
        raise DomainError(f"envelope needs k >= 1, got {k}")
    bound = params.amplitude_A / mpmath.power(k, mpmath.mpf(0.75))
    return bound, -bound


def criterion_strip_ratio(k, c_k, params):
    """k^(3/4) c_k / A: position of c_k inside the +-A k^(-3/4) strip."""
    return mpmath.power(k, mpmath.mpf(0.75)) * c_k / params.amplitude_A


# ---------------------------------------------------------------------------
# y(n) diagnostic
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class YPoint:
    n: int
    gamma: Optional[mpmath.mpf]
    y: Optional[mpmath.mpf]
    log10_distance: Optional[float]

    @property
    def saturated(self):
        return self.y is None


def y_curve(k, c_generic, table, n_max, ctx, form=EXACT, trend=None):
    """
    y_n = -1 / ln|S_n - c_generic| with S_n the trend plus the first n zero
    contributions. n = 0 is the trend alone; an exact match marks y_n saturated.
    """
    if trend is None:
        trend = ck_trend(k, ctx)
    terms = oscillation_terms(k, table, n_max, ctx, form) if n_max else []
    points = []
    with ctx.workdps():
        partial = trend
        for n in range(n_max + 1):
            if n > 0:
                partial += terms[n - 1]
            distance = abs(partial - c_generic)
            gamma = table[n].gamma if n > 0 else None
            if distance == 0:
                points.append(YPoint(n, gamma, None, None))
                continue
            points.append(YPoint(n, gamma, -1 / mpmath.log(distance),
                                 float(mpmath.log10(distance))))
    return points


# ---------------------------------------------------------------------------
# estimators
# ---------------------------------------------------------------------------

def zeros_needed(target_digits, table=None):
    """
    gamma_needed = D * 4 ln 10 / pi (where e^(-pi gamma/4) = 10^-D) and L, the
    number of zeros with gamma_l <= gamma_needed (L = 2402 for D = 1000). Zero
    L + 1 is the first one past the cutoff. L is None when the table stops short.
    """
    if target_digits < 0:
        raise DomainError(f"target_digits must be non-negative, got {target_digits}")
    gamma_needed = mpmath.mpf(target_digits) * 4 * mpmath.log(10) / mpmath.pi
    if target_digits == 0:
        return gamma_needed, 0
    ordinates = _ordinates(table)
    if not ordinates or ordinates[-1] <= gamma_needed:
        return gamma_needed, None
    count = 0
    for gamma in ordinates:
        if gamma > gamma_needed:
            break
        count += 1
    return gamma_needed, count


def _ordinates(table):
    if table is None:
        return []
    if isinstance(table, ZeroTable):
        return [z.gamma for z in table.zeros]
    return [mpmath.mpf(g) for g in table]


def truncation_floor(gamma_next):
    """e^(-pi gamma/4) at the first omitted ordinate: size of the dropped contribution."""
    if gamma_next <= 0:
        raise DomainError(f"ordinate must be positive, got {gamma_next}")
    return mpmath.exp(-mpmath.pi * mpmath.mpf(gamma_next) / 4)


def next_ordinate(table, count):
    """gamma_{count+1} from the table when it holds it, else a 15-digit mpmath estimate."""
    if count + 1 <= table.count:
        return table[count + 1].gamma
    with mpmath.workdps(15):
        return +mpmath.zetazero(count + 1).imag


def violation_index_estimate(delta, gamma_off, c_ratio):
    """log10 K for K > C' e^(2 gamma_off / delta)."""
    if not 0 < delta < 0.5:
        raise DomainError(f"delta must lie in (0, 1/2), got {delta}")
    if gamma_off <= 0 or c_ratio <= 0:
        raise DomainError("gamma_off and C' must be positive")
    delta = mpmath.mpf(delta)
    return mpmath.log10(c_ratio) + 2 * mpmath.mpf(gamma_off) / delta * mpmath.log10(mpmath.e)


def off_line_scenario(k_values, delta, gamma_off, zeta_prime_off, params, ctx):
    """
    log10 of |contribution of a zero at 1/2 + delta + i gamma_off| / (A k^-3/4)
    for each k; positive values mean the hypothetical zero leaves the strip.
    """
    rows = []
    with ctx.workdps():
        rho = mpmath.mpc(mpmath.mpf(0.5) + delta, gamma_off)
        size_gamma = abs(mpmath.exp(ln_gamma(1 - rho / 2, ctx)) / mpmath.mpc(zeta_prime_off))
        for k in k_values:
            contribution = mpmath.power(k, rho.real / 2 - 1) * size_gamma
            bound, _ = envelope(k, params)
            rows.append((k, float(mpmath.log10(contribution / bound))))
    return rows
