"""
Tables of nontrivial zeta zeros: ingestion of published ordinates, Newton
refinement on the critical line, residual verification, cached derivatives,
persistence and derivative-extreme statistics.
"""

from __future__ import annotations

import hashlib
import io
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional, Tuple

import mpmath

from precision_core import (BaezDuarteError, DomainError, NonConvergenceError, NumericContext,
                            exact_decimal, storage_digits)
from zeta_engine import zeta_and_derivative, zeta_complex, zeta_prime

logger = logging.getLogger(__name__)

TABLE_FORMAT_VERSION = 3
GENERATOR = "zero_store complex-newton"
BASIN_GUARD = 0.4
MIN_ZERO_GAP = mpmath.mpf("1e-3")
NEWTON_START_DIGITS = 30
NEWTON_MAX_STEPS = 60
NEWTON_GUARD_DIGITS = 10
RESIDUAL_SLACK_DIGITS = 4
VERIFY_EXTRA_DIGITS = 10

PLAIN_ORDINATES = "plain_ordinates"
INDEXED_ORDINATES = "indexed_ordinates"

COLUMNS = ("index", "gamma", "residual", "zeta_prime_re", "zeta_prime_im")
UNSET = "-"


class ZeroTableError(BaezDuarteError):
    def __init__(self, message, line_number=None):
        self.detail = message
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number

    def __reduce__(self):
        return type(self), (self.detail, self.line_number)


class TableFormatError(ZeroTableError):
    pass


class UnsupportedVersionError(TableFormatError):
    pass


class PrecisionMismatchError(TableFormatError):
    pass


class ZeroRefinementError(BaezDuarteError):
    def __init__(self, message, index=None):
        self.detail = message
        if index:
            message = f"zero {index}: {message}"
        super().__init__(message)
        self.index = index

    def __reduce__(self):
        return type(self), (self.detail, self.index)


class WrongZeroError(ZeroRefinementError):
    pass


class OffCriticalLineError(ZeroRefinementError):
    """Newton converged to a zero with Re(s) != 1/2 beyond tolerance. The zero is kept."""

    def __init__(self, message, zero):
        super().__init__(message, zero.index)
        self.zero = zero

    def __reduce__(self):
        return type(self), (self.detail, self.zero)


class UnverifiedZeroError(ZeroRefinementError):
    pass


class ZeroEvaluationError(ZeroRefinementError):
    pass


@dataclass(frozen=True)
class ZetaZero:
    index: int
    gamma: mpmath.mpf
    precision_digits: int
    residual: Optional[mpmath.mpf] = None
    zeta_prime: Optional[mpmath.mpc] = None
    # diagnostic from refinement; not persisted
    real_part_deviation: Optional[mpmath.mpf] = field(default=None, compare=False)

    @property
    def rho(self):
        with mpmath.workdps(storage_digits(self.precision_digits)):
            return mpmath.mpc(mpmath.mpf(0.5), self.gamma)

    @property
    def residual_bound(self):
        return mpmath.mpf(10) ** (-(self.precision_digits - RESIDUAL_SLACK_DIGITS))

    @property
    def is_verified(self):
        return self.residual is not None and self.residual < self.residual_bound


@dataclass(frozen=True)
class ZeroTable:
    zeros: Tuple[ZetaZero, ...] = ()
    source: str = ""

    def __post_init__(self):
        for position, zero in enumerate(self.zeros, start=1):
            if zero.index != position:
                raise ZeroTableError(f"zero indices must run 1..count, found {zero.index} "
                                     f"at position {position}")
            if position > 1 and not zero.gamma > self.zeros[position - 2].gamma:
                raise ZeroTableError(f"ordinates must increase, zero {zero.index} does not")

    @property
    def count(self):
        return len(self.zeros)

    @property
    def precision_digits(self):
        return min((z.precision_digits for z in self.zeros), default=0)

    def __getitem__(self, index):
        return self.zeros[index - 1]

    def fingerprint(self):
        digest = hashlib.sha256()
        for line in _body_lines(self):
            digest.update(line.encode("ascii"))
        return digest.hexdigest()[:16]


# ---------------------------------------------------------------------------
# ingestion
# ---------------------------------------------------------------------------

def _fractional_digits(text):
    mantissa = text.lower().split("e")[0]
    return len(mantissa.split(".")[1]) if "." in mantissa else 0


def ingest_zero_table(stream, format=PLAIN_ORDINATES, source=None):
    if format not in (PLAIN_ORDINATES, INDEXED_ORDINATES):
        raise DomainError(f"unknown zero table format {format!r}")
    zeros = []
    previous = None
    for line_number, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if format == INDEXED_ORDINATES:
            if len(fields) != 2:
                raise ZeroTableError(f"expected 'index ordinate', got {line!r}", line_number)
            text = fields[1]
        else:
            if len(fields) != 1:
                raise ZeroTableError(f"expected a single ordinate, got {line!r}", line_number)
            text = fields[0]
        digits = _fractional_digits(text)
        try:
            with mpmath.workdps(storage_digits(digits)):
                gamma = mpmath.mpf(text)
        except (ValueError, TypeError) as exc:
            raise ZeroTableError(f"cannot parse ordinate {text!r}", line_number) from exc
        if gamma <= 0 or (previous is not None and gamma <= previous):
            raise ZeroTableError(f"ordinate {text} is not above the previous one", line_number)
        previous = gamma
        zeros.append(ZetaZero(len(zeros) + 1, gamma, digits))
    name = source or getattr(stream, "name", "stream")
    logger.info("Ingested %s zero ordinates from %s", f"{len(zeros):,}", name)
    return ZeroTable(tuple(zeros), source=f"ingested:{name}")


def seed_ordinates(count, digits=15):
    """Low-precision ordinates of the first ``count`` zeros, as Newton seeds."""
    with mpmath.workdps(digits):
        return [+mpmath.zetazero(n).imag for n in range(1, count + 1)]


# ---------------------------------------------------------------------------
# refinement and verification
# ---------------------------------------------------------------------------

def _newton_context(digits, ctx):
    return NumericContext(max(digits, 10), ctx.guard_digits, Fraction(1))


def refine_zero(gamma_approx, target_digits, ctx, index=0, trace=None):
    """
    Complex Newton on zeta from 1/2 + i*gamma_approx. Each step runs at the
    precision of the iterate it produces (twice the digits already known), so
    only the last steps run at target_digits plus guard.
    """
    seed = mpmath.mpf(gamma_approx)
    s = mpmath.mpc(mpmath.mpf(0.5), seed)
    step_digits = NEWTON_START_DIGITS
    final_digits = target_digits + VERIFY_EXTRA_DIGITS
    tolerance = mpmath.mpf(10) ** (-target_digits)

    for step in range(NEWTON_MAX_STEPS):
        level = _newton_context(min(step_digits, final_digits), ctx)
        with level.workdps():
            s = +s
            value, slope = zeta_and_derivative(s, level)
            if slope == 0:
                raise NonConvergenceError(f"zero {index}: vanishing derivative during Newton",
                                          best_estimate=s)
            delta = value / slope
            s = s - delta
            size = abs(delta)
        log_size = float(mpmath.log10(size)) if size > 0 else -float(final_digits)
        if trace is not None:
            trace.append(log_size)
        if abs(s.imag - seed) > BASIN_GUARD or not 0 < s.real < 1:
            raise WrongZeroError(f"Newton left the {BASIN_GUARD} basin around "
                                 f"{mpmath.nstr(seed, 12)} (now at {mpmath.nstr(s.imag, 12)})",
                                 index)
        if size < tolerance and step_digits >= final_digits:
            break
        # the next step yields an iterate good to about 4 log10(1/delta) digits
        step_digits = max(step_digits, int(-4 * log_size) + NEWTON_GUARD_DIGITS)
    else:
        raise NonConvergenceError(f"zero {index}: Newton did not converge in "
                                  f"{NEWTON_MAX_STEPS} steps", best_estimate=s)

    store = storage_digits(target_digits)
    with mpmath.workdps(store):
        gamma = +s.imag
        deviation = +(s.real - mpmath.mpf(0.5))
    zero = ZetaZero(index, gamma, target_digits, real_part_deviation=deviation)
    zero = replace(zero, residual=verify_zero(zero, ctx))
    if abs(deviation) >= zero.residual_bound:
        logger.error("Zero %d: Re(s) - 1/2 = %s exceeds tolerance", index, mpmath.nstr(deviation, 5))
        raise OffCriticalLineError(f"off-critical-line candidate, Re(s) - 1/2 = "
                                   f"{mpmath.nstr(deviation, 5)}", zero)
    return zero


def verify_zero(zero, ctx):
    """|zeta(1/2 + i gamma)| at precision >= claimed precision + 10."""
    digits = max(zero.precision_digits + VERIFY_EXTRA_DIGITS, ctx.precision_digits)
    level = _newton_context(digits, ctx)
    residual = abs(zeta_complex(zero.rho, level))
    with mpmath.workdps(storage_digits(zero.precision_digits)):
        return +residual


def refine_table(seeds, refine_digits, ctx, source="refined", workers=None):
    """Refines seeds in index order; aborts with the index of the first failure."""
    start_time = time.time()
    total = len(seeds)
    jobs = [(gamma, refine_digits, ctx, i) for i, gamma in enumerate(seeds, start=1)]
    if workers and workers > 1 and total > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = pool.map(_refine_job, jobs)
            zeros = []
            for zero in results:
                zeros.append(zero)
                _log_refined(zero, total, start_time)
    else:
        zeros = []
        for job in jobs:
            zeros.append(_refine_job(job))
            _log_refined(zeros[-1], total, start_time)
    _check_separation(zeros)
    for zero in zeros:
        if not zero.is_verified:
            raise UnverifiedZeroError(f"residual {mpmath.nstr(zero.residual, 5)} above "
                                      f"{mpmath.nstr(zero.residual_bound, 3)}", zero.index)
    return ZeroTable(tuple(zeros), source=f"{source}; {GENERATOR}; digits={refine_digits}")


def _refine_job(job):
    gamma, digits, ctx, index = job
    return refine_zero(gamma, digits, ctx, index=index)


def _log_refined(zero, total, start_time):
    elapsed = time.time() - start_time
    logger.info("[%d/%d] Completed zero %d, gamma = %s  Elapsed time: %.1f min  "
                "Estimated time remaining: %.1f min", zero.index, total, zero.index,
                mpmath.nstr(zero.gamma, 15), elapsed / 60,
                elapsed / zero.index * (total - zero.index) / 60)


def _check_separation(zeros):
    for previous, current in zip(zeros, zeros[1:]):
        if current.gamma - previous.gamma <= MIN_ZERO_GAP:
            raise ZeroRefinementError(
                f"converged within {MIN_ZERO_GAP} of zero {previous.index} "
                f"(gamma = {mpmath.nstr(current.gamma, 15)})", current.index)


# ---------------------------------------------------------------------------
# derivatives
# ---------------------------------------------------------------------------

def attach_zeta_prime(table, ctx, workers=None):
    """Adds zeta'(rho) at the oversampled precision of ctx, stored at each zero's precision."""
    for zero in table.zeros:
        if not zero.is_verified:
            raise UnverifiedZeroError("refusing to attach a derivative to an unverified zero",
                                      zero.index)
    start_time = time.time()
    factor = ctx.oversample_factor
    if workers and workers > 1 and table.count > 1:
        jobs = [(z.index, _format_value(z.gamma, z.precision_digits),
                 z.precision_digits, ctx.guard_digits, str(factor)) for z in table.zeros]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            derivatives = dict(pool.map(_derivative_job, jobs))
        zeros = []
        for z in table.zeros:
            with mpmath.workdps(storage_digits(z.precision_digits)):
                re_text, im_text = derivatives[z.index]
                zeros.append(replace(z, zeta_prime=mpmath.mpc(re_text, im_text)))
    else:
        zeros = []
        for zero in table.zeros:
            zeros.append(replace(zero, zeta_prime=_derivative_at(zero, ctx.guard_digits, factor)))
            done = len(zeros)
            if done % 10 == 0 or done == table.count:
                elapsed = time.time() - start_time
                logger.info("[%d/%d] Derivatives attached  Elapsed time: %.1f min  "
                            "Estimated time remaining: %.1f min", done, table.count,
                            elapsed / 60, elapsed / done * (table.count - done) / 60)
    return ZeroTable(tuple(zeros), source=table.source)


def _derivative_at(zero, guard_digits, factor):
    level = NumericContext(max(zero.precision_digits, 10), guard_digits, Fraction(factor))
    try:
        value = zeta_prime(zero.rho, level)
    except BaezDuarteError as exc:
        raise ZeroEvaluationError(str(exc), zero.index) from exc
    with mpmath.workdps(storage_digits(zero.precision_digits)):
        return +value


def _derivative_job(job):
    index, gamma_text, digits, guard, factor = job
    with mpmath.workdps(storage_digits(digits)):
        zero = ZetaZero(index, mpmath.mpf(gamma_text), digits, residual=mpmath.mpf(0))
    value = _derivative_at(zero, guard, Fraction(factor))
    with mpmath.workdps(storage_digits(digits)):
        return index, (exact_decimal(value.real), exact_decimal(value.imag))


def degrade_derivatives(table, digits):
    """Rounds every stored zeta' to ``digits`` significant digits; metadata is untouched."""
    if digits < 1:
        raise DomainError(f"cannot degrade derivatives to {digits} digits")
    zeros = []
    for zero in table.zeros:
        if zero.zeta_prime is None:
            zeros.append(zero)
            continue
        with mpmath.workdps(digits):
            rounded = mpmath.mpc(+zero.zeta_prime.real, +zero.zeta_prime.imag)
        zeros.append(replace(zero, zeta_prime=rounded))
    return ZeroTable(tuple(zeros), source=f"{table.source}; derivatives degraded to {digits} digits")


@dataclass(frozen=True)
class DerivativeExtremes:
    min_index: int
    min_value: mpmath.mpf
    max_index: int
    max_value: mpmath.mpf


def scan_derivative_extremes(table, l_min=1, l_max=None):
    l_max = table.count if l_max is None else l_max
    if l_min < 1 or l_max > table.count or l_min > l_max:
        raise DomainError(f"empty or invalid zero range {l_min}..{l_max} "
                          f"for a table of {table.count}")
    best_min = best_max = None
    for zero in table.zeros[l_min - 1:l_max]:
        if zero.zeta_prime is None:
            raise ZeroTableError(f"zero {zero.index} has no derivative attached")
        size = abs(zero.zeta_prime)
        if best_min is None or size < best_min[1]:
            best_min = (zero.index, size)
        if best_max is None or size > best_max[1]:
            best_max = (zero.index, size)
    return DerivativeExtremes(best_min[0], best_min[1], best_max[0], best_max[1])


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

def _format_value(value, digits):
    if value is None:
        return UNSET
    with mpmath.workdps(storage_digits(digits)):
        return exact_decimal(+value)


def _format_fields(zero, digits):
    zp = zero.zeta_prime
    return [_format_value(zero.gamma, digits),
            _format_value(zero.residual, digits),
            _format_value(None if zp is None else zp.real, digits),
            _format_value(None if zp is None else zp.imag, digits)]


def _body_lines(table):
    """Rows at the table precision; zeros held to more digits are rounded to it."""
    digits = table.precision_digits
    for zero in table.zeros:
        yield "\t".join([str(zero.index)] + _format_fields(zero, digits)) + "\n"


def _parse_fields(fields, digits, line_number):
    if len(fields) != len(COLUMNS):
        raise TableFormatError(f"expected {len(COLUMNS)} columns, found {len(fields)}", line_number)
    try:
        index = int(fields[0])
        with mpmath.workdps(storage_digits(digits)):
            gamma, residual, zp_re, zp_im = [None if f == UNSET else mpmath.mpf(f)
                                             for f in fields[1:]]
            zp = None if zp_re is None or zp_im is None else mpmath.mpc(zp_re, zp_im)
    except ValueError as exc:
        raise TableFormatError(f"unparseable row: {exc}", line_number) from exc
    if gamma is None:
        raise TableFormatError("missing ordinate", line_number)
    return ZetaZero(index, gamma, digits, residual, zp)


def persist_table(table, sink):
    if isinstance(sink, (str, os.PathLike)):
        with open(sink, "w", encoding="ascii", newline="\n") as stream:
            return persist_table(table, stream)
    sink.write(f"#version: {TABLE_FORMAT_VERSION}\n")
    sink.write(f"#count: {table.count}\n")
    sink.write(f"#precision_digits: {table.precision_digits}\n")
    sink.write(f"#source: {table.source}\n")
    sink.write(f"#generator: {GENERATOR}\n")
    sink.write(f"#columns: {' '.join(COLUMNS)}\n")
    for line in _body_lines(table):
        sink.write(line)
    logger.info("Saved %s zeros (fingerprint %s)", f"{table.count:,}", table.fingerprint())


def is_persisted_table(path):
    with open(path, encoding="ascii") as stream:
        first = stream.readline()
    return first.startswith("#version:")


def _header_precision(header, line_number):
    try:
        digits = int(header["precision_digits"])
    except (KeyError, ValueError) as exc:
        raise TableFormatError("rows before a valid precision_digits header", line_number) from exc
    if digits < 0:
        raise TableFormatError(f"negative precision_digits {digits}", line_number)
    return digits


def load_table(source, required_precision=None):
    if isinstance(source, (str, os.PathLike)):
        with open(source, encoding="ascii") as stream:
            return load_table(stream, required_precision)
    header = {}
    digits = None
    zeros = []
    previous = None
    for line_number, raw in enumerate(source, start=1):
        line = raw.rstrip("\n")
        if not line:
            continue
        if line.startswith("#"):
            key, _, value = line[1:].partition(":")
            key, value = key.strip(), value.strip()
            if key == "version" and value != str(TABLE_FORMAT_VERSION):
                raise UnsupportedVersionError(f"table version {value} is not supported "
                                              f"(expected {TABLE_FORMAT_VERSION})", line_number)
            header[key] = value
            continue
        if "version" not in header:
            raise TableFormatError("data before the version header", line_number)
        if digits is None:
            digits = _header_precision(header, line_number)
        zero = _parse_fields(line.split("\t"), digits, line_number)
        if zero.index != len(zeros) + 1:
            raise TableFormatError(f"index {zero.index} out of sequence", line_number)
        if previous is not None and not zero.gamma > previous:
            raise TableFormatError(f"ordinate of zero {zero.index} does not increase", line_number)
        previous = zero.gamma
        zeros.append(zero)

    if "version" not in header:
        raise TableFormatError("missing version header")
    if int(header.get("count", -1)) != len(zeros):
        raise TableFormatError(f"header count {header.get('count')} but {len(zeros)} rows; "
                               f"file truncated?")
    table = ZeroTable(tuple(zeros), source=header.get("source", ""))
    if required_precision is not None and table.precision_digits < required_precision:
        raise PrecisionMismatchError(f"table holds {table.precision_digits} digits, "
                                     f"{required_precision} required")
    return table


def zero_table_text(table):
    buffer = io.StringIO()
    persist_table(table, buffer)
    return buffer.getvalue()
