"""
Run the c_k experiments: generic-versus-explicit comparison, partial-sum trace,
envelope data, y(n) distance curve, zero refinement and zeta' scans.

Every data file is a CSV preceded by '#key: value' header lines; reports go to
compare_k<k>.txt / .json. Progress is logged to standard error and to the
experiment log so a long run can be watched with check_progress.sh.
"""

import argparse
import json
import logging
import sys
import time
from fractions import Fraction
from pathlib import Path

import mpmath
import numpy as np
import pandas as pd

import analyze_zero_table
from baez_duarte import (EXACT, SUMMATION_ORDER, BaezDuarteResult, ck_generic,
                         ck_oscillation_asymptotic, ck_oscillation_exact, ck_trend,
                         criterion_strip_ratio, envelope, next_ordinate,
                         required_precision_for_generic, sine_approx_params, truncation_floor,
                         y_curve, zeros_needed)
from experiment_checkpoint import (ExperimentConfig, checkpoint_from_state, checkpoint_resume,
                                   checkpoint_write)
from precision_core import (ROUNDING_MODE, BaezDuarteError, DomainError, agreement_bracket,
                            digits_of_agreement, exact_decimal, format_decimal, make_context)
from zero_store import (INDEXED_ORDINATES, PLAIN_ORDINATES, ZeroRefinementError, ZeroTable,
                        ZeroTableError, attach_zeta_prime, degrade_derivatives, ingest_zero_table,
                        is_persisted_table, load_table, persist_table, refine_table,
                        seed_ordinates)

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"
LOG_DATEFMT = "%Y-%m-%d %H:%M:%S"
DEFAULT_LOG_FILE = "experiment.log"
PARTIAL_SUM_STRIDE = 10000
PARTIAL_SUM_DIGITS = 15
CURVE_DIGITS = 15
Y_DEFINITION = ("-1/ln|S_n - c_generic| (natural log, leading minus: "
                "y > 0 while |S_n - c_generic| < 1)")
COMMAND_ALIASES = {"table1": "partial-sums", "fig1": "envelope", "fig2": "distance-curve"}


def setup_logger(log_file=DEFAULT_LOG_FILE, level=logging.INFO):
    """Console handler on stderr plus an append-mode file handler."""
    root = logging.getLogger()
    root.setLevel(level)
    for handler in list(root.handlers):
        if getattr(handler, "experiment_handler", False):
            root.removeHandler(handler)
            handler.close()
    formatter = logging.Formatter(LOG_FORMAT, datefmt=LOG_DATEFMT)

    handlers = [logging.StreamHandler(sys.stderr)]
    if log_file:
        handlers.append(logging.FileHandler(log_file, mode="a", encoding="utf-8"))
    for handler in handlers:
        handler.setFormatter(formatter)
        handler.experiment_handler = True
        root.addHandler(handler)
    return root


def banner(title):
    logger.info("=" * 80)
    logger.info(title)
    logger.info("=" * 80)


# ---------------------------------------------------------------------------
# contexts and inputs
# ---------------------------------------------------------------------------

def explicit_context(config):
    return make_context(config.refine_digits, config.guard_digits, config.oversample)


def generic_context(config):
    digits = config.generic_digits or required_precision_for_generic(config.k, config.target_digits)
    return make_context(digits, config.guard_digits, config.oversample)


def read_seeds(path):
    """Ordinates from a plain or 'index ordinate' text file, format detected from the first row."""
    with open(path, encoding="ascii") as stream:
        first = next((line for line in stream if line.strip() and not line.startswith("#")), "")
    fmt = INDEXED_ORDINATES if len(first.split()) == 2 else PLAIN_ORDINATES
    with open(path, encoding="ascii") as stream:
        table = ingest_zero_table(stream, fmt, source=str(path))
    return [zero.gamma for zero in table.zeros]


def prepare_zeros(config, ctx, workers=None, seeds_from_mpmath=False):
    """
    The first config.zeros_count zeros at ctx precision with derivatives attached:
    loaded from a persisted table, or refined from a seed file / mpmath seeds.
    """
    count = config.zeros_count
    if config.zeros_file and is_persisted_table(config.zeros_file):
        table = load_table(config.zeros_file, required_precision=ctx.precision_digits)
        if table.count < count:
            raise ZeroTableError(f"{config.zeros_file} holds {table.count} zeros, {count} requested")
        table = ZeroTable(table.zeros[:count], table.source)
        if any(zero.zeta_prime is None for zero in table.zeros):
            table = attach_zeta_prime(table, ctx, workers)
        return table

    if config.zeros_file:
        seeds = read_seeds(config.zeros_file)
    elif seeds_from_mpmath:
        seeds = seed_ordinates(count)
    else:
        raise DomainError("no zeros available: pass --zeros-file or --seeds-from-mpmath")
    if len(seeds) < count:
        raise DomainError(f"{count} zeros requested but only {len(seeds)} seeds available")
    table = refine_table(seeds[:count], ctx.precision_digits, ctx, workers=workers)
    return attach_zeta_prime(table, ctx, workers)


def check_achievable(config, table):
    """Warns when the zero count cannot carry target_digits."""
    gamma_needed, needed = zeros_needed(config.target_digits, table)
    if needed is None or needed > config.zeros_count:
        logger.warning("target of %d digits needs zeros up to gamma = %s; L = %d stops short",
                       config.target_digits, mpmath.nstr(gamma_needed, 8), config.zeros_count)
        return False
    return True


def write_data_file(path, header, df):
    """'#key: value' header lines then the CSV body; no timestamps, reruns are byte-identical."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="ascii", newline="\n") as stream:
        for key, value in header.items():
            stream.write(f"#{key}: {value}\n")
        df.to_csv(stream, index=False, lineterminator="\n")
    logger.info(">>> Saved %s rows to %s", f"{len(df):,}", path)
    return path


def base_header(config, ctx, table=None):
    header = {
        "config_fingerprint": config.fingerprint(),
        "context_fingerprint": ctx.fingerprint(),
        "precision_digits": ctx.precision_digits,
        "guard_digits": ctx.guard_digits,
        "oversample_factor": str(ctx.oversample_factor),
        "rounding": ROUNDING_MODE,
    }
    if table is not None:
        header["zero_table_fingerprint"] = table.fingerprint()
        header["zeros_used"] = table.count
    return header


# ---------------------------------------------------------------------------
# generic sum with checkpoints
# ---------------------------------------------------------------------------

def compute_generic(config, trace_stride=None, resume=False):
    """c_k by the binomial sum, checkpointed to config.checkpoint_path when set."""
    ctx = generic_context(config)
    fingerprint = config.generic_fingerprint(ctx.precision_digits)
    state = None
    on_checkpoint = None
    if config.checkpoint_path:
        if resume:
            state = checkpoint_resume(config.checkpoint_path, fingerprint, ctx)
            if state is not None and state.completed:
                with ctx.workdps():
                    logger.info("Checkpoint holds the completed sum: c_%d = %s", config.k,
                                mpmath.nstr(state.partial_sum, 20))

        def on_checkpoint(current):
            checkpoint_write(config.checkpoint_path, checkpoint_from_state(current, fingerprint, ctx))

    logger.info("Generic sum for k = %s at %d digits (guard %d)", f"{config.k:,}",
                ctx.precision_digits, ctx.guard_digits)
    value, trace = ck_generic(config.k, ctx, trace_stride=trace_stride, resume_state=state,
                              on_checkpoint=on_checkpoint, target_digits=config.target_digits)
    return value, trace, ctx


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_compare(config, workers=None, seeds_from_mpmath=False, resume=False):
    banner(f"COMPARE c_k, k = {config.k:,}")
    start_time = time.time()
    c_generic, _, gctx = compute_generic(config, config.trace_stride, resume)

    ectx = explicit_context(config)
    table = prepare_zeros(config, ectx, workers, seeds_from_mpmath)
    check_achievable(config, table)
    c_trend = ck_trend(config.k, ectx)
    c_osc_exact = ck_oscillation_exact(config.k, table, table.count, ectx)
    c_osc_asymptotic = (ck_oscillation_asymptotic(config.k, table, table.count, ectx)
                        if config.k >= 1 else None)

    with ectx.workdps():
        c_explicit = c_trend + c_osc_exact
        agreement = digits_of_agreement(c_generic, c_explicit)
        measured = abs(c_generic - c_explicit)
    floor = truncation_floor(next_ordinate(table, table.count))
    result = BaezDuarteResult(config.k, c_generic, c_trend, c_osc_exact, c_osc_asymptotic,
                              table.count, agreement, ectx.fingerprint())

    report = build_report(config, result, gctx, ectx, table, floor, measured)
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    txt_path = out_dir / f"compare_k{config.k}.txt"
    json_path = out_dir / f"compare_k{config.k}.json"
    txt_path.write_text(render_report(report), encoding="utf-8")
    json_path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    logger.info("Digits of agreement: %s  (%s)", agreement, report["bracket"])
    logger.info("Elapsed time: %.1f min", (time.time() - start_time) / 60)
    logger.info(">>> Saved report to %s and %s", txt_path, json_path)
    return report


def build_report(config, result, gctx, ectx, table, floor, measured):
    with gctx.workdps():
        c_generic = exact_decimal(result.c_generic)
    with ectx.workdps():
        explicit = {
            "c_trend": exact_decimal(result.c_trend),
            "c_osc_exact": exact_decimal(result.c_osc_exact),
            "c_osc_asymptotic": (None if result.c_osc_asymptotic is None
                                 else exact_decimal(result.c_osc_asymptotic)),
            "c_explicit": exact_decimal(result.c_explicit),
        }
    return {
        "k": result.k,
        "c_generic": c_generic,
        **explicit,
        "agreement_digits": result.agreement_digits,
        "bracket": agreement_bracket(result.agreement_digits),
        "zeros_used": result.zeros_used,
        "truncation_floor": format_decimal(floor, 5),
        "measured_difference": "0" if measured == 0 else format_decimal(measured, 5),
        "summation_order": SUMMATION_ORDER,
        "generic_context": {"fingerprint": gctx.fingerprint(),
                            "precision_digits": gctx.precision_digits,
                            "guard_digits": gctx.guard_digits},
        "explicit_context": {"fingerprint": result.context_fingerprint,
                             "precision_digits": ectx.precision_digits,
                             "guard_digits": ectx.guard_digits,
                             "oversample_factor": str(ectx.oversample_factor)},
        "zero_table_fingerprint": table.fingerprint(),
        "zero_table_source": table.source,
        "config_fingerprint": config.fingerprint(),
        "rounding": ROUNDING_MODE,
    }


def render_report(report):
    lines = [
        "=" * 80,
        f"c_k COMPARISON REPORT, k = {report['k']:,}",
        "=" * 80,
        "",
        f"c_generic          = {report['c_generic']}",
        f"c_trend            = {report['c_trend']}",
        f"c_osc (exact)      = {report['c_osc_exact']}",
        f"c_osc (asymptotic) = {report['c_osc_asymptotic']}",
        f"c_trend + c_osc    = {report['c_explicit']}",
        "",
        f"Digits of agreement: {report['agreement_digits']}",
        f"  {report['bracket']}",
        f"Zeros used (L):      {report['zeros_used']:,}",
        f"Truncation floor:    {report['truncation_floor']}  (e^(-pi gamma_(L+1)/4))",
        f"|generic-explicit|:  {report['measured_difference']}",
        "",
        "Provenance:",
        f"  generic context:   {report['generic_context']['fingerprint']} "
        f"({report['generic_context']['precision_digits']} digits)",
        f"  explicit context:  {report['explicit_context']['fingerprint']} "
        f"({report['explicit_context']['precision_digits']} digits, oversample "
        f"{report['explicit_context']['oversample_factor']})",
        f"  zero table:        {report['zero_table_fingerprint']} ({report['zero_table_source']})",
        f"  config:            {report['config_fingerprint']}",
        f"  summation order:   {report['summation_order']}",
        f"  rounding:          {report['rounding']}",
    ]
    return "\n".join(lines) + "\n"


def cmd_partial_sums(config, resume=False):
    stride = config.trace_stride or PARTIAL_SUM_STRIDE
    banner(f"PARTIAL SUMS OF c_k, k = {config.k:,}, stride {stride:,}")
    value, trace, ctx = compute_generic(config, stride, resume)
    with ctx.workdps():
        df = pd.DataFrame({
            "n": [n for n, _ in trace.rows],
            "partial_sum": [format_decimal(s, PARTIAL_SUM_DIGITS) for n, s in trace.rows],
        })
        header = base_header(config, ctx)
        header.update({"k": config.k, "trace_stride": stride,
                       "peak_index": trace.peak_index,
                       "peak_abs_partial_sum": format_decimal(trace.peak_value, PARTIAL_SUM_DIGITS),
                       "c_k": exact_decimal(value)})
    path = Path(config.output_dir) / f"partial_sums_k{config.k}.csv"
    return write_data_file(path, header, df)


def k_grid(k_min, k_max, samples):
    if k_min < 1 or k_max < k_min or samples < 1:
        raise DomainError(f"invalid k grid {k_min}..{k_max} with {samples} samples")
    grid = np.unique(np.rint(np.geomspace(k_min, k_max, samples)).astype(np.int64))
    return [int(k) for k in grid]


def cmd_envelope(config, k_min, k_max, samples, workers=None, seeds_from_mpmath=False):
    banner(f"ENVELOPE DATA, k = {k_min:,} .. {k_max:,}")
    ctx = explicit_context(config)
    table = prepare_zeros(config, ctx, workers, seeds_from_mpmath)
    if table.count < 50:
        logger.warning("only %d zeros; the envelope data wants at least 50", table.count)
    params = sine_approx_params(table[1], ctx)
    grid = k_grid(k_min, k_max, samples)

    rows = []
    start_time = time.time()
    with ctx.workdps():
        for i, k in enumerate(grid, 1):
            c_k = ck_trend(k, ctx) + ck_oscillation_asymptotic(k, table, table.count, ctx)
            upper, lower = envelope(k, params)
            rows.append({
                "k": k,
                "c_k_explicit": format_decimal(c_k, CURVE_DIGITS),
                "envelope_plus": format_decimal(upper, CURVE_DIGITS),
                "envelope_minus": format_decimal(lower, CURVE_DIGITS),
                "strip_ratio": format_decimal(criterion_strip_ratio(k, c_k, params), CURVE_DIGITS),
            })
            if i % 10 == 0 or i == len(grid):
                elapsed = time.time() - start_time
                logger.info("[%d/%d] Envelope grid  Elapsed time: %.1f min  "
                            "Estimated time remaining: %.1f min", i, len(grid), elapsed / 60,
                            elapsed / i * (len(grid) - i) / 60)
        header = base_header(config, ctx, table)
        header.update({"k_min": k_min, "k_max": k_max, "samples": samples,
                       "amplitude_A": format_decimal(params.amplitude_A, 7),
                       "phase_phi": format_decimal(params.phase_phi, 7),
                       "oscillation_form": "asymptotic"})
    path = Path(config.output_dir) / f"envelope_k{k_min}-{k_max}.csv"
    return write_data_file(path, header, pd.DataFrame(rows))


def _y_columns(points, suffix=""):
    return {
        f"y{suffix}": ["saturated" if p.saturated else format_decimal(p.y, CURVE_DIGITS)
                       for p in points],
        f"log10_distance{suffix}": ["saturated" if p.saturated else f"{p.log10_distance:.6f}"
                                    for p in points],
    }


def cmd_distance_curve(config, degrade_to=None, workers=None, seeds_from_mpmath=False, resume=False):
    n_max = config.zeros_count
    banner(f"DISTANCE CURVE y(n), k = {config.k:,}, n <= {n_max:,}")
    c_generic, _, gctx = compute_generic(config, config.trace_stride, resume)
    ctx = explicit_context(config)
    if n_max:
        table = prepare_zeros(config, ctx, workers, seeds_from_mpmath)
    else:
        table = ZeroTable((), source="none")
    trend = ck_trend(config.k, ctx)
    points = y_curve(config.k, c_generic, table, n_max, ctx, EXACT, trend)

    with ctx.workdps():
        data = {
            "n": [p.n for p in points],
            "gamma_n": ["" if p.gamma is None else format_decimal(p.gamma, CURVE_DIGITS)
                        for p in points],
        }
    data.update(_y_columns(points))
    header = base_header(config, ctx, table)
    header.update({"k": config.k, "n_max": n_max, "generic_context_fingerprint": gctx.fingerprint(),
                   "oscillation_form": EXACT, "y_definition": Y_DEFINITION})
    if degrade_to is not None and n_max:
        degraded = degrade_derivatives(table, degrade_to)
        data.update(_y_columns(y_curve(config.k, c_generic, degraded, n_max, ctx, EXACT, trend),
                               "_degraded"))
        header["degraded_derivative_digits"] = degrade_to
    path = Path(config.output_dir) / f"distance_k{config.k}.csv"
    return write_data_file(path, header, pd.DataFrame(data))


def cmd_refine_zeros(config, output=None, workers=None, seeds_from_mpmath=False):
    count = config.zeros_count
    banner(f"REFINE {count:,} ZEROS TO {config.refine_digits} DIGITS")
    ctx = explicit_context(config)
    if count == 0:
        logger.warning("zero count is 0; writing an empty table")
        table = ZeroTable((), source="empty")
    else:
        table = prepare_zeros(config, ctx, workers, seeds_from_mpmath)
    path = Path(output or Path(config.output_dir) / f"zeros_{config.refine_digits}d_{count}.tsv")
    path.parent.mkdir(parents=True, exist_ok=True)
    persist_table(table, path)
    df = analyze_zero_table.zero_frame(table)
    analyze_zero_table.residual_summary(table, df)
    analyze_zero_table.derivative_summary(table, df=df)
    return path


def cmd_scan_zeta_prime(config, l_min=1, l_max=None, output=None, workers=None):
    if not config.zeros_file:
        raise DomainError("scan-zeta-prime needs --zeros-file")
    banner(f"SCAN |zeta'(rho)| OVER {config.zeros_file}")
    table = load_table(config.zeros_file)
    if any(zero.zeta_prime is None for zero in table.zeros):
        ctx = make_context(max(table.precision_digits, 10), config.guard_digits, config.oversample)
        table = attach_zeta_prime(table, ctx, workers)
    df = analyze_zero_table.zero_frame(table)
    analyze_zero_table.residual_summary(table, df)
    extremes = analyze_zero_table.derivative_summary(table, l_min, l_max, df)
    if output:
        analyze_zero_table.export_zero_summary(table, output)
    return extremes


# ---------------------------------------------------------------------------
# command line
# ---------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(description="High-precision c_k experiments")
    parser.add_argument("--log-file", default=DEFAULT_LOG_FILE)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--k", type=int, default=1000)
        p.add_argument("--digits", type=int, default=100, help="target digits of agreement")
        p.add_argument("--generic-digits", type=int, default=None,
                       help="override the generic-sum precision")
        p.add_argument("--zeros-file", default=None)
        p.add_argument("--zeros-count", type=int, default=100)
        p.add_argument("--refine-digits", type=int, default=120)
        p.add_argument("--oversample", default="2")
        p.add_argument("--guard", type=int, default=20)
        p.add_argument("--trace-stride", type=int, default=None)
        p.add_argument("--checkpoint", default=None)
        p.add_argument("--resume", action="store_true")
        p.add_argument("--out-dir", default="outputs")
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--seeds-from-mpmath", action="store_true")
        return p

    common(sub.add_parser("compare", help="generic sum versus trend + oscillation"))
    common(sub.add_parser("partial-sums", aliases=["table1"],
                          help="partial sums of the generic sum"))
    grid = common(sub.add_parser("envelope", aliases=["fig1"],
                                 help="c_k and the envelope on a log k grid"))
    grid.add_argument("--k-min", type=int, default=10)
    grid.add_argument("--k-max", type=int, default=100000)
    grid.add_argument("--samples", type=int, default=200)
    curve = common(sub.add_parser("distance-curve", aliases=["fig2"],
                                   help="y(n) distance curve"))
    curve.add_argument("--degrade-derivatives-to", type=int, default=None)
    refine = common(sub.add_parser("refine-zeros", help="refine, verify and persist zeros"))
    refine.add_argument("--output", default=None)
    scan = common(sub.add_parser("scan-zeta-prime", help="|zeta'(rho)| summary and extremes"))
    scan.add_argument("--l-min", type=int, default=1)
    scan.add_argument("--l-max", type=int, default=None)
    scan.add_argument("--output", default=None)
    return parser


def config_from_args(args):
    try:
        oversample = Fraction(args.oversample)
    except (ValueError, ZeroDivisionError) as exc:
        raise DomainError(f"invalid --oversample {args.oversample!r}") from exc
    return ExperimentConfig(
        k=args.k,
        target_digits=args.digits,
        zeros_file=args.zeros_file,
        refine_digits=args.refine_digits,
        zeros_count=args.zeros_count,
        oversample_factor=str(oversample),
        trace_stride=args.trace_stride,
        checkpoint_path=args.checkpoint,
        output_dir=args.out_dir,
        guard_digits=args.guard,
        generic_digits=args.generic_digits,
    )


def run(args):
    config = config_from_args(args)
    extra = {"workers": args.workers, "seeds_from_mpmath": args.seeds_from_mpmath}
    command = COMMAND_ALIASES.get(args.command, args.command)
    if command == "compare":
        return cmd_compare(config, resume=args.resume, **extra)
    if command == "partial-sums":
        return cmd_partial_sums(config, resume=args.resume)
    if command == "envelope":
        return cmd_envelope(config, args.k_min, args.k_max, args.samples, **extra)
    if command == "distance-curve":
        return cmd_distance_curve(config, args.degrade_derivatives_to, resume=args.resume, **extra)
    if command == "refine-zeros":
        return cmd_refine_zeros(config, args.output, **extra)
    return cmd_scan_zeta_prime(config, args.l_min, args.l_max, args.output, args.workers)


def main(argv=None):
    args = build_parser().parse_args(argv)
    setup_logger(args.log_file)
    try:
        run(args)
    except ZeroRefinementError as e:
        logger.error("ERROR refining zero %s: %s", e.index, e)
        return 1
    except BaezDuarteError as e:
        logger.error("ERROR: %s", e)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
