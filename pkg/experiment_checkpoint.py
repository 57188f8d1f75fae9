"""
Experiment configuration and resumable checkpoints for the long generic sum.

A checkpoint is key: value text (decimal / integer strings only) closed by an
``end: ok`` line; a file without it is treated as truncated.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import List, Optional, Tuple

import mpmath

from baez_duarte import GenericSumState, PartialSumTrace
from precision_core import BaezDuarteError, exact_decimal

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
END_MARKER = "end"


class CheckpointError(BaezDuarteError):
    pass


class FingerprintMismatchError(CheckpointError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    k: int = 1000
    target_digits: int = 100
    zeros_file: Optional[str] = None
    refine_digits: int = 120
    zeros_count: int = 100
    oversample_factor: str = "2"
    trace_stride: Optional[int] = None
    checkpoint_path: Optional[str] = None
    output_dir: str = "outputs"
    guard_digits: int = 20
    generic_digits: Optional[int] = None

    @property
    def oversample(self):
        return Fraction(self.oversample_factor)

    def fingerprint(self):
        text = json.dumps(asdict(self), sort_keys=True)
        return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]

    def generic_fingerprint(self, precision_digits):
        """Identity of a generic-sum run: only what changes its partial sums."""
        text = f"k={self.k};precision_digits={precision_digits};guard_digits={self.guard_digits}"
        return hashlib.sha256(text.encode("ascii")).hexdigest()[:16]


@dataclass
class ExperimentCheckpoint:
    config_fingerprint: str
    k: int
    next_j: int
    partial_sum: str
    binomial_state: str
    precision_digits: int
    working_digits: int
    peak_index: int = 0
    peak_value: str = "0.0"
    trace_rows: List[Tuple[int, str]] = field(default_factory=list)

    @property
    def completed(self):
        return self.next_j > self.k


def checkpoint_from_state(state, config_fingerprint, ctx):
    with ctx.workdps():
        return ExperimentCheckpoint(
            config_fingerprint=config_fingerprint,
            k=state.k,
            next_j=state.next_j,
            partial_sum=exact_decimal(state.partial_sum),
            binomial_state=str(state.binomial),
            precision_digits=ctx.precision_digits,
            working_digits=ctx.working_digits,
            peak_index=state.trace.peak_index,
            peak_value=exact_decimal(state.trace.peak_value),
            trace_rows=[(n, exact_decimal(v)) for n, v in state.trace.rows],
        )


def state_from_checkpoint(checkpoint, ctx):
    with ctx.workdps():
        trace = PartialSumTrace([(n, mpmath.mpf(v)) for n, v in checkpoint.trace_rows],
                                checkpoint.peak_index, mpmath.mpf(checkpoint.peak_value))
        return GenericSumState(checkpoint.k, checkpoint.next_j, mpmath.mpf(checkpoint.partial_sum),
                               int(checkpoint.binomial_state), trace)


def checkpoint_write(path, checkpoint):
    """Writes atomically: a temporary file replaced into place."""
    path = Path(path)
    lines = [
        f"version: {CHECKPOINT_VERSION}",
        f"config_fingerprint: {checkpoint.config_fingerprint}",
        f"k: {checkpoint.k}",
        f"next_j: {checkpoint.next_j}",
        f"precision_digits: {checkpoint.precision_digits}",
        f"working_digits: {checkpoint.working_digits}",
        f"partial_sum: {checkpoint.partial_sum}",
        f"binomial_state: {checkpoint.binomial_state}",
        f"peak_index: {checkpoint.peak_index}",
        f"peak_value: {checkpoint.peak_value}",
        f"trace_rows: {len(checkpoint.trace_rows)}",
    ]
    lines += [f"trace: {n} {value}" for n, value in checkpoint.trace_rows]
    lines.append(f"{END_MARKER}: ok")
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="ascii", newline="\n") as stream:
        stream.write("\n".join(lines) + "\n")
    os.replace(tmp, path)
    logger.debug("Checkpoint written at j=%d to %s", checkpoint.next_j, path)


def checkpoint_read(path):
    values = {}
    trace = []
    with open(path, encoding="ascii") as stream:
        for line_number, raw in enumerate(stream, start=1):
            line = raw.strip()
            if not line:
                continue
            key, sep, value = line.partition(":")
            if not sep:
                raise CheckpointError(f"{path}: line {line_number} is not 'key: value'")
            key, value = key.strip(), value.strip()
            if key == "trace":
                n, _, decimal = value.partition(" ")
                trace.append((int(n), decimal))
            else:
                values[key] = value
    if values.get(END_MARKER) != "ok":
        raise CheckpointError(f"{path}: checkpoint is truncated (no end marker)")
    if values.get("version") != str(CHECKPOINT_VERSION):
        raise CheckpointError(f"{path}: unsupported checkpoint version {values.get('version')}")
    try:
        expected_rows = int(values["trace_rows"])
        checkpoint = ExperimentCheckpoint(
            config_fingerprint=values["config_fingerprint"],
            k=int(values["k"]),
            next_j=int(values["next_j"]),
            partial_sum=values["partial_sum"],
            binomial_state=values["binomial_state"],
            precision_digits=int(values["precision_digits"]),
            working_digits=int(values["working_digits"]),
            peak_index=int(values["peak_index"]),
            peak_value=values["peak_value"],
            trace_rows=trace,
        )
    except (KeyError, ValueError) as exc:
        raise CheckpointError(f"{path}: checkpoint is incomplete ({exc})") from exc
    if expected_rows != len(trace):
        raise CheckpointError(f"{path}: expected {expected_rows} trace rows, found {len(trace)}")
    return checkpoint


def checkpoint_resume(path, config_fingerprint, ctx):
    """GenericSumState to continue from, or None when no checkpoint exists yet."""
    if not Path(path).exists():
        return None
    checkpoint = checkpoint_read(path)
    if checkpoint.config_fingerprint != config_fingerprint:
        raise FingerprintMismatchError(
            f"{path}: checkpoint fingerprint {checkpoint.config_fingerprint} does not match "
            f"this run ({config_fingerprint})")
    if (checkpoint.precision_digits != ctx.precision_digits
            or checkpoint.working_digits != ctx.working_digits):
        raise FingerprintMismatchError(
            f"{path}: checkpoint was written at {checkpoint.precision_digits} digits, "
            f"this run uses {ctx.precision_digits}")
    logger.info("Resuming generic sum from j = %s of %s", f"{checkpoint.next_j:,}",
                f"{checkpoint.k:,}")
    return state_from_checkpoint(checkpoint, ctx)
