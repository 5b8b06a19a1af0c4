"""Plain SGD on the hinge loss with fresh uniform batches every step."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from . import loss as loss_mod
from .sampler import SamplingDomain, rng_streams
from .verifier import DEFAULT_PASS_THRESHOLD, VerificationReport, verify

log = logging.getLogger(__name__)

CERTIFICATE_FOUND = "certificate_found"
NO_CERTIFICATE = "no_certificate"

CAVEAT = (
    "no_certificate means the search failed, not that instability was proven; "
    "since the network family can approximate any smooth function, a failed search "
    "only suggests that no Lyapunov function exists on this domain."
)
EVIDENCE_NOTE = (
    "certificate_found is empirical evidence from dense sampling, not a proof."
)


class NumericalAbort(ArithmeticError):
    def __init__(self, step: int, sample, what: str):
        self.step = step
        self.sample = sample
        super().__init__(f"non-finite {what} at step {step}, sample x={sample}")


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 20
    learning_rate: float = 0.005
    max_steps: int = 20000
    eval_every: int = 100
    eval_sample_count: int = 2000
    loss_tol: float = 1e-6
    patience_windows: int = 5
    pass_threshold: float = DEFAULT_PASS_THRESHOLD

    def __post_init__(self):
        for name in ("batch_size", "max_steps", "eval_every", "eval_sample_count", "patience_windows"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be nonnegative")


@dataclass(frozen=True)
class TraceRow:
    step: int
    breakdown: loss_mod.LossBreakdown
    v_bar: float
    vdot_bar: float


@dataclass
class TrainReport:
    system: str
    root_seed: int
    trace: list[TraceRow] = field(default_factory=list)
    verdict: str = NO_CERTIFICATE
    steps_run: int = 0
    converged: bool = False
    verification: VerificationReport | None = None
    checkpoint: str | None = None

    @property
    def final_loss(self) -> float:
        return self.trace[-1].breakdown.total if self.trace else float("nan")

    def summary(self) -> str:
        lines = [f"system {self.system}: {self.verdict} after {self.steps_run} steps "
                 f"(final eval loss {self.final_loss:.3g})"]
        if self.verification is not None:
            vr = self.verification
            lines.append(
                f"verification on {vr.samples_checked} samples: V>0 on {vr.fraction_V_positive:.4f}, "
                f"Vdot<0 on {vr.fraction_Vdot_negative:.4f} (threshold {vr.pass_threshold}), "
                f"min V {vr.min_V:.3g}, max Vdot {vr.max_Vdot:.3g}"
            )
        lines.append(EVIDENCE_NOTE if self.verdict == CERTIFICATE_FOUND else CAVEAT)
        return "\n".join(lines)


def _first_bad_row(x, v, vd):
    idx = np.flatnonzero(~(np.isfinite(v) & np.isfinite(vd)))
    return list(x[idx[0]]) if idx.size else None


def train(sys, net, domain: SamplingDomain, loss_cfg: loss_mod.LossConfig,
          train_cfg: TrainConfig, root_seed: int) -> TrainReport:
    """Run SGD on ``net`` in place and return the trace, verdict and verification."""
    if net.input_dim != sys.dim or domain.dim != sys.dim:
        raise ValueError(f"dimension mismatch: system {sys.dim}, network {net.input_dim}, domain {domain.dim}")
    streams = rng_streams(root_seed)
    eval_set = domain.sample(train_cfg.eval_sample_count, streams["eval"])
    eval_f = sys.evaluate(eval_set)
    eval_m1, eval_m2 = loss_mod.margins(eval_set, loss_cfg)
    batch_rng = streams["train"]
    report = TrainReport(sys.name, root_seed)
    lr = train_cfg.learning_rate
    below = 0

    def evaluate(step):
        v, vd = net.value_and_vdot(eval_set, eval_f)
        if not (np.all(np.isfinite(v)) and np.all(np.isfinite(vd))):
            raise NumericalAbort(step, _first_bad_row(eval_set, v, vd), "evaluation loss")
        m = loss_mod.metrics_from_values(v, vd, eval_m1, eval_m2)
        report.trace.append(TraceRow(step, m.breakdown, m.v_bar, m.vdot_bar))
        log.debug("step %d loss %.6g", step, m.breakdown.total)
        return m.breakdown.total

    evaluate(0)
    step = 0
    while step < train_cfg.max_steps:
        batch = domain.sample(train_cfg.batch_size, batch_rng)
        fx = sys.evaluate(batch)
        v, vd = net.value_and_vdot(batch, fx)
        if not (np.all(np.isfinite(v)) and np.all(np.isfinite(vd))):
            raise NumericalAbort(step, _first_bad_row(batch, v, vd), "loss")
        m1, m2 = loss_mod.margins(batch, loss_cfg)
        n = batch.shape[0]
        coef_v = -loss_mod.h1_active(v, m1).astype(float) / n
        coef_vd = loss_mod.h2_active(vd, m2).astype(float) / n
        if coef_v.any() or coef_vd.any():
            grad = net.weighted_param_gradient(batch, fx, coef_v, coef_vd)
            if not np.all(np.isfinite(grad)):
                raise NumericalAbort(step, list(batch[0]), "gradient")
            net.set_params(net.get_params() - lr * grad)
        step += 1
        if step % train_cfg.eval_every == 0 or step == train_cfg.max_steps:
            if evaluate(step) < train_cfg.loss_tol:
                below += 1
            else:
                below = 0
            if below >= train_cfg.patience_windows:
                report.converged = True
                break

    report.steps_run = step
    if report.converged:
        report.verification = verify(net, sys, domain, streams["verify"], train_cfg.pass_threshold)
        if report.verification.passed:
            report.verdict = CERTIFICATE_FOUND
    return report


TRACE_HEADER = ["step", "loss", "h1_mean", "h2_mean", "v_bar", "vdot_bar", "viol_V", "viol_Vdot"]


def export_trace(report: TrainReport, path) -> None:
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRACE_HEADER)
            for row in report.trace:
                b = row.breakdown
                w.writerow([row.step] + [repr(float(v)) for v in (
                    b.total, b.h1_mean, b.h2_mean, row.v_bar, row.vdot_bar,
                    b.violation_fraction_V, b.violation_fraction_Vdot)])
    except OSError as e:
        raise OSError(f"cannot write trace to {path}: {e}") from e
