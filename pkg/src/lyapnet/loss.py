"""Two-term margin hinge loss and the batch summary metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MARGIN_MODES = ("constant", "state_scaled")


@dataclass(frozen=True)
class LossConfig:
    m1: float = 0.02
    m2: float = 0.02
    margin_mode: str = "state_scaled"

    def __post_init__(self):
        if self.m1 < 0 or self.m2 < 0:
            raise ValueError(f"margins must be nonnegative, got m1={self.m1}, m2={self.m2}")
        if self.margin_mode not in MARGIN_MODES:
            raise ValueError(f"unknown margin_mode {self.margin_mode!r}")


@dataclass(frozen=True)
class LossBreakdown:
    total: float
    h1_mean: float
    h2_mean: float
    violation_fraction_V: float
    violation_fraction_Vdot: float


@dataclass(frozen=True)
class BatchMetrics:
    breakdown: LossBreakdown
    v_bar: float
    vdot_bar: float


def h1_active(v, m1):
    return np.asarray(v) <= m1


def h2_active(vdot, m2):
    return np.asarray(vdot) > -np.asarray(m2)


def h1(v, m1):
    """Penalty for V not exceeding the margin: ``m1 - v`` if ``v <= m1`` else 0."""
    out = np.where(h1_active(v, m1), m1 - np.asarray(v, dtype=float), 0.0)
    return float(out) if out.ndim == 0 else out


def h2(vdot, m2):
    """Penalty for Vdot above ``-m2``: ``vdot + m2`` if ``vdot > -m2`` else 0."""
    out = np.where(h2_active(vdot, m2), np.asarray(vdot, dtype=float) + m2, 0.0)
    return float(out) if out.ndim == 0 else out


def margins(x, cfg: LossConfig):
    """Per-point margins; ``state_scaled`` multiplies both by ``|x|^2``."""
    if cfg.margin_mode == "constant":
        return cfg.m1, cfg.m2
    sq = np.sum(np.asarray(x, dtype=float) ** 2, axis=-1)
    return cfg.m1 * sq, cfg.m2 * sq


def point_loss(net, sys, x, cfg: LossConfig) -> float:
    x = np.asarray(x, dtype=float)
    m1, m2 = margins(x, cfg)
    return float(h1(net.value(x), m1) + h2(net.vdot(sys, x), m2))


def metrics_from_values(v, vd, m1, m2) -> BatchMetrics:
    a1 = h1(v, m1)
    a2 = h2(vd, m2)
    h1_mean = float(np.mean(a1))
    h2_mean = float(np.mean(a2))
    breakdown = LossBreakdown(
        total=h1_mean + h2_mean,
        h1_mean=h1_mean,
        h2_mean=h2_mean,
        violation_fraction_V=float(np.mean(h1_active(v, m1))),
        violation_fraction_Vdot=float(np.mean(h2_active(vd, m2))),
    )
    return BatchMetrics(breakdown, float(np.mean(v)), float(np.mean(vd)))


def batch_metrics(net, sys, batch, cfg: LossConfig) -> BatchMetrics:
    batch = np.atleast_2d(np.asarray(batch, dtype=float))
    if batch.shape[0] == 0:
        raise ValueError("empty batch")
    v, vd = net.value_and_vdot(batch, sys.evaluate(batch))
    m1, m2 = margins(batch, cfg)
    return metrics_from_values(v, vd, m1, m2)


def batch_loss(net, sys, batch, cfg: LossConfig) -> float:
    """Mean loss over a batch (the quantity SGD minimizes)."""
    return batch_metrics(net, sys, batch, cfg).breakdown.total
