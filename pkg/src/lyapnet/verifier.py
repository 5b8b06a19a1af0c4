"""Dense post-hoc check of the Lyapunov sign conditions, plus planar grid export."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np

from .sampler import SamplingDomain, sample_budget, sample_uniform

log = logging.getLogger(__name__)

SAMPLE_CAP = 10 ** 6
DEFAULT_PASS_THRESHOLD = 0.999
_CHUNK = 100_000


@dataclass(frozen=True)
class VerificationReport:
    samples_checked: int
    min_V: float
    max_Vdot: float
    fraction_V_positive: float
    fraction_Vdot_negative: float
    pass_threshold: float
    passed: bool
    radius: float
    inner_radius: float
    delta: float

    def as_dict(self) -> dict:
        return {
            "samples_checked": self.samples_checked,
            "min_V": self.min_V,
            "max_Vdot": self.max_Vdot,
            "fraction_V_positive": self.fraction_V_positive,
            "fraction_Vdot_negative": self.fraction_Vdot_negative,
            "pass_threshold": self.pass_threshold,
            "pass": self.passed,
            "radius": self.radius,
            "inner_radius": self.inner_radius,
            "delta": self.delta,
        }


def verify(net, sys, domain: SamplingDomain, rng: np.random.Generator,
           pass_threshold: float = DEFAULT_PASS_THRESHOLD, cap: int = SAMPLE_CAP) -> VerificationReport:
    """Check V > 0 and Vdot < 0 (strict, no margins) on fresh uniform samples.

    The sample count is ``sample_budget(domain)``, capped at ``cap``. The
    origin itself is excluded, since both conditions are only required away
    from it; with ``inner_radius = 0`` that only drops exact zeros.
    """
    if not 0 < pass_threshold <= 1:
        raise ValueError(f"pass_threshold must be in (0, 1], got {pass_threshold}")
    try:
        budget = sample_budget(domain)
    except OverflowError:
        budget = cap + 1
    if budget > cap:
        log.warning("sample budget %d exceeds cap; verifying on %d samples", budget, cap)
        budget = cap

    checked = 0
    n_pos = n_neg = 0
    min_v, max_vd = np.inf, -np.inf
    remaining = budget
    while remaining > 0:
        count = min(remaining, _CHUNK)
        remaining -= count
        x = sample_uniform(domain, count, rng)
        x = x[np.any(x != 0.0, axis=1)]
        v, vd = net.value_and_vdot(x, sys.evaluate(x))
        checked += x.shape[0]
        n_pos += int(np.count_nonzero(v > 0))
        n_neg += int(np.count_nonzero(vd < 0))
        if x.shape[0]:
            min_v = min(min_v, float(np.min(v)))
            max_vd = max(max_vd, float(np.max(vd)))

    frac_pos = n_pos / checked if checked else 0.0
    frac_neg = n_neg / checked if checked else 0.0
    return VerificationReport(
        samples_checked=checked,
        min_V=min_v,
        max_Vdot=max_vd,
        fraction_V_positive=frac_pos,
        fraction_Vdot_negative=frac_neg,
        pass_threshold=pass_threshold,
        passed=checked > 0 and frac_pos >= pass_threshold and frac_neg >= pass_threshold,
        radius=domain.radius,
        inner_radius=domain.inner_radius,
        delta=domain.delta,
    )


class UnsupportedDimension(ValueError):
    pass


def grid_values(net, sys, r: float, resolution: int):
    if sys.dim != 2:
        raise UnsupportedDimension(f"grid export needs a planar system, {sys.name} has dim {sys.dim}")
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    axis = np.linspace(-r, r, resolution)
    x1, x2 = np.meshgrid(axis, axis, indexing="ij")
    pts = np.column_stack([x1.ravel(), x2.ravel()])
    v, vd = net.value_and_vdot(pts, sys.evaluate(pts))
    return pts, v, vd


def export_grid(net, sys, r: float, resolution: int, path) -> None:
    """CSV ``x1,x2,V,Vdot`` over a ``resolution x resolution`` grid on ``[-r, r]^2``."""
    pts, v, vd = grid_values(net, sys, r, resolution)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x1", "x2", "V", "Vdot"])
        for (a, b), vi, vdi in zip(pts, v, vd):
            w.writerow([repr(float(a)), repr(float(b)), repr(float(vi)), repr(float(vdi))])
