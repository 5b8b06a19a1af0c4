"""Autonomous dynamical systems xdot = f(x) and small linear-algebra oracles."""

from __future__ import annotations

import cmath
from dataclasses import dataclass, field

import numpy as np

from . import expr as ex

VERDICTS = ("stable", "unstable", "unknown")


class NonFiniteDynamics(ArithmeticError):
    """f(x) produced inf or nan; treated as a fatal configuration error."""

    def __init__(self, message: str, state=None):
        self.state = state
        super().__init__(message)


@dataclass(frozen=True)
class DynamicalSystem:
    name: str
    dim: int
    rhs: tuple
    expected_verdict: str = "unknown"
    sources: tuple = field(default=(), compare=False)

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dimension must be positive, got {self.dim}")
        if len(self.rhs) != self.dim:
            raise ValueError(f"{self.name}: {len(self.rhs)} rhs components for dimension {self.dim}")
        for i, e in enumerate(self.rhs, 1):
            if ex.max_variable(e) > self.dim:
                raise ValueError(f"{self.name}: f{i} references a variable beyond x{self.dim}")
        if self.expected_verdict not in VERDICTS:
            raise ValueError(f"unknown verdict {self.expected_verdict!r}")

    @classmethod
    def from_text(cls, name, rhs_sources, expected_verdict="unknown"):
        rhs_sources = tuple(rhs_sources)
        dim = len(rhs_sources)
        rhs = tuple(ex.parse(s, dim) for s in rhs_sources)
        return cls(name, dim, rhs, expected_verdict, rhs_sources)

    def evaluate(self, x, check=True):
        """f(x) for a single state ``(n,)`` or a batch ``(B, n)``."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise ValueError(f"{self.name}: state has length {x.shape[-1]}, expected {self.dim}")
        out = np.stack([np.asarray(ex.evaluate(e, x), dtype=float) for e in self.rhs], axis=-1)
        if check and not np.all(np.isfinite(out)):
            bad = np.argwhere(~np.all(np.isfinite(out), axis=-1))
            where = x if x.ndim == 1 else x[tuple(bad[0])]
            raise NonFiniteDynamics(f"{self.name}: non-finite f(x) at x={list(where)}", where)
        return out

    def rhs_text(self):
        if self.sources:
            return list(self.sources)
        return [ex.to_text(e) for e in self.rhs]


def check_equilibrium(sys: DynamicalSystem, tol: float = 1e-12):
    """Return ``(ok, residual)`` where residual is f(0)."""
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    residual = sys.evaluate(np.zeros(sys.dim), check=False)
    norm = float(np.max(np.abs(residual)))
    return bool(norm <= tol), residual


def jacobian_fd(sys: DynamicalSystem, x, h: float = 1e-6):
    """Central finite-difference Jacobian, J[i, j] = d f_i / d x_j."""
    if h <= 0:
        raise ValueError("h must be positive")
    x = np.asarray(x, dtype=float)
    n = sys.dim
    jac = np.empty((n, n))
    for j in range(n):
        step = np.zeros(n)
        step[j] = h
        jac[:, j] = (sys.evaluate(x + step, check=False) - sys.evaluate(x - step, check=False)) / (2 * h)
    return jac


def char_poly(a) -> list[float]:
    """Monic characteristic polynomial coefficients ``[1, c1, ..., cn]`` for n <= 3."""
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    tr = float(np.trace(a))
    if n == 1:
        return [1.0, -tr]
    if n == 2:
        det = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
        return [1.0, -tr, float(det)]
    if n == 3:
        minors = (
            a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
            + a[0, 0] * a[2, 2] - a[0, 2] * a[2, 0]
            + a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1]
        )
        det = (
            a[0, 0] * (a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1])
            - a[0, 1] * (a[1, 0] * a[2, 2] - a[1, 2] * a[2, 0])
            + a[0, 2] * (a[1, 0] * a[2, 1] - a[1, 1] * a[2, 0])
        )
        return [1.0, -tr, float(minors), -float(det)]
    raise ValueError(f"closed-form eigenvalues only for n <= 3, got n={n}")


def _cubic_roots(b, c, d):
    # t^3 + b t^2 + c t + d, Cardano with complex arithmetic
    p = c - b * b / 3
    q = 2 * b ** 3 / 27 - b * c / 3 + d
    disc = (q / 2) ** 2 + (p / 3) ** 3
    s = cmath.sqrt(disc)
    u3 = -q / 2 + s
    if abs(u3) < abs(-q / 2 - s):
        u3 = -q / 2 - s
    if u3 == 0:
        ys = [0j, 0j, 0j]
    else:
        u = u3 ** (1 / 3)
        omega = complex(-0.5, 3 ** 0.5 / 2)
        ys = []
        for k in range(3):
            uk = u * omega ** k
            ys.append(uk - p / (3 * uk))
    roots = [y - b / 3 for y in ys]
    return [_polish(r, b, c, d) for r in roots]


def _polish(r, b, c, d):
    for _ in range(3):
        f = ((r + b) * r + c) * r + d
        df = (3 * r + 2 * b) * r + c
        if df == 0:
            break
        r = r - f / df
    return r


def eigenvalues(a) -> list[complex]:
    """Eigenvalues of a 1x1, 2x2 or 3x3 matrix via its characteristic polynomial."""
    coeffs = char_poly(a)
    n = len(coeffs) - 1
    if n == 1:
        return [complex(-coeffs[1])]
    if n == 2:
        _, b, c = coeffs
        s = cmath.sqrt(b * b - 4 * c)
        return [(-b + s) / 2, (-b - s) / 2]
    _, b, c, d = coeffs
    return _cubic_roots(b, c, d)


def max_real_eigenvalue_at_origin(sys: DynamicalSystem, h: float = 1e-6) -> float:
    return max(ev.real for ev in eigenvalues(jacobian_fd(sys, np.zeros(sys.dim), h)))


# --------------------------------------------------------------------------
# builtin registry

_BUILTIN_DEFS = {
    "s2_cubic": (["x1 - x1^3 + x2", "3*x1 - x2"], "stable"),
    "s2_pendulum": (["x2", "-sin(x1) - x2"], "stable"),
    "s2_linear": (["x2", "-x1 - x2"], "stable"),
    "s3_cubic": (["-2*x1 + x1^3", "-x2 + x1^2", "-x3"], "stable"),
    "s3_rotational": (["-x1", "-x1 - x2 - x3 - x1*x3", "(x1 + 1)*x2"], "stable"),
    "s3_shifted": (["-x2*x3 + 1", "x1*x3 - x2", "x3^2*(1 - x3)"], "stable"),
    "u2_saddle": (["-x1 + x2^2", "2*x2 - x1^3"], "unstable"),
    "u2_quad": (["x1 - x2", "-x1^2 + x2"], "unstable"),
    "u3_mixed": (["3*x1 - x2", "-x1^3 + 4*x2", "x3"], "unstable"),
}

BUILTINS = {
    name: DynamicalSystem.from_text(name, rhs, verdict)
    for name, (rhs, verdict) in _BUILTIN_DEFS.items()
}

# systems whose origin is an equilibrium; the benchmark runs exactly these
BENCH_SYSTEMS = tuple(n for n in BUILTINS if check_equilibrium(BUILTINS[n])[0])


def get_builtin(name: str) -> DynamicalSystem:
    try:
        return BUILTINS[name]
    except KeyError:
        raise KeyError(f"unknown builtin system {name!r}; choose from {', '.join(BUILTINS)}") from None
