"""Candidate Lyapunov function: a small dense network with smooth activations.

Every quantity the trainer needs is computed in closed form per layer:

* ``V(x)`` by the usual forward pass,
* ``grad_x V`` by a reverse pass,
* ``Vdot = grad_x V . f(x)`` as a forward-mode tangent pushed along ``f(x)``,
* gradients of any ``sum_i a_i V(x_i) + c_i Vdot(x_i)`` with respect to the
  parameters by a reverse pass over the primal *and* tangent computations
  (which needs the activations' second derivatives).

Parameters flatten layer by layer: weights row-major (out x in), then bias.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import loss as loss_mod


def _poly2(t):
    return t * t, 2.0 * t, np.full_like(t, 2.0)


def _poly3(t):
    t2 = t * t
    return t2 * t, 3.0 * t2, 6.0 * t


def _tanh(t):
    y = np.tanh(t)
    d1 = 1.0 - y * y
    return y, d1, -2.0 * y * d1


def _linear(t):
    return t, np.ones_like(t), np.zeros_like(t)


# value, first and second derivative
ACTIVATIONS = {"poly2": _poly2, "poly3": _poly3, "tanh": _tanh, "linear": _linear}

PRESETS = {
    "poly": [(5, "poly3"), (5, "poly2"), (1, "linear")],
    "tanh3": [(5, "tanh"), (5, "tanh"), (1, "linear")],
}


def parse_layers(text: str) -> list[tuple[int, str]]:
    """``"5:tanh,5:tanh,1:linear"`` -> ``[(5, "tanh"), (5, "tanh"), (1, "linear")]``."""
    spec = []
    for item in text.split(","):
        width, _, act = item.strip().partition(":")
        if not act:
            raise ValueError(f"layer {item!r} must look like WIDTH:ACTIVATION")
        if act not in ACTIVATIONS:
            raise ValueError(f"unknown activation {act!r}; choose from {', '.join(ACTIVATIONS)}")
        spec.append((int(width), act))
    return spec


def format_layers(spec) -> str:
    return ",".join(f"{w}:{a}" for w, a in spec)


@dataclass
class Layer:
    weight: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)
    activation: str


class LyapunovNetwork:
    def __init__(self, layers: list[Layer], zero_anchor: bool = True, seed: int | None = None):
        if not layers:
            raise ValueError("network needs at least one layer")
        prev = layers[0].weight.shape[1]
        for i, layer in enumerate(layers):
            out, inp = layer.weight.shape
            if inp != prev:
                raise ValueError(f"layer {i} expects input {inp}, previous layer gives {prev}")
            if layer.bias.shape != (out,):
                raise ValueError(f"layer {i} bias shape {layer.bias.shape} != ({out},)")
            if layer.activation not in ACTIVATIONS:
                raise ValueError(f"layer {i}: unknown activation {layer.activation!r}")
            prev = out
        if prev != 1:
            raise ValueError(f"final layer must have 1 output, got {prev}")
        self.layers = layers
        self.zero_anchor = zero_anchor
        self.seed = seed

    @property
    def input_dim(self) -> int:
        return self.layers[0].weight.shape[1]

    @property
    def spec(self) -> list[tuple[int, str]]:
        return [(l.weight.shape[0], l.activation) for l in self.layers]

    @property
    def num_params(self) -> int:
        return sum(l.weight.size + l.bias.size for l in self.layers)

    # -- parameter vector -------------------------------------------------

    def get_params(self) -> np.ndarray:
        parts = []
        for l in self.layers:
            parts.append(l.weight.ravel())
            parts.append(l.bias)
        return np.concatenate(parts)

    def set_params(self, theta) -> None:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.num_params,):
            raise ValueError(f"expected {self.num_params} parameters, got {theta.shape}")
        i = 0
        for l in self.layers:
            n = l.weight.size
            l.weight = theta[i : i + n].reshape(l.weight.shape).copy()
            i += n
            l.bias = theta[i : i + l.bias.size].copy()
            i += l.bias.size

    def copy(self) -> "LyapunovNetwork":
        layers = [Layer(l.weight.copy(), l.bias.copy(), l.activation) for l in self.layers]
        return LyapunovNetwork(layers, self.zero_anchor, self.seed)

    # -- evaluation -------------------------------------------------------

    def _forward(self, x, tangent=None):
        """Forward pass over a batch, optionally with a tangent direction.

        Returns the cache ``[(a_prev, t_prev, z, tz, d0, d1, d2), ...]`` and
        the output value and tangent, each of shape ``(B,)``.
        """
        a, t = x, tangent
        cache = []
        for l in self.layers:
            z = a @ l.weight.T + l.bias
            d0, d1, d2 = ACTIVATIONS[l.activation](z)
            tz = None if t is None else t @ l.weight.T
            cache.append((a, t, z, tz, d0, d1, d2))
            a = d0
            t = None if t is None else d1 * tz
        return cache, a[:, 0], (None if t is None else t[:, 0])

    def _raw_value(self, x):
        return self._forward(x)[1]

    def value(self, x):
        """V(x) for a state ``(n,)`` (returns float) or a batch ``(B, n)``."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        xb = np.atleast_2d(x)
        v = self._raw_value(xb)
        if self.zero_anchor:
            v = v - self._raw_value(np.zeros((1, self.input_dim)))[0]
        return float(v[0]) if single else v

    def input_gradient(self, x):
        """Exact grad_x V by a reverse pass; shape follows ``x``."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        cache, _, _ = self._forward(np.atleast_2d(x))
        g = np.ones((cache[0][0].shape[0], 1))
        for (a_prev, _, z, _, _, d1, _), l in zip(reversed(cache), reversed(self.layers)):
            g = (g * d1) @ l.weight
        return g[0] if single else g

    def value_and_vdot(self, x, fx):
        """V(x) and Vdot(x) = grad_x V . f(x) for a batch, via one tangent pass."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        fx = np.atleast_2d(np.asarray(fx, dtype=float))
        _, v, vd = self._forward(x, fx)
        if self.zero_anchor:
            v = v - self._raw_value(np.zeros((1, self.input_dim)))[0]
        return v, vd

    def vdot(self, sys, x):
        """Vdot at a state or batch for dynamical system ``sys``."""
        x = np.asarray(x, dtype=float)
        fx = sys.evaluate(x)
        g = self.input_gradient(x)
        if x.ndim == 1:
            return float(np.dot(g, fx))
        return np.einsum("ij,ij->i", g, fx)

    # -- parameter gradients ----------------------------------------------

    def weighted_param_gradient(self, x, fx, coef_v, coef_vdot) -> np.ndarray:
        """Gradient w.r.t. theta of ``sum_i coef_v[i] V(x_i) + coef_vdot[i] Vdot(x_i)``."""
        cache, _, _ = self._forward(x, fx)
        grads = self._reverse(cache, np.asarray(coef_v, float)[:, None], np.asarray(coef_vdot, float)[:, None])
        if self.zero_anchor:
            total = float(np.sum(coef_v))
            if total != 0.0:
                origin = np.zeros((1, self.input_dim))
                c0, _, _ = self._forward(origin, np.zeros_like(origin))
                anchor = self._reverse(c0, np.array([[-total]]), np.zeros((1, 1)))
                grads = [ga + gb for ga, gb in zip(grads, anchor)]
        return np.concatenate([g.ravel() for g in grads])

    def _reverse(self, cache, bar_a, bar_t):
        """Adjoint pass; ``bar_a``/``bar_t`` are adjoints of the layer output and its tangent."""
        grads = []
        for (a_prev, t_prev, z, tz, _, d1, d2), l in zip(reversed(cache), reversed(self.layers)):
            bar_tz = bar_t * d1
            bar_z = bar_a * d1 + bar_t * d2 * tz
            gw = bar_z.T @ a_prev + bar_tz.T @ t_prev
            gb = bar_z.sum(axis=0)
            grads.append((gb, gw))
            bar_a = bar_z @ l.weight
            bar_t = bar_tz @ l.weight
        flat = []
        for gb, gw in reversed(grads):
            flat.append(gw)
            flat.append(gb)
        return flat


def init_network(input_dim: int, spec, seed: int | None = None, zero_anchor: bool = True,
                 rng: np.random.Generator | None = None) -> LyapunovNetwork:
    """Glorot-uniform weights, zero biases.

    ``rng`` takes precedence over ``seed``; with neither, the draw is
    nondeterministic.
    """
    if isinstance(spec, str):
        spec = PRESETS[spec] if spec in PRESETS else parse_layers(spec)
    if rng is None:
        rng = np.random.Generator(np.random.PCG64(seed))
    layers = []
    fan_in = input_dim
    for width, act in spec:
        a = np.sqrt(6.0 / (fan_in + width))
        layers.append(Layer(rng.uniform(-a, a, (width, fan_in)), np.zeros(width), act))
        fan_in = width
    return LyapunovNetwork(layers, zero_anchor, seed)


def loss_param_gradient(net: LyapunovNetwork, sys, batch, cfg) -> np.ndarray:
    """Exact gradient of the mean batch loss with respect to the flat parameters."""
    batch = np.atleast_2d(np.asarray(batch, dtype=float))
    if batch.shape[0] == 0:
        raise ValueError("empty batch")
    fx = sys.evaluate(batch)
    v, vd = net.value_and_vdot(batch, fx)
    m1, m2 = loss_mod.margins(batch, cfg)
    n = batch.shape[0]
    coef_v = -loss_mod.h1_active(v, m1).astype(float) / n
    coef_vdot = loss_mod.h2_active(vd, m2).astype(float) / n
    return net.weighted_param_gradient(batch, fx, coef_v, coef_vdot)


# -- checkpoint I/O -------------------------------------------------------

CHECKPOINT_MAGIC = "lyapnet-checkpoint"
CHECKPOINT_VERSION = 1


def save_checkpoint(net: LyapunovNetwork, path) -> None:
    """Plain-text checkpoint: header lines, then one parameter per line (repr)."""
    theta = net.get_params()
    lines = [
        f"{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}",
        f"input_dim {net.input_dim}",
        f"layers {format_layers(net.spec)}",
        f"zero_anchor {int(net.zero_anchor)}",
        f"seed {'none' if net.seed is None else net.seed}",
        f"params {theta.size}",
    ]
    lines += [repr(float(t)) for t in theta]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_checkpoint(path) -> LyapunovNetwork:
    with open(path) as fh:
        lines = fh.read().splitlines()
    magic, _, version = lines[0].partition(" ")
    if magic != CHECKPOINT_MAGIC or int(version) != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: not a version-{CHECKPOINT_VERSION} checkpoint")
    header = dict(line.split(" ", 1) for line in lines[1:6])
    seed = None if header["seed"] == "none" else int(header["seed"])
    net = init_network(int(header["input_dim"]), parse_layers(header["layers"]), seed=0,
                       zero_anchor=header["zero_anchor"] == "1")
    net.seed = seed
    count = int(header["params"])
    values = [float(s) for s in lines[6 : 6 + count]]
    if len(values) != count:
        raise ValueError(f"{path}: expected {count} parameters, found {len(values)}")
    net.set_params(values)
    return net
