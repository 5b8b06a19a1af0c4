"""Run configuration: a flat ``key = value`` text file plus command-line overrides.

Example::

    # damped pendulum, written out by hand
    system = my_pendulum
    rhs = x2 ; -sin(x1) - x2
    radius = 1.0
    margin_mode = state_scaled
    seed = 7

``rhs`` holds one expression per state component separated by ``;``; when it
is absent ``system`` must name a builtin. Unknown keys are errors.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields

from .loss import MARGIN_MODES
from .net import PRESETS, parse_layers
from .sampler import SCHEMES


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending key."""

    def __init__(self, message: str, field: str | None = None, source: str | None = None):
        self.field = field
        where = ""
        if source:
            where += f"{source}: "
        if field:
            where += f"{field}: "
        super().__init__(where + message)


@dataclass(frozen=True)
class RunConfig:
    system: str = "s2_pendulum"
    rhs: str = ""
    radius: float = 1.0
    delta: float = 0.02
    scheme: str = "uniform"
    inner_radius: float | None = None  # None -> 0.1 * radius
    preset: str = "tanh3"
    layers: str = ""  # explicit spec, overrides preset
    zero_anchor: bool = True
    m1: float = 0.02
    m2: float = 0.02
    margin_mode: str = "state_scaled"
    batch_size: int = 20
    learning_rate: float = 0.005
    max_steps: int = 20000
    eval_every: int = 100
    eval_sample_count: int = 2000
    loss_tol: float = 1e-6
    patience_windows: int = 5
    pass_threshold: float = 0.999
    grid_resolution: int = 51
    allow_nonequilibrium: bool = False
    seed: int = 0
    out: str = "runs"

    @property
    def effective_inner_radius(self) -> float:
        return 0.1 * self.radius if self.inner_radius is None else self.inner_radius

    @property
    def layer_spec(self):
        return parse_layers(self.layers) if self.layers else PRESETS[self.preset]

    @property
    def rhs_list(self) -> list[str]:
        return [s.strip() for s in self.rhs.split(";")] if self.rhs.strip() else []

    def validate(self) -> "RunConfig":
        checks = [
            ("radius", self.radius > 0, "must be positive"),
            ("delta", self.delta > 0, "must be positive"),
            ("scheme", self.scheme in SCHEMES, f"must be one of {', '.join(SCHEMES)}"),
            ("inner_radius", 0 <= self.effective_inner_radius < self.radius, "must lie in [0, radius)"),
            ("preset", self.preset in PRESETS, f"must be one of {', '.join(PRESETS)}"),
            ("m1", self.m1 >= 0, "must be nonnegative"),
            ("m2", self.m2 >= 0, "must be nonnegative"),
            ("margin_mode", self.margin_mode in MARGIN_MODES, f"must be one of {', '.join(MARGIN_MODES)}"),
            ("batch_size", self.batch_size >= 1, "must be positive"),
            ("learning_rate", self.learning_rate >= 0, "must be nonnegative"),
            ("max_steps", self.max_steps >= 1, "must be positive"),
            ("eval_every", self.eval_every >= 1, "must be positive"),
            ("eval_sample_count", self.eval_sample_count >= 1, "must be positive"),
            ("patience_windows", self.patience_windows >= 1, "must be positive"),
            ("pass_threshold", 0 < self.pass_threshold <= 1, "must be in (0, 1]"),
            ("grid_resolution", self.grid_resolution >= 2, "must be at least 2"),
            ("seed", 0 <= self.seed < 2 ** 64, "must be an unsigned 64-bit integer"),
        ]
        for name, ok, msg in checks:
            if not ok:
                raise ConfigError(f"{msg}, got {getattr(self, name)!r}", name)
        if self.layers:
            try:
                spec = parse_layers(self.layers)
            except ValueError as e:
                raise ConfigError(str(e), "layers") from None
            if spec[-1][0] != 1:
                raise ConfigError("final layer must have width 1", "layers")
        return self

    def to_text(self) -> str:
        """Echo every key, fully resolved, in file syntax."""
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "inner_radius":
                value = self.effective_inner_radius
            lines.append(f"{f.name} = {_format(value)}")
        return "\n".join(lines) + "\n"


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _convert(key: str, raw: str, source=None):
    kind = _FIELD_TYPES[key]
    try:
        if kind == "bool":
            low = raw.lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(f"expected a boolean, got {raw!r}")
        if kind == "int":
            return int(raw)
        if kind in ("float", "float | None"):
            return float(raw)
        return raw
    except ValueError as e:
        raise ConfigError(str(e), key, source) from None


def parse_config_text(text: str, source: str | None = None) -> dict:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        key = key.strip()
        where = f"{source or '<config>'}:{lineno}"
        if not sep:
            raise ConfigError(f"expected 'key = value', got {line!r}", None, where)
        if key not in _FIELD_TYPES:
            raise ConfigError("unknown config key", key, where)
        values[key] = _convert(key, raw.strip(), where)
    return values


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}", None, str(path)) from None
    return parse_config_text(text, str(path))


def build_config(file_values: dict | None = None, overrides: dict | None = None) -> RunConfig:
    """Defaults, then file values, then overrides (flags beat file)."""
    merged = dict(file_values or {})
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    unknown = set(merged) - set(_FIELD_TYPES)
    if unknown:
        raise ConfigError("unknown config key", sorted(unknown)[0])
    return dataclasses.replace(RunConfig(), **merged).validate()
