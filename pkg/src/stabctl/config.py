"""Run configuration: ``key = value`` text files.

Recognised keys::

    model = bvp                # bvp, circle, double-well-1d, triple-well-1d, polynomial-1d
    rho = 2.5
    mode = one-sided-x         # one-sided-x, two-sided, one-sided-y
    output_dir = out
    a = 0.7                    # model parameters (bvp: a, b, c, r)
    coeffs = -1, 0, 1, 0       # polynomial-1d, highest degree first
    integration.dt = 0.001     # any IntegrationSpec field
    thresholds.eps_fp = 0.001  # any classifier Thresholds field

``#`` starts a comment. Unset keys keep the defaults above.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field as dc_field

from .augmented import ControlMode
from .classifier import Thresholds
from .integrator import IntegrationSpec
from .oned import ONED_MODELS, PolynomialField
from .vector_field import PLANAR_MODELS, BvpParams

MODEL_PARAMS = {
    "bvp": tuple(f.name for f in dataclasses.fields(BvpParams)),
    "circle": (),
    "double-well-1d": (),
    "triple-well-1d": (),
    "polynomial-1d": ("coeffs",),
}
ONED_NAMES = ("double-well-1d", "triple-well-1d", "polynomial-1d")

_SPEC_FIELDS = {f.name: f.type for f in dataclasses.fields(IntegrationSpec)}
_THR_FIELDS = tuple(f.name for f in dataclasses.fields(Thresholds))
_STR_SPEC = ("direction", "method")
_INT_SPEC = ("max_steps",)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    model: str = "bvp"
    params: dict = dc_field(default_factory=dict)
    rho: float = 2.5
    mode: ControlMode = ControlMode.ONE_SIDED_X
    integration: IntegrationSpec = IntegrationSpec()
    thresholds: Thresholds = Thresholds()
    output_dir: str = "."

    def __post_init__(self):
        if self.model not in MODEL_PARAMS:
            raise ConfigError(f"unknown model '{self.model}'")
        if not self.rho > 0:
            raise ConfigError("rho must be positive")
        for k in self.params:
            if k not in MODEL_PARAMS[self.model]:
                raise ConfigError(f"unknown key '{k}' for model '{self.model}'")

    @property
    def is_1d(self) -> bool:
        return self.model in ONED_NAMES

    def build_field(self):
        if self.model == "polynomial-1d":
            if "coeffs" not in self.params:
                raise ConfigError("polynomial-1d needs 'coeffs'")
            return PolynomialField(tuple(self.params["coeffs"]), name="polynomial-1d")
        if self.is_1d:
            return ONED_MODELS[self.model]()
        return PLANAR_MODELS[self.model](**self.params)


def _number(text: str, lineno: int, key: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"line {lineno}: '{key}' expects a number, got '{text}'") from None


def parse_config(text: str) -> RunConfig:
    """Parse ``key = value`` lines into a :class:`RunConfig`."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        key, sep, value = body.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key or not value:
            raise ConfigError(f"line {lineno}: expected 'key = value', got '{line.strip()}'")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key '{key}'")
        raw[key] = (lineno, value)

    model = raw.pop("model", (0, "bvp"))[1]
    if model not in MODEL_PARAMS:
        raise ConfigError(f"unknown model '{model}'")
    kw = {"model": model}
    params, spec, thr = {}, {}, {}
    for key, (lineno, value) in raw.items():
        if key == "rho":
            kw["rho"] = _number(value, lineno, key)
            if not kw["rho"] > 0:
                raise ConfigError(f"line {lineno}: rho must be positive")
        elif key == "mode":
            try:
                kw["mode"] = ControlMode(value)
            except ValueError:
                raise ConfigError(f"line {lineno}: unknown mode '{value}'") from None
        elif key == "output_dir":
            kw["output_dir"] = value
        elif key == "coeffs" and "coeffs" in MODEL_PARAMS[model]:
            params["coeffs"] = tuple(_number(v.strip(), lineno, key) for v in value.split(","))
        elif key in MODEL_PARAMS[model]:
            params[key] = _number(value, lineno, key)
        elif key.startswith("integration.") and key[12:] in _SPEC_FIELDS:
            name = key[12:]
            if name in _STR_SPEC:
                spec[name] = value
            elif name in _INT_SPEC:
                try:
                    spec[name] = int(value)
                except ValueError:
                    raise ConfigError(f"line {lineno}: '{key}' expects an integer") from None
            else:
                spec[name] = _number(value, lineno, key)
        elif key.startswith("thresholds.") and key[11:] in _THR_FIELDS:
            thr[key[11:]] = _number(value, lineno, key)
        else:
            raise ConfigError(f"line {lineno}: unknown key '{key}'")
    try:
        kw["integration"] = IntegrationSpec(**spec)
        kw["thresholds"] = Thresholds(**thr)
        cfg = RunConfig(params=params, **kw)
        cfg.build_field()
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def render_config(cfg: RunConfig) -> str:
    """Inverse of :func:`parse_config`; floats are written exactly."""
    lines = [f"model = {cfg.model}", f"rho = {cfg.rho!r}", f"mode = {cfg.mode.value}",
             f"output_dir = {cfg.output_dir}"]
    for k, v in cfg.params.items():
        if isinstance(v, tuple):
            lines.append(f"{k} = " + ", ".join(repr(float(c)) for c in v))
        else:
            lines.append(f"{k} = {float(v)!r}")
    for name in _SPEC_FIELDS:
        v = getattr(cfg.integration, name)
        if name not in _STR_SPEC:
            v = int(v) if name in _INT_SPEC else repr(float(v))
        lines.append(f"integration.{name} = {v}")
    for name in _THR_FIELDS:
        lines.append(f"thresholds.{name} = {float(getattr(cfg.thresholds, name))!r}")
    return "\n".join(lines) + "\n"
