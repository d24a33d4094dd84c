"""Run configuration: flat ``section.key = value`` text with ``#`` comments.

Parsing resolves every value to its final type and checks what can be
checked statically; :func:`dump_config` writes the canonical form, so
``dump_config(parse_config(dump_config(c)))`` reproduces its input.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

from .errors import ConfigError, InvalidModelError, UnsupportedInitialStateError
from .evolution import OBSERVABLES, TimeGrid, closed_form_supported
from .models import TAGS, ModelSpec
from .operators import StateSpec

METHODS = ("eigenmode", "oracle", "closed-form", "all")
ORACLE_KINDS = ("auto", "exp", "stepper")

_MODEL_FLOATS = ("omega", "gamma", "nbar", "omega_a", "omega_b", "gamma_a", "gamma_b")
_MODEL_COMPLEX = ("g", "gamma_c")
_STATE_KEYS = ("kind", "n", "alpha", "nbar0", "path")

KNOWN_KEYS = (
    {"model.tag", "model.branch"}
    | {f"model.{k}" for k in _MODEL_FLOATS + _MODEL_COMPLEX}
    | {f"initial.{k}" for k in _STATE_KEYS}
    | {f"initial.{p}.{k}" for p in "ab" for k in _STATE_KEYS}
    | {"grid.t0", "grid.t1", "grid.steps"}
    | {"truncation.dim", "truncation.max_index", "truncation.strict"}
    | {"method", "seed"}
    | {"output.path", "output.observables", "output.dump_states", "output.figure",
       "output.reference"}
    | {"oracle.kind", "oracle.step", "oracle.pad"}
)


@dataclass
class RunConfig:
    model: ModelSpec
    initial: StateSpec
    grid: TimeGrid = field(default_factory=TimeGrid)
    max_index: int | None = None
    strict: bool = False
    method: str = "eigenmode"
    branch: int = 1
    output_path: str = ""
    observables: tuple = ("trace", "purity", "occupation")
    dump_states: bool = False
    figure: str = ""
    reference: str = ""
    oracle_kind: str = "auto"
    oracle_step: float | None = None
    oracle_pad: int = 0
    seed: int = 42


def read_pairs(text):
    """``key -> raw value`` from config text; later keys win, ``#`` starts a comment."""
    pairs = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        pairs[key] = value
    return pairs


def _convert(pairs, key, kind, default=None):
    if key not in pairs or pairs[key] == "":
        return default
    raw = pairs[key]
    try:
        if kind is bool:
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
        if kind is int:
            val = float(raw)
            if val != int(val):
                raise ValueError(raw)
            return int(val)
        if kind is complex:
            return complex(raw.replace(" ", ""))
        return kind(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot read {raw!r} as {kind.__name__}") from None


def _state(pairs, prefix, base_dir):
    kind = pairs.get(f"{prefix}.kind")
    if kind is None:
        raise ConfigError(f"missing {prefix}.kind")
    path = pairs.get(f"{prefix}.path", "")
    if path and not os.path.isabs(path):
        path = os.path.normpath(os.path.join(base_dir, path))
    if kind == "explicit" and not os.path.isfile(path):
        raise ConfigError(f"{prefix}.path: file {path!r} does not exist")
    return StateSpec(
        kind=kind,
        n=_convert(pairs, f"{prefix}.n", int, 0),
        alpha=_convert(pairs, f"{prefix}.alpha", complex, 0j),
        nbar0=_convert(pairs, f"{prefix}.nbar0", float, 0.0),
        path=path,
    )


def config_from_pairs(pairs, base_dir="."):
    tag = pairs.get("model.tag")
    if tag not in TAGS:
        raise ConfigError(f"model.tag must be one of {TAGS}, got {tag!r}")
    model_kw = {k: _convert(pairs, f"model.{k}", float) for k in _MODEL_FLOATS}
    model_kw.update({k: _convert(pairs, f"model.{k}", complex) for k in _MODEL_COMPLEX})
    model_kw = {k: v for k, v in model_kw.items() if v is not None}
    dim = _convert(pairs, "truncation.dim", int)
    try:
        model = ModelSpec(tag, dim=dim, **model_kw)
    except InvalidModelError as exc:
        raise ConfigError(str(exc)) from None

    try:
        if pairs.get("initial.kind") == "product":
            initial = StateSpec("product", parts=(_state(pairs, "initial.a", base_dir),
                                                  _state(pairs, "initial.b", base_dir)))
        else:
            initial = _state(pairs, "initial", base_dir)
    except UnsupportedInitialStateError as exc:
        raise ConfigError(str(exc)) from None

    try:
        grid = TimeGrid(_convert(pairs, "grid.t0", float, 0.0),
                        _convert(pairs, "grid.t1", float, 1.0),
                        _convert(pairs, "grid.steps", int, 10))
    except ValueError as exc:
        raise ConfigError(f"grid: {exc}") from None

    method = pairs.get("method", "eigenmode")
    if method not in METHODS:
        raise ConfigError(f"method must be one of {METHODS}, got {method!r}")
    if method == "closed-form" and not closed_form_supported(model, initial):
        raise ConfigError(f"method closed-form has no formula for {initial.kind!r} in {tag!r}")

    obs = tuple(o.strip() for o in pairs.get("output.observables", "trace,purity,occupation")
                .split(",") if o.strip())
    for name in obs:
        if name not in OBSERVABLES:
            raise ConfigError(f"output.observables: unknown observable {name!r}")

    oracle_kind = pairs.get("oracle.kind", "auto")
    if oracle_kind not in ORACLE_KINDS:
        raise ConfigError(f"oracle.kind must be one of {ORACLE_KINDS}, got {oracle_kind!r}")
    branch = _convert(pairs, "model.branch", int, 1)
    if branch not in (1, -1):
        raise ConfigError("model.branch must be 1 or -1")
    max_index = _convert(pairs, "truncation.max_index", int)
    if max_index is not None and max_index < 0:
        raise ConfigError("truncation.max_index must be non-negative")
    reference = pairs.get("output.reference", "")
    if reference and not os.path.isabs(reference):
        reference = os.path.normpath(os.path.join(base_dir, reference))
    if reference and not os.path.isfile(reference):
        raise ConfigError(f"output.reference: file {reference!r} does not exist")
    step = _convert(pairs, "oracle.step", float)
    if step is not None and step <= 0:
        raise ConfigError("oracle.step must be positive")

    return RunConfig(
        model=model, initial=initial, grid=grid, max_index=max_index,
        strict=_convert(pairs, "truncation.strict", bool, False), method=method,
        branch=branch, output_path=pairs.get("output.path", ""), observables=obs,
        dump_states=_convert(pairs, "output.dump_states", bool, False),
        figure=pairs.get("output.figure", ""), reference=reference,
        oracle_kind=oracle_kind, oracle_step=step,
        oracle_pad=_convert(pairs, "oracle.pad", int, 0),
        seed=_convert(pairs, "seed", int, 42),
    )


def parse_config(text, base_dir="."):
    return config_from_pairs(read_pairs(text), base_dir)


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_config(text, os.path.dirname(os.path.abspath(path)))


def _fmt(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, complex):
        return repr(value).strip("()") if value.imag else repr(value.real)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _state_lines(prefix, spec):
    lines = [f"{prefix}.kind = {spec.kind}"]
    if spec.kind == "fock":
        lines.append(f"{prefix}.n = {spec.n}")
    elif spec.kind == "coherent":
        lines.append(f"{prefix}.alpha = {_fmt(complex(spec.alpha))}")
    elif spec.kind in ("thermal", "two-level-thermal"):
        lines.append(f"{prefix}.nbar0 = {_fmt(float(spec.nbar0))}")
    elif spec.kind == "explicit":
        lines.append(f"{prefix}.path = {spec.path}")
    return lines


def dump_config(cfg):
    """Canonical text of a :class:`RunConfig` (fixed key order, repr floats)."""
    m = cfg.model
    lines = [f"model.tag = {m.tag}"]
    if m.is_two_mode:
        for k in ("omega_a", "omega_b", "gamma_a", "gamma_b"):
            lines.append(f"model.{k} = {_fmt(float(getattr(m, k)))}")
        lines.append(f"model.g = {_fmt(complex(m.g))}")
        lines.append(f"model.gamma_c = {_fmt(complex(m.gamma_c))}")
        lines.append(f"model.branch = {cfg.branch}")
    else:
        lines.append(f"model.omega = {_fmt(float(m.omega))}")
        lines.append(f"model.gamma = {_fmt(float(m.gamma))}")
    if m.is_thermal:
        lines.append(f"model.nbar = {_fmt(float(m.nbar))}")
    if cfg.initial.kind == "product":
        lines.append("initial.kind = product")
        lines += _state_lines("initial.a", cfg.initial.parts[0])
        lines += _state_lines("initial.b", cfg.initial.parts[1])
    else:
        lines += _state_lines("initial", cfg.initial)
    lines += [
        f"grid.t0 = {_fmt(float(cfg.grid.t0))}",
        f"grid.t1 = {_fmt(float(cfg.grid.t1))}",
        f"grid.steps = {cfg.grid.steps}",
        f"truncation.dim = {m.dim}",
    ]
    if cfg.max_index is not None:
        lines.append(f"truncation.max_index = {cfg.max_index}")
    lines += [
        f"truncation.strict = {_fmt(cfg.strict)}",
        f"method = {cfg.method}",
        f"output.observables = {','.join(cfg.observables)}",
        f"output.dump_states = {_fmt(cfg.dump_states)}",
    ]
    for key, val in (("output.path", cfg.output_path), ("output.figure", cfg.figure),
                     ("output.reference", cfg.reference)):
        if val:
            lines.append(f"{key} = {val}")
    lines.append(f"oracle.kind = {cfg.oracle_kind}")
    if cfg.oracle_step is not None:
        lines.append(f"oracle.step = {_fmt(float(cfg.oracle_step))}")
    lines += [f"oracle.pad = {cfg.oracle_pad}", f"seed = {cfg.seed}"]
    return "\n".join(lines) + "\n"
