"""Experiment configuration files (YAML; JSON is accepted as the same schema).

Example::

    model:
      gross_neveu: {L: 2, N: 2, m: 0.0, G2: 1.0}
    trotter: {dt: 0.2, n_steps: 5}
    initial_state: "0010"
    observable:
      return_probability: {}
    backend:
      noiseless: {}
    execution: {mode: shots, shots: 4000, seed: 11}
    output: {prefix: results/gn_return}
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .compiler import BASES
from .mitigation import MitigationConfig, ZneConfig
from .models import GrossNeveuParams, HyperbolicIsingParams
from .noise import NoiseModel
from .pauli import PauliTerm

_REQUIRED = object()


class ConfigError(ValueError):
    pass


@dataclass
class TrotterConfig:
    dt: float
    n_steps: int
    term_order: list[int] | None = None


@dataclass
class ObservableConfig:
    kind: str  # return_probability | magnetization | otoc
    sites: list[int] | None = None
    convention: str = "half"
    otoc: dict = field(default_factory=dict)


@dataclass
class TranspileConfig:
    basis: str = "native_pauli"
    topology: str | None = None
    initial_layout: str = "trivial"


@dataclass
class ExecutionConfig:
    seed: int
    mode: str = "exact"
    shots: int = 1000


@dataclass
class OutputConfig:
    prefix: str = "results/run"
    figure: bool = True


@dataclass
class ExperimentConfig:
    model: GrossNeveuParams | HyperbolicIsingParams
    trotter: TrotterConfig
    initial_state: str
    observable: ObservableConfig
    noise: NoiseModel | None
    mitigation: MitigationConfig
    transpile: TranspileConfig
    execution: ExecutionConfig
    output: OutputConfig
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def model_kind(self) -> str:
        return "gross_neveu" if isinstance(self.model, GrossNeveuParams) else "hyperbolic_ising"

    def config_hash(self) -> str:
        blob = json.dumps(self.raw, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()


# -- line tracking -----------------------------------------------------------


def _line_index(node, prefix: tuple = (), out: dict | None = None) -> dict:
    out = {} if out is None else out
    out.setdefault(prefix, node.start_mark.line + 1)
    if isinstance(node, yaml.MappingNode):
        for key_node, value_node in node.value:
            key = prefix + (key_node.value,)
            out[key] = key_node.start_mark.line + 1
            _line_index(value_node, key, out)
    elif isinstance(node, yaml.SequenceNode):
        for i, item in enumerate(node.value):
            _line_index(item, prefix + (i,), out)
    return out


class _Reader:
    def __init__(self, data: Any, path: tuple, ctx: _Context):
        self.ctx = ctx
        self.path = path
        if data is None:
            data = {}
        if not isinstance(data, dict):
            ctx.fail(path, "expected a mapping")
        self.data = data
        self.used: set[str] = set()

    def has(self, key: str) -> bool:
        return key in self.data

    def get(self, key: str, kind=None, default=_REQUIRED, check=None, message=""):
        path = self.path + (key,)
        if key not in self.data:
            if default is _REQUIRED:
                self.ctx.fail(self.path, f"missing required key '{key}'")
            return default
        self.used.add(key)
        value = self.data[key]
        if kind is not None:
            value = self.ctx.coerce(path, value, kind)
        if check is not None and not check(value):
            self.ctx.fail(path, message or f"invalid value {value!r}")
        return value

    def section(self, key: str, required: bool = True) -> _Reader | None:
        if key not in self.data:
            if required:
                self.ctx.fail(self.path, f"missing required section '{key}'")
            return None
        self.used.add(key)
        return _Reader(self.data[key], self.path + (key,), self.ctx)

    def one_of(self, choices: tuple[str, ...]) -> tuple[str, _Reader]:
        keys = list(self.data)
        if len(keys) != 1 or keys[0] not in choices:
            self.ctx.fail(self.path, f"expected exactly one of {', '.join(choices)}; got {', '.join(map(str, keys)) or 'nothing'}")
        return keys[0], self.section(keys[0])

    def finish(self):
        for key in self.data:
            if key not in self.used:
                self.ctx.fail(self.path + (key,), f"unknown key '{key}'")


class _Context:
    def __init__(self, name: str, lines: dict):
        self.name = name
        self.lines = lines

    def fail(self, path: tuple, message: str):
        line = None
        probe = path
        while line is None and probe is not None:
            line = self.lines.get(probe)
            probe = probe[:-1] if probe else None
        where = ".".join(str(p) for p in path) or "<root>"
        raise ConfigError(f"{self.name}:{line or '?'}: {where}: {message}")

    def coerce(self, path: tuple, value, kind):
        try:
            if kind is float:
                if isinstance(value, str) and value.strip().lower() in ("inf", "infinity", ".inf"):
                    return math.inf
                if isinstance(value, bool):
                    raise TypeError
                return float(value)
            if kind is int:
                if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                    raise TypeError
                return int(value)
            if kind is str:
                if not isinstance(value, (str, int)):
                    raise TypeError
                return str(value)
            if kind is bool:
                if not isinstance(value, bool):
                    raise TypeError
                return value
            if kind is list:
                if not isinstance(value, list):
                    raise TypeError
                return value
        except (TypeError, ValueError):
            self.fail(path, f"expected {kind.__name__}, got {value!r}")
        return value


def _invariant(ctx: _Context, path: tuple, fn):
    try:
        return fn()
    except ValueError as exc:
        ctx.fail(path, str(exc))


def _parse_model(r: _Reader):
    kind, m = r.one_of(("gross_neveu", "hyperbolic_ising"))
    if kind == "gross_neveu":
        args = dict(
            L=m.get("L", int),
            N=m.get("N", int),
            m=m.get("m", float, 0.0),
            G2=m.get("G2", float, 0.0),
            stagger_origin=m.get("stagger_origin", str, "even"),
        )
        m.finish()
        return _invariant(r.ctx, m.path, lambda: GrossNeveuParams(**args))
    args = dict(
        L=m.get("L", int),
        J=m.get("J", float),
        h=m.get("h", float),
        m_z=m.get("m_z", float, 0.0),
        ell_c=m.get("ell_c", float, math.inf),
        spin_convention=m.get("spin_convention", str, "half"),
    )
    m.finish()
    return _invariant(r.ctx, m.path, lambda: HyperbolicIsingParams(**args))


def _pauli_spec(r: _Reader, n: int) -> PauliTerm:
    axis = r.get("axis", str, "Z").upper()
    site = r.get("site", int)
    r.finish()
    return _invariant(r.ctx, r.path, lambda: PauliTerm(1.0, {site: axis}, n))


def _parse_observable(r: _Reader, n: int, default_convention: str) -> ObservableConfig:
    kind, o = r.one_of(("return_probability", "magnetization", "otoc"))
    if kind == "return_probability":
        o.finish()
        return ObservableConfig(kind)
    if kind == "magnetization":
        sites = o.get("sites", None, "all")
        if sites == "all":
            sites = None
        elif not (isinstance(sites, list) and all(isinstance(s, int) and 0 <= s < n for s in sites)):
            r.ctx.fail(o.path + ("sites",), f"expected 'all' or a list of site indices below {n}")
        conv = o.get("convention", str, default_convention, lambda c: c in ("half", "pauli"), "convention must be 'half' or 'pauli'")
        o.finish()
        return ObservableConfig(kind, sites=sites, convention=conv)
    otoc = {
        "W": _pauli_spec(o.section("W"), n),
        "V": _pauli_spec(o.section("V"), n),
        "order": o.get("order", int, 0),
        "base_state": o.get("base_state", str),
        "excited_states": [tuple(x) for x in o.get("excited_states", list, [])],
        "n_unitaries": o.get("n_unitaries", int, 100),
        "denominator_floor": o.get("denominator_floor", float, 1e-6),
    }
    if o.has("shots"):
        otoc["shots"] = o.get("shots", int)
    o.finish()
    return ObservableConfig(kind, otoc=otoc)


def _parse_noise(r: _Reader) -> NoiseModel | None:
    kind, b = r.one_of(("noiseless", "noisy"))
    if kind == "noiseless":
        b.finish()
        return None
    args = {}
    for key in ("p1", "p2", "idle_dephase_rate", "coherent_zz_over_rotation"):
        if b.has(key):
            args[key] = b.get(key, float)
    for key in ("p_read_01", "p_read_10"):
        if b.has(key):
            v = b.get(key)
            args[key] = tuple(float(x) for x in v) if isinstance(v, list) else r.ctx.coerce(b.path + (key,), v, float)
    b.finish()
    return _invariant(r.ctx, b.path, lambda: NoiseModel(**args))


def _parse_mitigation(r: _Reader | None) -> MitigationConfig:
    if r is None:
        return MitigationConfig()
    readout = r.get("readout", str, "none")
    zne = None
    if r.has("zne"):
        raw = r.data["zne"]
        if raw in (None, "none"):
            r.used.add("zne")
        else:
            z = r.section("zne")
            factors = z.get("fold_factors", list, [1, 3, 5])
            fit = z.get("fit", str, "linear")
            z.finish()
            zne = _invariant(r.ctx, z.path, lambda: ZneConfig(tuple(factors), fit))
    n_twirls = 0
    if r.has("twirling"):
        raw = r.data["twirling"]
        if raw in (None, "off"):
            r.used.add("twirling")
        else:
            t = r.section("twirling")
            n_twirls = t.get("n_twirls", int, 1)
            t.finish()
    dd = r.get("dd", str, "off")
    r.finish()
    return _invariant(r.ctx, r.path, lambda: MitigationConfig(readout, zne, n_twirls, dd))


def parse_config_text(text: str, name: str = "<config>") -> ExperimentConfig:
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else "?"
        raise ConfigError(f"{name}:{line}: syntax error: {getattr(exc, 'problem', exc)}") from None
    ctx = _Context(name, _line_index(node) if node is not None else {})
    root = _Reader(data, (), ctx)

    model = _parse_model(root.section("model"))
    n = model.N * model.L if isinstance(model, GrossNeveuParams) else model.L

    t = root.section("trotter")
    trotter = TrotterConfig(
        dt=t.get("dt", float, check=lambda v: v > 0, message="dt must be positive"),
        n_steps=t.get("n_steps", int, check=lambda v: v >= 0, message="n_steps must be non-negative"),
        term_order=t.get("term_order", None, None),
    )
    t.finish()

    initial = root.get(
        "initial_state",
        str,
        check=lambda s: len(s) == n and not set(s) - {"0", "1"},
        message=f"initial_state must be a bitstring of length {n}",
    )
    default_conv = getattr(model, "spin_convention", "half")
    observable = _parse_observable(root.section("observable"), n, default_conv)
    if observable.kind == "magnetization" and not isinstance(model, HyperbolicIsingParams):
        ctx.fail(("observable", "magnetization"), "magnetization needs a hyperbolic_ising model")

    noise = _parse_noise(root.section("backend")) if root.has("backend") else None
    mitigation = _parse_mitigation(root.section("mitigation", required=False))

    tr = root.section("transpile", required=False)
    transpile = TranspileConfig()
    if tr is not None:
        transpile = TranspileConfig(
            basis=tr.get("basis", str, "native_pauli", lambda b: b in BASES, f"basis must be one of {BASES}"),
            topology=tr.get("topology", str, None),
            initial_layout=tr.get("initial_layout", str, "trivial", lambda v: v in ("trivial", "greedy"), "initial_layout must be 'trivial' or 'greedy'"),
        )
        tr.finish()

    ex = root.section("execution")
    execution = ExecutionConfig(
        seed=ex.get("seed", int),
        mode=ex.get("mode", str, "exact", lambda m: m in ("exact", "shots"), "mode must be 'exact' or 'shots'"),
        shots=ex.get("shots", int, 1000, lambda s: s >= 1, "shots must be positive"),
    )
    ex.finish()
    if noise is not None and execution.mode != "shots":
        ctx.fail(("execution", "mode"), "noisy backends need mode: shots")

    out = root.section("output", required=False)
    output = OutputConfig()
    if out is not None:
        output = OutputConfig(prefix=out.get("prefix", str, "results/run"), figure=out.get("figure", bool, True))
        out.finish()
    root.finish()

    if observable.kind == "otoc":
        _invariant(ctx, ("observable", "otoc"), lambda: _check_otoc(observable.otoc, execution))

    return ExperimentConfig(model, trotter, initial, observable, noise, mitigation, transpile, execution, output, raw=data)


def _check_otoc(otoc: dict, execution: ExecutionConfig):
    from .observables import OtocConfig

    OtocConfig(seed=execution.seed, shots=otoc.get("shots", execution.shots), **{k: v for k, v in otoc.items() if k != "shots"})


def parse_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"{path}: no such config file")
    return parse_config_text(path.read_text(), str(path))
