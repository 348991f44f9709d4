"""End-to-end experiment execution: config in, CSV files and a run manifest out."""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from ._rng import derived_seed
from .backend import Backend
from .compiler import TrotterPlan, cnot_cost, decompose_to_basis, trotterize
from .config import ExperimentConfig
from .mitigation import MitigationConfig
from .models import build_model, params_dict
from .noise import NoiseModel
from .observables import OtocConfig, TimeSeries, magnetization_series, modified_otoc, return_probability
from .statevector import Circuit

STAGES = ("model", "trotterize", "compile", "observable", "output")


class RunError(RuntimeError):
    """A failure inside one pipeline stage; ``stage`` names it."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage


@dataclass
class RunResult:
    series: list[TimeSeries]
    files: list[Path]
    manifest: dict = field(default_factory=dict)


class _Stage:
    def __init__(self, name: str):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, kind, exc, tb):
        if exc is not None and isinstance(exc, (ValueError, ArithmeticError, RuntimeError, OSError)) and not isinstance(exc, RunError):
            raise RunError(self.name, str(exc)) from exc
        return False


def make_backend(config: ExperimentConfig) -> Backend | None:
    """A device emulation when the config asks for noise, mitigation or a target; else ``None``."""
    tr = config.transpile
    wants_target = tr.topology is not None or tr.basis != "native_pauli"
    wants_mitigation = config.mitigation != MitigationConfig()
    if config.noise is None and not wants_target and not wants_mitigation:
        return None
    return Backend(
        noise=config.noise or NoiseModel(),
        mitigation=config.mitigation,
        basis=tr.basis,
        topology=tr.topology,
        initial_layout=tr.initial_layout,
    )


def gate_counts(circuit: Circuit) -> dict:
    return {
        "n_qubits": circuit.n_qubits,
        "total": len(circuit.gates),
        "two_qubit": circuit.two_qubit_count(),
        "entangling": sum(cnot_cost(g) for g in circuit.gates),
        "depth": circuit.depth(),
        "ops": dict(sorted(circuit.count_ops().items())),
    }


def _derived_seeds(config: ExperimentConfig) -> dict:
    seed = config.execution.seed
    steps = range(config.trotter.n_steps + 1)
    kind = config.observable.kind
    if config.execution.mode == "exact" and kind != "otoc":
        return {}
    if kind == "return_probability":
        return {"per_step": [derived_seed(seed, "R", k) for k in steps]}
    if kind == "magnetization":
        return {"per_step": [derived_seed(seed, "mag", k) for k in steps]}
    n_u = config.observable.otoc.get("n_unitaries", 100)
    return {"unitaries": [derived_seed(seed, "u", j) for j in range(n_u)]}


def _csv_header(config: ExperimentConfig, series: TimeSeries) -> dict:
    header = {"latqsim_version": __version__, "config_hash": config.config_hash(), "model": config.model_kind}
    header.update({f"model.{k}": v for k, v in params_dict(config.model).items() if k != "model"})
    header.update({"dt": config.trotter.dt, "n_steps": config.trotter.n_steps})
    header.update({k: v for k, v in series.metadata.items() if k != "backend"})
    return header


def run(config: ExperimentConfig, write_figure: bool | None = None) -> RunResult:
    """Build, evolve, measure and write; identical config and seed give identical CSV bytes."""
    started = time.perf_counter()
    manifest: dict = {
        "latqsim_version": __version__,
        "config_hash": config.config_hash(),
        "seed": config.execution.seed,
        "mode": config.execution.mode,
    }

    with _Stage("model"):
        hamiltonian, layout = build_model(config.model)
        manifest["model"] = {"kind": config.model_kind, "params": params_dict(config.model), "n_terms": len(hamiltonian.terms)}

    with _Stage("trotterize"):
        plan = TrotterPlan(hamiltonian, config.trotter.dt, config.trotter.n_steps, config.trotter.term_order)
        logical = trotterize(plan)
        counts = {"trotterize": gate_counts(logical)}

    backend = make_backend(config)
    with _Stage("compile"):
        if backend is not None:
            routed = backend.compile(logical)
            counts["compile"] = gate_counts(routed.circuit)
            counts["compile"].update(swap_count=routed.swap_count, layout_final=routed.layout_final)
            # the router's own tally must agree with a recount of the emitted circuit
            recount = sum(cnot_cost(g) for g in decompose_to_basis(routed.circuit, "cnot_rz").gates)
            if recount != routed.entangling_count or counts["compile"]["entangling"] != routed.entangling_count:
                raise RunError("compile", f"entangling count mismatch: router {routed.entangling_count}, recount {recount}")
            manifest["backend"] = backend.describe()
    manifest["gate_counts"] = counts

    ex = config.execution
    shots = ex.shots if ex.mode == "shots" else None
    # exact mode evaluates the ideal evolution; the compile stage above is then report-only
    device = backend if ex.mode == "shots" else None
    with _Stage("observable"):
        obs = config.observable
        if obs.kind == "return_probability":
            series = [return_probability(plan, config.initial_state, ex.mode, shots, ex.seed, device)]
        elif obs.kind == "magnetization":
            series = magnetization_series(
                plan, config.initial_state, obs.sites, ex.mode, shots, ex.seed, device, obs.convention
            )
        else:
            otoc = dict(obs.otoc)
            cfg = OtocConfig(seed=ex.seed, shots=otoc.pop("shots", ex.shots), **otoc)
            series = [modified_otoc(cfg, plan, ex.mode, device)]
            manifest["otoc_flagged_times"] = series[0].metadata["flagged_times"]
        bad = [v for s in series for v in s.values if not math.isfinite(v)]
        if bad:
            raise RunError("observable", f"{len(bad)} non-finite values in the result series")
    manifest["derived_seeds"] = _derived_seeds(config)

    with _Stage("output"):
        prefix = Path(config.output.prefix)
        prefix.parent.mkdir(parents=True, exist_ok=True)
        files = []
        if obs.kind == "magnetization":
            paths = [prefix.parent / f"{prefix.name}_site{s.metadata['site']:02d}.csv" for s in series]
        else:
            paths = [prefix.parent / f"{prefix.name}.csv"]
        for s, path in zip(series, paths):
            path.write_text(s.to_csv(_csv_header(config, s)))
            files.append(path)
        if config.output.figure if write_figure is None else write_figure:
            files += _figures(config, series, prefix)
        manifest["outputs"] = [str(p) for p in files]
        manifest["layout"] = layout.to_json()
        manifest["duration_s"] = round(time.perf_counter() - started, 6)
        manifest_path = prefix.parent / f"{prefix.name}_manifest.json"
        manifest_path.write_text(json.dumps(manifest, indent=2, default=str) + "\n")
        files.append(manifest_path)
    return RunResult(series, files, manifest)


def _figures(config: ExperimentConfig, series: list[TimeSeries], prefix: Path) -> list[Path]:
    from .plotting import YLABELS, plot_heatmap, plot_series

    kind = config.observable.kind
    out = prefix.parent / f"{prefix.name}.png"
    if kind == "magnetization":
        labels = [f"site {s.metadata['site']}" for s in series]
        files = [plot_series(series, labels, out, YLABELS[kind])]
        if len(series) > 1:
            files.append(plot_heatmap(series, prefix.parent / f"{prefix.name}_heatmap.png", YLABELS[kind]))
        return files
    return [plot_series(series, [config.execution.mode], out, YLABELS[kind])]
