"""Noisy execution pipeline: transpile, fold, decouple, twirl, run, correct readout."""

from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np

from ._rng import derived_seed
from .compiler import CouplingGraph, RoutedCircuit, decompose_to_basis, route, topology
from .mitigation import (
    MitigationConfig,
    confusion_matrices,
    extrapolate,
    fold_global,
    mitigate_probabilities,
    readout_transfer,
)
from .noise import NoiseModel, run_noisy
from .statevector import Circuit, Counts, init_basis

BitFunction = Callable[[str], float]


@dataclass
class Backend:
    """A device emulation: noise model, mitigation settings and transpilation target.

    ``topology`` is ``None`` (all-to-all), a :class:`CouplingGraph`, or a
    topology spec string understood by :func:`latqsim.compiler.topology`.
    """

    noise: NoiseModel = field(default_factory=NoiseModel)
    mitigation: MitigationConfig = field(default_factory=MitigationConfig)
    basis: str = "native_pauli"
    topology: CouplingGraph | str | None = None
    initial_layout: str = "trivial"
    last_compiled: RoutedCircuit | None = field(default=None, repr=False, compare=False)

    def graph(self, n_qubits: int) -> CouplingGraph:
        if self.topology is None:
            return CouplingGraph.complete(n_qubits)
        if isinstance(self.topology, CouplingGraph):
            return self.topology
        return topology(self.topology, n_qubits)

    def compile(self, circuit: Circuit) -> RoutedCircuit:
        """Route on the device graph, lower to the basis, then drop unused qubits."""
        routed = route(circuit, self.graph(circuit.n_qubits), self.initial_layout)
        lowered = decompose_to_basis(routed.circuit, self.basis)
        routed = RoutedCircuit(
            lowered,
            routed.layout_initial,
            routed.layout_final,
            routed.entangling_count,
            routed.swap_count,
            routed.n_virtual,
        ).compact()
        self.last_compiled = routed
        return routed

    def _readout_mats(self, routed: RoutedCircuit):
        physical = routed.stats["physical_qubits"]
        p01, p10 = self.noise.readout(max(physical) + 1)
        order = [physical[p] for p in routed.layout_final]
        return confusion_matrices(p01[order], p10[order])

    def probabilities(
        self, routed: RoutedCircuit, initial_bits: str, shots: int, seed: int, fold: int = 1, invert_readout: bool = True
    ) -> dict[str, float]:
        """(Quasi-)probabilities over virtual bitstrings for one fold factor."""
        noise = self.noise.for_qubits(routed.stats["physical_qubits"])
        state0 = init_basis(routed.circuit.n_qubits, routed.physical_bitstring(initial_bits))
        circuit = fold_global(routed.circuit, fold) if fold > 1 else routed.circuit

        def run(c: Circuit, n: int, s: int) -> Counts:
            physical = run_noisy(c, state0, noise, n, s)
            out: dict[str, int] = {}
            for bits, v in physical.counts.items():
                key = routed.virtual_bitstring(bits)
                out[key] = out.get(key, 0) + v
            return Counts(out, physical.shots)

        mats = self._readout_mats(routed) if invert_readout and self.mitigation.readout == "tensored_inversion" else None
        return mitigate_probabilities(run, circuit, self.mitigation, seed, shots, mats)

    def expect_many(
        self, circuit: Circuit, initial_bits: str, functions: Sequence[BitFunction], shots: int, seed: int
    ) -> list[tuple[float, float]]:
        """Estimate ``sum_k p(k) f(k)`` for each ``f``; returns ``(value, std_error)`` pairs."""
        routed = self.compile(circuit)
        zne = self.mitigation.zne
        factors = zne.fold_factors if zne is not None else (1,)
        mats = self._readout_mats(routed) if self.mitigation.readout == "tensored_inversion" else None
        n = len(routed.layout_final)
        every = [format(i, f"0{n}b") for i in range(1 << n)] if mats is not None else []
        per_fold = []
        for factor in factors:
            probs = self.probabilities(routed, initial_bits, shots, derived_seed(seed, "fold", factor), factor, invert_readout=False)
            keys = list(probs)
            p = np.array([probs[k] for k in keys])
            index = np.array([int(k, 2) for k in keys], dtype=np.int64)
            stats = []
            for f in functions:
                if mats is None:
                    vals = np.array([f(k) for k in keys], dtype=float)
                else:
                    # inversion is linear in the raw counts, so move it onto the observable
                    vals = readout_transfer([f(k) for k in every], mats)[index]
                mean = float(p @ vals)
                var = max(float(p @ vals**2) - mean**2, 0.0)
                stats.append((mean, np.sqrt(var / shots)))
            per_fold.append(stats)
        if zne is None:
            return per_fold[0]
        results = []
        for i in range(len(functions)):
            values = [per_fold[j][i][0] for j in range(len(factors))]
            errors = [per_fold[j][i][1] for j in range(len(factors))]
            value, diag = extrapolate(factors, values, zne.fit, errors)
            results.append((value, diag["std_error"]))
        return results

    def expect(self, circuit: Circuit, initial_bits: str, f: BitFunction, shots: int, seed: int) -> tuple[float, float]:
        return self.expect_many(circuit, initial_bits, [f], shots, seed)[0]

    def describe(self) -> dict:
        topo = self.topology
        if isinstance(topo, CouplingGraph):
            topo = f"graph({topo.n_physical} qubits, {len(topo.edges)} edges)"
        return {
            "noise": self.noise.to_dict(),
            "mitigation": self.mitigation.to_dict(),
            "basis": self.basis,
            "topology": topo or "all_to_all",
            "initial_layout": self.initial_layout,
        }


def h1_like() -> Backend:
    """All-to-all preset with low two-qubit error (illustrative, not calibrated)."""
    return Backend(NoiseModel(p2=0.002), basis="cnot_rz")


def guadalupe_like() -> Backend:
    """Line-16 preset with higher two-qubit error (illustrative, not calibrated)."""
    return Backend(NoiseModel(p2=0.01), basis="cnot_rz", topology="line:16")
