"""ASAP layer scheduling and idle-window detection."""

from __future__ import annotations

from dataclasses import dataclass

from .statevector import Barrier, Circuit, Measure


@dataclass
class Schedule:
    layers: list[int | None]  # per gate; None for barriers and measurements
    depth: int
    busy: list[set[int]]  # qubits acted on in each layer
    first: dict[int, int]  # qubit -> first busy layer
    last: dict[int, int]

    def idle_windows(self, qubit: int) -> list[tuple[int, int]]:
        """Maximal runs ``[start, stop)`` of idle layers strictly inside the qubit's active span."""
        if qubit not in self.first:
            return []
        windows = []
        start = None
        for layer in range(self.first[qubit] + 1, self.last[qubit]):
            idle = qubit not in self.busy[layer]
            if idle and start is None:
                start = layer
            elif not idle and start is not None:
                windows.append((start, layer))
                start = None
        if start is not None:
            windows.append((start, self.last[qubit]))
        return windows

    def idle_qubits(self, layer: int) -> list[int]:
        return [
            q
            for q in sorted(self.first)
            if self.first[q] < layer < self.last[q] and q not in self.busy[layer]
        ]


def schedule(circuit: Circuit) -> Schedule:
    front = [0] * circuit.n_qubits  # next free layer per qubit
    layers: list[int | None] = []
    busy: list[set[int]] = []
    first: dict[int, int] = {}
    last: dict[int, int] = {}
    for g in circuit.gates:
        if isinstance(g, Measure):
            layers.append(None)
            continue
        if isinstance(g, Barrier):
            qs = g.qubits or tuple(range(circuit.n_qubits))
            level = max(front[q] for q in qs)
            for q in qs:
                front[q] = level
            layers.append(None)
            continue
        layer = max(front[q] for q in g.qubits)
        while len(busy) <= layer:
            busy.append(set())
        for q in g.qubits:
            front[q] = layer + 1
            busy[layer].add(q)
            first.setdefault(q, layer)
            last[q] = layer
        layers.append(layer)
    return Schedule(layers, len(busy), busy, first, last)
