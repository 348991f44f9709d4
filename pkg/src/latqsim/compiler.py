"""First-order Trotter compilation, basis decomposition and SWAP routing."""

from __future__ import annotations

from collections import deque
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .pauli import PauliSum, PauliTerm
from .statevector import (
    Barrier,
    Circuit,
    Gate,
    Measure,
    PauliRotation,
    Swap,
    Unitary2Q,
    cx,
    h,
    is_two_qubit,
    s,
    sdg,
)

BASES = ("native_pauli", "cnot_rz")


def default_term_order(hamiltonian: PauliSum) -> list[int]:
    """Off-diagonal terms first, then single-Z, then multi-Z; stable within groups."""

    def group(i: int) -> int:
        t = hamiltonian.terms[i]
        if not t.is_diagonal:
            return 0
        return 1 if t.weight == 1 else 2

    return sorted(range(len(hamiltonian.terms)), key=group)


@dataclass
class TrotterPlan:
    hamiltonian: PauliSum
    dt: float
    n_steps: int
    term_order: list[int] | None = None

    def __post_init__(self):
        if self.n_steps < 0:
            raise ValueError("n_steps must be non-negative")
        if self.n_steps > 0 and not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.term_order is None:
            self.term_order = default_term_order(self.hamiltonian)
        self.term_order = [int(i) for i in self.term_order]
        if sorted(self.term_order) != list(range(len(self.hamiltonian.terms))):
            raise ValueError("term_order must be a permutation of the term indices")

    def with_steps(self, n_steps: int) -> TrotterPlan:
        return TrotterPlan(self.hamiltonian, self.dt, n_steps, list(self.term_order))

    @property
    def times(self) -> list[float]:
        return [k * self.dt for k in range(self.n_steps + 1)]


def trotterize(plan: TrotterPlan) -> Circuit:
    """Each term ``c*P`` becomes ``exp(-i c dt P)``, repeated over ``n_steps``.

    The identity offset only contributes the global phase recorded in the
    circuit metadata.
    """
    H = plan.hamiltonian
    if not H.is_hermitian():
        raise ValueError("Trotterization requires a Hermitian Hamiltonian")
    step = [
        PauliRotation(H.terms[i].with_coefficient(1.0), 2 * H.terms[i].coefficient.real * plan.dt)
        for i in plan.term_order
    ]
    circuit = Circuit(H.n_qubits, step * plan.n_steps)
    circuit.metadata.update(
        dt=plan.dt,
        n_steps=plan.n_steps,
        term_order=list(plan.term_order),
        global_phase=-H.identity_offset.real * plan.dt * plan.n_steps,
    )
    return circuit


# -- basis decomposition ---------------------------------------------------


def _rotation_to_cnot_rz(g: PauliRotation) -> list[Gate]:
    n = g.term.n_qubits
    before: list[Gate] = []
    after: list[Gate] = []
    for q, axis in g.term.paulis:
        if axis == "X":
            before.append(h(q))
            after.append(h(q))
        elif axis == "Y":
            before += [sdg(q), h(q)]
            after += [h(q), s(q)]
    qs = g.term.support
    ladder = [cx(qs[i], qs[i + 1]) for i in range(len(qs) - 1)]
    core = ladder + [PauliRotation(PauliTerm(1.0, {qs[-1]: "Z"}, n), g.angle)] + ladder[::-1]
    return before + core + after


def decompose_to_basis(circuit: Circuit, basis: str) -> Circuit:
    if basis not in BASES:
        raise ValueError(f"unknown basis {basis!r}; expected one of {BASES}")
    out = Circuit(circuit.n_qubits, metadata={**circuit.metadata, "basis": basis})
    if basis == "native_pauli":
        out.extend(circuit.gates)
        return out
    for g in circuit.gates:
        if isinstance(g, PauliRotation) and g.term.weight >= 2:
            out.extend(_rotation_to_cnot_rz(g))
        elif isinstance(g, Swap):
            out.extend([cx(g.a, g.b), cx(g.b, g.a), cx(g.a, g.b)])
        elif isinstance(g, Unitary2Q) and g.name != "cx":
            raise ValueError(f"gate {g.name!r} has no cnot_rz decomposition")
        else:
            out.append(g)
    return out


def cnot_cost(g: Gate) -> int:
    """CNOT count of a gate after cnot_rz decomposition."""
    if isinstance(g, PauliRotation):
        return 2 * (g.term.weight - 1)
    if isinstance(g, Swap):
        return 3
    if isinstance(g, Unitary2Q):
        return 1 if g.name == "cx" else 3
    return 0


# -- coupling graphs -------------------------------------------------------


@dataclass(frozen=True)
class CouplingGraph:
    n_physical: int
    edges: frozenset

    def __post_init__(self):
        norm = set()
        for u, v in self.edges:
            u, v = int(u), int(v)
            if u == v or not (0 <= u < self.n_physical and 0 <= v < self.n_physical):
                raise ValueError(f"invalid edge ({u}, {v}) for {self.n_physical} qubits")
            norm.add((min(u, v), max(u, v)))
        object.__setattr__(self, "edges", frozenset(norm))
        if self.n_physical > 1 and len(self._reachable(0)) != self.n_physical:
            raise ValueError("coupling graph is disconnected")

    @classmethod
    def line(cls, n: int) -> CouplingGraph:
        return cls(n, frozenset((i, i + 1) for i in range(n - 1)))

    @classmethod
    def ring(cls, n: int) -> CouplingGraph:
        edges = {(i, (i + 1) % n) for i in range(n)} if n > 2 else {(i, i + 1) for i in range(n - 1)}
        return cls(n, frozenset(edges))

    @classmethod
    def complete(cls, n: int) -> CouplingGraph:
        return cls(n, frozenset((i, j) for i in range(n) for j in range(i + 1, n)))

    @classmethod
    def from_edge_list(cls, source: str | Path, n_physical: int | None = None) -> CouplingGraph:
        """Parse ``u v`` lines (``#`` comments allowed) from a file path or text."""
        text = Path(source).read_text() if Path(str(source)).is_file() else str(source)
        edges = []
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"edge list line {lineno}: expected 'u v', got {line!r}")
            edges.append((int(parts[0]), int(parts[1])))
        n = n_physical if n_physical is not None else 1 + max(max(e) for e in edges)
        return cls(n, frozenset(edges))

    def neighbors(self, q: int) -> list[int]:
        return sorted({v for u, v in self.edges if u == q} | {u for u, v in self.edges if v == q})

    def adjacent(self, a: int, b: int) -> bool:
        return (min(a, b), max(a, b)) in self.edges

    def is_complete(self) -> bool:
        return len(self.edges) == self.n_physical * (self.n_physical - 1) // 2

    def _reachable(self, start: int) -> set[int]:
        seen = {start}
        todo = [start]
        while todo:
            for v in self.neighbors(todo.pop()):
                if v not in seen:
                    seen.add(v)
                    todo.append(v)
        return seen

    def shortest_path(self, a: int, b: int) -> list[int]:
        """BFS path from ``a`` to ``b``; neighbors explored in ascending order."""
        parent = {a: None}
        queue = deque([a])
        while queue:
            u = queue.popleft()
            if u == b:
                break
            for v in self.neighbors(u):
                if v not in parent:
                    parent[v] = u
                    queue.append(v)
        if b not in parent:
            raise ValueError(f"no path between {a} and {b}")
        path = [b]
        while path[-1] != a:
            path.append(parent[path[-1]])
        return path[::-1]

    def distances(self) -> np.ndarray:
        d = np.full((self.n_physical, self.n_physical), np.inf)
        for a in range(self.n_physical):
            d[a, a] = 0
            queue = deque([a])
            while queue:
                u = queue.popleft()
                for v in self.neighbors(u):
                    if d[a, v] == np.inf:
                        d[a, v] = d[a, u] + 1
                        queue.append(v)
        return d


def topology(spec: str, n_qubits: int) -> CouplingGraph:
    """Resolve ``line``, ``ring``, ``complete`` (optionally ``:size``) or an edge-list path."""
    name, _, size = spec.partition(":")
    width = int(size) if size else n_qubits
    builders = {"line": CouplingGraph.line, "ring": CouplingGraph.ring, "complete": CouplingGraph.complete}
    if name in builders:
        return builders[name](width)
    if Path(spec).is_file():
        return CouplingGraph.from_edge_list(spec)
    raise ValueError(f"unknown topology {spec!r}")


# -- routing ---------------------------------------------------------------


@dataclass
class RoutedCircuit:
    circuit: Circuit
    layout_initial: list[int]  # virtual -> physical
    layout_final: list[int]
    entangling_count: int
    swap_count: int
    n_virtual: int = 0
    stats: dict = field(default_factory=dict)

    @property
    def depth(self) -> int:
        return self.circuit.depth()

    def physical_bitstring(self, virtual_bits: str) -> str:
        """Place a virtual basis label on the physical register per the initial layout."""
        bits = ["0"] * self.circuit.n_qubits
        for v, b in enumerate(virtual_bits):
            bits[self.layout_initial[v]] = b
        return "".join(bits)

    def virtual_bitstring(self, physical_bits: str) -> str:
        """Read virtual qubit values out of a physical label per the final layout."""
        return "".join(physical_bits[p] for p in self.layout_final)

    def compact(self) -> RoutedCircuit:
        """Drop physical qubits that neither host a virtual qubit nor see a gate."""
        used = set(self.layout_initial) | set(self.layout_final)
        for g in self.circuit.gates:
            used.update(g.qubits)
        keep = sorted(used)
        relabel = {p: i for i, p in enumerate(keep)}
        circ = Circuit(
            len(keep),
            [g.remap(relabel, len(keep)) for g in self.circuit.gates],
            dict(self.circuit.metadata),
        )
        return RoutedCircuit(
            circ,
            [relabel[p] for p in self.layout_initial],
            [relabel[p] for p in self.layout_final],
            self.entangling_count,
            self.swap_count,
            self.n_virtual,
            {**self.stats, "physical_qubits": keep},
        )


def _greedy_layout(circuit: Circuit, graph: CouplingGraph) -> list[int]:
    n = circuit.n_qubits
    weight = np.zeros((n, n))
    for g in circuit.gates:
        if is_two_qubit(g) and len(g.qubits) == 2:
            a, b = g.qubits
            weight[a, b] += 1
            weight[b, a] += 1
    dist = graph.distances()
    degree = [len(graph.neighbors(p)) for p in range(graph.n_physical)]
    layout: dict[int, int] = {}
    free = set(range(graph.n_physical))
    order = sorted(range(n), key=lambda v: (-weight[v].sum(), v))
    first = order[0]
    start = min(free, key=lambda p: (-degree[p], p))
    layout[first] = start
    free.discard(start)
    while len(layout) < n:
        v = max(
            (u for u in range(n) if u not in layout),
            key=lambda u: (sum(weight[u, w] for w in layout), -u),
        )
        best = min(free, key=lambda p: (sum(weight[v, w] * dist[p, layout[w]] for w in layout), p))
        layout[v] = best
        free.discard(best)
    return [layout[v] for v in range(n)]


def route(circuit: Circuit, graph: CouplingGraph, initial_layout: str | Sequence[int] = "trivial") -> RoutedCircuit:
    """Greedy SWAP insertion along shortest paths.

    For each two-qubit gate on non-adjacent qubits, the endpoint with fewer
    pending gates (ties: lower virtual index) walks along a BFS shortest path
    until the pair is adjacent.
    """
    n_v = circuit.n_qubits
    if n_v > graph.n_physical:
        raise ValueError(f"circuit needs {n_v} qubits, device has {graph.n_physical}")
    if isinstance(initial_layout, str):
        if initial_layout == "trivial":
            v2p = list(range(n_v))
        elif initial_layout == "greedy":
            v2p = _greedy_layout(circuit, graph)
        else:
            raise ValueError(f"unknown initial layout {initial_layout!r}")
    else:
        v2p = [int(p) for p in initial_layout]
        if len(set(v2p)) != n_v or any(not 0 <= p < graph.n_physical for p in v2p):
            raise ValueError("initial layout must be an injective map into the device")
    layout_initial = list(v2p)
    p2v: dict[int, int] = {p: v for v, p in enumerate(v2p)}

    pending = [0] * n_v
    for g in circuit.gates:
        for q in g.qubits:
            pending[q] += 1

    out = Circuit(graph.n_physical, metadata=dict(circuit.metadata))
    swaps = 0
    for g in circuit.gates:
        qs = g.qubits
        if len(qs) > 2 and not isinstance(g, (Barrier, Measure)):
            raise ValueError(f"cannot route a {len(qs)}-qubit gate")
        if len(qs) == 2 and not isinstance(g, (Barrier, Measure)):
            a, b = qs
            if not graph.adjacent(v2p[a], v2p[b]):
                mover, target = (a, b) if (pending[a], a) <= (pending[b], b) else (b, a)
                path = graph.shortest_path(v2p[mover], v2p[target])
                for nxt in path[1:-1]:
                    cur = v2p[mover]
                    out.append(Swap(cur, nxt))
                    swaps += 1
                    other = p2v.get(nxt)
                    v2p[mover] = nxt
                    p2v[nxt] = mover
                    if other is not None:
                        v2p[other] = cur
                        p2v[cur] = other
                    else:
                        del p2v[cur]
        out.append(g.remap(v2p, graph.n_physical))
        for q in qs:
            pending[q] -= 1

    entangling = sum(cnot_cost(g) for g in out.gates)
    return RoutedCircuit(out, layout_initial, list(v2p), entangling, swaps, n_v)


def entangling_report(a: RoutedCircuit, b: RoutedCircuit) -> list[dict]:
    """Side-by-side entangling/SWAP/depth counts with ``b - a`` deltas."""
    rows = []
    for metric, get in (
        ("entangling_count", lambda r: r.entangling_count),
        ("swap_count", lambda r: r.swap_count),
        ("depth", lambda r: r.depth),
    ):
        va, vb = get(a), get(b)
        rows.append({"metric": metric, "a": va, "b": vb, "delta": vb - va})
    return rows


def permute_state_to_virtual(amplitudes: np.ndarray, routed: RoutedCircuit) -> np.ndarray:
    """Reorder a physical-register state into virtual qubit order (final layout).

    Only valid when every non-hosting physical qubit is in ``|0>``.
    """
    n_p = routed.circuit.n_qubits
    n_v = routed.n_virtual
    t = amplitudes.reshape((2,) * n_p)
    rest = [p for p in range(n_p) if p not in routed.layout_final]
    t = np.transpose(t, list(routed.layout_final) + rest)
    return np.ascontiguousarray(t).reshape(1 << n_v, -1)[:, 0]

