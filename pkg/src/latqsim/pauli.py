"""Sparse Pauli-string algebra.

Tensor ordering convention used throughout the package: qubit 0 is the most
significant factor, i.e. the leftmost character of a basis label and the
highest bit of a basis-state index.
"""

from __future__ import annotations

import re
from collections.abc import Iterable, Mapping
from dataclasses import dataclass

import numpy as np

AXES = ("X", "Y", "Z")
DEFAULT_TOL = 1e-12
DENSE_MAX_QUBITS = 14

# (a, b) -> (phase, axis) with a*b = phase * axis; axis None means identity
_PRODUCT = {
    ("X", "X"): (1, None),
    ("Y", "Y"): (1, None),
    ("Z", "Z"): (1, None),
    ("X", "Y"): (1j, "Z"),
    ("Y", "Z"): (1j, "X"),
    ("Z", "X"): (1j, "Y"),
    ("Y", "X"): (-1j, "Z"),
    ("Z", "Y"): (-1j, "X"),
    ("X", "Z"): (-1j, "Y"),
}

PAULI_MATRICES = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class WidthMismatchError(ValueError):
    pass


def _normalize_paulis(paulis, n_qubits: int) -> tuple[tuple[int, str], ...]:
    if isinstance(paulis, str):
        paulis = _parse_ops(paulis)
    items = paulis.items() if isinstance(paulis, Mapping) else paulis
    out = {}
    for q, axis in items:
        q = int(q)
        axis = str(axis).upper()
        if axis == "I":
            continue
        if axis not in AXES:
            raise ValueError(f"unknown Pauli axis {axis!r}")
        if not 0 <= q < n_qubits:
            raise ValueError(f"qubit index {q} outside register of width {n_qubits}")
        if q in out:
            raise ValueError(f"qubit {q} listed twice")
        out[q] = axis
    return tuple(sorted(out.items()))


_OP_RE = re.compile(r"^([XYZI])(\d+)$")


def _parse_ops(text: str) -> list[tuple[int, str]]:
    ops = []
    for tok in text.split():
        m = _OP_RE.match(tok.upper())
        if not m:
            raise ValueError(f"malformed Pauli token {tok!r}")
        ops.append((int(m.group(2)), m.group(1)))
    return ops


@dataclass(frozen=True)
class PauliTerm:
    """``coefficient * P`` for a Pauli string ``P`` on ``n_qubits`` qubits.

    ``paulis`` accepts a mapping ``{qubit: axis}``, an iterable of pairs, or a
    string such as ``"X0 Y1"``. It is stored as a sorted tuple of pairs with
    identities dropped.
    """

    coefficient: complex
    paulis: tuple[tuple[int, str], ...]
    n_qubits: int

    def __post_init__(self):
        if int(self.n_qubits) < 1:
            raise ValueError("n_qubits must be positive")
        object.__setattr__(self, "n_qubits", int(self.n_qubits))
        object.__setattr__(self, "coefficient", complex(self.coefficient))
        object.__setattr__(self, "paulis", _normalize_paulis(self.paulis, self.n_qubits))

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(q for q, _ in self.paulis)

    @property
    def weight(self) -> int:
        return len(self.paulis)

    @property
    def is_identity(self) -> bool:
        return not self.paulis

    @property
    def is_diagonal(self) -> bool:
        return all(a == "Z" for _, a in self.paulis)

    def axis(self, qubit: int) -> str:
        return dict(self.paulis).get(qubit, "I")

    def with_coefficient(self, coefficient: complex) -> PauliTerm:
        return PauliTerm(coefficient, self.paulis, self.n_qubits)

    def label(self) -> str:
        """Dense label, qubit 0 leftmost, e.g. ``'XIZ'``."""
        ops = dict(self.paulis)
        return "".join(ops.get(q, "I") for q in range(self.n_qubits))

    def masks(self) -> tuple[int, int, int]:
        """Bitmasks (x, z, n_y) in the basis-index convention (qubit 0 = MSB)."""
        x = z = 0
        ny = 0
        for q, a in self.paulis:
            bit = 1 << (self.n_qubits - 1 - q)
            if a in ("X", "Y"):
                x |= bit
            if a in ("Z", "Y"):
                z |= bit
            ny += a == "Y"
        return x, z, ny

    def __mul__(self, other):
        if isinstance(other, PauliTerm):
            return multiply(self, other)
        return self.with_coefficient(self.coefficient * other)

    def __rmul__(self, other):
        return self.with_coefficient(self.coefficient * other)

    def __str__(self):
        ops = " ".join(f"{a}{q}" for q, a in self.paulis) or "I"
        return f"({self.coefficient:g}) {ops}"


def _check_width(a, b):
    if a.n_qubits != b.n_qubits:
        raise WidthMismatchError(f"width mismatch: {a.n_qubits} vs {b.n_qubits}")


def multiply(a: PauliTerm, b: PauliTerm) -> PauliTerm:
    """Operator product ``a @ b`` as a single term, phase folded into the coefficient."""
    _check_width(a, b)
    ops = dict(a.paulis)
    phase = 1 + 0j
    for q, axis in b.paulis:
        if q not in ops:
            ops[q] = axis
            continue
        p, res = _PRODUCT[(ops[q], axis)]
        phase *= p
        if res is None:
            del ops[q]
        else:
            ops[q] = res
    return PauliTerm(a.coefficient * b.coefficient * phase, ops, a.n_qubits)


def commutes(a: PauliTerm, b: PauliTerm) -> bool:
    _check_width(a, b)
    ops = dict(a.paulis)
    clashes = sum(1 for q, axis in b.paulis if q in ops and ops[q] != axis)
    return clashes % 2 == 0


@dataclass(frozen=True)
class PauliSum:
    """A linear combination of Pauli strings plus an identity offset."""

    terms: tuple[PauliTerm, ...]
    n_qubits: int
    identity_offset: complex = 0j

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        object.__setattr__(self, "identity_offset", complex(self.identity_offset))
        for t in self.terms:
            if t.n_qubits != self.n_qubits:
                raise WidthMismatchError(
                    f"term {t} has width {t.n_qubits}, sum has {self.n_qubits}"
                )

    def __len__(self):
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms)

    def is_hermitian(self, tol: float = DEFAULT_TOL) -> bool:
        return abs(self.identity_offset.imag) <= tol and all(
            abs(t.coefficient.imag) <= tol for t in self.terms
        )

    @property
    def is_diagonal(self) -> bool:
        return all(t.is_diagonal for t in self.terms)

    def __add__(self, other: PauliSum) -> PauliSum:
        _check_width(self, other)
        return PauliSum(
            self.terms + other.terms, self.n_qubits, self.identity_offset + other.identity_offset
        )

    def scaled(self, factor: complex) -> PauliSum:
        return PauliSum(
            tuple(t.with_coefficient(t.coefficient * factor) for t in self.terms),
            self.n_qubits,
            self.identity_offset * factor,
        )

    def coefficients(self) -> dict[tuple[tuple[int, str], ...], complex]:
        """Map from Pauli key to coefficient (after canonicalization)."""
        return {t.paulis: t.coefficient for t in canonicalize(self).terms}


def from_terms(terms: Iterable[PauliTerm], n_qubits: int | None = None, offset: complex = 0) -> PauliSum:
    terms = list(terms)
    if n_qubits is None:
        if not terms:
            raise ValueError("cannot infer width of an empty sum")
        n_qubits = terms[0].n_qubits
    return PauliSum(tuple(terms), n_qubits, offset)


def canonicalize(s: PauliSum, tol: float = DEFAULT_TOL) -> PauliSum:
    """Merge like strings, move identities into the offset, prune ``|c| < tol``.

    Surviving terms keep the order of their first appearance.
    """
    merged: dict[tuple, complex] = {}
    offset = s.identity_offset
    for t in s.terms:
        if t.is_identity:
            offset += t.coefficient
            continue
        merged[t.paulis] = merged.get(t.paulis, 0j) + t.coefficient
    terms = tuple(
        PauliTerm(c, key, s.n_qubits) for key, c in merged.items() if abs(c) >= tol
    )
    if abs(offset) < tol:
        offset = 0j
    return PauliSum(terms, s.n_qubits, offset)


def _term_dense(t: PauliTerm) -> np.ndarray:
    dim = 1 << t.n_qubits
    x, z, ny = t.masks()
    k = np.arange(dim)
    signs = 1 - 2 * (_popcount(k & z) & 1)
    mat = np.zeros((dim, dim), dtype=complex)
    # P|k> = i^ny (-1)^{|k & z|} |k ^ x>
    mat[k ^ x, k] = (1j**ny) * signs * t.coefficient
    return mat


def _popcount(arr: np.ndarray) -> np.ndarray:
    return np.bitwise_count(arr.astype(np.uint64)).astype(np.int64)


def to_dense_matrix(s: PauliSum | PauliTerm, max_qubits: int = DENSE_MAX_QUBITS) -> np.ndarray:
    if s.n_qubits > max_qubits:
        raise ValueError(f"{s.n_qubits} qubits exceeds dense cap of {max_qubits}")
    if isinstance(s, PauliTerm):
        return _term_dense(s)
    dim = 1 << s.n_qubits
    mat = np.eye(dim, dtype=complex) * s.identity_offset
    for t in s.terms:
        mat += _term_dense(t)
    return mat


# -- text round-trip -------------------------------------------------------


def dumps(s: PauliSum) -> str:
    """Serialize one term per line as ``<re>,<im> X0 Y1``; identity as ``<re>,<im> I``."""
    lines = [f"# n_qubits: {s.n_qubits}"]
    if s.identity_offset != 0:
        c = s.identity_offset
        lines.append(f"{c.real!r},{c.imag!r} I")
    for t in s.terms:
        c = t.coefficient
        ops = " ".join(f"{a}{q}" for q, a in t.paulis) or "I"
        lines.append(f"{c.real!r},{c.imag!r} {ops}")
    return "\n".join(lines) + "\n"


def loads(text: str, n_qubits: int | None = None) -> PauliSum:
    header_width = None
    parsed = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            m = re.match(r"#\s*n_qubits:\s*(\d+)", line)
            if m:
                header_width = int(m.group(1))
            continue
        coeff_txt, _, ops_txt = line.partition(" ")
        try:
            re_txt, im_txt = coeff_txt.split(",")
            coeff = complex(float(re_txt), float(im_txt))
            ops = [] if ops_txt.strip().upper() == "I" else _parse_ops(ops_txt)
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
        parsed.append((coeff, ops))
    width = n_qubits or header_width
    if width is None:
        width = 1 + max((q for _, ops in parsed for q, _ in ops), default=0)
    offset = 0j
    terms = []
    for coeff, ops in parsed:
        if not ops:
            offset += coeff
        else:
            terms.append(PauliTerm(coeff, ops, width))
    return PauliSum(tuple(terms), width, offset)
