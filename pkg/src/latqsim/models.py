"""Qubit Hamiltonians: N-flavor Gross-Neveu and the curved transverse Ising chain."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .pauli import PauliSum, PauliTerm, canonicalize


@dataclass(frozen=True)
class GrossNeveuParams:
    """Staggered-fermion Gross-Neveu chain with open boundaries.

    ``stagger_origin="even"`` gives site 0 a mass sign of +1; ``"odd"`` flips
    the sign of every mass term (the 1-based convention).
    """

    L: int
    N: int
    m: float = 0.0
    G2: float = 0.0
    stagger_origin: str = "even"

    def __post_init__(self):
        if self.L < 2:
            raise ValueError("Gross-Neveu needs L >= 2")
        if self.N < 1:
            raise ValueError("Gross-Neveu needs N >= 1")
        if self.G2 < 0:
            raise ValueError("G2 must be non-negative")
        if self.stagger_origin not in ("even", "odd"):
            raise ValueError("stagger_origin must be 'even' or 'odd'")


@dataclass(frozen=True)
class HyperbolicIsingParams:
    L: int
    J: float
    h: float
    m_z: float = 0.0
    ell_c: float = math.inf
    spin_convention: str = "half"

    def __post_init__(self):
        if self.L < 1 or self.L % 2 == 0:
            raise ValueError(f"hyperbolic Ising chain needs an odd number of sites, got L={self.L}")
        if not self.ell_c > 0:
            raise ValueError("ell_c must be positive (or infinite)")
        if self.spin_convention not in ("half", "pauli"):
            raise ValueError("spin_convention must be 'half' or 'pauli'")


@dataclass(frozen=True)
class QubitLayout:
    """Flavor-major packing: qubit ``q = f * n_sites + n``."""

    n_flavors: int
    n_sites: int

    @property
    def n_qubits(self) -> int:
        return self.n_flavors * self.n_sites

    def qubit(self, flavor: int, site: int) -> int:
        if not (0 <= flavor < self.n_flavors and 0 <= site < self.n_sites):
            raise IndexError(f"(flavor={flavor}, site={site}) outside layout")
        return flavor * self.n_sites + site

    def locate(self, qubit: int) -> tuple[int, int]:
        return divmod(qubit, self.n_sites)

    def to_json(self) -> dict:
        return {
            "n_flavors": self.n_flavors,
            "n_sites": self.n_sites,
            "qubits": [
                {"flavor": f, "site": n, "qubit": self.qubit(f, n)}
                for f in range(self.n_flavors)
                for n in range(self.n_sites)
            ],
        }


def build_gross_neveu(p: GrossNeveuParams) -> tuple[PauliSum, QubitLayout]:
    layout = QubitLayout(p.N, p.L)
    Q = layout.n_qubits
    terms: list[PauliTerm] = []
    offset = 0.0

    # hopping, ascending by site then flavor: -X_n Y_{n+1} + Y_n X_{n+1}
    for n in range(p.L - 1):
        for f in range(p.N):
            a, b = layout.qubit(f, n), layout.qubit(f, n + 1)
            terms.append(PauliTerm(-1.0, {a: "X", b: "Y"}, Q))
            terms.append(PauliTerm(1.0, {a: "Y", b: "X"}, Q))

    flip = 1 if p.stagger_origin == "even" else -1
    for n in range(p.L):
        sign = flip * (-1) ** n
        for f in range(p.N):
            # sign * m * (1 - Z)
            offset += sign * p.m
            terms.append(PauliTerm(-sign * p.m, {layout.qubit(f, n): "Z"}, Q))

    half = p.G2 / 2
    for n in range(p.L):
        for f in range(p.N):
            for g in range(f + 1, p.N):
                a, b = layout.qubit(f, n), layout.qubit(g, n)
                # (G2/2) (I - Z_a)(I - Z_b)
                offset += half
                terms.append(PauliTerm(-half, {a: "Z"}, Q))
                terms.append(PauliTerm(-half, {b: "Z"}, Q))
                terms.append(PauliTerm(half, {a: "Z", b: "Z"}, Q))

    return canonicalize(PauliSum(tuple(terms), Q, offset)), layout


def deformation_profile(L: int, ell_c: float) -> np.ndarray:
    """Site weights ``cosh((i - (L-1)/2) / ell_c)``; all ones for infinite ``ell_c``."""
    if L < 1:
        raise ValueError("L must be positive")
    if math.isinf(ell_c):
        return np.ones(L)
    if not ell_c > 0:
        raise ValueError("ell_c must be positive")
    i = np.arange(L)
    centered = i - (L - 1) / 2
    # symmetric pairs must agree bit-for-bit, so evaluate cosh on |beta|
    return np.cosh(np.abs(centered) / ell_c)


def build_hyperbolic_ising(p: HyperbolicIsingParams) -> tuple[PauliSum, QubitLayout]:
    eta = deformation_profile(p.L, p.ell_c)
    s = 0.5 if p.spin_convention == "half" else 1.0
    n = p.L
    terms = []
    for i in range(n - 1):
        terms.append(PauliTerm(-p.J * (eta[i] + eta[i + 1]) / 2 * s * s, {i: "Z", i + 1: "Z"}, n))
    for i in range(n):
        terms.append(PauliTerm(-p.h * eta[i] * s, {i: "X"}, n))
    for i in range(n):
        terms.append(PauliTerm(-p.m_z * eta[i] * s, {i: "Z"}, n))
    return canonicalize(PauliSum(tuple(terms), n)), QubitLayout(1, n)


def build_model(params) -> tuple[PauliSum, QubitLayout]:
    if isinstance(params, GrossNeveuParams):
        return build_gross_neveu(params)
    if isinstance(params, HyperbolicIsingParams):
        return build_hyperbolic_ising(params)
    raise TypeError(f"unknown model parameters {type(params).__name__}")


def params_dict(params) -> dict:
    kind = "gross_neveu" if isinstance(params, GrossNeveuParams) else "hyperbolic_ising"
    return {"model": kind, **asdict(params)}
