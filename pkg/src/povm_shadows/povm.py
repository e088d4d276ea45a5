"""Single-qubit informationally complete POVMs and their snapshot states.

A measurement outcome `a` is mapped to a pure "snapshot" state: for the
default (limit) rule this is the eigenvector of M_a with the largest
eigenvalue; finite-exponent rules assign eigenvector i of M_a probability
lambda_i^m / sum_j lambda_j^m.  Degenerate top eigenvalues (within 1e-10)
are resolved uniformly over a fixed orthonormal eigenbasis chosen at
construction, so everything downstream is deterministic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .paulis import AXES, I2, SX, SY, SZ, bloch_decompose, ketbra

#: Hermitian complex 2x2 ndarray
SingleQubitOperator = np.ndarray

DEGENERACY_ATOL = 1e-10
BUILTIN_NAMES = ("pauli6", "pauli4", "tetra")


@dataclass(frozen=True)
class SnapshotRule:
    """Outcome -> snapshot assignment rule.

    exponent: positive float m (probability ~ lambda^m) or the string
    "limit" (all mass on the top eigenvalue, ties split uniformly).
    """

    exponent: float | str = "limit"

    def __post_init__(self):
        if self.exponent != "limit":
            m = float(self.exponent)
            if not m > 0:
                raise ValueError("snapshot exponent must be positive or 'limit'")
            object.__setattr__(self, "exponent", m)

    def weights(self, eigenvalues: np.ndarray) -> np.ndarray:
        """Probability of each eigenvector given eigenvalues (descending)."""
        lam = np.asarray(eigenvalues, dtype=float)
        if lam[0] <= 0:
            raise ValueError("POVM element has no positive eigenvalue")
        if self.exponent == "limit":
            top = lam >= lam[0] - DEGENERACY_ATOL
            return top / top.sum()
        w = np.where(lam > 0, lam, 0.0) ** float(self.exponent)
        return w / w.sum()


LIMIT_RULE = SnapshotRule("limit")


@dataclass(frozen=True, eq=False)
class Povm:
    """A k-outcome single-qubit POVM with precomputed eigendata.

    elements:      (k, 2, 2) complex, elements[a] = M_a
    eigenvalues:   (k, 2) float, descending per element
    eigenvectors:  (k, 2, 2) complex, eigenvectors[a, i] is the unit
                   eigenvector for eigenvalues[a, i]
    snapshots:     (k, 2) complex, top eigenvector per element with a
                   deterministic global phase
    """

    name: str
    elements: np.ndarray
    eigenvalues: np.ndarray = field(repr=False)
    eigenvectors: np.ndarray = field(repr=False)
    snapshots: np.ndarray = field(repr=False)

    @property
    def k(self) -> int:
        return self.elements.shape[0]

    @classmethod
    def from_elements(cls, name: str, elements) -> "Povm":
        """Build a Povm from raw elements without asserting validity.

        Broken inputs still construct (so validate_povm can report on
        them); eigendata of non-Hermitian input uses the Hermitian part.
        """
        elements = np.array(elements, dtype=complex)
        if elements.ndim != 3 or elements.shape[1:] != (2, 2):
            raise ValueError(f"elements must have shape (k, 2, 2), got {elements.shape}")
        k = elements.shape[0]
        eigenvalues = np.empty((k, 2))
        eigenvectors = np.empty((k, 2, 2), dtype=complex)
        snapshots = np.empty((k, 2), dtype=complex)
        for a in range(k):
            herm = 0.5 * (elements[a] + elements[a].conj().T)
            w, v = np.linalg.eigh(herm)  # ascending
            order = np.argsort(-w)
            eigenvalues[a] = w[order]
            eigenvectors[a] = v[:, order].T
            snapshots[a] = _fix_phase(eigenvectors[a, 0])
        for arr in (elements, eigenvalues, eigenvectors, snapshots):
            arr.setflags(write=False)
        return cls(name, elements, eigenvalues, eigenvectors, snapshots)

    def to_json(self) -> str:
        doc = {
            "name": self.name,
            "k": self.k,
            "elements": [_complex_matrix_to_list(m) for m in self.elements],
            "snapshots": [_complex_vector_to_list(s) for s in self.snapshots],
        }
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "Povm":
        doc = json.loads(text)
        elements = np.array(
            [_complex_matrix_from_list(m) for m in doc["elements"]], dtype=complex
        )
        povm = cls.from_elements(doc["name"], elements)
        return povm


def _fix_phase(v: np.ndarray) -> np.ndarray:
    """Rotate the global phase so the largest-magnitude entry is real >= 0."""
    i = int(np.argmax(np.abs(v)))
    phase = v[i] / abs(v[i]) if abs(v[i]) > 0 else 1.0
    out = v / phase
    # clean the pinned entry exactly
    out[i] = abs(v[i])
    return out


def _complex_matrix_to_list(m):
    return [[float(x.real), float(x.imag)] for x in np.asarray(m).ravel()]


def _complex_matrix_from_list(entries):
    flat = np.array([complex(re, im) for re, im in entries])
    return flat.reshape(2, 2)


def _complex_vector_to_list(v):
    return [[float(x.real), float(x.imag)] for x in np.asarray(v)]


# ---------------------------------------------------------------------------
# built-in POVMs

_KET0 = np.array([1.0, 0.0], dtype=complex)
_KET1 = np.array([0.0, 1.0], dtype=complex)
_KETP = np.array([1.0, 1.0], dtype=complex) / np.sqrt(2.0)
_KETM = np.array([1.0, -1.0], dtype=complex) / np.sqrt(2.0)
_KETL = np.array([1.0, 1.0j], dtype=complex) / np.sqrt(2.0)   # sigma_y = +1
_KETR = np.array([1.0, -1.0j], dtype=complex) / np.sqrt(2.0)  # sigma_y = -1

#: unit Bloch vectors of the tetrahedral POVM
TETRA_DIRECTIONS = np.array(
    [
        [0.0, 0.0, 1.0],
        [2.0 * np.sqrt(2.0) / 3.0, 0.0, -1.0 / 3.0],
        [-np.sqrt(2.0) / 3.0, np.sqrt(2.0 / 3.0), -1.0 / 3.0],
        [-np.sqrt(2.0) / 3.0, -np.sqrt(2.0 / 3.0), -1.0 / 3.0],
    ]
)


def builtin_povm(name: str) -> Povm:
    """Return one of the built-in POVMs: pauli6, pauli4 or tetra.

    pauli6: all six Pauli eigenstates, each weighted 1/3; outcome order
            (|0>, |1>, |+>, |->, |l>, |r>).
    pauli4: (1/3)|0><0|, (1/3)|+><+|, (1/3)|l><l| and the rank-2 remainder
            that restores completeness.
    tetra:  four sub-normalized projectors (1/4)(I + s_a.sigma) with the
            s_a forming a regular tetrahedron.
    """
    if name == "pauli6":
        kets = (_KET0, _KET1, _KETP, _KETM, _KETL, _KETR)
        elements = np.array([ketbra(v) / 3.0 for v in kets])
    elif name == "pauli4":
        first3 = [ketbra(v) / 3.0 for v in (_KET0, _KETP, _KETL)]
        rest = I2 - first3[0] - first3[1] - first3[2]
        elements = np.array(first3 + [rest])
    elif name == "tetra":
        elements = np.array(
            [0.25 * (I2 + s[0] * SX + s[1] * SY + s[2] * SZ) for s in TETRA_DIRECTIONS]
        )
    else:
        raise ValueError(f"unknown POVM {name!r}; built-ins are {BUILTIN_NAMES}")
    return Povm.from_elements(name, elements)


# ---------------------------------------------------------------------------
# validation

@dataclass
class ValidationReport:
    """Violated POVM invariants as (check name, magnitude) pairs."""

    violations: list[tuple[str, float]]

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self) -> str:
        if self.ok:
            return "ok"
        return "; ".join(f"{name}: {mag:.3g}" for name, mag in self.violations)


def validate_povm(povm: Povm, atol: float = 1e-12) -> ValidationReport:
    """Check Hermiticity, completeness, positivity and snapshot alignment.

    Never raises on a bad POVM -- the report lists every violated
    invariant with its magnitude.
    """
    violations: list[tuple[str, float]] = []
    herm = float(max(np.max(np.abs(m - m.conj().T)) for m in povm.elements))
    if herm > atol:
        violations.append(("hermiticity", herm))
    comp = float(np.max(np.abs(povm.elements.sum(axis=0) - I2)))
    if comp > atol:
        violations.append(("completeness", comp))
    min_eig = float(povm.eigenvalues.min())
    if min_eig < -atol:
        violations.append(("positivity", -min_eig))
    for a in range(povm.k):
        if np.max(np.abs(povm.elements[a])) <= atol:
            violations.append(("zero_element", float(a)))
    # snapshots must be unit top eigenvectors of the (Hermitian part of) elements
    snap = 0.0
    for a in range(povm.k):
        psi = povm.snapshots[a]
        herm_el = 0.5 * (povm.elements[a] + povm.elements[a].conj().T)
        snap = max(snap, abs(np.linalg.norm(psi) - 1.0))
        snap = max(snap, float(np.max(np.abs(herm_el @ psi - povm.eigenvalues[a, 0] * psi))))
    if snap > 1e-10:
        violations.append(("snapshot_alignment", float(snap)))
    return ValidationReport(violations)


def snapshot_distribution(
    povm: Povm, outcome: int, rule: SnapshotRule = LIMIT_RULE
) -> list[tuple[np.ndarray, float]]:
    """(eigenvector, probability) pairs for one outcome under a rule.

    Zero-eigenvalue eigenvectors carry no weight and are dropped.
    """
    lam = povm.eigenvalues[outcome]
    if lam[0] <= DEGENERACY_ATOL:
        raise ValueError(f"outcome {outcome} of {povm.name!r} is a zero element")
    w = rule.weights(lam)
    return [
        (povm.eigenvectors[outcome, i], float(w[i])) for i in range(2) if w[i] > 0
    ]


def noise_adjoint_povm(povm: Povm, noise) -> Povm:
    """POVM with elements sum_j K_j^dag M_a K_j for a noise channel E.

    Measuring the *noiseless* state with the returned POVM reproduces the
    outcome statistics of measuring E(rho) with the original POVM, which
    lets noisy experiments run on pure states.
    """
    kraus = noise.kraus
    elements = np.array(
        [sum(k.conj().T @ m @ k for k in kraus) for m in povm.elements]
    )
    return Povm.from_elements(f"{povm.name}|{noise.descriptor}", elements)
