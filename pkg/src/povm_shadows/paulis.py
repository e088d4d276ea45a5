"""Pauli matrices and Bloch-coefficient helpers shared across the package.

Every 4x4 superoperator in this package acts on the coefficient vector
(x0, rx, ry, rz) of X = x0*I + rx*sx + ry*sy + rz*sz, in that basis order.
"""

from __future__ import annotations

from functools import reduce

import numpy as np

I2 = np.eye(2, dtype=complex)
SX = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SY = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SZ = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)

AXES = ("x", "y", "z")
PAULI_BY_AXIS = {"x": SX, "y": SY, "z": SZ}
#: basis order (identity first) used by every Bloch superoperator
BLOCH_BASIS = (I2, SX, SY, SZ)


def bloch_decompose(op: np.ndarray, atol: float = 1e-10) -> tuple[float, np.ndarray]:
    """Coefficients (x0, r) of a Hermitian 2x2 operator X = x0*I + r.sigma.

    Raises ValueError if ``op`` is not Hermitian within ``atol``.
    """
    op = np.asarray(op, dtype=complex)
    if op.shape != (2, 2):
        raise ValueError(f"expected a 2x2 operator, got shape {op.shape}")
    if np.max(np.abs(op - op.conj().T)) > atol:
        raise ValueError("operator is not Hermitian")
    x0 = 0.5 * np.trace(op).real
    r = np.array([0.5 * np.trace(op @ PAULI_BY_AXIS[ax]).real for ax in AXES])
    return x0, r


def bloch_compose(x0: float, r: np.ndarray) -> np.ndarray:
    """Operator x0*I + r.sigma from its Bloch coefficients."""
    r = np.asarray(r, dtype=float)
    return x0 * I2 + r[0] * SX + r[1] * SY + r[2] * SZ


def coefficient_vector(op: np.ndarray, atol: float = 1e-10) -> np.ndarray:
    """Length-4 coefficient vector (x0, rx, ry, rz) of a Hermitian operator."""
    x0, r = bloch_decompose(op, atol=atol)
    return np.concatenate(([x0], r))


def from_coefficient_vector(v: np.ndarray) -> np.ndarray:
    return bloch_compose(v[0], v[1:])


def kron_all(mats) -> np.ndarray:
    """Tensor product of a sequence of matrices (left factor = site 0)."""
    return reduce(np.kron, mats)


def pauli_string_matrix(n: int, support) -> np.ndarray:
    """Dense 2^n x 2^n matrix of a Pauli string given [(site, axis), ...]."""
    ops = [I2] * n
    for site, axis in support:
        ops[site] = PAULI_BY_AXIS[axis]
    return kron_all(ops)


def ketbra(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    return np.outer(v, v.conj())
