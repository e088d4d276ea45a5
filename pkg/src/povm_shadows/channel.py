"""Measurement channels, local noise models and their Bloch-space inverses.

The measurement channel of a snapshot assignment is
    M(rho) = sum_a tr(rho M_a) D_a,
with D_a the rule-averaged snapshot projector of outcome a (for the limit
rule with a unique top eigenvector, D_a = |psi_a><psi_a|).  Everything is
manipulated as a real 4x4 matrix acting on Bloch coefficient vectors;
composition of channels is matrix multiplication, and the inverse channel
is the matrix inverse.  Per-qubit noise E before the measurement gives
M_E = M o E, so inv(M_E) = inv(E) o inv(M).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .paulis import (
    AXES,
    BLOCH_BASIS,
    I2,
    PAULI_BY_AXIS,
    SX,
    SY,
    SZ,
    coefficient_vector,
    from_coefficient_vector,
    ketbra,
)
from .povm import LIMIT_RULE, Povm, SnapshotRule, snapshot_distribution

SINGULAR_ATOL = 1e-8
_COMPONENT_NAMES = ("identity", "x", "y", "z")


class ChannelInversionError(ValueError):
    """A Bloch superoperator could not be inverted."""

    def __init__(self, message: str, null_directions=()):
        super().__init__(message)
        self.null_directions = tuple(null_directions)


class InformationallyIncompleteError(ChannelInversionError):
    """The POVM does not fix every Bloch component of the state."""


@dataclass(frozen=True, eq=False)
class BlochSuperoperator:
    """Real 4x4 matrix acting on (x0, rx, ry, rz) coefficient vectors."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (4, 4):
            raise ValueError(f"expected a 4x4 matrix, got {m.shape}")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls) -> "BlochSuperoperator":
        return cls(np.eye(4))

    @classmethod
    def from_map(cls, action) -> "BlochSuperoperator":
        """Matrix of a linear map given its action on 2x2 operators.

        Column j holds the coefficients of action(basis_j) for the basis
        (I, sx, sy, sz); equivalently T[i, j] = tr(sigma_i action(sigma_j))/2.
        """
        cols = [coefficient_vector(action(b)) for b in BLOCH_BASIS]
        return cls(np.array(cols).T)

    def apply(self, op: np.ndarray) -> np.ndarray:
        """Apply the superoperator to a Hermitian 2x2 operator."""
        return from_coefficient_vector(self.matrix @ coefficient_vector(op))

    def compose(self, other: "BlochSuperoperator") -> "BlochSuperoperator":
        """self o other (apply ``other`` first)."""
        return BlochSuperoperator(self.matrix @ other.matrix)

    def adjoint(self) -> "BlochSuperoperator":
        """Hilbert-Schmidt adjoint; its matrix is the transpose."""
        return BlochSuperoperator(self.matrix.T)

    def inverse(self) -> "BlochSuperoperator":
        """Matrix inverse; raises naming the lost directions if singular."""
        u, s, vt = np.linalg.svd(self.matrix)
        if s[-1] < SINGULAR_ATOL:
            null = [vt[i] for i in range(4) if s[i] < SINGULAR_ATOL]
            names = sorted(
                {_COMPONENT_NAMES[int(np.argmax(np.abs(v)))] for v in null}
            )
            raise ChannelInversionError(
                "Bloch superoperator is singular; unobserved direction(s): "
                + ", ".join(names),
                null_directions=names,
            )
        return BlochSuperoperator(np.linalg.inv(self.matrix))

    @property
    def smallest_singular_value(self) -> float:
        return float(np.linalg.svd(self.matrix, compute_uv=False)[-1])

    def to_json(self) -> str:
        return json.dumps({"matrix": [[float(x) for x in row] for row in self.matrix]})

    @classmethod
    def from_json(cls, text: str) -> "BlochSuperoperator":
        return cls(np.array(json.loads(text)["matrix"], dtype=float))


@dataclass(frozen=True, eq=False)
class NoiseModel:
    """A single-qubit noise channel in Kraus form, applied identically per site."""

    kind: str
    parameter: float
    kraus: tuple = field(repr=False)

    def __post_init__(self):
        total = sum(k.conj().T @ k for k in self.kraus)
        if np.max(np.abs(total - I2)) > 1e-12:
            raise ValueError(f"Kraus operators of {self.kind!r} are not trace preserving")

    @classmethod
    def depolarizing(cls, strength: float) -> "NoiseModel":
        """E(rho) = (1 - q) rho + q tr(rho) I/2; Bloch vectors shrink by (1 - q)."""
        q = float(strength)
        if not 0.0 <= q <= 1.0:
            raise ValueError("depolarizing strength must lie in [0, 1]")
        kraus = (
            np.sqrt(1.0 - 0.75 * q) * I2,
            np.sqrt(0.25 * q) * SX,
            np.sqrt(0.25 * q) * SY,
            np.sqrt(0.25 * q) * SZ,
        )
        return cls("depolarizing", q, kraus)

    @classmethod
    def amplitude_damping(cls, gamma: float) -> "NoiseModel":
        """K0 = diag(1, sqrt(1-gamma)), K1 = sqrt(gamma)|0><1|."""
        g = float(gamma)
        if not 0.0 <= g <= 1.0:
            raise ValueError("damping parameter must lie in [0, 1]")
        k0 = np.array([[1.0, 0.0], [0.0, np.sqrt(1.0 - g)]], dtype=complex)
        k1 = np.array([[0.0, np.sqrt(g)], [0.0, 0.0]], dtype=complex)
        return cls("amplitude_damping", g, (k0, k1))

    @property
    def descriptor(self) -> str:
        return f"{self.kind}:{self.parameter!r}"

    def apply(self, op: np.ndarray) -> np.ndarray:
        return sum(k @ op @ k.conj().T for k in self.kraus)

    def adjoint_apply(self, op: np.ndarray) -> np.ndarray:
        return sum(k.conj().T @ op @ k for k in self.kraus)

    @property
    def bloch(self) -> BlochSuperoperator:
        return BlochSuperoperator.from_map(self.apply)


def parse_noise(descriptor: str | None) -> NoiseModel | None:
    """Inverse of NoiseModel.descriptor; "none"/None give None."""
    if descriptor is None or descriptor == "none":
        return None
    kind, _, value = descriptor.partition(":")
    value = value.split("=")[-1]  # accept q=0.2 / gamma=0.3 spellings
    if kind in ("depolarizing", "dep"):
        return NoiseModel.depolarizing(float(value))
    if kind in ("amplitude_damping", "ad"):
        return NoiseModel.amplitude_damping(float(value))
    raise ValueError(f"unknown noise descriptor {descriptor!r}")


@dataclass(frozen=True, eq=False)
class MeasurementChannel:
    """Forward and inverse Bloch superoperators of one measured qubit."""

    povm: Povm
    rule: SnapshotRule
    noise: NoiseModel | None
    forward: BlochSuperoperator
    inverse: BlochSuperoperator

    @property
    def noise_descriptor(self) -> str:
        return "none" if self.noise is None else self.noise.descriptor

    def apply(self, op: np.ndarray) -> np.ndarray:
        return self.forward.apply(op)

    def apply_inverse(self, op: np.ndarray) -> np.ndarray:
        return self.inverse.apply(op)

    def snapshot_operators(self) -> np.ndarray:
        """(k, 2, 2) rule-averaged snapshot projectors D_a."""
        k = self.povm.k
        out = np.empty((k, 2, 2), dtype=complex)
        for a in range(k):
            out[a] = sum(
                w * ketbra(v) for v, w in snapshot_distribution(self.povm, a, self.rule)
            )
        return out

    def shadow_operators(self) -> np.ndarray:
        """(k, 2, 2) per-outcome shadows inv(M_E)(D_a)."""
        return np.array([self.apply_inverse(d) for d in self.snapshot_operators()])


def measurement_channel(
    povm: Povm,
    rule: SnapshotRule = LIMIT_RULE,
    noise: NoiseModel | None = None,
) -> MeasurementChannel:
    """Build M_E = M o E with its inverse for one qubit.

    Raises InformationallyIncompleteError when the POVM leaves a Bloch
    direction unobserved (forward matrix singular below 1e-8).
    """
    snapshot_ops = [
        sum(w * ketbra(v) for v, w in snapshot_distribution(povm, a, rule))
        for a in range(povm.k)
    ]

    def measure(x):
        return sum(
            np.trace(x @ povm.elements[a]) * snapshot_ops[a] for a in range(povm.k)
        )

    t_measure = BlochSuperoperator.from_map(measure)
    forward = t_measure if noise is None else t_measure.compose(noise.bloch)
    try:
        inverse = forward.inverse()
    except ChannelInversionError as err:
        if t_measure.smallest_singular_value < SINGULAR_ATOL:
            raise InformationallyIncompleteError(
                f"POVM {povm.name!r} is not informationally complete; " + str(err),
                null_directions=err.null_directions,
            ) from None
        raise
    return MeasurementChannel(povm, rule, noise, forward, inverse)


def adjoint_on_pauli(channel: MeasurementChannel, axis: str) -> np.ndarray:
    """Operator adjoint(inv(M_E)) applied to sigma_axis.

    The Hilbert-Schmidt adjoint of a Bloch superoperator is its matrix
    transpose, so this is one matrix-vector product.
    """
    v = coefficient_vector(PAULI_BY_AXIS[axis])
    return from_coefficient_vector(channel.inverse.matrix.T @ v)


@dataclass(frozen=True, eq=False)
class FactorTable:
    """Per-axis estimator factors Phi[axis][a] = tr(D_a adjoint(inv(M_E))(sigma_axis)).

    The identity factor of an unmeasured-axis site is always 1 (the
    inverse channel is trace preserving), so only x, y, z rows are stored.
    A table is only valid for ensembles with the same POVM and noise.
    """

    povm_name: str
    noise_descriptor: str
    phi: np.ndarray  # (3, k) float, axis order x, y, z

    def factors(self, axis: str) -> np.ndarray:
        return self.phi[AXES.index(axis)]

    @property
    def k(self) -> int:
        return self.phi.shape[1]

    @property
    def max_factor(self) -> float:
        return float(np.max(np.abs(self.phi)))

    def to_json(self) -> str:
        return json.dumps(
            {
                "povm": self.povm_name,
                "noise": self.noise_descriptor,
                "axes": list(AXES),
                "phi": [[float(x) for x in row] for row in self.phi],
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "FactorTable":
        doc = json.loads(text)
        return cls(doc["povm"], doc["noise"], np.array(doc["phi"], dtype=float))


def factor_table(channel: MeasurementChannel) -> FactorTable:
    """Estimator factor table of a measurement channel."""
    d_ops = channel.snapshot_operators()
    phi = np.empty((3, channel.povm.k))
    for i, axis in enumerate(AXES):
        adj = adjoint_on_pauli(channel, axis)
        phi[i] = [np.trace(d @ adj).real for d in d_ops]
    phi.setflags(write=False)
    return FactorTable(channel.povm.name, channel.noise_descriptor, phi)
