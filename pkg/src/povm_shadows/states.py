"""States (dense and matrix-product), spin Hamiltonians and exact expectations."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .paulis import I2, PAULI_BY_AXIS, kron_all

DEGENERACY_ATOL = 1e-10
_EIG_RESIDUAL_ATOL = 1e-8


@dataclass(frozen=True, eq=False)
class DenseState:
    """State vector (2^n,) or density matrix (2^n, 2^n) on n qubits."""

    n: int
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=complex)
        dim = 2 ** self.n
        if data.shape not in ((dim,), (dim, dim)):
            raise ValueError(
                f"state data for n={self.n} must have shape ({dim},) or ({dim},{dim})"
            )
        object.__setattr__(self, "data", data)

    @property
    def is_density(self) -> bool:
        return self.data.ndim == 2

    def to_density(self) -> np.ndarray:
        if self.is_density:
            return self.data
        return np.outer(self.data, self.data.conj())


@dataclass(frozen=True, eq=False)
class GroundState(DenseState):
    energy: float = 0.0
    gap: float = np.inf
    degenerate: bool = False


@dataclass(frozen=True, eq=False)
class MpsState:
    """Open-boundary MPS; tensors[j] has index order (left, physical, right)."""

    n: int
    tensors: tuple

    def __post_init__(self):
        tensors = tuple(np.asarray(t, dtype=complex) for t in self.tensors)
        if len(tensors) != self.n:
            raise ValueError(f"expected {self.n} site tensors, got {len(tensors)}")
        left = 1
        for j, t in enumerate(tensors):
            if t.ndim != 3 or t.shape[1] != 2 or t.shape[0] != left:
                raise ValueError(f"tensor {j} has shape {t.shape}, expected ({left}, 2, *)")
            left = t.shape[2]
        if left != 1:
            raise ValueError("last tensor must close with right bond dimension 1")
        object.__setattr__(self, "tensors", tensors)

    @property
    def bond_dimensions(self) -> tuple:
        return tuple(t.shape[2] for t in self.tensors[:-1])

    def norm_squared(self) -> float:
        env = np.ones((1, 1), dtype=complex)
        for t in self.tensors:
            tmp = np.einsum("lm,lsr->msr", env, t)
            env = np.einsum("msr,msq->rq", tmp, t.conj())
        return float(env[0, 0].real)

    def to_dense(self) -> DenseState:
        if self.n > 20:
            raise ValueError("refusing to densify an MPS with more than 20 sites")
        psi = np.ones((1, 1), dtype=complex)
        for t in self.tensors:
            psi = np.einsum("ac,csr->asr", psi, t).reshape(-1, t.shape[2])
        return DenseState(self.n, psi[:, 0])


def ghz(n: int) -> MpsState:
    """(|0...0> + |1...1>)/sqrt(2) as a bond-dimension-2 MPS."""
    if n < 2:
        raise ValueError("a GHZ state needs at least 2 qubits")
    first = np.zeros((1, 2, 2), dtype=complex)
    first[0, 0, 0] = first[0, 1, 1] = 1.0 / np.sqrt(2.0)
    middle = np.zeros((2, 2, 2), dtype=complex)
    middle[0, 0, 0] = middle[1, 1, 1] = 1.0
    last = np.zeros((2, 2, 1), dtype=complex)
    last[0, 0, 0] = last[1, 1, 0] = 1.0
    return MpsState(n, (first,) + (middle,) * (n - 2) + (last,))


def product_state(bloch_vectors) -> MpsState:
    """Bond-dimension-1 MPS from one unit Bloch vector per site."""
    tensors = []
    for i, r in enumerate(bloch_vectors):
        r = np.asarray(r, dtype=float)
        if abs(np.linalg.norm(r) - 1.0) > 1e-10:
            raise ValueError(f"Bloch vector {i} is not unit length: {r}")
        theta = np.arccos(np.clip(r[2], -1.0, 1.0))
        phi = np.arctan2(r[1], r[0])
        ket = np.array([np.cos(theta / 2.0), np.exp(1j * phi) * np.sin(theta / 2.0)])
        tensors.append(ket.reshape(1, 2, 1))
    return MpsState(len(tensors), tuple(tensors))


def all_spins_down(n: int) -> MpsState:
    return product_state([(0.0, 0.0, -1.0)] * n)


def save_mps(state: MpsState, path: str) -> None:
    """Write site tensors to JSON (or .npz), index order (left, physical, right)."""
    if str(path).endswith(".npz"):
        np.savez(path, n=state.n, **{f"tensor_{j}": t for j, t in enumerate(state.tensors)})
        return
    doc = {
        "n": state.n,
        "index_order": "left,physical,right",
        "tensors": [
            [[[ [x.real, x.imag] for x in row] for row in mat] for mat in t]
            for t in state.tensors
        ],
    }
    with open(path, "w") as f:
        json.dump(doc, f)


def load_mps(path: str) -> MpsState:
    if str(path).endswith(".npz"):
        with np.load(path) as data:
            n = int(data["n"])
            tensors = tuple(data[f"tensor_{j}"] for j in range(n))
        return MpsState(n, tensors)
    with open(path) as f:
        doc = json.load(f)
    tensors = []
    for t in doc["tensors"]:
        arr = np.array(t, dtype=float)  # (l, 2, r, 2) with re/im last
        tensors.append(arr[..., 0] + 1j * arr[..., 1])
    return MpsState(int(doc["n"]), tuple(tensors))


# ---------------------------------------------------------------------------
# spin Hamiltonians

@dataclass(frozen=True)
class SpinHamiltonian:
    """sum_t coeff_t * (product of Pauli factors), open boundary."""

    n: int
    terms: tuple  # ((coeff, ((site, axis), ...)), ...)

    def __post_init__(self):
        for coeff, ops in self.terms:
            for site, axis in ops:
                if not 0 <= site < self.n:
                    raise ValueError(f"term site {site} outside 0..{self.n - 1}")
                if axis not in PAULI_BY_AXIS:
                    raise ValueError(f"unknown Pauli axis {axis!r}")

    def matrix(self) -> sp.csr_matrix:
        dim = 2 ** self.n
        h = sp.csr_matrix((dim, dim), dtype=complex)
        ident = sp.identity(2, format="csr", dtype=complex)
        for coeff, ops in self.terms:
            by_site = dict(ops)
            factors = [
                sp.csr_matrix(PAULI_BY_AXIS[by_site[i]]) if i in by_site else ident
                for i in range(self.n)
            ]
            term = factors[0]
            for f in factors[1:]:
                term = sp.kron(term, f, format="csr")
            h = h + coeff * term
        return h.tocsr()


def tfim_hamiltonian(n: int, coupling: float, transverse_field: float) -> SpinHamiltonian:
    """H = J sum_i sz_i sz_{i+1} + h sum_i sx_i  (J > 0: antiferromagnetic)."""
    terms = [(float(coupling), ((i, "z"), (i + 1, "z"))) for i in range(n - 1)]
    terms += [(float(transverse_field), ((i, "x"),)) for i in range(n)]
    return SpinHamiltonian(n, tuple(terms))


def disordered_heisenberg(n: int, seed: int) -> SpinHamiltonian:
    """H = -1/2 sum_j Jj (sx sx + sy sy + 1/2 sz sz) with Jj ~ U[0, 2).

    One coupling draw per bond (x and y share it, the z coupling is half),
    zero field; the seed fixes the disorder realization.
    """
    rng = np.random.default_rng(seed)
    couplings = rng.uniform(0.0, 2.0, size=n - 1)
    terms = []
    for j, cj in enumerate(couplings):
        bond = (j, j + 1)
        terms.append((-0.5 * cj, ((bond[0], "x"), (bond[1], "x"))))
        terms.append((-0.5 * cj, ((bond[0], "y"), (bond[1], "y"))))
        terms.append((-0.25 * cj, ((bond[0], "z"), (bond[1], "z"))))
    return SpinHamiltonian(n, tuple(terms))


def ground_state(hamiltonian: SpinHamiltonian) -> GroundState:
    """Lowest eigenvector; flags (gap < 1e-10) degeneracy instead of failing.

    Dense diagonalization up to 8 sites, Lanczos with a fixed start vector
    above that, so results are deterministic.  The eigenpair residual is
    checked to 1e-8.
    """
    h = hamiltonian.matrix()
    dim = h.shape[0]
    if dim <= 256:
        energies, vectors = np.linalg.eigh(h.toarray())
        e0, e1 = energies[0], energies[1]
        vec = vectors[:, 0]
    else:
        v0 = np.full(dim, 1.0 / np.sqrt(dim))
        energies, vectors = spla.eigsh(h, k=2, which="SA", v0=v0)
        order = np.argsort(energies)
        e0, e1 = energies[order[0]], energies[order[1]]
        vec = vectors[:, order[0]]
    residual = np.linalg.norm(h @ vec - e0 * vec)
    if residual > _EIG_RESIDUAL_ATOL:
        raise ArithmeticError(f"ground state residual {residual:.2e} above 1e-8")
    i = int(np.argmax(np.abs(vec)))
    vec = vec / (vec[i] / abs(vec[i]))
    gap = float(e1 - e0)
    return GroundState(
        hamiltonian.n,
        vec,
        energy=float(e0),
        gap=gap,
        degenerate=gap < DEGENERACY_ATOL,
    )


# ---------------------------------------------------------------------------
# exact expectations

def exact_expectation(state, observable) -> float:
    """<O> for a Pauli-string observable on a dense or MPS state.

    ``observable`` needs .coefficient and .support ((site, axis) pairs).
    Expectations are normalized by the state norm.
    """
    ops = {site: PAULI_BY_AXIS[axis] for site, axis in observable.support}
    return float(observable.coefficient) * product_operator_expectation(state, ops)


def product_operator_expectation(state, ops: dict) -> float:
    """<prod_j O_j> for one Hermitian 2x2 operator per chosen site."""
    if isinstance(state, MpsState):
        return _mps_transfer(state, ops) / state.norm_squared()
    if state.is_density:
        op = _dense_product_operator(state.n, ops)
        value = np.sum(state.data * op.T)
        norm = np.trace(state.data).real
    else:
        psi = state.data
        value = np.vdot(psi, _apply_site_operators(psi, state.n, ops))
        norm = np.vdot(psi, psi).real
    return float(value.real) / norm


def _dense_product_operator(n: int, ops: dict) -> np.ndarray:
    return kron_all([ops.get(i, I2) for i in range(n)])


def _apply_site_operators(psi: np.ndarray, n: int, ops: dict) -> np.ndarray:
    out = psi.reshape((2,) * n)
    for site, op in ops.items():
        out = np.moveaxis(np.tensordot(op, out, axes=([1], [site])), 0, site)
    return out.reshape(-1)


def _mps_transfer(state: MpsState, ops: dict) -> float:
    env = np.ones((1, 1), dtype=complex)
    for j, t in enumerate(state.tensors):
        tmp = np.einsum("lm,lsr->msr", env, t)
        if j in ops:
            tmp = np.einsum("ts,msr->mtr", ops[j], tmp)
        env = np.einsum("msr,msq->rq", tmp, t.conj())
    return float(env[0, 0].real)


def local_depolarizing_scale(p: float, locality: int) -> float:
    """Expectation shrink factor (1 - 4p/3)^k for per-site depolarizing noise.

    With rho' = (1 - 4p/3) rho + (4p/3) tr(rho) I/2 applied to every site, a
    k-site traceless Pauli correlator is scaled by (1 - 4p/3)^k; p must lie
    in [0, 3/4].
    """
    if not 0.0 <= p <= 0.75:
        raise ValueError("depolarizing p must lie in [0, 3/4]")
    return float((1.0 - 4.0 * p / 3.0) ** locality)
