"""Exact sequential sampling of product-POVM outcomes, and shadow ensembles.

Outcomes are drawn site by site from the exact conditional Born
distribution, so no Markov chain or rejection step is involved.  Record i
of an ensemble consumes a fixed block of a counter-based (Philox) stream
determined only by (seed, i), which makes sampling reproducible under any
chunking or worker split; a record stores outcome indices only.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

import numpy as np

from .povm import Povm, noise_adjoint_povm
from .states import DenseState, MpsState

_FORMAT = "povm-shadows-ensemble"
_VERSION = 1

#: one ensemble row: outcome index per site, dtype uint8
ShadowRecord = np.ndarray


@dataclass(eq=False)
class ShadowEnsemble:
    """Measurement records plus the provenance an estimator needs.

    noise_descriptor records *measurement* noise that the estimator must
    invert ("none" when the POVM statistics are to be read back directly).
    """

    n: int
    k: int
    povm_name: str
    noise_descriptor: str
    seed: int | str
    records: np.ndarray

    def __post_init__(self):
        records = np.asarray(self.records, dtype=np.uint8)
        if records.ndim != 2 or records.shape[1] != self.n:
            raise ValueError(f"records must have shape (N, {self.n})")
        if self.k > 256:
            raise ValueError("at most 256 outcomes per site are supported")
        if records.size and records.max() >= self.k:
            raise ValueError("record contains an outcome index >= k")
        self.records = records

    @property
    def count(self) -> int:
        return self.records.shape[0]

    def merge(self, other: "ShadowEnsemble") -> "ShadowEnsemble":
        """Concatenate two ensembles of the same POVM/noise/width."""
        for attr in ("n", "k", "povm_name", "noise_descriptor"):
            if getattr(self, attr) != getattr(other, attr):
                raise ValueError(f"cannot merge ensembles with different {attr}")
        return ShadowEnsemble(
            self.n,
            self.k,
            self.povm_name,
            self.noise_descriptor,
            f"{self.seed}+{other.seed}",
            np.concatenate([self.records, other.records]),
        )

    def save(self, path: str) -> None:
        header = {
            "format": _FORMAT,
            "version": _VERSION,
            "n": self.n,
            "k": self.k,
            "povm": self.povm_name,
            "noise": self.noise_descriptor,
            "seed": self.seed,
            "count": self.count,
        }
        with open(path, "wb") as f:
            f.write(json.dumps(header).encode() + b"\n")
            f.write(np.ascontiguousarray(self.records).tobytes())

    @classmethod
    def load(cls, path: str) -> "ShadowEnsemble":
        with open(path, "rb") as f:
            header = json.loads(f.readline().decode())
            if header.get("format") != _FORMAT or header.get("version") != _VERSION:
                raise ValueError(f"{path} is not a version-{_VERSION} ensemble file")
            body = f.read()
        records = np.frombuffer(body, dtype=np.uint8).reshape(header["count"], header["n"])
        return cls(
            header["n"], header["k"], header["povm"], header["noise"],
            header["seed"], records.copy(),
        )

    def export_csv(self, path: str) -> None:
        with open(path, "w") as f:
            f.write(",".join(f"site_{j}" for j in range(self.n)) + "\n")
            for row in self.records:
                f.write(",".join(str(int(x)) for x in row) + "\n")


# ---------------------------------------------------------------------------
# per-record uniform streams

def _stride(n: int) -> int:
    # Philox advances in 4-word ticks; pad so each record starts on a tick
    return 4 * ((n + 3) // 4)


def record_uniforms(seed: int, count: int, n: int, start: int = 0) -> np.ndarray:
    """Uniforms u[i, j] for records start..start+count-1, one per site.

    Record i always reads words [i*stride, i*stride + n) of the Philox
    stream keyed by ``seed``, independent of how sampling is chunked.
    """
    stride = _stride(n)
    bitgen = np.random.Philox(key=int(seed))
    if start:
        bitgen.advance(start * (stride // 4))
    u = np.random.Generator(bitgen).random((count, stride))
    return u[:, :n]


def _choose(probs: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Vectorized categorical draw; probs (C, k) rows normalized."""
    cum = np.cumsum(probs, axis=1)
    a = (cum < u[:, None]).sum(axis=1)
    return np.minimum(a, probs.shape[1] - 1).astype(np.uint8)


def _normalize_rows(probs: np.ndarray) -> np.ndarray:
    probs = np.clip(probs, 0.0, None)
    totals = probs.sum(axis=1, keepdims=True)
    if np.any(totals <= 0.0):
        raise ArithmeticError("conditional outcome probabilities vanished")
    return probs / totals


# ---------------------------------------------------------------------------
# sampling engines (batched over records)

def _element_sqrts(povm: Povm) -> np.ndarray:
    lam = np.clip(povm.eigenvalues, 0.0, None)
    out = np.empty_like(povm.elements)
    for a in range(povm.k):
        v = povm.eigenvectors[a]  # rows are eigenvectors
        out[a] = (v.T * np.sqrt(lam[a])) @ v.conj()
    return out


def _sample_chunk_mps(tensors, rights, elements, u) -> np.ndarray:
    count, n = u.shape
    outcomes = np.empty((count, n), dtype=np.uint8)
    env = np.ones((count, 1, 1), dtype=complex)
    for j, site in enumerate(tensors):
        t1 = np.einsum("clm,lsr->cmsr", env, site)
        t2 = np.einsum("cmsr,rq->cmsq", t1, rights[j])
        red = np.einsum("cmsq,mtq->cst", t2, site.conj())
        probs = _normalize_rows(np.einsum("cst,ats->ca", red, elements).real)
        a = _choose(probs, u[:, j])
        outcomes[:, j] = a
        picked = elements[a]
        env = np.einsum("cmsr,cts,mtq->crq", t1, picked, site.conj(), optimize=True)
        trace = np.einsum("crr->c", env).real
        if np.any(trace <= 0.0):
            raise ArithmeticError("conditional environment lost positivity")
        env /= trace[:, None, None]
    return outcomes


def _right_environments(tensors) -> list:
    n = len(tensors)
    rights = [None] * n
    rights[n - 1] = np.ones((1, 1), dtype=complex)
    for j in range(n - 1, 0, -1):
        t = tensors[j]
        rights[j - 1] = np.einsum("lsr,msq,rq->lm", t, t.conj(), rights[j])
    return rights


def _sample_chunk_vector(psi, elements, sqrts, u) -> np.ndarray:
    count, n = u.shape
    outcomes = np.empty((count, n), dtype=np.uint8)
    v = np.broadcast_to(psi, (count, psi.size)).copy()
    for j in range(n):
        v4 = v.reshape(count, 2 ** j, 2, -1)
        red = np.einsum("clsr,cltr->cst", v4, v4.conj())
        probs = _normalize_rows(np.einsum("cst,ats->ca", red, elements).real)
        a = _choose(probs, u[:, j])
        outcomes[:, j] = a
        v = np.einsum("cts,clsr->cltr", sqrts[a], v4).reshape(count, -1)
        norms = np.linalg.norm(v, axis=1)
        if np.any(norms <= 0.0):
            raise ArithmeticError("conditional state vector vanished")
        v /= norms[:, None]
    return outcomes


def _sample_chunk_density(rho, elements, u) -> np.ndarray:
    count, n = u.shape
    outcomes = np.empty((count, n), dtype=np.uint8)
    op = np.broadcast_to(rho, (count,) + rho.shape).copy()
    for j in range(n):
        half = op.shape[1] // 2
        op5 = op.reshape(count, 2, half, 2, half)
        red = np.einsum("csrtr->cst", op5)
        probs = _normalize_rows(np.einsum("cst,ats->ca", red, elements).real)
        a = _choose(probs, u[:, j])
        outcomes[:, j] = a
        op = np.einsum("cts,csrtq->crq", elements[a], op5)
        trace = np.einsum("crr->c", op).real
        if np.any(trace <= 0.0):
            raise ArithmeticError("conditional operator lost positivity")
        op /= trace[:, None, None]
    return outcomes


# ---------------------------------------------------------------------------
# public sampling entry points

def _run_chunked(engine, count, n, seed, chunk_size):
    pieces = []
    for start in range(0, count, chunk_size):
        stop = min(start + chunk_size, count)
        u = record_uniforms(seed, stop - start, n, start=start)
        pieces.append(engine(u))
    if not pieces:
        return np.empty((0, n), dtype=np.uint8)
    return np.concatenate(pieces)


def sample_mps(
    state: MpsState, povm: Povm, count: int, seed: int, *, chunk_size: int = 65536
) -> ShadowEnsemble:
    """Sample ``count`` product-POVM records from an MPS (exact Born law)."""
    return _sample_mps_labelled(state, povm, povm, "none", count, seed, chunk_size)


def _sample_mps_labelled(state, sampling_povm, label_povm, noise_descriptor,
                         count, seed, chunk_size=65536) -> ShadowEnsemble:
    rights = _right_environments(state.tensors)
    elements = sampling_povm.elements

    def engine(u):
        return _sample_chunk_mps(state.tensors, rights, elements, u)

    records = _run_chunked(engine, count, state.n, seed, chunk_size)
    return ShadowEnsemble(
        state.n, label_povm.k, label_povm.name, noise_descriptor, seed, records
    )


def sample_dense(
    state: DenseState, povm: Povm, count: int, seed: int, *, chunk_size: int | None = None
) -> ShadowEnsemble:
    """Sample records from a dense state vector (n <= 14) or density matrix (n <= 8)."""
    return _sample_dense_labelled(state, povm, povm, "none", count, seed, chunk_size)


def _sample_dense_labelled(state, sampling_povm, label_povm, noise_descriptor,
                           count, seed, chunk_size=None) -> ShadowEnsemble:
    n = state.n
    elements = sampling_povm.elements
    if state.is_density:
        if n > 8:
            raise ValueError("density-matrix sampling is limited to 8 sites")
        rho = state.data / np.trace(state.data).real
        if chunk_size is None:
            chunk_size = max(1, 2 ** 21 // 4 ** n)

        def engine(u):
            return _sample_chunk_density(rho, elements, u)

    else:
        if n > 14:
            raise ValueError("state-vector sampling is limited to 14 sites")
        psi = state.data / np.linalg.norm(state.data)
        sqrts = _element_sqrts(sampling_povm)
        if chunk_size is None:
            chunk_size = max(1, 2 ** 22 // 2 ** n)

        def engine(u):
            return _sample_chunk_vector(psi, elements, sqrts, u)

    records = _run_chunked(engine, count, n, seed, chunk_size)
    return ShadowEnsemble(
        n, label_povm.k, label_povm.name, noise_descriptor, seed, records
    )


def _dispatch_noisy(state, povm, noise, count, seed, noise_descriptor):
    adjoint = noise_adjoint_povm(povm, noise)
    if isinstance(state, MpsState):
        return _sample_mps_labelled(state, adjoint, povm, noise_descriptor, count, seed)
    return _sample_dense_labelled(state, adjoint, povm, noise_descriptor, count, seed)


def sample_noisy(state, povm: Povm, noise, count: int, seed: int) -> ShadowEnsemble:
    """Sample as if each site passed through noise E before a noisy measurement.

    The outcome law is tr(E^(x n)(rho) M_a1 x ... x M_an), realized on the
    noiseless state by measuring the adjoint-transformed POVM.  The returned
    ensemble records the noise descriptor, so estimation must use the
    factor table of the noisy channel M o E (which undoes the noise and
    targets the *noiseless* rho).
    """
    return _dispatch_noisy(state, povm, noise, count, seed, noise.descriptor)


def sample_noisy_state(state, povm: Povm, noise, count: int, seed: int) -> ShadowEnsemble:
    """Measure a locally noise-corrupted *state* with the clean POVM.

    Same outcome law as sample_noisy, but here the noise is part of state
    preparation: the ensemble is labelled noise-free and plain noiseless
    estimation yields observables of E^(x n)(rho) itself.
    """
    return _dispatch_noisy(state, povm, noise, count, seed, "none")


# ---------------------------------------------------------------------------
# exact outcome law (small n, used by exhaustive checks)

def outcome_probabilities(state, povm: Povm, noise=None) -> np.ndarray:
    """Exact joint outcome probabilities, shape (k,)*n; n <= 6 only."""
    if isinstance(state, MpsState):
        state = state.to_dense()
    n = state.n
    if n > 6:
        raise ValueError("exhaustive outcome enumeration is limited to 6 sites")
    elements = povm.elements
    if noise is not None:
        elements = noise_adjoint_povm(povm, noise).elements
    rho = state.to_density()
    rho = rho / np.trace(rho).real
    k = povm.k
    out = np.empty((k,) * n)
    for idx in itertools.product(range(k), repeat=n):
        m = elements[idx[0]]
        for a in idx[1:]:
            m = np.kron(m, elements[a])
        out[idx] = np.trace(rho @ m).real
    return out
