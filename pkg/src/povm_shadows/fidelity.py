"""Hypothesis (average-shadow) states, fidelities and the physical projection.

The hypothesis state sigma = (1/N) sum_j shadow_j is unit trace but
generally not positive; projecting its eigenvalue vector onto the
probability simplex (in Euclidean distance) yields the closest physical
state with the same eigenbasis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import MeasurementChannel
from .sampler import ShadowEnsemble
from .states import DenseState

_CHUNK = 4096


@dataclass(frozen=True, eq=False)
class HypothesisState:
    n: int
    matrix: np.ndarray
    count: int
    povm_name: str
    noise_descriptor: str


def _check_channel(ensemble: ShadowEnsemble, channel: MeasurementChannel):
    if (
        channel.povm.name != ensemble.povm_name
        or channel.noise_descriptor != ensemble.noise_descriptor
    ):
        raise ValueError(
            "channel ({}, {}) does not match ensemble ({}, {})".format(
                channel.povm.name, channel.noise_descriptor,
                ensemble.povm_name, ensemble.noise_descriptor,
            )
        )


def _fold_sites(shadow_ops: np.ndarray, records: np.ndarray, sites) -> np.ndarray:
    """Batched tensor product of per-record shadow operators over ``sites``."""
    count = records.shape[0]
    out = np.ones((count, 1, 1), dtype=complex)
    for site in sites:
        q = shadow_ops[records[:, site]]
        d = out.shape[1]
        out = np.einsum("cij,ckl->cikjl", out, q).reshape(count, 2 * d, 2 * d)
    return out


def hypothesis_state(ensemble: ShadowEnsemble, channel: MeasurementChannel) -> HypothesisState:
    """sigma = average of per-record tensor-product shadows (n <= 8).

    Accumulated as sum_c L_c (x) R_c over half-system splits, so the cost
    is one Gram product per chunk instead of N full Kronecker products.
    """
    _check_channel(ensemble, channel)
    n = ensemble.n
    if n > 8:
        raise ValueError("hypothesis states are limited to 8 sites (4^n memory)")
    if ensemble.count == 0:
        raise ValueError("cannot average an empty ensemble")
    shadow_ops = channel.shadow_operators()
    half = n // 2
    dim_l, dim_r = 2 ** half, 2 ** (n - half)
    total = np.zeros((dim_l * dim_l, dim_r * dim_r), dtype=complex)
    for start in range(0, ensemble.count, _CHUNK):
        rec = ensemble.records[start : start + _CHUNK]
        left = _fold_sites(shadow_ops, rec, range(half))
        right = _fold_sites(shadow_ops, rec, range(half, n))
        total += np.tensordot(
            left.reshape(rec.shape[0], -1), right.reshape(rec.shape[0], -1), axes=(0, 0)
        )
    sigma = (
        total.reshape(dim_l, dim_l, dim_r, dim_r)
        .transpose(0, 2, 1, 3)
        .reshape(dim_l * dim_r, dim_l * dim_r)
    ) / ensemble.count
    sigma = 0.5 * (sigma + sigma.conj().T)
    return HypothesisState(n, sigma, ensemble.count, ensemble.povm_name, ensemble.noise_descriptor)


def shadow_overlaps(
    ensemble: ShadowEnsemble, channel: MeasurementChannel, target: DenseState
) -> np.ndarray:
    """Per-record <psi|shadow_j|psi> for a pure target, without building sigma.

    The mean over records equals <psi|sigma|psi> exactly, so this scales to
    wider systems than hypothesis_state (memory O(chunk * 2^n)).
    """
    _check_channel(ensemble, channel)
    if target.is_density:
        raise ValueError("target must be a pure state vector")
    if target.n != ensemble.n:
        raise ValueError("target and ensemble differ in qubit count")
    psi = target.data / np.linalg.norm(target.data)
    n = ensemble.n
    shadow_ops = channel.shadow_operators()
    out = np.empty(ensemble.count)
    for start in range(0, ensemble.count, _CHUNK):
        rec = ensemble.records[start : start + _CHUNK]
        count = rec.shape[0]
        v = np.broadcast_to(psi, (count, psi.size)).copy()
        for site in range(n):
            q = shadow_ops[rec[:, site]]
            v4 = v.reshape(count, 2 ** site, 2, -1)
            v = np.einsum("cts,clsr->cltr", q, v4).reshape(count, -1)
        out[start : start + count] = (v @ psi.conj()).real
    return out


def fidelity_pure(sigma, target: DenseState) -> float:
    """<psi|sigma|psi> for a pure target; sigma is a matrix or HypothesisState."""
    matrix = sigma.matrix if isinstance(sigma, HypothesisState) else np.asarray(sigma)
    if target.is_density:
        raise ValueError("target must be a pure state vector")
    psi = target.data / np.linalg.norm(target.data)
    return float(np.vdot(psi, matrix @ psi).real)


# ---------------------------------------------------------------------------
# simplex projection and the physical state

def simplex_project(weights: np.ndarray) -> np.ndarray:
    """Euclidean projection of vector(s) onto the probability simplex.

    Works on the last axis of any-shaped input: sort descending, find the
    largest j with u_j + (1 - cumsum_j)/j > 0, shift by that residual and
    clip.  Output is entrywise >= 0 and sums to 1.
    """
    u = np.asarray(weights, dtype=float)
    scalar_input = u.ndim == 1
    u2 = u.reshape(-1, u.shape[-1])
    d = u2.shape[1]
    s = -np.sort(-u2, axis=1)
    css = np.cumsum(s, axis=1)
    j = np.arange(1, d + 1)
    rho = np.sum(s + (1.0 - css) / j > 0.0, axis=1)
    tau = (1.0 - np.take_along_axis(css, rho[:, None] - 1, axis=1)) / rho[:, None]
    x = np.maximum(u2 + tau, 0.0)
    return x.reshape(u.shape) if not scalar_input else x.reshape(-1)


def project_to_physical(sigma) -> np.ndarray:
    """Closest density matrix with sigma's eigenbasis (simplex-projected spectrum)."""
    matrix = sigma.matrix if isinstance(sigma, HypothesisState) else np.asarray(sigma)
    if np.max(np.abs(matrix - matrix.conj().T)) > 1e-8:
        raise ValueError("matrix to project must be Hermitian")
    matrix = 0.5 * (matrix + matrix.conj().T)
    w, v = np.linalg.eigh(matrix)
    w_proj = simplex_project(w)
    return (v * w_proj) @ v.conj().T


# ---------------------------------------------------------------------------
# binary matrix layout: row-major complex128 (interleaved re/im float64)

def save_matrix(matrix: np.ndarray, path: str) -> None:
    np.ascontiguousarray(matrix, dtype=complex).tofile(path)


def load_matrix(path: str, dim: int) -> np.ndarray:
    flat = np.fromfile(path, dtype=complex)
    if flat.size != dim * dim:
        raise ValueError(f"{path} holds {flat.size} entries, expected {dim * dim}")
    return flat.reshape(dim, dim)
