import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_density
from povm_shadows.paulis import I2, SX, SY, SZ, ketbra
from povm_shadows.povm import (
    BUILTIN_NAMES,
    LIMIT_RULE,
    Povm,
    SnapshotRule,
    TETRA_DIRECTIONS,
    builtin_povm,
    noise_adjoint_povm,
    snapshot_distribution,
    validate_povm,
)
from povm_shadows.channel import NoiseModel

KET0 = np.array([1.0, 0.0], dtype=complex)
KET1 = np.array([0.0, 1.0], dtype=complex)
KETP = np.array([1.0, 1.0], dtype=complex) / np.sqrt(2)
KETM = np.array([1.0, -1.0], dtype=complex) / np.sqrt(2)
KETL = np.array([1.0, 1.0j], dtype=complex) / np.sqrt(2)
KETR = np.array([1.0, -1.0j], dtype=complex) / np.sqrt(2)


# ---------------------------------------------------------------------------
# built-in definitions

def test_pauli6_elements():
    p = builtin_povm("pauli6")
    assert p.k == 6
    for a, ket in enumerate((KET0, KET1, KETP, KETM, KETL, KETR)):
        assert np.allclose(p.elements[a], ketbra(ket) / 3.0, atol=1e-15)
    assert np.max(np.abs(p.elements.sum(axis=0) - I2)) <= 1e-15


def test_pauli4_elements():
    p = builtin_povm("pauli4")
    assert p.k == 4
    assert np.allclose(p.elements[0], ketbra(KET0) / 3.0, atol=1e-15)
    assert np.allclose(p.elements[1], ketbra(KETP) / 3.0, atol=1e-15)
    assert np.allclose(p.elements[2], ketbra(KETL) / 3.0, atol=1e-15)
    # the remainder element restores completeness exactly by construction
    assert np.array_equal(p.elements.sum(axis=0), I2)
    # rank-2 remainder: eigenvalues (1 +- 1/sqrt(3))/2
    lam = p.eigenvalues[3]
    root3 = np.sqrt(3.0)
    assert abs(lam[0] - 0.5 * (1 + 1 / root3)) < 1e-12
    assert abs(lam[1] - 0.5 * (1 - 1 / root3)) < 1e-12
    # its snapshot points along -(1,1,1)/sqrt(3)
    psi = p.snapshots[3]
    bloch = [np.vdot(psi, s @ psi).real for s in (SX, SY, SZ)]
    assert np.allclose(bloch, -np.ones(3) / root3, atol=1e-12)


def test_tetra_elements():
    p = builtin_povm("tetra")
    assert p.k == 4
    for a, s in enumerate(TETRA_DIRECTIONS):
        want = 0.25 * (I2 + s[0] * SX + s[1] * SY + s[2] * SZ)
        assert np.allclose(p.elements[a], want, atol=1e-15)
    assert np.allclose(TETRA_DIRECTIONS[0], [0.0, 0.0, 1.0])
    assert np.allclose(TETRA_DIRECTIONS[1], [2 * np.sqrt(2) / 3, 0.0, -1.0 / 3.0])
    # regular tetrahedron: pairwise inner products -1/3
    g = TETRA_DIRECTIONS @ TETRA_DIRECTIONS.T
    assert np.allclose(g, -np.ones((4, 4)) / 3 + np.eye(4) * (1 + 1 / 3), atol=1e-12)


def test_unknown_builtin_rejected():
    with pytest.raises(ValueError, match="unknown POVM"):
        builtin_povm("pauli5")


# ---------------------------------------------------------------------------
# validation

def test_validate_builtins_clean():
    for name in BUILTIN_NAMES:
        report = validate_povm(builtin_povm(name))
        assert report.ok, f"{name}: {report}"


def test_validate_half_identities():
    p = Povm.from_elements("coin", np.array([I2 / 2, I2 / 2]))
    assert validate_povm(p).ok


def test_validate_double_identity():
    p = Povm.from_elements("bad", np.array([I2, I2]))
    report = validate_povm(p)
    names = dict(report.violations)
    assert abs(names["completeness"] - 1.0) <= 1e-12


def test_validate_negative_element():
    p = Povm.from_elements("neg", np.array([1.5 * I2, -0.5 * I2]))
    names = dict(validate_povm(p).violations)
    assert abs(names["positivity"] - 0.5) <= 1e-12


def test_validate_zero_element():
    p = Povm.from_elements("zero", np.array([I2, np.zeros((2, 2))]))
    assert "zero_element" in dict(validate_povm(p).violations)


def test_validate_non_hermitian():
    m = np.array([[0.5, 0.3], [0.0, 0.5]], dtype=complex)
    p = Povm.from_elements("nh", np.array([m, I2 - 0.5 * (m + m.conj().T)]))
    assert "hermiticity" in dict(validate_povm(p).violations)


def test_validate_misaligned_snapshot():
    base = builtin_povm("pauli6")
    snapshots = base.snapshots.copy()
    snapshots[[0, 1]] = snapshots[[1, 0]]  # swap |0> and |1>
    broken = Povm(base.name, base.elements, base.eigenvalues, base.eigenvectors,
                  snapshots)
    assert "snapshot_alignment" in dict(validate_povm(broken).violations)


def test_outcome_probabilities_normalized(rng):
    # sum_a tr(rho M_a) = 1 and each >= 0 for random density matrices
    for name in BUILTIN_NAMES:
        p = builtin_povm(name)
        for _ in range(200):
            rho = random_density(rng)
            probs = np.array([np.trace(rho @ m).real for m in p.elements])
            assert abs(probs.sum() - 1.0) < 1e-10
            assert probs.min() > -1e-10


# ---------------------------------------------------------------------------
# snapshot rules

def test_limit_rule_rank1():
    p = builtin_povm("pauli6")
    pairs = snapshot_distribution(p, 0, LIMIT_RULE)
    assert len(pairs) == 1
    v, w = pairs[0]
    assert w == 1.0
    assert abs(abs(np.vdot(v, KET0)) - 1.0) < 1e-12


def test_limit_rule_pauli4_remainder():
    p = builtin_povm("pauli4")
    pairs = snapshot_distribution(p, 3, LIMIT_RULE)
    assert len(pairs) == 1
    v, w = pairs[0]
    assert w == 1.0
    herm = p.elements[3]
    lam_top = 0.5 * (1 + 1 / np.sqrt(3))
    assert np.max(np.abs(herm @ v - lam_top * v)) < 1e-12


def test_finite_m_pauli4_remainder():
    # f(lam) = lam on eigenvalues (1 +- 1/sqrt(3))/2, normalized
    p = builtin_povm("pauli4")
    pairs = snapshot_distribution(p, 3, SnapshotRule(1.0))
    weights = sorted((w for _, w in pairs), reverse=True)
    assert abs(weights[0] - 0.7886751345948129) < 1e-12
    assert abs(weights[1] - 0.2113248654051871) < 1e-12


def test_rule_weights_sum_to_one():
    for name in BUILTIN_NAMES:
        p = builtin_povm(name)
        for rule in (SnapshotRule(0.5), SnapshotRule(1.0), SnapshotRule(2.0), LIMIT_RULE):
            for a in range(p.k):
                pairs = snapshot_distribution(p, a, rule)
                total = sum(w for _, w in pairs)
                assert abs(total - 1.0) < 1e-12
                assert all(w >= 0 for _, w in pairs)


def test_degenerate_top_split_uniformly():
    p = Povm.from_elements("coin", np.array([I2 / 2, I2 / 2]))
    pairs = snapshot_distribution(p, 0, LIMIT_RULE)
    assert len(pairs) == 2
    assert all(abs(w - 0.5) < 1e-15 for _, w in pairs)
    # the two top eigenvectors stay orthonormal
    v0, v1 = pairs[0][0], pairs[1][0]
    assert abs(np.vdot(v0, v1)) < 1e-12


def test_snapshot_distribution_zero_element():
    p = Povm.from_elements("zero", np.array([I2, np.zeros((2, 2))]))
    with pytest.raises(ValueError, match="zero element"):
        snapshot_distribution(p, 1)


def test_bad_exponent_rejected():
    with pytest.raises(ValueError):
        SnapshotRule(0.0)
    with pytest.raises(ValueError):
        SnapshotRule(-2.0)


# ---------------------------------------------------------------------------
# noise adjoint

def test_noise_adjoint_identity_channel():
    p = builtin_povm("pauli6")
    q = noise_adjoint_povm(p, NoiseModel.depolarizing(0.0))
    assert np.allclose(q.elements, p.elements, atol=1e-15)


def test_noise_adjoint_depolarizing_closed_form():
    # adjoint of E(rho) = (1-q) rho + q I/2 sends M to (1-q) M + q tr(M) I/2
    p = builtin_povm("tetra")
    q = 0.37
    adj = noise_adjoint_povm(p, NoiseModel.depolarizing(q))
    for a in range(p.k):
        want = (1 - q) * p.elements[a] + q * np.trace(p.elements[a]) * I2 / 2
        assert np.allclose(adj.elements[a], want, atol=1e-12)


def test_noise_adjoint_full_damping():
    # gamma=1 maps every state to |0>, so only the |0><0| component survives
    p = builtin_povm("pauli6")
    adj = noise_adjoint_povm(p, NoiseModel.amplitude_damping(1.0))
    for a in range(p.k):
        assert np.allclose(adj.elements[a], p.elements[a][0, 0] * I2, atol=1e-12)


def test_noise_adjoint_reproduces_noisy_statistics(rng):
    for name in BUILTIN_NAMES:
        p = builtin_povm(name)
        for noise in (NoiseModel.depolarizing(0.4), NoiseModel.amplitude_damping(0.25)):
            adj = noise_adjoint_povm(p, noise)
            for _ in range(20):
                rho = random_density(rng)
                noisy = noise.apply(rho)
                for a in range(p.k):
                    lhs = np.trace(noisy @ p.elements[a]).real
                    rhs = np.trace(rho @ adj.elements[a]).real
                    assert abs(lhs - rhs) < 1e-12


def test_noise_adjoint_stays_valid():
    for name in BUILTIN_NAMES:
        p = builtin_povm(name)
        for q in (0.0, 0.5, 1.0):
            assert validate_povm(noise_adjoint_povm(p, NoiseModel.depolarizing(q))).ok
        for g in (0.0, 0.45, 0.9):
            assert validate_povm(
                noise_adjoint_povm(p, NoiseModel.amplitude_damping(g))
            ).ok


def test_non_trace_preserving_noise_rejected():
    with pytest.raises(ValueError, match="trace preserving"):
        NoiseModel("broken", 0.0, (0.5 * I2,))


# ---------------------------------------------------------------------------
# serialization

def test_json_round_trip_bit_exact():
    for name in BUILTIN_NAMES:
        p = builtin_povm(name)
        q = Povm.from_json(p.to_json())
        assert q.name == p.name
        assert np.array_equal(q.elements, p.elements)
        assert np.array_equal(q.snapshots, p.snapshots)
        assert np.array_equal(q.eigenvalues, p.eigenvalues)


def test_json_round_trip_custom(rng):
    a = random_density(rng) * 0.8
    p = Povm.from_elements("custom", np.array([a, I2 - a]))
    q = Povm.from_json(p.to_json())
    assert np.array_equal(q.elements, p.elements)


def test_from_elements_bad_shape():
    with pytest.raises(ValueError, match="shape"):
        Povm.from_elements("bad", np.zeros((2, 3, 3)))


# ---------------------------------------------------------------------------
# property: random two-outcome POVMs validate clean

@st.composite
def two_outcome_povm(draw):
    entries = draw(
        st.lists(st.floats(-1, 1, allow_nan=False), min_size=8, max_size=8)
    )
    raw = np.array(entries[:4]).reshape(2, 2) + 1j * np.array(entries[4:]).reshape(2, 2)
    herm = 0.5 * (raw + raw.conj().T)
    w, v = np.linalg.eigh(herm)
    a = (v * np.clip(w, 0.0, 1.0)) @ v.conj().T  # 0 <= A <= I
    return np.array([a, I2 - a])


@settings(max_examples=60, deadline=None)
@given(two_outcome_povm())
def test_random_two_outcome_povms_validate(elements):
    p = Povm.from_elements("pair", elements)
    report = validate_povm(p, atol=1e-9)
    zero = any(np.max(np.abs(m)) <= 1e-9 for m in elements)
    if not zero:
        assert report.ok, str(report)
