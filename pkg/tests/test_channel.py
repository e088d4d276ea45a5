import json

import numpy as np
import pytest

from conftest import random_density, random_hermitian
from povm_shadows.paulis import (
    AXES,
    I2,
    PAULI_BY_AXIS,
    SX,
    SY,
    SZ,
    bloch_decompose,
    ketbra,
)
from povm_shadows.povm import (
    BUILTIN_NAMES,
    LIMIT_RULE,
    Povm,
    SnapshotRule,
    builtin_povm,
    noise_adjoint_povm,
)
from povm_shadows.channel import (
    BlochSuperoperator,
    ChannelInversionError,
    FactorTable,
    InformationallyIncompleteError,
    MeasurementChannel,
    NoiseModel,
    adjoint_on_pauli,
    factor_table,
    measurement_channel,
    parse_noise,
)

NOISES = (None, NoiseModel.depolarizing(0.2), NoiseModel.amplitude_damping(0.3))


# ---------------------------------------------------------------------------
# Bloch superoperators

def test_identity_map():
    t = BlochSuperoperator.from_map(lambda x: x)
    assert np.allclose(t.matrix, np.eye(4), atol=1e-15)
    assert np.allclose(t.inverse().matrix, np.eye(4), atol=1e-15)


def test_depolarizing_shrink_matrix():
    t = BlochSuperoperator.from_map(lambda x: x / 3 + np.trace(x) * I2 / 3)
    assert np.allclose(t.matrix, np.diag([1.0, 1 / 3, 1 / 3, 1 / 3]), atol=1e-15)
    assert np.allclose(t.inverse().matrix, np.diag([1.0, 3.0, 3.0, 3.0]), atol=1e-12)


def test_from_map_reproduces_action(rng):
    noise = NoiseModel.amplitude_damping(0.35)
    t = noise.bloch
    for _ in range(25):
        x = random_hermitian(rng)
        assert np.max(np.abs(t.apply(x) - noise.apply(x))) < 1e-12


def test_amplitude_damping_bloch_matrix():
    g = 0.4
    t = NoiseModel.amplitude_damping(g).bloch.matrix
    want = np.zeros((4, 4))
    want[0, 0] = 1.0
    want[1, 1] = want[2, 2] = np.sqrt(1 - g)
    want[3, 3] = 1 - g
    want[3, 0] = g  # displacement toward |0>
    assert np.allclose(t, want, atol=1e-12)


def test_compose_is_matmul(rng):
    a = NoiseModel.depolarizing(0.3).bloch
    b = NoiseModel.amplitude_damping(0.2).bloch
    ab = a.compose(b)
    assert np.allclose(ab.matrix, a.matrix @ b.matrix, atol=1e-15)
    x = random_hermitian(rng)
    assert np.allclose(ab.apply(x), a.apply(b.apply(x)), atol=1e-12)


def test_adjoint_is_transpose(rng):
    t = NoiseModel.amplitude_damping(0.3).bloch
    # HS adjoint: tr(A E(B)) = tr(adj(E)(A) B) -- check on random pairs
    for _ in range(20):
        a, b = random_hermitian(rng), random_hermitian(rng)
        lhs = np.trace(a @ t.apply(b)).real
        rhs = np.trace(t.adjoint().apply(a) @ b).real
        assert abs(lhs - rhs) < 2e-12


def test_singular_inverse_names_directions():
    t = BlochSuperoperator(np.diag([1.0, 1.0, 0.0, 1.0]))
    with pytest.raises(ChannelInversionError, match="y") as err:
        t.inverse()
    assert err.value.null_directions == ("y",)


def test_superoperator_json_round_trip():
    t = NoiseModel.amplitude_damping(0.123456789012345).bloch
    u = BlochSuperoperator.from_json(t.to_json())
    assert np.array_equal(u.matrix, t.matrix)


# ---------------------------------------------------------------------------
# noise models

def test_depolarizing_fixed_point(rng):
    noise = NoiseModel.depolarizing(1.0)
    rho = random_density(rng)
    assert np.allclose(noise.apply(rho), I2 / 2, atol=1e-12)


def test_depolarizing_bounds():
    with pytest.raises(ValueError):
        NoiseModel.depolarizing(-0.1)
    with pytest.raises(ValueError):
        NoiseModel.depolarizing(1.2)
    with pytest.raises(ValueError):
        NoiseModel.amplitude_damping(1.5)


def test_parse_noise_round_trip():
    for noise in (NoiseModel.depolarizing(0.25), NoiseModel.amplitude_damping(0.6)):
        back = parse_noise(noise.descriptor)
        assert back.kind == noise.kind
        assert back.parameter == noise.parameter
    assert parse_noise("none") is None
    assert parse_noise(None) is None
    assert parse_noise("dep:0.2").parameter == 0.2
    assert parse_noise("ad:gamma=0.3").kind == "amplitude_damping"
    with pytest.raises(ValueError, match="unknown noise"):
        parse_noise("thermal:0.1")


# ---------------------------------------------------------------------------
# measurement channels

def test_pauli6_channel_is_depolarizing():
    ch = measurement_channel(builtin_povm("pauli6"))
    assert np.max(np.abs(ch.forward.matrix - np.diag([1, 1 / 3, 1 / 3, 1 / 3]))) < 1e-15
    assert np.max(np.abs(ch.inverse.matrix - np.diag([1.0, 3, 3, 3]))) < 1e-12


def test_pvm_is_informationally_incomplete():
    pvm = Povm.from_elements("z-pvm", np.array([ketbra(np.array([1.0, 0.0j])),
                                                ketbra(np.array([0.0j, 1.0]))]))
    with pytest.raises(InformationallyIncompleteError) as err:
        measurement_channel(pvm)
    assert set(err.value.null_directions) == {"x", "y"}


def test_forward_times_inverse_is_identity():
    for name in BUILTIN_NAMES:
        for noise in NOISES:
            ch = measurement_channel(builtin_povm(name), noise=noise)
            prod = ch.forward.matrix @ ch.inverse.matrix
            assert np.max(np.abs(prod - np.eye(4))) < 1e-10


def test_round_trip_on_random_states(rng):
    for name in BUILTIN_NAMES:
        ch = measurement_channel(builtin_povm(name))
        for _ in range(500):
            rho = random_density(rng)
            back = ch.apply_inverse(ch.apply(rho))
            x0a, ra = bloch_decompose(rho)
            x0b, rb = bloch_decompose(back)
            assert abs(x0a - x0b) + np.linalg.norm(ra - rb) < 1e-9


def test_single_qubit_shadow_unbiasedness(rng):
    # sum_a Pr(a) inv(M_E)(D_a) recovers rho exactly, with and without noise
    for name in BUILTIN_NAMES:
        povm = builtin_povm(name)
        for noise in NOISES:
            ch = measurement_channel(povm, noise=noise)
            shadows = ch.shadow_operators()
            for _ in range(10):
                rho = random_density(rng)
                probe = rho if noise is None else noise.apply(rho)
                probs = [np.trace(probe @ m).real for m in povm.elements]
                avg = sum(p * s for p, s in zip(probs, shadows))
                assert np.max(np.abs(avg - rho)) < 1e-10


def test_noise_composition_matrices():
    povm = builtin_povm("tetra")
    noise = NoiseModel.amplitude_damping(0.3)
    plain = measurement_channel(povm)
    noisy = measurement_channel(povm, noise=noise)
    assert np.allclose(noisy.forward.matrix, plain.forward.matrix @ noise.bloch.matrix,
                       atol=1e-13)
    assert np.allclose(
        noisy.inverse.matrix,
        noise.bloch.inverse().matrix @ plain.inverse.matrix,
        atol=1e-10,
    )


def test_amplitude_damping_inverse_action_table(rng):
    # inverse action: I -> I - (g/(1-g)) sz, sx,y -> 3 sx,y / sqrt(1-g),
    # sz -> 3 sz / (1-g); linear extension checked on random Hermitian input
    for g in (0.1, 0.3, 0.6):
        ch = measurement_channel(builtin_povm("pauli6"),
                                 noise=NoiseModel.amplitude_damping(g))
        assert np.allclose(ch.apply_inverse(I2), I2 - g / (1 - g) * SZ, atol=1e-12)
        assert np.allclose(ch.apply_inverse(SX), 3 / np.sqrt(1 - g) * SX, atol=1e-12)
        assert np.allclose(ch.apply_inverse(SY), 3 / np.sqrt(1 - g) * SY, atol=1e-12)
        assert np.allclose(ch.apply_inverse(SZ), 3 / (1 - g) * SZ, atol=1e-12)


def test_full_damping_channel_not_invertible():
    with pytest.raises(ChannelInversionError):
        measurement_channel(builtin_povm("pauli6"),
                            noise=NoiseModel.amplitude_damping(1.0))


def test_finite_m_channel_still_invertible():
    # finite-exponent rules mix in the lower eigenvector but stay IC
    ch = measurement_channel(builtin_povm("pauli4"), rule=SnapshotRule(2.0))
    prod = ch.forward.matrix @ ch.inverse.matrix
    assert np.max(np.abs(prod - np.eye(4))) < 1e-10


# ---------------------------------------------------------------------------
# adjoint action and factor tables

def test_adjoint_on_pauli_pauli6():
    ch = measurement_channel(builtin_povm("pauli6"))
    for axis in AXES:
        assert np.allclose(adjoint_on_pauli(ch, axis), 3 * PAULI_BY_AXIS[axis],
                           atol=1e-12)


def test_adjoint_on_pauli_pauli4():
    # (2 - sqrt(3)) I + (3 + sqrt(3)) P_axis - (3 - sqrt(3)) sum of the others
    ch = measurement_channel(builtin_povm("pauli4"))
    r3 = np.sqrt(3.0)
    for axis in AXES:
        others = sum(PAULI_BY_AXIS[b] for b in AXES if b != axis)
        want = (2 - r3) * I2 + (3 + r3) * PAULI_BY_AXIS[axis] - (3 - r3) * others
        assert np.allclose(adjoint_on_pauli(ch, axis), want, atol=1e-12)


def test_adjoint_on_pauli_identity_channel():
    povm = builtin_povm("pauli6")
    ident = BlochSuperoperator.identity()
    ch = MeasurementChannel(povm, LIMIT_RULE, None, ident, ident)
    for axis in AXES:
        assert np.allclose(adjoint_on_pauli(ch, axis), PAULI_BY_AXIS[axis], atol=1e-15)


def test_factor_table_pauli6():
    t = factor_table(measurement_channel(builtin_povm("pauli6")))
    assert np.allclose(t.factors("z"), [3, -3, 0, 0, 0, 0], atol=1e-12)
    assert np.allclose(t.factors("x"), [0, 0, 3, -3, 0, 0], atol=1e-12)
    assert np.allclose(t.factors("y"), [0, 0, 0, 0, 3, -3], atol=1e-12)


def test_factor_table_pauli4():
    t = factor_table(measurement_channel(builtin_povm("pauli4")))
    assert np.allclose(t.factors("z"), [5, -1, -1, -1], atol=1e-12)
    assert np.allclose(t.factors("x"), [-1, 5, -1, -1], atol=1e-12)
    assert np.allclose(t.factors("y"), [-1, -1, 5, -1], atol=1e-12)


def test_factor_table_tetra():
    t = factor_table(measurement_channel(builtin_povm("tetra")))
    from povm_shadows.povm import TETRA_DIRECTIONS

    for i, axis in enumerate(AXES):
        assert np.allclose(t.factors(axis), 3 * TETRA_DIRECTIONS[:, i], atol=1e-12)


def test_inverse_adjoint_is_unital():
    # the identity "factor" is always 1: adjoint of a TP map fixes I
    for name in BUILTIN_NAMES:
        ch = measurement_channel(builtin_povm(name))
        fixed = ch.inverse.adjoint().apply(I2)
        assert np.allclose(fixed, I2, atol=1e-12)


def test_factor_table_unbiasedness(rng):
    # sum_a Pr(a|rho) Phi[axis][a] = tr(rho sigma_axis)
    for name in BUILTIN_NAMES:
        povm = builtin_povm(name)
        for noise in NOISES:
            ch = measurement_channel(povm, noise=noise)
            t = factor_table(ch)
            probe_povm = povm if noise is None else noise_adjoint_povm(povm, noise)
            for _ in range(10):
                rho = random_density(rng)
                probs = np.array(
                    [np.trace(rho @ m).real for m in probe_povm.elements]
                )
                for axis in AXES:
                    lhs = float(probs @ t.factors(axis))
                    rhs = np.trace(rho @ PAULI_BY_AXIS[axis]).real
                    assert abs(lhs - rhs) < 1e-10


def test_factor_table_json_round_trip():
    t = factor_table(measurement_channel(builtin_povm("pauli4"),
                                         noise=NoiseModel.depolarizing(0.2)))
    u = FactorTable.from_json(t.to_json())
    assert u.povm_name == t.povm_name
    assert u.noise_descriptor == t.noise_descriptor
    assert np.array_equal(u.phi, t.phi)
    doc = json.loads(t.to_json())
    assert doc["axes"] == ["x", "y", "z"]
