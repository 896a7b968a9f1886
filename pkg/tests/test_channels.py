import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chanep import channels as ch
from chanep.errors import ChannelError

from conftest import closed_form_E

S3 = np.sqrt(3)


def test_identity_kraus_gives_identity_superop():
    assert np.allclose(ch.kraus_to_superop([ch.I2]), np.eye(4), atol=1e-15)


def test_e2_affine_form():
    a = ch.superop_to_affine(ch.e2())
    assert np.allclose(a.distortion, np.diag([0, 0.5, -0.5]), atol=1e-15)
    assert np.allclose(a.shift, 0, atol=1e-15)


def test_e1_affine_form():
    a = ch.superop_to_affine(ch.e1())
    assert np.allclose(a.distortion, 0.5 * np.array([[0, 0, 0], [0, 0, -1], [0, 1, 0]]), atol=1e-15)
    assert np.allclose(a.shift, 0, atol=1e-15)


def test_e1_affine_by_brute_force_bloch_action():
    # map each Pauli eigenstate through the Kraus sum and read off Bloch vectors
    K = ch.kraus_e1()
    cols = []
    for axis in range(3):
        r = np.zeros(3)
        r[axis] = 1.0
        rho = ch.density_from_bloch(r)
        out = sum(k @ rho @ k.conj().T for k in K)
        cols.append(ch.bloch_vector(out))
    assert np.allclose(np.array(cols).T, ch.distortion_of(ch.e1()), atol=1e-15)


def test_identity_affine():
    a = ch.superop_to_affine(ch.identity())
    assert np.allclose(a.distortion, np.eye(3)) and np.allclose(a.shift, 0)


def test_reset_affine():
    a = ch.superop_to_affine(ch.reset())
    assert np.allclose(a.distortion, 0) and np.allclose(a.shift, [0, 0, 1])


def test_reset_from_matrix_units():
    out = [ch.apply(ch.reset(), ch.density_from_bloch(r)) for r in np.eye(3)]
    for rho in out:
        assert np.allclose(rho, [[1, 0], [0, 0]], atol=1e-15)


def test_affine_identity_to_superop():
    assert np.allclose(ch.affine_to_superop(ch.AffineBloch(np.eye(3))), np.eye(4))


def test_e3_is_unitary_rotation():
    S = ch.e3()
    assert np.allclose(S.conj().T @ S, np.eye(4), atol=1e-14)


def test_e3_matrix():
    expect = np.array([[1, 1 + S3, 1 - S3], [1 - S3, 1, 1 + S3], [1 + S3, 1 - S3, 1]]) / 3
    assert np.allclose(ch.distortion_of(ch.e3()), expect, atol=1e-15)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=12, max_size=12))
def test_affine_round_trip(xs):
    a = ch.AffineBloch(np.reshape(xs[:9], (3, 3)), xs[9:])
    b = ch.superop_to_affine(ch.affine_to_superop(a))
    assert np.allclose(a.distortion, b.distortion, atol=1e-14)
    assert np.allclose(a.shift, b.shift, atol=1e-14)


def test_choi_identity_bell_projector():
    w = np.linalg.eigvalsh(ch.choi_of(ch.identity()))
    assert np.allclose(w, [0, 0, 0, 2], atol=1e-14)


def test_choi_e2_eigenvalues():
    w = np.linalg.eigvalsh(ch.choi_of(ch.e2()))
    assert np.allclose(w, [0, 0.5, 0.5, 1], atol=1e-14)


def test_choi_depolarizing():
    assert np.allclose(ch.choi_of(ch.depolarizing(0.0)), np.eye(4) / 2, atol=1e-15)


def test_choi_round_trip():
    S = ch.random_cptp(3)
    assert np.allclose(ch.superop_from_choi(ch.choi_of(S)), S, atol=1e-14)


@pytest.mark.parametrize("S", [ch.e1(), ch.e2(), ch.e3(), ch.identity(), ch.reset()])
def test_fixtures_cptp(S):
    rep = ch.check_cptp(S)
    assert rep.is_cp and rep.is_tp and rep.min_choi_eigenvalue >= -1e-10


def test_identity_min_choi_eigenvalue_zero():
    assert abs(ch.check_cptp(ch.identity()).min_choi_eigenvalue) <= 1e-10


def test_universal_not_like_is_not_cp():
    rep = ch.check_cptp(ch.affine_to_superop(ch.AffineBloch(np.diag([1.0, 1.0, -1.0]))))
    assert not rep.is_cp and rep.is_tp
    assert rep.min_choi_eigenvalue < -0.5


def test_non_tp_flagged():
    rep = ch.check_cptp(0.5 * np.eye(4))
    assert not rep.is_tp


@pytest.mark.parametrize("p", np.linspace(0, 1, 11))
def test_mix_matches_hand_written_interpolation(p):
    S = ch.mix([ch.e1(), ch.e2()], [1 - p, p])
    assert np.allclose(ch.distortion_of(S), closed_form_E(p), atol=1e-15)


def test_mix_single():
    S = ch.e3()
    assert np.allclose(ch.mix([S], [1.0]), S)


def test_mix_centroid_cptp():
    assert ch.check_cptp(ch.mix([ch.e1(), ch.e2(), ch.e3()], [1 / 3] * 3)).ok


@pytest.mark.parametrize("w", [[0.5, 0.6], [-0.1, 1.1], [1.0]])
def test_mix_rejects_bad_weights(w):
    with pytest.raises(ChannelError):
        ch.mix([ch.e1(), ch.e2()], w)


def test_apply_identity():
    rho = ch.density_from_bloch([0.3, -0.2, 0.5])
    assert np.allclose(ch.apply(ch.identity(), rho), rho)


def test_apply_e2_on_z_plus():
    out = ch.apply(ch.e2(), ch.density_from_bloch([0, 0, 1]))
    assert np.allclose(ch.bloch_vector(out), [0, 0, -0.5], atol=1e-15)


def test_apply_half_mixture_on_y():
    S = ch.interpolate(ch.e1(), ch.e2(), 0.5)
    out = ch.apply(S, ch.density_from_bloch([0, 1, 0]))
    assert np.allclose(ch.bloch_vector(out), [0, 0.25, 0.25], atol=1e-15)


def test_apply_rejects_bad_density():
    with pytest.raises(ChannelError):
        ch.apply(ch.identity(), np.diag([2.0, -1.0]))


def test_rotation_zero_angle():
    assert np.allclose(ch.rotation([0, 0, 1], 0.0), np.eye(4))


def test_rotation_z_pi():
    assert np.allclose(ch.distortion_of(ch.rotation([0, 0, 1], np.pi)), np.diag([-1, -1, 1]), atol=1e-15)


def test_builtin_unknown():
    with pytest.raises(ChannelError):
        ch.builtin("nope")


def test_random_cptp_deterministic():
    assert np.array_equal(ch.random_cptp(11), ch.random_cptp(11))


@pytest.mark.parametrize("seed", range(20))
def test_random_cptp_is_cptp(seed):
    assert ch.check_cptp(ch.random_cptp(seed)).ok


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=3, max_size=3).filter(lambda w: sum(w) > 1e-3))
def test_simplex_mixtures_cptp(w):
    w = np.array(w) / sum(w)
    assert ch.check_cptp(ch.mix([ch.e1(), ch.e2(), ch.e3()], w)).min_choi_eigenvalue >= -1e-10
