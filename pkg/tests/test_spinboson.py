import math

import numpy as np
import pytest

import oracles
from skqaoa import exact, mps
from skqaoa import spinboson as sb
from skqaoa.gmatrix import Angles
from skqaoa.mps import TruncationPolicy

EXACT = TruncationPolicy(0.0)


def random_angles(p, seed, scale=1.0):
    return Angles.from_vector(np.random.default_rng(seed).uniform(-scale, scale, 2 * p))


def run_layers(angles, d, policy=EXACT):
    """Registry and L factor after every layer, using the public building blocks."""
    p = angles.p
    factor = sb.LFactor.start(p)
    registry = []
    columns = []
    for l in range(1, p + 1):
        alpha = np.zeros(p, complex)
        alpha[:l] = -1j * angles.gamma[l - 1] * factor.L[:l, l - 1]
        g, registry, _ = sb.apply_layer(registry, alpha, angles.beta[l - 1], policy, d=d)
        columns.append(g)
        factor = sb.grow_l(factor, g)
    return registry, factor, columns


def test_initial_state_overlaps():
    z_plus, plus = sb.initial_registry(3, 4)
    assert sb.spin_boson_overlap(plus, plus) == pytest.approx(1.0)
    assert abs(sb.spin_boson_overlap(plus, z_plus)) < 1e-15


def test_apply_z_involution_and_norm():
    _, plus = sb.initial_registry(2, 3)
    rng = np.random.default_rng(0)
    state = sb.SpinBosonState(oracles.random_tt(rng, 2, 3, [2]), oracles.random_tt(rng, 2, 3, [2]))
    twice = sb.apply_z(sb.apply_z(state))
    assert np.allclose(mps.to_dense(twice.psi1), mps.to_dense(state.psi1))
    assert sb.apply_z(state).norm_sq == pytest.approx(state.norm_sq, rel=1e-14)


def test_identity_layer_reproduces_previous_overlaps():
    a = random_angles(3, 1)
    p = 3
    factor = sb.LFactor.start(p)
    g1, reg, _ = sb.apply_layer([], np.zeros(p), a.beta[0], EXACT, d=5)
    factor = sb.grow_l(factor, g1)
    alpha = np.zeros(p, complex)
    alpha[:1] = -1j * a.gamma[0] * factor.L[:1, 0]
    g2, reg, _ = sb.apply_layer(reg, alpha, a.beta[1], EXACT)
    before = [sb.spin_boson_overlap(reg[i], reg[-2]) for i in range(len(reg) - 1)]
    g3, _, _ = sb.apply_layer(reg, np.zeros(p), 0.0, EXACT)
    assert np.allclose(g3, before, atol=1e-14)
    assert g3[-1] == pytest.approx(1.0)


@pytest.mark.parametrize("p,d", [(1, 6), (2, 4), (2, 8)])
def test_registry_matches_dense_oracle(p, d):
    a = random_angles(p, 3 + p)
    registry, _, _ = run_layers(a, d)
    _, gram, states = oracles.dense_spin_boson(a, d)
    ours = np.array([[sb.spin_boson_overlap(x, y) for y in registry] for x in registry])
    assert np.allclose(ours, gram, atol=1e-10)
    for x, ref in zip(registry, states):
        assert np.allclose(mps.to_dense(x.psi0), ref[0], atol=1e-10)
        assert np.allclose(mps.to_dense(x.psi1), ref[1], atol=1e-10)


def test_energy_matches_dense_oracle():
    a = random_angles(2, 11)
    nu, _ = sb.nu_mps(a, 6, EXACT)
    assert nu == pytest.approx(oracles.dense_spin_boson(a, 6)[0], abs=1e-12)


def test_grow_l_first_column_and_identity():
    f = sb.LFactor.start(3)
    assert f.L[0, 0] == 1 and f.size == 1
    for k in range(1, 4):
        f = sb.grow_l(f, np.zeros(k))
    assert np.allclose(f.L, np.eye(4))


def test_grow_l_matches_one_shot_cholesky():
    rng = np.random.default_rng(2)
    V = rng.normal(size=(6, 5)) + 1j * rng.normal(size=(6, 5))
    V /= np.linalg.norm(V, axis=0)
    G = V.conj().T @ V
    f = sb.LFactor.start(4)
    for k in range(1, 5):
        f = sb.grow_l(f, G[:k, k])
    assert np.allclose(f.gram, G, atol=1e-10)
    assert np.allclose(f.L, np.linalg.cholesky(G).conj().T, atol=1e-10)
    assert np.all(np.diag(f.L).real >= 0) and np.allclose(np.diag(f.L).imag, 0)


def test_grow_l_clamp_and_psd_loss():
    f = sb.LFactor.start(2)
    clamped = sb.grow_l(f, [1.0 + 5e-9])
    assert clamped.L[1, 1] == 0
    with pytest.raises(sb.PsdLossError):
        sb.grow_l(f, [1.0 + 1e-6])
    with pytest.raises(sb.PsdLossError, match="singular"):
        sb.grow_l(clamped, [0.1, 0.2])
    with pytest.raises(ValueError):
        sb.grow_l(f, [0.1, 0.2])


def test_zero_gamma_gives_zero():
    nu, _ = sb.nu_mps(Angles([0.0, 0.0], [0.3, 0.5]), 4)
    assert nu == 0.0


@pytest.mark.parametrize("p", [1, 2, 3, 4])
def test_matches_exact_at_moderate_angles(p):
    a = random_angles(p, 50 + p, scale=0.7)
    nu, diag = sb.nu_mps(a, 16, TruncationPolicy(1e-12))
    assert nu == pytest.approx(exact.nu_exact(a).nu, abs=1e-8)
    assert np.allclose(diag.gherm, diag.gherm.conj().T, atol=1e-10)


@pytest.mark.parametrize("p", [1, 2, 3, 4])
def test_overlap_matrix_equals_exact_corner(p):
    # <Psi_r|Psi_s> = G[r, -s] with the final Z-inserted state as index 0
    a = random_angles(p, 60 + p, scale=0.7)
    _, diag = sb.nu_mps(a, 16, TruncationPolicy(1e-12))
    G = exact.nu_exact(a).final
    idx = list(range(1, p + 1)) + [0]
    for i, r in enumerate(idx):
        for j, s in enumerate(idx):
            assert diag.gherm[i, j] == pytest.approx(G[r, -s], abs=1e-8)


def test_l_factor_reproduces_overlaps():
    a = random_angles(3, 8)
    registry, factor, _ = run_layers(a, 10)
    zs = registry[:-1]
    gram = np.array([[sb.spin_boson_overlap(x, y) for y in zs] for x in zs])
    assert np.allclose(factor.gram, gram, atol=1e-8)


def test_norm_leakage_bounded_by_discarded_weight():
    a = random_angles(5, 4)
    nu, diag = sb.nu_mps(a, 6, TruncationPolicy(1e-3))
    assert diag.discarded_weight > 0
    assert diag.norm_leakage <= diag.discarded_weight + 1e-12


def test_bond_cap_reported():
    a = random_angles(5, 4)
    _, diag = sb.nu_mps(a, 6, TruncationPolicy(0.0, max_bond=2))
    assert diag.cap_active and diag.max_bond <= 2


def test_absolute_cutoff_collapses_state():
    with pytest.raises(sb.ZeroNormError):
        sb.nu_mps(random_angles(2, 0), 8, TruncationPolicy(0.9, absolute=True))


def test_workers_do_not_change_result():
    a = random_angles(4, 12)
    one, _ = sb.nu_mps(a, 6, TruncationPolicy(1e-10))
    three, _ = sb.nu_mps(a, 6, TruncationPolicy(1e-10), workers=3)
    assert one == three


def test_profile_recorded():
    _, diag = sb.nu_mps(random_angles(3, 1), 4, record_profile=True)
    assert [row[0] for row in diag.bond_profile] == ["layer1", "layer2", "layer3"]
    assert all(len(row[1]) == 2 for row in diag.bond_profile)


def test_unsquared_energy_disagrees_with_exact():
    # the energy needs the overlaps squared; the linear form is a different number
    a = Angles([0.5], [math.pi / 8])
    _, diag = sb.nu_mps(a, 16, TruncationPolicy(1e-12))
    g = np.conj(diag.final_overlaps)
    linear = float(np.imag(np.sum(a.gamma * g)))
    assert abs(linear - exact.nu_exact(a).nu) > 1e-3
    assert sb.energy_from_overlaps(a.gamma, diag.final_overlaps) == pytest.approx(
        exact.nu_exact(a).nu, abs=1e-10)


def test_optimized_schedule_converges_in_fock_dimension():
    from skqaoa.cli import load_schedule

    angles = load_schedule(8)
    ref = exact.nu_exact(angles).nu
    policy = TruncationPolicy(1e-10)
    err = {d: abs(sb.nu_mps(angles, d, policy)[0] - ref) for d in (3, 5, 8)}
    assert err[5] / ref <= 1e-3
    assert err[3] > err[5] > err[8]


def test_consume_releases_old_states_without_changing_result():
    a = random_angles(3, 5)
    registry = sb.initial_registry(3, 5)
    alpha = np.array([-1j * a.gamma[0], 0, 0])
    g1, new1, _ = sb.apply_layer(list(registry), alpha, a.beta[0], EXACT)
    g2, new2, _ = sb.apply_layer(registry, alpha, a.beta[0], EXACT, consume=True)
    assert registry == [None, None]
    assert np.array_equal(g1, g2)
    for x, y in zip(new1, new2):
        assert sb.spin_boson_overlap(x, y) == pytest.approx(x.norm_sq, abs=1e-13)
