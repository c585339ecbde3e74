import numpy as np
import pytest

from wpt_estim.baselines import (EnergyWeights, min_power_beams, min_sensor_power_amplification,
                                 suboptimal_p1, suboptimal_p2, weighted_energy_beam)
from wpt_estim.errors import InfeasibleError, InvalidArgumentError
from wpt_estim.joint import algorithm1, algorithm2
from wpt_estim.model import ChannelRealization, NetworkConfig, inverse_mse, optimal_filter

from conftest import cn, physical_instance, unit_instance


@pytest.mark.parametrize("beta", [[-1.0, 1.0], [0.0, 0.0], [np.nan, 1.0]])
def test_energy_weights_validation(beta):
    with pytest.raises(InvalidArgumentError):
        EnergyWeights(beta)


def test_energy_weights_length_checked():
    cfg, ch = unit_instance(3, 2, 0)
    with pytest.raises(InvalidArgumentError):
        weighted_energy_beam(cfg, ch, EnergyWeights([1.0, 1.0]))


@pytest.mark.parametrize("seed", range(5))
def test_weighted_beam_beats_random_directions(seed):
    cfg, ch = unit_instance(4, 4, seed)
    rng = np.random.default_rng(seed + 100)
    w = EnergyWeights(rng.uniform(0.1, 2.0, 4))
    eta = weighted_energy_beam(cfg, ch, w)
    assert np.linalg.norm(eta) == pytest.approx(1.0, rel=1e-14)

    def score(u):
        return float(np.sum(w.beta * np.abs(ch.G_down.conj() @ u) ** 2))

    best = score(eta)
    for _ in range(50):
        u = cn(rng, 4)
        assert score(u / np.linalg.norm(u)) <= best * (1 + 1e-12)
    design, _ = suboptimal_p1(cfg, ch, w)
    assert np.real(np.trace(design.beam_gram)) == pytest.approx(cfg.P, rel=1e-14)


def test_p1_single_sensor_is_optimal():
    cfg, ch = unit_instance(1, 3, 7, sensing_vars=0.1)
    _, mse = suboptimal_p1(cfg, ch)
    assert mse == pytest.approx(algorithm1(cfg, ch).mse, rel=1e-6)


def test_p1_orthogonal_channels_starve_low_priority_sensor():
    cfg = NetworkConfig(n_s=2, n_r=2, sensing_vars=0.1)
    ch = ChannelRealization(np.array([[1.0, 0.0], [0.0, 1.0]]), np.array([[1.0, 0.3], [0.2, 1.0]]))
    design, _ = suboptimal_p1(cfg, ch, EnergyWeights([1.0, 1e-3]))
    have = np.real(np.einsum("ki,ij,kj->k", ch.G_down.conj(), design.beam_gram, ch.G_down))
    assert have[1] == pytest.approx(0.0, abs=1e-14)
    assert abs(design.amp[1]) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("seed", range(6))
def test_p1_dominated_by_joint_design(seed):
    cfg, ch = physical_instance(5, 5, seed, sensing_vars=0.1)
    _, sub = suboptimal_p1(cfg, ch)
    opt = algorithm1(cfg, ch).mse
    assert sub >= opt * (1 - 1e-6)


def test_p1_design_is_feasible():
    cfg, ch = unit_instance(5, 3, 4, sensing_vars=0.1)
    design, mse = suboptimal_p1(cfg, ch)
    use = np.abs(design.amp) ** 2 * cfg.sensor_power_weights
    have = cfg.harvest_eff * np.real(np.einsum("ki,ij,kj->k", ch.G_down.conj(), design.beam_gram,
                                               ch.G_down))
    assert np.all(use <= have * (1 + 1e-10))
    assert mse == pytest.approx(1 / inverse_mse(cfg, ch, design.amp), rel=1e-12)


# ---------------------------------------------------------------- P2

def test_min_sensor_power_amplification_meets_target():
    cfg, ch = unit_instance(4, 3, 1, sensing_vars=0.1)
    v = optimal_filter(cfg, ch, np.ones(4))
    gamma = 5.0
    amp, ps = min_sensor_power_amplification(cfg, ch, v, gamma)
    assert np.sum(np.abs(amp) ** 2 * cfg.sensor_power_weights) == pytest.approx(ps, rel=1e-12)
    f = ch.H_up.T @ v.conj()
    psi = np.abs(f) ** 2 * cfg.sensing_vars
    c = float(np.real(np.vdot(v, v)))
    q = abs(amp @ f) ** 2 / (np.abs(amp) ** 2 @ psi + c)
    assert q == pytest.approx(gamma, rel=1e-10)
    # no cheaper amplification on random directions
    rng = np.random.default_rng(0)
    for _ in range(50):
        d = cn(rng, 4)
        # scale the direction to meet the target, then compare sensor power
        num = abs(d @ f) ** 2 - gamma * (np.abs(d) ** 2 @ psi)
        if num <= 0:
            continue
        s2 = gamma * c / num
        assert s2 * np.sum(np.abs(d) ** 2 * cfg.sensor_power_weights) >= ps * (1 - 1e-12)


def test_min_power_beams_single_sensor():
    cfg = NetworkConfig(n_s=1, n_r=2, sensing_vars=0.1, harvest_eff=0.5)
    g = np.array([1.0, 1j])
    ch = ChannelRealization(g[None, :], np.ones((2, 1)))
    W = min_power_beams(cfg, ch, np.array([1.0]))
    # matched beam: need 1.1 = 0.5 * |g|^2 tr(W)
    assert np.real(np.trace(W)) == pytest.approx(1.1 / (0.5 * 2.0), rel=1e-7)


def test_p2_single_sensor_is_optimal():
    cfg, ch = unit_instance(1, 2, 3, sensing_vars=0.1)
    _, p = suboptimal_p2(cfg, ch, 4.0)
    assert p == pytest.approx(algorithm2(cfg, ch, 4.0).fc_power, rel=1e-6)


def test_p2_vanishing_target():
    cfg, ch = unit_instance(4, 3, 2, sensing_vars=0.1)
    p = [suboptimal_p2(cfg, ch, g)[1] for g in (1.0, 1e-2, 1e-4)]
    assert p[0] > p[1] > p[2] > 0 and p[2] < 1e-3 * p[0]


def test_p2_infeasible_target():
    cfg, ch = unit_instance(4, 3, 2, sensing_vars=0.1)
    with pytest.raises(InfeasibleError):
        suboptimal_p2(cfg, ch, 40.0)


@pytest.mark.parametrize("gamma_inv", [0.02, 0.03, 0.04])
@pytest.mark.parametrize("seed", range(2))
def test_p2_dominated_by_joint_design(seed, gamma_inv):
    cfg, ch = physical_instance(10, 5, seed, sensing_vars=0.1)
    design, sub = suboptimal_p2(cfg, ch, 1 / gamma_inv)
    opt = algorithm2(cfg, ch, 1 / gamma_inv).fc_power
    assert sub >= opt * (1 - 1e-6)
    assert 1 / inverse_mse(cfg, ch, design.amp) == pytest.approx(gamma_inv, rel=1e-6)
