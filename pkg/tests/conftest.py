import numpy as np
import pytest

from wpt_estim.model import ChannelRealization, NetworkConfig
from wpt_estim.sim.geometry import draw_channels, sample_geometry, trial_rng
from wpt_estim.sim.spec import TABLE_I


def cn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def unit_instance(n_s, n_r, seed, **cfg_kw):
    """Unit-variance Rayleigh channels with no path loss."""
    rng = np.random.default_rng(seed)
    cfg = NetworkConfig(n_s=n_s, n_r=n_r, **cfg_kw)
    return cfg, ChannelRealization(G_down=cn(rng, n_s, n_r), H_up=cn(rng, n_r, n_s))


def physical_instance(n_s, n_r, seed, **overrides):
    """Physical default parameters with a random sensor layout."""
    rng = trial_rng(seed, 0)
    cfg = NetworkConfig(n_s=n_s, n_r=n_r, **{**TABLE_I, **overrides})
    return cfg, draw_channels(n_r, sample_geometry(n_s, rng), rng)


@pytest.fixture
def small_instance():
    return unit_instance(3, 3, 7)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import REPORT
    except ImportError:
        return
    if REPORT:
        terminalreporter.section("acceptance criteria")
        for line in REPORT:
            terminalreporter.write_line(line)
