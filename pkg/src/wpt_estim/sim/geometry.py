"""Sensor placement, path loss and Rayleigh channel draws."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidArgumentError
from ..model import ChannelRealization

#: half side of the square the sensors are dropped in (meters)
HALF_WIDTH = 10.0
#: sensors closer than this to the FC are redrawn (meters)
MIN_DISTANCE = 1.0
PL_INTERCEPT_DB = 31.7
PL_SLOPE_DB = 27.6


def path_loss_db(d):
    """Large-scale attenuation ``31.7 + 27.6 log10(d)`` in dB, ``d`` in meters."""
    d = np.asarray(d, dtype=float)
    if np.any(~np.isfinite(d)) or np.any(d <= 0):
        raise InvalidArgumentError("distances must be positive and finite")
    out = PL_INTERCEPT_DB + PL_SLOPE_DB * np.log10(d)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class GeometrySample:
    """Sensor positions relative to an FC at the origin."""

    positions: np.ndarray  # (n_s, 2) meters

    @property
    def distances(self) -> np.ndarray:
        return np.hypot(self.positions[:, 0], self.positions[:, 1])

    @property
    def gains(self) -> np.ndarray:
        """Linear power gain per link, ``10^(-PL/10)``."""
        return 10.0 ** (-path_loss_db(self.distances) / 10.0)


def sample_geometry(n_s: int, rng: np.random.Generator, half_width: float = HALF_WIDTH,
                    min_distance: float = MIN_DISTANCE) -> GeometrySample:
    """Drop ``n_s`` sensors uniformly in the square, redrawing any too close to the FC."""
    if n_s < 1:
        raise InvalidArgumentError("need at least one sensor")
    if not 0 < min_distance < half_width:
        raise InvalidArgumentError("min_distance must lie in (0, half_width)")
    pos = rng.uniform(-half_width, half_width, size=(n_s, 2))
    while True:
        bad = np.hypot(pos[:, 0], pos[:, 1]) < min_distance
        if not bad.any():
            return GeometrySample(pos)
        pos[bad] = rng.uniform(-half_width, half_width, size=(int(bad.sum()), 2))


def _cn(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def draw_channels(n_r: int, gains, rng: np.random.Generator) -> ChannelRealization:
    """Rayleigh fading scaled by per-sensor power gains.

    Downlink and uplink see the same large-scale gain for a sensor while
    their small-scale fading is drawn independently. ``gains`` may be a
    :class:`GeometrySample` or a vector of linear gains (ones for no path loss).
    """
    if isinstance(gains, GeometrySample):
        gains = gains.gains
    amp = np.sqrt(np.asarray(gains, dtype=float).reshape(-1))
    n_s = amp.size
    G = _cn(rng, (n_s, n_r)) * amp[:, None]
    H = _cn(rng, (n_r, n_s)) * amp[None, :]
    return ChannelRealization(G_down=G, H_up=H)


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Counter-based generator owned by one (seed, trial) pair."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(trial)])))
