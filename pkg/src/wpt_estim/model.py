"""System model: configuration, channels, designs and the BLUE formulas.

All quantities use a unit slot duration (T = 1) and the receive-filter
scale kappa = 1. Scalars are complex throughout; realness is never assumed.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
import warnings

import numpy as np
import scipy.linalg as sla

from .errors import DegenerateDesignError, InvalidArgumentError

__all__ = [
    "NetworkConfig",
    "ChannelRealization",
    "DesignPoint",
    "NoiseMatrices",
    "FilterStats",
    "harvested_energy",
    "available_transmit_power",
    "blue_mse",
    "optimal_filter",
    "inverse_mse",
    "filter_stats",
    "transmit_powers",
    "dbm_to_watts",
    "watts_to_dbm",
    "psd_check",
]

#: slot duration; fixed
SLOT = 1.0
#: eigenvalue tolerance (relative to the largest eigenvalue) for PSD checks
PSD_TOL = 1e-9
#: condition number above which linear solves warn
COND_WARN = 1e12


def _as_vector(x, n, name, dtype=float):
    arr = np.array(x, dtype=dtype)
    if arr.ndim == 0:
        arr = np.full(n, arr.item(), dtype=dtype)
    arr = arr.reshape(-1)
    if arr.shape[0] != n:
        raise InvalidArgumentError(f"{name} must have length {n}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"{name} has non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class NetworkConfig:
    """Immutable experiment parameters.

    Parameters
    ----------
    n_s, n_r : int
        Number of sensors and of FC antennas.
    P : float
        FC total transmit power budget in watts.
    source_var : float
        Variance of the scalar source.
    sensing_vars : array_like, shape (n_s,)
        Sensing-noise variances (diagonal of ``R_s``).
    fc_noise_vars : array_like, shape (n_r,)
        FC receiver-noise variances (diagonal of ``R_n``).
    harvest_eff : array_like, shape (n_s,)
        Energy-harvesting efficiencies in [0, 1].
    circuit_energy : array_like, shape (n_s,)
        Circuit energy consumed per slot at each sensor (joules).
    tau : float
        Energy-phase fraction of the slot. Only 1/2 is supported.
    """

    n_s: int
    n_r: int
    P: float = 1.0
    source_var: float = 1.0
    sensing_vars: np.ndarray = 0.1
    fc_noise_vars: np.ndarray = 1.0
    harvest_eff: np.ndarray = 1.0
    circuit_energy: np.ndarray = 0.0
    tau: float = 0.5

    def __post_init__(self):
        if int(self.n_s) != self.n_s or self.n_s < 1:
            raise InvalidArgumentError("n_s must be a positive integer")
        if int(self.n_r) != self.n_r or self.n_r < 1:
            raise InvalidArgumentError("n_r must be a positive integer")
        object.__setattr__(self, "n_s", int(self.n_s))
        object.__setattr__(self, "n_r", int(self.n_r))
        if not (np.isfinite(self.P) and self.P > 0):
            raise InvalidArgumentError("P must be positive")
        if not (np.isfinite(self.source_var) and self.source_var > 0):
            raise InvalidArgumentError("source_var must be positive")
        if self.tau != 0.5:
            raise InvalidArgumentError("only tau = 1/2 is supported")
        s = _as_vector(self.sensing_vars, self.n_s, "sensing_vars")
        n = _as_vector(self.fc_noise_vars, self.n_r, "fc_noise_vars")
        z = _as_vector(self.harvest_eff, self.n_s, "harvest_eff")
        e = _as_vector(self.circuit_energy, self.n_s, "circuit_energy")
        if np.any(s <= 0) or np.any(n <= 0):
            raise InvalidArgumentError("noise variances must be strictly positive")
        if np.any(z < 0) or np.any(z > 1):
            raise InvalidArgumentError("harvest_eff must lie in [0, 1]")
        if np.any(e < 0):
            raise InvalidArgumentError("circuit_energy must be nonnegative")
        object.__setattr__(self, "sensing_vars", s)
        object.__setattr__(self, "fc_noise_vars", n)
        object.__setattr__(self, "harvest_eff", z)
        object.__setattr__(self, "circuit_energy", e)

    @property
    def noise(self) -> "NoiseMatrices":
        return NoiseMatrices(np.diag(self.sensing_vars), np.diag(self.fc_noise_vars))

    @property
    def sensor_power_weights(self) -> np.ndarray:
        """``delta_theta^2 + sigma_k^2``: transmit power per unit |alpha_k|^2."""
        return self.source_var + self.sensing_vars

    def with_(self, **changes) -> "NetworkConfig":
        """Copy with some fields replaced (vector fields re-validated)."""
        if "n_s" in changes:
            for key in ("sensing_vars", "harvest_eff", "circuit_energy"):
                vec = np.asarray(changes.get(key, getattr(self, key)))
                if vec.ndim and vec.size != changes["n_s"]:
                    changes.setdefault(key, float(vec[0]))
        if "n_r" in changes:
            vec = np.asarray(changes.get("fc_noise_vars", self.fc_noise_vars))
            if vec.ndim and vec.size != changes["n_r"]:
                changes.setdefault("fc_noise_vars", float(vec[0]))
        return replace(self, **changes)


@dataclass(frozen=True)
class NoiseMatrices:
    R_s: np.ndarray
    R_n: np.ndarray

    def __post_init__(self):
        for name in ("R_s", "R_n"):
            mat = np.asarray(getattr(self, name), dtype=float)
            if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
                raise InvalidArgumentError(f"{name} must be square")
            if np.any(mat - np.diag(np.diag(mat))):
                raise InvalidArgumentError(f"{name} must be diagonal")
            if np.any(np.diag(mat) <= 0):
                raise InvalidArgumentError(f"{name} must have positive diagonal")


@dataclass(frozen=True)
class ChannelRealization:
    """Channels for one coherence slot.

    ``G_down[k]`` is ``g_k`` (FC -> sensor k, length n_r) and ``H_up`` is the
    n_r x n_s sensors -> FC matrix whose k-th column is ``h_k``.
    """

    G_down: np.ndarray
    H_up: np.ndarray

    def __post_init__(self):
        g = np.array(self.G_down, dtype=complex, ndmin=2)
        h = np.array(self.H_up, dtype=complex, ndmin=2)
        if not (np.all(np.isfinite(g)) and np.all(np.isfinite(h))):
            raise InvalidArgumentError("channels must be finite")
        g.setflags(write=False)
        h.setflags(write=False)
        object.__setattr__(self, "G_down", g)
        object.__setattr__(self, "H_up", h)

    @property
    def n_s(self) -> int:
        return self.G_down.shape[0]

    @property
    def n_r(self) -> int:
        return self.G_down.shape[1]

    def check(self, cfg: NetworkConfig) -> None:
        if self.G_down.shape != (cfg.n_s, cfg.n_r):
            raise InvalidArgumentError(
                f"G_down has shape {self.G_down.shape}, expected {(cfg.n_s, cfg.n_r)}")
        if self.H_up.shape != (cfg.n_r, cfg.n_s):
            raise InvalidArgumentError(
                f"H_up has shape {self.H_up.shape}, expected {(cfg.n_r, cfg.n_s)}")

    def downlink_gram(self, k: int) -> np.ndarray:
        g = self.G_down[k]
        return np.outer(g, g.conj())


@dataclass(frozen=True)
class DesignPoint:
    """Amplification ``a``, beam Gram matrix ``W`` and receive filter ``v``."""

    amp: np.ndarray
    beam_gram: np.ndarray
    filter: np.ndarray = field(default=None)

    def __post_init__(self):
        amp = np.asarray(self.amp, dtype=complex).reshape(-1)
        W = np.asarray(self.beam_gram, dtype=complex)
        if not np.all(np.isfinite(amp)):
            raise InvalidArgumentError("amp must be finite")
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise InvalidArgumentError("beam_gram must be square")
        psd_check(W, "beam_gram")
        object.__setattr__(self, "amp", amp)
        object.__setattr__(self, "beam_gram", 0.5 * (W + W.conj().T))
        if self.filter is not None:
            object.__setattr__(self, "filter", np.asarray(self.filter, dtype=complex).reshape(-1))

    def beams(self, rel_tol: float = 1e-9) -> np.ndarray:
        """Energy beams ``w_i`` as columns, one per numerically nonzero eigenvalue."""
        lam, U = np.linalg.eigh(self.beam_gram)
        keep = lam > rel_tol * max(lam.max(initial=0.0), 0.0)
        return U[:, keep] * np.sqrt(lam[keep])


@dataclass(frozen=True)
class FilterStats:
    """Per-filter quantities: ``f_k = v^H h_k``, ``Psi = F R_s F^H`` and ``c = v^H R_n v``."""

    f: np.ndarray
    psi: np.ndarray  # diagonal of Psi, real
    c: float

    def quotient(self, amp) -> float:
        """Inverse MSE ``|a^T f|^2 / (a^T Psi a^* + c)``."""
        amp = np.asarray(amp)
        num = abs(np.dot(amp, self.f)) ** 2
        return float(num / (np.dot(np.abs(amp) ** 2, self.psi) + self.c))


def psd_check(M, name="matrix", tol=PSD_TOL):
    M = np.asarray(M)
    if not np.allclose(M, M.conj().T, rtol=1e-8, atol=1e-12 * max(1.0, np.abs(M).max(initial=0.0))):
        raise InvalidArgumentError(f"{name} is not Hermitian")
    lam = np.linalg.eigvalsh(0.5 * (M + M.conj().T))
    scale = max(abs(lam).max(initial=0.0), np.finfo(float).tiny)
    if lam.size and lam.min() < -tol * scale:
        raise InvalidArgumentError(f"{name} is not PSD (min eigenvalue {lam.min():.3e})")


def _sensor_index(cfg, k):
    if not 0 <= k < cfg.n_s:
        raise InvalidArgumentError(f"sensor index {k} out of range")


def _check_gram(cfg, W):
    W = np.asarray(W, dtype=complex)
    if W.shape != (cfg.n_r, cfg.n_r):
        raise InvalidArgumentError(f"beam_gram must be {cfg.n_r}x{cfg.n_r}")
    psd_check(W, "beam_gram")
    return W


def harvested_energy(cfg: NetworkConfig, ch: ChannelRealization, beam_gram, k: int) -> float:
    """Energy collected by sensor ``k`` during the energy phase of one slot."""
    ch.check(cfg)
    _sensor_index(cfg, k)
    W = _check_gram(cfg, beam_gram)
    g = ch.G_down[k]
    return 0.5 * cfg.harvest_eff[k] * SLOT * float(np.real(g.conj() @ W @ g))


def available_transmit_power(cfg: NetworkConfig, ch: ChannelRealization, beam_gram, k: int) -> float:
    """Average power sensor ``k`` can spend in the forwarding phase.

    May be negative when the circuit energy exceeds what was harvested.
    """
    e = harvested_energy(cfg, ch, beam_gram, k)
    return 2.0 * (e - cfg.circuit_energy[k]) / SLOT


def transmit_powers(cfg: NetworkConfig, amp) -> np.ndarray:
    """Per-sensor forwarding power ``|alpha_k|^2 (delta^2 + sigma_k^2)``."""
    return np.abs(np.asarray(amp)) ** 2 * cfg.sensor_power_weights


def _solve_hpd(M, rhs):
    try:
        c, low = sla.cho_factor(M, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        return np.linalg.solve(M, rhs)
    d = np.abs(np.diag(c))
    if d.min() > 0 and (d.max() / d.min()) ** 2 > COND_WARN:
        warnings.warn("ill-conditioned covariance in filter solve", RuntimeWarning, stacklevel=3)
    return sla.cho_solve((c, low), rhs, check_finite=False)


def _total_covariance(cfg, ch, amp):
    Ha = ch.H_up * amp[None, :]
    return (Ha * cfg.sensing_vars[None, :]) @ Ha.conj().T + np.diag(cfg.fc_noise_vars)


def optimal_filter(cfg: NetworkConfig, ch: ChannelRealization, amp) -> np.ndarray:
    """Receive filter ``(H A R_s A^H H^H + R_n)^{-1} H a``."""
    ch.check(cfg)
    amp = _as_vector(amp, cfg.n_s, "amp", dtype=complex)
    return _solve_hpd(_total_covariance(cfg, ch, amp), ch.H_up @ amp)


def inverse_mse(cfg: NetworkConfig, ch: ChannelRealization, amp) -> float:
    """``a^H H^H (H A R_s A^H H^H + R_n)^{-1} H a``: inverse MSE under the optimal filter."""
    ch.check(cfg)
    amp = _as_vector(amp, cfg.n_s, "amp", dtype=complex)
    Ha = ch.H_up @ amp
    return float(np.real(Ha.conj() @ _solve_hpd(_total_covariance(cfg, ch, amp), Ha)))


def filter_stats(cfg: NetworkConfig, ch: ChannelRealization, v) -> FilterStats:
    v = _as_vector(v, cfg.n_r, "filter", dtype=complex)
    f = ch.H_up.T @ v.conj()
    psi = np.abs(f) ** 2 * cfg.sensing_vars
    c = float(np.real(np.vdot(v, cfg.fc_noise_vars * v)))
    return FilterStats(f=f, psi=psi, c=c)


def blue_mse(cfg: NetworkConfig, ch: ChannelRealization, design: DesignPoint) -> float:
    """MSE of the BLUE built on ``y = v^H z`` for the given design."""
    ch.check(cfg)
    if design.filter is None:
        raise InvalidArgumentError("design has no receive filter")
    amp = _as_vector(design.amp, cfg.n_s, "amp", dtype=complex)
    v = _as_vector(design.filter, cfg.n_r, "filter", dtype=complex)
    signal = abs(np.vdot(v, ch.H_up @ amp)) ** 2
    if signal == 0.0:
        raise DegenerateDesignError("v^H H a = 0: the source is not identifiable")
    noise = float(np.real(np.vdot(v, _total_covariance(cfg, ch, amp) @ v)))
    return noise / signal


def dbm_to_watts(x):
    return 10.0 ** ((np.asarray(x, dtype=float) - 30.0) / 10.0)


def watts_to_dbm(p):
    return 10.0 * np.log10(np.asarray(p, dtype=float)) + 30.0
