"""Reduced cases: asymptotic bound, single-antenna FC and a common harvester.

The single-antenna problems are solved globally (the receive filter is a
scalar and drops out). The common-harvester problems alternate the optimal
filter with a closed-form amplification and need no SDP at all.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.optimize import brentq

from .errors import (CertificateError, DegenerateDesignError, InfeasibleError,
                     InvalidArgumentError, SolverError)
from .joint import (RANK_TOL, _power_guess, _scale_to_target, build_sdr2, check_gamma_feasible,
                    recover_from_sdr2)
from .model import (ChannelRealization, FilterStats, NetworkConfig, filter_stats, inverse_mse,
                    optimal_filter, transmit_powers)
from .sdp import Block, Constraint, SdpProblem, extract_rank_one, solve
from .sdp.solver import DEFAULT_TOL, ToleranceSet


def centralized_mse_bound(cfg: NetworkConfig) -> float:
    """MSE with noiseless, unlimited forwarding: ``(sum_k 1/sigma_k^2)^{-1}``."""
    return 1.0 / float(np.sum(1.0 / cfg.sensing_vars))


# ---------------------------------------------------------------- QCRQ

@dataclass
class QcrqResult:
    amp: np.ndarray
    value: float
    rank_residual: float
    solution: object = None


def qcrq_maximize(stats: FilterStats, budgets, weights, tol: ToleranceSet = DEFAULT_TOL,
                  check: bool = True) -> QcrqResult:
    """Maximize ``|a^T f|^2 / (a^T Psi a^* + c)`` s.t. ``|a_k|^2 w_k <= budget_k``.

    Solved through the homogenized SDP in ``t^2 [a^*; 1][a^*; 1]^H``. Its
    amplification block is rank one at the optimum, so the result is a
    global optimum. Sensors with a zero budget are
    switched off.
    """
    budgets = np.asarray(budgets, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if np.any(budgets < 0):
        raise InfeasibleError("a sensor budget is negative; no amplification is feasible")
    on = budgets > 0
    amp = np.zeros(budgets.size, dtype=complex)
    if not np.any(on & (np.abs(stats.f) > 0)):
        raise DegenerateDesignError("no sensor can reach the fusion center")
    d = np.sqrt(budgets[on] / weights[on])
    fd = d * stats.f[on]
    psi = d ** 2 * stats.psi[on]
    n = fd.size
    t0 = float(psi.sum() + stats.c)
    Xi = np.zeros((n + 1, n + 1), dtype=complex)
    Xi[:n, :n] = np.outer(fd, fd.conj()) / t0
    C = np.diag(np.append(psi, stats.c)) / t0
    cons = [Constraint({"Z": C}, "==", 1.0, "normalization")]
    for k in range(n):
        E = np.zeros((n + 1, n + 1))
        E[k, k], E[n, n] = 1.0, -1.0
        cons.append(Constraint({"Z": E}, "<=", 0.0, f"sensor {k}"))
    prob = SdpProblem([Block("Z", n + 1)], [], {"Z": Xi}, "max", cons, dict(kind="qcrq", d=d))
    sol = solve(prob, tol)
    if not sol.optimal:
        raise SolverError(f"QCRQ relaxation not solved: {sol.status}", sol)
    # the homogenizing coordinate is uncoupled from the amplification block,
    # so only the leading block is rank one
    Z = sol.blocks["Z"]
    q, res = extract_rank_one(Z[:n, :n])
    if check and res > RANK_TOL:
        raise CertificateError(f"QCRQ relaxation is not rank one (residual {res:.2e})")
    tt = float(np.real(Z[n, n]))
    if not tt > 0:
        raise CertificateError("homogenizing coordinate vanished")
    amp[on] = d * np.conj(q) / np.sqrt(tt)
    # clip rounding above the budgets
    amp[on] *= np.minimum(1.0, 1.0 / np.maximum(np.abs(amp[on]) / d, 1e-300))
    return QcrqResult(amp, stats.quotient(amp), res, sol)


def _single_antenna(cfg, ch):
    if cfg.n_r != 1:
        raise InvalidArgumentError("single-antenna solver needs n_r = 1")
    ch.check(cfg)
    if not np.any(ch.H_up):
        raise DegenerateDesignError("uplink channel is zero")


def single_antenna_mse_min(cfg: NetworkConfig, ch: ChannelRealization,
                           tol: ToleranceSet = DEFAULT_TOL):
    """Globally optimal amplification for a single-antenna FC.

    Returns ``(amp, mse)``. The FC puts its whole budget ``P`` into the
    single energy beam; each sensor can then spend at most
    ``zeta_k P |g_k|^2 - 2 E_k``.
    """
    _single_antenna(cfg, ch)
    stats = filter_stats(cfg, ch, np.ones(1))
    budgets = cfg.harvest_eff * cfg.P * np.abs(ch.G_down[:, 0]) ** 2 - 2.0 * cfg.circuit_energy
    res = qcrq_maximize(stats, budgets, cfg.sensor_power_weights, tol)
    return res.amp, 1.0 / inverse_mse(cfg, ch, res.amp)


def single_antenna_power_min(cfg: NetworkConfig, ch: ChannelRealization, gamma: float,
                             tol: ToleranceSet = DEFAULT_TOL):
    """Minimum FC power meeting inverse MSE ``gamma`` with a single antenna.

    Returns ``(amp, P)``. The relaxation over the amplification outer product
    and the scalar power is tight; the amplification block is checked to be
    rank one.
    """
    _single_antenna(cfg, ch)
    stats = filter_stats(cfg, ch, np.ones(1))
    live = np.abs(stats.f) > 0
    bound = float(np.sum(1.0 / cfg.sensing_vars[live]))
    if not (check_gamma_feasible(cfg, ch, gamma).feasible and gamma < bound):
        raise InfeasibleError(f"gamma={gamma:g} cannot be reached (bound {bound:g})")
    P_ref = _power_guess(cfg, ch, np.ones(cfg.n_s, dtype=complex), gamma)
    for _ in range(2):
        sol = solve(build_sdr2(cfg, ch, np.ones(1), gamma, P_ref), tol)
        if not sol.optimal:
            raise SolverError(f"power relaxation not solved: {sol.status}", sol)
        P = float(sol.objective)
        if 1e-2 < P / P_ref < 1e2:
            break
        P_ref = P
    amp, _, _ = recover_from_sdr2(sol)
    # the relaxation meets the target with equality; trim rounding, then
    # report the power the returned amplification actually needs
    amp = _scale_to_target(cfg, ch, amp, gamma)
    gain = cfg.harvest_eff * np.abs(ch.G_down[:, 0]) ** 2
    need = transmit_powers(cfg, amp) + 2.0 * cfg.circuit_energy
    live = need > 0
    if np.any(gain[live] == 0):
        raise InfeasibleError("a sensor that must transmit cannot harvest")
    return amp, float(np.max(need[live] / gain[live]))


# ---------------------------------------------------------------- common harvester

@dataclass(frozen=True)
class CommonHarvesterConfig:
    """A shared single-antenna harvester feeding all sensors.

    Parameters
    ----------
    network : NetworkConfig
    h_e : array_like, shape (n_r,)
        FC -> harvester channel.
    harvest_eff : float
        Efficiency of the shared harvester.
    circuit_energy : float
        Energy the shared front end consumes per slot.
    """

    network: NetworkConfig
    h_e: np.ndarray
    harvest_eff: float = 1.0
    circuit_energy: float = 0.0

    def __post_init__(self):
        h = np.array(self.h_e, dtype=complex).reshape(-1)
        if h.size != self.network.n_r:
            raise InvalidArgumentError(f"h_e must have length {self.network.n_r}")
        if not np.any(h):
            raise InvalidArgumentError("h_e must be nonzero")
        if not 0 < self.harvest_eff <= 1:
            raise InvalidArgumentError("harvest_eff must lie in (0, 1]")
        h.setflags(write=False)
        object.__setattr__(self, "h_e", h)

    @property
    def D(self) -> np.ndarray:
        """Diagonal of ``D``: forwarding power per unit ``|alpha_k|^2``."""
        return self.network.sensor_power_weights

    def budget(self, P: float) -> float:
        """Total forwarding power available to the sensors at FC power ``P``."""
        return self.harvest_eff * P * float(np.sum(np.abs(self.h_e) ** 2)) - 2.0 * self.circuit_energy

    def beam(self, P: float) -> np.ndarray:
        """Matched energy beam ``sqrt(P) h_e / ||h_e||``."""
        return np.sqrt(P) * self.h_e / np.linalg.norm(self.h_e)


@dataclass
class CommonHarvesterResult:
    amp: np.ndarray
    beam: np.ndarray
    filter: np.ndarray
    mse: float
    power: float
    objectives: List[float] = field(default_factory=list)
    converged: bool = False

    @property
    def iterations(self) -> int:
        return len(self.objectives)


def closed_form_amplification(stats: FilterStats, D, budget: float):
    """Best amplification for a fixed filter under ``a^H D a = budget``.

    Returns ``(amp, value)`` with ``value = f^H Y^{-1} f`` and
    ``Y = Psi + (c / budget) D`` (diagonal).
    """
    if not np.any(stats.f):
        raise DegenerateDesignError("filter output carries no signal (f = 0)")
    if not budget > 0:
        raise InfeasibleError("the shared harvester collects no forwarding power")
    y = stats.psi + (stats.c / budget) * np.asarray(D)
    yf = stats.f.conj() / y
    amp = np.sqrt(budget / float(np.sum(np.abs(yf) ** 2 * D))) * yf
    return amp, float(np.sum(np.abs(stats.f) ** 2 / y))


def _ch_start(hc, ch, init, budget):
    cfg = hc.network
    if init is None:
        return np.full(cfg.n_s, np.sqrt(budget / float(np.sum(hc.D))), dtype=complex)
    a = np.asarray(init, dtype=complex).reshape(-1)
    if a.size != cfg.n_s:
        raise InvalidArgumentError(f"init must have length {cfg.n_s}")
    return a


def common_harvester_mse_min(hc: CommonHarvesterConfig, ch: ChannelRealization, init=None,
                             rel_tol: float = 1e-13, max_iter: int = 5000,
                             P: Optional[float] = None) -> CommonHarvesterResult:
    """Alternate the optimal filter and the closed-form amplification.

    The sum-power constraint ``a^H D a = budget(P)`` holds at every iterate.
    ``P`` overrides the FC budget of ``hc.network``.
    """
    cfg = hc.network
    ch.check(cfg)
    P = cfg.P if P is None else float(P)
    b = hc.budget(P)
    if not b > 0:
        raise InfeasibleError("the shared harvester collects no forwarding power")
    a = _ch_start(hc, ch, init, b)
    a = a * np.sqrt(b / float(np.sum(np.abs(a) ** 2 * hc.D)))
    res = CommonHarvesterResult(a, hc.beam(P), None, np.nan, P)
    prev = inverse_mse(cfg, ch, a)
    for _ in range(max_iter):
        v = optimal_filter(cfg, ch, a)
        a_new, val = closed_form_amplification(filter_stats(cfg, ch, v), hc.D, b)
        new = inverse_mse(cfg, ch, a_new)
        if new < prev:
            res.converged = True
            break
        a, change, prev = a_new, (new - prev) / prev, new
        res.objectives.append(new)
        if change < rel_tol:
            res.converged = True
            break
    res.amp = a
    res.filter = optimal_filter(cfg, ch, a)
    res.mse = 1.0 / prev
    return res


def common_harvester_power_min(hc: CommonHarvesterConfig, ch: ChannelRealization, gamma: float,
                               init=None, rel_tol: float = 1e-10, max_iter: int = 5000
                               ) -> CommonHarvesterResult:
    """Minimum FC power for inverse MSE ``gamma`` with a shared harvester.

    Inverts the trade-off ``P -> 1 / mse(P)`` traced by
    :func:`common_harvester_mse_min` from the same starting amplification,
    so ``mse(P(mse))`` recovers the target whenever both calls share
    ``init``. The root is bracketed from below at 1e-12 W and from above by
    doubling from 1 W, then refined to ``rel_tol`` relative in ``P``.
    ``max_iter`` bounds each inner alternation.
    """
    cfg = hc.network
    ch.check(cfg)
    chk = check_gamma_feasible(cfg, ch, gamma)
    if not chk.feasible:
        raise InfeasibleError(f"gamma={gamma:g} is not below the centralized bound {chk.bound:g}")
    cache = {}

    def run(P):
        if P not in cache:
            try:
                cache[P] = common_harvester_mse_min(hc, ch, init=init, P=P, max_iter=max_iter)
            except InfeasibleError:
                cache[P] = None  # nothing left after the circuit energy
        return cache[P]

    def excess(logP):
        r = run(float(np.exp(logP)))
        return (0.0 if r is None else 1.0 / r.mse) - gamma

    lo, hi = np.log(1e-12), 0.0
    while excess(lo) > 0:
        lo -= np.log(1e3)
        if lo < np.log(1e-300):
            raise SolverError(f"gamma={gamma:g} is met at every representable power")
    while excess(hi) < 0:
        hi += np.log(2.0)
        if hi > np.log(1e30):
            raise InfeasibleError(f"gamma={gamma:g} is not reached at any finite power")
    logP = brentq(excess, lo, hi, xtol=rel_tol, rtol=4 * np.finfo(float).eps, maxiter=500)
    P = float(np.exp(logP))
    res = run(P)
    if res is None:
        raise SolverError("power search ended where no forwarding power is left")
    res.power = P
    res.beam = hc.beam(P)
    return res


def tradeoff_curve(hc: CommonHarvesterConfig, ch: ChannelRealization, P_grid, init=None):
    """``[(P, mse)]`` along an ascending power grid (warm-started, so monotone)."""
    P_grid = np.asarray(P_grid, dtype=float)
    if P_grid.ndim != 1 or P_grid.size == 0 or np.any(P_grid <= 0) or np.any(np.diff(P_grid) <= 0):
        raise InvalidArgumentError("P_grid must be positive and strictly ascending")
    out = []
    a = init
    for P in P_grid:
        res = common_harvester_mse_min(hc, ch, init=a, P=P)
        out.append((float(P), res.mse))
        a = res.amp
    return out
