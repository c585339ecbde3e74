"""Two-phase suboptimal designs used as comparison schemes.

Both decouple the FC beams from the sensor amplification: the MSE baseline
fixes a single energy beam first and then optimizes the amplification under
the resulting budgets; the power baseline first finds the amplification that
needs the least total sensor power and then the cheapest beams delivering it.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import InfeasibleError, InvalidArgumentError, SolverError
from .joint import _scale_to_target, check_gamma_feasible, inverse_mse_grad, sensor_budgets
from .model import (ChannelRealization, DesignPoint, NetworkConfig, filter_stats, inverse_mse,
                    optimal_filter)
from .sdp import Block, Constraint, SdpProblem, solve
from .sdp.solver import DEFAULT_TOL, ToleranceSet
from .special import qcrq_maximize


@dataclass(frozen=True)
class EnergyWeights:
    """Priorities ``beta_k >= 0`` used to steer the single energy beam."""

    beta: np.ndarray

    def __post_init__(self):
        b = np.array(self.beta, dtype=float).reshape(-1)
        if np.any(b < 0) or not np.any(b > 0) or not np.all(np.isfinite(b)):
            raise InvalidArgumentError("energy weights must be nonnegative and not all zero")
        b.setflags(write=False)
        object.__setattr__(self, "beta", b)

    @classmethod
    def uniform(cls, n_s: int) -> "EnergyWeights":
        return cls(np.ones(n_s))


def weighted_energy_beam(cfg: NetworkConfig, ch: ChannelRealization, weights: EnergyWeights):
    """Unit direction maximizing ``sum_k beta_k |eta^H g_k|^2``."""
    if weights.beta.size != cfg.n_s:
        raise InvalidArgumentError(f"need {cfg.n_s} energy weights")
    G = ch.G_down
    S = (G.T * weights.beta) @ G.conj()
    _, U = np.linalg.eigh(0.5 * (S + S.conj().T))
    eta = U[:, -1]
    big = np.flatnonzero(np.abs(eta) > 1e-12)
    return eta * (abs(eta[big[0]]) / eta[big[0]])


def fixed_budget_ascent(cfg: NetworkConfig, ch: ChannelRealization, amp, budgets,
                        max_iter: int = 500):
    """Local inverse-MSE ascent over the amplification with per-sensor caps.

    Uses ``a_k = s_k sqrt(budget_k / D_k) exp(j phi_k)`` with ``0 <= s_k <= 1``.
    Returns ``amp`` unchanged unless the objective strictly improves.
    """
    rmax = np.sqrt(np.maximum(np.asarray(budgets, dtype=float), 0.0) / cfg.sensor_power_weights)
    n = cfg.n_s
    J0 = inverse_mse(cfg, ch, amp)
    s0 = np.where(rmax > 0, np.minimum(np.abs(amp) / np.where(rmax > 0, rmax, 1.0), 1.0), 0.0)

    def fun(x):
        e = np.exp(1j * x[n:])
        a = x[:n] * rmax * e
        J, g = inverse_mse_grad(cfg, ch, a)
        grad = np.concatenate([2.0 * np.real(g * e) * rmax, -2.0 * np.imag(g * a)])
        return -J / J0, -grad / J0

    res = minimize(fun, np.concatenate([s0, np.angle(amp)]), jac=True, method="L-BFGS-B",
                   bounds=[(0.0, 1.0)] * n + [(None, None)] * n,
                   options=dict(ftol=1e-15, gtol=1e-11, maxiter=max_iter))
    a = res.x[:n] * rmax * np.exp(1j * res.x[n:])
    return (a, inverse_mse(cfg, ch, a)) if inverse_mse(cfg, ch, a) > J0 else (amp, J0)


def suboptimal_p1(cfg: NetworkConfig, ch: ChannelRealization, weights: EnergyWeights = None,
                  rel_tol: float = 1e-9, max_iter: int = 200, tol: ToleranceSet = DEFAULT_TOL,
                  refine: bool = True):
    """Single weighted energy beam, then filter/amplification alternation.

    Returns ``(design, mse)``. With the beam fixed the per-sensor budgets are
    fixed too, and each amplification step is a globally solved QCRQ,
    followed (with ``refine``) by :func:`fixed_budget_ascent`.
    """
    ch.check(cfg)
    weights = EnergyWeights.uniform(cfg.n_s) if weights is None else weights
    eta = weighted_energy_beam(cfg, ch, weights)
    W = cfg.P * np.outer(eta, eta.conj())
    budgets = sensor_budgets(cfg, ch, W)
    if np.any(budgets < 0):
        raise InfeasibleError("the weighted beam leaves a sensor below its circuit energy")
    D = cfg.sensor_power_weights
    amp = np.sqrt(budgets / D).astype(complex)
    if not np.any(amp):
        raise InfeasibleError("the weighted beam delivers no energy")
    obj = inverse_mse(cfg, ch, amp)
    for _ in range(max_iter):
        st = filter_stats(cfg, ch, optimal_filter(cfg, ch, amp))
        res = qcrq_maximize(st, budgets, D, tol)
        a_new, new = res.amp, inverse_mse(cfg, ch, res.amp)
        if refine:
            a_new, new = fixed_budget_ascent(cfg, ch, a_new, budgets)
        if new < obj:
            break
        change = (new - obj) / obj
        amp, obj = a_new, new
        if change < rel_tol:
            break
    design = DesignPoint(amp, W, optimal_filter(cfg, ch, amp))
    return design, 1.0 / obj


def min_sensor_power_amplification(cfg, ch, v, gamma):
    """Least ``a^H D a`` meeting ``|a^T f|^2 = gamma (a^T Psi a^* + c)`` for filter ``v``.

    Returns ``(amp, total_sensor_power)``.
    """
    st = filter_stats(cfg, ch, v)
    dm = 1.0 / np.sqrt(cfg.sensor_power_weights)
    E = np.outer(st.f, st.f.conj()) - gamma * np.diag(st.psi)
    M = dm[:, None] * E * dm[None, :]
    lam, U = np.linalg.eigh(0.5 * (M + M.conj().T))
    if not lam[-1] > 0:
        raise InfeasibleError(f"gamma={gamma:g} is not reachable with this filter")
    u = U[:, -1]
    amp = np.sqrt(gamma * st.c / lam[-1]) * dm * np.conj(u)
    return amp, gamma * st.c / lam[-1]


def min_power_beams(cfg: NetworkConfig, ch: ChannelRealization, amp, tol: ToleranceSet = DEFAULT_TOL):
    """Cheapest beam Gram matrix giving each sensor the power it forwards."""
    need = np.abs(amp) ** 2 * cfg.sensor_power_weights + 2.0 * cfg.circuit_energy
    gain = cfg.harvest_eff * np.sum(np.abs(ch.G_down) ** 2, axis=1)
    active = np.flatnonzero(need > 0)
    if active.size == 0:
        return np.zeros((cfg.n_r, cfg.n_r), dtype=complex)
    if np.any(gain[active] == 0):
        raise InfeasibleError("a sensor that must transmit cannot harvest")
    # solve for W / scale so the unknown is O(1)
    scale = float(np.max(need[active] / gain[active]))
    cons = []
    for k in active:
        G = cfg.harvest_eff[k] * ch.downlink_gram(k) * (scale / need[k])
        cons.append(Constraint({"W": G}, ">=", 1.0, f"sensor {k}"))
    prob = SdpProblem([Block("W", cfg.n_r)], [], {"W": np.eye(cfg.n_r)}, "min", cons)
    sol = solve(prob, tol)
    if not sol.optimal:
        raise SolverError(f"beam design not solved: {sol.status}", sol)
    W = scale * sol.blocks["W"]
    W = 0.5 * (W + W.conj().T)
    # absorb the solver's feasibility tolerance
    have = cfg.harvest_eff * np.real(np.einsum("ki,ij,kj->k", ch.G_down.conj(), W, ch.G_down))
    grow = float(np.max(need[active] / have[active]))
    return W * max(grow, 1.0)


def suboptimal_p2(cfg: NetworkConfig, ch: ChannelRealization, gamma: float, init=None,
                  rel_tol: float = 1e-9, max_iter: int = 200, tol: ToleranceSet = DEFAULT_TOL):
    """Least total sensor power first, then the cheapest beams.

    Returns ``(design, fc_power)``; the design meets ``gamma`` with equality.
    """
    ch.check(cfg)
    chk = check_gamma_feasible(cfg, ch, gamma)
    if not chk.feasible:
        raise InfeasibleError(f"gamma={gamma:g} is not below the centralized bound {chk.bound:g}")
    amp = np.ones(cfg.n_s, dtype=complex) if init is None else np.asarray(init, dtype=complex)
    ps = np.inf
    for _ in range(max_iter):
        a_new, p_new = min_sensor_power_amplification(cfg, ch, optimal_filter(cfg, ch, amp), gamma)
        if p_new > ps:
            break
        change = (ps - p_new) / p_new if np.isfinite(ps) else np.inf
        amp, ps = a_new, p_new
        if change < rel_tol:
            break
    amp = _scale_to_target(cfg, ch, amp, gamma)
    W = min_power_beams(cfg, ch, amp, tol)
    design = DesignPoint(amp, W, optimal_filter(cfg, ch, amp))
    return design, float(np.real(np.trace(W)))
