"""Alternating design of amplification, energy beams and receive filter.

Two problems are handled for a multi-antenna fusion center:

* MSE minimization under the FC power budget (``algorithm1``), where each
  step fixes the receive filter and solves the relaxed linear-fractional
  program in Charnes-Cooper form;
* FC power minimization under an inverse-MSE target ``gamma``
  (``algorithm2``).

Both relaxations are built in a scaled form so that the interior-point
solver sees O(1) data whatever the path loss. The scaling is recorded in
``problem.meta`` and undone by the recovery functions.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional

import numpy as np
from scipy.optimize import brentq, minimize

from .errors import CertificateError, InfeasibleError, InvalidArgumentError, SolverError
from .model import (ChannelRealization, DesignPoint, NetworkConfig, _solve_hpd,
                    _total_covariance, filter_stats, inverse_mse, optimal_filter, transmit_powers)
from .sdp import Block, Constraint, SdpProblem, SdpSolution, extract_rank_one, solve
from .sdp.solver import DEFAULT_TOL, ToleranceSet

RANK_TOL = 1e-4
W_RANK_TOL = 1e-6
# relative slack above which a sensor's causal constraint counts as inactive
INACTIVE_TOL = 1e-6


@dataclass(frozen=True)
class StoppingRule:
    """Outer-loop termination: relative objective change or iteration cap."""

    rel_tol: float = 1e-6
    max_iter: int = 50

    def __post_init__(self):
        if self.max_iter < 1:
            raise InvalidArgumentError("max_iter must be at least 1")


@dataclass
class IterationRecord:
    iteration: int
    objective: float
    mse: float
    status: str
    rank_residual: float = 0.0
    accepted: bool = True


@dataclass
class RunTrace:
    """Outcome of one alternating run.

    ``records[0]`` describes the initial point (``algorithm1``) or the first
    solve (``algorithm2``). ``objective`` is the inverse MSE for ``algorithm1``
    and the FC transmit power ``tr W`` for ``algorithm2``.
    """

    algorithm: str
    records: List[IterationRecord] = field(default_factory=list)
    converged: bool = False
    status: str = "optimal"
    design: Optional[DesignPoint] = None
    mse: float = float("nan")
    fc_power: float = float("nan")
    harvested_power: Optional[np.ndarray] = None
    transmit_power: Optional[np.ndarray] = None
    last_solution: Optional[SdpSolution] = None

    @property
    def iterations(self) -> int:
        return max(len(self.records) - (1 if self.algorithm == "mse-min" else 0), 0)

    @property
    def objectives(self) -> np.ndarray:
        return np.array([r.objective for r in self.records])


class GammaCheck(NamedTuple):
    feasible: bool
    margin: float
    bound: float


@dataclass
class CertificateReport:
    """Structural checks on an optimal relaxation.

    Multipliers are expressed for the unscaled relaxation: ``nu`` for the
    normalization equality (MSE problem only), ``lambdas`` for the per-sensor
    rows and ``beta`` for the power row (MSE problem) or the target equality
    (power problem; reported with the sign of the power sensitivity).
    ``complementarity`` is the largest per-block ``|<X, Z>|`` divided by the
    objective magnitude.
    """

    which: str
    nu: Optional[float]
    lambdas: np.ndarray
    beta: float
    w_rank: int
    w_rank_bound: int
    q_rank_residual: float
    complementarity: float
    dual_min_eig: float
    gap: float
    power_tightness: Optional[float]
    inactive_sensors: List[int]

    @property
    def ok(self) -> bool:
        good = (self.beta > 0 and self.w_rank <= self.w_rank_bound
                and self.q_rank_residual <= RANK_TOL)
        if self.nu is not None:
            good = good and self.nu > 0
        return bool(good)


# ---------------------------------------------------------------- scaling

def _scaling(cfg: NetworkConfig, ch: ChannelRealization, P_ref: float):
    D = cfg.sensor_power_weights
    gn2 = np.sum(np.abs(ch.G_down) ** 2, axis=1)
    budget = cfg.harvest_eff * P_ref * gn2
    d = np.sqrt(budget / D)
    d[d == 0] = 1.0
    s = D * d ** 2
    ghat = ch.G_down / np.where(gn2 > 0, np.sqrt(gn2), 1.0)[:, None]
    return d, s, ghat


def _sensor_rows(cfg, d, s, ghat, extra_scalar=None):
    """Scaled causal constraints ``Q_kk - tr(g g^H W) (+ e_k eta) <= rhs``."""
    n_s, n_r = cfg.n_s, cfg.n_r
    rows = []
    # a sensor that cannot harvest keeps its row in units of D_k
    eff = cfg.harvest_eff * np.sum(np.abs(ghat) ** 2, axis=1)
    for k in range(n_s):
        E = np.zeros((n_s, n_s))
        E[k, k] = 1.0
        coeffs = {"Q": E, "W": -np.outer(ghat[k], ghat[k].conj()) * (eff[k] > 0)}
        e2 = 2.0 * cfg.circuit_energy[k] / s[k]
        if extra_scalar is not None:
            if e2:
                coeffs[extra_scalar] = e2
            rows.append(Constraint(coeffs, "<=", 0.0, f"sensor {k}"))
        else:
            rows.append(Constraint(coeffs, "<=", -e2, f"sensor {k}"))
    return rows


def _check_filter(cfg, v):
    v = np.asarray(v, dtype=complex).reshape(-1)
    if v.size != cfg.n_r:
        raise InvalidArgumentError(f"filter must have length {cfg.n_r}")
    if not np.any(v):
        raise InvalidArgumentError("filter must be nonzero")
    return v


def build_sdr1(cfg: NetworkConfig, ch: ChannelRealization, v) -> SdpProblem:
    """Relaxed MSE-minimization step for a fixed receive filter.

    Variables are the scaled ``Q`` (amplification outer product), ``W``
    (beam Gram matrix) and ``eta`` (Charnes-Cooper scalar). The objective
    value equals the inverse MSE ``|a^T f|^2 / (a^T Psi a^* + c)`` of the
    recovered design under the filter ``v``.
    """
    ch.check(cfg)
    v = _check_filter(cfg, v)
    st = filter_stats(cfg, ch, v)
    d, s, ghat = _scaling(cfg, ch, cfg.P)
    fd = d * st.f
    psi_hat = d ** 2 * st.psi
    t = float(psi_hat.sum() + st.c)
    Sigma = np.outer(fd, fd.conj()) / t
    objective = {"Q": Sigma}
    cons = [Constraint({"Q": np.diag(psi_hat / t), "eta": st.c / t}, "==", 1.0, "normalization")]
    cons += _sensor_rows(cfg, d, s, ghat, extra_scalar="eta")
    cons.append(Constraint({"W": np.eye(cfg.n_r), "eta": -1.0}, "<=", 0.0, "total power"))
    meta = dict(kind="sdr1", d=d, s=s, t=t, P=cfg.P, stats=st, filter=v)
    return SdpProblem([Block("Q", cfg.n_s), Block("W", cfg.n_r)], ["eta"], objective, "max",
                      cons, meta)


def _amp_from_q(Qt, d, scale, check=True):
    q, res = extract_rank_one(Qt)
    if check and res > RANK_TOL:
        raise CertificateError(f"relaxed amplification matrix is not rank one (residual {res:.2e})")
    return np.conj(d * q) / np.sqrt(scale), res


def recover_from_sdr1(sol: SdpSolution, check: bool = True):
    """Map an optimal relaxed solution back to ``(amp, beam_gram, residual)``."""
    meta = sol.problem.meta
    if meta.get("kind") != "sdr1":
        raise InvalidArgumentError("solution does not come from build_sdr1")
    if not sol.optimal:
        raise SolverError(f"relaxation not solved: {sol.status}", sol)
    eta = sol.scalars["eta"]
    if not eta > 0:
        raise CertificateError("Charnes-Cooper scalar is not positive")
    amp, res = _amp_from_q(sol.blocks["Q"], meta["d"], eta, check)
    W = meta["P"] * sol.blocks["W"] / eta
    return amp, 0.5 * (W + W.conj().T), res


def build_sdr2(cfg: NetworkConfig, ch: ChannelRealization, v, gamma: float,
               P_ref: Optional[float] = None) -> SdpProblem:
    """Relaxed FC-power minimization step for a fixed receive filter.

    The inverse-MSE requirement is imposed with equality. The objective
    value is the FC transmit power ``tr W`` in watts.

    Parameters
    ----------
    P_ref : float, optional
        Power scale used to condition the problem; a rough guess of the
        optimum (within a few orders of magnitude) is enough. Defaults to
        ``cfg.P``.
    """
    ch.check(cfg)
    v = _check_filter(cfg, v)
    if not gamma > 0:
        raise InvalidArgumentError("gamma must be positive")
    st = filter_stats(cfg, ch, v)
    P_ref = cfg.P if P_ref is None else float(P_ref)
    if not (np.isfinite(P_ref) and P_ref > 0):
        raise InvalidArgumentError("P_ref must be positive")
    d, s, ghat = _scaling(cfg, ch, P_ref)
    fd = d * st.f
    E = (np.outer(fd, fd.conj()) - gamma * np.diag(d ** 2 * st.psi)) / (gamma * st.c)
    cons = [Constraint({"Q": E}, "==", 1.0, "target")]
    cons += _sensor_rows(cfg, d, s, ghat)
    meta = dict(kind="sdr2", d=d, s=s, P=P_ref, gamma=gamma, stats=st, filter=v)
    return SdpProblem([Block("Q", cfg.n_s), Block("W", cfg.n_r)], [],
                      {"W": P_ref * np.eye(cfg.n_r)}, "min", cons, meta)


def recover_from_sdr2(sol: SdpSolution, check: bool = True):
    """``(amp, beam_gram, residual)`` from an optimal power-minimization relaxation."""
    meta = sol.problem.meta
    if meta.get("kind") != "sdr2":
        raise InvalidArgumentError("solution does not come from build_sdr2")
    if not sol.optimal:
        raise SolverError(f"relaxation not solved: {sol.status}", sol)
    amp, res = _amp_from_q(sol.blocks["Q"], meta["d"], 1.0, check)
    W = meta["P"] * sol.blocks["W"]
    return amp, 0.5 * (W + W.conj().T), res


# ---------------------------------------------------------------- helpers

def centralized_bound_inverse(cfg: NetworkConfig) -> float:
    """``1^T R_s^{-1} 1``: supremum of the achievable inverse MSE."""
    return float(np.sum(1.0 / cfg.sensing_vars))


def check_gamma_feasible(cfg: NetworkConfig, ch: ChannelRealization, gamma: float) -> GammaCheck:
    """Necessary condition ``gamma < 1^T R_s^{-1} 1`` with its margin."""
    bound = centralized_bound_inverse(cfg)
    return GammaCheck(bool(0 < gamma < bound), bound - gamma, bound)


def sensor_budgets(cfg, ch, W):
    """``zeta_k tr(G_k W) - 2 E_k``: forwarding power each sensor can afford."""
    harvested = cfg.harvest_eff * np.real(np.einsum("ki,ij,kj->k", ch.G_down.conj(), W, ch.G_down))
    return harvested - 2.0 * cfg.circuit_energy


def _polish_p1(cfg, ch, amp, W):
    """Pull a recovered design back into the feasible set (tiny corrections)."""
    tr = float(np.real(np.trace(W)))
    if tr > cfg.P:
        W = W * (cfg.P / tr)
    budget = np.maximum(sensor_budgets(cfg, ch, W), 0.0)
    need = transmit_powers(cfg, amp)
    shrink = np.ones(cfg.n_s)
    over = need > budget
    shrink[over] = np.sqrt(budget[over] / need[over])
    return amp * shrink, W


def _polish_p2(cfg, ch, amp, W):
    need = transmit_powers(cfg, amp) + 2.0 * cfg.circuit_energy
    have = cfg.harvest_eff * np.real(np.einsum("ki,ij,kj->k", ch.G_down.conj(), W, ch.G_down))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(need > 0, need / have, 0.0)
    grow = float(np.max(ratio, initial=0.0))
    if grow > 1.0:
        W = W * grow
    return amp, W


def initial_amplification(cfg: NetworkConfig, ch: ChannelRealization) -> np.ndarray:
    """Equal-amplitude, zero-phase start feasible under isotropic beams ``(P/n_r) I``."""
    W0 = (cfg.P / cfg.n_r) * np.eye(cfg.n_r)
    alpha2 = float(np.min(sensor_budgets(cfg, ch, W0) / cfg.sensor_power_weights))
    if not alpha2 > 0:
        raise InfeasibleError("isotropic beams leave some sensor without forwarding power; "
                              "pass an explicit init")
    return np.full(cfg.n_s, np.sqrt(alpha2), dtype=complex)


def _finish(trace, cfg, ch, amp, W):
    v = optimal_filter(cfg, ch, amp)
    trace.design = DesignPoint(amp, W, v)
    trace.mse = 1.0 / inverse_mse(cfg, ch, amp)
    trace.fc_power = float(np.real(np.trace(W)))
    trace.harvested_power = cfg.harvest_eff * np.real(
        np.einsum("ki,ij,kj->k", ch.G_down.conj(), W, ch.G_down))
    trace.transmit_power = transmit_powers(cfg, amp)
    return trace


# ---------------------------------------------------------------- local ascent

def inverse_mse_grad(cfg: NetworkConfig, ch: ChannelRealization, amp):
    """Inverse MSE ``J(a)`` and its gradient ``g`` with ``dJ = 2 Re(g . da)``."""
    amp = np.asarray(amp, dtype=complex)
    K = _total_covariance(cfg, ch, amp)
    b = ch.H_up @ amp
    v = _solve_hpd(K, b)
    u = ch.H_up.conj().T @ v
    g = np.conj(u) - np.abs(u) ** 2 * cfg.sensing_vars * np.conj(amp)
    return float(np.real(np.vdot(b, v))), g


def local_ascent(cfg: NetworkConfig, ch: ChannelRealization, amp, W, power: float,
                 max_iter: int = 500):
    """Locally maximize the inverse MSE jointly over beams and amplification.

    The beams are parameterized as ``W = power * B B^H / tr(B B^H)`` and each
    amplification as ``s_k sqrt(budget_k(W) / D_k) exp(j phi_k)`` with
    ``0 <= s_k <= 1``, so every point is feasible by construction. Started
    from ``(amp, W)``; the input is returned unchanged unless the objective
    strictly improves.
    """
    n_s, n_r = cfg.n_s, cfg.n_r
    D = cfg.sensor_power_weights
    zeta = cfg.harvest_eff
    e2 = 2.0 * cfg.circuit_energy
    G = ch.G_down
    tiny = np.finfo(float).tiny
    W = np.asarray(W, dtype=complex)
    lam, U = np.linalg.eigh(0.5 * (W + W.conj().T) / power)
    lam = np.maximum(lam, 0.0)
    # keep every column alive; a zero column has zero gradient forever
    lam = lam + 1e-6 * max(lam.max(), tiny)
    B0 = U * np.sqrt(lam)
    B0 /= np.linalg.norm(B0)
    rmax = np.sqrt(np.maximum(sensor_budgets(cfg, ch, W), 0.0) / D)
    s0 = np.where(rmax > 0, np.minimum(np.abs(amp) / np.where(rmax > 0, rmax, 1.0), 1.0), 0.0)
    J0 = inverse_mse(cfg, ch, amp)
    m = n_r * n_r

    def build(x):
        B = (x[:m] + 1j * x[m:2 * m]).reshape(n_r, n_r)
        tau = float(np.real(np.vdot(B, B)))
        Wx = power * (B @ B.conj().T) / tau
        bud = zeta * np.real(np.einsum("ki,ij,kj->k", G.conj(), Wx, G)) - e2
        live = bud > 0
        bp = np.where(live, bud, 1.0)
        r = x[2 * m:2 * m + n_s] * np.sqrt(bp / D) * live
        e = np.exp(1j * x[2 * m + n_s:])
        return B, tau, Wx, bp, live, r, e

    def fun(x):
        B, tau, _, bp, live, r, e = build(x)
        a = r * e
        J, g = inverse_mse_grad(cfg, ch, a)
        rho = 2.0 * np.real(g * e)  # dJ/dr
        ds = rho * np.sqrt(bp / D) * live
        c = rho * x[2 * m:2 * m + n_s] / (2.0 * np.sqrt(bp * D)) * live * zeta
        M = (G.T * c) @ G.conj()
        MB = M @ B
        gB = (power / tau) * MB - (power / tau ** 2) * float(np.real(np.vdot(B, MB))) * B
        dph = -2.0 * np.imag(g * a)
        grad = np.concatenate([2.0 * gB.real.ravel(), 2.0 * gB.imag.ravel(), ds, dph])
        return -J / J0, -grad / J0

    x0 = np.concatenate([B0.real.ravel(), B0.imag.ravel(), s0, np.angle(amp)])
    bounds = [(None, None)] * (2 * m) + [(0.0, 1.0)] * n_s + [(None, None)] * n_s
    res = minimize(fun, x0, jac=True, method="L-BFGS-B", bounds=bounds,
                   options=dict(ftol=1e-14, gtol=1e-10, maxiter=max_iter, maxcor=20))
    _, _, Wx, _, _, r, e = build(res.x)
    a = r * e
    if inverse_mse(cfg, ch, a) > J0:
        return a, 0.5 * (Wx + Wx.conj().T)
    return amp, W


def _shrink_to_target(cfg, ch, amp, W, gamma):
    """Scale ``W -> c W`` and ``a -> sqrt(c) a`` (c <= 1) until the target binds."""
    if inverse_mse(cfg, ch, amp) <= gamma:
        return amp, W
    c = brentq(lambda t: inverse_mse(cfg, ch, np.sqrt(t) * amp) - gamma, 0.0, 1.0,
               xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    return np.sqrt(c) * amp, c * W


# ---------------------------------------------------------------- algorithms

def _starts(cfg, ch, init, n_starts, seed):
    if init is None:
        base = [initial_amplification(cfg, ch)]
    else:
        arr = np.asarray(init, dtype=complex)
        base = list(arr) if arr.ndim == 2 else [arr.reshape(-1)]
    rng = np.random.default_rng(seed)
    while len(base) < n_starts:
        phase = np.exp(2j * np.pi * rng.random(cfg.n_s))
        base.append(np.abs(base[0]) * phase)
    for a in base:
        if a.shape != (cfg.n_s,):
            raise InvalidArgumentError(f"init must have length {cfg.n_s}")
    return base


def algorithm1(cfg: NetworkConfig, ch: ChannelRealization, init=None,
               stop: StoppingRule = StoppingRule(), tol: ToleranceSet = DEFAULT_TOL,
               n_starts: int = 1, seed: int = 0, refine: bool = True,
               init_gram=None) -> RunTrace:
    """Alternating MSE minimization under the FC power budget.

    Each outer iteration computes the optimal filter for the current
    amplification and solves the relaxed problem for that filter. With
    ``refine`` the recovered design is then passed through
    :func:`local_ascent`, which follows the flat phase/beam-split directions
    that the filter/relaxation alternation only crawls along. The objective
    sequence stays monotone either way.

    Parameters
    ----------
    init : array_like, optional
        Starting amplification (length n_s) or a stack of starts (rows).
        Defaults to :func:`initial_amplification`.
    n_starts : int
        Total number of starts; extra ones reuse the first start's
        magnitudes with seeded random phases. The best run is returned.
    init_gram : array_like, optional
        Beam Gram matrix paired with ``init`` (for example a previously
        converged design). Defaults to isotropic beams ``(P / n_r) I``.
    """
    ch.check(cfg)
    if init_gram is None:
        W0 = (cfg.P / cfg.n_r) * np.eye(cfg.n_r).astype(complex)
    else:
        W0 = np.asarray(init_gram, dtype=complex)
        if W0.shape != (cfg.n_r, cfg.n_r):
            raise InvalidArgumentError(f"init_gram must be {cfg.n_r}x{cfg.n_r}")
    best = None
    for a0 in _starts(cfg, ch, init, n_starts, seed):
        tr = _algorithm1_single(cfg, ch, a0, W0, stop, tol, refine)
        if best is None or (tr.design is not None and
                            (best.design is None or tr.mse < best.mse)):
            best = tr
    return best


def _algorithm1_single(cfg, ch, amp, W, stop, tol, refine):
    trace = RunTrace("mse-min")
    amp, W = _polish_p1(cfg, ch, np.asarray(amp, dtype=complex), W)
    obj = inverse_mse(cfg, ch, amp)
    if obj <= 0:
        raise InvalidArgumentError("initial amplification gives v^H H a = 0")
    trace.records.append(IterationRecord(0, obj, 1.0 / obj, "init"))
    for it in range(1, stop.max_iter + 1):
        v = optimal_filter(cfg, ch, amp)
        sol = solve(build_sdr1(cfg, ch, v), tol)
        trace.last_solution = sol
        if not sol.optimal:
            trace.status = sol.status
            trace.records.append(IterationRecord(it, obj, 1.0 / obj, sol.status, accepted=False))
            break
        a_new, W_new, res = recover_from_sdr1(sol)
        a_new, W_new = _polish_p1(cfg, ch, a_new, W_new)
        if refine:
            a_new, W_new = local_ascent(cfg, ch, a_new, W_new, cfg.P)
        new = inverse_mse(cfg, ch, a_new)
        if new < obj:
            # solver noise around the fixed point: keep the incumbent
            trace.records.append(IterationRecord(it, obj, 1.0 / obj, "optimal", res, False))
            trace.converged = True
            break
        change = (new - obj) / obj
        amp, W, obj = a_new, W_new, new
        trace.records.append(IterationRecord(it, obj, 1.0 / obj, "optimal", res))
        if change < stop.rel_tol:
            trace.converged = True
            break
    return _finish(trace, cfg, ch, amp, W)


def _scale_to_target(cfg, ch, amp, gamma):
    """Shrink ``amp`` so that the inverse MSE equals ``gamma`` exactly."""
    if inverse_mse(cfg, ch, amp) <= gamma:
        return amp
    c = brentq(lambda x: inverse_mse(cfg, ch, x * amp) - gamma, 0.0, 1.0,
               xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    return c * amp


def algorithm2(cfg: NetworkConfig, ch: ChannelRealization, gamma: float, init=None,
               stop: StoppingRule = StoppingRule(), tol: ToleranceSet = DEFAULT_TOL,
               n_starts: int = 1, seed: int = 0, refine: bool = True) -> RunTrace:
    """Alternating FC-power minimization under the inverse-MSE target ``gamma``.

    With ``refine`` each recovered design is improved by :func:`local_ascent`
    at its own power level and then shrunk until the target binds again.

    The returned design meets the target with equality; ``trace.fc_power``
    is ``tr W`` in watts (may exceed ``cfg.P``, which only sets scaling).
    """
    ch.check(cfg)
    chk = check_gamma_feasible(cfg, ch, gamma)
    if not chk.feasible:
        raise InfeasibleError(f"gamma={gamma:g} is not below the centralized bound {chk.bound:g}")
    best = None
    for a0 in _starts(cfg, ch, init, n_starts, seed):
        tr = _algorithm2_single(cfg, ch, gamma, a0, stop, tol, refine)
        if best is None or (tr.design is not None and
                            (best.design is None or tr.fc_power < best.fc_power)):
            best = tr
    return best


def _power_guess(cfg, ch, amp, gamma):
    """Order-of-magnitude FC power for ``amp`` scaled to the target.

    Each sensor is served by its own matched beam, which overestimates the
    optimum but only by a modest factor.
    """
    try:
        a = _scale_to_target(cfg, ch, amp, gamma)
    except (InfeasibleError, ValueError):
        return cfg.P
    need = transmit_powers(cfg, a) + 2.0 * cfg.circuit_energy
    gain = cfg.harvest_eff * np.sum(np.abs(ch.G_down) ** 2, axis=1)
    live = gain > 0
    guess = float(np.sum(need[live] / gain[live]))
    return guess if np.isfinite(guess) and guess > 0 else cfg.P


def _algorithm2_single(cfg, ch, gamma, amp, stop, tol, refine):
    trace = RunTrace("power-min")
    amp = np.asarray(amp, dtype=complex)
    W = None
    obj = np.inf
    for it in range(1, stop.max_iter + 1):
        v = optimal_filter(cfg, ch, amp)
        P_ref = obj if np.isfinite(obj) else _power_guess(cfg, ch, amp, gamma)
        sol = solve(build_sdr2(cfg, ch, v, gamma, P_ref), tol)
        trace.last_solution = sol
        if not sol.optimal:
            trace.status = sol.status
            trace.records.append(IterationRecord(it, obj, 1.0 / gamma, sol.status, accepted=False))
            break
        a_new, W_new, res = recover_from_sdr2(sol)
        a_new, W_new = _polish_p2(cfg, ch, a_new, W_new)
        if refine:
            p = float(np.real(np.trace(W_new)))
            a_new, W_new = local_ascent(cfg, ch, a_new, W_new, p)
            a_new, W_new = _shrink_to_target(cfg, ch, a_new, W_new, gamma)
        new = float(np.real(np.trace(W_new)))
        if new > obj:
            trace.records.append(IterationRecord(it, obj, 1.0 / gamma, "optimal", res, False))
            trace.converged = True
            break
        change = (obj - new) / new if np.isfinite(obj) else np.inf
        amp, W, obj = a_new, W_new, new
        trace.records.append(IterationRecord(it, obj, 1.0 / gamma, "optimal", res))
        if change < stop.rel_tol:
            trace.converged = True
            break
    if W is None:
        if trace.status == "optimal":
            trace.status = "numerical-failure"
        return trace
    amp = _scale_to_target(cfg, ch, amp, gamma)
    return _finish(trace, cfg, ch, amp, W)


# ---------------------------------------------------------------- certificates

def verify_certificates(sol: SdpSolution, which: str = "sdr1") -> CertificateReport:
    """Check rank, sign and complementarity properties of an optimal relaxation."""
    meta = sol.problem.meta
    if meta.get("kind") != which:
        raise InvalidArgumentError(f"solution is not an {which} solve")
    if not sol.optimal:
        raise SolverError(f"relaxation not solved: {sol.status}", sol)
    n_s = sol.blocks["Q"].shape[0]
    n_r = sol.blocks["W"].shape[0]
    mu = sol.multipliers
    s, P = meta["s"], meta["P"]
    Qt, Wt = sol.blocks["Q"], sol.blocks["W"]
    _, qres = extract_rank_one(Qt)
    lam_w = np.linalg.eigvalsh(0.5 * (Wt + Wt.conj().T))
    w_rank = int(np.sum(lam_w > W_RANK_TOL * lam_w[-1]))
    # each <X, Z> term is that block's share of the duality gap; report it
    # relative to the objective (a product of norms breaks down when Z -> 0)
    scale = max(abs(sol.objective), abs(sol.dual_objective), np.finfo(float).tiny)
    cs = []
    dual_min = np.inf
    for name in ("Q", "W"):
        X, Z = sol.blocks[name], sol.dual_blocks[name]
        cs.append(abs(np.real(np.sum(X.T * Z))) / scale)
        lz = np.linalg.eigvalsh(0.5 * (Z + Z.conj().T))
        dual_min = min(dual_min, lz[0] / max(abs(lz).max(), np.finfo(float).tiny))
    for name in sol.scalars:
        cs.append(abs(sol.scalars[name] * sol.dual_scalars[name]) / scale)
    ghat_rows = [c for c in sol.problem.constraints if c.name.startswith("sensor")]
    slack = []
    for c in ghat_rows:
        k = int(c.name.split()[1])
        use = float(np.real(Qt[k, k]))
        have = -float(np.real(np.sum(c.coeffs["W"].T * Wt)))
        extra = c.coeffs.get("eta", 0.0) * sol.scalars.get("eta", 0.0) - c.rhs
        # relative slack of |alpha_k|^2 D_k + 2E_k <= zeta_k tr(G_k W)
        slack.append(1.0 - (use + extra) / have if have > 0 else 0.0)
    inactive = [k for k, sl in enumerate(slack) if sl > INACTIVE_TOL]
    if which == "sdr1":
        t = meta["t"]
        eta = sol.scalars["eta"]
        nu = float(mu[0])
        lambdas = mu[1:1 + n_s] * t / s
        beta = float(mu[1 + n_s] * t / P)
        # |tr(W) - eta P| / P in unscaled variables
        tightness = abs(float(np.real(np.trace(Wt))) - eta) / t
    else:
        nu = None
        lambdas = mu[1:1 + n_s] / s
        beta = -float(mu[0]) / (meta["gamma"] * meta["stats"].c)
        tightness = None
    return CertificateReport(
        which=which, nu=nu, lambdas=np.asarray(lambdas), beta=beta, w_rank=w_rank,
        w_rank_bound=min(n_s, n_r), q_rank_residual=qres, complementarity=float(max(cs)),
        dual_min_eig=float(dual_min), gap=sol.gap, power_tightness=tightness,
        inactive_sensors=inactive)
