"""Primal-dual interior-point method for small dense linear SDPs.

The problem is brought to the canonical pair

    min  <C, X> + c^T x        s.t.  A(X) + A_lp x = b,   X psd, x >= 0
    max  b^T y                 s.t.  C - A^T y = S psd,   c - A_lp^T y = s >= 0

where X is a direct sum of real symmetric blocks (complex Hermitian blocks
are embedded first) and x collects the nonnegative scalars plus one slack
per inequality row. Search directions use Nesterov-Todd scaling with a
Mehrotra predictor-corrector, starting from an infeasible interior point.
"""
from __future__ import annotations

from dataclasses import dataclass
import logging

import numpy as np
import scipy.linalg as sla

from ..errors import InvalidArgumentError
from . import kernels
from .problem import SdpProblem, SdpSolution, complexify, embed_hermitian

log = logging.getLogger(__name__)

STEP_FRACTION = 0.98


@dataclass(frozen=True)
class ToleranceSet:
    """Stopping tolerances.

    ``feas`` bounds the relative primal and dual residuals, ``gap`` the
    relative duality gap ``|p - d| / (1 + |p|)`` and ``kkt`` the relative
    complementarity ``<X, S> / (1 + |p|)``. Gap and complementarity are
    measured on the problem after the right-hand side and the objective
    have been normalized to unit norm. ``psd`` is the eigenvalue slack
    used when callers check returned blocks. If the iteration breaks down
    (loss of definiteness, stalled steps) the last iterate is still
    accepted as optimal when it meets every tolerance multiplied by
    ``near``.
    """

    feas: float = 1e-9
    gap: float = 1e-10
    kkt: float = 1e-9
    psd: float = 1e-9
    max_iter: int = 100
    near: float = 100.0


DEFAULT_TOL = ToleranceSet()


class _Canonical:
    """Dense canonical data for one problem (after embedding)."""

    def __init__(self, prob: SdpProblem):
        self.prob = prob
        self.names = [b.name for b in prob.blocks]
        self.dims = [b.dim for b in prob.blocks]
        m = len(prob.constraints)
        self.m = m
        sign = -1.0 if prob.sense == "max" else 1.0
        self.sign = sign
        self.A = [np.zeros((m, n, n)) for n in self.dims]
        self.C = [np.zeros((n, n)) for n in self.dims]
        n_ineq = sum(c.op != "==" for c in prob.constraints)
        self.n_scalar = len(prob.scalars)
        self.A_lp = np.zeros((m, self.n_scalar + n_ineq))
        self.c_lp = np.zeros(self.n_scalar + n_ineq)
        self.b = np.array([c.rhs for c in prob.constraints], dtype=float)
        bidx = {nm: j for j, nm in enumerate(self.names)}
        sidx = {nm: j for j, nm in enumerate(prob.scalars)}
        for key, coef in prob.objective.items():
            if key in bidx:
                self.C[bidx[key]] = sign * np.asarray(coef, dtype=float)
            else:
                self.c_lp[sidx[key]] = sign * float(coef)
        slack = self.n_scalar
        for i, con in enumerate(prob.constraints):
            for key, coef in con.coeffs.items():
                if key in bidx:
                    self.A[bidx[key]][i] = np.asarray(coef, dtype=float)
                else:
                    self.A_lp[i, sidx[key]] = float(coef)
            if con.op == "<=":
                self.A_lp[i, slack] = 1.0
                slack += 1
            elif con.op == ">=":
                self.A_lp[i, slack] = -1.0
                slack += 1
        for j in range(len(self.A)):
            self.A[j] = 0.5 * (self.A[j] + self.A[j].transpose(0, 2, 1))
            self.C[j] = 0.5 * (self.C[j] + self.C[j].T)

    def row_norms(self):
        sq = (self.A_lp ** 2).sum(axis=1)
        for A in self.A:
            sq = sq + (A ** 2).sum(axis=(1, 2))
        r = np.sqrt(sq)
        r[r == 0] = 1.0
        return r


def _op(A_list, A_lp, X, x):
    """``A(X) + A_lp x``."""
    out = A_lp @ x
    for A, Xj in zip(A_list, X):
        out = out + A.reshape(A.shape[0], -1) @ Xj.reshape(-1)
    return out


def _adj(A_list, A_lp, y):
    return [np.tensordot(y, A, axes=1) for A in A_list], A_lp.T @ y


def _inner(X, S, x, s):
    return sum(float(np.sum(a * b)) for a, b in zip(X, S)) + float(x @ s)


def _max_step_psd(lam, dtil):
    """Largest alpha with ``diag(lam) + alpha * dtil`` psd (capped at 1e6)."""
    r = 1.0 / np.sqrt(lam)
    e = np.linalg.eigvalsh(r[:, None] * dtil * r[None, :])[0]
    return 1e6 if e >= 0 else -1.0 / e


def _max_step_lp(x, dx):
    neg = dx < 0
    if not np.any(neg):
        return 1e6
    return float(np.min(-x[neg] / dx[neg]))


class _Failure(Exception):
    def __init__(self, msg, info=None):
        super().__init__(msg)
        self.info = info


def _near_optimal(info, tol):
    """True when an iterate meets the tolerances loosened by ``tol.near``."""
    f = tol.near
    return (info.get("pinf", np.inf) <= f * tol.feas and info.get("dinf", np.inf) <= f * tol.feas
            and info.get("gap", np.inf) <= f * tol.gap and info.get("compl", np.inf) <= f * tol.kkt)


def _ipm(A, A_lp, b, C, c_lp, tol, start, patterns, report_scale):
    """Core iteration on scaled data. Returns a dict of the final state."""
    m = b.size
    dims = [Cj.shape[0] for Cj in C]
    nl = c_lp.size
    N = sum(dims) + nl
    xi, zeta = start
    X = [xi * np.eye(n) for n in dims]
    S = [zeta * np.eye(n) for n in dims]
    x = xi * np.ones(nl)
    s = zeta * np.ones(nl)
    y = np.zeros(m)
    bnorm = 1.0 + np.linalg.norm(b)
    cnorm = 1.0 + np.sqrt(sum(float(np.sum(Cj ** 2)) for Cj in C) + float(c_lp @ c_lp))
    _, row_scale = report_scale
    status = "max-iter"
    it = 0
    stalls = 0
    info = {}
    for it in range(tol.max_iter + 1):
        rp = b - _op(A, A_lp, X, x)
        AtY, atY = _adj(A, A_lp, y)
        Rd = [Cj - Aj - Sj for Cj, Aj, Sj in zip(C, AtY, S)]
        rd = c_lp - atY - s
        pobj = _inner(C, X, c_lp, x)
        dobj = float(b @ y)
        compl = _inner(X, S, x, s)
        mu = compl / N
        pinf = np.linalg.norm(rp * row_scale) / (1.0 + np.linalg.norm(b * row_scale))
        dinf = np.sqrt(sum(float(np.sum(R ** 2)) for R in Rd) + float(rd @ rd)) / cnorm
        gap = abs(pobj - dobj) / (1.0 + abs(pobj))
        kkt = compl / (1.0 + abs(pobj))
        info = dict(X=X, S=S, x=x, s=s, y=y, pobj=pobj, dobj=dobj, pinf=pinf, dinf=dinf,
                    gap=gap, kkt=max(pinf, dinf, kkt), compl=kkt, iterations=it)
        if pinf <= tol.feas and dinf <= tol.feas and gap <= tol.gap and kkt <= tol.kkt:
            status = "optimal"
            break
        # infeasibility: y (resp. X) growing along an improving ray
        if dobj > 0:
            ray = np.sqrt(sum(float(np.sum((Aj + Sj) ** 2)) for Aj, Sj in zip(AtY, S))
                          + float((atY + s) @ (atY + s)))
            if ray / dobj < 1e-8 and dobj > 1e6:
                status = "infeasible"
                info["infeasibility"] = "primal"
                info["certificate"] = y / dobj
                break
        if pobj < 0:
            ray = np.linalg.norm(_op(A, A_lp, X, x)) / -pobj
            if ray < 1e-8 and -pobj > 1e6:
                status = "infeasible"
                info["infeasibility"] = "dual"
                break
        if it == tol.max_iter:
            break

        # NT scaling
        G, Ginv, lam, Wt = [], [], [], []
        try:
            for Xj, Sj in zip(X, S):
                L = np.linalg.cholesky(Xj)
                R = np.linalg.cholesky(Sj)
                U, sv, Vt = np.linalg.svd(R.T @ L)
                rs = 1.0 / np.sqrt(sv)
                Gj = (L @ Vt.T) * rs
                G.append(Gj)
                Ginv.append((rs[:, None] * U.T) @ R.T)
                lam.append(sv)
                Wt.append(np.ascontiguousarray(Gj @ Gj.T))
        except np.linalg.LinAlgError as exc:
            raise _Failure("lost positive definiteness", info) from exc
        xs = x / s
        M = (A_lp * xs) @ A_lp.T
        for Aj, pat, Wj in zip(A, patterns, Wt):
            kernels.schur_block(Aj, pat, Wj, M)
        M = 0.5 * (M + M.T)
        try:
            fac = sla.cho_factor(M, lower=True, check_finite=True)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise _Failure("Schur complement not positive definite", info) from exc
        WRW = [Wj @ Rj @ Wj for Wj, Rj in zip(Wt, Rd)]

        def direction(Rc, rc):
            Z = [2.0 * Rcj / (l[:, None] + l[None, :]) for Rcj, l in zip(Rc, lam)]
            GZG = [Gj @ Zj @ Gj.T for Gj, Zj in zip(G, Z)]
            rhs = rp - _op(A, A_lp, GZG, rc / s) + _op(A, A_lp, WRW, xs * rd)
            dy = sla.cho_solve(fac, rhs)
            AtD, atD = _adj(A, A_lp, dy)
            dS = [Rj - Dj for Rj, Dj in zip(Rd, AtD)]
            ds = rd - atD
            dX = [g - Wj @ d @ Wj for g, Wj, d in zip(GZG, Wt, dS)]
            dX = [0.5 * (d + d.T) for d in dX]
            dx = rc / s - xs * ds
            return dX, dx, dy, dS, ds

        def scaled(dX, dS):
            tX = [Gi @ d @ Gi.T for Gi, d in zip(Ginv, dX)]
            tS = [Gj.T @ d @ Gj for Gj, d in zip(G, dS)]
            return tX, tS

        def steps(tX, tS, dx, ds):
            ap = min([_max_step_psd(l, t) for l, t in zip(lam, tX)] + [_max_step_lp(x, dx)])
            ad = min([_max_step_psd(l, t) for l, t in zip(lam, tS)] + [_max_step_lp(s, ds)])
            return min(1.0, STEP_FRACTION * ap), min(1.0, STEP_FRACTION * ad)

        # predictor
        Rc = [-np.diag(l ** 2) for l in lam]
        rc = -x * s
        dX, dx, dy, dS, ds = direction(Rc, rc)
        tX, tS = scaled(dX, dS)
        ap, ad = steps(tX, tS, dx, ds)
        mu_aff = (sum(float(np.sum((np.diag(l) + ap * a) * (np.diag(l) + ad * b_)))
                      for l, a, b_ in zip(lam, tX, tS))
                  + float((x + ap * dx) @ (s + ad * ds))) / N
        sigma = min(1.0, max(0.0, mu_aff / mu)) ** 3
        # corrector
        Rc = []
        for l, a, b_ in zip(lam, tX, tS):
            prod = a @ b_
            Rc.append(sigma * mu * np.eye(l.size) - np.diag(l ** 2) - 0.5 * (prod + prod.T))
        rc = sigma * mu - x * s - dx * ds
        dX, dx, dy, dS, ds = direction(Rc, rc)
        tX, tS = scaled(dX, dS)
        ap, ad = steps(tX, tS, dx, ds)
        if not (np.isfinite(ap) and np.isfinite(ad)):
            raise _Failure("non-finite step", info)
        X = [Xj + ap * d for Xj, d in zip(X, dX)]
        x = x + ap * dx
        y = y + ad * dy
        S = [Sj + ad * d for Sj, d in zip(S, dS)]
        s = s + ad * ds
        X = [0.5 * (Xj + Xj.T) for Xj in X]
        S = [0.5 * (Sj + Sj.T) for Sj in S]
        stalls = stalls + 1 if max(ap, ad) < 1e-8 else 0
        if stalls >= 3:
            raise _Failure("step length stalled", info)
    info["status"] = status
    info["iterations"] = it
    return info


def solve(problem: SdpProblem, tol: ToleranceSet = DEFAULT_TOL, start=None) -> SdpSolution:
    """Solve a linear SDP.

    Parameters
    ----------
    problem : SdpProblem
        Blocks may be complex Hermitian; they are embedded as real symmetric
        blocks internally and mapped back on return.
    tol : ToleranceSet
    start : tuple of float, optional
        ``(xi, zeta)`` for the initial point ``X = xi I``, ``S = zeta I``
        in scaled coordinates. Defaults to ``max(10, sqrt(n))`` for both.

    Returns
    -------
    SdpSolution
        ``status`` is one of ``optimal``, ``infeasible``, ``max-iter`` or
        ``numerical-failure``. Residuals are measured after normalizing
        every constraint row.
    """
    if not isinstance(problem, SdpProblem):
        raise InvalidArgumentError("solve expects an SdpProblem")
    problem.validate()
    real = embed_hermitian(problem)
    can = _Canonical(real)
    r = can.row_norms()
    A = [np.ascontiguousarray(Aj / r[:, None, None]) for Aj in can.A]
    A_lp = can.A_lp / r[:, None]
    b = can.b / r
    bs = max(1.0, float(np.linalg.norm(b)))
    # objectives are normalized in both directions; a tiny objective would
    # otherwise meet the gap test at any feasible point
    cs = float(np.sqrt(sum(float(np.sum(Cj ** 2)) for Cj in can.C) + can.c_lp @ can.c_lp)) or 1.0
    patterns = [kernels.sparsity_pattern(Aj) for Aj in A]
    nmax = max(can.dims + [1])
    if start is None:
        start = (max(10.0, np.sqrt(nmax)), max(10.0, np.sqrt(nmax)))
    attempts = [start, (100.0 * start[0], 100.0 * start[1])]
    info = None
    reason = ""
    for k, st in enumerate(attempts):
        try:
            info = _ipm(A, A_lp, b / bs, [Cj / cs for Cj in can.C], can.c_lp / cs, tol, st,
                        patterns, (bs * cs, bs))
            break
        except _Failure as exc:
            reason = str(exc)
            log.debug("interior-point attempt %d failed: %s", k, reason)
            if exc.info and _near_optimal(exc.info, tol):
                info = dict(exc.info, status="optimal")
                break
    if info is None:
        return _failure_solution(problem, can, reason)
    return _assemble(problem, real, can, info, r, bs, cs)


def _failure_solution(problem, can, reason):
    nan = float("nan")
    sol = SdpSolution(
        status="numerical-failure", blocks={}, scalars={}, multipliers=np.full(can.m, nan),
        dual_blocks={}, dual_scalars={}, objective=nan, dual_objective=nan, gap=nan,
        kkt_residual=nan, primal_infeasibility=nan, dual_infeasibility=nan, iterations=0,
        problem=problem)
    sol.infeasibility = reason
    return sol


def _assemble(problem, real, can, info, r, bs, cs):
    emb = set(real.meta.get("embedded_blocks", ()))
    blocks, dual_blocks = {}, {}
    for name, Xj, Sj in zip(can.names, info["X"], info["S"]):
        Xo, So = bs * Xj, cs * Sj
        if name in emb:
            blocks[name] = complexify(Xo)
            dual_blocks[name] = 2.0 * complexify(So)
        else:
            blocks[name] = Xo
            dual_blocks[name] = So
    x, s = bs * info["x"], cs * info["s"]
    scalars = {nm: float(x[i]) for i, nm in enumerate(problem.scalars)}
    dual_scalars = {nm: float(s[i]) for i, nm in enumerate(problem.scalars)}
    y = cs * info["y"] / r
    sign = can.sign
    pobj = sign * bs * cs * info["pobj"]
    dobj = sign * bs * cs * info["dobj"]
    cert = info.get("certificate")
    return SdpSolution(
        status=info["status"],
        blocks=blocks,
        scalars=scalars,
        multipliers=-y,
        dual_blocks=dual_blocks,
        dual_scalars=dual_scalars,
        objective=pobj,
        dual_objective=dobj,
        gap=info["gap"],
        kkt_residual=info["kkt"],
        primal_infeasibility=info["pinf"],
        dual_infeasibility=info["dinf"],
        iterations=info["iterations"],
        problem=problem,
        certificate=None if cert is None else cert / r,
        infeasibility=info.get("infeasibility"),
    )
