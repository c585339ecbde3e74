"""Independent reference solvers used only by the tests."""
import numpy as np


def _proj_psd(X):
    X = 0.5 * (X + X.conj().T)
    lam, U = np.linalg.eigh(X)
    return (U * np.maximum(lam, 0.0)) @ U.conj().T


def penalty_sdp(problem, rho=10.0, outer=400, inner=400, tol=1e-11):
    """Augmented-Lagrangian oracle with projected-gradient inner loops.

    Works directly on the (possibly complex) problem description: blocks are
    projected onto the PSD cone by eigenvalue clipping and scalars onto
    ``[0, inf)``. Returns ``(objective, point)``.
    """
    names = [b.name for b in problem.blocks]
    dims = {b.name: b.dim for b in problem.blocks}
    sgn = -1.0 if problem.sense == "max" else 1.0
    cons = problem.constraints
    # inequalities in the form g(x) <= 0
    rows = []
    for c in cons:
        s = -1.0 if c.op == ">=" else 1.0
        rows.append((c.coeffs, s, c.rhs, c.op == "=="))

    def val(func, x):
        return problem.evaluate(func, x)

    def resid(x):
        return np.array([s * (val(f, x) - rhs) for f, s, rhs, _ in rows])

    def coef(func, key):
        c = func.get(key)
        if c is None:
            return 0.0 if key in problem.scalars else np.zeros((dims[key],) * 2)
        return float(c) if key in problem.scalars else np.asarray(c)

    # Lipschitz bound for the penalty term
    L_rows = 0.0
    for f, *_ in rows:
        L_rows += sum(np.linalg.norm(coef(f, k)) ** 2 for k in names + list(problem.scalars))

    x = {k: np.eye(dims[k], dtype=complex) * 0.1 for k in names}
    x.update({k: 0.1 for k in problem.scalars})
    mu = np.zeros(len(rows))
    eq = np.array([e for *_, e in rows])

    def project(z):
        out = {k: _proj_psd(z[k]) for k in names}
        out.update({k: max(z[k], 0.0) for k in problem.scalars})
        return out

    def grad(z):
        r = resid(z)
        w = np.where(eq, mu + rho * r, np.maximum(mu + rho * r, 0.0))
        g = {}
        for k in names + list(problem.scalars):
            gk = sgn * coef(problem.objective, k)
            for (f, s, _, _), wi in zip(rows, w):
                gk = gk + wi * s * coef(f, k)
            g[k] = gk
        return g

    step = 1.0 / (rho * L_rows + 1e-12)
    for _ in range(outer):
        y, t = dict(x), 1.0
        for _ in range(inner):
            g = grad(y)
            x_new = project({k: y[k] - step * g[k] for k in y})
            t_new = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
            y = {k: x_new[k] + (t - 1) / t_new * (x_new[k] - x[k]) for k in x_new}
            x, t = x_new, t_new
        r = resid(x)
        mu = np.where(eq, mu + rho * r, np.maximum(mu + rho * r, 0.0))
        viol = np.where(eq, np.abs(r), np.maximum(r, 0.0))
        if viol.max() < tol:
            break
    return val(problem.objective, x), x


# ---------------------------------------------------------------- two sensors
#
# With the filter fixed, the phases of the amplification only need to align
# every a_k f_k, leaving the two magnitudes. The set of budget pairs
# (zeta_1 g_1^H W g_1, zeta_2 g_2^H W g_2) over tr W <= 1 is convex; its
# support function in direction (cos t, sin t) is lambda_max of the weighted
# Gram sum, attained by the matching eigenvector. Both oracles tabulate it
# on a fine grid of t.

GRID = 40001


def _stats(cfg, ch, v):
    v = np.asarray(v, dtype=complex)
    f = np.array([np.vdot(v, ch.H_up[:, k]) for k in range(cfg.n_s)])
    psi = np.abs(f) ** 2 * cfg.sensing_vars
    c = float(np.real(np.vdot(v, cfg.fc_noise_vars * v)))
    return np.abs(f), psi, c


def _support_table(cfg, ch, grid=GRID):
    G = [cfg.harvest_eff[k] * np.outer(ch.G_down[k], ch.G_down[k].conj()) for k in range(2)]
    t = np.linspace(0.0, np.pi / 2, grid)
    M = np.cos(t)[:, None, None] * G[0] + np.sin(t)[:, None, None] * G[1]
    lam, U = np.linalg.eigh(M)
    u = U[:, :, -1]
    b = np.stack([np.real(np.einsum("ti,ij,tj->t", u.conj(), Gk, u)) for Gk in G], axis=1)
    return t, lam[:, -1], b


def two_sensor_mse_oracle(cfg, ch, v):
    """Largest inverse-MSE quotient for filter ``v`` (n_s = 2)."""
    fa, psi, c = _stats(cfg, ch, v)
    D = cfg.sensing_vars + cfg.source_var
    _, _, b = _support_table(cfg, ch)
    cap = np.sqrt(cfg.P * b / D)  # boundary points of the magnitude region
    best = np.zeros(len(cap))
    # (A + B r)^2 / (C + E r^2) is unimodal in r with peak at r = BC/(AE);
    # an optimum has one magnitude at its cap
    for i in (0, 1):
        j = 1 - i
        A, C = fa[i] * cap[:, i], psi[i] * cap[:, i] ** 2 + c
        B, E = fa[j], psi[j]
        with np.errstate(divide="ignore", invalid="ignore"):
            peak = np.where(A * E > 0, B * C / (A * E), np.inf)
        r = np.minimum(cap[:, j], peak)
        best = np.maximum(best, (A + B * r) ** 2 / (C + E * r * r))
    return float(best.max())


def two_sensor_power_oracle(cfg, ch, v, gamma, n=2001):
    """Least FC power reaching inverse MSE ``gamma`` under filter ``v`` (n_s = 2)."""
    fa, psi, c = _stats(cfg, ch, v)
    D = cfg.sensing_vars + cfg.source_var
    t, lam, _ = _support_table(cfg, ch, 4001)
    w = np.stack([np.cos(t), np.sin(t)], axis=1) / lam[:, None]

    # aligned phases: for r_1 given, r_2 >= 0 solves
    # (fa1 r1 + fa2 r2)^2 = gamma (psi1 r1^2 + psi2 r2^2 + c)
    a1 = fa[0] ** 2 - gamma * psi[0]
    r1_max = np.sqrt(gamma * c / a1) if a1 > 0 else 10 * np.sqrt(gamma * c) / fa[0]
    lo, hi = 0.0, r1_max
    best = np.inf
    for _ in range(6):
        r1 = np.linspace(lo, hi, n)
        a = fa[1] ** 2 - gamma * psi[1]
        bq = 2 * fa[0] * fa[1] * r1
        cq = (fa[0] * r1) ** 2 - gamma * (psi[0] * r1 ** 2 + c)
        disc = bq * bq - 4 * a * cq
        with np.errstate(invalid="ignore", divide="ignore"):
            if a != 0:
                roots = np.stack([(-bq + np.sqrt(disc)) / (2 * a), (-bq - np.sqrt(disc)) / (2 * a)])
                roots = np.where(roots >= 0, roots, np.inf)
                r2 = roots.min(axis=0)
            else:
                r2 = -cq / bq
        ok = np.isfinite(r2) & (disc >= 0)
        x = np.stack([r1 ** 2, r2 ** 2], axis=1) * D
        # gauge of x: smallest P with x in P * region
        P = np.full(n, np.inf)
        P[ok] = (x[ok] @ w.T).max(axis=1)
        i = int(np.argmin(P))
        best = min(best, P[i])
        step = r1[1] - r1[0]
        lo, hi = max(0.0, r1[i] - step), min(r1_max, r1[i] + step)
        n = 401
    return float(best)


def _inverse_mse_two(K, sig, r1, r2, phi):
    """Inverse MSE of a = (r1, r2 e^{j phi}) under the best filter.

    Uses the expanded form J = sum(1/sig) - u^T (R^-1 + T)^-1 u with
    u = R^-1 1 and
    T = A^H H^H Rn^-1 H A, written out entrywise for two sensors.
    """
    u1, u2 = 1 / sig[0], 1 / sig[1]
    m11 = u1 + r1 ** 2 * K[0, 0].real
    m22 = u2 + r2 ** 2 * K[1, 1].real
    m12 = r1 * r2 * np.exp(1j * phi) * K[0, 1]
    det = m11 * m22 - np.abs(m12) ** 2
    quad = (u1 * u1 * m22 + u2 * u2 * m11 - 2 * u1 * u2 * m12.real) / det
    return u1 + u2 - quad


def two_sensor_joint_oracle(cfg, ch, n_t=201, n_s=41, n_phi=64):
    """Brute-force minimum MSE over amplification and beams (n_s = 2).

    The receive filter is eliminated in closed form. Beams enter only through
    the two budgets, which range over the Pareto boundary of the budget
    region (scanned by its support direction); below each boundary point the
    magnitudes fill a box and the relative phase a circle. The best grid cell
    is polished with Nelder-Mead. Returns the MSE.
    """
    from scipy.optimize import minimize

    sig = cfg.sensing_vars
    D = cfg.sensing_vars + cfg.source_var
    H = ch.H_up
    K = H.conj().T @ (H / cfg.fc_noise_vars[:, None])
    t, _, b = _support_table(cfg, ch, n_t)
    cap = np.sqrt(cfg.P * b / D)  # (n_t, 2)
    s = np.linspace(0.0, 1.0, n_s)
    phi = np.linspace(0.0, 2 * np.pi, n_phi, endpoint=False)
    r1 = cap[:, 0, None, None, None] * s[None, :, None, None]
    r2 = cap[:, 1, None, None, None] * s[None, None, :, None]
    J = _inverse_mse_two(K, sig, r1, r2, phi[None, None, None, :])
    i = np.unravel_index(int(np.nanargmax(J)), J.shape)
    best = float(J[i])

    G = [cfg.harvest_eff[k] * np.outer(ch.G_down[k], ch.G_down[k].conj()) for k in range(2)]

    def caps(tt):
        M = np.cos(tt) * G[0] + np.sin(tt) * G[1]
        _, U = np.linalg.eigh(M)
        u = U[:, -1]
        return np.sqrt(cfg.P * np.array([np.real(u.conj() @ Gk @ u) for Gk in G]) / D)

    def neg(x):
        tt = np.clip(x[0], 0.0, np.pi / 2)
        c = caps(tt)
        return -_inverse_mse_two(K, sig, c[0] * np.clip(x[1], 0, 1), c[1] * np.clip(x[2], 0, 1), x[3])

    x0 = np.array([t[i[0]], s[i[1]], s[i[2]], phi[i[3]]])
    res = minimize(neg, x0, method="Nelder-Mead",
                   options=dict(xatol=1e-10, fatol=1e-14 * best, maxiter=4000, maxfev=8000))
    best = max(best, -float(res.fun))
    return 1.0 / best
