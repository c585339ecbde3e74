"""Linear SDP containers, the complex-to-real embedding and rank-one extraction."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from ..errors import CertificateError, DegenerateDesignError, InvalidArgumentError

OPS = ("==", "<=", ">=")


@dataclass(frozen=True)
class Block:
    """A PSD matrix variable. ``hermitian=True`` means complex Hermitian."""

    name: str
    dim: int
    hermitian: bool = True


@dataclass
class Constraint:
    """``sum_j <coeffs[j], X_j> + sum_s coeffs[s] * x_s  (op)  rhs``.

    Matrix coefficients act through ``Re tr(C X)``; scalar coefficients
    multiply the nonnegative scalar variables.
    """

    coeffs: Dict[str, object]
    op: str
    rhs: float
    name: str = ""

    def __post_init__(self):
        if self.op not in OPS:
            raise InvalidArgumentError(f"constraint op must be one of {OPS}")
        self.rhs = float(self.rhs)


@dataclass
class SdpProblem:
    """A linear SDP over PSD blocks and nonnegative scalars.

    The objective and every constraint are linear functionals given as
    ``{variable name: coefficient}`` maps.
    """

    blocks: List[Block]
    scalars: List[str]
    objective: Dict[str, object]
    sense: str
    constraints: List[Constraint]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.validate()

    @property
    def block_map(self) -> Dict[str, Block]:
        return {b.name: b for b in self.blocks}

    def validate(self) -> None:
        if self.sense not in ("min", "max"):
            raise InvalidArgumentError("sense must be 'min' or 'max'")
        if not self.constraints:
            raise InvalidArgumentError("an SDP needs at least one constraint")
        names = [b.name for b in self.blocks] + list(self.scalars)
        if len(set(names)) != len(names):
            raise InvalidArgumentError("variable names must be unique")
        bmap = self.block_map
        for where, func in [("objective", self.objective)] + [
                (c.name or f"constraint {i}", c.coeffs) for i, c in enumerate(self.constraints)]:
            for key, coef in func.items():
                if key in bmap:
                    blk = bmap[key]
                    C = np.asarray(coef)
                    if C.shape != (blk.dim, blk.dim):
                        raise InvalidArgumentError(
                            f"{where}: coefficient of {key} must be {blk.dim}x{blk.dim}")
                    if not blk.hermitian and np.iscomplexobj(C) and np.any(C.imag):
                        raise InvalidArgumentError(f"{where}: real block {key} needs a real coefficient")
                    if not _is_hermitian(C):
                        raise InvalidArgumentError(f"{where}: coefficient of {key} is not Hermitian")
                elif key in self.scalars:
                    if not np.isscalar(coef) or np.iscomplexobj(coef):
                        raise InvalidArgumentError(f"{where}: scalar coefficient of {key} must be real")
                else:
                    raise InvalidArgumentError(f"{where}: unknown variable {key!r}")

    def evaluate(self, func: Dict[str, object], values: Dict[str, object]) -> float:
        """Value of a linear functional at a point ``{name: matrix | scalar}``."""
        total = 0.0
        for key, coef in func.items():
            if key in self.scalars:
                total += float(coef) * float(values[key])
            else:
                total += float(np.real(np.sum(np.asarray(coef).T * values[key])))
        return total


@dataclass
class SdpSolution:
    """Primal/dual point returned by :func:`wpt_estim.sdp.solve`.

    ``multipliers[i]`` is the Lagrange multiplier of constraint ``i`` in the
    convention ``L = f + sum_i mu_i (g_i(x) - b_i)`` where ``f`` is the
    objective to be *minimised* (the negated objective for ``max``
    problems). Multipliers of ``<=`` constraints are nonnegative, those of
    ``>=`` constraints nonpositive. ``dual_blocks`` are the dual slack
    matrices ``Z_j = C_j + sum_i mu_i A_ij`` (PSD at optimality), in the
    same (complex or real) form as the primal blocks.
    """

    status: str
    blocks: Dict[str, np.ndarray]
    scalars: Dict[str, float]
    multipliers: np.ndarray
    dual_blocks: Dict[str, np.ndarray]
    dual_scalars: Dict[str, float]
    objective: float
    dual_objective: float
    gap: float
    kkt_residual: float
    primal_infeasibility: float
    dual_infeasibility: float
    iterations: int
    problem: Optional[SdpProblem] = None
    certificate: Optional[np.ndarray] = None
    infeasibility: Optional[str] = None

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def _is_hermitian(C) -> bool:
    C = np.asarray(C)
    scale = max(1.0, float(np.abs(C).max(initial=0.0)))
    return bool(np.allclose(C, C.conj().T, rtol=0.0, atol=1e-12 * scale))


def realify(C: np.ndarray) -> np.ndarray:
    """Real symmetric embedding ``[[Re C, -Im C], [Im C, Re C]]``."""
    C = np.asarray(C, dtype=complex)
    return np.block([[C.real, -C.imag], [C.imag, C.real]])


def complexify(Y: np.ndarray) -> np.ndarray:
    """Inverse of :func:`realify` (projecting onto the embedding's range)."""
    d = Y.shape[0] // 2
    a, b, c, e = Y[:d, :d], Y[:d, d:], Y[d:, :d], Y[d:, d:]
    return 0.5 * (a + e) + 0.5j * (c - b)


def embed_hermitian(problem: SdpProblem) -> SdpProblem:
    """Rewrite every complex Hermitian block as a real symmetric block.

    A complex d x d block X becomes the 2d x 2d block ``realify(X)`` and each
    coefficient C becomes ``realify(C) / 2``, so that every functional keeps
    its value: ``<realify(C)/2, realify(X)> = Re tr(C X)``.
    """
    for blk in problem.blocks:
        if not blk.hermitian:
            continue
        for func in [problem.objective] + [c.coeffs for c in problem.constraints]:
            if blk.name in func and not _is_hermitian(func[blk.name]):
                raise InvalidArgumentError(f"coefficient of {blk.name} is not Hermitian")
    cplx = {b.name for b in problem.blocks if b.hermitian}

    def convert(func):
        out = {}
        for key, coef in func.items():
            if key in cplx:
                out[key] = 0.5 * realify(coef)
            elif key in problem.scalars:
                out[key] = float(coef)
            else:
                out[key] = np.asarray(coef, dtype=float).real
        return out

    blocks = [Block(b.name, 2 * b.dim if b.hermitian else b.dim, False) for b in problem.blocks]
    meta = dict(problem.meta)
    meta["embedded_blocks"] = sorted(cplx)
    return SdpProblem(
        blocks=blocks,
        scalars=list(problem.scalars),
        objective=convert(problem.objective),
        sense=problem.sense,
        constraints=[Constraint(convert(c.coeffs), c.op, c.rhs, c.name) for c in problem.constraints],
        meta=meta,
    )


def extract_rank_one(M, tol: float = 1e-4, check: bool = False):
    """Leading rank-one factor of a Hermitian PSD matrix.

    Returns ``(q, residual)`` with ``q = sqrt(lambda_1) u_1`` and
    ``residual = ||M - q q^H||_F / ||M||_F``. The phase of ``q`` is fixed so
    that its first non-negligible entry is real and positive. With
    ``check=True`` a residual above ``tol`` raises :class:`CertificateError`.
    """
    M = np.asarray(M)
    M = 0.5 * (M + M.conj().T)
    norm = np.linalg.norm(M)
    if norm == 0.0:
        raise DegenerateDesignError("cannot extract a rank-one factor from the zero matrix")
    lam, U = np.linalg.eigh(M)
    u = U[:, -1]
    lead = max(lam[-1], 0.0)
    q = np.sqrt(lead) * u
    big = np.flatnonzero(np.abs(q) > 1e-12 * np.abs(q).max(initial=0.0))
    if big.size:
        q = q * (abs(q[big[0]]) / q[big[0]])
    # eigenvalue form of the residual is exact for Hermitian M
    residual = float(np.sqrt(max(np.sum(lam[:-1] ** 2), 0.0)) / norm)
    if check and residual > tol:
        raise CertificateError(f"matrix is not numerically rank one (residual {residual:.2e})")
    return q, residual
