"""JSON debug dump of a problem/solution pair.

Layout (all matrices row-major nested lists; a complex entry is ``[re, im]``,
a real entry a plain number)::

    {
      "format": "wpt-estim-sdp/1",
      "problem": {
        "sense": "min" | "max",
        "blocks": [{"name": str, "dim": int, "hermitian": bool}, ...],
        "scalars": [str, ...],
        "objective": {var: matrix | number},
        "constraints": [{"name": str, "op": "<=" | ">=" | "==", "rhs": number,
                         "coeffs": {var: matrix | number}}, ...]
      },
      "solution": {                       # omitted when no solution is given
        "status": str, "objective": number, "dual_objective": number,
        "gap": number, "kkt_residual": number, "primal_infeasibility": number,
        "dual_infeasibility": number, "iterations": int,
        "blocks": {name: matrix}, "scalars": {name: number},
        "multipliers": [number, ...],
        "dual_blocks": {name: matrix}, "dual_scalars": {name: number}
      }
    }

``meta`` entries of the problem are not written; they hold builder-specific
objects and are not needed to re-solve the problem.
"""
from __future__ import annotations

import json

import numpy as np

from .problem import Block, Constraint, SdpProblem, SdpSolution

FORMAT = "wpt-estim-sdp/1"


def _enc(x):
    if np.ndim(x) == 0:
        return float(np.real(x))  # scalar coefficients are real
    arr = np.asarray(x)
    if np.iscomplexobj(arr):
        return np.stack([arr.real, arr.imag], axis=-1).tolist()
    return arr.astype(float).tolist()


def _dec(x):
    if isinstance(x, (int, float)):
        return float(x)
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 3:
        return arr[..., 0] + 1j * arr[..., 1]
    return arr


def problem_to_dict(prob: SdpProblem) -> dict:
    return {
        "sense": prob.sense,
        "blocks": [{"name": b.name, "dim": b.dim, "hermitian": b.hermitian} for b in prob.blocks],
        "scalars": list(prob.scalars),
        "objective": {k: _enc(v) for k, v in prob.objective.items()},
        "constraints": [{"name": c.name, "op": c.op, "rhs": c.rhs,
                         "coeffs": {k: _enc(v) for k, v in c.coeffs.items()}}
                        for c in prob.constraints],
    }


def problem_from_dict(d: dict) -> SdpProblem:
    blocks = [Block(b["name"], int(b["dim"]), bool(b["hermitian"])) for b in d["blocks"]]
    cons = [Constraint({k: _dec(v) for k, v in c["coeffs"].items()}, c["op"], c["rhs"], c["name"])
            for c in d["constraints"]]
    return SdpProblem(blocks, list(d["scalars"]), {k: _dec(v) for k, v in d["objective"].items()},
                      d["sense"], cons)


def solution_to_dict(sol: SdpSolution) -> dict:
    return {
        "status": sol.status,
        "objective": float(sol.objective),
        "dual_objective": float(sol.dual_objective),
        "gap": float(sol.gap),
        "kkt_residual": float(sol.kkt_residual),
        "primal_infeasibility": float(sol.primal_infeasibility),
        "dual_infeasibility": float(sol.dual_infeasibility),
        "iterations": int(sol.iterations),
        "blocks": {k: _enc(v) for k, v in sol.blocks.items()},
        "scalars": {k: float(v) for k, v in sol.scalars.items()},
        "multipliers": [float(m) for m in np.asarray(sol.multipliers)],
        "dual_blocks": {k: _enc(v) for k, v in sol.dual_blocks.items()},
        "dual_scalars": {k: float(v) for k, v in sol.dual_scalars.items()},
    }


def dumps(prob: SdpProblem, sol: SdpSolution = None, indent=None) -> str:
    doc = {"format": FORMAT, "problem": problem_to_dict(prob)}
    if sol is not None:
        doc["solution"] = solution_to_dict(sol)
    return json.dumps(doc, indent=indent, allow_nan=True)


def dump(path, prob: SdpProblem, sol: SdpSolution = None) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(prob, sol, indent=1))


def loads(text: str):
    """``(problem, solution_dict_or_None)``; matrices come back as arrays."""
    doc = json.loads(text)
    if doc.get("format") != FORMAT:
        raise ValueError(f"not a {FORMAT} document")
    sol = doc.get("solution")
    if sol is not None:
        for key in ("blocks", "dual_blocks"):
            sol[key] = {k: _dec(v) for k, v in sol[key].items()}
    return problem_from_dict(doc["problem"]), sol
