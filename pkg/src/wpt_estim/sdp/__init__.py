"""Linear SDP modelling and an interior-point solver."""
from .kernels import BACKEND
from .problem import (Block, Constraint, SdpProblem, SdpSolution, complexify, embed_hermitian,
                      extract_rank_one, realify)
from .solver import DEFAULT_TOL, ToleranceSet, solve

__all__ = [
    "BACKEND", "Block", "Constraint", "SdpProblem", "SdpSolution", "ToleranceSet", "DEFAULT_TOL",
    "complexify", "embed_hermitian", "extract_rank_one", "realify", "solve",
]
