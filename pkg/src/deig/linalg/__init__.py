"""Dense eigen-update kernels: secular solver, deflation and a reference oracle."""

from deig.linalg.deflation import deflate, householder_to_e1, rank_one_eigenupdate
from deig.linalg.secular import (
    DEFAULT_XI,
    RankOneUpdate,
    SecularSolveResult,
    secular_function,
    secular_root,
    solve_all,
)

__all__ = [
    "DEFAULT_XI",
    "RankOneUpdate",
    "SecularSolveResult",
    "deflate",
    "householder_to_e1",
    "rank_one_eigenupdate",
    "secular_function",
    "secular_root",
    "solve_all",
]
