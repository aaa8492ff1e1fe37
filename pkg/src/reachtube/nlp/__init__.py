from .derivatives import Dual, DerivativeEngine, check_derivatives, fd_gradient, fd_jacobian
from .problem import NlpProblem, TranscribedProblem, VariableLayout, transcribe
from .solver import NlpSolution, SolverTolerances, solve

__all__ = [
    "Dual",
    "DerivativeEngine",
    "check_derivatives",
    "fd_gradient",
    "fd_jacobian",
    "NlpProblem",
    "TranscribedProblem",
    "VariableLayout",
    "transcribe",
    "NlpSolution",
    "SolverTolerances",
    "solve",
]
