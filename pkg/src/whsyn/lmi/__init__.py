from .backends import (Solution, SolverOptions, Status, available_backends, bisect_gamma, register_backend,
                       solve)
from .certificate import (Certificate, Controller, Result, SingularG, VerifyReport, analyze, extract_controller,
                          header_text, run, synthesize, verify_certificate)
from .problems import (ProblemKind, SDPProblem, assemble, assemble_analysis, assemble_synthesis_nonswitching,
                       assemble_synthesis_switching, decision_count, gamma_feasibility)

__all__ = [
    "Solution", "SolverOptions", "Status", "available_backends", "bisect_gamma", "register_backend", "solve",
    "Certificate", "Controller", "Result", "SingularG", "VerifyReport", "analyze", "extract_controller",
    "header_text", "run", "synthesize", "verify_certificate", "ProblemKind", "SDPProblem", "assemble",
    "assemble_analysis", "assemble_synthesis_nonswitching", "assemble_synthesis_switching", "decision_count",
    "gamma_feasibility",
]
