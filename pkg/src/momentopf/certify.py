"""Point extraction from a moment vector and global-optimality certificates.

A relaxation value is a lower bound on the OPF optimum.  When the first-order
moments of the relaxation optimum form a feasible point whose cost matches
that bound, the point is globally optimal.  The moment-matrix rank is only
reported as a diagnostic.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .formulation import PolyProblem, cost, generation, x_to_voltage
from .moments import _index_of, _members
from .netmodel import NetworkCase

FEAS_TOL = 1e-6          # worst constraint violation accepted (p.u. quantities)
CERT_TOL = 1e-6          # relative gap between candidate cost and relaxation value
BOUND_TOL = 1e-3         # relative slack allowed between relaxation value and its dual bound
RANK_THRESHOLD = 1e-6    # singular values below this times the largest count as zero

VERDICTS = ("certified-global", "feasible-not-certified", "extraction-failed",
            "infeasible-problem")


@dataclass
class MomentSolution:
    """Optimal moment vector of the order-``d`` relaxation.

    ``y`` includes ``y_0 = 1`` and is indexed graded-lexicographically over
    ``nvars`` variables.  ``lower_bound`` is a rigorous bound on the
    relaxation value derived from the solver's dual iterates.
    """
    d: int
    nvars: int
    y: np.ndarray
    relax_value: float
    status: str = "optimal"
    lower_bound: float = -math.inf

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float)
        expected = len(_members(self.nvars, 2 * self.d))
        if self.y.shape != (expected,):
            raise ValueError(f"moment vector has {self.y.size} entries, expected {expected}")

    def moment_matrix(self) -> np.ndarray:
        basis = _members(self.nvars, self.d)
        index = _index_of(self.nvars, 2 * self.d)
        k = len(basis)
        M = np.empty((k, k))
        for r, a in enumerate(basis):
            for c in range(r, k):
                M[r, c] = M[c, r] = self.y[index[tuple(i + j for i, j in zip(a, basis[c]))]]
        return M

    @classmethod
    def from_sdp(cls, relax, sol) -> "MomentSolution":
        """Wrap an ``SDPSolution`` of ``relax.to_sdp()``."""
        return cls(relax.d, relax.nvars, relax.full_y(sol.y), sol.primal_obj, sol.status,
                   sol.lower_bound)


@dataclass
class Certificate:
    candidate_x: np.ndarray
    candidate_value: float
    relax_value: float
    gap: float
    max_violation: float
    verdict: str
    moment_matrix_rank: int
    order: int = 0
    lower_bound: float = -math.inf
    solver_status: str = ""

    @property
    def certified(self) -> bool:
        return self.verdict == "certified-global"

    def to_dict(self) -> dict:
        out = asdict(self)
        out["candidate_x"] = [float(v) for v in self.candidate_x]
        return {k: _json_number(v) for k, v in out.items()}


@dataclass
class OpfSolution:
    voltages: np.ndarray                       # complex, per bus (p.u.)
    p_gen: dict = field(default_factory=dict)  # generator bus -> MW
    q_gen: dict = field(default_factory=dict)  # generator bus -> MVAr
    objective: float = math.nan                # $/h

    def to_dict(self) -> dict:
        return {
            "voltages": [{"re": float(v.real), "im": float(v.imag),
                          "magnitude": float(abs(v)),
                          "angle_deg": float(np.degrees(np.angle(v)))} for v in self.voltages],
            "p_gen": {str(k): float(v) for k, v in self.p_gen.items()},
            "q_gen": {str(k): float(v) for k, v in self.q_gen.items()},
            "objective": _json_number(self.objective),
        }


def _json_number(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def numerical_rank(M, threshold: float = RANK_THRESHOLD) -> int:
    s = np.linalg.svd(np.asarray(M, dtype=float), compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > threshold * s[0]))


def extract_point(sol: MomentSolution) -> tuple[np.ndarray, int]:
    """First-order moments ``x_i = y_{e^i}`` and the moment-matrix rank."""
    x = sol.y[1:1 + sol.nvars].copy()
    rank = numerical_rank(sol.moment_matrix()) if np.all(np.isfinite(sol.y)) else -1
    return x, rank


def certify(prob: PolyProblem, case: NetworkCase | None, sol: MomentSolution,
            feas_tol: float = FEAS_TOL, cert_tol: float = CERT_TOL,
            bound_tol: float = BOUND_TOL) -> Certificate:
    """Judge the candidate extracted from ``sol``.

    ``certified-global`` needs a feasible candidate (``max_violation <=
    feas_tol``) whose cost is within ``cert_tol (1 + |relax_value|)`` of the
    relaxation value.  Unless the solver reported ``optimal``, the relaxation
    value must also be backed by its dual bound to ``bound_tol``, since a
    moment vector alone is only an upper estimate of the relaxation value.
    ``case`` is accepted for symmetry with the OPF front end; the test itself
    only needs ``prob``.
    """
    x, rank = extract_point(sol)
    relax = float(sol.relax_value)
    scale = 1.0 + abs(relax)
    if sol.status == "infeasible":
        return Certificate(x, math.nan, relax, math.nan, math.nan, "infeasible-problem",
                           rank, sol.d, sol.lower_bound, sol.status)
    if not np.all(np.isfinite(x)) or not math.isfinite(relax):
        return Certificate(x, math.nan, relax, math.nan, math.inf, "extraction-failed",
                           rank, sol.d, sol.lower_bound, sol.status)
    value = float(prob.objective(x))
    viol = prob.max_violation(x)
    gap = value - relax
    backed = sol.status == "optimal" or relax - sol.lower_bound <= bound_tol * scale
    if viol <= feas_tol and gap <= cert_tol * scale and backed:
        verdict = "certified-global"
    elif viol <= feas_tol:
        verdict = "feasible-not-certified"
    else:
        verdict = "extraction-failed"
    return Certificate(x, value, relax, gap, viol, verdict, rank, sol.d, sol.lower_bound,
                       sol.status)


def to_opf_solution(x, case: NetworkCase, reference: int | None = None) -> OpfSolution:
    """Voltages and generator outputs for a candidate ``x``.

    ``x`` has ``2n - 1`` entries with the imaginary part of bus ``reference``
    (default the last bus) dropped, or ``2n`` entries when the phase is free.
    """
    x = np.asarray(x, dtype=float)
    n = case.n
    if x.size == 2 * n - 1:
        ref = n - 1 if reference is None else reference
    elif x.size == 2 * n:
        ref = None
    else:
        raise ValueError(f"candidate has {x.size} entries for a {n}-bus case")
    v = x_to_voltage(x, n, ref)
    gen = generation(case, v)
    return OpfSolution(v, {k: g[0] for k, g in gen.items()}, {k: g[1] for k, g in gen.items()},
                       cost(case, v))


def report(cert: Certificate, opf: OpfSolution | None, **extra) -> str:
    """JSON report combining a certificate and its OPF solution."""
    body = {"certificate": cert.to_dict(),
            "solution": None if opf is None else opf.to_dict()}
    body.update(extra)
    return json.dumps(body, indent=2, sort_keys=False)
