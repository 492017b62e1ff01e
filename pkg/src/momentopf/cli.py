"""Command-line front end: single solves with order escalation, sweeps, tables."""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, field
from decimal import Decimal

import numpy as np

from .certify import (CERT_TOL, FEAS_TOL, Certificate, MomentSolution, OpfSolution, certify,
                      to_opf_solution)
from .formulation import PolyProblem, build_poly_opf, with_deviation_objective
from .moments import build_rank_relaxation, build_relaxation, min_order, rank_relaxation_opf
from .netmodel import CaseError, NetworkCase, load_case
from .sdp import DEFAULT_TOL, solve

MAX_ORDER = 3
REPORT_DECIMALS = 2      # cents per hour, 1e-2 MW / MVAr

SWEEP_KINDS = {"vmax": "p.u.", "smax": "MVA", "qmin": "MVAr"}


# --- single solve ------------------------------------------------------------

@dataclass
class OrderStep:
    order: int
    relax_value: float
    lower_bound: float
    verdict: str
    solver_status: str


@dataclass
class SolveResult:
    certificate: Certificate
    solution: OpfSolution | None
    path: list = field(default_factory=list)   # OrderStep per order tried
    status: str = ""   # certified-global | infeasible-problem | order-budget-exhausted | ...

    @property
    def order(self) -> int:
        return self.certificate.order

    def to_dict(self) -> dict:
        return {"status": self.status,
                "path": [{k: (None if isinstance(v, float) and not math.isfinite(v) else v)
                          for k, v in asdict(s).items()} for s in self.path],
                "certificate": self.certificate.to_dict(),
                "solution": None if self.solution is None else self.solution.to_dict()}


def run_hierarchy(prob: PolyProblem, case: NetworkCase | None = None, order: int | None = None,
                  max_order: int = MAX_ORDER, tol: float = DEFAULT_TOL,
                  feas_tol: float = FEAS_TOL, cert_tol: float = CERT_TOL):
    """Relax ``prob`` at ``order``, or escalate from its minimal order.

    Escalation stops at the first certified order, at a proven infeasibility,
    or after ``max_order``.  Returns the last certificate and one
    ``OrderStep`` per order tried.
    """
    d_min = min_order(prob)
    if order is not None:
        if order < d_min:
            raise ValueError(f"order {order} below the minimal order {d_min}")
        orders = [order]
    else:
        orders = list(range(d_min, max(max_order, d_min) + 1))
    path, cert = [], None
    for d in orders:
        relax = build_relaxation(prob, d)
        sol = solve(relax.to_sdp(), tol=tol)
        cert = certify(prob, case, MomentSolution.from_sdp(relax, sol), feas_tol, cert_tol)
        path.append(OrderStep(d, cert.relax_value, cert.lower_bound, cert.verdict, sol.status))
        if cert.verdict in ("certified-global", "infeasible-problem"):
            break
    return cert, path


def run_solve(case: NetworkCase, order: int | None = None, max_order: int = MAX_ORDER,
              tol: float = DEFAULT_TOL, feas_tol: float = FEAS_TOL,
              cert_tol: float = CERT_TOL) -> SolveResult:
    """Solve one case with ``run_hierarchy`` and map the candidate back to voltages."""
    prob = build_poly_opf(case)
    cert, path = run_hierarchy(prob, case, order, max_order, tol, feas_tol, cert_tol)
    if cert.verdict in ("certified-global", "infeasible-problem") or order is not None:
        status = cert.verdict
    else:
        status = "order-budget-exhausted"
    opf = None
    if cert.verdict != "infeasible-problem" and np.all(np.isfinite(cert.candidate_x)):
        opf = to_opf_solution(cert.candidate_x, case, prob.reference)
    return SolveResult(cert, opf, path, status)


def rank_relaxation_value(case: NetworkCase, tol: float = DEFAULT_TOL) -> tuple[float, str]:
    """Optimal value of the rank relaxation of ``case`` and the solver status."""
    lifted = rank_relaxation_opf(case)
    sol = solve(lifted.to_sdp(), tol=tol)
    return sol.primal_obj, sol.status


def rank_relaxation_of_problem(case: NetworkCase, tol: float = DEFAULT_TOL) -> float:
    """Rank relaxation of the unfixed-phase polynomial problem (quadratic data only)."""
    prob = build_poly_opf(case, fix_phase=False)
    return solve(build_rank_relaxation(prob).to_sdp(), tol=tol).primal_obj


# --- sweeps ------------------------------------------------------------------

@dataclass(frozen=True)
class SweepSpec:
    """``kind`` is ``vmax`` (bus, p.u.), ``smax`` (branch, MVA) or ``qmin`` (bus, MVAr)."""
    kind: str
    target: tuple          # (bus,) or (from_bus, to_bus)
    lo: float
    hi: float
    points: int
    decimals: int = 2      # sweep values are rounded to this many decimals

    def __post_init__(self):
        if self.kind not in SWEEP_KINDS:
            raise ValueError(f"unknown sweep parameter {self.kind!r}")
        if not self.lo <= self.hi:
            raise ValueError("sweep needs lo <= hi")
        if self.points < 1:
            raise ValueError("sweep needs at least one point")

    @classmethod
    def parse(cls, text: str) -> "SweepSpec":
        """``vmax@2:0.976:1.035:10``, ``smax@3-2:28.35:53.60:10`` or ``qmin@5:-30.80:61.81:10``.

        The rounding precision follows the number of decimals written in the bounds.
        """
        try:
            param, lo, hi, n = text.split(":")
            kind, _, target = param.partition("@")
            ids = tuple(int(t) for t in target.split("-"))
            decimals = max(-Decimal(lo).as_tuple().exponent, -Decimal(hi).as_tuple().exponent, 0)
            spec = cls(kind, ids, float(lo), float(hi), int(n), int(decimals))
        except (ValueError, ArithmeticError) as exc:
            raise ValueError(f"bad sweep {text!r}: {exc}") from None
        if len(ids) != (2 if kind == "smax" else 1):
            raise ValueError(f"bad sweep target {target!r} for {kind}")
        return spec

    @property
    def unit(self) -> str:
        return SWEEP_KINDS[self.kind]

    @property
    def label(self) -> str:
        return f"{self.kind}@{'-'.join(map(str, self.target))}"

    def values(self) -> list:
        if self.points == 1:
            return [round(self.lo, self.decimals)]
        return [round(float(v), self.decimals)
                for v in np.linspace(self.lo, self.hi, self.points)]

    def apply(self, case: NetworkCase, value: float) -> NetworkCase:
        base = case.base_mva
        if self.kind == "vmax":
            return case.with_bus(self.target[0], v_max=value)
        if self.kind == "smax":
            return case.with_branch(*self.target, s_max=value / base)
        return case.with_generator(self.target[0], q_min=value / base)


@dataclass
class SweepRow:
    param_value: float
    relax_order_reached: int | None
    optimal_value: float | None
    rank_relax_value: float | None
    rank_exact: bool
    status: str


def _same_at_reporting(a, b) -> bool:
    return (a is not None and b is not None
            and abs(round(a, REPORT_DECIMALS) - round(b, REPORT_DECIMALS))
            <= 0.5 * 10 ** -REPORT_DECIMALS + 1e-9)


def sweep_row(case: NetworkCase, value: float, max_order: int = MAX_ORDER,
              tol: float = DEFAULT_TOL, spec: SweepSpec | None = None) -> SweepRow:
    point = spec.apply(case, value) if spec is not None else case
    try:
        res = run_solve(point, max_order=max_order, tol=tol)
    except (CaseError, ValueError, np.linalg.LinAlgError) as exc:
        return SweepRow(value, None, None, None, False, f"error: {exc}")
    try:
        rank_value, _ = rank_relaxation_value(point, tol)
    except (ValueError, np.linalg.LinAlgError):
        rank_value = rank_relaxation_of_problem(point, tol)
    cert = res.certificate
    if res.status == "certified-global":
        value_out, order = cert.candidate_value, cert.order
    else:
        value_out, order = None, None
    return SweepRow(value, order, value_out, rank_value,
                    _same_at_reporting(value_out, rank_value), res.status)


def run_sweep(case: NetworkCase, spec: SweepSpec, max_order: int = MAX_ORDER,
              tol: float = DEFAULT_TOL) -> list:
    """One row per sweep point, in increasing parameter order; failures stay in ``status``."""
    return [sweep_row(case, v, max_order, tol, spec) for v in spec.values()]


# --- rendering ---------------------------------------------------------------

def _money(v) -> str:
    return "-" if v is None else f"{v:.{REPORT_DECIMALS}f}"


def render_table(rows, fmt: str = "table", param: str = "param",
                 decimals: int | None = None) -> str:
    """Aligned text (inexact rank values in parentheses), CSV or JSON.

    ``decimals`` fixes how parameter values are printed in the text table;
    by default the shortest representation is used.
    """
    if fmt == "json":
        return json.dumps([asdict(r) for r in rows], indent=2) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([param, "relax_order", "optimal_value", "rank_relax_value", "rank_exact",
                    "status"])
        for r in rows:
            w.writerow([repr(r.param_value),
                        "" if r.relax_order_reached is None else r.relax_order_reached,
                        "" if r.optimal_value is None else f"{r.optimal_value:.{REPORT_DECIMALS}f}",
                        "" if r.rank_relax_value is None else
                        f"{r.rank_relax_value:.{REPORT_DECIMALS}f}",
                        str(bool(r.rank_exact)).lower(), r.status])
        return buf.getvalue()
    if fmt != "table":
        raise ValueError(f"unknown format {fmt!r}")
    body = []
    for r in rows:
        rank = _money(r.rank_relax_value)
        if r.rank_relax_value is not None and not r.rank_exact:
            rank = f"({rank})"
        order = "-" if r.relax_order_reached is None else str(r.relax_order_reached)
        pv = f"{r.param_value:g}" if decimals is None else f"{r.param_value:.{decimals}f}"
        body.append([pv, order, _money(r.optimal_value), rank])
    head = [param, "relax. order", "optimal value", "rank relax."]
    widths = [max(len(x) for x in col) for col in zip(head, *body)]
    lines = [" | ".join(h.rjust(w) for h, w in zip(head, widths)),
             "-+-".join("-" * w for w in widths)]
    lines += [" | ".join(c.rjust(w) for c, w in zip(row, widths)) for row in body]
    return "\n".join(lines) + "\n"


# --- entry point -------------------------------------------------------------

def parse_plan(text: str) -> dict:
    """``1=170,2=150`` -> ``{1: 170.0, 2: 150.0}`` (MW)."""
    plan = {}
    for item in text.split(","):
        bus, _, mw = item.partition("=")
        try:
            plan[int(bus)] = float(mw)
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad plan entry {item!r}") from None
    return plan


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="momentopf",
                                 description="Global AC-OPF through moment relaxations.")
    ap.add_argument("--case", required=True, help="MATPOWER-style .m file or native case file")
    ap.add_argument("--order", type=int, help="solve this relaxation order only")
    ap.add_argument("--max-order", type=int, default=MAX_ORDER)
    ap.add_argument("--tol", type=float, default=DEFAULT_TOL,
                    help="solver tolerance, 1e-13..1e-4 (1e-12 for a tighter run)")
    ap.add_argument("--sweep", type=SweepSpec.parse,
                    help="PARAM:LO:HI:N with PARAM vmax@BUS, smax@FROM-TO or qmin@BUS")
    ap.add_argument("--format", choices=("table", "csv", "json"), default="table")
    ap.add_argument("--rank-relaxation", action="store_true",
                    help="also report the rank relaxation value")
    ap.add_argument("--plan", type=parse_plan,
                    help="replace costs by squared deviation from BUS=MW,... ")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        case = load_case(args.case)
        if args.plan:
            case = with_deviation_objective(case, args.plan)
    except (OSError, CaseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.sweep is not None:
        rows = run_sweep(case, args.sweep, args.max_order, args.tol)
        param = f"{args.sweep.label} ({args.sweep.unit})"
        sys.stdout.write(render_table(rows, args.format, param, args.sweep.decimals))
        ok = all(r.status in ("certified-global", "infeasible-problem") for r in rows)
        return 0 if ok else 1
    try:
        res = run_solve(case, args.order, args.max_order, args.tol)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    rank = rank_relaxation_value(case, args.tol)[0] if args.rank_relaxation else None
    if args.format == "json":
        body = res.to_dict()
        if rank is not None:
            body["rank_relax_value"] = rank
        sys.stdout.write(json.dumps(body, indent=2) + "\n")
    else:
        _print_solve(res, rank, args.format)
    return 0 if res.status in ("certified-global", "infeasible-problem") else 1


def _print_solve(res: SolveResult, rank, fmt: str) -> None:
    out = sys.stdout
    if fmt == "csv":
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["order", "relax_value", "lower_bound", "verdict", "solver_status"])
        for s in res.path:
            w.writerow([s.order, f"{s.relax_value:.6f}", f"{s.lower_bound:.6f}", s.verdict,
                        s.solver_status])
        return
    for s in res.path:
        out.write(f"order {s.order}: relaxation {s.relax_value:.2f} $/h  ({s.verdict})\n")
    out.write(f"status: {res.status}\n")
    if res.solution is not None and res.status == "certified-global":
        sol = res.solution
        out.write(f"objective: {sol.objective:.2f} $/h\n")
        for bus, p in sol.p_gen.items():
            out.write(f"  generator @{bus}: P = {p:.2f} MW, Q = {sol.q_gen[bus]:.2f} MVAr\n")
        for k, v in enumerate(sol.voltages):
            out.write(f"  V{k + 1} = {abs(v):.4f} p.u. at {np.degrees(np.angle(v)):.3f} deg\n")
    if rank is not None:
        out.write(f"rank relaxation: {rank:.2f} $/h\n")


if __name__ == "__main__":
    sys.exit(main())
