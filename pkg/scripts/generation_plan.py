"""Track a generation plan on LMBM3 with a tightened 3-2 flow limit.

    python3 scripts/generation_plan.py --plan 1=170,2=150 --smax 50

The costs are replaced by the squared deviation from the planned outputs. The
script prints every relaxation order with its value, its rigorous lower bound
and its verdict, then the extracted generation.
"""
import argparse
import pathlib

from momentopf.cli import parse_plan, run_solve
from momentopf.formulation import with_deviation_objective
from momentopf.netmodel import load_case

ROOT = pathlib.Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--plan", type=parse_plan, default={1: 170.0, 2: 150.0})
    ap.add_argument("--smax", type=float, default=50.0, help="3-2 flow limit in MVA")
    ap.add_argument("--max-order", type=int, default=3)
    args = ap.parse_args()
    case = load_case(ROOT / "data" / "LMBM3.m")
    case = case.with_branch(3, 2, s_max=args.smax / case.base_mva)
    res = run_solve(with_deviation_objective(case, args.plan), max_order=args.max_order)
    for s in res.path:
        print(f"order {s.order}: value {s.relax_value:.6f}, lower bound {s.lower_bound:.6f}, "
              f"{s.verdict} ({s.solver_status})")
    print(f"status: {res.status}")
    if res.solution is not None:
        for bus, p in res.solution.p_gen.items():
            planned = f"plan {args.plan[bus]:.2f}" if bus in args.plan else "not planned"
            print(f"  P{bus} = {p:.2f} MW ({planned})")


if __name__ == "__main__":
    main()
