from pathlib import Path

import numpy as np
import pytest

from momentopf.netmodel import Branch, Bus, Generator, NetworkCase, load_case

DATA = Path(__file__).resolve().parent.parent / "data"


@pytest.fixture(scope="session")
def wb2():
    return load_case(DATA / "WB2.m")


@pytest.fixture(scope="session")
def lmbm3():
    return load_case(DATA / "LMBM3.m")


@pytest.fixture(scope="session")
def wb5():
    return load_case(DATA / "WB5.m")


def random_case(rng: np.random.Generator, n: int, transformers: bool = True) -> NetworkCase:
    """Connected random network with shunts, transformers and one generator per odd bus."""
    buses = [Bus(k + 1, rng.uniform(0, 1), rng.uniform(-0.3, 0.3), 0.9, 1.1,
                 rng.uniform(0, 0.05), rng.uniform(-0.1, 0.1)) for k in range(n)]
    gens = [Generator(k + 1, 0.0, 5.0, -3.0, 3.0, 0.0, rng.uniform(1, 10), 0.0)
            for k in range(0, n, 2)]
    branches = []
    for k in range(1, n):
        m = int(rng.integers(0, k))
        y = complex(rng.uniform(0.5, 3), -rng.uniform(2, 15))
        rho = complex(rng.uniform(0.9, 1.1), rng.uniform(-0.1, 0.1)) if transformers else 1
        branches.append(Branch(m + 1, k + 1, y, 1j * rng.uniform(0, 0.2), 1j * rng.uniform(0, 0.2),
                               rho, 1 + 0j))
    return NetworkCase(buses, gens, branches, 100.0, f"random{n}")


def constructed_sdp(rng: np.random.Generator, m: int | None = None, sides=None):
    """Random block SDP with a prescribed strictly complementary optimum.

    Returns ``(instance, y_star, optimal_value)``.
    """
    from momentopf.sdp import Block, SDPInstance
    m = m or int(rng.integers(2, 8))
    sides = sides or [int(s) for s in rng.integers(1, 6, size=rng.integers(1, 4))]
    y_star = rng.normal(size=m)
    blocks, c = [], np.zeros(m)
    for n in sides:
        Q, _ = np.linalg.qr(rng.normal(size=(n, n)))
        r = int(rng.integers(0, n + 1))
        lam = np.concatenate([rng.uniform(0.5, 2, r), np.zeros(n - r)])
        mu = np.concatenate([np.zeros(r), rng.uniform(0.5, 2, n - r)])
        X = (Q * lam) @ Q.T
        S = (Q * mu) @ Q.T
        iu = np.triu_indices(n)
        A = rng.normal(size=(len(iu[0]), m))
        F = [np.zeros((n, n)) for _ in range(m)]
        for i in range(m):
            F[i][iu] = A[:, i]
            F[i] = F[i] + np.triu(F[i], 1).T
        F0 = S - sum(yi * Fi for yi, Fi in zip(y_star, F))
        blocks.append(Block(n, iu[0], iu[1], F0, A))
        c += np.array([np.sum(Fi * X) for Fi in F])
    inst = SDPInstance(m, c, blocks)
    return inst, y_star, float(c @ y_star)


def random_poly_problem(rng: np.random.Generator, nvars: int, degree: int = 4,
                        n_constraints: int = 2):
    """Random problem of degree <= ``degree`` on the unit ball.

    Each extra constraint is positive at the origin, so the feasible set has
    an interior and the ball keeps it compact.
    """
    from momentopf.formulation import PolyProblem
    from momentopf.moments import multi_index_set
    from momentopf.polynomial import SparsePolynomial

    monos = [a for a in multi_index_set(nvars, degree) if sum(a) > 0]

    def poly(const):
        k = int(rng.integers(2, len(monos) + 1))
        picks = rng.choice(len(monos), size=k, replace=False)
        terms = {monos[i]: rng.normal() for i in picks}
        terms[(0,) * nvars] = const
        return SparsePolynomial(nvars, terms)

    ball = 1.0 - SparsePolynomial.quadratic_form(np.eye(nvars))
    cons = [poly(rng.uniform(0.5, 1.0)) for _ in range(n_constraints)] + [ball]
    labels = [f"g{i}" for i in range(n_constraints)] + ["ball"]
    return PolyProblem(nvars, poly(0.0), cons, labels, ball_radius2=1.0)


def random_box_qcqp(rng: np.random.Generator):
    """Indefinite quadratic objective on the box [-1, 1]^2 (plus the redundant ball)."""
    from momentopf.formulation import PolyProblem
    from momentopf.polynomial import SparsePolynomial

    Q = rng.normal(size=(2, 2))
    Q = 0.5 * (Q + Q.T)
    b = rng.normal(size=2)
    x = [SparsePolynomial.variable(2, i) for i in range(2)]
    f = SparsePolynomial.quadratic_form(Q) + b[0] * x[0] + b[1] * x[1]
    cons = [1.0 - x[0], 1.0 + x[0], 1.0 - x[1], 1.0 + x[1],
            2.0 - SparsePolynomial.quadratic_form(np.eye(2))]
    labels = ["x0_max", "x0_min", "x1_max", "x1_min", "ball"]
    return PolyProblem(2, f, cons, labels, ball_radius2=2.0), (Q, b)


def random_homogeneous_qcqp(rng: np.random.Generator):
    """Quadratic forms plus constants only, strictly feasible at the origin."""
    from momentopf.formulation import PolyProblem
    from momentopf.polynomial import SparsePolynomial

    n = int(rng.integers(2, 5))

    def sym():
        A = rng.normal(size=(n, n))
        return 0.5 * (A + A.T)

    cons = [SparsePolynomial.quadratic_form(-sym(), rng.uniform(0.5, 2.0))
            for _ in range(int(rng.integers(1, 4)))]
    cons.append(SparsePolynomial.quadratic_form(-np.eye(n), 1.0))
    labels = [f"q{i}" for i in range(len(cons) - 1)] + ["ball"]
    return PolyProblem(n, SparsePolynomial.quadratic_form(sym(), rng.normal()), cons, labels,
                       ball_radius2=1.0)


# one pass/fail line per acceptance criterion, printed after the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
