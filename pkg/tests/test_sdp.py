import io
import math

import numpy as np
import pytest

from momentopf.sdp import Block, SDPInstance, read_sdpa, solve, write_sdpa

from conftest import constructed_sdp


def diag_block(values, nvars, var_coefs):
    """``diag(values) + sum_i y_i diag(var_coefs[i])``."""
    n = len(values)
    idx = np.arange(n)
    A = np.array(var_coefs, dtype=float).T.reshape(n, nvars)
    return Block(n, idx, idx, np.diag(values), A)


def test_scalar_block():
    # min y  s.t.  y - 3 >= 0
    inst = SDPInstance(1, [1.0], [Block(1, [0], [0], [[-3.0]], [[1.0]])])
    sol = solve(inst)
    assert sol.status == "optimal"
    assert sol.y[0] == pytest.approx(3.0, abs=1e-8)


def test_eigenvalue_example():
    # dual of: min tr(diag(1,2) X), tr(X) = 1, X PSD  ->  max t s.t. diag(1,2) - t I PSD
    inst = SDPInstance(1, [-1.0], [diag_block([1.0, 2.0], 1, [[-1.0, -1.0]])])
    sol = solve(inst)
    assert sol.status == "optimal"
    assert -sol.primal_obj == pytest.approx(1.0, abs=1e-8)
    np.testing.assert_allclose(sol.block_duals[0], np.diag([1.0, 0.0]), atol=1e-7)


def test_constructed_optima():
    rng = np.random.default_rng(2024)
    for _ in range(50):
        inst, y_star, value = constructed_sdp(rng)
        sol = solve(inst)
        assert sol.status == "optimal"
        assert sol.primal_obj == pytest.approx(value, abs=1e-8 * (1 + abs(value)))


def test_weak_duality_on_every_iterate():
    rng = np.random.default_rng(5)
    inst, _, _ = constructed_sdp(rng, m=6, sides=[4, 3, 2])
    records = []

    def record(k, y, X):
        # any PSD X with residual r bounds c^T y from below up to r^T y
        p = float(inst.c @ y)
        d = -sum(float(np.sum(b.F0 * x)) for b, x in zip(inst.blocks, X))
        r = inst.c - sum(b.adjoint(x) for b, x in zip(inst.blocks, X))
        slack = sum(float(np.sum(x * b.affine(y))) for b, x in zip(inst.blocks, X))
        records.append((p, d, float(r @ y), slack))

    solve(inst, callback=record, log_iterates=True)
    assert len(records) > 3
    for p, d, ry, slack in records:
        # c^T y - dual = r^T y + sum tr(X S(y)); the trace term is nonnegative when S(y) PSD
        assert p - d == pytest.approx(ry + slack, abs=1e-7 * (1 + abs(p)))
        assert d <= p + abs(ry) + 1e-7 * (1 + abs(p)) or slack < 0


def test_returned_blocks_are_psd():
    rng = np.random.default_rng(11)
    for _ in range(10):
        inst, _, _ = constructed_sdp(rng)
        sol = solve(inst, tol=1e-9)
        for b in inst.blocks:
            S = b.affine(sol.y)
            assert np.linalg.eigvalsh(S)[0] >= -1e-9 * (1 + np.linalg.norm(S))


def test_objective_scaling():
    rng = np.random.default_rng(3)
    inst, _, _ = constructed_sdp(rng, m=4, sides=[3, 2])
    base = solve(inst)
    scaled = solve(SDPInstance(inst.nvars, 7.5 * inst.c, inst.blocks))
    assert scaled.primal_obj == pytest.approx(7.5 * base.primal_obj, rel=1e-8, abs=1e-8)
    np.testing.assert_allclose(scaled.y, base.y, atol=1e-6)


def test_equalities_are_eliminated():
    # min y0 + y1 s.t. y0 = 2 y1, y >= 0 componentwise, y0 + y1 >= 3
    blocks = [diag_block([0.0, 0.0, -3.0], 2, [[1, 0, 1], [0, 1, 1]])]
    inst = SDPInstance(2, [1.0, 1.0], blocks, A_eq=np.array([[1.0, -2.0]]), b_eq=np.array([0.0]))
    sol = solve(inst)
    assert sol.status == "optimal"
    np.testing.assert_allclose(sol.y, [2.0, 1.0], atol=1e-7)


def test_opposing_blocks_become_equalities():
    # y0 - 1 >= 0 and 1 - y0 >= 0 force y0 = 1; min y1 s.t. y1 >= y0^2 via [[y1, y0], [y0, 1]]
    b1 = Block(1, [0], [0], [[-1.0]], [[1.0, 0.0]])
    b2 = Block(1, [0], [0], [[1.0]], [[-1.0, 0.0]])
    lift = Block(2, [0, 0, 1], [0, 1, 1], np.diag([0.0, 1.0]), [[0, 1], [1, 0], [0, 0]])
    inst = SDPInstance(2, [0.0, 1.0], [b1, b2, lift])
    sol = solve(inst)
    assert sol.status == "optimal"
    np.testing.assert_allclose(sol.y, [1.0, 1.0], atol=1e-7)
    assert len(sol.block_duals) == 3
    # recovered duals satisfy the dual equality constraints
    r = inst.c - sum(b.adjoint(x) for b, x in zip(inst.blocks, sol.block_duals))
    assert np.abs(r).max() < 1e-6


def test_infeasible_detected_with_bounds():
    # y >= 1 and y <= -1 with |y| <= 10
    blocks = [Block(1, [0], [0], [[-1.0]], [[1.0]]), Block(1, [0], [0], [[-1.0]], [[-1.0]])]
    inst = SDPInstance(1, [1.0], blocks, y_bound=np.array([10.0]))
    assert solve(inst).status == "infeasible"


def test_dual_bound_is_valid():
    rng = np.random.default_rng(8)
    for _ in range(10):
        inst, y_star, value = constructed_sdp(rng)
        inst.y_bound = np.abs(y_star) + 1.0
        sol = solve(inst)
        assert sol.lower_bound <= value + 1e-9 * (1 + abs(value))
        assert sol.lower_bound >= value - 1e-6 * (1 + abs(value))


def test_tolerance_range_enforced():
    inst = SDPInstance(1, [1.0], [Block(1, [0], [0], [[-3.0]], [[1.0]])])
    for tol in (1e-14, 1e-3):
        with pytest.raises(ValueError):
            solve(inst, tol=tol)


def test_sdpa_round_trip():
    rng = np.random.default_rng(9)
    inst, _, _ = constructed_sdp(rng, m=5, sides=[3, 1, 2])
    inst.offset = 1.25
    buf = io.StringIO()
    write_sdpa(inst, buf)
    again = read_sdpa(io.StringIO(buf.getvalue()))
    assert again.nvars == inst.nvars and again.offset == inst.offset
    np.testing.assert_array_equal(again.c, inst.c)
    y = rng.normal(size=inst.nvars)
    for a, b in zip(again.blocks, inst.blocks):
        np.testing.assert_allclose(a.affine(y), b.affine(y), atol=1e-14)


def test_sdpa_sign_convention():
    # SDPA: sum x_i F_i - F_0 PSD; a block 'y - 3 >= 0' has F_1 = 1, F_0 = 3
    inst = SDPInstance(1, [1.0], [Block(1, [0], [0], [[-3.0]], [[1.0]])])
    buf = io.StringIO()
    write_sdpa(inst, buf)
    lines = [l for l in buf.getvalue().splitlines() if not l.startswith("*")]
    assert "0 1 1 1 3.0" in lines and "1 1 1 1 1.0" in lines
