"""Moment relaxations of polynomial problems and the lifted (rank) relaxation.

The order-``d`` relaxation of ``min f0 s.t. f_i >= 0`` over moments
``y_alpha``, ``|alpha| <= 2d``:

    min  sum_alpha f0_alpha y_alpha
    s.t. y_0 = 1
         (y_{a+b})_{a,b in N_d}                     PSD   (moment matrix)
         (sum_g f_i,g y_{a+b+g})_{a,b in N_{d-v_i}}  PSD   (localizing matrices)

with ``v_i = ceil(deg f_i / 2)``.  Monomials are ordered graded-lexicographically
everywhere, so ``y`` indices are stable across calls.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .formulation import PolyProblem, build_complex_opf, realify
from .netmodel import NetworkCase
from .polynomial import SparsePolynomial
from .sdp import Block, SDPInstance


class OrderTooSmall(ValueError):
    pass


@dataclass(frozen=True)
class MultiIndexSet:
    p: int
    q: int
    members: tuple

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    @property
    def index(self) -> dict:
        return _index_of(self.p, self.q)


@lru_cache(maxsize=None)
def _members(p: int, q: int) -> tuple:
    out = []
    for deg in range(q + 1):
        for combo in itertools.combinations_with_replacement(range(p), deg):
            alpha = [0] * p
            for i in combo:
                alpha[i] += 1
            out.append(tuple(alpha))
    return tuple(out)


@lru_cache(maxsize=None)
def _index_of(p: int, q: int) -> dict:
    return {a: k for k, a in enumerate(_members(p, q))}


def multi_index_set(p: int, q: int) -> MultiIndexSet:
    """All ``alpha`` in ``N^p`` with ``|alpha| <= q``, graded-lex ordered."""
    if p < 1 or q < 0:
        raise ValueError("need p >= 1 and q >= 0")
    return MultiIndexSet(p, q, _members(p, q))


@dataclass
class MomentBlock:
    """Symmetric matrix ``sum_k coef_k y[yidx_k]`` at ``(rows_k, cols_k)``, upper triangle."""
    side: int
    rows: np.ndarray
    cols: np.ndarray
    yidx: np.ndarray
    coef: np.ndarray
    label: str

    def evaluate(self, y) -> np.ndarray:
        M = np.zeros((self.side, self.side))
        np.add.at(M, (self.rows, self.cols), self.coef * np.asarray(y)[self.yidx])
        return M + np.triu(M, 1).T


@dataclass
class MomentSDP:
    d: int
    nvars: int
    basis: MultiIndexSet            # indexes y, |alpha| <= 2d
    objective: np.ndarray           # dense over y
    blocks: list                    # MomentBlock, moment matrix first
    labels: list = field(default_factory=list)
    radius2: float | None = None    # R with R - |x|^2 >= 0 among the constraints

    @property
    def moment_block(self) -> MomentBlock:
        return self.blocks[0]

    def point_moments(self, x) -> np.ndarray:
        """``y_alpha = x^alpha``: the moment vector of the Dirac measure at ``x``."""
        alphas = np.array(self.basis.members)
        return np.prod(np.asarray(x, dtype=float) ** alphas, axis=1)

    def objective_value(self, y) -> float:
        return float(self.objective @ y)

    def moment_bounds(self) -> np.ndarray | None:
        """``|y_alpha| <= R^(|alpha|/2)`` for every feasible ``y``, or ``None``.

        The diagonal of the ball localizing matrix gives
        ``sum_i y_{2b+2e_i} <= R y_{2b}``, hence ``y_{2g} <= R^|g|``, and the
        2x2 minors of the moment matrix extend this to all entries.
        """
        if self.radius2 is None or self.d < 1:
            return None
        deg = np.array([sum(a) for a in self.basis.members])
        return self.radius2 ** (deg / 2.0)

    def to_sdp(self) -> SDPInstance:
        """Solver instance over ``y[1:]`` with ``y_0 = 1`` substituted."""
        blocks = []
        for b in self.blocks:
            blocks.append(Block.from_entries(b.side, b.rows, b.cols, b.yidx - 1, b.coef,
                                             nvars=len(self.basis) - 1, label=b.label))
        bound = self.moment_bounds()
        return SDPInstance(len(self.basis) - 1, self.objective[1:], blocks,
                           offset=float(self.objective[0]),
                           y_bound=None if bound is None else bound[1:])

    def full_y(self, z) -> np.ndarray:
        return np.concatenate([[1.0], z])


def _localizing(poly: SparsePolynomial, basis, index, label) -> MomentBlock:
    rows, cols, yidx, coef = [], [], [], []
    terms = list(poly.terms.items())
    for r, a in enumerate(basis):
        for c in range(r, len(basis)):
            ab = tuple(i + j for i, j in zip(a, basis[c]))
            for g, fg in terms:
                rows.append(r)
                cols.append(c)
                yidx.append(index[tuple(i + j for i, j in zip(ab, g))])
                coef.append(fg)
    return MomentBlock(len(basis), np.array(rows, dtype=int), np.array(cols, dtype=int),
                       np.array(yidx, dtype=int), np.array(coef, dtype=float), label)


def min_order(prob: PolyProblem) -> int:
    return max([prob.objective.half_degree, 1] + [f.half_degree for f in prob.constraints])


def build_relaxation(prob: PolyProblem, d: int) -> MomentSDP:
    p = prob.nvars
    v0 = prob.objective.half_degree
    if d < max(v0, 1):
        raise OrderTooSmall(f"order {d} below objective half-degree {v0}")
    for f, lab in zip(prob.constraints, prob.labels):
        if f.half_degree > d:
            raise OrderTooSmall(
                f"order {d} below half-degree v_i={f.half_degree} of constraint {lab!r}")
    basis = multi_index_set(p, 2 * d)
    index = basis.index
    obj = np.zeros(len(basis))
    for a, c in prob.objective.terms.items():
        obj[index[a]] += c
    one = SparsePolynomial.constant(p, 1.0)
    blocks = [_localizing(one, _members(p, d), index, "moment")]
    for f, lab in zip(prob.constraints, prob.labels):
        blocks.append(_localizing(f, _members(p, d - f.half_degree), index, lab))
    radius2 = None
    if prob.ball_radius2 is not None:
        ball = prob.ball_radius2 - SparsePolynomial.quadratic_form(np.eye(p))
        if any(f == ball for f in prob.constraints):
            radius2 = float(prob.ball_radius2)
    return MomentSDP(d, p, basis, obj, blocks, ["moment"] + list(prob.labels), radius2)


# --- lifted quadratic (rank) relaxation --------------------------------------

@dataclass
class LiftedQuadraticSDP:
    """``min tr(A0 Y) + a0  s.t.  tr(Ai Y) + ai >= 0,  Y PSD``.

    ``extra`` holds additional PSD blocks affine in the entries of ``Y`` and
    in auxiliary scalars (Schur-complement epigraphs), used for the OPF variant
    with quadratic costs and apparent-power limits.
    """
    n_x: int
    A0: np.ndarray
    a0: float
    A: list
    a: list
    labels: list
    n_aux: int = 0
    aux_cost: np.ndarray | None = None
    extra: list = field(default_factory=list)  # (side, list of (r, c, kind, key, coef))

    def to_sdp(self) -> SDPInstance:
        n = self.n_x
        iu = np.triu_indices(n)
        pos = {(int(i), int(j)): k for k, (i, j) in enumerate(zip(*iu))}
        nY = len(pos)
        nvar = nY + self.n_aux

        def ycoef(A):
            # tr(A Y) for symmetric Y in upper-triangular coordinates
            S = 0.5 * (A + A.T)
            return np.where(iu[0] == iu[1], S[iu], 2.0 * S[iu])

        c = np.zeros(nvar)
        c[:nY] = ycoef(self.A0)
        if self.n_aux:
            c[nY:] = self.aux_cost
        blocks = [Block.from_entries(n, iu[0], iu[1], np.arange(nY), np.ones(nY), nvar, "Y")]
        for A, a, lab in zip(self.A, self.a, self.labels):
            co = ycoef(A)
            nz = np.flatnonzero(co)
            rows = np.zeros(nz.size + 1, dtype=int)
            idx = np.concatenate([nz, [-1]])
            coef = np.concatenate([co[nz], [a]])
            blocks.append(Block.from_entries(1, rows, rows, idx, coef, nvar, lab))
        for side, entries, lab in self.extra:
            rows, cols, idx, coef = [], [], [], []
            for r, cc, kind, key, val in entries:
                rows.append(r)
                cols.append(cc)
                coef.append(val)
                if kind == "const":
                    idx.append(-1)
                elif kind == "aux":
                    idx.append(nY + key)
                else:  # "trace": key is a matrix, expand over Y entries
                    co = ycoef(key)
                    nz = np.flatnonzero(co)
                    rows.pop(), cols.pop(), coef.pop()
                    rows += [r] * nz.size
                    cols += [cc] * nz.size
                    idx += list(nz)
                    coef += list(val * co[nz])
            blocks.append(Block.from_entries(side, np.array(rows), np.array(cols), np.array(idx),
                                             np.array(coef, dtype=float), nvar, lab))
        return SDPInstance(nvar, c, blocks, offset=self.a0)

    def unpack(self, z) -> np.ndarray:
        n = self.n_x
        iu = np.triu_indices(n)
        Y = np.zeros((n, n))
        Y[iu] = z[:len(iu[0])]
        return Y + np.triu(Y, 1).T


def _quadratic_parts(f: SparsePolynomial):
    """``(A, a)`` with ``f(x) = x^T A x + a``; raises if ``f`` has other terms."""
    p = f.nvars
    A = np.zeros((p, p))
    a = 0.0
    for alpha, c in f.terms.items():
        deg = sum(alpha)
        if deg == 0:
            a += c
        elif deg == 2:
            idx = [i for i, e in enumerate(alpha) for _ in range(e)]
            i, j = idx
            if i == j:
                A[i, i] += c
            else:
                A[i, j] += 0.5 * c
                A[j, i] += 0.5 * c
        else:
            raise ValueError(f"term of degree {deg}: not a quadratic form plus constant")
    return A, a


def build_rank_relaxation(prob: PolyProblem) -> LiftedQuadraticSDP:
    """Lift ``f_i(x) = x^T A_i x + a_i`` to ``tr(A_i Y) + a_i`` over ``Y`` PSD.

    Linear or higher-degree terms are rejected; the constants act as the
    coefficient of the homogenizing ``x_0^2 = 1``.
    """
    A0, a0 = _quadratic_parts(prob.objective)
    As, as_ = [], []
    for f, lab in zip(prob.constraints, prob.labels):
        try:
            A, a = _quadratic_parts(f)
        except ValueError as exc:
            raise ValueError(f"constraint {lab!r}: {exc}") from None
        As.append(A)
        as_.append(a)
    return LiftedQuadraticSDP(prob.nvars, A0, a0, As, as_, list(prob.labels))


def rank_relaxation_opf(case: NetworkCase) -> LiftedQuadraticSDP:
    """Rank relaxation of the OPF over ``W = x x^T`` with ``x = [Re v; Im v]``.

    Quadratic generation costs enter through epigraph variables
    ``t_k >= c2 p_k^2`` written as 2x2 PSD blocks, and apparent-power limits as
    3x3 blocks ``[[s^2, P, Q], [P, 1, 0], [Q, 0, 1]]``; both are Schur
    complements of the original quartic terms.
    """
    forms = build_complex_opf(case)
    n2 = 2 * case.n
    base = case.base_mva
    As, as_, labels = [], [], []
    for q in forms.inequalities:
        Hre, _ = realify(q.H)
        As.append(-Hre)
        as_.append(q.bound)
        labels.append(q.label)
    A0 = np.zeros((n2, n2))
    a0 = 0.0
    aux_cost, extra = [], []
    for g in case.generators:
        bus = case.buses[case.bus_index(g.bus)]
        Are, _ = realify(forms.active[g.bus])
        pd = bus.p_dem * base
        # p_gen = base tr(Are W) + pd
        A0 += g.c1 * base * Are
        a0 += g.c0 + g.c1 * pd
        if g.c2:
            if g.c2 < 0:
                raise ValueError("negative quadratic cost is not convex in p_gen")
            k = len(aux_cost)
            aux_cost.append(1.0)
            r = math.sqrt(g.c2)
            extra.append((2, [(0, 0, "aux", k, 1.0),
                              (0, 1, "trace", Are, r * base), (0, 1, "const", None, r * pd),
                              (1, 1, "const", None, 1.0)], f"cost@{g.bus}"))
    for c in forms.moduli:
        Cre, Cim = realify(c.C)
        extra.append((3, [(0, 0, "const", None, c.bound ** 2),
                          (0, 1, "trace", Cre, 1.0), (0, 2, "trace", Cim, 1.0),
                          (1, 1, "const", None, 1.0), (2, 2, "const", None, 1.0)], c.label))
    return LiftedQuadraticSDP(n2, A0, a0, As, as_, labels, n_aux=len(aux_cost),
                              aux_cost=np.array(aux_cost), extra=extra)
