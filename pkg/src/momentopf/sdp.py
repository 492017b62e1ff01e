"""Dense primal-dual interior-point solver for small block SDPs.

Problem form, over a free vector ``y``::

    min  c^T y + offset
    s.t. S_j(y) = F_j0 + sum_i y_i F_ji  PSD   for every block j
         A_eq y = b_eq                          (optional, eliminated up front)

Its conic dual is ``max -sum_j tr(F_j0 X_j) + offset`` subject to
``sum_j tr(F_ji X_j) = c_i`` and ``X_j`` PSD.  The method is the infeasible
path-following scheme with Nesterov-Todd scaling and a Mehrotra
predictor-corrector, solving the Schur complement system densely.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

log = logging.getLogger(__name__)

STEP_FRACTION = 0.98
DEFAULT_TOL = 1e-9
REFINE_STEPS = 2
Y_FEASIBLE = 1e-9      # block residual below which an iterate's y counts as feasible
STALL_ITERS = 8        # iterations without progress before divergence is checked
STALL_GROWTH = 1e8     # growth of the primal residual treated as divergence
RESTORE_FRACTION = 1e-2  # Schur-solve error in F*(dX), relative to tol, that triggers a correction
DENSE_FRACTION = 0.2   # block coefficient density above which dense algebra is used


class InconsistentEqualities(ValueError):
    pass


class Block:
    """Symmetric-matrix-valued affine map ``F0 + sum_i y_i F_i``.

    Stored as the dense constant ``F0`` and a sparse matrix ``A`` of shape
    ``(E, nvars)`` over the upper-triangular positions ``(ia, ib)``.
    """

    def __init__(self, side, ia, ib, F0, A, label=""):
        self.side = int(side)
        self.ia = np.asarray(ia, dtype=int)
        self.ib = np.asarray(ib, dtype=int)
        self.F0 = np.asarray(F0, dtype=float)
        self.A = sp.csr_matrix(A)
        self.label = label
        self.diag = self.ia == self.ib
        # tr(F X) = sum_e A[e] * w[e] * X[ia, ib]
        self.w = np.where(self.diag, 1.0, 2.0)
        nnz_max = self.A.shape[0] * self.A.shape[1]
        # blocks made dense by equality elimination are multiplied with BLAS
        self.A_op = self.A.toarray() if nnz_max and self.A.nnz > DENSE_FRACTION * nnz_max \
            else self.A

    @classmethod
    def from_entries(cls, side, rows, cols, var, coef, nvars=None, label=""):
        """Build from ``(row, col, variable, coefficient)`` quadruples.

        ``var == -1`` marks a constant.  Entries may sit in either triangle and
        repeated positions add up.
        """
        rows = np.asarray(rows, dtype=int)
        cols = np.asarray(cols, dtype=int)
        var = np.asarray(var, dtype=int)
        coef = np.asarray(coef, dtype=float)
        r, c = np.minimum(rows, cols), np.maximum(rows, cols)
        F0 = np.zeros((side, side))
        const = var < 0
        np.add.at(F0, (r[const], c[const]), coef[const])
        F0 = F0 + np.triu(F0, 1).T
        iu = np.triu_indices(side)
        pos = np.full((side, side), -1, dtype=int)
        pos[iu] = np.arange(len(iu[0]))
        lin = ~const
        n = int(nvars if nvars is not None else (var[lin].max() + 1 if lin.any() else 0))
        A = sp.coo_matrix((coef[lin], (pos[r[lin], c[lin]], var[lin])),
                          shape=(len(iu[0]), n)).tocsr()
        used = np.flatnonzero(A.getnnz(axis=1))
        return cls(side, iu[0][used], iu[1][used], F0, A[used], label)

    def resized(self, nvars):
        A = self.A.tocoo()
        return Block(self.side, self.ia, self.ib, self.F0,
                     sp.coo_matrix((A.data, (A.row, A.col)), shape=(A.shape[0], nvars)),
                     self.label)

    def affine(self, y) -> np.ndarray:
        """``F0 + sum_i y_i F_i``."""
        M = np.zeros((self.side, self.side))
        M[self.ia, self.ib] = self.A_op @ y
        M = M + np.triu(M, 1).T
        return self.F0 + M

    def linear(self, y) -> np.ndarray:
        M = np.zeros((self.side, self.side))
        M[self.ia, self.ib] = self.A_op @ y
        return M + np.triu(M, 1).T

    def adjoint(self, X) -> np.ndarray:
        """``(tr(F_i X))_i``."""
        return self.A_op.T @ (self.w * X[self.ia, self.ib])

    def matrices(self):
        """Dense ``F_i`` for every variable (tests and export only)."""
        out = []
        for i in range(self.A.shape[1]):
            e = np.zeros(self.A.shape[1])
            e[i] = 1.0
            out.append(self.linear(e))
        return out

    def schur(self, W) -> np.ndarray:
        """``(tr(F_i W F_k W))_{ik}``."""
        a, b = self.ia, self.ib
        K = W[np.ix_(a, a)] * W[np.ix_(b, b)] + W[np.ix_(a, b)] * W[np.ix_(b, a)]
        s = np.where(self.diag, 0.5, 1.0)
        K *= 2.0 * np.outer(s, s)
        AK = self.A_op.T @ K           # dense (n, E)
        return np.asarray((self.A_op.T @ AK.T).T)


@dataclass
class SDPInstance:
    nvars: int
    c: np.ndarray
    blocks: list
    offset: float = 0.0
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    y_bound: np.ndarray | None = None  # optional a-priori bounds |y_i| <= y_bound_i

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        self.blocks = [b if b.A.shape[1] == self.nvars else b.resized(self.nvars)
                       for b in self.blocks]
        if self.c.shape != (self.nvars,):
            raise ValueError("objective length does not match nvars")
        if self.y_bound is not None:
            self.y_bound = np.asarray(self.y_bound, dtype=float)
            if self.y_bound.shape != (self.nvars,):
                raise ValueError("y_bound length does not match nvars")

    def objective(self, y) -> float:
        return float(self.c @ y + self.offset)

    def min_eigs(self, y) -> np.ndarray:
        return np.array([np.linalg.eigvalsh(b.affine(y))[0] for b in self.blocks])


@dataclass
class SDPSolution:
    y: np.ndarray
    block_duals: list
    primal_obj: float
    dual_obj: float
    status: str  # optimal | infeasible | unbounded | numerical-failure
    residuals: dict
    iterations: int = 0
    history: list = field(default_factory=list)
    lower_bound: float = -math.inf  # valid bound from the best dual iterate

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


# --- solver ------------------------------------------------------------------

def _eliminate(inst: SDPInstance):
    """Rewrite ``A_eq y = b_eq`` as ``y = y_p + N z``."""
    A = np.atleast_2d(np.asarray(inst.A_eq, dtype=float))
    b = np.asarray(inst.b_eq, dtype=float)
    y_p = np.linalg.lstsq(A, b, rcond=None)[0]
    if np.linalg.norm(A @ y_p - b) > 1e-9 * (1 + np.linalg.norm(b)):
        raise InconsistentEqualities("inconsistent equality constraints")
    N = sla.null_space(A)
    blocks = []
    for blk in inst.blocks:
        F0 = blk.affine(y_p)
        AN = blk.A @ N
        iu = np.triu_indices(blk.side)
        pos = np.full((blk.side, blk.side), -1)
        pos[iu] = np.arange(len(iu[0]))
        full = np.zeros((len(iu[0]), N.shape[1]))
        full[pos[blk.ia, blk.ib]] = AN
        used = np.flatnonzero(np.abs(full).max(axis=1) > 0) if full.size else np.array([], int)
        blocks.append(Block(blk.side, iu[0][used], iu[1][used], F0, full[used], blk.label))
    red = SDPInstance(N.shape[1], N.T @ inst.c, blocks, inst.offset + float(inst.c @ y_p))
    return red, y_p, N


def _constant_only(b: "Block") -> bool:
    """True when ``F0`` has an entry outside the support of the linear part."""
    rest = b.F0.copy()
    rest[b.ia, b.ib] = 0.0
    rest[b.ib, b.ia] = 0.0
    return bool(np.abs(rest).max(initial=0.0) > 0)


def _opposing_pairs(blocks) -> list:
    """Index pairs ``(j, k)`` with ``B_k(y) = -B_j(y)`` identically.

    Pairs whose constant part cannot be cancelled by ``y`` are left alone;
    the solver then reports them infeasible in the usual way.
    """
    groups, pairs, used = {}, [], set()
    for j, b in enumerate(blocks):
        key = (b.side, b.ia.tobytes(), b.ib.tobytes())
        groups.setdefault(key, []).append(j)
    for group in groups.values():
        for pos, j in enumerate(group):
            bj = blocks[j]
            if j in used or _constant_only(bj):
                continue
            scale = max(np.abs(bj.F0).max(initial=0.0), np.abs(bj.A.data).max(initial=0.0), 1.0)
            for k in group[pos + 1:]:
                bk = blocks[k]
                if (k not in used and np.abs(bj.F0 + bk.F0).max(initial=0.0) <= 1e-14 * scale
                        and abs(bj.A + bk.A).max() <= 1e-14 * scale):
                    pairs.append((j, k))
                    used |= {j, k}
                    break
    return pairs


def _merge_opposing(inst: SDPInstance):
    """Replace opposing block pairs by the equalities ``B_j(y) = 0``.

    Such pairs (an equality written as two inequalities) leave no strictly
    feasible ``y``; as equalities they are eliminated exactly.
    """
    pairs = _opposing_pairs(inst.blocks)
    if not pairs:
        return inst, []
    rows = [inst.blocks[j].A.toarray() for j, _ in pairs]
    rhs = [-inst.blocks[j].F0[inst.blocks[j].ia, inst.blocks[j].ib] for j, _ in pairs]
    dropped = {i for pair in pairs for i in pair}
    keep = [b for i, b in enumerate(inst.blocks) if i not in dropped]
    A_eq, b_eq = np.vstack(rows), np.concatenate(rhs)
    if inst.A_eq is not None and len(inst.A_eq):
        A_eq = np.vstack([inst.A_eq, A_eq])
        b_eq = np.concatenate([inst.b_eq, b_eq])
    merged = SDPInstance(inst.nvars, inst.c, keep, inst.offset, A_eq, b_eq, inst.y_bound)
    return merged, pairs


def _split_pair_duals(inst: SDPInstance, merged: SDPInstance, pairs, X_kept) -> list:
    """Block duals of ``inst`` from those of ``merged``.

    The equality multipliers ``lam`` are recovered by least squares from
    ``c - F^*(X) = A_eq^T lam``.  On pair ``(j, k)`` they form a symmetric
    matrix whose positive part goes to block ``j`` and negative part to ``k``.
    """
    r = inst.c - sum((b.adjoint(x) for b, x in zip(merged.blocks, X_kept)), np.zeros(inst.nvars))
    lam = np.linalg.lstsq(merged.A_eq.T, r, rcond=None)[0]
    dropped = {i for pair in pairs for i in pair}
    out = [None] * len(inst.blocks)
    for i, x in zip([i for i in range(len(inst.blocks)) if i not in dropped], X_kept):
        out[i] = x
    at = len(lam) - sum(len(inst.blocks[j].ia) for j, _ in pairs)
    for j, k in pairs:
        b = inst.blocks[j]
        E = len(b.ia)
        L = np.zeros((b.side, b.side))
        L[b.ia, b.ib] = lam[at:at + E] / b.w
        L[b.ib, b.ia] = L[b.ia, b.ib]
        at += E
        w, V = np.linalg.eigh(L)
        out[j] = (V * np.maximum(w, 0.0)) @ V.T
        out[k] = (V * np.maximum(-w, 0.0)) @ V.T
    return out


def _max_step(L, D) -> float:
    """Largest ``a`` with ``L L^T + a D`` PSD (capped at 1e30)."""
    T = sla.solve_triangular(L, D, lower=True)
    T = sla.solve_triangular(L, T.T, lower=True)
    lam = np.linalg.eigvalsh(0.5 * (T + T.T))[0]
    return 1e30 if lam >= 0 else -1.0 / lam


def _chol(M):
    """Lower Cholesky factor, flooring tiny or negative eigenvalues if needed."""
    try:
        return np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        w, V = np.linalg.eigh(0.5 * (M + M.T))
        w = np.maximum(w, 1e-14 * max(w.max(), 1e-300))
        # QR of the symmetric square root gives a triangular factor
        R = np.linalg.qr((V * np.sqrt(w)) @ V.T, mode="r")
        return (R * np.sign(np.diag(R))[:, None]).T


def _nt_scaling(X, S):
    """``G`` and ``v`` with ``G^-1 X G^-T = G^T S G = diag(v)``; ``W = G G^T``."""
    L = _chol(X)
    R = _chol(S).T  # S = R^T R
    U, d, Qt = np.linalg.svd(R @ L)
    d = np.maximum(d, 1e-300)
    G = L @ Qt.T / np.sqrt(d)
    return G, d, L


def _dual_bound(inst: SDPInstance, X, ray: bool = False) -> float:
    """Lower bound on ``c^T y + offset`` over feasible ``y`` implied by ``X``.

    ``X`` is clipped to the PSD cone and its residual ``c - F^*(X)`` is charged
    against ``|y_i| <= y_bound_i``; equality multipliers absorb what they can.
    With ``ray`` the objective is dropped: a positive value then proves that
    no feasible ``y`` exists.
    """
    if inst.y_bound is None:
        return -math.inf
    Xp = []
    for x in X:
        w, V = np.linalg.eigh(0.5 * (x + x.T))
        Xp.append((V * np.maximum(w, 0.0)) @ V.T)
    r = -sum(b.adjoint(x) for b, x in zip(inst.blocks, Xp))
    val = -sum(float(np.sum(b.F0 * x)) for b, x in zip(inst.blocks, Xp))
    if not ray:
        r = r + inst.c
        val += inst.offset
    if inst.A_eq is not None and len(inst.A_eq):
        A = np.atleast_2d(inst.A_eq)
        lam = np.linalg.lstsq(A.T, r, rcond=None)[0]
        r = r - A.T @ lam
        val += float(lam @ inst.b_eq)
    return float(val - np.abs(r) @ inst.y_bound)


def solve(inst: SDPInstance, tol: float = DEFAULT_TOL, max_iter: int = 100,
          log_iterates: bool = False, callback=None) -> SDPSolution:
    """Solve ``inst``; ``tol`` bounds relative gap and both infeasibilities.

    ``callback(iteration, y, X)`` is called on every iterate with the
    unscaled decision vector and block duals.

    When ``inst.y_bound`` is set, every dual iterate is turned into a valid
    lower bound (kept in ``lower_bound``) and into an infeasibility test; a
    positive test stops the run with status ``infeasible``.  This matters for
    relaxations whose dual optimum is not attained, where the multipliers
    diverge and the duality gap never closes.
    """
    if not (1e-13 <= tol <= 1e-4):
        raise ValueError("tol must lie in [1e-13, 1e-4]")
    merged, pairs = _merge_opposing(inst)
    track = {"bound": -math.inf, "infeasible": False}

    def full_duals(X):
        return _split_pair_duals(inst, merged, pairs, X) if pairs else X

    def watch(k, y, X):
        if merged.y_bound is not None:
            track["bound"] = max(track["bound"], _dual_bound(merged, X))
            if _dual_bound(merged, X, ray=True) > 0:
                track["infeasible"] = True
        stop = callback(k, y, full_duals(X)) if callback is not None else False
        return stop or track["infeasible"]

    try:
        sol = _solve(merged, tol, max_iter, log_iterates, watch)
    except InconsistentEqualities:
        y = np.linalg.lstsq(merged.A_eq, merged.b_eq, rcond=None)[0]
        zero = [np.zeros((b.side, b.side)) for b in inst.blocks]
        return SDPSolution(y, zero, math.inf, math.inf, "infeasible",
                           dict(primal=math.inf, dual=math.inf, gap=math.inf))
    sol.block_duals = full_duals(sol.block_duals)
    sol.lower_bound = track["bound"]
    if track["infeasible"]:
        sol.status = "infeasible"
    return sol


def _solve(inst, tol, max_iter, log_iterates, callback) -> SDPSolution:
    if inst.A_eq is not None and len(inst.A_eq):
        red, y_p, N = _eliminate(inst)
        cb = None if callback is None else (lambda k, z, X: callback(k, y_p + N @ z, X))
        sol = _solve(red, tol, max_iter, log_iterates, cb)
        sol.y = y_p + N @ sol.y
        return sol

    m = inst.nvars
    blocks = inst.blocks
    # block and objective scaling; both leave the optimizer unchanged
    bscale = []
    for b in blocks:
        mx = max(np.abs(b.F0).max(initial=0.0), np.abs(b.A.data).max(initial=0.0))
        bscale.append(1.0 / mx if mx > 0 else 1.0)
    F0 = [b.F0 * s for b, s in zip(blocks, bscale)]
    As = [b.A * s for b, s in zip(blocks, bscale)]
    sb = [Block(b.side, b.ia, b.ib, f0, a, b.label) for b, f0, a in zip(blocks, F0, As)]
    cs = max(1.0, np.abs(inst.c).max(initial=0.0))
    c = inst.c / cs

    def Fop(Xs):
        out = np.zeros(m)
        for b, X in zip(sb, Xs):
            out += b.adjoint(X)
        return out

    # starting point
    X, S = [], []
    nrm_c = np.linalg.norm(c)
    for b in sb:
        n = b.side
        colnorm = np.sqrt(np.asarray(b.A.multiply(b.A).T @ b.w).ravel())
        xi = max(10.0, math.sqrt(n), math.sqrt(n) * float(np.max((1 + np.abs(c)) / (1 + colnorm)))
                 if m else 10.0)
        eta = max(10.0, math.sqrt(n), float(colnorm.max(initial=0.0)), np.linalg.norm(b.F0))
        X.append(xi * np.eye(n))
        S.append(eta * np.eye(n))
    y = np.zeros(m)
    Ntot = sum(b.side for b in sb)
    normF0 = 1.0 + math.sqrt(sum(np.linalg.norm(f) ** 2 for f in F0))
    history = []
    status = "numerical-failure"
    best = None
    y_last = None
    min_pinf = math.inf

    def objectives(X, y):
        pobj = float(c @ y)
        dobj = -sum(float(np.sum(f * x)) for f, x in zip(F0, X))
        return pobj, dobj

    it = 0
    for it in range(max_iter + 1):
        rp = c - Fop(X)
        Rd = [b.affine(y) - s for b, s in zip(sb, S)]
        gap = sum(float(np.sum(x * s)) for x, s in zip(X, S))
        mu = gap / Ntot
        pobj, dobj = objectives(X, y)
        pinf = np.linalg.norm(rp) / (1 + nrm_c)
        dinf = math.sqrt(sum(np.linalg.norm(r) ** 2 for r in Rd)) / normF0
        relgap = abs(pobj - dobj) / (1 + abs(pobj) + abs(dobj))
        slack = abs(float(rp @ y)) + abs(sum(float(np.sum(x * r)) for x, r in zip(X, Rd)))
        rec = dict(iter=it, primal_obj=pobj * cs + inst.offset, dual_obj=dobj * cs + inst.offset,
                   gap=gap * cs, slack=slack * cs, pinf=pinf, dinf=dinf, relgap=relgap, mu=mu)
        history.append(rec)
        if callback is not None and callback(it, y, [x * (s * cs) for x, s in zip(X, bscale)]):
            break
        log.debug("it %3d  p %.10e  d %.10e  gap %.2e  pinf %.2e  dinf %.2e", it,
                  rec["primal_obj"], rec["dual_obj"], relgap, pinf, dinf)
        score = max(relgap, pinf, dinf)
        if best is None or score < best[0]:
            best = (score, y.copy(), [x.copy() for x in X], it)
        if dinf <= Y_FEASIBLE:
            y_last = (y.copy(), it)
        if relgap <= tol and pinf <= tol and dinf <= tol:
            status = "optimal"
            break
        if it - best[3] >= STALL_ITERS:
            # no balanced progress for a while: stop once y has settled on a
            # feasible point, or once the multipliers diverge outright.  Both
            # happen for relaxations without a strictly feasible moment vector.
            settled = (dinf <= Y_FEASIBLE and abs(pobj - history[-STALL_ITERS]["primal_obj"] / cs
                                                  + inst.offset / cs) <= tol * (1 + abs(pobj)))
            if settled or pinf > STALL_GROWTH * max(min_pinf, tol):
                log.debug("stalled at iteration %d (pinf %.2e)", it, pinf)
                break
        min_pinf = min(min_pinf, pinf)
        # infeasibility certificates
        trF0X = -dobj
        if trF0X < 0:
            ray = np.linalg.norm(Fop(X)) / (-trF0X)
            if ray < 1e-8 and -trF0X > 1e3 * (1 + abs(pobj)):
                status = "infeasible"
                break
        if pobj < 0:
            Sd = [b.linear(y) for b in sb]
            viol = max(0.0, -min(np.linalg.eigvalsh(s)[0] for s in Sd)) if Sd else 0.0
            if viol / (-pobj) < 1e-8 and -pobj > 1e8 * (1 + abs(dobj)):
                status = "unbounded"
                break
        if it == max_iter:
            break

        # Nesterov-Todd scaling and Schur complement
        scal = [_nt_scaling(x, s) for x, s in zip(X, S)]
        W = [g @ g.T for g, _, _ in scal]
        M = np.zeros((m, m))
        for b, w in zip(sb, W):
            if b.A.nnz:
                M += b.schur(w)
        M = 0.5 * (M + M.T)
        try:
            cf = sla.cho_factor(M)
            msolve = lambda r: sla.cho_solve(cf, r)
        except np.linalg.LinAlgError:
            lu = sla.lu_factor(M + (1e-13 * np.abs(np.diag(M)).max(initial=1.0)) * np.eye(m))
            msolve = lambda r: sla.lu_solve(lu, r)
        gram_x = []

        def metric_gram():
            if not gram_x:
                gram_x.append(sum((b.schur(x) for b, x in zip(sb, X) if b.A.nnz),
                                  np.zeros((m, m))))
            return gram_x[0]

        WRW = [w @ r @ w for w, r in zip(W, Rd)]
        base_rhs = -Fop(WRW) - rp

        def direction(Rc):
            Hs = []
            for (g, v, _), r in zip(scal, Rc):
                Hs.append(g @ (2.0 * r / (v[:, None] + v[None, :])) @ g.T)
            rhs = base_rhs + Fop(Hs)
            dy = msolve(rhs)
            for _ in range(REFINE_STEPS):
                # iterative refinement against the unformed operator
                Mdy = Fop([w @ b.linear(dy) @ w for b, w in zip(sb, W)])
                dy = dy + msolve(rhs - Mdy)
            dS = [r + b.linear(dy) for r, b in zip(Rd, sb)]
            dX = [h - w @ ds @ w for h, w, ds in zip(Hs, W, dS)]
            dX = [0.5 * (d + d.T) for d in dX]
            err = rp - Fop(dX)
            if np.linalg.norm(err) > RESTORE_FRACTION * tol * (1 + nrm_c):
                # the Schur solve loses accuracy as mu -> 0; restore
                # F*(dX) = rp with a correction measured in the metric of X,
                # which keeps X + dX inside the cone
                z = np.linalg.lstsq(metric_gram(), err, rcond=None)[0]
                dX = [d + x @ b.linear(z) @ x for d, x, b in zip(dX, X, sb)]
            return dX, dy, dS

        def steps(dX, dS):
            ap = min([_max_step(l, d) for (_, _, l), d in zip(scal, dX)], default=1e30)
            ad = min([_max_step(_chol(s), d) for s, d in zip(S, dS)], default=1e30)
            return ap, ad

        # predictor
        Rc = [-np.diag(v * v) for _, v, _ in scal]
        dX, dy, dS = direction(Rc)
        ap, ad = steps(dX, dS)
        ap, ad = min(1.0, ap), min(1.0, ad)
        mu_aff = sum(float(np.sum((x + ap * dx) * (s + ad * ds)))
                     for x, dx, s, ds in zip(X, dX, S, dS)) / Ntot
        sigma = min(1.0, max(0.0, mu_aff / mu) ** 3) if mu > 0 else 0.0
        # corrector
        Rc = []
        for (g, v, l), dx, ds in zip(scal, dX, dS):
            ginv = np.linalg.solve(g, np.eye(len(v)))
            dxt = ginv @ dx @ ginv.T
            dst = g.T @ ds @ g
            cross = 0.5 * (dxt @ dst + dst @ dxt)
            Rc.append(sigma * mu * np.eye(len(v)) - np.diag(v * v) - cross)
        dX, dy, dS = direction(Rc)
        ap, ad = steps(dX, dS)
        ap = min(1.0, STEP_FRACTION * ap)
        ad = min(1.0, STEP_FRACTION * ad)
        X = [x + ap * d for x, d in zip(X, dX)]
        X = [0.5 * (x + x.T) for x in X]
        y = y + ad * dy
        S = [s + ad * d for s, d in zip(S, dS)]
        S = [0.5 * (s + s.T) for s in S]
        if max(ap, ad) < 1e-10:
            log.debug("step length collapsed")
            break

    if status == "numerical-failure" and best is not None:
        # multipliers from the best-balanced iterate; y from the latest
        # iterate whose blocks were feasible, as it is the most converged
        _, y_best, X, _ = best
        y = y_last[0] if y_last is not None else y_best
    pobj, dobj = objectives(X, y)
    rp = c - Fop(X)
    # infeasibility of y itself: the negative eigenvalues of its blocks
    neg = [np.minimum(np.linalg.eigvalsh(b.affine(y)), 0.0) for b in sb]
    res = dict(primal=float(np.linalg.norm(rp) / (1 + nrm_c)),
               dual=float(math.sqrt(sum(float(v @ v) for v in neg)) / normF0),
               gap=float(abs(pobj - dobj) / (1 + abs(pobj) + abs(dobj))))
    duals = [x * (s * cs) for x, s in zip(X, bscale)]
    return SDPSolution(y=y, block_duals=duals, primal_obj=pobj * cs + inst.offset,
                       dual_obj=dobj * cs + inst.offset, status=status, residuals=res,
                       iterations=it, history=history if log_iterates else [])


# --- SDPA sparse format ----------------------------------------------------

def write_sdpa(inst: SDPInstance, fh) -> None:
    """Write ``inst`` in SDPA sparse format (``min c^T x, sum x_i F_i - F_0 PSD``).

    The objective offset is stored in a ``*offset`` comment line.
    """
    fh.write(f"*offset {float(inst.offset)!r}\n")
    fh.write(f"{inst.nvars}\n{len(inst.blocks)}\n")
    fh.write(" ".join(str(b.side) for b in inst.blocks) + "\n")
    fh.write(" ".join(repr(float(v)) for v in inst.c) + "\n")
    for j, b in enumerate(inst.blocks, start=1):
        iu = np.triu_indices(b.side)
        for r, cc in zip(*iu):
            v = b.F0[r, cc]
            if v != 0:
                fh.write(f"0 {j} {r + 1} {cc + 1} {float(-v)!r}\n")
    for j, b in enumerate(inst.blocks, start=1):
        A = b.A.tocoo()
        for e, i, v in sorted(zip(A.row, A.col, A.data), key=lambda t: (t[1], t[0])):
            if v != 0:
                fh.write(f"{i + 1} {j} {b.ia[e] + 1} {b.ib[e] + 1} {float(v)!r}\n")


def read_sdpa(fh) -> SDPInstance:
    offset = 0.0
    tokens = []
    for line in fh:
        s = line.strip()
        if s.startswith("*offset"):
            offset = float(s.split()[1])
            continue
        if not s or s[0] in "*\"":
            continue
        tokens.append(s.replace(",", " ").replace("{", " ").replace("}", " ")
                      .replace("(", " ").replace(")", " ").split())
    m = int(tokens[0][0])
    nb = int(tokens[1][0])
    sides = [abs(int(t)) for t in tokens[2][:nb]]
    flat = [float(t) for row in tokens[3:] for t in row]
    c = np.array(flat[:m])
    ent = np.array(flat[m:]).reshape(-1, 5)
    blocks = []
    for j, side in enumerate(sides, start=1):
        sel = ent[ent[:, 1] == j]
        var = sel[:, 0].astype(int) - 1
        coef = np.where(var < 0, -sel[:, 4], sel[:, 4])
        blocks.append(Block.from_entries(side, sel[:, 2].astype(int) - 1,
                                         sel[:, 3].astype(int) - 1, var, coef, nvars=m))
    return SDPInstance(m, c, blocks, offset)
