"""From network data to Hermitian quadratic forms and to a real polynomial problem.

The OPF is first written over complex voltages ``v``:

    min  sum_k c2 (v^H A_k v + pd_k)^2 + c1 (v^H A_k v + pd_k) + c0
    s.t. v^H B_i v <= b_i          (balance, generation, voltage and flow limits)
         |v^H C_i v| <= c_i        (apparent power limits)

and then over ``x = [Re v; Im v]``.  Generation variables are eliminated with
``p_gen = v^H A_k v + p_dem`` so that everything is a function of ``v``.
Equality constraints (balance at buses without a generator, fixed outputs)
become pairs of opposing inequalities.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .netmodel import CaseError, NetworkCase, branch_current_coefficients, build_admittance
from .polynomial import SparsePolynomial


def realify(M) -> tuple[np.ndarray, np.ndarray]:
    """Real ``2n x 2n`` matrices with ``v^H M v = x^T Mre x + j x^T Mim x``."""
    M = np.atleast_2d(np.asarray(M, dtype=complex))
    R, I = M.real, M.imag
    Mre = np.block([[R, -I], [I, R]])
    Mim = np.block([[I, R], [-R, I]])
    return Mre, Mim


def hermitian_part(M):
    return 0.5 * (M + M.conj().T)


@dataclass
class QuadInequality:
    """``v^H H v <= bound`` with ``H`` Hermitian."""
    H: np.ndarray
    bound: float
    label: str


@dataclass
class ModulusInequality:
    """``|v^H C v| <= bound``; ``C`` need not be Hermitian."""
    C: np.ndarray
    bound: float
    label: str


@dataclass
class HermitianFormSet:
    n: int
    active: dict            # bus id -> Hermitian A_k, v^H A_k v = active injection (p.u.)
    reactive: dict          # bus id -> Hermitian, reactive injection
    inequalities: list      # QuadInequality
    moduli: list            # ModulusInequality
    voltage_bounds: dict    # bus id -> (v_min, v_max), also present in inequalities


def injection_forms(Y: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Hermitian ``(P, Q)`` with ``v_k conj((Yv)_k) = v^H P v + j v^H Q v``."""
    n = Y.shape[0]
    E = np.zeros((n, n))
    E[k, k] = 1.0
    M = Y.conj().T @ E
    return hermitian_part(M), (M - M.conj().T) / 2j


def _bound_pair(out, H, lo, hi, label):
    """Append ``lo <= v^H H v <= hi`` as up to two one-sided forms."""
    if math.isfinite(hi):
        out.append(QuadInequality(H, hi, f"{label}_max"))
    if math.isfinite(lo):
        out.append(QuadInequality(-H, -lo, f"{label}_min"))


def build_complex_opf(case: NetworkCase) -> HermitianFormSet:
    n = case.n
    Y = build_admittance(case)
    active, reactive, ineqs, moduli, vbounds = {}, {}, [], [], {}
    for k, bus in enumerate(case.buses):
        P, Q = injection_forms(Y, k)
        active[bus.id], reactive[bus.id] = P, Q
        gen = case.generator_at(bus.id)
        if gen is None:
            _bound_pair(ineqs, P, -bus.p_dem, -bus.p_dem, f"P_bal@{bus.id}")
            _bound_pair(ineqs, Q, -bus.q_dem, -bus.q_dem, f"Q_bal@{bus.id}")
        else:
            _bound_pair(ineqs, P, gen.p_min - bus.p_dem, gen.p_max - bus.p_dem, f"P_gen@{bus.id}")
            _bound_pair(ineqs, Q, gen.q_min - bus.q_dem, gen.q_max - bus.q_dem, f"Q_gen@{bus.id}")
        E = np.zeros((n, n), dtype=complex)
        E[k, k] = 1.0
        _bound_pair(ineqs, E, bus.v_min ** 2 if bus.v_min > 0 else -math.inf,
                    bus.v_max ** 2, f"V@{bus.id}")
        vbounds[bus.id] = (bus.v_min, bus.v_max)

    for br in case.branches:
        for l_is_from in (True, False):
            l_id, m_id = (br.from_bus, br.to_bus) if l_is_from else (br.to_bus, br.from_bus)
            l, m = case.bus_index(l_id), case.bus_index(m_id)
            tag = f"{l_id}->{m_id}"
            if math.isfinite(br.vdiff_max):
                d = np.zeros(n, dtype=complex)
                d[l], d[m] = 1.0, -1.0
                ineqs.append(QuadInequality(np.outer(d.conj(), d), br.vdiff_max ** 2,
                                            f"Vdiff_max@{tag}"))
            a = np.zeros(n, dtype=complex)
            a[l], a[m] = branch_current_coefficients(br, l_is_from)
            if math.isfinite(br.i_max):
                ineqs.append(QuadInequality(np.outer(a.conj(), a), br.i_max ** 2,
                                            f"I_max@{tag}"))
            el = np.zeros(n)
            el[l] = 1.0
            S = np.outer(a.conj(), el)  # v^H S v = v_l conj(i_lm)
            if math.isfinite(br.p_max):
                _bound_pair(ineqs, hermitian_part(S), -br.p_max, br.p_max, f"Pflow@{tag}")
            if math.isfinite(br.s_max):
                moduli.append(ModulusInequality(S, br.s_max, f"S_max@{tag}"))
    return HermitianFormSet(n, active, reactive, ineqs, moduli, vbounds)


@dataclass
class PolyProblem:
    """``min f0(x) s.t. f_i(x) >= 0``.

    ``reference`` is the zero-based bus whose imaginary voltage part was
    eliminated, or ``None`` when the phase is left free (``2n`` variables).
    """
    nvars: int
    objective: SparsePolynomial
    constraints: list
    labels: list
    n_bus: int = 0
    reference: int | None = None
    ball_radius2: float | None = None
    meta: dict = field(default_factory=dict)

    @property
    def m(self) -> int:
        return len(self.constraints)

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        return self.objective(x), np.array([f(x) for f in self.constraints])

    def max_violation(self, x) -> float:
        _, g = self.evaluate(x)
        return float(max(0.0, -g.min())) if g.size else 0.0

    def to_json(self) -> str:
        return json.dumps({
            "nvars": self.nvars,
            "n_bus": self.n_bus,
            "reference": self.reference,
            "objective": self.objective.to_dict(),
            "constraints": [{"label": lab, **f.to_dict()}
                            for lab, f in zip(self.labels, self.constraints)],
        }, indent=1)


def voltage_to_x(v, reference: int | None = None) -> np.ndarray:
    """``[Re v; Im v]``, dropping ``Im v[reference]`` when given."""
    v = np.asarray(v, dtype=complex)
    x = np.concatenate([v.real, v.imag])
    if reference is not None:
        x = np.delete(x, v.size + reference)
    return x


def x_to_voltage(x, n: int, reference: int | None = None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if reference is not None:
        x = np.insert(x, n + reference, 0.0)
    return x[:n] + 1j * x[n:]


def _reduce(Q: np.ndarray, drop: int | None) -> np.ndarray:
    if drop is None:
        return Q
    return np.delete(np.delete(Q, drop, axis=0), drop, axis=1)


def objective_polynomial(case: NetworkCase, forms: HermitianFormSet,
                         drop: int | None) -> SparsePolynomial:
    base = case.base_mva
    p = 2 * case.n - (drop is not None)
    f0 = SparsePolynomial.constant(p, 0.0)
    for gen in case.generators:
        bus = case.buses[case.bus_index(gen.bus)]
        Are, _ = realify(forms.active[gen.bus])
        pg = SparsePolynomial.quadratic_form(_reduce(Are, drop) * base, bus.p_dem * base)
        f0 = f0 + gen.c0
        if gen.c1:
            f0 = f0 + pg * gen.c1
        if gen.c2:
            f0 = f0 + (pg * pg) * gen.c2
    return f0


def build_poly_opf(case: NetworkCase, fix_phase: bool = True, ball: bool = True,
                   reference: int | None = None) -> PolyProblem:
    """Real polynomial OPF over ``2n-1`` (phase fixed) or ``2n`` variables.

    With ``fix_phase`` the imaginary voltage at bus ``reference`` (default the
    last bus) is set to zero and its magnitude bounds become bounds on the
    real part, which requires ``v_min >= 0`` there.
    """
    n = case.n
    forms = build_complex_opf(case)
    ref = (n - 1 if reference is None else reference) if fix_phase else None
    drop = None if ref is None else n + ref
    p = 2 * n - (drop is not None)
    if ref is not None and case.buses[ref].v_min < 0:
        raise CaseError("reference bus needs v_min >= 0 to fix its phase")
    ref_id = None if ref is None else case.buses[ref].id

    constraints, labels = [], []
    for q in forms.inequalities:
        if ref_id is not None and q.label.startswith(f"V@{ref_id}_"):
            continue
        Hre, _ = realify(q.H)
        constraints.append(SparsePolynomial.quadratic_form(-_reduce(Hre, drop), q.bound))
        labels.append(q.label)
    for c in forms.moduli:
        Cre, Cim = realify(c.C)
        re = SparsePolynomial.quadratic_form(_reduce(Cre, drop))
        im = SparsePolynomial.quadratic_form(_reduce(Cim, drop))
        constraints.append(c.bound ** 2 - re * re - im * im)
        labels.append(c.label)
    if ref is not None:
        bus = case.buses[ref]
        xr = SparsePolynomial.variable(p, ref)
        constraints.append(xr - bus.v_min)
        labels.append(f"Vref_min@{ref_id}")
        if math.isfinite(bus.v_max):
            constraints.append(bus.v_max - xr)
            labels.append(f"Vref_max@{ref_id}")
    radius2 = None
    if ball:
        radius2 = float(sum(b.v_max ** 2 for b in case.buses))
        if math.isfinite(radius2):
            constraints.append(radius2 - SparsePolynomial.quadratic_form(np.eye(p)))
            labels.append("ball")
        else:
            radius2 = None

    f0 = objective_polynomial(case, forms, drop)
    return PolyProblem(p, f0, constraints, labels, n_bus=n, reference=ref,
                       ball_radius2=radius2, meta={"case": case.name})


def with_deviation_objective(case: NetworkCase, plan: dict) -> NetworkCase:
    """Replace costs by ``sum (p_gen - plan)^2`` over the generators in ``plan`` (MW)."""
    gens = []
    for g in case.generators:
        if g.bus in plan:
            pk = float(plan[g.bus])
            gens.append(replace(g, c0=pk * pk, c1=-2.0 * pk, c2=1.0))
        else:
            gens.append(replace(g, c0=0.0, c1=0.0, c2=0.0))
    missing = set(plan) - {g.bus for g in case.generators}
    if missing:
        raise CaseError(f"plan names buses without a generator: {sorted(missing)}")
    return replace(case, generators=tuple(gens))


def generation(case: NetworkCase, v) -> dict:
    """Active/reactive generation (MW, MVAr) per generator bus at voltages ``v``."""
    Y = build_admittance(case)
    v = np.asarray(v, dtype=complex)
    s = v * np.conj(Y @ v)
    out = {}
    for g in case.generators:
        k = case.bus_index(g.bus)
        bus = case.buses[k]
        out[g.bus] = ((s[k].real + bus.p_dem) * case.base_mva,
                      (s[k].imag + bus.q_dem) * case.base_mva)
    return out


def cost(case: NetworkCase, v) -> float:
    gen = generation(case, v)
    return float(sum(g.c2 * gen[g.bus][0] ** 2 + g.c1 * gen[g.bus][0] + g.c0
                     for g in case.generators))
