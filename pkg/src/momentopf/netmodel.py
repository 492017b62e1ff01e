"""Network data model, case-file parsing and the bus admittance matrix.

Electrical quantities are held in per-unit on ``base_mva``; generator cost
coefficients stay in physical units ($/h, $/MWh, $/MW^2h).

Two text formats are read:

* the native format (see ``docs/case_format.md``), sections ``BUS``, ``GEN``
  and ``BRANCH`` with whitespace separated fields, ``#`` comments and complex
  numbers written as ``re+imj``;
* a MATPOWER subset: the numeric rows of ``mpc.bus``, ``mpc.gen``,
  ``mpc.branch`` and ``mpc.gencost`` (polynomial cost, degree <= 2).
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace

import numpy as np

INF = math.inf


class CaseError(ValueError):
    """Raised for malformed or inconsistent case data."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class Bus:
    id: int
    p_dem: float  # p.u.
    q_dem: float  # p.u.
    v_min: float
    v_max: float
    g_shunt: float = 0.0  # p.u. admittance to ground at the bus
    b_shunt: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.v_min <= self.v_max):
            raise CaseError(f"bus {self.id}: need 0 <= v_min <= v_max")


@dataclass(frozen=True)
class Generator:
    bus: int
    p_min: float  # p.u.
    p_max: float
    q_min: float
    q_max: float
    c0: float = 0.0  # $/h
    c1: float = 0.0  # $/MWh
    c2: float = 0.0  # $/MW^2h

    def __post_init__(self):
        if self.p_min > self.p_max:
            raise CaseError(f"generator at bus {self.bus}: p_min > p_max")
        if self.q_min > self.q_max:
            raise CaseError(f"generator at bus {self.bus}: q_min > q_max")


@dataclass(frozen=True)
class Branch:
    """A line or transformer between ``from_bus`` and ``to_bus``.

    ``y`` is the series admittance, ``y_gr_*`` the admittance to ground at
    each end and ``rho_*`` the ideal transformer ratio at each end.  Limits
    are per-unit; ``inf`` means no limit.  ``i_max``, ``vdiff_max``,
    ``p_max`` and ``s_max`` apply at both ends of the branch.
    """

    from_bus: int
    to_bus: int
    y: complex
    y_gr_from: complex = 0j
    y_gr_to: complex = 0j
    rho_from: complex = 1 + 0j
    rho_to: complex = 1 + 0j
    i_max: float = INF
    vdiff_max: float = INF
    p_max: float = INF
    s_max: float = INF

    def __post_init__(self):
        if self.rho_from == 0 or self.rho_to == 0:
            raise CaseError(
                f"branch {self.from_bus}-{self.to_bus}: zero transformer ratio")
        if self.from_bus == self.to_bus:
            raise CaseError(f"branch {self.from_bus}-{self.to_bus}: self loop")

    def ends(self):
        """Both directed orientations as ``(l, m, y_gr_l, rho_lm, rho_ml)``."""
        yield self.from_bus, self.to_bus, self.y_gr_from, self.rho_from, self.rho_to
        yield self.to_bus, self.from_bus, self.y_gr_to, self.rho_to, self.rho_from


@dataclass(frozen=True)
class NetworkCase:
    buses: tuple[Bus, ...]
    generators: tuple[Generator, ...]
    branches: tuple[Branch, ...]
    base_mva: float = 100.0
    name: str = ""
    _index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "buses", tuple(self.buses))
        object.__setattr__(self, "generators", tuple(self.generators))
        object.__setattr__(self, "branches", tuple(self.branches))
        index = {}
        for k, bus in enumerate(self.buses):
            if bus.id in index:
                raise CaseError(f"duplicate bus id {bus.id}")
            index[bus.id] = k
        object.__setattr__(self, "_index", index)
        seen = set()
        for gen in self.generators:
            if gen.bus not in index:
                raise CaseError(f"generator references missing bus {gen.bus}")
            if gen.bus in seen:
                raise CaseError(f"more than one generator at bus {gen.bus}")
            seen.add(gen.bus)
        for br in self.branches:
            for b in (br.from_bus, br.to_bus):
                if b not in index:
                    raise CaseError(
                        f"branch {br.from_bus}-{br.to_bus} references missing bus {b}")
        if self.base_mva <= 0:
            raise CaseError("base_mva must be positive")

    @property
    def n(self) -> int:
        return len(self.buses)

    def bus_index(self, bus_id: int) -> int:
        """Zero-based position of ``bus_id`` in ``buses``."""
        try:
            return self._index[bus_id]
        except KeyError:
            raise CaseError(f"unknown bus {bus_id}") from None

    def generator_at(self, bus_id: int) -> Generator | None:
        for gen in self.generators:
            if gen.bus == bus_id:
                return gen
        return None

    def directed_branches(self):
        """Every branch end ``(l, m)`` with its branch, as zero-based indices."""
        for br in self.branches:
            for l, m, *_ in br.ends():
                yield self.bus_index(l), self.bus_index(m), br

    # --- parameter edits used by sweeps ------------------------------------

    def with_bus(self, bus_id: int, **changes) -> "NetworkCase":
        k = self.bus_index(bus_id)
        buses = list(self.buses)
        buses[k] = replace(buses[k], **changes)
        return replace(self, buses=tuple(buses))

    def with_generator(self, bus_id: int, **changes) -> "NetworkCase":
        gens = list(self.generators)
        for j, g in enumerate(gens):
            if g.bus == bus_id:
                gens[j] = replace(g, **changes)
                return replace(self, generators=tuple(gens))
        raise CaseError(f"no generator at bus {bus_id}")

    def with_branch(self, l: int, m: int, **changes) -> "NetworkCase":
        brs = list(self.branches)
        hits = [j for j, b in enumerate(brs) if {b.from_bus, b.to_bus} == {l, m}]
        if not hits:
            raise CaseError(f"no branch between buses {l} and {m}")
        for j in hits:
            brs[j] = replace(brs[j], **changes)
        return replace(self, branches=tuple(brs))


def build_admittance(case: NetworkCase) -> np.ndarray:
    """Dense bus admittance matrix ``Y`` with ``i = Y v``."""
    n = case.n
    Y = np.zeros((n, n), dtype=complex)
    for k, bus in enumerate(case.buses):
        Y[k, k] += complex(bus.g_shunt, bus.b_shunt)
    for br in case.branches:
        for l_id, m_id, y_gr, rho_lm, rho_ml in br.ends():
            l, m = case.bus_index(l_id), case.bus_index(m_id)
            Y[l, l] += (br.y + y_gr) / abs(rho_lm) ** 2
            Y[l, m] += -br.y / (rho_ml * np.conj(rho_lm))
    return Y


def branch_current_coefficients(br: Branch, l_is_from: bool) -> tuple[complex, complex]:
    """Coefficients ``(a_l, a_m)`` with ``i_lm = a_l v_l + a_m v_m``."""
    if l_is_from:
        y_gr, rho_lm, rho_ml = br.y_gr_from, br.rho_from, br.rho_to
    else:
        y_gr, rho_lm, rho_ml = br.y_gr_to, br.rho_to, br.rho_from
    a_l = (y_gr + br.y) / abs(rho_lm) ** 2
    a_m = -br.y / (np.conj(rho_lm) * rho_ml)
    return a_l, a_m


# --- native format ---------------------------------------------------------

_SECTIONS = ("BUS", "GEN", "BRANCH")


def _num(tok: str, lineno: int) -> float:
    try:
        return float(tok)
    except ValueError:
        raise CaseError(f"bad number {tok!r}", lineno) from None


def _cnum(tok: str, lineno: int) -> complex:
    try:
        return complex(tok)
    except ValueError:
        raise CaseError(f"bad complex number {tok!r}", lineno) from None


def parse_native(text: str) -> NetworkCase:
    base = 100.0
    name = ""
    section = None
    raw_buses, raw_gens, raw_branches = [], [], []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        head = toks[0].upper()
        if head == "BASE_MVA":
            if len(toks) != 2:
                raise CaseError("BASE_MVA takes one value", lineno)
            base = _num(toks[1], lineno)
            continue
        if head == "NAME":
            name = " ".join(toks[1:])
            continue
        if head in _SECTIONS and len(toks) == 1:
            section = head
            continue
        if section is None:
            raise CaseError(f"data outside a section: {line!r}", lineno)
        if section == "BUS":
            if len(toks) not in (5, 7):
                raise CaseError("BUS rows need 5 or 7 fields", lineno)
            vals = [_num(t, lineno) for t in toks]
            raw_buses.append((lineno, vals))
        elif section == "GEN":
            if len(toks) != 8:
                raise CaseError("GEN rows need 8 fields", lineno)
            raw_gens.append((lineno, [_num(t, lineno) for t in toks]))
        else:
            if len(toks) != 11:
                raise CaseError("BRANCH rows need 11 fields", lineno)
            vals = [_num(toks[0], lineno), _num(toks[1], lineno)]
            vals += [_cnum(t, lineno) for t in toks[2:7]]
            vals += [_num(t, lineno) for t in toks[7:]]
            raw_branches.append((lineno, vals))

    def checked(lineno, fn, *args, **kw):
        try:
            return fn(*args, **kw)
        except CaseError as exc:
            if exc.line is None:
                raise CaseError(str(exc), lineno) from None
            raise

    buses = []
    for lineno, v in raw_buses:
        g, b = (v[5], v[6]) if len(v) == 7 else (0.0, 0.0)
        buses.append(checked(lineno, Bus, int(v[0]), v[1] / base, v[2] / base,
                             v[3], v[4], g / base, b / base))
    gens = [checked(lineno, Generator, int(v[0]), v[1] / base, v[2] / base,
                    v[3] / base, v[4] / base, v[7], v[6], v[5])
            for lineno, v in raw_gens]
    branches = [checked(lineno, Branch, int(v[0]), int(v[1]), v[2], v[3], v[4], v[5],
                        v[6], v[7], v[8], v[9] / base, v[10] / base)
                for lineno, v in raw_branches]
    return NetworkCase(buses, gens, branches, base, name)


def _fmt_c(z: complex) -> str:
    return f"{z.real!r}{z.imag:+}j"


def dump_native(case: NetworkCase) -> str:
    """Serialize ``case`` to the native format; ``parse_native`` inverts it."""
    base = case.base_mva
    out = []
    if case.name:
        out.append(f"NAME {case.name}")
    out.append(f"BASE_MVA {base!r}")
    out.append("BUS")
    out.append("# id p_dem(MW) q_dem(MVAr) v_min v_max g_shunt(MW) b_shunt(MVAr)")
    for b in case.buses:
        out.append(" ".join(map(repr, [b.id, b.p_dem * base, b.q_dem * base, b.v_min,
                                       b.v_max, b.g_shunt * base, b.b_shunt * base])))
    out.append("GEN")
    out.append("# bus p_min p_max(MW) q_min q_max(MVAr) c2 c1 c0")
    for g in case.generators:
        out.append(" ".join(map(repr, [g.bus, g.p_min * base, g.p_max * base,
                                       g.q_min * base, g.q_max * base, g.c2, g.c1, g.c0])))
    out.append("BRANCH")
    out.append("# from to y y_gr_from y_gr_to rho_from rho_to "
               "i_max(p.u.) vdiff_max(p.u.) p_max(MW) s_max(MVA)")
    for r in case.branches:
        cplx = [_fmt_c(complex(z)) for z in (r.y, r.y_gr_from, r.y_gr_to,
                                             r.rho_from, r.rho_to)]
        lims = [repr(float(x)) for x in (r.i_max, r.vdiff_max,
                                         r.p_max * base, r.s_max * base)]
        out.append(" ".join([str(r.from_bus), str(r.to_bus)] + cplx + lims))
    return "\n".join(out) + "\n"


# --- MATPOWER subset ---------------------------------------------------------

_MP_TABLE = re.compile(r"mpc\.(\w+)\s*=\s*\[(.*?)\]\s*;", re.S)
_MP_SCALAR = re.compile(r"mpc\.baseMVA\s*=\s*([-+0-9.eE]+)\s*;")


def _mp_rows(body: str, first_line: int):
    rows = []
    for offset, line in enumerate(body.split("\n")):
        line = line.split("%", 1)[0]
        for chunk in line.split(";"):
            toks = chunk.replace(",", " ").split()
            if toks:
                rows.append((first_line + offset, [_num(t, first_line + offset) for t in toks]))
    return rows


def parse_matpower(text: str) -> NetworkCase:
    m = _MP_SCALAR.search(text)
    base = float(m.group(1)) if m else 100.0
    tables = {}
    for tm in _MP_TABLE.finditer(text):
        first = text.count("\n", 0, tm.start(2)) + 1
        tables[tm.group(1)] = _mp_rows(tm.group(2), first)
    for needed in ("bus", "gen", "branch"):
        if needed not in tables:
            raise CaseError(f"MATPOWER text has no mpc.{needed} table")

    buses = []
    for lineno, r in tables["bus"]:
        if len(r) < 13:
            raise CaseError("mpc.bus rows need 13 columns", lineno)
        try:
            buses.append(Bus(int(r[0]), r[2] / base, r[3] / base, r[12], r[11],
                             r[4] / base, r[5] / base))
        except CaseError as exc:
            raise CaseError(str(exc), lineno) from None

    costs = tables.get("gencost", [])
    gens = []
    for j, (lineno, r) in enumerate(tables["gen"]):
        if len(r) < 10:
            raise CaseError("mpc.gen rows need at least 10 columns", lineno)
        if r[7] <= 0:
            continue  # out of service
        c0 = c1 = c2 = 0.0
        if j < len(costs):
            cl, cr = costs[j]
            if int(cr[0]) != 2:
                raise CaseError("only polynomial gencost (model 2) is supported", cl)
            ncoef = int(cr[3])
            coef = cr[4:4 + ncoef]
            if ncoef > 3 and any(coef[:ncoef - 3]):
                raise CaseError("gencost degree above 2", cl)
            coef = list(coef[-3:])
            coef = [0.0] * (3 - len(coef)) + coef
            c2, c1, c0 = coef
        try:
            gens.append(Generator(int(r[0]), r[9] / base, r[8] / base, r[4] / base,
                                  r[3] / base, c0, c1, c2))
        except CaseError as exc:
            raise CaseError(str(exc), lineno) from None

    branches = []
    for lineno, r in tables["branch"]:
        if len(r) < 11:
            raise CaseError("mpc.branch rows need at least 11 columns", lineno)
        if r[10] <= 0:
            continue
        z = complex(r[2], r[3])
        if z == 0:
            raise CaseError("zero branch impedance", lineno)
        tap = r[8] if r[8] != 0 else 1.0
        rho = tap * np.exp(1j * math.radians(r[9]))
        s_max = r[5] / base if r[5] > 0 else INF
        try:
            branches.append(Branch(int(r[0]), int(r[1]), 1 / z, 0.5j * r[4], 0.5j * r[4],
                                   complex(rho), 1 + 0j, s_max=s_max))
        except CaseError as exc:
            raise CaseError(str(exc), lineno) from None
    return NetworkCase(buses, gens, branches, base)


def parse_case(text: str) -> NetworkCase:
    """Parse native or MATPOWER case text (detected by the ``mpc.`` prefix)."""
    if "mpc." in text:
        return parse_matpower(text)
    return parse_native(text)


def load_case(path) -> NetworkCase:
    with open(path, encoding="utf-8") as fh:
        case = parse_case(fh.read())
    if not case.name:
        import os
        case = replace(case, name=os.path.splitext(os.path.basename(str(path)))[0])
    return case
