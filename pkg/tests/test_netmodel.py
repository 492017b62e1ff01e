import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from momentopf.netmodel import (Branch, Bus, CaseError, Generator, NetworkCase,
                                branch_current_coefficients, build_admittance, dump_native,
                                load_case, parse_case, parse_matpower, parse_native)

from conftest import DATA, random_case


def test_wb2_admittance_matches_hand_computation(wb2):
    br = wb2.branches[0]
    Y = build_admittance(wb2)
    assert Y[0, 0] == pytest.approx(br.y + br.y_gr_from)
    assert Y[0, 1] == pytest.approx(-br.y)
    assert Y[1, 1] == pytest.approx(br.y + br.y_gr_to)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 6))
def test_admittance_currents_match_branch_currents(seed, n):
    """Injected current equals the sum of branch-end currents plus the bus shunt."""
    rng = np.random.default_rng(seed)
    case = random_case(rng, n)
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    i_bus = np.array([complex(b.g_shunt, b.b_shunt) for b in case.buses]) * v
    for br in case.branches:
        for from_end in (True, False):
            l_id, m_id = (br.from_bus, br.to_bus) if from_end else (br.to_bus, br.from_bus)
            l, m = case.bus_index(l_id), case.bus_index(m_id)
            a_l, a_m = branch_current_coefficients(br, from_end)
            i_bus[l] += a_l * v[l] + a_m * v[m]
    np.testing.assert_allclose(build_admittance(case) @ v, i_bus, atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 6))
def test_admittance_symmetric_without_phase_shift(seed, n):
    rng = np.random.default_rng(seed)
    case = random_case(rng, n, transformers=False)
    Y = build_admittance(case)
    np.testing.assert_allclose(Y, Y.T, atol=1e-14)
    shunt = np.array([complex(b.g_shunt, b.b_shunt) for b in case.buses])
    ground = np.zeros(n, dtype=complex)
    for br in case.branches:
        ground[case.bus_index(br.from_bus)] += br.y_gr_from
        ground[case.bus_index(br.to_bus)] += br.y_gr_to
    np.testing.assert_allclose(Y.sum(axis=1), shunt + ground, atol=1e-12)


def test_native_round_trip(wb5):
    again = parse_native(dump_native(wb5))
    assert again.buses == wb5.buses
    assert again.generators == wb5.generators
    for a, b in zip(again.branches, wb5.branches):
        assert a == b


def test_parse_case_detects_format():
    assert parse_case((DATA / "WB2.m").read_text()).n == 2


@pytest.mark.parametrize("text, fragment", [
    ("BUS\n1 0 0 0.9\n", "5 or 7 fields"),
    ("1 0 0 0.9 1.1\n", "outside a section"),
    ("BUS\n1 0 0 1.1 0.9\n", "v_min"),
    ("BUS\n1 0 0 0.9 1.1\nGEN\n2 0 1 0 1 0 1 0\n", "missing bus"),
    ("BUS\n1 0 0 0.9 1.1\nBRANCH\n1 1 1-1j 0j 0j 1 1 inf inf inf inf\n", "self loop"),
    ("BUS\n1 0 0 0.9 1.1\n2 0 0 0.9 1.1\nBRANCH\n1 2 1-1j 0j 0j 0 1 inf inf inf inf\n",
     "zero transformer"),
    ("BUS\n1 x 0 0.9 1.1\n", "bad number"),
    ("BUS\n1 0 0 0.9 1.1\n1 0 0 0.9 1.1\n", "duplicate"),
])
def test_native_parser_errors(text, fragment):
    with pytest.raises(CaseError, match=fragment):
        parse_native(text)


def test_parser_error_carries_line_number():
    with pytest.raises(CaseError) as info:
        parse_native("BUS\n1 0 0 0.9 1.1\n2 0 0 1.2 1.1\n")
    assert info.value.line == 3


def test_matpower_errors():
    with pytest.raises(CaseError):
        parse_matpower("mpc.baseMVA = 100;\n")


def test_edits_are_functional(wb2):
    edited = wb2.with_bus(2, v_max=1.0)
    assert edited.buses[1].v_max == 1.0
    assert wb2.buses[1].v_max != 1.0
    with pytest.raises(CaseError):
        wb2.with_generator(2, q_min=0.0)
    with pytest.raises(CaseError):
        wb2.with_branch(1, 7, s_max=1.0)


def test_load_case_reads_all_archive_cases():
    sizes = {p.stem: load_case(p).n for p in DATA.glob("*.m")}
    assert sizes == {"WB2": 2, "LMBM3": 3, "WB5": 5}
