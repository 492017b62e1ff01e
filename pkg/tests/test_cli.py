import csv
import io
import json

import pytest

from momentopf.cli import (SweepRow, SweepSpec, main, parse_plan, render_table, run_solve,
                           run_sweep)
from momentopf.formulation import build_poly_opf
from momentopf.moments import min_order
from momentopf.netmodel import dump_native

from conftest import DATA

WB2 = str(DATA / "WB2.m")


def test_sweep_spec_parse_and_rounding():
    spec = SweepSpec.parse("vmax@2:0.976:1.035:10")
    assert (spec.kind, spec.target, spec.points, spec.decimals) == ("vmax", (2,), 10, 3)
    values = spec.values()
    assert values[0] == 0.976 and values[-1] == 1.035 and len(values) == 10
    assert values[7] == 1.022
    assert SweepSpec.parse("smax@3-2:28.35:53.60:10").target == (3, 2)
    assert SweepSpec.parse("qmin@5:-30.80:61.81:10").values()[-1] == 61.81
    assert SweepSpec.parse("qmin@5:1:1:1").values() == [1.0]


@pytest.mark.parametrize("text", ["vmax@2:1:0.9:3", "pmax@2:0:1:3", "smax@3:0:1:3",
                                  "vmax@2:0:1", "vmax@2:0:1:0", "vmax@x:0:1:2"])
def test_sweep_spec_rejects_bad_input(text):
    with pytest.raises(ValueError):
        SweepSpec.parse(text)


def test_sweep_spec_applies_in_per_unit(wb5, lmbm3):
    spec = SweepSpec.parse("qmin@5:-30.80:61.81:10")
    edited = spec.apply(wb5, 61.81)
    assert edited.generator_at(5).q_min == pytest.approx(0.6181)
    spec = SweepSpec.parse("smax@3-2:28.35:53.60:10")
    edited = spec.apply(lmbm3, 50.0)
    assert [br.s_max for br in edited.branches if {br.from_bus, br.to_bus} == {2, 3}] == \
        [pytest.approx(0.5)]


def test_parse_plan():
    assert parse_plan("1=170,2=150") == {1: 170.0, 2: 150.0}


ROWS = [SweepRow(-20.51, 2, 1146.4812, 954.8249, False, "certified-global"),
        SweepRow(-30.80, 2, 945.8330, 945.8330, True, "certified-global"),
        SweepRow(61.81, None, None, 1114.9012, False, "infeasible-problem")]


def test_table_parenthesizes_inexact_rank_values_and_dashes_empty_rows():
    text = render_table(ROWS, "table", "qmin@5 (MVAr)", decimals=2)
    lines = text.splitlines()
    assert "1146.48 |    (954.82)" in lines[2]
    assert lines[3].endswith("945.83 |      945.83")
    assert lines[4].split("|")[1].strip() == "-" and "(1114.90)" in lines[4]
    assert lines[2].lstrip().startswith("-20.51")
    assert lines[3].lstrip().startswith("-30.80")


def test_csv_output_is_deterministic():
    a = render_table(ROWS, "csv", "qmin@5")
    assert a == render_table(ROWS, "csv", "qmin@5")
    rows = list(csv.reader(io.StringIO(a)))
    assert rows[0] == ["qmin@5", "relax_order", "optimal_value", "rank_relax_value",
                       "rank_exact", "status"]
    assert rows[1] == ["-20.51", "2", "1146.48", "954.82", "false", "certified-global"]
    assert rows[3][1:3] == ["", ""]


def test_json_output_round_trips():
    data = json.loads(render_table(ROWS, "json"))
    assert [r["param_value"] for r in data] == [-20.51, -30.8, 61.81]
    assert data[2]["optimal_value"] is None


def test_unknown_format_rejected():
    with pytest.raises(ValueError):
        render_table(ROWS, "xml")


def test_single_point_sweep_matches_solve(wb2):
    spec = SweepSpec.parse("vmax@2:1.022:1.022:1")
    row = run_sweep(wb2, spec)[0]
    res = run_solve(spec.apply(wb2, 1.022))
    assert row.status == res.status == "certified-global"
    assert row.optimal_value == res.certificate.candidate_value
    assert row.relax_order_reached == res.order


def test_solve_escalates_from_minimal_order(wb2):
    res = run_solve(wb2.with_bus(2, v_max=1.022))
    assert res.path[0].order == min_order(build_poly_opf(wb2))
    assert res.status == "certified-global"
    assert round(res.solution.objective, 2) == 905.73


def test_order_below_minimum_rejected(wb2):
    with pytest.raises(ValueError):
        run_solve(wb2, order=0)


def test_main_exit_codes(capsys, tmp_path, wb2):
    assert main(["--case", WB2]) == 0
    out = capsys.readouterr().out
    assert "status: certified-global" in out
    # the order-1 relaxation is not exact at this bound, so the budget runs out
    path = tmp_path / "wb2_1022.case"
    path.write_text(dump_native(wb2.with_bus(2, v_max=1.022)))
    assert main(["--case", str(path), "--max-order", "1"]) == 1
    assert "order-budget-exhausted" in capsys.readouterr().out
    assert main(["--case", str(tmp_path / "missing.m")]) == 2
    assert main(["--case", WB2, "--order", "0"]) == 2
    with pytest.raises(SystemExit):
        main(["--case", WB2, "--sweep", "vmax@2:bad"])


def test_main_json_report(capsys):
    assert main(["--case", WB2, "--format", "json", "--rank-relaxation"]) == 0
    body = json.loads(capsys.readouterr().out)
    assert body["status"] == "certified-global"
    assert body["certificate"]["verdict"] == "certified-global"
    assert "rank_relax_value" in body
    assert len(body["solution"]["voltages"]) == 2


def test_main_sweep_csv(capsys):
    assert main(["--case", WB2, "--sweep", "vmax@2:0.976:0.983:2", "--format", "csv"]) == 0
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert [r[2] for r in rows[1:]] == ["905.76", "905.73"]
