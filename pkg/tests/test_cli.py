"""End-to-end command-line behavior: formats, determinism, exit codes."""

import json

import pytest

from commsens import dense
from commsens.graph import Direction
from commsens.results import SensitivityRecord


def table_value(stdout, key):
    for line in stdout.splitlines():
        cells = line.split()
        if cells and cells[0] == key:
            return cells[1]
    raise AssertionError(f"key {key!r} not found in:\n{stdout}")


# -- communicability ---------------------------------------------------------------


def test_communicability_table(cli, path8_path):
    code, out, err = cli("communicability", path8_path)
    assert code == 0
    assert float(table_value(out, "nodes")) == 8
    assert float(table_value(out, "edges")) == 7
    assert abs(float(table_value(out, "ctn")) - 11.03) < 0.005
    assert float(table_value(out, "delta")) > 0  # auto-selected: not strongly connected
    assert "schema" not in out
    assert "command" not in out


def test_communicability_json_schema(cli, demo4_path):
    code, out, _ = cli("communicability", demo4_path, "--format", "json")
    assert code == 0
    payload = json.loads(out)
    assert payload["schema"] == "commsens/1"
    assert payload["command"] == "communicability"
    assert payload["nodes"] == 4
    assert payload["edges"] == 12
    assert payload["directed"] is True
    assert payload["delta"] == 0.0  # strongly connected: no shift needed
    assert payload["cpn"] > 0
    assert payload["kappa"] >= 1.0


def test_communicability_csv_carries_schema(cli, demo4_path):
    code, out, _ = cli("communicability", demo4_path, "--format", "csv")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "key,value"
    assert "schema,commsens/1" in lines
    assert "command,communicability" in lines


# -- rank --------------------------------------------------------------------------


def test_rank_spr_top_direction(cli, demo4_path):
    code, out, _ = cli("rank", demo4_path, "--method", "spr", "--top", "3",
                       "--format", "json")
    assert code == 0
    payload = json.loads(out)
    assert payload["command"] == "rank"
    assert payload["method"] == "spr"
    top = payload["records"][0]
    assert (top["i"], top["j"]) == (1, 3)
    assert round(top["value"], 4) == 0.4241
    values = [r["value"] for r in payload["records"]]
    assert values == sorted(values, reverse=True)


def test_rank_exact_with_change_reports_new_totals(cli, path8_path):
    code, out, _ = cli("rank", path8_path, "--method", "exact", "--top", "56",
                       "--change", "--format", "json")
    assert code == 0
    payload = json.loads(out)
    by_pair = {(r["i"], r["j"]): r for r in payload["records"]}
    first = payload["records"][0]
    assert (first["i"], first["j"]) == (8, 1)  # closing the full cycle wins
    assert abs(by_pair[(8, 1)]["ctn_after"] - 13.75) < 0.005
    assert abs(by_pair[(1, 3)]["ctn_after"] - 12.75) < 0.005
    assert first["cpn_after"] > 0


def test_rank_table_footer_shows_regularization(cli, path8_path):
    code, out, _ = cli("rank", path8_path, "--method", "spr", "--top", "2")
    assert code == 0
    assert "(regularization delta = " in out


def test_rank_estimated_matches_exact_ranking(cli, demo4, demo4_path):
    code, out, _ = cli("rank", demo4_path, "--method", "arnoldi-fd",
                       "--filter", "existing-edges", "--top", "1",
                       "--format", "json")
    assert code == 0
    top = json.loads(out)["records"][0]
    assert (top["i"], top["j"]) == (1, 3)
    exact = dense.total_sensitivity_exact(demo4, Direction(0, 2))
    assert abs(top["value"] - exact) / exact < 1e-3
    assert top["method"] == "arnoldi-fd"
    assert top["converged"] is True


def test_rank_top_zero_is_empty(cli, demo4_path):
    code, out, _ = cli("rank", demo4_path, "--top", "0", "--format", "json")
    assert code == 0
    assert json.loads(out)["records"] == []


def test_rank_csv_column_order(cli, demo4_path):
    code, out, _ = cli("rank", demo4_path, "--method", "exact", "--top", "2",
                       "--change", "0.5", "--format", "csv")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "i,j,method,approx,exact,steps,matvecs,ctn_after,cpn_after"
    assert len(lines) == 3


# -- sensitivity -------------------------------------------------------------------


def test_sensitivity_auto_uses_dense_path(cli, demo4, demo4_path):
    code, out, _ = cli("sensitivity", demo4_path, "1", "3", "--format", "json")
    assert code == 0
    payload = json.loads(out)
    assert payload["method"] == "exact"
    assert payload["symmetric"] is False
    assert payload["steps"] == 0
    exact = dense.total_sensitivity_exact(demo4, Direction(0, 2))
    assert payload["value"] == pytest.approx(exact, rel=1e-12)


def test_sensitivity_estimator_reports_work(cli, demo4_path):
    code, out, _ = cli("sensitivity", demo4_path, "1", "3",
                       "--method", "arnoldi-fd", "--format", "json")
    assert code == 0
    payload = json.loads(out)
    assert payload["method"] == "arnoldi-fd"
    assert payload["steps"] > 0
    assert payload["matvecs"] == 2 * payload["steps"]
    assert payload["converged"] is True


def test_sensitivity_undirected_orientation_invariance(cli, tmp_path):
    f = tmp_path / "tri.edges"
    f.write_text("1 2 2.0\n2 3 1.0\n1 3 0.5\n")
    code_a, out_a, _ = cli("sensitivity", str(f), "--undirected", "3", "1",
                           "--format", "json")
    code_b, out_b, _ = cli("sensitivity", str(f), "--undirected", "1", "3",
                           "--format", "json")
    assert code_a == code_b == 0
    a, b = json.loads(out_a), json.loads(out_b)
    assert a["symmetric"] is True
    assert a["value"] == b["value"]


@pytest.mark.parametrize("i,j,msg", [
    ("0", "2", "node ids"), ("1", "9", "node ids"), ("2", "2", "distinct")])
def test_sensitivity_rejects_bad_node_ids(cli, demo4_path, i, j, msg):
    code, _, err = cli("sensitivity", demo4_path, i, j)
    assert code == 2
    assert "commsens: data error:" in err
    assert msg in err


def test_sensitivity_nonconverged_estimate_exits_three(cli, demo4_path,
                                                       monkeypatch):
    from commsens import krylov

    def stub(op, d, cfg, m_fixed=None):
        return SensitivityRecord(d, "arnoldi-fd", 1.0, steps=cfg.m_max,
                                 matvecs=2 * cfg.m_max, converged=False)

    monkeypatch.setitem(krylov.ESTIMATORS, "arnoldi-fd", stub)
    code, out, _ = cli("sensitivity", demo4_path, "1", "3",
                       "--method", "arnoldi-fd", "--format", "json")
    assert code == 3
    assert json.loads(out)["converged"] is False


# -- compare -----------------------------------------------------------------------


def test_compare_all_methods_csv(cli, demo4_path):
    code, out, err = cli("compare", demo4_path, "--format", "csv")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "i,j,method,approx,exact,steps,matvecs"
    assert len(lines) == 1 + 12 * 5  # all existing edges, five estimators
    assert "wall" in err  # timing goes to stderr only
    for line in lines[1:]:
        cells = line.split(",")
        approx, exact = float(cells[3]), float(cells[4])
        assert abs(approx - exact) / abs(exact) < 1e-3


def test_compare_single_method_table_summary(cli, demo4_path):
    code, out, _ = cli("compare", demo4_path, "--method", "kkrs")
    assert code == 0
    assert "mean_steps" in out
    assert "max_rel_err" in out
    summary_line = [ln for ln in out.splitlines() if ln.startswith("kkrs")]
    assert len(summary_line) == 1
    assert float(summary_line[0].split()[1]) == 12  # directions covered


def test_compare_without_candidates_is_a_data_error(cli, demo4_path):
    code, _, err = cli("compare", demo4_path, "--filter", "non-edges")
    assert code == 2
    assert "no candidate directions" in err


def test_compare_stdout_is_deterministic(cli, demo4_path):
    code_a, out_a, _ = cli("compare", demo4_path, "--format", "csv")
    code_b, out_b, _ = cli("compare", demo4_path, "--format", "csv")
    assert code_a == code_b == 0
    assert out_a == out_b


# -- validate ----------------------------------------------------------------------


def test_validate_suite_passes(cli):
    code, out, _ = cli("validate", "--format", "json")
    assert code == 0
    payload = json.loads(out)
    assert payload["passed"] is True
    assert len(payload["checks"]) == 16
    assert all(c["ok"] for c in payload["checks"])


def test_validate_reports_failures_and_exits_three(cli):
    code, out, _ = cli("validate", "--tol", "1e-30")
    assert code == 3
    assert "FAIL" in out
    assert "of 16 checks passed" in out


# -- I/O surface -------------------------------------------------------------------


def test_out_flag_writes_file_instead_of_stdout(cli, demo4_path, tmp_path):
    target = tmp_path / "report.json"
    code, out, _ = cli("communicability", demo4_path, "--format", "json",
                       "--out", str(target))
    assert code == 0
    assert out == ""
    code2, direct, _ = cli("communicability", demo4_path, "--format", "json")
    assert code2 == 0
    assert target.read_text() == direct


def test_matrix_market_input_is_sniffed(cli, tmp_path):
    f = tmp_path / "cycle.mtx"
    f.write_text("%%MatrixMarket matrix coordinate real general\n"
                 "3 3 3\n1 2 1.0\n2 3 1.0\n3 1 1.0\n")
    code, out, _ = cli("communicability", str(f), "--format", "json")
    assert code == 0
    payload = json.loads(out)
    assert payload["nodes"] == 3
    assert payload["edges"] == 3
    assert payload["rho"] == pytest.approx(1.0, rel=1e-9)


def test_header_sniffing_without_extension(cli, tmp_path):
    f = tmp_path / "cycle_data"
    f.write_text("%%MatrixMarket matrix coordinate real general\n"
                 "3 3 3\n1 2 1.0\n2 3 1.0\n3 1 1.0\n")
    code, out, _ = cli("communicability", str(f), "--format", "json")
    assert code == 0
    assert json.loads(out)["nodes"] == 3


# -- exit codes --------------------------------------------------------------------


def test_usage_errors_exit_one(cli, demo4_path):
    assert cli()[0] == 1
    assert cli("frobnicate", demo4_path)[0] == 1
    assert cli("rank", demo4_path, "--method", "bogus")[0] == 1
    assert cli("communicability", demo4_path, "--directed", "--undirected")[0] == 1


def test_missing_file_is_a_data_error(cli):
    code, _, err = cli("communicability", "/nonexistent/graph.edges")
    assert code == 2
    assert "commsens: data error:" in err


def test_malformed_graph_is_a_data_error(cli, tmp_path):
    f = tmp_path / "bad.edges"
    f.write_text("1 2 0.0\n")
    code, _, err = cli("communicability", str(f))
    assert code == 2
    assert "commsens: data error:" in err


def test_empty_graph_is_a_data_error(cli, tmp_path):
    f = tmp_path / "empty.edges"
    f.write_text("# nothing here\n")
    code, _, err = cli("communicability", str(f))
    assert code == 2
    assert "no edges" in err


def test_conflicting_undirected_weights_are_a_data_error(cli, tmp_path):
    f = tmp_path / "conflict.edges"
    f.write_text("1 2 1.0\n2 1 3.0\n")
    code, _, err = cli("communicability", str(f), "--undirected")
    assert code == 2
    assert "commsens: data error:" in err


def test_negative_flags_are_data_errors(cli, demo4_path):
    code, _, err = cli("rank", demo4_path, "--top", "-1")
    assert code == 2
    assert "--top" in err
    code, _, err = cli("sensitivity", demo4_path, "1", "3", "--delta", "-0.5")
    assert code == 2
    assert "--delta" in err


def test_perron_failure_exits_three(cli, path8_path):
    # with the shift disabled the path graph is nilpotent: no dominant pair
    code, _, err = cli("rank", path8_path, "--method", "spr", "--delta", "0")
    assert code == 3
    assert "commsens: numerical failure:" in err
