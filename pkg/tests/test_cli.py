import json

import numpy as np
import pytest

from nlshier.cli import main, resolve_table
from nlshier.io import RunManifest, csv_text, dumps, fmt_float


def run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr().out


def test_generate_nls(tmp_path, capsys):
    code, text = run(capsys, "generate", "--j", "1", "--out", str(tmp_path))
    assert code == 0 and "i q_t = -q_xx + 2 q^2 r" in text
    table = json.loads((tmp_path / "table.json").read_text())
    assert table["j"] == 1 and table["rule"] == "conj"
    man = RunManifest.read(tmp_path / "manifest.json")
    assert man.command == "generate" and set(man.outputs) == {"table.json", "equation.txt"}


def test_generate_flow_and_family(tmp_path, capsys):
    code, text = run(capsys, "generate", "--flow", "4", "--out", str(tmp_path / "f"))
    assert code == 0 and "alpha_4" in text
    code, text = run(capsys, "generate", "--fitted-soliton", "2", "--lam", "8", "--out", str(tmp_path / "s"))
    assert code == 0 and (tmp_path / "s" / "table.json").exists()
    fam = json.loads((tmp_path / "s" / "family.json").read_text())
    assert len(fam["terms"]) == 5


def test_table_file_round_trip(tmp_path, capsys):
    run(capsys, "generate", "--j", "2", "--out", str(tmp_path))
    table, rule, _ = resolve_table(str(tmp_path / "table.json"))
    assert table == resolve_table("hierarchy-j2")[0]


def test_usage_errors(tmp_path, capsys):
    assert run(capsys, "generate", "--out", str(tmp_path))[0] == 2
    assert run(capsys, "generate", "--j", "0", "--out", str(tmp_path))[0] == 2
    assert run(capsys, "simulate", "--table", "nonsense", "--out", str(tmp_path))[0] == 2
    assert run(capsys, "probe", "no-such-estimate")[0] == 2
    assert run(capsys, "generate", "--j", "1", "--config", str(tmp_path / "missing.json"))[0] == 2


def test_verify_appendix(tmp_path, capsys):
    code, text = run(capsys, "verify", "appendix", "--out", str(tmp_path))
    assert code == 0 and "MISMATCH" not in text and text.count("erratum") == 3
    rows = (tmp_path / "verify.csv").read_text().splitlines()
    assert len(rows) == 15


def test_verify_structure_small(tmp_path, capsys):
    code, _ = run(capsys, "verify", "structure", "--max-n", "4", "--max-j", "2", "--out", str(tmp_path))
    assert code == 0


def test_verify_soliton_mismatch_exit(tmp_path, capsys):
    code, text = run(capsys, "verify", "soliton", "--M", "128", "--tol", "1e-14", "--out", str(tmp_path))
    assert code == 1 and "MISMATCH" in text


def test_simulate_outputs(tmp_path, capsys):
    code, text = run(capsys, "simulate", "--table", "soliton-j1", "--L", "40", "--M", "256",
                     "--T", "0.1", "--dt", "0.01", "--out", str(tmp_path))
    assert code == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["steps"] == 10 and summary["max_error_vs_exact"] < 1e-6
    assert set(summary["drift"]) == {"I1", "I3"}
    assert (tmp_path / "drift.csv").read_text().startswith("t,I1_re,I1_im,I3_re,I3_im\n")


def test_simulate_nan_abort(tmp_path, capsys):
    with np.errstate(all="ignore"):
        code, text = run(capsys, "simulate", "--table", "hierarchy-j2", "--ic", "random", "--M", "128",
                         "--amplitude", "3", "--T", "1", "--dt", "0.01", "--out", str(tmp_path))
    assert code == 3 and "numeric abort" in text


def test_config_defaults(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"M": 128, "L": 40.0, "T": 0.05, "dt": 0.01}))
    code, _ = run(capsys, "simulate", "--table", "soliton-j1", "--config", str(cfg), "--out", str(tmp_path / "o"))
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert code == 0 and summary["M"] == 128 and summary["steps"] == 5


def test_illposed_outputs(tmp_path, capsys):
    code, _ = run(capsys, "illposed", "torus-plane-wave", "--n", "1..3", "--out", str(tmp_path / "a"))
    rows = (tmp_path / "a" / "separation.csv").read_text().splitlines()
    assert code == 0 and len(rows) == 4 and rows[2].split(",")[-1] == "5/2"
    code, _ = run(capsys, "illposed", "c3-symbol", "--N-list", "2,3", "--out", str(tmp_path / "b"))
    rows = (tmp_path / "b" / "c3_symbol.csv").read_text().splitlines()
    assert code == 0 and len(rows) == 7
    assert all(r.split(",")[5] == "0" for r in rows[1:])


def test_probe_command(tmp_path, capsys):
    code, text = run(capsys, "probe", "fefferman-stein-diag", "--j", "1", "--samples", "3",
                     "--lambdas", "1,2", "--out", str(tmp_path))
    rep = json.loads((tmp_path / "probe.json").read_text())
    assert code == 0 and rep["bounded"] and "bounded" in text


@pytest.mark.parametrize("argv", [
    ("generate", "--j", "2"),
    ("verify", "soliton", "--M", "256", "--tol", "1e-3"),
    ("illposed", "torus-plane-wave", "--simulate", "--n", "1,2"),
    ("simulate", "--table", "soliton-j1", "--M", "128", "--L", "40", "--T", "0.05", "--dt", "0.01"),
])
def test_rerun_identical(tmp_path, capsys, argv):
    first = tmp_path / "first"
    assert run(capsys, *argv, "--out", str(first))[0] == 0
    code, text = run(capsys, "rerun", str(first / "manifest.json"), "--out", str(tmp_path / "again"))
    assert code == 0 and "DIFFERS" not in text
    for name in RunManifest.read(first / "manifest.json").outputs:
        assert (first / name).read_bytes() == (tmp_path / "again" / name).read_bytes()


def test_rerun_detects_changed_input(tmp_path, capsys):
    run(capsys, "generate", "--j", "1", "--out", str(tmp_path / "g"))
    table = tmp_path / "g" / "table.json"
    args = ("simulate", "--table", str(table), "--M", "64", "--L", "40", "--T", "0.02", "--dt", "0.01")
    assert run(capsys, *args, "--out", str(tmp_path / "s"))[0] == 0
    table.write_text(table.read_text() + " ")
    assert run(capsys, "rerun", str(tmp_path / "s" / "manifest.json"))[0] == 1


def test_serialisation_is_pinned():
    assert fmt_float(0.1) == "0.10000000000000001" and fmt_float(float("nan")) == "NaN"
    assert dumps({"b": 1, "a": [1.5, 2j]}) == dumps({"a": [1.5, 2j], "b": 1})
    assert csv_text(["x"], [[1 / 3]]) == "x\n0.33333333333333331\n"
