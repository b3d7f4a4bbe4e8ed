import csv
import json

import pytest

from fdrelay.cli import AGG_COLUMNS, RAW_COLUMNS, main


def _cfg(tmp_path, text, name="scenario.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def _run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_solve_document(tmp_path, capsys):
    cfg = _cfg(tmp_path, "ps_dbm = 35\nseed = 3\n")
    code, out, _ = _run(capsys, "solve", "--config", cfg)
    assert code == 0
    doc = json.loads(out)
    for key in ("rate", "r1", "r2", "pr", "p", "q", "rho", "iterations", "converged",
                "dual_point", "duality_gap_estimate"):
        assert key in doc
    assert doc["seed"] == 3
    assert doc["rate"] == pytest.approx(min(doc["r1"], doc["r2"]), rel=1e-12)
    assert doc["converged"] is True
    assert 0.0 <= doc["duality_gap_estimate"] <= 1e-3 * max(1.0, doc["rate"])


def test_solve_zero_power(tmp_path, capsys):
    cfg = _cfg(tmp_path, "ps_watts = 0\n")
    code, out, _ = _run(capsys, "solve", "--config", cfg)
    assert code == 0
    doc = json.loads(out)
    assert doc["rate"] == 0.0 and doc["pr"] == 0.0


def test_solve_is_byte_identical(tmp_path, capsys):
    cfg = _cfg(tmp_path, "ps_dbm = 30\n")
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    assert main(["solve", "--config", cfg, "--seed", "8", "-o", str(a)]) == 0
    assert main(["solve", "--config", cfg, "--seed", "8", "-o", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


@pytest.mark.parametrize("seed", [0, 1])
def test_solve_agrees_with_oracle(tmp_path, capsys, seed):
    cfg = _cfg(tmp_path, "ns = 2\nnr = 2\nnd = 2\nps_dbm = 35\n")
    _, out, _ = _run(capsys, "solve", "--config", cfg, "--seed", str(seed))
    solved = json.loads(out)["rate"]
    code, out, _ = _run(capsys, "oracle", "--config", cfg, "--seed", str(seed))
    assert code == 0
    doc = json.loads(out)
    assert abs(solved - doc["rate"]) <= max(1e-3, 0.01 * doc["rate"])
    hist = doc["refinement_history"]
    assert all(b >= a for a, b in zip(hist, hist[1:]))


def test_config_error_exit_code(tmp_path, capsys):
    cfg = _cfg(tmp_path, "ns = 2\nbogus = 1\n")
    code, out, err = _run(capsys, "solve", "--config", cfg)
    assert code == 2 and out == ""
    assert "line 2" in err and "bogus" in err
    code, _, err = _run(capsys, "solve", "--config", str(tmp_path / "missing.cfg"))
    assert code == 2


def test_oracle_refusal_is_a_solver_abort(tmp_path, capsys):
    cfg = _cfg(tmp_path, "ns = 2\nnr = 8\nnd = 2\n")
    code, out, err = _run(capsys, "oracle", "--config", cfg)
    assert code == 3 and out == "" and "oracle" in err


def test_sweep_outputs(tmp_path, capsys):
    cfg = _cfg(tmp_path, "axis = ps_dbm\nvalues = 25, 35\nschemes = fd_nonuniform half_duplex\n"
                         "realizations = 2\nseed = 5\n")
    raw = tmp_path / "raw.csv"
    assert main(["sweep", "--config", cfg, "-o", str(raw)]) == 0
    with raw.open() as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == RAW_COLUMNS
    assert rows[0] == "seed,scheme,ns,nr,nd,ps_dbm,d_sr_m,rate_bps_hz,pr_watts,iterations,converged".split(",")
    assert len(rows) == 1 + 2 * 2 * 2
    agg_path = tmp_path / "raw_aggregate.csv"
    with agg_path.open() as fh:
        agg = list(csv.reader(fh))
    assert agg[0] == "axis_value,scheme,mean_rate,std_error,zero_rate_fraction,n".split(",")
    assert tuple(agg[0]) == AGG_COLUMNS
    assert len(agg) == 1 + 2 * 2
    summary = json.loads((tmp_path / "raw_summary.json").read_text())
    assert summary["axis"] == "ps_dbm" and len(summary["records"]) == 4


def test_sweep_row_matches_solve(tmp_path, capsys):
    cfg = _cfg(tmp_path, "axis = ps_dbm\nvalues = 35\nschemes = fd_nonuniform\nrealizations = 1\n"
                         "seed = 0\n")
    raw = tmp_path / "raw.csv"
    assert main(["sweep", "--config", cfg, "-o", str(raw)]) == 0
    with raw.open() as fh:
        row = list(csv.DictReader(fh))[0]
    one = _cfg(tmp_path, "ps_dbm = 35\n", "one.cfg")
    _, out, _ = _run(capsys, "solve", "--config", one, "--seed", row["seed"])
    doc = json.loads(out)
    assert float(row["rate_bps_hz"]) == doc["rate"]
    assert float(row["pr_watts"]) == doc["pr"]
    assert int(row["iterations"]) == doc["iterations"]
    assert row["converged"] == ("true" if doc["converged"] else "false")


def test_sweep_is_byte_identical_across_workers(tmp_path):
    cfg = _cfg(tmp_path, "values = 30\nschemes = fd_nonuniform fd_csir\nrealizations = 3\n")
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["sweep", "--config", cfg, "-o", str(a), "--workers", "1"]) == 0
    assert main(["sweep", "--config", cfg, "-o", str(b), "--workers", "2"]) == 0
    assert a.read_bytes() == b.read_bytes()
    for suffix in ("_aggregate.csv", "_summary.json"):
        assert (tmp_path / f"a{suffix}").read_bytes() == (tmp_path / f"b{suffix}").read_bytes()


def test_sweep_empty_schemes(tmp_path, capsys):
    cfg = _cfg(tmp_path, "schemes =\n")
    code, _, err = _run(capsys, "sweep", "--config", cfg)
    assert code == 2 and "schemes" in err


def test_convergence_trace(tmp_path, capsys):
    cfg = _cfg(tmp_path, "ps_dbm = 35\n")
    out = tmp_path / "trace.csv"
    assert main(["convergence", "--config", cfg, "--seed", "2", "-o", str(out)]) == 0
    with out.open() as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["iteration", "best_dual_value", "current_primal_rate"]
    best = [float(r[1]) for r in rows[1:]]
    assert 1 <= len(best) <= 5000
    finite = [b for b in best if b != float("inf")]
    assert all(b <= a for a, b in zip(finite, finite[1:]))
    assert best[-1] - float(rows[-1][2]) <= 1e-3 * max(1.0, best[-1])


def test_convergence_refuses_proportional_rsi(tmp_path, capsys):
    cfg = _cfg(tmp_path, "rsi_mode = proportional\n")
    code, _, err = _run(capsys, "convergence", "--config", cfg)
    assert code == 2 and "rsi_mode" in err
