import json
import math
from pathlib import Path

import numpy as np
import pytest

from wavescatter.errors import ConfigError, ContractError
from wavescatter.grids import Grid3
from wavescatter.verify.cli import EXIT_CONFIG, EXIT_OK, main
from wavescatter.verify.config import DEFAULT_TOLERANCES, SUITES, ExperimentConfig, load_config, parse_config
from wavescatter.verify.report import PLUMBING, Report
from wavescatter.verify.suites import relative_error, sobolev_norm, subgrid

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def test_checks_need_an_anchor_and_a_known_mode():
    rep = Report("x")
    with pytest.raises(ContractError):
        rep.check("no anchor", 1.0, 1.0, 0.1, "")
    with pytest.raises(ContractError):
        rep.check("bad mode", 1.0, 1.0, 0.1, PLUMBING, mode="ge")


def test_comparison_modes():
    rep = Report("x")
    assert rep.check("le", 0.5, 0.0, 1.0, PLUMBING, "le").passed
    assert not rep.check("abs", 1.0, 2.0, 0.5, PLUMBING, "abs").passed
    assert rep.check("rel", 1.01, 1.0, 0.02, PLUMBING, "rel").passed
    assert not rep.check("nan", math.nan, 1.0, 0.02, PLUMBING, "rel").passed
    assert not rep.check("zero target", 1.0, 0.0, 0.02, PLUMBING, "rel").passed
    assert not rep.passed


def test_report_files(tmp_path):
    rep = Report("demo")
    rep.check("a", 1.0, 1.0, 0.1, PLUMBING)
    rep.table("curve", ["t", "value"], [[0.0, 1.0], [1, np.float64(0.5)]])
    rep.info["array"] = np.arange(3)
    paths = rep.write(tmp_path)
    assert {p.name for p in paths} == {"demo.json", "demo.csv", "demo.curve.csv"}
    payload = json.loads((tmp_path / "demo.json").read_text())
    assert payload["passed"] and payload["info"]["array"] == [0, 1, 2]
    assert (tmp_path / "demo.curve.csv").read_text().splitlines() == ["t,value", "0.0,1.0", "1,0.5"]


def test_default_config_file_matches_dataclass_defaults():
    cfg = load_config(CONFIGS / "default.cfg")
    d = ExperimentConfig()
    assert cfg.suites == SUITES
    assert cfg.output == d.output and cfg.box == d.box and cfg.T == d.T
    assert cfg.tolerances == DEFAULT_TOLERANCES


def test_config_errors():
    for text in ("suites = nope", "tol.unknown = 1", "tol.leakage = -1", "time.dt = 0",
                 "grid.output.n = 31", "packet.k0 = 1 2", "potential.kind = blob", "seed = x"):
        with pytest.raises(ConfigError):
            parse_config(text)
    with pytest.raises(ConfigError):
        load_config("/nonexistent/file.cfg")


def test_helpers():
    big, small = Grid3(4.0, 16), Grid3(2.0, 8)
    vals = np.arange(big.size, dtype=float).reshape(big.shape)
    sub = subgrid(vals, big, small)
    assert sub.shape == small.shape and sub[0, 0, 0] == vals[4, 4, 4]
    with pytest.raises(ConfigError):
        subgrid(vals, big, Grid3(2.1, 8))
    assert relative_error(np.ones(3), np.ones(3)) == 0.0
    g = Grid3(8.0, 32)
    f = np.exp(-np.sum(g.points() ** 2, axis=1)).reshape(g.shape)
    assert sobolev_norm(f, g, 0.0) == pytest.approx(g.norm(f), rel=1e-12)


def _write_cfg(tmp_path, text):
    p = tmp_path / "run.cfg"
    p.write_text(text)
    return p


def test_cli_exit_codes(tmp_path, capsys):
    empty = _write_cfg(tmp_path, "suites =\n")
    assert main(["run", "--config", str(empty), "--out", str(tmp_path / "o")]) == EXIT_OK
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert summary["suites"] == [] and summary["exit_status"] == 0
    assert main(["run", "--config", str(empty), "--suite", "nope", "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert main(["run", "--config", str(tmp_path / "missing.cfg")]) == EXIT_CONFIG
    assert main(["decompose", "--potential", str(tmp_path / "missing.pot")]) == EXIT_CONFIG


def test_cli_run_and_failure_status(tmp_path):
    cfg = _write_cfg(tmp_path, "suites = ray_anchors\n")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "ok"), "--threads", "1"]) == EXIT_OK
    strict = _write_cfg(tmp_path, "suites = ray_anchors\ntol.ray_origin = 1e-30\n")
    assert main(["run", "--config", str(strict), "--out", str(tmp_path / "bad")]) == 1
    rows = (tmp_path / "bad" / "ray_anchors.csv").read_text().splitlines()
    assert rows[0] == "check,lhs,rhs,ratio,tolerance,status,anchor,mode"
    assert any(",fail," in r for r in rows[1:])


def test_cli_decompose(tmp_path):
    out = tmp_path / "d.csv"
    code = main(["decompose", "--potential", str(CONFIGS / "gaussian.pot"), "--out", str(out),
                 "--order", "5", "--t-max", "4"])
    assert code == EXIT_OK
    manifest = json.loads(Path(str(out) + ".json").read_text())
    assert manifest["n_atoms"] == len(out.read_text().splitlines()) - 1
    assert manifest["mass"] > 0


def test_cli_scan(tmp_path):
    fam = tmp_path / "fam.cfg"
    fam.write_text("potential.kind = square_well\npotential.depth = 1\npotential.radius = 1\n"
                   "grid.extent = 1.2\ngrid.n = 8\nc_max = 4\npoints = 9\n")
    code = main(["scan", "--family", str(fam), "--out", str(tmp_path / "scan")])
    assert code in (0, 1)
    assert (tmp_path / "scan" / "resonance_scan.csv").exists()
    bad = tmp_path / "bad.cfg"
    bad.write_text("c_max = 4\n")
    assert main(["scan", "--family", str(bad)]) == EXIT_CONFIG
