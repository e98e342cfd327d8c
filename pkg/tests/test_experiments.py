import json

import numpy as np
import pytest

from randpde.cli import main as cli_main
from randpde.errors import ConfigError
from randpde.experiments import parse_config, replot, run, validate

VR_CONFIG = """
[experiment]
kind = vr-compare
seed = 11
out = {out}

[law]
kind = checkerboard
alpha = 3.0
beta = 20.0

[estimate]
n = 3, 4
r = 2
m = 6
strategies = mc, antithetic
"""

MSFEM_CONFIG = """
[experiment]
kind = msfem
seed = 0
out = {out}

[geometry]
kind = none

[msfem]
h = 1/4
fine_n = 8
methods = cr
reference_n = 64
"""


def write_config(tmp_path, text, name="exp.ini"):
    path = tmp_path / name
    path.write_text(text.format(out=tmp_path / "archive"))
    return path


def test_parse_rejects_unknown_keys(tmp_path):
    path = write_config(tmp_path, VR_CONFIG + "\nwhatever = 3\n")
    with pytest.raises(ConfigError, match="whatever"):
        parse_config(path)


def test_parse_rejects_unknown_section(tmp_path):
    path = write_config(tmp_path, VR_CONFIG + "\n[mystery]\nx = 1\n")
    with pytest.raises(ConfigError, match="mystery"):
        parse_config(path)


def test_parse_rejects_bad_eta(tmp_path):
    bad = VR_CONFIG.replace("kind = checkerboard",
                            "kind = perturbed_periodic\neta = 1.5")
    bad = bad.replace("alpha = 3.0\nbeta = 20.0", "a_per = 3\nc_per = 17")
    path = write_config(tmp_path, bad)
    cfg = parse_config(path)
    diag = validate(cfg)
    assert any("eta" in p for p in diag["problems"])


def test_validate_reports_costs(tmp_path):
    cfg = parse_config(write_config(tmp_path, VR_CONFIG))
    diag = validate(cfg)
    assert diag["problems"] == []
    # mc: 2*2*6 solves per n, antithetic twice that, two box sizes
    assert diag["estimated_pde_solves"] == 2 * (12 + 24)
    assert diag["estimated_peak_bytes"] > 0


def test_validate_flags_underresolved_msfem(tmp_path):
    text = MSFEM_CONFIG.replace("kind = none",
                                "kind = periodic_discs\nepsilon = 0.03\nradius_factor = 0.35")
    text = text.replace("reference_n = 64", "reference_n = 64\n")
    cfg = parse_config(write_config(tmp_path, text))
    diag = validate(cfg)
    assert any("under-resolves" in note for note in diag["notes"])
    cfg.strict = True
    diag_strict = validate(cfg)
    assert any("under-resolves" in p for p in diag_strict["problems"])


def test_fraction_values_accepted(tmp_path):
    cfg = parse_config(write_config(tmp_path, MSFEM_CONFIG))
    assert cfg.msfem["h"] == [0.25]


def test_run_vr_archive_and_determinism(tmp_path):
    cfg = parse_config(write_config(tmp_path, VR_CONFIG))
    first = run(cfg, out_override=tmp_path / "a1")
    assert first.status == "ok"
    reports = (tmp_path / "a1" / "reports.csv").read_text().splitlines()
    assert reports[0] == "strategy,n,r,m,entry,mean,var,ci95,solves,rejected,rho"
    assert len(reports) == 1 + 2 * 2 * 3  # 2 strategies x 2 sizes x 3 entries
    assert (tmp_path / "a1" / "comparison.csv").exists()
    assert (tmp_path / "a1" / "mean_ci.svg").exists()

    cfg2 = parse_config(write_config(tmp_path, VR_CONFIG))
    second = run(cfg2, out_override=tmp_path / "a2")
    assert first.manifest["files"] == second.manifest["files"]


def test_run_msfem_archive(tmp_path):
    cfg = parse_config(write_config(tmp_path, MSFEM_CONFIG))
    archive = run(cfg, out_override=tmp_path / "ms")
    assert archive.status == "ok"
    rows = (tmp_path / "ms" / "msfem.csv").read_text().splitlines()
    assert rows[0] == "method,H,geometry,with_bubbles,l2_rel,h1_rel,dof,solves"
    assert len(rows) == 2
    l2 = float(rows[1].split(",")[4])
    assert np.isfinite(l2) and l2 < 1.0
    for name in ("errors_l2.svg", "errors_h1.svg", "heatmap_solution.svg",
                 "heatmap_perforations.svg", "manifest.json", "config_snapshot.json"):
        assert (tmp_path / "ms" / name).exists()


def test_manifest_lists_hashes_and_snapshot(tmp_path):
    cfg = parse_config(write_config(tmp_path, MSFEM_CONFIG))
    archive = run(cfg, out_override=tmp_path / "ms")
    manifest = json.loads((tmp_path / "ms" / "manifest.json").read_text())
    assert manifest["status"] == "ok"
    assert "msfem.csv" in manifest["files"]
    assert all(len(h) == 64 for h in manifest["files"].values())
    assert manifest["config"]["msfem"]["f"] == "one"  # defaults materialized


def test_replot_from_csv(tmp_path):
    cfg = parse_config(write_config(tmp_path, MSFEM_CONFIG))
    run(cfg, out_override=tmp_path / "ms")
    (tmp_path / "ms" / "errors_l2.svg").unlink()
    made = replot(tmp_path / "ms")
    assert "errors_l2.svg" in made
    assert (tmp_path / "ms" / "errors_l2.svg").exists()


def test_cli_run_and_validate(tmp_path, capsys):
    path = write_config(tmp_path, MSFEM_CONFIG)
    assert cli_main(["validate", "--config", str(path)]) == 0
    assert cli_main(["run", "--config", str(path), "--out", str(tmp_path / "cli_out")]) == 0
    out = capsys.readouterr().out
    assert "archive" in out
    assert (tmp_path / "cli_out" / "manifest.json").exists()


def test_cli_exit_code_on_config_error(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[experiment]\nkind = nonsense\n")
    assert cli_main(["run", "--config", str(bad)]) == 2
    assert cli_main(["validate", "--config", str(tmp_path / "missing.ini")]) == 2


def test_cli_threads_flag_deterministic(tmp_path):
    path = write_config(tmp_path, VR_CONFIG)
    assert cli_main(["run", "--config", str(path), "--out", str(tmp_path / "t1"),
                     "--threads", "2"]) == 0
    assert cli_main(["run", "--config", str(path), "--out", str(tmp_path / "t2"),
                     "--threads", "1"]) == 0
    a = json.loads((tmp_path / "t1" / "manifest.json").read_text())["files"]
    b = json.loads((tmp_path / "t2" / "manifest.json").read_text())["files"]
    # the snapshot records the differing thread counts; results must agree
    a.pop("config_snapshot.json")
    b.pop("config_snapshot.json")
    assert a == b


def test_run_homogenize_kind(tmp_path):
    text = VR_CONFIG.replace("kind = vr-compare", "kind = homogenize")
    text = text.replace("strategies = mc, antithetic", "strategies = mc")
    cfg = parse_config(write_config(tmp_path, text))
    archive = run(cfg, out_override=tmp_path / "h")
    assert archive.status == "ok"
    rows = (tmp_path / "h" / "reports.csv").read_text().splitlines()
    assert all(line.startswith("mc,") for line in rows[1:])
    assert not (tmp_path / "h" / "comparison.csv").exists()


ROBUST_CONFIG = """
[experiment]
kind = msfem-robustness
seed = 0
out = {out}

[geometry]
kind = periodic_discs
epsilon = 0.25
radius_factor = 0.2

[msfem]
h = 1/2
fine_n = 16
methods = cr, linear
reference_n = 64
"""


def test_run_msfem_robustness_kind(tmp_path):
    cfg = parse_config(write_config(tmp_path, ROBUST_CONFIG))
    archive = run(cfg, out_override=tmp_path / "rob")
    assert archive.status == "ok"
    rows = (tmp_path / "rob" / "msfem.csv").read_text().splitlines()
    geometries = {line.split(",")[2] for line in rows[1:]}
    assert geometries == {"test1_unshifted", "test2_shifted"}
    assert len(rows) == 1 + 2 * 2  # 2 geometries x 2 methods


def test_incompatible_reference_rejected(tmp_path):
    text = MSFEM_CONFIG.replace("reference_n = 64", "reference_n = 100")
    cfg = parse_config(write_config(tmp_path, text))
    diag = validate(cfg)
    assert any("divisible" in p for p in diag["problems"])
