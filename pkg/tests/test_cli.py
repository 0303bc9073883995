import csv
import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from transonic_ep import config as C
from transonic_ep.cli import main
from transonic_ep.errors import ConfigError, UsageError
from transonic_ep.plotting import plot_series, read_series, tail_slope

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def _write(path, text):
    path.write_text(text)
    return path


def _run(tmp_path, name, out="out", extra=()):
    code = main([C.load(CONFIGS / name)[0]["kind"], "--config", str(CONFIGS / name),
                 "--out", str(tmp_path / out), *extra])
    return code, tmp_path / out


def test_config_hash_is_git_blob_hash():
    assert C.config_hash(b"") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391"


def test_all_shipped_configs_validate():
    for path in sorted(CONFIGS.glob("*.toml")):
        C.normalize(C.load(path)[0])


def test_invalid_config_lists_every_key_and_writes_nothing(tmp_path, capsys):
    cfg = _write(tmp_path / "bad.toml", """
kind = "fit"
[law]
kind = "gamma_law"
k = -1.0
gamma = 2.0
[flow]
J = 1.0
L = 1.0
[background]
kind = "constant"
value = 0.5
[boundary]
rho_l = 0.4
E_l = "x"
[solver]
tol = 0.0
""")
    out = tmp_path / "never"
    assert main(["fit", "--config", str(cfg), "--out", str(out)]) == 2
    err = capsys.readouterr().err
    for key in ("law.k", "boundary.E_l", "boundary.rho_r", "solver.tol"):
        assert key in err
    assert not out.exists()


def test_normalize_reports_keys_in_exception():
    with pytest.raises(ConfigError) as info:
        C.normalize({"kind": "nope"})
    assert "kind" in info.value.keys and "flow.J" in info.value.keys


def test_kind_mismatch_rejected(tmp_path):
    code = main(["linear", "--config", str(CONFIGS / "bench-g2-fit.toml"), "--out", str(tmp_path / "o")])
    assert code == 2 and not (tmp_path / "o").exists()


def test_equilibrium_steady_profile(tmp_path):
    code, out = _run(tmp_path, "equilibrium-steady.toml")
    assert code == 0
    cols = read_series(out / "profile.csv")
    assert np.max(np.abs(cols["rho"] - 0.5)) <= 1e-12
    assert np.max(np.abs(cols["E"])) <= 1e-12


def test_fit_end_to_end_and_manifest(tmp_path):
    code, out = _run(tmp_path, "bench-g2-fit.toml")
    assert code == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["residuals"]["exit_mismatch"] <= 1e-10
    assert man["summary"]["monotone"] is True
    raw = (CONFIGS / "bench-g2-fit.toml").read_bytes()
    assert man["config_hash"] == C.config_hash(raw)
    assert man["seed"] == 0 and man["wall_time_s"] >= 0.0
    listed = {f["path"] for f in man["files"]}
    on_disk = {p.name for p in out.iterdir()} - {"manifest.json"}
    assert listed == on_disk
    for f in man["files"]:
        assert hashlib.sha256((out / f["path"]).read_bytes()).hexdigest() == f["sha256"]
    with open(out / "exit_map.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    g = [float(r["g"]) for r in rows]
    assert len(g) == 20 and all(a > b for a, b in zip(g, g[1:]))


def test_outputs_are_deterministic(tmp_path):
    _, a = _run(tmp_path, "bench-g2-fit.toml", "a")
    _, b = _run(tmp_path, "bench-g2-fit.toml", "b")
    ma = json.loads((a / "manifest.json").read_text())
    mb = json.loads((b / "manifest.json").read_text())
    assert [f["sha256"] for f in ma["files"]] == [f["sha256"] for f in mb["files"]]


def test_seed_override_recorded(tmp_path):
    code, out = _run(tmp_path, "equilibrium-steady.toml", extra=("--seed", "7"))
    assert code == 0
    assert json.loads((out / "manifest.json").read_text())["seed"] == 7


def test_plot_writes_svg(tmp_path):
    series = tmp_path / "s.csv"
    t = np.linspace(0.0, 2.0, 41)
    with open(series, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "y", "z"])
        w.writerows(zip(t, np.exp(-1.5 * t), np.cos(t)))
    code = main(["plot", "--input", str(series), "--x", "t", "--y", "y", "--y2", "z", "--log-y",
                 "--out", str(tmp_path / "p.svg")])
    assert code == 0
    text = (tmp_path / "p.svg").read_text()
    assert text.startswith("<?xml") and "<svg" in text
    assert tail_slope(t, np.exp(-1.5 * t)) == pytest.approx(-1.5, rel=1e-12)


def test_plot_is_byte_reproducible(tmp_path):
    series = _write(tmp_path / "s.csv", "t,y\n0,1\n1,2\n2,4\n")
    a = plot_series(series, "t", ["y"], out=tmp_path / "a.svg").read_bytes()
    b = plot_series(series, "t", ["y"], out=tmp_path / "b.svg").read_bytes()
    assert a == b


def test_plot_errors(tmp_path):
    empty = _write(tmp_path / "e.csv", "")
    header_only = _write(tmp_path / "h.csv", "t,y\n")
    good = _write(tmp_path / "g.csv", "t,y\n0,1\n1,2\n")
    with pytest.raises(UsageError):
        plot_series(empty, "t", ["y"])
    with pytest.raises(UsageError):
        plot_series(header_only, "t", ["y"])
    with pytest.raises(UsageError):
        plot_series(good, "t", ["missing"])
    assert main(["plot", "--input", str(good), "--x", "t", "--y", "missing"]) == 2


def test_sweep_runs_members(tmp_path):
    code, out = _run(tmp_path, "bench-g2-sweep.toml")
    assert code == 0
    cols = read_series(out / "sweep.csv")
    assert len(cols["index"]) == 3
    man = json.loads((out / "manifest.json").read_text())
    assert man["summary"] == {"runs": 3, "failed": 0}
    assert all((out / f["path"]).exists() for f in man["files"])
