import json

import numpy as np
import pytest

from cheegerpack import io
from cheegerpack.cli import EXIT_CONFIG, EXIT_INIT, assemble_config, build_parser, main

FAST = ["m0=10", "target_resolution=19", "maxit=300"]


def read(path):
    return json.loads(path.read_text())


def test_oracle_unit_square(tmp_path, capsys):
    assert main(["oracle", "--out", str(tmp_path)]) == 0
    data = read(tmp_path / "result.json")
    assert data["h"] == pytest.approx(2 + np.sqrt(np.pi), abs=1e-10)
    assert (tmp_path / "oracle.json").exists()
    rows = (tmp_path / "oracle_boundary.csv").read_text().splitlines()
    assert rows[0] == "x,y" and len(rows) > 100
    assert json.loads(capsys.readouterr().out)["h"] == pytest.approx(data["h"])


def test_oracle_rejects_non_polygon(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"domain": {"type": "cube"}}))
    assert main(["oracle", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert "'domain'" in capsys.readouterr().err


def test_cheeger_writes_outputs(tmp_path):
    out = tmp_path / "run"
    assert main(["cheeger", "--out", str(out), "--seed", "2", *FAST]) == 0
    for name in ("result.json", "phase_0.f64", "phase_0.pgm", "composite.pgm", "trace.csv", "phases.png", "trace.png"):
        assert (out / name).exists(), name
    data = read(out / "result.json")
    assert data["config"]["seed"] == 2 and data["config"]["k"] == 1
    u = io.read_field(out / "phase_0.f64")
    assert u.shape == (19, 19)
    img = io.read_pgm(out / "phase_0.pgm")
    assert img.shape == (19, 19)
    trace = (out / "trace.csv").read_text().splitlines()
    assert trace[0] == "stage,m,eps,iteration,value"


def test_config_echo_reproduces_run(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["cheeger", "--out", str(a), "--no-plots", *FAST]) == 0
    cfg = read(a / "result.json")["config"]
    (tmp_path / "echo.json").write_text(json.dumps(cfg))
    assert main(["cheeger", "--config", str(tmp_path / "echo.json"), "--out", str(b), "--no-plots"]) == 0
    assert (a / "phase_0.f64").read_bytes() == (b / "phase_0.f64").read_bytes()


def test_precedence_of_sources(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"alpha": 1.5, "p": 3.0, "k": 3}))
    args = build_parser().parse_intermixed_args(["cluster", "--config", str(cfg), "--alpha", "2.0", "p=4"])
    merged, cli = assemble_config(args)
    assert merged["alpha"] == 2.0 and merged["p"] == 4 and merged["k"] == 3
    assert cli["packing"] == "maximin" and cli["plots"] is True


def test_pack_defaults():
    args = build_parser().parse_intermixed_args(["pack"])
    merged, _ = assemble_config(args)
    assert merged["alpha"] == pytest.approx(0.501) and merged["p"] == 50.0
    args = build_parser().parse_intermixed_args(["pack", 'domain={"type": "cube"}'])
    merged, _ = assemble_config(args)
    assert merged["alpha"] == pytest.approx(2 / 3 + 1e-3)


@pytest.mark.parametrize(
    "argv,key",
    [
        (["cheeger", "alpha=0.4"], "alpha"),
        (["cheeger", "--alpha", "0.5"], "alpha"),
        (["cheeger", "--k", "2"], "k"),
        (["cluster", "--k", "1"], "k"),
        (["cluster", "flavour=3"], "flavour"),
        (["cluster", "k=two"], "k"),
        (["pack", "packing=best"], "packing"),
        (["cheeger", "--seeds", "5..2"], "seeds"),
        (["cheeger", "--seeds", "x"], "seeds"),
        (["cheeger", "notakeyvalue"], "notakeyvalue"),
        (["cheeger", "--config", "/nonexistent.json"], "config"),
        (["compare", "stages=1"], "stages"),
        (["compare", 'domain={"type": "cube"}'], "domain"),
    ],
)
def test_bad_config_exit_code(tmp_path, capsys, argv, key):
    assert main(argv + ["--out", str(tmp_path)]) == EXIT_CONFIG
    assert f"'{key}'" in capsys.readouterr().err


def test_bad_flag_value_is_usage_error(tmp_path):
    assert main(["cheeger", "--k", "x", "--out", str(tmp_path)]) == 2


def test_initialization_failure_exit_code(tmp_path, capsys):
    # a sliver with no interior grid node: every admissible field is zero, so the energy is never finite
    tiny = 'domain={"type": "polygon", "vertices": [[0, 0], [1, 0.98], [1, 1]]}'
    assert main(["cheeger", tiny, *FAST, "--out", str(tmp_path)]) == EXIT_INIT
    assert "optimizer" in capsys.readouterr().err


def test_seed_range_picks_lowest_energy(tmp_path):
    out = tmp_path / "s"
    assert main(["cheeger", "--seeds", "0..2", "--workers", "1", "--no-plots", "--out", str(out), *FAST]) == 0
    data = read(out / "result.json")
    energies = {int(k): v for k, v in data["seed_energies"].items()}
    assert sorted(energies) == [0, 1, 2]
    best = min(energies, key=lambda s: (energies[s], s))
    assert data["config"]["seed"] == best
    assert data["final_energy"] == energies[best]


def test_pack_k2_small(tmp_path):
    out = tmp_path / "p"
    assert main(["pack", "--out", str(out), "m0=12", "target_resolution=23", "maxit=500", "stages=2"]) == 0
    pk = read(out / "packing.json")
    assert pk["objective"] == "maximin" and len(pk["centers"]) == 2
    assert pk["value"] == pytest.approx((2 - np.sqrt(2)) / 2, abs=1e-6)
    assert (out / "packing.svg").read_text().startswith("<svg")
    assert (out / "packing.png").exists()


def test_compare_reports_relative_error(tmp_path):
    out = tmp_path / "c"
    assert main(["compare", "--out", str(out), "--no-plots", "m0=12", "target_resolution=45"]) == 0
    data = read(out / "result.json")
    assert 0 <= data["relative_error"] < 0.1
    assert data["oracle"]["h"] == pytest.approx(2 + np.sqrt(np.pi))


def test_perimeter_product_small(tmp_path):
    out = tmp_path / "pp"
    assert main(["perimeter-product", "--k", "3", "--out", str(out), "--no-plots", "m0=8", "target_resolution=16", "maxit=300"]) == 0
    data = read(out / "result.json")
    assert data["config"]["objective"] == "log_perimeter" and data["config"]["periodic"] is True
    assert len([p for p in out.iterdir() if p.name.startswith("phase_") and p.suffix == ".pgm"]) == 3
