import json
import math
import os

import numpy as np
import pytest

from fitting import synthesize_power_law
from fracops import FractionalOrders
from main import run
from quantum import PhysicalConstants, free_bands
from store import read_bands, read_ensemble, read_json, read_snapshots, read_table


@pytest.fixture
def out(tmp_path):
    return str(tmp_path / "run")


def test_bands_without_potential_are_folded_free_dispersion(out):
    code = run(["bands", "--potential", "cosine", "--mu", "2", "--v0", "0", "--output-dir", out])
    assert code == 0
    q, bands = read_bands(os.path.join(out, "bands_cosine.csv"))
    zero = np.argmin(np.abs(q))
    assert bands[zero, 0] == pytest.approx(0.0, abs=1e-12)
    expected = free_bands(PhysicalConstants.classical(), FractionalOrders(1.0, 2.0), 1.0, 4, q)
    assert bands == pytest.approx(expected, rel=1e-10, abs=1e-10)


def test_bands_for_every_potential(out):
    assert run(["bands", "--mu", "1.5", "--q-points", "11", "--output-dir", out]) == 0
    manifest = read_json(os.path.join(out, "manifest.json"))
    for kind in ("cosine", "square", "barrier", "well"):
        assert os.path.exists(os.path.join(out, f"bands_{kind}.csv"))
        assert manifest["summary"][kind]["gap_0"] >= 0


def test_fit_with_range(out, tmp_path):
    data = synthesize_power_law(2.0, 1.3, 1e5, 1e9, n=80)
    path = tmp_path / "liver.csv"
    data.frame.to_csv(path, index=False, float_format="%.17g")
    code = run(["fit", "--input", str(path), "--range", "1e6:1e8", "--medium", "bovine_liver", "--output-dir", out])
    assert code == 0
    report = read_json(os.path.join(out, "fit.json"))
    assert report["mu"] == pytest.approx(1.3, abs=1e-8)
    assert report["alpha0"] == pytest.approx(2.0, rel=1e-7)
    assert report["range"] == [1e6, 1e8]
    assert report["reference_mu"] == 1.3
    predictions = read_table(os.path.join(out, "predictions.csv"))
    assert len(predictions) == 80


def test_diffuse_matches_heat_kernel(out):
    code = run(["diffuse", "--eta", "1", "--mu", "2", "--n", "512", "--length", "20", "--t", "0.5,1", "--output-dir", out])
    assert code == 0
    times, fields = read_snapshots(out)
    assert list(times) == [0.5, 1.0]
    x = fields[1].grid.points
    kernel = np.exp(-(x ** 2) / 4.0) / math.sqrt(4 * math.pi)
    assert np.max(np.abs(fields[1].real - kernel)) <= 1e-6 * kernel.max()
    moments = read_table(os.path.join(out, "moments.csv"))
    assert list(moments.columns) == ["time", "moment"]


def test_diffuse_l1_solver(out):
    code = run(["diffuse", "--eta", "0.5", "--n", "64", "--solver", "l1", "--dt", "0.01", "--steps", "20", "--output-dir", out])
    assert code == 0
    times, fields = read_snapshots(out)
    assert len(times) == 21
    assert fields[-1].mass().real == pytest.approx(1.0, rel=1e-12)


def test_schrodinger_keeps_norm(out):
    code = run(["schrodinger", "--mu", "1.5", "--k0", "1", "--steps", "200", "--output-dir", out])
    assert code == 0
    summary = read_json(os.path.join(out, "manifest.json"))["summary"]
    assert summary["norm_final"] == pytest.approx(summary["norm_initial"], abs=1e-10)
    times, fields = read_snapshots(out, prefix="wavefunction")
    assert times[-1] == pytest.approx(0.2)


def test_fractional_schrodinger_rejects_potential(out, capsys):
    code = run(["schrodinger", "--eta", "0.5", "--potential", "cosine", "--v0", "1", "--output-dir", out])
    assert code == 1
    assert "vanishing potential" in capsys.readouterr().err


def test_unknown_subcommand_prints_usage(out, capsys):
    assert run(["teleport", "--output-dir", out]) == 1
    err = capsys.readouterr().err
    assert "usage:" in err
    assert "invalid choice" in err


def test_unknown_flag_prints_usage(out, capsys):
    assert run(["statmech", "--temperature", "3", "--output-dir", out]) == 1
    assert "usage:" in capsys.readouterr().err


def test_invalid_orders_exit_one(out):
    assert run(["diffuse", "--eta", "1.5", "--output-dir", out]) == 1


def test_unconverged_bands_exit_two(out, capsys):
    code = run(
        [
            "bands", "--potential", "square", "--v0", "5", "--plane-waves", "13",
            "--check", "--output-dir", out,
        ]
    )
    assert code == 2
    assert "accuracy failure" in capsys.readouterr().err


def test_version_flag():
    assert run(["--version"]) == 0


def test_json_format(out):
    assert run(["statmech", "--statistics", "fermi", "--points", "20", "--format", "json", "--output-dir", out]) == 0
    with open(os.path.join(out, "statmech.json")) as f:
        records = json.load(f)
    assert len(records) == 20
    assert set(records[0]) == {"energy", "pdf", "fermi"}


def test_config_file_sets_defaults(out, tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"statmech": {"beta": 2.0, "e-max": 4.0}}))
    assert run(["statmech", "--config", str(config), "--output-dir", out]) == 0
    manifest = read_json(os.path.join(out, "manifest.json"))
    assert manifest["parameters"]["beta"] == 2.0
    assert manifest["parameters"]["e_max"] == 4.0
    assert manifest["summary"]["mean_energy"] == pytest.approx(0.25)


def test_command_line_overrides_config(out, tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"statmech": {"beta": 2.0}}))
    assert run(["statmech", "--config", str(config), "--beta", "4", "--output-dir", out]) == 0
    assert read_json(os.path.join(out, "manifest.json"))["parameters"]["beta"] == 4.0


def test_config_values_respect_choices(out, tmp_path, capsys):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"diffuse": {"solver": "bogus"}}))
    assert run(["diffuse", "--config", str(config), "--n", "16", "--output-dir", out]) == 1
    assert "must be one of mode, l1" in capsys.readouterr().err
    assert not os.path.exists(os.path.join(out, "manifest.json"))


def test_config_values_are_converted(out, tmp_path, capsys):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"statmech": {"points": "12"}}))
    assert run(["statmech", "--config", str(config), "--output-dir", out]) == 0
    assert len(read_table(os.path.join(out, "statmech.csv"))) == 12
    config.write_text(json.dumps({"statmech": {"beta": "warm"}}))
    assert run(["statmech", "--config", str(config), "--output-dir", out]) == 1
    assert "not a valid float" in capsys.readouterr().err


def test_malformed_config_exit_one(out, tmp_path):
    config = tmp_path / "config.json"
    config.write_text("{beta: 2")
    assert run(["statmech", "--config", str(config), "--output-dir", out]) == 1


def test_manifest_echoes_configuration(out):
    assert run(["relations", "--mu", "1.5", "--eta", "0.5", "--output-dir", out]) == 0
    manifest = read_json(os.path.join(out, "manifest.json"))
    assert manifest["subcommand"] == "relations"
    assert manifest["version"] == "0.1.0"
    assert manifest["parameters"]["mu"] == 1.5
    assert "created_at" in manifest
    assert sorted(manifest["artifacts"]) == ["relations_k.csv", "relations_nu.csv"]
    assert manifest["summary"]["h_mu"] == pytest.approx(1.0)


def test_sampling_is_reproducible(tmp_path):
    first, second = str(tmp_path / "a"), str(tmp_path / "b")
    arguments = ["sample-levy", "--paths", "200", "--steps", "50", "--seed", "9"]
    assert run(arguments + ["--output-dir", first]) == 0
    assert run(arguments + ["--output-dir", second]) == 0
    with open(os.path.join(first, "ensemble.csv")) as a, open(os.path.join(second, "ensemble.csv")) as b:
        assert a.read() == b.read()
    times, positions = read_ensemble(os.path.join(first, "ensemble.csv"))
    assert positions.shape == (200, 51)
    assert np.all(positions[:, 0] == 0)
    assert read_json(os.path.join(first, "manifest.json"))["seed"] == 9


def test_estimate_rejects_table_without_trajectories(out, tmp_path, capsys):
    path = tmp_path / "liver.csv"
    path.write_text("omega,alpha\n1e6,3.1\n1e7,61.5\n")
    assert run(["estimate", "--input", str(path), "--kind", "levy", "--output-dir", out]) == 1
    assert "missing column(s) path" in capsys.readouterr().err


def test_estimate_reads_ensemble_header(tmp_path):
    sample_dir, estimate_dir = str(tmp_path / "sample"), str(tmp_path / "estimate")
    assert run(["sample-fbm", "--hurst", "0.3", "--paths", "500", "--steps", "200", "--output-dir", sample_dir]) == 0
    code = run(["estimate", "--input", os.path.join(sample_dir, "ensemble.csv"), "--output-dir", estimate_dir])
    assert code == 0
    result = read_json(os.path.join(estimate_dir, "estimate.json"))
    assert result["kind"] == "fbm"
    assert result["index"] == "hurst"
    assert result["estimate"] == pytest.approx(0.3, abs=0.05)
