"""Command line interface: configs, schemas, exit codes, determinism."""

import json

import numpy as np
import pytest

from netent.cli import main

HEADER = "sweep,layer,quantity,method,value,converged,iterations"


def _write(tmp_path, name, cfg):
    path = tmp_path / name
    path.write_text(json.dumps(cfg, indent=1), encoding="utf-8")
    return str(path)


def _linear_cfg(nv=1e-2, n_layers=1):
    return {
        "model": {
            "prior": {"variance": 1.0},
            "layers": [
                {"channel": {"activation": "linear", "noise_var": nv},
                 "spectrum": {"kind": "mp", "aspect_ratio": 1.0},
                 "alpha": 1.0}
                for _ in range(n_layers)
            ],
        },
        "solver": {"tol": 1e-8, "max_iter": 2000},
    }


def _read_rows(path):
    lines = open(path, encoding="utf-8").read().splitlines()
    assert lines[0] == HEADER
    rows = []
    for ln in lines[1:]:
        sweep, layer, quantity, method, value, converged, iters = \
            ln.split(",")
        rows.append({"sweep": sweep, "layer": int(layer),
                     "quantity": quantity, "method": method,
                     "value": float(value), "converged": converged,
                     "iterations": int(iters)})
    return rows


def test_validate_ok(tmp_path, capsys):
    cfg = _write(tmp_path, "m.json", _linear_cfg())
    assert main(["validate", "--config", cfg]) == 0
    out = capsys.readouterr().out
    assert out.startswith("ok: 1 layer(s)")


def test_malformed_json_exits_2_with_location(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "model": [,]\n}\n', encoding="utf-8")
    assert main(["validate", "--config", str(path)]) == 2
    err = capsys.readouterr().err
    assert "line 2" in err and "column" in err


def test_missing_file_exits_2(tmp_path, capsys):
    assert main(["validate", "--config", str(tmp_path / "nope.json")]) == 2
    assert "config error" in capsys.readouterr().err


@pytest.mark.parametrize("mutate", [
    lambda c: c.update(quantity="free_energy"),
    lambda c: c.update(layer=5),
    lambda c: c["model"].pop("layers"),
    lambda c: c["model"]["layers"][0].update(alpha=-1.0),
    lambda c: c["model"]["layers"][0]["spectrum"].update(kind="cauchy"),
    lambda c: c.update(noise_convention="sometimes"),
])
def test_semantic_errors_exit_2(tmp_path, capsys, mutate):
    cfg = _linear_cfg()
    mutate(cfg)
    path = _write(tmp_path, "m.json", cfg)
    assert main(["validate", "--config", path]) == 2
    assert "config error" in capsys.readouterr().err


def test_entropy_csv_deterministic(tmp_path):
    cfg = _write(tmp_path, "m.json", _linear_cfg())
    out1, out2 = str(tmp_path / "a.csv"), str(tmp_path / "b.csv")
    assert main(["entropy", "--config", cfg, "--out", out1]) == 0
    assert main(["entropy", "--config", cfg, "--out", out2]) == 0
    b1 = open(out1, "rb").read()
    assert b1 == open(out2, "rb").read()
    rows = _read_rows(out1)
    assert len(rows) == 1
    r = rows[0]
    assert (r["layer"], r["quantity"], r["method"]) == \
        (1, "entropy", "fixed_point")
    assert r["converged"] == "true"
    assert np.isfinite(r["value"])


def test_entropy_json_format(tmp_path):
    cfg = _write(tmp_path, "m.json", _linear_cfg())
    out = str(tmp_path / "a.json")
    assert main(["entropy", "--config", cfg, "--format", "json",
                 "--out", out]) == 0
    rows = json.loads(open(out, encoding="utf-8").read())
    assert isinstance(rows, list) and rows[0]["quantity"] == "entropy"


def test_method_override_and_agreement(tmp_path):
    cfg = _write(tmp_path, "m.json", _linear_cfg())
    out_fp, out_se = str(tmp_path / "fp.csv"), str(tmp_path / "se.csv")
    assert main(["entropy", "--config", cfg, "--out", out_fp]) == 0
    assert main(["entropy", "--config", cfg, "--out", out_se,
                 "--method", "mlvamp_se"]) == 0
    r_fp, r_se = _read_rows(out_fp)[0], _read_rows(out_se)[0]
    assert r_se["method"] == "mlvamp_se"
    assert r_fp["value"] == pytest.approx(r_se["value"], abs=1e-6)


def test_mutual_info_precondition_exits_2(tmp_path, capsys):
    cfg = _linear_cfg(n_layers=2)
    cfg["quantity"] = "mutual_info"
    cfg["layer"] = 2
    cfg["noise_convention"] = "as_specified"  # layer 1 keeps its noise
    path = _write(tmp_path, "m.json", cfg)
    assert main(["entropy", "--config", path]) == 2
    assert "config error" in capsys.readouterr().err


def test_mutual_info_with_target_layer_convention(tmp_path):
    cfg = _linear_cfg(n_layers=2)
    cfg["quantity"] = ["entropy", "mutual_info"]
    cfg["layer"] = 2
    cfg["noise_convention"] = "target_layer_only"
    path = _write(tmp_path, "m.json", cfg)
    out = str(tmp_path / "mi.csv")
    assert main(["entropy", "--config", path, "--out", out]) == 0
    rows = _read_rows(out)
    assert [r["quantity"] for r in rows] == ["entropy", "mutual_info"]
    assert all(np.isfinite(r["value"]) for r in rows)


def test_sweep_rows_and_parallel_determinism(tmp_path):
    cfg = _linear_cfg()
    cfg["sweep"] = {"parameter": "noise_var",
                    "values": [1e-2, 1e-1, 1.0, 10.0]}
    path = _write(tmp_path, "m.json", cfg)
    out1, out2 = str(tmp_path / "j1.csv"), str(tmp_path / "j2.csv")
    assert main(["sweep", "--config", path, "--out", out1]) == 0
    assert main(["sweep", "--config", path, "--out", out2,
                 "--jobs", "2"]) == 0
    assert open(out1, "rb").read() == open(out2, "rb").read()
    rows = _read_rows(out1)
    assert [r["sweep"] for r in rows] == ["0.01", "0.1", "1.0", "10.0"]
    vals = [r["value"] for r in rows]
    assert vals == sorted(vals)  # more channel noise, more marginal entropy


def test_sweep_weight_std_shortcut(tmp_path):
    cfg = _linear_cfg()
    cfg["sweep"] = {"parameter": "weight_std", "values": [0.5, 2.0]}
    path = _write(tmp_path, "m.json", cfg)
    out = str(tmp_path / "w.csv")
    assert main(["sweep", "--config", path, "--out", out]) == 0
    rows = _read_rows(out)
    assert rows[0]["value"] < rows[1]["value"]  # wider weights, more entropy


def test_sweep_dotted_path_parameter(tmp_path):
    cfg = _linear_cfg(n_layers=2)
    cfg["sweep"] = {"parameter": "model.layers.1.channel.noise_var",
                    "values": [0.1, 1.0]}
    cfg["layer"] = 2
    path = _write(tmp_path, "m.json", cfg)
    out = str(tmp_path / "d.csv")
    assert main(["sweep", "--config", path, "--out", out]) == 0
    rows = _read_rows(out)
    assert rows[0]["value"] < rows[1]["value"]


def test_sweep_bad_parameter_exits_2(tmp_path, capsys):
    cfg = _linear_cfg()
    cfg["sweep"] = {"parameter": "model.layers.3.alpha", "values": [1.0]}
    path = _write(tmp_path, "m.json", cfg)
    assert main(["sweep", "--config", path]) == 2
    assert "config error" in capsys.readouterr().err


def test_compare_linear_all_estimators(tmp_path):
    # small width keeps the kNN bias low; empirical spectra make the
    # replica row exact for the realized matrix instead of the wide limit
    cfg = _linear_cfg(nv=0.1)
    cfg["network"] = {"n_input": 8, "n_samples": 6000, "seed": 5,
                      "spectra": "empirical",
                      "estimators": ["exact_linear", "kraskov",
                                     "kolchinsky"]}
    path = _write(tmp_path, "m.json", cfg)
    out = str(tmp_path / "c.csv")
    assert main(["compare", "--config", path, "--out", out]) == 0
    rows = _read_rows(out)
    by_method = {r["method"]: r["value"] for r in rows}
    assert set(by_method) == {"fixed_point", "exact_linear", "kraskov",
                              "kolchinsky"}
    exact = by_method["exact_linear"]
    assert by_method["fixed_point"] == pytest.approx(exact, abs=1e-4)
    assert by_method["kraskov"] == pytest.approx(exact, rel=0.10)
    assert by_method["kolchinsky"] >= exact - 0.02


def test_compare_empirical_spectra_mode(tmp_path):
    cfg = _linear_cfg(nv=0.1)
    cfg["network"] = {"n_input": 40, "n_samples": 500, "seed": 5,
                      "estimators": ["exact_linear"],
                      "spectra": "empirical"}
    path = _write(tmp_path, "m.json", cfg)
    out = str(tmp_path / "ce.csv")
    assert main(["compare", "--config", path, "--out", out]) == 0
    by_method = {r["method"]: r["value"] for r in _read_rows(out)}
    # replica on the realized spectrum reproduces the finite matrix exactly
    assert by_method["fixed_point"] == pytest.approx(
        by_method["exact_linear"], abs=1e-5)


def test_compare_duplicate_samples_exit_1(tmp_path, capsys):
    # saturating hardtanh with zero noise collapses samples onto the
    # corners; the kNN estimator must refuse and the CLI report failure
    cfg = {
        "model": {
            "prior": {"variance": 1.0},
            "layers": [
                {"channel": {"activation": "hardtanh", "noise_var": 0.0},
                 "spectrum": {"kind": "mp", "aspect_ratio": 1.0,
                              "scale": 3600.0},
                 "alpha": 1.0},
            ],
        },
        "network": {"n_input": 3, "n_samples": 300, "seed": 1,
                    "estimators": ["kraskov"]},
    }
    path = _write(tmp_path, "m.json", cfg)
    assert main(["compare", "--config", path]) == 1
    assert "computation failed" in capsys.readouterr().err


def test_compare_exact_linear_rejected_on_nonlinear_model(tmp_path, capsys):
    cfg = _linear_cfg(nv=0.1)
    cfg["model"]["layers"][0]["channel"]["activation"] = "relu"
    cfg["network"] = {"n_input": 20, "n_samples": 100,
                      "estimators": ["exact_linear"]}
    path = _write(tmp_path, "m.json", cfg)
    assert main(["compare", "--config", path]) == 2
    assert "config error" in capsys.readouterr().err


def test_compare_needs_mp_spectra(tmp_path, capsys):
    cfg = _linear_cfg()
    cfg["model"]["layers"][0]["spectrum"] = {"kind": "point", "value": 1.0}
    cfg["network"] = {"n_input": 10, "n_samples": 50}
    path = _write(tmp_path, "m.json", cfg)
    assert main(["compare", "--config", path]) == 2
    assert "config error" in capsys.readouterr().err


def test_compare_non_integer_width_chain_exits_2(tmp_path, capsys):
    cfg = _linear_cfg()
    cfg["model"]["layers"][0]["alpha"] = 0.77
    cfg["model"]["layers"][0]["spectrum"]["aspect_ratio"] = 0.77
    cfg["network"] = {"n_input": 10, "n_samples": 50}
    path = _write(tmp_path, "m.json", cfg)
    assert main(["compare", "--config", path]) == 2
    assert "config error" in capsys.readouterr().err


def test_stdout_output_matches_file(tmp_path, capsys):
    cfg = _write(tmp_path, "m.json", _linear_cfg())
    out = str(tmp_path / "f.csv")
    assert main(["entropy", "--config", cfg, "--out", out]) == 0
    assert main(["entropy", "--config", cfg]) == 0
    assert capsys.readouterr().out == open(out, encoding="utf-8").read()
