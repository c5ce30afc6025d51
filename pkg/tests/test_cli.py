import json

import numpy as np
import pytest

from landscape_counting import reports
from landscape_counting.cli import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, RunConfig, main
from landscape_counting.discretize import ScalarField, build_grid


def write_config(tmp_path, cfg, name="run.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def run(tmp_path, sub, cfg, out="out", svg=False):
    args = [sub, "--config", write_config(tmp_path, cfg), "--out-dir", str(tmp_path / out)]
    return main(args + (["--svg"] if svg else []))


def test_verify_default_harmonic(tmp_path):
    assert run(tmp_path, "verify", {}) == EXIT_OK
    doc = json.loads((tmp_path / "out" / "verify.json").read_text())
    assert doc["schema_version"] == reports.SCHEMA_VERSION
    s = doc["sandwich"]
    assert s["c_est"] is not None and s["C_est"] is not None
    assert s["c_est"] <= 1 <= s["C_est"]
    assert doc["sandwich_valid"] and doc["chain_holds"]
    assert doc["config"]["grid"]["nodes_per_side"] == 255
    assert doc["config_sha256"] == reports.config_hash(doc["config"])


def test_invalid_grid(tmp_path):
    assert run(tmp_path, "solve", {"grid": {"nodes_per_side": 2}}) == EXIT_CONFIG
    assert not (tmp_path / "out").exists()


@pytest.mark.parametrize("cfg", [
    {"bogus": 1},
    {"potential": "nope"},
    {"potential": [{"coeff": -1.0, "alpha": [0]}]},
    {"potential": "simon"},
    {"mu_grid": {"auto": False}},
    {"mu_grid": {"auto": False, "min": 3.0, "max": 1.0, "count": 4}},
    {"method": "sturm", "grid": {"dimension": 2, "half_width": 4.0, "nodes_per_side": 20}},
    {"count": {"field": "other"}},
    {"samples": {"maximal": {"design": "grid"}}},
    {"samples": {"maximal": {"box": -1.0}}},
])
def test_config_errors(tmp_path, cfg):
    assert run(tmp_path, "solve", cfg) == EXIT_CONFIG


def test_unreadable_config(tmp_path):
    p = tmp_path / "broken.json"
    p.write_text("{not json")
    assert main(["solve", "--config", str(p)]) == EXIT_CONFIG


def test_numeric_failure(tmp_path):
    # a potential so small that no radius brackets the maximal function
    cfg = {"potential": "const:1e-30", "samples": {"maximal": {"count": 3}}}
    assert run(tmp_path, "msweep", cfg) == EXIT_NUMERIC


def test_solve_outputs(tmp_path):
    cfg = {"grid": {"dimension": 2, "half_width": 6.0, "nodes_per_side": 31}}
    assert run(tmp_path, "solve", cfg, svg=True) == EXIT_OK
    out = tmp_path / "out"
    h, header, rows = reports.read_csv(out / "landscape.csv")
    assert header == ["x", "y", "u", "inv_u"] and len(rows) == 31 * 31
    d, n, L, vals = reports.read_field(out / "landscape.field")
    assert (d, n, L) == (2, 31, 6.0)
    np.testing.assert_array_equal(vals, [float(r[2]) for r in rows])
    man = json.loads((out / "manifest.json").read_text())
    assert man["config_sha256"] == h
    assert {f["name"] for f in man["files"]} == {"landscape.csv", "landscape.field",
                                                  "landscape.json", "landscape.svg"}
    assert f"config_sha256={h}" in (out / "landscape.svg").read_text()


def test_count_simon_raw_boxes(tmp_path):
    cfg = {"potential": "simon",
           "grid": {"dimension": 2, "half_width": 10.0, "nodes_per_side": 159},
           "count": {"field": "raw", "half_widths": [10, 20, 40]},
           "mu_grid": {"auto": False, "min": 1.0, "max": 2.0, "count": 2}}
    assert run(tmp_path, "count", cfg) == EXIT_OK
    doc = json.loads((tmp_path / "out" / "counts.json").read_text())
    assert doc["volume_strictly_increasing_in_box"] == [True, True]
    vols = [float(reports.read_csv(tmp_path / "out" / f"counts_L{L}.csv")[2][0][1])
            for L in (10, 20, 40)]
    assert vols[0] < vols[1] < vols[2]
    assert reports.read_csv(tmp_path / "out" / "counts_L10.csv")[1] == ["mu", "volume", "N", "n",
                                                                         "boxes_total"]


def test_spectra_and_msweep(tmp_path):
    cfg = {"grid": {"dimension": 1, "half_width": 10.0, "nodes_per_side": 1999},
           "mu_grid": {"auto": False, "min": 2.0, "max": 10.0, "count": 5, "spacing": "linear"},
           "samples": {"maximal": {"count": 20, "box": 5.0}}}
    assert run(tmp_path, "spectra", cfg) == EXIT_OK
    _, header, rows = reports.read_csv(tmp_path / "out" / "spectra.csv")
    assert header == ["mu", "count", "retries"]
    assert [int(r[1]) for r in rows] == [1, 2, 3, 4, 5]
    assert run(tmp_path, "msweep", cfg) == EXIT_OK
    _, header, rows = reports.read_csv(tmp_path / "out" / "maximal.csv")
    assert header == ["x", "m", "M", "contiguous"] and len(rows) == 20


def test_diagnose(tmp_path):
    cfg = {"potential": [{"coeff": 1.0, "alpha": [2, 0]}],
           "grid": {"dimension": 2, "half_width": 10.0, "nodes_per_side": 127},
           "diagnose": {"shells": [0, 2, 4, 6]}}
    assert run(tmp_path, "diagnose", cfg) == EXIT_OK
    doc = json.loads((tmp_path / "out" / "diagnose.json").read_text())
    assert doc["polynomial_discrete"] is False
    assert doc["numeric"]["verdict"] == "not consistent"


def test_determinism(tmp_path):
    cfg = {"grid": {"dimension": 1, "half_width": 10.0, "nodes_per_side": 255}}
    for sub in ("verify", "solve", "spectra"):
        assert run(tmp_path, sub, cfg, "a", svg=True) in (EXIT_OK,)
        assert run(tmp_path, sub, cfg, "b", svg=True) in (EXIT_OK,)
    a = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert a == sorted(p.name for p in (tmp_path / "b").iterdir())
    for name in a:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name


def test_config_roundtrip():
    cfg = RunConfig.from_dict({"potential": "simon", "grid": {"dimension": 2}})
    again = RunConfig.from_dict(cfg.data)
    assert again.data == cfg.data and again.sha256 == cfg.sha256


def test_jsonable_non_finite():
    assert reports.jsonable({"a": float("inf"), "b": np.float64(2.0), "c": (1, np.int64(2))}) == \
        {"a": "inf", "b": 2.0, "c": [1, 2]}


def test_field_format_errors(tmp_path):
    p = tmp_path / "f.bin"
    p.write_bytes(b"garbage-garbage-garbage-")
    with pytest.raises(ValueError):
        reports.read_field(p)
    g = build_grid(1, 1.0, 4)
    reports.write_field(p, ScalarField(g, np.arange(4.0)))
    p.write_bytes(p.read_bytes()[:-8])
    with pytest.raises(ValueError):
        reports.read_field(p)
