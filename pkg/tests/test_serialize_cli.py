import json

import numpy as np
import pytest

import sigsep
from sigsep import (coredinates, dump_csv, dump_jsonl, dump_report,
                    load_ensemble, parse_csv, parse_jsonl, pushforward_affine,
                    save_ensemble)
from sigsep.cli import main
from sigsep.errors import ParseError
from sigsep.lab import exact_source, random_mixing

from conftest import random_ensemble


def test_jsonl_roundtrip_idempotent(rng):
    ens = random_ensemble(rng, d=2, n_paths=4)
    text = dump_jsonl(ens)
    once = parse_jsonl(text)
    assert dump_jsonl(once) == text
    assert once.d == ens.d and once.size == ens.size
    a, b = coredinates(ens), coredinates(once)
    assert np.abs(a.m - b.m).max() < 1e-12


def test_jsonl_parse_errors():
    with pytest.raises(ParseError):
        parse_jsonl("")
    with pytest.raises(ParseError):
        parse_jsonl("not json\n")
    with pytest.raises(ParseError):
        parse_jsonl('{"weight": 1.0, "times": [0, 1]}\n')      # missing values
    with pytest.raises(ParseError):
        parse_jsonl('{"weight": 1.0, "times": [0], "values": [[1]]}\n')


def test_csv_roundtrip_and_sorting(rng):
    ens = random_ensemble(rng, d=3, n_paths=3)
    text = dump_csv(ens)
    back = parse_csv(text)
    assert back.d == 3 and back.size == 3
    assert dump_csv(back) == dump_csv(parse_csv(dump_csv(back)))
    lines = text.splitlines()
    swapped = "\n".join([lines[0], lines[2], lines[1], *lines[3:]]) + "\n"
    with pytest.raises(ParseError):
        parse_csv(swapped)
    with pytest.raises(ParseError):
        parse_csv("bad,header\n1,2\n")
    with pytest.raises(ParseError):
        parse_csv("")


def test_dump_report_deterministic_and_nonfinite():
    doc = {"b": np.float64(1.5), "a": np.array([1, 2]),
           "x": float("inf"), "y": float("nan"), "flag": np.bool_(True)}
    text = dump_report(doc)
    assert text == dump_report(doc)
    parsed = json.loads(text)
    assert parsed["x"] == "inf" and parsed["y"] == "nan"
    assert parsed["a"] == [1, 2] and parsed["flag"] is True
    assert list(parsed) == sorted(parsed)


def _write_fixture(tmp_path, d=2, seed=0):
    rng = np.random.default_rng(seed)
    src = exact_source(d, rng)
    A = random_mixing(d, rng)
    obs = pushforward_affine(src, A)
    obs_file = tmp_path / "obs.jsonl"
    save_ensemble(obs, str(obs_file))
    mix_file = tmp_path / "A.json"
    mix_file.write_text(json.dumps(A.tolist()))
    return src, A, obs_file, mix_file


def test_cli_separate_end_to_end(tmp_path, rng):
    src, A, obs_file, _ = _write_fixture(tmp_path)
    out = tmp_path / "report.json"
    code = main(["separate", "--input", str(obs_file), "--output", str(out),
                 "--restarts", "8"])
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["contrast_values"][0] < 1e-8
    assert len(doc["minimizers"]) == 1      # signed-permutation copies collapsed
    theta = np.array(doc["minimizers"][0])
    assert sigsep.align_monomial(theta, A).rel_error < 1e-6
    demixed = load_ensemble(str(tmp_path / "report.demixed.jsonl"))
    assert demixed.d == 2


def test_cli_defect_and_bounds(tmp_path):
    src, A, obs_file, mix_file = _write_fixture(tmp_path)
    src_file = tmp_path / "src.jsonl"
    save_ensemble(src, str(src_file))
    assert main(["defect", "--input", str(src_file)]) == 0
    out = tmp_path / "bounds.json"
    assert main(["bounds", "--input", str(src_file), "--mixing",
                 str(mix_file), "--output", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["k_d"] == pytest.approx(1.0)
    assert doc["defect"] < 1e-10


def test_cli_exit_codes(tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text("this is not json\n")
    assert main(["separate", "--input", str(bad)]) == 2

    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    assert main(["separate", "--input", str(empty)]) == 2

    constant = tmp_path / "constant.jsonl"
    constant.write_text(dump_jsonl(sigsep.SignalEnsemble((
        sigsep.PiecewiseLinearPath([0.0, 1.0], np.ones((2, 2))),))))
    assert main(["separate", "--input", str(constant)]) == 3

    # two perfectly correlated channels: gate passes, covariance singular
    rng = np.random.default_rng(1)
    vals = rng.normal(size=(5, 1))
    path = sigsep.PiecewiseLinearPath(np.linspace(0, 1, 5),
                                      np.column_stack([vals, vals]))
    collinear = tmp_path / "collinear.jsonl"
    collinear.write_text(dump_jsonl(sigsep.SignalEnsemble((path,))))
    assert main(["separate", "--input", str(collinear)]) == 4

    assert main(["separate", "--input", str(bad), "--restarts", "0"]) == 2


def test_cli_simulate_deterministic(tmp_path, monkeypatch):
    scen = tmp_path / "scenario.json"
    scen.write_text(json.dumps({"d": 2, "source": "exact", "n_vertices": 5,
                                "restarts": 4, "seed": 9, "lam": 0.05}))
    outs = []
    for threads in ("1", "4"):
        monkeypatch.setenv("SIGSEP_THREADS", threads)
        out = tmp_path / f"sim{threads}.json"
        assert main(["simulate", "--input", str(scen),
                     "--output", str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    bad = tmp_path / "bad_scen.json"
    bad.write_text(json.dumps({"lam": 7}))
    assert main(["simulate", "--input", str(bad)]) == 2


def test_cli_bench(tmp_path):
    out = tmp_path / "bench.json"
    assert main(["bench", "--d", "2", "--n-paths", "20", "--n-vertices", "5",
                 "--output", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["seconds_signatures"] >= 0
