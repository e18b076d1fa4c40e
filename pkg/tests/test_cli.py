import csv
import json
import logging
from pathlib import Path

import pytest

from polarizon.cli import main

from conftest import REFERENCE, reference_dict

GOLDEN = json.loads((Path(__file__).parent / "golden" / "report_schema.json").read_text())


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def run(*args):
    return main([str(a) for a in args])


def test_verify_schema_matches_golden(tmp_path):
    out = tmp_path / "r.json"
    assert run("verify", "--config", REFERENCE, "--suite", "susceptibility", "--out", out) == 0
    rep = json.loads(out.read_text())
    assert sorted(rep) == GOLDEN["report"]
    assert rep["suite"] == "susceptibility" and rep["passed"] is True
    for c in rep["checks"]:
        keys = set(c) - set(GOLDEN["check_optional"])
        assert sorted(keys) == GOLDEN["check"]
        assert sorted(c["grid"]) == GOLDEN["grid"]
        assert c["pass"] == (c["residual"] <= c["tolerance"])
        assert isinstance(c["ref"], str) and c["ref"]
        for v in (c["value"], c["target"]):
            if isinstance(v, dict):
                assert sorted(v) == GOLDEN["complex"]


def test_reports_are_reproducible(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for p in (a, b):
        run("verify", "--config", REFERENCE, "--suite", "greenfn", "--seed", 4, "--out", p)
    assert a.read_bytes() == b.read_bytes()


def test_invalid_config_exit_status(tmp_path, caplog):
    d = reference_dict()
    d["layers"][0]["gamma"] = 0.0
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(d))
    with caplog.at_level(logging.ERROR):
        assert run("verify", "--config", bad, "--suite", "susceptibility") == 2
    assert "layers[0].gamma" in caplog.text


def test_failing_check_gives_nonzero_status(tmp_path):
    d = reference_dict()
    d["quick"]["tolerance_scale"] = 0.0
    cfg = tmp_path / "strict.json"
    cfg.write_text(json.dumps(d))
    assert run("verify", "--config", cfg, "--suite", "susceptibility", "--quick",
               "--out", tmp_path / "r.json") == 1


def test_susceptibility_table(tmp_path):
    out = tmp_path / "chi.csv"
    assert run("susceptibility", "--config", REFERENCE, "--layer", 0, "--out", out) == 0
    r = rows(out)
    assert r[0] == ["omega", "re_chi", "im_chi"] and len(r) == 129
    assert json.loads(out.with_suffix(".report.json").read_text())["passed"]


def test_emit_chi_and_jdiag(tmp_path):
    run("emit", "--config", REFERENCE, "--what", "chi", "--out", tmp_path / "c.csv")
    assert rows(tmp_path / "c.csv")[0] == ["omega", "layer", "re", "im"]
    run("emit", "--config", REFERENCE, "--what", "jdiag", "--quick", "--out", tmp_path / "j.csv")
    r = rows(tmp_path / "j.csv")
    assert r[0] == ["omega", "z", "kernel", "target", "ratio"]
    assert all(abs(float(x[4]) - 1) < 2e-2 for x in r[1:])


def test_emit_green_snaps_to_node(tmp_path, caplog):
    with caplog.at_level(logging.WARNING):
        assert run("emit", "--config", REFERENCE, "--what", "green", "--omega", 1000.0,
                   "--out", tmp_path / "g.csv") == 0
    assert "nearest node" in caplog.text
    r = rows(tmp_path / "g.csv")
    assert len(r) == 9 and len(r[0]) == 16


def test_greenfn_command(tmp_path):
    out = tmp_path / "g.csv"
    assert run("greenfn", "--config", REFERENCE, "--omega", 1.328125, "--out", out) == 0
    recs = json.loads(out.with_suffix(".sum_rules.json").read_text())
    assert [r["rule"] for r in recs] == ["wG", "w3Gchi", "w3G", "w3chiGchi", "w5chiGchi"]
    assert set(recs[0]) == {"rule", "target", "value", "residual", "omega_max", "Nz"}


def test_evolve_from_file(tmp_path, monkeypatch):
    init = tmp_path / "init.csv"
    init.write_text("field,z,omega,value\nA,1.25,,1.0\nY,2.0,3.0,0.5\n")
    out = tmp_path / "tr.csv"
    monkeypatch.setenv("POLARIZON_THREADS", "1")
    assert run("evolve", "--config", REFERENCE, "--kind", "A", "--t-max", 2.0, "--nt", 3,
               "--initial", init, "--out", out) == 0
    r = rows(out)
    assert r[0] == ["t", "z", "value"] and len(r) == 1 + 3 * 8
    first = {float(x[1]): float(x[2]) for x in r[1:9]}
    assert first[1.25] == pytest.approx(1.0, abs=1e-8)
    assert first[0.25] == pytest.approx(0.0, abs=1e-8)


def test_evolve_random_is_seeded(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        run("evolve", "--config", REFERENCE, "--kind", "E", "--t-max", 1.0, "--nt", 2,
            "--seed", 9, "--threads", 1, "--out", p)
    assert a.read_bytes() == b.read_bytes()


def test_dump_j(tmp_path):
    run("verify", "--config", REFERENCE, "--suite", "susceptibility", "--quick",
        "--dump-j", tmp_path / "j", "--out", tmp_path / "r.json")
    files = sorted((tmp_path / "j").glob("*.csv"))
    assert len(files) == 64
    assert rows(files[0])[0] == ["omega", "z", "block", "z_prime", "re", "im"]
