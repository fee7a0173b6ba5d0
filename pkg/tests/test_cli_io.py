import json

import numpy as np
import pytest

from chainlock.chains import Scene, check_certificates, make_chain, scene_valid
from chainlock.cli_io import (
    InvariantViolation,
    SchemaError,
    export_obj,
    load_report,
    load_scene,
    run_cli,
    save_scene,
    scene_to_dict,
)
from chainlock.constructions import build_scene


@pytest.fixture(scope="module")
def interlocked():
    return build_scene("interlocked")


def test_round_trip_byte_identical(interlocked, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    save_scene(interlocked, a)
    loaded = load_scene(a)
    save_scene(loaded, b)
    assert a.read_bytes() == b.read_bytes()
    for x, y in zip(interlocked.chains, loaded.chains):
        assert np.array_equal(x.joints, y.joints)
        assert np.array_equal(x.reference_lengths, y.reference_lengths)


def test_loaded_scene_checks(interlocked, tmp_path):
    p = tmp_path / "s.json"
    save_scene(interlocked, p)
    s = load_scene(p)
    assert scene_valid(s) and check_certificates(s)
    assert s.certificates == interlocked.certificates


def test_truncated_file(interlocked, tmp_path):
    p = tmp_path / "s.json"
    save_scene(interlocked, p)
    p.write_text(p.read_text()[:200])
    with pytest.raises(SchemaError):
        load_scene(p)


def test_wrong_version(interlocked, tmp_path):
    doc = scene_to_dict(interlocked) | {"version": 99}
    p = tmp_path / "s.json"
    p.write_text(json.dumps(doc))
    with pytest.raises(SchemaError):
        load_scene(p)


def test_length_violation(interlocked, tmp_path):
    doc = scene_to_dict(interlocked)
    doc["chains"][1]["joints"][2][0] += 0.5
    p = tmp_path / "s.json"
    p.write_text(json.dumps(doc))
    with pytest.raises(InvariantViolation):
        load_scene(p)


def test_certificate_out_of_range(interlocked, tmp_path):
    doc = scene_to_dict(interlocked)
    doc["certificates"][0]["target"][1] = [0, 1, 99]
    p = tmp_path / "s.json"
    p.write_text(json.dumps(doc))
    with pytest.raises(InvariantViolation):
        load_scene(p)


# -- OBJ ---------------------------------------------------------------------

def _obj_records(path):
    lines = path.read_text().splitlines()
    return [l for l in lines if l.startswith("v ")], [l for l in lines if l.startswith("l ")], lines


def test_obj_two_chain(tmp_path):
    s = Scene((make_chain([(0, 0, 0), (1, 0, 0), (1, 1, 0)], "two_chain"),), 0.01, 1e-4)
    p = tmp_path / "t.obj"
    export_obj(s, p)
    v, l, _ = _obj_records(p)
    assert len(v) == 3 and l == ["l 1 2", "l 2 3"]


def test_obj_interlocked_counts(interlocked, tmp_path):
    p = tmp_path / "s.obj"
    export_obj(interlocked, p)
    v, l, lines = _obj_records(p)
    assert len(v) == 17 + 3
    assert len(l) == 16 + 2
    assert "l 18 19" in l  # first 2-chain link, indices continue across chains
    assert any("role trapezoid16" in x for x in lines) and any("role two_chain" in x for x in lines)


def test_obj_empty_scene(tmp_path):
    p = tmp_path / "e.obj"
    export_obj(Scene((), 0.01, 1e-4), p)
    assert all(l.startswith("#") for l in p.read_text().splitlines())


# -- command line ---------------------------------------------------------------

def test_cli_build_verify_export(tmp_path, capsys):
    s, r, o = tmp_path / "s.json", tmp_path / "r.json", tmp_path / "s.obj"
    assert run_cli(["build", "--kind", "tangle_only", "--out", str(s)]) == 0
    assert run_cli(["verify", "--scene", str(s), "--samples", "1000", "--seed", "7", "--report", str(r)]) == 0
    doc = load_report(r)
    assert doc["kind"] == "verify" and doc["params"]["seed"] == 7 and doc["result"]["passed"]
    assert run_cli(["export", "--scene", str(s), "--out", str(o)]) == 0
    assert o.exists()


def test_cli_oracle_deviation(tmp_path, capsys):
    r = tmp_path / "d.json"
    assert run_cli(["oracle", "deviation", "--epsilon", "0.02", "--length", "1",
                    "--n", "100000", "--seed", "1", "--report", str(r)]) == 0
    out = capsys.readouterr().out
    assert "formula delta" in out and "sampled max" in out
    res = load_report(r)["result"]
    assert res["sampled_max"] <= res["formula_delta"]


def test_cli_reports_reproducible(tmp_path):
    paths = [tmp_path / "a.json", tmp_path / "b.json"]
    for p in paths:
        run_cli(["oracle", "height", "--epsilon", "0.01", "--n", "20000", "--seed", "3", "--report", str(p)])
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_cli_escape_expect(tmp_path, capsys):
    s, r = tmp_path / "c.json", tmp_path / "e.json"
    run_cli(["build", "--kind", "control", "--out", str(s)])
    code = run_cli(["escape", "--scene", str(s), "--budget", "20000", "--restarts", "2", "--workers", "1",
                    "--expect", "separated", "--report", str(r)])
    assert code == 0
    assert load_report(r)["result"]["separated"] is True


def test_cli_usage_error(capsys):
    assert run_cli(["build"]) == 2


def test_cli_parameter_error(tmp_path, capsys):
    code = run_cli(["build", "--kind", "interlocked", "--epsilon", "0.5", "--out", str(tmp_path / "x.json")])
    assert code == 2
    assert "chainlock: error: ParameterDomain" in capsys.readouterr().err


def test_cli_missing_file(capsys):
    assert run_cli(["verify", "--scene", "/nonexistent/s.json"]) == 2
