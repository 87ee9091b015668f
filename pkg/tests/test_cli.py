import json

import pytest
from hypothesis import given, settings, strategies as st

from isotorus import cli, hill
from isotorus.errors import BracketError, ConfigError

from conftest import CONFIGS


def _write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def _run(tmp_path, command, cfg, *extra):
    out = tmp_path / "out"
    code = cli.main([command, "--config", _write(tmp_path, cfg), "--out", str(out), *extra])
    return code, out


def test_zero_potential_empty_gaps(tmp_path):
    code, out = _run(tmp_path, "spectrum", {"potential": {"type": "zero"}, "n_max": 5,
                                            "crosscheck": False})
    assert code == 0
    assert json.loads((out / "spectrum.json").read_text())["gaps"] == []


def test_mismatched_frequency_reference(tmp_path):
    code = cli.main(["spectrum", "--config", str(CONFIGS / "mismatched_frequency.json"),
                     "--out", str(tmp_path / "o")])
    assert code == 2


@pytest.mark.parametrize("bad", [{"n_max": 0}, {"tol": -1}, {"window": [3, 1]},
                                 {"r_list": [20, 10]}, {"r": "x"}])
def test_knob_validation(tmp_path, bad):
    cfg = {"potential": {"type": "cosine", "epsilon": 0.01}, **bad}
    code, out = _run(tmp_path, "spectrum", cfg)
    assert code == 2
    assert not out.exists()


def test_unknown_potential_type(tmp_path):
    assert _run(tmp_path, "spectrum", {"potential": {"type": "nope"}})[0] == 2


def test_missing_config_file(tmp_path):
    assert cli.main(["spectrum", "--config", str(tmp_path / "none.json")]) == 2


def test_command_mismatch(tmp_path):
    cfg = {"command": "flow", "potential": {"type": "zero"}}
    assert _run(tmp_path, "spectrum", cfg)[0] == 2


def test_crossvalidation_failure_exit(tmp_path):
    cfg = {"potential": {"type": "cosine", "epsilon": 0.01}, "n_max": 3, "R": 4,
           "xval_tol": 1e-16}
    code, out = _run(tmp_path, "spectrum", cfg)
    assert code == 4
    man = json.loads((out / "manifest.json").read_text())
    assert man["status"] == "cross-validation failure"
    assert not json.loads((out / "crosscheck.json").read_text())["passed"]


def test_numerical_failure_exit(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise BracketError("forced", {})
    monkeypatch.setattr(hill, "spectrum", boom)
    code, out = _run(tmp_path, "spectrum", {"potential": {"type": "cosine", "epsilon": 0.01}})
    assert code == 3
    assert "BracketError" in json.loads((out / "manifest.json").read_text())["error"]


def test_manifest_contents(tmp_path):
    cfg = {"potential": {"type": "cosine", "epsilon": 0.01}, "n_max": 3, "R": 8}
    code, out = _run(tmp_path, "spectrum", cfg, "--threads", "1", "--tol", "1e-9")
    assert code == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["tol"] == 1e-9 and man["knobs"]["n_max"] == 3 and man["threads"] == 1
    assert set(man["versions"]) >= {"numpy", "scipy", "numba", "mpmath", "python", "isotorus"}
    assert sorted(man["artifacts"]) == ["crosscheck.json", "spectrum.csv", "spectrum.json"]
    for name in man["artifacts"]:
        assert man["config_hash"] in (out / name).read_text()


def test_tol_override_changes_hash(tmp_path):
    path = _write(tmp_path, {"potential": {"type": "zero"}})
    a = cli.load_config("spectrum", path, tmp_path, None)
    b = cli.load_config("spectrum", path, tmp_path, 1e-9)
    assert a.hash != b.hash and b.tol == 1e-9


def test_bad_threads(tmp_path):
    with pytest.raises(ConfigError):
        cli.load_config("spectrum", _write(tmp_path, {"potential": {"type": "zero"}}),
                        tmp_path, None, 0)


def test_approx_table(tmp_path):
    code, out = _run(tmp_path, "approx", {"frequency": {"omega": ["(sqrt(5)-1)/2", "sqrt(2)-1"]},
                                          "r_list": [10, 20]})
    assert code == 0
    rows = json.loads((out / "approx.json").read_text())["approximants"]
    assert [r["omega_tilde"] for r in rows] == [["8/13", "5/12"], ["13/21", "12/29"]]
    assert [r["T"] for r in rows] == ["156", "609"]


def test_reconstruct_lame(tmp_path):
    code, out = _run(tmp_path, "reconstruct", json.loads((CONFIGS / "lame_reconstruct.json").read_text()))
    assert code == 0
    rep = json.loads((out / "reconstruct.json").read_text())
    assert rep["isospectral"]["max_edge_deviation"] < 1e-7


def test_flow_s0_length_checked(tmp_path):
    cfg = json.loads((CONFIGS / "lame_flow.json").read_text())
    cfg["s0"] = [0.1]
    assert _run(tmp_path, "flow", cfg)[0] == 2


@settings(max_examples=5)
@given(st.floats(min_value=0.001, max_value=0.05), st.integers(min_value=1, max_value=3))
def test_determinism_property(tmp_path_factory, eps, harmonic):
    cfg = {"potential": {"type": "cosine", "epsilon": eps, "harmonic": harmonic}, "n_max": 4,
           "R": 6}
    base = tmp_path_factory.mktemp("det")
    path = _write(base, cfg)
    blobs = []
    for i in range(2):
        out = base / f"o{i}"
        code = cli.main(["spectrum", "--config", path, "--out", str(out)])
        blobs.append((code, {p.name: p.read_bytes() for p in sorted(out.iterdir())}))
    assert blobs[0] == blobs[1]
