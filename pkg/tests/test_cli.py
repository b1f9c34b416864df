import json
import subprocess
import sys
from pathlib import Path

import pytest

from projrecover.cli import main
from projrecover.scenes import ConfigError, decode_matrix, dumps, parse_config

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def write(tmp_path, name, doc):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def test_generate_is_byte_identical(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for out in (a, b):
        code, _, _ = run(capsys, "generate", "--config", str(CONFIGS / "conic.json"),
                         "--out", str(out))
        assert code == 0
    assert a.read_bytes() == b.read_bytes()
    doc = json.loads(a.read_text())
    # fitted plane-conic models for both images
    models = doc["varieties"][0]["projected_models"]
    assert [m["degree"] for m in models] == [2, 2]
    assert all(len(m["forms"]) == 1 for m in models)


def test_seed_override_changes_scene(tmp_path, capsys):
    _, a, _ = run(capsys, "generate", "--config", str(CONFIGS / "conic.json"))
    _, b, _ = run(capsys, "generate", "--config", str(CONFIGS / "conic.json"), "--seed", "99")
    assert a != b


def test_quadric_in_p3_rejected(tmp_path, capsys):
    cfg = write(tmp_path, "bad.json", {"m": 3, "seed": 1, "varieties": [{"kind": "quadric"}]})
    code, out, err = run(capsys, "generate", "--config", cfg)
    assert code == 2 and "codimension" in err and out == ""


@pytest.mark.parametrize("doc", [
    {"seed": 1},
    {"m": 3},
    {"m": 3, "seed": 1, "varieties": [{"kind": "torus"}]},
    {"m": 3, "seed": 1, "projections": [{"random": True}]},
    {"m": 3, "seed": 1, "tolerances": {"nonsense": 1}},
])
def test_config_errors_exit_2(tmp_path, capsys, doc):
    code, _, _ = run(capsys, "fundamental", "--config", write(tmp_path, "c.json", doc))
    assert code == 2


def test_unreadable_and_missing_config(tmp_path, capsys):
    bad = tmp_path / "x.json"
    bad.write_text("{not json")
    assert run(capsys, "generate", "--config", str(bad))[0] == 2
    assert run(capsys, "generate", "--config", str(tmp_path / "nope.json"))[0] == 2
    assert run(capsys, "generate")[0] == 2


def test_bad_arguments_exit_2(capsys):
    assert main(["frobnicate"]) == 2
    assert main(["fundamental", "--tol", "no-equals"]) == 2


def test_fundamental_report(capsys):
    code, out, _ = run(capsys, "fundamental", "--config", str(CONFIGS / "conic.json"), "-k", "2")
    assert code == 0
    rep = json.loads(out)
    f2 = rep["orders"]["2"]
    assert len(f2["entries"]) == 3 and len(f2["entries"][0]) == 3
    assert f2["rank"] == 2
    assert f2["correspondence_residual"] < 1e-9
    assert rep["passed"] is True


def test_failing_check_exit_1(capsys):
    code, out, _ = run(capsys, "fundamental", "--config", str(CONFIGS / "conic.json"),
                       "--tol", "correspondence=0")
    assert code == 1
    assert json.loads(out)["checks"]["correspondence_F2"]["pass"] is False


def test_order_out_of_range(capsys):
    assert run(capsys, "fundamental", "--config", str(CONFIGS / "conic.json"), "-k", "3")[0] == 2


def test_diagnose(capsys):
    code, out, _ = run(capsys, "diagnose", "3", "10")
    rep = json.loads(out)["dimension_report"]
    assert code == 0 and rep["lower_bound"] == -3 and rep["threshold_met"] is True
    assert run(capsys, "diagnose")[0] == 2
    assert run(capsys, "diagnose", "2", "1")[0] == 2


def test_kruppa_check_conic(capsys):
    code, out, _ = run(capsys, "kruppa-check", "--config", str(CONFIGS / "conic.json"))
    rep = json.loads(out)
    assert code == 0
    assert rep["coefficient_counts"] == [3]
    assert rep["classical_residual"] < 1e-10
    assert rep["isolation"]["isolated"] is False


def test_kruppa_check_quadric(capsys):
    code, out, _ = run(capsys, "kruppa-check", "--config", str(CONFIGS / "quadric_m4.json"))
    assert code == 0 and json.loads(out)["coefficient_counts"] == [6]


def test_kruppa_check_needs_exact_duals(capsys):
    code, _, err = run(capsys, "kruppa-check", "--config", str(CONFIGS / "twisted_cubic.json"))
    assert code == 2


def test_kruppa_solve(capsys):
    code, out, _ = run(capsys, "kruppa-solve", "--config", str(CONFIGS / "five_conics.json"),
                       "--trials", "4")
    rep = json.loads(out)
    assert code == 0 and rep["success_rate"] == 1.0 and len(rep["trials"]) == 4


def test_recover_from_scene_and_f_file(tmp_path, capsys):
    code, out, _ = run(capsys, "recover", "--config", str(CONFIGS / "conic.json"))
    assert code == 0 and json.loads(out)["passed"]
    _, out, _ = run(capsys, "fundamental", "--config", str(CONFIGS / "quadric_m4.json"))
    f2 = json.loads(out)["orders"]["2"]
    f_file = write(tmp_path, "f.json", {"kind": "fundamental", "m": f2["m"], "k": f2["k"],
                                         "entries": f2["entries"]})
    code, out, _ = run(capsys, "recover", "--config", f_file)
    assert code == 0 and json.loads(out)["checks"]["canonical_round_trip"]["pass"]


def test_recover_malformed_f_file(tmp_path, capsys):
    f_file = write(tmp_path, "f.json", {"kind": "fundamental", "m": 3})
    assert run(capsys, "recover", "--config", f_file)[0] == 2


def test_reconstruct_twisted_cubic(tmp_path, capsys):
    scene = tmp_path / "scene.json"
    run(capsys, "generate", "--config", str(CONFIGS / "twisted_cubic.json"), "--out", str(scene))
    code, out, _ = run(capsys, "reconstruct", "--config", str(scene), "--fibers", "50")
    census = json.loads(out)["census"][0]
    assert code == 0 and census["modal"] == [3, 6]


def test_reconstruct_needs_curves_in_p3(capsys):
    assert run(capsys, "reconstruct", "--config", str(CONFIGS / "quadric_m4.json"))[0] == 2


def test_scene_file_round_trip(tmp_path, capsys):
    scene = tmp_path / "scene.json"
    run(capsys, "generate", "--config", str(CONFIGS / "conic.json"), "--out", str(scene))
    _, from_cfg, _ = run(capsys, "fundamental", "--config", str(CONFIGS / "conic.json"))
    _, from_scene, _ = run(capsys, "fundamental", "--config", str(scene))
    assert from_cfg == from_scene


@pytest.mark.parametrize("argv", [
    ["fundamental", "--config", str(CONFIGS / "conic.json")],
    ["kruppa-check", "--config", str(CONFIGS / "conic.json")],
    ["recover", "--config", str(CONFIGS / "conic.json")],
    ["reconstruct", "--config", str(CONFIGS / "conic.json"), "--fibers", "30"],
])
def test_reports_are_deterministic(capsys, argv):
    assert run(capsys, *argv)[1] == run(capsys, *argv)[1]


def test_internal_error_exit_3(tmp_path, capsys, monkeypatch):
    import projrecover.cli as cli

    def boom(args):
        raise RuntimeError("boom")

    monkeypatch.setitem(cli.COMMANDS, "diagnose", boom)
    assert run(capsys, "diagnose", "3", "2")[0] == 3


def test_encoding_helpers():
    assert json.loads(dumps({"z": 1 + 2j})) == {"z": [1.0, 2.0]}
    assert decode_matrix([[[1, 2], [3, 4]]]).tolist() == [[1 + 2j, 3 + 4j]]
    assert decode_matrix([[1.0, 2.0]]).tolist() == [[1, 2]]
    with pytest.raises(ConfigError):
        decode_matrix([["a"]])
    with pytest.raises(ValueError):
        dumps({"x": float("nan")})


def test_explicit_matrices_and_coefficients():
    cfg = parse_config({"m": 3, "seed": 5, "projections": [
        {"matrix": [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0]]},
        {"matrix": [[0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]]}]})
    from projrecover.scenes import build_scene

    scene = build_scene(cfg)
    assert scene.pair.first.matrix[0, 0] == 1


def test_console_script_runs():
    out = subprocess.run([sys.executable, "-m", "projrecover", "diagnose", "4", "2"],
                         capture_output=True, text=True, check=False)
    assert out.returncode == 0
    assert json.loads(out.stdout)["dimension_report"]["lower_bound"] == 15
