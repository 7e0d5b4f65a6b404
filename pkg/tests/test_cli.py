import json
from fractions import Fraction

import pytest

from sclkit.main import EXIT_MALFORMED, EXIT_OK, EXIT_POSITIVE, main


def _run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_graph_delta_of_tree(capsys, info_dir):
    code, out, _ = _run(capsys, "graph", "delta", "--in", f"{info_dir}/tree.graph")
    assert code == EXIT_OK
    assert "subcommand: graph delta" in out
    assert "  delta: 0" in out


def test_graph_manning_json(capsys, info_dir):
    code, out, _ = _run(capsys, "--json", "graph", "manning", "--in", f"{info_dir}/tree.graph")
    assert code == EXIT_OK
    report = json.loads(out)
    assert report["results"]["tree_vertices"] == 1
    assert report["results"]["inequalities_hold"] is True
    assert report["constants"] == {"Delta": 1, "R": 20}


def test_classify_exit_codes(capsys, info_dir):
    code, out, _ = _run(capsys, "classify", "--in", f"{info_dir}/enko.nt")
    assert code == EXIT_OK
    assert 'scl: "Zero"' in out
    code, out, _ = _run(capsys, "classify", "--in", f"{info_dir}/chiral.nt")
    assert code == EXIT_POSITIVE
    code, out, _ = _run(capsys, "classify", "--in", f"{info_dir}/multitwist.nt")
    assert code == EXIT_OK
    assert 'multitwist: "Zero"' in out


def test_classify_with_witness(capsys, info_dir):
    code, out, _ = _run(capsys, "--json", "classify", "--witness", "--in", f"{info_dir}/enko.nt")
    assert code == EXIT_OK
    report = json.loads(out)
    assert report["constants"]["B"] == 1
    assert report["results"]["witnesses"][0]["verified"] is True


def test_pipeline_json(capsys):
    code, out, _ = _run(capsys, "--json", "action", "pipeline", "--backend", "cayley:2", "--g", "abAB")
    assert code == EXIT_OK
    report = json.loads(out)
    assert report["subcommand"] == "action pipeline"
    assert Fraction(report["results"]["lower_bound"]) >= Fraction(1, 48)
    assert report["verdicts"]["pipeline"] == "bounded"
    assert report["constants"]["N"] == 1


def test_action_on_explicit_backend(capsys, info_dir):
    code, out, _ = _run(capsys, "action", "classify", "--backend", f"{info_dir}/hexagon.graph", "--g", "a")
    assert code == EXIT_OK
    assert 'type: "elliptic"' in out
    assert "orbit_diameter: 3" in out


def test_qm_eval(capsys):
    code, out, _ = _run(capsys, "--json", "qm-eval", "--w", "aa", "--g", "a", "--n-max", "100")
    assert code == EXIT_OK
    results = json.loads(out)["results"]
    assert results["value"] == 0
    assert results["homogenized"] == ["19/50", "31/50"]
    assert results["bavard_lower_bound"] == "19/1200"


@pytest.mark.parametrize("argv", [
    ["action", "axis", "--backend", "cayley:2", "--g", "ab1"],
    ["action", "axis", "--backend", "cayley:2", "--g", "abc"],
    ["action", "axis", "--backend", "cayley:x", "--g", "ab"],
    ["classify", "--in", "/nonexistent/file.nt"],
])
def test_bad_arguments_exit_malformed(capsys, argv):
    code, _, err = _run(capsys, *argv)
    assert code == EXIT_MALFORMED
    assert "error:" in err


def test_malformed_file_reports_position(capsys, tmp_path):
    path = tmp_path / "bad.graph"
    path.write_text("v 3\ne 0 5\n")
    code, _, err = _run(capsys, "graph", "delta", "--in", str(path))
    assert code == EXIT_MALFORMED
    assert f"{path}:2:5:" in err


def test_axis_of_elliptic_element_is_an_error(capsys):
    code, _, err = _run(capsys, "action", "axis", "--backend", "cayley:2", "--g", "1")
    assert code == 1
    assert "EllipticElementError" in err


def test_json_output_is_deterministic(capsys, info_dir):
    argv = ["--json", "classify", "--witness", "--in", f"{info_dir}/enko.nt"]
    _, first, _ = _run(capsys, *argv)
    _, second, _ = _run(capsys, *argv)
    assert first == second


def test_digest_tracks_file_contents(capsys, tmp_path):
    path = tmp_path / "x.nt"
    path.write_text("comp g pa complexity 1 chiral\n")
    _, out1, _ = _run(capsys, "--json", "classify", "--in", str(path))
    path.write_text("comp g pa complexity 2 chiral\n")
    _, out2, _ = _run(capsys, "--json", "classify", "--in", str(path))
    assert json.loads(out1)["inputs_digest"] != json.loads(out2)["inputs_digest"]


@pytest.mark.slow
def test_selftest_quick(capsys):
    code, out, _ = _run(capsys, "--json", "selftest", "--quick")
    assert code == EXIT_OK
    assert json.loads(out)["verdicts"]["selftest"] == "pass"


def test_inconsistent_classes_exit_malformed(capsys, tmp_path):
    path = tmp_path / "mixed.nt"
    path.write_text("comp g1 pa complexity 1 chiral\ncomp g2 pa complexity 1 chiral rep g3 m 1 r 1\n"
                    "comp g3 pa complexity 1 achiral\n")
    code, _, err = _run(capsys, "classify", "--in", str(path))
    assert code == EXIT_MALFORMED
    assert f"{path}:2:36:" in err
    assert "achiral" in err


def test_promote_reports_transfer_of_generator(capsys):
    code, out, _ = _run(capsys, "--json", "action", "promote", "--backend", "cayley:2", "--g", "abAB",
                        "--radius", "1", "--h", "a")
    assert code == EXIT_OK
    report = json.loads(out)
    assert report["results"]["transfer"]["conjugate_projection"] == 1
    assert report["results"]["transfer"]["member_displacement"] == 1
    assert report["verdicts"]["transfer"] is True
