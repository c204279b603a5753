import json
import math
import subprocess
import sys

import numpy as np
import pytest

from opamp import cli
from opamp._errors import CertificationError
from opamp.fileio import format_swide_spec, read_generators, read_graph, write_generators, write_graph
from opamp.graphs import cycle_graph, lambda_of
from opamp.groups import GeneratorMultiset, XorBits, bias_exact, cayley_graph

from oracles import character_bias_bruteforce, character_bias_weighted


def run(argv, capsys):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def report_dict(text):
    rows = {}
    for line in text.splitlines():
        body = line.split(" # ", 1)[0]
        key, _, value = body.partition(" = ")
        rows[key] = value
    return rows


def doubled_z2(m, size, seed):
    rng = np.random.default_rng(seed)
    el = rng.integers(0, 1 << m, size=size)
    return GeneratorMultiset(XorBits(m), np.concatenate([el, el]))


@pytest.fixture
def c5_file(tmp_path):
    path = tmp_path / "c5.txt"
    write_graph(path, cycle_graph(5))
    return path


def test_verify_c5(c5_file, capsys):
    code, out, _ = run(["verify", "--graph", c5_file], capsys)
    rows = report_dict(out)
    assert code == 0
    assert float(rows["graph.lambda"]) == pytest.approx(math.cos(math.pi / 5), abs=1e-9)
    assert rows["graph.mode"] == "eigenvalue" and rows["status"] == "ok"


def test_verify_directed_generators(tmp_path, capsys):
    path = tmp_path / "dir.txt"
    path.write_text("group symmetric 3\n2 3 1\n2 1 3\n")
    code, out, _ = run(["verify", "--gens", path], capsys)
    assert code == 0
    assert report_dict(out)["gens.mode"] == "singular-value"


def test_verify_json_mirrors_text_keys(c5_file, capsys):
    _, text, _ = run(["verify", "--graph", c5_file], capsys)
    _, js, _ = run(["verify", "--graph", c5_file, "--format", "json"], capsys)
    rows = json.loads(js)
    assert [r["key"] for r in rows] == list(report_dict(text))
    lam = next(r["value"] for r in rows if r["key"] == "graph.lambda")
    assert lam == pytest.approx(math.cos(math.pi / 5), abs=1e-9)


def test_parse_error_exit_2(tmp_path, capsys):
    path = tmp_path / "bad.txt"
    path.write_text("group xor-bits 2\n0101\n")
    code, out, err = run(["verify", "--gens", path], capsys)
    assert code == 2 and out == "" and "exit 2" in err


def test_lambda_out_of_range_exit_2(tmp_path, capsys):
    path = tmp_path / "g.txt"
    write_generators(path, doubled_z2(4, 6, 0))
    code, _, _ = run(["amplify", "--in", path, "--lambda", "1.5"], capsys)
    assert code == 2


def test_unknown_option_exit_2(capsys):
    assert run(["verify", "--bogus"], capsys)[0] == 2


def test_irregular_transform_exit_3(tmp_path, capsys):
    path = tmp_path / "irr.txt"
    path.write_text("edgelist 3 2\n0 1\n0 2\n")
    assert run(["transform", "--in", path, "--lambda", "0.25"], capsys)[0] == 3


def test_non_expanding_amplify_exit_3(tmp_path, capsys):
    path = tmp_path / "g.txt"
    write_generators(path, GeneratorMultiset(XorBits(3), [1, 2, 4]))
    assert run(["amplify", "--in", path, "--lambda", "0.1"], capsys)[0] == 3


def test_capacity_exit_4(capsys):
    code, _, err = run(["zoo", "aghp", "--m", "62", "--k", "31"], capsys)
    assert code == 4 and "CapacityError" in err


def test_certification_miss_exit_5(c5_file, capsys, monkeypatch):
    import opamp.permutations as perm

    def refuse(*args, **kwargs):
        raise CertificationError("refused")

    monkeypatch.setattr(perm, "transform_graph", refuse)
    assert run(["transform", "--in", c5_file, "--lambda", "0.1"], capsys)[0] == 5


def test_plan_regime_s1024(capsys):
    code, out, _ = run(["plan", "--s", "1024", "--regime"], capsys)
    rows = report_dict(out)
    assert code == 0
    assert rows["claim_i"] == rows["claim_ii"] == rows["all_checks"] == "True"
    assert rows["chain_second_literal"] == "False"
    assert int(rows["t"]) - 1 >= 2 * 1024**2


def test_plan_mode_must_be_chosen(capsys):
    assert run(["plan", "--lambda", "0.01"], capsys)[0] == 2
    assert run(["plan", "--lambda", "1e-300", "--beta", "0.03", "--regime"], capsys)[0] == 3


def test_amplify_walks_z2_8(tmp_path, capsys):
    src, dst = tmp_path / "in.txt", tmp_path / "out.txt"
    write_generators(src, doubled_z2(8, 24, 1))
    code, out, _ = run(["amplify", "--in", src, "--lambda", "0.1", "--method", "walks", "--out", dst], capsys)
    rows = report_dict(out)
    assert code == 0 and rows["target.holds"] == "True"
    S = read_generators(dst)
    assert S.size == int(rows["size_out"])
    bias = bias_exact(S)
    assert bias <= 0.1
    assert bias == pytest.approx(float(rows["bias_out"]), abs=1e-9)
    assert bias == pytest.approx(character_bias_weighted(S.distribution(), 8), abs=1e-12)


def test_amplify_swide_small_s8_z2_6(tmp_path, capsys):
    src = tmp_path / "in.txt"
    write_generators(src, doubled_z2(6, 20, 2))
    code, out, _ = run(["amplify", "--in", src, "--lambda", "0.1", "--method", "swide", "--small-s", "8"], capsys)
    rows = report_dict(out)
    assert code == 0 and float(rows["bias_out"]) <= 0.1
    assert "swide.bound_margin" in rows and float(rows["swide.bound_margin"]) >= 0


def test_transform_keeps_input_when_target_is_weak(c5_file, tmp_path, capsys):
    dst = tmp_path / "out.txt"
    code, out, _ = run(["transform", "--in", c5_file, "--lambda", "0.95", "--out", dst], capsys)
    assert code == 0
    assert np.array_equal(read_graph(dst).adjacency_counts(), cycle_graph(5).adjacency_counts())


def test_transform_cayley_expander(tmp_path, capsys):
    src, dst = tmp_path / "g.txt", tmp_path / "out.txt"
    write_graph(src, cayley_graph(GeneratorMultiset(XorBits(6), [1, 2, 4, 8, 16, 32, 63, 21])))
    code, out, _ = run(["transform", "--in", src, "--lambda", "0.25", "--out", dst], capsys)
    rows = report_dict(out)
    assert code == 0 and int(rows["locality.walk_length"]) >= 1
    assert lambda_of(read_graph(dst)).value <= 0.25 + 1e-9


def test_swide_run_margin_line(tmp_path, capsys):
    s, t = 7, 27
    write_graph(tmp_path / "x.txt", cayley_graph(GeneratorMultiset(XorBits(1), [0, 1])))
    rng = np.random.default_rng(0)
    write_generators(tmp_path / "y.txt", GeneratorMultiset(XorBits(s), rng.integers(0, 1 << s, size=101)))
    write_generators(tmp_path / "s.txt", GeneratorMultiset(XorBits(1), [1, 0]))
    (tmp_path / "spec.txt").write_text(format_swide_spec("x.txt", "y.txt", s, t))
    code, out, _ = run(["swide", "run", "--spec", tmp_path / "spec.txt", "--in", tmp_path / "s.txt"], capsys)
    rows = report_dict(out)
    assert code == 0
    assert int(rows["walk_count"]) == 2 * 2**s * 101**t
    assert float(rows["precondition_margin"]) >= 0
    assert rows["swide.bound.holds"] == "True"


def test_zoo_aghp_files(tmp_path, capsys):
    gens, graph = tmp_path / "a.txt", tmp_path / "ag.txt"
    code, out, _ = run(["zoo", "aghp", "--m", "8", "--k", "4", "--out", gens, "--graph-out", graph], capsys)
    assert code == 0 and float(report_dict(out)["bias"]) == pytest.approx(0.4375)
    S = read_generators(gens)
    assert character_bias_bruteforce(S.elements, 8) == pytest.approx(0.4375)
    assert lambda_of(read_graph(graph)).value == pytest.approx(0.4375, abs=1e-9)


def test_report_file_matches_stdout(c5_file, tmp_path, capsys):
    rep = tmp_path / "r.txt"
    _, out, _ = run(["verify", "--graph", c5_file, "--report", rep], capsys)
    assert rep.read_text() == out


def test_module_entry_point(c5_file):
    proc = subprocess.run([sys.executable, "-m", "opamp", "verify", "--graph", str(c5_file), "--timing"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert "graph.lambda = 0.809016994375" in proc.stdout
    assert "wall_time" in proc.stderr and "wall_time" not in proc.stdout
