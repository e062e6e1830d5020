import json

import numpy as np
import pytest

from stabex import io
from stabex.cli import generate, main

T_FID = np.cos(np.pi / 8) ** 2


@pytest.fixture
def run(capsys):
    def _run(*argv):
        code = main([str(a) for a in argv])
        return code, capsys.readouterr().out
    return _run


def write(tmp_path, kind, n, seed=0, name=None):
    path = tmp_path / (name or f"{kind}{n}.txt")
    io.write_state(path, generate(kind, n, seed))
    return path


def test_count(run):
    code, out = run("count", 5)
    assert code == 0 and "total=2423520" in out
    code, out = run("count", 1)
    assert "total=6" in out
    code, out = run("count", 2)
    assert out.split() == ["n=2", "total=60", "k=0", "4", "k=1", "24", "k=2", "32"]
    assert run("count", 0)[0] == 3


def test_gen_examples():
    ghz = generate("ghz", 3)
    expected = np.zeros(8)
    expected[[0, 7]] = 1 / np.sqrt(2)
    np.testing.assert_allclose(ghz, expected, atol=1e-15)
    w = generate("w", 2)
    np.testing.assert_allclose(w, [0, 1 / np.sqrt(2), 1 / np.sqrt(2), 0], atol=1e-15)
    assert np.all(generate("real", 4, 3).imag == 0)
    t2 = generate("t-tensor", 2)
    t = np.array([1, np.exp(1j * np.pi / 4)]) / np.sqrt(2)
    np.testing.assert_allclose(t2, np.kron(t, t), atol=1e-15)
    np.testing.assert_array_equal(generate("haar", 3, 5), generate("haar", 3, 5))
    assert not np.array_equal(generate("haar", 3, 5), generate("haar", 3, 6))


def test_gen_round_trip_is_bit_exact(run, tmp_path):
    for kind in ("haar", "real", "t-tensor", "stab"):
        out = tmp_path / f"{kind}.txt"
        assert run("gen", kind, 4, "--seed", 11, "-o", out)[0] == 0
        np.testing.assert_array_equal(io.read_state(out), generate(kind, 4, 11))
    assert (tmp_path / "haar.txt").read_text().splitlines()[0] == "n=4 format=relist"


def test_state_file_errors(run, tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("n=1 format=relist\n1 0\n")
    assert run("fidelity", bad)[0] == 3
    bad.write_text("n=1 format=relist\n1 0\n1 0\n")
    assert run("fidelity", bad)[0] == 3
    assert run("fidelity", bad, "--allow-unnormalized")[0] == 0
    bad.write_text("n=1 format=binary\n1 0\n0 0\n")
    assert run("fidelity", bad)[0] == 3
    assert run("fidelity", tmp_path / "missing.txt")[0] == 3


def test_fidelity_examples(run, tmp_path):
    for kind, n, expected in (("stab", 3, 1.0), ("t-tensor", 1, T_FID), ("ghz", 2, 1.0)):
        out = tmp_path / f"{kind}.json"
        assert run("fidelity", write(tmp_path, kind, n), "-o", out)[0] == 0
        doc = json.loads(out.read_text())
        assert doc["command"] == "fidelity"
        assert doc["value"] == pytest.approx(expected, abs=1e-10)


def test_fidelity_real_on_with_complex_input(run, tmp_path):
    assert run("fidelity", write(tmp_path, "haar", 2), "--real", "on")[0] == 3


def test_extent_stabilizer(run, tmp_path):
    out = tmp_path / "r.json"
    assert run("extent", write(tmp_path, "stab", 3), "-o", out)[0] == 0
    doc = json.loads(out.read_text())
    assert doc["value"] == pytest.approx(1.0, abs=1e-9)
    assert doc["certified"] and len(doc["trace"]) == 1 and doc["trace"][0]["violations"] == 0


def test_extent_t_tensor(run, tmp_path):
    o1, o2 = tmp_path / "t1.json", tmp_path / "t2.json"
    assert run("extent", write(tmp_path, "t-tensor", 1), "-o", o1)[0] == 0
    assert run("extent", write(tmp_path, "t-tensor", 2), "-o", o2)[0] == 0
    x1 = json.loads(o1.read_text())["value"]
    assert json.loads(o2.read_text())["value"] == pytest.approx(x1 ** 2, abs=1e-6)
    # same result through the warm start path
    o3 = tmp_path / "t2w.json"
    assert run("extent", tmp_path / "t-tensor2.txt", "--warm-start", o1, o1, "-o", o3)[0] == 0
    assert json.loads(o3.read_text())["value"] == pytest.approx(x1 ** 2, abs=1e-6)
    assert run("extent", tmp_path / "t-tensor2.txt", "--warm-start", o1, "-o", o3)[0] == 3


def test_extent_uncertified_exit_code(run, tmp_path):
    out = tmp_path / "r.json"
    code, _ = run("extent", write(tmp_path, "haar", 4, 2), "--init-size", 20, "--max-iters", 1, "-o", out)
    assert code == 2
    assert json.loads(out.read_text())["certified"] is False


def test_verify_pass_and_failures(run, tmp_path):
    state = write(tmp_path, "haar", 3, 4)
    out = tmp_path / "r.json"
    assert run("extent", state, "-o", out)[0] == 0
    code, report = run("verify", out, state)
    assert code == 0 and report.strip().endswith("verify: pass")
    assert report.count("PASS") == 4

    doc = json.loads(out.read_text())
    doc["decomposition"][0]["re"] += 1e-3
    bad = tmp_path / "bad_x.json"
    bad.write_text(json.dumps(doc))
    code, report = run("verify", bad, state)
    assert code == 2 and "FAIL  feasibility" in report

    doc = json.loads(out.read_text())
    doc["certificate"]["y"] = [[1.5 * re, 1.5 * im] for re, im in doc["certificate"]["y"]]
    bad = tmp_path / "bad_y.json"
    bad.write_text(json.dumps(doc))
    code, report = run("verify", bad, state)
    assert code == 2 and "FAIL  dual excess" in report


def test_verify_mismatched_n(run, tmp_path):
    out = tmp_path / "r.json"
    assert run("extent", write(tmp_path, "stab", 2), "-o", out)[0] == 0
    assert run("verify", out, write(tmp_path, "stab", 3))[0] == 3


def test_documents_are_deterministic(run, tmp_path):
    state = write(tmp_path, "haar", 3, 9)
    docs = []
    for i in range(2):
        out = tmp_path / f"r{i}.json"
        assert run("extent", state, "--threads", 2, "-o", out)[0] == 0
        doc = json.loads(out.read_text())
        doc.pop("timings")
        docs.append(json.dumps(doc, sort_keys=True))
    assert docs[0] == docs[1]
