"""CLI: generation round-trips, solve/verify/bench flows, exit codes."""

import json

import pytest

from treecontract.cli import main
from treecontract.engine import ContractionLog
from treecontract.errors import SimFault
from treecontract.problems import REGISTRY
from treecontract.trees import parse_tree


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


class TestGen:
    def test_path_roundtrip(self, tmp_path, capsys):
        dest = tmp_path / "p5.tree"
        code, _, _ = run(capsys, "gen", "--family", "path", "--n", "5",
                         "--out", str(dest))
        assert code == 0
        tree = parse_tree(dest.read_text())
        assert tree.n == 5 and tree.root == 1
        assert sum(1 for v in tree.vertices() if tree.parent[v]) == 4

    def test_deterministic_bytes(self, tmp_path, capsys):
        a, b = tmp_path / "a.tree", tmp_path / "b.tree"
        run(capsys, "gen", "--family", "random", "--n", "100", "--seed", "7",
            "--out", str(a))
        run(capsys, "gen", "--family", "random", "--n", "100", "--seed", "7",
            "--out", str(b))
        assert a.read_bytes() == b.read_bytes()

    def test_all_families_reparse(self, tmp_path, capsys):
        for fam in ["path", "star", "broom", "caterpillar", "random",
                    "complete-kary"]:
            dest = tmp_path / (fam + ".tree")
            code, _, _ = run(capsys, "gen", "--family", fam, "--n", "17",
                             "--seed", "3", "--out", str(dest),
                             "--edge-weights", "--vertex-weights")
            assert code == 0
            assert parse_tree(dest.read_text()).n == 17

    def test_all_shapes_count(self, tmp_path, capsys):
        out = tmp_path / "shapes"
        code, text, _ = run(capsys, "gen", "--family", "all-shapes", "--n", "5",
                            "--out", str(out))
        assert code == 0 and "9 files" in text
        assert len(list(out.glob("*.tree"))) == 9


class TestSolve:
    def _write(self, tmp_path, text, name="t.tree"):
        p = tmp_path / name
        p.write_text(text)
        return str(p)

    def test_mwm_two_path(self, tmp_path, capsys):
        src = self._write(tmp_path, "2 1\n1 -\n2 1 ew=5\n")
        code, out, _ = run(capsys, "solve", "--problem", "mwm", "--input", src)
        lines = out.strip().splitlines()
        assert code == 0
        assert lines[0] == "2 1 5"
        report = json.loads(lines[-1])
        assert report["value"] == 5
        assert report["metrics"]["rounds"] >= 1

    def test_eval_literal(self, capsys):
        code, out, _ = run(capsys, "solve", "--problem", "eval",
                           "--input", "7")
        assert code == 0 and out.splitlines()[0] == "7"

    def test_eval_file(self, tmp_path, capsys):
        src = self._write(tmp_path, "2+5-(3+2*6)-9\n", "e.txt")
        code, out, _ = run(capsys, "solve", "--problem", "eval",
                           "--input", src)
        assert code == 0 and out.splitlines()[0] == "-17"

    def test_mis_star(self, tmp_path, capsys):
        lines = ["10 1", "1 -"] + ["%d 1" % v for v in range(2, 11)]
        src = self._write(tmp_path, "\n".join(lines) + "\n")
        code, out, _ = run(capsys, "solve", "--problem", "mis",
                           "--input", src)
        assert code == 0
        assert out.splitlines()[0] == " ".join(map(str, range(2, 11)))

    def test_report_and_log_sidecar(self, tmp_path, capsys):
        src = self._write(tmp_path, "3 1\n1 -\n2 1\n3 2\n")
        rep = tmp_path / "rep.jsonl"
        logp = tmp_path / "run.log"
        code, out, _ = run(capsys, "solve", "--problem", "height",
                           "--input", src, "--report", str(rep),
                           "--log", str(logp))
        assert code == 0
        assert out.strip() == "2"
        report = json.loads(rep.read_text())
        assert report["value"] == 2 and not report["metrics"]["violations"]
        log = ContractionLog.load(str(logp))
        assert log.root == 1 and set(log.vertices) == {1, 2, 3}

    def test_iso_verdict_codes(self, tmp_path, capsys):
        p = self._write(tmp_path, "3 1\n1 -\n2 1\n3 2\n", "p.tree")
        s = self._write(tmp_path, "3 1\n1 -\n2 1\n3 1\n", "s.tree")
        code, out, _ = run(capsys, "solve", "--problem", "iso",
                           "--input", p, "--input", s)
        assert code == 1 and out.splitlines()[0] == "not-isomorphic"
        code, out, _ = run(capsys, "solve", "--problem", "iso",
                           "--input", p, "--input", p)
        assert code == 0 and out.splitlines()[0] == "isomorphic"


class TestVerify:
    def test_agreement_across_problems(self, tmp_path, capsys):
        tree = tmp_path / "t.tree"
        run(capsys, "gen", "--family", "random", "--n", "40", "--seed", "11",
            "--out", str(tree), "--edge-weights", "--vertex-weights")
        for problem in ["mwm", "mis", "matching", "mwis", "height", "sum"]:
            code, out, _ = run(capsys, "verify", "--problem", problem,
                               "--input", str(tree))
            line = json.loads(out.strip().splitlines()[-1])
            assert code == 0 and line["equal"], problem

    def test_multiple_inputs_one_line_each(self, tmp_path, capsys):
        files = []
        for i in range(3):
            dest = tmp_path / ("t%d.tree" % i)
            run(capsys, "gen", "--family", "random", "--n", str(20 + i),
                "--seed", str(i), "--out", str(dest))
            files.append(str(dest))
        argv = ["verify", "--problem", "mis"]
        for f in files:
            argv += ["--input", f]
        code, out, _ = run(capsys, *argv)
        lines = [json.loads(l) for l in out.strip().splitlines()]
        assert code == 0 and len(lines) == 3
        assert len({l["digest"] for l in lines}) == 3

    def test_eval_verify(self, capsys):
        code, out, _ = run(capsys, "verify", "--problem", "eval",
                           "--input", "2+5-(3+2*6)-9")
        line = json.loads(out.strip())
        assert code == 0 and line["equal"] and line["engine"] == "-17"

    def test_mismatch_exits_one(self, tmp_path, capsys, monkeypatch):
        src = tmp_path / "t.tree"
        run(capsys, "gen", "--family", "path", "--n", "4", "--out", str(src))
        monkeypatch.setitem(REGISTRY["sum"], "check",
                            lambda trees, text, result: (0, result["value"], False))
        code, out, _ = run(capsys, "verify", "--problem", "sum",
                           "--input", str(src))
        assert code == 1
        assert json.loads(out.strip().splitlines()[-1])["equal"] is False


class TestBench:
    def test_csv_shape(self, tmp_path, capsys):
        out = tmp_path / "sweep.csv"
        code, _, _ = run(capsys, "bench", "--problem", "height",
                         "--family", "path", "--family", "star",
                         "--n", "64", "--n", "128",
                         "--epsilon", "0.5", "--epsilon", "0.25",
                         "--out", str(out))
        assert code == 0
        rows = out.read_text().strip().splitlines()
        assert rows[0] == "family,n,epsilon,rounds,peak_words"
        assert len(rows) == 1 + 2 * 2 * 2
        for row in rows[1:]:
            fam, n, eps, rounds, peak = row.split(",")
            assert fam in ("path", "star")
            assert int(rounds) >= 1 and int(peak) >= 1

    def test_pair_problem_rejected(self, capsys):
        code, _, err = run(capsys, "bench", "--problem", "iso",
                           "--family", "path", "--n", "8")
        assert code == 3 and "single-tree" in err


class TestExitCodes:
    def test_bad_epsilon(self, tmp_path, capsys):
        src = tmp_path / "t.tree"
        run(capsys, "gen", "--family", "path", "--n", "3", "--out", str(src))
        code, _, err = run(capsys, "solve", "--problem", "mwm",
                           "--input", str(src), "--epsilon", "2")
        assert code == 3 and "epsilon" in err

    def test_missing_file(self, capsys):
        code, _, _ = run(capsys, "solve", "--problem", "mwm",
                         "--input", "no-such-file.tree")
        assert code == 3

    def test_malformed_expression(self, capsys):
        code, _, err = run(capsys, "solve", "--problem", "eval",
                           "--input", "1+")
        assert code == 3

    def test_division_by_zero(self, capsys):
        code, _, err = run(capsys, "solve", "--problem", "eval",
                           "--input", "1/0")
        assert code == 3 and "division by zero" in err

    def test_sim_fault_maps_to_two(self, tmp_path, capsys, monkeypatch):
        src = tmp_path / "t.tree"
        run(capsys, "gen", "--family", "path", "--n", "3", "--out", str(src))

        def boom(trees, text, cfg, seed):
            raise SimFault("forced")

        monkeypatch.setitem(REGISTRY["sum"], "solve", boom)
        code, _, err = run(capsys, "solve", "--problem", "sum",
                           "--input", str(src))
        assert code == 2 and "forced" in err

    def test_tc_threads_validation(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("TC_THREADS", "banana")
        code, _, err = run(capsys, "solve", "--problem", "eval", "--input", "1")
        assert code == 3 and "TC_THREADS" in err

    def test_tc_threads_pool_runs(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("TC_THREADS", "4")
        src = tmp_path / "t.tree"
        run(capsys, "gen", "--family", "random", "--n", "60", "--seed", "2",
            "--out", str(src))
        code, out, _ = run(capsys, "verify", "--problem", "height",
                           "--input", str(src))
        assert code == 0 and json.loads(out.strip())["equal"]
