"""End-to-end command-line tests, run in-process through main()."""

import json

import numpy as np
import pytest

from lfcoal.cli import main
from lfcoal.fileio import read_depths_jsonl
from lfcoal.model import LFParams, coalescent_pmf, coalescent_tail, thinned_tail
from lfcoal.trees import DepthSeq


def run(argv):
    return main(argv)


@pytest.fixture
def tree_file(tmp_path):
    path = tmp_path / "trees.jsonl"
    assert run([
        "simulate", "--p", "0.5", "--r", "0.8", "--T", "6",
        "--reps", "5", "--seed", "7", "--out", str(path),
    ]) == 0
    return path


class TestSimulate:
    def test_writes_header_and_records(self, tree_file):
        lines = tree_file.read_text().splitlines()
        header = json.loads(lines[0])
        assert header == {"format": "lfcoal.trees", "version": 1}
        assert len(lines) == 6
        for line in lines[1:]:
            record = json.loads(line)
            assert record["T"] == 6
            assert all(1 <= d <= 6 for d in record["depths"])

    def test_byte_identical_reruns(self, tmp_path):
        a = tmp_path / "a.jsonl"
        b = tmp_path / "b.jsonl"
        argv = ["simulate", "--p", "0.5", "--r", "0.8", "--T", "5",
                "--reps", "4", "--seed", "123"]
        assert run(argv + ["--out", str(a)]) == 0
        assert run(argv + ["--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_thread_count_does_not_change_output(self, tmp_path):
        a = tmp_path / "a.jsonl"
        b = tmp_path / "b.jsonl"
        base = ["simulate", "--p", "0.5", "--r", "0.8", "--T", "4",
                "--reps", "6", "--seed", "99"]
        assert run(base + ["--out", str(a)]) == 0
        assert run(base + ["--threads", "2", "--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_missing_seed_generates_and_prints_one(self, tmp_path, capsys):
        out = tmp_path / "x.jsonl"
        assert run(["simulate", "--p", "0.5", "--r", "0.8", "--T", "3",
                    "--reps", "1", "--out", str(out)]) == 0
        printed = capsys.readouterr().out
        assert "seed:" in printed

    def test_subcritical_is_a_computational_error(self, tmp_path, capsys):
        code = run(["simulate", "--p", "0.8", "--r", "0.5", "--T", "3",
                    "--reps", "1", "--seed", "1", "--out", str(tmp_path / "x")])
        assert code == 2
        assert "error:" in capsys.readouterr().err

    def test_bad_probability_is_a_usage_error(self, tmp_path, capsys):
        code = run(["simulate", "--p", "1.2", "--r", "0.8", "--T", "3",
                    "--reps", "1", "--seed", "1", "--out", str(tmp_path / "x")])
        assert code == 1
        err = capsys.readouterr().err
        assert "error:" in err and "remedy:" in err


class TestSample:
    def test_bernoulli_sampling(self, tree_file, tmp_path):
        out = tmp_path / "sampled.jsonl"
        assert run(["sample", "--scheme", "bernoulli:0.4", "--in", str(tree_file),
                    "--seed", "9", "--out", str(out)]) == 0
        originals = read_depths_jsonl(tree_file)
        sampled = read_depths_jsonl(out)
        assert 0 < len(sampled) <= len(originals)
        for seq in sampled:
            assert seq.T == 6

    def test_uniform_sampling(self, tree_file, tmp_path):
        # the fixture contains a single-tip tree, so k=1 is the largest
        # subsample size every tree supports
        out = tmp_path / "sampled.jsonl"
        assert run(["sample", "--scheme", "uniform:1", "--in", str(tree_file),
                    "--seed", "9", "--out", str(out)]) == 0
        sampled = read_depths_jsonl(out)
        assert len(sampled) == 5
        for seq in sampled:
            assert seq.n == 1 and seq.T == 6

    def test_uniform_sampling_multi_tip(self, tmp_path):
        from lfcoal.fileio import write_depths_jsonl

        path = tmp_path / "big.jsonl"
        write_depths_jsonl(
            path,
            [DepthSeq(T=4, depths=(1, 3, 2)), DepthSeq(T=4, depths=(4, 1))],
        )
        out = tmp_path / "sampled.jsonl"
        assert run(["sample", "--scheme", "uniform:2", "--in", str(path),
                    "--seed", "9", "--out", str(out)]) == 0
        for seq in read_depths_jsonl(out):
            assert seq.n == 2

    def test_uniform_k_too_large_fails_cleanly(self, tmp_path, capsys):
        path = tmp_path / "small.jsonl"
        from lfcoal.fileio import write_depths_jsonl

        write_depths_jsonl(path, [DepthSeq(T=2, depths=(1,))])
        code = run(["sample", "--scheme", "uniform:5", "--in", str(path),
                    "--seed", "3", "--out", str(tmp_path / "x.jsonl")])
        assert code == 2
        assert "fewer than k" in capsys.readouterr().err

    def test_full_scheme_rejected(self, tree_file, tmp_path):
        code = run(["sample", "--scheme", "full", "--in", str(tree_file),
                    "--seed", "3", "--out", str(tmp_path / "x.jsonl")])
        assert code == 1

    def test_determinism(self, tree_file, tmp_path):
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        argv = ["sample", "--scheme", "bernoulli:0.5", "--in", str(tree_file),
                "--seed", "11"]
        assert run(argv + ["--out", str(a)]) == 0
        assert run(argv + ["--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()


class TestLikelihoodAndFit:
    def test_likelihood_rows(self, tree_file, tmp_path, capsys):
        out = tmp_path / "lik.jsonl"
        assert run(["likelihood", "--p", "0.5", "--r", "0.8",
                    "--in", str(tree_file), "--out", str(out)]) == 0
        assert "total loglik" in capsys.readouterr().out
        lines = out.read_text().splitlines()
        header = json.loads(lines[0])
        assert header["format"] == "lfcoal.likelihood"
        rows = [json.loads(line) for line in lines[1:]]
        assert len(rows) == 5
        # a single-tip tree has an empty conditioned product: exactly zero
        assert all(row["loglik"] <= 0 for row in rows)

    def test_fit_output(self, tmp_path, capsys):
        trees = tmp_path / "many.jsonl"
        assert run(["simulate", "--p", "0.5", "--r", "0.8", "--T", "8",
                    "--reps", "150", "--seed", "5", "--out", str(trees)]) == 0
        out = tmp_path / "fit.json"
        assert run(["fit", "--in", str(trees), "--grid", "25",
                    "--out", str(out)]) == 0
        body = json.loads(out.read_text())
        assert body["format"] == "lfcoal.fit"
        assert abs(body["p_hat"] - 0.5) < 0.1
        assert abs(body["r_hat"] - 0.8) < 0.1
        assert body["converged"] is True

    def test_surface_csv(self, tree_file, tmp_path):
        out = tmp_path / "surface.csv"
        assert run(["surface", "--in", str(tree_file), "--p-min", "0.4",
                    "--p-max", "0.6", "--r-min", "0.5", "--r-max", "0.9",
                    "--steps", "3", "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "p,r,loglik"
        assert len(lines) == 10
        assert any(line.endswith(",nan") for line in lines[1:])
        first = lines[1].split(",")
        assert len(first[0]) >= 17  # 17 significant digits

    def test_surface_threads_match(self, tree_file, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        base = ["surface", "--in", str(tree_file), "--p-min", "0.4",
                "--p-max", "0.6", "--r-min", "0.5", "--r-max", "0.9",
                "--steps", "4"]
        assert run(base + ["--out", str(a)]) == 0
        assert run(base + ["--threads", "2", "--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()


class TestEmitDist:
    def test_plain_law(self, tmp_path):
        out = tmp_path / "dist.csv"
        assert run(["emit-dist", "--p", "0.5", "--r", "0.8", "--max-n", "4",
                    "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "n,pmf,tail"
        params = LFParams(0.5, 0.8)
        for line in lines[1:]:
            n, pmf, tail = line.split(",")
            assert float(pmf) == pytest.approx(coalescent_pmf(params, int(n)), rel=1e-15)
            assert float(tail) == pytest.approx(coalescent_tail(params, int(n)), rel=1e-15)

    def test_thinned_law(self, tmp_path):
        out = tmp_path / "dist.csv"
        assert run(["emit-dist", "--p", "0.5", "--r", "0.8", "--y", "0.5",
                    "--max-n", "3", "--out", str(out)]) == 0
        params = LFParams(0.5, 0.8)
        line1 = out.read_text().splitlines()[1].split(",")
        assert float(line1[2]) == pytest.approx(thinned_tail(params, 0.5, 1), rel=1e-15)


class TestConvert:
    def test_round_trip(self, tree_file, tmp_path):
        nwk = tmp_path / "trees.nwk"
        back = tmp_path / "back.jsonl"
        assert run(["convert", "--to", "newick", "--in", str(tree_file),
                    "--out", str(nwk)]) == 0
        assert run(["convert", "--to", "jsonl", "--in", str(nwk),
                    "--out", str(back)]) == 0
        assert read_depths_jsonl(tree_file) == read_depths_jsonl(back)


class TestValidate:
    def test_muk_suite_passes(self, tmp_path, capsys):
        out = tmp_path / "report.json"
        code = run(["validate", "--suite", "muk", "--out", str(out)])
        assert code == 0
        assert "PASS" in capsys.readouterr().out
        body = json.loads(out.read_text())
        assert body["format"] == "lfcoal.validate"
        assert body["reports"][0]["passed"] is True

    def test_density_suite_names_the_variant(self, capsys):
        assert run(["validate", "--suite", "density"]) == 0
        out = capsys.readouterr().out
        assert "derivation-corrected" in out

    def test_cdf_suite(self, capsys):
        assert run(["validate", "--suite", "cdf"]) == 0
        assert "hand case" in capsys.readouterr().out

    def test_unknown_suite_is_usage_error(self, capsys):
        assert run(["validate", "--suite", "everything"]) == 1
        assert "remedy" in capsys.readouterr().err
