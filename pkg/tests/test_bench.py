import logging

import numpy as np
import pytest

from gcsanneal import bench
from gcsanneal.bench import (
    BatchSummary,
    BenchRecord,
    ExperimentSpec,
    emit_report,
    fit_scaling,
    parse_spec,
    read_records,
    read_summary,
    run_batch,
    solve,
    summarize,
)
from gcsanneal.qubo import QuboInstance
from gcsanneal.statevector import brute_force_min


def record(eps, method="gcs", n=8, iterations=100, iid="a"):
    return BenchRecord(iid, n, method, iterations, 0, "d", -1.0, -1.0, eps)


class TestSpec:
    def test_parse(self, tmp_path):
        p = tmp_path / "exp.spec"
        p.write_text(
            "# comment\nshapes = 2, 2x3x4\nmethods = gcs, sa\ninstances = 4\nseed = 9\n"
            "iterations = 10, 20\nlearning_rate = 0.05\nsparse_m = yes\noutput = out\n"
        )
        spec = parse_spec(p)
        assert spec.shapes == [(2, 2, 2), (2, 3, 4)]
        assert spec.methods == ["gcs", "sa"]
        assert spec.iterations == [10, 20]
        assert spec.overrides == {"learning_rate": 0.05, "sparse_m": True}
        assert spec.output == str(tmp_path / "out")

    @pytest.mark.parametrize("line", ["colour = red", "shapes = 2x3", "methods = qaoa", "just words"])
    def test_rejects(self, tmp_path, line):
        p = tmp_path / "bad.spec"
        p.write_text(line + "\n")
        with pytest.raises(ValueError):
            parse_spec(p)

    def test_digest_ignores_output(self):
        assert ExperimentSpec(output="a").digest == ExperimentSpec(output="b").digest
        assert ExperimentSpec(seed=1).digest != ExperimentSpec(seed=2).digest


class TestSolve:
    @pytest.mark.parametrize("method", ["gcs", "product", "sa"])
    def test_biased_instance(self, method):
        inst = QuboInstance(3, [0, 1], [1, 2], [0.5, -0.25], c=[1.0, -2.0, 0.3])
        cfg = bench.method_config(method, 200, 0)
        sol, timing = solve(inst, method, cfg)
        assert sol.s.shape == (3,)
        assert sol.energy >= brute_force_min(inst)[0] - 1e-12
        assert timing["per_iter_s"] > 0

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            bench.method_config("qaoa", 10, 0)


class TestRunBatch:
    def test_empty(self, tmp_path):
        assert run_batch(ExperimentSpec(instances=0, output=str(tmp_path))) == []

    def test_records_and_resume(self, tmp_path, monkeypatch):
        spec = ExperimentSpec(shapes=[(2, 2, 2)], instances=2, iterations=[50], output=str(tmp_path))
        recs = run_batch(spec)
        assert len(recs) == 6
        assert all(r.eps is not None and r.eps >= 0 for r in recs)
        for r in recs:
            assert r.eps == (r.energy - r.e0) / abs(r.e0)
        first = (tmp_path / "records.csv").read_bytes()

        def boom(*a, **k):
            raise AssertionError("resumed batch recomputed a record")

        monkeypatch.setattr(bench, "_solve_instance", boom)
        again = run_batch(spec)
        assert (tmp_path / "records.csv").read_bytes() == first
        assert [r.key for r in again] == [r.key for r in recs]

    def test_partial_resume(self, tmp_path):
        spec = ExperimentSpec(shapes=[(2, 2, 2)], methods=["sa"], instances=3, iterations=[20], output=str(tmp_path))
        full = (run_batch(spec), (tmp_path / "records.csv").read_bytes())
        lines = (tmp_path / "records.csv").read_text().splitlines(keepends=True)
        (tmp_path / "records.csv").write_text("".join(lines[:-1]))
        run_batch(spec)
        assert (tmp_path / "records.csv").read_bytes() == full[1]

    def test_large_instance_has_no_exact(self, tmp_path):
        spec = ExperimentSpec(shapes=[(3, 3, 3)], methods=["sa"], instances=1, iterations=[2], output=str(tmp_path))
        (r,) = run_batch(spec)
        assert r.e0 is None and r.eps is None
        assert read_records(tmp_path / "records.csv")[0].eps is None


class TestSummarize:
    def test_single(self):
        row = summarize([record(0.05)]).rows[0]
        assert row.median == row.q25 == row.q75 == 0.05

    def test_median(self):
        row = summarize([record(e) for e in (0.01, 0.02, 0.03)]).rows[0]
        assert row.median == pytest.approx(0.02)
        assert row.q25 == pytest.approx(0.015)
        assert row.q75 == pytest.approx(0.025)

    def test_order_invariant(self):
        rng = np.random.default_rng(0)
        recs = [record(float(e), method=m) for e in rng.random(20) for m in ("gcs", "sa")]
        a = summarize(recs)
        b = summarize([recs[i] for i in rng.permutation(len(recs))])
        assert a == b

    def test_empty_group_omitted(self, caplog):
        with caplog.at_level(logging.WARNING):
            s = summarize([record(None), record(0.1, method="sa")])
        assert [r.method for r in s.rows] == ["sa"]
        assert "omitted" in caplog.text


class TestFitScaling:
    def test_quadratic(self):
        n = np.array([125, 216, 343, 512])
        assert fit_scaling(n, n**2.0).exponent == pytest.approx(2.0, abs=1e-9)

    def test_prefactor(self):
        n = np.arange(100, 1100, 100)
        fit = fit_scaling(n, 3 * n**2.62)
        assert fit.exponent == pytest.approx(2.62, abs=1e-9)
        assert fit.intercept == pytest.approx(np.log(3), abs=1e-9)

    def test_bootstrap_error(self):
        rng = np.random.default_rng(1)
        n = np.arange(100, 1100, 100)
        fit = fit_scaling(n, n**2 * np.exp(rng.normal(0, 0.1, n.size)))
        assert fit.stderr > 0
        assert fit_scaling(n, n**2 * np.exp(rng.normal(0, 0.1, n.size)), seed=5).stderr > 0

    def test_seeded(self):
        n = np.arange(1, 8)
        t = n**1.5 * (1 + 0.1 * np.sin(n))
        assert fit_scaling(n, t, seed=2) == fit_scaling(n, t, seed=2)

    @pytest.mark.parametrize("ns, ts", [([5, 5, 5], [1, 2, 3]), ([1, 2], [1, 2]), ([1, 2, 3], [1, 0, 2])])
    def test_degenerate(self, ns, ts):
        with pytest.raises(ValueError):
            fit_scaling(ns, ts)


class TestReport:
    def test_empty_header_only(self, tmp_path):
        spath, lpath = emit_report(BatchSummary([], "abc"), tmp_path)
        lines = spath.read_text().splitlines()
        assert lines[0].startswith("#") and "abc" in lines[0]
        assert lines[1] == "method,n,iterations,count,median,q25,q75"
        assert len(lines) == 2

    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(2)
        recs = [record(float(e), method=m, n=n) for e in rng.random(7) for m in ("gcs", "sa") for n in (8, 24)]
        s = summarize(recs, "xyz")
        spath, _ = emit_report(s, tmp_path)
        back = read_summary(spath)
        assert back.digest == "xyz"
        for a, b in zip(s.rows, back.rows):
            assert (a.method, a.n, a.iterations, a.count) == (b.method, b.n, b.iterations, b.count)
            for k in ("median", "q25", "q75"):
                assert abs(getattr(a, k) - getattr(b, k)) <= 1e-12

    def test_byte_stable(self, tmp_path):
        s = summarize([record(0.1 * k, method=m) for k in range(5) for m in ("gcs", "product")])
        a = [p.read_bytes() for p in emit_report(s, tmp_path / "a")]
        b = [p.read_bytes() for p in emit_report(s, tmp_path / "b")]
        assert a == b

    def test_long_format_axes(self, tmp_path):
        s = summarize([record(0.1), record(0.2, iterations=200)])
        _, lpath, tpath = emit_report(s, tmp_path, timing=[("gcs", 8, 100, 0.001)])
        text = lpath.read_text()
        assert "eps_vs_n" in text and "eps_vs_iterations" in text
        assert "time_vs_n" in tpath.read_text()

    def test_unwritable(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("")
        with pytest.raises(OSError):
            emit_report(BatchSummary(), blocker / "sub")
