"""Acceptance gate: one test per criterion, each printing a single PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the lines are repeated in the
``acceptance criteria`` section of the terminal summary. Criteria 5, 6 and 9 share one
batch of 100 seeded 2x3x4 slabs and take roughly a quarter of an hour together.
"""

import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from gcsanneal import gcs
from gcsanneal.anneal import AnnealConfig, run
from gcsanneal.bench import ExperimentSpec, emit_report, fit_scaling, run_batch, summarize, time_per_iteration
from gcsanneal.gcs import GcsParams
from gcsanneal.qubo import QuboInstance, gen_ea3d, gen_ea_lattice
from gcsanneal.statevector import brute_force_min, build_state, expval, naive_min
from gcsanneal.verify import fd_gradient, random_instance

BATCH_FILES = ("records.csv", "summary.csv", "plot_long.csv")


def report(capsys, number, name, passed, detail):
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {name} ({detail})"
    ACCEPTANCE_LINES.append(line)
    with capsys.disabled():
        print("\n" + line)
    return passed


def random_params(n, rng):
    # log-uniform scale covers both the small-angle series branch and large rotations
    return GcsParams.random(n, rng, scale=float(10 ** rng.uniform(-2.5, 0.5)))


def test_oracle_equivalence(capsys):
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst = 0.0
    for n in range(2, 9):
        for _ in range(100):
            p = random_params(n, rng)
            st = build_state(p)
            for i in range(n):
                worst = max(worst, abs(gcs.expval_sx(p, i) - expval(st, [("X", i)])))
                for j in range(i + 1, n):
                    worst = max(worst, abs(gcs.expval_zz(p, i, j) - expval(st, [("Z", i), ("Z", j)])))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-10 and elapsed < 60
    assert report(capsys, 1, "oracle equivalence", ok, f"max |err| = {worst:.2e} <= 1e-10, {elapsed:.1f}s < 60s")


def test_gradient_correctness(capsys):
    rng = np.random.default_rng(202)
    t0 = time.perf_counter()
    worst = 0.0
    for k in range(50):
        n = 2 + k % 5
        inst = random_instance(n, rng)
        p = random_params(n, rng)
        s = float(rng.random())
        for a, b in zip(gcs.gradient(p, s, inst), fd_gradient(p, s, inst, h=1e-5)):
            worst = max(worst, float(np.max(np.abs(a - b) / (1e-9 + 1e-6 * np.abs(b)))))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1.0 and elapsed < 60
    detail = f"max |err| / (1e-9 + 1e-6 |fd|) = {worst:.3f} <= 1, {elapsed:.1f}s < 60s"
    assert report(capsys, 2, "gradient vs finite differences", ok, detail)


def test_product_state_reduction(capsys):
    rng = np.random.default_rng(303)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 9))
        p = GcsParams(n, rng.normal(size=(n, 3)), np.zeros((n, n)), rng.normal(size=(n, 3)))
        i, j = rng.choice(n, 2, replace=False)
        worst = max(worst, abs(gcs.expval_zz(p, i, j) - gcs.expval_z(p, i) * gcs.expval_z(p, j)))
    frozen = True
    for k in range(5):
        res = run(gen_ea3d(2, k), AnnealConfig(n_t=100, mode="product", seed=k))
        frozen &= res.params.m.tobytes() == np.zeros_like(res.params.m).tobytes()
        frozen &= res.params.y.tobytes() == np.zeros_like(res.params.y).tobytes()
    ok = worst <= 1e-12 and frozen
    assert report(capsys, 3, "product-state reduction", ok, f"max |err| = {worst:.1e} <= 1e-12, M and y bitwise zero: {frozen}")


SLABS = [(2, 2, 2), (2, 2, 3), (1, 3, 4), (1, 2, 5), (2, 3, 2), (1, 1, 9), (1, 2, 2)]


def test_exact_solver(capsys):
    rng = np.random.default_rng(404)
    t0 = time.perf_counter()
    mismatches = 0
    for k in range(50):
        if k % 2:
            inst = gen_ea_lattice(SLABS[(k // 2) % len(SLABS)], k, "periodic")
        else:
            inst = random_instance(int(rng.integers(1, 13)), rng)
        if k % 3 == 0:
            inst = QuboInstance(inst.n, inst.rows, inst.cols, inst.weights, rng.standard_normal(inst.n), inst.offset)
        fast = brute_force_min(inst, block_bits=int(rng.integers(0, inst.n + 1)))
        slow = naive_min(inst, chunk_bits=5)
        mismatches += not (fast[0] == slow[0] and np.array_equal(fast[1].s, slow[1].s))
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 60
    assert report(capsys, 4, "Gray-code search vs naive enumeration", ok, f"{mismatches} mismatches in 50, {elapsed:.1f}s")


# --- criteria 5, 6, 9: one seeded batch of desk-scale slabs -------------------------

BATCH = dict(
    shapes=[(2, 3, 4)],
    methods=["gcs", "product", "sa"],
    instances=100,
    seed=0,
    iterations=[1000],
    overrides={"learning_rate": 0.02},
)


@pytest.fixture(scope="module")
def batch(tmp_path_factory):
    out = tmp_path_factory.mktemp("batch_a")
    t0 = time.perf_counter()
    records = run_batch(ExperimentSpec(output=str(out), **BATCH))
    return out, records, time.perf_counter() - t0


def test_quality_ordering(capsys, batch):
    out, records, elapsed = batch
    summary = summarize(records)
    emit_report(summary, out)
    med = {r.method: r.median for r in summary.rows}
    count = {r.method: r.count for r in summary.rows}
    ok = (
        min(count.values()) >= 100
        and med["gcs"] <= med["product"]
        and med["gcs"] <= med["sa"]
        and elapsed < 1800
    )
    detail = (
        f"median eps gcs={med['gcs']:.4g} product={med['product']:.4g} sa={med['sa']:.4g}, "
        f"{min(count.values())} instances, {elapsed / 60:.1f} min"
    )
    assert report(capsys, 5, "solution-quality ordering on 2x3x4 slabs", ok, detail)


def test_nonnegativity(capsys, batch):
    _, records, _ = batch
    violations = [r for r in records if r.energy < r.e0]
    ok = not violations and all(r.e0 is not None for r in records)
    assert report(capsys, 6, "no heuristic below the exact minimum", ok, f"{len(violations)} violations in {len(records)} records")


def test_determinism(capsys, batch, tmp_path_factory):
    first, _, _ = batch
    second = tmp_path_factory.mktemp("batch_b")
    records = run_batch(ExperimentSpec(output=str(second), **BATCH))
    emit_report(summarize(records), second)
    same = [(first / f).read_bytes() == (second / f).read_bytes() for f in BATCH_FILES]
    assert report(capsys, 9, "repeat batch is byte-identical", all(same), f"{sum(same)}/{len(same)} CSV files identical")


# --- criteria 7, 8: timing scaling -----------------------------------------------------


def test_per_iteration_complexity(capsys):
    t0 = time.perf_counter()
    sides = range(5, 11)
    ns = [L**3 for L in sides]
    sparse = [time_per_iteration(gen_ea3d(L, L), AnnealConfig(sparse_m=True), iterations=20) for L in sides]
    fit = fit_scaling(ns, sparse)
    elapsed = time.perf_counter() - t0
    ok = 1.5 <= fit.exponent <= 2.5 and elapsed < 1800
    detail = f"sparse-M exponent {fit.exponent:.2f} +/- {fit.stderr:.2f}, band [1.5, 2.5], {elapsed:.0f}s"
    assert report(capsys, 7, "per-iteration time scaling", ok, detail)


def test_dense_coupling_loss_scaling(capsys):
    # engine property, not a numbered criterion: dense M, zero entries skipped, exponent <= 2.4
    rng = np.random.default_rng(707)
    ns, ts = [], []
    for L in range(5, 11):
        inst = gen_ea3d(L, L)
        p = GcsParams.random(inst.n, rng, scale=0.1)
        plan = gcs.loss_plan(inst)
        gcs.loss(p, 0.5, inst, plan)
        samples = []
        for _ in range(3):
            t0 = time.perf_counter()
            gcs.loss(p, 0.5, inst, plan)
            samples.append(time.perf_counter() - t0)
        ns.append(inst.n)
        ts.append(float(np.median(samples)))
    fit = fit_scaling(ns, ts)
    ok = fit.exponent <= 2.4
    line = f"[{'PASS' if ok else 'FAIL'}] engine property: dense-M loss exponent {fit.exponent:.2f} +/- {fit.stderr:.2f} <= 2.4"
    ACCEPTANCE_LINES.append(line)
    with capsys.disabled():
        print("\n" + line)
    assert ok


def test_scaling_fit_self_test(capsys):
    ns = np.array([125, 216, 343, 512, 729, 1000])
    fit = fit_scaling(ns, 3.0 * ns**2.62)
    err = abs(fit.exponent - 2.62)
    assert report(capsys, 8, "scaling-fit recovers 2.62", err <= 1e-9, f"|exponent - 2.62| = {err:.1e} <= 1e-9")
