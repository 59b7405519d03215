"""Acceptance suite: one pass/fail line per criterion (run with -s to see them).

Criteria 4 and 5 are split into sub-tests because two of their sub-claims do
not hold for the label-stratified measures (eo/pe/oa); those tests implement
the claims faithfully and fail; see README, "Acceptance suite status".
"""

import time

import numpy as np
import pytest

import fairthresh as ft
from fairthresh import cli
from fairthresh import gaussian as ga
from fairthresh import scores as sc
from fairthresh import tabular as tb
from fairthresh.metrics import curve_from_stats, dp_curve
from fairthresh.solve import _disparity_vec

from _brute import brute_force_best


def report(num, ok, detail):
    print(f"\n[criterion {num}] {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, f"criterion {num}: {detail}"


# ---------------------------------------------------------------------------
# Shared synthetic experiment for criteria 1-3: benchmark geometry (dim=10,
# sigma=1, 20000 train / 5000 test, logistic scores), 20 repetitions with the
# population, train and test draws re-seeded per repetition.
# ---------------------------------------------------------------------------

REPS = 20
DP_DELTAS = (0.0, 0.1, 0.2, 0.3)
EO_DELTAS = (0.0, 0.04, 0.08, 0.12)


@pytest.fixture(scope="module")
def synth_runs():
    runs = {("dp", d): [] for d in DP_DELTAS}
    runs.update({("eo", d): [] for d in EO_DELTAS})
    cfg = ft.TrainConfig(per_group=True, epochs=500, learning_rate=1.0)
    for rep in range(REPS):
        pop_seed, train_seed, test_seed = cli.rep_seeds(0, rep)
        pop = ft.draw_population(ft.SynthSpec.binary(dim=10, sigma=1.0, seed=pop_seed))
        train = ft.sample(pop, 20000, train_seed)
        test = ft.sample(pop, 5000, test_seed)
        model = ft.fit_logistic(train, cfg)
        gs_train = ft.GroupedScores.from_dataset(train, sc.score_dataset(model, train))
        gs_test = ft.GroupedScores.from_dataset(test, sc.score_dataset(model, test))
        for measure, deltas in (("dp", DP_DELTAS), ("eo", EO_DELTAS)):
            for delta in deltas:
                res = ft.solve(gs_train, ft.FairnessConstraint(measure, delta))
                ev = ft.evaluate(res.rule, gs_test)
                t_or, rule_or = ga.oracle_rule(pop, measure, delta)
                runs[(measure, delta)].append(
                    {
                        "test_disparity": ev.ddp if measure == "dp" else ev.deo,
                        "test_acc": ev.accuracy,
                        "oracle_acc": ga.fair_accuracy(pop, rule_or),
                        "pop_acc_fit": ga.fair_accuracy(pop, res.rule),
                    }
                )
    return runs


def test_criterion_1_dp_disparity_control(synth_runs):
    t0 = time.perf_counter()
    details = []
    ok = True
    for delta in DP_DELTAS:
        cells = synth_runs[("dp", delta)]
        if delta == 0.0:
            err = float(np.mean(np.abs([c["test_disparity"] for c in cells])))
        else:
            err = abs(float(np.mean([c["test_disparity"] for c in cells])) - delta)
        details.append(f"delta={delta}: |mean ddp - delta|={err:.4f}")
        ok = ok and err <= 0.03
    report(1, ok, f"dp control over {REPS} reps; " + "; ".join(details))


def test_criterion_2_eo_disparity_control(synth_runs):
    details = []
    ok = True
    for delta in EO_DELTAS:
        cells = synth_runs[("eo", delta)]
        if delta == 0.0:
            err = float(np.mean(np.abs([c["test_disparity"] for c in cells])))
        else:
            err = abs(float(np.mean([c["test_disparity"] for c in cells])) - delta)
        details.append(f"delta={delta}: |mean deo - delta|={err:.4f}")
        ok = ok and err <= 0.03
    report(2, ok, f"eo control over {REPS} reps; " + "; ".join(details))


def test_criterion_3_oracle_tracking(synth_runs):
    # Exact population accuracy of the fitted rule vs the tolerance-optimal
    # rule, per repetition.  (The raw test-sample accuracy difference carries
    # binomial noise of sd ~ 0.006 at n_test = 5000, so the per-repetition
    # comparison is made on the same population both rules are scored on;
    # the empirical mean gap is reported alongside.)
    worst = 0.0
    test_gaps = []
    for key, cells in synth_runs.items():
        for c in cells:
            worst = max(worst, abs(c["oracle_acc"] - c["pop_acc_fit"]))
            test_gaps.append(abs(c["test_acc"] - c["oracle_acc"]))
    mean_test_gap = float(np.mean(test_gaps))
    ok = worst <= 0.01
    report(
        3,
        ok,
        f"per-rep |acc(fitted) - acc(oracle)| max={worst:.5f} (<= 0.01); "
        f"test-sample acc gap mean={mean_test_gap:.5f}",
    )


# ---------------------------------------------------------------------------
# Criterion 4: exhaustive-oracle optimality on small datasets
# ---------------------------------------------------------------------------


def _random_small_gs(rng):
    n0 = int(rng.integers(6, 31))
    n1 = int(rng.integers(6, 31))
    n = n0 + n1
    scores = rng.choice(np.linspace(0.005, 0.995, 4000), size=n, replace=False)
    group = np.array([0] * n0 + [1] * n1)
    label = rng.integers(0, 2, n)
    label[:2] = [0, 1]
    label[n0 : n0 + 2] = [0, 1]
    return ft.GroupedScores.from_arrays(scores, group, label)


def test_criterion_4_exhaustive_optimality_dp_and_cost():
    t0 = time.perf_counter()
    rng = np.random.default_rng(100)
    n_data = 200
    mism = 0
    for _ in range(n_data):
        gs = _random_small_gs(rng)
        delta = float(rng.choice([0.0, 0.05, 0.1, 0.2, 0.3]))
        res = ft.solve_dp(gs, delta, randomize=True)
        best, _ = brute_force_best(gs, "dp", delta, randomize=True)
        mism += abs(res.plugin_accuracy - best) > 1e-9
        for c in (0.3, 0.5, 0.7):
            r = ft.solve_cost_sensitive(gs, c, delta, randomize=True)
            best, _ = brute_force_best(gs, "dp", delta, cost=c, randomize=True)
            mism += abs(-r.plugin_cost_risk - best) > 1e-9
    elapsed = time.perf_counter() - t0
    report(
        "4a",
        mism == 0 and elapsed < 60,
        f"dp + cost-sensitive solvers match the exhaustive oracle exactly on "
        f"{n_data} datasets ({mism} mismatches, {elapsed:.1f}s)",
    )


def test_criterion_4_exhaustive_optimality_eo_pe_oa():
    """As stated this fails: the eo/pe/oa plug-in constraints stratify by the
    observed labels while the objective weighs by the scores, so the
    one-parameter family is optimal in population but not exactly optimal
    against a two-dimensional threshold search on a finite sample; see
    README, "Acceptance suite status"."""
    rng = np.random.default_rng(101)
    n_data = 200
    mism = {"eo": 0, "pe": 0, "oa": 0}
    gap = {"eo": 0.0, "pe": 0.0, "oa": 0.0}
    solvers = {"eo": ft.solve_eo, "pe": ft.solve_pe, "oa": ft.solve_oa}
    for _ in range(n_data):
        gs = _random_small_gs(rng)
        delta = float(rng.choice([0.0, 0.05, 0.1, 0.2]))
        for m, fn in solvers.items():
            res = fn(gs, delta, randomize=True)
            best, _ = brute_force_best(gs, m, delta, randomize=True)
            if best - res.plugin_accuracy > 1e-9:
                mism[m] += 1
                gap[m] = max(gap[m], best - res.plugin_accuracy)
    detail = "; ".join(
        f"{m}: {mism[m]}/{n_data} datasets below the 2-d oracle (max gap {gap[m]:.3f})"
        for m in mism
    )
    report("4b", all(v == 0 for v in mism.values()), detail)


# ---------------------------------------------------------------------------
# Criterion 5: monotonicity suite
# ---------------------------------------------------------------------------


def _random_gs_for_monotone(rng):
    n0 = int(rng.integers(10, 40))
    n1 = int(rng.integers(10, 40))
    scores = rng.random(n0 + n1)
    group = np.array([0] * n0 + [1] * n1)
    label = rng.integers(0, 2, n0 + n1)
    label[:2] = [0, 1]
    label[n0 : n0 + 2] = [0, 1]
    return ft.GroupedScores.from_arrays(scores, group, label)


def _grid_monotone(gs, measure):
    curve = dp_curve(gs.stats) if measure == "dp" else curve_from_stats(measure, gs.stats)
    lo, hi = curve.bracket()
    grid = np.linspace(lo, hi, 401)
    vals = _disparity_vec(curve, gs, grid)
    return bool(np.all(np.diff(vals) <= 1e-12))


def test_criterion_5_monotone_disparity_dp_eo_pe():
    rng = np.random.default_rng(200)
    bad = 0
    for _ in range(100):
        gs = _random_gs_for_monotone(rng)
        for measure in ("dp", "eo", "pe"):
            bad += not _grid_monotone(gs, measure)
    report("5a", bad == 0, f"dp/eo/pe disparity non-increasing on 100 random datasets ({bad} violations)")


def test_criterion_5_monotone_disparity_oa():
    """As stated this fails: the empirical accuracy-gap step function ticks
    upward whenever a group's moving cutoff passes one of its label-0 scores
    (population monotonicity does not transfer to the label-stratified
    sample estimate); the counterexample is pinned in test_metrics."""
    rng = np.random.default_rng(201)
    bad = 0
    for _ in range(100):
        gs = _random_gs_for_monotone(rng)
        bad += not _grid_monotone(gs, "oa")
    report("5b", bad == 0, f"oa disparity non-increasing on 100 random datasets ({bad} violations)")


def test_criterion_5_accuracy_monotone_in_tolerance():
    rng = np.random.default_rng(202)
    deltas = np.linspace(0.0, 0.4, 9)
    solvers = (ft.solve_dp, ft.solve_eo, ft.solve_pe, ft.solve_oa)
    bad = 0
    for _ in range(100):
        gs = _random_gs_for_monotone(rng)
        for solver in solvers:
            accs = [solver(gs, float(d), randomize=True).plugin_accuracy for d in deltas]
            bad += not all(b >= a - 1e-12 for a, b in zip(accs, accs[1:]))
    report("5c", bad == 0, f"solver accuracy non-decreasing in the tolerance ({bad} violations)")


# ---------------------------------------------------------------------------
# Criterion 6: randomized rules hit the tolerance exactly on atomic scores
# ---------------------------------------------------------------------------


def test_criterion_6_randomized_exact_tolerance():
    rng = np.random.default_rng(300)
    solvers = {"dp": ft.solve_dp, "eo": ft.solve_eo, "pe": ft.solve_pe, "oa": ft.solve_oa}
    checked = 0
    worst_exact = 0.0
    ok = True
    for trial in range(120):
        # heavy ties: scores drawn from a coarse grid
        n0, n1 = int(rng.integers(8, 30)), int(rng.integers(8, 30))
        scores = rng.choice(np.linspace(0.05, 0.95, 10), size=n0 + n1, replace=True)
        group = np.array([0] * n0 + [1] * n1)
        label = rng.integers(0, 2, n0 + n1)
        label[:2] = [0, 1]
        label[n0 : n0 + 2] = [0, 1]
        gs = ft.GroupedScores.from_arrays(scores, group, label)
        for measure, fn in solvers.items():
            d0 = {
                "dp": ft.ddp_hat, "eo": ft.deo_hat, "pe": ft.dpe_hat, "oa": ft.doa_hat,
            }[measure](gs, 0.0)
            if abs(d0) < 0.05:
                continue
            delta = abs(d0) / 2
            res = fn(gs, delta, randomize=True)
            if res.saturated or res.no_crossing:
                continue
            err = abs(res.achieved_disparity - np.sign(d0) * delta)
            worst_exact = max(worst_exact, err)
            ok = ok and err <= 1e-12
            det = fn(gs, delta)
            if not (det.saturated or det.no_crossing):
                # largest tied-score mass in any stratum the measure reads
                strata = {"dp": (None,), "eo": (1,), "pe": (0,), "oa": (0, 1)}[measure]
                step = max(
                    float(np.sum(gs.stratum(a, y) == v)) / gs.stratum(a, y).size
                    for a in (0, 1)
                    for y in strata
                    for v in np.unique(gs.stratum(a, y))
                )
                ok = ok and abs(det.achieved_disparity) <= delta + 2 * step + 1e-12
            checked += 1
    report(
        6,
        ok and checked >= 100,
        f"randomized rules hit sign(d0)*delta exactly on {checked} atomic cases "
        f"(worst deviation {worst_exact:.2e}); deterministic within atom slack",
    )


# ---------------------------------------------------------------------------
# Criterion 7: multi-class benchmark
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("k,reps,ddp_bound", [(3, 6, 0.06), (5, 4, 0.12)])
def test_criterion_7_multiclass(k, reps, ddp_bound):
    # Accuracy comparison is between the benchmark means, matching the layout
    # of the table the criterion cites; a single repetition can exceed the
    # fair optimum by being slightly unfair on the population, so per-rep
    # gaps are informational.
    cfg = ft.TrainConfig(per_group=True, epochs=400, learning_rate=1.0)
    ddps, fit_accs, oracle_accs = [], [], []
    for rep in range(reps):
        pop_seed, train_seed, test_seed = cli.rep_seeds(70 + k, rep)
        pop = ft.draw_population(ft.SynthSpec.multiclass(k, seed=pop_seed))
        train = ft.sample(pop, 10000 * k, train_seed)
        test = ft.sample(pop, 5000, test_seed)
        model = ft.fit_logistic(train, cfg)
        gs_train = ft.GroupedScores.from_dataset(train, sc.score_dataset(model, train))
        gs_test = ft.GroupedScores.from_dataset(test, sc.score_dataset(model, test))
        res = ft.solve_multiclass_dp(gs_train)
        ev = ft.evaluate(res.rule, gs_test)
        orc = ga.oracle_multiclass_dp(pop)
        ddps.append(ev.ddp)
        fit_accs.append(ga.fair_accuracy(pop, res.rule))
        oracle_accs.append(orc.accuracy)
    mean_ddp = float(np.mean(ddps))
    mean_gap = abs(float(np.mean(fit_accs)) - float(np.mean(oracle_accs)))
    worst_gap = float(np.max(np.abs(np.array(fit_accs) - np.array(oracle_accs))))
    ok = mean_ddp <= ddp_bound and mean_gap <= 0.01
    report(
        7,
        ok,
        f"|A|={k}: mean test sum-gap ddp={mean_ddp:.4f} (<= {ddp_bound}); "
        f"mean oracle accuracy gap={mean_gap:.5f} (<= 0.01, per-rep worst "
        f"{worst_gap:.5f}) over {reps} reps",
    )


# ---------------------------------------------------------------------------
# Criterion 8: oracle tails vs Monte Carlo; shift self-consistency
# ---------------------------------------------------------------------------


def test_criterion_8_oracle_tails_and_shifts():
    rng = np.random.default_rng(800)
    n = 10**6
    worst_z = 0.0
    for trial in range(50):
        d = int(rng.integers(1, 8))
        p1 = float(rng.uniform(0.25, 0.75))
        pop = ga.GaussianPopulation(
            p_a=np.array([1 - p1, p1]),
            p_ya=rng.uniform(0.15, 0.85, size=2),
            mu=rng.normal(0, 1, size=(2, 2, d)),
            sigma=float(rng.uniform(0.5, 2.0)),
        )
        a = int(rng.integers(0, 2))
        q = float(rng.uniform(0.05, 0.95))
        stratum = [None, 0, 1][trial % 3]
        exact = ga.tail_rate(pop, a, q, stratum)
        mc = np.random.default_rng(9000 + trial)
        if stratum is None:
            y = (mc.random(n) < pop.p_ya[a]).astype(int)
        else:
            y = np.full(n, stratum)
        x = pop.mu[a, y] + pop.sigma * mc.standard_normal((n, d))
        est = float(np.mean(ga.eta(pop, x, a) > q))
        se = max(np.sqrt(max(exact * (1 - exact), 1e-12) / n), 1e-9)
        worst_z = max(worst_z, abs(est - exact) / se)

    worst_resid = 0.0
    rng2 = np.random.default_rng(801)
    checked = 0
    while checked < 40:
        pop = ga.GaussianPopulation(
            p_a=np.array([0.45, 0.55]),
            p_ya=rng2.uniform(0.2, 0.8, size=2),
            mu=rng2.normal(0, 1, size=(2, 2, 4)),
            sigma=1.0,
        )
        measure = ("dp", "eo", "pe", "oa")[checked % 4]
        star = ga.unconstrained_disparity(pop, measure)
        if abs(star) < 0.05:
            continue
        delta = abs(star) / 2
        t = ga.t_star(pop, measure, delta)
        curve = ga.population_curve(pop, measure)
        worst_resid = max(
            worst_resid,
            abs(ga.population_disparity(pop, curve, t) - np.sign(star) * delta),
        )
        checked += 1
    ok = worst_z <= 4.0 and worst_resid <= 1e-9
    report(
        8,
        ok,
        f"tail rates within {worst_z:.2f} standard errors of 1e6-draw Monte Carlo "
        f"(<= 4); shift self-consistency residual {worst_resid:.1e} (<= 1e-9)",
    )


# ---------------------------------------------------------------------------
# Criterion 9: the tolerance sweep refits nothing
# ---------------------------------------------------------------------------


def test_criterion_9_single_fit_tradeoff():
    cfg = cli.ExperimentConfig(
        kind="tradeoff", seed=0, n_train=20000, n_test=5000, epochs=500, n_deltas=50
    )
    rows, meta = cli.run_tradeoff(cfg)
    fifty_fits = 50 * meta["fit_seconds"]
    ok = (
        meta["fit_count"] == 1
        and len(rows) == 50
        and meta["sweep_seconds"] < 0.5 * fifty_fits
    )
    report(
        9,
        ok,
        f"50-point sweep used {meta['fit_count']} fit; sweep {meta['sweep_seconds']:.2f}s "
        f"vs 50 fits ~{fifty_fits:.2f}s",
    )


# ---------------------------------------------------------------------------
# Criterion 10 (network-optional): census-income disparity control
# ---------------------------------------------------------------------------


def test_criterion_10_adult_dp_control():
    path = tb.data_dir() / tb.ADULT_MANIFEST.filename
    if not path.exists():
        pytest.skip(
            "census-income file absent; fetch(tb.ADULT_MANIFEST) with network "
            "access to enable this criterion"
        )
    deltas = (0.0, 0.04, 0.08, 0.12)
    cfg = cli.ExperimentConfig(
        kind="tabular",
        data_path=str(path),
        deltas=deltas,
        reps=10,
        seed=0,
        epochs=300,
        per_group=False,
    )
    rows, _ = cli.run_tabular(cfg)
    ok = True
    details = []
    for row in rows:
        err = abs(row["disparity_mean"] - row["delta"])
        details.append(f"delta={row['delta']}: mean ddp={row['disparity_mean']:.4f}")
        ok = ok and err <= 0.02
    report(10, ok, "; ".join(details))
