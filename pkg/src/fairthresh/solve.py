"""Threshold calibration: pick the disparity-control parameter for a sample.

Each binary-measure solver searches the one-parameter threshold family of its
measure for the largest parameter at which the empirical disparity still
exceeds the signed tolerance.  The empirical disparity is a step function
whose breakpoints are known exactly (images of the observed scores under the
inverse threshold maps), so the search scans the finite candidate set instead
of bisecting; no tolerance enters the result.

With ``randomize=True`` the returned rule additionally randomizes predictions
for scores sitting exactly on a group's cutoff, choosing the tie probability
so the achieved disparity equals the signed tolerance exactly.  The
deterministic rule can instead overshoot by up to one score atom.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .core import FairnessConstraint, ThresholdRule
from .metrics import GroupedScores, curve_from_stats, dp_curve


class SolverError(ValueError):
    pass


@dataclass(frozen=True)
class SupSolveResult:
    """Outcome of a sup search: the parameter value plus diagnostics."""

    value: float
    no_crossing: bool
    saturated: bool
    iterations: int


def sup_solve(
    f: Callable[[float], float],
    target: float,
    bracket: tuple,
    candidates: Optional[Sequence[float]] = None,
    tol: float = 1e-10,
    max_iter: int = 200,
) -> SupSolveResult:
    """Largest t in the bracket with f(t) > target.

    With ``candidates`` given (the breakpoints of a step function) the answer
    is exact over that candidate set.  Otherwise f must be monotone
    non-increasing and the crossing is bisected to absolute tolerance ``tol``.
    Returns bracket_lo with ``no_crossing`` when f never exceeds the target,
    and bracket_hi with ``saturated`` when it always does.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    if hi < lo:
        raise ValueError("empty bracket")
    if candidates is not None:
        return _sup_scan(f, target, lo, hi, candidates)
    f_lo = f(lo)
    if not f_lo > target:
        return SupSolveResult(lo, True, False, 0)
    f_hi = f(hi)
    if f_hi > target:
        return SupSolveResult(hi, False, True, 0)
    a, b = lo, hi
    it = 0
    while b - a > tol and it < max_iter:
        mid = 0.5 * (a + b)
        if f(mid) > target:
            a = mid
        else:
            b = mid
        it += 1
    return SupSolveResult(0.5 * (a + b), False, False, it)


def _sup_scan(f, target, lo, hi, candidates) -> SupSolveResult:
    pts = np.unique(np.clip(np.asarray(list(candidates) + [lo, hi], dtype=np.float64), lo, hi))
    best = None
    evals = 0
    # constant pieces between consecutive candidates
    for i in range(len(pts) - 1):
        mid = 0.5 * (pts[i] + pts[i + 1])
        evals += 1
        if f(mid) > target:
            best = pts[i + 1]
    # isolated candidate points can also qualify
    for p in pts:
        evals += 1
        if f(float(p)) > target and (best is None or p > best):
            best = p
    if best is None:
        return SupSolveResult(lo, True, False, evals)
    saturated = bool(best == pts[-1]) and f(0.5 * (pts[-2] + pts[-1])) > target
    return SupSolveResult(float(best), False, saturated, evals)


@dataclass(frozen=True)
class SolveResult:
    """A calibrated rule plus how it was found.

    ``achieved_disparity`` is the expected disparity of ``rule`` on the
    solving sample (exactly the signed tolerance when randomization is on and
    a crossing exists).  ``plugin_accuracy`` and ``plugin_cost_risk`` treat
    each score as the true positive probability of its row, which is the
    objective the threshold family optimizes.
    """

    t_hat: float
    rule: ThresholdRule
    achieved_disparity: float
    constraint: FairnessConstraint
    disparity_at_zero: float
    branch: str
    bracket: tuple
    n_candidates: int
    no_crossing: bool
    saturated: bool
    randomized: bool
    plugin_accuracy: float
    plugin_cost_risk: float


def _rates_vec(sorted_scores: np.ndarray, qs: np.ndarray) -> np.ndarray:
    hi = np.searchsorted(sorted_scores, qs, side="right")
    return (sorted_scores.size - hi) / sorted_scores.size


def _disparity_vec(curve, gs: GroupedScores, ts: np.ndarray) -> np.ndarray:
    qs = np.array([curve.thresholds(float(t)) for t in ts])
    q0s, q1s = qs[:, 0], qs[:, 1]
    if curve.measure == "oa":
        g1 = _rates_vec(gs.stratum(1, 1), q1s) - _rates_vec(gs.stratum(1, 0), q1s)
        g0 = _rates_vec(gs.stratum(0, 1), q0s) - _rates_vec(gs.stratum(0, 0), q0s)
        return g1 - g0
    y = curve.strata[0]
    return _rates_vec(gs.stratum(1, y), q1s) - _rates_vec(gs.stratum(0, y), q0s)


def _snap_to_scores(q: float, sorted_scores: np.ndarray, atol: float = 1e-9) -> float:
    """Snap a threshold onto an exactly-equal observed score, within atol.

    Candidate parameters are breakpoint images, so the intended cutoff is an
    exact score value; this undoes the inverse-then-forward float round trip.
    """
    if sorted_scores.size == 0:
        return q
    i = np.searchsorted(sorted_scores, q)
    for j in (i - 1, i):
        if 0 <= j < sorted_scores.size and abs(sorted_scores[j] - q) <= atol:
            return float(sorted_scores[j])
    return q


def _plugin_metrics(gs: GroupedScores, rule: ThresholdRule, cost: float) -> tuple:
    acc = 0.0
    risk = 0.0
    for a in range(gs.n_groups):
        s = gs.by_group[a]
        q = float(rule.thresholds[a])
        tau = float(rule.tie_prob[a])
        pi = (s > q).astype(np.float64)
        if tau:
            pi = np.where(s == q, tau, pi)
        acc += float(np.sum(pi * s + (1.0 - pi) * (1.0 - s)))
        risk += float(np.sum(cost * (1.0 - s) * pi + (1.0 - cost) * s * (1.0 - pi)))
    n = gs.stats.n
    return acc / n, risk / n


def _solve_binary(
    gs: GroupedScores,
    delta: float,
    curve,
    constraint: FairnessConstraint,
    randomize: bool,
) -> SolveResult:
    if delta < 0:
        raise SolverError("delta must be >= 0")
    if gs.n_groups != 2:
        raise SolverError("binary solvers require exactly two groups")

    d0 = curve.disparity(gs, 0.0)
    lo, hi = curve.bracket()
    sup = SupSolveResult(0.0, False, False, 0)
    n_candidates = 0

    if abs(d0) <= delta:
        t_hat = 0.0
        branch = "within-tolerance"
        target = d0
    else:
        # Walk outward from t = 0 on the side the initial disparity dictates
        # and stop at the first parameter where the disparity reaches the
        # signed tolerance.  For a monotone non-increasing step function this
        # is exactly the sup of {t : disparity(t) > target}; it also stays
        # well-posed for the accuracy-gap measure, whose empirical steps are
        # not perfectly monotone.
        target = delta if d0 > 0 else -delta
        branch = "upper" if d0 > 0 else "lower"
        cands = curve.breakpoints(gs)
        n_candidates = int(cands.size)
        if branch == "upper":
            side = cands[(cands >= 0.0) & (cands <= hi)]
            ts_all = np.unique(np.concatenate([[0.0], side, [hi]]))
        else:
            side = cands[(cands >= lo) & (cands <= 0.0)]
            ts_all = np.unique(np.concatenate([[lo], side, [0.0]]))
        mids = 0.5 * (ts_all[:-1] + ts_all[1:])
        vals_mid = _disparity_vec(curve, gs, mids)
        vals_at = _disparity_vec(curve, gs, ts_all)
        if branch == "upper":
            hits = []
            ok = vals_mid <= target
            if np.any(ok):
                hits.append(float(ts_all[:-1][ok].min()))
            ok_at = vals_at <= target
            if np.any(ok_at):
                hits.append(float(ts_all[ok_at].min()))
            if hits:
                sup = SupSolveResult(min(hits), False, False, 0)
            else:
                sup = SupSolveResult(float(hi), False, True, 0)
        else:
            hits = []
            ok = vals_mid > target
            if np.any(ok):
                hits.append(float(ts_all[1:][ok].max()))
            ok_at = vals_at > target
            if np.any(ok_at):
                hits.append(float(ts_all[ok_at].max()))
            if hits:
                sup = SupSolveResult(max(hits), False, False, 0)
            else:
                sup = SupSolveResult(float(lo), False, True, 0)
        t_hat = sup.value

    q0, q1 = curve.thresholds(t_hat)
    q0 = _snap_to_scores(q0, gs.by_group[0])
    q1 = _snap_to_scores(q1, gs.by_group[1])
    thresholds = (q0, q1)
    achieved = curve.disparity_at(gs, thresholds)

    tie = [0.0, 0.0]
    if randomize and branch != "within-tolerance":
        needed = target - achieved
        if needed != 0.0:
            for a in (0, 1):  # group-0 atom first: mirrors the tau convention
                eff = curve.tie_effect(gs, thresholds, a)
                if eff != 0.0:
                    tau = needed / eff
                    if -1e-9 <= tau <= 1.0 + 1e-9:
                        tie[a] = min(max(tau, 0.0), 1.0)
                        break

    rule = ThresholdRule(np.array(thresholds), np.array(tie))
    achieved = curve.disparity_at(gs, thresholds, tuple(tie))
    acc, risk = _plugin_metrics(gs, rule, constraint.cost)
    return SolveResult(
        t_hat=float(t_hat),
        rule=rule,
        achieved_disparity=float(achieved),
        constraint=constraint,
        disparity_at_zero=float(d0),
        branch=branch,
        bracket=(float(lo), float(hi)),
        n_candidates=n_candidates,
        no_crossing=sup.no_crossing,
        saturated=sup.saturated,
        randomized=bool(tie[0] or tie[1]),
        plugin_accuracy=acc,
        plugin_cost_risk=risk,
    )


def solve_dp(gs: GroupedScores, delta: float, randomize: bool = False) -> SolveResult:
    """Demographic-parity calibration with cutoffs 1/2 +- t / (2 p_a)."""
    curve = dp_curve(gs.stats)
    return _solve_binary(gs, delta, curve, FairnessConstraint("dp", delta), randomize)


def solve_eo(gs: GroupedScores, delta: float, randomize: bool = False) -> SolveResult:
    """Equal-opportunity (true-positive-rate) calibration."""
    curve = curve_from_stats("eo", gs.stats)
    return _solve_binary(gs, delta, curve, FairnessConstraint("eo", delta), randomize)


def solve_pe(gs: GroupedScores, delta: float, randomize: bool = False) -> SolveResult:
    """Predictive-equality (false-positive-rate) calibration."""
    curve = curve_from_stats("pe", gs.stats)
    return _solve_binary(gs, delta, curve, FairnessConstraint("pe", delta), randomize)


def solve_oa(gs: GroupedScores, delta: float, randomize: bool = False) -> SolveResult:
    """Overall-accuracy-equality calibration.

    The empirical accuracy gap is a step function that is not exactly
    monotone in t (it can tick upward when a cutoff passes a label-0 score),
    so the scan keeps the last crossing of the signed tolerance.
    """
    curve = curve_from_stats("oa", gs.stats)
    return _solve_binary(gs, delta, curve, FairnessConstraint("oa", delta), randomize)


def solve_cost_sensitive(
    gs: GroupedScores, cost: float, delta: float, randomize: bool = False
) -> SolveResult:
    """Demographic-parity calibration of the cost-sensitive rule c +- t / p_a."""
    if not 0.0 <= cost <= 1.0:
        raise SolverError("cost must lie in [0, 1]")
    curve = curve_from_stats("dp", gs.stats, cost=cost)
    return _solve_binary(
        gs, delta, curve, FairnessConstraint("dp", delta, cost=cost), randomize
    )


def solve(gs: GroupedScores, constraint: FairnessConstraint, randomize: bool = False) -> SolveResult:
    """Dispatch on the constraint's measure (and cost, for dp)."""
    if constraint.measure == "dp":
        if constraint.cost != 0.5:
            return solve_cost_sensitive(gs, constraint.cost, constraint.delta, randomize)
        return solve_dp(gs, constraint.delta, randomize)
    fn = {"eo": solve_eo, "pe": solve_pe, "oa": solve_oa}[constraint.measure]
    return fn(gs, constraint.delta, randomize)


# ---------------------------------------------------------------------------
# Multi-class protected attribute, perfect demographic parity
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MulticlassSolveResult:
    """Per-group shifts equalizing positive rates across all groups.

    ``sum_t`` is the (near-zero) sum of the shifts; ``sum_gap`` its distance
    from zero when the step functions cannot balance exactly.
    """

    t_hats: np.ndarray
    rule: ThresholdRule
    rates: np.ndarray
    max_rate_gap: float
    sum_t: float
    sum_gap: float
    plugin_accuracy: float


def _count_intervals(sorted_scores: np.ndarray, p_a: float):
    """Achievable positive counts and their threshold-shift intervals.

    For each achievable count c (positives under cutoff q with strict >),
    returns the half-open shift interval [t_lo, t_hi) realizing it, where
    q = 1/2 + t / (2 p_a).  Counts are listed in decreasing order.
    """
    u = np.unique(sorted_scores)
    n = sorted_scores.size
    counts = n - np.searchsorted(sorted_scores, u, side="right")
    q_lo = list(u)
    q_hi = list(u[1:]) + [1.0]
    cs = list(counts)
    if u[0] > 0.0:
        cs.insert(0, n)
        q_lo.insert(0, 0.0)
        q_hi.insert(0, float(u[0]))
    t_lo = 2.0 * p_a * (np.asarray(q_lo) - 0.5)
    t_hi = 2.0 * p_a * (np.asarray(q_hi) - 0.5)
    return np.asarray(cs, dtype=np.int64), t_lo, t_hi


def solve_multiclass_dp(gs: GroupedScores) -> MulticlassSolveResult:
    """Equalize positive rates across all groups with zero-sum shifts.

    Group 0 is the reference: its achievable rates are scanned; every other
    group is matched to the closest achievable rate, and the shifts are
    placed inside their feasible intervals so they sum to zero.  When no
    reference rate admits a zero sum the nearest interval is used and the
    residual is reported in ``sum_gap``.
    """
    k = gs.n_groups
    if k < 2:
        raise SolverError("multi-class solving requires at least two groups")
    stats = gs.stats
    tables = [
        _count_intervals(gs.by_group[a], float(stats.p_hat_a[a])) for a in range(k)
    ]

    def match(a: int, s: float):
        cs, t_lo, t_hi = tables[a]
        n_a = int(stats.n_a[a])
        # cs is decreasing; pick the achievable count with rate closest to s
        idx = np.searchsorted(-cs, -s * n_a)  # first index with count <= s*n_a
        best_j, best_d = None, math.inf
        for j in (idx - 1, idx):
            if 0 <= j < cs.size:
                d = abs(cs[j] / n_a - s)
                if d < best_d - 1e-15:
                    best_j, best_d = j, d
        return best_j

    ref_cs, ref_lo, ref_hi = tables[0]
    n_ref = int(stats.n_a[0])
    best = None  # (sum_gap, c_index_per_group, S_lo, S_hi)
    for i in range(ref_cs.size):
        s = ref_cs[i] / n_ref
        js = [i] + [match(a, s) for a in range(1, k)]
        lo_sum = ref_lo[i] + sum(tables[a][1][js[a]] for a in range(1, k))
        hi_sum = ref_hi[i] + sum(tables[a][2][js[a]] for a in range(1, k))
        if lo_sum <= 0.0 <= hi_sum:
            gap = 0.0
        else:
            gap = min(abs(lo_sum), abs(hi_sum))
        if best is None or gap < best[0] - 1e-15:
            best = (gap, js, lo_sum, hi_sum)
        if gap == 0.0:
            break

    sum_gap, js, lo_sum, hi_sum = best
    if lo_sum <= 0.0 <= hi_sum:
        frac = 0.0 if hi_sum == lo_sum else -lo_sum / (hi_sum - lo_sum)
        frac = min(frac, 1.0 - 1e-12)  # keep every shift inside its half-open interval
    else:
        frac = 0.0 if abs(lo_sum) <= abs(hi_sum) else 1.0 - 1e-12
    t_hats = np.array(
        [
            tables[a][1][js[a]] + frac * (tables[a][2][js[a]] - tables[a][1][js[a]])
            for a in range(k)
        ]
    )
    thresholds = np.clip(0.5 + t_hats / (2.0 * stats.p_hat_a), 0.0, 1.0)
    for a in range(k):
        thresholds[a] = _snap_to_scores(float(thresholds[a]), gs.by_group[a])
    rule = ThresholdRule(thresholds)
    rates = np.array(
        [
            (gs.by_group[a].size - np.searchsorted(gs.by_group[a], thresholds[a], side="right"))
            / gs.by_group[a].size
            for a in range(k)
        ]
    )
    gap = float(rates.max() - rates.min())
    acc, _ = _plugin_metrics(gs, rule, 0.5)
    return MulticlassSolveResult(
        t_hats=t_hats,
        rule=rule,
        rates=rates,
        max_rate_gap=gap,
        sum_t=float(t_hats.sum()),
        sum_gap=float(sum_gap),
        plugin_accuracy=acc,
    )
