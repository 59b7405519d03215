"""Empirical disparity functions and classifier evaluation.

The four group-fairness measures handled here compare, between the two
protected groups, the positive rate (dp), the true-positive rate (eo), the
false-positive rate (pe), and the per-group accuracy (oa).  Each measure
induces a one-parameter family of group-wise threshold pairs; the
:class:`ThresholdCurve` below maps the scalar family parameter ``t`` to the
pair of score cutoffs, and the ``*_hat`` functions evaluate the plug-in
disparity of the resulting rule on a sample.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import Dataset, EvalReport, GroupStats, ThresholdRule, group_stats_arrays


class ThresholdRangeError(ValueError):
    """Raised when a family parameter t leaves the valid bracket."""


@dataclass(frozen=True)
class GroupedScores:
    """Scores stratified by (group, label), each stratum sorted ascending.

    ``by_group[a]`` holds every score of group ``a``; ``by_group_label[a][y]``
    the scores of rows with group ``a`` and label ``y``.
    """

    by_group: tuple
    by_group_label: tuple
    stats: GroupStats

    @classmethod
    def from_arrays(cls, scores, group, label, n_groups: int = 0) -> "GroupedScores":
        s = np.asarray(scores, dtype=np.float64)
        g = np.asarray(group, dtype=np.int64)
        y = np.asarray(label, dtype=np.int64)
        if s.ndim != 1 or s.shape != g.shape or s.shape != y.shape:
            raise ValueError("scores, group and label must be equal-length vectors")
        if s.size and (s.min() < 0.0 or s.max() > 1.0):
            raise ValueError("scores must lie in [0, 1]")
        stats = group_stats_arrays(g, y, n_groups)
        by_group = []
        by_group_label = []
        for a in range(stats.n_groups):
            in_a = g == a
            by_group.append(np.sort(s[in_a]))
            by_group_label.append(
                (np.sort(s[in_a & (y == 0)]), np.sort(s[in_a & (y == 1)]))
            )
        return cls(tuple(by_group), tuple(by_group_label), stats)

    @classmethod
    def from_dataset(cls, data: Dataset, scores) -> "GroupedScores":
        return cls.from_arrays(scores, data.group, data.label, data.n_groups)

    @property
    def n_groups(self) -> int:
        return self.stats.n_groups

    def stratum(self, a: int, y: Optional[int]) -> np.ndarray:
        """Sorted scores of group ``a``, optionally restricted to label ``y``."""
        if y is None:
            return self.by_group[a]
        return self.by_group_label[a][y]


def positive_rate(sorted_scores: np.ndarray, q: float, tau: float = 0.0) -> float:
    """Fraction predicted positive: scores above q, plus tau weight on ties."""
    s = np.asarray(sorted_scores)
    if s.size == 0:
        raise ValueError("empty score list")
    if not 0.0 <= q <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tie probability must lie in [0, 1]")
    hi = np.searchsorted(s, q, side="right")
    above = s.size - hi
    if tau:
        ties = hi - np.searchsorted(s, q, side="left")
        return (above + tau * ties) / s.size
    return above / s.size


def _tie_count(sorted_scores: np.ndarray, q: float) -> int:
    s = sorted_scores
    return int(np.searchsorted(s, q, side="right") - np.searchsorted(s, q, side="left"))


# ---------------------------------------------------------------------------
# One-parameter threshold families (binary protected attribute)
# ---------------------------------------------------------------------------

_EPS = 1e-12


@dataclass(frozen=True)
class ThresholdCurve:
    """Threshold pair as a function of the disparity-control parameter t.

    Works with either plug-in rates (empirical solving) or exact population
    rates (oracle computations); only ``p_a`` and ``p_ya`` enter the maps.
    ``measure`` is "dp", "eo", "pe" or "oa"; a dp curve with ``cost != 0.5``
    uses the cost-sensitive family centered at the cost value.

    t = 0 always yields the unconstrained thresholds; for each group the
    threshold moves monotonically as t grows, upward for group 1 and downward
    for group 0 (in the sense of shrinking that group's relevant rate).
    """

    measure: str
    p_a: tuple
    p_ya: tuple
    cost: float = 0.5

    def __post_init__(self):
        if self.measure not in ("dp", "eo", "pe", "oa"):
            raise ValueError(f"unknown measure {self.measure!r}")
        if len(self.p_a) != 2 or len(self.p_ya) != 2:
            raise ValueError("threshold curves require exactly two groups")

    # strata whose rates the measure compares: None = marginal, else label
    @property
    def strata(self) -> tuple:
        return {
            "dp": (None,),
            "eo": (1,),
            "pe": (0,),
            "oa": (1, 0),
        }[self.measure]

    def bracket(self) -> tuple:
        p0, p1 = self.p_a
        py0, py1 = self.p_ya
        if self.measure == "dp":
            c = self.cost
            lo = max(-c * p1, -(1.0 - c) * p0)
            hi = min((1.0 - c) * p1, c * p0)
            return lo, hi
        if self.measure == "eo":
            return -p0 * py0, p1 * py1
        if self.measure == "pe":
            return -p1 * (1.0 - py1), p0 * (1.0 - py0)
        return -p0 * min(py0, 1.0 - py0), p1 * min(py1, 1.0 - py1)

    def thresholds(self, t: float) -> tuple:
        """(q_0, q_1) at parameter t; raises outside the bracket."""
        lo, hi = self.bracket()
        span = max(hi - lo, 1.0)
        if t < lo - _EPS * span or t > hi + _EPS * span:
            raise ThresholdRangeError("threshold out of range")
        t = min(max(t, lo), hi)
        p0, p1 = self.p_a
        py0, py1 = self.p_ya
        if self.measure == "dp":
            c = self.cost
            q1 = c + t / p1
            q0 = c - t / p0
        elif self.measure == "eo":
            m1 = p1 * py1
            m0 = p0 * py0
            q1 = m1 / (2.0 * m1 - t)
            q0 = m0 / (2.0 * m0 + t)
        elif self.measure == "pe":
            v1 = p1 * (1.0 - py1)
            v0 = p0 * (1.0 - py0)
            q1 = (v1 + t) / (2.0 * v1 + t)
            q0 = (v0 - t) / (2.0 * v0 - t)
        else:
            q1 = self._zeta_oa(t, 1)
            q0 = self._zeta_oa(t, 0)
        return min(max(q0, 0.0), 1.0), min(max(q1, 0.0), 1.0)

    def _zeta_oa(self, t: float, a: int) -> float:
        p = self.p_a[a]
        py = self.p_ya[a]
        if abs(1.0 - 2.0 * py) < _EPS:
            return 0.5  # the family pins this group's cutoff (algebraic limit)
        u = py * (1.0 - py)
        sgn = 1.0 - 2.0 * a
        den = 2.0 * p * u + sgn * t
        if den <= 0.0:
            raise ThresholdRangeError("threshold out of range")
        return (p * u + sgn * py * t) / den

    def inverse(self, q: float, a: int) -> float:
        """Parameter t at which group a's threshold passes the score q."""
        p = self.p_a[a]
        py = self.p_ya[a]
        sgn = 1.0 if a == 1 else -1.0
        if self.measure == "dp":
            return sgn * p * (q - self.cost)
        if self.measure == "eo":
            if q <= 0.0:
                return math.nan
            return sgn * p * py * (2.0 * q - 1.0) / q
        if self.measure == "pe":
            if q >= 1.0:
                return math.nan
            return sgn * p * (1.0 - py) * (2.0 * q - 1.0) / (1.0 - q)
        if abs(q - py) < _EPS or abs(1.0 - 2.0 * py) < _EPS:
            return math.nan
        return sgn * p * py * (1.0 - py) * (2.0 * q - 1.0) / (q - py)

    def breakpoints(self, gs: GroupedScores) -> np.ndarray:
        """All t values, inside the bracket, where some indicator can flip."""
        lo, hi = self.bracket()
        pts = [lo, hi, 0.0]
        for a in (0, 1):
            seen = set()
            for y in self.strata:
                for s in np.unique(gs.stratum(a, y)):
                    seen.add(float(s))
            # accuracy depends on every score, not only the constrained strata
            for s in np.unique(gs.by_group[a]):
                seen.add(float(s))
            for s in seen:
                t = self.inverse(s, a)
                if not math.isnan(t) and lo <= t <= hi:
                    pts.append(t)
        return np.unique(np.asarray(pts, dtype=np.float64))

    def disparity(self, gs: GroupedScores, t: float, tie_prob=(0.0, 0.0)) -> float:
        """Plug-in disparity of the rule at parameter t."""
        q0, q1 = self.thresholds(t)
        return self.disparity_at(gs, (q0, q1), tie_prob)

    def disparity_at(self, gs: GroupedScores, thresholds, tie_prob=(0.0, 0.0)) -> float:
        q0, q1 = thresholds
        if self.measure == "oa":
            g1 = positive_rate(gs.stratum(1, 1), q1, tie_prob[1]) - positive_rate(
                gs.stratum(1, 0), q1, tie_prob[1]
            )
            g0 = positive_rate(gs.stratum(0, 1), q0, tie_prob[0]) - positive_rate(
                gs.stratum(0, 0), q0, tie_prob[0]
            )
            return g1 - g0
        y = self.strata[0]
        return positive_rate(gs.stratum(1, y), q1, tie_prob[1]) - positive_rate(
            gs.stratum(0, y), q0, tie_prob[0]
        )

    def tie_effect(self, gs: GroupedScores, thresholds, a: int) -> float:
        """d(disparity)/d(tie_prob[a]) at the given threshold pair."""
        q = thresholds[a]
        sgn = 1.0 if a == 1 else -1.0
        if self.measure == "oa":
            s1 = gs.stratum(a, 1)
            s0 = gs.stratum(a, 0)
            return sgn * (_tie_count(s1, q) / s1.size - _tie_count(s0, q) / s0.size)
        y = self.strata[0]
        s = gs.stratum(a, y)
        return sgn * _tie_count(s, q) / s.size


def curve_from_stats(measure: str, stats: GroupStats, cost: float = 0.5) -> ThresholdCurve:
    """Plug-in threshold curve for a two-group sample."""
    if stats.n_groups != 2:
        raise ValueError("binary measures require exactly two groups")
    _check_strata(measure, stats)
    return ThresholdCurve(
        measure=measure,
        p_a=(float(stats.p_hat_a[0]), float(stats.p_hat_a[1])),
        p_ya=(float(stats.p_hat_ya[0]), float(stats.p_hat_ya[1])),
        cost=cost,
    )


def _check_strata(measure: str, stats: GroupStats) -> None:
    need = {"dp": (), "eo": (1,), "pe": (0,), "oa": (0, 1)}[measure]
    for y in need:
        for a in range(stats.n_groups):
            if stats.n_ay[a, y] == 0:
                raise ValueError(f"empty stratum (group {a}, label {y})")


# ---------------------------------------------------------------------------
# Named disparity estimators
# ---------------------------------------------------------------------------


def ddp_hat(gs: GroupedScores, t: float) -> float:
    """Positive-rate gap at shift t; thresholds are clamped into [0, 1]."""
    curve = curve_from_stats("dp", gs.stats)
    p0, p1 = curve.p_a
    q1 = min(max(0.5 + t / (2.0 * p1), 0.0), 1.0)
    q0 = min(max(0.5 - t / (2.0 * p0), 0.0), 1.0)
    return curve.disparity_at(gs, (q0, q1))


def deo_hat(gs: GroupedScores, t: float) -> float:
    """True-positive-rate gap at shift t (raises outside the valid bracket)."""
    return curve_from_stats("eo", gs.stats).disparity(gs, t)


def dpe_hat(gs: GroupedScores, t: float) -> float:
    """False-positive-rate gap at shift t (raises outside the valid bracket)."""
    return curve_from_stats("pe", gs.stats).disparity(gs, t)


def doa_hat(gs: GroupedScores, t: float) -> float:
    """Per-group accuracy gap at shift t (raises outside the valid bracket)."""
    return curve_from_stats("oa", gs.stats).disparity(gs, t)


def disparity_bracket(gs: GroupedScores, measure: str, cost: float = 0.5) -> tuple:
    """Valid t range for the measure's empirical disparity function."""
    return curve_from_stats(measure, gs.stats, cost).bracket()


# dp uses the doubled parameterization q_a = 1/2 +- t / (2 p_a); expose the
# curve in that scale so ddp_hat and the dp solver agree with it exactly.
def dp_curve(stats: GroupStats) -> ThresholdCurve:
    """The dp family q_1 = 1/2 + t/(2 p_1), q_0 = 1/2 - t/(2 p_0)."""
    return _ScaledCurve(curve_from_stats("dp", stats, cost=0.5), 2.0)


@dataclass(frozen=True)
class _ScaledCurve:
    """Reparameterize an underlying curve by t -> t / scale."""

    base: ThresholdCurve
    scale: float

    @property
    def measure(self):
        return self.base.measure

    @property
    def p_a(self):
        return self.base.p_a

    @property
    def p_ya(self):
        return self.base.p_ya

    @property
    def strata(self):
        return self.base.strata

    def bracket(self):
        lo, hi = self.base.bracket()
        return lo * self.scale, hi * self.scale

    def thresholds(self, t):
        return self.base.thresholds(t / self.scale)

    def inverse(self, q, a):
        return self.base.inverse(q, a) * self.scale

    def breakpoints(self, gs):
        return self.base.breakpoints(gs) * self.scale

    def disparity(self, gs, t, tie_prob=(0.0, 0.0)):
        return self.base.disparity(gs, t / self.scale, tie_prob)

    def disparity_at(self, gs, thresholds, tie_prob=(0.0, 0.0)):
        return self.base.disparity_at(gs, thresholds, tie_prob)

    def tie_effect(self, gs, thresholds, a):
        return self.base.tie_effect(gs, thresholds, a)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


def evaluate(rule: ThresholdRule, gs: GroupedScores, cost: float = 0.5) -> EvalReport:
    """Expected metrics of a (possibly tie-randomized) rule on one sample."""
    stats = gs.stats
    k = stats.n_groups
    if rule.n_groups != k:
        raise ValueError("rule and sample disagree on the number of groups")
    pos_mass = np.zeros((k, 2))  # expected positives per (group, label)
    for a in range(k):
        q = float(rule.thresholds[a])
        tau = float(rule.tie_prob[a])
        for y in (0, 1):
            s = gs.stratum(a, y)
            if s.size:
                pos_mass[a, y] = positive_rate(s, q, tau) * s.size
    n_ay = stats.n_ay
    with np.errstate(invalid="ignore", divide="ignore"):
        tpr = np.where(n_ay[:, 1] > 0, pos_mass[:, 1] / n_ay[:, 1], np.nan)
        fpr = np.where(n_ay[:, 0] > 0, pos_mass[:, 0] / n_ay[:, 0], np.nan)
    rate_a = pos_mass.sum(axis=1) / stats.n_a

    fp = pos_mass[:, 0].sum()
    fn = (n_ay[:, 1] - pos_mass[:, 1]).sum()
    accuracy = 1.0 - (fp + fn) / stats.n
    cost_risk = (cost * fp + (1.0 - cost) * fn) / stats.n

    if k == 2:
        ddp = float(rate_a[1] - rate_a[0])
        deo = float(tpr[1] - tpr[0])
        dpe = float(fpr[1] - fpr[0])
        doa = float((tpr[1] - fpr[1]) - (tpr[0] - fpr[0]))
    else:
        overall = pos_mass.sum() / stats.n
        ddp = float(np.abs(rate_a - overall).sum())
        deo = dpe = doa = math.nan

    return EvalReport(
        accuracy=float(accuracy),
        cost_risk=float(cost_risk),
        cost=cost,
        ddp=ddp,
        deo=deo,
        dpe=dpe,
        doa=doa,
        positive_rate_a=rate_a,
        tpr_a=tpr,
        fpr_a=fpr,
    )
