"""Shared domain types: datasets, group statistics, constraints, rules, reports."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MEASURES = ("dp", "eo", "pe", "oa")


def _frozen_array(values, dtype) -> np.ndarray:
    arr = np.asarray(values, dtype=dtype)
    if arr.base is not None or arr is values:
        arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Dataset:
    """Feature rows with an integer protected-group code and a binary label.

    ``features`` is an (n, d) float matrix, ``group`` an (n,) integer array
    with values in {0, ..., n_groups - 1}, ``label`` an (n,) array in {0, 1}.
    All arrays are read-only after construction.
    """

    features: np.ndarray
    group: np.ndarray
    label: np.ndarray
    n_groups: int = 0

    def __post_init__(self):
        feats = _frozen_array(self.features, np.float64)
        grp = _frozen_array(self.group, np.int64)
        lab = _frozen_array(self.label, np.int64)
        if feats.ndim != 2:
            raise ValueError("features must be a 2-d matrix")
        n = feats.shape[0]
        if n < 1:
            raise ValueError("dataset is empty")
        if grp.shape != (n,) or lab.shape != (n,):
            raise ValueError("features, group and label must have equal row counts")
        if not np.all(np.isfinite(feats)):
            raise ValueError("features contain non-finite values")
        if grp.min() < 0:
            raise ValueError("group labels must be non-negative")
        n_groups = self.n_groups if self.n_groups else int(grp.max()) + 1
        if grp.max() >= n_groups:
            raise ValueError("group label out of range")
        if not np.all((lab == 0) | (lab == 1)):
            raise ValueError("labels must be 0 or 1")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "group", grp)
        object.__setattr__(self, "label", lab)
        object.__setattr__(self, "n_groups", n_groups)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class GroupStats:
    """Empirical counts and rates per protected group.

    ``n_ay[a, y]`` counts rows with group ``a`` and label ``y``;
    ``p_hat_a[a] = n_a / n`` and ``p_hat_ya[a] = n_{a,1} / n_a``.
    """

    n: int
    n_a: np.ndarray
    n_ay: np.ndarray
    p_hat_a: np.ndarray
    p_hat_ya: np.ndarray

    @property
    def n_groups(self) -> int:
        return self.n_a.shape[0]


def group_stats(data: Dataset) -> GroupStats:
    """Count group and (group, label) occurrences and derive the plug-in rates.

    Raises if any group in {0, ..., n_groups - 1} is absent: every
    downstream threshold formula divides by the group count.
    """
    return group_stats_arrays(data.group, data.label, data.n_groups)


def group_stats_arrays(group, label, n_groups: int = 0) -> GroupStats:
    """group_stats for raw arrays, without needing a feature matrix."""
    grp = np.asarray(group, dtype=np.int64)
    lab = np.asarray(label, dtype=np.int64)
    if grp.size == 0:
        raise ValueError("dataset is empty")
    if grp.shape != lab.shape or grp.ndim != 1:
        raise ValueError("group and label must be equal-length vectors")
    if not np.all((lab == 0) | (lab == 1)):
        raise ValueError("labels must be 0 or 1")
    k = n_groups if n_groups else int(grp.max()) + 1
    n_ay = np.zeros((k, 2), dtype=np.int64)
    np.add.at(n_ay, (grp, lab), 1)
    n_a = n_ay.sum(axis=1)
    if np.any(n_a == 0):
        missing = int(np.flatnonzero(n_a == 0)[0])
        raise ValueError(f"empty protected group {missing}")
    n = int(n_a.sum())
    return GroupStats(
        n=n,
        n_a=_frozen_array(n_a, np.int64),
        n_ay=_frozen_array(n_ay, np.int64),
        p_hat_a=_frozen_array(n_a / n, np.float64),
        p_hat_ya=_frozen_array(n_ay[:, 1] / n_a, np.float64),
    )


@dataclass(frozen=True)
class FairnessConstraint:
    """A fairness measure with a disparity tolerance.

    ``measure`` is one of "dp", "eo", "pe", "oa". ``cost`` is the
    false-positive cost of the cost-sensitive risk and is only meaningful
    together with the dp measure; 0.5 recovers the plain 0-1 risk.
    """

    measure: str
    delta: float
    cost: float = 0.5

    def __post_init__(self):
        if self.measure not in MEASURES:
            raise ValueError(f"unknown measure {self.measure!r}")
        if self.delta < 0:
            raise ValueError("delta must be >= 0")
        if not 0.0 <= self.cost <= 1.0:
            raise ValueError("cost must lie in [0, 1]")


@dataclass(frozen=True)
class ThresholdRule:
    """Per-group decision rule: predict 1 when score > thresholds[a].

    ``tie_prob[a]`` is the probability of predicting 1 when the score equals
    the threshold exactly; 0 gives the plain deterministic rule.
    """

    thresholds: np.ndarray
    tie_prob: np.ndarray = None

    def __post_init__(self):
        thr = _frozen_array(self.thresholds, np.float64)
        if thr.ndim != 1 or thr.size < 1:
            raise ValueError("thresholds must be a non-empty vector")
        if np.any(thr < 0.0) or np.any(thr > 1.0):
            raise ValueError("thresholds must lie in [0, 1]")
        if self.tie_prob is None:
            tie = np.zeros_like(thr)
        else:
            tie = _frozen_array(self.tie_prob, np.float64)
        if tie.shape != thr.shape or np.any(tie < 0.0) or np.any(tie > 1.0):
            raise ValueError("tie probabilities must lie in [0, 1]")
        tie.setflags(write=False)
        object.__setattr__(self, "thresholds", thr)
        object.__setattr__(self, "tie_prob", tie)

    @property
    def n_groups(self) -> int:
        return self.thresholds.shape[0]

    def predict_prob(self, scores, group) -> np.ndarray:
        """Probability of predicting 1 for each (score, group) pair."""
        s = np.asarray(scores, dtype=np.float64)
        g = np.asarray(group, dtype=np.int64)
        q = self.thresholds[g]
        p = (s > q).astype(np.float64)
        tie = s == q
        if np.any(tie):
            p = np.where(tie, self.tie_prob[g], p)
        return p


@dataclass(frozen=True)
class EvalReport:
    """Classifier evaluation on one sample: accuracy, risk and disparities.

    Rates are expectations under the tie-randomized rule. For more than two
    groups ``ddp`` switches to the summed absolute gap between each group's
    positive rate and the overall rate, and the stratified disparities are
    set to nan.
    """

    accuracy: float
    cost_risk: float
    cost: float
    ddp: float
    deo: float
    dpe: float
    doa: float
    positive_rate_a: np.ndarray
    tpr_a: np.ndarray
    fpr_a: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "positive_rate_a", _frozen_array(self.positive_rate_a, np.float64))
        object.__setattr__(self, "tpr_a", _frozen_array(self.tpr_a, np.float64))
        object.__setattr__(self, "fpr_a", _frozen_array(self.fpr_a, np.float64))
