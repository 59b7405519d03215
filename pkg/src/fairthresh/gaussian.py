"""Exact population computations for the isotropic Gaussian mixture model.

Features are drawn per (group, label) stratum from N(mu[a, y], sigma^2 I).
Because the covariances are equal and isotropic, the posterior positive
probability within a group is a logistic function of a one-dimensional linear
score whose stratum laws are Gaussian with a shared variance, so every tail
probability needed by the threshold theory reduces to a normal CDF; no
d-dimensional integration is performed.  Normal CDFs use scipy.special.ndtr
(erfc based, absolute error below 1e-15), with the complementary form for
upper tails.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr

from .core import ThresholdRule
from .metrics import ThresholdCurve, _ScaledCurve


def _logit(q: float) -> float:
    return math.log(q) - math.log1p(-q)


def _frozen(arr, dtype=np.float64):
    out = np.array(arr, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class GaussianPopulation:
    """Generative parameters: group weights, positive rates, stratum means."""

    p_a: np.ndarray
    p_ya: np.ndarray
    mu: np.ndarray  # shape (n_groups, 2, dim); mu[a, y]
    sigma: float

    def __post_init__(self):
        p_a = _frozen(self.p_a)
        p_ya = _frozen(self.p_ya)
        mu = _frozen(self.mu)
        if p_a.ndim != 1 or p_a.size < 1:
            raise ValueError("p_a must be a non-empty vector")
        if not math.isclose(float(p_a.sum()), 1.0, abs_tol=1e-9) or np.any(p_a <= 0):
            raise ValueError("group probabilities must be positive and sum to 1")
        if p_ya.shape != p_a.shape or np.any(p_ya <= 0) or np.any(p_ya >= 1):
            raise ValueError("positive rates must lie strictly in (0, 1)")
        if mu.ndim != 3 or mu.shape[0] != p_a.size or mu.shape[1] != 2:
            raise ValueError("mu must have shape (n_groups, 2, dim)")
        if not np.all(np.isfinite(mu)):
            raise ValueError("means must be finite")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        object.__setattr__(self, "p_a", p_a)
        object.__setattr__(self, "p_ya", p_ya)
        object.__setattr__(self, "mu", mu)

    @property
    def n_groups(self) -> int:
        return self.p_a.size

    @property
    def dim(self) -> int:
        return self.mu.shape[2]

    def score_law(self, a: int) -> "ScoreLaw":
        """Law of the log-odds score within group a, per label stratum."""
        mu1 = self.mu[a, 1]
        mu0 = self.mu[a, 0]
        var = self.sigma**2
        w = (mu1 - mu0) / var
        prior = math.log(self.p_ya[a]) - math.log1p(-self.p_ya[a])
        b = prior + (float(mu0 @ mu0) - float(mu1 @ mu1)) / (2.0 * var)
        gap = float((mu1 - mu0) @ (mu1 - mu0)) / var  # Mahalanobis-squared gap
        return ScoreLaw(
            mean=(prior - 0.5 * gap, prior + 0.5 * gap),
            sd=math.sqrt(gap),
            weight=_frozen(w),
            bias=b,
        )


@dataclass(frozen=True)
class ScoreLaw:
    """Gaussian law of the linear log-odds score weight @ x + bias.

    ``mean[y]`` is the stratum mean under label y; the standard deviation is
    shared across strata.  sd == 0 marks the degenerate point-mass case of
    coincident stratum means.
    """

    mean: tuple
    sd: float
    weight: np.ndarray
    bias: float


def eta(pop: GaussianPopulation, x, a: int):
    """Posterior positive probability P(Y=1 | A=a, X=x), in log space."""
    xs = np.asarray(x, dtype=np.float64)
    single = xs.ndim == 1
    if single:
        xs = xs[None, :]
    if xs.shape[1] != pop.dim:
        raise ValueError("dimension mismatch")
    law = pop.score_law(a)
    z = xs @ law.weight + law.bias
    out = 1.0 / (1.0 + np.exp(-z))
    return float(out[0]) if single else out


def tail_rate(pop: GaussianPopulation, a: int, q: float, stratum: Optional[int] = None) -> float:
    """P(eta_a(X) > q) under the marginal (stratum=None) or a label stratum."""
    if q <= 0.0:
        return 1.0
    if q >= 1.0:
        return 0.0
    if stratum is None:
        py = float(pop.p_ya[a])
        return py * tail_rate(pop, a, q, 1) + (1.0 - py) * tail_rate(pop, a, q, 0)
    law = pop.score_law(a)
    if law.sd == 0.0:
        return 1.0 if float(pop.p_ya[a]) > q else 0.0
    z = (_logit(q) - law.mean[stratum]) / law.sd
    return float(ndtr(-z))


def tail_atom(pop: GaussianPopulation, a: int, q: float, stratum: Optional[int] = None) -> float:
    """P(eta_a(X) = q); zero except at the degenerate point-mass law."""
    law = pop.score_law(a)
    if law.sd > 0.0 or not 0.0 < q < 1.0:
        return 0.0
    return 1.0 if math.isclose(float(pop.p_ya[a]), q, rel_tol=0.0, abs_tol=1e-15) else 0.0


# ---------------------------------------------------------------------------
# Disparity of the unconstrained rule, and the optimal shift per tolerance
# ---------------------------------------------------------------------------


def _check_binary(pop: GaussianPopulation) -> None:
    if pop.n_groups != 2:
        raise ValueError("binary measures require exactly two groups")


def population_curve(pop: GaussianPopulation, measure: str, cost: float = 0.5):
    """Threshold family with the exact population rates plugged in."""
    _check_binary(pop)
    base = ThresholdCurve(
        measure=measure,
        p_a=(float(pop.p_a[0]), float(pop.p_a[1])),
        p_ya=(float(pop.p_ya[0]), float(pop.p_ya[1])),
        cost=cost,
    )
    if measure == "dp" and cost == 0.5:
        # the plain-risk dp family is conventionally written 1/2 +- t/(2 p_a)
        return _ScaledCurve(base, 2.0)
    return base


def population_disparity(pop: GaussianPopulation, curve, t: float) -> float:
    """Exact disparity of the curve's rule at shift t."""
    q0, q1 = curve.thresholds(t)
    if curve.measure == "oa":
        return (
            tail_rate(pop, 1, q1, 1)
            - tail_rate(pop, 1, q1, 0)
            - tail_rate(pop, 0, q0, 1)
            + tail_rate(pop, 0, q0, 0)
        )
    y = curve.strata[0]
    return tail_rate(pop, 1, q1, y) - tail_rate(pop, 0, q0, y)


def unconstrained_disparity(pop: GaussianPopulation, measure: str, cost: float = 0.5) -> float:
    """Disparity of the accuracy-optimal rule (cutoffs at 1/2, or at cost)."""
    curve = population_curve(pop, measure, cost)
    return population_disparity(pop, curve, 0.0)


def d_star(pop: GaussianPopulation) -> float:
    return unconstrained_disparity(pop, "dp")


def e_star(pop: GaussianPopulation) -> float:
    return unconstrained_disparity(pop, "eo")


def p_star(pop: GaussianPopulation) -> float:
    return unconstrained_disparity(pop, "pe")


def o_star(pop: GaussianPopulation) -> float:
    return unconstrained_disparity(pop, "oa")


def t_star(
    pop: GaussianPopulation,
    measure: str,
    delta: float,
    cost: float = 0.5,
    tol: float = 1e-13,
) -> float:
    """Shift at which the population disparity equals the signed tolerance.

    Returns 0 when the unconstrained rule already satisfies the tolerance.
    The disparity is continuous and strictly decreasing for non-degenerate
    score laws, so the crossing is bisected to absolute tolerance ``tol``.
    """
    if delta < 0:
        raise ValueError("delta must be >= 0")
    curve = population_curve(pop, measure, cost)
    star = population_disparity(pop, curve, 0.0)
    if abs(star) <= delta:
        return 0.0
    target = delta if star > 0 else -delta
    lo, hi = curve.bracket()
    a, b = (0.0, hi) if star > 0 else (lo, 0.0)
    fa = population_disparity(pop, curve, a) - target
    fb = population_disparity(pop, curve, b) - target
    if fa * fb > 0:
        raise ValueError("bracket failure in shift search")
    for _ in range(200):
        mid = 0.5 * (a + b)
        fm = population_disparity(pop, curve, mid) - target
        if fa * fm > 0:
            a, fa = mid, fm
        else:
            b, fb = mid, fm
        if b - a <= tol:
            break
    return 0.5 * (a + b)


def oracle_rule(
    pop: GaussianPopulation, measure: str, delta: float, cost: float = 0.5
) -> tuple:
    """(shift, ThresholdRule) of the tolerance-optimal population rule."""
    curve = population_curve(pop, measure, cost)
    t = t_star(pop, measure, delta, cost)
    q0, q1 = curve.thresholds(t)
    return t, ThresholdRule(np.array([q0, q1]))


def tau_star(
    tail1: float,
    atom1: float,
    tail0: float,
    atom0: float,
    sign: float,
    delta: float,
) -> tuple:
    """Boundary randomization probabilities (tau_1, tau_0) at the optimal shift.

    ``tail_a`` is the strict upper-tail rate of group a at its cutoff and
    ``atom_a`` the probability mass sitting exactly on the cutoff.  The case
    split follows which atoms are zero; with both atoms present tau_1 is
    pinned to 0 and tau_0 carries the correction.  The resulting randomized
    rule satisfies (tail1 + tau1*atom1) - (tail0 + tau0*atom0) = sign*delta.
    """
    if sign not in (-1.0, 1.0):
        raise ValueError("sign must be -1 or +1")
    target = sign * delta
    if atom1 == 0.0 and atom0 == 0.0:
        if abs(tail1 - tail0 - target) > 1e-9:
            raise ValueError("inconsistent randomization inputs")
        return 0.0, 0.0
    if atom1 > 0.0 and atom0 == 0.0:
        tau1 = (tail0 + target - tail1) / atom1
        tau0 = 0.0
    else:  # atom0 > 0; tau_1 = 0 whether or not group 1 has an atom
        tau1 = 0.0
        tau0 = (tail1 - tail0 - target) / atom0
    if not (-1e-9 <= tau1 <= 1.0 + 1e-9 and -1e-9 <= tau0 <= 1.0 + 1e-9):
        raise ValueError("inconsistent randomization inputs")
    return min(max(tau1, 0.0), 1.0), min(max(tau0, 0.0), 1.0)


# ---------------------------------------------------------------------------
# Exact performance of a rule
# ---------------------------------------------------------------------------


def fair_accuracy(pop: GaussianPopulation, rule: ThresholdRule) -> float:
    """Exact accuracy of a (possibly tie-randomized) group-thresholding rule."""
    if rule.n_groups != pop.n_groups:
        raise ValueError("rule and population disagree on the number of groups")
    acc = 0.0
    for a in range(pop.n_groups):
        q = float(rule.thresholds[a])
        tau = float(rule.tie_prob[a])
        py = float(pop.p_ya[a])
        pos1 = tail_rate(pop, a, q, 1) + tau * tail_atom(pop, a, q, 1)
        pos0 = tail_rate(pop, a, q, 0) + tau * tail_atom(pop, a, q, 0)
        acc += float(pop.p_a[a]) * (py * pos1 + (1.0 - py) * (1.0 - pos0))
    return acc


def cost_risk(pop: GaussianPopulation, rule: ThresholdRule, cost: float) -> float:
    """Exact cost-sensitive risk: cost*P(fp) + (1-cost)*P(fn)."""
    if rule.n_groups != pop.n_groups:
        raise ValueError("rule and population disagree on the number of groups")
    risk = 0.0
    for a in range(pop.n_groups):
        q = float(rule.thresholds[a])
        tau = float(rule.tie_prob[a])
        py = float(pop.p_ya[a])
        pos1 = tail_rate(pop, a, q, 1) + tau * tail_atom(pop, a, q, 1)
        pos0 = tail_rate(pop, a, q, 0) + tau * tail_atom(pop, a, q, 0)
        risk += float(pop.p_a[a]) * (
            cost * (1.0 - py) * pos0 + (1.0 - cost) * py * (1.0 - pos1)
        )
    return risk


def rule_positive_rates(pop: GaussianPopulation, rule: ThresholdRule) -> np.ndarray:
    """Exact per-group positive rates of a rule."""
    out = np.empty(pop.n_groups)
    for a in range(pop.n_groups):
        q = float(rule.thresholds[a])
        tau = float(rule.tie_prob[a])
        out[a] = tail_rate(pop, a, q) + tau * tail_atom(pop, a, q)
    return out


# ---------------------------------------------------------------------------
# Multi-class perfect demographic parity
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MulticlassOracle:
    """Zero-sum shifts equalizing every group's positive rate exactly."""

    t_a: np.ndarray
    common_rate: float
    rule: ThresholdRule
    accuracy: float
    sum_residual: float


def _shift_for_rate(pop: GaussianPopulation, a: int, s: float) -> float:
    """The shift t_a at which group a's marginal positive rate equals s."""
    f = lambda q: tail_rate(pop, a, q) - s
    q = brentq(f, 1e-15, 1.0 - 1e-15, xtol=1e-15)
    return 2.0 * float(pop.p_a[a]) * (q - 0.5)


def oracle_multiclass_dp(pop: GaussianPopulation, tol: float = 1e-12) -> MulticlassOracle:
    """Solve sum_a t_a = 0 with all marginal rates equal, by bisection on the rate.

    Requires a non-degenerate score law in every group (the rate-to-shift map
    must be continuous and strictly decreasing).
    """
    for a in range(pop.n_groups):
        if pop.score_law(a).sd == 0.0:
            raise ValueError(f"degenerate score law in group {a}")

    def total(s: float) -> float:
        return sum(_shift_for_rate(pop, a, s) for a in range(pop.n_groups))

    s_star = brentq(total, 1e-12, 1.0 - 1e-12, xtol=tol)
    t_a = np.array([_shift_for_rate(pop, a, s_star) for a in range(pop.n_groups)])
    thresholds = np.clip(0.5 + t_a / (2.0 * pop.p_a), 0.0, 1.0)
    rule = ThresholdRule(thresholds)
    return MulticlassOracle(
        t_a=t_a,
        common_rate=float(s_star),
        rule=rule,
        accuracy=fair_accuracy(pop, rule),
        sum_residual=float(t_a.sum()),
    )


# ---------------------------------------------------------------------------
# Plain-text serialization
# ---------------------------------------------------------------------------
#
# Schema: a JSON object with keys
#   "p_a"   : list of group probabilities
#   "p_ya"  : list of per-group positive rates
#   "mu"    : nested list, mu[a][y][j] stratum means
#   "sigma" : shared isotropic standard deviation
# Floats round-trip exactly (shortest-repr encoding).


def population_to_json(pop: GaussianPopulation) -> str:
    return json.dumps(
        {
            "p_a": pop.p_a.tolist(),
            "p_ya": pop.p_ya.tolist(),
            "mu": pop.mu.tolist(),
            "sigma": pop.sigma,
        },
        indent=2,
        sort_keys=True,
    )


def population_from_json(text: str) -> GaussianPopulation:
    obj = json.loads(text)
    return GaussianPopulation(
        p_a=np.asarray(obj["p_a"], dtype=np.float64),
        p_ya=np.asarray(obj["p_ya"], dtype=np.float64),
        mu=np.asarray(obj["mu"], dtype=np.float64),
        sigma=float(obj["sigma"]),
    )


def save_population(pop: GaussianPopulation, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(population_to_json(pop) + "\n")


def load_population(path) -> GaussianPopulation:
    with open(path, "r", encoding="utf-8") as fh:
        return population_from_json(fh.read())
