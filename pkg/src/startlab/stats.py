"""The analysis chain: normality, multiple comparisons, two-sample tests,
variance tests, outlier screening, descriptives, Likert aggregation.

Test statistics and degrees of freedom are computed here from first
principles; only the tail probabilities come from scipy's distribution
functions. Descriptive summaries use the population convention (ddof=0),
which is what the questionnaire tables in this domain round from;
inferential tests use the unbiased sample variance (ddof=1) their
definitions require.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from scipy.stats import f as f_dist
from scipy.stats import norm as norm_dist
from scipy.stats import studentized_range
from scipy.stats import t as t_dist

from .errors import (
    DegenerateGroupWarning,
    LikertRangeError,
    TooFewGroupsError,
    TooFewSamplesError,
)

SIGNIFICANCE_TIERS = (0.10, 0.05, 0.001)


@dataclass(frozen=True)
class SampleSet:
    """A labelled sample of reaction times (milliseconds)."""

    label: str
    values: tuple[float, ...]
    participant: Optional[str] = None
    condition: Optional[str] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        for v in self.values:
            if not math.isfinite(v):
                raise ValueError(f"non-finite value in sample set {self.label!r}")

    @property
    def n(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class TestResult:
    method: str
    statistic: float
    p_value: float
    df: float | tuple[float, float] | None = None

    def __post_init__(self) -> None:
        if not (0.0 <= self.p_value <= 1.0):
            raise ValueError(f"p-value {self.p_value} outside [0, 1]")

    def significant(self, alpha: float = 0.05) -> bool:
        return self.p_value < alpha


@dataclass(frozen=True)
class PairComparison:
    label_a: str
    label_b: str
    mean_diff: float
    adjusted_p: float

    def significant(self, alpha: float = 0.05) -> bool:
        return self.adjusted_p < alpha


@dataclass(frozen=True)
class ComparisonMatrix:
    """Pairwise adjusted p-values; symmetric, diagonal empty."""

    method: str
    labels: tuple[str, ...]
    pairs: tuple[PairComparison, ...]

    def get(self, a: str, b: str) -> PairComparison:
        for pair in self.pairs:
            if {pair.label_a, pair.label_b} == {a, b}:
                return pair
        raise KeyError(f"no pair ({a!r}, {b!r})")

    def significant_pairs(self, alpha: float = 0.05) -> list[PairComparison]:
        return [p for p in self.pairs if p.significant(alpha)]


def descriptive(values: Sequence[float]) -> dict:
    """Mean, population sd, median and n of a sample."""
    vals = [float(v) for v in values]
    n = len(vals)
    if n == 0:
        raise TooFewSamplesError("descriptive statistics need at least one value")
    mean = sum(vals) / n
    sd = math.sqrt(sum((v - mean) ** 2 for v in vals) / n)
    ordered = sorted(vals)
    mid = n // 2
    median = ordered[mid] if n % 2 else (ordered[mid - 1] + ordered[mid]) / 2
    return {"mean": mean, "sd": sd, "median": median, "n": n}


class RunningStats:
    """Welford accumulator so live summaries match the batch descriptives."""

    def __init__(self) -> None:
        self.n = 0
        self._mean = 0.0
        self._m2 = 0.0

    def add(self, value: float) -> None:
        self.n += 1
        delta = value - self._mean
        self._mean += delta / self.n
        self._m2 += delta * (value - self._mean)

    @property
    def mean(self) -> float:
        return self._mean if self.n else 0.0

    @property
    def sd(self) -> float:
        return math.sqrt(self._m2 / self.n) if self.n else 0.0

    def as_dict(self) -> dict:
        return {"n": self.n, "mean": self.mean, "sd": self.sd}


def _sample_var(values: Sequence[float], mean: float) -> float:
    # unbiased (ddof=1); callers guarantee n >= 2
    return sum((v - mean) ** 2 for v in values) / (len(values) - 1)


# ---------------------------------------------------------------------------
# Shapiro-Wilk (Royston's AS R94 formulation)

_SW_C1 = (0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056)
_SW_C2 = (0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633)
_SW_SMALL_G = (-2.273, 0.459)
_SW_SMALL_MU = (0.5440, -0.39978, 0.025054, -0.6714e-3)
_SW_SMALL_SIG = (1.3822, -0.77857, 0.062767, -0.0020322)
_SW_LARGE_MU = (-1.5861, -0.31082, -0.083751, 0.0038915)
_SW_LARGE_SIG = (-0.4803, -0.082676, 0.0030302)


def _poly(coeffs: Sequence[float], x: float) -> float:
    r = 0.0
    for c in reversed(coeffs):
        r = r * x + c
    return r


def _shapiro_weights(n: int) -> list[float]:
    # expected normal order statistics via the Blom approximation, then the
    # polynomial end corrections of the standard algorithm
    m = [float(norm_dist.ppf((i - 0.375) / (n + 0.25))) for i in range(1, n + 1)]
    ssumm2 = sum(v * v for v in m)
    a = [0.0] * n
    if n == 3:
        a[0] = math.sqrt(0.5)
        a[2] = -a[0]
        return a
    rsn = 1.0 / math.sqrt(n)
    a_n = m[n - 1] / math.sqrt(ssumm2) + _poly(_SW_C1, rsn)
    if n > 5:
        a_n1 = m[n - 2] / math.sqrt(ssumm2) + _poly(_SW_C2, rsn)
        phi = (ssumm2 - 2 * m[n - 1] ** 2 - 2 * m[n - 2] ** 2) / (
            1 - 2 * a_n**2 - 2 * a_n1**2
        )
        a[n - 1], a[n - 2], a[0], a[1] = a_n, a_n1, -a_n, -a_n1
        lo = 2
    else:
        phi = (ssumm2 - 2 * m[n - 1] ** 2) / (1 - 2 * a_n**2)
        a[n - 1], a[0] = a_n, -a_n
        lo = 1
    sqrt_phi = math.sqrt(phi)
    for i in range(lo, n - lo):
        a[i] = m[i] / sqrt_phi
    return a


def shapiro_wilk(sample: SampleSet | Sequence[float]) -> TestResult:
    """Shapiro-Wilk normality test, 3 <= n <= 5000.

    W is the squared weighted sum of the order statistics over the total sum
    of squares; the p-value uses the exact n=3 form, the small-sample
    log-gamma transform for n <= 11 and the log-normal approximation above.
    """
    values = sample.values if isinstance(sample, SampleSet) else tuple(sample)
    n = len(values)
    if n < 3:
        raise TooFewSamplesError("Shapiro-Wilk needs n >= 3")
    if n > 5000:
        raise TooFewSamplesError("Shapiro-Wilk approximation is unreliable above n = 5000")
    x = sorted(float(v) for v in values)
    if x[0] == x[-1]:
        raise ValueError("all values identical; W undefined")
    weights = _shapiro_weights(n)
    mean = sum(x) / n
    ssq = sum((v - mean) ** 2 for v in x)
    w_num = sum(a * v for a, v in zip(weights, x))
    w = min(1.0, w_num * w_num / ssq)

    if n == 3:
        p = (6.0 / math.pi) * (math.asin(math.sqrt(w)) - math.asin(math.sqrt(0.75)))
        p = min(1.0, max(0.0, p))
        return TestResult(method="shapiro-wilk", statistic=w, p_value=p)
    if n <= 11:
        gamma = _poly(_SW_SMALL_G, n)
        z = -math.log(gamma - math.log1p(-w))
        mu = _poly(_SW_SMALL_MU, n)
        sigma = math.exp(_poly(_SW_SMALL_SIG, n))
    else:
        ln_n = math.log(n)
        z = math.log1p(-w)
        mu = _poly(_SW_LARGE_MU, ln_n)
        sigma = math.exp(_poly(_SW_LARGE_SIG, ln_n))
    p = float(norm_dist.sf((z - mu) / sigma))
    return TestResult(method="shapiro-wilk", statistic=w, p_value=min(1.0, max(0.0, p)))


# ---------------------------------------------------------------------------
# Two-sample tests


def _as_values(s: SampleSet | Sequence[float]) -> tuple[float, ...]:
    return s.values if isinstance(s, SampleSet) else tuple(float(v) for v in s)


def welch_t(a: SampleSet | Sequence[float], b: SampleSet | Sequence[float]) -> TestResult:
    """Welch's unequal-variance t-test, two-sided.

    Degrees of freedom follow Welch-Satterthwaite.
    """
    xa, xb = _as_values(a), _as_values(b)
    if len(xa) < 3 or len(xb) < 3:
        raise TooFewSamplesError("welch_t needs n >= 3 per group")
    na, nb = len(xa), len(xb)
    ma, mb = sum(xa) / na, sum(xb) / nb
    va, vb = _sample_var(xa, ma), _sample_var(xb, mb)
    se2 = va / na + vb / nb
    if se2 == 0:
        # identical constant groups: no evidence of any difference
        return TestResult(method="welch-t", statistic=0.0, p_value=1.0, df=float(na + nb - 2))
    t = (ma - mb) / math.sqrt(se2)
    df = se2**2 / ((va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1))
    p = 2.0 * float(t_dist.sf(abs(t), df))
    return TestResult(method="welch-t", statistic=t, p_value=min(1.0, p), df=df)


def f_test_var(a: SampleSet | Sequence[float], b: SampleSet | Sequence[float]) -> TestResult:
    """Two-sided variance-ratio F-test with F = larger / smaller variance."""
    xa, xb = _as_values(a), _as_values(b)
    if len(xa) < 3 or len(xb) < 3:
        raise TooFewSamplesError("f_test_var needs n >= 3 per group")
    na, nb = len(xa), len(xb)
    va = _sample_var(xa, sum(xa) / na)
    vb = _sample_var(xb, sum(xb) / nb)
    if va == vb:
        return TestResult(
            method="f-var", statistic=1.0, p_value=1.0, df=(float(na - 1), float(nb - 1))
        )
    if va >= vb:
        f, df1, df2 = (va / vb if vb > 0 else math.inf), na - 1, nb - 1
    else:
        f, df1, df2 = (vb / va if va > 0 else math.inf), nb - 1, na - 1
    p = 0.0 if math.isinf(f) else min(1.0, 2.0 * float(f_dist.sf(f, df1, df2)))
    return TestResult(
        method="f-var",
        statistic=float(f),
        p_value=p,
        df=(float(df1), float(df2)),
    )


# ---------------------------------------------------------------------------
# Multiple comparisons


def _check_groups(groups: Sequence[SampleSet | Sequence[float]]) -> list[SampleSet]:
    if len(groups) < 2:
        raise TooFewGroupsError("multiple comparisons need at least two groups")
    out = []
    for i, g in enumerate(groups):
        if isinstance(g, SampleSet):
            out.append(g)
        else:
            out.append(SampleSet(label=f"group{i}", values=tuple(g)))
    for g in out:
        if g.n < 2:
            raise TooFewSamplesError(f"group {g.label!r} has n < 2")
    return out


def tukey_kramer(groups: Sequence[SampleSet | Sequence[float]]) -> ComparisonMatrix:
    """Tukey's studentized-range comparison with the Kramer unequal-n term.

    q for pair (i, j) is |mean_i - mean_j| / sqrt(MSE/2 * (1/n_i + 1/n_j))
    with MSE the pooled within-group variance on N - k degrees of freedom;
    p-values come from the studentized range distribution for k groups.
    """
    gs = _check_groups(groups)
    k = len(gs)
    n_total = sum(g.n for g in gs)
    df = n_total - k
    if df < 1:
        raise TooFewSamplesError("no residual degrees of freedom for Tukey-Kramer")
    means = [sum(g.values) / g.n for g in gs]
    mse = sum((g.n - 1) * _sample_var(g.values, m) for g, m in zip(gs, means)) / df
    pairs = []
    for i in range(k):
        for j in range(i + 1, k):
            diff = means[i] - means[j]
            if mse == 0:
                p = 1.0 if diff == 0 else 0.0
            else:
                se = math.sqrt(mse / 2.0 * (1.0 / gs[i].n + 1.0 / gs[j].n))
                q = abs(diff) / se
                p = min(1.0, max(0.0, float(studentized_range.sf(q, k, df))))
            pairs.append(
                PairComparison(
                    label_a=gs[i].label, label_b=gs[j].label, mean_diff=diff, adjusted_p=p
                )
            )
    return ComparisonMatrix(
        method="tukey-kramer", labels=tuple(g.label for g in gs), pairs=tuple(pairs)
    )


def bonferroni_pairwise(groups: Sequence[SampleSet | Sequence[float]]) -> ComparisonMatrix:
    """Pairwise Welch tests with p multiplied by the k(k-1)/2 pair count."""
    gs = _check_groups(groups)
    k = len(gs)
    n_pairs = k * (k - 1) // 2
    pairs = []
    for i in range(k):
        for j in range(i + 1, k):
            res = welch_t(gs[i], gs[j])
            mean_diff = sum(gs[i].values) / gs[i].n - sum(gs[j].values) / gs[j].n
            pairs.append(
                PairComparison(
                    label_a=gs[i].label,
                    label_b=gs[j].label,
                    mean_diff=mean_diff,
                    adjusted_p=min(1.0, res.p_value * n_pairs),
                )
            )
    return ComparisonMatrix(
        method="bonferroni", labels=tuple(g.label for g in gs), pairs=tuple(pairs)
    )


# ---------------------------------------------------------------------------
# Outlier screening


@dataclass(frozen=True)
class ExcludedValue:
    participant: Optional[str]
    condition: Optional[str]
    index: int
    value: float
    z_score: float


@dataclass(frozen=True)
class OutlierReport:
    excluded: tuple[ExcludedValue, ...]
    counts_per_condition: dict

    @property
    def total_excluded(self) -> int:
        return len(self.excluded)


def exclude_outliers_3sigma(
    groups: Iterable[SampleSet], k_sigma: float = 3.0
) -> tuple[list[SampleSet], OutlierReport]:
    """Single-pass 3-sigma screen per group.

    A value is excluded when |value - group mean| > k_sigma * group sd, with
    mean and sd computed once over the full group (no re-iteration). Groups
    with zero spread exclude nothing and emit DegenerateGroupWarning.
    """
    kept_groups: list[SampleSet] = []
    excluded: list[ExcludedValue] = []
    counts: dict = {}
    for group in groups:
        if group.n < 2:
            raise TooFewSamplesError(f"group {group.label!r} needs n >= 2 for the screen")
        stats = descriptive(group.values)
        mean, sd = stats["mean"], stats["sd"]
        if sd == 0:
            warnings.warn(
                f"group {group.label!r} has zero spread; nothing excluded",
                DegenerateGroupWarning,
                stacklevel=2,
            )
            kept_groups.append(group)
            continue
        kept_values = []
        for idx, v in enumerate(group.values):
            if abs(v - mean) > k_sigma * sd:
                excluded.append(
                    ExcludedValue(
                        participant=group.participant,
                        condition=group.condition,
                        index=idx,
                        value=v,
                        z_score=(v - mean) / sd,
                    )
                )
                key = group.condition or group.label
                counts[key] = counts.get(key, 0) + 1
            else:
                kept_values.append(v)
        kept_groups.append(
            SampleSet(
                label=group.label,
                values=tuple(kept_values),
                participant=group.participant,
                condition=group.condition,
            )
        )
    return kept_groups, OutlierReport(excluded=tuple(excluded), counts_per_condition=counts)


# ---------------------------------------------------------------------------
# Likert aggregation

LIKERT_MIN, LIKERT_MAX = 1, 7


def likert_summary(responses: Sequence[int]) -> dict:
    """Median, mean and population sd of 1..7 Likert responses."""
    if not responses:
        raise TooFewSamplesError("likert summary needs at least one response")
    vals = []
    for r in responses:
        if not isinstance(r, int) or isinstance(r, bool):
            raise LikertRangeError(f"likert response must be an integer, got {r!r}")
        if not (LIKERT_MIN <= r <= LIKERT_MAX):
            raise LikertRangeError(f"likert response {r} outside [{LIKERT_MIN}, {LIKERT_MAX}]")
        vals.append(r)
    stats = descriptive(vals)
    return {"median": stats["median"], "mean": stats["mean"], "sd": stats["sd"], "n": stats["n"]}


@dataclass(frozen=True)
class TierFlags:
    """Significance at the reporting tiers: .10 (trend), .05, .001."""

    trend_10: bool
    alpha_05: bool
    alpha_001: bool

    @classmethod
    def from_p(cls, p: float) -> "TierFlags":
        return cls(trend_10=p < 0.10, alpha_05=p < 0.05, alpha_001=p < 0.001)

    def as_dict(self) -> dict:
        return {"p<.10": self.trend_10, "p<.05": self.alpha_05, "p<.001": self.alpha_001}
