"""Statistics for the study pipeline.

Two-way repeated-measures ANOVA (each within effect tested against its own
participant-interaction error term, partial eta squared per effect), Mauchly's
sphericity test per within effect (reported, not auto-corrected; a
Greenhouse-Geisser epsilon is available behind a flag), Bonferroni-corrected
pairwise paired t post-hocs, pooled/Welch unpaired t, and the Wilcoxon
signed-rank test with tie correction and a signed normal approximation
(no continuity correction).

Test statistics are computed from the textbook decompositions here;
only distribution tail functions come from scipy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps


class DesignError(ValueError):
    """Input does not form the balanced complete design the test requires."""


class DegenerateVarianceError(ValueError):
    pass


class TooFewPairsError(ValueError):
    pass


@dataclass(frozen=True)
class EffectResult:
    name: str
    ss: float
    df: int
    error_ss: float
    error_df: int
    f: float
    p: float
    partial_eta_sq: float


@dataclass(frozen=True)
class MauchlyResult:
    effect: str
    w: float
    chi2: float
    df: int
    p: float
    gg_epsilon: float


@dataclass(frozen=True)
class PairwiseResult:
    level_a: int
    level_b: int
    t: float
    df: int
    p_raw: float
    p_bonferroni: float


@dataclass(frozen=True)
class TTestResult:
    t: float
    df: float
    p: float


@dataclass(frozen=True)
class WilcoxonResult:
    w: float
    z: float
    p: float
    n: int


def _f_p(ss_effect: float, df_effect: int, ss_error: float, df_error: int,
         zero_tol: float):
    # an effect whose SS is numerical dust relative to the total is a true
    # zero (constant factor levels): F = 0, p = 1 rather than 0/0 noise
    if ss_effect <= zero_tol:
        return 0.0, 1.0
    ms_effect = ss_effect / df_effect
    ms_error = ss_error / df_error
    if ms_error <= 0.0:
        return math.inf, 0.0
    f = ms_effect / ms_error
    return f, float(sps.f.sf(f, df_effect, df_error))


def _partial_eta_sq(ss_effect: float, ss_error: float) -> float:
    total = ss_effect + ss_error
    return 0.0 if total <= 0 else ss_effect / total


def _orthonormal_contrasts(k: int) -> np.ndarray:
    """(k-1) x k orthonormal rows, all orthogonal to the constant vector."""
    c = np.zeros((k - 1, k))
    for i in range(1, k):
        c[i - 1, :i] = 1.0
        c[i - 1, i] = -i
        c[i - 1] /= math.sqrt(i * (i + 1))
    return c


def _mauchly(effect: str, transformed: np.ndarray) -> MauchlyResult:
    """Sphericity test on contrast-transformed per-subject scores (n x d)."""
    n, d = transformed.shape
    if d < 2:
        # a single contrast dimension is trivially spherical
        return MauchlyResult(effect, 1.0, 0.0, 0, 1.0, 1.0)
    cov = np.cov(transformed, rowvar=False, ddof=1)
    eigvals = np.linalg.eigvalsh(cov)
    eigvals = np.clip(eigvals, 0.0, None)
    trace = eigvals.sum()
    if trace <= 0:
        return MauchlyResult(effect, 1.0, 0.0, d * (d + 1) // 2 - 1, 1.0, 1.0)
    gg = float(trace ** 2 / (d * (eigvals ** 2).sum()))
    det = float(np.prod(eigvals))
    w = det / (trace / d) ** d
    df = d * (d + 1) // 2 - 1
    if w <= 0 or n - 1 <= d:
        # singular covariance: sphericity undecidable, report hard violation
        return MauchlyResult(effect, float(w), math.inf, df, 0.0, gg)
    factor = (n - 1) - (2 * d * d + d + 2) / (6.0 * d)
    chi2 = -factor * math.log(w)
    p = float(sps.chi2.sf(chi2, df))
    return MauchlyResult(effect, float(w), float(chi2), df, p, gg)


def _paired_t(x: np.ndarray, y: np.ndarray) -> tuple[float, int, float]:
    d = x - y
    n = len(d)
    if n < 2:
        raise DesignError("paired t needs at least 2 pairs")
    sd = d.std(ddof=1)
    if sd == 0.0:
        if d.mean() == 0.0:
            return 0.0, n - 1, 1.0
        return math.copysign(math.inf, d.mean()), n - 1, 0.0
    t = d.mean() / (sd / math.sqrt(n))
    p = 2.0 * float(sps.t.sf(abs(t), n - 1))
    return float(t), n - 1, p


@dataclass(frozen=True)
class RmAnovaResult:
    effects: dict
    mauchly: dict
    posthoc: dict
    ss_subjects: float
    ss_total: float

    def closure_residual(self) -> float:
        """Relative gap between total SS and the sum of all components."""
        parts = self.ss_subjects + sum(
            e.ss + e.error_ss for e in self.effects.values())
        if self.ss_total == 0:
            return abs(parts)
        return abs(self.ss_total - parts) / self.ss_total


def rm_anova_2way(data) -> RmAnovaResult:
    """Two-way within-subjects ANOVA on ``data[subject, level_a, level_b]``."""
    data = np.asarray(data, dtype=float)
    if data.ndim != 3:
        raise DesignError("data must be subjects x factorA x factorB")
    n, a, b = data.shape
    if n < 2:
        raise DesignError("need at least 2 participants")
    if a < 2 or b < 2:
        raise DesignError("each factor needs at least 2 levels")
    if not np.isfinite(data).all():
        raise DesignError("missing or non-finite cells in the design")

    grand = data.mean()
    subj_mean = data.mean(axis=(1, 2))
    a_mean = data.mean(axis=(0, 2))
    b_mean = data.mean(axis=(0, 1))
    ab_mean = data.mean(axis=0)
    sa_mean = data.mean(axis=2)
    sb_mean = data.mean(axis=1)

    ss_total = float(((data - grand) ** 2).sum())
    ss_subj = float(a * b * ((subj_mean - grand) ** 2).sum())
    ss_a = float(n * b * ((a_mean - grand) ** 2).sum())
    ss_b = float(n * a * ((b_mean - grand) ** 2).sum())
    ss_ab = float(n * ((ab_mean - a_mean[:, None] - b_mean[None, :] + grand) ** 2).sum())
    ss_axs = float(b * ((sa_mean - subj_mean[:, None] - a_mean[None, :] + grand) ** 2).sum())
    ss_bxs = float(a * ((sb_mean - subj_mean[:, None] - b_mean[None, :] + grand) ** 2).sum())
    ss_abxs = ss_total - (ss_subj + ss_a + ss_b + ss_ab + ss_axs + ss_bxs)

    defs = [
        ("A", ss_a, a - 1, ss_axs, (a - 1) * (n - 1)),
        ("B", ss_b, b - 1, ss_bxs, (b - 1) * (n - 1)),
        ("AxB", ss_ab, (a - 1) * (b - 1), ss_abxs, (a - 1) * (b - 1) * (n - 1)),
    ]
    zero_tol = ss_total * 1e-14
    effects = {}
    for name, ss, df, err_ss, err_df in defs:
        f, p = _f_p(ss, df, err_ss, err_df, zero_tol)
        eta = 0.0 if ss <= zero_tol else _partial_eta_sq(ss, err_ss)
        effects[name] = EffectResult(name, ss, df, err_ss, err_df, f, p, eta)

    ca = _orthonormal_contrasts(a)
    cb = _orthonormal_contrasts(b)
    flat = data.reshape(n, a * b)
    m_a = np.kron(ca, np.full((1, b), 1.0 / b))
    m_b = np.kron(np.full((1, a), 1.0 / a), cb)
    m_ab = np.kron(ca, cb)
    mauchly = {
        "A": _mauchly("A", flat @ m_a.T),
        "B": _mauchly("B", flat @ m_b.T),
        "AxB": _mauchly("AxB", flat @ m_ab.T),
    }

    posthoc = {
        "A": _pairwise_bonferroni(sa_mean),
        "B": _pairwise_bonferroni(sb_mean),
    }
    return RmAnovaResult(effects, mauchly, posthoc, ss_subj, ss_total)


def _pairwise_bonferroni(marginals: np.ndarray) -> list[PairwiseResult]:
    k = marginals.shape[1]
    n_comparisons = k * (k - 1) // 2
    out = []
    for i in range(k):
        for j in range(i + 1, k):
            t, df, p = _paired_t(marginals[:, i], marginals[:, j])
            out.append(PairwiseResult(i, j, t, df, p, min(1.0, p * n_comparisons)))
    return out


def unpaired_t(x, y, pooled: bool = True) -> TTestResult:
    """Two-sample two-tailed t test; pooled variance by default, Welch
    otherwise."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n1, n2 = len(x), len(y)
    if n1 < 2 or n2 < 2:
        raise DesignError("each sample needs at least 2 observations")
    v1, v2 = x.var(ddof=1), y.var(ddof=1)
    if pooled:
        sp2 = ((n1 - 1) * v1 + (n2 - 1) * v2) / (n1 + n2 - 2)
        if sp2 == 0.0:
            raise DegenerateVarianceError("both samples have zero variance")
        df = n1 + n2 - 2
        se = math.sqrt(sp2 * (1.0 / n1 + 1.0 / n2))
    else:
        se2 = v1 / n1 + v2 / n2
        if se2 == 0.0:
            raise DegenerateVarianceError("both samples have zero variance")
        df = se2 ** 2 / ((v1 / n1) ** 2 / (n1 - 1) + (v2 / n2) ** 2 / (n2 - 1))
        se = math.sqrt(se2)
    t = (x.mean() - y.mean()) / se
    p = 2.0 * float(sps.t.sf(abs(t), df))
    return TTestResult(float(t), float(df), p)


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """Ranks 1..n with ties sharing their average rank."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=float)
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + j) / 2.0 + 1.0
        ranks[order[i:j + 1]] = avg
        i = j + 1
    return ranks


def wilcoxon_signed_rank(x, y) -> WilcoxonResult:
    """Paired signed-rank test: zero differences dropped, tied ranks averaged,
    Z from the tie-corrected normal approximation (signed via the positive
    rank sum, so flipping the pairing negates Z)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise DesignError("paired samples must have equal length")
    d = x - y
    d = d[d != 0]
    n = len(d)
    if n < 5:
        raise TooFewPairsError(
            f"normal approximation needs >=5 non-zero differences, got {n}")
    ranks = _average_ranks(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    mean = n * (n + 1) / 4.0
    tie_term = 0.0
    _, counts = np.unique(np.abs(d), return_counts=True)
    for t in counts:
        if t > 1:
            tie_term += t ** 3 - t
    var = n * (n + 1) * (2 * n + 1) / 24.0 - tie_term / 48.0
    z = (w_plus - mean) / math.sqrt(var)
    p = 2.0 * float(sps.norm.sf(abs(z)))
    return WilcoxonResult(min(w_plus, w_minus), float(z), p, n)
