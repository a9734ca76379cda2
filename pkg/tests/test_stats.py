"""Statistics against independent references.

Three oracle routes, all independent of the implementation:
  * exact rational arithmetic (Fraction / sympy) for sums of squares, F,
    partial eta squared, and Mauchly's W via characteristic polynomials of
    projector-transformed covariance matrices;
  * statsmodels AnovaRM for the repeated-measures F and p values;
  * scipy.stats test functions for paired/unpaired t and Wilcoxon.
"""

from fractions import Fraction

import numpy as np
import pandas as pd
import pytest
import sympy
from scipy import stats as sps
from statsmodels.stats.anova import AnovaRM

from wristim import stats as ws

FIX1 = [[[31, 37], [33, 47], [22, 26]], [[53, 61], [59, 67], [47, 56]], [[23, 33], [30, 36], [10, 17]], [[34, 33], [41, 42], [26, 27]], [[40, 42], [38, 40], [23, 35]], [[38, 48], [37, 48], [32, 36]], [[65, 72], [67, 79], [61, 61]], [[60, 62], [61, 64], [45, 60]]]
FIX2 = [[[37, 42], [39, 44], [50, 50]], [[62, 77], [70, 73], [78, 77]], [[25, 41], [26, 35], [37, 46]], [[32, 39], [32, 37], [40, 53]], [[63, 66], [64, 66], [75, 72]], [[50, 51], [49, 55], [60, 59]], [[27, 37], [33, 34], [45, 45]], [[36, 43], [37, 41], [44, 48]], [[62, 68], [57, 56], [61, 67]], [[38, 42], [31, 43], [37, 43]], [[36, 45], [48, 42], [50, 49]], [[36, 46], [38, 47], [43, 60]]]
FIX3 = [[[49, 46], [43, 45], [52, 49], [36, 37]], [[22, 25], [21, 19], [28, 29], [16, 13]], [[25, 23], [22, 20], [20, 21], [23, 19]], [[62, 57], [61, 62], [67, 58], [47, 59]], [[49, 45], [48, 37], [45, 46], [32, 32]], [[49, 46], [46, 42], [47, 45], [40, 41]]]

FIXTURES = [FIX1, FIX2, FIX3]


def exact_ss(data):
    """Sums of squares computed entirely in exact rational arithmetic."""
    n, a, b = len(data), len(data[0]), len(data[0][0])
    cells = {(s, i, j): Fraction(data[s][i][j])
             for s in range(n) for i in range(a) for j in range(b)}
    grand = sum(cells.values()) / (n * a * b)
    subj = [sum(cells[s, i, j] for i in range(a) for j in range(b)) / (a * b)
            for s in range(n)]
    am = [sum(cells[s, i, j] for s in range(n) for j in range(b)) / (n * b)
          for i in range(a)]
    bm = [sum(cells[s, i, j] for s in range(n) for i in range(a)) / (n * a)
          for j in range(b)]
    abm = {(i, j): sum(cells[s, i, j] for s in range(n)) / n
           for i in range(a) for j in range(b)}
    sam = {(s, i): sum(cells[s, i, j] for j in range(b)) / b
           for s in range(n) for i in range(a)}
    sbm = {(s, j): sum(cells[s, i, j] for i in range(a)) / a
           for s in range(n) for j in range(b)}

    ss_total = sum((v - grand) ** 2 for v in cells.values())
    ss_subj = a * b * sum((v - grand) ** 2 for v in subj)
    ss_a = n * b * sum((v - grand) ** 2 for v in am)
    ss_b = n * a * sum((v - grand) ** 2 for v in bm)
    ss_ab = n * sum((abm[i, j] - am[i] - bm[j] + grand) ** 2
                    for i in range(a) for j in range(b))
    ss_axs = b * sum((sam[s, i] - subj[s] - am[i] + grand) ** 2
                     for s in range(n) for i in range(a))
    ss_bxs = a * sum((sbm[s, j] - subj[s] - bm[j] + grand) ** 2
                     for s in range(n) for j in range(b))
    ss_abxs = ss_total - ss_subj - ss_a - ss_b - ss_ab - ss_axs - ss_bxs
    return {
        "total": ss_total, "subj": ss_subj,
        "A": (ss_a, ss_axs), "B": (ss_b, ss_bxs), "AxB": (ss_ab, ss_abxs),
        "dims": (n, a, b),
    }


def exact_f(ss, effect):
    n, a, b = ss["dims"]
    dfs = {"A": (a - 1, (a - 1) * (n - 1)),
           "B": (b - 1, (b - 1) * (n - 1)),
           "AxB": ((a - 1) * (b - 1), (a - 1) * (b - 1) * (n - 1))}
    df_e, df_err = dfs[effect]
    ss_e, ss_err = ss[effect]
    return (ss_e / df_e) / (ss_err / df_err), df_e, df_err


def anova_rm_oracle(data):
    """statsmodels long-format RM-ANOVA."""
    n, a, b = np.asarray(data).shape
    rows = []
    for s in range(n):
        for i in range(a):
            for j in range(b):
                rows.append({"subject": s, "A": i, "B": j,
                             "y": data[s][i][j]})
    res = AnovaRM(pd.DataFrame(rows), "y", "subject",
                  within=["A", "B"]).fit()
    table = res.anova_table
    return {
        "A": (table.loc["A", "F Value"], table.loc["A", "Pr > F"]),
        "B": (table.loc["B", "F Value"], table.loc["B", "Pr > F"]),
        "AxB": (table.loc["A:B", "F Value"], table.loc["A:B", "Pr > F"]),
    }


def mauchly_oracle_exact(data, effect):
    """Mauchly's W via the characteristic polynomial of the projector-
    transformed covariance, all in exact rational arithmetic."""
    arr = np.asarray(data)
    n, a, b = arr.shape
    if effect == "A":
        scores = arr.mean(axis=2)  # n x a marginal means (exact: ints / b)
        scores = [[Fraction(int(arr[s, i, :].sum()), b) for i in range(a)]
                  for s in range(n)]
        k, d = a, a - 1
        proj = sympy.eye(a) - sympy.ones(a, a) / a
    elif effect == "AxB":
        scores = [[Fraction(int(arr[s, i, j])) for i in range(a)
                   for j in range(b)] for s in range(n)]
        k, d = a * b, (a - 1) * (b - 1)
        pa = sympy.eye(a) - sympy.ones(a, a) / a
        pb = sympy.eye(b) - sympy.ones(b, b) / b
        proj = sympy.Matrix(np.kron(np.array(pa.tolist(), dtype=object),
                                    np.array(pb.tolist(), dtype=object)))
    else:
        raise ValueError(effect)
    means = [sum(row[c] for row in scores) / n for c in range(k)]
    cov = sympy.zeros(k, k)
    for r in range(k):
        for c in range(k):
            cov[r, c] = sympy.Rational(sum(
                (row[r] - means[r]) * (row[c] - means[c]) for row in scores),
                n - 1)
    m = proj * cov * proj
    lam = sympy.symbols("lam")
    poly = m.charpoly(lam).all_coeffs()  # degree k, rank d
    # nonzero eigenvalue elementary symmetric functions live in the first
    # d+1 coefficients: det(T) = (-1)^d * coeff[d], trace(T) = -coeff[1]
    det_t = (-1) ** d * poly[d]
    trace_t = -poly[1]
    w = det_t / (trace_t / d) ** d
    df = d * (d + 1) // 2 - 1
    factor = (n - 1) - sympy.Rational(2 * d * d + d + 2, 6 * d)
    chi2 = -factor * sympy.log(w)
    return float(w), float(chi2.evalf(30)), df


@pytest.mark.parametrize("data", FIXTURES)
def test_rm_anova_f_and_p_match_statsmodels(data):
    result = ws.rm_anova_2way(data)
    oracle = anova_rm_oracle(data)
    for effect in ("A", "B", "AxB"):
        f_ref, p_ref = oracle[effect]
        assert result.effects[effect].f == pytest.approx(f_ref, abs=1e-6)
        assert result.effects[effect].p == pytest.approx(p_ref, abs=1e-6)


@pytest.mark.parametrize("data", FIXTURES)
def test_rm_anova_matches_exact_rational_decomposition(data):
    result = ws.rm_anova_2way(data)
    ss = exact_ss(data)
    assert result.ss_total == pytest.approx(float(ss["total"]), rel=1e-12)
    assert result.ss_subjects == pytest.approx(float(ss["subj"]), rel=1e-12)
    for effect in ("A", "B", "AxB"):
        ss_e, ss_err = ss[effect]
        eff = result.effects[effect]
        assert eff.ss == pytest.approx(float(ss_e), rel=1e-12)
        assert eff.error_ss == pytest.approx(float(ss_err), rel=1e-12)
        f_exact, df_e, df_err = exact_f(ss, effect)
        assert (eff.df, eff.error_df) == (df_e, df_err)
        assert eff.f == pytest.approx(float(f_exact), rel=1e-12)
        eta_exact = ss_e / (ss_e + ss_err)
        assert eff.partial_eta_sq == pytest.approx(float(eta_exact), rel=1e-12)


@pytest.mark.parametrize("data", FIXTURES)
def test_rm_anova_decomposition_closes(data):
    result = ws.rm_anova_2way(data)
    assert result.closure_residual() < 1e-9


@pytest.mark.parametrize("data", FIXTURES)
def test_mauchly_matches_exact_oracle(data):
    result = ws.rm_anova_2way(data)
    for effect in ("A", "AxB"):
        w_ref, chi2_ref, df_ref = mauchly_oracle_exact(data, effect)
        m = result.mauchly[effect]
        assert m.w == pytest.approx(w_ref, abs=1e-9)
        assert m.chi2 == pytest.approx(chi2_ref, abs=1e-6)
        assert m.df == df_ref
        assert m.p == pytest.approx(float(sps.chi2.sf(chi2_ref, df_ref)),
                                    abs=1e-6)
    # two-level factor: sphericity holds trivially
    assert result.mauchly["B"].w == 1.0
    assert result.mauchly["B"].p == 1.0


def test_mauchly_basis_invariance():
    # same W from a difference-coded basis orthonormalized by QR
    data = np.asarray(FIX2, dtype=float)
    n, a, b = data.shape
    marg = data.mean(axis=2)
    basis = np.zeros((a - 1, a))
    for i in range(a - 1):
        basis[i, 0] = 1.0
        basis[i, i + 1] = -1.0
    q, _ = np.linalg.qr(basis.T)
    t = q.T @ np.cov(marg, rowvar=False, ddof=1) @ q
    sign, logdet = np.linalg.slogdet(t)
    w_alt = sign * np.exp(logdet) / (np.trace(t) / (a - 1)) ** (a - 1)
    result = ws.rm_anova_2way(data)
    assert result.mauchly["A"].w == pytest.approx(w_alt, rel=1e-9)


def test_gg_epsilon_bounds_and_value():
    data = np.asarray(FIX1, dtype=float)
    result = ws.rm_anova_2way(data)
    for effect in ("A", "AxB"):
        m = result.mauchly[effect]
        d = 2
        assert 1.0 / d <= m.gg_epsilon <= 1.0 + 1e-12
    # eigenvalue-based reference for effect A
    marg = data.mean(axis=2)
    c = ws._orthonormal_contrasts(3)
    t = c @ np.cov(marg, rowvar=False, ddof=1) @ c.T
    lam = np.linalg.eigvalsh(t)
    eps_ref = lam.sum() ** 2 / (2 * (lam ** 2).sum())
    assert result.mauchly["A"].gg_epsilon == pytest.approx(eps_ref, rel=1e-9)


def test_constant_factor_yields_zero_f():
    rng = np.random.default_rng(5)
    base = rng.normal(50, 10, size=(10, 1, 2))
    data = np.repeat(base, 3, axis=1)  # constant across factor A
    result = ws.rm_anova_2way(data)
    assert result.effects["A"].f == 0.0
    assert result.effects["A"].p == 1.0


def test_identical_levels_bonferroni_p_is_one():
    rng = np.random.default_rng(6)
    data = rng.normal(50, 10, size=(9, 3, 2))
    data[:, 1, :] = data[:, 0, :]  # levels 0 and 1 identical
    result = ws.rm_anova_2way(data)
    pair = [p for p in result.posthoc["A"] if (p.level_a, p.level_b) == (0, 1)]
    assert pair[0].p_raw == 1.0
    assert pair[0].p_bonferroni == 1.0


@pytest.mark.parametrize("data", FIXTURES)
def test_bonferroni_matches_scipy_ttest_rel(data):
    arr = np.asarray(data, dtype=float)
    result = ws.rm_anova_2way(arr)
    marg = arr.mean(axis=2)
    k = marg.shape[1]
    m = k * (k - 1) // 2
    for pair in result.posthoc["A"]:
        ref = sps.ttest_rel(marg[:, pair.level_a], marg[:, pair.level_b])
        assert pair.t == pytest.approx(ref.statistic, abs=1e-9)
        assert pair.p_raw == pytest.approx(ref.pvalue, abs=1e-9)
        assert pair.p_bonferroni == pytest.approx(min(1.0, ref.pvalue * m),
                                                  abs=1e-9)
        assert pair.p_bonferroni >= pair.p_raw


def test_rm_anova_design_validation():
    with pytest.raises(ws.DesignError):
        ws.rm_anova_2way(np.zeros((1, 3, 2)))
    bad = np.zeros((4, 3, 2))
    bad[0, 0, 0] = np.nan
    with pytest.raises(ws.DesignError):
        ws.rm_anova_2way(bad)


T_FIXTURES = [
    ([31.2, 28.4, 33.9, 30.1, 29.5, 35.2], [27.0, 25.5, 30.2, 26.8, 28.1]),
    ([49.9, 52.1, 47.3, 55.0, 50.8, 48.4, 53.6, 51.2], [33.1, 35.9, 30.4, 37.2, 34.8, 31.6]),
    ([0.12, 0.18, 0.11, 0.2, 0.16], [0.13, 0.17, 0.12, 0.19, 0.18, 0.14]),
]


@pytest.mark.parametrize("x,y", T_FIXTURES)
def test_unpaired_t_matches_scipy(x, y):
    ours = ws.unpaired_t(x, y, pooled=True)
    ref = sps.ttest_ind(x, y, equal_var=True)
    assert ours.t == pytest.approx(ref.statistic, abs=1e-9)
    assert ours.p == pytest.approx(ref.pvalue, abs=1e-9)
    assert ours.df == len(x) + len(y) - 2

    welch = ws.unpaired_t(x, y, pooled=False)
    ref_w = sps.ttest_ind(x, y, equal_var=False)
    assert welch.t == pytest.approx(ref_w.statistic, abs=1e-9)
    assert welch.p == pytest.approx(ref_w.pvalue, abs=1e-9)


def test_unpaired_t_identical_samples():
    x = [1.0, 2.0, 3.0, 4.0]
    res = ws.unpaired_t(x, list(x))
    assert res.t == 0.0
    assert res.p == 1.0


def test_unpaired_t_degenerate_variance():
    with pytest.raises(ws.DegenerateVarianceError):
        ws.unpaired_t([2.0, 2.0, 2.0], [3.0, 3.0, 3.0])
    with pytest.raises(ws.DesignError):
        ws.unpaired_t([1.0], [2.0, 3.0])


W_FIXTURES = [
    ([5.4, 4.8, 6.1, 5.9, 4.2, 5.5, 6.3, 4.9], [3.5, 3.9, 4.1, 5.0, 3.1, 4.4, 5.2, 3.8]),
    ([12, 14, 11, 19, 17, 13, 16, 15, 18, 10], [13, 12, 14, 15, 18, 11, 13, 13, 12, 12]),
    ([2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0], [2.5, 2.0, 2.5, 3.0, 4.5, 4.0, 4.0]),
]


@pytest.mark.parametrize("x,y", W_FIXTURES)
def test_wilcoxon_matches_scipy(x, y):
    ours = ws.wilcoxon_signed_rank(x, y)
    ref = sps.wilcoxon(x, y, correction=False, method="approx")
    assert ours.w == pytest.approx(ref.statistic, abs=1e-9)
    assert abs(ours.z) == pytest.approx(abs(ref.zstatistic), abs=1e-6)
    assert ours.p == pytest.approx(ref.pvalue, abs=1e-6)


def test_wilcoxon_sign_antisymmetry():
    x, y = W_FIXTURES[0]
    a = ws.wilcoxon_signed_rank(x, y)
    b = ws.wilcoxon_signed_rank(y, x)
    assert a.z == pytest.approx(-b.z, abs=1e-12)
    assert a.p == pytest.approx(b.p, abs=1e-12)
    assert a.w == b.w


def test_wilcoxon_needs_nonzero_differences():
    with pytest.raises(ws.TooFewPairsError):
        ws.wilcoxon_signed_rank([1.0] * 8, [1.0] * 8)
    with pytest.raises(ws.TooFewPairsError):
        ws.wilcoxon_signed_rank([1, 2, 3, 4], [2, 3, 4, 5])


def test_wilcoxon_drops_zero_differences():
    x = [5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 3.3]
    y = [5.0, 5.0, 6.0, 7.0, 8.0, 9.0, 2.2]  # first pair ties at zero
    res = ws.wilcoxon_signed_rank(x, y)
    assert res.n == 6


def test_all_p_values_in_unit_interval():
    rng = np.random.default_rng(11)
    for _ in range(25):
        data = rng.normal(0, 1, size=(6, 3, 2))
        result = ws.rm_anova_2way(data)
        for eff in result.effects.values():
            assert 0.0 <= eff.p <= 1.0
        for m in result.mauchly.values():
            assert 0.0 <= m.p <= 1.0
        for pairs in result.posthoc.values():
            for pair in pairs:
                assert 0.0 <= pair.p_raw <= 1.0
                assert pair.p_raw <= pair.p_bonferroni <= 1.0
