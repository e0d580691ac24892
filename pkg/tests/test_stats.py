import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from evacsim.errors import InputError
from evacsim.stats import (
    DesignMatrix,
    RankDeficiencyError,
    build_design,
    fit_ols,
    format_p,
    regularized_incomplete_beta,
    sensitivity,
    series,
    series_to_csv,
    t_sf,
)
from evacsim.sweep import SweepRow


def make_rows(params_list, evacuated):
    rows = []
    for i, ((storm, rain, tod, threshold, w1, w2, w3), evac) in enumerate(zip(params_list, evacuated)):
        rows.append(SweepRow(
            combo_index=i, replicate=0, seed=i, storm=storm, rainfall=rain,
            time_of_day=tod, threshold=threshold, w_cdm=w1, w_hrf=w2, w_crf=w3,
            evacuated=evac, ticks=100, truncated=False,
        ))
    return rows


def varied_params(n, rng):
    thresholds = [0.7, 0.8, 0.9]
    rains = [0.25, 0.5, 1.0]
    out = []
    for i in range(n):
        w1 = rng.choice([0.1, 0.2, 0.3, 0.4])
        w2 = rng.choice([0.1, 0.2, 0.3])
        out.append((
            int(rng.choice([1, 2])),
            float(rng.choice(rains)),
            float(rng.choice([0.5, 1.0])),
            float(rng.choice(thresholds)),
            float(w1), float(w2), round(1.0 - w1 - w2, 10),
        ))
    return out


# --- fit_ols ---

def test_exact_line_fit():
    x = np.array([0.0, 1.0, 2.0])
    m = DesignMatrix(("intercept", "x"), np.column_stack([np.ones(3), x]), np.array([1.0, 3.0, 5.0]))
    rep = fit_ols(m)
    assert rep.by_name("x").coefficient == pytest.approx(2.0, abs=1e-12)
    assert rep.by_name("intercept").coefficient == pytest.approx(1.0, abs=1e-12)
    assert rep.r_squared == pytest.approx(1.0, abs=1e-12)


def test_zero_response_gives_zero_coefficients():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(40, 3))
    rep = fit_ols(DesignMatrix(("a", "b", "c"), x, np.zeros(40)))
    for p in rep.predictors:
        assert p.coefficient == pytest.approx(0.0, abs=1e-12)


def test_matches_normal_equations_oracle():
    rng = np.random.default_rng(17)
    for _ in range(30):
        x = rng.normal(size=(200, 5))
        y = rng.normal(size=200)
        rep = fit_ols(DesignMatrix(tuple(f"c{i}" for i in range(5)), x, y))
        oracle = np.linalg.solve(x.T @ x, x.T @ y)
        ours = np.array([p.coefficient for p in rep.predictors])
        assert np.abs(ours - oracle).max() < 1e-8


def test_residuals_orthogonal_to_predictors():
    rng = np.random.default_rng(5)
    x = np.column_stack([np.ones(120), rng.normal(size=(120, 4))])
    y = rng.normal(size=120) * 3 + x[:, 1]
    rep = fit_ols(DesignMatrix(tuple("abcde"), x, y))
    beta = np.array([p.coefficient for p in rep.predictors])
    resid = y - x @ beta
    for j in range(x.shape[1]):
        col = x[:, j]
        cos = abs(col @ resid) / (np.linalg.norm(col) * np.linalg.norm(resid))
        assert cos < 1e-8


def test_needs_more_rows_than_columns():
    with pytest.raises(InputError, match="observations"):
        fit_ols(DesignMatrix(("a", "b"), np.ones((2, 2)), np.ones(2)))


def test_rank_deficiency_drop_aliased_mode():
    rng = np.random.default_rng(11)
    a = rng.normal(size=60)
    x = np.column_stack([np.ones(60), a, 2.0 - a])
    y = a * 3 + rng.normal(size=60)
    with pytest.raises(RankDeficiencyError):
        fit_ols(DesignMatrix(("intercept", "a", "mirror"), x, y))
    rep = fit_ols(DesignMatrix(("intercept", "a", "mirror"), x, y), drop_aliased=True)
    assert rep.aliased == ("mirror",)
    assert rep.by_name("mirror").aliased
    assert math.isfinite(rep.by_name("a").coefficient)


# --- t_sf / incomplete beta ---

def test_t_sf_symmetry_point():
    assert t_sf(0.0, 7) == 0.5


def test_t_sf_cauchy_closed_form():
    assert t_sf(1.0, 1) == pytest.approx(0.25, abs=1e-12)


def test_t_sf_matches_quadrature_oracle():
    def t_pdf(x, df):
        c = math.exp(math.lgamma((df + 1) / 2) - math.lgamma(df / 2)) / math.sqrt(df * math.pi)
        return c * (1.0 + x * x / df) ** (-(df + 1) / 2)

    for t, df in [(2.5, 30), (0.7, 4), (4.2, 11), (1.3, 2), (8.0, 60)]:
        tail, _err = integrate.quad(t_pdf, t, np.inf, args=(df,))
        assert t_sf(t, df) == pytest.approx(tail, abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(
    t=st.floats(min_value=-60.0, max_value=60.0),
    df=st.integers(min_value=1, max_value=500),
)
def test_t_sf_complementarity(t, df):
    assert t_sf(t, df) + t_sf(-t, df) == pytest.approx(1.0, abs=1e-12)


def test_t_sf_monotone_in_statistic():
    prev = 0.5
    for t in [0.0, 0.3, 0.9, 1.7, 2.5, 4.0, 7.0, 20.0]:
        cur = t_sf(t, 12)
        assert cur <= prev + 1e-15
        prev = cur


def test_t_sf_rejects_bad_input():
    with pytest.raises(InputError):
        t_sf(float("nan"), 4)
    with pytest.raises(InputError):
        t_sf(float("inf"), 4)
    with pytest.raises(InputError):
        t_sf(1.0, 0)


def test_incomplete_beta_bounds():
    assert regularized_incomplete_beta(2.0, 3.0, 0.0) == 0.0
    assert regularized_incomplete_beta(2.0, 3.0, 1.0) == 1.0
    with pytest.raises(InputError):
        regularized_incomplete_beta(2.0, 3.0, 1.5)
    with pytest.raises(InputError):
        regularized_incomplete_beta(-1.0, 3.0, 0.5)


def test_format_p_floor():
    assert format_p(1e-20) == "<2e-16"
    assert format_p(0.5) == "0.5"


# --- sensitivity ---

def test_intercept_full_on_exact_sum_grid_is_diagnosed():
    import random
    rng = random.Random(0)
    params = varied_params(300, rng)
    rows = make_rows(params, [rng.randrange(570) for _ in params])
    with pytest.raises(RankDeficiencyError) as exc_info:
        sensitivity(rows, mode="intercept-full")
    assert "w_crf" in str(exc_info.value)
    assert "w_cdm" in str(exc_info.value)  # named in the dependency detail


def test_drop_one_weight_gives_finite_inference():
    import random
    rng = random.Random(1)
    params = varied_params(400, rng)
    rows = make_rows(params, [rng.randrange(570) for _ in params])
    rep = sensitivity(rows, mode="drop-one-weight")
    assert len(rep.predictors) == 7  # intercept + six retained
    for p in rep.predictors:
        assert math.isfinite(p.p_value)
        assert 0.0 <= p.p_value <= 1.0


def test_recovers_synthetic_ground_truth():
    import random
    rng = random.Random(2)
    params = varied_params(500, rng)
    evac = [int(round(100.0 * p[0] + rng.gauss(0, 3))) for p in params]
    rows = make_rows(params, evac)
    rep = sensitivity(rows, mode="drop-one-weight")
    storm = rep.by_name("storm")
    assert storm.coefficient == pytest.approx(100.0, abs=1.0)
    assert storm.p_value < 0.01


def test_no_intercept_mode_keeps_all_seven():
    import random
    rng = random.Random(3)
    params = varied_params(300, rng)
    rows = make_rows(params, [rng.randrange(570) for _ in params])
    rep = sensitivity(rows, mode="no-intercept")
    assert tuple(p.name for p in rep.predictors) == (
        "storm", "rainfall", "time_of_day", "threshold", "w_cdm", "w_hrf", "w_crf")


def test_build_design_rejects_unknown_mode_and_empty():
    with pytest.raises(InputError, match="mode"):
        build_design([SweepRow(0, 0, 0, 1, 0.25, 0.5, 0.7, 0.1, 0.1, 0.8, 5, 10, False)], "magic")
    with pytest.raises(InputError, match="no sweep rows"):
        build_design([], "no-intercept")


# --- series ---

def test_series_means_match_independent_grouping():
    import random
    rng = random.Random(4)
    params = [(2, 0.5, 1.0, 0.9, w1, w2, round(1.0 - w1 - w2, 10))
              for w1 in (0.1, 0.2, 0.3) for w2 in (0.1, 0.2, 0.3)]
    params = params * 4  # replicates
    rows = make_rows(params, [rng.randrange(570) for _ in params])
    points = series(rows, storm=2, rainfall=0.5, time_of_day=1.0, threshold=0.9)
    # independent batch recomputation
    for p in points:
        vals = [r.evacuated for r in rows if getattr(r, p.series) == p.x]
        assert p.n == len(vals)
        assert p.mean_evacuated == pytest.approx(sum(vals) / len(vals))
    kinds = {p.series for p in points}
    assert kinds == {"w_cdm", "w_hrf", "w_crf"}


def test_series_single_combo_gives_single_points():
    rows = make_rows([(1, 0.25, 0.5, 0.7, 0.2, 0.2, 0.6)], [42])
    points = series(rows, storm=1, rainfall=0.25, time_of_day=0.5, threshold=0.7)
    assert len(points) == 3
    assert all(p.n == 1 and p.mean_evacuated == 42 for p in points)
    csv_text = series_to_csv(points)
    assert csv_text.splitlines()[0] == "x,series,mean_evacuated,n"


def test_series_empty_slice_is_error():
    rows = make_rows([(1, 0.25, 0.5, 0.7, 0.2, 0.2, 0.6)], [42])
    with pytest.raises(InputError, match="no rows match"):
        series(rows, storm=2, rainfall=1.0, time_of_day=1.0, threshold=0.9)
