"""Sensitivity analysis: ordinary least squares with exact t-based inference.

The solver uses a QR decomposition (never the normal equations), detects
aliased predictor columns before fitting, and computes two-sided p-values
from the t-distribution through a continued-fraction evaluation of the
regularized incomplete beta function, accurate to ~1e-13 absolute.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .sweep import SweepRow

__all__ = [
    "DesignMatrix",
    "PredictorStats",
    "RegressionReport",
    "RankDeficiencyError",
    "PREDICTOR_ORDER",
    "SENSITIVITY_MODES",
    "fit_ols",
    "t_sf",
    "regularized_incomplete_beta",
    "sensitivity",
    "build_design",
    "series",
    "series_to_csv",
    "report_to_text",
    "report_to_csv",
    "P_VALUE_FLOOR",
]

PREDICTOR_ORDER = ("storm", "rainfall", "time_of_day", "threshold", "w_cdm", "w_hrf", "w_crf")
SENSITIVITY_MODES = ("drop-one-weight", "no-intercept", "intercept-full")

# Values below this print as "<2e-16", mirroring the usual R summary floor.
P_VALUE_FLOOR = 2.2e-16

ALIAS_REL_TOL = 1e-8


class RankDeficiencyError(InputError):
    def __init__(self, aliased: list[str], detail: str):
        self.aliased = aliased
        super().__init__(
            f"design matrix is rank deficient; aliased columns: {', '.join(aliased)} ({detail}). "
            "Refit with drop_aliased=True or choose a different mode to proceed."
        )


@dataclass(frozen=True)
class DesignMatrix:
    names: tuple[str, ...]
    x: np.ndarray  # (n, p)
    y: np.ndarray  # (n,)

    def __post_init__(self) -> None:
        if self.x.ndim != 2 or self.y.ndim != 1:
            raise InputError("design requires a 2-D X and 1-D y")
        if self.x.shape[0] != self.y.shape[0]:
            raise InputError("X and y row counts differ")
        if self.x.shape[1] != len(self.names):
            raise InputError("column names do not match X width")
        if not np.isfinite(self.x).all() or not np.isfinite(self.y).all():
            raise InputError("design contains non-finite values")


@dataclass(frozen=True)
class PredictorStats:
    name: str
    coefficient: float
    std_error: float
    t_statistic: float
    p_value: float
    aliased: bool = False


@dataclass(frozen=True)
class RegressionReport:
    predictors: tuple[PredictorStats, ...]
    df_resid: int
    r_squared: float
    condition_number: float
    aliased: tuple[str, ...]
    n_obs: int

    def by_name(self, name: str) -> PredictorStats:
        for p in self.predictors:
            if p.name == name:
                return p
        raise KeyError(name)


def _find_aliased(x: np.ndarray, names: tuple[str, ...]) -> tuple[list[int], list[str], dict[str, str]]:
    """Greedy left-to-right Gram-Schmidt: a column is aliased when the part
    orthogonal to the columns kept so far is numerically zero."""
    n, p = x.shape
    kept: list[int] = []
    aliased: list[int] = []
    detail: dict[str, str] = {}
    basis = np.empty((n, 0))
    for j in range(p):
        col = x[:, j].astype(float)
        norm = np.linalg.norm(col)
        if norm == 0.0:
            aliased.append(j)
            detail[names[j]] = "all-zero column"
            continue
        if basis.shape[1]:
            coef, *_ = np.linalg.lstsq(basis, col, rcond=None)
            resid = col - basis @ coef
        else:
            resid = col
        if np.linalg.norm(resid) <= ALIAS_REL_TOL * norm:
            aliased.append(j)
            deps = [names[k] for k in kept]
            detail[names[j]] = f"linear combination of {', '.join(deps)}"
        else:
            kept.append(j)
            q = resid / np.linalg.norm(resid)
            basis = np.column_stack([basis, q])
    return kept, [names[j] for j in aliased], detail


def fit_ols(m: DesignMatrix, drop_aliased: bool = False) -> RegressionReport:
    """Least squares through QR with t-distribution inference.

    Raises RankDeficiencyError naming the aliased columns unless
    drop_aliased is set, in which case those columns are reported as
    aliased (no coefficient) and the rest are fit.
    """
    n, p = m.x.shape
    if n <= p:
        raise InputError(f"need more observations ({n}) than columns ({p}) for inference")
    kept_idx, aliased_names, alias_detail = _find_aliased(m.x, m.names)
    if aliased_names and not drop_aliased:
        why = "; ".join(f"{k}: {v}" for k, v in alias_detail.items())
        raise RankDeficiencyError(aliased_names, why)

    x = m.x[:, kept_idx]
    y = m.y.astype(float)
    q, r = np.linalg.qr(x)
    beta = np.linalg.solve(r, q.T @ y)
    fitted = x @ beta
    resid = y - fitted
    rss = float(resid @ resid)
    df = n - len(kept_idx)
    sigma2 = rss / df if df > 0 else 0.0
    r_inv = np.linalg.solve(r, np.eye(len(kept_idx)))
    xtx_inv = r_inv @ r_inv.T
    se = np.sqrt(np.maximum(sigma2 * np.diag(xtx_inv), 0.0))

    has_intercept = any(m.names[j] == "intercept" for j in kept_idx)
    if has_intercept:
        tss = float(np.sum((y - y.mean()) ** 2))
    else:
        tss = float(y @ y)
    r_squared = 1.0 - rss / tss if tss > 0 else 1.0

    sing = np.linalg.svd(x, compute_uv=False)
    condition = float(sing[0] / sing[-1]) if sing[-1] > 0 else math.inf

    stats: list[PredictorStats] = []
    kept_pos = {j: k for k, j in enumerate(kept_idx)}
    for j, name in enumerate(m.names):
        if j not in kept_pos:
            stats.append(PredictorStats(name, math.nan, math.nan, math.nan, math.nan, aliased=True))
            continue
        k = kept_pos[j]
        b = float(beta[k])
        s = float(se[k])
        if s == 0.0:
            # Degenerate: zero residual variance. The sign convention keeps
            # exact fits readable (slope with no noise -> p = 0).
            t_stat = 0.0 if b == 0.0 else math.copysign(math.inf, b)
            p_val = 1.0 if b == 0.0 else 0.0
        else:
            t_stat = b / s
            p_val = 2.0 * t_sf(abs(t_stat), df)
            p_val = min(p_val, 1.0)
        stats.append(PredictorStats(name, b, s, t_stat, p_val))
    return RegressionReport(
        predictors=tuple(stats),
        df_resid=df,
        r_squared=r_squared,
        condition_number=condition,
        aliased=tuple(aliased_names),
        n_obs=n,
    )


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) by the continued fraction with the standard symmetry switch."""
    if a <= 0 or b <= 0:
        raise InputError("incomplete beta requires a, b > 0")
    if not 0.0 <= x <= 1.0:
        raise InputError(f"incomplete beta requires x in [0, 1], got {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(ln_front) * _beta_cf(a, b, x) / a
    return 1.0 - math.exp(ln_front) * _beta_cf(b, a, 1.0 - x) / b


def _beta_cf(a: float, b: float, x: float, max_iter: int = 500, eps: float = 1e-16) -> float:
    # Modified Lentz continued-fraction evaluation.
    tiny = 1e-300
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise InputError(f"incomplete beta continued fraction failed to converge (a={a}, b={b}, x={x})")


def t_sf(t: float, df: int | float) -> float:
    """Upper-tail probability P(T > t) for Student's t with df degrees of
    freedom."""
    if not math.isfinite(t):
        raise InputError(f"t statistic must be finite, got {t}")
    if df < 1:
        raise InputError(f"degrees of freedom must be >= 1, got {df}")
    if t == 0.0:
        return 0.5
    x = df / (df + t * t)
    half_tail = 0.5 * regularized_incomplete_beta(df / 2.0, 0.5, x)
    return half_tail if t > 0 else 1.0 - half_tail


def build_design(rows: list[SweepRow], mode: str) -> DesignMatrix:
    """Assemble predictors from sweep rows in the fixed reporting order."""
    if mode not in SENSITIVITY_MODES:
        raise InputError(f"unknown sensitivity mode {mode!r}; choose from {SENSITIVITY_MODES}")
    if not rows:
        raise InputError("no sweep rows to analyze")
    cols = {
        "storm": np.array([float(r.storm) for r in rows]),
        "rainfall": np.array([r.rainfall for r in rows]),
        "time_of_day": np.array([r.time_of_day for r in rows]),
        "threshold": np.array([r.threshold for r in rows]),
        "w_cdm": np.array([r.w_cdm for r in rows]),
        "w_hrf": np.array([r.w_hrf for r in rows]),
        "w_crf": np.array([r.w_crf for r in rows]),
    }
    y = np.array([float(r.evacuated) for r in rows])
    if mode == "no-intercept":
        names = PREDICTOR_ORDER
    elif mode == "drop-one-weight":
        names = ("intercept",) + tuple(n for n in PREDICTOR_ORDER if n != "w_crf")
    else:  # intercept-full
        names = ("intercept",) + PREDICTOR_ORDER
    columns = []
    for name in names:
        if name == "intercept":
            columns.append(np.ones(len(rows)))
        else:
            columns.append(cols[name])
    return DesignMatrix(names=tuple(names), x=np.column_stack(columns), y=y)


def sensitivity(rows: list[SweepRow], mode: str = "drop-one-weight") -> RegressionReport:
    """Fit evacuated ~ sweep predictors under the named collinearity mode.

    An exact-sum weight grid makes the full model singular, so intercept-full
    raises RankDeficiencyError on such sweeps; that diagnostic is the point
    of the mode.
    """
    return fit_ols(build_design(rows, mode))


def format_p(p: float) -> str:
    if math.isnan(p):
        return "NA"
    if p < P_VALUE_FLOOR:
        return "<2e-16"
    return f"{p:.6g}"


def report_to_text(report: RegressionReport) -> str:
    rows = [("predictor", "coefficient", "std_error", "t_value", "p_value")]
    for p in report.predictors:
        if p.aliased:
            rows.append((p.name, "aliased", "-", "-", "-"))
        else:
            rows.append((
                p.name,
                f"{p.coefficient:.6g}",
                f"{p.std_error:.6g}",
                f"{p.t_statistic:.4g}",
                format_p(p.p_value),
            ))
    widths = [max(len(r[i]) for r in rows) for i in range(5)]
    lines = []
    for i, r in enumerate(rows):
        lines.append("  ".join(cell.ljust(widths[k]) for k, cell in enumerate(r)).rstrip())
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    lines.append("")
    lines.append(f"observations: {report.n_obs}   residual df: {report.df_resid}   "
                 f"R-squared: {report.r_squared:.6f}   condition: {report.condition_number:.6g}")
    if report.aliased:
        lines.append(f"aliased columns: {', '.join(report.aliased)}")
    return "\n".join(lines) + "\n"


def report_to_csv(report: RegressionReport) -> str:
    buf = io.StringIO()
    buf.write("predictor,coefficient,std_error,t_value,p_value,aliased\n")
    for p in report.predictors:
        if p.aliased:
            buf.write(f"{p.name},,,,,1\n")
        else:
            buf.write(
                f"{p.name},{repr(p.coefficient)},{repr(p.std_error)},"
                f"{repr(p.t_statistic)},{repr(p.p_value)},0\n"
            )
    return buf.getvalue()


@dataclass(frozen=True)
class SeriesPoint:
    series: str
    x: float
    mean_evacuated: float
    n: int


def series(
    rows: list[SweepRow],
    storm: int,
    rainfall: float,
    time_of_day: float,
    threshold: float,
) -> list[SeriesPoint]:
    """Mean evacuated versus each weight within one scenario+threshold slice.

    One series per weight kind; the mean at weight value v pools every row
    in the slice with that value (all replicates, all settings of the other
    two weights).
    """
    slice_rows = [
        r for r in rows
        if r.storm == storm and r.rainfall == rainfall
        and r.time_of_day == time_of_day and r.threshold == threshold
    ]
    if not slice_rows:
        raise InputError(
            f"no rows match slice storm={storm} rainfall={rainfall} "
            f"time_of_day={time_of_day} threshold={threshold}"
        )
    out: list[SeriesPoint] = []
    for kind in ("w_cdm", "w_hrf", "w_crf"):
        groups: dict[float, list[int]] = {}
        for r in slice_rows:
            groups.setdefault(getattr(r, kind), []).append(r.evacuated)
        for v in sorted(groups):
            vals = groups[v]
            out.append(SeriesPoint(kind, v, sum(vals) / len(vals), len(vals)))
    return out


def series_to_csv(points: list[SeriesPoint]) -> str:
    buf = io.StringIO()
    buf.write("x,series,mean_evacuated,n\n")
    for p in points:
        buf.write(f"{repr(p.x)},{p.series},{repr(p.mean_evacuated)},{p.n}\n")
    return buf.getvalue()
