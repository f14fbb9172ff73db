"""Per-trial safety metrics and cross-condition statistics.

Computes, per hand, the mean and maximum sclera-force norm and the
percentage of trial time spent above the safety limit, plus completion time
and (in cooperative mode) handle-load magnitudes. Condition summaries pair
every metric with two-sample t statistics assuming unequal variances; the
t-distribution tail is evaluated with a continued-fraction regularized
incomplete beta, so no statistics package is involved in the reported
values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .engine import TrialLog

SAFE_LIMIT_MN = 120.0

_METRIC_LABELS = {
    "mean_sclera_dh": "mean sclera force, dominant (mN)",
    "max_sclera_dh": "max sclera force, dominant (mN)",
    "pct_over_dh": "% time over limit, dominant",
    "mean_sclera_ndh": "mean sclera force, non-dominant (mN)",
    "max_sclera_ndh": "max sclera force, non-dominant (mN)",
    "pct_over_ndh": "% time over limit, non-dominant",
    "completion_time": "completion time (s)",
    "mean_handle_dh": "mean handle force, dominant (N)",
    "max_handle_dh": "max handle force, dominant (N)",
    "mean_handle_ndh": "mean handle force, non-dominant (N)",
    "max_handle_ndh": "max handle force, non-dominant (N)",
}


# ---------------------------------------------------------------------------
# Student-t machinery

def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    max_iter = 300
    eps = 3e-16
    fpmin = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < fpmin:
        d = fpmin
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise RuntimeError("incomplete beta continued fraction did not converge")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b), accurate to ~1e-15 over (0, 1)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_two_sided_p(t: float, dof: float) -> float:
    """P(|T| >= |t|) for Student's t with the given degrees of freedom."""
    if not math.isfinite(t):
        return 0.0
    return min(1.0, max(0.0, regularized_incomplete_beta(dof / 2.0, 0.5, dof / (dof + t * t))))


@dataclass(frozen=True)
class WelchResult:
    t: float
    p: float
    dof: float


def welch_ttest(a, b) -> WelchResult:
    """Two-sample t statistic assuming unequal variances, with the
    Welch-Satterthwaite degrees of freedom and a two-sided p-value.

    Degenerate samples follow the documented conventions: zero variance on
    both sides gives p = 1 for equal means and p = 0 otherwise (dof falls
    back to n1 + n2 - 2).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    na, nb = len(a), len(b)
    if na < 2 or nb < 2:
        raise ValueError("welch_ttest requires at least two samples per group")
    ma, mb = float(np.mean(a)), float(np.mean(b))
    va, vb = float(np.var(a, ddof=1)), float(np.var(b, ddof=1))
    se2 = va / na + vb / nb
    if se2 == 0.0:
        dof = float(na + nb - 2)
        if ma == mb:
            return WelchResult(t=0.0, p=1.0, dof=dof)
        return WelchResult(t=math.copysign(math.inf, ma - mb), p=0.0, dof=dof)
    t = (ma - mb) / math.sqrt(se2)
    dof = se2**2 / ((va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1))
    return WelchResult(t=t, p=student_t_two_sided_p(t, dof), dof=dof)


# ---------------------------------------------------------------------------
# per-trial metrics

@dataclass(frozen=True)
class HandMetrics:
    mean_sclera: float  # mN
    max_sclera: float  # mN
    pct_time_over_limit: float  # %
    mean_handle_force: float | None = None  # N, cooperative mode only
    max_handle_force: float | None = None


@dataclass(frozen=True)
class TrialMetrics:
    dominant: HandMetrics
    non_dominant: HandMetrics
    completion_time: float | None
    completed: bool
    mode: str

    def to_dict(self) -> dict:
        def hand(h: HandMetrics) -> dict:
            d = {
                "mean_sclera_mn": h.mean_sclera,
                "max_sclera_mn": h.max_sclera,
                "pct_time_over_limit": h.pct_time_over_limit,
            }
            if h.mean_handle_force is not None:
                d["mean_handle_force_n"] = h.mean_handle_force
                d["max_handle_force_n"] = h.max_handle_force
            return d

        return {
            "dominant": hand(self.dominant),
            "non_dominant": hand(self.non_dominant),
            "completion_time_s": self.completion_time,
            "completed": self.completed,
            "mode": self.mode,
        }


def _tick_durations(times: np.ndarray, fallback_dt: float) -> np.ndarray:
    """Per-record durations so aggregates are time weighted even if a log was
    assembled with a varying step."""
    if len(times) == 1:
        return np.array([fallback_dt])
    d = np.diff(times)
    return np.append(d, d[-1])


def _hand_metrics(log: TrialLog, side: str, limit: float) -> HandMetrics:
    fs = np.array([rec.robots[side]["fs"] for rec in log.records])
    times = np.array([rec.t for rec in log.records])
    w = _tick_durations(times, float(log.meta.get("dt", 1.0)))
    total = float(np.sum(w))
    mean = float(np.sum(w * fs) / total)
    pct = 100.0 * float(np.sum(w[fs > limit]) / total)
    mean_handle = max_handle = None
    if log.meta.get("mode") == "BMAC":
        handle = np.array([np.linalg.norm(rec.robots[side]["input"][:3]) for rec in log.records])
        mean_handle = float(np.sum(w * handle) / total)
        max_handle = float(np.max(handle))
    return HandMetrics(
        mean_sclera=mean,
        max_sclera=float(np.max(fs)),
        pct_time_over_limit=pct,
        mean_handle_force=mean_handle,
        max_handle_force=max_handle,
    )


def trial_metrics(log: TrialLog, limit: float = SAFE_LIMIT_MN) -> TrialMetrics:
    """Safety metrics for one trial, split by hand (dominant = the robot the
    log's metadata names, right by default)."""
    if not log.records:
        raise ValueError("cannot compute metrics on an empty trial log")
    dominant = log.meta.get("dominant", "right")
    other = "left" if dominant == "right" else "right"
    return TrialMetrics(
        dominant=_hand_metrics(log, dominant, limit),
        non_dominant=_hand_metrics(log, other, limit),
        completion_time=log.meta.get("completion_time"),
        completed=log.meta.get("completion_reason") == "completed",
        mode=log.meta.get("mode", "BMAT"),
    )


# ---------------------------------------------------------------------------
# cross-condition summaries

def _metric_values(trials: list[TrialMetrics], key: str) -> np.ndarray:
    def get(m: TrialMetrics) -> float:
        if key == "completion_time":
            return math.nan if m.completion_time is None else m.completion_time
        hand = m.dominant if key.endswith("_dh") else m.non_dominant
        base = key[: -len("_dh")] if key.endswith("_dh") else key[: -len("_ndh")]
        value = {
            "mean_sclera": hand.mean_sclera,
            "max_sclera": hand.max_sclera,
            "pct_over": hand.pct_time_over_limit,
            "mean_handle": hand.mean_handle_force,
            "max_handle": hand.max_handle_force,
        }[base]
        return math.nan if value is None else value

    return np.array([get(m) for m in trials], dtype=float)


@dataclass(frozen=True)
class ConditionSummary:
    label: str
    n_trials: int
    stats: dict  # metric key -> (mean, std, single_trial_warning)


@dataclass(frozen=True)
class Comparison:
    metric: str
    label_a: str
    label_b: str
    result: WelchResult | None  # None when either side lacks 2 finite samples


@dataclass(frozen=True)
class ConditionReport:
    metrics: list[str]
    summaries: list[ConditionSummary]
    comparisons: list[Comparison]


def summarize_conditions(groups: dict[str, list[TrialMetrics]]) -> ConditionReport:
    """Mean +/- std per condition for every metric, plus pairwise Welch
    p-values between conditions."""
    if not groups:
        raise ValueError("no conditions to summarize")
    for label, trials in groups.items():
        if not trials:
            raise ValueError(f"condition {label!r} has no trials")
    keys = [k for k in _METRIC_LABELS if not k.startswith(("mean_handle", "max_handle"))]
    if any(m.mode == "BMAC" for trials in groups.values() for m in trials):
        keys = list(_METRIC_LABELS)
    summaries = []
    for label, trials in groups.items():
        stats = {}
        for key in keys:
            vals = _metric_values(trials, key)
            finite = vals[np.isfinite(vals)]
            if len(finite) == 0:
                stats[key] = (math.nan, math.nan, True)
            elif len(finite) == 1:
                stats[key] = (float(finite[0]), 0.0, True)
            else:
                stats[key] = (float(np.mean(finite)), float(np.std(finite, ddof=1)), False)
        summaries.append(ConditionSummary(label=label, n_trials=len(trials), stats=stats))
    comparisons = []
    labels = list(groups)
    for i, la in enumerate(labels):
        for lb in labels[i + 1 :]:
            for key in keys:
                va = _metric_values(groups[la], key)
                vb = _metric_values(groups[lb], key)
                va, vb = va[np.isfinite(va)], vb[np.isfinite(vb)]
                if len(va) < 2 or len(vb) < 2:
                    comparisons.append(Comparison(key, la, lb, None))
                else:
                    comparisons.append(Comparison(key, la, lb, welch_ttest(va, vb)))
    return ConditionReport(metrics=keys, summaries=summaries, comparisons=comparisons)


def _fmt_p(p: float) -> str:
    # Exact zeros from the degenerate-variance convention and true underflow
    # both render as a bound rather than a misleading 0.
    return "<1e-15" if p < 1e-15 else f"{p:.6g}"


def report_to_csv(report: ConditionReport) -> str:
    lines = ["condition,n," + ",".join(f"{k}_mean,{k}_std" for k in report.metrics)]
    for s in report.summaries:
        row = [s.label, str(s.n_trials)]
        for k in report.metrics:
            mean, std, _ = s.stats[k]
            row += [f"{mean:.9g}", f"{std:.9g}"]
        lines.append(",".join(row))
    lines.append("")
    lines.append("metric,condition_a,condition_b,t,dof,p")
    for c in report.comparisons:
        if c.result is None:
            lines.append(f"{c.metric},{c.label_a},{c.label_b},n/a,n/a,n/a")
        else:
            lines.append(
                f"{c.metric},{c.label_a},{c.label_b},"
                f"{c.result.t:.9g},{c.result.dof:.9g},{_fmt_p(c.result.p)}"
            )
    return "\n".join(lines) + "\n"


def report_to_text(report: ConditionReport) -> str:
    name_w = max(len(_METRIC_LABELS[k]) for k in report.metrics)
    col_w = max(22, *(len(s.label) for s in report.summaries))
    header = " " * name_w + "  " + "  ".join(f"{s.label:>{col_w}}" for s in report.summaries)
    lines = [header, "-" * len(header)]
    for k in report.metrics:
        cells = []
        for s in report.summaries:
            mean, std, warn = s.stats[k]
            mark = "*" if warn else ""
            cells.append(f"{mean:10.3f} +/- {std:8.3f}{mark}".rjust(col_w))
        lines.append(f"{_METRIC_LABELS[k]:<{name_w}}  " + "  ".join(cells))
    if any(s.stats[k][2] for s in report.summaries for k in report.metrics):
        lines.append("(* fewer than two finite samples; std reported as 0)")
    if report.comparisons:
        lines.append("")
        lines.append("pairwise Welch t-tests (p < 0.05 marked):")
        for c in report.comparisons:
            if c.result is None:
                lines.append(f"  {c.label_a} vs {c.label_b} [{_METRIC_LABELS[c.metric]}]: n/a")
                continue
            sig = "  (significant)" if c.result.p < 0.05 else ""
            lines.append(
                f"  {c.label_a} vs {c.label_b} [{_METRIC_LABELS[c.metric]}]: "
                f"t={c.result.t:.4g}, dof={c.result.dof:.4g}, p={_fmt_p(c.result.p)}{sig}"
            )
    return "\n".join(lines) + "\n"
