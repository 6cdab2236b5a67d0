"""Error vectors, path aggregation, rate fitting, and cost accounting."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

# fraction of leading iterations dropped before fitting the geometric rate
TRANSIENT_FRACTION = 0.1


@dataclass(frozen=True)
class ErrorVector:
    opt_err: float   # ||xbar - x*||
    cons_x: float    # ||x - 1 (x) xbar||
    cons_y: float    # ||y - 1 (x) ybar||


def error_vector(st, p) -> ErrorVector:
    xbar = st.x.mean(axis=0)
    ybar = st.y.mean(axis=0)
    return ErrorVector(
        float(np.linalg.norm(xbar - p.x_star)),
        float(np.linalg.norm(st.x - xbar)),
        float(np.linalg.norm(st.y - ybar)),
    )


def combined_error(ev: ErrorVector) -> float:
    """Stacked norm of (xbar - x*, x - 1 xbar): the quantity the figures plot."""
    return float(np.hypot(ev.opt_err, ev.cons_x))


@dataclass(frozen=True)
class RateFit:
    rate: float
    r_squared: float
    window: tuple
    intercept: float


def fit_geometric_rate(trace, window=None) -> RateFit:
    """Least-squares slope of ln(error) vs k over the window; returns e^slope."""
    trace = np.asarray(trace, dtype=float)
    if window is None:
        start = int(len(trace) * TRANSIENT_FRACTION)
        window = (start, len(trace))
    k0, k1 = window
    seg = trace[k0:k1]
    if np.any(seg <= 0.0):
        raise ValueError("trace must be positive over the fit window")
    ks = np.arange(k0, k1, dtype=float)
    logs = np.log(seg)
    slope, intercept = np.polyfit(ks, logs, 1)
    resid = logs - (slope * ks + intercept)
    ss_tot = float(np.sum((logs - logs.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - float(np.sum(resid**2)) / ss_tot
    return RateFit(float(np.exp(slope)), r2, (k0, k1), float(intercept))


@dataclass
class RunResult:
    """Aggregate of independent sample paths of one run."""

    algorithm: str
    traces: list
    mean_z: np.ndarray         # (T+1, 3)
    mean_combined: np.ndarray  # (T+1,)
    cum_samples: np.ndarray    # (T+1,) network totals (identical across paths)
    cum_messages: np.ndarray
    config: dict = field(default_factory=dict)
    empirical_nu: float = 0.0
    rate_fit: RateFit = None


def _mean_over_paths(stacked):
    """Mean over axis 0 with exact (fsum) accumulation.

    Exact summation makes the average independent of path ordering, so
    aggregation is permutation invariant bit-for-bit.
    """
    flat = stacked.reshape(stacked.shape[0], -1)
    sums = np.fromiter((math.fsum(col) for col in flat.T), dtype=float,
                       count=flat.shape[1])
    return (sums / stacked.shape[0]).reshape(stacked.shape[1:])


def aggregate(traces, algorithm=None, config=None, empirical_nu=0.0) -> RunResult:
    """Average per-iteration errors across paths, truncated to the shortest path."""
    if not traces:
        raise ValueError("no traces to aggregate")
    algorithm = algorithm or traces[0].algorithm
    t_min = min(tr.z.shape[0] for tr in traces)
    zs = np.stack([tr.z[:t_min] for tr in traces])
    comb = np.stack([tr.combined[:t_min] for tr in traces])
    return RunResult(
        algorithm=algorithm,
        traces=list(traces),
        mean_z=_mean_over_paths(zs),
        mean_combined=_mean_over_paths(comb),
        cum_samples=traces[0].cum_samples[:t_min].copy(),
        cum_messages=traces[0].cum_messages[:t_min].copy(),
        config=dict(config or {}),
        empirical_nu=empirical_nu,
    )


@dataclass(frozen=True)
class OracleCostTable:
    epsilons: np.ndarray
    samples: np.ndarray   # -1 where the target was never reached
    slope: float          # log(samples) vs log(1/eps) regression slope


def oracle_vs_epsilon(result: RunResult, eps_grid) -> OracleCostTable:
    """Samples needed before the averaged combined error first drops below eps."""
    eps_grid = np.asarray(eps_grid, dtype=float)
    err = result.mean_combined
    samples = np.full(len(eps_grid), -1, dtype=np.int64)
    for j, eps in enumerate(eps_grid):
        hit = np.nonzero(err < eps)[0]
        if len(hit):
            k = int(hit[0])
            samples[j] = 0 if k == 0 else int(result.cum_samples[k])
    ok = samples > 0
    if np.count_nonzero(ok) >= 2:
        slope = float(np.polyfit(np.log(1.0 / eps_grid[ok]),
                                 np.log(samples[ok].astype(float)), 1)[0])
    else:
        slope = float("nan")
    return OracleCostTable(eps_grid, samples, slope)


CSV_FIELDS = ["k", "mean_opt_err", "mean_cons_x", "mean_cons_y",
              "mean_combined", "cum_samples_total", "cum_messages_total"]


def write_csv(result: RunResult, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_FIELDS)
        for k in range(result.mean_z.shape[0]):
            writer.writerow([
                k,
                repr(float(result.mean_z[k, 0])),
                repr(float(result.mean_z[k, 1])),
                repr(float(result.mean_z[k, 2])),
                repr(float(result.mean_combined[k])),
                int(result.cum_samples[k]),
                int(result.cum_messages[k]),
            ])


def read_csv(path):
    rows = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            rows.append({key: float(val) for key, val in row.items()})
    return rows
