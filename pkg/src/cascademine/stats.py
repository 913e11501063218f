"""Cascade size distributions, discrete power-law fits, longest cascades, DOT export.

The power-law fit is the standard discrete MLE with a KS-minimizing lower
cutoff (Clauset/Shalizi/Newman style): for every candidate xmin the exponent
is fit by maximizing the Hurwitz-zeta log-likelihood

    L(alpha) = -alpha * sum(log x_i) - n * log zeta(alpha, xmin)

over a grid with parabolic refinement, and xmin is the candidate whose fitted
tail CDF is closest to the empirical one in Kolmogorov-Smirnov distance. The
exponent is exposed as alpha > 1; report it negated to compare against slopes
quoted on the pmf scale.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.special import zeta

from cascademine.cascades import Cascade

ALPHA_GRID = np.arange(1.05, 4.0 + 1e-9, 0.005)


@dataclass(frozen=True, slots=True)
class PowerLawFit:
    alpha: float  # MLE exponent, > 1
    xmin: int  # KS-selected lower cutoff, >= 2
    ks_statistic: float
    n_tail: int  # observations >= xmin

    @property
    def slope(self) -> float:
        """Exponent with the sign convention of a pmf log-log slope."""
        return -self.alpha


def size_distribution(cascades_by_city: Mapping[str, Sequence[Cascade]]
                      ) -> dict[str, list[tuple[int, int, float]]]:
    """Per-city histogram rows (size, count, P(X >= size)), ascending size."""
    out: dict[str, list[tuple[int, int, float]]] = {}
    for city in sorted(cascades_by_city):
        sizes = np.sort(np.array([c.size for c in cascades_by_city[city]], dtype=np.int64))
        if sizes.size == 0:
            out[city] = []
            continue
        values, counts = np.unique(sizes, return_counts=True)
        n = sizes.size
        tail = n - np.concatenate(([0], np.cumsum(counts)[:-1]))
        out[city] = [(int(v), int(c), float(t) / n) for v, c, t in zip(values, counts, tail)]
    return out


def _loglik_alpha(values: np.ndarray, counts: np.ndarray, xmin: int,
                  grid: np.ndarray) -> float:
    """Maximize the discrete power-law log-likelihood over alpha for one xmin.

    Grid argmax plus one parabolic vertex step, which lands within ~1e-4 of
    the true optimum for these smooth profiles.
    """
    mask = values >= xmin
    n = counts[mask].sum()
    s = float(np.sum(counts[mask] * np.log(values[mask])))
    ll = -grid * s - n * np.log(zeta(grid, xmin))
    i = int(np.argmax(ll))
    if not 0 < i < len(grid) - 1:
        return float(grid[i])
    h = float(grid[i + 1] - grid[i])
    y0, y1, y2 = ll[i - 1], ll[i], ll[i + 1]
    curvature = y0 - 2.0 * y1 + y2
    if curvature >= 0.0:
        return float(grid[i])
    alpha = float(grid[i]) + 0.5 * h * float(y0 - y2) / float(curvature)
    return min(max(alpha, float(grid[i - 1])), float(grid[i + 1]))


def _ks_distance(values: np.ndarray, counts: np.ndarray, xmin: int, alpha: float) -> float:
    """Exact sup over integer support of |empirical tail CDF - fitted CDF|.

    The empirical CDF steps only at observed values, and the fitted CDF is
    increasing, so the sup is attained either at an observed value v_j or just
    before the next one (v_{j+1} - 1).
    """
    mask = values >= xmin
    v = values[mask].astype(np.float64)
    c = counts[mask].astype(np.float64)
    n = c.sum()
    emp = np.cumsum(c) / n
    z0 = zeta(alpha, xmin)
    fit_at = 1.0 - zeta(alpha, v + 1.0) / z0
    d = np.max(np.abs(emp - fit_at))
    if len(v) > 1:
        before_next = v[1:] - 1.0
        fit_before = 1.0 - zeta(alpha, before_next + 1.0) / z0
        d = max(d, float(np.max(np.abs(emp[:-1] - fit_before))))
    return float(d)


def fit_power_law(sizes: Sequence[int], min_tail: int = 10,
                  grid: np.ndarray = ALPHA_GRID) -> PowerLawFit:
    """Fit a discrete power law to a multiset of positive integers.

    Candidate xmin values are the distinct observed sizes >= 2 that keep at
    least ``min_tail`` observations and at least two distinct values in the
    tail; raises ValueError if no candidate qualifies or the data are
    degenerate (a single repeated value).
    """
    arr = np.asarray(sizes, dtype=np.int64)
    if arr.size == 0 or np.any(arr <= 0):
        raise ValueError("sizes must be positive integers")
    values, counts = np.unique(arr, return_counts=True)
    tail_counts = counts[::-1].cumsum()[::-1]  # observations >= values[j]
    distinct_ge = np.arange(len(values), 0, -1)  # distinct values >= values[j]

    candidates = [
        (int(v), int(t))
        for v, t, d in zip(values, tail_counts, distinct_ge)
        if v >= 2 and t >= min_tail and d >= 2
    ]
    if not candidates:
        raise ValueError(
            f"no usable xmin: need >= {min_tail} tail observations spanning "
            "at least two distinct sizes >= 2"
        )

    best = None
    for xmin, n_tail in candidates:
        alpha = _loglik_alpha(values, counts, xmin, grid)
        d = _ks_distance(values, counts, xmin, alpha)
        if best is None or d < best[0]:
            best = (d, xmin, alpha, n_tail)
    d, xmin, alpha, n_tail = best
    return PowerLawFit(alpha=alpha, xmin=xmin, ks_statistic=d, n_tail=n_tail)


def alpha_mle_approx(sizes: Sequence[int], xmin: int) -> float:
    """Closed-form continuous approximation 1 + n / sum(log(x / (xmin - 0.5))).

    Kept as a cheap cross-check of the exact discrete MLE.
    """
    arr = np.asarray(sizes, dtype=np.float64)
    tail = arr[arr >= xmin]
    if tail.size == 0:
        raise ValueError("empty tail")
    return float(1.0 + tail.size / np.sum(np.log(tail / (xmin - 0.5))))


def ccdf_tail_slope(sizes: Sequence[int], min_tail_count: int = 10) -> float:
    """Least-squares slope of log CCDF vs log size over well-populated sizes.

    A diagnostic on the CCDF scale: a power law with exponent alpha has CCDF
    slope -(alpha - 1). Points with fewer than ``min_tail_count`` observations
    at or above them are dropped to keep extreme-tail noise out of the fit.
    """
    arr = np.asarray(sizes, dtype=np.int64)
    values, counts = np.unique(arr, return_counts=True)
    n = counts.sum()
    tail = counts[::-1].cumsum()[::-1]
    keep = tail >= min_tail_count
    if keep.sum() < 2:
        raise ValueError("not enough distinct sizes for a slope")
    x = np.log(values[keep].astype(np.float64))
    y = np.log(tail[keep] / n)
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


def longest_cascades(cascades_by_city: Mapping[str, Sequence[Cascade]],
                     top_k: int = 1) -> dict[str, list[Cascade]]:
    """Largest cascades per city, descending size, ties by cascade_id."""
    if top_k <= 0:
        raise ValueError("top_k must be positive")
    out = {}
    for city in sorted(cascades_by_city):
        ranked = sorted(cascades_by_city[city], key=lambda c: (-c.size, c.cascade_id))
        out[city] = ranked[:top_k]
    return out


def export_dot(cascade: Cascade) -> str:
    """Graphviz DOT text with nodes anonymized to their temporal order index."""
    index = {node.user: i for i, node in enumerate(cascade.nodes)}
    lines = ["digraph cascade {"]
    for i in range(len(cascade.nodes)):
        lines.append(f"  n{i};")
    for u, v in sorted((index[u], index[v]) for u, v in cascade.edges):
        lines.append(f"  n{u} -> n{v};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def write_distribution_csv(dist_by_city: Mapping[str, Sequence[tuple[int, int, float]]],
                           path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("city,size,count,ccdf\n")
        for city in sorted(dist_by_city):
            for size, count, ccdf in dist_by_city[city]:
                fh.write(f"{city},{size},{count},{ccdf!r}\n")


def write_fit_csv(fits_by_city: Mapping[str, PowerLawFit], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("city,alpha,xmin,ks,n_tail\n")
        for city in sorted(fits_by_city):
            f = fits_by_city[city]
            fh.write(f"{city},{f.alpha!r},{f.xmin},{f.ks_statistic!r},{f.n_tail}\n")
