"""Legendre-Fenchel conjugation: rate functions, symmetry checks, CLT variance.

The conjugate I(s) = sup_beta (beta*s - etilde(beta)), etilde(beta) = e(-beta),
is computed by bisection on the monotone derivative inside the achievable
slope range and continued linearly outside with the domain-endpoint slopes,
which is the exact structure of the conjugate of a convex function that is
finite on an open interval.
"""

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .model import DomainError
from ._linalg import AccuracyError

CONVEXITY_TOL = -1e-9       # allowed dip of second divided differences
DEGENERATE_SUP = 1e-12      # |e| below this on the whole grid: flat functional
ENDPOINT_SHIFT = 1e-6       # relative offset used for one-sided endpoint slopes


@dataclass(frozen=True)
class RateFunction:
    """Convex conjugate with recorded linear tails and minimizer.

    evaluator is total on the real line: inside inner_interval the value
    comes from an interior critical point, outside it continues linearly
    with slopes tail_slopes (the negated domain endpoints of the input
    functional) and intercepts tail_intercepts.
    """

    inner_interval: tuple
    tail_slopes: tuple
    tail_intercepts: tuple
    minimizer: float
    evaluator: Callable[[float], float]
    kind: str = "reference"

    def __call__(self, s):
        return self.evaluator(s)


def _sample_grid(lo, hi, count, margin):
    pad = margin * (hi - lo)
    return np.linspace(lo + pad, hi - pad, count)


def rate_function(efn, kind):
    """Conjugate of alpha -> efn(alpha) through etilde(beta) = efn(-beta).

    Requires a convex functional on a bounded open interval (the degenerate
    flat case e == 0 is special-cased into its two linear pieces).  Rejects
    non-convex samples, naming the violating triple.
    """
    if kind not in ("reference", "ness"):
        raise ValueError("kind must be 'reference' or 'ness'")
    dom = efn.domain
    b_lo, b_hi = -dom.upper, -dom.lower

    if not (math.isfinite(b_lo) and math.isfinite(b_hi)):
        return _degenerate_unbounded(efn, kind, b_lo, b_hi)

    length = b_hi - b_lo
    etilde = lambda b: efn(-b)
    grid = _sample_grid(b_lo, b_hi, 101, ENDPOINT_SHIFT)
    vals = np.array([etilde(b) for b in grid])
    if not np.isfinite(vals).all():
        raise DomainError("functional is not finite on the interior of its stated domain")
    second = vals[2:] - 2.0 * vals[1:-1] + vals[:-2]
    worst = int(np.argmin(second))
    if second[worst] < CONVEXITY_TOL * max(1.0, np.abs(vals).max()):
        raise DomainError(
            "input functional is not convex near alpha = "
            f"({-grid[worst]:.6g}, {-grid[worst + 1]:.6g}, {-grid[worst + 2]:.6g})"
        )

    if np.abs(vals).max() < DEGENERATE_SUP:
        return _degenerate_flat(b_lo, b_hi, kind)

    eps = ENDPOINT_SHIFT * length
    h = eps
    dtilde = lambda b: (etilde(b + h) - etilde(b - h)) / (2.0 * h)
    b_lo_eff, b_hi_eff = b_lo + 2.0 * eps, b_hi - 2.0 * eps
    slope_lo = (etilde(b_lo_eff + eps) - etilde(b_lo_eff)) / eps
    slope_hi = (etilde(b_hi_eff) - etilde(b_hi_eff - eps)) / eps
    e_lo_lim = etilde(b_lo_eff)
    e_hi_lim = etilde(b_hi_eff)
    minimizer = dtilde(0.0) if b_lo < 0.0 < b_hi else dtilde(0.5 * (b_lo_eff + b_hi_eff))

    def conjugate(s):
        s = float(s)
        if s <= slope_lo:
            return max(b_lo * s - e_lo_lim, 0.0)
        if s >= slope_hi:
            return max(b_hi * s - e_hi_lim, 0.0)
        lo, hi = b_lo_eff, b_hi_eff
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if dtilde(mid) < s:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-16 * length:
                break
        b = 0.5 * (lo + hi)
        val = b * s - etilde(b)
        return 0.0 if -1e-12 < val < 0.0 else val

    return RateFunction(
        inner_interval=(slope_lo, slope_hi),
        tail_slopes=(b_lo, b_hi),
        tail_intercepts=(-e_lo_lim, -e_hi_lim),
        minimizer=minimizer,
        evaluator=conjugate,
        kind=kind,
    )


def _degenerate_flat(b_lo, b_hi, kind):
    """Conjugate of e == 0 on a bounded interval: two linear pieces at the origin."""

    def conjugate(s):
        return b_hi * s if s >= 0.0 else b_lo * s

    return RateFunction(
        inner_interval=(0.0, 0.0),
        tail_slopes=(b_lo, b_hi),
        tail_intercepts=(0.0, 0.0),
        minimizer=0.0,
        evaluator=conjugate,
        kind=kind,
    )


def _degenerate_unbounded(efn, kind, b_lo, b_hi):
    """Unbounded domain: only the flat functional is supported (sigma = 0)."""
    probe = np.linspace(-10.0, 10.0, 41)
    vals = np.array([efn(-b) for b in probe])
    if np.max(np.abs(vals[np.isfinite(vals)]), initial=0.0) >= DEGENERATE_SUP:
        raise DomainError("conjugation over an unbounded domain is only supported for e == 0")

    def conjugate(s):
        if s == 0.0:
            return 0.0
        if s > 0.0:
            return b_hi * s if math.isfinite(b_hi) else math.inf
        return b_lo * s if math.isfinite(b_lo) else math.inf

    return RateFunction(
        inner_interval=(0.0, 0.0),
        tail_slopes=(b_lo, b_hi),
        tail_intercepts=(0.0, 0.0),
        minimizer=0.0,
        evaluator=conjugate,
        kind=kind,
    )


def es_symmetry_defect(rate, grid):
    """max over the grid of |I(-s) - I(s) - s| (exact for reference kind)."""
    return max(abs(rate(-s) - rate(s) - s) for s in grid)


def clt_variance(efn, at):
    """Second derivative of the functional at `at` by Richardson extrapolation.

    Central differences at steps h and h/2 combined as (4*d2(h/2) - d2(h))/3
    with h = 1e-4 times the domain length; `at` needs a margin of 2h inside
    the domain.
    """
    dom = efn.domain
    length = dom.upper - dom.lower
    h = 1e-4 * (length if math.isfinite(length) else max(1.0, abs(at)))
    if at - dom.lower < 2.0 * h or dom.upper - at < 2.0 * h:
        raise DomainError(f"point {at} has less than 2h = {2 * h:.3g} margin inside the domain")

    def d2(step):
        return (efn(at + step) - 2.0 * efn(at) + efn(at - step)) / step**2

    value = (4.0 * d2(h / 2.0) - d2(h)) / 3.0
    if value < -1e-8:
        raise AccuracyError(f"second derivative {value:.3e} is negative beyond tolerance")
    return value


RATE_SCAN_COLUMNS = ("s", "I", "I_of_minus_s", "es_defect")


def rate_scan(rate, s_grid):
    rows = []
    for s in s_grid:
        i_s = rate(float(s))
        i_ms = rate(-float(s))
        rows.append((float(s), i_s, i_ms, abs(i_ms - i_s - float(s))))
    return rows


def write_rate_csv(path, rows):
    with open(path, "w") as fh:
        fh.write(",".join(RATE_SCAN_COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join("%.17g" % v for v in row) + "\n")
