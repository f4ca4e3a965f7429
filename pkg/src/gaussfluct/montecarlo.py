"""Sampling of the Gaussian measures and empirical checks of the functionals.

Time-integrated entropy production is evaluated as a single quadratic form
(x, B_t x) per draw against the precomputed operator
B_t = int_0^t e^{sL'} sigma e^{sL} ds, so a draw costs O(n^2) after one
O(steps * n^3) quadrature.

Reproducibility contract: draw i is generated from a counter-based stream
keyed by (seed, i) alone, chunks have a fixed size, and reductions combine
fixed-order per-chunk partials, so results are bit-identical for any worker
count.
"""

import math
import weakref
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._linalg import propagator, simpson_weights, symmetrize
from .model import DomainError, Model, sigma_matrix
from .flow import flow_point
from .renyi import domain_interval

CHUNK = 4096                    # fixed chunk size; part of the determinism contract
_COUNTER_STRIDE = 1 << 64       # Philox counter blocks reserved per draw

MGF_DOMAIN_MARGIN = 0.05        # required relative distance of alpha from the J_t boundary


def _draw_rows(seed, start, stop, dim):
    """Standard normal rows for draws [start, stop); row i depends only on (seed, i)."""
    key = int(seed) & ((1 << 128) - 1)
    out = np.empty((stop - start, dim))
    for i in range(start, stop):
        bg = np.random.Philox(key=key, counter=i * _COUNTER_STRIDE)
        out[i - start] = np.random.Generator(bg).standard_normal(dim)
    return out


def _chunks(count):
    return [(a, min(a + CHUNK, count)) for a in range(0, count, CHUNK)]


def _run_chunks(fn, count, workers):
    """Apply fn(start, stop, slot) over fixed chunks, possibly in parallel."""
    chunks = _chunks(count)
    if workers <= 1 or len(chunks) == 1:
        for slot, (a, b) in enumerate(chunks):
            fn(a, b, slot)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(fn, a, b, slot) for slot, (a, b) in enumerate(chunks)]
            for f in futures:
                f.result()
    return len(chunks)


def quad_form_samples(cov, mats, seed, count, workers=1):
    """Per-draw quadratic forms (x, M x) for x ~ N(0, cov), one column per M.

    Covariance factorization: x = C z with C the lower Cholesky factor, so
    (x, M x) = (z, C'MC z); the conjugated forms are precomputed once.
    """
    cov = np.asarray(cov, dtype=float)
    chol = np.linalg.cholesky(cov)
    dim = cov.shape[0]
    ws = [chol.T @ np.asarray(m, float) @ chol for m in mats]
    out = np.empty((count, len(ws)))

    def work(a, b, _slot):
        z = _draw_rows(seed, a, b, dim)
        for j, w in enumerate(ws):
            out[a:b, j] = np.einsum("ij,ij->i", z @ w, z)

    _run_chunks(work, count, workers)
    return out


@dataclass(frozen=True)
class SampleBatch:
    """Draws (optional) plus deterministic running statistics."""

    count: int
    seed: int
    draws: np.ndarray | None
    mean: np.ndarray
    variance: np.ndarray


def sample_gaussian(cov, seed, count, workers=1, keep_draws=True):
    """Draw `count` vectors from N(0, cov) with per-draw counter streams.

    Statistics are combined from fixed-order per-chunk partials with
    compensated summation, so they are bit-identical for any worker count.
    """
    cov = np.asarray(cov, dtype=float)
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise DomainError("covariance is not positive definite")
    dim = cov.shape[0]
    draws = np.empty((count, dim)) if keep_draws else None
    nchunks = len(_chunks(count))
    part_sum = np.zeros((nchunks, dim))
    part_sumsq = np.zeros((nchunks, dim))

    def work(a, b, slot):
        x = _draw_rows(seed, a, b, dim) @ chol.T
        if draws is not None:
            draws[a:b] = x
        part_sum[slot] = x.sum(axis=0)
        part_sumsq[slot] = (x * x).sum(axis=0)

    _run_chunks(work, count, workers)
    total = _kahan_rows(part_sum)
    total_sq = _kahan_rows(part_sumsq)
    mean = total / count
    variance = np.maximum(total_sq / count - mean * mean, 0.0)
    return SampleBatch(count=count, seed=int(seed), draws=draws, mean=mean, variance=variance)


def _kahan_rows(rows):
    """Compensated fixed-order sum of the rows of a 2-D array."""
    total = np.zeros(rows.shape[1])
    comp = np.zeros(rows.shape[1])
    for row in rows:
        y = row - comp
        t = total + y
        comp = (t - total) - y
        total = t
    return total


# ---------------------------------------------------------------------------
# time-integrated entropy production
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SigmaIntegral:
    """B_t = int_0^t e^{sL'} sigma e^{sL} ds with a Richardson error estimate."""

    time: float
    matrix: np.ndarray
    offset: float                 # t * tr(D sigma); zero under time reversal
    error_estimate: float


def sigma_integral_matrix(model, t, steps):
    """Composite-Simpson quadrature of the operator integrand.

    For t < 0 the oriented integral is returned.  The attached error
    estimate is |S(steps) - S(steps/2)|_max / 15 (Richardson for a
    fourth-order rule).
    """
    if steps < 16 or steps % 2 != 0:
        raise ValueError("steps must be an even integer >= 16")
    t = float(t)
    sig = sigma_matrix(model).matrix
    offset = t * sigma_matrix(model).trace_D_sigma
    if t == 0.0:
        return SigmaIntegral(time=0.0, matrix=np.zeros_like(sig), offset=0.0, error_estimate=0.0)
    h = t / steps
    w_full = simpson_weights(steps)
    w_half = simpson_weights(steps // 2)
    e_step = propagator(model.generator, h)
    node = sig.copy()
    acc_full = np.zeros_like(sig)
    acc_half = np.zeros_like(sig)
    for k in range(steps + 1):
        acc_full += w_full[k] * node
        if k % 2 == 0:
            acc_half += w_half[k // 2] * node
        if k < steps:
            node = e_step.T @ node @ e_step
    b_full = symmetrize(h * acc_full)
    b_half = symmetrize((2.0 * h) * acc_half)
    err = float(np.abs(b_full - b_half).max()) / 15.0
    return SigmaIntegral(time=t, matrix=b_full, offset=offset, error_estimate=err)


def empirical_mgf(model, t, alpha, seed, count, workers=1, steps=None, enforce_domain=True):
    """Monte Carlo estimate of log E_omega[exp(-alpha * int_0^t sigma_s ds)].

    Returns (estimate, std_error); the estimate should match e_t(alpha).
    alpha must sit strictly inside J_t with a 5% relative margin, since the
    integrand stops being integrable at the boundary; enforce_domain=False
    bypasses the check for deliberate boundary probes (the estimator then
    diverges with the sample count by design).  Exponents are max-shifted
    before exponentiation.
    """
    if enforce_domain:
        dom = domain_interval(model, t)
        if not dom.contains(alpha, margin=MGF_DOMAIN_MARGIN):
            raise DomainError(
                f"alpha = {alpha} is not inside J_t = ({dom.lower:.6g}, {dom.upper:.6g}) "
                f"with a {MGF_DOMAIN_MARGIN:.0%} margin"
            )
    if steps is None:
        steps = _default_steps(t)
    b = sigma_integral_matrix(model, t, steps)
    vals = quad_form_samples(model.covariance, [b.matrix], seed, count, workers)[:, 0]
    exponents = -alpha * (vals - b.offset)
    shift = exponents.max()
    scaled = np.exp(exponents - shift)
    mean = float(scaled.mean())
    estimate = shift + math.log(mean)
    std_error = float(scaled.std()) / (mean * math.sqrt(count))
    return estimate, std_error


def _default_steps(t):
    steps = max(64, int(16 * abs(t)))
    return steps + (steps % 2)


def _trajectory_steps(t):
    # trajectory statistics are sampling-noise dominated; a coarser rule is fine
    steps = max(64, int(8 * abs(t)))
    return steps + (steps % 2)


# ---------------------------------------------------------------------------
# trajectory statistics
# ---------------------------------------------------------------------------

_slln_kernels: "weakref.WeakKeyDictionary[Model, dict]" = weakref.WeakKeyDictionary()


def _slln_kernel(model, horizon, steps, n_points):
    """Snapshots of the cumulative Simpson integral at log-spaced times."""
    per = _slln_kernels.setdefault(model, {})
    key = (horizon, steps, n_points)
    if key in per:
        return per[key]
    sig = sigma_matrix(model).matrix
    h = horizon / steps
    # cumulative Simpson needs even node indices; log-space then snap
    targets = sorted({int(round(x / h / 2)) * 2 for x in np.geomspace(max(4 * h, h), horizon, n_points)})
    targets = [k for k in targets if k >= 2]
    e_step = propagator(model.generator, h)
    node = sig.copy()
    acc = np.zeros_like(sig)
    snapshots = []
    k = 0
    for pair in range(steps // 2):
        mid = e_step.T @ node @ e_step
        last = e_step.T @ mid @ e_step
        acc += (h / 3.0) * (node + 4.0 * mid + last)
        node = last
        k += 2
        if k in targets:
            snapshots.append((k * h, symmetrize(acc)))
    per[key] = snapshots
    return snapshots


def slln_trajectory(model, measure, horizon, seed, d_plus=None, n_points=24, steps=None):
    """Time-average entropy production along one draw, on a log-spaced grid.

    Returns a list of (t, Sigma_t) with Sigma_t = (x, B_t x)/t - tr(D sigma)
    for a single x drawn from the reference measure or from the stationary
    covariance d_plus.
    """
    if measure not in ("reference", "ness"):
        raise ValueError("measure must be 'reference' or 'ness'")
    if measure == "ness" and d_plus is None:
        raise ValueError("measure='ness' needs the stationary covariance d_plus")
    if steps is None:
        steps = _trajectory_steps(horizon)
    cov = model.covariance if measure == "reference" else np.asarray(d_plus, float)
    x = (_draw_rows(seed, 0, 1, model.dim) @ np.linalg.cholesky(cov).T)[0]
    tr_term = sigma_matrix(model).trace_D_sigma
    series = []
    for t_k, b_k in _slln_kernel(model, horizon, steps, n_points):
        series.append((t_k, float(x @ (b_k @ x)) / t_k - tr_term))
    return series


@dataclass(frozen=True)
class CltReport:
    """KS distance against the predicted normal, with the sample histogram."""

    ks_distance: float
    bin_edges: np.ndarray
    counts: np.ndarray
    skipped: bool = False
    note: str = ""


def clt_sample(model, measure, t, seed, count, variance, omega_bar, d_plus=None,
               workers=1, steps=None, bins=61):
    """Sample u = t^{-1/2} (int_0^t sigma_s ds - t*omega_bar) and test normality.

    variance is the predicted CLT variance (second derivative of the
    limiting functional); when it vanishes the check is skipped with a
    report, as the limit law is degenerate.
    """
    if measure not in ("reference", "ness"):
        raise ValueError("measure must be 'reference' or 'ness'")
    if variance < 0.0:
        raise ValueError("variance must be nonnegative")
    if variance <= 1e-12:
        return CltReport(
            ks_distance=math.nan,
            bin_edges=np.array([]),
            counts=np.array([]),
            skipped=True,
            note="predicted variance is zero; degenerate limit law, check skipped",
        )
    if measure == "ness" and d_plus is None:
        raise ValueError("measure='ness' needs the stationary covariance d_plus")
    if steps is None:
        steps = _trajectory_steps(t)
    b = sigma_integral_matrix(model, t, steps)
    cov = model.covariance if measure == "reference" else np.asarray(d_plus, float)
    vals = quad_form_samples(cov, [b.matrix], seed, count, workers)[:, 0]
    u = (vals - b.offset - t * omega_bar) / math.sqrt(t)
    from scipy.stats import kstest, norm

    ks = float(kstest(u, norm(loc=0.0, scale=math.sqrt(variance)).cdf).statistic)
    counts, edges = np.histogram(u, bins=bins)
    return CltReport(ks_distance=ks, bin_edges=edges, counts=counts)


def write_histogram_csv(path, report):
    with open(path, "w") as fh:
        fh.write("bin_lo,bin_hi,count\n")
        for lo, hi, c in zip(report.bin_edges[:-1], report.bin_edges[1:], report.counts):
            fh.write("%.17g,%.17g,%d\n" % (lo, hi, c))


# ---------------------------------------------------------------------------
# identity checks
# ---------------------------------------------------------------------------

def trace_identity_report(cov, seed, count, n_mats=10, workers=1):
    """z-scores of mean (x, A x) against tr(cov A) for seeded random symmetric A."""
    cov = np.asarray(cov, dtype=float)
    dim = cov.shape[0]
    rng = np.random.default_rng(int(seed) ^ 0x5EED)
    mats = [symmetrize(rng.standard_normal((dim, dim))) for _ in range(n_mats)]
    vals = quad_form_samples(cov, mats, seed, count, workers)
    rows = []
    for j, a in enumerate(mats):
        oracle = float(np.trace(cov @ a))
        est = float(vals[:, j].mean())
        se = float(vals[:, j].std()) / math.sqrt(count)
        rows.append({"estimate": est, "oracle": oracle, "std_error": se,
                     "z_score": (est - oracle) / se if se > 0 else 0.0})
    return rows


def change_of_measure_report(model, t, seed, count, workers=1):
    """Normalization E_omega[exp(ell_t(x))] = 1 as a z-scored estimate."""
    fp = flow_point(model, t)
    vals = quad_form_samples(model.covariance, [fp.relative_T], seed, count, workers)[:, 0]
    w = np.exp(fp.logdet_term - 0.5 * vals)
    est = float(w.mean())
    se = float(w.std()) / math.sqrt(count)
    return {"estimate": est, "oracle": 1.0, "std_error": se,
            "z_score": (est - 1.0) / se if se > 0 else 0.0}


def propagated_sample_cov_defect(model, cov, t, seed, count, workers=1):
    """Max-abs difference between the sample covariance of e^{tL} x and cov.

    For cov close to the stationary covariance this quantifies empirical
    invariance of the flow.
    """
    cov = np.asarray(cov, dtype=float)
    chol = np.linalg.cholesky(cov)
    e_t = propagator(model.generator, t).T  # rows are propagated by right-multiplication
    dim = cov.shape[0]
    nchunks = len(_chunks(count))
    partials = np.zeros((nchunks, dim, dim))

    def work(a, b, slot):
        y = (_draw_rows(seed, a, b, dim) @ chol.T) @ e_t
        partials[slot] = y.T @ y

    _run_chunks(work, count, workers)
    total = np.zeros((dim, dim))
    for p in partials:
        total += p
    return float(np.abs(total / count - cov).max())
