"""Finite-time entropic functionals e_t and their exact positivity domains.

e_t(alpha) is finite exactly where the pencil I + alpha*K_t stays positive
definite, K_t = D^{1/2} T_t D^{1/2}; outside it the value is IEEE +inf.
Domain membership is decided by attempting a Cholesky factorization of the
pencil, with an eigenvalue fallback for alpha within 1e-10 of an endpoint.
"""

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ._linalg import AccuracyError, spd_sqrt, symmetrize, try_chol_logdet
from .flow import flow_point

LOGDET_G4_TOL = 1e-8        # |0.5 logdet(I + D T_t)| cap under time reversal
BOUNDARY_WIDTH = 1e-10      # alpha this close to an endpoint: eigenvalue test
SYMMETRY_RTOL = 1e-6        # relative agreement of delta_t from both spectrum ends
ZERO_PENCIL_FLOOR = 1e-12   # pencils this small are roundoff of T_t = 0


@dataclass(frozen=True)
class DomainInterval:
    """Open interval on which an entropic functional is finite.

    kind 'reference' intervals are symmetric about 1/2 under time reversal,
    with delta_t = -lower; 'ness' intervals carry no symmetry.
    """

    lower: float
    upper: float
    kind: str
    delta_t: float = math.inf

    def contains(self, alpha, margin=0.0):
        width = self.upper - self.lower
        pad = margin * width if math.isfinite(width) else 0.0
        return self.lower + pad < alpha < self.upper - pad


@dataclass(frozen=True)
class EntropicFunctional:
    """Scalar functional of alpha, finite on an open interval, +inf outside."""

    domain: DomainInterval
    evaluator: Callable[[float], float]
    meta: str

    def __call__(self, alpha):
        return self.evaluator(alpha)


def _pencil_interval(eigs):
    """Positivity interval {a : I + a*K > 0} from the spectrum of K."""
    lam_max = float(eigs[-1])
    lam_min = float(eigs[0])
    upper = -1.0 / lam_min if lam_min < 0.0 else math.inf
    lower = -1.0 / lam_max if lam_max > 0.0 else -math.inf
    return lower, upper


def _whitened_eigs(model, t):
    fp = flow_point(model, t)
    per = getattr(fp, "_eigs_cache", None)
    if per is None:
        eigs = np.linalg.eigvalsh(fp.whitened_T)
        object.__setattr__(fp, "_eigs_cache", eigs)
        return eigs
    return per


def domain_interval(model, t):
    """Interval J_t = (-delta_t, 1+delta_t) of finiteness of e_t.

    delta_t = 1/lambda_max(K_t); under time reversal the other endpoint
    satisfies 1 + delta_t = -1/lambda_min(K_t), which is cross-checked.
    Without time reversal the asymmetric interval is returned with a warning.
    """
    if _vanishing_flow(model, t):
        return DomainInterval(lower=-math.inf, upper=math.inf, kind="reference", delta_t=math.inf)
    eigs = _whitened_eigs(model, t)
    lower, upper = _pencil_interval(eigs)
    if not math.isfinite(lower) and not math.isfinite(upper):
        return DomainInterval(lower=-math.inf, upper=math.inf, kind="reference", delta_t=math.inf)
    delta_t = -lower
    symmetric = (
        math.isfinite(lower)
        and math.isfinite(upper)
        and abs(upper - (1.0 + delta_t)) <= SYMMETRY_RTOL * max(1.0, abs(upper))
    )
    if not symmetric:
        warnings.warn(
            f"J_t endpoints ({lower:.6g}, {upper:.6g}) are not symmetric about 1/2; "
            "time-reversal symmetry appears to fail",
            stacklevel=2,
        )
    return DomainInterval(lower=lower, upper=upper, kind="reference", delta_t=delta_t)


def _vanishing_flow(model, t):
    """True when T_t is pure roundoff (the measure is flow-invariant at t)."""
    fp = flow_point(model, t)
    return float(np.abs(fp.whitened_T).max()) <= ZERO_PENCIL_FLOOR


def domain_interval_ness(model, t, d_plus):
    """Interval {alpha : I - alpha * D+^{1/2} T_t D+^{1/2} > 0}; not symmetric."""
    k = _ness_pencil(model, t, d_plus)
    if float(np.abs(k).max()) <= ZERO_PENCIL_FLOOR:
        return DomainInterval(lower=-math.inf, upper=math.inf, kind="ness")
    eigs = np.linalg.eigvalsh(k)
    # I - alpha*K > 0  <=>  I + alpha*(-K) > 0
    lower, upper = _pencil_interval(-eigs[::-1])
    return DomainInterval(lower=lower, upper=upper, kind="ness", delta_t=math.inf)


def _check_logdet_term(model, fp):
    if model.time_reversal is not None and abs(fp.logdet_term) > LOGDET_G4_TOL:
        raise AccuracyError(
            f"0.5*logdet(I + D T_t) = {fp.logdet_term:.3e} at t={fp.time}; "
            "should vanish under time reversal (matrix exponential inaccurate)"
        )


def _pencil_value(eye_plus, alpha, eigs_signed, lower, upper):
    """logdet of the pencil, or None when alpha is outside the domain.

    eigs_signed are the pencil eigenvalue slopes k_i such that the pencil is
    I + alpha*diag(k); used only for the near-boundary classification.
    """
    near_boundary = min(
        abs(alpha - lower) if math.isfinite(lower) else math.inf,
        abs(alpha - upper) if math.isfinite(upper) else math.inf,
    ) <= BOUNDARY_WIDTH
    if near_boundary:
        if lower < alpha < upper:
            vals = 1.0 + alpha * eigs_signed
            return float(np.sum(np.log(vals))) if (vals > 0.0).all() else None
        return None
    ok, logdet = try_chol_logdet(eye_plus)
    return logdet if ok else None


def renyi_entropy(model, t, alpha):
    """e_t(alpha) = (alpha/2)*logdet(I + D T_t) - 0.5*logdet(I + alpha K_t).

    Returns +inf outside the positivity domain; that is a value, not an
    error.  The first term is a free accuracy diagnostic: under time
    reversal it must vanish and is checked against LOGDET_G4_TOL.
    """
    alpha = float(alpha)
    fp = flow_point(model, t)
    _check_logdet_term(model, fp)
    if _vanishing_flow(model, t):
        return 0.0  # flow-invariant measure: omega_t = omega, e_t vanishes
    eigs = _whitened_eigs(model, t)
    lower, upper = _pencil_interval(eigs)
    pencil = np.eye(model.dim) + alpha * fp.whitened_T
    logdet = _pencil_value(pencil, alpha, eigs, lower, upper)
    if logdet is None:
        return math.inf
    return alpha * fp.logdet_term - 0.5 * logdet


def _ness_pencil(model, t, d_plus):
    fp = flow_point(model, t)
    key = ("ness_pencil", id(d_plus))
    cached = getattr(fp, "_ness_cache", None)
    if cached is not None and cached[0] == key:
        return cached[1]
    d_plus = np.asarray(d_plus, dtype=float)
    if np.array_equal(d_plus, np.eye(model.dim)):
        k = fp.relative_T
    else:
        dpsq = spd_sqrt(d_plus)
        k = symmetrize(dpsq @ fp.relative_T @ dpsq)
    object.__setattr__(fp, "_ness_cache", (key, k))
    return k


def renyi_entropy_ness(model, t, alpha, d_plus):
    """NESS functional e_{t+}(alpha) for a stationary covariance d_plus.

    Evaluates -(alpha/2)*logdet(I + D T_t) - 0.5*logdet(I - alpha K+_t) with
    K+_t = D+^{1/2} T_t D+^{1/2}.  The first term uses the reference
    covariance and vanishes under time reversal.
    """
    alpha = float(alpha)
    fp = flow_point(model, t)
    _check_logdet_term(model, fp)
    k = _ness_pencil(model, t, d_plus)
    if float(np.abs(k).max()) <= ZERO_PENCIL_FLOOR:
        return 0.0
    eigs = np.linalg.eigvalsh(k)
    lower, upper = _pencil_interval(-eigs[::-1])
    pencil = np.eye(model.dim) - alpha * k
    logdet = _pencil_value(pencil, alpha, -eigs[::-1], lower, upper)
    if logdet is None:
        return math.inf
    return -alpha * fp.logdet_term - 0.5 * logdet


def reference_functional(model, t):
    """e_t packaged with its domain as an EntropicFunctional."""
    dom = domain_interval(model, t)
    return EntropicFunctional(
        domain=dom,
        evaluator=lambda a: renyi_entropy(model, t, a),
        meta="finite-time-reference",
    )


def ness_functional(model, t, d_plus):
    """e_{t+} packaged with its domain as an EntropicFunctional."""
    d_plus = np.asarray(d_plus, dtype=float)
    dom = domain_interval_ness(model, t, d_plus)
    return EntropicFunctional(
        domain=dom,
        evaluator=lambda a: renyi_entropy_ness(model, t, a, d_plus),
        meta="finite-time-ness",
    )


ALPHA_SCAN_COLUMNS = ("alpha", "e_t", "in_domain")


def alpha_scan(functional, alphas):
    """Rows (alpha, value, in_domain) for a grid of alpha."""
    rows = []
    for a in alphas:
        v = functional(float(a))
        rows.append((float(a), v, int(math.isfinite(v))))
    return rows


def write_alpha_csv(path, rows):
    with open(path, "w") as fh:
        fh.write(",".join(ALPHA_SCAN_COLUMNS) + "\n")
        for a, v, ind in rows:
            fh.write("%.17g,%.17g,%d\n" % (a, v, ind))
