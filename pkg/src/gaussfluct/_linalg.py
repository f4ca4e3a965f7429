"""Shared dense linear algebra helpers.

Everything here operates on plain float64 numpy arrays and returns new
arrays; inputs are never modified.
"""

import numpy as np
import scipy.linalg as sla

# Refuse propagators past this value of |t| * ||L||; the scaling-and-squaring
# error bound degrades and downstream group-law checks become meaningless.
EXPM_HORIZON_LIMIT = 1.0e4


class AccuracyError(RuntimeError):
    """A numerical accuracy contract cannot be met (e.g. horizon too long)."""


def generator_norm_bound(generator):
    """Cheap upper bound for the spectral norm: sqrt(||A||_1 * ||A||_inf)."""
    a = np.abs(generator)
    return float(np.sqrt(a.sum(axis=0).max() * a.sum(axis=1).max()))


def _connected_components(generator):
    """Index groups of the sparsity graph of generator + generator'."""
    from scipy.sparse import csr_matrix
    from scipy.sparse.csgraph import connected_components

    adj = csr_matrix((np.abs(generator) + np.abs(generator.T)) > 0.0)
    count, labels = connected_components(adj, directed=False)
    if count == 1:
        return None
    return [np.flatnonzero(labels == c) for c in range(count)]


def propagator(generator, t):
    """exp(t * generator) by scaling-and-squaring with diagonal Pade order 13.

    scipy.linalg.expm implements exactly this scheme; accuracy is close to
    machine precision for the horizons admitted here.  Generators whose
    sparsity graph splits into several connected components are exponentiated
    per block (an exact identity that avoids cubing the full dimension).
    """
    if abs(t) * generator_norm_bound(generator) > EXPM_HORIZON_LIMIT:
        raise AccuracyError(
            f"|t|*||L|| = {abs(t) * generator_norm_bound(generator):.3g} exceeds "
            f"{EXPM_HORIZON_LIMIT:.0e}; use a smaller horizon"
        )
    if t == 0.0:
        return np.eye(generator.shape[0])
    groups = _connected_components(generator) if generator.shape[0] >= 256 else None
    if groups is None:
        return sla.expm(t * generator)
    out = np.zeros_like(generator)
    for idx in groups:
        if idx.size == 1:
            out[idx[0], idx[0]] = np.exp(t * generator[idx[0], idx[0]])
        else:
            out[np.ix_(idx, idx)] = sla.expm(t * generator[np.ix_(idx, idx)])
    return out


def symmetrize(a):
    return 0.5 * (a + a.T)


def spd_cholesky(mat):
    """Lower Cholesky factor; LinAlgError if mat is not positive definite."""
    return np.linalg.cholesky(mat)


def spd_inverse(mat):
    """Inverse of an SPD matrix through its Cholesky factorization."""
    c, low = sla.cho_factor(mat, lower=True, check_finite=False)
    inv = sla.cho_solve((c, low), np.eye(mat.shape[0]), check_finite=False)
    return symmetrize(inv)


def spd_sqrt(mat):
    """Symmetric square root of an SPD matrix via eigendecomposition."""
    n = mat.shape[0]
    if np.array_equal(mat, np.eye(n)):
        return np.eye(n)
    w, v = np.linalg.eigh(mat)
    if w[0] <= 0.0:
        raise np.linalg.LinAlgError(
            f"matrix not positive definite (lambda_min = {w[0]:.3e})"
        )
    return symmetrize((v * np.sqrt(w)) @ v.T)


def try_chol_logdet(mat, pivot_floor_rel=1e-13):
    """Attempt a Cholesky factorization; return (ok, logdet).

    ok is False when the factorization fails or any squared pivot falls below
    pivot_floor_rel times the max-abs entry of mat.  logdet is None in that
    case.  The pivot floor keeps barely-positive pencils from being counted
    as interior points of a positivity domain.
    """
    try:
        c = sla.cholesky(mat, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        return False, None
    except sla.LinAlgError:
        return False, None
    piv = np.diagonal(c)
    floor = pivot_floor_rel * max(np.abs(mat).max(), 1e-300)
    if (piv * piv).min() < floor:
        return False, None
    return True, 2.0 * float(np.sum(np.log(piv)))


def simpson_weights(steps):
    """Composite Simpson weights on steps+1 uniform nodes (steps even)."""
    if steps % 2 != 0:
        raise ValueError("composite Simpson needs an even number of steps")
    w = np.ones(steps + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w / 3.0


def parse_grid(text):
    """Parse a 'lo:hi:n' grid specification into a strictly increasing array."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"grid must look like lo:hi:n, got {text!r}")
    lo, hi, num = float(parts[0]), float(parts[1]), int(parts[2])
    if num < 1 or (num > 1 and hi <= lo):
        raise ValueError(f"grid {text!r} is empty or not strictly increasing")
    return np.linspace(lo, hi, num)
