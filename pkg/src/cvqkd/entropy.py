"""Bosonic entropy helpers shared by both security analyses.

All variances are expressed in shot-noise units (SNU): the vacuum
quadrature variance equals 1 and symplectic eigenvalues of physical
covariance matrices are >= 1.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "g_entropy",
    "symplectic_eigenvalues",
    "symplectic_eigenvalues_oracle",
    "NumericDomainError",
]

#: symplectic eigenvalues may undershoot 1 by at most this much before we
#: treat the covariance matrix as unphysical
SYMPLECTIC_TOL = 1e-9

_LN2 = np.log(2.0)


class NumericDomainError(ValueError):
    """Raised when a covariance matrix yields symplectic eigenvalues < 1."""


def g_entropy(x):
    """Von Neumann entropy term G(x) = (x+1)log2(x+1) - x log2(x).

    Accepts scalars or arrays.  G(0) = 0 by continuity; tiny positive
    arguments are evaluated through a series branch because the direct
    expression cancels catastrophically for x below ~1e-8.
    """
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    out = np.zeros_like(x)

    tiny = (x > 0) & (x < 1e-8)
    big = x >= 1e-8
    if np.any(tiny):
        t = x[tiny]
        # (x+1)ln(1+x) - x ln x = x - x ln x + x^2/2 + O(x^3)
        out[tiny] = (t - t * np.log(t) + 0.5 * t * t) / _LN2
    if np.any(big):
        t = x[big]
        out[big] = ((t + 1.0) * np.log1p(t) - t * np.log(t)) / _LN2
    return float(out[0]) if scalar else out


def _check_eigs(nu, tol):
    nu = np.asarray(nu, dtype=float)
    if np.any(nu < 1.0 - tol):
        raise NumericDomainError(
            f"symplectic eigenvalue below 1 beyond tolerance: {nu.min():.12g}"
        )
    return np.maximum(nu, 1.0)


def symplectic_eigenvalues(gamma, tol=SYMPLECTIC_TOL):
    """Symplectic spectrum of a two-mode covariance matrix (closed form).

    ``gamma`` must be 4x4 in (q_A, p_A, q_B, p_B) ordering with block
    structure [[A, C], [C^T, B]].  Returns the pair (nu_plus, nu_minus).
    """
    gamma = np.asarray(gamma, dtype=float)
    if gamma.shape != (4, 4):
        raise ValueError("expected a 4x4 two-mode covariance matrix")
    a = np.linalg.det(gamma[:2, :2])
    b = np.linalg.det(gamma[2:, 2:])
    c = np.linalg.det(gamma[:2, 2:])
    delta = a + b + 2.0 * c
    disc = delta * delta - 4.0 * np.linalg.det(gamma)
    disc = max(disc, 0.0)
    root = np.sqrt(disc)
    nu_p = np.sqrt(max((delta + root) / 2.0, 0.0))
    nu_m = np.sqrt(max((delta - root) / 2.0, 0.0))
    nu_p, nu_m = _check_eigs([nu_p, nu_m], tol)
    return nu_p, nu_m


def symplectic_eigenvalues_oracle(gamma, tol=SYMPLECTIC_TOL):
    """Symplectic spectrum of an n-mode covariance matrix via |i*Omega*Gamma|.

    Independent of the closed-form route: forms the symplectic form for
    qp-interleaved ordering and takes moduli of the eigenvalues, which come
    in pairs.  Returns the n distinct values sorted descending.
    """
    gamma = np.asarray(gamma, dtype=float)
    n2 = gamma.shape[0]
    if n2 % 2 or gamma.shape != (n2, n2):
        raise ValueError("covariance matrix must be square with even dimension")
    n = n2 // 2
    omega = np.zeros((n2, n2))
    for i in range(n):
        omega[2 * i, 2 * i + 1] = 1.0
        omega[2 * i + 1, 2 * i] = -1.0
    ev = np.linalg.eigvals(1j * omega @ gamma)
    ev = np.sort(np.abs(ev))
    nu = ev[::2][::-1].copy()  # eigenvalues come in +/- pairs
    return _check_eigs(nu, tol)
