"""Truncated Fock-space machinery for the four-state ensemble.

The four coherent states sit at phase-space angles theta_k = k*pi/2 + offset
with offset = pi/4 in the protocol convention (states in the quadrant
centers, matching the quadrant key map) and offset = 0 in the convention
used internally by the semidefinite program.  A global phase-space rotation
relates the two; all security quantities are invariant under it.

The average modulated state is block-diagonal over photon-number residue
classes n = m (mod 4).  Its eigenvectors phi_m live one per class and the
four of them span exactly span{|psi_k>}; the span is closed under the
annihilation operator, with a|phi_m> proportional to |phi_{m-1 mod 4}>.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln

from .lca import residue_class_weights
from .params import InvalidParameterError

__all__ = [
    "FockOperatorSet",
    "FourStateEnsemble",
    "build_fock_operators",
    "coherent_state_fock",
    "coherent_overlap",
    "CutoffTooSmallError",
]

PROTOCOL_OFFSET = math.pi / 4.0


class CutoffTooSmallError(ValueError):
    """Truncated state norm deficit exceeds tolerance."""


class FockOperatorSet:
    """Ladder and quadrature operators on a Fock space truncated at n <= cutoff.

    Quadratures follow q = a + a^dag, p = -i(a - a^dag) so that the vacuum
    variance is 1 (SNU) and [q, p] = 2i away from the truncation boundary.
    """

    def __init__(self, cutoff):
        if cutoff < 4:
            raise InvalidParameterError("cutoff must be >= 4")
        self.cutoff = int(cutoff)
        d = self.cutoff + 1
        self.a = np.diag(np.sqrt(np.arange(1.0, d)), 1)
        self.a_dag = self.a.T.copy()
        self.n = np.diag(np.arange(d, dtype=float))
        self.q = self.a + self.a_dag
        self.p = -1j * (self.a - self.a_dag)
        self.identity = np.eye(d)

    @property
    def dim(self):
        return self.cutoff + 1

    def projector_span(self, states):
        """Orthogonal projector onto span{states} built by Gram-Schmidt."""
        basis = []
        for v in states:
            w = v.astype(complex).copy()
            for b in basis:
                w -= np.vdot(b, w) * b
            nrm = np.linalg.norm(w)
            if nrm > 1e-12:
                basis.append(w / nrm)
        pi = np.zeros((self.dim, self.dim), dtype=complex)
        for b in basis:
            pi += np.outer(b, b.conj())
        return pi


def build_fock_operators(cutoff):
    return FockOperatorSet(cutoff)


def coherent_state_fock(alpha, k, cutoff, offset=PROTOCOL_OFFSET,
                        deficit_tol=1e-8):
    """Fock coefficients of |alpha * exp(i*(k*pi/2 + offset))>.

    With the default offset pi/4 the coefficient of |n> is
    exp(-alpha^2/2) * exp(i(2k+1) n pi/4) * alpha^n / sqrt(n!).
    Raises CutoffTooSmallError when the truncated norm deficit exceeds
    ``deficit_tol``.
    """
    if alpha < 0:
        raise InvalidParameterError("alpha must be >= 0")
    d = int(cutoff) + 1
    n = np.arange(d)
    if alpha == 0:
        mag = np.zeros(d)
        mag[0] = 1.0
    else:
        log_mag = -0.5 * alpha * alpha + n * math.log(alpha) - 0.5 * gammaln(n + 1.0)
        mag = np.exp(log_mag)
    theta = k * math.pi / 2.0 + offset
    vec = mag * np.exp(1j * n * theta)
    deficit = abs(1.0 - np.vdot(vec, vec).real)
    if deficit > deficit_tol:
        raise CutoffTooSmallError(
            f"norm deficit {deficit:.3e} at cutoff {cutoff} (alpha={alpha:g})"
        )
    return vec


def coherent_overlap(beta, gamma):
    """Closed-form <beta|gamma> = exp(-(|b|^2+|g|^2)/2 + conj(b)*g)."""
    return np.exp(-0.5 * (abs(beta) ** 2 + abs(gamma) ** 2) + np.conj(beta) * gamma)


class FourStateEnsemble:
    """Four-state ensemble on a truncated Fock space.

    Holds the coherent states psi_k, the residue-class eigenbasis phi_m of
    the average state, the decomposition coefficients linking the two, the
    orthonormal register states beta_k used by the SDP constraints, and the
    coherent Gram matrix.
    """

    def __init__(self, alpha, cutoff, offset=PROTOCOL_OFFSET, deficit_tol=1e-8):
        if alpha <= 0:
            raise InvalidParameterError("alpha must be > 0")
        self.alpha = float(alpha)
        self.cutoff = int(cutoff)
        self.offset = float(offset)
        d = self.cutoff + 1

        self.psi = np.stack([
            coherent_state_fock(alpha, k, cutoff, offset, deficit_tol)
            for k in range(4)
        ])

        # residue-class eigenvectors of the average state: support on
        # n = m (mod 4), coefficient exp(i n offset) alpha^n/sqrt(n! xi_m)
        xi_bare = residue_class_weights(alpha, normalized=False)
        self.weights = residue_class_weights(alpha, normalized=True)  # p_m
        n = np.arange(d)
        if alpha > 0:
            log_mag = n * math.log(alpha) - 0.5 * gammaln(n + 1.0)
        phi = np.zeros((4, d), dtype=complex)
        for m in range(4):
            sel = (n % 4) == m
            phi[m, sel] = np.exp(log_mag[sel] - 0.5 * math.log(xi_bare[m])) \
                * np.exp(1j * n[sel] * offset)
        self.phi = phi

        # psi_k = sum_m exp(i k m pi/2) sqrt(p_m) phi_m (independent of offset)
        self.decomposition = np.array([
            [np.exp(1j * k * m_ * math.pi / 2.0) * math.sqrt(self.weights[m_])
             for m_ in range(4)] for k in range(4)
        ])

        # orthonormal register states (phi basis): beta_k[m] = exp(-i k m pi/2)/2
        self.register = np.array([
            [0.5 * np.exp(-1j * k * m_ * math.pi / 2.0) for m_ in range(4)]
            for k in range(4)
        ])

        self.gram = np.array([
            [coherent_overlap(self._amp(l), self._amp(k)) for k in range(4)]
            for l in range(4)
        ])

    def _amp(self, k):
        return self.alpha * np.exp(1j * (k * math.pi / 2.0 + self.offset))

    @property
    def dim(self):
        return self.cutoff + 1

    def reconstruct_psi(self, k):
        """Rebuild psi_k from the phi basis; matches the direct expansion."""
        return self.decomposition[k] @ self.phi

    def annihilation_on_span(self):
        """4x4 matrix of the annihilation operator in the phi basis.

        Exact on the untruncated space: a phi_m = c_m phi_{m-1 mod 4} with
        c_m = alpha sqrt(xi_{m-1}/xi_m) (bare weights; ratios equal for the
        normalized ones).  The phase convention contributes exp(+i offset)
        per lowering, which drops out of every Hermitian combination used
        downstream; kept here for exactness.
        """
        xi = residue_class_weights(self.alpha, normalized=False)
        s = np.zeros((4, 4), dtype=complex)
        for m in range(4):
            s[(m - 1) % 4, m] = (self.alpha
                                 * math.sqrt(xi[(m - 1) % 4] / xi[m])
                                 * np.exp(1j * self.offset))
        return s

    def norm_deficits(self):
        return np.array([abs(1.0 - np.vdot(v, v).real) for v in self.psi])
