"""Secret key rate under the linear-channel-assuming (LCA) analysis.

Trusted-detector model: the channel contributes chi_line = 1/T - 1 + eps,
the heterodyne receiver contributes chi_het = ((2 - eta) + 2*v_el)/eta
referred to Bob's input.  Eve is assumed to purify the channel only, so the
Holevo bound conditions on Bob's measurement through the detector model.

The discrete four-state modulation enters through the correlation Z4, which
replaces the Gaussian-modulation sqrt(V^2 - 1) in the covariance matrix and
carries the modulation penalty Z4 < sqrt(V^2 - 1).
"""

from __future__ import annotations

import math

import numpy as np

from .entropy import g_entropy, symplectic_eigenvalues, NumericDomainError
from .params import ChannelScenario, InvalidParameterError, ProtocolParams, SkrReport

__all__ = [
    "correlation_z4",
    "mutual_information_lca",
    "holevo_bound_lca",
    "skr_lca",
    "null_skr_threshold",
    "covariance_matrix_lca",
    "DegenerateInputError",
    "NoRootError",
]


class DegenerateInputError(ValueError):
    """Amplitude so small that the residue-class weights underflow."""


class NoRootError(RuntimeError):
    """Threshold search precondition failed: SKR(eps=0) <= 0."""


def residue_class_weights(alpha, normalized=True):
    """Weights xi_m of the four photon-number residue classes n = m (mod 4).

    With ``normalized`` the exp(-alpha^2) factor is included so the weights
    are the eigenvalues of the average modulated state and sum to 1; without
    it they are the bare quadrisected exponential series (the two variants
    differ exactly by exp(-alpha^2)).
    """
    a2 = alpha * alpha
    xi = np.array([
        0.5 * (math.cosh(a2) + math.cos(a2)),
        0.5 * (math.sinh(a2) + math.sin(a2)),
        0.5 * (math.cosh(a2) - math.cos(a2)),
        0.5 * (math.sinh(a2) - math.sin(a2)),
    ])
    if normalized:
        xi = xi * math.exp(-a2)
    return xi


def correlation_z4(alpha):
    """Four-state correlation Z4 = 2 alpha^2 * sum_m xi_{m-1}^{3/2} xi_m^{-1/2}.

    Uses the normalized residue-class weights.  Satisfies
    0 < Z4 <= sqrt(V^2 - 1) with V = 1 + 2 alpha^2, approaching equality as
    alpha -> 0.
    """
    if alpha <= 0:
        raise InvalidParameterError("alpha must be > 0")
    xi = residue_class_weights(alpha, normalized=True)
    if np.any(xi <= 0.0) or not np.all(np.isfinite(xi)):
        raise DegenerateInputError(
            f"residue-class weights underflow at alpha={alpha:g}"
        )
    s = sum(xi[(m - 1) % 4] ** 1.5 * xi[m] ** -0.5 for m in range(4))
    if not math.isfinite(s):
        raise DegenerateInputError(
            f"correlation sum not finite at alpha={alpha:g}"
        )
    return 2.0 * alpha * alpha * s


def _chi_line(c: ChannelScenario):
    return 1.0 / c.transmittance - 1.0 + c.excess_noise


def _chi_het(p: ProtocolParams):
    return ((2.0 - p.eta) + 2.0 * p.v_el) / p.eta


def mutual_information_lca(p: ProtocolParams, c: ChannelScenario):
    """Alice-Bob mutual information, bits per symbol (both quadratures)."""
    if c.transmittance <= 0:
        raise InvalidParameterError("transmittance must be > 0")
    if p.eta <= 0:
        raise InvalidParameterError("eta must be > 0")
    v = p.v_a + 1.0
    chi_tot = _chi_line(c) + _chi_het(p) / c.transmittance
    return math.log2((v + chi_tot) / (1.0 + chi_tot))


def covariance_matrix_lca(p: ProtocolParams, c: ChannelScenario, z=None):
    """Two-mode covariance matrix of the state at the channel output.

    Ordering (q_A, p_A, q_B, p_B); correlation block sqrt(T)*z*sigma_z.
    ``z`` defaults to the four-state Z4; passing sqrt(V^2-1) instead gives
    the Gaussian-modulation (pure-state) limit used as a test hook.
    """
    if z is None:
        z = correlation_z4(p.alpha)
    v = p.v_a + 1.0
    t = c.transmittance
    vb = t * (v + _chi_line(c))
    csz = math.sqrt(t) * z
    g = np.diag([v, v, vb, vb])
    g[0, 2] = g[2, 0] = csz
    g[1, 3] = g[3, 1] = -csz
    return g


def holevo_bound_lca(p: ProtocolParams, c: ChannelScenario, z=None):
    """Holevo bound S_BE for reverse reconciliation, bits per symbol.

    Closed-form route: symplectic invariants A, B of the channel-output
    covariance matrix give lambda_{1,2}; the heterodyne-conditioned
    invariants C, D give lambda_{3,4}; then
    S_BE = G((l1-1)/2) + G((l2-1)/2) - G((l3-1)/2) - G((l4-1)/2).
    """
    if z is None:
        z = correlation_z4(p.alpha)
    t = c.transmittance
    if t <= 0:
        raise InvalidParameterError("transmittance must be > 0")
    v = p.v_a + 1.0
    chi_line = _chi_line(c)
    chi_het = _chi_het(p)
    chi_tot = chi_line + chi_het / t

    a = v * v + t * t * (v + chi_line) ** 2 - 2.0 * t * z * z
    b = (t * v * v + t * v * chi_line - t * z * z) ** 2
    den = (t * (v + chi_tot)) ** 2
    sqrt_b = math.sqrt(max(b, 0.0))
    cc = (a * chi_het**2 + b + 1.0
          + 2.0 * chi_het * (v * sqrt_b + t * (v + chi_line))
          + 2.0 * t * z * z) / den
    dd = (v + sqrt_b * chi_het) ** 2 / den

    lam12 = _lambda_pair(a, b)
    lam34 = _lambda_pair(cc, dd)
    s = (g_entropy((lam12[0] - 1.0) / 2.0) + g_entropy((lam12[1] - 1.0) / 2.0)
         - g_entropy((lam34[0] - 1.0) / 2.0) - g_entropy((lam34[1] - 1.0) / 2.0))
    return max(s, 0.0)


def _lambda_pair(inv_sum, inv_det):
    """lambda_{+,-} = sqrt((s +/- sqrt(s^2 - 4 d))/2), validated >= 1."""
    disc = inv_sum * inv_sum - 4.0 * inv_det
    disc = max(disc, 0.0)
    root = math.sqrt(disc)
    lp = math.sqrt(max((inv_sum + root) / 2.0, 0.0))
    lm = math.sqrt(max((inv_sum - root) / 2.0, 0.0))
    for lam in (lp, lm):
        if lam < 1.0 - 1e-9:
            raise NumericDomainError(
                f"symplectic eigenvalue {lam:.12g} < 1: inconsistent inputs"
            )
    return max(lp, 1.0), max(lm, 1.0)


def skr_lca(p: ProtocolParams, c: ChannelScenario):
    """Asymptotic secret key rate R = R_sym * max(0, beta*I_AB - S_BE)."""
    i_ab = mutual_information_lca(p, c)
    s_be = holevo_bound_lca(p, c)
    skr = p.r_sym * max(0.0, p.beta * i_ab - s_be)
    return SkrReport(i_ab=i_ab, s_be=s_be, skr_bps=skr, method="LCA",
                     r_sym=p.r_sym, beta=p.beta,
                     notes={"transmittance": c.transmittance,
                            "excess_noise": c.excess_noise})


def null_skr_threshold(p: ProtocolParams, c: ChannelScenario, method="LCA",
                       tol_bits=1e-6, eps_hi=0.5, key_fraction=None):
    """Largest excess noise with non-negative key fraction, by bisection.

    ``key_fraction(eps)`` defaults to the LCA beta*I_AB - S_BE at the given
    scenario; the SDP module passes its own callable.  Assumes (and relies
    on) the key fraction being decreasing in eps.
    """
    if key_fraction is None:
        if method.upper() != "LCA":
            raise InvalidParameterError("pass key_fraction for non-LCA methods")

        def key_fraction(eps):
            cc = c.with_excess_noise(eps)
            return p.beta * mutual_information_lca(p, cc) - holevo_bound_lca(p, cc)

    f0 = key_fraction(0.0)
    if f0 <= 0.0:
        raise NoRootError("SKR is not positive even at eps = 0")

    lo, hi = 0.0, eps_hi
    f_hi = key_fraction(hi)
    while f_hi > 0.0:
        lo, hi = hi, hi * 2.0
        if hi > 64.0:
            raise NoRootError("no null-SKR threshold below eps = 64")
        f_hi = key_fraction(hi)

    f_lo = f0
    while True:
        mid = 0.5 * (lo + hi)
        f_mid = key_fraction(mid)
        if abs(f_mid) < tol_bits or (hi - lo) < 1e-12:
            return mid
        if f_mid > 0.0:
            lo, f_lo = mid, f_mid
        else:
            hi = mid
