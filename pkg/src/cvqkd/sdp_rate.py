"""Secret key rate from the semidefinite-programming security analysis.

The bound is valid against general collective attacks.  The worst-case
Alice-Bob correlation Z* is the minimum of the Hermitian correlation
objective over all bipartite states X compatible with what is observed:
Bob's total variance nu = 1 + 2 T alpha^2 + T eps, the key-to-quadrature
displacement 2 sqrt(T) alpha, and Alice's reduced state, which the channel
cannot touch and whose matrix elements between the register states equal
one quarter of the coherent-state Gram matrix.

Implementation notes
--------------------
* Alice's side is restricted to the four-dimensional span of the modulated
  states.  Every operator appearing in the program is sandwiched by the
  projector onto that span, so the restriction is exact, and the span is
  closed under the annihilation operator.  The working basis is the
  residue-class eigenbasis phi_m of Alice's average state, in which the
  Gram constraints become simply rho_A = diag(p_0..p_3).
* In this basis all constraint matrices and the objective either are real
  symmetric or pair an imaginary-antisymmetric Alice factor with an
  imaginary-antisymmetric Bob factor (yielding a real product), and for any
  feasible Hermitian X its real part is feasible with the same objective.
  The program is therefore solved over real symmetric matrices.
* The detector is ideal in this analysis (eta = 1, v_el = 0); the trusted
  detector model lives in the LCA module only.

The internal ensemble uses the axis-aligned state convention (offset 0).
A global phase-space rotation maps it to the protocol convention; every
quantity computed here is invariant under that rotation.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .entropy import NumericDomainError, g_entropy, symplectic_eigenvalues
from .fock import FockOperatorSet, FourStateEnsemble
from .lca import null_skr_threshold
from .params import ChannelScenario, InvalidParameterError, ProtocolParams, SkrReport
from .sdp_solver import solve_sdp

__all__ = [
    "SdpSolution",
    "assemble_correlation_program",
    "solve_correlation_sdp",
    "holevo_bound_sdp",
    "mutual_information_sdp",
    "skr_sdp",
    "sdp_key_fraction",
    "null_skr_threshold_sdp",
    "DEFAULT_CUTOFF",
]

DEFAULT_CUTOFF = 16


@dataclass
class SdpSolution:
    z_star: float
    nu: float                    # Bob variance 1 + 2T alpha^2 + T eps
    gamma_star: np.ndarray       # 4x4 optimized covariance matrix
    dual_gap: float
    cutoff: int
    alpha: float
    transmittance: float
    excess_noise: float
    iterations: int = 0
    primal_residual: float = 0.0
    min_eig_x: float = 0.0
    notes: dict = field(default_factory=dict)


def _gamma_star(alpha, nu, z):
    a = 1.0 + 2.0 * alpha * alpha
    g = np.diag([a, a, nu, nu])
    g[0, 2] = g[2, 0] = z
    g[1, 3] = g[3, 1] = -z
    return g


def assemble_correlation_program(alpha, transmittance, excess_noise, cutoff):
    """Build (C, [A_i], b) for the correlation minimization, real symmetric.

    Variable ordering: Alice phi-basis index m (4) times Bob Fock index
    (cutoff+1).  Returns the objective, constraints, right-hand side and a
    dict of the building blocks for inspection and external cross-checks.
    """
    if not 0.0 < transmittance <= 1.0:
        raise InvalidParameterError("transmittance must be in (0, 1]")
    if excess_noise < 0.0:
        raise InvalidParameterError("excess noise must be >= 0")
    ens = FourStateEnsemble(alpha, cutoff, offset=0.0)
    ops = FockOperatorSet(cutoff)
    d = cutoff + 1
    nu = 1.0 + 2.0 * transmittance * alpha * alpha + transmittance * excess_noise

    # objective: correlation witness  S_a (x) b + h.c.  (real at offset 0)
    s_a = ens.annihilation_on_span().real
    c_obj = np.kron(s_a, ops.a) + np.kron(s_a.T, ops.a_dag)

    # Bob variance:  I (x) (1 + 2 n)
    a_var = np.kron(np.eye(4), ops.identity + 2.0 * ops.n)

    # displacement:  D_q (x) q + D_p (x) p   with D_q/D_p built from the
    # orthonormal register states; the imaginary-antisymmetric pair makes
    # the p-term real
    reg = ens.register
    d_q = np.real(np.outer(reg[0], reg[0].conj()) - np.outer(reg[2], reg[2].conj()))
    d_p_im = np.imag(np.outer(reg[1], reg[1].conj()) - np.outer(reg[3], reg[3].conj()))
    p_im = np.imag(ops.p)
    a_disp = np.kron(d_q, ops.q.real) - np.kron(d_p_im, p_im)

    constraints = [a_var, a_disp]
    rhs = [nu, 2.0 * math.sqrt(transmittance) * alpha]

    # Alice marginal: tr_B X = diag(p_m) expressed entrywise (the Gram
    # constraints in the register frame are equivalent to this diagonal form)
    eye_b = np.eye(d)
    for m in range(4):
        e = np.zeros((4, 4))
        e[m, m] = 1.0
        constraints.append(np.kron(e, eye_b))
        rhs.append(ens.weights[m])
    for m in range(4):
        for mm in range(m + 1, 4):
            e = np.zeros((4, 4))
            e[m, mm] = e[mm, m] = 1.0
            constraints.append(np.kron(e, eye_b))
            rhs.append(0.0)

    blocks = {
        "ensemble": ens,
        "objective": c_obj,
        "bob_variance_op": a_var,
        "displacement_op": a_disp,
        "nu": nu,
        "gram": ens.gram,
    }
    return c_obj, constraints, np.array(rhs), blocks


def solve_correlation_sdp(alpha, transmittance, excess_noise,
                          cutoff=DEFAULT_CUTOFF, tol=1e-6, max_iters=100_000,
                          dump_path=None):
    """Minimize the correlation objective; returns the SdpSolution.

    ``dump_path`` writes the assembled program (objective, constraint
    matrices, right-hand side, Gram matrix) as JSON for cross-validation
    against external solvers.
    """
    c_obj, constraints, rhs, blocks = assemble_correlation_program(
        alpha, transmittance, excess_noise, cutoff)
    if dump_path is not None:
        _dump_program(dump_path, c_obj, constraints, rhs, blocks)
    res = solve_sdp(c_obj, constraints, rhs, tol=tol, max_iters=max_iters)
    nu = blocks["nu"]
    z = res.objective
    sol = SdpSolution(
        z_star=z,
        nu=nu,
        gamma_star=_gamma_star(alpha, nu, z),
        dual_gap=res.dual_gap,
        cutoff=cutoff,
        alpha=alpha,
        transmittance=transmittance,
        excess_noise=excess_noise,
        iterations=res.iterations,
        primal_residual=res.primal_residual,
        min_eig_x=res.min_eig_x,
    )
    return sol


def _dump_program(path, c_obj, constraints, rhs, blocks):
    payload = {
        "objective": c_obj.tolist(),
        "constraints": [a.tolist() for a in constraints],
        "rhs": np.asarray(rhs).tolist(),
        "nu": blocks["nu"],
        "gram_real": blocks["gram"].real.tolist(),
        "gram_imag": blocks["gram"].imag.tolist(),
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)


def holevo_bound_sdp(sol: SdpSolution):
    """S_BE from the optimized covariance matrix, bits per symbol.

    nu_1, nu_2 are the symplectic eigenvalues of gamma_star; the
    heterodyne-conditioned eigenvalue is nu_3 = 1 + 2 alpha^2 - Z^2/(1+nu).
    """
    n1, n2 = symplectic_eigenvalues(sol.gamma_star)
    n3 = 1.0 + 2.0 * sol.alpha ** 2 - sol.z_star ** 2 / (1.0 + sol.nu)
    if n3 < 1.0 - 1e-9:
        raise NumericDomainError(f"conditional eigenvalue {n3:.12g} < 1")
    n3 = max(n3, 1.0)
    s = (g_entropy((n1 - 1.0) / 2.0) + g_entropy((n2 - 1.0) / 2.0)
         - g_entropy((n3 - 1.0) / 2.0))
    return max(s, 0.0)


def mutual_information_sdp(alpha, transmittance, excess_noise):
    """I_AB = log2(1 + 2 T alpha^2 / (2 + T eps)), ideal detector."""
    if transmittance <= 0:
        raise InvalidParameterError("transmittance must be > 0")
    if alpha < 0 or excess_noise < 0:
        raise InvalidParameterError("alpha and excess noise must be >= 0")
    t = transmittance
    return math.log2(1.0 + 2.0 * t * alpha * alpha / (2.0 + t * excess_noise))


def sdp_key_fraction(p: ProtocolParams, c: ChannelScenario,
                     cutoff=DEFAULT_CUTOFF, tol=1e-6):
    """beta*I_AB - S_BE for the SDP analysis (eta = 1, v_el = 0)."""
    sol = solve_correlation_sdp(p.alpha, c.transmittance, c.excess_noise,
                                cutoff=cutoff, tol=tol)
    i_ab = mutual_information_sdp(p.alpha, c.transmittance, c.excess_noise)
    s_be = holevo_bound_sdp(sol)
    return p.beta * i_ab - s_be, i_ab, s_be, sol


def skr_sdp(p: ProtocolParams, c: ChannelScenario, cutoff=DEFAULT_CUTOFF,
            tol=1e-6):
    """Asymptotic SKR under the SDP analysis; detector modeled ideal."""
    frac, i_ab, s_be, sol = sdp_key_fraction(p, c, cutoff=cutoff, tol=tol)
    skr = p.r_sym * max(0.0, frac)
    return SkrReport(i_ab=i_ab, s_be=s_be, skr_bps=skr, method="SDP",
                     r_sym=p.r_sym, beta=p.beta,
                     notes={"cutoff": cutoff,
                            "z_star": sol.z_star,
                            "dual_gap": sol.dual_gap,
                            "transmittance": c.transmittance,
                            "excess_noise": c.excess_noise})


def null_skr_threshold_sdp(p: ProtocolParams, c: ChannelScenario,
                           cutoff=DEFAULT_CUTOFF, tol_bits=1e-4, eps_hi=0.05):
    """Null-SKR excess-noise threshold for the SDP analysis."""

    def frac(eps):
        return sdp_key_fraction(p, c.with_excess_noise(eps), cutoff=cutoff)[0]

    return null_skr_threshold(p, c, method="SDP", tol_bits=tol_bits,
                              eps_hi=eps_hi, key_fraction=frac)
