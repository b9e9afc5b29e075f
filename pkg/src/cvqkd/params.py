"""Protocol and channel parameter containers.

Conventions (documented once here, used everywhere):

* SNU: shot-noise units, vacuum quadrature variance = 1.
* ``v_a`` is the per-quadrature modulation variance V_A = 2 alpha^2.
* Excess noise ``excess_noise`` is referred to the channel input.
* Heterodyne detection measures both quadratures; Bob's per-quadrature
  variance is eta*T*(V_A + eps)/2 + 1 + v_el.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

__all__ = ["ProtocolParams", "ChannelScenario", "SkrReport", "InvalidParameterError"]


class InvalidParameterError(ValueError):
    pass


def _require(cond, msg):
    if not cond:
        raise InvalidParameterError(msg)


@dataclass(frozen=True)
class ProtocolParams:
    """Transmitter/receiver operating point.

    ``alpha`` is the coherent amplitude; ``v_a`` is kept consistent with
    2*alpha^2 by construction (use :meth:`from_va` or :meth:`from_alpha`).
    """

    alpha: float
    v_a: float
    eta: float = 0.45        # detector quantum efficiency
    v_el: float = 0.297      # detector electronic noise, SNU
    beta: float = 0.95       # reconciliation efficiency
    r_sym: float = 5e9       # symbol rate, Baud

    def __post_init__(self):
        for name in ("alpha", "v_a", "eta", "v_el", "beta", "r_sym"):
            _require(math.isfinite(getattr(self, name)), f"{name} must be finite")
        _require(self.alpha > 0, "alpha must be > 0")
        _require(abs(self.v_a - 2.0 * self.alpha**2) <= 1e-12 * max(1.0, self.v_a),
                 "v_a must equal 2*alpha^2")
        _require(0.0 < self.eta <= 1.0, "eta must be in (0, 1]")
        _require(self.v_el >= 0.0, "v_el must be >= 0")
        _require(0.0 < self.beta <= 1.0, "beta must be in (0, 1]")
        _require(self.r_sym > 0.0, "r_sym must be > 0")

    @classmethod
    def from_va(cls, v_a, **kw):
        return cls(alpha=math.sqrt(v_a / 2.0), v_a=v_a, **kw)

    @classmethod
    def from_alpha(cls, alpha, **kw):
        return cls(alpha=alpha, v_a=2.0 * alpha**2, **kw)


@dataclass(frozen=True)
class ChannelScenario:
    """Fiber link description.

    ``transmittance`` is derived as 10^(-(attenuation*L + insertion_loss)/10)
    unless supplied directly.  ``insertion_loss_db`` models fixed connector
    and splice losses on top of the per-km fiber attenuation; it defaults to
    zero so the plain attenuation*distance law holds out of the box.
    """

    distance_km: float = 0.0
    attenuation_db_per_km: float = 0.2
    insertion_loss_db: float = 0.0
    excess_noise: float = 0.0
    linewidth_a_hz: float = 100.0
    linewidth_b_hz: float = 100.0
    transmittance: float = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        _require(self.distance_km >= 0.0, "distance_km must be >= 0")
        _require(self.attenuation_db_per_km >= 0.0, "attenuation must be >= 0")
        _require(self.insertion_loss_db >= 0.0, "insertion loss must be >= 0")
        _require(self.excess_noise >= 0.0, "excess_noise must be >= 0")
        if self.transmittance is None:
            loss_db = self.attenuation_db_per_km * self.distance_km + self.insertion_loss_db
            object.__setattr__(self, "transmittance", 10.0 ** (-loss_db / 10.0))
        _require(0.0 < self.transmittance <= 1.0, "transmittance must be in (0, 1]")

    def with_excess_noise(self, eps):
        return ChannelScenario(
            distance_km=self.distance_km,
            attenuation_db_per_km=self.attenuation_db_per_km,
            insertion_loss_db=self.insertion_loss_db,
            excess_noise=eps,
            linewidth_a_hz=self.linewidth_a_hz,
            linewidth_b_hz=self.linewidth_b_hz,
            transmittance=self.transmittance,
        )


@dataclass
class SkrReport:
    """Secret-key-rate result for one scenario and one analysis method."""

    i_ab: float                 # bits/symbol
    s_be: float                 # bits/symbol
    skr_bps: float              # bits/second, clamped at zero
    method: str                 # "LCA" | "SDP"
    r_sym: float
    beta: float
    threshold_epsilon: float | None = None
    notes: dict = field(default_factory=dict)

    @property
    def key_fraction(self):
        """beta*I_AB - S_BE in bits/symbol (may be negative before clamping)."""
        return self.beta * self.i_ab - self.s_be

    def as_dict(self):
        d = {
            "method": self.method,
            "i_ab_bits": self.i_ab,
            "s_be_bits": self.s_be,
            "skr_bps": self.skr_bps,
            "r_sym": self.r_sym,
            "beta": self.beta,
        }
        if self.threshold_epsilon is not None:
            d["threshold_epsilon"] = self.threshold_epsilon
        if self.notes:
            d["notes"] = dict(self.notes)
        return d
