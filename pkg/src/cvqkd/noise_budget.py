"""Excess-noise budget: per-component contributions in SNU.

Each term models one hardware imperfection of the transceiver, referred to
the channel input, and the total is their plain sum.  All inputs are SI
units unless stated otherwise; outputs are SNU.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, asdict

from scipy.constants import h as PLANCK_H

from .params import InvalidParameterError

__all__ = [
    "HardwareProfile",
    "NoiseBudget",
    "epsilon_rin",
    "epsilon_dac",
    "epsilon_mod",
    "epsilon_leak",
    "epsilon_det",
    "epsilon_adc",
    "epsilon_phase_fast",
    "epsilon_phase",
    "total_budget",
    "paper_architecture_profile",
    "rf_subcarrier_profile",
]


@dataclass(frozen=True)
class HardwareProfile:
    """Hardware parameters feeding the excess-noise model.

    The architecture flags mirror the design trade at the heart of the
    transceiver: with the pilot generated in a separate optical path and
    kept in a disjoint frequency band, the pilot-coupled terms (modulation,
    photon leakage) vanish and the low-frequency noise is avoided by the
    intermediate-frequency detection.
    """

    rin_quan: float = 1e-14          # signal-laser RIN, 1/Hz
    rin_lo: float = 1e-14            # LO RIN, 1/Hz
    bandwidth_b: float = 10e9        # electronic bandwidth, Hz
    v_dac: float = 0.5               # DAC full-scale voltage, V
    delta_v_dac: float = 0.0         # DAC LSB voltage, V (0: separate-path preset)
    d_db: float = math.inf           # modulator extinction ratio, dB
    a_r_sq: float = 0.0              # pilot amplitude squared seen by the
                                     # quantum path, SNU (0 when isolated)
    r_e: float = math.inf            # pilot isolation ratio, linear
    nep: float = 2.5e-13             # noise-equivalent power, W/sqrt(Hz)
    p_lo: float = 0.02               # LO power, W
    f_opt: float = 193.4e12          # optical frequency, Hz
    tau: float = 0.2e-9              # pulse duration, s
    g: float = 2e4                   # amplifier gain, V/A
    rho: float = 0.85                # PIN responsivity, A/W
    r_u: float = 0.4                 # ADC full range, V
    n_bits: int = 8                  # ADC bits
    linewidth_a: float = 100.0       # Alice laser linewidth, Hz
    linewidth_b: float = 100.0       # Bob laser linewidth, Hz
    epsilon_lf: float = 0.0          # low-frequency quantum noise, SNU

    def __post_init__(self):
        for name in ("rin_quan", "rin_lo", "bandwidth_b", "v_dac",
                     "delta_v_dac", "a_r_sq", "nep", "p_lo", "f_opt", "tau",
                     "g", "rho", "r_u", "linewidth_a", "linewidth_b",
                     "epsilon_lf"):
            if getattr(self, name) < 0:
                raise InvalidParameterError(f"{name} must be >= 0")
        if not 1 <= self.n_bits <= 16:
            raise InvalidParameterError("n_bits must be in [1, 16]")


@dataclass
class NoiseBudget:
    rin: float
    dac: float
    mod: float
    leak: float
    det: float
    adc: float
    phase_fast: float
    phase_slow: float

    @property
    def total(self):
        return (self.rin + self.dac + self.mod + self.leak + self.det
                + self.adc + self.phase_fast + self.phase_slow)

    def rows(self):
        """(term, formula id, SNU value) rows for table export."""
        return [
            ("rin", "relative-intensity", self.rin),
            ("dac", "dac-quantization", self.dac),
            ("mod", "modulator-extinction", self.mod),
            ("leak", "photon-leakage", self.leak),
            ("det", "detection", self.det),
            ("adc", "adc-quantization", self.adc),
            ("phase_fast", "fast-drift-phase", self.phase_fast),
            ("phase_slow", "slow-drift-phase", self.phase_slow),
        ]

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["term", "formula", "epsilon_snu"])
        for row in self.rows():
            w.writerow(row)
        w.writerow(["total", "sum", self.total])
        return buf.getvalue()

    def to_json(self):
        d = asdict(self)
        d["total"] = self.total
        return json.dumps(d, indent=2)


def epsilon_rin(hw: HardwareProfile, t, v_a, v_rin_q=None):
    """Laser intensity noise of the two independent lasers.

    ``v_rin_q`` is the quantum variance entering the LO term, defaulting to
    T*V_A + 1 (the received quadrature variance without the LO's own RIN).
    """
    if v_rin_q is None:
        v_rin_q = t * v_a + 1.0
    return (t * v_a * math.sqrt(hw.rin_quan * hw.bandwidth_b)
            + 0.25 * hw.rin_lo * hw.bandwidth_b * v_rin_q)


def epsilon_dac(hw: HardwareProfile, t, v_a):
    """DAC quantization noise (upper bound form)."""
    if hw.v_dac == 0:
        return 0.0
    r = hw.delta_v_dac / hw.v_dac
    return t * v_a * (math.pi * r + 0.5 * math.pi**2 * r * r) ** 2


def epsilon_mod(hw: HardwareProfile):
    """Modulation noise from finite extinction ratio, pilot-coupled."""
    if math.isinf(hw.d_db):
        return 0.0
    return hw.a_r_sq * 10.0 ** (-hw.d_db / 10.0)


def epsilon_leak(hw: HardwareProfile):
    """Photon-leakage noise from the pilot through finite isolation."""
    if math.isinf(hw.r_e):
        return 0.0
    return 2.0 * hw.a_r_sq / hw.r_e


def epsilon_det(hw: HardwareProfile):
    """Heterodyne detection noise from the NEP, plus low-frequency part."""
    return (2.0 * (hw.nep**2 / (PLANCK_H * hw.f_opt))
            * hw.bandwidth_b * hw.tau / hw.p_lo
            + hw.epsilon_lf)


def epsilon_adc(hw: HardwareProfile, t, eta):
    """ADC quantization noise referred to the channel input."""
    if t <= 0 or eta <= 0:
        raise InvalidParameterError("t and eta must be > 0")
    lsb_var = hw.r_u**2 / (12.0 * 4.0**hw.n_bits)
    return (2.0 * hw.tau
            / (PLANCK_H * hw.f_opt * hw.g**2 * hw.rho**2 * hw.p_lo * eta * t)
            * lsb_var)


def epsilon_phase_fast(hw: HardwareProfile, v_a, r_sym):
    """Fast-drift phase noise from the free-running laser pair."""
    return 2.0 * math.pi * v_a * (hw.linewidth_a + hw.linewidth_b) / r_sym


def epsilon_phase(hw: HardwareProfile, v_a, r_sym, slow_term=0.0):
    """Total phase noise: fast laser term plus a caller-supplied slow term.

    The slow term comes from the residual after the adaptive recovery and
    is estimated by the DSP chain, not modeled here.
    """
    return epsilon_phase_fast(hw, v_a, r_sym) + slow_term


def total_budget(hw: HardwareProfile, t, v_a, eta, r_sym, slow_term=0.0,
                 v_rin_q=None):
    """All components and their sum for one operating point."""
    return NoiseBudget(
        rin=epsilon_rin(hw, t, v_a, v_rin_q),
        dac=epsilon_dac(hw, t, v_a),
        mod=epsilon_mod(hw),
        leak=epsilon_leak(hw),
        det=epsilon_det(hw),
        adc=epsilon_adc(hw, t, eta),
        phase_fast=epsilon_phase_fast(hw, v_a, r_sym),
        phase_slow=slow_term,
    )


def paper_architecture_profile(**overrides):
    """Separate-path, frequency-isolated transceiver preset.

    Pilot-coupled terms are structurally zero (disjoint paths and bands),
    the low-frequency noise is avoided by intermediate-frequency detection,
    and laser/detector figures are set to values representative of the
    narrow-linewidth fiber-laser and balanced-receiver class used at these
    symbol rates.  The resulting total clears the tightest (25 km SDP)
    null-SKR threshold.
    """
    base = dict(
        rin_quan=1e-14, rin_lo=1e-14, bandwidth_b=10e9,
        delta_v_dac=0.0, d_db=math.inf, a_r_sq=0.0, r_e=math.inf,
        nep=2.5e-13, p_lo=0.02, tau=0.2e-9, g=2e4, rho=0.85,
        r_u=0.4, n_bits=8, linewidth_a=100.0, linewidth_b=100.0,
        epsilon_lf=0.0,
    )
    base.update(overrides)
    return HardwareProfile(**base)


def rf_subcarrier_profile(**overrides):
    """Single-path RF-subcarrier contrast preset: pilot-coupled terms live."""
    base = dict(
        rin_quan=1e-14, rin_lo=1e-14, bandwidth_b=10e9,
        v_dac=0.5, delta_v_dac=0.5 / 256.0,
        d_db=30.0, a_r_sq=1000.0, r_e=1000.0,
        nep=2.5e-13, p_lo=0.02, tau=0.2e-9, g=2e4, rho=0.85,
        r_u=0.4, n_bits=8, linewidth_a=100.0, linewidth_b=100.0,
        epsilon_lf=0.01,
    )
    base.update(overrides)
    return HardwareProfile(**base)
