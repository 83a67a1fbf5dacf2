"""Underwater acoustic link budget: source level, attenuation, noise,
harvestable power, and required uplink transmit power/energy.

All functions work in the usual dB conventions of the sonar equation
(levels in dB re 1 uPa at 1 m, absorption in dB/km) and are pure: the
same inputs always give bit-identical outputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass
class ChannelParams:
    """Acoustic and communication constants for one deployment.

    Frequencies in kHz, powers in W, levels/indices in dB, RVS in
    dB re 1V/uPa, load resistance in ohm, bandwidth in Hz, rate in bit/s,
    noise density in dB re 1 uPa^2/Hz.
    """

    f_wet_khz: float = 70.0
    f_data_khz: float = 50.0
    p_elec_w: float = 5.0
    eta: float = 0.7
    eta_tx: float = 0.7
    di_db: float = 10.0
    di_tx_db: float = 10.0
    k_s: float = 1.5
    rvs_db: float = -150.0
    r_p_ohm: float = 125.0
    eta_harv: float = 0.8
    n_hyd: int = 4
    bandwidth_hz: float = 1000.0
    rate_bps: float = 12000.0
    nl_psd_db: float = 50.0

    def validate(self) -> None:
        for name in ("eta", "eta_tx", "eta_harv"):
            val = getattr(self, name)
            if not 0.0 < val <= 1.0:
                raise ValueError(f"{name} must be in (0, 1], got {val}")
        for name in ("f_wet_khz", "f_data_khz", "p_elec_w", "r_p_ohm",
                     "bandwidth_hz", "rate_bps"):
            val = getattr(self, name)
            if not val > 0.0:
                raise ValueError(f"{name} must be positive, got {val}")
        if not (isinstance(self.n_hyd, int) and self.n_hyd >= 1):
            raise ValueError(f"n_hyd must be a positive integer, got {self.n_hyd}")


def thorp_absorption(f_khz: float) -> float:
    """Thorp absorption coefficient [dB/km] at frequency f [kHz]."""
    if f_khz < 0.0:
        raise ValueError(f"frequency must be non-negative, got {f_khz}")
    f2 = f_khz * f_khz
    return 0.11 * f2 / (f2 + 1.0) + 44.0 * f2 / (f2 + 4100.0) + 2.75e-4 * f2 + 0.003


def source_level(p_elec_w: float, eta: float, di_db: float) -> float:
    """Source level [dB re 1 uPa @ 1 m] for electrical input power p_elec [W]."""
    if p_elec_w <= 0.0:
        raise ValueError(f"p_elec must be positive, got {p_elec_w}")
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"eta must be in (0, 1], got {eta}")
    return 170.8 + 10.0 * math.log10(p_elec_w) + 10.0 * math.log10(eta) + di_db


def attenuation(d_m: float, f_khz: float, k_s: float) -> float:
    """One-way attenuation [dB] over range d [m] at frequency f [kHz].

    Spreading term uses d in meters against the 1 m reference sphere;
    the absorption path length is d/1000 because Thorp yields dB/km.
    """
    if d_m < 1.0:
        raise ValueError(f"range must be >= 1 m (reference distance), got {d_m}")
    return k_s * 10.0 * math.log10(d_m) + (d_m / 1000.0) * thorp_absorption(f_khz)


def received_level(sl_db: float, al_db: float, nl_db: float) -> float:
    """Sonar equation: RL = SL - AL - NL [dB]."""
    return sl_db - al_db - nl_db


def noise_level_band(nl_psd_db: float, bandwidth_hz: float) -> float:
    """Ambient noise level integrated over the receiver bandwidth [dB]."""
    if bandwidth_hz <= 0.0:
        raise ValueError(f"bandwidth must be positive, got {bandwidth_hz}")
    return nl_psd_db + 10.0 * math.log10(bandwidth_hz)


def harvest_power(rl_db: float, params: ChannelParams) -> float:
    """Electrical power [W] harvested at the node rectifier for received level rl.

    The received pressure drives a voltage through the hydrophone RVS;
    the matched-load available power V^2/(4 R_p) is scaled by the
    harvesting efficiency and the hydrophone count.
    """
    return (params.eta_harv * params.n_hyd
            * 10.0 ** ((rl_db + params.rvs_db) / 10.0) / (4.0 * params.r_p_ohm))


def harvest_energy(p_harv_w: float, tau_charging_s: float) -> float:
    """Energy [J] harvested at power p_harv over tau_charging seconds."""
    if tau_charging_s < 0.0:
        raise ValueError(f"charging duration must be >= 0, got {tau_charging_s}")
    return p_harv_w * tau_charging_s


def required_snr_db(rate_bps: float, bandwidth_hz: float) -> float:
    """SNR [dB] needed to carry rate S [bit/s] in bandwidth B [Hz]."""
    if rate_bps <= 0.0:
        raise ValueError(f"rate must be positive, got {rate_bps}")
    if bandwidth_hz <= 0.0:
        raise ValueError(f"bandwidth must be positive, got {bandwidth_hz}")
    return 10.0 * math.log10(2.0 ** (rate_bps / bandwidth_hz) - 1.0)


def required_uplink_power(d_m: float, params: ChannelParams) -> float:
    """Transmit power [W] a node needs for a decodable uplink over range d [m].

    Passive sonar equation: the required source level is the required SNR
    plus transmission loss plus in-band noise, then converted back to
    electrical power through the node transmitter efficiency and
    directivity index.
    """
    gamma_db = required_snr_db(params.rate_bps, params.bandwidth_hz)
    tl_db = attenuation(d_m, params.f_data_khz, params.k_s)
    nl_band = noise_level_band(params.nl_psd_db, params.bandwidth_hz)
    sl_req = gamma_db + tl_db + nl_band
    return 10.0 ** ((sl_req - 170.8 - 10.0 * math.log10(params.eta_tx)
                     - params.di_tx_db) / 10.0)


def required_uplink_energy(p_trans_w: float, tau_data_s: float) -> float:
    """Energy [J] for an uplink transmission at p_trans over tau_data seconds."""
    if tau_data_s < 0.0:
        raise ValueError(f"data duration must be >= 0, got {tau_data_s}")
    return p_trans_w * tau_data_s
