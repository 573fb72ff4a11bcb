"""Propagation-domain model: path loss, directional antennas, SI channels, link budgets.

Everything here is a pure function of its inputs and a seed, so channel
realizations are bit-reproducible and safe to evaluate concurrently.
"""

from dataclasses import dataclass

import numpy as np

from .util import SPEED_OF_LIGHT, substream


def fspl_db(distance_m, freq_hz):
    """Friis free-space path loss 20*log10(4*pi*d*f/c) in dB."""
    d = np.asarray(distance_m, dtype=float)
    f = np.asarray(freq_hz, dtype=float)
    if np.any(d <= 0.0) or np.any(f <= 0.0):
        raise ValueError("fspl_db requires distance_m > 0 and freq_hz > 0")
    out = 20.0 * np.log10(4.0 * np.pi * d * f / SPEED_OF_LIGHT)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class AntennaPattern:
    """Gaussian-mainlobe directional antenna with a hard sidelobe floor.

    Gain at angular offset theta from boresight is
    G(theta) = boresight_gain_dbi - 12*(theta/beamwidth_3db_deg)^2, clamped
    below at sidelobe_floor_dbi, so the offset beamwidth/2 sits exactly 3 dB
    down.
    """

    boresight_gain_dbi: float = 20.0
    beamwidth_3db_deg: float = 12.0
    sidelobe_floor_dbi: float = -10.0
    polarization: str = "V"

    def __post_init__(self):
        if self.boresight_gain_dbi <= self.sidelobe_floor_dbi:
            raise ValueError("boresight_gain_dbi must exceed sidelobe_floor_dbi")
        if self.beamwidth_3db_deg <= 0.0:
            raise ValueError("beamwidth_3db_deg must be positive")
        if self.polarization not in ("V", "H"):
            raise ValueError("polarization must be 'V' or 'H'")

    def gain_dbi(self, offset_deg):
        return antenna_gain_dbi(self, offset_deg)


def antenna_gain_dbi(pattern, offset_deg):
    """Pattern gain in dBi at an angular offset (degrees) from boresight."""
    off = np.abs(np.asarray(offset_deg, dtype=float))
    gain = pattern.boresight_gain_dbi - 12.0 * (off / pattern.beamwidth_3db_deg) ** 2
    out = np.maximum(gain, pattern.sidelobe_floor_dbi)
    return float(out) if out.ndim == 0 else out


def angle_between_deg(u, v):
    """Angle in degrees between two direction vectors."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ValueError("direction vectors must be nonzero")
    c = np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0)
    return float(np.degrees(np.arccos(c)))


@dataclass(frozen=True)
class SiGeometry:
    """DU-to-MT self-interference geometry on one mast.

    The DU (tx) sits antenna_separation_m above the MT (rx) along +z, so the
    direct SI ray leaves the DU toward -z and arrives at the MT from +z.
    Orientations are boresight direction vectors in the same frame; the
    defaults point both antennas at the horizon (90 degrees off the mast
    axis). cross_pol_isolation_db is 0 for co-polarized antennas.
    """

    antenna_separation_m: float
    tx_orientation: tuple = (1.0, 0.0, 0.0)
    rx_orientation: tuple = (1.0, 0.0, 0.0)
    cross_pol_isolation_db: float = 0.0

    def __post_init__(self):
        if self.antenna_separation_m <= 0.0:
            raise ValueError("antenna_separation_m must be positive")
        if self.cross_pol_isolation_db < 0.0:
            raise ValueError("cross_pol_isolation_db must be >= 0")


@dataclass(frozen=True)
class ReflectorConfig:
    """Seeded random reflections added behind the direct SI path.

    Per realization the tap count is uniform in [min_taps, max_taps], excess
    delays are uniform in delay_offset_range_s after the direct tap, and tap
    powers are uniform in rel_power_range_db below the direct tap with
    uniform phases.
    """

    min_taps: int = 0
    max_taps: int = 6
    delay_offset_range_s: tuple = (1e-9, 20e-9)
    rel_power_range_db: tuple = (15.0, 30.0)

    def __post_init__(self):
        if not (0 <= self.min_taps <= self.max_taps):
            raise ValueError("need 0 <= min_taps <= max_taps")
        if self.delay_offset_range_s[0] <= 0.0:
            raise ValueError("reflection delays must fall behind the direct tap")


@dataclass(frozen=True)
class ChannelImpulseResponse:
    """Tapped-delay-line channel: ((delay_s, complex gain), ...) pairs."""

    taps: tuple
    carrier_freq_hz: float

    def __post_init__(self):
        if len(self.taps) == 0:
            raise ValueError("channel needs at least one tap")
        delays = np.array([t[0] for t in self.taps], dtype=float)
        if delays[0] < 0.0 or np.any(np.diff(delays) <= 0.0):
            raise ValueError("tap delays must be non-negative and strictly increasing")
        if self.total_power() <= 0.0:
            raise ValueError("channel must carry nonzero power")

    @property
    def delays_s(self):
        return np.array([t[0] for t in self.taps], dtype=float)

    @property
    def gains(self):
        return np.array([t[1] for t in self.taps], dtype=complex)

    def total_power(self):
        return float(np.sum(np.abs([t[1] for t in self.taps]) ** 2))

    def total_gain_db(self):
        """Tx-to-Rx power gain over all taps; negation is the SI suppression."""
        return float(10.0 * np.log10(self.total_power()))

    def direct_tap_gain_db(self):
        return float(20.0 * np.log10(np.abs(self.taps[0][1])))

    def freq_response(self, freqs_hz):
        """Baseband frequency response sum_i g_i * exp(-j*2*pi*f*tau_i)."""
        f = np.asarray(freqs_hz, dtype=float)
        phases = np.exp(-2j * np.pi * np.outer(f, self.delays_s))
        return phases @ self.gains


@dataclass(frozen=True)
class LinkBudget:
    """One evaluated link: rx_power = tx_power + gains - path loss - shadowing."""

    rx_power_dbm: float
    path_loss_db: float
    tx_gain_dbi: float
    rx_gain_dbi: float
    shadowing_db: float
    tx_power_dbm: float


def si_channel(geom, tx_pat, rx_pat, reflector_cfg=None, seed=0, carrier_freq_hz=28e9):
    """SI channel impulse response for one DU/MT pair.

    Tap 0 is the direct path at delay d/c with amplitude set by Friis loss,
    cross-polarization isolation and both off-boresight antenna gains along
    the mast axis. With reflector_cfg set, seeded random reflection taps are
    appended. Identical (inputs, seed) give bit-identical output.
    """
    d = geom.antenna_separation_m
    direct_delay = d / SPEED_OF_LIGHT
    # Off-boresight angles toward the other antenna: DU looks down the mast
    # (-z), MT looks up (+z).
    theta_tx = angle_between_deg(geom.tx_orientation, (0.0, 0.0, -1.0))
    theta_rx = angle_between_deg(geom.rx_orientation, (0.0, 0.0, 1.0))
    amp_db = (
        -fspl_db(d, carrier_freq_hz)
        - geom.cross_pol_isolation_db
        + antenna_gain_dbi(tx_pat, theta_tx)
        + antenna_gain_dbi(rx_pat, theta_rx)
    )
    direct_amp = 10.0 ** (amp_db / 20.0)
    direct_gain = direct_amp * np.exp(-2j * np.pi * carrier_freq_hz * direct_delay)
    taps = [(direct_delay, complex(direct_gain))]

    if reflector_cfg is not None:
        rng = substream(seed, "si-reflections")
        k = int(rng.integers(reflector_cfg.min_taps, reflector_cfg.max_taps + 1))
        if k > 0:
            lo, hi = reflector_cfg.delay_offset_range_s
            delays = np.sort(direct_delay + rng.uniform(lo, hi, size=k))
            rel_db = rng.uniform(*reflector_cfg.rel_power_range_db, size=k)
            phases = rng.uniform(0.0, 2.0 * np.pi, size=k)
            gains = direct_amp * 10.0 ** (-rel_db / 20.0) * np.exp(1j * phases)
            taps.extend((float(t), complex(g)) for t, g in zip(delays, gains))

    return ChannelImpulseResponse(taps=tuple(taps), carrier_freq_hz=carrier_freq_hz)


def shadowing_db(sigma_db, shadow_seed, tx_pos, rx_pos):
    """Log-normal shadowing draw, deterministic per (link endpoints, seed)."""
    if sigma_db == 0.0:
        return 0.0
    rng = substream(shadow_seed, "shadow", *np.asarray(tx_pos, float), *np.asarray(rx_pos, float))
    return float(sigma_db * rng.standard_normal())


def link_budget(
    tx_pos,
    rx_pos,
    tx_pat,
    tx_beam_dir,
    rx_pat,
    rx_beam_dir,
    tx_power_dbm,
    shadow_seed=0,
    freq_hz=28e9,
    shadow_sigma_db=0.0,
):
    """Evaluate one directional link between two distinct positions."""
    tx_pos = np.asarray(tx_pos, dtype=float)
    rx_pos = np.asarray(rx_pos, dtype=float)
    los = rx_pos - tx_pos
    dist = float(np.linalg.norm(los))
    if dist == 0.0:
        raise ValueError("tx and rx positions coincide")
    path_loss = fspl_db(dist, freq_hz)
    tx_gain = antenna_gain_dbi(tx_pat, angle_between_deg(tx_beam_dir, los))
    rx_gain = antenna_gain_dbi(rx_pat, angle_between_deg(rx_beam_dir, -los))
    shadow = shadowing_db(shadow_sigma_db, shadow_seed, tx_pos, rx_pos)
    rx_power = tx_power_dbm + tx_gain + rx_gain - path_loss - shadow
    return LinkBudget(
        rx_power_dbm=rx_power,
        path_loss_db=path_loss,
        tx_gain_dbi=tx_gain,
        rx_gain_dbi=rx_gain,
        shadowing_db=shadow,
        tx_power_dbm=tx_power_dbm,
    )
