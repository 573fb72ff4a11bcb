"""RF front-end impairments: PA nonlinearity, ADC quantization, thermal noise.

Complex baseband samples use the 1-ohm convention: mean(|x|^2) is power in
watts, so dBm values follow directly from sample amplitudes.
"""

from dataclasses import dataclass, field

import numpy as np

from .util import dbm_to_watt, watt_to_dbm

# Effective ADC range above the noise floor within which digital SIC works
# (the gray zone); a given constant for 14-bit resolution, kept configurable
# on AdcModel. The ideal full-scale-sine SQNR 6.02*bits + 1.76 dB is modeled
# physically and the gap is implementation margin.
EFFECTIVE_ADC_RANGE_14BIT_DB = 72.24


@dataclass(frozen=True)
class PaModel:
    """Rapp AM/AM solid-state PA (no AM/PM), parameterized by gain and P1dB.

    The saturation amplitude is derived so that a CW tone at the 1 dB
    compression input comes out exactly 1 dB below linear gain.
    """

    gain_db: float = 20.0
    p1db_dbm: float = 43.0
    rapp_smoothness: float = 2.0
    vsat_dbm: float = field(init=False)

    def __post_init__(self):
        if self.rapp_smoothness <= 0.0:
            raise ValueError("rapp_smoothness must be positive")
        # (1 + r)^(1/2p) = 10^(1/20) at the compression point.
        r = 10.0 ** (self.rapp_smoothness / 10.0) - 1.0
        a_in_1db = np.sqrt(dbm_to_watt(self.input_p1db_dbm))
        asat = self.gain_lin * a_in_1db / r ** (1.0 / (2.0 * self.rapp_smoothness))
        object.__setattr__(self, "vsat_dbm", float(watt_to_dbm(asat**2)))

    @property
    def gain_lin(self):
        return 10.0 ** (self.gain_db / 20.0)

    @property
    def input_p1db_dbm(self):
        """CW input power at which the output sits 1 dB below linear gain."""
        return self.p1db_dbm - self.gain_db + 1.0

    @property
    def saturation_amplitude(self):
        return np.sqrt(dbm_to_watt(self.vsat_dbm))


def pa_apply(samples, pa):
    """Rapp AM/AM: y = G*x / (1 + (|G*x|/Asat)^(2p))^(1/(2p))."""
    x = np.asarray(samples, dtype=complex)
    p = pa.rapp_smoothness
    driven = pa.gain_lin * x
    env = np.abs(driven) / pa.saturation_amplitude
    return driven / (1.0 + env ** (2.0 * p)) ** (1.0 / (2.0 * p))


@dataclass(frozen=True)
class AdcModel:
    """Mid-rise uniform quantizer with clipping at full scale, per I/Q rail.

    full_scale_dbm is the power of a complex exponential whose rails just
    touch the clip level. The AGC places the input RMS agc_backoff_db below
    that full scale before quantizing.
    """

    bits: int = 14
    full_scale_dbm: float = 0.0
    agc_backoff_db: float = 15.0
    effective_range_db: float = EFFECTIVE_ADC_RANGE_14BIT_DB

    def __post_init__(self):
        if self.bits < 1:
            raise ValueError("bits must be >= 1")

    @property
    def full_scale_amplitude(self):
        return np.sqrt(dbm_to_watt(self.full_scale_dbm))

    @property
    def step(self):
        return 2.0 * self.full_scale_amplitude / 2**self.bits


def adc_quantize(samples, adc, scale=None):
    """AGC-scale, quantize I and Q independently, clip, and rescale back.

    Returns (quantized samples in input units, applied scale factor). Pass
    the scale back in to reuse an already-trained AGC setting; re-quantizing
    with the same scale is the identity.
    """
    x = np.asarray(samples, dtype=complex)
    if scale is None:
        rms = np.sqrt(np.mean(np.abs(x) ** 2))
        if rms == 0.0:
            return np.zeros_like(x), 1.0
        scale = float(
            adc.full_scale_amplitude * 10.0 ** (-adc.agc_backoff_db / 20.0) / rms
        )
    step = adc.step
    top = adc.full_scale_amplitude - step / 2.0

    def rail(v):
        q = step * (np.floor(v / step) + 0.5)
        return np.clip(q, -top, top)

    u = x * scale
    return (rail(u.real) + 1j * rail(u.imag)) / scale, scale


@dataclass(frozen=True)
class NoiseModel:
    """Thermal noise floor: -174 dBm/Hz plus bandwidth and noise figure."""

    bandwidth_hz: float = 120e6
    noise_figure_db: float = 3.0

    def __post_init__(self):
        if self.bandwidth_hz <= 0.0:
            raise ValueError("bandwidth_hz must be positive")

    @property
    def floor_dbm(self):
        return -174.0 + 10.0 * np.log10(self.bandwidth_hz) + self.noise_figure_db


def noise_floor_dbm(noise):
    return float(noise.floor_dbm)


def thermal_noise(n_samples, noise, rng):
    """Complex AWGN whose mean power equals the model's noise floor."""
    sigma2 = dbm_to_watt(noise.floor_dbm)
    return np.sqrt(sigma2 / 2.0) * (
        rng.standard_normal(n_samples) + 1j * rng.standard_normal(n_samples)
    )


def required_si_reduction_db(tx_power_dbm, rx_floor_dbm):
    """SI reduction needed to pull self-interference down to the Rx floor."""
    return tx_power_dbm - rx_floor_dbm


def fits_gray_zone(si_power_dbm, floor_dbm, effective_range_db=EFFECTIVE_ADC_RANGE_14BIT_DB):
    """Digital-domain admission rule: residual SI entering the ADC must sit
    within the effective ADC range of the noise floor, else the Rx saturates."""
    return si_power_dbm <= floor_dbm + effective_range_db
