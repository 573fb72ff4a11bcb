"""Self-interference reduction chain: propagation, analog two-tap canceller,
ADC, and fifth-order parallel-Hammerstein digital canceller.

Stage order matches the receive path: the SI signal arrives attenuated by the
propagation domain, the analog canceller subtracts a two-tap regeneration of
the tapped PA output, the ADC quantizes, and the digital canceller removes
what is left. Per-domain reductions are reported in dB and must add up to the
total.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .geometry import AntennaPattern, ReflectorConfig, SiGeometry, si_channel
from .ofdm import (
    OfdmConfig,
    apply_channel,
    apply_frequency_response,
    build_frame,
    demodulate,
    estimate_channel_ls,
)
from .rf import AdcModel, NoiseModel, PaModel, adc_quantize, fits_gray_zone, pa_apply, thermal_noise
from .util import dbm_to_watt, mean_power_dbm, substream, watt_to_dbm

# Fixed canceller delays used in the reference configurations; for other
# separations the delays bracket the direct-path delay the same way.
PAPER_CANCELLER_DELAYS_S = {
    2.0: (6e-9, 8e-9),
    1.0: (3e-9, 4e-9),
    0.1: (0.3e-9, 0.4e-9),
}


def default_canceller_delays(separation_m):
    """Two-tap delays for a given antenna separation."""
    for d, delays in PAPER_CANCELLER_DELAYS_S.items():
        if abs(separation_m - d) < 1e-9:
            return delays
    tau = separation_m / 299_792_458.0
    return (0.9 * tau, 1.2 * tau)


@dataclass(frozen=True)
class TwoTapConfig:
    """Analog canceller taps: two fixed delays with tuned complex gains."""

    delays_s: tuple
    gains: tuple

    def __post_init__(self):
        t1, t2 = self.delays_s
        if not (0.0 <= t1 < t2):
            raise ValueError("need 0 <= tau1 < tau2")

    def freq_response(self, freqs_hz):
        f = np.asarray(freqs_hz, dtype=float)
        t1, t2 = self.delays_s
        a1, a2 = self.gains
        return a1 * np.exp(-2j * np.pi * f * t1) + a2 * np.exp(-2j * np.pi * f * t2)


def _check_delays_inside_cp(delays_s, cfg):
    if max(delays_s) >= cfg.cp_duration_s:
        raise ValueError("canceller delays must stay well inside the CP duration")


def tune_two_tap(si_freq_response, delays_s, cfg):
    """Closed-form LS gains for the two-tap canceller.

    Solves min over (a1, a2) of sum_k |H_k - a1 e^{-j2pi f_k t1}
    - a2 e^{-j2pi f_k t2}|^2 on the active subcarriers via the normal
    equations.
    """
    t1, t2 = delays_s
    if t1 == t2:
        raise ValueError("equal canceller delays make the system singular")
    if t1 > t2:  # LS is symmetric under permutation; store taps sorted
        t1, t2 = t2, t1
    _check_delays_inside_cp((t1, t2), cfg)
    h = np.asarray(si_freq_response, dtype=complex)
    if h.shape != (cfg.active_subcarriers,):
        raise ValueError("si_freq_response must cover all active subcarriers")
    f = cfg.subcarrier_freqs_hz()
    basis = np.exp(-2j * np.pi * np.outer(f, (t1, t2)))
    gains, *_ = np.linalg.lstsq(basis, h, rcond=None)
    return TwoTapConfig(delays_s=(t1, t2), gains=(complex(gains[0]), complex(gains[1])))


def two_tap_residual_power(si_freq_response, two_tap, cfg):
    """Mean per-subcarrier power left after subtracting the tuned taps."""
    h = np.asarray(si_freq_response, dtype=complex)
    r = h - two_tap.freq_response(cfg.subcarrier_freqs_hz())
    return float(np.mean(np.abs(r) ** 2))


def apply_analog_canceller(pa_output_samples, rx_samples, two_tap, cfg):
    """Subtract the two-tap regeneration of the tapped PA output from rx.

    The fractional delays are realized as frequency-domain phase ramps per
    OFDM symbol, exact under cyclic-prefix circularity because both delays
    sit far inside the CP.
    """
    pa_out = np.asarray(pa_output_samples, dtype=complex)
    rx = np.asarray(rx_samples, dtype=complex)
    if pa_out.shape != rx.shape or pa_out.size % cfg.symbol_len != 0:
        raise ValueError("pa output and rx must be equal-length whole OFDM symbols")
    _check_delays_inside_cp(two_tap.delays_s, cfg)
    regen = apply_frequency_response(pa_out, two_tap.freq_response(cfg.bin_freqs_hz()), cfg)
    return rx - regen


# ---------------------------------------------------------------------------
# Digital-domain nonlinear canceller (parallel Hammerstein, odd orders)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HammersteinModel:
    """Parallel-Hammerstein canceller: odd-order static branches with FIRs.

    coeffs has one row per order branch and memory_len columns. alignment
    shifts the tap window by that many samples toward negative delays, so
    branch taps cover effective delays [-alignment, memory_len-1-alignment];
    that keeps sub-sample SI path delays well inside the modeled window.
    """

    orders: tuple
    memory_len: int
    coeffs: np.ndarray
    alignment: int = 0
    ridge: float = 0.0
    training_residual_power: float = 0.0
    training_power: float = 0.0

    def __post_init__(self):
        # Odd orders only (baseband-relevant distortion); the model tops out
        # at the fifth order, lower-order subsets serve as baselines.
        if (
            len(self.orders) == 0
            or max(self.orders) > 5
            or any(p % 2 == 0 or p < 1 for p in self.orders)
            or any(a >= b for a, b in zip(self.orders, self.orders[1:]))
        ):
            raise ValueError("orders must be increasing odd integers capped at 5")
        if self.coeffs.shape != (len(self.orders), self.memory_len):
            raise ValueError("coeffs must be (n_orders, memory_len)")


def hammerstein_basis(tx, orders, memory_len, alignment, idx):
    """Design matrix with columns psi_p(n - m + alignment) for each branch tap.

    psi_p(n) = x(n) * |x(n)|^(p-1). idx selects the target samples; every
    shifted index must stay inside the stream.
    """
    x = np.asarray(tx, dtype=complex)
    idx = np.asarray(idx)
    lo = idx.min() - (memory_len - 1 - alignment)
    hi = idx.max() + alignment
    if lo < 0 or hi >= x.size:
        raise ValueError("tap window leaves the sample stream; shrink idx or alignment")
    cols = []
    env = np.abs(x)
    for p in orders:
        psi = x * env ** (p - 1)
        for m in range(memory_len):
            cols.append(psi[idx - (m - alignment)])
    return np.stack(cols, axis=1)


def default_fit_indices(n_samples, memory_len, alignment):
    return np.arange(max(memory_len - 1 - alignment, 0), n_samples - alignment)


def ofdm_valid_indices(cfg, n_samples, alignment):
    """Per-symbol useful-part indices where linear tap shifts equal the
    circular (CP-consistent) shifts: the CP supplies the causal history and
    the last `alignment` samples are trimmed because advanced taps would
    leak into the next symbol's CP."""
    if n_samples % cfg.symbol_len != 0:
        raise ValueError(f"sample count must be a multiple of {cfg.symbol_len}")
    spans = [
        np.arange(s * cfg.symbol_len + cfg.cp_len, (s + 1) * cfg.symbol_len - alignment)
        for s in range(n_samples // cfg.symbol_len)
    ]
    return np.concatenate(spans)


def fit_hammerstein(
    tx_baseband,
    residual_rx,
    orders=(1, 3, 5),
    memory_len=4,
    alignment=0,
    ridge=1e-8,
    idx=None,
):
    """Ridge-regularized LS fit of the parallel-Hammerstein canceller.

    The ridge is scaled by the trace-normalized basis Gram; the odd-order
    branches are highly correlated and the tiny ridge stabilizes the solve
    without measurably biasing the residual.
    """
    tx = np.asarray(tx_baseband, dtype=complex)
    rx = np.asarray(residual_rx, dtype=complex)
    if tx.shape != rx.shape:
        raise ValueError("tx and rx must have the same length")
    if idx is None:
        idx = default_fit_indices(tx.size, memory_len, alignment)
    n_unknowns = len(orders) * memory_len
    if len(idx) < n_unknowns:
        raise ValueError(
            f"underdetermined fit: {len(idx)} samples for {n_unknowns} unknowns"
        )
    if len(idx) < 10 * n_unknowns:
        warnings.warn(
            f"training block of {len(idx)} samples is short for {n_unknowns} unknowns; "
            "expect overfitting",
            RuntimeWarning,
        )
    basis = hammerstein_basis(tx, orders, memory_len, alignment, idx)
    target = rx[idx]
    gram = basis.conj().T @ basis
    eps = ridge * float(np.trace(gram).real) / gram.shape[0]
    gram_r = gram + eps * np.eye(gram.shape[0])
    cond = np.linalg.cond(gram_r)
    if cond > 1e12:
        warnings.warn(
            f"hammerstein basis badly conditioned (cond {cond:.2e}); "
            "coefficients may be unstable",
            RuntimeWarning,
        )
    coeffs = np.linalg.solve(gram_r, basis.conj().T @ target)
    resid = target - basis @ coeffs
    return HammersteinModel(
        orders=tuple(orders),
        memory_len=memory_len,
        coeffs=coeffs.reshape(len(orders), memory_len),
        alignment=alignment,
        ridge=eps,
        training_residual_power=float(np.mean(np.abs(resid) ** 2)),
        training_power=float(np.mean(np.abs(target) ** 2)),
    )


def apply_digital_sic(tx_baseband, rx_after_adc, model, idx=None):
    """Residual rx - Psi(tx) @ coeffs, evaluated on the fit-valid indices."""
    tx = np.asarray(tx_baseband, dtype=complex)
    rx = np.asarray(rx_after_adc, dtype=complex)
    if tx.shape != rx.shape:
        raise ValueError("tx and rx must have the same length")
    if idx is None:
        idx = default_fit_indices(tx.size, model.memory_len, model.alignment)
    basis = hammerstein_basis(tx, model.orders, model.memory_len, model.alignment, idx)
    return rx[idx] - basis @ model.coeffs.reshape(-1)


# ---------------------------------------------------------------------------
# Full link-level chain
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LinkChainParams:
    """Everything run_link_chain needs for one DU/MT link."""

    geometry: SiGeometry
    tx_pattern: AntennaPattern = AntennaPattern()
    rx_pattern: AntennaPattern = AntennaPattern()
    reflectors: ReflectorConfig | None = ReflectorConfig()
    ofdm: OfdmConfig = OfdmConfig()
    pa: PaModel = PaModel()
    adc: AdcModel = AdcModel()
    noise: NoiseModel = NoiseModel()
    carrier_freq_hz: float = 28e9
    # PA driven with OFDM PAPR headroom below the CW compression input.
    input_backoff_db: float = 12.0
    canceller_delays_s: tuple | None = None
    # auto: engage the analog stage when the SI entering the ADC would either
    # violate the gray-zone rule or sit more than analog_engage_margin_db
    # above the floor (the digital stage's reliable depth).
    analog_mode: str = "auto"
    analog_engage_margin_db: float = 50.0
    hammerstein_orders: tuple = (1, 3, 5)
    hammerstein_memory: int = 20
    hammerstein_alignment: int = 8
    ridge: float = 1e-8
    n_pilot_symbols: int = 2
    n_data_symbols: int = 16
    n_holdout_symbols: int = 8
    ideal_fd: bool = False

    def __post_init__(self):
        if self.analog_mode not in ("auto", "on", "off"):
            raise ValueError("analog_mode must be auto, on or off")
        if self.input_backoff_db < 0.0:
            raise ValueError("input_backoff_db must be >= 0")

    def delays(self):
        if self.canceller_delays_s is not None:
            return self.canceller_delays_s
        return default_canceller_delays(self.geometry.antenna_separation_m)


@dataclass(frozen=True)
class ReductionReport:
    """Per-domain SI reduction for one link realization.

    All stage powers are mean powers over the useful parts of a calibration
    frame (no desired backhaul signal present). per_domain_db holds the
    (propagation, analog, digital) contributions and sums to the total
    reduction from tx_power_dbm to after_digital_dbm.
    """

    tx_power_dbm: float
    after_propagation_dbm: float
    after_analog_dbm: float
    after_digital_dbm: float
    per_domain_db: tuple
    noise_floor_dbm: float
    analog_applied: bool
    gray_zone_ok: bool
    digital_saturated: bool
    holdout_residual_dbm: float
    antenna_separation_m: float

    def total_reduction_db(self):
        return self.tx_power_dbm - self.after_digital_dbm

    def validate(self, tol_db=0.01, monotone_eps_db=0.02):
        if abs(sum(self.per_domain_db) - self.total_reduction_db()) > tol_db:
            raise ValueError("per-domain contributions do not sum to the total")
        chain = (
            self.tx_power_dbm,
            self.after_propagation_dbm,
            self.after_analog_dbm,
            self.after_digital_dbm,
        )
        for a, b in zip(chain, chain[1:]):
            if b > a + monotone_eps_db:
                raise ValueError("stage power increased along the chain")
        return self


def _run_frame(params, cir, amp, n_symbols, n_pilots, frame_rng, noise_rng):
    frame = build_frame(params.ofdm, n_symbols, frame_rng, n_pilots)
    tx = frame.samples * amp
    pa_out = pa_apply(tx, params.pa)
    if cir is None:
        si = np.zeros_like(pa_out)
    else:
        si = apply_channel(pa_out, cir, params.ofdm)
    rx = si + thermal_noise(si.size, params.noise, noise_rng)
    return tx, pa_out, rx


def run_link_chain(params, seed):
    """Execute propagation -> (optional) analog -> ADC -> digital for one link.

    Deterministic per (params, seed). The analog stage is tuned from a
    pilot-based estimate of the SI channel between the PA output and the MT;
    the digital stage is fit on the same calibration frame that the reported
    stage powers are measured on, with a separate holdout frame recorded for
    the generalization check.
    """
    cfg = params.ofdm
    floor_dbm = params.noise.floor_dbm
    cir = None
    if not params.ideal_fd:
        cir = si_channel(
            params.geometry,
            params.tx_pattern,
            params.rx_pattern,
            params.reflectors,
            seed=substream(seed, "si-channel").integers(2**63),
            carrier_freq_hz=params.carrier_freq_hz,
        )

    amp = np.sqrt(dbm_to_watt(params.pa.input_p1db_dbm - params.input_backoff_db))
    n_train = params.n_pilot_symbols + params.n_data_symbols
    tx, pa_out, rx = _run_frame(
        params, cir, amp, n_train, params.n_pilot_symbols,
        substream(seed, "frame-train"), substream(seed, "noise-train"),
    )
    tx_h, pa_out_h, rx_h = _run_frame(
        params, cir, amp, params.n_holdout_symbols, 0,
        substream(seed, "frame-holdout"), substream(seed, "noise-holdout"),
    )

    idx = ofdm_valid_indices(cfg, tx.size, params.hammerstein_alignment)
    idx_h = ofdm_valid_indices(cfg, tx_h.size, params.hammerstein_alignment)
    tx_power_dbm = mean_power_dbm(pa_out[idx])
    after_prop_dbm = mean_power_dbm(rx[idx])

    pre_gray_ok = fits_gray_zone(after_prop_dbm, floor_dbm, params.adc.effective_range_db)
    engage = params.analog_mode == "on" or (
        params.analog_mode == "auto"
        and (not pre_gray_ok or after_prop_dbm - floor_dbm > params.analog_engage_margin_db)
    )

    if engage:
        n_pil = params.n_pilot_symbols
        h_hat = estimate_channel_ls(
            demodulate(rx, cfg)[:n_pil], demodulate(pa_out, cfg)[:n_pil]
        )
        two_tap = tune_two_tap(h_hat, params.delays(), cfg)
        rx_analog = apply_analog_canceller(pa_out, rx, two_tap, cfg)
        rx_analog_h = apply_analog_canceller(pa_out_h, rx_h, two_tap, cfg)
        after_analog_dbm = mean_power_dbm(rx_analog[idx])
    else:
        rx_analog, rx_analog_h = rx, rx_h
        after_analog_dbm = after_prop_dbm

    gray_ok = fits_gray_zone(after_analog_dbm, floor_dbm, params.adc.effective_range_db)
    digital_saturated = not gray_ok

    rx_adc, agc_scale = adc_quantize(rx_analog, params.adc)
    rx_adc_h, _ = adc_quantize(rx_analog_h, params.adc, scale=agc_scale)

    model = fit_hammerstein(
        tx,
        rx_adc,
        orders=params.hammerstein_orders,
        memory_len=params.hammerstein_memory,
        alignment=params.hammerstein_alignment,
        ridge=params.ridge,
        idx=idx,
    )
    after_digital_dbm = float(watt_to_dbm(model.training_residual_power))
    resid_h = apply_digital_sic(tx_h, rx_adc_h, model, idx=idx_h)
    holdout_dbm = mean_power_dbm(resid_h)

    report = ReductionReport(
        tx_power_dbm=tx_power_dbm,
        after_propagation_dbm=after_prop_dbm,
        after_analog_dbm=after_analog_dbm,
        after_digital_dbm=after_digital_dbm,
        per_domain_db=(
            tx_power_dbm - after_prop_dbm,
            after_prop_dbm - after_analog_dbm,
            after_analog_dbm - after_digital_dbm,
        ),
        noise_floor_dbm=float(floor_dbm),
        analog_applied=bool(engage),
        gray_zone_ok=bool(gray_ok),
        digital_saturated=bool(digital_saturated),
        holdout_residual_dbm=holdout_dbm,
        antenna_separation_m=params.geometry.antenna_separation_m,
    )
    return report.validate()
