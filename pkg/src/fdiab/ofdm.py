"""OFDM baseband: modulation, demodulation, channel application, LS estimation.

Normalization contract: a grid with unit average symbol power modulates to
unit average sample power over the useful (post-CP) part, so time-domain
power equals frequency-domain power over the active subcarriers (Parseval).
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class OfdmConfig:
    """Numerology. Defaults: FFT 1024, 792 active subcarriers, CP 140.

    The 120 kHz subcarrier spacing puts the sample rate at 122.88 Msps and
    the occupied bandwidth at 95.04 MHz; the configured system bandwidth
    (120 MHz) is a noise-bandwidth figure, not the occupied width.
    """

    fft_size: int = 1024
    active_subcarriers: int = 792
    cp_len: int = 140
    subcarrier_spacing_hz: float = 120e3

    def __post_init__(self):
        if self.active_subcarriers >= self.fft_size:
            raise ValueError("active_subcarriers must be < fft_size (DC stays unused)")
        if self.active_subcarriers % 2 != 0:
            raise ValueError("active_subcarriers must be even (centered around DC)")
        if not (0 <= self.cp_len < self.fft_size):
            raise ValueError("cp_len must lie in [0, fft_size)")

    @property
    def sample_rate_hz(self):
        return self.fft_size * self.subcarrier_spacing_hz

    @property
    def symbol_len(self):
        return self.fft_size + self.cp_len

    @property
    def cp_duration_s(self):
        return self.cp_len / self.sample_rate_hz

    def subcarrier_offsets(self):
        """Signed subcarrier indices around DC, DC excluded."""
        half = self.active_subcarriers // 2
        return np.concatenate([np.arange(-half, 0), np.arange(1, half + 1)])

    def active_bins(self):
        """FFT bin index of each active subcarrier."""
        return self.subcarrier_offsets() % self.fft_size

    def subcarrier_freqs_hz(self):
        """Baseband frequency of each active subcarrier."""
        return self.subcarrier_offsets() * self.subcarrier_spacing_hz

    def bin_freqs_hz(self):
        """Baseband frequency of every FFT bin (fftfreq layout)."""
        return np.fft.fftfreq(self.fft_size, d=1.0 / self.sample_rate_hz)


@dataclass(frozen=True)
class OfdmFrame:
    """Frequency-domain grid with its time-domain samples and pilot mask."""

    symbols: np.ndarray  # (n_symbols, active_subcarriers) complex grid
    samples: np.ndarray  # n_symbols * (fft_size + cp_len) complex samples
    pilot_mask: np.ndarray  # boolean, same shape as symbols


def _as_grid(grid, cfg):
    grid = np.asarray(grid, dtype=complex)
    if grid.ndim == 1:
        grid = grid[np.newaxis, :]
    if grid.ndim != 2 or grid.shape[1] != cfg.active_subcarriers:
        raise ValueError(
            f"grid must be (n_symbols, {cfg.active_subcarriers}), got {grid.shape}"
        )
    return grid


def modulate(grid, cfg):
    """Map a symbol grid to centered bins, IDFT each symbol and prepend the CP."""
    grid = _as_grid(grid, cfg)
    scale = cfg.fft_size / np.sqrt(cfg.active_subcarriers)
    spectrum = np.zeros((grid.shape[0], cfg.fft_size), dtype=complex)
    spectrum[:, cfg.active_bins()] = grid
    useful = np.fft.ifft(spectrum, axis=1) * scale
    with_cp = np.concatenate([useful[:, -cfg.cp_len :], useful], axis=1)
    return with_cp.reshape(-1)


def demodulate(samples, cfg):
    """Strip CPs, DFT each symbol and extract the active bins."""
    samples = np.asarray(samples, dtype=complex)
    if samples.ndim != 1 or samples.size == 0 or samples.size % cfg.symbol_len != 0:
        raise ValueError(
            f"sample count must be a positive multiple of {cfg.symbol_len}"
        )
    scale = cfg.fft_size / np.sqrt(cfg.active_subcarriers)
    sym = samples.reshape(-1, cfg.symbol_len)[:, cfg.cp_len :]
    spectrum = np.fft.fft(sym, axis=1) / scale
    return spectrum[:, cfg.active_bins()]


def apply_frequency_response(samples, h_bins, cfg):
    """Per-symbol circular channel: multiply every FFT bin by h and rebuild CPs.

    Exact for any tapped channel whose delay spread stays well inside the CP,
    which is how both the SI channel and the two-tap canceller ramps are
    realized (fractional delays as frequency-domain phase ramps).
    """
    samples = np.asarray(samples, dtype=complex)
    if samples.size % cfg.symbol_len != 0:
        raise ValueError(f"sample count must be a multiple of {cfg.symbol_len}")
    h_bins = np.asarray(h_bins, dtype=complex)
    if h_bins.shape != (cfg.fft_size,):
        raise ValueError(f"h_bins must have shape ({cfg.fft_size},)")
    useful = samples.reshape(-1, cfg.symbol_len)[:, cfg.cp_len :]
    filtered = np.fft.ifft(np.fft.fft(useful, axis=1) * h_bins, axis=1)
    with_cp = np.concatenate([filtered[:, -cfg.cp_len :], filtered], axis=1)
    return with_cp.reshape(-1)


def apply_channel(samples, cir, cfg):
    """Run samples through a tapped-delay-line channel (circular per symbol)."""
    return apply_frequency_response(samples, cir.freq_response(cfg.bin_freqs_hz()), cfg)


def estimate_channel_ls(rx_grid, pilot_grid):
    """Per-subcarrier LS channel estimate H_k = Y_k / X_k, averaged over symbols.

    Averaging over n pilot symbols cuts the estimation noise variance by n.
    """
    rx = np.atleast_2d(np.asarray(rx_grid, dtype=complex))
    pilots = np.atleast_2d(np.asarray(pilot_grid, dtype=complex))
    if rx.shape != pilots.shape:
        raise ValueError("rx and pilot grids must have the same shape")
    if np.any(pilots == 0.0):
        raise ValueError("pilot grid must be nonzero on every active subcarrier")
    return np.mean(rx / pilots, axis=0)


def qpsk_symbols(rng, shape):
    """Unit-power QPSK points drawn uniformly."""
    re = rng.integers(0, 2, size=shape) * 2 - 1
    im = rng.integers(0, 2, size=shape) * 2 - 1
    return (re + 1j * im) / np.sqrt(2.0)


def build_frame(cfg, n_symbols, rng, n_pilot_symbols=1):
    """QPSK frame with full-band pilot symbols up front."""
    if not (0 <= n_pilot_symbols <= n_symbols):
        raise ValueError("need 0 <= n_pilot_symbols <= n_symbols")
    grid = qpsk_symbols(rng, (n_symbols, cfg.active_subcarriers))
    mask = np.zeros(grid.shape, dtype=bool)
    mask[:n_pilot_symbols, :] = True
    return OfdmFrame(symbols=grid, samples=modulate(grid, cfg), pilot_mask=mask)
