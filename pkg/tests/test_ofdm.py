import numpy as np
import pytest

from fdiab.geometry import ChannelImpulseResponse
from fdiab.ofdm import (
    OfdmConfig,
    apply_channel,
    apply_frequency_response,
    build_frame,
    demodulate,
    estimate_channel_ls,
    modulate,
    qpsk_symbols,
)
from fdiab.util import substream

CFG = OfdmConfig()


def useful_parts(samples, cfg=CFG):
    return samples.reshape(-1, cfg.symbol_len)[:, cfg.cp_len :]


class TestConfig:
    def test_defaults(self):
        assert CFG.fft_size == 1024
        assert CFG.active_subcarriers == 792
        assert CFG.cp_len == 140
        assert CFG.sample_rate_hz == pytest.approx(122.88e6)
        assert CFG.symbol_len == 1164
        # CP must comfortably cover the modeled SI delay spreads (< 30 ns).
        assert CFG.cp_duration_s == pytest.approx(1.139e-6, rel=1e-3)

    def test_dc_unused_and_centered(self):
        offs = CFG.subcarrier_offsets()
        assert 0 not in offs
        assert offs.min() == -396 and offs.max() == 396
        assert len(offs) == 792

    def test_invalid_configs(self):
        with pytest.raises(ValueError):
            OfdmConfig(active_subcarriers=1024)
        with pytest.raises(ValueError):
            OfdmConfig(active_subcarriers=791)
        with pytest.raises(ValueError):
            OfdmConfig(cp_len=1024)


class TestModulateDemodulate:
    def test_zero_grid_gives_zero_samples(self):
        out = modulate(np.zeros((3, 792)), CFG)
        assert np.all(out == 0)

    def test_single_pilot_constant_modulus(self):
        grid = np.zeros((1, 792), dtype=complex)
        grid[0, 100] = 1.0
        samples = useful_parts(modulate(grid, CFG))[0]
        env = np.abs(samples)
        papr_db = 20 * np.log10(env.max() / np.sqrt(np.mean(env**2)))
        assert papr_db == pytest.approx(0.0, abs=1e-10)

    def test_qpsk_round_trip(self):
        rng = substream(1, "rt")
        grid = qpsk_symbols(rng, (5, 792))
        back = demodulate(modulate(grid, CFG), CFG)
        assert np.max(np.abs(back - grid)) < 1e-10

    def test_parseval_normalization(self):
        rng = substream(2, "pw")
        grid = qpsk_symbols(rng, (4, 792)) * 1.7
        samples = modulate(grid, CFG)
        p_time = np.mean(np.abs(useful_parts(samples)) ** 2)
        p_freq = np.mean(np.abs(grid) ** 2)
        assert p_time == pytest.approx(p_freq, rel=1e-10)

    def test_shape_errors(self):
        with pytest.raises(ValueError):
            modulate(np.zeros((2, 791)), CFG)
        with pytest.raises(ValueError):
            demodulate(np.zeros(1000, dtype=complex), CFG)

    def test_integer_delay_phase_ramp(self):
        rng = substream(3, "delay")
        grid = qpsk_symbols(rng, (3, 792))
        tx = modulate(grid, CFG)
        tau = 9  # samples, well inside the CP
        rx = np.concatenate([np.zeros(tau, dtype=complex), tx])[: tx.size]
        got = demodulate(rx, CFG)[1:]  # first symbol sees the zero padding
        expect = grid[1:] * np.exp(-2j * np.pi * CFG.subcarrier_offsets() * tau / CFG.fft_size)
        assert np.max(np.abs(got - expect)) < 1e-10
        assert np.max(np.abs(np.abs(got) - np.abs(grid[1:]))) < 1e-10

    def test_delay_spread_beyond_cp_leaves_isi_floor(self):
        # Documented failure mode, not an error: a tap beyond the CP causes
        # inter-symbol interference that one-tap equalization cannot remove.
        rng = substream(4, "isi")
        frame = build_frame(CFG, 10, rng, 0)
        h = np.zeros(CFG.cp_len + 51, dtype=complex)
        h[0], h[-1] = 1.0, 0.5
        rx = np.convolve(frame.samples, h)[: frame.samples.size]
        grid = demodulate(rx, CFG)
        ref = frame.symbols
        eq = np.sum(grid * ref.conj(), axis=0) / np.sum(np.abs(ref) ** 2, axis=0)
        err = grid - ref * eq
        floor_db = 10 * np.log10(np.mean(np.abs(err) ** 2) / np.mean(np.abs(ref) ** 2))
        assert floor_db > -40.0


class TestApplyChannel:
    def test_matches_per_subcarrier_response(self):
        rng = substream(5, "chan")
        grid = qpsk_symbols(rng, (4, 792))
        cir = ChannelImpulseResponse(
            taps=((2e-9, 0.8 + 0.1j), (9e-9, 0.2 - 0.3j)), carrier_freq_hz=28e9
        )
        rx = apply_channel(modulate(grid, CFG), cir, CFG)
        got = demodulate(rx, CFG)
        expect = grid * cir.freq_response(CFG.subcarrier_freqs_hz())
        assert np.max(np.abs(got - expect)) < 1e-10

    def test_bad_response_shape(self):
        with pytest.raises(ValueError):
            apply_frequency_response(np.zeros(CFG.symbol_len, complex), np.ones(10), CFG)


class TestChannelEstimation:
    def test_noiseless_exact(self):
        rng = substream(6, "est0")
        pilots = qpsk_symbols(rng, (2, 792))
        h = np.exp(-2j * np.pi * CFG.subcarrier_freqs_hz() * 3e-9) * 0.7
        est = estimate_channel_ls(pilots * h, pilots)
        assert np.max(np.abs(est - h)) < 1e-10

    def test_mse_at_20db_snr(self):
        # Per-bin LS error equals the per-bin noise: MSE ~ -20 dB relative.
        rng = substream(7, "est20")
        mses = []
        for _ in range(40):
            pilots = qpsk_symbols(rng, (1, 792))
            h = np.exp(-2j * np.pi * CFG.subcarrier_freqs_hz() * 2e-9)
            noise = 10 ** (-20 / 20) / np.sqrt(2) * (
                rng.standard_normal(pilots.shape) + 1j * rng.standard_normal(pilots.shape)
            )
            est = estimate_channel_ls(pilots * h + noise, pilots)
            mses.append(np.mean(np.abs(est - h) ** 2))
        assert 10 * np.log10(np.mean(mses)) == pytest.approx(-20.0, abs=1.0)

    def test_four_pilot_symbols_average_6db_better(self):
        rng = substream(8, "estavg")

        def mse(n_pilots):
            out = []
            for _ in range(40):
                pilots = qpsk_symbols(rng, (n_pilots, 792))
                h = np.exp(-2j * np.pi * CFG.subcarrier_freqs_hz() * 2e-9)
                noise = 10 ** (-20 / 20) / np.sqrt(2) * (
                    rng.standard_normal(pilots.shape)
                    + 1j * rng.standard_normal(pilots.shape)
                )
                est = estimate_channel_ls(pilots * h + noise, pilots)
                out.append(np.mean(np.abs(est - h) ** 2))
            return 10 * np.log10(np.mean(out))

        assert mse(1) - mse(4) == pytest.approx(6.02, abs=0.5)

    def test_zero_pilot_rejected(self):
        pilots = np.ones((1, 792), dtype=complex)
        pilots[0, 5] = 0.0
        with pytest.raises(ValueError):
            estimate_channel_ls(pilots, pilots)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            estimate_channel_ls(np.ones((1, 792)), np.ones((2, 792)))


class TestFrame:
    def test_pilot_mask_and_roundtrip(self):
        frame = build_frame(CFG, 4, substream(9, "frame"), n_pilot_symbols=2)
        assert frame.pilot_mask[:2].all() and not frame.pilot_mask[2:].any()
        assert frame.samples.size == 4 * CFG.symbol_len
        back = demodulate(frame.samples, CFG)
        assert np.max(np.abs(back - frame.symbols)) < 1e-10
