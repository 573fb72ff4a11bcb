"""Shared helpers: dB conversions and deterministic RNG substreams."""

import hashlib

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0  # m/s


def db_to_lin(db):
    return 10.0 ** (np.asarray(db) / 10.0)


def lin_to_db(x):
    return 10.0 * np.log10(x)


def dbm_to_watt(dbm):
    return 10.0 ** ((np.asarray(dbm) - 30.0) / 10.0)


def watt_to_dbm(watt):
    return 10.0 * np.log10(watt) + 30.0


def mean_power_watt(samples):
    return float(np.mean(np.abs(samples) ** 2))


def mean_power_dbm(samples):
    """Mean power of complex baseband samples (1-ohm convention) in dBm."""
    return float(watt_to_dbm(mean_power_watt(samples)))


def _token_to_int(token):
    if isinstance(token, (bool, np.bool_)):
        return int(token)
    if isinstance(token, (int, np.integer)):
        return int(token) & 0xFFFFFFFFFFFFFFFF
    if isinstance(token, (float, np.floating)):
        return int(np.float64(token).view(np.uint64))
    if isinstance(token, str):
        return int.from_bytes(hashlib.blake2b(token.encode(), digest_size=8).digest(), "big")
    raise TypeError(f"unsupported substream token: {token!r}")


def substream(seed, *tokens):
    """Independent, reproducible RNG derived from a root seed and a token path.

    Identical (seed, tokens) always yield the same stream no matter how many
    other substreams were consumed before, which is what makes parallel and
    sequential evaluation bit-identical.
    """
    entropy = [_token_to_int(seed)] + [_token_to_int(t) for t in tokens]
    return np.random.default_rng(np.random.SeedSequence(entropy))
