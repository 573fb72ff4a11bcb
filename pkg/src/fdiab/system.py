"""System-level IAB downlink: deployment, beam selection, DLI, throughput.

One donor plus wirelessly backhauled nodes serve a rectangular UE grid with
single-hop relaying, one UE at a time. Five configurations are compared:
fibered backhaul, ideal FD (zero SI), FD with full SIC, FD with
propagation-domain suppression only, and half duplex.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .geometry import AntennaPattern, ReflectorConfig, SiGeometry, fspl_db, si_channel
from .rf import NoiseModel
from .util import dbm_to_watt, substream, watt_to_dbm


class Mode(str, Enum):
    FIBERED = "fibered"
    IDEAL_FD = "ideal_fd"
    FD_FULL = "fd_full"
    FD_PROP_ONLY = "fd_prop_only"
    HD = "hd"


ALL_MODES = tuple(Mode)

# Access codebook geometry: a 120 degree azimuth sector split eight ways and
# a 30 degree elevation span split two ways, 16 beams total.
SECTOR_SPAN_AZ_DEG = 120.0
N_BEAMS_AZ = 8
SECTOR_SPAN_EL_DEG = 30.0
N_BEAMS_EL = 2
SECTOR_CENTER_EL_DEG = -15.0  # rooftop cells look down toward street level

UE_GAIN_DBI = 0.0  # uniform dipole, isotropic in azimuth


def direction_from_angles(az_deg, el_deg):
    az = np.radians(az_deg)
    el = np.radians(el_deg)
    return np.array([np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)])


@dataclass(frozen=True)
class Codebook:
    """Fixed grid of beam pointing directions sharing one radiation pattern."""

    beams: tuple  # ((az_deg, el_deg), ...) indexed el-major, az-minor
    pattern: AntennaPattern

    def __post_init__(self):
        if len(self.beams) != N_BEAMS_AZ * N_BEAMS_EL:
            raise ValueError(f"codebook must hold exactly {N_BEAMS_AZ * N_BEAMS_EL} beams")

    def directions(self):
        return np.stack([direction_from_angles(az, el) for az, el in self.beams])


def build_codebook(pattern, sector_center_az_deg):
    az_steps = SECTOR_SPAN_AZ_DEG * ((np.arange(N_BEAMS_AZ) + 0.5) / N_BEAMS_AZ - 0.5)
    el_steps = SECTOR_SPAN_EL_DEG * ((np.arange(N_BEAMS_EL) + 0.5) / N_BEAMS_EL - 0.5)
    beams = tuple(
        (float(sector_center_az_deg + daz), float(SECTOR_CENTER_EL_DEG + del_))
        for del_ in el_steps
        for daz in az_steps
    )
    return Codebook(beams=beams, pattern=pattern)


@dataclass(frozen=True)
class McsTable:
    """Discrete adaptive-modulation lookup: SINR threshold to efficiency."""

    thresholds_db: tuple
    efficiencies_bps_hz: tuple

    def __post_init__(self):
        t = np.asarray(self.thresholds_db)
        e = np.asarray(self.efficiencies_bps_hz)
        if t.shape != e.shape or t.size == 0:
            raise ValueError("thresholds and efficiencies must match and be non-empty")
        if np.any(np.diff(t) <= 0) or np.any(np.diff(e) <= 0):
            raise ValueError("thresholds and efficiencies must be strictly increasing")


# 15-entry CQI-style table: standard NR CQI table-1 efficiencies with SINR
# thresholds spaced linearly from -6.7 dB to 19.8 dB.
DEFAULT_MCS = McsTable(
    thresholds_db=tuple(np.round(np.linspace(-6.7, 19.8, 15), 4)),
    efficiencies_bps_hz=(
        0.1523, 0.2344, 0.3770, 0.6016, 0.8770, 1.1758, 1.4766, 1.9141,
        2.4063, 2.7305, 3.3223, 3.9023, 4.5234, 5.1152, 5.5547,
    ),
)


def capacity_bps(sinr_db, bandwidth_hz, mcs):
    """Bandwidth times the efficiency of the best MCS whose threshold is met.

    Thresholds are closed lower bounds; below the lowest one the UE is in
    outage and gets zero.
    """
    if np.isnan(sinr_db):
        raise ValueError("sinr_db must not be NaN")
    t = np.asarray(mcs.thresholds_db)
    i = int(np.searchsorted(t, sinr_db, side="right")) - 1
    if i < 0:
        return 0.0
    return float(bandwidth_hz * mcs.efficiencies_bps_hz[i])


# ---------------------------------------------------------------------------
# Scenario description
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Donor:
    position: tuple
    tx_power_dbm: float = 43.0
    pattern: AntennaPattern = field(default_factory=AntennaPattern)
    sector_center_az_deg: float | None = None  # None: aim at the region center


@dataclass(frozen=True)
class IabNode:
    position: tuple
    antenna_separation_m: float = 1.0
    tx_power_dbm: float = 43.0
    pattern: AntennaPattern = field(default_factory=AntennaPattern)
    sector_center_az_deg: float | None = None
    residual_si_dbm: float | None = None  # full-SIC residual override

    def __post_init__(self):
        if self.antenna_separation_m <= 0.0:
            raise ValueError("antenna_separation_m must be positive")

    def mt_position(self):
        """The MT hangs antenna_separation_m below the DU on the mast."""
        x, y, z = self.position
        return (x, y, z - self.antenna_separation_m)


@dataclass(frozen=True)
class UeGrid:
    nx: int = 21
    ny: int = 21
    x_range: tuple = (-250.0, 250.0)
    y_range: tuple = (-250.0, 250.0)
    height_m: float = 1.5

    def __post_init__(self):
        if self.nx < 0 or self.ny < 0:
            raise ValueError("grid dimensions must be non-negative")

    @property
    def n_ues(self):
        return self.nx * self.ny

    def positions(self):
        """UE positions, y-major row order (ue_id = iy * nx + ix)."""
        xs = np.linspace(*self.x_range, self.nx)
        ys = np.linspace(*self.y_range, self.ny)
        gx, gy = np.meshgrid(xs, ys)
        return np.column_stack([gx.ravel(), gy.ravel(), np.full(gx.size, self.height_m)])


@dataclass(frozen=True)
class Scenario:
    donor: Donor
    iab_nodes: tuple
    ue_grid: UeGrid = field(default_factory=UeGrid)
    bandwidth_hz: float = 120e6
    noise_figure_db: float = 3.0
    carrier_freq_hz: float = 28e9
    guard_overhead: float = 0.1
    access_shadow_sigma_db: float = 4.0
    full_sic_margin_db: float = 1.0
    reflectors: ReflectorConfig | None = field(default_factory=ReflectorConfig)

    def __post_init__(self):
        if not (0.0 <= self.guard_overhead < 1.0):
            raise ValueError("guard_overhead must lie in [0, 1)")
        if self.bandwidth_hz <= 0.0:
            raise ValueError("bandwidth_hz must be positive")

    @property
    def noise(self):
        return NoiseModel(self.bandwidth_hz, self.noise_figure_db)

    def cells(self):
        return (self.donor,) + tuple(self.iab_nodes)

    def region_center(self):
        return (
            float(np.mean(self.ue_grid.x_range)),
            float(np.mean(self.ue_grid.y_range)),
            self.ue_grid.height_m,
        )

    def sector_center_az(self, cell):
        if cell.sector_center_az_deg is not None:
            return cell.sector_center_az_deg
        cx, cy, _ = self.region_center()
        x, y, _ = cell.position
        return float(np.degrees(np.arctan2(cy - y, cx - x)))


def default_scenario():
    """Desk-scale deployment: one donor, two relays, 441 UEs over 500 m x 500 m.

    The donor sits toward the west edge so that the two relays carry the
    majority of the UEs; backhaul hops stay ~215 m long, short enough that a
    healthy backhaul survives moderate residual SI.
    """
    return Scenario(
        donor=Donor(position=(-150.0, 0.0, 130.0)),
        iab_nodes=(
            IabNode(position=(40.0, 100.0, 126.0)),
            IabNode(position=(40.0, -100.0, 99.0)),
        ),
    )


@dataclass(frozen=True)
class ThroughputRecord:
    ue_id: int
    serving_cell: int  # 0 is the donor
    beam: int
    access_snr_db: float
    access_sinr_db: float
    backhaul_sinr_db: float | None  # None for fibered/donor-served
    dli_power_dbm: float | None
    throughput_bps: float
    mode: str


# ---------------------------------------------------------------------------
# Scheduling and link arithmetic
# ---------------------------------------------------------------------------


def _lin_sum_dbm(*levels_dbm):
    """Power sum in dBm, ignoring -inf entries."""
    total = sum(dbm_to_watt(v) for v in levels_dbm if v != -np.inf)
    return float(watt_to_dbm(total))


def _access_shadow_db(scenario, seed, cell_idx, ue_id):
    if scenario.access_shadow_sigma_db == 0.0:
        return 0.0
    rng = substream(seed, "access-shadow", cell_idx, ue_id)
    return float(scenario.access_shadow_sigma_db * rng.standard_normal())


def _beam_rx_dbm(cell, beam_dir, los_rows, freq_hz, shadows):
    """Shared row-wise rx-power expression for the scalar and vectorized
    schedulers. Spelled out per component (no BLAS reductions) so that the
    floats are bit-identical whether one UE or the whole grid is evaluated.

    Shadowing is a property of the cell-UE path, shared by all beams of the
    cell, so a uniform Tx power shift can never change the argmax decision.
    """
    lx, ly, lz = los_rows[:, 0], los_rows[:, 1], los_rows[:, 2]
    dx, dy, dz = float(beam_dir[0]), float(beam_dir[1]), float(beam_dir[2])
    dist = np.sqrt(lx * lx + ly * ly + lz * lz)
    dnorm = np.sqrt(dx * dx + dy * dy + dz * dz)
    cosang = np.clip((lx * dx + ly * dy + lz * dz) / (dnorm * dist), -1.0, 1.0)
    gain = cell.pattern.gain_dbi(np.degrees(np.arccos(cosang)))
    return cell.tx_power_dbm + gain + UE_GAIN_DBI - fspl_db(dist, freq_hz) - shadows


def access_rx_power_dbm(scenario, seed, cell_idx, cell, beam_dir, ue_pos, ue_id):
    """Rx power of one candidate (cell, beam) at one UE, shadowing included."""
    los = (np.asarray(ue_pos, float) - np.asarray(cell.position, float))[np.newaxis, :]
    shadow = np.array([_access_shadow_db(scenario, seed, cell_idx, ue_id)])
    out = _beam_rx_dbm(
        cell, np.asarray(beam_dir, float), los, scenario.carrier_freq_hz, shadow
    )
    return float(out[0])


def schedule_ue(scenario, seed, ue_pos, ue_id, codebooks):
    """Max-SNR association: best (cell, beam) pair, ties to the lowest indices."""
    best = (-np.inf, 0, 0)
    cells = scenario.cells()
    for ci, cell in enumerate(cells):
        dirs = codebooks[ci].directions()
        for bi in range(dirs.shape[0]):
            rx = access_rx_power_dbm(scenario, seed, ci, cell, dirs[bi], ue_pos, ue_id)
            if rx > best[0]:
                best = (rx, ci, bi)
    return best[1], best[2], best[0]


def schedule_drop(scenario, seed):
    """Vectorized max-SNR scheduling for the whole UE grid.

    Returns (serving_cell, beam, access_rx_dbm) arrays; identical to calling
    schedule_ue per UE because every shadow draw comes from its own
    (cell, ue) substream.
    """
    ues = scenario.ue_grid.positions()
    n_ue = ues.shape[0]
    cells = scenario.cells()
    codebooks = [build_codebook(c.pattern, scenario.sector_center_az(c)) for c in cells]
    if n_ue == 0:
        empty = np.array([], dtype=int)
        return empty, empty, np.array([]), codebooks

    rx = np.full((len(cells), N_BEAMS_AZ * N_BEAMS_EL, n_ue), -np.inf)
    for ci, cell in enumerate(cells):
        los = ues - np.asarray(cell.position, float)
        shadows = np.array(
            [_access_shadow_db(scenario, seed, ci, u) for u in range(n_ue)]
        )
        dirs = codebooks[ci].directions()
        for bi in range(dirs.shape[0]):
            rx[ci, bi] = _beam_rx_dbm(
                cell, dirs[bi], los, scenario.carrier_freq_hz, shadows
            )

    flat = rx.reshape(len(cells) * N_BEAMS_AZ * N_BEAMS_EL, n_ue)
    pick = np.argmax(flat, axis=0)  # first max: lowest (cell, beam) wins ties
    serving = pick // (N_BEAMS_AZ * N_BEAMS_EL)
    beam = pick % (N_BEAMS_AZ * N_BEAMS_EL)
    return serving, beam, flat[pick, np.arange(n_ue)], codebooks


def backhaul_rx_power_dbm(scenario, node):
    """Donor-DU to node-MT link over the perfectly aligned fixed beams."""
    dist = float(
        np.linalg.norm(np.asarray(node.mt_position()) - np.asarray(scenario.donor.position))
    )
    return (
        scenario.donor.tx_power_dbm
        + scenario.donor.pattern.boresight_gain_dbi
        + node.pattern.boresight_gain_dbi
        - fspl_db(dist, scenario.carrier_freq_hz)
    )


def dli_power_dbm(scenario, seed, node, ue_pos, ue_id):
    """Donor backhaul transmission received directly by a relayed UE.

    The donor beam stays fixed on the serving node's MT; the UE picks up its
    off-boresight leakage over the same shadowed path as the donor's access
    link to that UE.
    """
    donor = scenario.donor
    donor_pos = np.asarray(donor.position, float)
    beam_dir = np.asarray(node.mt_position(), float) - donor_pos
    los = np.asarray(ue_pos, float) - donor_pos
    dist = float(np.linalg.norm(los))
    cosang = np.clip(
        np.dot(beam_dir, los) / (np.linalg.norm(beam_dir) * dist), -1.0, 1.0
    )
    gain = donor.pattern.gain_dbi(float(np.degrees(np.arccos(cosang))))
    shadow = _access_shadow_db(scenario, seed, 0, ue_id)
    return (
        donor.tx_power_dbm
        + gain
        + UE_GAIN_DBI
        - fspl_db(dist, scenario.carrier_freq_hz)
        - shadow
    )


def propagation_residual_si_dbm(scenario, seed, node_idx, node, beam_dir, beam_idx):
    """Residual SI after propagation-domain suppression only, for one access beam.

    The reflected-tap realization is redrawn per scheduled beam (the SI seen
    at the MT varies with the DU beam); the MT keeps pointing at the donor.
    """
    mt_to_donor = np.asarray(scenario.donor.position, float) - np.asarray(
        node.mt_position(), float
    )
    geom = SiGeometry(
        antenna_separation_m=node.antenna_separation_m,
        tx_orientation=tuple(beam_dir),
        rx_orientation=tuple(mt_to_donor / np.linalg.norm(mt_to_donor)),
    )
    cir = si_channel(
        geom,
        node.pattern,
        node.pattern,
        scenario.reflectors,
        seed=substream(seed, "si", node_idx, beam_idx).integers(2**63),
        carrier_freq_hz=scenario.carrier_freq_hz,
    )
    return node.tx_power_dbm + cir.total_gain_db()


def residual_si_dbm(scenario, mode, node, prop_residual_dbm):
    """Residual SI power entering the backhaul SINR for one node and mode."""
    floor = scenario.noise.floor_dbm
    if mode in (Mode.HD, Mode.FIBERED, Mode.IDEAL_FD):
        return -np.inf
    if mode == Mode.FD_PROP_ONLY:
        return prop_residual_dbm
    if mode == Mode.FD_FULL:
        if node.residual_si_dbm is not None:
            return node.residual_si_dbm
        # Full chain lands the residual near the floor; it can never exceed
        # what propagation alone already achieved.
        return min(prop_residual_dbm, floor + scenario.full_sic_margin_db)
    raise ValueError(f"unknown mode {mode}")


def ue_throughput(
    mode,
    relayed,
    access_rx_dbm,
    backhaul_rx_dbm,
    dli_dbm,
    residual_si_dbm_value,
    scenario,
    mcs=DEFAULT_MCS,
):
    """Downlink throughput of one UE under one configuration.

    Donor-served and fibered UEs get their plain access capacity. Relayed FD
    UEs are bottlenecked by min(access with DLI, backhaul with residual SI).
    Relayed HD UEs time-share the two hops, optimal split, charged the guard
    overhead: (1-g) * Ca*Cb / (Ca+Cb).
    """
    floor = scenario.noise.floor_dbm
    bw = scenario.bandwidth_hz
    access_snr = access_rx_dbm - floor

    if mode == Mode.FIBERED or not relayed:
        thr = capacity_bps(access_snr, bw, mcs)
        return thr, access_snr, None

    if mode == Mode.HD:
        backhaul_sinr = backhaul_rx_dbm - floor
        ca = capacity_bps(access_snr, bw, mcs)
        cb = capacity_bps(backhaul_sinr, bw, mcs)
        thr = 0.0
        if ca > 0.0 and cb > 0.0:
            thr = (1.0 - scenario.guard_overhead) * ca * cb / (ca + cb)
        return thr, access_snr, backhaul_sinr

    # FD modes: DLI degrades the access link, residual SI the backhaul link.
    access_sinr = access_rx_dbm - _lin_sum_dbm(floor, dli_dbm)
    backhaul_sinr = backhaul_rx_dbm - _lin_sum_dbm(floor, residual_si_dbm_value)
    thr = min(
        capacity_bps(access_sinr, bw, mcs), capacity_bps(backhaul_sinr, bw, mcs)
    )
    return thr, access_sinr, backhaul_sinr


def run_drop(scenario, seed, modes=ALL_MODES, mcs=DEFAULT_MCS):
    """One deployment drop: schedule every UE once, evaluate every mode.

    Scheduling is max-SNR and mode-independent, so per-UE serving decisions
    are shared across the mode comparison, as in the reference topology.
    Deterministic per (scenario, seed).
    """
    ues = scenario.ue_grid.positions()
    serving, beam, access_rx, codebooks = schedule_drop(scenario, seed)
    n_ue = ues.shape[0]

    backhaul_rx = {}
    prop_residual = {}
    for ni, node in enumerate(scenario.iab_nodes):
        backhaul_rx[ni] = backhaul_rx_power_dbm(scenario, node)
        dirs = codebooks[ni + 1].directions()
        prop_residual[ni] = [
            propagation_residual_si_dbm(scenario, seed, ni, node, dirs[bi], bi)
            for bi in range(dirs.shape[0])
        ]

    records = []
    for mode in modes:
        mode = Mode(mode)
        for u in range(n_ue):
            ci = int(serving[u])
            bi = int(beam[u])
            relayed = ci > 0
            floor = scenario.noise.floor_dbm
            if relayed:
                node = scenario.iab_nodes[ci - 1]
                dli = dli_power_dbm(scenario, seed, node, ues[u], u)
                res_si = residual_si_dbm(
                    scenario, mode, node, prop_residual[ci - 1][bi]
                )
                bh_rx = backhaul_rx[ci - 1]
            else:
                dli, res_si, bh_rx = None, -np.inf, None
            thr, access_sinr, backhaul_sinr = ue_throughput(
                mode,
                relayed,
                float(access_rx[u]),
                bh_rx,
                dli if (dli is not None and mode not in (Mode.HD, Mode.FIBERED)) else -np.inf,
                res_si,
                scenario,
                mcs,
            )
            records.append(
                ThroughputRecord(
                    ue_id=u,
                    serving_cell=ci,
                    beam=bi,
                    access_snr_db=float(access_rx[u]) - floor,
                    access_sinr_db=access_sinr,
                    backhaul_sinr_db=backhaul_sinr,
                    dli_power_dbm=dli if (relayed and mode not in (Mode.HD, Mode.FIBERED)) else None,
                    throughput_bps=thr,
                    mode=mode.value,
                )
            )
    return records


def cdf(values):
    """Empirical CDF points (sorted value, P(X <= value))."""
    v = np.sort(np.asarray(list(values), dtype=float))
    if v.size == 0:
        return np.array([]), np.array([])
    p = np.arange(1, v.size + 1) / v.size
    return v, p
