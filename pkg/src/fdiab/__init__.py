"""fdiab: desk-scale full-duplex integrated-access-and-backhaul simulator.

Link level: the three-domain self-interference reduction chain (propagation
isolation, two-tap analog cancellation, fifth-order parallel-Hammerstein
digital cancellation) around an OFDM waveform with PA and ADC impairments.
System level: downlink throughput of fibered, ideal-FD, FD-with-full-SIC,
FD-propagation-only and half-duplex configurations over a UE grid.
"""

__version__ = "0.1.0"

from .geometry import (
    AntennaPattern,
    ChannelImpulseResponse,
    LinkBudget,
    ReflectorConfig,
    SiGeometry,
    antenna_gain_dbi,
    fspl_db,
    link_budget,
    si_channel,
)
from .ofdm import OfdmConfig, OfdmFrame, demodulate, estimate_channel_ls, modulate
from .rf import (
    AdcModel,
    NoiseModel,
    PaModel,
    adc_quantize,
    fits_gray_zone,
    noise_floor_dbm,
    pa_apply,
    required_si_reduction_db,
)
from .sic import (
    HammersteinModel,
    LinkChainParams,
    ReductionReport,
    TwoTapConfig,
    apply_analog_canceller,
    apply_digital_sic,
    fit_hammerstein,
    run_link_chain,
    tune_two_tap,
)
from .system import (
    ALL_MODES,
    Codebook,
    Donor,
    IabNode,
    McsTable,
    Mode,
    Scenario,
    ThroughputRecord,
    UeGrid,
    capacity_bps,
    cdf,
    default_scenario,
    dli_power_dbm,
    run_drop,
    schedule_ue,
    ue_throughput,
)
