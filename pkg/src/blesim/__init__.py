"""BLE 5 baseband simulator: PHY + link layer TX/RX and a PER harness."""

from .channel import (
    ChannelProfile,
    InterfererConfig,
    apply_cfo,
    apply_dc,
    awgn,
    fade,
    interferer_at_rate,
    los_profile,
    mix,
    nlos_profile,
    reverberant_profile,
    wlan_interferer,
)
from .chansel import ChannelMap, HopState, csa1_next, csa2_prn, csa2_select
from .coded import assemble_coded, fec_encode, pattern_demap, pattern_map, viterbi_decode
from .errors import (
    BlesimError,
    ConfigError,
    InsufficientDataError,
    IoError,
    LengthError,
    MapError,
    ModeError,
    ParamError,
    PduLengthError,
    ProfileError,
    RateMismatchError,
    SyncFailure,
)
from .gmsk import (
    IqFrame,
    PulseShape,
    gaussian_taps,
    gmsk_demodulate,
    gmsk_modulate,
    matched_filter,
    read_iq,
    resample,
    write_iq,
)
from .harness import (
    PerResult,
    ScenarioConfig,
    emit_results,
    load_scenario,
    paper_scenarios,
    run_campaign,
    run_frame,
    save_scenario,
    update_channel_map,
    wilson_interval,
)
from .llpacket import (
    ADVERTISING_ACCESS_ADDRESS,
    ADVERTISING_CRC_INIT,
    ChannelIndex,
    LinkLayerPacket,
    assemble_uncoded,
    crc24,
    crc24_bits,
    whiten,
    whitening_sequence,
)
from .phymode import PhyMode
from .receiver import AgcMode, ReceiverConfig, RxPacketReport, receive

__version__ = "0.1.0"

__all__ = [
    "ADVERTISING_ACCESS_ADDRESS",
    "ADVERTISING_CRC_INIT",
    "AgcMode",
    "BlesimError",
    "ChannelIndex",
    "ChannelMap",
    "ChannelProfile",
    "ConfigError",
    "HopState",
    "InsufficientDataError",
    "InterfererConfig",
    "IoError",
    "IqFrame",
    "LengthError",
    "LinkLayerPacket",
    "MapError",
    "ModeError",
    "ParamError",
    "PduLengthError",
    "PerResult",
    "PhyMode",
    "ProfileError",
    "PulseShape",
    "RateMismatchError",
    "ReceiverConfig",
    "RxPacketReport",
    "ScenarioConfig",
    "SyncFailure",
    "apply_cfo",
    "apply_dc",
    "assemble_coded",
    "assemble_uncoded",
    "awgn",
    "crc24",
    "crc24_bits",
    "csa1_next",
    "csa2_prn",
    "csa2_select",
    "emit_results",
    "fade",
    "fec_encode",
    "gaussian_taps",
    "gmsk_demodulate",
    "gmsk_modulate",
    "interferer_at_rate",
    "load_scenario",
    "los_profile",
    "matched_filter",
    "mix",
    "nlos_profile",
    "paper_scenarios",
    "pattern_demap",
    "pattern_map",
    "read_iq",
    "receive",
    "resample",
    "reverberant_profile",
    "run_campaign",
    "run_frame",
    "save_scenario",
    "update_channel_map",
    "whiten",
    "whitening_sequence",
    "wilson_interval",
    "wlan_interferer",
    "write_iq",
]
