"""Link-level simulation of differential massive-MIMO uplinks with low-resolution ADCs."""

from .diffcode import (
    DapskState,
    DispersionSet,
    PskConstellation,
    alamouti_dispersion,
    dapsk_encode,
    dapsk_modulate,
    diff_encode,
    scalar_dispersion,
)
from .harness import ConfigError, MetricRecord, SimConfig, emit_csv, prepare, run_trial, sweep
from .propagation import ChannelSpec, exp_pdp
from .quantize import QuantizerSpec, VqlPartition, one_bit, vql_partition
from .statmath import RandomSource

__all__ = [
    "ChannelSpec",
    "ConfigError",
    "DapskState",
    "DispersionSet",
    "MetricRecord",
    "PskConstellation",
    "QuantizerSpec",
    "RandomSource",
    "SimConfig",
    "VqlPartition",
    "alamouti_dispersion",
    "dapsk_encode",
    "dapsk_modulate",
    "diff_encode",
    "emit_csv",
    "exp_pdp",
    "one_bit",
    "prepare",
    "run_trial",
    "scalar_dispersion",
    "sweep",
    "vql_partition",
]

__version__ = "0.1.0"
