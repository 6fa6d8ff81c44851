"""spikebench: distributed columnar spiking-network benchmark simulator
with synaptic-event energy accounting.

The package is organized by concern:

* neurons      point-neuron models and single-step integrators
* network      deterministic columnar grid construction
* engine       per-rank simulation loop, metrics, rate calibration
* plasticity   exponential-trace STDP (disabled by default)
* distributed  partitioning, spike-frame wire protocol, transports
* energy       watts / joules / joules-per-event arithmetic
* config       flat key-value run configuration
* cli          `spikebench run|calibrate|report`
"""

from .energy import (
    ComparisonReport,
    EnergyReport,
    PlatformRecord,
    PowerMeasurement,
    comparison_report,
    electrical_power,
    energy_per_event,
    energy_report,
    energy_to_solution,
)
from .engine import (
    DelayRing,
    Engine,
    RunMetrics,
    StimulusSpec,
    calibrate_rate,
    deliver_spike,
    expected_event_count,
    poisson_external,
    poisson_external_batch,
    raster_checksum,
)
from .errors import (
    CalibrationError,
    ConfigError,
    ContractViolationError,
    ExchangeError,
    FrameCorruptionError,
    InfeasiblePartitionError,
    InfeasibleSpecError,
    NumericalDivergenceError,
    ProtocolViolationError,
    SpikebenchError,
    UndefinedMetricError,
)
from .network import (
    GridSpec,
    Network,
    Synapse,
    build_network,
    connection_probability,
    count_equivalent_synapses,
    load_network,
    network_stats,
    normalize_fanout,
    save_network,
)
from .neurons import (
    AdaptiveLifParams,
    IzhikevichParams,
    NeuronState,
    izhikevich_preset,
    step_adaptive_lif,
    step_izhikevich,
)
from .distributed import (
    Communicator,
    PartitionMap,
    RankPartition,
    decode_frame,
    encode_frame,
    partition,
    run_simulation,
)
from .plasticity import StdpParams, StdpState, stdp_delta_w
from .config import RunConfig, emit_config, load_bundled_config, parse_config

__version__ = "0.1.0"
