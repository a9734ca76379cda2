"""Wrist electro-tactile haptics bench.

Stimulus synthesis with exact charge balancing, bipolar relay routing with
short-circuit prevention, a safety interlock, a CRC-framed wire protocol, a
deterministic simulated wristband with a synthetic perceiver, contact-event
rendering, calibration and study protocols, and the analysis pipeline.

Package-wide sign convention: cathodic current at the stimulation electrode
is negative.
"""

from .waveform import (
    PulseSpec,
    StimulusTrain,
    WaveformSamples,
    synth_stimulus,
    synth_monophasic,
    net_charge_uc,
    build_train,
    amplitude_to_control,
    control_to_amplitude,
)
from .relays import ElectrodeId, RelayFrame, RoutingState, route, idle, validate
from .interlock import SafetyLimits, SafetyInterlock, LoadMeasurement, check_command
from .framing import encode, decode, StreamDecoder
from .handmap import HandMap, default_handmap
from .perceiver import Perceiver, PerceiverConfig, SensationReport
from .simband import SimulatedWristband, SkinLoadModel
from .contact import HandPose, UIElement, ContactEvent, EventDetector, detect_events
from .sessions import (
    CalibrationResult,
    InteractionSession,
    StudyRunner,
    run_calibration,
    run_study_protocol,
    on_event,
)
from .records import TrialRecord, write_log, read_log
from .stats import rm_anova_2way, unpaired_t, wilcoxon_signed_rank
from .analysis import in_region_rate, strongest_point_rate, aggregate_heatmap

__version__ = "0.1.0"
