"""Simulator and codec for the active-mode CAOS camera in FM-CDMA mode."""

from .decoder import (
    BitAmplitudes,
    CalibrationScale,
    DecodedImage,
    calibrate,
    correlate_decode,
    decode_trace,
    differential_combine,
    extract_bit_amplitudes,
)
from .errors import (
    CaosError,
    CapacityError,
    ConfigurationError,
    DomainError,
    FormatError,
    FramingError,
    InsufficientDataError,
    ParameterError,
)
from .forward import SampleTrace, SimConfig, auto_gain, carrier_waveform, encode, quantize_sample
from .metrics import LinearityFit, PatchReport, dr_db, linearity_fit, patch_snr, uniformity_pct
from .scene import SceneImage, TargetSpec, generate_flat_field, generate_patch_target, table1_override
from .walsh import WalshCodebook, assign_codes, build_hadamard

__version__ = "0.1.0"
