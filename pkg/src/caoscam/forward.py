"""FM-CDMA forward model: scene -> photodetector ADC sample trace.

The LED source is keyed on/off at the carrier ``f_c = P * f_b`` while the
DMD holds, for each Walsh bit, every pixel's mirror in one of two tilt
states. The point detector on the "+1" side sees

    s1[k, n] = gain * carrier(n) * sum_j I_j * (1 + c_j[k]) / 2

and the optional second detector receives the complementary light.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ParameterError
from .walsh import WalshCodebook, fwht, is_power_of_two

__all__ = [
    "SampleTrace",
    "SimConfig",
    "auto_gain",
    "bit_light",
    "carrier_waveform",
    "encode",
    "quantize",
    "quantize_sample",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SimConfig:
    """Signal-chain parameters shared by the encoder and decoder.

    Sample rate is ``samples_per_bit * bit_rate_hz`` so that every Walsh
    bit is exactly one FFT frame with the carrier on integer bin
    ``cycles_per_bit``.
    """

    bit_rate_hz: float = 1000.0
    cycles_per_bit: int = 32
    samples_per_bit: int = 1024
    adc_bits: int = 16
    adc_full_scale: float = 1.0
    detector_gain: float = 1.0
    noise_rms: float = 0.0
    dual_pd: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.bit_rate_hz <= 0:
            raise ParameterError("bit_rate_hz must be > 0")
        if int(self.cycles_per_bit) != self.cycles_per_bit or self.cycles_per_bit < 1:
            raise ParameterError("cycles_per_bit must be an integer >= 1")
        if not is_power_of_two(self.samples_per_bit):
            raise ParameterError(f"samples_per_bit must be a power of 2, got {self.samples_per_bit}")
        if self.samples_per_bit <= 2 * self.cycles_per_bit:
            raise ParameterError(
                f"samples_per_bit={self.samples_per_bit} must exceed 2*cycles_per_bit={2 * self.cycles_per_bit}"
            )
        if not 8 <= self.adc_bits <= 24:
            raise ParameterError(f"adc_bits must be within [8, 24], got {self.adc_bits}")
        if self.adc_full_scale <= 0 or self.detector_gain <= 0:
            raise ParameterError("adc_full_scale and detector_gain must be > 0")
        if self.noise_rms < 0:
            raise ParameterError("noise_rms must be >= 0")
        if not 0 <= int(self.seed) < 2**64:
            raise ParameterError("seed must fit an unsigned 64-bit integer")

    @property
    def carrier_hz(self) -> float:
        return self.cycles_per_bit * self.bit_rate_hz

    @property
    def sample_rate_hz(self) -> float:
        return self.samples_per_bit * self.bit_rate_hz

    @property
    def code_max(self) -> int:
        return 2 ** (self.adc_bits - 1) - 1

    @property
    def code_min(self) -> int:
        return -(2 ** (self.adc_bits - 1))

    @property
    def adc_step(self) -> float:
        """Volts per ADC code (one LSB)."""
        return self.adc_full_scale / self.code_max

    def replace(self, **changes) -> "SimConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class SampleTrace:
    """One or two detector channels, ``bits * samples_per_bit`` samples each.

    ``channels`` holds integer ADC codes when ``quantized`` is true and
    pre-quantization detector output otherwise.
    """

    channels: np.ndarray
    bits: int
    samples_per_bit: int
    config: SimConfig
    saturation_count: int = 0
    quantized: bool = True
    warnings: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        ch = np.asarray(self.channels)
        if ch.ndim == 1:
            ch = ch[None, :]
        if ch.shape[0] not in (1, 2):
            raise ParameterError(f"a trace carries 1 or 2 channels, got {ch.shape[0]}")
        if ch.shape[1] != self.bits * self.samples_per_bit:
            raise ParameterError(
                f"channel length {ch.shape[1]} != bits*samples_per_bit "
                f"({self.bits}*{self.samples_per_bit})"
            )
        object.__setattr__(self, "channels", ch)

    @property
    def n_channels(self) -> int:
        return self.channels.shape[0]

    def volts(self, channel: int = 0) -> np.ndarray:
        """Channel samples in detector-output units."""
        x = self.channels[channel]
        if self.quantized:
            return x.astype(np.float64) * self.config.adc_step
        return np.asarray(x, dtype=np.float64)

    def __eq__(self, other):
        if not isinstance(other, SampleTrace):
            return NotImplemented
        return (
            self.bits == other.bits
            and self.samples_per_bit == other.samples_per_bit
            and self.saturation_count == other.saturation_count
            and self.quantized == other.quantized
            and self.config == other.config
            and np.array_equal(self.channels, other.channels)
        )

    __hash__ = None


def carrier_waveform(n, config: SimConfig):
    """On/off LED drive at sample ``n``: 1 in the first half of each carrier cycle.

    Works on scalars or integer arrays. Exactly ``cycles_per_bit`` cycles
    fit each bit window.
    """
    local = np.asarray(n) % config.samples_per_bit
    high = ((2 * config.cycles_per_bit * local) // config.samples_per_bit) % 2 == 0
    out = high.astype(np.int8)
    return int(out) if out.ndim == 0 else out


def bit_light(scene, codebook: WalshCodebook) -> tuple[np.ndarray, float]:
    """Per-bit irradiance sum routed to detector 1, and the total scene light.

    Uses ``sum_j I_j b_j[k] = (sum_j I_j + (H v)[k]) / 2`` with ``v`` the
    irradiance spread onto code indices, evaluated by a fast Walsh transform.
    """
    irr = np.asarray(getattr(scene, "irradiance", scene), dtype=np.float64).ravel()
    if irr.size != codebook.pixel_count:
        raise ParameterError(
            f"scene has {irr.size} pixels but the codebook assigns {codebook.pixel_count} codes"
        )
    total = float(irr.sum())
    s1 = 0.5 * (total + fwht(codebook.spread(irr)))
    return s1, total


def auto_gain(scene, codebook: WalshCodebook, config: SimConfig, headroom: float = 0.9) -> float:
    """Detector gain putting the brightest pre-noise sample at ``headroom`` of full scale."""
    s1, total = bit_light(scene, codebook)
    peak = float(s1.max())
    if config.dual_pd:
        peak = max(peak, float((total - s1).max()))
    if peak <= 0:
        return config.detector_gain
    return headroom * config.adc_full_scale / peak


def quantize(values, config: SimConfig) -> tuple[np.ndarray, int]:
    """Vectorized ADC: round half away from zero, then clamp.

    Returns the codes and the number of samples that clamped.
    """
    x = np.asarray(values, dtype=np.float64) / config.adc_step
    codes = np.sign(x) * np.floor(np.abs(x) + 0.5)
    clipped = int(np.count_nonzero((codes > config.code_max) | (codes < config.code_min)))
    codes = np.clip(codes, config.code_min, config.code_max)
    dtype = np.int16 if config.adc_bits <= 16 else np.int32
    return codes.astype(dtype), clipped


def quantize_sample(value: float, config: SimConfig) -> int:
    codes, _ = quantize(value, config)
    return int(codes)


def _bit_noise(config: SimConfig, channel: int, bits: int) -> np.ndarray:
    # one stream per (seed, channel, bit): output does not depend on evaluation order
    n = config.samples_per_bit
    out = np.empty((bits, n))
    for k in range(bits):
        rng = np.random.default_rng(np.random.SeedSequence([int(config.seed), channel, k]))
        out[k] = rng.standard_normal(n)
    out *= config.noise_rms
    return out


def encode(scene, codebook: WalshCodebook, config: SimConfig, quantize_output: bool = True) -> SampleTrace:
    """Simulate the detector trace(s) for one full Walsh frame.

    Parameters
    ----------
    scene : SceneImage or 2-D array
        Scaled irradiance; flattened row-major to match the code assignment.
    codebook : WalshCodebook
    config : SimConfig
    quantize_output : bool
        When false the returned trace holds the noisy but unquantized
        detector output (an ideal ADC).
    """
    s1, total = bit_light(scene, codebook)
    per_bit = [s1] if not config.dual_pd else [s1, total - s1]
    K, n = codebook.order, config.samples_per_bit
    carrier = carrier_waveform(np.arange(n), config).astype(np.float64)

    warnings = []
    peak = config.detector_gain * max(float(p.max()) for p in per_bit)
    if peak > config.adc_full_scale:
        msg = f"pre-noise peak {peak:.6g} exceeds ADC full scale {config.adc_full_scale:.6g}"
        warnings.append(msg)
        log.warning(msg)

    channels = []
    clipped = 0
    for ch, light in enumerate(per_bit):
        x = config.detector_gain * light[:, None] * carrier[None, :]
        if config.noise_rms > 0:
            x += _bit_noise(config, ch, K)
        x = x.ravel()
        if quantize_output:
            x, c = quantize(x, config)
            clipped += c
        channels.append(x)
    if clipped:
        warnings.append(f"{clipped} samples clamped at the ADC rails")
    return SampleTrace(
        np.stack(channels),
        bits=K,
        samples_per_bit=n,
        config=config,
        saturation_count=clipped,
        quantized=quantize_output,
        warnings=tuple(warnings),
    )
