"""File formats: CAOSWH01 codebooks, CAOSTR01 traces, P2 graymaps, CSV/JSON reports.

All binary integers are little-endian. A trace carries only the chain
parameters in its fixed header; detector gain, ADC full scale and noise RMS
travel in a JSON sidecar (``<trace>.json``) so a decode can be calibrated.
"""

from __future__ import annotations

import csv
import json
import math
import struct
from pathlib import Path

import numpy as np

from .decoder import CalibrationScale, DecodedImage
from .errors import FormatError, FramingError, ParameterError
from .forward import SampleTrace, SimConfig
from .metrics import LinearityFit, PatchReport, PatchRow
from .walsh import WalshCodebook

CODEBOOK_MAGIC = b"CAOSWH01"
TRACE_MAGIC = b"CAOSTR01"
TRACE_VERSION = 1

_CB_HEADER = struct.Struct("<8sII")
_TR_HEADER = struct.Struct("<8sHBBIIdIQQ")

LOG_RANGE_DB = 80.0


# -- codebook -----------------------------------------------------------------

def write_codebook(path, codebook: WalshCodebook) -> None:
    idx = np.asarray(codebook.assignment, dtype="<u4")
    with open(path, "wb") as f:
        f.write(_CB_HEADER.pack(CODEBOOK_MAGIC, codebook.order, codebook.pixel_count))
        f.write(idx.tobytes())


def read_codebook(path) -> WalshCodebook:
    data = Path(path).read_bytes()
    if len(data) < _CB_HEADER.size:
        raise FormatError(f"{path}: codebook header truncated at offset {len(data)}")
    magic, order, m = _CB_HEADER.unpack_from(data)
    if magic != CODEBOOK_MAGIC:
        raise FormatError(f"{path}: bad codebook magic {magic!r} at offset 0")
    body = data[_CB_HEADER.size:]
    if len(body) != 4 * m:
        raise FormatError(
            f"{path}: expected {4 * m} assignment bytes at offset {_CB_HEADER.size}, found {len(body)}"
        )
    idx = np.frombuffer(body, dtype="<u4")
    try:
        return WalshCodebook(int(order), tuple(int(i) for i in idx))
    except ParameterError as exc:
        raise FormatError(f"{path}: invalid codebook contents: {exc}") from exc


# -- trace --------------------------------------------------------------------

def _sample_dtype(adc_bits: int) -> str:
    return "<i2" if adc_bits <= 16 else "<i4"


def _sidecar_path(path) -> Path:
    return Path(str(path) + ".json")


def write_trace(path, trace: SampleTrace, sidecar: bool = True) -> None:
    """Write a quantized trace; analog (unquantized) traces are rejected."""
    if not trace.quantized:
        raise ParameterError("only quantized traces can be stored in CAOSTR01")
    cfg = trace.config
    header = _TR_HEADER.pack(
        TRACE_MAGIC,
        TRACE_VERSION,
        trace.n_channels,
        cfg.adc_bits,
        trace.bits,
        trace.samples_per_bit,
        float(cfg.bit_rate_hz),
        cfg.cycles_per_bit,
        int(cfg.seed),
        int(trace.saturation_count),
    )
    with open(path, "wb") as f:
        f.write(header)
        f.write(np.ascontiguousarray(trace.channels, dtype=_sample_dtype(cfg.adc_bits)).tobytes())
    if sidecar:
        meta = {
            "adc_full_scale": cfg.adc_full_scale,
            "detector_gain": cfg.detector_gain,
            "noise_rms": cfg.noise_rms,
            "dual_pd": cfg.dual_pd,
            "warnings": list(trace.warnings),
        }
        _sidecar_path(path).write_text(json.dumps(meta, indent=2))


def read_trace(path) -> SampleTrace:
    data = Path(path).read_bytes()
    if len(data) < _TR_HEADER.size:
        raise FormatError(f"{path}: trace header truncated at offset {len(data)} (need {_TR_HEADER.size})")
    magic, version, n_ch, adc_bits, bits, spb, rate, cycles, seed, sat = _TR_HEADER.unpack_from(data)
    if magic != TRACE_MAGIC:
        raise FormatError(f"{path}: bad trace magic {magic!r} at offset 0")
    if version != TRACE_VERSION:
        raise FormatError(f"{path}: unsupported trace version {version} at offset 8")
    if n_ch not in (1, 2):
        raise FormatError(f"{path}: invalid channel count {n_ch} at offset 10")

    extra = {}
    side = _sidecar_path(path)
    if side.exists():
        meta = json.loads(side.read_text())
        extra = {k: meta[k] for k in ("adc_full_scale", "detector_gain", "noise_rms") if k in meta}
    try:
        cfg = SimConfig(
            bit_rate_hz=rate,
            cycles_per_bit=cycles,
            samples_per_bit=spb,
            adc_bits=adc_bits,
            dual_pd=n_ch == 2,
            seed=seed,
            **extra,
        )
    except ParameterError as exc:
        raise FormatError(f"{path}: header describes an invalid chain: {exc}") from exc

    dtype = np.dtype(_sample_dtype(adc_bits))
    body = data[_TR_HEADER.size:]
    expected = n_ch * bits * spb * dtype.itemsize
    if len(body) != expected:
        raise FramingError(
            f"{path}: sample data at offset {_TR_HEADER.size} is {len(body)} bytes, "
            f"expected {expected} ({n_ch} ch x {bits} bits x {spb} samples)"
        )
    ch = np.frombuffer(body, dtype=dtype).reshape(n_ch, bits * spb)
    native = np.int16 if adc_bits <= 16 else np.int32
    return SampleTrace(ch.astype(native), bits, spb, cfg, saturation_count=sat, quantized=True)


# -- images -------------------------------------------------------------------

def write_pgm(path, gray: np.ndarray, maxval: int, scale: float, note: str = "linear") -> None:
    """Plain (P2) graymap; the ``# scale`` comment maps gray back to value."""
    gray = np.asarray(gray)
    rows, cols = gray.shape
    with open(path, "w") as f:
        f.write("P2\n")
        f.write(f"# scale {scale!r} {note}\n")
        f.write(f"{cols} {rows}\n{maxval}\n")
        for r in gray:
            f.write(" ".join(str(int(v)) for v in r) + "\n")


def read_pgm(path) -> tuple[np.ndarray, float, int]:
    """Return ``(gray, scale, maxval)``."""
    tokens, scale = [], None
    with open(path) as f:
        for line in f:
            if line.startswith("#"):
                parts = line[1:].split()
                if len(parts) >= 2 and parts[0] == "scale":
                    scale = float(parts[1])
                continue
            tokens.extend(line.split())
    if not tokens or tokens[0] != "P2":
        raise FormatError(f"{path}: not a plain P2 graymap")
    try:
        cols, rows, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
        gray = np.array([int(t) for t in tokens[4:]], dtype=np.int64)
    except (IndexError, ValueError) as exc:
        raise FormatError(f"{path}: malformed P2 header or pixel data") from exc
    if gray.size != rows * cols:
        raise FormatError(f"{path}: {gray.size} pixels for a {cols}x{rows} image")
    return gray.reshape(rows, cols), (1.0 if scale is None else scale), maxval


def linear_gray(values: np.ndarray, maxval: int = 65535) -> tuple[np.ndarray, float]:
    """Clamp negatives to 0 and map ``[0, vmax]`` onto ``[0, maxval]``."""
    v = np.clip(np.asarray(values, dtype=np.float64), 0, None)
    vmax = float(v.max())
    scale = vmax / maxval if vmax > 0 else 1.0
    return np.round(v / scale).astype(np.int64), scale


def log_gray(values: np.ndarray, range_db: float = LOG_RANGE_DB) -> np.ndarray:
    """8-bit log display: ``round(255 (10 log10(max(v, floor)/vmax) + R) / R)``."""
    v = np.asarray(values, dtype=np.float64)
    vmax = float(v.max())
    if vmax <= 0:
        return np.zeros(v.shape, dtype=np.int64)
    floor = vmax * 10.0 ** (-range_db / 10.0)
    db = 10.0 * np.log10(np.maximum(v, floor) / vmax)
    return np.round(255.0 * (db + range_db) / range_db).astype(np.int64)


def write_image_pgm(path, values: np.ndarray, log_scale: bool = False) -> None:
    if log_scale:
        write_pgm(path, log_gray(values), 255, float(np.max(values)), note=f"log {LOG_RANGE_DB:g}dB vmax")
    else:
        gray, scale = linear_gray(values)
        write_pgm(path, gray, 65535, scale)


def write_csv_image(path, values: np.ndarray) -> None:
    """Row-major CSV; floats use ``repr`` so they re-load bit-exactly."""
    values = np.asarray(values)
    integer = np.issubdtype(values.dtype, np.integer) or values.dtype == bool
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        for r in values:
            w.writerow([str(int(v)) for v in r] if integer else [repr(float(v)) for v in r])


def read_csv_image(path, dtype=np.float64) -> np.ndarray:
    with open(path, newline="") as f:
        rows = [row for row in csv.reader(f) if row]
    try:
        arr = np.array([[float(v) for v in r] for r in rows], dtype=np.float64)
    except ValueError as exc:
        raise FormatError(f"{path}: non-numeric CSV cell") from exc
    if arr.ndim != 2:
        raise FormatError(f"{path}: ragged CSV rows")
    return arr.astype(dtype)


def write_decoded(prefix, image: DecodedImage) -> dict[str, Path]:
    """Linear P2, log P2, CSV and a JSON note with the calibration used."""
    prefix = Path(prefix)
    out = {
        "pgm": prefix.with_name(prefix.name + ".pgm"),
        "log_pgm": prefix.with_name(prefix.name + "_log.pgm"),
        "csv": prefix.with_name(prefix.name + ".csv"),
        "meta": prefix.with_name(prefix.name + ".json"),
    }
    write_image_pgm(out["pgm"], image.values)
    write_image_pgm(out["log_pgm"], image.values, log_scale=True)
    write_csv_image(out["csv"], image.values)
    out["meta"].write_text(json.dumps(
        {"alpha": image.calibration.alpha, "calibration": image.calibration.method,
         "rows": image.rows, "cols": image.cols},
        indent=2,
    ))
    return out


def read_decoded(csv_path) -> DecodedImage:
    csv_path = Path(csv_path)
    values = read_csv_image(csv_path)
    meta_path = csv_path.with_suffix(".json")
    cal = CalibrationScale(1.0, "unknown")
    if meta_path.exists():
        meta = json.loads(meta_path.read_text())
        cal = CalibrationScale(float(meta["alpha"]), meta.get("calibration", "unknown"))
    return DecodedImage(values, cal)


# -- reports ------------------------------------------------------------------

REPORT_COLUMNS = ("patch", "dr_db", "m_db", "snr", "signal", "recovered")


def write_patch_report(path, report: PatchReport) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(REPORT_COLUMNS)
        for r in report.rows:
            w.writerow([r.patch, *(repr(float(v)) for v in (r.truth_dr_db, r.measured_db, r.snr, r.signal)),
                        int(r.recovered)])
        w.writerow(["dark_rms", repr(float(report.dark_rms)), "", "", "", ""])


def read_patch_report(path) -> PatchReport:
    rows, dark = [], math.nan
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if tuple(header or ()) != REPORT_COLUMNS:
            raise FormatError(f"{path}: unexpected report header {header}")
        for rec in reader:
            if not rec:
                continue
            if rec[0] == "dark_rms":
                dark = float(rec[1])
                continue
            rows.append(PatchRow(int(rec[0]), float(rec[1]), float(rec[2]), float(rec[3]),
                                 float(rec[4]), bool(int(rec[5]))))
    return PatchReport(tuple(rows), dark)


def write_linearity(prefix, fit: LinearityFit) -> dict[str, Path]:
    prefix = Path(prefix)
    js = prefix.with_name(prefix.name + ".json")
    pts = prefix.with_name(prefix.name + "_points.csv")
    js.write_text(json.dumps(
        {"slope": fit.slope, "intercept": fit.intercept, "r_squared": fit.r_squared,
         "points": len(fit.x)},
        indent=2,
    ))
    with open(pts, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["dr_db", "m_db"])
        for x, y in zip(fit.x, fit.y):
            w.writerow([repr(float(x)), repr(float(y))])
    return {"json": js, "points": pts}


def read_linearity(prefix) -> LinearityFit:
    prefix = Path(prefix)
    meta = json.loads(prefix.with_name(prefix.name + ".json").read_text())
    xs, ys = [], []
    with open(prefix.with_name(prefix.name + "_points.csv"), newline="") as f:
        reader = csv.reader(f)
        next(reader)
        for rec in reader:
            if rec:
                xs.append(float(rec[0]))
                ys.append(float(rec[1]))
    return LinearityFit(meta["slope"], meta["intercept"], meta["r_squared"], tuple(xs), tuple(ys))
