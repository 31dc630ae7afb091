"""Run configuration and the gen -> simulate -> decode -> analyze stages.

A run is described by one YAML document. Every key is optional::

    grid: {rows: 58, cols: 70}
    codebook_order: 4096
    output_dir: run
    sim:
      cycles_per_bit: 32
      samples_per_bit: 1024
      adc_bits: 16
      detector_gain: auto      # or a number
      headroom: 0.9            # peak sample / full scale when gain is auto
      noise_rms: 0.0
      noise_floor_db: null     # if set, overrides noise_rms: decoded dark RMS
                               # sits this many dB below the reference level 1.0
      dual_pd: false
      seed: 0
    target:
      patch_size_px: 8
      dr_table: null           # null, "table1", or a list of dB values
    flat: {mean_level: 0.76, uniformity_pct: 95, region: [9, 10, 49, 60], seed: 0}
    decode: {channel: 0, differential: false, calibration: analytic}
"""

from __future__ import annotations

import copy
import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import io
from .decoder import DecodedImage, calibrate, decode_trace, noise_rms_for_dark_floor
from .errors import ConfigurationError, ParameterError
from .forward import SampleTrace, SimConfig, auto_gain, encode
from .metrics import LinearityFit, PatchReport, linearity_fit, patch_snr, uniformity_pct
from .scene import SceneImage, TargetSpec, generate_flat_field, generate_patch_target, table1_override
from .walsh import WalshCodebook

DEFAULTS = {
    "grid": {"rows": 58, "cols": 70},
    "codebook_order": 4096,
    "output_dir": "run",
    "sim": {
        "bit_rate_hz": 1000.0,
        "cycles_per_bit": 32,
        "samples_per_bit": 1024,
        "adc_bits": 16,
        "adc_full_scale": 1.0,
        "detector_gain": "auto",
        "headroom": 0.9,
        "noise_rms": 0.0,
        "noise_floor_db": None,
        "dual_pd": False,
        "seed": 0,
    },
    "target": {
        "patch_count": 36,
        "total_dr_db": 160.0,
        "patch_size_px": 8,
        "gap_px": 1,
        "border_px": 2,
        "layout_cols": 6,
        "dr_table": None,
    },
    "flat": {"mean_level": 0.76, "uniformity_pct": 95.0, "region": [9, 10, 49, 60], "seed": 0},
    "decode": {"channel": 0, "differential": False, "calibration": "analytic"},
}


def _merge(base: dict, over: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if k not in base:
            raise ConfigurationError(f"unknown config key {path + k!r}")
        if isinstance(base[k], dict):
            if not isinstance(v, dict):
                raise ConfigurationError(f"config key {path + k!r} must be a mapping")
            out[k] = _merge(base[k], v, path + k + ".")
        else:
            out[k] = v
    return out


@dataclass
class RunConfig:
    raw: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))

    @classmethod
    def from_dict(cls, d: dict | None) -> "RunConfig":
        run = cls(_merge(DEFAULTS, d or {}))
        run.validate()
        return run

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            data = yaml.safe_load(Path(path).read_text()) or {}
        except yaml.YAMLError as exc:
            raise ConfigurationError(f"{path}: invalid YAML: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigurationError(f"{path}: top level must be a mapping")
        return cls.from_dict(data)

    def with_overrides(self, assignments: list[str]) -> "RunConfig":
        """Apply ``dotted.key=value`` strings; values are parsed as YAML scalars."""
        over: dict = {}
        for a in assignments:
            if "=" not in a:
                raise ConfigurationError(f"override {a!r} is not key=value")
            key, val = a.split("=", 1)
            node = over
            parts = key.strip().split(".")
            for p in parts[:-1]:
                node = node.setdefault(p, {})
            node[parts[-1]] = yaml.safe_load(val)
        return RunConfig.from_dict(_merge(self.raw, over))

    def dump(self) -> str:
        return yaml.safe_dump(self.raw, sort_keys=False)

    # typed views

    @property
    def rows(self) -> int:
        return int(self.raw["grid"]["rows"])

    @property
    def cols(self) -> int:
        return int(self.raw["grid"]["cols"])

    @property
    def output_dir(self) -> Path:
        return Path(self.raw["output_dir"])

    def codebook(self) -> WalshCodebook:
        return WalshCodebook.for_pixels(self.rows * self.cols, int(self.raw["codebook_order"]))

    def sim_config(self, detector_gain: float | None = None) -> SimConfig:
        s = self.raw["sim"]
        gain = s["detector_gain"]
        if detector_gain is not None:
            gain = detector_gain
        elif gain == "auto":
            gain = 1.0
        return SimConfig(
            bit_rate_hz=float(s["bit_rate_hz"]),
            cycles_per_bit=int(s["cycles_per_bit"]),
            samples_per_bit=int(s["samples_per_bit"]),
            adc_bits=int(s["adc_bits"]),
            adc_full_scale=float(s["adc_full_scale"]),
            detector_gain=float(gain),
            noise_rms=float(s["noise_rms"]),
            dual_pd=bool(s["dual_pd"]),
            seed=int(s["seed"]),
        )

    def target_spec(self) -> TargetSpec:
        t = dict(self.raw["target"])
        table = t.pop("dr_table")
        if table == "table1":
            table = table1_override(int(t["patch_count"]))
        elif table is not None and not isinstance(table, list):
            raise ConfigurationError("target.dr_table must be null, 'table1' or a list")
        return TargetSpec(dr_table_override=tuple(table) if table is not None else None, **t)

    def validate(self) -> None:
        try:
            self.codebook()
            self.sim_config()
            self.target_spec()
        except ParameterError as exc:
            raise ConfigurationError(str(exc)) from exc
        g = self.raw["sim"]["detector_gain"]
        if g != "auto" and not isinstance(g, (int, float)):
            raise ConfigurationError("sim.detector_gain must be 'auto' or a number")
        if self.raw["decode"]["calibration"] not in ("analytic", "empirical"):
            raise ConfigurationError("decode.calibration must be 'analytic' or 'empirical'")


# -- stages -------------------------------------------------------------------

def gen_target(run: RunConfig) -> SceneImage:
    return generate_patch_target(run.target_spec(), run.rows, run.cols)


def gen_flat(run: RunConfig) -> SceneImage:
    f = run.raw["flat"]
    region = tuple(int(v) for v in f["region"]) if f["region"] is not None else None
    return generate_flat_field(run.rows, run.cols, float(f["mean_level"]), float(f["uniformity_pct"]),
                               region, int(f["seed"]))


def write_scene(outdir, scene: SceneImage) -> dict[str, Path]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    files = {
        "pgm": outdir / "scene.pgm",
        "log_pgm": outdir / "scene_log.pgm",
        "csv": outdir / "scene.csv",
        "mask": outdir / "mask.csv",
    }
    io.write_image_pgm(files["pgm"], scene.irradiance)
    io.write_image_pgm(files["log_pgm"], scene.irradiance, log_scale=True)
    io.write_csv_image(files["csv"], scene.irradiance)
    io.write_csv_image(files["mask"], scene.illuminated_mask.astype(np.int64))
    if scene.patch_map is not None:
        files["patch_map"] = outdir / "patch_map.csv"
        io.write_csv_image(files["patch_map"], scene.patch_map)
    if scene.truth_dr_db is not None:
        files["dr_table"] = outdir / "dr_table.csv"
        write_dr_table(files["dr_table"], scene.truth_dr_db)
    return files


def write_dr_table(path, table) -> None:
    with open(path, "w") as f:
        f.write("patch,dr_db,irradiance\n")
        for i, a in enumerate(table, start=1):
            f.write(f"{i},{a!r},{10.0 ** (-a / 10.0)!r}\n")


def read_dr_table(path) -> tuple[float, ...]:
    lines = Path(path).read_text().splitlines()[1:]
    return tuple(float(line.split(",")[1]) for line in lines if line.strip())


def load_scene(scene_csv, mask_csv=None) -> SceneImage:
    irr = io.read_csv_image(scene_csv)
    mask = io.read_csv_image(mask_csv).astype(bool) if mask_csv else irr > 0
    return SceneImage(irr, mask)


def resolve_sim(run: RunConfig, scene, codebook: WalshCodebook) -> SimConfig:
    """Turn ``auto`` gain and ``noise_floor_db`` into concrete numbers for this scene."""
    s = run.raw["sim"]
    cfg = run.sim_config()
    if s["detector_gain"] == "auto":
        cfg = cfg.replace(detector_gain=auto_gain(scene, codebook, cfg, float(s["headroom"])))
    if s["noise_floor_db"] is not None:
        target = 10.0 ** (-float(s["noise_floor_db"]) / 10.0)
        try:
            sigma = noise_rms_for_dark_floor(target, cfg, codebook.order)
        except ParameterError as exc:
            raise ConfigurationError(str(exc)) from exc
        cfg = cfg.replace(noise_rms=sigma)
    return cfg


def simulate(run: RunConfig, scene) -> SampleTrace:
    codebook = run.codebook()
    irr = np.asarray(getattr(scene, "irradiance", scene))
    if irr.shape != (run.rows, run.cols):
        raise ConfigurationError(f"scene is {irr.shape[0]}x{irr.shape[1]}, config grid is {run.rows}x{run.cols}")
    return encode(irr, codebook, resolve_sim(run, irr, codebook))


def decode(run: RunConfig, trace: SampleTrace, codebook: WalshCodebook | None = None) -> DecodedImage:
    codebook = codebook or run.codebook()
    d = run.raw["decode"]
    if d["differential"] and trace.n_channels < 2:
        raise ConfigurationError("differential decode requested on a single-channel trace")
    cal = calibrate(trace.config, codebook, d["calibration"])
    try:
        return decode_trace(trace, codebook, cal, (run.rows, run.cols),
                            differential=bool(d["differential"]), channel=int(d["channel"]))
    except ParameterError as exc:
        raise ConfigurationError(str(exc)) from exc


@dataclass
class Analysis:
    report: PatchReport | None
    fit: LinearityFit | None
    uniformity: float | None
    mean_level: float | None

    def summary(self) -> dict:
        out = {}
        if self.report is not None:
            out["recovered_patches"] = self.report.recovered_patches
            out["dark_rms"] = self.report.dark_rms
            rec = [r for r in self.report.rows if r.recovered]
            if rec:
                out["max_recovered_dr_db"] = rec[-1].truth_dr_db
        if self.fit is not None:
            out["linearity"] = {"slope": self.fit.slope, "intercept": self.fit.intercept,
                                "r_squared": self.fit.r_squared}
        if self.uniformity is not None:
            out["uniformity_pct"] = self.uniformity
            out["mean_level"] = self.mean_level
        return out


def analyze(decoded, illuminated_mask, patch_map=None, truth_dr_db=None, flat: bool = False) -> Analysis:
    """Patch table and linearity when a patch map is given; uniformity for flat fields."""
    values = np.asarray(getattr(decoded, "values", decoded))
    mask = np.asarray(illuminated_mask, dtype=bool)
    if patch_map is None and not flat:
        raise ConfigurationError("analysis of a target needs its patch map")
    report = fit = uni = mean = None
    if patch_map is not None:
        report = patch_snr(values, patch_map, ~mask, truth_dr_db)
        if truth_dr_db is not None and len(report.recovered_patches) >= 2:
            fit = linearity_fit(report)
    if flat:
        uni = uniformity_pct(values, mask)
        mean = float(values[mask].mean())
    return Analysis(report, fit, uni, mean)


def write_analysis(outdir, analysis: Analysis) -> dict[str, Path]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    files = {}
    if analysis.report is not None:
        files["report"] = outdir / "patch_report.csv"
        io.write_patch_report(files["report"], analysis.report)
    if analysis.fit is not None:
        files.update({f"linearity_{k}": v for k, v in io.write_linearity(outdir / "linearity", analysis.fit).items()})
    files["summary"] = outdir / "summary.json"
    files["summary"].write_text(json.dumps(analysis.summary(), indent=2))
    return files


def config_snapshot(cfg: SimConfig) -> dict:
    return dataclasses.asdict(cfg)
