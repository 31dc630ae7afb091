"""``caos`` command-line front end.

Exit status: 0 success, 2 configuration error, 3 format error, 4 IO error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np
import yaml

from . import io, pipeline
from .errors import CaosError, ConfigurationError, FormatError, ParameterError

EXIT_OK, EXIT_CONFIG, EXIT_FORMAT, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("caoscam")


def _run_config(args) -> pipeline.RunConfig:
    run = pipeline.RunConfig.load(args.config) if args.config else pipeline.RunConfig()
    over = list(args.set or [])
    if getattr(args, "out", None):
        over.append(f"output_dir={args.out}")
    for flag, key in (("seed", "sim.seed"), ("noise_rms", "sim.noise_rms"),
                      ("noise_floor_db", "sim.noise_floor_db"), ("adc_bits", "sim.adc_bits")):
        val = getattr(args, flag, None)
        if val is not None:
            over.append(f"{key}={val}")
    if getattr(args, "dual_pd", False):
        over.append("sim.dual_pd=true")
    if getattr(args, "differential", False):
        over.append("decode.differential=true")
    if getattr(args, "dr_table", None):
        over.append(f"target.dr_table={args.dr_table}")
    run = run.with_overrides(over) if over else run
    run.validate()
    return run


def _print(obj) -> None:
    print(json.dumps(obj, indent=2, default=str))


def cmd_gen_target(args) -> int:
    run = _run_config(args)
    files = pipeline.write_scene(run.output_dir, pipeline.gen_target(run))
    _print({k: str(v) for k, v in files.items()})
    return EXIT_OK


def cmd_gen_flat(args) -> int:
    run = _run_config(args)
    files = pipeline.write_scene(run.output_dir, pipeline.gen_flat(run))
    _print({k: str(v) for k, v in files.items()})
    return EXIT_OK


def _simulate(run, scene_csv, trace_path) -> dict:
    scene = pipeline.load_scene(scene_csv)
    t0 = time.perf_counter()
    trace = pipeline.simulate(run, scene)
    wall = time.perf_counter() - t0
    trace_path = Path(trace_path) if trace_path else run.output_dir / "trace.caostr"
    trace_path.parent.mkdir(parents=True, exist_ok=True)
    io.write_trace(trace_path, trace)
    io.write_codebook(trace_path.with_suffix(".caoswh"), run.codebook())
    info = {
        "trace": str(trace_path),
        "channels": trace.n_channels,
        "bits": trace.bits,
        "samples_per_bit": trace.samples_per_bit,
        "samples_per_channel": trace.channels.shape[1],
        "saturation_count": trace.saturation_count,
        "detector_gain": trace.config.detector_gain,
        "noise_rms": trace.config.noise_rms,
        "wall_time_s": round(wall, 3),
    }
    for w in trace.warnings:
        log.warning(w)
    return info


def cmd_simulate(args) -> int:
    run = _run_config(args)
    _print(_simulate(run, args.scene, args.trace))
    return EXIT_OK


def _decode(run, trace_path, codebook_path, prefix) -> dict:
    trace = io.read_trace(trace_path)
    if codebook_path is None:
        guess = Path(trace_path).with_suffix(".caoswh")
        codebook_path = guess if guess.exists() else None
    codebook = io.read_codebook(codebook_path) if codebook_path else run.codebook()
    if codebook.pixel_count != run.rows * run.cols:
        raise ConfigurationError(
            f"codebook has {codebook.pixel_count} pixels, grid {run.rows}x{run.cols} needs {run.rows * run.cols}"
        )
    image = pipeline.decode(run, trace, codebook)
    prefix = Path(prefix) if prefix else run.output_dir / "decoded"
    prefix.parent.mkdir(parents=True, exist_ok=True)
    files = io.write_decoded(prefix, image)
    return {k: str(v) for k, v in files.items()} | {"alpha": image.calibration.alpha}


def cmd_decode(args) -> int:
    run = _run_config(args)
    _print(_decode(run, args.trace, args.codebook, args.prefix))
    return EXIT_OK


def _analyze(outdir, decoded_csv, mask_csv, patch_map_csv, dr_table_csv, flat) -> dict:
    decoded = io.read_csv_image(decoded_csv)
    mask = io.read_csv_image(mask_csv).astype(bool)
    pmap = io.read_csv_image(patch_map_csv, dtype=np.int64) if patch_map_csv else None
    truth = pipeline.read_dr_table(dr_table_csv) if dr_table_csv else None
    result = pipeline.analyze(decoded, mask, pmap, truth, flat=flat)
    files = pipeline.write_analysis(outdir, result)
    return result.summary() | {"files": {k: str(v) for k, v in files.items()}}


def cmd_analyze(args) -> int:
    run = _run_config(args)
    _print(_analyze(run.output_dir, args.decoded, args.mask, args.patch_map, args.truth, args.flat))
    return EXIT_OK


def cmd_pipeline(args) -> int:
    run = _run_config(args)
    out = run.output_dir
    flat = args.scene == "flat"
    scene = pipeline.gen_flat(run) if flat else pipeline.gen_target(run)
    files = pipeline.write_scene(out, scene)
    (out / "run.yaml").write_text(run.dump())
    sim = _simulate(run, files["csv"], out / "trace.caostr")
    dec = _decode(run, out / "trace.caostr", None, out / "decoded")
    ana = _analyze(out, dec["csv"], files["mask"], files.get("patch_map"), files.get("dr_table"), flat)
    _print({"simulate": sim, "decode": dec, "analyze": ana})
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="caos", description="Active-mode CAOS FM-CDMA camera simulator")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("-c", "--config", help="YAML run configuration")
        sp.add_argument("-o", "--out", help="output directory (overrides output_dir)")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a config value, e.g. sim.adc_bits=24 (repeatable)")
        sp.add_argument("--seed", type=int)
        return sp

    def sim_flags(sp):
        sp.add_argument("--noise-rms", dest="noise_rms", type=float)
        sp.add_argument("--noise-floor-db", dest="noise_floor_db", type=float)
        sp.add_argument("--adc-bits", dest="adc_bits", type=int)
        sp.add_argument("--dual-pd", dest="dual_pd", action="store_true")

    sp = common(sub.add_parser("gen-target", help="write the patch target scene"))
    sp.add_argument("--dr-table", dest="dr_table", help="'table1' for the published ladder")
    sp.set_defaults(func=cmd_gen_target)

    sp = common(sub.add_parser("gen-flat", help="write a flat illumination field"))
    sp.set_defaults(func=cmd_gen_flat)

    sp = common(sub.add_parser("simulate", help="encode a scene into a CAOSTR01 trace"))
    sp.add_argument("scene", help="scene CSV")
    sp.add_argument("--trace", help="output trace path")
    sim_flags(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = common(sub.add_parser("decode", help="decode a trace into an image"))
    sp.add_argument("trace")
    sp.add_argument("--codebook", help="CAOSWH01 file (default: next to the trace, else from config)")
    sp.add_argument("--prefix", help="output path prefix for image files")
    sp.add_argument("--differential", action="store_true")
    sp.set_defaults(func=cmd_decode)

    sp = common(sub.add_parser("analyze", help="DR/SNR/uniformity report for a decoded image"))
    sp.add_argument("decoded", help="decoded image CSV")
    sp.add_argument("--mask", required=True, help="illuminated mask CSV (0 = dark pixel)")
    sp.add_argument("--patch-map", dest="patch_map")
    sp.add_argument("--truth", help="ground-truth DR table CSV written by gen-target")
    sp.add_argument("--flat", action="store_true", help="report uniformity and mean level")
    sp.set_defaults(func=cmd_analyze)

    sp = common(sub.add_parser("pipeline", help="gen -> simulate -> decode -> analyze"))
    sp.add_argument("--scene", choices=("target", "flat"), default="target")
    sp.add_argument("--dr-table", dest="dr_table")
    sp.add_argument("--differential", action="store_true")
    sim_flags(sp)
    sp.set_defaults(func=cmd_pipeline)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except FormatError as exc:
        print(f"format error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except (ConfigurationError, ParameterError, yaml.YAMLError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except CaosError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
