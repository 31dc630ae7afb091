import json
import struct

import numpy as np
import pytest

from caoscam import io
from caoscam.decoder import CalibrationScale, DecodedImage
from caoscam.errors import FormatError, FramingError, ParameterError
from caoscam.forward import SimConfig, encode
from caoscam.metrics import linearity_fit, patch_snr
from caoscam.scene import TargetSpec, generate_patch_target
from caoscam.walsh import WalshCodebook


def test_codebook_round_trip_and_layout(tmp_path):
    book = WalshCodebook.for_pixels(10, 16)
    p = tmp_path / "b.caoswh"
    io.write_codebook(p, book)
    raw = p.read_bytes()
    assert raw[:8] == b"CAOSWH01"
    assert struct.unpack("<II", raw[8:16]) == (16, 10)
    assert struct.unpack("<10I", raw[16:]) == tuple(range(1, 11))
    assert io.read_codebook(p) == book


def test_codebook_bad_magic(tmp_path):
    p = tmp_path / "b"
    p.write_bytes(b"XXXXXXXX" + bytes(8))
    with pytest.raises(FormatError, match="offset 0"):
        io.read_codebook(p)


@pytest.fixture
def trace():
    book = WalshCodebook.for_pixels(20, 32)
    cfg = SimConfig(cycles_per_bit=4, samples_per_bit=64, detector_gain=0.05, noise_rms=0.01,
                    dual_pd=True, seed=2**63 + 5)
    return encode(np.random.default_rng(0).uniform(0, 1, 20), book, cfg)


def test_trace_header_layout(tmp_path, trace):
    p = tmp_path / "t.caostr"
    io.write_trace(p, trace)
    raw = p.read_bytes()
    magic, ver, ch, bits_adc, bits, spb, rate, cyc, seed, sat = struct.unpack_from("<8sHBBIIdIQQ", raw)
    assert (magic, ver, ch, bits_adc, bits, spb, rate, cyc) == (b"CAOSTR01", 1, 2, 16, 32, 64, 1000.0, 4)
    assert seed == 2**63 + 5 and sat == trace.saturation_count
    assert len(raw) == 48 + 2 * 32 * 64 * 2
    # channel-major int16
    ch0 = np.frombuffer(raw[48:48 + 32 * 64 * 2], "<i2")
    np.testing.assert_array_equal(ch0, trace.channels[0])


def test_trace_round_trip(tmp_path, trace):
    p = tmp_path / "t.caostr"
    io.write_trace(p, trace)
    back = io.read_trace(p)
    assert back == trace
    assert back.config == trace.config


def test_trace_24bit_uses_int32(tmp_path):
    book = WalshCodebook.for_pixels(3, 4)
    cfg = SimConfig(cycles_per_bit=4, samples_per_bit=64, adc_bits=24, detector_gain=0.2)
    tr = encode(np.ones(3), book, cfg)
    p = tmp_path / "t"
    io.write_trace(p, tr)
    assert len(p.read_bytes()) == 48 + 4 * 64 * 4
    assert io.read_trace(p) == tr


def test_trace_errors(tmp_path, trace):
    p = tmp_path / "t"
    io.write_trace(p, trace)
    raw = p.read_bytes()
    (tmp_path / "short").write_bytes(raw[:-10])
    with pytest.raises(FramingError, match="offset 48"):
        io.read_trace(tmp_path / "short")
    (tmp_path / "magic").write_bytes(b"CAOSTR99" + raw[8:])
    with pytest.raises(FormatError, match="offset 0"):
        io.read_trace(tmp_path / "magic")
    (tmp_path / "hdr").write_bytes(raw[:20])
    with pytest.raises(FormatError, match="truncated"):
        io.read_trace(tmp_path / "hdr")
    with pytest.raises(ParameterError):
        io.write_trace(tmp_path / "analog", encode(np.ones(20), WalshCodebook.for_pixels(20, 32),
                                                   trace.config, quantize_output=False))


def test_csv_float_round_trip_exact(tmp_path):
    v = np.random.default_rng(1).normal(size=(5, 7)) * 1e-9
    io.write_csv_image(tmp_path / "a.csv", v)
    np.testing.assert_array_equal(io.read_csv_image(tmp_path / "a.csv"), v)
    labels = np.arange(12).reshape(3, 4)
    io.write_csv_image(tmp_path / "l.csv", labels)
    assert (tmp_path / "l.csv").read_text().splitlines()[0] == "0,1,2,3"
    np.testing.assert_array_equal(io.read_csv_image(tmp_path / "l.csv", np.int64), labels)


def test_pgm_linear_and_log(tmp_path):
    v = np.array([[0.0, 0.5], [1.0, -0.1]])
    io.write_image_pgm(tmp_path / "a.pgm", v)
    gray, scale, maxval = io.read_pgm(tmp_path / "a.pgm")
    assert maxval == 65535
    assert gray.tolist() == [[0, 32768], [65535, 0]]
    np.testing.assert_allclose(gray * scale, np.clip(v, 0, None), atol=scale)
    text = (tmp_path / "a.pgm").read_text().splitlines()
    assert text[0] == "P2" and text[1].startswith("# scale")

    lg = io.log_gray(np.array([[1.0, 1e-4], [1e-8, 1e-12]]))
    # 0 dB -> 255, -40 dB -> 127.5 -> 128, -80 dB -> 0, below floor clamps to 0
    assert lg.tolist() == [[255, 128], [0, 0]]


def test_pgm_bad(tmp_path):
    (tmp_path / "x.pgm").write_text("P5\n1 1\n255\n0\n")
    with pytest.raises(FormatError):
        io.read_pgm(tmp_path / "x.pgm")


def test_decoded_round_trip(tmp_path):
    img = DecodedImage(np.random.default_rng(0).normal(size=(4, 5)), CalibrationScale(0.123, "analytic"))
    files = io.write_decoded(tmp_path / "dec", img)
    back = io.read_decoded(files["csv"])
    np.testing.assert_array_equal(back.values, img.values)
    assert back.calibration == img.calibration
    assert json.loads(files["meta"].read_text())["alpha"] == 0.123


def test_report_and_fit_round_trip(tmp_path):
    sc = generate_patch_target(TargetSpec(), 58, 70)
    dec = sc.irradiance + 1e-4 * np.random.default_rng(0).standard_normal(sc.shape)
    rep = patch_snr(dec, sc.patch_map, sc.dark_mask, sc.truth_dr_db)
    io.write_patch_report(tmp_path / "r.csv", rep)
    header = (tmp_path / "r.csv").read_text().splitlines()[0]
    assert header.startswith("patch,dr_db,m_db,snr")
    back = io.read_patch_report(tmp_path / "r.csv")
    assert [(r.patch, r.recovered) for r in back.rows] == [(r.patch, r.recovered) for r in rep.rows]
    for a, b in zip(back.rows, rep.rows):
        assert a.snr == b.snr and (a.measured_db == b.measured_db or np.isnan(a.measured_db))
    assert back.dark_rms == rep.dark_rms
    fit = linearity_fit(rep)
    io.write_linearity(tmp_path / "lin", fit)
    assert io.read_linearity(tmp_path / "lin") == fit
