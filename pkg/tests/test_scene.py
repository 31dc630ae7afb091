import math

import numpy as np
import pytest

from caoscam.errors import ParameterError
from caoscam.metrics import dr_db, uniformity_pct
from caoscam.scene import (
    TABLE1_DR_DB,
    SceneImage,
    TargetSpec,
    generate_flat_field,
    generate_patch_target,
    table1_override,
)


def patch_level(scene, label):
    vals = np.unique(scene.irradiance[scene.patch_map == label])
    assert vals.size == 1
    return vals[0]


def test_default_target_levels():
    sc = generate_patch_target(TargetSpec(), 58, 70)
    assert patch_level(sc, 1) == 1.0
    # 160 dB over 35 steps
    step = 160.0 / 35.0
    assert math.isclose(step, 4.571428571, rel_tol=1e-9)
    assert math.isclose(patch_level(sc, 2), 0.3490254878959580, rel_tol=1e-12)
    assert math.isclose(dr_db(patch_level(sc, 1), patch_level(sc, 36)), 160.0, rel_tol=1e-12)


def test_table1_override_patch14():
    spec = TargetSpec(dr_table_override=TABLE1_DR_DB)
    assert spec.patch_count == 14
    sc = generate_patch_target(spec, 58, 70)
    assert math.isclose(patch_level(sc, 14), 1.1481536214968817e-06, rel_tol=1e-12)


def test_table1_extended_reaches_about_160():
    t = table1_override(36)
    assert t[:14] == TABLE1_DR_DB
    assert len(t) == 36
    assert math.isclose(t[-1], 59.4 + 22 * 4.6)


def test_target_geometry_and_dark_surround():
    sc = generate_patch_target(TargetSpec(), 58, 70)
    assert sc.shape == (58, 70)
    labels = set(np.unique(sc.patch_map)) - {0}
    assert labels == set(range(1, 37))
    for lab in labels:
        assert (sc.patch_map == lab).sum() == 64
    assert np.all(sc.irradiance[~sc.illuminated_mask] == 0)
    assert sc.dark_mask.sum() == 58 * 70 - 36 * 64
    # raster numbering: patch 2 is right of patch 1, patch 7 below it
    r1, c1 = np.argwhere(sc.patch_map == 1)[0]
    r2, c2 = np.argwhere(sc.patch_map == 2)[0]
    r7, c7 = np.argwhere(sc.patch_map == 7)[0]
    assert r2 == r1 and c2 > c1 and c7 == c1 and r7 > r1


def test_single_patch_target():
    sc = generate_patch_target(TargetSpec(dr_table_override=(0,)), 58, 70)
    assert sc.irradiance.max() == 1.0
    assert np.unique(sc.irradiance[sc.illuminated_mask]).tolist() == [1.0]


def test_geometry_overflow():
    with pytest.raises(ParameterError, match="needs"):
        generate_patch_target(TargetSpec(patch_size_px=20), 58, 70)


def test_flat_field_constant_at_100():
    sc = generate_flat_field(20, 30, 0.5, 100.0, (2, 3, 18, 27))
    assert np.all(sc.irradiance[sc.illuminated_mask] == 0.5)
    assert np.all(sc.irradiance[~sc.illuminated_mask] == 0)
    assert not sc.illuminated_mask[0, 0]


@pytest.mark.parametrize("seed", [0, 1, 7])
@pytest.mark.parametrize("target", [95.0, 90.0, 99.0])
def test_flat_field_hits_statistics(seed, target):
    region = (9, 10, 49, 60)
    sc = generate_flat_field(58, 70, 0.76, target, region, seed)
    m = sc.illuminated_mask
    assert abs(sc.irradiance[m].mean() - 0.76) <= 0.01
    assert abs(uniformity_pct(sc, region) - target) <= 0.5
    assert np.all(sc.irradiance[~m] == 0)


def test_flat_field_deterministic():
    a = generate_flat_field(30, 30, 0.7, 95.0, seed=4)
    b = generate_flat_field(30, 30, 0.7, 95.0, seed=4)
    np.testing.assert_array_equal(a.irradiance, b.irradiance)


@pytest.mark.parametrize("kw", [dict(mean_level=0), dict(mean_level=1.5), dict(uniformity_pct=0),
                                dict(illuminated_region=(0, 0, 40, 10))])
def test_flat_field_rejects(kw):
    args = dict(rows=30, cols=30, mean_level=0.5, uniformity_pct=95.0)
    args.update(kw)
    with pytest.raises(ParameterError):
        generate_flat_field(**args)


def test_scene_rejects_negative():
    with pytest.raises(ParameterError):
        SceneImage(-np.ones((2, 2)), np.ones((2, 2), bool))
