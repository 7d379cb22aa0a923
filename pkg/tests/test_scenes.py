import numpy as np
import pytest

from hsfuse.errors import ValidationError
from hsfuse.scenes import SceneSpec, generate_scene


def test_seed_pins_scene_bitwise():
    spec = SceneSpec(8, 16, 12, endmembers=3, seed=42)
    a = generate_scene(spec)
    b = generate_scene(SceneSpec(8, 16, 12, endmembers=3, seed=42))
    assert np.array_equal(a.data, b.data)
    c = generate_scene(SceneSpec(8, 16, 12, endmembers=3, seed=43))
    assert not np.array_equal(a.data, c.data)


def test_range_and_positivity():
    scene = generate_scene(SceneSpec(6, 20, 20, endmembers=4, seed=1))
    assert scene.data.min() > 0.0
    assert scene.data.max() == 1.0  # scaled by the global peak


def test_rank_bounded_by_endmembers():
    p = 3
    scene = generate_scene(SceneSpec(10, 24, 24, endmembers=p, seed=5))
    sv = np.linalg.svd(scene.as_matrix(), compute_uv=False)
    assert sv[p] <= 1e-10 * sv[0]
    assert sv[p - 1] > 1e-6 * sv[0]


def test_spectra_are_smoother_than_noise():
    scene = generate_scene(SceneSpec(31, 16, 16, endmembers=5, seed=0))
    mat = scene.as_matrix()
    band_diff = np.abs(np.diff(mat, axis=0)).mean()
    spread = mat.std()
    assert band_diff < spread  # consecutive bands are correlated


def test_smoothness_parameter_changes_scene():
    a = generate_scene(SceneSpec(4, 16, 16, seed=3, endmembers=2, smoothness=1.0))
    b = generate_scene(SceneSpec(4, 16, 16, seed=3, endmembers=2, smoothness=6.0))
    assert not np.array_equal(a.data, b.data)


def test_tiny_grid_supported():
    scene = generate_scene(SceneSpec(2, 4, 4, endmembers=1, seed=0))
    assert scene.data.shape == (2, 4, 4)


def test_spec_validation():
    with pytest.raises(ValidationError):
        SceneSpec(0, 8, 8)
    with pytest.raises(ValidationError):
        SceneSpec(4, 3, 8)
    with pytest.raises(ValidationError):
        SceneSpec(4, 8, 8, endmembers=5)
    with pytest.raises(ValidationError):
        SceneSpec(4, 8, 8, endmembers=0)
    with pytest.raises(ValidationError):
        SceneSpec(4, 8, 8, smoothness=0.0)
    with pytest.raises(ValidationError):
        SceneSpec(4, 8, 8, seed=-1)
