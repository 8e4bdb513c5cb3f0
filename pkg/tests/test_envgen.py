import numpy as np
import pytest

from srbp2d.envgen import (GradientField, TorusGrid, empirical_covariance,
                           load_field, sample_environment,
                           streaming_covariance)
from srbp2d.kernels import Mollifier, cov_omega_matrix
from srbp2d.envgen import save_field

GRID = TorusGrid(L=16.0, n=256)
MOL = Mollifier(s=0.25)


def test_grid_validation():
    with pytest.raises(ValueError):
        TorusGrid(L=16.0, n=100)          # not a power of two
    with pytest.raises(ValueError):
        TorusGrid(L=16.0, n=32)           # too coarse
    with pytest.raises(ValueError):
        TorusGrid(L=-1.0, n=128)


def test_check_resolves():
    TorusGrid(L=16.0, n=256).check_resolves(Mollifier(s=0.25))
    with pytest.raises(ValueError):
        # h = 0.25 > s/2
        TorusGrid(L=64.0, n=256).check_resolves(Mollifier(s=0.25))
    with pytest.raises(ValueError):
        # L < 40 s
        TorusGrid(L=16.0, n=1024).check_resolves(Mollifier(s=0.5))


def test_field_is_deterministic_in_seed():
    f1 = sample_environment(GRID, MOL, seed=5)
    f2 = sample_environment(GRID, MOL, seed=5)
    f3 = sample_environment(GRID, MOL, seed=6)
    assert np.array_equal(f1.values, f2.values)
    assert not np.array_equal(f1.values, f3.values)


def test_field_is_curl_free():
    f = sample_environment(GRID, MOL, seed=1)
    assert f.curl_rms_rel() < 1e-12


def test_float32_field_is_curl_free_to_single_precision():
    f = sample_environment(GRID, MOL, seed=1, dtype=np.float32)
    assert f.values.dtype == np.float32
    assert f.curl_rms_rel() < 1e-5


def test_potential_reconstruction_roundtrip():
    """The discrete gradient of the reconstructed potential reproduces
    the field."""
    f = sample_environment(GRID, MOL, seed=2)
    xi = f.potential()
    h = GRID.h
    g1 = (np.roll(xi, -1, axis=0) - np.roll(xi, 1, axis=0)) / (2 * h)
    g2 = (np.roll(xi, -1, axis=1) - np.roll(xi, 1, axis=1)) / (2 * h)
    scale = np.sqrt(np.mean(f.values**2))
    assert np.allclose(g1, f.values[..., 0], atol=1e-10 * scale)
    assert np.allclose(g2, f.values[..., 1], atol=1e-10 * scale)


def test_component_means_are_zero():
    f = sample_environment(GRID, MOL, seed=3)
    assert np.max(np.abs(f.component_means())) < 1e-12


def test_covariance_matches_analytic_kernel():
    """Empirical two-point function over many fields vs the analytic
    gradient-GFF covariance, at the origin and one displacement."""
    fields = [sample_environment(GRID, MOL, seed=k) for k in range(40)]
    for dx in [(0, 0), (4, 0)]:
        mean, se = empirical_covariance(fields, dx)
        x = np.array([dx[0] * GRID.h, dx[1] * GRID.h])
        target = cov_omega_matrix(x, MOL)
        # 4 sigma statistical band plus the h^2/(2 s^2) discretization bias
        bias = GRID.h**2 / (2 * MOL.s**2) * np.max(np.abs(target))
        assert np.all(np.abs(mean - target) <= 4 * se + bias + 1e-12)


def test_streaming_covariance_matches_batch():
    fields = [sample_environment(GRID, MOL, seed=k) for k in range(6)]
    mean_b, se_b = empirical_covariance(fields, (3, 1))
    mean_s, se_s = streaming_covariance(iter(fields), [(3, 1), (0, 0)])
    assert np.allclose(mean_s[0], mean_b)
    assert np.allclose(se_s[0], se_b)


def test_empirical_covariance_needs_two_fields():
    f = sample_environment(GRID, MOL, seed=0)
    with pytest.raises(ValueError):
        empirical_covariance([f], (0, 0))


def test_save_load_roundtrip(tmp_path):
    f = sample_environment(GRID, MOL, seed=9)
    path = tmp_path / "field.bin"
    save_field(f, path)
    g = load_field(path)
    assert g.grid == f.grid
    assert g.seed == f.seed
    assert np.array_equal(g.values, f.values)


def test_load_rejects_garbage(tmp_path):
    path = tmp_path / "junk.bin"
    path.write_bytes(b"\x00" * 64)
    with pytest.raises(ValueError):
        load_field(path)
