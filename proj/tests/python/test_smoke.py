"""End-to-end smoke tests for the python bindings."""

import numpy as np
import pytest

import lensless3d as ll


def bench_geometry():
    g = ll.SystemGeometry()
    g.sensor_width_px = 64
    g.sensor_height_px = 64
    g.pixel_pitch_um = 50.0
    g.aperture_width_mm = 2.0
    g.aperture_height_mm = 2.0
    g.min_object_distance_mm = 5.0
    g.hyperfocal_distance_mm = 1000.0
    return g


def random_stack(rng, nz=3, ny=16, nx=16):
    stack = rng.random((nz, ny, nx)).astype(np.float32)
    stack /= stack.sum(axis=(1, 2), keepdims=True)
    planes = [10.0 + 5.0 * k for k in range(nz)]
    return stack, planes


def test_fov_matches_reference_system():
    g = ll.SystemGeometry()
    g.sensor_width_px = 2560
    g.sensor_height_px = 2160
    g.pixel_pitch_um = 6.5
    g.aperture_width_mm = 7.5
    g.aperture_height_mm = 5.5
    fov = ll.compute_fov(g)
    assert fov.half_fov_x_deg == pytest.approx(42.0, abs=0.05)
    assert fov.half_fov_y_deg == pytest.approx(30.5, abs=0.05)
    assert fov.z_min_mm == pytest.approx(7.3)
    assert fov.z_max_mm == pytest.approx(2300.0)


def test_depth_planes_have_constant_reciprocal_spacing():
    planes = ll.reciprocal_depth_planes(10.86, 36.26, 128)
    assert len(planes) == 128
    assert planes[0] == pytest.approx(10.86, abs=1e-9)
    assert planes[-1] == pytest.approx(36.26, abs=1e-9)
    recips = 1.0 / np.asarray(planes)
    steps = recips[:-1] - recips[1:]
    assert np.max(np.abs(steps - steps[0])) < 1e-12


def test_diffuser_is_deterministic_and_on_target():
    a = ll.generate_diffuser(seed=5, ny=128, nx=128, pitch_um=20.0)
    b = ll.generate_diffuser(seed=5, ny=128, nx=128, pitch_um=20.0)
    assert np.array_equal(a.heightmap, b.heightmap)
    assert a.heightmap.shape == (128, 128)
    assert a.mean_slope_deg() == pytest.approx(0.7, rel=1e-6)

    c = ll.generate_diffuser(seed=6, ny=128, nx=128, pitch_um=20.0)
    assert not np.array_equal(a.heightmap, c.heightmap)


def test_rendered_psf_is_normalized():
    surf = ll.generate_diffuser(seed=3, ny=128, nx=128, pitch_um=20.0)
    psf = ll.render_psf(surf, z_mm=16.0, geometry=bench_geometry(), rays=200_000)
    assert psf.shape == (64, 64)
    assert psf.min() >= 0.0
    assert psf.sum() == pytest.approx(1.0, abs=1e-5)


def test_operator_adjoint_identity():
    rng = np.random.default_rng(11)
    stack, planes = random_stack(rng)
    op = ll.Operator(stack, planes)
    assert (op.nz, op.ny, op.nx) == (3, 16, 16)

    x = rng.random((3, 16, 16)).astype(np.float32)
    b = rng.random((16, 16)).astype(np.float32)
    lhs = float(np.vdot(op.apply(x), b))
    rhs = float(np.vdot(x, op.adjoint(b)))
    assert lhs == pytest.approx(rhs, rel=1e-4)


def test_solve_recovers_a_point():
    rng = np.random.default_rng(4)
    stack, planes = random_stack(rng, nz=2, ny=16, nx=16)
    op = ll.Operator(stack, planes)

    truth = np.zeros((2, 16, 16), dtype=np.float32)
    truth[1, 8, 8] = 1.0
    b = op.apply(truth)

    vol, info = ll.solve(b, stack, planes, lam=1e-5, regularizer="identity",
                         max_iters=3000, eps_abs=1e-7, eps_rel=1e-6)
    assert info["converged"]
    assert vol.shape == (2, 16, 16)
    peak = np.unravel_index(np.argmax(vol), vol.shape)
    assert peak == (1, 8, 8)


def test_calibrated_stack_feeds_the_pipeline():
    g = bench_geometry()
    surf = ll.generate_diffuser(seed=3, ny=128, nx=128, pitch_um=20.0)
    planes = ll.reciprocal_depth_planes(14.0, 24.0, 2)
    grid = ll.build_grid(g, planes, 64, 64)
    assert grid.nz == 2

    stack = ll.calibrate(surf, grid, g, rays=200_000)
    assert stack.shape == (2, 64, 64)
    np.testing.assert_allclose(stack.sum(axis=(1, 2)), 1.0, atol=1e-5)

    b = ll.simulate_points([(0.0, 0.0, planes[0], 1.0)], stack, planes, grid, g)
    # an on-axis point at a calibrated depth reproduces that slice exactly
    assert np.array_equal(b, stack[0])

    bn = ll.simulate_points([(0.0, 0.0, planes[0], 1.0)], stack, planes, grid, g,
                            noise="gaussian", noise_value=1e-4, seed=9)
    assert not np.array_equal(bn, b)


def test_psf_similarity_identity():
    rng = np.random.default_rng(2)
    a = rng.random((64, 64)).astype(np.float32)
    sim = ll.psf_similarity(a, a)
    assert sim.inner_product == pytest.approx(1.0, abs=1e-5)
    assert sim.spot_ratio == pytest.approx(1.0)


def test_validation_errors_surface_as_value_errors():
    with pytest.raises(ValueError):
        ll.Operator(np.ones((2, 4, 4), dtype=np.float32), [10.0, 5.0])  # depths not increasing
    with pytest.raises(ValueError):
        g = ll.SystemGeometry()
        g.pixel_pitch_um = -1.0
        ll.compute_fov(g)
