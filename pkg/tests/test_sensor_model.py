"""Calibrated polynomial sensor model: fit quality on both whisker shapes,
analytic gradient against finite differences, and file round trips."""

import numpy as np
import pytest

from whiskertrack import sensor_model as sm


def _random_box_points(model, n, seed):
    """Uniform points over the calibrated box, inset 2% to avoid edge effects."""
    rng = np.random.default_rng(seed)
    s = model.scaling
    u = rng.uniform(-0.98, 0.98, (n, 2))
    return np.stack(
        [s.x_center + u[:, 0] * s.x_half, s.y_center + u[:, 1] * s.y_half], axis=-1
    )


@pytest.mark.parametrize("fixture", ["straight_model", "curved_model"])
def test_fit_r_squared(fixture, request):
    model = request.getfixturevalue(fixture)
    assert model.fit_stats["r_squared"] >= 0.99


@pytest.mark.parametrize("fixture", ["straight_model", "curved_model"])
def test_gradient_matches_finite_difference(fixture, request):
    model = request.getfixturevalue(fixture)
    pts = _random_box_points(model, 1000, seed=42)
    g = sm.gradient(model, pts)
    h = 1e-7
    ex = np.array([h, 0.0])
    ey = np.array([0.0, h])
    fd_x = (sm.evaluate(model, pts + ex) - sm.evaluate(model, pts - ex)) / (2 * h)
    fd_y = (sm.evaluate(model, pts + ey) - sm.evaluate(model, pts - ey)) / (2 * h)
    fd = np.stack([fd_x, fd_y], axis=-1)
    scale = np.maximum(np.linalg.norm(fd, axis=-1), 1e-9)
    rel = np.linalg.norm(g - fd, axis=-1) / scale
    assert float(rel.max()) <= 1e-4


def test_evaluate_scalar_and_batch_consistent(straight_model):
    pts = _random_box_points(straight_model, 5, seed=1)
    batch = sm.evaluate(straight_model, pts)
    for p, b in zip(pts, batch):
        assert np.isclose(sm.evaluate(straight_model, p), b)


def test_save_load_round_trip(straight_model, tmp_path):
    path = tmp_path / "model.txt"
    sm.save_model(straight_model, path)
    loaded = sm.load_model(path)
    assert loaded.degree == straight_model.degree
    assert np.allclose(loaded.coefficients, straight_model.coefficients, rtol=1e-15)
    pts = _random_box_points(straight_model, 20, seed=3)
    assert np.allclose(sm.evaluate(loaded, pts), sm.evaluate(straight_model, pts),
                       rtol=1e-12)
    assert loaded.fit_stats["n_samples"] == straight_model.fit_stats["n_samples"]


def test_is_extrapolating(straight_model):
    s = straight_model.scaling
    inside = np.array([s.x_center, s.y_center])
    outside = np.array([s.x_center + 2.0 * s.x_half, s.y_center])
    assert not sm.is_extrapolating(straight_model, inside)
    assert sm.is_extrapolating(straight_model, outside)
    val, flag = sm.evaluate_checked(straight_model, outside)
    assert flag and np.isfinite(val)


def test_fit_rejects_underdetermined():
    pts = np.random.default_rng(0).uniform(0, 1, (10, 2))
    with pytest.raises(sm.FitError):
        sm.fit(sm.CalibrationSet(pts, np.zeros(10)), degree=5)


def test_fit_rejects_degenerate_grid():
    # collinear samples cannot span a bivariate basis
    x = np.linspace(0, 1, 40)
    pts = np.stack([x, 2.0 * x], axis=-1)
    with pytest.raises(sm.FitError):
        sm.fit(sm.CalibrationSet(pts, x**2), degree=3)


def test_load_rejects_malformed_files(straight_model, tmp_path):
    good = tmp_path / "good.txt"
    sm.save_model(straight_model, good)
    lines = good.read_text().splitlines()

    missing_header = tmp_path / "a.txt"
    missing_header.write_text("\n".join(ln for ln in lines if not ln.startswith("degree")) + "\n")
    with pytest.raises(sm.ModelFileError):
        sm.load_model(missing_header)

    short_coeffs = tmp_path / "b.txt"
    short_coeffs.write_text("\n".join(lines[:-3]) + "\n")
    with pytest.raises(sm.ModelFileError):
        sm.load_model(short_coeffs)

    bad_value = tmp_path / "c.txt"
    bad_value.write_text("\n".join(lines[:-1] + ["5 0 not_a_number"]) + "\n")
    with pytest.raises(sm.ModelFileError):
        sm.load_model(bad_value)

    wrong_order = tmp_path / "d.txt"
    swapped = lines.copy()
    k = next(i for i, ln in enumerate(swapped) if ln == "coefficients")
    swapped[k + 1], swapped[k + 2] = swapped[k + 2], swapped[k + 1]
    wrong_order.write_text("\n".join(swapped) + "\n")
    with pytest.raises(sm.ModelFileError):
        sm.load_model(wrong_order)


def test_monomial_basis_size():
    assert sm.n_coefficients(5) == 21
    exps = sm.monomial_exponents(5)
    assert exps.shape == (21, 2)
    assert np.all(exps.sum(axis=1) <= 5)
