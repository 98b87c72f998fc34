"""Calibrated sensor model: bivariate polynomial map from contact position
to moment signal, with analytic gradient for EKF linearization.

Inputs are normalized to [-1, 1] per axis before building the monomial
design matrix; raw meter-scale coordinates would make the degree-5 basis
hopelessly ill-conditioned. The least-squares solve uses an orthogonal
decomposition (numpy lstsq), not normal equations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kinematics import ContactState


class FitError(ValueError):
    """Calibration regression failed (underdetermined or rank deficient)."""


class ModelFileError(ValueError):
    """Sensor model file is malformed."""


def monomial_exponents(degree: int) -> np.ndarray:
    """Exponent pairs (i, j) with i + j <= degree, in a fixed order."""
    return np.array([(i, j) for total in range(degree + 1)
                     for i in range(total + 1)
                     for j in [total - i]])


def n_coefficients(degree: int) -> int:
    return (degree + 1) * (degree + 2) // 2


@dataclass(frozen=True)
class AxisScaling:
    """Affine normalizer u = (x - center) / half_range per axis."""

    x_center: float
    x_half: float
    y_center: float
    y_half: float

    def normalize(self, pts: np.ndarray) -> np.ndarray:
        u = (pts[..., 0] - self.x_center) / self.x_half
        v = (pts[..., 1] - self.y_center) / self.y_half
        return np.stack([u, v], axis=-1)

    @staticmethod
    def from_data(pts: np.ndarray) -> "AxisScaling":
        lo = pts.min(axis=0)
        hi = pts.max(axis=0)
        half = np.maximum((hi - lo) / 2.0, 1e-12)
        center = (hi + lo) / 2.0
        return AxisScaling(center[0], half[0], center[1], half[1])


@dataclass
class CalibrationSet:
    """Contact positions (m, in the base frame) paired with sensor signals."""

    positions: np.ndarray
    signals: np.ndarray
    side: str = "right"

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float)
        self.signals = np.asarray(self.signals, dtype=float)
        if self.positions.ndim != 2 or self.positions.shape[1] != 2:
            raise ValueError("positions must be (n, 2)")
        if self.signals.shape != (self.positions.shape[0],):
            raise ValueError("signals must be (n,)")


@dataclass
class PolynomialModel:
    degree: int
    coefficients: np.ndarray  # one per monomial, monomial_exponents order
    scaling: AxisScaling
    side: str = "right"
    fit_stats: dict = field(default_factory=dict)

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=float)
        if self.coefficients.shape != (n_coefficients(self.degree),):
            raise ValueError(
                f"expected {n_coefficients(self.degree)} coefficients for "
                f"degree {self.degree}, got {self.coefficients.shape[0]}"
            )

    @property
    def exponents(self) -> np.ndarray:
        return monomial_exponents(self.degree)


def _design_matrix(uv: np.ndarray, degree: int) -> np.ndarray:
    exps = monomial_exponents(degree)
    u = uv[:, 0][:, None] ** exps[:, 0][None, :]
    v = uv[:, 1][:, None] ** exps[:, 1][None, :]
    return u * v


def fit(data: CalibrationSet, degree: int = 5) -> PolynomialModel:
    """Ordinary least squares over the bivariate monomial basis."""
    n = data.positions.shape[0]
    m = n_coefficients(degree)
    if n < m:
        raise FitError(f"{n} samples cannot determine {m} coefficients (degree {degree})")
    scaling = AxisScaling.from_data(data.positions)
    uv = scaling.normalize(data.positions)
    X = _design_matrix(uv, degree)
    coeffs, _, rank, _ = np.linalg.lstsq(X, data.signals, rcond=None)
    if rank < m:
        raise FitError(
            f"design matrix rank {rank} < {m}: calibration samples do not span "
            f"the degree-{degree} basis (degenerate grid?)"
        )
    pred = X @ coeffs
    resid = data.signals - pred
    ss_res = float(resid @ resid)
    ss_tot = float(((data.signals - data.signals.mean()) ** 2).sum())
    r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    rmse = float(np.sqrt(ss_res / n))
    return PolynomialModel(
        degree=degree,
        coefficients=coeffs,
        scaling=scaling,
        side=data.side,
        fit_stats={"r_squared": r_squared, "rmse": rmse, "n_samples": n},
    )


def _as_points(state) -> np.ndarray:
    if isinstance(state, ContactState):
        return np.array([[state.px, state.py]])
    return np.atleast_2d(np.asarray(state, dtype=float))


def evaluate(model: PolynomialModel, state) -> float | np.ndarray:
    """Evaluate the fitted polynomial at one or many contact positions."""
    pts = _as_points(state)
    uv = model.scaling.normalize(pts)
    out = _design_matrix(uv, model.degree) @ model.coefficients
    if isinstance(state, ContactState) or np.asarray(state).ndim == 1:
        return float(out[0])
    return out


def is_extrapolating(model: PolynomialModel, state) -> bool | np.ndarray:
    """True where the query lies outside the calibrated [-1, 1] box."""
    uv = model.scaling.normalize(_as_points(state))
    flags = np.any(np.abs(uv) > 1.0, axis=-1)
    if isinstance(state, ContactState) or np.asarray(state).ndim == 1:
        return bool(flags[0])
    return flags


def evaluate_checked(model: PolynomialModel, state) -> tuple[float, bool]:
    """Evaluate with an extrapolation flag (outside the calibrated box)."""
    return evaluate(model, state), is_extrapolating(model, state)


def gradient(model: PolynomialModel, state) -> np.ndarray:
    """Analytic (d/dpx, d/dpy) of evaluate, chain-ruled through scaling."""
    pts = _as_points(state)
    uv = model.scaling.normalize(pts)
    exps = model.exponents
    u = uv[:, 0][:, None]
    v = uv[:, 1][:, None]
    i = exps[:, 0][None, :]
    j = exps[:, 1][None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        du = np.where(i > 0, i * u ** np.maximum(i - 1, 0) * v**j, 0.0)
        dv = np.where(j > 0, j * v ** np.maximum(j - 1, 0) * u**i, 0.0)
    gx = (du @ model.coefficients) / model.scaling.x_half
    gy = (dv @ model.coefficients) / model.scaling.y_half
    out = np.stack([gx, gy], axis=-1)
    if isinstance(state, ContactState) or np.asarray(state).ndim == 1:
        return out[0]
    return out


# ---------------------------------------------------------------------------
# persistence: text header plus one `i j value` line per coefficient
# ---------------------------------------------------------------------------


def save_model(model: PolynomialModel, path) -> None:
    lines = [
        f"degree {model.degree}",
        f"side {model.side}",
        "scaling "
        + " ".join(
            f"{x:.17g}"
            for x in (
                model.scaling.x_center,
                model.scaling.x_half,
                model.scaling.y_center,
                model.scaling.y_half,
            )
        ),
    ]
    stats = model.fit_stats
    if stats:
        lines.append(
            "fit_stats "
            f"{stats.get('r_squared', float('nan')):.17g} "
            f"{stats.get('rmse', float('nan')):.17g} "
            f"{int(stats.get('n_samples', 0))}"
        )
    lines.append("coefficients")
    for (i, j), c in zip(model.exponents, model.coefficients):
        lines.append(f"{i} {j} {c:.17g}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path) -> PolynomialModel:
    with open(path) as fh:
        raw = [ln.strip() for ln in fh]
    lines = [(k + 1, ln) for k, ln in enumerate(raw) if ln]
    header: dict[str, list[str]] = {}
    coeff_rows: list[tuple[int, str]] = []
    in_coeffs = False
    for lineno, ln in lines:
        if in_coeffs:
            coeff_rows.append((lineno, ln))
            continue
        key, *rest = ln.split()
        if key == "coefficients":
            in_coeffs = True
        else:
            header[key] = rest
    try:
        degree = int(header["degree"][0])
        side = header.get("side", ["right"])[0]
        sc = [float(x) for x in header["scaling"]]
        scaling = AxisScaling(*sc)
    except (KeyError, IndexError, ValueError, TypeError) as exc:
        raise ModelFileError(f"{path}: malformed header ({exc})") from exc
    fit_stats = {}
    if "fit_stats" in header:
        try:
            r2, rmse, n = header["fit_stats"]
            fit_stats = {"r_squared": float(r2), "rmse": float(rmse), "n_samples": int(n)}
        except ValueError as exc:
            raise ModelFileError(f"{path}: malformed fit_stats line") from exc
    expected = monomial_exponents(degree)
    if len(coeff_rows) != expected.shape[0]:
        raise ModelFileError(
            f"{path}: expected {expected.shape[0]} coefficient lines for degree "
            f"{degree}, found {len(coeff_rows)}"
        )
    coeffs = np.empty(expected.shape[0])
    for row, ((lineno, ln), (i_exp, j_exp)) in enumerate(zip(coeff_rows, expected)):
        parts = ln.split()
        if len(parts) != 3:
            raise ModelFileError(f"{path}:{lineno}: expected 'i j value'")
        try:
            i, j, val = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError as exc:
            raise ModelFileError(f"{path}:{lineno}: {exc}") from exc
        if (i, j) != (int(i_exp), int(j_exp)):
            raise ModelFileError(
                f"{path}:{lineno}: exponents ({i}, {j}) out of order, "
                f"expected ({i_exp}, {j_exp})"
            )
        coeffs[row] = val
    return PolynomialModel(degree=degree, coefficients=coeffs, scaling=scaling,
                           side=side, fit_stats=fit_stats)
