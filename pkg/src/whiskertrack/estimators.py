"""Bayesian contact trackers sharing the kinematic process model and the
calibrated sensor model: EKF, UKF (scaled unscented transform) and a
particle filter, plus the deterministic arc-length baseline tracker.

All filters support fading memory: the predicted covariance is scaled by
alpha^2 before process noise is added, compensating model error when the
true contact point slides along an object contour. Each step is a pure
function of (belief, inputs, config); the particle filter additionally
consumes an explicit RNG so runs are reproducible bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import sensor_model
from .kinematics import BodyTwist, ContactState, process_jacobian, propagate_array


class NumericalError(RuntimeError):
    pass


@dataclass
class FilterConfig:
    # State is in meters; covariance defaults are the mm-scale values from the
    # reference tuning converted to m^2 (1 mm^2 = 1e-6 m^2). Signal-space
    # variances are in squared counts and need no conversion.
    process_noise_cov: np.ndarray = field(default_factory=lambda: 1e-11 * np.eye(2))
    sensor_noise_var: float = 0.25
    fading_alpha: float = 1.004
    fading_mode: str = "scale"  # "scale" or "additive" (fictitious noise)
    fictitious_noise: float = 0.0
    particle_count: int = 1000
    pf_process_noise_cov: np.ndarray = field(default_factory=lambda: 1e-9 * np.eye(2))
    pf_sensor_noise_var: float = 1.0
    prior_var: float = 1e-5
    # fading memory grows covariance geometrically along directions the scalar
    # measurement cannot observe; cap the eigenvalues so sigma points and
    # particles stay within the calibrated workspace
    max_var: float = 2.5e-5
    rng_seed: int = 0
    ut_alpha: float = 0.1
    ut_beta: float = 2.0
    ut_kappa: float = 0.0

    def __post_init__(self):
        self.process_noise_cov = np.asarray(self.process_noise_cov, dtype=float)
        self.pf_process_noise_cov = np.asarray(self.pf_process_noise_cov, dtype=float)
        if self.sensor_noise_var <= 0 or self.pf_sensor_noise_var <= 0:
            raise ValueError("sensor noise variances must be positive")
        if self.fading_alpha < 1.0:
            raise ValueError("fading_alpha must be >= 1")
        if self.fading_mode not in ("scale", "additive"):
            raise ValueError("fading_mode must be 'scale' or 'additive'")


@dataclass
class GaussianBelief:
    mean: np.ndarray  # (2,)
    cov: np.ndarray  # (2, 2), symmetric PSD

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float)
        self.cov = np.asarray(self.cov, dtype=float)

    @property
    def state(self) -> ContactState:
        return ContactState(float(self.mean[0]), float(self.mean[1]))


@dataclass
class ParticleBelief:
    particles: np.ndarray  # (N, 2)
    weights: np.ndarray  # (N,), sums to 1

    def __post_init__(self):
        self.particles = np.asarray(self.particles, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)

    @property
    def mean(self) -> np.ndarray:
        return self.weights @ self.particles

    @property
    def state(self) -> ContactState:
        m = self.mean
        return ContactState(float(m[0]), float(m[1]))

    def effective_sample_size(self) -> float:
        return 1.0 / float(self.weights @ self.weights)


@dataclass(frozen=True)
class StepResult:
    belief: object
    rejected: bool = False
    degenerate: bool = False


def _symmetrize(P: np.ndarray) -> np.ndarray:
    return 0.5 * (P + P.T)


def _inflate(P: np.ndarray, cfg: FilterConfig) -> np.ndarray:
    if cfg.fading_mode == "scale":
        P = cfg.fading_alpha**2 * P
    else:
        P = P + cfg.fictitious_noise * np.eye(2)
    P = P + cfg.process_noise_cov
    vals, vecs = np.linalg.eigh(_symmetrize(P))
    if vals[-1] > cfg.max_var:
        vals = np.minimum(vals, cfg.max_var)
        P = (vecs * vals) @ vecs.T
    return P


def init_belief(cfg: FilterConfig, hint: ContactState, kind: str = "gaussian",
                rng: np.random.Generator | None = None,
                arc_length: float | None = None):
    """Initial belief around a contact hint; hints outside the reachable
    workspace are clamped to the bound. Particle sets are drawn from the
    Gaussian prior with the supplied (or seeded) RNG."""
    clamped = False
    mean = np.array([hint.px, hint.py], dtype=float)
    if arc_length is not None:
        bound = 1.2 * arc_length
        r = float(np.hypot(*mean))
        if r > bound:
            mean *= bound / r
            clamped = True
    cov = cfg.prior_var * np.eye(2)
    if kind == "gaussian":
        return GaussianBelief(mean, cov), clamped
    if kind == "particle":
        if rng is None:
            rng = np.random.default_rng(cfg.rng_seed)
        pts = rng.multivariate_normal(mean, cov, size=cfg.particle_count)
        w = np.full(cfg.particle_count, 1.0 / cfg.particle_count)
        return ParticleBelief(pts, w), clamped
    raise ValueError(f"unknown belief kind {kind!r}")


# ---------------------------------------------------------------------------
# EKF
# ---------------------------------------------------------------------------


def ekf_step(belief: GaussianBelief, twist: BodyTwist, dt: float,
             measurement: float, model: sensor_model.PolynomialModel,
             cfg: FilterConfig) -> StepResult:
    # predict
    F = process_jacobian(twist, dt)
    mean = propagate_array(belief.mean, twist, dt)
    P = _inflate(F @ belief.cov @ F.T, cfg)
    if not math.isfinite(measurement):
        # no usable measurement: predict-only step
        return StepResult(GaussianBelief(mean, _symmetrize(P)), rejected=True)
    # update with linearized sensor model
    H = sensor_model.gradient(model, mean)
    y_pred = sensor_model.evaluate(model, mean)
    S = float(H @ P @ H) + cfg.sensor_noise_var
    K = (P @ H) / S
    mean = mean + K * (measurement - y_pred)
    P = _symmetrize((np.eye(2) - np.outer(K, H)) @ P)
    return StepResult(GaussianBelief(mean, P))


# ---------------------------------------------------------------------------
# UKF
# ---------------------------------------------------------------------------


def _sigma_points(mean: np.ndarray, cov: np.ndarray, cfg: FilterConfig):
    n = 2
    lam = cfg.ut_alpha**2 * (n + cfg.ut_kappa) - n
    scale = n + lam
    try:
        L = np.linalg.cholesky(scale * cov)
    except np.linalg.LinAlgError:
        try:
            L = np.linalg.cholesky(scale * (cov + 1e-12 * np.eye(n)))
        except np.linalg.LinAlgError as exc:
            raise NumericalError("sigma-point square root failed") from exc
    pts = np.empty((2 * n + 1, n))
    pts[0] = mean
    pts[1 : n + 1] = mean + L.T
    pts[n + 1 :] = mean - L.T
    wm = np.full(2 * n + 1, 1.0 / (2.0 * scale))
    wc = wm.copy()
    wm[0] = lam / scale
    wc[0] = lam / scale + (1.0 - cfg.ut_alpha**2 + cfg.ut_beta)
    return pts, wm, wc


def ukf_step(belief: GaussianBelief, twist: BodyTwist, dt: float,
             measurement: float, model: sensor_model.PolynomialModel,
             cfg: FilterConfig) -> StepResult:
    # predict: unscented transform through the (linear) process model
    pts, wm, wc = _sigma_points(belief.mean, belief.cov, cfg)
    prop = propagate_array(pts, twist, dt)
    mean_p = wm @ prop
    dev = prop - mean_p
    P_p = _symmetrize(_inflate((dev * wc[:, None]).T @ dev, cfg))
    if not math.isfinite(measurement):
        return StepResult(GaussianBelief(mean_p, P_p), rejected=True)
    # update: fresh sigma points through the sensor model
    pts, wm, wc = _sigma_points(mean_p, P_p, cfg)
    z = sensor_model.evaluate(model, pts)
    z_mean = float(wm @ z)
    dz = z - z_mean
    dx = pts - mean_p
    S = float(wc @ (dz * dz)) + cfg.sensor_noise_var
    Pxz = (wc * dz) @ dx
    K = Pxz / S
    mean = mean_p + K * (measurement - z_mean)
    P = _symmetrize(P_p - np.outer(K, K) * S)
    return StepResult(GaussianBelief(mean, P))


# ---------------------------------------------------------------------------
# particle filter
# ---------------------------------------------------------------------------


_CHOL_CACHE: dict[bytes, np.ndarray] = {}


def _chol_cached(cov: np.ndarray) -> np.ndarray:
    key = cov.tobytes()
    L = _CHOL_CACHE.get(key)
    if L is None:
        L = np.linalg.cholesky(cov)
        if len(_CHOL_CACHE) > 64:
            _CHOL_CACHE.clear()
        _CHOL_CACHE[key] = L
    return L


def _systematic_resample(weights: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    n = weights.shape[0]
    positions = (rng.random() + np.arange(n)) / n
    return np.searchsorted(np.cumsum(weights), positions)


def pf_step(belief: ParticleBelief, twist: BodyTwist, dt: float,
            measurement: float, model: sensor_model.PolynomialModel,
            cfg: FilterConfig, rng: np.random.Generator) -> StepResult:
    n = belief.particles.shape[0]
    noise = rng.standard_normal((n, 2)) @ _chol_cached(cfg.pf_process_noise_cov).T
    pts = propagate_array(belief.particles, twist, dt) + noise
    if not math.isfinite(measurement):
        return StepResult(ParticleBelief(pts, belief.weights), rejected=True)
    z = sensor_model.evaluate(model, pts)
    log_w = np.log(belief.weights + 1e-300) - 0.5 * (measurement - z) ** 2 / cfg.pf_sensor_noise_var
    log_w -= log_w.max()
    w = np.exp(log_w)
    total = w.sum()
    degenerate = not np.isfinite(total) or total <= 0.0
    if degenerate:
        w = np.full(n, 1.0 / n)
    else:
        w = w / total
    out = ParticleBelief(pts, w)
    if out.effective_sample_size() < n / 2.0:
        idx = _systematic_resample(w, rng)
        out = ParticleBelief(pts[idx], np.full(n, 1.0 / n))
    return StepResult(out, degenerate=degenerate)


# ---------------------------------------------------------------------------
# deterministic baseline
# ---------------------------------------------------------------------------


@dataclass
class BaselineTracker:
    """Single-value tracker: kinematic propagation plus an arc-length
    correction from the moment mismatch.

    The correction slides the estimate along the whisker's rest-curve tangent
    by ds = (measured - predicted) / (dM/ds), with dM/ds obtained from the
    calibrated sensor model by central differencing along the tangent. A
    near-singular slope skips the correction.
    """

    model: sensor_model.PolynomialModel
    tangent_of: callable  # point (2,) -> unit tangent (2,)
    slope_eps: float = 1e-9
    max_step: float = 0.01
    fd_step: float = 1e-5

    def step(self, estimate: ContactState, twist: BodyTwist, dt: float,
             measurement: float) -> tuple[ContactState, bool]:
        """Returns (new estimate, flagged)."""
        p = propagate_array(np.array([estimate.px, estimate.py]), twist, dt)
        if not math.isfinite(measurement):
            return ContactState(float(p[0]), float(p[1])), True
        tau = self.tangent_of(p)
        h = self.fd_step
        m_plus = sensor_model.evaluate(self.model, p + h * tau)
        m_minus = sensor_model.evaluate(self.model, p - h * tau)
        dm_ds = (m_plus - m_minus) / (2.0 * h)
        if abs(dm_ds) < self.slope_eps:
            return ContactState(float(p[0]), float(p[1])), True
        predicted = sensor_model.evaluate(self.model, p)
        ds = (measurement - predicted) / dm_ds
        ds = float(np.clip(ds, -self.max_step, self.max_step))
        p = p + ds * tau
        return ContactState(float(p[0]), float(p[1])), False


def baseline_step(estimate: ContactState, twist: BodyTwist, dt: float,
                  measurement: float, model: sensor_model.PolynomialModel,
                  tangent_of) -> tuple[ContactState, bool]:
    """Functional form of BaselineTracker.step."""
    return BaselineTracker(model, tangent_of).step(estimate, twist, dt, measurement)


def covariance_is_psd(P: np.ndarray, tol: float = -1e-12) -> bool:
    return bool(np.linalg.eigvalsh(_symmetrize(P)).min() >= tol)
