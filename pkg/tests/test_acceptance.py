"""Acceptance suite: one test per release criterion, each printing a single
PASS line with the measured numbers.

The benchmark fixtures (calibration models, 10-trial pin suites for both
whisker shapes, the four-object contour suite) are session-scoped in
conftest.py; estimator replays are shared across criteria through the
module-scoped `straight_runs` fixture so each method runs exactly once.
"""

import time

import numpy as np
import pytest
from scipy import ndimage

from whiskertrack import beam, conditioning, estimators, experiments
from whiskertrack import sensor_model as sm
from whiskertrack.kinematics import ContactState, propagate_array, world_point

MM = 1000.0


def _pooled_mean_mm(results):
    errs = np.concatenate([r.errors[~np.isnan(r.errors)] for r in results])
    return float(np.mean(errs)) * MM


@pytest.fixture(scope="module")
def straight_runs(straight_suite, straight_model):
    """All four estimators replayed over the 10-trial straight suite.
    Returns {method: (results, elapsed_seconds)}."""
    out = {}
    cfg = estimators.FilterConfig()
    for method in experiments.METHODS:
        t0 = time.perf_counter()
        results = [
            experiments.run_estimator(
                tr.record, straight_model, method, cfg, beam.STRAIGHT_WHISKER,
                hint=tr.hint,
            )
            for tr in straight_suite
        ]
        out[method] = (results, time.perf_counter() - t0)
    return out


def test_criterion_01_convergence_parity(straight_suite, straight_runs):
    results, elapsed = straight_runs["ukf"]
    conv_times = []
    for tr, res in zip(straight_suite, results):
        t = experiments.convergence_time(tr.record, res, tol=1e-3)
        assert t is not None, "UKF never reached 1 mm"
        conv_times.append(t)
    worst = max(conv_times)
    assert worst <= 0.7, f"slowest convergence {worst:.3f} s exceeds 0.7 s"
    assert elapsed < 60.0, f"UKF runtime {elapsed:.1f} s exceeds 60 s"
    print(f"\nPASS criterion 1: UKF within 1 mm in <= {worst:.3f} s on all 10 "
          f"trials; runtime {elapsed:.1f} s")


def test_criterion_02_method_ordering(straight_runs):
    means = {m: _pooled_mean_mm(straight_runs[m][0]) for m in experiments.METHODS}
    assert means["ukf"] <= means["ekf"], means
    assert means["ekf"] < means["pf"], means
    assert means["ekf"] < means["baseline"], means
    assert means["baseline"] > 2.0 * means["ukf"], means
    print(f"\nPASS criterion 2: pooled mean errors (mm) ukf={means['ukf']:.3f} "
          f"<= ekf={means['ekf']:.3f} < pf={means['pf']:.3f}, "
          f"baseline={means['baseline']:.3f} > 2x ukf")


def test_criterion_03_curved_whisker(curved_suite, curved_model, straight_runs):
    cfg = estimators.FilterConfig()
    results = [
        experiments.run_estimator(
            tr.record, curved_model, "ukf", cfg, beam.CURVED_WHISKER, hint=tr.hint
        )
        for tr in curved_suite
    ]
    curved_mean = _pooled_mean_mm(results)
    straight_mean = _pooled_mean_mm(straight_runs["ukf"][0])
    assert curved_mean <= 2.0 * straight_mean, (curved_mean, straight_mean)
    print(f"\nPASS criterion 3: curved UKF mean {curved_mean:.3f} mm <= 2x "
          f"straight {straight_mean:.3f} mm")


def test_criterion_04_contour_tracing(contour_trials, straight_model):
    cfg = estimators.FilterConfig()
    t0 = time.perf_counter()
    dists = {}
    corner_frac = None
    for name, tr in contour_trials.items():
        res = experiments.run_estimator(
            tr.record, straight_model, "ukf", cfg, beam.STRAIGHT_WHISKER,
            hint=tr.hint,
        )
        d = experiments.min_contour_distances(tr.record, res, tr.contour)
        dists[name] = float(np.mean(d)) * MM
        assert dists[name] < 1.0, f"{name}: mean min-distance {dists[name]:.3f} mm"
        if name == "rectangle":
            corners = np.asarray(tr.contour.vertices)
            idx = np.flatnonzero(tr.record.contact & ~np.isnan(res.estimates[:, 0]))
            pts = np.array([
                world_point(tr.record.pose(k), ContactState(*res.estimates[k]))
                for k in idx
            ])
            d_corner = np.min(
                np.linalg.norm(pts[:, None, :] - corners[None, :, :], axis=-1),
                axis=1,
            )
            corner_frac = float(np.mean(d_corner < 2e-3))
    elapsed = time.perf_counter() - t0
    assert corner_frac is not None and corner_frac >= 0.95, corner_frac
    assert elapsed < 300.0, f"contour tracing took {elapsed:.0f} s"
    summary = " ".join(f"{k}={v:.3f}" for k, v in dists.items())
    print(f"\nPASS criterion 4: mean min-distances (mm) {summary}; rectangle "
          f"corner dwell {100 * corner_frac:.1f}%; {elapsed:.0f} s")


def test_criterion_05_calibration_quality(straight_model, curved_model):
    r2 = {}
    rel = {}
    for name, model in (("straight", straight_model), ("curved", curved_model)):
        r2[name] = model.fit_stats["r_squared"]
        assert r2[name] >= 0.99, (name, r2[name])
        rng = np.random.default_rng(123)
        s = model.scaling
        u = rng.uniform(-0.98, 0.98, (1000, 2))
        pts = np.stack([s.x_center + u[:, 0] * s.x_half,
                        s.y_center + u[:, 1] * s.y_half], axis=-1)
        g = sm.gradient(model, pts)
        h = 1e-7
        fd = np.stack([
            (sm.evaluate(model, pts + [h, 0]) - sm.evaluate(model, pts - [h, 0])) / (2 * h),
            (sm.evaluate(model, pts + [0, h]) - sm.evaluate(model, pts - [0, h])) / (2 * h),
        ], axis=-1)
        scale = np.maximum(np.linalg.norm(fd, axis=-1), 1e-9)
        rel[name] = float(np.max(np.linalg.norm(g - fd, axis=-1) / scale))
        assert rel[name] <= 1e-4, (name, rel[name])
    print(f"\nPASS criterion 5: R^2 straight={r2['straight']:.5f} "
          f"curved={r2['curved']:.5f}; max gradient-FD rel err "
          f"{max(rel.values()):.2e} at 1000 points")


def _grid_bayes_comparison(straight_model):
    """Run the UKF against a dense-lattice Bayes filter on a 1.4 s trial.

    The lattice (0.1 mm pitch) is propagated pointwise through the exact
    affine process map; process noise enters as a Gaussian blur of the
    weights in lattice coordinates, measurement updates in log space.
    Returns per-step distances between the two posterior means.
    """
    rate = 250.0
    t = np.linspace(0.0, 1.4, 36)
    ramp = np.clip(t / 0.2, 0.0, 1.0)
    x = 0.0015 * np.sin(2 * np.pi * 3.0 * np.clip(t - 0.2, 0.0, None)) * (t >= 0.2)
    y = (-0.001 + 0.003 * ramp
         + 0.001 * np.sin(2 * np.pi * 2.0 * np.clip(t - 0.2, 0.0, None)) * (t >= 0.2))
    traj = experiments.TrajectorySpec(
        [(ti, xi, yi, 0.0) for ti, xi, yi in zip(t, x, y)], rate=rate)
    record = experiments.generate_trial(
        beam.STRAIGHT_WHISKER, traj, beam.PointPin(np.array([0.033, 0.0])),
        seed=11, n_segments=experiments.SUITE_SEGMENTS,
    )
    k0 = int(np.flatnonzero(record.contact)[0])
    cfg = estimators.FilterConfig(fading_alpha=1.0, prior_var=1e-6)
    gt0 = record.gt[k0]
    hint = ContactState(float(gt0[0]), float(gt0[1]) + 0.0005)
    belief, _ = estimators.init_belief(cfg, hint)
    twists = record.twists()
    dt = 1.0 / rate

    h = 1e-4  # 0.1 mm lattice pitch
    half = 0.005
    ax = np.arange(-half, half + h / 2, h)
    nx = len(ax)
    pts = np.stack(
        np.meshgrid(hint.px + ax, hint.py + ax, indexing="ij"), axis=-1
    ).reshape(-1, 2)
    logw = -0.5 * np.sum((pts - [hint.px, hint.py]) ** 2, axis=1) / cfg.prior_var
    q_sigma = np.sqrt(cfg.process_noise_cov[0, 0]) / h
    diffs = []
    for k in range(k0, k0 + 250):  # 1 s of in-contact samples
        tw = twists[k]
        z = float(record.signal[k]) if record.contact[k] else float("nan")
        belief = estimators.ukf_step(belief, tw, dt, z, straight_model, cfg).belief
        pts = propagate_array(pts, tw, dt)
        w2 = np.exp(logw - logw.max()).reshape(nx, nx)
        w2 = ndimage.gaussian_filter(w2, q_sigma)
        logw = np.log(w2.ravel() + 1e-300)
        if np.isfinite(z):
            pred = sm.evaluate(straight_model, pts)
            logw = logw - 0.5 * (z - pred) ** 2 / cfg.sensor_noise_var
            logw -= logw.max()
        w = np.exp(logw)
        w /= w.sum()
        diffs.append(float(np.linalg.norm(belief.mean - w @ pts)))
    return np.asarray(diffs)


def test_criterion_06_grid_bayes_equivalence(straight_model):
    diffs = _grid_bayes_comparison(straight_model)
    worst = float(diffs.max()) * MM
    assert worst < 0.3, f"max UKF vs grid-Bayes gap {worst:.3f} mm"
    print(f"\nPASS criterion 6: UKF within {worst:.3f} mm of the 0.1 mm "
          f"grid-Bayes posterior mean at every step ({diffs.size} steps)")


def test_criterion_07_filter_design_checks():
    from test_conditioning import _run_break_pipeline

    bp = conditioning.BandPassFilter(20.0, 32.0, sample_rate=250.0, order=6)
    corners = {f: 20.0 * np.log10(bp.magnitude(f)) for f in (20.0, 32.0)}
    for f, db in corners.items():
        assert abs(db - (-3.0)) <= 0.05 * 3.0, (f, db)
    rej = 20.0 * np.log10(bp.magnitude(5.0))
    assert rej <= -40.0, rej

    burst = lambda t: 2.5 * np.sin(2 * np.pi * 26.0 * t) * np.exp(-t / 0.1)
    artifact = lambda t: 100.0 * np.exp(-t / 0.3) + 2.5 * np.sin(2 * np.pi * 5.0 * t)
    n_burst = _run_break_pipeline(burst)
    n_artifact = _run_break_pipeline(artifact)
    assert n_burst == 1 and n_artifact == 0, (n_burst, n_artifact)
    print(f"\nPASS criterion 7: corners {corners[20.0]:.2f}/{corners[32.0]:.2f} dB, "
          f"5 Hz rejection {rej:.1f} dB, burst events={n_burst}, "
          f"artifact events={n_artifact}")


def test_criterion_08_mechanics_oracle():
    rigid = beam.WhiskerSpec(diameter=2e-4, arc_length=0.055, base_stiffness=1e3)
    res = beam.indent_pin(rigid, 0.040, depth=0.0008, n_segments=100)
    expected = beam.analytic_pin_moment(rigid, res.contact_arc_pos, -res.contact.py)
    cant_rel = abs(abs(res.moment) - abs(expected)) / abs(expected)
    assert cant_rel <= 0.02, cant_rel

    mesh_rel = 0.0
    for spec in (beam.STRAIGHT_WHISKER, beam.CURVED_WHISKER):
        arc = 0.6 * spec.arc_length
        m50 = beam.indent_pin(spec, arc, depth=0.003, n_segments=50).moment
        m100 = beam.indent_pin(spec, arc, depth=0.003, n_segments=100).moment
        mesh_rel = max(mesh_rel, abs(m100 - m50) / abs(m100))
    assert mesh_rel < 0.005, mesh_rel

    # frictionless contact: force perpendicular to the rod centerline
    res = beam.indent_pin(beam.STRAIGHT_WHISKER, 0.035, depth=0.004, n_segments=100)
    theta = float(res.rod.angles[res.segment])
    tangent = np.array([np.cos(theta), np.sin(theta)])
    fmag = float(np.linalg.norm(res.force))
    norm_rel = abs(float(res.force @ tangent)) / fmag
    assert norm_rel <= 1e-6, norm_rel
    print(f"\nPASS criterion 8: cantilever rel err {cant_rel:.2e}, mesh-doubling "
          f"{mesh_rel:.2e}, force normality {norm_rel:.2e}")


def test_criterion_09_real_time_budget(straight_runs):
    p99 = {}
    for method in experiments.METHODS:
        steps = np.concatenate([
            r.step_ms[~np.isnan(r.step_ms)] for r in straight_runs[method][0]
        ])
        p99[method] = float(np.percentile(steps, 99))
        # soft budget: p99 below the 4 ms sample period (isolated outliers
        # from OS scheduling are tolerated, sustained overruns are not)
        assert p99[method] < 4.0, (method, p99[method])
    summary = " ".join(f"{m}={v:.2f}" for m, v in p99.items())
    print(f"\nPASS criterion 9: p99 step times (ms) {summary}, budget 4 ms")


def test_criterion_10_determinism(tmp_path):
    from whiskertrack import cli

    config = tmp_path / "config.ini"
    config.write_text("[trial]\nduration = 2\nseed = 3\n")
    payloads = []
    for k in range(2):
        out = tmp_path / f"report{k}.jsonl"
        rc = cli.main([
            "replay", "--config", str(config), "--seed", "3",
            "--method", "ukf", "--format", "jsonl", "--out", str(out),
        ])
        assert rc == 0
        payloads.append(out.read_bytes())
    assert payloads[0] == payloads[1], "replay reports differ byte for byte"
    print(f"\nPASS criterion 10: identical {len(payloads[0])}-byte reports from "
          f"repeated replay with the same config and seed")
