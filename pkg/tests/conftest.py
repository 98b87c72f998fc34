"""Shared fixtures: calibration models and benchmark suites are expensive
(thousands of warm-started rod equilibria each), so they are built once per
session and shared between the unit tests and the acceptance suite."""

import numpy as np
import pytest

from whiskertrack import beam, experiments


@pytest.fixture(scope="session")
def straight_model():
    return experiments.calibration_model(beam.STRAIGHT_WHISKER)


@pytest.fixture(scope="session")
def curved_model():
    return experiments.calibration_model(beam.CURVED_WHISKER)


@pytest.fixture(scope="session")
def straight_suite():
    return experiments.pin_suite(beam.STRAIGHT_WHISKER, n_trials=10)


@pytest.fixture(scope="session")
def curved_suite():
    return experiments.pin_suite(beam.CURVED_WHISKER, n_trials=10)


@pytest.fixture(scope="session")
def contour_trials():
    return experiments.contour_suite()


@pytest.fixture(scope="session")
def short_trial():
    """A 2 s noiseless straight-whisker pin trial for consistency checks."""
    rng = np.random.default_rng(7)
    traj, pin = experiments.pin_trajectory(rng, duration=2.0)
    return experiments.generate_trial(
        beam.STRAIGHT_WHISKER, traj, beam.PointPin(pin), noise_std=0.0, seed=7,
        n_segments=experiments.SUITE_SEGMENTS,
    ), beam.PointPin(pin)
