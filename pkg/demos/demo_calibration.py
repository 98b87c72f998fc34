"""Calibrate the polynomial sensor model for both whisker shapes.

Presses a calibration pin into the whisker on a grid of arc positions and
depths using the quasi-static rod oracle, fits the degree-5 bivariate
polynomial mapping contact position to base-moment counts, and saves the
model files next to this script.
"""

import pathlib

import numpy as np

from whiskertrack import beam, experiments, sensor_model

OUT = pathlib.Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)


def main():
    for name, spec in (("straight", beam.STRAIGHT_WHISKER),
                       ("curved", beam.CURVED_WHISKER)):
        print(f"=== {name} whisker: arc length {spec.arc_length * 1e3:.0f} mm, "
              f"arc radius {spec.arc_radius * 1e3:.0f} mm ==="
              if not spec.is_straight else
              f"=== {name} whisker: arc length {spec.arc_length * 1e3:.0f} mm ===")
        model = experiments.calibration_model(spec)
        stats = model.fit_stats
        print(f"  fitted degree-{model.degree} model on {stats['n_samples']} "
              f"oracle contacts")
        print(f"  r_squared = {stats['r_squared']:.6f}, "
              f"rmse = {stats['rmse']:.3f} counts")

        # sanity: the signal grows monotonically with indentation depth
        s = model.scaling
        ys = np.linspace(s.y_center - 0.8 * s.y_half, s.y_center + 0.8 * s.y_half, 5)
        print("  predicted counts along the depth axis at the box center:")
        for y in ys:
            z = sensor_model.evaluate(model, np.array([s.x_center, y]))
            print(f"    y = {y * 1e3:+.2f} mm -> {z:8.1f} counts")

        path = OUT / f"model_{name}.txt"
        sensor_model.save_model(model, path)
        print(f"  saved -> {path}\n")


if __name__ == "__main__":
    main()
