"""End-to-end demo on synthetic data: a two-species trajectory plus one
static context map, stacked predictors of every brick kind, and the
reliability horizon of each on the held-out suffix.

Usage: python scripts/forecast_demo.py [--points 400] [--bricks 3] [--epsilon 0.2]
"""

import argparse

import numpy as np

from ecocast.bricks import Activation
from ecocast.datasets import ContextMap, TimeSeriesSet, build_training_pairs, default_scaling
from ecocast.lotka import REFERENCE_PARAMS, simulate_lv
from ecocast.stack import BrickConfig, train_stack
from ecocast.stability import estimate_horizon, split_train_validate


def make_dataset(points: int, dt: float) -> tuple[TimeSeriesSet, ContextMap]:
    traj = simulate_lv(REFERENCE_PARAMS, 10.0, 5.0, dt, points - 1)
    ts = TimeSeriesSet(
        names=("prey", "predators"),
        times=traj.times,
        values=np.vstack([traj.prey, traj.predators]),
    )
    rng = np.random.default_rng(0)
    dtm = ContextMap(name="dtm", values=rng.uniform(0.0, 400.0, (10, 10)), cell_size=100.0)
    return ts, dtm


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--points", type=int, default=400)
    parser.add_argument("--dt", type=float, default=0.05)
    parser.add_argument("--bricks", type=int, default=3)
    parser.add_argument("--epsilon", type=float, default=0.2)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    ts, dtm = make_dataset(args.points, args.dt)
    train_ts, val_ts = split_train_validate(ts, 0.8)
    inputs, targets, schema = build_training_pairs(train_ts, [dtm])
    scaling = default_scaling(train_ts, [dtm])
    context = dtm.values.ravel()
    print(
        f"{ts.n_points} points, {train_ts.n_points}/{val_ts.n_points} split, "
        f"{schema.input_dim(2)} entries per higher-brick input"
    )

    configs = {
        "linear": BrickConfig(kind="linear"),
        "dsn": BrickConfig(kind="dsn", hidden_size=40, ridge=1e-8, activation=Activation.SIGMOID),
        "kernel": BrickConfig(kind="kernel", ridge=1e-6),
        "tensor": BrickConfig(kind="tensor", hidden_size_a=8, hidden_size_b=8, ridge=1e-8),
        "kernel-tensor": BrickConfig(kind="kernel-tensor", ridge=1e-6),
    }
    print(f"\n{'stack':<16}{'train rmse':>12}{'val rmse':>12}{'horizon':>9}{'radius':>9}")
    for label, cfg in configs.items():
        n_bricks = 1 if label == "linear" else args.bricks
        model = train_stack(
            inputs, targets, schema, cfg, n_bricks=n_bricks, seed=args.seed, scaling=scaling
        )
        pred = model.predict_columns(inputs[: schema.n_series], context)
        train_rmse = float(np.sqrt(np.mean((pred - targets) ** 2)))
        val_in, val_t, _ = build_training_pairs(val_ts, [dtm])
        val_pred = model.predict_columns(val_in[: schema.n_series], context)
        val_rmse = float(np.sqrt(np.mean((val_pred - val_t) ** 2)))
        report = estimate_horizon(model, val_ts, context, epsilon=args.epsilon)
        radius = "-" if report.spectral_radius is None else f"{report.spectral_radius:.3f}"
        print(
            f"{label:<16}{train_rmse:>12.3e}{val_rmse:>12.3e}"
            f"{report.horizon:>6}/{val_ts.n_points:<3}{radius:>8}"
        )


if __name__ == "__main__":
    main()
