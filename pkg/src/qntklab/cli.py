"""Configuration-driven experiment runner.

`qntklab run --config cfg.ini --out dir` executes one experiment and writes
CSV artifacts plus a manifest; `qntklab plotdata <dir>` converts artifacts
into long-format (series, x, y) files for any plotting tool.

Exit codes: 0 success, 2 configuration error, 3 runtime divergence.
Gram and feature computations are dense numpy; set OMP_NUM_THREADS to
control the BLAS thread count.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import os
import sys
import time

import numpy as np

from . import data, dynamics, kernel, models, nn
from .nn import DivergenceError
from .qsim import EncoderSpec, RandomMeasurement

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3

EXPERIMENTS = (
    "theory-kernel",
    "train-qcnn",
    "train-qnn",
    "train-cnn",
    "compare",
    "locality-sweep",
    "shot-sweep",
    "ntk-convergence",
)

# section -> allowed keys; anything else is a config error
_SCHEMA = {
    "run": {"experiment", "seed"},
    "dataset": {"source", "n", "n_d", "n_test", "task", "noise_sd", "path", "n_features", "encoder_seed"},
    "encoder": {"ansatz", "seed"},
    "kernel": {"source", "layers", "xi", "m", "activation"},
    "optimizer": {"kind", "eta"},
    "model": {"n0", "m", "steps", "qnn_layers", "shots", "init_scheme", "head_xi", "widths", "shot_counts", "n_seeds", "eta_theory", "t_end"},
}


class ConfigError(ValueError):
    pass


def _load_config(path: str, overrides: list[str]) -> configparser.ConfigParser:
    parser = configparser.ConfigParser()
    if path:
        if not os.path.exists(path):
            raise ConfigError(f"config file not found: {path}")
        parser.read(path)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override must look like section.key=value: {item!r}")
        key_path, value = item.split("=", 1)
        if "." not in key_path:
            raise ConfigError(f"override key must be section.key: {key_path!r}")
        section, key = key_path.split(".", 1)
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, key, value)
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        for key in parser[section]:
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {section}.{key}")
    if not parser.has_option("run", "experiment"):
        raise ConfigError("missing required key run.experiment")
    experiment = parser.get("run", "experiment")
    if experiment not in EXPERIMENTS:
        raise ConfigError(
            f"run.experiment must be one of {', '.join(EXPERIMENTS)}; got {experiment!r}"
        )
    return parser


def _get(cfg, section, key, cast, default):
    if cfg.has_option(section, key):
        return cast(cfg.get(section, key))
    return default


def _build_dataset(cfg, seed):
    source = _get(cfg, "dataset", "source", str, "sin")
    n_d = _get(cfg, "dataset", "n_d", int, 100)
    n_test = _get(cfg, "dataset", "n_test", int, max(1, n_d // 5))
    task = _get(cfg, "dataset", "task", str, "regression")
    if source == "sin":
        noise = _get(cfg, "dataset", "noise_sd", float, 0.05)
        ds = data.gen_sin(n_d + n_test, noise_sd=noise, seed=seed)
        spec = None
    elif source == "hard_sin":
        ds = data.gen_hard_sin(n_d + n_test, seed=seed)
        spec = None
    elif source == "adhoc":
        ds = data.gen_adhoc_substitute((n_d + n_test) // 2, seed=seed)
        spec = None
    elif source == "quantum":
        n = _get(cfg, "dataset", "n", int, 2)
        enc_seed = _get(cfg, "dataset", "encoder_seed", int, 0)
        ds, spec = data.gen_quantum_data(
            n, n_d + n_test, task, seed=seed, encoder_seed=enc_seed
        )
    elif source == "csv":
        path = _get(cfg, "dataset", "path", str, None)
        n_features = _get(cfg, "dataset", "n_features", int, None)
        if path is None or n_features is None:
            raise ConfigError("dataset.path and dataset.n_features required for source=csv")
        ds = data.load_csv_classification(path, n_features)
        spec = None
    else:
        raise ConfigError(f"unknown dataset.source {source!r}")
    train, test = data.split(ds, n_test, seed=seed + 1)
    return train, test, spec


def _encoder_spec(cfg, n, default_ansatz="QuantumData"):
    ansatz = _get(cfg, "encoder", "ansatz", str, default_ansatz)
    enc_seed = _get(cfg, "encoder", "seed", int, 0)
    return EncoderSpec(ansatz=ansatz, n=n, random_seed=enc_seed)


def _optimizer(cfg):
    kind = _get(cfg, "optimizer", "kind", str, "adam")
    eta = _get(cfg, "optimizer", "eta", float, 1e-3)
    return nn.Optimizer(kind, eta)


def _first_layer_gram(cfg, train, spec, seed):
    """Sigma^(1) Gram, classical inner-product or projected quantum form."""
    source = _get(cfg, "kernel", "source", str, "classical")
    xi = _get(cfg, "kernel", "xi", float, 0.0)
    xs = train.inputs
    if source == "classical":
        return kernel.KernelMatrix(
            entries=xs @ xs.T / xs.shape[1] + xi**2, kind="Sigma", meta={"xi": xi}
        )
    if source != "quantum":
        raise ConfigError(f"kernel.source must be classical or quantum, got {source!r}")
    m = _get(cfg, "kernel", "m", int, 1)
    n = xs.shape[1]
    if spec is None:
        spec = _encoder_spec(cfg, n)
    if xi < 0:
        raise ConfigError("kernel.xi must be non-negative")
    pqk = kernel.ProjectedQuantumKernel(spec, m, xi=xi)
    return pqk.gram(xs)


def _write_manifest(out_dir, cfg, seed, started, artifacts):
    path = os.path.join(out_dir, "manifest.txt")
    with open(path, "w") as fh:
        fh.write(f"seed = {seed}\n")
        fh.write(f"wall_time_s = {time.time() - started:.3f}\n")
        fh.write(f"artifacts = {', '.join(sorted(artifacts))}\n")
        fh.write("\n[resolved config]\n")
        for section in cfg.sections():
            fh.write(f"[{section}]\n")
            for key, value in sorted(cfg[section].items()):
                fh.write(f"{key} = {value}\n")


def _run_theory_kernel(cfg, out_dir, seed):
    train, _, spec = _build_dataset(cfg, seed)
    sigma1 = _first_layer_gram(cfg, train, spec, seed)
    layers = _get(cfg, "kernel", "layers", int, 2)
    xi = _get(cfg, "kernel", "xi", float, 0.0)
    activation = _get(cfg, "kernel", "activation", str, "relu")
    kcfg = kernel.KernelConfig(layers=layers, xi=xi, activation=activation)
    theta = kernel.ntk_gram(kcfg, sigma1)
    sigma1.to_csv(os.path.join(out_dir, "sigma1.csv"))
    theta.to_csv(os.path.join(out_dir, "theta.csv"))
    report = kernel.pd_check(theta)
    with open(os.path.join(out_dir, "pd_report.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["min_eigenvalue", "max_eigenvalue", "is_pd", "condition"])
        writer.writerow([repr(report.min_eigenvalue), repr(report.max_eigenvalue),
                         int(report.is_pd), report.condition or ""])
    return ["sigma1.csv", "theta.csv", "pd_report.csv"]


def _run_train_qcnn(cfg, out_dir, seed):
    train, test, spec = _build_dataset(cfg, seed)
    n = train.n_features
    if spec is None:
        spec = _encoder_spec(cfg, n, default_ansatz="A")
    n0 = _get(cfg, "model", "n0", int, 100)
    m = _get(cfg, "model", "m", int, 1)
    steps = _get(cfg, "model", "steps", int, 200)
    shots = _get(cfg, "model", "shots", int, 0) or None
    task = _get(cfg, "dataset", "task", str, "regression")
    rng = np.random.default_rng(seed)
    meas = RandomMeasurement.sample(n, m, n0, rng)
    head = nn.init(
        nn.NetworkConfig(
            widths=(n0, 1),
            xi=_get(cfg, "model", "head_xi", float, 0.0),
            init_scheme=_get(cfg, "model", "init_scheme", str, "he_scaled"),
        ),
        int(rng.integers(2**31)),
    )
    model = models.QcnnModel(encoder=spec, measurement=meas, head=head, task=task)
    traj = models.qcnn_train(
        model, train, _optimizer(cfg), steps,
        shots=shots, rng=np.random.default_rng(seed + 1),
        record_every=max(1, steps // 100),
    )
    traj.to_csv(os.path.join(out_dir, "trajectory.csv"))
    metric = models._metric(task, lambda x: models.qcnn_predict(model, x), test)
    with open(os.path.join(out_dir, "test_metric.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "metric"])
        writer.writerow(["qcnn", repr(metric)])
    return ["trajectory.csv", "test_metric.csv"]


def _run_train_qnn(cfg, out_dir, seed):
    train, test, spec = _build_dataset(cfg, seed)
    n = train.n_features
    if spec is None:
        spec = _encoder_spec(cfg, n)
    task = _get(cfg, "dataset", "task", str, "regression")
    layers = _get(cfg, "model", "qnn_layers", int, 2)
    steps = _get(cfg, "model", "steps", int, 50)
    model = models.QnnModel(
        encoder=spec,
        layers=layers,
        theta=np.random.default_rng(seed).uniform(0, 2 * np.pi, size=(layers, n, 3)),
        task=task,
    )
    traj = models.qnn_train(model, train, _optimizer(cfg), steps,
                            record_every=max(1, steps // 50))
    traj.to_csv(os.path.join(out_dir, "trajectory.csv"))
    metric = models._metric(task, lambda x: models.qnn_predict(model, x), test)
    with open(os.path.join(out_dir, "test_metric.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "metric", "circuit_evals"])
        writer.writerow(["qnn", repr(metric), model.circuit_evals])
    return ["trajectory.csv", "test_metric.csv"]


def _run_train_cnn(cfg, out_dir, seed):
    train, test, _ = _build_dataset(cfg, seed)
    task = _get(cfg, "dataset", "task", str, "regression")
    n0 = _get(cfg, "model", "n0", int, 100)
    steps = _get(cfg, "model", "steps", int, 200)
    model = models.build_cnn(
        train.n_features, n0, task=task,
        init_scheme=_get(cfg, "model", "init_scheme", str, "he_scaled"), seed=seed,
    )
    traj = models.cnn_train(model, train, _optimizer(cfg), steps,
                            record_every=max(1, steps // 100))
    traj.to_csv(os.path.join(out_dir, "trajectory.csv"))
    metric = models._metric(task, lambda x: models.cnn_predict(model, x), test)
    with open(os.path.join(out_dir, "test_metric.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "metric"])
        writer.writerow(["cnn", repr(metric)])
    return ["trajectory.csv", "test_metric.csv"]


def _run_compare(cfg, out_dir, seed):
    train, test, spec = _build_dataset(cfg, seed)
    n = train.n_features
    if spec is None:
        spec = _encoder_spec(cfg, n)
    task = _get(cfg, "dataset", "task", str, "regression")
    n_seeds = _get(cfg, "model", "n_seeds", int, 3)
    report = models.compare_models(
        task, n, range(seed, seed + n_seeds), train, test, spec,
        n0=_get(cfg, "model", "n0", int, 50),
        m=_get(cfg, "model", "m", int, 1),
        qnn_layers=_get(cfg, "model", "qnn_layers", int, 2),
        steps=_get(cfg, "model", "steps", int, 200),
        qnn_steps=_get(cfg, "model", "steps", int, 200) // 4,
        eta=_get(cfg, "optimizer", "eta", float, 1e-3),
    )
    report.to_csv(os.path.join(out_dir, "report.csv"))
    return ["report.csv"]


def _run_locality_sweep(cfg, out_dir, seed):
    train, _, spec = _build_dataset(cfg, seed)
    xs = train.inputs
    n = xs.shape[1]
    if spec is None:
        spec = _encoder_spec(cfg, n)
    xi = _get(cfg, "kernel", "xi", float, 0.0)
    layers = _get(cfg, "kernel", "layers", int, 2)
    eta = _get(cfg, "model", "eta_theory", float, 1.0)
    t_end = _get(cfg, "model", "t_end", float, 10.0)
    artifacts = []
    for m in (v for v in (1, 2, 3, 4, 6) if n % v == 0):
        pqk = kernel.ProjectedQuantumKernel(spec, m, xi=xi)
        sigma1 = pqk.gram(xs)
        theta = kernel.ntk_gram(
            kernel.KernelConfig(layers=layers, xi=xi), sigma1, kind="ThetaQ"
        )
        f0 = np.zeros(train.size)
        model = dynamics.diagonalize(theta, train.labels, f0)
        times = np.linspace(0.0, t_end, 51)
        traj = dynamics.mse_trajectory(model, eta, times)
        name = f"trajectory_m{m}.csv"
        traj.to_csv(os.path.join(out_dir, name))
        artifacts.append(name)
    return artifacts


def _run_shot_sweep(cfg, out_dir, seed):
    train, test, spec = _build_dataset(cfg, seed)
    n = train.n_features
    if spec is None:
        spec = _encoder_spec(cfg, n)
    counts = _get(cfg, "model", "shot_counts", str, "100,1000,10000")
    shot_counts = [int(v) for v in counts.split(",")]
    n0 = _get(cfg, "model", "n0", int, 50)
    m = _get(cfg, "model", "m", int, 1)
    steps = _get(cfg, "model", "steps", int, 200)
    task = _get(cfg, "dataset", "task", str, "regression")
    rows = []
    for shots in shot_counts:
        rng = np.random.default_rng([seed, shots])
        meas = RandomMeasurement.sample(n, m, n0, rng)
        head = nn.init(
            nn.NetworkConfig(widths=(n0, 1), init_scheme="he_scaled"),
            int(rng.integers(2**31)),
        )
        model = models.QcnnModel(encoder=spec, measurement=meas, head=head, task=task)
        models.qcnn_train(model, train, _optimizer(cfg), steps,
                          shots=shots, rng=rng, record_every=steps)
        metric = models._metric(
            task, lambda x: models.qcnn_predict(model, x), test
        )
        rows.append((shots, metric))
    with open(os.path.join(out_dir, "shot_sweep.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["shots", "metric"])
        for shots, metric in rows:
            writer.writerow([shots, repr(metric)])
    return ["shot_sweep.csv"]


def _run_ntk_convergence(cfg, out_dir, seed):
    train, _, _ = _build_dataset(cfg, seed)
    xs = train.inputs[: min(train.size, 10)]
    xi = _get(cfg, "kernel", "xi", float, 0.0)
    sigma1 = xs @ xs.T / xs.shape[1] + xi**2
    theta, _ = kernel.theta_recursion(kernel.KernelConfig(layers=2, xi=xi), sigma1)
    widths_text = _get(cfg, "model", "widths", str, "100,1000,10000")
    widths = [int(v) for v in widths_text.split(",")]
    rows = []
    for width in widths:
        cfg_net = nn.NetworkConfig(
            widths=(xs.shape[1], width, 1), xi=xi, activations=("relu",)
        )
        emp = kernel.empirical_ntk(nn.init(cfg_net, seed), xs).entries
        err = float(np.abs(emp - theta).max() / np.abs(theta).max())
        rows.append((width, err))
    with open(os.path.join(out_dir, "ntk_convergence.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["width", "max_rel_error"])
        for width, err in rows:
            writer.writerow([width, repr(err)])
    return ["ntk_convergence.csv"]


_RUNNERS = {
    "theory-kernel": _run_theory_kernel,
    "train-qcnn": _run_train_qcnn,
    "train-qnn": _run_train_qnn,
    "train-cnn": _run_train_cnn,
    "compare": _run_compare,
    "locality-sweep": _run_locality_sweep,
    "shot-sweep": _run_shot_sweep,
    "ntk-convergence": _run_ntk_convergence,
}


def run(config_path: str, out_dir: str, seed: int, overrides: list[str]) -> int:
    started = time.time()
    try:
        cfg = _load_config(config_path, overrides)
    except (ConfigError, configparser.Error) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if cfg.has_option("run", "seed") and seed is None:
        seed = cfg.getint("run", "seed")
    seed = 0 if seed is None else seed
    os.makedirs(out_dir, exist_ok=True)
    experiment = cfg.get("run", "experiment")
    try:
        artifacts = _RUNNERS[experiment](cfg, out_dir, seed)
    except DivergenceError as exc:
        print(f"runtime divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    _write_manifest(out_dir, cfg, seed, started, artifacts)
    return EXIT_OK


def _plotdata_rows(path: str):
    """Long-format rows for one artifact CSV, or None if not plottable."""
    name = os.path.basename(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        rows = [r for r in reader if r and not r[0].startswith("#")]
    if not rows:
        return None
    header = rows[0]
    body = rows[1:]
    if header[:2] == ["t", "cost"]:
        return [("cost", r[0], r[1]) for r in body]
    if header[:2] == ["step", "cost"]:
        return [("cost", r[0], r[1]) for r in body]
    if header == ["shots", "metric"]:
        return [("metric", r[0], r[1]) for r in body]
    if header == ["width", "max_rel_error"]:
        return [("max_rel_error", r[0], r[1]) for r in body]
    if header[:5] == ["model", "n", "seed", "train_metric", "test_metric"]:
        return [(f"{r[0]}_test", r[2], r[4]) for r in body] + [
            (f"{r[0]}_train", r[2], r[3]) for r in body
        ]
    return None


def emit_plotdata(artifact_dir: str) -> int:
    if not os.path.isdir(artifact_dir):
        print(f"missing artifact directory: {artifact_dir}", file=sys.stderr)
        return EXIT_CONFIG
    out = os.path.join(artifact_dir, "plotdata")
    written = 0
    for name in sorted(os.listdir(artifact_dir)):
        if not name.endswith(".csv"):
            continue
        rows = _plotdata_rows(os.path.join(artifact_dir, name))
        if rows is None:
            continue
        os.makedirs(out, exist_ok=True)
        with open(os.path.join(out, name), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["series", "x", "y"])
            writer.writerows(rows)
        written += 1
    if written == 0:
        print("no plottable artifacts found", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="qntklab")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute one experiment from a config file")
    run_p.add_argument("--config", default="", help="INI config file path")
    run_p.add_argument("--seed", type=int, default=None)
    run_p.add_argument("--out", required=True, help="artifact output directory")
    run_p.add_argument(
        "--override", action="append", default=[], metavar="SECTION.KEY=VALUE"
    )

    plot_p = sub.add_parser("plotdata", help="convert artifacts to (series, x, y) CSVs")
    plot_p.add_argument("artifact_dir")

    args = parser.parse_args(argv)
    if args.command == "run":
        return run(args.config, args.out, args.seed, args.override)
    return emit_plotdata(args.artifact_dir)


if __name__ == "__main__":
    sys.exit(main())
