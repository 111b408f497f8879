"""Experiment front-end: one INI config file per experiment, CSV artifacts out.

Commands: meta-train, solve, inverse, compare, oracle. Every command is a
pure function of (config, seeds); re-running a command overwrites its
artifacts byte-identically. Floats in artifacts carry 17 significant digits.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import multiprocessing
import os
import statistics
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import network, problems, reptile, sampler, tasks, training
from .errors import ConfigurationError, NumericError
from .training import fmt

META_FAMILY = {"poisson1d": "poisson1d", "poisson2d": "poisson2d",
               "burgers": "burgers", "burgers_inverse": "burgers",
               "schrodinger": "schrodinger"}


@dataclass
class ExperimentConfig:
    instance: problems.PdeInstance
    spec: network.MlpSpec
    scheme: network.InitScheme
    init_seed: int
    out_dir: Path
    train: training.TrainConfig | None = None
    meta: reptile.MetaConfig | None = None
    compare_schemes: list[tuple[str, network.InitScheme]] | None = None
    compare_seeds: tuple[int, ...] = (0,)
    oracle_options: dict | None = None


def _parse_instance(section) -> problems.PdeInstance:
    family = section.get("family")
    if family == "poisson1d":
        return problems.Poisson1D(section.getfloat("alpha", 0.7),
                                  section.getfloat("beta", 1.5))
    if family == "poisson2d":
        raw = section.get("sources", "")
        if raw.strip():
            sources = tuple(tuple(float(v) for v in part.split(","))
                            for part in raw.split(";") if part.strip())
        else:
            sources = problems.POISSON2D_TARGET_SOURCES
        return problems.Poisson2D(sources)
    if family == "burgers":
        return problems.Burgers(section.getfloat("nu", 0.01 / np.pi))
    if family == "burgers_inverse":
        return problems.BurgersInverse(section.getfloat("nu_true", 0.01 / np.pi))
    if family == "schrodinger":
        return problems.Schrodinger(section.getfloat("lam", 0.5))
    raise ConfigurationError(f"unknown problem family {family!r}")


def _parse_train(section) -> training.TrainConfig:
    eval_grid = None
    if section.get("eval_grid", "").strip():
        eval_grid = tuple(int(v) for v in section.get("eval_grid").split(","))
    weights = training.LossWeights(
        section.getfloat("w_pde", 1.0), section.getfloat("w_ic", 1.0),
        section.getfloat("w_bc", 1.0), section.getfloat("w_data", 1.0))
    return training.TrainConfig(
        iterations=section.getint("iterations"),
        optimizer=section.get("optimizer", "adam"),
        learning_rate=section.getfloat("learning_rate", 1e-3),
        n_interior=section.getint("n_interior", 0),
        n_boundary=section.getint("n_boundary", 0),
        n_initial=section.getint("n_initial", 0),
        n_data=section.getint("n_data", 0),
        sample_seed=section.getint("sample_seed", 0),
        noise_pct=section.getfloat("noise_pct", 0.0),
        noise_seed=section.getint("noise_seed", 0),
        eval_interval=section.getint("eval_interval", 100),
        weights=weights,
        eval_grid=eval_grid,
    )


def _parse_meta(section, family: str) -> reptile.MetaConfig:
    meta_family = META_FAMILY[family]
    nu_low = section.getfloat("nu_low", None)
    nu_high = section.getfloat("nu_high", None)
    oracle_grid_n = section.getint("oracle_grid_n", 129)
    n_sweeps = section.getint("n_sweeps")
    tasks_per_sweep = section.getint("tasks_per_sweep", 1)
    supervised = section.getint("supervised_per_sweep", 0)
    zero_order = high_order = None
    if supervised > 0:
        zero_order = tasks.TaskDistribution("zero_order", meta_family, nu_low, nu_high,
                                            oracle_grid_n)
    if supervised < tasks_per_sweep:
        high_order = tasks.TaskDistribution("high_order", meta_family, nu_low, nu_high,
                                            oracle_grid_n)
    return reptile.MetaConfig(
        n_sweeps=n_sweeps,
        tasks_per_sweep=tasks_per_sweep,
        supervised_per_sweep=supervised,
        inner_steps=section.getint("inner_steps"),
        inner_optimizer=section.get("inner_optimizer", "adam"),
        inner_learning_rate=section.getfloat("inner_learning_rate", 1e-3),
        epsilon0=section.getfloat("epsilon0", 1.0),
        zero_order=zero_order,
        high_order=high_order,
        budget_zero=tasks.TaskBudget(n_data=section.getint("task_data", 0)),
        budget_high=tasks.TaskBudget(
            n_interior=section.getint("task_interior", 0),
            n_boundary=section.getint("task_boundary", 0),
            n_initial=section.getint("task_initial", 0)),
        master_seed=section.getint("master_seed", 0),
    )


def _parse_compare(section) -> tuple[list[tuple[str, network.InitScheme]], tuple[int, ...]]:
    schemes = []
    for line in section.get("schemes", "").splitlines():
        line = line.strip()
        if not line:
            continue
        label, _, token = line.partition(":")
        if not token.strip():
            raise ConfigurationError(f"compare scheme line needs 'label: scheme': {line!r}")
        schemes.append((label.strip(), network.parse_scheme(token.strip())))
    if not schemes:
        raise ConfigurationError("compare needs at least one scheme")
    seeds = tuple(int(v) for v in section.get("seeds", "0").split(","))
    return schemes, seeds


def load_config(path, overrides=()) -> ExperimentConfig:
    """Read an experiment INI file, applying ``section.key=value`` overrides."""
    parser = configparser.ConfigParser(interpolation=None)
    read = parser.read(path)
    if not read:
        raise ConfigurationError(f"cannot read config file {path}")
    for item in overrides:
        key, _, value = item.partition("=")
        section, _, option = key.partition(".")
        if not (section and option and _):
            raise ConfigurationError(f"override must look like section.key=value: {item!r}")
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section.strip(), option.strip(), value.strip())

    if "problem" not in parser or "network" not in parser or "output" not in parser:
        raise ConfigurationError("config needs [problem], [network] and [output] sections")
    instance = _parse_instance(parser["problem"])
    net_sec = parser["network"]
    spec = network.MlpSpec(
        tuple(int(w) for w in net_sec.get("widths").split(",")),
        net_sec.get("activation", "tanh"),
        net_sec.getboolean("adaptive_slope", False),
        net_sec.getint("slope_scale", 10))

    init_sec = parser["init"] if "init" in parser else {}
    scheme = network.parse_scheme(init_sec.get("scheme", "xavier"))
    init_seed = int(init_sec.get("seed", 0))

    cfg = ExperimentConfig(
        instance=instance, spec=spec, scheme=scheme, init_seed=init_seed,
        out_dir=Path(parser["output"].get("dir")))
    if "train" in parser:
        cfg.train = _parse_train(parser["train"])
    if "meta" in parser:
        cfg.meta = _parse_meta(parser["meta"], problems.family_name(instance))
    if "compare" in parser:
        cfg.compare_schemes, cfg.compare_seeds = _parse_compare(parser["compare"])
    if "oracle" in parser:
        cfg.oracle_options = dict(parser["oracle"])

    for sch in [scheme] + [s for _, s in (cfg.compare_schemes or [])]:
        if sch.kind == "nrpinn_checkpoint" and not Path(sch.path).exists():
            raise ConfigurationError(f"referenced checkpoint {sch.path} does not exist")
    return cfg


def _init_params(cfg: ExperimentConfig, scheme=None, seed=None) -> network.ParamVector:
    extra = {}
    if isinstance(cfg.instance, problems.BurgersInverse):
        extra["nu"] = training.NU_INIT
    return network.init(cfg.spec, scheme or cfg.scheme,
                        cfg.init_seed if seed is None else seed, extra)


# -- artifact writers -----------------------------------------------------------


def _spatial_first(names: tuple[str, ...]) -> tuple[int, ...]:
    return (1, 0) if names == ("t", "x") else tuple(range(len(names)))


def write_solution_grid(path, grid: training.EvalGrid, pred: np.ndarray) -> None:
    order = _spatial_first(grid.names)
    header = [grid.names[i] for i in order] + ["pred", "ref", "abs_err"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(len(grid.points)):
            coords = [fmt(grid.points[i, j]) for j in order]
            writer.writerow(coords + [fmt(pred[i]), fmt(grid.ref[i]),
                                      fmt(abs(pred[i] - grid.ref[i]))])


def _write_reference(path, header, columns) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in zip(*columns):
            writer.writerow([fmt(v) for v in row])


# -- commands ---------------------------------------------------------------------


def cmd_meta_train(cfg: ExperimentConfig) -> Path:
    if cfg.meta is None:
        raise ConfigurationError("meta-train needs a [meta] section")
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    init = network.init(cfg.spec, cfg.scheme, cfg.init_seed)
    checkpoint = reptile.meta_init(cfg.spec, init, cfg.meta)
    path = cfg.out_dir / "checkpoint.npk"
    reptile.save_meta_checkpoint(path, checkpoint)
    print(f"checkpoint {path} digest {checkpoint.config_digest}")
    return path


def _solve_once(cfg: ExperimentConfig, scheme, sample_seed, init_seed):
    """One deterministic run; comparisons share sample_seed so only the
    initialization differs between schemes."""
    train = training.TrainConfig(**{**cfg.train.__dict__, "sample_seed": sample_seed,
                                    "noise_seed": sample_seed})
    params = _init_params(cfg, scheme=scheme, seed=init_seed)
    if isinstance(cfg.instance, problems.BurgersInverse):
        data = sampler.sample_data(problems.Burgers(cfg.instance.nu_true),
                                   train.n_data, sample_seed + 3)
        if train.noise_pct > 0.0:
            data = sampler.add_noise(data, train.noise_pct, train.noise_seed)
        return training.solve_inverse(cfg.spec, cfg.instance, params, data, train)
    return training.solve(cfg.spec, cfg.instance, params, train)


def cmd_solve(cfg: ExperimentConfig) -> tuple[Path, Path]:
    if cfg.train is None:
        raise ConfigurationError("solve needs a [train] section")
    if isinstance(cfg.instance, problems.BurgersInverse):
        raise ConfigurationError("use the inverse command for burgers_inverse")
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    history_path = cfg.out_dir / "history.csv"
    try:
        params, history = _solve_once(cfg, cfg.scheme, cfg.train.sample_seed,
                                      cfg.init_seed)
    except training.TrainingAborted as exc:
        exc.history.to_csv(history_path)
        raise
    history.to_csv(history_path)
    grid = training.evaluation_grid(cfg.instance, cfg.train.eval_grid)
    pred = training.predict(cfg.spec, cfg.instance, params, grid.points)
    grid_path = cfg.out_dir / "solution.csv"
    write_solution_grid(grid_path, grid, pred)
    print(f"history {history_path} final mae {fmt(history.final.mae)}")
    return history_path, grid_path


def cmd_inverse(cfg: ExperimentConfig) -> tuple[Path, Path]:
    if cfg.train is None:
        raise ConfigurationError("inverse needs a [train] section")
    if not isinstance(cfg.instance, problems.BurgersInverse):
        raise ConfigurationError("inverse needs problem family burgers_inverse")
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    history_path = cfg.out_dir / "history.csv"
    try:
        params, history = _solve_once(cfg, cfg.scheme, cfg.train.sample_seed,
                                      cfg.init_seed)
    except training.TrainingAborted as exc:
        exc.history.to_csv(history_path)
        raise
    history.to_csv(history_path)
    grid = training.evaluation_grid(cfg.instance, cfg.train.eval_grid)
    pred = training.predict(cfg.spec, cfg.instance, params, grid.points)
    grid_path = cfg.out_dir / "solution.csv"
    write_solution_grid(grid_path, grid, pred)
    nu = history.final.nu_estimate
    rel = abs(nu - cfg.instance.nu_true) / cfg.instance.nu_true
    print(f"history {history_path} nu {fmt(nu)} rel_err {fmt(rel)}")
    return history_path, grid_path


def _compare_worker(job):
    config_path, overrides, label, token, seed = job
    cfg = load_config(config_path, overrides)
    scheme = network.parse_scheme(token)
    _, history = _solve_once(cfg, scheme, seed, seed)
    rows = [(r.iteration, r.loss_pde, r.loss_ic, r.loss_bc, r.loss_data,
             r.loss_total, r.mae, r.rel_l2, r.nu_estimate) for r in history.rows]
    return label, seed, rows


def cmd_compare(cfg: ExperimentConfig, config_path=None, overrides=(), jobs=1
                ) -> tuple[Path, Path]:
    """Run every scheme at every seed on identical point sets; write the
    combined per-iteration table and a median-over-seeds summary."""
    if cfg.compare_schemes is None or cfg.train is None:
        raise ConfigurationError("compare needs [compare] and [train] sections")
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    jobs_list = [(str(config_path), tuple(overrides), label,
                  network.scheme_token(scheme), seed)
                 for label, scheme in cfg.compare_schemes
                 for seed in cfg.compare_seeds]
    if jobs > 1 and config_path is not None and len(jobs_list) > 1:
        os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
        ctx = multiprocessing.get_context("spawn")
        with ctx.Pool(jobs) as pool:
            results = pool.map(_compare_worker, jobs_list)
    else:
        results = []
        for job in jobs_list:
            label, seed = job[2], job[4]
            scheme = dict(cfg.compare_schemes)[label]
            _, history = _solve_once(cfg, scheme, seed, seed)
            results.append((label, seed, [
                (r.iteration, r.loss_pde, r.loss_ic, r.loss_bc, r.loss_data,
                 r.loss_total, r.mae, r.rel_l2, r.nu_estimate) for r in history.rows]))

    by_key = {(label, seed): rows for label, seed, rows in results}
    combined_path = cfg.out_dir / "combined.csv"
    with open(combined_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("scheme", "seed") + training.HISTORY_COLUMNS)
        for label, _ in cfg.compare_schemes:
            for seed in cfg.compare_seeds:
                for row in by_key[(label, seed)]:
                    writer.writerow([label, seed, row[0]]
                                    + [fmt(v) for v in row[1:8]]
                                    + ["" if row[8] is None else fmt(row[8])])

    summary_path = cfg.out_dir / "summary.csv"
    with open(summary_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scheme", "mae", "rel_l2", "iterations"])
        for label, _ in cfg.compare_schemes:
            finals = [by_key[(label, seed)][-1] for seed in cfg.compare_seeds]
            mae = statistics.median(row[6] for row in finals)
            rel = statistics.median(row[7] for row in finals)
            writer.writerow([label, fmt(mae), fmt(rel), finals[0][0]])
    print(f"summary {summary_path}")
    return combined_path, summary_path


def cmd_oracle(cfg: ExperimentConfig) -> Path:
    """Export the family's reference field as a CSV grid."""
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    opts = cfg.oracle_options or {}
    inst = cfg.instance
    path = cfg.out_dir / "reference.csv"
    if isinstance(inst, problems.Poisson1D):
        x = np.linspace(-10.0, 10.0, int(opts.get("n", 1001)))
        _write_reference(path, ["x", "value"],
                         [x, problems.exact_solution(inst, x[:, None])])
    elif isinstance(inst, problems.Poisson2D):
        grid = problems.oracle_poisson2d_fd(inst.sources, int(opts.get("grid_n", 256)))
        gx, gy = np.meshgrid(grid.x, grid.y, indexing="ij")
        _write_reference(path, ["x", "y", "value"],
                         [gx.ravel(), gy.ravel(), grid.u.ravel()])
    elif isinstance(inst, (problems.Burgers, problems.BurgersInverse)):
        nu = inst.nu if isinstance(inst, problems.Burgers) else inst.nu_true
        x = np.linspace(-1.0, 1.0, int(opts.get("nx", 256)))
        t = np.linspace(0.0, 1.0, int(opts.get("nt", 100)))
        gx, gt = np.meshgrid(x, t, indexing="ij")
        u = problems.oracle_burgers_cole_hopf(gx.ravel(), gt.ravel(), nu)
        _write_reference(path, ["x", "t", "value"], [gx.ravel(), gt.ravel(), u])
    else:
        grid = problems.oracle_schrodinger_spectral(
            inst.lam, nx=int(opts.get("nx", 256)), nt_out=int(opts.get("nt", 201)))
        ggx, ggt = np.meshgrid(grid.x, grid.t, indexing="ij")
        _write_reference(path, ["x", "t", "value"],
                         [ggx.ravel(), ggt.ravel(), grid.habs.T.ravel()])
    print(f"reference {path}")
    return path


def run_cli(argv) -> int:
    parser = argparse.ArgumentParser(prog="nrpinn",
                                     description="PINN training with meta-learned "
                                                 "initializations")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("meta-train", "solve", "inverse", "compare", "oracle"):
        p = sub.add_parser(name)
        p.add_argument("config", help="path to an experiment INI file")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="SECTION.KEY=VALUE", help="override a config entry")
        if name == "compare":
            p.add_argument("--jobs", type=int, default=1,
                           help="run comparison cases in this many processes")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config, args.overrides)
        if args.command == "meta-train":
            cmd_meta_train(cfg)
        elif args.command == "solve":
            cmd_solve(cfg)
        elif args.command == "inverse":
            cmd_inverse(cfg)
        elif args.command == "compare":
            cmd_compare(cfg, config_path=args.config, overrides=args.overrides,
                        jobs=args.jobs)
        else:
            cmd_oracle(cfg)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (NumericError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run_cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
