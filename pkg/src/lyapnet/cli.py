"""Command-line entry point: ``lyapnet run`` and ``lyapnet bench``.

Exit codes: 0 certificate found, 3 no certificate, 1 configuration error,
2 numerical abort.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from dataclasses import replace

import numpy as np

from . import systems as sysmod
from .config import ConfigError, RunConfig, build_config, load_config
from .expr import ExprError
from .loss import LossConfig
from .net import PRESETS, init_network, save_checkpoint
from .sampler import SamplingDomain, rng_streams
from .trainer import CERTIFICATE_FOUND, NumericalAbort, TrainConfig, export_trace, train
from .verifier import export_grid

log = logging.getLogger("lyapnet")

EXIT_CERTIFICATE = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_NO_CERTIFICATE = 3

# flag -> config key
_FLAG_KEYS = {
    "system": "system",
    "seed": "seed",
    "out": "out",
    "allow_nonequilibrium": "allow_nonequilibrium",
    "preset": "preset",
    "max_steps": "max_steps",
    "lr": "learning_rate",
    "batch_size": "batch_size",
    "radius": "radius",
    "delta": "delta",
    "inner_radius": "inner_radius",
    "m1": "m1",
    "m2": "m2",
    "margin_mode": "margin_mode",
}


def resolve_system(cfg: RunConfig) -> sysmod.DynamicalSystem:
    if cfg.rhs_list:
        try:
            return sysmod.DynamicalSystem.from_text(cfg.system, cfg.rhs_list)
        except ExprError as e:
            raise ConfigError(str(e), "rhs") from None
    try:
        return sysmod.get_builtin(cfg.system)
    except KeyError as e:
        raise ConfigError(e.args[0], "system") from None


def execute(cfg: RunConfig, out_dir: str):
    """Train, verify and write all artifacts into ``out_dir``; returns the report."""
    system = resolve_system(cfg)
    ok, residual = sysmod.check_equilibrium(system)
    if not ok and not cfg.allow_nonequilibrium:
        raise ConfigError(
            f"origin is not an equilibrium of {system.name}: f(0) = "
            f"({', '.join(repr(float(r)) for r in residual)}); pass --allow-nonequilibrium to train anyway",
            "system",
        )
    try:
        domain = SamplingDomain(system.dim, cfg.radius, cfg.delta, cfg.scheme, cfg.effective_inner_radius)
    except ValueError as e:
        raise ConfigError(str(e), "delta") from None
    loss_cfg = LossConfig(cfg.m1, cfg.m2, cfg.margin_mode)
    train_cfg = TrainConfig(
        batch_size=cfg.batch_size,
        learning_rate=cfg.learning_rate,
        max_steps=cfg.max_steps,
        eval_every=cfg.eval_every,
        eval_sample_count=cfg.eval_sample_count,
        loss_tol=cfg.loss_tol,
        patience_windows=cfg.patience_windows,
        pass_threshold=cfg.pass_threshold,
    )
    net = init_network(system.dim, cfg.layer_spec, seed=cfg.seed, zero_anchor=cfg.zero_anchor,
                       rng=rng_streams(cfg.seed)["init"])

    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "run_config.txt"), "w") as fh:
        fh.write(cfg.to_text())

    report = train(system, net, domain, loss_cfg, train_cfg, cfg.seed)

    ckpt = os.path.join(out_dir, "checkpoint.txt")
    save_checkpoint(net, ckpt)
    report.checkpoint = ckpt
    export_trace(report, os.path.join(out_dir, "trace.csv"))
    if system.dim == 2:
        export_grid(net, system, cfg.radius, cfg.grid_resolution, os.path.join(out_dir, "grid.csv"))
    write_report(report, cfg, os.path.join(out_dir, "report.txt"))
    return report


def write_report(report, cfg: RunConfig, path) -> None:
    last = report.trace[-1]
    lines = [
        f"system = {report.system}",
        f"verdict = {report.verdict}",
        f"steps_run = {report.steps_run}",
        f"converged = {str(report.converged).lower()}",
        f"root_seed = {report.root_seed}",
        f"final_loss = {last.breakdown.total!r}",
        f"final_v_bar = {last.v_bar!r}",
        f"final_vdot_bar = {last.vdot_bar!r}",
        f"checkpoint = {os.path.basename(report.checkpoint or '')}",
    ]
    if report.verification is not None:
        for k, v in report.verification.as_dict().items():
            v = str(v).lower() if isinstance(v, bool) else repr(v)
            lines.append(f"verification.{k} = {v}")
    else:
        lines.append("verification = not run (training did not reach the loss tolerance)")
    for i, note in enumerate(report.summary().splitlines()):
        lines.append(f"summary.{i} = {note}")
    for line in cfg.to_text().splitlines():
        lines.append(f"config.{line}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _config_from_args(args) -> RunConfig:
    file_values = load_config(args.config) if args.config else {}
    overrides = {key: getattr(args, flag) for flag, key in _FLAG_KEYS.items() if hasattr(args, flag)}
    if overrides.get("allow_nonequilibrium") is False:
        overrides["allow_nonequilibrium"] = None  # flag absent: keep file value
    return build_config(file_values, overrides)


def cmd_run(args) -> int:
    try:
        cfg = _config_from_args(args)
        report = execute(cfg, cfg.out)
    except ConfigError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except sysmod.NonFiniteDynamics as e:
        print(f"configuration error: rhs: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalAbort as e:
        print(f"numerical abort: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(report.summary())
    print(f"artifacts written to {cfg.out}")
    return EXIT_CERTIFICATE if report.verdict == CERTIFICATE_FOUND else EXIT_NO_CERTIFICATE


BENCH_HEADER = ["system", "expected_verdict", "obtained_verdict", "steps", "final_loss", "min_V", "max_Vdot"]
_EXPECTED = {"stable": CERTIFICATE_FOUND, "unstable": "no_certificate"}


def bench(base: RunConfig, out_dir: str, names=None) -> tuple[list[list[str]], bool]:
    """Run every benchmark system with ``base`` settings; one row per system."""
    names = list(names or sysmod.BENCH_SYSTEMS)
    rows = []
    all_match = True
    os.makedirs(out_dir, exist_ok=True)
    for name in names:
        cfg = replace(base, system=name, rhs="", out=os.path.join(out_dir, name))
        expected = sysmod.get_builtin(name).expected_verdict
        try:
            report = execute(cfg, cfg.out)
        except (ConfigError, NumericalAbort, sysmod.NonFiniteDynamics) as e:
            log.error("%s: %s", name, e)
            rows.append([name, expected, "error", "", "", "", ""])
            all_match = False
            continue
        vr = report.verification
        rows.append([
            name, expected, report.verdict, str(report.steps_run), repr(report.final_loss),
            "" if vr is None else repr(vr.min_V), "" if vr is None else repr(vr.max_Vdot),
        ])
        all_match &= _EXPECTED.get(expected) == report.verdict
        print(f"{name}: expected {expected}, obtained {report.verdict} in {report.steps_run} steps", flush=True)
    with open(os.path.join(out_dir, "bench_summary.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BENCH_HEADER)
        w.writerows(rows)
    return rows, all_match


def cmd_bench(args) -> int:
    try:
        file_values = load_config(args.config) if args.config else {}
        overrides = {"seed": args.seed, "out": args.out, "max_steps": args.max_steps}
        base = build_config(file_values, overrides)
        names = args.systems.split(",") if args.systems else None
        for n in names or ():
            if n not in sysmod.BUILTINS:
                raise ConfigError(f"unknown builtin system {n!r}", "systems")
    except ConfigError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    _, all_match = bench(base, base.out, names)
    print(f"summary written to {os.path.join(base.out, 'bench_summary.csv')}")
    return 0 if all_match else EXIT_NO_CERTIFICATE


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lyapnet", description="Search for neural Lyapunov functions.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="train and verify on one system")
    run.add_argument("--system", help=f"builtin name ({', '.join(sysmod.BUILTINS)}) or custom name")
    run.add_argument("--config", help="key = value config file")
    run.add_argument("--seed", type=int)
    run.add_argument("--out", help="output directory")
    run.add_argument("--allow-nonequilibrium", action="store_true", default=False)
    run.add_argument("--preset", choices=sorted(PRESETS))
    run.add_argument("--max-steps", type=int)
    run.add_argument("--lr", type=float)
    run.add_argument("--batch-size", type=int)
    run.add_argument("--radius", type=float)
    run.add_argument("--delta", type=float)
    run.add_argument("--inner-radius", type=float)
    run.add_argument("--m1", type=float)
    run.add_argument("--m2", type=float)
    run.add_argument("--margin-mode", choices=["constant", "state_scaled"])
    run.set_defaults(func=cmd_run)

    b = sub.add_parser("bench", help="run every benchmark system and compare with expected verdicts")
    b.add_argument("--seed", type=int)
    b.add_argument("--out", default="bench")
    b.add_argument("--config", help="base config applied to every system")
    b.add_argument("--max-steps", type=int)
    b.add_argument("--systems", help="comma-separated subset of builtin systems")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    np.seterr(all="ignore")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
