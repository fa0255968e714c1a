"""Experiment harness: config parsing, seeded runs, CSV/SVG emission, manifests.

Subcommands: psgd, select, restrict, markov, regression, participation,
scaling-curve. Parameters resolve as defaults < config file < command-line
flags; every run writes its outputs plus a manifest.json with the resolved
config and per-file checksums. Exit codes: 0 success, 2 invalid config,
3 solver or certification failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import __version__
from .benchmarks import (
    coupled_quadratic,
    nested_box_ladder,
    restriction_instance,
    selection_arms,
    stackelberg_scaling_factory,
    stationary_scaling_factory,
    zero_sum_instance,
)
from .core import ConvergenceError, JointAction
from .equilibrium import nash_residual, psgd_nash, scaling_curve
from .markov import CalibrationError, build_chain_game, payoff_sweep
from .participation import alpha_threshold, default_instance, equilibrium_pair
from .regression import (
    RegressionInstance,
    compare_model_classes,
    large_model_env_objective,
    large_model_learner_loss,
    small_model_env_objective,
    small_model_loss,
)
from .restriction import RestrictionStageError, certificate_record, certify_restriction
from .selection import successive_elimination
from .svg import Series, line_chart

SOLVER_ERRORS = (ConvergenceError, RestrictionStageError, CalibrationError, RuntimeError)


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Config and output plumbing
# ---------------------------------------------------------------------------


def load_config(path: Optional[str]) -> dict[str, str]:
    """Flat key=value file; blank lines and # comments ignored."""
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {path}")
    out: dict[str, str] = {}
    for lineno, raw in enumerate(p.read_text().splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def resolve(args: argparse.Namespace, cfg: dict[str, str], key: str, default, cast: Callable):
    """Command-line value wins over the config file, which wins over the default."""
    cli_value = getattr(args, key.replace("-", "_"), None)
    if cli_value is not None:
        return cli_value
    if key in cfg:
        try:
            return cast(cfg[key])
        except ValueError as exc:
            raise ConfigError(f"config key {key}: {exc}") from exc
    return default


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def fmt_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> Path:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt_value(v) for v in row])
    return path


@dataclass
class PlotSpec:
    x: str
    ys: Sequence[str]
    title: str
    x_label: str
    y_label: str
    step: bool = False
    markers: bool = False
    vlines: Sequence[tuple[float, str]] = ()


def emit_plot(csv_path: Path, spec: PlotSpec, out_path: Path) -> Path:
    """Static chart from CSV columns; missing columns or empty data fail."""
    with Path(csv_path).open() as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ConfigError(f"{csv_path}: no data rows to plot")
    missing = [c for c in (spec.x, *spec.ys) if c not in rows[0]]
    if missing:
        raise ConfigError(f"{csv_path}: missing columns {missing}")
    xs = [float(r[spec.x]) for r in rows]
    series = [
        Series(name=col, x=xs, y=[float(r[col]) for r in rows], step=spec.step, markers=spec.markers)
        for col in spec.ys
    ]
    out_path.write_text(
        line_chart(series, spec.title, spec.x_label, spec.y_label, vlines=list(spec.vlines))
    )
    return out_path


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(
    out_dir: Path,
    experiment: str,
    config: dict,
    outputs: Sequence[Path],
    runtime: float,
    error: Optional[dict] = None,
) -> Path:
    manifest = {
        "experiment": experiment,
        "config": config,
        "version": __version__,
        "outputs": {p.name: _sha256(p) for p in outputs},
        "runtime_seconds": runtime,
        "error": error,
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------


def run_psgd(params: dict, out_dir: Path) -> list[Path]:
    bench = coupled_quadratic(sigma=params["sigma"])
    game = bench.game
    rows = []
    summary = []
    for h_idx, horizon in enumerate(params["horizons"]):
        gaps, residuals = [], []
        for s in range(params["n_seeds"]):
            rng = np.random.default_rng([params["seed"], h_idx, s])
            x0 = JointAction(
                bench.learner_set.project(np.zeros(1)), bench.env_set.project(np.zeros(1))
            )
            trace = psgd_nash(game, bench.learner_set, bench.env_set, x0, horizon, rng)
            avg = trace.averaged_point
            gap = abs(float(game.loss_learner(avg.theta, avg.env)) - bench.nash_learner_loss)
            res = nash_residual(game, avg, bench.learner_set, bench.env_set)
            gaps.append(gap)
            residuals.append(res)
            rows.append((horizon, s, gap, res))
        summary.append((horizon, float(np.mean(gaps)), float(np.mean(residuals))))
    out = [
        write_csv(out_dir / "psgd.csv", ["horizon", "seed", "f_l_gap", "nash_residual"], rows),
        write_csv(
            out_dir / "psgd_summary.csv",
            ["horizon", "mean_f_l_gap", "mean_nash_residual"],
            summary,
        ),
    ]
    out.append(
        emit_plot(
            out[1],
            PlotSpec(
                x="horizon",
                ys=["mean_f_l_gap"],
                title="Averaged-iterate loss gap vs horizon",
                x_label="horizon T",
                y_label="mean |f_l(avg) - f_l(nash)|",
                markers=True,
            ),
            out_dir / "psgd.svg",
        )
    )
    return out


def run_select(params: dict, out_dir: Path) -> list[Path]:
    arms, factory = selection_arms(params["losses"], sigma=params["sigma"])
    rng = np.random.default_rng([params["seed"]])
    report = successive_elimination(
        arms,
        factory,
        delta=params["delta"],
        alpha=params["alpha"],
        rng=rng,
        scale=params["scale"],
        max_total_steps=params["budget"],
    )
    log_rows = [
        (r.epoch, r.horizon, r.arm, r.estimate, r.radius, r.active_after)
        for r in report.evaluations
    ]
    summary = [
        (
            -1 if report.winner is None else report.winner,
            "|".join(str(i) for i in report.survivors),
            report.inconclusive,
            report.epochs,
            report.total_steps,
            report.delta,
        )
    ]
    return [
        write_csv(
            out_dir / "elimination_log.csv",
            ["epoch", "T", "arm", "estimate", "radius", "active"],
            log_rows,
        ),
        write_csv(
            out_dir / "selection_summary.csv",
            ["winner", "survivors", "inconclusive", "epochs", "total_steps", "delta"],
            summary,
        ),
    ]


def run_restrict(params: dict, out_dir: Path) -> list[Path]:
    bench = restriction_instance() if params["instance"] == "coupled" else zero_sum_instance()
    cert = certify_restriction(
        bench.game, bench.learner_set, bench.env_set, seed=params["seed"]
    )
    record = certificate_record(cert)
    path = out_dir / "certificate.txt"
    path.write_text("".join(f"{k}={v}\n" for k, v in record.items()))
    return [path]


def run_markov(params: dict, out_dir: Path) -> list[Path]:
    game = build_chain_game(
        params["n"], gamma_l=params["gamma"], gamma_e=params["gamma_env"]
    )
    grid = np.linspace(params["p_min"], params["p_max"], params["points"])
    rows = [
        (eq.p_bar, eq.learner_value, eq.env_value, eq.absorbing_state, params["gamma"])
        for eq in payoff_sweep(game, grid)
    ]
    out = [
        write_csv(
            out_dir / "markov_sweep.csv",
            ["p_bar", "learner_value", "env_value", "absorbing_state", "gamma"],
            rows,
        )
    ]
    out.append(
        emit_plot(
            out[0],
            PlotSpec(
                x="p_bar",
                ys=["learner_value"],
                title=f"Chain game: learner value vs policy cap (n={params['n']})",
                x_label="policy cap p_bar",
                y_label="equilibrium learner value",
                step=True,
            ),
            out_dir / "markov_sweep.svg",
        )
    )
    return out


def run_regression(params: dict, out_dir: Path) -> list[Path]:
    instance = RegressionInstance(np.array(params["beta"]))
    comparison = compare_model_classes(instance)
    lo, hi = instance.k_range
    ks = np.arange(lo, hi + 1e-12, params["curve_step"])
    curve_rows = [
        (
            k,
            small_model_loss(instance, k),
            large_model_learner_loss(instance, k),
            small_model_env_objective(instance, k),
            large_model_env_objective(instance, k),
        )
        for k in ks
    ]
    eq_rows = [
        (o.model_class, o.k_star, o.learner_loss, o.env_objective,
         o.learner_loss / instance.beta_norm**2)
        for o in (comparison.small, comparison.large)
    ]
    summary_rows = [
        (
            comparison.reverse_scaling,
            comparison.pointwise_dominance,
            comparison.large.learner_loss - comparison.small.learner_loss,
        )
    ]
    out = [
        write_csv(
            out_dir / "regression_curve.csv",
            ["k", "small_loss", "large_loss", "env_obj_small", "env_obj_large"],
            curve_rows,
        ),
        write_csv(
            out_dir / "regression_equilibrium.csv",
            ["model_class", "k_star", "learner_loss", "env_objective", "loss_over_beta_sq"],
            eq_rows,
        ),
        write_csv(
            out_dir / "regression_summary.csv",
            ["reverse_scaling", "pointwise_dominance", "loss_gap"],
            summary_rows,
        ),
    ]
    out.append(
        emit_plot(
            out[0],
            PlotSpec(
                x="k",
                ys=["small_loss", "large_loss"],
                title="Best-response losses vs shift magnitude",
                x_label="shift magnitude k",
                y_label="learner loss",
                vlines=[
                    (comparison.small.k_star, "#1f77b4"),
                    (comparison.large.k_star, "#d62728"),
                ],
            ),
            out_dir / "regression_curve.svg",
        )
    )
    return out


def run_participation(params: dict, out_dir: Path) -> list[Path]:
    base, phi = default_instance()
    n_labels = base.n_labels
    threshold = alpha_threshold(base, phi, n_labels)
    rows = []
    for alpha in np.linspace(params["alpha_min"], params["alpha_max"], params["alpha_points"]):
        full = equilibrium_pair("full", base, phi, float(alpha))
        restricted = equilibrium_pair("restricted", base, phi, float(alpha))
        if not (full.certificate.passed and restricted.certificate.passed):
            raise RuntimeError(f"equilibrium certificate failed at alpha={alpha}")
        rows.append(
            (alpha, full.loss, restricted.loss, threshold, full.loss > restricted.loss)
        )
    out = [
        write_csv(
            out_dir / "participation_sweep.csv",
            ["alpha", "full_loss", "restricted_loss", "threshold", "reverse_scaling_flag"],
            rows,
        )
    ]
    out.append(
        emit_plot(
            out[0],
            PlotSpec(
                x="alpha",
                ys=["full_loss", "restricted_loss"],
                title="Participation game: equilibrium losses vs alpha",
                x_label="manipulating fraction alpha",
                y_label="zero-one loss",
                markers=True,
            ),
            out_dir / "participation_sweep.svg",
        )
    )
    return out


def run_scaling_curve(params: dict, out_dir: Path) -> list[Path]:
    regime = params["regime"]
    radii = params["radii"]
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise ConfigError("radii must be strictly increasing (small class first)")
    if regime == "stationary":
        ladder = nested_box_ladder(radii, dim=2)
        factory = stationary_scaling_factory(np.array([2.0, 0.0]))
    elif regime in ("stackelberg_leader", "stackelberg_follower", "nash"):
        ladder = nested_box_ladder(radii, dim=1)
        factory = stackelberg_scaling_factory()
    else:
        raise ConfigError(f"unknown regime {regime!r}")
    curve = scaling_curve(factory, ladder, regime)
    rows = [
        (k, radii[k], rep.loss_learner, rep.loss_env, rep.nash_residual, rep.regime, rep.certified)
        for k, rep in curve
    ]
    out = [
        write_csv(
            out_dir / "scaling_curve.csv",
            ["class_index", "radius", "learner_loss", "env_loss", "nash_residual", "regime", "certified"],
            rows,
        )
    ]
    out.append(
        emit_plot(
            out[0],
            PlotSpec(
                x="class_index",
                ys=["learner_loss"],
                title=f"Learner loss across the ladder ({regime})",
                x_label="model class index",
                y_label="equilibrium learner loss",
                markers=True,
            ),
            out_dir / "scaling_curve.svg",
        )
    )
    return out


# ---------------------------------------------------------------------------
# Argument parsing and dispatch
# ---------------------------------------------------------------------------


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--seed", type=int, default=None, help="base seed (default 0)")
    sub.add_argument("--out-dir", type=str, default=None, help="output directory")
    sub.add_argument("--config", type=str, default=None, help="key=value config file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gamescale",
        description="Equilibrium scaling experiments for games under model-class restrictions",
    )
    subs = parser.add_subparsers(dest="experiment", required=True)

    p = subs.add_parser("psgd", help="averaged stochastic gradient Nash estimation")
    _add_common(p)
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--horizons", type=str, default=None, help="comma-separated horizons")
    p.add_argument("--n-seeds", type=int, default=None)

    p = subs.add_parser("select", help="successive elimination over model classes")
    _add_common(p)
    p.add_argument("--losses", type=str, default=None, help="per-arm Nash losses")
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--scale", type=float, default=None)
    p.add_argument("--budget", type=int, default=None)

    p = subs.add_parser("restrict", help="improving model-class restriction certificate")
    _add_common(p)
    p.add_argument("--instance", type=str, default=None, choices=["coupled", "zero_sum"])

    p = subs.add_parser("markov", help="chain Markov game payoff sweep")
    _add_common(p)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--gamma-env", type=float, default=None)
    p.add_argument("--points", type=int, default=None)
    p.add_argument("--p-min", type=float, default=None)
    p.add_argument("--p-max", type=float, default=None)

    p = subs.add_parser("regression", help="strategic regression loss comparison")
    _add_common(p)
    p.add_argument("--beta", type=str, default=None, help="comma-separated coefficients")
    p.add_argument("--curve-step", type=float, default=None)

    p = subs.add_parser("participation", help="participation dynamics alpha sweep")
    _add_common(p)
    p.add_argument("--alpha-points", type=int, default=None)
    p.add_argument("--alpha-min", type=float, default=None)
    p.add_argument("--alpha-max", type=float, default=None)

    p = subs.add_parser("scaling-curve", help="equilibrium losses across a nested ladder")
    _add_common(p)
    p.add_argument("--regime", type=str, default=None,
                   choices=["stationary", "stackelberg_leader", "stackelberg_follower", "nash"])
    p.add_argument("--radii", type=str, default=None, help="comma-separated box radii")

    return parser


KNOWN_KEYS: dict[str, set[str]] = {
    "psgd": {"sigma", "horizons", "n_seeds"},
    "select": {"losses", "delta", "alpha", "sigma", "scale", "budget"},
    "restrict": {"instance"},
    "markov": {"n", "gamma", "gamma_env", "points", "p_min", "p_max"},
    "regression": {"beta", "curve_step"},
    "participation": {"alpha_points", "alpha_min", "alpha_max"},
    "scaling-curve": {"regime", "radii"},
}


def _resolve_params(args: argparse.Namespace, cfg: dict[str, str]) -> dict:
    exp = args.experiment
    unknown = set(cfg) - KNOWN_KEYS[exp] - {"seed", "out_dir"}
    if unknown:
        raise ConfigError(f"unknown config keys for {exp}: {sorted(unknown)}")
    params: dict = {"seed": resolve(args, cfg, "seed", 0, int)}
    if exp == "psgd":
        params["sigma"] = resolve(args, cfg, "sigma", 0.3, float)
        horizons = resolve(args, cfg, "horizons", "512,4096", str)
        params["horizons"] = [int(h) for h in str(horizons).split(",") if h.strip()]
        params["n_seeds"] = resolve(args, cfg, "n_seeds", 20, int)
    elif exp == "select":
        losses = resolve(args, cfg, "losses", "0,0.25,0.5,1.0", str)
        params["losses"] = _floats(str(losses))
        params["delta"] = resolve(args, cfg, "delta", 0.1, float)
        params["alpha"] = resolve(args, cfg, "alpha", 8.0, float)
        params["sigma"] = resolve(args, cfg, "sigma", 0.5, float)
        params["scale"] = resolve(args, cfg, "scale", 1.0, float)
        params["budget"] = resolve(args, cfg, "budget", 1_000_000, int)
    elif exp == "restrict":
        params["instance"] = resolve(args, cfg, "instance", "coupled", str)
        if params["instance"] not in ("coupled", "zero_sum"):
            raise ConfigError(f"unknown instance {params['instance']!r}")
    elif exp == "markov":
        params["n"] = resolve(args, cfg, "n", 50, int)
        params["gamma"] = resolve(args, cfg, "gamma", 0.9, float)
        params["gamma_env"] = resolve(args, cfg, "gamma_env", None, float)
        params["points"] = resolve(args, cfg, "points", 200, int)
        params["p_min"] = resolve(args, cfg, "p_min", 0.5, float)
        params["p_max"] = resolve(args, cfg, "p_max", 1.0, float)
    elif exp == "regression":
        beta = resolve(args, cfg, "beta", "1,0", str)
        params["beta"] = _floats(str(beta))
        params["curve_step"] = resolve(args, cfg, "curve_step", 0.01, float)
    elif exp == "participation":
        params["alpha_points"] = resolve(args, cfg, "alpha_points", 21, int)
        params["alpha_min"] = resolve(args, cfg, "alpha_min", 0.0, float)
        params["alpha_max"] = resolve(args, cfg, "alpha_max", 1.0, float)
    elif exp == "scaling-curve":
        params["regime"] = resolve(args, cfg, "regime", "stationary", str)
        radii = resolve(args, cfg, "radii", "0.2,0.4,0.6,0.8,1.0", str)
        params["radii"] = _floats(str(radii))
    return params


RUNNERS: dict[str, Callable[[dict, Path], list[Path]]] = {
    "psgd": run_psgd,
    "select": run_select,
    "restrict": run_restrict,
    "markov": run_markov,
    "regression": run_regression,
    "participation": run_participation,
    "scaling-curve": run_scaling_curve,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    started = time.monotonic()
    try:
        cfg = load_config(args.config)
        params = _resolve_params(args, cfg)
        out_dir = Path(args.out_dir or cfg.get("out_dir") or f"out/{args.experiment}")
        out_dir.mkdir(parents=True, exist_ok=True)
    except ConfigError as exc:
        print(json.dumps({"error": {"type": "config", "message": str(exc)}}), file=sys.stderr)
        return 2
    try:
        outputs = RUNNERS[args.experiment](params, out_dir)
    except ValueError as exc:
        print(json.dumps({"error": {"type": "config", "message": str(exc)}}), file=sys.stderr)
        return 2
    except SOLVER_ERRORS as exc:
        error = {"type": type(exc).__name__, "message": str(exc)}
        if isinstance(exc, RestrictionStageError):
            error["stage"] = exc.stage
        write_manifest(out_dir, args.experiment, params, [], time.monotonic() - started, error)
        print(json.dumps({"error": error}), file=sys.stderr)
        return 3
    write_manifest(out_dir, args.experiment, params, outputs, time.monotonic() - started)
    for path in outputs:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
