"""Command-line front end: simulate | sweep | lhv | verify.

Exit codes: 0 success, 2 usage/config problem, 3 numerical failure,
4 hidden-variable bound violation (would indicate an implementation bug).
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, lhv
from .config import (
    ConfigError,
    RunManifest,
    config_from_dict,
    load_experiment_config,
    load_strategy,
    resolve_seed,
)
from .measurement import AncillaMeterSpec, GaussianMeterSpec, ProjectiveMeterSpec
from .protocol import (
    SWEEP_AXES,
    ExperimentConfig,
    NumericalError,
    analytic_mean,
    config_analytic_mean,
    exact_mean,
    iter_records,
    monte_carlo,
    predicted_stderr,
    sweep,
    violation_threshold,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_BOUND_VIOLATION = 4

STDERR_WARNING_LEVEL = 0.05
LMR_BOUND = 2.0


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def _fmt_bool(value: bool) -> str:
    return "true" if value else "false"


def _write_text(out: str | None, text: str) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8", newline="")


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", default=None, help="experiment config file (INI)")
    parser.add_argument("--seed", type=int, default=None, help="64-bit RNG seed")
    parser.add_argument("--threads", type=int, default=1, help="worker cap (never changes results)")
    parser.add_argument("--out", default=None, help="output CSV path (default: stdout)")
    parser.add_argument("--manifest", default=None, help="manifest path: re-run if it exists, else written after the run")


def _add_experiment_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--meter", choices=("gaussian", "ancilla"), default=None, help="meter type for both arms")
    parser.add_argument("--sigma", type=float, default=None, help="gaussian signal std per eigenstate")
    parser.add_argument("--eta", type=float, default=None, help="gaussian meter quantum efficiency")
    parser.add_argument("--v-total", type=float, default=None, help="ancilla total visibility")
    parser.add_argument("--u", type=float, default=None, help="ancilla readout visibility")
    parser.add_argument("--v", type=float, default=None, help="projective readout visibility")
    parser.add_argument("--shots", type=int, default=None, help="number of shots")
    parser.add_argument("--phi-a1", type=float, default=None, help="first weak analyzer angle (radians)")
    parser.add_argument("--phi-a2", type=float, default=None, help="second weak analyzer angle (radians)")
    parser.add_argument("--phi-b1", type=float, default=None, help="first readout analyzer angle (radians)")
    parser.add_argument("--phi-b2", type=float, default=None, help="second readout analyzer angle (radians)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="blgi", description=__doc__)
    parser.add_argument("--version", action="version", version=f"blgi {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run one configuration and write a one-row summary")
    _add_common_flags(p_sim)
    _add_experiment_flags(p_sim)
    p_sim.add_argument("--records", default=None, help="also write every per-shot record to this CSV")

    p_sweep = sub.add_parser("sweep", help="scan one parameter and write a CSV of means")
    _add_common_flags(p_sweep)
    _add_experiment_flags(p_sweep)
    p_sweep.add_argument("--axis", choices=SWEEP_AXES, default=None)
    p_sweep.add_argument("--values", default=None, help="comma-separated parameter values")

    p_lhv = sub.add_parser("lhv", help="check hidden-variable strategies against the classical bound")
    _add_common_flags(p_lhv)
    p_lhv.add_argument("--strategy", default=None, help="strategy file (INI)")
    p_lhv.add_argument("--random", type=int, default=None, metavar="N", help="check N random calibrated strategies")
    p_lhv.add_argument("--brute-force", action="store_true", help="print the enumerated exact maximum and exit")
    p_lhv.add_argument("--shots", type=int, default=None, help="shots per strategy (default 100000)")
    p_lhv.add_argument("--hidden-states", type=int, default=None, help="default 2")
    p_lhv.add_argument("--noise-sigma", type=float, default=None, help="default 1.0")
    p_lhv.add_argument("--invasiveness", type=float, default=None, help="max readout-mean shift from the first measurement (default 0)")
    p_lhv.add_argument("--calibration-shots", type=int, default=None, help="conditional draws per hidden state (default 10000)")

    p_verify = sub.add_parser("verify", help="run the oracle cross-check suite")
    _add_common_flags(p_verify)
    return parser


# ---------------------------------------------------------------------------
# Config resolution.
# ---------------------------------------------------------------------------

_OVERRIDE_FLAGS = (
    "config", "meter", "sigma", "eta", "v_total", "u", "v", "shots",
    "phi_a1", "phi_a2", "phi_b1", "phi_b2", "seed",
)


def _has_overrides(args: argparse.Namespace) -> bool:
    return any(getattr(args, name, None) is not None for name in _OVERRIDE_FLAGS)


def _default_config() -> ExperimentConfig:
    return ExperimentConfig(
        meter1=GaussianMeterSpec(sigma=1.0),
        meter2=GaussianMeterSpec(sigma=1.0),
    )


def _resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    if args.config is not None:
        config = load_experiment_config(args.config)
    else:
        config = _default_config()

    try:
        if args.meter == "gaussian":
            spec = GaussianMeterSpec(
                sigma=args.sigma if args.sigma is not None else 1.0,
                eta=args.eta if args.eta is not None else 1.0,
            )
            config = replace(config, meter1=spec, meter2=spec)
        elif args.meter == "ancilla":
            spec = AncillaMeterSpec(
                v_total=args.v_total if args.v_total is not None else 1.0,
                u=args.u if args.u is not None else 1.0,
            )
            config = replace(config, meter1=spec, meter2=spec)
        else:
            for field, value in (("sigma", args.sigma), ("eta", args.eta)):
                if value is not None:
                    if not isinstance(config.meter1, GaussianMeterSpec) or not isinstance(
                        config.meter2, GaussianMeterSpec
                    ):
                        raise ConfigError(f"--{field} requires gaussian meters")
                    config = replace(
                        config,
                        meter1=replace(config.meter1, **{field: value}),
                        meter2=replace(config.meter2, **{field: value}),
                    )
            for field, value in (("v_total", args.v_total), ("u", args.u)):
                if value is not None:
                    if not isinstance(config.meter1, AncillaMeterSpec) or not isinstance(
                        config.meter2, AncillaMeterSpec
                    ):
                        raise ConfigError(f"--{field.replace('_', '-')} requires ancilla meters")
                    config = replace(
                        config,
                        meter1=replace(config.meter1, **{field: value}),
                        meter2=replace(config.meter2, **{field: value}),
                    )
        if args.v is not None:
            config = replace(config, b_spec=ProjectiveMeterSpec(v=args.v))
        if args.shots is not None:
            config = replace(config, shots=args.shots)
        angles = list(config.angles)
        for index, name in enumerate(("phi_a1", "phi_a2", "phi_b1", "phi_b2")):
            value = getattr(args, name)
            if value is not None:
                angles[index] = value
        config = replace(config, angles=tuple(angles))
        seed = resolve_seed(args.seed, file_seed=config.seed if args.config is not None else None)
        config = replace(config, seed=seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return config


def _load_rerun_manifest(args: argparse.Namespace, command: str) -> RunManifest | None:
    if args.manifest is None or not Path(args.manifest).exists():
        return None
    if _has_overrides(args):
        raise ConfigError(
            "re-running from an existing manifest: drop the config/meter/seed flags "
            "(only --out and --threads may be overridden)"
        )
    manifest = RunManifest.load(args.manifest)
    if manifest.command != command:
        raise ConfigError(
            f"manifest was written by {manifest.command!r}, but this is {command!r}"
        )
    return manifest


def _maybe_write_manifest(args: argparse.Namespace, manifest: RunManifest, rerun: bool) -> None:
    if args.manifest is not None and not rerun:
        manifest.write(args.manifest)


# ---------------------------------------------------------------------------
# Subcommands.
# ---------------------------------------------------------------------------


def _warn_shot_budget(config: ExperimentConfig) -> None:
    predicted = predicted_stderr(config)
    if predicted > STDERR_WARNING_LEVEL:
        print(
            f"warning: predicted stderr {predicted:.3g} exceeds {STDERR_WARNING_LEVEL} "
            f"for {config.shots} shots; consider more shots",
            file=sys.stderr,
        )


def cmd_simulate(args: argparse.Namespace) -> int:
    manifest = _load_rerun_manifest(args, "simulate")
    if manifest is not None:
        config = config_from_dict(manifest.config)
        out = args.out if args.out is not None else manifest.out
        records_path = manifest.extra.get("records")
    else:
        config = _resolve_config(args)
        out = args.out
        records_path = args.records

    _warn_shot_budget(config)
    if records_path is not None:
        total = 0.0
        total_sq = 0.0
        with open(records_path, "w", encoding="utf-8", newline="") as handle:
            handle.write("alpha1,alpha2,b1,b2\n")
            for alpha1, alpha2, b1, b2 in iter_records(config):
                values = alpha1 * alpha2 + alpha1 * b2 + b1 * alpha2 - b1 * b2
                total += float(values.sum())
                total_sq += float((values * values).sum())
                np.savetxt(handle, np.column_stack([alpha1, alpha2, b1, b2]), fmt="%.17g", delimiter=",")
        n = config.shots
        mean = total / n
        variance = max((total_sq - n * mean * mean) / (n - 1), 0.0) if n > 1 else 0.0
        estimate_mean, estimate_stderr = mean, float(np.sqrt(variance / n))
    else:
        estimate = monte_carlo(config, threads=args.threads)
        estimate_mean, estimate_stderr = estimate.mean, estimate.stderr

    exact = exact_mean(config)
    analytic = config_analytic_mean(config)
    violation = estimate_mean - 4.0 * estimate_stderr > LMR_BOUND
    lines = [
        "mean,stderr,exact,analytic,violation\n",
        f"{_fmt(estimate_mean)},{_fmt(estimate_stderr)},{_fmt(exact)},{_fmt(analytic)},{_fmt_bool(violation)}\n",
    ]
    _write_text(out, "".join(lines))
    _maybe_write_manifest(
        args,
        RunManifest.create("simulate", config, out, extra={"records": records_path}),
        rerun=manifest is not None,
    )
    return EXIT_OK


def _parse_values(text: str) -> list[float]:
    try:
        values = [float(part) for part in text.split(",") if part.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"--values: expected comma-separated numbers, got {text!r}") from exc
    if not values:
        raise ConfigError("--values: empty list")
    return values


def cmd_sweep(args: argparse.Namespace) -> int:
    manifest = _load_rerun_manifest(args, "sweep")
    if manifest is not None:
        if args.axis is not None or args.values is not None:
            raise ConfigError("re-running from a manifest: drop --axis/--values")
        config = config_from_dict(manifest.config)
        out = args.out if args.out is not None else manifest.out
        axis = manifest.extra.get("axis")
        values = [float(v) for v in manifest.extra.get("values", [])]
        if axis is None or not values:
            raise ConfigError("sweep manifest is missing axis/values")
    else:
        if args.axis is None:
            raise ConfigError("sweep needs --axis")
        if args.values is None:
            raise ConfigError("sweep needs --values")
        config = _resolve_config(args)
        out = args.out
        axis = args.axis
        values = _parse_values(args.values)

    try:
        points = sweep(config, axis, values, threads=args.threads)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    lines = [f"# lmr_bound = {_fmt(LMR_BOUND)}\n", "value,mc_mean,mc_stderr,exact,analytic\n"]
    for point in points:
        lines.append(
            f"{_fmt(point.value)},{_fmt(point.estimate.mean)},{_fmt(point.estimate.stderr)},"
            f"{_fmt(point.exact)},{_fmt(point.analytic)}\n"
        )
    _write_text(out, "".join(lines))
    _maybe_write_manifest(
        args,
        RunManifest.create("sweep", config, out, extra={"axis": axis, "values": values}),
        rerun=manifest is not None,
    )
    return EXIT_OK


_LHV_DEFAULTS = {
    "shots": 100_000,
    "hidden_states": 2,
    "noise_sigma": 1.0,
    "invasiveness": 0.0,
    "calibration_shots": 10_000,
}

_LHV_MANIFEST_FLAGS = ("strategy", "random", "seed", *_LHV_DEFAULTS)


def _lhv_params(args: argparse.Namespace) -> dict:
    manifest = None
    if args.manifest is not None and Path(args.manifest).exists():
        if args.brute_force or any(getattr(args, name) is not None for name in _LHV_MANIFEST_FLAGS):
            raise ConfigError(
                "re-running from an existing manifest: drop the lhv parameter flags "
                "(only --out and --threads may be overridden)"
            )
        manifest = RunManifest.load(args.manifest)
        if manifest.command != "lhv":
            raise ConfigError(f"manifest was written by {manifest.command!r}, but this is 'lhv'")
        params = {**_LHV_DEFAULTS, "strategy": None, "random": None, "seed": manifest.seed}
        params.update(manifest.extra)
        params["out"] = args.out if args.out is not None else manifest.out
        params["rerun"] = True
        return params
    params = {
        name: getattr(args, name) if getattr(args, name) is not None else default
        for name, default in _LHV_DEFAULTS.items()
    }
    params["strategy"] = args.strategy
    params["random"] = args.random
    params["seed"] = resolve_seed(args.seed)
    params["out"] = args.out
    params["rerun"] = False
    return params


def cmd_lhv(args: argparse.Namespace) -> int:
    if args.brute_force:
        try:
            count = args.hidden_states if args.hidden_states is not None else _LHV_DEFAULTS["hidden_states"]
            print(_fmt(lhv.brute_force_max(count)))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return EXIT_OK
    params = _lhv_params(args)
    seed = int(params["seed"])
    shots = int(params["shots"])
    if shots < 1:
        raise ConfigError(f"--shots: expected a positive count, got {shots}")
    calibration_shots = int(params["calibration_shots"])
    if calibration_shots < 10_000:
        raise ConfigError(
            f"--calibration-shots: needs at least 10000 per hidden state, got {calibration_shots}"
        )

    strategies: list[tuple[str, lhv.LHVStrategy]] = []
    if params["strategy"] is not None:
        strategies.append((params["strategy"], load_strategy(params["strategy"])))
    if params["random"] is not None:
        if params["random"] < 1:
            raise ConfigError(f"--random: expected a positive count, got {params['random']}")
        for index in range(int(params["random"])):
            rng = np.random.Generator(np.random.Philox(key=(seed << 64) + index))
            strategies.append(
                (
                    f"random-{index}",
                    lhv.random_strategy(
                        int(params["hidden_states"]),
                        rng,
                        noise_sigma=float(params["noise_sigma"]),
                        max_invasiveness=float(params["invasiveness"]),
                    ),
                )
            )
    if not strategies:
        raise ConfigError("lhv needs --strategy, --random or --brute-force")

    rows = []
    any_violation = False
    for index, (name, strategy) in enumerate(strategies):
        rng = np.random.Generator(np.random.Philox(key=(seed << 64) + (1 << 32) + index))
        estimate = lhv.lhv_mean(strategy, shots, rng)
        calibration = lhv.calibration_check(strategy, calibration_shots, rng)
        bound_ok = abs(estimate.mean) <= LMR_BOUND + 4.0 * estimate.stderr
        any_violation = any_violation or not bound_ok
        rows.append((name, estimate, bound_ok, calibration.all_ok))

    lines = ["strategy,mean,stderr,bound_ok,calibration_ok\n"]
    for name, estimate, bound_ok, calibration_ok in rows:
        lines.append(
            f"{name},{_fmt(estimate.mean)},{_fmt(estimate.stderr)},"
            f"{_fmt_bool(bound_ok)},{_fmt_bool(calibration_ok)}\n"
        )
    for count in sorted({strategy.num_hidden_states for _, strategy in strategies}):
        if count <= lhv.MAX_BRUTE_FORCE_STATES:
            lines.append(
                f"# brute_force_max({count} hidden states) = {_fmt(lhv.brute_force_max(count))}\n"
            )
    _write_text(params["out"], "".join(lines))
    if args.manifest is not None and not params["rerun"]:
        extra = {name: params[name] for name in _LHV_MANIFEST_FLAGS}
        RunManifest.create("lhv", None, params["out"], extra=extra).write(args.manifest)
    return EXIT_BOUND_VIOLATION if any_violation else EXIT_OK


def _verify_checks() -> list[tuple[str, float, float]]:
    """Run the oracle cross-checks; returns (name, deviation, tolerance) rows."""
    from .qmath import analyzer_basis
    from .measurement import ancilla_kraus, gaussian_kraus
    from scipy.special import roots_hermite

    checks: list[tuple[str, float, float]] = []

    threshold = violation_threshold()
    checks.append(("threshold identity", abs(analytic_mean(threshold, threshold, 1.0) - 2.0), 1e-12))

    worst = 0.0
    for sigma in (0.5, 1.0, 2.0, 5.0):
        for eta in (0.5, 1.0):
            for v in (0.8, 1.0):
                spec = GaussianMeterSpec(sigma=sigma, eta=eta)
                config = ExperimentConfig(
                    meter1=spec, meter2=spec, b_spec=ProjectiveMeterSpec(v=v), shots=1
                )
                worst = max(worst, abs(exact_mean(config) - config_analytic_mean(config)))
    checks.append(("closed form vs integration, gaussian grid", worst, 1e-6))

    worst = 0.0
    for v_total in (0.3, 0.6, 0.9):
        for u in (0.8, 1.0):
            for v in (0.8, 1.0):
                if v_total > u:
                    continue
                spec = AncillaMeterSpec(v_total=v_total, u=u)
                config = ExperimentConfig(
                    meter1=spec, meter2=spec, b_spec=ProjectiveMeterSpec(v=v), shots=1
                )
                worst = max(worst, abs(exact_mean(config) - config_analytic_mean(config)))
    checks.append(("closed form vs integration, ancilla grid", worst, 1e-6))

    basis = analyzer_basis(0.7)
    nodes, gh_weights = roots_hermite(200)
    keep = gh_weights > 0
    nodes, gh_weights = nodes[keep], gh_weights[keep]
    worst = 0.0
    for sigma in (0.5, 1.0, 2.0):
        alpha = np.sqrt(2.0) * sigma * nodes
        flat = np.sqrt(2.0) * sigma * np.exp(np.log(gh_weights) + nodes * nodes)
        total = np.zeros((2, 2), dtype=complex)
        for a, w in zip(alpha, flat):
            kraus = gaussian_kraus(a, sigma, basis)
            total += w * kraus.conj().T @ kraus
        worst = max(worst, float(np.max(np.abs(total - np.eye(2)))))
    checks.append(("gaussian meter completeness", worst, 1e-8))

    worst = 0.0
    for v_ent in (0.3, 0.9, 1.0):
        total = sum(
            ancilla_kraus(sign, v_ent, basis).conj().T @ ancilla_kraus(sign, v_ent, basis)
            for sign in (+1, -1)
        )
        worst = max(worst, float(np.max(np.abs(total - np.eye(2)))))
    checks.append(("ancilla meter completeness", worst, 1e-14))

    threshold_sigma = 1.0 / np.sqrt(-2.0 * np.log(threshold))
    spec = GaussianMeterSpec(sigma=float(threshold_sigma))
    config = ExperimentConfig(meter1=spec, meter2=spec, shots=1)
    checks.append(("bound crossing at the threshold width", abs(exact_mean(config) - 2.0), 1e-6))

    return checks


def cmd_verify(args: argparse.Namespace) -> int:
    checks = _verify_checks()
    all_ok = True
    width = max(len(name) for name, _, _ in checks)
    for name, deviation, tolerance in checks:
        ok = deviation < tolerance
        all_ok = all_ok and ok
        status = "PASS" if ok else "FAIL"
        print(f"{status}  {name:<{width}}  deviation={deviation:.3e}  tolerance={tolerance:.0e}")
    return EXIT_OK if all_ok else EXIT_NUMERICAL


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "simulate": cmd_simulate,
        "sweep": cmd_sweep,
        "lhv": cmd_lhv,
        "verify": cmd_verify,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
