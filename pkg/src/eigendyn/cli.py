"""Command-line front end.

Subcommands:
  validate  parse and validate a scenario file
  run       execute a scenario and write exports
  sweep     fan a scenario out over a parameter range
  oracle    compare analytic eigenvalue derivatives against finite
            differences (and ring spectra against the DFT formula)

Exit codes are a stable contract: 0 success, 2 validation failure,
3 runtime error, 4 oracle tolerance violation.  Diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import core, engine, models
from .engine import ScenarioConfig
from .errors import ConfigInvalid, EigendynError

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_RUNTIME = 3
EXIT_TOLERANCE = 4


def _fail(code: int, msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return code


def _parse_override_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _apply_override(raw: dict, key: str, value) -> None:
    """Set a dotted-key path; bare keys land in the model section."""
    parts = key.split(".") if "." in key else ["model", key]
    node = raw
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigInvalid(f"override {key}: {p} is not an object")
    node[parts[-1]] = value


def _load_config(args) -> ScenarioConfig:
    path = Path(args.scenario)
    if not path.exists():
        raise ConfigInvalid(f"scenario file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"{path}:{exc.lineno}: {exc.msg}") from exc
    for item in args.set or []:
        if "=" not in item:
            raise ConfigInvalid(f"--set expects key=value, got {item!r}")
        key, _, value = item.partition("=")
        _apply_override(raw, key, _parse_override_value(value))
    if getattr(args, "seed", None) is not None:
        raw["seed"] = args.seed
    if getattr(args, "format", None):
        raw.setdefault("output", {})["formats"] = [args.format]
    if getattr(args, "out", None):
        raw.setdefault("output", {})["dir"] = args.out
    return ScenarioConfig.from_dict(raw, base_dir=path.parent)


def _write_outputs(cfg: ScenarioConfig, record) -> list:
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for fmt in cfg.output_formats:
        target = out_dir / f"record.{fmt}"
        engine.export(record, fmt, target)
        written.append(target)
    return written


def cmd_validate(args) -> int:
    try:
        cfg = _load_config(args)
        trajectory = engine.build_trajectory(cfg)
        core.decompose(np.asarray(trajectory.value(cfg.t0), dtype=complex))
    except ConfigInvalid as exc:
        return _fail(EXIT_INVALID, str(exc))
    except EigendynError as exc:
        return _fail(EXIT_INVALID, str(exc))
    print(f"OK: model={cfg.model['type']} n={trajectory.n} "
          f"steps={cfg.steps} seed={cfg.seed}")
    return EXIT_OK


def cmd_run(args) -> int:
    try:
        cfg = _load_config(args)
    except ConfigInvalid as exc:
        return _fail(EXIT_INVALID, str(exc))
    try:
        record = engine.run_scenario(cfg)
        written = _write_outputs(cfg, record)
    except EigendynError as exc:
        return _fail(EXIT_RUNTIME, str(exc))
    for path in written:
        print(path)
    print(f"rows={len(record.rows)} events={len(record.events)} "
          f"hash={record.provenance['config_hash'][:12]}")
    return EXIT_OK


def _sweep_values(spec: str):
    key, _, rng = spec.partition("=")
    parts = rng.split(":")
    if len(parts) != 3:
        raise ConfigInvalid(f"sweep expects key=start:step:stop, got {spec!r}")
    start, step, stop = (float(p) for p in parts)
    if step == 0:
        raise ConfigInvalid("sweep step must be nonzero")
    count = int(round((stop - start) / step)) + 1
    if count < 1:
        raise ConfigInvalid("empty sweep range")
    return key, [start + i * step for i in range(count)]


def cmd_sweep(args) -> int:
    try:
        key, values = _sweep_values(args.range)
        base_cfg = _load_config(args)
    except ConfigInvalid as exc:
        return _fail(EXIT_INVALID, str(exc))
    out_root = Path(args.out or base_cfg.output_dir)
    failures = 0
    for value in values:
        sub_args = argparse.Namespace(
            scenario=args.scenario,
            set=(args.set or []) + [f"{key}={value:g}"],
            seed=args.seed,
            format=args.format,
            out=str(out_root / f"{key}={value:g}"),
        )
        try:
            cfg = _load_config(sub_args)
            record = engine.run_scenario(cfg)
            _write_outputs(cfg, record)
            print(f"{key}={value:g}: rows={len(record.rows)} "
                  f"events={len(record.events)}")
        except ConfigInvalid as exc:
            return _fail(EXIT_INVALID, f"{key}={value:g}: {exc}")
        except EigendynError as exc:
            print(f"error: {key}={value:g}: {exc}", file=sys.stderr)
            failures += 1
    return EXIT_RUNTIME if failures else EXIT_OK


def cmd_oracle(args) -> int:
    try:
        cfg = _load_config(args)
        trajectory = engine.build_trajectory(cfg)
    except ConfigInvalid as exc:
        return _fail(EXIT_INVALID, str(exc))

    vel_tol = args.tolerance
    acc_tol = args.tolerance * 100

    from .dynamics import eigen_acceleration, eigen_velocity

    span = cfg.t1 - cfg.t0
    times = [cfg.t0 + f * span for f in (0.2, 0.4, 0.6, 0.8)]
    d_vel, d_acc = 1e-4, 1e-3
    max_vel_err = 0.0
    max_acc_err = 0.0
    print(f"{'t':>10} {'j':>3} {'vel_rel_err':>14} {'acc_rel_err':>14}")
    try:
        for t in times:
            d0 = core.decompose(np.asarray(trajectory.value(t), dtype=complex))
            mdot = np.asarray(trajectory.first_derivative(t), dtype=complex)
            mddot = np.asarray(trajectory.second_derivative(t), dtype=complex)

            def matched_eigs(tq, ref):
                dq = core.decompose(np.asarray(trajectory.value(tq), dtype=complex))
                return dq.eigenvalues[core.match_paths(ref, dq).permutation]

            wm1 = matched_eigs(t - d_vel, d0)
            wp1 = matched_eigs(t + d_vel, d0)
            wm2 = matched_eigs(t - d_acc, d0)
            wp2 = matched_eigs(t + d_acc, d0)
            for j in range(d0.n):
                vel = eigen_velocity(d0, mdot, j)
                vel_fd = (wp1[j] - wm1[j]) / (2 * d_vel)
                acc = eigen_acceleration(d0, mdot, mddot, j).total
                acc_fd = (wp2[j] - 2 * d0.eigenvalues[j] + wm2[j]) / d_acc**2
                ev = abs(vel - vel_fd) / max(abs(vel_fd), 1e-12)
                ea = abs(acc - acc_fd) / max(abs(acc_fd), 1e-12)
                max_vel_err = max(max_vel_err, ev)
                max_acc_err = max(max_acc_err, ea)
                print(f"{t:>10.4g} {j:>3} {ev:>14.3e} {ea:>14.3e}")
    except EigendynError as exc:
        return _fail(EXIT_RUNTIME, str(exc))

    spectrum_err = None
    if cfg.model["type"] == "ring" and not any(
        np.asarray(cfg.model.get("fluctuations", []), dtype=float).ravel()
    ):
        ring = models.BiophysicalRing(
            n=int(cfg.model["sites"]),
            diffusion=float(cfg.model.get("diffusion", 1.0)),
            growth=float(cfg.model.get("growth", 0.0)),
            tilt=float(cfg.model.get("tilt", 0.0)),
        )
        analytic = np.sort_complex(models.omega_le_spectrum(ring))
        numeric = np.sort_complex(
            core.decompose(models.build_omega_le(ring)).eigenvalues
        )
        scale = max(np.max(np.abs(analytic)), 1.0)
        spectrum_err = float(np.max(np.abs(analytic - numeric)) / scale)
        print(f"ring DFT spectrum max scaled err: {spectrum_err:.3e}")

    print(f"max velocity rel err:     {max_vel_err:.3e} (tol {vel_tol:g})")
    print(f"max acceleration rel err: {max_acc_err:.3e} (tol {acc_tol:g})")
    ok = max_vel_err <= vel_tol and max_acc_err <= acc_tol
    if spectrum_err is not None:
        ok = ok and spectrum_err <= 1e-10
    if not ok:
        return _fail(EXIT_TOLERANCE, "oracle tolerance violated")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eigendyn",
        description="Eigenvalue dynamics scenarios: run, validate, sweep, oracle.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_run_flags=True):
        p.add_argument("--scenario", required=True, help="scenario JSON file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config key (dotted path; bare keys "
                            "target the model section); repeatable")
        if with_run_flags:
            p.add_argument("--seed", type=int, default=None,
                           help="override the scenario seed")
            p.add_argument("--out", default=None, help="output directory")
            p.add_argument("--format", choices=("csv", "json"), default=None,
                           help="restrict exports to one format")

    p_validate = sub.add_parser("validate", help="validate a scenario file")
    common(p_validate, with_run_flags=False)
    p_validate.set_defaults(func=cmd_validate)

    p_run = sub.add_parser("run", help="run a scenario and write exports")
    common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a scenario over a range")
    p_sweep.add_argument("range", metavar="KEY=START:STEP:STOP",
                         help="e.g. tilt=0:0.1:1")
    common(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep)

    p_oracle = sub.add_parser(
        "oracle",
        help="finite-difference and DFT spectrum checks for a scenario",
    )
    common(p_oracle, with_run_flags=False)
    p_oracle.add_argument("--tolerance", type=float, default=1e-6,
                          help="max relative error for velocities "
                               "(accelerations use 100x)")
    p_oracle.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except EigendynError as exc:
        return _fail(EXIT_RUNTIME, str(exc))


if __name__ == "__main__":
    sys.exit(main())
