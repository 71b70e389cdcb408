"""Command-line front end.

Every command resolves a config (file, then flag overrides), runs, and
writes its tables as CSV next to a JSON summary and a manifest. The
manifest holds the resolved config, so ``rerun`` reproduces the outputs
and checks their hashes.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np
import yaml

from . import __version__
from .classical import DivergenceError, integrate_classical, oscillation_metric, self_pulsing
from .correl import DegenerateInputError, scan_injected, witness_table
from .model import ConfigError, SystemParams, RunSettings, dump_config, parse_config
from .output import file_sha256, to_jsonable, write_csv, write_json
from .pplus import run_ensemble
from .presets import FIGURES, lookup
from .spectra import SpectrumError, spectrum_table
from .steady import (
    BranchDomainError,
    ConvergenceError,
    StabilityError,
    SteadyState,
    steady_above,
    steady_below,
    steady_injected,
    steady_state,
    threshold_pump,
)

log = logging.getLogger("cascade_opo")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PHYSICS = 3
EXIT_MISMATCH = 4

DEFAULT_CONFIG = {
    "gamma1": 1.0,
    "gamma2": 1.0,
    "gamma3": 1.0,
    "kappa1": 0.01,
    "kappa2": 0.01,
    "eps2_over_threshold": 0.9,
}

# flag -> config key; value parsers applied by argparse
_PHYSICS_FLAGS = {
    "gamma1": float,
    "gamma2": float,
    "gamma3": float,
    "kappa1": float,
    "kappa2": float,
    "eps1": "complex",
    "eps2": "complex",
    "eps2_over_threshold": float,
    "eps1_over_eps2": "complex",
}
_RUN_FLAGS = {
    "dt": float,
    "t_final": float,
    "n_traj": int,
    "seed": int,
    "sample_every": int,
    "omega_max": float,
    "omega_points": int,
    "divergence_bound": float,
    "discard_budget": float,
    "threads": int,
    "initial": "initial",
}
_EXCLUSIVE = {"eps2": "eps2_over_threshold", "eps2_over_threshold": "eps2",
              "eps1": "eps1_over_eps2", "eps1_over_eps2": "eps1"}


class PhysicsError(RuntimeError):
    """The requested computation is outside the model's valid domain."""


def _complex_arg(text: str) -> list[float]:
    text = text.strip().replace(" ", "")
    if "," in text:
        re_, im_ = text.split(",")
        return [float(re_), float(im_)]
    try:
        z = complex(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number or re,im pair: {text!r}") from None
    return [z.real, z.imag]


def _initial_arg(text: str) -> list[list[float]]:
    parts = text.split(";")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("initial needs three amplitudes separated by ';'")
    return [_complex_arg(p) for p in parts]


@dataclass
class Outcome:
    """What a command produced: CSV tables by file suffix, a JSON summary, console text."""

    tables: dict[str, dict[str, np.ndarray]] = field(default_factory=dict)
    summary: dict[str, Any] = field(default_factory=dict)
    text: str = ""


# ---------------------------------------------------------------- commands


def _pick_steady(params: SystemParams, branch: str) -> SteadyState:
    if branch == "auto":
        return steady_state(params)
    if branch == "below":
        return steady_below(params, enforce_domain=False)
    if branch == "above-plus":
        return steady_above(params, +1)
    if branch == "above-minus":
        return steady_above(params, -1)
    if branch == "injected":
        return steady_injected(params)
    raise ValueError(f"unknown branch {branch!r}")


def _require_stable(ss: SteadyState) -> None:
    if ss.stable:
        return
    worst = ss.eigenvalues[0]
    kind = "marginal" if ss.marginal else "unstable"
    raise PhysicsError(
        f"steady state on branch {ss.branch!r} is {kind}: drift eigenvalue "
        f"{worst.real:.6g}{worst.imag:+.6g}j has real part <= 0; spectra need a stable state"
    )


def _format_steady(params: SystemParams, ss: SteadyState) -> str:
    lines = [f"branch      {ss.branch}"]
    if params.kappa1 > 0:
        lines.append(f"threshold   {threshold_pump(params):.10g}")
    for i, (a, n) in enumerate(zip(ss.alpha, ss.intensities), start=1):
        lines.append(f"alpha{i}      {a.real:+.10g} {a.imag:+.10g}j    N{i} = {n:.10g}")
    lines.append("eigenvalues " + "  ".join(f"{e.real:.6g}{e.imag:+.6g}j" for e in ss.eigenvalues))
    lines.append(f"stable      {ss.stable}{' (marginal)' if ss.marginal else ''}")
    lines.append(f"residual    {ss.residual:.3g}")
    return "\n".join(lines)


def cmd_steady(params: SystemParams, settings: RunSettings, opts: dict) -> Outcome:
    ss = _pick_steady(params, opts.get("branch", "auto"))
    summary = {"threshold": threshold_pump(params) if params.kappa1 > 0 else None, **ss.to_dict()}
    if opts.get("format", "json") == "text":
        text = _format_steady(params, ss)
    else:
        text = json.dumps(to_jsonable(summary), indent=2)
    return Outcome(summary=summary, text=text)


def cmd_classical(params: SystemParams, settings: RunSettings, opts: dict) -> Outcome:
    traj = integrate_classical(params, settings.initial_state, settings.dt, settings.t_final,
                               sample_every=settings.sample_every)
    n_max, ratio = oscillation_metric(traj.times, traj.intensities[:, 1])
    summary = {
        "final_intensities": traj.intensities[-1],
        "late_maxima_N2": n_max,
        "late_peak_to_trough_N2": ratio,
        "self_pulsing": self_pulsing(traj.times, traj.intensities[:, 1]),
    }
    return Outcome({"": traj.columns()}, summary, f"classical run to t={settings.t_final:g}: "
                   f"final N = {np.array2string(traj.intensities[-1], precision=6)}")


def _ensemble(params, settings, initial=None):
    return run_ensemble(
        params, settings.n_traj, settings.dt, settings.t_final, settings.seed,
        initial=initial if initial is not None else settings.initial_state,
        sample_every=settings.sample_every, bound=settings.divergence_bound,
        discard_budget=settings.discard_budget, workers=settings.threads,
    )


def cmd_simulate(params: SystemParams, settings: RunSettings, opts: dict) -> Outcome:
    stats = _ensemble(params, settings)
    cols = stats.columns()
    summary = stats.summary()
    try:
        ss = steady_state(params)
        summary["steady_state_intensities"] = ss.intensities
        if opts.get("with_analytic"):
            for i in range(3):
                cols[f"N{i + 1}_ss"] = np.full(stats.times.shape, ss.intensities[i])
    except (BranchDomainError, ConvergenceError):
        pass
    text = (f"{stats.n_traj} trajectories ({stats.n_discarded} discarded), final mean N = "
            f"{np.array2string(stats.meanN[-1], precision=6)} +- {np.array2string(stats.stderrN[-1], precision=3)}")
    if not stats.valid:
        text += "\nWARNING: discard budget exceeded; run flagged invalid"
    return Outcome({"": cols}, summary, text)


def cmd_selfpulse(params: SystemParams, settings: RunSettings, opts: dict) -> Outcome:
    classical = integrate_classical(params, settings.initial_state, settings.dt, settings.t_final,
                                    sample_every=settings.sample_every)
    stats = _ensemble(params, settings)
    Nc = classical.intensities[:, 1]
    Nq = stats.meanN[:, 1]
    late = classical.times >= 20.0
    summary = {
        "classical": {"late_maxima": oscillation_metric(classical.times, Nc)[0],
                      "late_peak_to_trough": oscillation_metric(classical.times, Nc)[1],
                      "self_pulsing": self_pulsing(classical.times, Nc), "late_mean_N2": Nc[late].mean()},
        "quantum": {"late_maxima": oscillation_metric(stats.times, Nq)[0],
                    "late_peak_to_trough": oscillation_metric(stats.times, Nq)[1],
                    "self_pulsing": self_pulsing(stats.times, Nq), "late_mean_N2": Nq[stats.times >= 20.0].mean()},
        "ensemble": stats.summary(),
    }
    cols = {"t": stats.times, "N2_classical": Nc, "meanN2": Nq, "stderrN2": stats.stderrN[:, 1]}
    return Outcome({"": cols}, summary, json.dumps(to_jsonable(summary["classical"])) + "\n"
                   + json.dumps(to_jsonable(summary["quantum"])))


def _stable_state(params: SystemParams, opts: dict) -> SteadyState:
    ss = _pick_steady(params, opts.get("branch", "auto"))
    _require_stable(ss)
    return ss


def cmd_spectra(params: SystemParams, settings: RunSettings, opts: dict) -> Outcome:
    ss = _stable_state(params, opts)
    table = spectrum_table(params, ss, settings.omegas)
    summary = {"steady_state": ss.to_dict(), "failed_omegas": table.omegas[table.failed]}
    return Outcome({"": table.columns()}, summary, f"{table.omegas.size} frequencies, "
                   f"{int(table.failed.sum())} flagged")


def cmd_epr(params: SystemParams, settings: RunSettings, opts: dict) -> Outcome:
    ss = _stable_state(params, opts)
    wt = witness_table(params, settings.omegas, ss)
    minima = {f"EPR{i}{j}": wt.minimum(v) for (i, j), v in wt.epr.items()}
    summary = {"steady_state": ss.to_dict(), "min_over_omega": minima, "failed_omegas": wt.omegas[wt.failed]}
    text = "\n".join(f"min {k} = {v:.6g}" for k, v in minima.items())
    return Outcome({"": wt.epr_columns()}, summary, text)


def cmd_tripartite(params: SystemParams, settings: RunSettings, opts: dict) -> Outcome:
    ss = _stable_state(params, opts)
    wt = witness_table(params, settings.omegas, ss)
    cols = wt.tripartite_columns()
    minima = {k: float(np.nanmin(v)) for k, v in cols.items() if k != "omega" and not k.endswith("_sign")}
    summary = {"steady_state": ss.to_dict(), "min_over_omega": minima, "failed_omegas": wt.omegas[wt.failed]}
    text = "\n".join(f"min {k} = {v:.6g}" for k, v in minima.items())
    return Outcome({"": cols}, summary, text)


def cmd_scan_inject(params: SystemParams, settings: RunSettings, opts: dict) -> Outcome:
    if params.eps1 != 0:
        raise PhysicsError("scan-inject sets eps1 itself; do not pass eps1")
    fracs = np.linspace(0.0, opts.get("eps1_max_over_eps2", 0.2), opts.get("eps1_points", 21))
    result = scan_injected(params, fracs * abs(params.eps2), settings.omegas)
    cols = {"eps1_over_eps2": fracs, **result.columns()}
    summary = {"raw_minima": {f"EPR{i}{j}": v for (i, j), v in result.raw.items()},
               "errors": {str(k): v for k, v in result.errors.items()}}
    return Outcome({"": cols}, summary, f"{fracs.size} signal amplitudes, {len(result.errors)} failed")


COMMANDS: dict[str, Callable[[SystemParams, RunSettings, dict], Outcome]] = {
    "steady": cmd_steady,
    "classical": cmd_classical,
    "simulate": cmd_simulate,
    "selfpulse": cmd_selfpulse,
    "spectra": cmd_spectra,
    "epr": cmd_epr,
    "tripartite": cmd_tripartite,
    "scan-inject": cmd_scan_inject,
}


# ---------------------------------------------------------------- plumbing


def _flatten(doc: dict) -> dict:
    flat = {}
    for key, value in (doc or {}).items():
        if key in ("system", "run") and isinstance(value, dict):
            flat.update(value)
        else:
            flat[key] = value
    return flat


def _read_config_file(path: str) -> dict:
    doc = yaml.safe_load(Path(path).read_text()) or {}
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config must be a mapping")
    if "config" in doc and "subcommand" in doc:
        # a manifest
        doc = doc["config"]
    return _flatten(doc)


def resolve_config(args: argparse.Namespace, base: dict | None = None) -> tuple[SystemParams, RunSettings]:
    doc = dict(base if base is not None else DEFAULT_CONFIG)
    if getattr(args, "config", None):
        doc = _read_config_file(args.config)
    for key in list(_PHYSICS_FLAGS) + list(_RUN_FLAGS):
        value = getattr(args, key, None)
        if value is None:
            continue
        doc.pop(_EXCLUSIVE.get(key, ""), None)
        doc[key] = value
    return parse_config(doc)


def _stem(args: argparse.Namespace, subcommand: str) -> str:
    if getattr(args, "name", None):
        return args.name
    stamp = _dt.datetime.now().strftime("%Y%m%d-%H%M%S")
    return f"{subcommand}-{stamp}"


def execute(subcommand: str, params: SystemParams, settings: RunSettings, opts: dict,
            out_dir: Path, stem: str, argv: list[str] | None = None) -> tuple[Outcome, dict]:
    """Run one command and write its CSV, summary JSON and manifest."""
    out_dir.mkdir(parents=True, exist_ok=True)
    kind = opts.get("kind", subcommand)
    t0 = time.perf_counter()
    outcome = COMMANDS[kind](params, settings, opts)
    wall = time.perf_counter() - t0
    outputs = {}
    for suffix, cols in outcome.tables.items():
        path = write_csv(out_dir / f"{stem}{suffix}.csv", cols)
        outputs[path.name] = file_sha256(path)
    summary_path = write_json(out_dir / f"{stem}.json", outcome.summary)
    outputs[summary_path.name] = file_sha256(summary_path)
    manifest = {
        "subcommand": subcommand,
        "options": opts,
        "config": yaml.safe_load(dump_config(params, settings)),
        "seed": settings.seed,
        "version": __version__,
        "argv": argv,
        "created": _dt.datetime.now().isoformat(timespec="seconds"),
        "wall_seconds": wall,
        "outputs": outputs,
    }
    write_json(out_dir / f"{stem}.manifest.json", manifest)
    return outcome, manifest


def _add_common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("config")
    g.add_argument("--config", metavar="PATH", help="YAML/JSON config file or a previous run's manifest")
    g.add_argument("--out", metavar="DIR", default=".", help="output directory (default: current)")
    g.add_argument("--name", metavar="STEM", help="output file stem (default: <command>-<timestamp>)")
    g.add_argument("-v", "--verbose", action="store_true")
    phys = p.add_argument_group("physics overrides")
    for key, kind in _PHYSICS_FLAGS.items():
        flag = "--" + key.replace("_", "-")
        if kind == "complex":
            phys.add_argument(flag, dest=key, type=_complex_arg, metavar="X|RE,IM")
        else:
            phys.add_argument(flag, dest=key, type=kind)
    run = p.add_argument_group("run settings")
    for key, kind in _RUN_FLAGS.items():
        flag = "--" + key.replace("_", "-")
        if kind == "initial":
            run.add_argument(flag, dest=key, type=_initial_arg, metavar="A1;A2;A3",
                             help="initial amplitudes, each X or RE,IM")
        else:
            run.add_argument(flag, dest=key, type=kind)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cascade-opo",
        description="Steady states, positive-P dynamics and output correlations of a cascaded OPO/SHG cavity.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("steady", help="classical fixed point, eigenvalues and stability")
    _add_common(p)
    p.add_argument("--branch", default="auto", choices=["auto", "below", "above-plus", "above-minus", "injected"])
    p.add_argument("--format", default="json", choices=["json", "text"])

    for name, help_ in [("classical", "noise-free RK4 trajectory"),
                        ("simulate", "positive-P trajectory ensemble")]:
        p = sub.add_parser(name, help=help_)
        _add_common(p)

    for name, help_ in [("spectra", "output quadrature variances and covariances"),
                        ("epr", "squeezing and Reid EPR products for all ordered pairs"),
                        ("tripartite", "vLF combinations and OBR products")]:
        p = sub.add_parser(name, help=help_)
        _add_common(p)
        p.add_argument("--branch", default="auto", choices=["auto", "below", "above-plus", "above-minus", "injected"])

    p = sub.add_parser("scan-inject", help="minimum EPR products while scanning the injected signal")
    _add_common(p)
    p.add_argument("--eps1-max-over-eps2", type=float, default=0.2)
    p.add_argument("--eps1-points", type=int, default=21)

    p = sub.add_parser("reproduce-figure", help="data table for one preset figure")
    _add_common(p)
    p.add_argument("figure", help=f"figure number 1-{len(FIGURES)} or name")

    p = sub.add_parser("rerun", help="re-execute a manifest and compare output hashes")
    p.add_argument("manifest")
    p.add_argument("--out", metavar="DIR", help="output directory (default: <manifest dir>/rerun)")
    p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _options(args: argparse.Namespace) -> dict:
    opts = {}
    for key in ("branch", "format", "eps1_max_over_eps2", "eps1_points"):
        if hasattr(args, key):
            opts[key] = getattr(args, key)
    return opts


def _rerun(args: argparse.Namespace) -> int:
    manifest_path = Path(args.manifest)
    manifest = json.loads(manifest_path.read_text())
    params, settings = parse_config(manifest["config"])
    out_dir = Path(args.out) if args.out else manifest_path.parent / "rerun"
    stem = manifest_path.name[: -len(".manifest.json")]
    _, fresh = execute(manifest["subcommand"], params, settings, manifest["options"], out_dir, stem,
                       manifest.get("argv"))
    mismatched = [k for k, h in manifest["outputs"].items() if fresh["outputs"].get(k) != h]
    for k in manifest["outputs"]:
        print(f"{'MISMATCH' if k in mismatched else 'match   '} {k}")
    return EXIT_MISMATCH if mismatched else EXIT_OK


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.subcommand == "rerun":
            return _rerun(args)
        opts = _options(args)
        base = None
        subcommand = args.subcommand
        if subcommand == "reproduce-figure":
            number, preset = lookup(args.figure)
            base = preset["config"]
            opts = {**preset.get("options", {}), "kind": preset["kind"], "figure": number}
            if preset["kind"] == "simulate":
                opts["with_analytic"] = True
        params, settings = resolve_config(args, base)
        outcome, manifest = execute(subcommand, params, settings, opts, Path(args.out),
                                    _stem(args, subcommand if "figure" not in opts else f"figure{opts['figure']}"),
                                    argv)
    except (ConfigError, KeyError, FileNotFoundError, yaml.YAMLError) as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PhysicsError, BranchDomainError, ConvergenceError, StabilityError, SpectrumError,
            DegenerateInputError, DivergenceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PHYSICS
    if outcome.text:
        print(outcome.text)
    log.info("wrote %s", ", ".join(manifest["outputs"]))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
