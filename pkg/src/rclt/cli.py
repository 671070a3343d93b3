"""Command-line front end: configuration, orchestration, persistence.

An experiment is described by a JSON config file::

    {
      "schema": 1,
      "chain_spec": "chain.json",
      "observable": [1.0, -1.0],            # inline, a path, or omitted
      "commands": [
        "spectrum",
        {"command": "clt", "params": {"n": 2000, "m": 10000}}
      ],
      "master_seed": 20240611,
      "output_dir": "out"
    }

The chain definition file uses the fixed field names::

    {"kind": "kernel" | "random_walk" | "metropolis",
     "matrix": [[...]], "target": [...], "observable": [...]}

Each subcommand writes one JSON report (all versioned with "schema": 1)
and, where a sequence is produced, a CSV; ``run`` executes the config's
command list in order and writes a manifest last. Outputs are
byte-identical across reruns of the same config and master seed; manifests
differ only in their wall-clock timings.

Exit codes: 0 success, 2 config error, 3 numerical error, 4 statistical
acceptance failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .chain import (
    Observable,
    ReversibleChain,
    build_chain,
    build_metropolis,
    build_random_walk,
    derive_seed,
    project_mean_zero,
    sample_trajectory,
)
from .decomposition import decompose_trajectory
from .errors import ConfigError, NumericalError, RcltError, StatisticalFailure
from .limits import (
    SE_MULTIPLIER,
    clt_test,
    fclt_profile,
    maximal_inequality_check,
    uniform_integrability_diagnostic,
)
from .spectral import spectral_measure, variance_report

SCHEMA_VERSION = 1

COMMANDS = ("spectrum", "variance", "decompose", "clt", "fclt", "maximal", "ui-diagnostic")
#: subcommands that consume random streams and therefore need a master seed
SEEDED_COMMANDS = {"decompose", "clt", "fclt", "maximal", "ui-diagnostic"}

DEFAULT_PARAMS = {
    "spectrum": {},
    "variance": {"n_max": 1000},
    "decompose": {"length": 200, "horizon": None, "seed_index": 0},
    "clt": {"n": 2000, "m": 10000, "ks_threshold": 0.02},
    "fclt": {"n": 4000, "m": 10000, "grid": [0.25, 0.5, 0.75, 1.0]},
    "maximal": {
        "n": 6,
        "lambdas": [0.0, 0.5, 1.0],
        "mode": "forward",
        "exhaustive": True,
        "m": None,
        "two_sided": False,
    },
    "ui-diagnostic": {
        "n_list": [100, 1000],
        "epsilon_grid": [1.0, 2.0, 5.0, 10.0, 20.0],
        "m": 2000,
    },
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Loaded and validated experiment description."""

    chain_spec: Path
    chain_definition: dict
    observable: list[float] | None
    commands: list[tuple[str, dict]]
    master_seed: int | None
    output_dir: Path

    def effective_payload(self) -> dict:
        """Content that determines every output byte (output_dir excluded)."""
        return {
            "schema": SCHEMA_VERSION,
            "chain_definition": self.chain_definition,
            "observable": self.observable,
            "commands": [{"command": c, "params": p} for c, p in self.commands],
            "master_seed": self.master_seed,
        }

    def config_hash(self) -> str:
        canonical = json.dumps(self.effective_payload(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()


@dataclass
class RunManifest:
    """What a run produced: hash, version, files per command, timings."""

    config_hash: str
    version: str
    outputs: dict[str, list[str]] = field(default_factory=dict)
    timings: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "config_hash": self.config_hash,
            "version": self.version,
            "outputs": self.outputs,
            "timings": self.timings,
        }


# --- loading -----------------------------------------------------------------


def _read_json(path: Path) -> dict:
    try:
        with open(path) as handle:
            return json.load(handle)
    except FileNotFoundError as exc:
        raise ConfigError(f"file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc


def _normalize_commands(raw) -> list[tuple[str, dict]]:
    if raw is None:
        raise ConfigError("config is missing 'commands'")
    commands = []
    for entry in raw:
        if isinstance(entry, str):
            name, params = entry, {}
        elif isinstance(entry, dict) and "command" in entry:
            name = entry["command"]
            params = dict(entry.get("params", {}))
        else:
            raise ConfigError(f"unusable command entry: {entry!r}")
        if name not in COMMANDS:
            raise ConfigError(f"unknown subcommand {name!r}; known: {', '.join(COMMANDS)}")
        merged = dict(DEFAULT_PARAMS[name])
        merged.update(params)
        commands.append((name, merged))
    return commands


def _needs_seed(commands: list[tuple[str, dict]]) -> bool:
    for name, params in commands:
        if name in SEEDED_COMMANDS:
            if name == "maximal" and params.get("exhaustive", False):
                continue
            return True
    return False


def load_config(
    path, seed_override: int | None = None, out_override: str | None = None
) -> ExperimentConfig:
    """Load, path-resolve and structurally validate an experiment config."""
    path = Path(path)
    raw = _read_json(path)
    base = path.parent

    chain_spec = raw.get("chain_spec")
    if not chain_spec:
        raise ConfigError("config is missing 'chain_spec'")
    chain_path = (base / chain_spec).resolve()
    if not chain_path.exists():
        raise ConfigError(f"chain definition file does not exist: {chain_path}")
    chain_definition = _read_json(chain_path)

    observable = raw.get("observable")
    if isinstance(observable, str):
        obs_path = (base / observable).resolve()
        if not obs_path.exists():
            raise ConfigError(f"observable file does not exist: {obs_path}")
        observable = _read_json(obs_path)
    if observable is not None:
        if not isinstance(observable, list):
            raise ConfigError("observable must be a vector (or a path to a JSON vector)")
        observable = [float(v) for v in observable]

    commands = _normalize_commands(raw.get("commands"))
    master_seed = raw.get("master_seed")
    if seed_override is not None:
        master_seed = seed_override
    if master_seed is not None:
        master_seed = int(master_seed)
        if master_seed < 0:
            raise ConfigError("master_seed must be a nonnegative 64-bit integer")
    if master_seed is None and _needs_seed(commands):
        raise ConfigError("master_seed is required when a Monte Carlo subcommand is requested")

    output_dir = out_override if out_override is not None else raw.get("output_dir", "out")
    return ExperimentConfig(
        chain_spec=chain_path,
        chain_definition=chain_definition,
        observable=observable,
        commands=commands,
        master_seed=master_seed,
        output_dir=(base / output_dir).resolve(),
    )


def build_chain_from_definition(definition: dict) -> ReversibleChain:
    """Instantiate a chain from the fixed-schema definition dictionary."""
    kind = definition.get("kind")
    matrix = definition.get("matrix")
    if kind not in ("kernel", "random_walk", "metropolis"):
        raise ConfigError(f"chain 'kind' must be kernel|random_walk|metropolis, got {kind!r}")
    if matrix is None:
        raise ConfigError("chain definition is missing 'matrix'")
    if kind == "kernel":
        return build_chain(matrix)
    if kind == "random_walk":
        return build_random_walk(matrix)
    target = definition.get("target")
    if target is None:
        raise ConfigError("metropolis chain definition is missing 'target'")
    return build_metropolis(target, matrix)


def resolve_observable(config: ExperimentConfig, chain: ReversibleChain) -> Observable:
    """Pick the config observable (falling back to the chain file's) and center it."""
    raw = config.observable
    if raw is None:
        raw = config.chain_definition.get("observable")
    if raw is None:
        raise ConfigError("no observable given in config or chain definition")
    return project_mean_zero(np.asarray(raw, dtype=float), chain)


def save_chain_definition(path, chain: ReversibleChain, observable=None) -> None:
    """Write a chain back out in the definition-file schema."""
    payload = {"kind": "kernel", "matrix": [[float(v) for v in row] for row in chain.kernel]}
    if observable is not None:
        payload["observable"] = [float(v) for v in np.asarray(observable)]
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


# --- validation ----------------------------------------------------------------


def validate(config: ExperimentConfig) -> list[str]:
    """Dry-run diagnostics: chain admissibility, centering, degeneracy."""
    diagnostics: list[str] = []
    try:
        chain = build_chain_from_definition(config.chain_definition)
    except (RcltError, ValueError) as exc:
        diagnostics.append(f"chain not admissible: {exc}")
        return diagnostics

    raw = config.observable
    if raw is None:
        raw = config.chain_definition.get("observable")
    if raw is None:
        diagnostics.append("no observable given in config or chain definition")
        return diagnostics
    mean = float(np.dot(chain.stationary, np.asarray(raw, dtype=float)))
    if abs(mean) > 1e-12:
        diagnostics.append(f"observable auto-centered (stationary mean {mean:.6g})")
    f = project_mean_zero(np.asarray(raw, dtype=float), chain)

    wants_clt = any(name in ("clt", "fclt") for name, _ in config.commands)
    if wants_clt:
        rho = spectral_measure(chain, f)
        sigma2 = float(np.dot(rho.weights, (1.0 + rho.lambdas) / (1.0 - rho.lambdas)))
        if sigma2 <= 1e-8:
            diagnostics.append(f"degenerate variance: sigma2 = {sigma2:.6g}")
    return diagnostics


# --- persistence -----------------------------------------------------------------


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _csv_cell(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    value = float(value)
    return repr(value)


def _write_csv(path: Path, header: list[str], rows) -> None:
    lines = [f"# schema={SCHEMA_VERSION}", ",".join(header)]
    for row in rows:
        lines.append(",".join(_csv_cell(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


# --- command execution -------------------------------------------------------------


def _run_spectrum(config, chain, f, params, outdir, stem):
    rho = spectral_measure(chain, f)
    payload = {
        "schema": SCHEMA_VERSION,
        "command": "spectrum",
        "atoms": [[lam, w] for lam, w in rho.atoms()],
        "total_mass": rho.total_mass,
    }
    target = outdir / f"{stem}.json"
    _write_json(target, payload)
    return [target]


def _run_variance(config, chain, f, params, outdir, stem):
    report = variance_report(chain, f, n_max=int(params["n_max"]))
    rho = spectral_measure(chain, f)
    payload = {
        "schema": SCHEMA_VERSION,
        "command": "variance",
        "atoms": [[lam, w] for lam, w in rho.atoms()],
        **report.to_dict(),
    }
    json_path = outdir / f"{stem}.json"
    csv_path = outdir / f"{stem}.csv"
    _write_json(json_path, payload)
    _write_csv(csv_path, ["n", "var_over_n"], payload["var_over_n"])
    return [json_path, csv_path]


def _run_decompose(config, chain, f, params, outdir, stem):
    length = int(params["length"])
    horizon = params.get("horizon")
    traj_seed = derive_seed(config.master_seed, int(params.get("seed_index", 0)))
    traj = sample_trajectory(chain, f, length, traj_seed)
    terms = decompose_trajectory(chain, f, traj, horizon=None if horizon is None else int(horizon))
    payload = {
        "schema": SCHEMA_VERSION,
        "command": "decompose",
        "length": length,
        "horizon": terms.horizon,
        "trajectory_seed": traj_seed,
        "max_pair_residual": terms.max_pair_residual,
        "max_decomposition_residual": terms.max_decomposition_residual,
    }
    json_path = outdir / f"{stem}.json"
    csv_path = outdir / f"{stem}.csv"
    _write_json(json_path, payload)
    rows = []
    for k in range(length + 1):
        rows.append(
            [
                k,
                traj.observables[k],
                terms.forward_finite[k],
                terms.reversed_finite[k],
                terms.lookahead[k],
                terms.forward_limit[k],
                terms.reversed_limit[k],
                terms.pair_residual[k],
                terms.decomposition_residual[k],
            ]
        )
    _write_csv(
        csv_path,
        [
            "k",
            "x_k",
            "forward_increment",
            "reversed_increment",
            "lookahead",
            "forward_limit",
            "reversed_limit",
            "residual_pair",
            "residual_decomposition",
        ],
        rows,
    )
    return [json_path, csv_path]


def _run_clt(config, chain, f, params, outdir, stem):
    report = clt_test(
        chain,
        f,
        n=int(params["n"]),
        m=int(params["m"]),
        seed=config.master_seed,
        ks_threshold=float(params["ks_threshold"]),
    )
    passed = report.ks_statistic <= report.ks_threshold
    payload = {
        "schema": SCHEMA_VERSION,
        "command": "clt",
        "passed": bool(passed),
        **report.to_dict(),
    }
    json_path = outdir / f"{stem}.json"
    csv_path = outdir / f"{stem}.csv"
    _write_json(json_path, payload)
    _write_csv(
        csv_path,
        ["replica", "normalized_sum"],
        [[r, z] for r, z in enumerate(report.normalized_sums)],
    )
    if not passed:
        raise StatisticalFailure(
            f"clt: KS statistic {report.ks_statistic:.5f} exceeds threshold "
            f"{report.ks_threshold:.5f}"
        )
    return [json_path, csv_path]


def _run_fclt(config, chain, f, params, outdir, stem):
    report = fclt_profile(
        chain,
        f,
        n=int(params["n"]),
        m=int(params["m"]),
        grid=list(params["grid"]),
        seed=config.master_seed,
    )
    sigma2 = report.sigma2_used
    failures = []
    for t, var, se in report.variance_profile:
        if abs(var - sigma2 * t) > SE_MULTIPLIER * se + 1e-12:
            failures.append(f"Var at t={t}: {var:.5g} vs {sigma2 * t:.5g} (se {se:.3g})")
    for s, t, cov, se in report.covariance_profile:
        if abs(cov - sigma2 * min(s, t)) > SE_MULTIPLIER * se + 1e-12:
            failures.append(f"Cov at ({s},{t}): {cov:.5g} vs {sigma2 * min(s, t):.5g}")
    payload = {
        "schema": SCHEMA_VERSION,
        "command": "fclt",
        "passed": not failures,
        "failures": failures,
        **report.to_dict(),
    }
    json_path = outdir / f"{stem}.json"
    _write_json(json_path, payload)
    if failures:
        raise StatisticalFailure("fclt: " + "; ".join(failures))
    return [json_path]


def _run_maximal(config, chain, f, params, outdir, stem):
    report = maximal_inequality_check(
        chain,
        f,
        n=int(params["n"]),
        lambdas=[float(v) for v in params["lambdas"]],
        mode=str(params["mode"]),
        exhaustive=bool(params["exhaustive"]),
        m=None if params.get("m") is None else int(params["m"]),
        seed=config.master_seed,
        two_sided=bool(params["two_sided"]),
    )
    failures = []
    for entry in report.maximal_margins:
        if entry["lhs"] > entry["rhs"] + entry["slack"] + 1e-12:
            failures.append(
                f"lambda={entry['lambda']}: lhs {entry['lhs']:.6g} > rhs {entry['rhs']:.6g}"
            )
    payload = {
        "schema": SCHEMA_VERSION,
        "command": "maximal",
        "passed": not failures,
        "failures": failures,
        **report.to_dict(),
    }
    json_path = outdir / f"{stem}.json"
    _write_json(json_path, payload)
    if failures:
        raise StatisticalFailure("maximal: " + "; ".join(failures))
    return [json_path]


def _run_ui(config, chain, f, params, outdir, stem):
    report = uniform_integrability_diagnostic(
        chain,
        f,
        n_list=[int(v) for v in params["n_list"]],
        epsilon_grid=[float(v) for v in params["epsilon_grid"]],
        seed=config.master_seed,
        m=int(params["m"]),
    )
    payload = {"schema": SCHEMA_VERSION, "command": "ui-diagnostic", **report.to_dict()}
    json_path = outdir / f"{stem}.json"
    _write_json(json_path, payload)
    return [json_path]


_RUNNERS = {
    "spectrum": _run_spectrum,
    "variance": _run_variance,
    "decompose": _run_decompose,
    "clt": _run_clt,
    "fclt": _run_fclt,
    "maximal": _run_maximal,
    "ui-diagnostic": _run_ui,
}


def _output_stems(commands: list[tuple[str, dict]]) -> list[str]:
    seen: dict[str, int] = {}
    stems = []
    for name, _ in commands:
        seen[name] = seen.get(name, 0) + 1
        base = name.replace("-", "_")
        stems.append(base if seen[name] == 1 else f"{base}_{seen[name]}")
    return stems


def run(config: ExperimentConfig, only: str | None = None) -> RunManifest:
    """Execute the config's commands (or a single one) and write a manifest.

    On a module error, files already written by this invocation are
    removed before the error propagates; outputs of a statistical failure
    are complete reports and are kept.
    """
    commands = config.commands
    if only is not None:
        commands = [(n, p) for n, p in commands if n == only]
        if not commands:
            commands = [(only, dict(DEFAULT_PARAMS[only]))]
            if only in SEEDED_COMMANDS and config.master_seed is None:
                if not (only == "maximal" and commands[0][1].get("exhaustive", False)):
                    raise ConfigError(f"subcommand {only!r} needs a master_seed")

    chain = build_chain_from_definition(config.chain_definition)
    f = resolve_observable(config, chain)
    mean_raw = config.observable
    if mean_raw is None:
        mean_raw = config.chain_definition.get("observable")
    raw_mean = float(np.dot(chain.stationary, np.asarray(mean_raw, dtype=float)))
    if abs(raw_mean) > 1e-12:
        print(f"warning: observable auto-centered (stationary mean {raw_mean:.6g})", file=sys.stderr)

    config.output_dir.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(config_hash=config.config_hash(), version=__version__)
    written: list[Path] = []
    try:
        for (name, params), stem in zip(commands, _output_stems(commands)):
            start = time.perf_counter()
            files = _RUNNERS[name](config, chain, f, params, config.output_dir, stem)
            written.extend(files)
            manifest.outputs[stem] = [p.name for p in files]
            manifest.timings[stem] = time.perf_counter() - start
    except (NumericalError, ConfigError):
        for path in written:
            path.unlink(missing_ok=True)
        raise
    manifest_path = config.output_dir / "manifest.json"
    _write_json(manifest_path, manifest.to_dict())
    return manifest


# --- entry point ----------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rclt",
        description="Numerical laboratory for reversible Markov chain limit behavior.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in COMMANDS + ("run", "validate"):
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=True, help="experiment config JSON file")
        cmd.add_argument("--seed", type=int, default=None, help="override master seed")
        cmd.add_argument("--out", default=None, help="override output directory")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = load_config(args.config, seed_override=args.seed, out_override=args.out)
        if args.subcommand == "validate":
            for line in validate(config):
                print(line)
            return 0
        manifest = run(config, only=None if args.subcommand == "run" else args.subcommand)
        print(f"wrote {sum(len(v) for v in manifest.outputs.values())} file(s) "
              f"to {config.output_dir}")
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except StatisticalFailure as exc:
        print(f"statistical failure: {exc}", file=sys.stderr)
        return 4
    except (NumericalError, RcltError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
