"""Command line: ``sentinel generate|run|experiment <id>``.

Exit codes: 0 success, 1 runtime failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import math
import os
import sys
from pathlib import Path
from typing import Any, Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .core import GaussianSpec, RngHandle, SensingTask, SpatialUnit, stream_id
from .experiments import (
    EXPERIMENTS,
    SWEEP_HP,
    ExperimentConfig,
    default_config,
    run_drift_demo,
    run_experiment,
    write_results,
)
from .ingest import Dataset, FeatureSpace, atomic_write_text, load_csv, write_csv
from .learn import HyperParams
from .metrics import confusion, rates
from .synth import AdversaryProfile, PopulationConfig, generate_stream
from .verify import PipelineConfig, bootstrap, run_stream, write_event_log

log = logging.getLogger("sentinel")

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2
LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO,
              "debug": logging.DEBUG}

REQUIRED = object()

# section -> key -> (accepted types, default)
SCHEMA: dict[str, dict[str, tuple]] = {
    "": {"seed": ((int,), 0), "jobs": ((int,), None)},
    "task": {"phenomenon": ((str,), "velocity"), "n": ((int,), 10)},
    "legit_spec": {"mu": ((int, float), REQUIRED), "sigma": ((int, float), REQUIRED)},
    "population": {"n_users": ((int,), 250), "ticks": ((int,), 4)},
    "adversary": {
        "fraction": ((int, float), 0.0),
        "strategy": ((str,), "static-case-1"),
        "mu": ((int, float), None),
        "sigma": ((int, float), None),
        "delta": ((int, float), 0.0),
        "target": ((int, float), math.inf),
        "noise_sigma": ((int, float), None),
    },
    "dataset": {"path": ((str,), None)},
    "pipeline": {
        "theta": ((int, float), 1.5),
        "window": ((int,), 50),
        "alpha": ((int, float), 0.05),
        "buffer_factor": ((int,), 4),
        "min_pts": ((int,), 4),
        "eps_rule": ((str, int, float), "chord"),
        "active_variant": ((str,), "SVM"),
        "variants": ((list,), None),
        "bootstrap_ticks": ((int,), 1),
        "bins": ((int,), 10),
    },
    "hp": {f.name: ((int, float, bool), f.default) for f in dataclasses.fields(HyperParams)},
    "experiment": {
        name: ((list,) if name in ("fractions", "adv_mus", "adv_sigmas", "levels", "variants",
                                   "thetas") else (int, float, str), None)
        for name in ("repetitions", "fractions", "adv_mus", "adv_sigmas", "levels", "variants",
                     "thetas", "n_users", "ticks", "eps_rule", "min_pts", "folds", "window",
                     "alpha", "buffer_factor", "active_variant", "stream_users", "stream_ticks",
                     "bootstrap_ticks", "drift_rate", "drift_ticks", "attack_fraction",
                     "attack_delta", "attack_target", "hazard_theta")
    },
}


class ConfigError(Exception):
    """Invalid configuration; maps to exit code 2."""


@dataclasses.dataclass
class LoadedConfig:
    path: Optional[Path]
    raw: bytes
    values: dict  # section -> key -> value with defaults filled in
    present: set  # "section.key" names given explicitly

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.raw).hexdigest()

    def get(self, section: str, key: str):
        return self.values[section][key]

    def has(self, section: str, key: str) -> bool:
        return f"{section}.{key}".lstrip(".") in self.present


def _line_of(text: str, section: str, key: str) -> Optional[int]:
    """Best-effort line number of ``key`` inside ``[section]`` for error messages."""
    current = ""
    for no, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if stripped.startswith("[") and stripped.endswith("]"):
            current = stripped.strip("[] ")
        elif current == section and stripped.split("=", 1)[0].strip() == key:
            return no
    return None


def _where(path: Optional[Path], text: str, section: str, key: str) -> str:
    line = _line_of(text, section, key)
    loc = str(path) if path else "<config>"
    return f"{loc}:{line}" if line else loc


def load_config(path: Optional[str | os.PathLike], required: tuple[str, ...] = ()) -> LoadedConfig:
    """Parse and validate a TOML config; ``required`` lists "section.key" names."""
    if path is None:
        raw, text, p = b"", "", None
    else:
        p = Path(path)
        try:
            raw = p.read_bytes()
        except OSError as exc:
            raise ConfigError(f"cannot read config {p}: {exc.strerror or exc}") from None
        text = raw.decode("utf-8", errors="replace")
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{p}: {exc}") from None

    values: dict[str, dict[str, Any]] = {}
    present: set[str] = set()
    top = {k: v for k, v in doc.items() if not isinstance(v, dict)}
    tables = {k: v for k, v in doc.items() if isinstance(v, dict)}
    for name in tables:
        if name not in SCHEMA:
            raise ConfigError(f"{_where(p, text, '', name)}: unknown section [{name}]")
    for section, keys in SCHEMA.items():
        given = top if section == "" else tables.get(section, {})
        out = {}
        for key, value in given.items():
            dotted = f"{section}.{key}".lstrip(".")
            if key not in keys:
                raise ConfigError(f"{_where(p, text, section, key)}: unknown key '{dotted}'")
            types = keys[key][0]
            if isinstance(value, bool) and bool not in types:
                types = ()
            if not isinstance(value, types):
                raise ConfigError(
                    f"{_where(p, text, section, key)}: key '{dotted}' has invalid value {value!r}"
                )
            out[key] = value
            present.add(dotted)
        for key, (_, default) in keys.items():
            out.setdefault(key, default)
        values[section] = out
    for dotted in required:
        if dotted not in present:
            raise ConfigError(f"{p or '<config>'}: missing required key '{dotted}'")
    return LoadedConfig(p, raw, values, present)


# --- building domain objects from config ----------------------------------------


def _guard(fn, what: str):
    try:
        return fn()
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid {what}: {exc}") from None


def task_from(cfg: LoadedConfig) -> SensingTask:
    for key in ("mu", "sigma"):
        if cfg.get("legit_spec", key) is REQUIRED:
            raise ConfigError(f"{cfg.path or '<config>'}: missing required key 'legit_spec.{key}'")
    legit = _guard(lambda: GaussianSpec(float(cfg.get("legit_spec", "mu")),
                                        float(cfg.get("legit_spec", "sigma"))), "legit_spec")
    return _guard(lambda: SensingTask(cfg.get("task", "phenomenon"), cfg.get("task", "n"),
                                      (SpatialUnit("u0", (0.0, 0.0, 1000.0, 1000.0)),), legit),
                  "task")


def population_from(cfg: LoadedConfig, task: SensingTask) -> PopulationConfig:
    a = cfg.values["adversary"]

    def build():
        adv_spec = None
        if a["mu"] is not None or a["sigma"] is not None:
            if a["mu"] is None or a["sigma"] is None:
                raise ValueError("adversary.mu and adversary.sigma must be given together")
            adv_spec = GaussianSpec(float(a["mu"]), float(a["sigma"]))
        profile = AdversaryProfile(float(a["fraction"]), a["strategy"], adv_spec,
                                   float(a["delta"]), float(a["target"]), a["noise_sigma"])
        pop = cfg.values["population"]
        return PopulationConfig(pop["n_users"], pop["ticks"], task, profile)

    return _guard(build, "population/adversary")


def hp_from(cfg: LoadedConfig) -> HyperParams:
    return _guard(lambda: HyperParams(**cfg.values["hp"]), "hp")


def _eps_rule(value):
    return value if isinstance(value, str) else float(value)


def pipeline_from(cfg: LoadedConfig, task: SensingTask) -> tuple[PipelineConfig, int]:
    p = cfg.values["pipeline"]
    legit = task.legit_spec

    def build():
        variants = p["variants"] or [p["active_variant"]]
        fs = FeatureSpace.for_spec(legit, bins=p["bins"])
        return PipelineConfig(fs, legit.sigma, tuple(variants), p["active_variant"], hp_from(cfg),
                              p["min_pts"], _eps_rule(p["eps_rule"]), float(p["theta"]),
                              p["window"], p["buffer_factor"], float(p["alpha"]))

    if p["bootstrap_ticks"] < 1:
        raise ConfigError("pipeline.bootstrap_ticks must be >= 1")
    return _guard(build, "pipeline"), p["bootstrap_ticks"]


def experiment_from(cfg: LoadedConfig, exp_id: str, seed: int, jobs: int) -> ExperimentConfig:
    overrides: dict[str, Any] = {"seed": seed, "jobs": jobs}
    for key, value in cfg.values["experiment"].items():
        if value is None:
            continue
        overrides[key] = tuple(value) if isinstance(value, list) else value
    if "eps_rule" in overrides:
        overrides["eps_rule"] = _eps_rule(overrides["eps_rule"])
    if cfg.has("legit_spec", "mu") or cfg.has("legit_spec", "sigma"):
        overrides["legit"] = task_from(cfg).legit_spec
    if cfg.has("task", "n"):
        overrides["n_values"] = cfg.get("task", "n")
    given_hp = {k: v for k, v in cfg.values["hp"].items() if cfg.has("hp", k)}
    if given_hp:
        overrides["hp"] = _guard(lambda: dataclasses.replace(SWEEP_HP, **given_hp), "hp")
    return _guard(lambda: default_config(exp_id, **overrides), "experiment")


# --- commands -----------------------------------------------------------------


def _resolved(cfg: LoadedConfig) -> dict:
    def clean(v):
        if isinstance(v, float) and not math.isfinite(v):
            return str(v)
        return v

    return {s: {k: clean(v) for k, v in kv.items()} for s, kv in cfg.values.items()}


def write_manifest(out: Path, cfg: LoadedConfig, command: str, seed: int, extra=None) -> Path:
    manifest = {
        "command": command,
        "config_path": str(cfg.path) if cfg.path else None,
        "config_sha256": cfg.sha256,
        "output_dir": str(out),
        "seed": seed,
        "version": __version__,
        "resolved_config": _resolved(cfg),
    }
    if extra:
        manifest.update(extra)
    path = out / "manifest.json"
    atomic_write_text(path, json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")
    return path


def _seed(cfg: LoadedConfig, args) -> int:
    seed = cfg.get("", "seed") if args.seed is None else args.seed
    if seed < 0:
        raise ConfigError("seed must be non-negative")
    return seed


def cmd_generate(args) -> int:
    cfg = load_config(args.config, required=("legit_spec.mu", "legit_spec.sigma"))
    seed = _seed(cfg, args)
    task = task_from(cfg)
    pop = population_from(cfg, task)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(out, cfg, "generate", seed)
    records = generate_stream(pop, RngHandle(seed, stream_id("generate")))
    path = out / "dataset.csv"
    write_csv(Dataset(task, records), path)
    log.info("wrote %d reports to %s", len(records), path)
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = load_config(args.config, required=("legit_spec.mu", "legit_spec.sigma"))
    seed = _seed(cfg, args)
    task = task_from(cfg)
    pcfg, boot_ticks = pipeline_from(cfg, task)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(out, cfg, "run", seed)

    data_path = cfg.get("dataset", "path")
    if data_path:
        base = cfg.path.parent if cfg.path else Path.cwd()
        dataset = load_csv(base / data_path, task)
        records = dataset.records
    else:
        records = generate_stream(population_from(cfg, task), RngHandle(seed, stream_id("generate")))
    ticks = sorted({r.tick for r, _ in records})
    cutoff = set(ticks[:boot_ticks])
    boot = [r for r, _ in records if r.tick in cutoff]
    stream = [(r, lab) for r, lab in records if r.tick not in cutoff]
    log.info("bootstrapping on %d reports, streaming %d", len(boot), len(stream))

    state = bootstrap(boot, pcfg, RngHandle(seed, stream_id("run", "bootstrap")))
    state, events = run_stream(state, stream, RngHandle(seed, stream_id("run", "recluster")))
    write_event_log(events, out / "events.ndjson")

    metrics: dict[str, Any] = {
        "bootstrap_reports": len(boot),
        "streamed_reports": len(stream),
        "retrains": sum(e.retrain for e in events),
        "final_perception": state.monitor.perception,
    }
    if stream and all(lab is not None for _, lab in stream):
        cm = confusion([e.predicted_label for e in events], [lab for _, lab in stream])
        metrics["confusion"] = cm.to_dict()
        metrics["rates"] = rates(cm)
    atomic_write_text(out / "metrics.json", json.dumps(metrics, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_experiment(args) -> int:
    if args.id not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment id '{args.id}'; valid ids: {', '.join(EXPERIMENTS)}")
    cfg = load_config(args.config)
    seed = _seed(cfg, args)
    jobs = args.jobs or cfg.get("", "jobs") or os.cpu_count() or 1
    config = experiment_from(cfg, args.id, seed, jobs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    # jobs only affects scheduling, never results, so it stays out of the manifest
    echoed = {k: v for k, v in config.to_dict().items() if k != "jobs"}
    write_manifest(out, cfg, f"experiment {args.id}", seed,
                   {"experiment_config": json.loads(json.dumps(echoed, default=str))})
    if args.id == "drift-demo":
        records, runs = run_drift_demo(config)
        events_dir = out / "events"
        events_dir.mkdir(exist_ok=True)
        for run in runs:
            rep = run.seed - config.seed
            write_event_log(run.events, events_dir / f"{run.scenario}_theta{run.theta}_rep{rep}.ndjson")
    else:
        records = run_experiment(config)
    csv_path, json_path = write_results(records, out, args.id)
    log.info("wrote %s and %s", csv_path, json_path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sentinel",
                                     description="Crowd-sensing report verification toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="TOML configuration file")
        p.add_argument("--out", default=".", help="output directory (default: current)")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--jobs", type=int, help="worker processes for grid points")

    common(sub.add_parser("generate", help="write a labelled synthetic dataset"))
    common(sub.add_parser("run", help="bootstrap, stream and check drift on one dataset"))
    exp = sub.add_parser("experiment", help="run a named sweep")
    exp.add_argument("id", help=f"one of: {', '.join(EXPERIMENTS)}")
    common(exp, config_required=False)
    return parser


def _setup_logging() -> None:
    level_name = os.environ.get("SENTINEL_LOG", "warn").lower()
    level = LOG_LEVELS.get(level_name)
    logging.basicConfig(level=level or logging.WARNING, format="sentinel: %(levelname)s: %(message)s",
                        stream=sys.stderr)
    if level is None:
        log.warning("ignoring SENTINEL_LOG=%r; expected one of %s", level_name, ", ".join(LOG_LEVELS))


def main(argv: Optional[list[str]] = None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    if args.jobs is not None and args.jobs < 1:
        print("sentinel: error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    handler = {"generate": cmd_generate, "run": cmd_run, "experiment": cmd_experiment}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"sentinel: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"sentinel: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
