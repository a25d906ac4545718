"""
Command-line entry point.

    python -m app run [config.json] --experiments 10 --agents 4 --rounds 9 --seed 1 --out out/run
    python -m app sweep --trials 300 --out out/sweep
    python -m app robots [robots.json] --planner llm --base-url http://127.0.0.1:8765/v1 --out out/robots
    python -m app analyze out/run/records.jsonl --eps 1e-6 --gap 5 --window 4 --out out/analysis
    python -m app serve-mock --port 8765

Exit status is 0 when every requested experiment completed, 1 when a run
stopped early and 2 on invalid input. Every output directory gets its
manifest.json before anything else and carries an INCOMPLETE marker until the
command finishes.
"""
from __future__ import annotations

import argparse
import json
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Type, TypeVar

import structlog
from pydantic import BaseModel, ValidationError

from app import __version__
from app.core import metrics
from app.core.errors import ConfigError, ConsensusError
from app.core.logging import configure_logging
from app.core.sentry import init_sentry
from app.core.settings import get_settings
from app.models.models import (
    ChatEndpointSpec,
    ExperimentConfig,
    LLMAgentSpec,
    RobotsConfig,
    RunManifest,
    StrategyKind,
    StrategySpec,
)
from app.repositories.records_repo import RecordsRepository, read_records
from app.services import aggregation, analysis
from app.services.engine import iter_batch
from app.services.sweep import DEFAULT_AGENT_COUNTS, DEFAULT_TRIALS, PROFILE_TEMPERATURES, profile_eps, sweep_configs

logger = structlog.get_logger(__name__)

M = TypeVar("M", bound=BaseModel)

EXIT_OK = 0
EXIT_INCOMPLETE = 1
EXIT_INVALID = 2


def load_config(path: Optional[str], model: Type[M], overrides: Optional[Callable[[Dict[str, Any]], None]] = None) -> M:
    """Parse a JSON config file into ``model``; invalid input raises ConfigError with per-field lines."""
    raw: Dict[str, Any] = {}
    if path:
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as e:
            raise ConfigError(f"cannot read config {path}", [f"{path}: {e.strerror}"]) from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"invalid JSON in {path}", [f"{path}:{e.lineno}:{e.colno}: {e.msg}"]) from e
        if not isinstance(raw, dict):
            raise ConfigError(f"invalid config {path}", [f"{path}: top level must be a JSON object"])
    if overrides is not None:
        overrides(raw)
    try:
        return model.model_validate(raw)
    except ValidationError as e:
        raise ConfigError.from_validation(e, path or "arguments") from e


def _resize_agents(raw: Dict[str, Any], n_a: int) -> None:
    """Apply --agents to a raw config: homogeneous populations are re-expanded, builders resized."""
    raw["n_a"] = n_a
    population = raw.get("population")
    agents = raw.get("agents")
    if population:
        if len(population) != 1:
            raise ConfigError("--agents needs a homogeneous population", ["population: more than one entry"])
        population[0]["count"] = n_a
    elif agents:
        if any(a != agents[0] for a in agents):
            raise ConfigError("--agents needs a homogeneous population", ["agents: entries differ"])
        raw["agents"] = [agents[0]] * n_a
    else:
        raw["agents"] = [StrategySpec().model_dump(mode="json")] * n_a
    topology = raw.get("topology")
    if isinstance(topology, dict) and topology.get("builder", "full") in ("full", "chain", "leader_follower"):
        topology["n"] = n_a
    raw.pop("init_states", None)


def experiment_overrides(args: argparse.Namespace) -> Callable[[Dict[str, Any]], None]:
    def apply(raw: Dict[str, Any]) -> None:
        if args.agents is not None:
            _resize_agents(raw, args.agents)
        elif "n_a" not in raw:
            if raw.get("agents"):
                raw["n_a"] = len(raw["agents"])
            elif raw.get("population"):
                raw["n_a"] = sum(int(p.get("count", 0)) for p in raw["population"])
            else:
                _resize_agents(raw, 2)
        if args.experiments is not None:
            raw["n_e"] = args.experiments
        if args.rounds is not None:
            raw["n_r"] = args.rounds
        if args.seed is not None:
            raw["seed"] = args.seed
        if getattr(args, "base_url", None):
            endpoint = dict(raw.get("llm_endpoint") or ChatEndpointSpec.from_settings().model_dump())
            endpoint["base_url"] = args.base_url
            raw["llm_endpoint"] = endpoint
    return apply


def default_eps(config: ExperimentConfig) -> float:
    """Exact threshold for noiseless strategy runs, loose threshold for anything stochastic."""
    settings = get_settings()
    exact = all(
        isinstance(a, StrategySpec) and a.noise_sigma == 0 and a.kind != StrategyKind.ERRONEOUS
        for a in config.agents
    )
    return settings.eps_exact if exact else settings.eps_noisy


def _manifest(command: str, args: argparse.Namespace, parameters: dict, seed: Optional[int],
              requested: Optional[int] = None) -> RunManifest:
    return RunManifest(
        command=command,
        config_path=getattr(args, "config", None),
        output_dir=str(args.out),
        parameters=parameters,
        seed=seed,
        tool_version=__version__,
        timestamp=datetime.now(timezone.utc).isoformat().replace("+00:00", "Z"),
        requested=requested,
    )


def _finish(repo: RecordsRepository, manifest: RunManifest, completed: int, fallbacks: int) -> int:
    ok = manifest.requested is None or completed == manifest.requested
    final = manifest.model_copy(update={
        "completed": completed,
        "fallbacks": fallbacks,
        "status": "completed" if ok else "incomplete",
        "metrics": metrics.snapshot(),
    })
    repo.write_manifest(final)
    if ok:
        repo.clear_incomplete()
    return EXIT_OK if ok else EXIT_INCOMPLETE


def cmd_run(args: argparse.Namespace) -> int:
    config = load_config(args.config, ExperimentConfig, experiment_overrides(args))
    get_settings().validate_startup(uses_llm=config.uses_llm())
    repo = RecordsRepository(args.out)
    manifest = _manifest("run", args, config.model_dump(mode="json"), config.seed, requested=config.n_e)
    repo.write_manifest(manifest)
    repo.mark_incomplete("run in progress")
    repo.reset_records()

    eps = args.eps if args.eps is not None else default_eps(config)
    records, reports = [], []
    for record in iter_batch(config, jobs=args.jobs):
        repo.append_record(record)
        records.append(record)
        reports.append(analysis.detect_consensus(record, eps))
    repo.write_csv("summary.csv", analysis.convergence_frame(records, reports))
    fallbacks = sum(r.fallbacks for r in records)
    logger.info("run_finished", experiments=len(records), fallbacks=fallbacks, out=str(args.out))
    return _finish(repo, manifest, len(records), fallbacks)


def cmd_sweep(args: argparse.Namespace) -> int:
    endpoint = ChatEndpointSpec.from_settings(base_url=args.base_url) if args.backend == "llm" else None
    configs = sweep_configs(
        agent_counts=args.agent_counts,
        profiles=args.profiles,
        trials=args.trials,
        rounds=args.rounds,
        seed=args.seed,
        backend=args.backend,
        llm_endpoint=endpoint,
    )
    get_settings().validate_startup(uses_llm=args.backend == "llm")
    repo = RecordsRepository(args.out)
    parameters = {
        "agent_counts": list(args.agent_counts),
        "profiles": list(args.profiles),
        "trials": args.trials,
        "rounds": args.rounds,
        "backend": args.backend,
    }
    manifest = _manifest("sweep", args, parameters, args.seed, requested=sum(c.n_e for c in configs))
    repo.write_manifest(manifest)
    repo.mark_incomplete("sweep in progress")
    repo.reset_records()

    records = []
    for config in configs:
        for record in iter_batch(config, jobs=args.jobs):
            repo.append_record(record)
            records.append(record)
        logger.info("sweep_group_finished", n_a=config.n_a, profile=config.group.noise_profile)
    summaries = analysis.summarize(analysis.group_records(records), profile_eps)
    repo.write_csv("summary.csv", analysis.summary_frame(summaries))
    repo.write_json("summary.json", summaries)
    return _finish(repo, manifest, len(records), sum(r.fallbacks for r in records))


def robots_overrides(args: argparse.Namespace) -> Callable[[Dict[str, Any]], None]:
    def apply(raw: Dict[str, Any]) -> None:
        if args.seed is not None:
            raw["seed"] = args.seed
        if args.planner == "llm":
            raw["planner"] = LLMAgentSpec(temperature=0.0).model_dump(mode="json")
            raw.pop("planners", None)
        elif args.planner == "average":
            raw["planner"] = StrategySpec().model_dump(mode="json")
            raw.pop("planners", None)
        if args.base_url:
            endpoint = dict(raw.get("llm_endpoint") or ChatEndpointSpec.from_settings().model_dump())
            endpoint["base_url"] = args.base_url
            raw["llm_endpoint"] = endpoint
    return apply


def cmd_robots(args: argparse.Namespace) -> int:
    config = load_config(args.config, RobotsConfig, robots_overrides(args))
    get_settings().validate_startup(uses_llm=config.llm_endpoint is not None)
    repo = RecordsRepository(args.out)
    manifest = _manifest("robots", args, config.model_dump(mode="json"), config.seed, requested=1)
    repo.write_manifest(manifest)
    repo.mark_incomplete("simulation in progress")

    samples = aggregation.run_aggregation(config)
    repo.write_csv("trajectory.csv", aggregation.trajectory_frame(samples))
    repo.reset_records("trajectory.jsonl")
    repo.append_samples(samples)
    fallbacks = sum(metrics.snapshot()["fallbacks"].values())
    return _finish(repo, manifest, 1, fallbacks)


def cmd_analyze(args: argparse.Namespace) -> int:
    settings = get_settings()
    eps = args.eps if args.eps is not None else settings.eps_exact
    tolerance = args.tolerance if args.tolerance is not None else (0.0 if eps <= settings.eps_exact else settings.osc_tolerance)
    problems = []
    if eps <= 0:
        problems.append(f"--eps: must be > 0, got {eps}")
    if not eps < args.gap:
        problems.append(f"--eps: {eps} must be below --gap {args.gap}")
    if args.window < analysis.MIN_OSCILLATION_ROUNDS:
        problems.append(f"--window: must be >= {analysis.MIN_OSCILLATION_ROUNDS}, got {args.window}")
    if problems:
        raise ConfigError("invalid analysis parameters", problems)
    records = list(read_records(args.records))
    repo = RecordsRepository(args.out)
    parameters = {"records": str(args.records), "eps": eps, "gap": args.gap, "window": args.window, "tolerance": tolerance}
    manifest = _manifest("analyze", args, parameters, None)
    repo.write_manifest(manifest)
    repo.mark_incomplete("analysis in progress")

    if not records:
        print(f"no records in {args.records}")
    reports = [analysis.detect_consensus(r, eps) for r in records]
    summaries = analysis.summarize(analysis.group_records(records), eps)
    repo.write_csv("summary.csv", analysis.summary_frame(summaries))
    repo.write_csv("convergence.csv", analysis.convergence_frame(records, reports))
    repo.write_csv("trajectories.csv", analysis.trajectory_frame(records))
    repo.write_json("oscillations.json", [analysis.detect_oscillation(r, args.window, tolerance) for r in records])
    repo.write_json("clusters.json", [
        {"experiment": r.experiment, **analysis.detect_clusters(r.final_states, eps, args.gap).model_dump(mode="json")}
        for r in records
    ])
    for rep in reports:
        print(f"experiment {rep.experiment}: consensus={rep.consensus} round={rep.convergence_round} "
              f"spread={rep.final_spread:.6g}")
    return _finish(repo, manifest, len(records), sum(r.fallbacks for r in records))


def cmd_serve_mock(args: argparse.Namespace) -> int:
    import uvicorn

    settings = get_settings()
    uvicorn.run("app.main:create_app", factory=True,
                host=args.host or settings.mock_host, port=args.port or settings.mock_port, log_config=None)
    return EXIT_OK


def _int_list(text: str) -> List[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _profile_list(text: str) -> List[str]:
    profiles = [v.strip() for v in text.split(",") if v.strip()]
    unknown = [p for p in profiles if p not in PROFILE_TEMPERATURES]
    if unknown:
        raise argparse.ArgumentTypeError(f"unknown profiles {unknown}; known: {sorted(PROFILE_TEMPERATURES)}")
    return profiles


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="consensus", description="LLM-driven multi-agent consensus simulator.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default=None, help="Overrides LOG_LEVEL.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run a batch of consensus experiments.")
    run.add_argument("config", nargs="?", help="Experiment config JSON (default: average agents, full topology).")
    run.add_argument("--experiments", type=int, help="Number of experiments (n_e).")
    run.add_argument("--agents", type=int, help="Number of agents (n_a).")
    run.add_argument("--rounds", type=int, help="Number of rounds (n_r).")
    run.add_argument("--seed", type=int)
    run.add_argument("--jobs", type=int, default=1, help="Experiments run concurrently.")
    run.add_argument("--base-url", help="Chat-completions endpoint for LLM agents.")
    run.add_argument("--eps", type=float, help="Consensus threshold for summary.csv.")
    run.add_argument("--out", type=Path, default=Path("out/run"))
    run.set_defaults(func=cmd_run)

    sweep = sub.add_parser("sweep", help="Monte Carlo study over agent counts and temperature profiles.")
    sweep.add_argument("--agent-counts", type=_int_list, default=list(DEFAULT_AGENT_COUNTS))
    sweep.add_argument("--profiles", type=_profile_list, default=list(PROFILE_TEMPERATURES))
    sweep.add_argument("--trials", type=int, default=DEFAULT_TRIALS)
    sweep.add_argument("--rounds", type=int, default=9)
    sweep.add_argument("--seed", type=int, default=0)
    sweep.add_argument("--backend", choices=["strategy", "llm"], default="strategy")
    sweep.add_argument("--base-url", help="Chat-completions endpoint for --backend llm.")
    sweep.add_argument("--jobs", type=int, default=1)
    sweep.add_argument("--out", type=Path, default=Path("out/sweep"))
    sweep.set_defaults(func=cmd_sweep)

    robots = sub.add_parser("robots", help="Simulate multi-robot aggregation.")
    robots.add_argument("config", nargs="?", help="Robots config JSON (default: 4-robot square).")
    robots.add_argument("--planner", choices=["average", "llm"], help="Replace the configured planner.")
    robots.add_argument("--base-url", help="Chat-completions endpoint for --planner llm.")
    robots.add_argument("--seed", type=int)
    robots.add_argument("--out", type=Path, default=Path("out/robots"))
    robots.set_defaults(func=cmd_robots)

    analyze = sub.add_parser("analyze", help="Analyze a records.jsonl file.")
    analyze.add_argument("records", type=Path)
    analyze.add_argument("--eps", type=float, help="Consensus threshold.")
    analyze.add_argument("--gap", type=float, default=get_settings().cluster_gap, help="Cluster separation.")
    analyze.add_argument("--window", type=int, default=get_settings().osc_window, help="Oscillation window.")
    analyze.add_argument("--tolerance", type=float, help="Oscillation tolerance.")
    analyze.add_argument("--out", type=Path, default=Path("out/analysis"))
    analyze.set_defaults(func=cmd_analyze)

    serve = sub.add_parser("serve-mock", help="Serve the mock chat-completions endpoint.")
    serve.add_argument("--host")
    serve.add_argument("--port", type=int)
    serve.set_defaults(func=cmd_serve_mock)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(level=args.log_level)
    init_sentry()
    metrics.reset()
    try:
        return args.func(args)
    except ConsensusError as e:
        print(f"error: {e}", file=sys.stderr)
        for line in getattr(e, "diagnostics", []):
            print(f"  {line}", file=sys.stderr)
        logger.error("command_failed", command=args.command, error=str(e))
        return EXIT_INVALID
