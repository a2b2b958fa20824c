"""Command-line entry point.

Settings resolve as config file < environment < flags, and the resolved
configuration is written to ``run_config.json`` in the output directory
before any work starts. API tokens are read from the environment only.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import os
import sys
from pathlib import Path
from typing import Mapping, Sequence

import yaml

from .errors import WalkGuideError
from .evaluation import EvalConfig, EvalReport, evaluate_run, render_comparison, render_report
from .gateway import DiskCache, EmbeddingClient, Gateway, make_backend
from .pipeline import PipelineConfig, PromptRecorder, ScenesFailed, load_predictions, run_generation, run_predictions
from .scene import load_bench, load_manifest

log = logging.getLogger("walkguide")

EXIT_OK, EXIT_FAILED, EXIT_INPUT = 0, 1, 2
RUN_CONFIG_FILE = "run_config.json"
DEFAULT_TOKEN_ENV = "WALKGUIDE_API_KEY"

DEFAULTS: dict = {
    "seed": 0,
    "workers": 4,
    "limit": None,
    "strict": False,
    "dry_run": False,
    "debug_masks": False,
    "paths": {"manifest": None, "bench": None, "predictions": None, "out": None},
    "pipeline": PipelineConfig().to_dict(),
    "backend": {"spec": "openai", "base_url": None, "token_env": DEFAULT_TOKEN_ENV, "max_in_flight": 4,
                "timeout_s": 120.0, "attempts": 3, "backoff_s": 1.0, "cache": True},
    "judge": {"spec": "openai", "base_url": None, "token_env": DEFAULT_TOKEN_ENV, "model_id": "gpt-4o",
              "metrics_only": False},
    "embeddings": {"base_url": None, "model_id": None},
}

# environment variable -> dotted config key
ENV_KEYS = {
    "WALKGUIDE_SEED": ("seed", int),
    "WALKGUIDE_WORKERS": ("workers", int),
    "WALKGUIDE_BACKEND": ("backend.spec", str),
    "WALKGUIDE_BASE_URL": ("backend.base_url", str),
    "WALKGUIDE_MODEL": ("pipeline.model_id", str),
    "WALKGUIDE_JUDGE_BACKEND": ("judge.spec", str),
    "WALKGUIDE_JUDGE_BASE_URL": ("judge.base_url", str),
    "WALKGUIDE_JUDGE_MODEL": ("judge.model_id", str),
    "WALKGUIDE_EMBED_BASE_URL": ("embeddings.base_url", str),
    "WALKGUIDE_EMBED_MODEL": ("embeddings.model_id", str),
}
SECRET_KEYS = ("token", "api_key", "apikey", "secret", "password", "authorization")


class ConfigError(WalkGuideError):
    code = "bad-config"


def _set(cfg: dict, dotted: str, value) -> None:
    node = cfg
    *parents, leaf = dotted.split(".")
    for p in parents:
        node = node.setdefault(p, {})
    node[leaf] = value


def _merge(base: dict, over: Mapping) -> dict:
    for k, v in over.items():
        if isinstance(v, Mapping) and isinstance(base.get(k), dict):
            _merge(base[k], v)
        else:
            base[k] = v
    return base


def _check_no_secrets(obj, where: str, path: str = "") -> None:
    if isinstance(obj, Mapping):
        for k, v in obj.items():
            key = str(k).lower()
            if key in SECRET_KEYS or key.endswith(tuple("_" + w for w in SECRET_KEYS)):
                raise ConfigError(f"{where}: secrets such as {path}{k} belong in the environment")
            _check_no_secrets(v, where, f"{path}{k}.")


def load_config_file(path: str | Path) -> dict:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e
    try:
        data = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as e:
        raise ConfigError(f"config file {path} is not valid: {e}") from e
    data = data or {}
    if not isinstance(data, Mapping):
        raise ConfigError(f"config file {path} must hold a mapping")
    _check_no_secrets(data, str(path))
    data = dict(data)
    data.pop("command", None)
    return data


def resolve_config(args: argparse.Namespace, environ: Mapping[str, str] | None = None) -> dict:
    environ = os.environ if environ is None else environ
    cfg = copy.deepcopy(DEFAULTS)
    if getattr(args, "config", None):
        _merge(cfg, load_config_file(args.config))
    for var, (key, cast) in ENV_KEYS.items():
        if environ.get(var):
            try:
                _set(cfg, key, cast(environ[var]))
            except ValueError as e:
                raise ConfigError(f"{var}={environ[var]!r}: {e}") from None
    flag_keys = {
        "seed": "seed", "workers": "workers", "limit": "limit", "strict": "strict", "dry_run": "dry_run",
        "debug_masks": "debug_masks", "manifest": "paths.manifest", "bench": "paths.bench",
        "predictions": "paths.predictions", "out": "paths.out", "mode": "pipeline.mode",
        "region_style": "pipeline.region_style", "detections": "pipeline.include_detection_info",
        "calibrate_depth": "pipeline.calibrate_depth", "half_width": "pipeline.half_width_m",
        "target_dist": "pipeline.target_dist_m", "model": "pipeline.model_id", "backend": "backend.spec",
        "base_url": "backend.base_url", "no_cache": None, "judge_backend": "judge.spec",
        "judge_base_url": "judge.base_url", "judge_model": "judge.model_id", "metrics_only": "judge.metrics_only",
    }
    for flag, key in flag_keys.items():
        value = getattr(args, flag, None)
        if value is None or key is None:
            continue
        _set(cfg, key, value)
    if getattr(args, "no_cache", None):
        cfg["backend"]["cache"] = False
    for k in ("manifest", "bench", "predictions", "out"):
        if cfg["paths"][k]:
            cfg["paths"][k] = str(Path(cfg["paths"][k]).resolve())
    try:
        PipelineConfig.from_dict(cfg["pipeline"])
    except WalkGuideError as e:
        raise ConfigError(str(e)) from None
    if cfg["workers"] < 1:
        raise ConfigError("workers must be at least 1")
    return cfg


def write_run_config(cfg: dict, command: str, out: Path) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / RUN_CONFIG_FILE
    path.write_text(json.dumps({"command": command, **cfg}, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _require(cfg: dict, *names: str) -> list[Path]:
    out = []
    for n in names:
        value = cfg["paths"].get(n)
        if not value:
            raise ConfigError(f"--{n} is required")
        out.append(Path(value))
    return out


def _require_file(path: Path, what: str) -> Path:
    if not path.is_file():
        raise ConfigError(f"{what} not found: {path}", code="missing-file")
    return path


def build_gateway(section: dict, cache_dir: Path | None) -> Gateway:
    backend = make_backend(section["spec"], section.get("token_env", DEFAULT_TOKEN_ENV), section.get("base_url"))
    cache = DiskCache(cache_dir) if cache_dir is not None and section.get("cache", True) else None
    return Gateway(backend, cache, attempts=section.get("attempts", 3), backoff_s=section.get("backoff_s", 1.0),
                   timeout_s=section.get("timeout_s", 120.0), max_in_flight=section.get("max_in_flight", 4))


def _print(obj) -> None:
    sys.stdout.write(json.dumps(obj, indent=2, sort_keys=True) + "\n")


# commands

def cmd_generate(cfg: dict) -> int:
    manifest, out = _require(cfg, "manifest", "out")
    _require_file(manifest, "manifest")
    write_run_config(cfg, "generate", out)
    scenes = load_manifest(manifest, strict=cfg["strict"])
    gateway = build_gateway(cfg["backend"], out / "cache")
    try:
        summary = run_generation(scenes, PipelineConfig.from_dict(cfg["pipeline"]), out, gateway,
                                 seed=cfg["seed"], workers=cfg["workers"], strict=cfg["strict"],
                                 dry_run=cfg["dry_run"], debug_masks=cfg["debug_masks"], limit=cfg["limit"])
    except ScenesFailed as e:
        sys.stderr.write(f"walkguide: {e}\n")
        return EXIT_FAILED
    _print(summary.to_dict())
    if summary.failed == 0:
        return EXIT_OK
    return EXIT_OK if not cfg["strict"] and summary.ok >= 1 else EXIT_FAILED


def _predict(cfg: dict, pipeline: dict, backend: dict, out: Path, label: str | None = None):
    bench_path, manifest = _require(cfg, "bench", "manifest")
    _require_file(bench_path, "benchmark file")
    _require_file(manifest, "manifest")
    bench = load_bench(bench_path)
    scenes = load_manifest(manifest, strict=cfg["strict"])
    pconf = PipelineConfig.from_dict(pipeline)
    if cfg["dry_run"]:
        recorder = PromptRecorder()
        summary = run_predictions(bench, scenes, pconf, out / "predictions.dryrun.jsonl", recorder,
                                  workers=1, strict=cfg["strict"], limit=cfg["limit"], backend_id="dry-run")
        with (out / "prompts.jsonl").open("w", encoding="utf-8") as f:
            for r in recorder.requests:
                f.write(json.dumps({"system": r.system_text, "user": r.prompt_text}) + "\n")
        summary.dry_run = True
        return summary
    gateway = build_gateway(backend, out / "cache")
    return run_predictions(bench, scenes, pconf, out / "predictions.jsonl", gateway,
                           workers=cfg["workers"], strict=cfg["strict"], limit=cfg["limit"],
                           backend_id=label or backend["spec"])


def cmd_predict(cfg: dict) -> int:
    (out,) = _require(cfg, "out")
    write_run_config(cfg, "predict", out)
    try:
        summary = _predict(cfg, cfg["pipeline"], cfg["backend"], out)
    except ScenesFailed as e:
        sys.stderr.write(f"walkguide: {e}\n")
        return EXIT_FAILED
    _print(summary.to_dict())
    if summary.failed == 0:
        return EXIT_OK
    return EXIT_OK if not cfg["strict"] and summary.ok >= 1 else EXIT_FAILED


def _eval_config(cfg: dict, label: str | None = None) -> EvalConfig:
    emb = cfg.get("embeddings") or {}
    embed = None
    if emb.get("base_url") and emb.get("model_id"):
        embed = EmbeddingClient(emb["base_url"], emb["model_id"], cfg["judge"].get("token_env", DEFAULT_TOKEN_ENV)).embed
    return EvalConfig(judge_model_id=cfg["judge"]["model_id"],
                      metrics_only=bool(cfg["judge"]["metrics_only"] or cfg["dry_run"]),
                      workers=cfg["workers"], embed=embed, label=label)


def _evaluate(cfg: dict, predictions_path: Path, out: Path, label: str | None = None) -> EvalReport:
    (bench_path,) = _require(cfg, "bench")
    _require_file(bench_path, "benchmark file")
    _require_file(predictions_path, "predictions file")
    preds = load_predictions(predictions_path)
    if cfg["limit"] is not None:
        preds = preds[: cfg["limit"]]
    econf = _eval_config(cfg, label)
    judge = None if econf.metrics_only else build_gateway(cfg["judge"], out / "judge_cache")
    report = evaluate_run(preds, load_bench(bench_path), judge, econf)
    (out / "report.json").write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    return report


def cmd_evaluate(cfg: dict) -> int:
    predictions, out = _require(cfg, "predictions", "out")
    write_run_config(cfg, "evaluate", out)
    report = _evaluate(cfg, predictions, out)
    (out / "report.txt").write_text(render_report(report))
    (out / "report.csv").write_text(render_report(report, "csv"))
    sys.stdout.write(render_report(report))
    return EXIT_OK


ARM_KEYS = {"mode": "pipeline.mode", "region_style": "pipeline.region_style",
            "detections": "pipeline.include_detection_info", "model": "pipeline.model_id",
            "backend": "backend.spec", "base_url": "backend.base_url", "label": "label"}


def parse_arm(text: str | None) -> dict:
    """``mode=single-turn,backend=stub:scene:b`` into dotted overrides."""
    out: dict = {}
    if not text:
        return out
    for item in text.split(","):
        key, sep, value = item.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or key not in ARM_KEYS:
            raise ConfigError(f"bad arm setting {item!r}; keys are {sorted(ARM_KEYS)}")
        value = value.strip()
        if key == "detections":
            value = value.lower() in ("1", "true", "yes", "on")
        out[ARM_KEYS[key]] = value
    return out


def cmd_ab_compare(cfg: dict, arms: Sequence[dict]) -> int:
    (out,) = _require(cfg, "out")
    cfg = copy.deepcopy(cfg)
    cfg["arms"] = [dict(a) for a in arms]
    write_run_config(cfg, "ab-compare", out)
    reports = []
    for name, overrides in zip(("a", "b"), arms):
        arm_cfg = copy.deepcopy(cfg)
        label = overrides.get("label")
        for key, value in overrides.items():
            if key != "label":
                _set(arm_cfg, key, value)
        PipelineConfig.from_dict(arm_cfg["pipeline"])
        arm_out = out / name
        arm_out.mkdir(parents=True, exist_ok=True)
        label = label or f"{name}:{arm_cfg['backend']['spec']}:{arm_cfg['pipeline']['mode']}:" \
                         f"{arm_cfg['pipeline']['region_style']}"
        summary = _predict(arm_cfg, arm_cfg["pipeline"], arm_cfg["backend"], arm_out, label)
        if summary.failed and cfg["strict"]:
            return EXIT_FAILED
        reports.append(_evaluate(arm_cfg, arm_out / "predictions.jsonl", arm_out, label))
    table = render_comparison(*reports)
    (out / "comparison.txt").write_text(table)
    (out / "comparison.csv").write_text(render_comparison(*reports, fmt="csv"))
    sys.stdout.write(table)
    return EXIT_OK


def cmd_report(paths: Sequence[str], fmt: str, out: str | None) -> int:
    reports = []
    for p in paths:
        try:
            reports.append(EvalReport.from_dict(json.loads(Path(p).read_text())))
        except (OSError, json.JSONDecodeError, KeyError) as e:
            raise ConfigError(f"cannot read report {p}: {e}") from None
    text = render_report(reports, fmt)
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def _bool_flag(parser, name: str, help: str, dest: str | None = None):
    parser.add_argument(f"--{name}", dest=dest, action=argparse.BooleanOptionalAction, default=None, help=help)


def _common_parser(suppress: bool) -> argparse.ArgumentParser:
    """Global flags; the subcommand copy must not clobber values given before the subcommand."""
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS if suppress else None)
    g = common.add_argument_group("global")
    g.add_argument("--config", help="YAML or JSON settings file")
    g.add_argument("--seed", type=int)
    g.add_argument("--workers", type=int)
    g.add_argument("--limit", type=int, help="process at most this many scenes")
    g.add_argument("--strict", action=argparse.BooleanOptionalAction, help="abort on the first failing scene")
    g.add_argument("--dry-run", dest="dry_run", action=argparse.BooleanOptionalAction,
                   help="render prompts without calling any backend")
    g.add_argument("-v", "--verbose", action="count", **({} if suppress else {"default": 0}))
    return common


def _pipeline_parser() -> argparse.ArgumentParser:
    pipe = argparse.ArgumentParser(add_help=False)
    p = pipe.add_argument_group("pipeline")
    p.add_argument("--mode", choices=("multi-turn", "single-turn"))
    p.add_argument("--region-style", dest="region_style", choices=("masked-image", "region-prompt"))
    _bool_flag(p, "detections", "include the detection clause in prompts")
    _bool_flag(p, "calibrate-depth", "rescale depth from known object heights", dest="calibrate_depth")
    p.add_argument("--half-width", dest="half_width", type=float, help="path half width in metres")
    p.add_argument("--target-dist", dest="target_dist", type=float, help="goal distance in metres")
    p.add_argument("--model", help="vision-chat model id")
    p.add_argument("--backend", help="'openai', a base URL, or stub[:scene[:variant]]")
    p.add_argument("--base-url", dest="base_url")
    p.add_argument("--no-cache", dest="no_cache", action="store_true", default=None)
    return pipe


def _judge_parser() -> argparse.ArgumentParser:
    judge = argparse.ArgumentParser(add_help=False)
    j = judge.add_argument_group("judge")
    j.add_argument("--judge-backend", dest="judge_backend")
    j.add_argument("--judge-base-url", dest="judge_base_url")
    j.add_argument("--judge-model", dest="judge_model")
    j.add_argument("--metrics-only", dest="metrics_only", action="store_true", default=None,
                   help="skip judging; lexical metrics and word counts only")
    return judge


def build_parser() -> argparse.ArgumentParser:
    # A parent shared by several subcommands repeats its groups in help
    # output, so each subcommand gets fresh parents.
    def common():
        return _common_parser(suppress=True)

    def pipe():
        return _pipeline_parser()

    def judge():
        return _judge_parser()

    parser = argparse.ArgumentParser(prog="walkguide", parents=[_common_parser(suppress=False)],
                                     description="Walking-guidance description generation and benchmarking.")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("generate", parents=[common(), pipe()], help="build training samples from a manifest")
    sp.add_argument("--manifest")
    sp.add_argument("--out")
    _bool_flag(sp, "debug-masks", "also write region masks", dest="debug_masks")

    sp = sub.add_parser("predict", parents=[common(), pipe()], help="describe benchmark scenes with a model")
    sp.add_argument("--bench")
    sp.add_argument("--manifest", help="scenes (images, depth, detections) for the benchmark ids")
    sp.add_argument("--out")

    sp = sub.add_parser("evaluate", parents=[common(), judge()], help="score predictions against references")
    sp.add_argument("--predictions")
    sp.add_argument("--bench")
    sp.add_argument("--out")

    sp = sub.add_parser("ab-compare", parents=[common(), pipe(), judge()], help="predict and evaluate two variants")
    sp.add_argument("--bench")
    sp.add_argument("--manifest")
    sp.add_argument("--out")
    sp.add_argument("--arm-a", dest="arm_a", default="", help="overrides, e.g. mode=single-turn")
    sp.add_argument("--arm-b", dest="arm_b", default="", help="overrides, e.g. region_style=region-prompt")

    sp = sub.add_parser("report", parents=[common()], help="tabulate saved report.json files")
    sp.add_argument("reports", nargs="+")
    sp.add_argument("--format", choices=("table", "csv"), default="table")
    sp.add_argument("--out")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        if args.command == "report":
            return cmd_report(args.reports, args.format, args.out)
        cfg = resolve_config(args)
        if args.command == "generate":
            return cmd_generate(cfg)
        if args.command == "predict":
            return cmd_predict(cfg)
        if args.command == "evaluate":
            return cmd_evaluate(cfg)
        if args.command == "ab-compare":
            saved = cfg.pop("arms", None) or [{}, {}]
            arms = [parse_arm(args.arm_a) if args.arm_a else saved[0],
                    parse_arm(args.arm_b) if args.arm_b else saved[1]]
            return cmd_ab_compare(cfg, arms)
    except WalkGuideError as e:
        sys.stderr.write(f"walkguide: error: {e}\n")
        return EXIT_INPUT
    parser.error(f"unknown command {args.command}")
    return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
