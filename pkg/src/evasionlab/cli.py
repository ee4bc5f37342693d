"""Command-line entry point for the full pipeline.

Subcommands: gen-corpus, train-lm, train-detector, attack, evaluate,
report. Option precedence is command line > config file (flat
``key=value`` lines, keys matching option names with underscores) >
built-in defaults; every run writes the resolved options next to its
outputs as an audit record.

Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, replace
from pathlib import Path

from .attacks import ALL_STRATEGIES, ENHANCED_BENIGN_APPEND, LM_GUIDED, RNN_STYLE_LM
from .bytelm import (LM_PRESETS, ByteLanguageModel, SamplerConfig,
                     write_loss_trace_csv)
from .checkpoint import file_sha256
from .detector import GatedConvDetector
from .errors import EvasionLabError, MissingCheckpointError
from .harness import (CATEGORY_NAMES, CorpusManifest, EvasionReport, StrategyRun,
                      SyntheticCorpusSpec, class_histogram_divergence,
                      generate_synthetic_corpus, load_binary_samples,
                      recount_from_outcomes, render_table, run_experiment)
from .harness.corpus import LABEL_BENIGN, default_category_length_ranges
from .harness.report import TOTAL_KEY, read_outcomes_jsonl
from .threat import BOOLEAN_ONLY, FEEDBACK_MODES, MAX_APPEND_BYTES, SCORE_FEEDBACK, ThreatModel

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit code 1 instead of argparse's 2
        raise UsageError(message)


def _opt_int(raw: str) -> int:
    return int(raw)


def _opt_float(raw: str) -> float:
    return float(raw)


def _opt_optional_int(raw: str):
    return None if raw.lower() in ("none", "") else int(raw)


def _opt_optional_float(raw: str):
    return None if raw.lower() in ("none", "") else float(raw)


@dataclass(frozen=True)
class Opt:
    name: str
    type: object
    default: object
    help: str
    choices: tuple | None = None
    required: bool = False


_COMMON = [Opt("config", str, None, "flat key=value config file")]

_SCHEMAS: dict[str, list[Opt]] = {
    "gen-corpus": _COMMON + [
        Opt("out", str, None, "output corpus directory", required=True),
        Opt("seed", _opt_int, 0, "corpus generation seed"),
        Opt("num_benign", _opt_int, 64, "number of benign files"),
        Opt("malicious_per_category", _opt_int, 40, "malicious files per category"),
        Opt("benign_noise_fraction", _opt_float, 0.2, "share of high-byte noise segments"),
        Opt("signature_mass", _opt_float, 0.1, "per-category signature byte mass"),
        Opt("length_scale", _opt_float, 1.0, "scale factor on all file size ranges"),
    ],
    "train-lm": _COMMON + [
        Opt("manifest", str, None, "corpus manifest path", required=True),
        Opt("out", str, None, "output directory", required=True),
        Opt("preset", str, "desk", "architecture preset", choices=tuple(LM_PRESETS)),
        Opt("num_blocks", _opt_optional_int, None, "decoder blocks (overrides preset)"),
        Opt("embed_dim", _opt_optional_int, None, "embedding width"),
        Opt("num_heads", _opt_optional_int, None, "attention heads"),
        Opt("context_len", _opt_optional_int, None, "context window in tokens"),
        Opt("ffn_dim", _opt_optional_int, None, "feed-forward width"),
        Opt("learning_rate", _opt_float, 1e-3, "Adam learning rate"),
        Opt("train_iterations", _opt_int, 1000, "optimizer steps"),
        Opt("seed", _opt_int, 0, "init + window sampling seed"),
        Opt("checkpoint_name", str, "lm.ckpt", "checkpoint file name"),
    ],
    "train-detector": _COMMON + [
        Opt("manifest", str, None, "corpus manifest path", required=True),
        Opt("out", str, None, "output directory", required=True),
        Opt("max_input_bytes", _opt_int, 65536, "detector input window"),
        Opt("embed_dim", _opt_int, 8, "byte embedding width"),
        Opt("conv_filters", _opt_int, 16, "gated conv filters"),
        Opt("conv_width", _opt_int, 512, "conv window bytes"),
        Opt("conv_stride", _opt_int, 512, "conv stride bytes"),
        Opt("hidden_dim", _opt_int, 16, "hidden layer width"),
        Opt("learning_rate", _opt_float, 1e-3, "Adam learning rate"),
        Opt("train_epochs", _opt_int, 3, "training epochs"),
        Opt("batch_size", _opt_int, 16, "minibatch size"),
        Opt("val_fraction", _opt_float, 0.25, "validation split fraction"),
        Opt("threshold", _opt_float, 0.5, "decision threshold"),
        Opt("calibrate_fpr", _opt_optional_float, None,
            "calibrate threshold to this validation false-positive rate"),
        Opt("seed", _opt_int, 0, "training seed"),
    ],
    "attack": _COMMON + [
        Opt("manifest", str, None, "corpus manifest path", required=True),
        Opt("detector", str, None, "detector checkpoint", required=True),
        Opt("strategy", str, None, "attack strategy", choices=ALL_STRATEGIES, required=True),
        Opt("out", str, None, "output directory", required=True),
        Opt("lm", str, None, "byte LM checkpoint (lm_guided)"),
        Opt("rnn_lm", str, None, "weak LM checkpoint (rnn_style_lm)"),
        Opt("seed", _opt_int, 0, "attack seed"),
        Opt("max_queries", _opt_int, 1, "query budget per sample"),
        Opt("max_append_bytes", _opt_int, MAX_APPEND_BYTES, "append cap in bytes"),
        Opt("feedback", str, BOOLEAN_ONLY, "oracle feedback mode", choices=FEEDBACK_MODES),
        Opt("payload_bytes", _opt_int, MAX_APPEND_BYTES, "LM payload size"),
        Opt("temperature", _opt_float, 1.0, "sampling temperature (0 = greedy)"),
        Opt("top_k", _opt_optional_int, None, "top-k cutoff (none = full vocabulary)"),
        Opt("chunk_bytes", _opt_int, 1024, "enhanced append chunk size"),
        Opt("candidates", _opt_int, 8, "enhanced candidates per round"),
        Opt("parallelism", _opt_int, 0, "generation chunk factor (0 = auto)"),
    ],
    "evaluate": _COMMON + [
        Opt("manifest", str, None, "corpus manifest path", required=True),
        Opt("detector", str, None, "detector checkpoint", required=True),
        Opt("out", str, None, "output directory", required=True),
        Opt("lm", str, None, "byte LM checkpoint"),
        Opt("rnn_lm", str, None, "weak LM checkpoint"),
        Opt("strategies", str, ",".join(ALL_STRATEGIES), "comma-separated strategies"),
        Opt("seed", _opt_int, 0, "top-level attack seed"),
        Opt("max_queries", _opt_int, 1, "query budget per sample"),
        Opt("max_append_bytes", _opt_int, MAX_APPEND_BYTES, "append cap in bytes"),
        Opt("feedback", str, BOOLEAN_ONLY, "oracle feedback mode", choices=FEEDBACK_MODES),
        Opt("payload_bytes", _opt_int, MAX_APPEND_BYTES, "LM payload size"),
        Opt("temperature", _opt_float, 1.0, "sampling temperature (0 = greedy)"),
        Opt("top_k", _opt_optional_int, None, "top-k cutoff (none = full vocabulary)"),
        Opt("enhanced_queries", _opt_int, 16,
            "extra declared-budget column for enhanced benign append (0 = off)"),
        Opt("chunk_bytes", _opt_int, 1024, "enhanced append chunk size"),
        Opt("candidates", _opt_int, 8, "enhanced candidates per round"),
        Opt("parallelism", _opt_int, 0, "generation chunk factor (0 = auto)"),
    ],
    "report": _COMMON + [
        Opt("report", str, None, "report.json to render", required=True),
        Opt("format", str, "table", "output format", choices=("table", "csv")),
        Opt("out", str, None, "write rendering here instead of stdout"),
        Opt("verify_outcomes", str, None, "outcomes.jsonl to recount against the report"),
    ],
}


def _build_parser() -> _Parser:
    parser = _Parser(prog="evasionlab",
                     description="append-based single-shot evasion harness")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    for command, opts in _SCHEMAS.items():
        p = sub.add_parser(command, help=f"{command} stage")
        for opt in opts:
            flag = "--" + opt.name.replace("_", "-")
            kwargs = {"dest": opt.name, "default": None, "help": opt.help}
            if opt.type is not str:
                kwargs["type"] = opt.type
            if opt.choices:
                kwargs["choices"] = list(opt.choices)
            p.add_argument(flag, **kwargs)
    return parser


def _read_config_file(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, _, value = stripped.partition("=")
        values[key.strip()] = value.strip()
    return values


def _resolve_options(command: str, args: argparse.Namespace) -> dict:
    schema = {opt.name: opt for opt in _SCHEMAS[command]}
    file_values: dict[str, str] = {}
    if getattr(args, "config", None):
        file_values = _read_config_file(args.config)
        unknown = set(file_values) - set(schema)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
    resolved = {}
    for name, opt in schema.items():
        cli_value = getattr(args, name, None)
        if cli_value is not None:
            resolved[name] = cli_value
        elif name in file_values:
            raw = file_values[name]
            resolved[name] = raw if opt.type is str else opt.type(raw)
            if opt.choices and resolved[name] not in opt.choices:
                raise UsageError(f"config {name}={raw!r} not in {opt.choices}")
        else:
            resolved[name] = opt.default
        if opt.required and resolved[name] is None:
            raise UsageError(f"missing required option --{name.replace('_', '-')}")
    return resolved


def _write_snapshot(out_dir: Path, command: str, resolved: dict, extra: dict | None = None) -> None:
    snapshot = {"command": command, "options": resolved}
    if extra:
        snapshot["derived"] = extra
    name = command.replace("-", "_") + "_config.json"
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / name).write_text(json.dumps(snapshot, indent=2, sort_keys=True) + "\n",
                                encoding="utf-8")


def _load_manifest(path: str) -> tuple[CorpusManifest, Path]:
    p = Path(path)
    if not p.is_file():
        raise MissingCheckpointError(f"manifest not found: {p}")
    return CorpusManifest.load(p), p.parent


def _generation_chunk(parallelism: int) -> int | None:
    cores = parallelism if parallelism > 0 else (os.cpu_count() or 1)
    return 128 * cores


def _cmd_gen_corpus(resolved: dict) -> int:
    scale = resolved["length_scale"]
    ranges = {name: (max(16, int(lo * scale)), max(32, int(hi * scale)))
              for name, (lo, hi) in default_category_length_ranges().items()}
    lo, hi = 4096, 32768
    spec = SyntheticCorpusSpec(
        num_benign=resolved["num_benign"],
        malicious_per_category={c: resolved["malicious_per_category"] for c in CATEGORY_NAMES},
        benign_length_range=(max(16, int(lo * scale)), max(32, int(hi * scale))),
        category_length_ranges=ranges,
        benign_noise_fraction=resolved["benign_noise_fraction"],
        signature_mass=resolved["signature_mass"],
        seed=resolved["seed"],
    )
    out = Path(resolved["out"])
    manifest = generate_synthetic_corpus(spec, out)
    divergence = class_histogram_divergence(manifest, out)
    stats = {
        "entries": len(manifest.entries),
        "benign": len(manifest.benign()),
        "malicious": len(manifest.malicious()),
        "histogram_divergence": divergence,
        "divergence_floor": spec.min_histogram_divergence,
        "spec": spec.to_dict(),
    }
    (out / "corpus_stats.json").write_text(json.dumps(stats, indent=2, sort_keys=True) + "\n",
                                           encoding="utf-8")
    _write_snapshot(out, "gen-corpus", resolved)
    print(f"wrote {len(manifest.entries)} files under {out} "
          f"(min class divergence {min(divergence.values()):.3f})")
    return EXIT_OK


def _cmd_train_lm(resolved: dict) -> int:
    manifest, root = _load_manifest(resolved["manifest"])
    corpus = [s.data for s in load_binary_samples(manifest, root, LABEL_BENIGN)]
    overrides = {k: resolved[k] for k in
                 ("num_blocks", "embed_dim", "num_heads", "context_len", "ffn_dim")
                 if resolved[k] is not None}
    overrides.update(learning_rate=resolved["learning_rate"],
                     train_iterations=resolved["train_iterations"],
                     seed=resolved["seed"])
    model = ByteLanguageModel.from_preset(resolved["preset"], **overrides)
    model.fit(corpus)
    out = Path(resolved["out"])
    out.mkdir(parents=True, exist_ok=True)
    ckpt = out / resolved["checkpoint_name"]
    model.save(ckpt)
    write_loss_trace_csv(out / "lm_loss.csv", model.loss_trace_)
    trace = model.loss_trace_
    _write_snapshot(out, "train-lm", resolved, extra={
        "checkpoint_sha256": file_sha256(ckpt),
        "first_loss": float(trace[0]),
        "final_loss": float(trace[-1]),
    })
    print(f"trained LM on {len(corpus)} benign files: "
          f"loss {trace[0]:.4f} -> {trace[-1]:.4f}; checkpoint {ckpt}")
    return EXIT_OK


def _cmd_train_detector(resolved: dict) -> int:
    manifest, root = _load_manifest(resolved["manifest"])
    samples = load_binary_samples(manifest, root)
    X = [s.data for s in samples]
    y = [0 if s.category is None else 1 for s in samples]
    kwargs = {k: resolved[k] for k in (
        "max_input_bytes", "embed_dim", "conv_filters", "conv_width", "conv_stride",
        "hidden_dim", "learning_rate", "train_epochs", "batch_size", "val_fraction",
        "threshold", "calibrate_fpr", "seed")}
    detector = GatedConvDetector(**kwargs)
    detector.fit(X, y)
    out = Path(resolved["out"])
    out.mkdir(parents=True, exist_ok=True)
    ckpt = out / "detector.ckpt"
    detector.save(ckpt)
    metrics = {
        "train_loss": detector.history_["train_loss"],
        "val_auc": detector.val_auc_,
        "val_accuracy": detector.val_accuracy_,
        "threshold": detector.threshold_,
        "n_train": detector.history_["n_train"],
        "n_val": detector.history_["n_val"],
    }
    (out / "detector_metrics.json").write_text(
        json.dumps(metrics, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    _write_snapshot(out, "train-detector", resolved,
                    extra={"checkpoint_sha256": file_sha256(ckpt)})
    print(f"trained detector on {len(X)} files: val_auc={detector.val_auc_:.4f} "
          f"val_acc={detector.val_accuracy_:.4f}; checkpoint {ckpt}")
    return EXIT_OK


def _load_lms(resolved: dict, needed: set[str]):
    lm = rnn_lm = None
    fingerprints = {}
    if LM_GUIDED in needed:
        if not resolved["lm"]:
            raise MissingCheckpointError("lm_guided strategy needs --lm CHECKPOINT")
        lm = ByteLanguageModel.load(resolved["lm"])
        fingerprints["lm_checkpoint_sha256"] = file_sha256(resolved["lm"])
    if RNN_STYLE_LM in needed:
        if not resolved["rnn_lm"]:
            raise MissingCheckpointError("rnn_style_lm strategy needs --rnn-lm CHECKPOINT")
        rnn_lm = ByteLanguageModel.load(resolved["rnn_lm"])
        fingerprints["rnn_lm_checkpoint_sha256"] = file_sha256(resolved["rnn_lm"])
    return lm, rnn_lm, fingerprints


def _threat_model(resolved: dict) -> ThreatModel:
    return ThreatModel(max_queries=resolved["max_queries"],
                       max_append_bytes=resolved["max_append_bytes"],
                       feedback=resolved["feedback"])


def _run_evaluation(resolved: dict, strategies: list[str], extra_runs: list[StrategyRun],
                    command: str) -> EvasionReport:
    manifest, root = _load_manifest(resolved["manifest"])
    if not Path(resolved["detector"]).is_file():
        raise MissingCheckpointError(f"detector checkpoint not found: {resolved['detector']}")
    detector = GatedConvDetector.load(resolved["detector"])
    fingerprints = {"detector_checkpoint_sha256": file_sha256(resolved["detector"])}
    lm, rnn_lm, lm_prints = _load_lms(resolved, set(strategies))
    fingerprints.update(lm_prints)

    base_model = _threat_model(resolved)
    sampler = SamplerConfig(temperature=resolved["temperature"], top_k=resolved["top_k"],
                            max_payload_bytes=resolved["payload_bytes"], seed=0)
    runs: list = list(strategies) + list(extra_runs)
    out = Path(resolved["out"])
    report = run_experiment(
        manifest, root, detector, base_model, runs,
        lm=lm, rnn_lm=rnn_lm, sampler=sampler,
        attack_seed=resolved["seed"],
        enhanced_chunk_bytes=resolved["chunk_bytes"],
        enhanced_candidates=resolved["candidates"],
        generation_chunk=_generation_chunk(resolved["parallelism"]),
        fingerprints=fingerprints,
        out_dir=out,
    )
    _write_snapshot(out, command, resolved, extra={"seeds": report.data["seeds"]})
    return report


def _cmd_attack(resolved: dict) -> int:
    strategy = resolved["strategy"]
    report = _run_evaluation(resolved, [strategy], [], "attack")
    total = report.runs[strategy][TOTAL_KEY]
    rate = total["rate"]
    print(f"{strategy}: evaded {total['evaded_functional']}/{total['n']} "
          f"({'n/a' if rate is None else f'{100 * rate:.2f}%'}); "
          f"outcomes in {resolved['out']}/outcomes.jsonl")
    return EXIT_OK


def _cmd_evaluate(resolved: dict) -> int:
    strategies = [s.strip() for s in resolved["strategies"].split(",") if s.strip()]
    for s in strategies:
        if s not in ALL_STRATEGIES:
            raise UsageError(f"unknown strategy {s!r}; choose from {ALL_STRATEGIES}")
    extra_runs = []
    n_queries = resolved["enhanced_queries"]
    if ENHANCED_BENIGN_APPEND in strategies and n_queries >= 2:
        declared = ThreatModel(max_queries=n_queries,
                               max_append_bytes=resolved["max_append_bytes"],
                               feedback=SCORE_FEEDBACK)
        extra_runs.append(StrategyRun(label=f"enhanced_benign_append_q{n_queries}",
                                      strategy=ENHANCED_BENIGN_APPEND,
                                      threat_model=declared))
    report = _run_evaluation(resolved, strategies, extra_runs, "evaluate")
    print(render_table(report), end="")
    print(f"report written to {resolved['out']}/report.json and report.csv")
    return EXIT_OK


def _cmd_report(resolved: dict) -> int:
    report = EvasionReport.from_json(resolved["report"])
    rendering = render_table(report) if resolved["format"] == "table" else report.to_csv()
    if resolved["out"]:
        Path(resolved["out"]).write_text(rendering, encoding="utf-8")
    else:
        print(rendering, end="")
    if resolved["verify_outcomes"]:
        rows = read_outcomes_jsonl(resolved["verify_outcomes"])
        recount = recount_from_outcomes(rows)
        for label, run in report.runs.items():
            expected = recount.get(label, {"cells": {}, TOTAL_KEY: None})
            for cat, cell in run["cells"].items():
                again = expected["cells"].get(cat)
                if again is None or again != cell:
                    raise EvasionLabError(
                        f"recount mismatch for run={label} category={cat}")
            if expected[TOTAL_KEY] != run[TOTAL_KEY]:
                raise EvasionLabError(f"recount mismatch for run={label} total")
        print("outcome recount matches the report")
    return EXIT_OK


_HANDLERS = {
    "gen-corpus": _cmd_gen_corpus,
    "train-lm": _cmd_train_lm,
    "train-detector": _cmd_train_detector,
    "attack": _cmd_attack,
    "evaluate": _cmd_evaluate,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            raise UsageError("no command given; see --help")
        resolved = _resolve_options(args.command, args)
        return _HANDLERS[args.command](resolved)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (EvasionLabError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
