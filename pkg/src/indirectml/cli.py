"""Config-driven experiment runner.

Subcommands: generate, train, eval, fisher, identify, plot, fetch-adult,
reproduce.  Configuration is a single JSON document with sections
``data`` / ``model`` / ``objective`` / ``optimizer`` / ``output``; the
committed presets under ``indirectml/configs`` are working examples.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure, 5 transition matrix judged non-identifiable (fisher/identify).
Every run writes a ``manifest.json`` with the resolved configuration,
seeds, transition matrices and dataset digests, which is enough to rerun
it bit-identically.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import importlib.resources
import json
import sys
from pathlib import Path

import numpy as np

from . import datagen, fisher, model, presets, svgplot, transition
from .adult import DEFAULT_SOURCE_URL, fetch
from .errors import (
    ChecksumMismatch,
    ColumnNotStochastic,
    ConfigError,
    DimensionMismatch,
    EmptyCombination,
    EmptyGroup,
    ImpossibleObservation,
    IncompletePartition,
    IndirectMLError,
    InvalidArchitecture,
    InvalidClassCount,
    InvalidPropensity,
    InvalidRate,
    InvalidSimplex,
    NegativeEntry,
    NetworkFailure,
    NonFiniteGradient,
    NonFiniteInput,
    NonFiniteLoss,
    NonPDCovariance,
    OverlappingPartition,
    SchemaMismatch,
    UnsupportedDimension,
    ZeroClassPrior,
    ZeroObservationProbability,
    ZeroProbability,
)
from .model import Architecture
from .objective import WeakDataset, pooled_objective
from .optimizer import OptimizerConfig, train
from .seeding import STREAM_VERSION
from .transition import SimplexVector, TransitionMatrix

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4
EXIT_NOT_IDENTIFIABLE = 5

_CONFIG_ERRORS = (
    ConfigError,
    InvalidRate,
    InvalidClassCount,
    OverlappingPartition,
    IncompletePartition,
    InvalidPropensity,
    InvalidArchitecture,
    InvalidSimplex,
    NonPDCovariance,
)
_DATA_ERRORS = (
    EmptyGroup,
    ZeroClassPrior,
    NetworkFailure,
    ChecksumMismatch,
    SchemaMismatch,
    ImpossibleObservation,
    NonFiniteInput,
    DimensionMismatch,
    EmptyCombination,
    ColumnNotStochastic,
    NegativeEntry,
    UnsupportedDimension,
    FileNotFoundError,
)
_NUMERIC_ERRORS = (
    NonFiniteLoss,
    NonFiniteGradient,
    ZeroProbability,
    ZeroObservationProbability,
)


def _json_dump(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def load_config(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise ConfigError(f"config file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path} is not valid JSON: {e}") from e


def require(cfg: dict, key_path: str):
    """Fetch a dotted key, raising a ConfigError naming the missing path."""
    node = cfg
    for part in key_path.split("."):
        if not isinstance(node, dict) or part not in node:
            raise ConfigError(f"config is missing required key {key_path!r}")
        node = node[part]
    return node


def build_transition(spec, key_path: str = "data.transition") -> TransitionMatrix:
    """Construct a transition matrix from its config form, tagging any
    constructor error with the offending config path."""
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError(f"{key_path} must be an object with a 'kind' field")
    kind = spec["kind"]
    try:
        if kind == "identity":
            return transition.identity(int(spec["k"]))
        if kind == "ccn":
            return transition.class_conditional_noise(int(spec["k"]), float(spec["noise_rate"]))
        if kind == "complementary":
            return transition.uniform_complementary(int(spec["k"]))
        if kind == "coarse":
            return transition.coarse_partition(int(spec["k"]), spec["partition"])
        if kind == "pu":
            return transition.pu_censoring(float(spec["propensity"]))
        if kind == "llp_default":
            return datagen.default_llp_transition()
        if kind == "matrix":
            if "n_y" in spec and "n_z" in spec:
                return TransitionMatrix.from_dict(spec)
            m = TransitionMatrix(spec["rows"])
            transition.validate(m)
            return m
    except KeyError as e:
        raise ConfigError(f"{key_path} is missing field {e.args[0]!r} for kind {kind!r}") from e
    except IndirectMLError as e:
        raise type(e)(f"at {key_path}: {e}") from e
    raise ConfigError(f"{key_path}.kind: unknown transition kind {kind!r}")


def build_mixture(spec, key_path: str = "data.mixture") -> datagen.GaussianMixtureSpec:
    if spec == "default3" or spec is None:
        return datagen.default_mixture()
    if spec == "ring10":
        return datagen.ring_mixture(10)
    if isinstance(spec, dict):
        try:
            return datagen.GaussianMixtureSpec.from_dict(spec)
        except (KeyError, TypeError) as e:
            raise ConfigError(f"{key_path}: malformed mixture spec ({e})") from e
    raise ConfigError(f"{key_path}: expected 'default3', 'ring10' or a mixture object")


def build_architecture(spec, key_path: str = "model.architecture") -> Architecture:
    if spec is None or spec == "linear":
        return Architecture(kind="linear")
    if isinstance(spec, dict):
        return Architecture.from_dict(spec)
    raise ConfigError(f"{key_path}: expected 'linear' or an architecture object")


def _out_dir(cfg: dict, override: str | None) -> Path:
    out = override or cfg.get("output", {}).get("dir")
    if not out:
        raise ConfigError("no output directory: set output.dir or pass --out")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_manifest(out: Path, command: str, resolved: dict, extras: dict) -> None:
    doc = {
        "command": command,
        "config": resolved,
        "stream_version": STREAM_VERSION,
        **extras,
    }
    _json_dump(out / "manifest.json", doc)


# ---------------------------------------------------------------------------
# generate
# ---------------------------------------------------------------------------


def cmd_generate(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.setdefault("data", {})["seed"] = args.seed
    out = _out_dir(cfg, args.out)
    data = require(cfg, "data")
    seed = int(data.get("seed", 0))
    n_train = int(data.get("n_train", 1000))
    n_test = int(data.get("n_test", 1000))
    spec = build_mixture(data.get("mixture"))
    m = build_transition(require(cfg, "data.transition"))
    if m.n_z != spec.n_components:
        raise ConfigError(
            f"data.transition has {m.n_z} classes but the mixture has "
            f"{spec.n_components} components"
        )
    train_sample = datagen.sample_mixture(spec, n_train, seed)
    test_sample = datagen.sample_mixture(spec, n_test, seed + 1)
    y = datagen.sample_indirect(train_sample.true_targets, m, seed + 2)

    digests = {}
    digests["train_indirect.csv"] = datagen.write_dataset_csv(
        out / "train_indirect.csv", train_sample.features, observations=y
    )
    digests["train_direct.csv"] = datagen.write_dataset_csv(
        out / "train_direct.csv",
        train_sample.features,
        observations=train_sample.true_targets,
        true_targets=train_sample.true_targets,
    )
    digests["test.csv"] = datagen.write_dataset_csv(
        out / "test.csv", test_sample.features, true_targets=test_sample.true_targets
    )
    provenance = {"seed": seed, "mixture": spec.to_dict(), "n_train": n_train, "n_test": n_test}
    datagen.write_sidecar(out / "train_indirect.meta.json", m, provenance)
    datagen.write_sidecar(
        out / "train_direct.meta.json", transition.identity(spec.n_components), provenance
    )
    datagen.write_sidecar(out / "test.meta.json", None, provenance)
    _write_manifest(out, "generate", cfg, {"datasets": digests})
    print(f"wrote {n_train} train and {n_test} test rows to {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# train / eval
# ---------------------------------------------------------------------------


def _load_sources(cfg: dict) -> list[WeakDataset]:
    sources = require(cfg, "data.sources")
    if not isinstance(sources, list) or not sources:
        raise ConfigError("data.sources must be a non-empty list")
    datasets = []
    for i, src in enumerate(sources):
        if not isinstance(src, dict) or "csv" not in src:
            raise ConfigError(f"data.sources[{i}] needs a 'csv' field")
        csv = src["csv"]
        meta = src.get("meta") or str(Path(csv).with_suffix("")) + ".meta.json"
        datasets.append(
            datagen.load_weak_dataset(csv, meta, name=src.get("name", f"source{i}"))
        )
    return datasets


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.setdefault("optimizer", {})["seed"] = args.seed
    out = _out_dir(cfg, args.out)
    datasets = _load_sources(cfg)
    n_z = datasets[0].n_z
    stacked = np.vstack([d.transition.entries for d in datasets])
    verdict = fisher.check_identifiability(TransitionMatrix(stacked))
    if not verdict.identifiable:
        print(
            f"warning: combined supervision is not identifiable ({verdict.reason}); "
            "training proceeds but distinct class distributions are indistinguishable",
            file=sys.stderr,
        )

    model_cfg = cfg.get("model", {})
    arch = build_architecture(model_cfg.get("architecture"))
    input_dim = int(model_cfg.get("input_dim", datasets[0].input_dim))
    params0 = model.init(arch, input_dim, n_z, int(model_cfg.get("seed", 0)))
    opt_cfg = OptimizerConfig.from_dict(require(cfg, "optimizer"))
    fn, n_total = pooled_objective(datasets)
    result = train(params0, fn, n_total, opt_cfg)

    metrics = {
        "final_train_loss": result.epoch_losses[-1] if result.epoch_losses else None,
        "n_iterations": result.n_iterations,
        "identifiable": verdict.identifiable,
    }
    eval_cfg = cfg.get("data", {}).get("eval")
    if eval_cfg:
        x, _, z = datagen.read_dataset_csv(require(cfg, "data.eval.csv"))
        if z is not None:
            metrics["test_accuracy"] = presets.accuracy(result.params, x, z)
    _json_dump(out / "checkpoint.json", result.params.to_dict())
    loss_lines = ["epoch,loss"] + [
        f"{i},{repr(v)}" for i, v in enumerate(result.epoch_losses)
    ]
    (out / "loss_curve.csv").write_text("\n".join(loss_lines) + "\n", encoding="utf-8")
    _json_dump(out / "metrics.json", metrics)
    _write_manifest(
        out,
        "train",
        cfg,
        {
            "transitions": [d.transition.to_dict() for d in datasets],
            "identifiability": verdict.to_dict(),
            "datasets": {
                str(s["csv"]): hashlib.sha256(Path(s["csv"]).read_bytes()).hexdigest()
                for s in cfg["data"]["sources"]
            },
        },
    )
    print(json.dumps(metrics, sort_keys=True))
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = load_config(args.config)
    params = model.ClassifierParams.from_dict(
        json.loads(Path(require(cfg, "model.checkpoint")).read_text(encoding="utf-8"))
    )
    x, _, z = datagen.read_dataset_csv(require(cfg, "data.eval.csv"))
    if z is None:
        raise ConfigError("eval dataset has no true-target column 'z'")
    acc = presets.accuracy(params, x, z)
    doc = {"test_accuracy": acc, "n_examples": int(len(z))}
    print(json.dumps(doc, sort_keys=True))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _json_dump(out / "eval.json", doc)
    return EXIT_OK


# ---------------------------------------------------------------------------
# fisher / identify
# ---------------------------------------------------------------------------


def _format_fisher_table(report: fisher.FisherReport) -> str:
    k = len(report.class_probs)
    lines = []
    lines.append(f"{'class':>6} {'prob':>10} {'var direct':>12} {'var indirect':>14}")
    for i in range(k):
        vi = report.asym_var_indirect[i]
        vi_str = "inf" if np.isinf(vi) else f"{vi:.6f}"
        lines.append(
            f"{i:>6} {report.class_probs[i]:>10.6f} "
            f"{report.asym_var_direct[i]:>12.6f} {vi_str:>14}"
        )
    lines.append(f"psd margin of (direct - indirect): {report.psd_margin:.3e}")
    v = report.identifiability
    lines.append(
        f"identifiable: {v.identifiable} (rank {v.rank} of {v.n_z}; "
        f"singular values {np.array2string(v.singular_values, precision=4)})"
    )
    return "\n".join(lines)


def cmd_fisher(args) -> int:
    cfg = load_config(args.config)
    fcfg = require(cfg, "fisher")
    p = SimplexVector(require(cfg, "fisher.class_probs"))
    m = build_transition(require(cfg, "fisher.transition"), "fisher.transition")
    rank_tol = float(fcfg.get("rank_tol", fisher.DEFAULT_RANK_TOL))
    report = fisher.fisher_report(p, m, rank_tol)
    print(_format_fisher_table(report))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _json_dump(out / "fisher_report.json", report.to_dict())
    return EXIT_OK if report.identifiability.identifiable else EXIT_NOT_IDENTIFIABLE


def cmd_identify(args) -> int:
    cfg = load_config(args.config)
    m = build_transition(require(cfg, "transition"), "transition")
    rank_tol = float(cfg.get("rank_tol", fisher.DEFAULT_RANK_TOL))
    verdict = fisher.check_identifiability(m, rank_tol)
    print(json.dumps(verdict.to_dict(), sort_keys=True))
    return EXIT_OK if verdict.identifiable else EXIT_NOT_IDENTIFIABLE


# ---------------------------------------------------------------------------
# plot
# ---------------------------------------------------------------------------


def cmd_plot(args) -> int:
    run_dir = Path(args.run_dir)
    if not run_dir.exists() or not (run_dir / "manifest.json").exists():
        raise FileNotFoundError(
            f"{run_dir} is not a run directory (no manifest.json); "
            "point --run at the output of 'train'"
        )
    wrote = []
    loss_csv = run_dir / "loss_curve.csv"
    if loss_csv.exists():
        rows = loss_csv.read_text(encoding="utf-8").strip().splitlines()[1:]
        losses = [float(r.split(",")[1]) for r in rows]
        (run_dir / "loss_curve.svg").write_text(
            svgplot.loss_curve_svg(losses), encoding="utf-8"
        )
        wrote.append("loss_curve.svg")
    manifest = json.loads((run_dir / "manifest.json").read_text(encoding="utf-8"))
    checkpoint = run_dir / "checkpoint.json"
    sources = manifest.get("config", {}).get("data", {}).get("sources", [])
    if checkpoint.exists() and sources:
        params = model.ClassifierParams.from_dict(
            json.loads(checkpoint.read_text(encoding="utf-8"))
        )
        x, _, _ = datagen.read_dataset_csv(sources[0]["csv"])
        try:
            svg = svgplot.decision_plot_svg(
                lambda grid: model.predict_proba_batch(params, grid),
                x,
                model.predict_proba_batch(params, x),
            )
        except UnsupportedDimension as e:
            print(f"scatter refused: {e}")
        else:
            (run_dir / "decision.svg").write_text(svg, encoding="utf-8")
            wrote.append("decision.svg")
    if not wrote:
        raise FileNotFoundError(f"nothing to plot in {run_dir}")
    print(f"wrote {', '.join(wrote)} in {run_dir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# fetch-adult / reproduce
# ---------------------------------------------------------------------------


def cmd_fetch_adult(args) -> int:
    raw = fetch(args.source_url or DEFAULT_SOURCE_URL, args.cache_dir)
    print(f"train: {raw.train_path}\ntest: {raw.test_path}")
    return EXIT_OK


def preset_config(name: str) -> dict:
    resource = importlib.resources.files("indirectml") / "configs" / f"{name}.json"
    if not resource.is_file():
        raise ConfigError(f"unknown experiment {name!r}")
    return json.loads(resource.read_text(encoding="utf-8"))


def _preset_constants(experiment: str) -> dict:
    """Resolved fixed constants recorded in the run manifest."""
    if experiment == "synthetic-llp":
        return {
            "mixture": datagen.default_mixture().to_dict(),
            "generating_transition": datagen.default_llp_transition().to_dict(),
        }
    if experiment == "coarse-combo":
        return {
            "mixture": datagen.ring_mixture(10).to_dict(),
            "partition": [list(g) for g in presets.COARSE_PARTITION],
        }
    if experiment == "adult-llp":
        from . import adult

        return {
            "grouping_maps": {
                name: dict(mapping) for name, mapping in adult.GROUPING_MAPS.items()
            },
            "country_fallback": adult.COUNTRY_FALLBACK,
            "feature_attributes": list(adult.FEATURE_ATTRIBUTES),
        }
    return {}


def _report_text(doc: dict) -> str:
    lines = [f"experiment: {doc['experiment']} (seed {doc['seed']})"]
    for c in doc["checks"]:
        status = "PASS" if c["ok"] else "FAIL"
        lines.append(f"[{status}] {c['name']}: {c['value']} expected {c['expected']}")
    lines.append("overall: " + ("PASS" if doc["ok"] else "FAIL"))
    return "\n".join(lines)


def cmd_reproduce(args) -> int:
    cfg = preset_config(args.experiment)
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 2026))
    trials = args.trials if args.trials is not None else int(cfg.get("trials", 1))
    out = Path(args.out or f"runs/{args.experiment}")
    out.mkdir(parents=True, exist_ok=True)

    first_trial = None
    if args.experiment == "synthetic-llp":
        doc, first_trial = presets.run_synthetic_llp(seed=seed, trials=trials)
    elif args.experiment == "coarse-combo":
        doc = presets.run_coarse_combo(seed=seed, trials=trials)
    elif args.experiment == "fisher-suite":
        doc = presets.run_fisher_suite(
            seed=seed,
            n_random=int(cfg.get("n_random", 100)),
            n_psd=int(cfg.get("n_psd", 1000)),
        )
    elif args.experiment == "adult-llp":
        doc = presets.run_adult_llp(
            seed=seed,
            trials=trials,
            source_url=args.source_url,
            cache_dir=args.cache_dir,
        )
    else:
        raise ConfigError(f"unknown experiment {args.experiment!r}")

    resolved = copy.deepcopy(cfg)
    resolved["seed"] = seed
    resolved["trials"] = trials
    _json_dump(out / "metrics.json", doc)
    (out / "report.txt").write_text(_report_text(doc) + "\n", encoding="utf-8")
    extras: dict = {"constants": _preset_constants(args.experiment)}
    if first_trial is not None:
        train_sample = first_trial["train_sample"]
        llp_fit = first_trial["llp"]
        (out / "loss_curve.svg").write_text(
            svgplot.loss_curve_svg(llp_fit.epoch_losses), encoding="utf-8"
        )
        (out / "decision.svg").write_text(
            svgplot.decision_plot_svg(
                lambda grid: model.predict_proba_batch(llp_fit.params, grid),
                train_sample.features,
                model.predict_proba_batch(llp_fit.params, train_sample.features),
            ),
            encoding="utf-8",
        )
        extras["estimated_transition"] = first_trial["estimated_transition"].to_dict()
        csv_digest = hashlib.sha256(
            "\n".join(
                ",".join(repr(float(v)) for v in row) for row in train_sample.features
            ).encode()
        ).hexdigest()
        extras["datasets"] = {"trial0_train_features": csv_digest}
    _write_manifest(out, f"reproduce {args.experiment}", resolved, extras)
    print(_report_text(doc))
    return EXIT_OK if doc["ok"] else EXIT_NUMERIC


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="indirectml",
        description=(
            "Train classifiers from weak supervision tied to the true label "
            "by a known conditional probability, and price supervision types "
            "by their information content."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="path to the JSON config")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="output directory")

    p = sub.add_parser("generate", help="write synthetic dataset files")
    add_common(p)
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("train", help="train on configured supervision sources")
    add_common(p)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint against true targets")
    add_common(p)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("fisher", help="information report for one (probs, matrix) pair")
    add_common(p)
    p.set_defaults(fn=cmd_fisher)

    p = sub.add_parser("identify", help="identifiability verdict for a transition matrix")
    add_common(p)
    p.set_defaults(fn=cmd_identify)

    p = sub.add_parser("plot", help="emit SVG plots for a finished run")
    p.add_argument("run_dir", help="directory written by 'train'")
    p.set_defaults(fn=cmd_plot)

    p = sub.add_parser("fetch-adult", help="download and cache the census dataset")
    p.add_argument("--source-url", default=None, help="override the download base URL")
    p.add_argument("--cache-dir", default=None, help="override the cache directory")
    p.set_defaults(fn=cmd_fetch_adult)

    p = sub.add_parser("reproduce", help="run a named preset end to end")
    p.add_argument(
        "experiment",
        choices=["synthetic-llp", "adult-llp", "coarse-combo", "fisher-suite"],
    )
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--trials", type=int, default=None, help="override trial count")
    p.add_argument("--out", default=None)
    p.add_argument("--source-url", default=None)
    p.add_argument("--cache-dir", default=None)
    p.set_defaults(fn=cmd_reproduce)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except _CONFIG_ERRORS as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except _NUMERIC_ERRORS as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except _DATA_ERRORS as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
