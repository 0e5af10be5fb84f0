"""Command line front end.

Subcommands: ``synth``, ``extract``, ``optimize``, ``fuse``, ``evaluate``,
``stats``, ``plot`` and ``run`` (the whole pipeline from one TOML/JSON
config). Seeds resolve as: explicit ``--seed`` flag, else the ``PHAR_SEED``
environment variable, else the config file's value, else 0.

``run`` fans one root seed out per stage by hashing ``"{root}:{stage}"``, so
adding or removing a stage never reshuffles another stage's randomness. Every
output is written to ``<name>.partial`` and atomically renamed; an aborted
run leaves only ``.partial`` debris, never a torn file. ``manifest.json``
records the config digest, input/output digests, per-stage seeds and wall
times; it is the one output that varies (timings) between identical runs.
"""

from __future__ import annotations

import argparse
import contextlib
import dataclasses
import hashlib
import json
import os
import re
import sys
import time
from pathlib import Path
from typing import Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # 3.10
    import tomli as tomllib

from . import __version__
from .attrib import (
    load_attributions,
    make_synthetic_attributions,
    occlusion_attribution,
    parse_anchor_rules,
    save_attributions,
)
from .core import load_rules, save_rules
from .data import load_dataset, make_synthetic, save_dataset_json
from .extract import ExtractionConfig, extract_ruleset
from .fuse import FUSION_METHODS, FusionConfig, finalize, fuse_rulesets
from .metrics import load_report, report, save_report
from .predict import make_predictor
from .stats import PairedSample, friedman, nemenyi, rank_rows, wilcoxon
from .tune import (
    TuneConfig,
    load_extraction_config,
    save_extraction_config_toml,
    save_trials_csv,
    tune,
)
from .viz import PlotSpec, render_svg

__all__ = ["main"]


class CliError(Exception):
    """Bad invocation or config; exits with status 2."""


class StageError(Exception):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage} failed: {cause}")
        self.stage = stage
        self.cause = cause


# ---------------------------------------------------------------------------
# shared plumbing


def _env_seed() -> Optional[int]:
    raw = os.environ.get("PHAR_SEED")
    if raw is None:
        return None
    try:
        return int(raw)
    except ValueError:
        raise CliError(f"PHAR_SEED must be an integer, got {raw!r}") from None


def _resolve_seed(flag: Optional[int], fallback: int) -> int:
    if flag is not None:
        return flag
    env = _env_seed()
    if env is not None:
        return env
    return fallback


def stage_seed(root: int, stage: str) -> int:
    digest = hashlib.sha256(f"{root}:{stage}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def _sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _atomic_write(path: Path, writer) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".partial")
    writer(tmp)
    os.replace(tmp, path)


def _write_json(obj, path: Path) -> None:
    Path(path).write_text(
        json.dumps(obj, indent=1, sort_keys=True) + "\n", encoding="utf-8"
    )


def _sanitize(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9+_.-]", "-", name)


def _jobs(flag: Optional[int]) -> int:
    return flag if flag else (os.cpu_count() or 1)


# ---------------------------------------------------------------------------
# subcommands


def cmd_synth(args) -> int:
    seed = _resolve_seed(args.seed, 0)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ds = make_synthetic(
        args.n, args.timesteps, args.channels, seed=seed, noise=args.noise,
        name=args.name,
    )
    _atomic_write(out / "dataset.json", lambda p: save_dataset_json(ds, p))
    tags = [t.strip() for t in args.sources.split(",") if t.strip()]
    if not tags:
        raise CliError("--sources must name at least one source")
    entries = []
    for tag in tags:
        if tag.upper() == "OCC":
            tensor = occlusion_attribution(ds, make_predictor("centroid", ds))
            tensor = dataclasses.replace(tensor, tag=tag)
        else:
            tensor = make_synthetic_attributions(
                ds, tag, seed=stage_seed(seed, f"attr:{tag}"), noise=args.attr_noise
            )
        _atomic_write(out / f"{tag}.csv", lambda p, t=tensor: save_attributions(t, p))
        entries.append({"path": f"{tag}.csv", "tag": tag})
    config = {
        "seed": seed,
        "dataset": {"path": "dataset.json", "name": ds.name},
        "predictor": {"spec": "centroid"},
        "attributions": entries,
        "extract": {"n_samples": args.n_samples, "percentile": 90, "split": "test"},
        "fusion": {"methods": list(FUSION_METHODS)},
        "stats": {"enabled": True},
        "plot": {"enabled": True},
    }
    _atomic_write(out / "run_config.json", lambda p: _write_json(config, p))
    print(f"{out}: dataset.json + {len(tags)} attribution source(s) + run_config.json")
    return 0


def cmd_extract(args) -> int:
    dataset = load_dataset(args.dataset)
    predictor = make_predictor(args.predictor, dataset)
    attr_path = Path(args.attr)
    if attr_path.suffix.lower() == ".txt":
        # rule text (high-precision explainer output) ingests directly
        rs = parse_anchor_rules(attr_path, dataset, tag=args.tag or "ANCHOR")
    else:
        if args.config:
            config = load_extraction_config(args.config)
        else:
            config = ExtractionConfig()
        config = dataclasses.replace(
            config, seed=_resolve_seed(args.seed, config.seed)
        )
        attr = load_attributions(attr_path, dataset, tag=args.tag)
        rs = extract_ruleset(
            dataset, attr, predictor, config, split=args.split, jobs=_jobs(args.jobs)
        )
    _atomic_write(Path(args.out), lambda p: save_rules(rs, p))
    print(f"{args.out}: {rs.n_explained}/{len(rs.rules)} instances explained")
    return 0


def cmd_evaluate(args) -> int:
    dataset = load_dataset(args.dataset)
    predictor = make_predictor(args.predictor, dataset)
    rs = load_rules(args.rules)
    rep = report(rs, dataset, predictor, split=args.split)
    _atomic_write(Path(args.out), lambda p: save_report(rep, p))
    print(
        f"{args.out}: mean_M={rep.metrics['mean_M']:.4f} ER={rep.metrics['ER']:.2f}"
    )
    return 0


def cmd_optimize(args) -> int:
    parts = [s.strip() for s in args.out.split(",")]
    if len(parts) != 2:
        raise CliError("--out needs two comma-separated paths: best.toml,trials.csv")
    dataset = load_dataset(args.dataset)
    predictor = make_predictor(args.predictor, dataset)
    attr = load_attributions(args.attr, dataset, tag=args.tag)
    tc = TuneConfig(
        trials=args.trials,
        seed=_resolve_seed(args.seed, 0),
        pruning=args.pruning,
        defaults_shortcut=args.defaults_shortcut,
    )
    result = tune(dataset, attr, predictor, tc, split=args.split)
    _atomic_write(Path(parts[0]), lambda p: save_extraction_config_toml(result.best_config, p))
    _atomic_write(Path(parts[1]), lambda p: save_trials_csv(result, p))
    print(f"{parts[0]}: best objective {result.best_objective:.6f}")
    return 0


def cmd_fuse(args) -> int:
    rulesets = [load_rules(p) for p in args.rules]
    fc = FusionConfig(
        method=args.method,
        weight_metric=args.weight_metric,
        presence_tau=args.presence_tau,
        lam=args.lam,
        seed=_resolve_seed(args.seed, 0),
    )
    dataset = predictor = None
    if args.dataset:
        dataset = load_dataset(args.dataset)
        predictor = make_predictor(args.predictor, dataset)
    fused = fuse_rulesets(rulesets, fc, dataset=dataset, predictor=predictor)
    if dataset is not None and not args.no_finalize:
        fused = finalize(fused, dataset, predictor, split=args.split)
    _atomic_write(Path(args.out), lambda p: save_rules(fused, p))
    print(f"{args.out}: {fused.provenance}, {fused.n_explained} rules")
    return 0


def _stats_matrix(reports, metric: str):
    """Blocks-by-methods score matrix from saved evaluation reports.

    With reports from several datasets, blocks are datasets and cells the
    aggregate metric. With a single dataset, blocks fall back to the
    instances shared by all reports and cells are the per-instance value
    (``mean_M`` -> ``M``).
    """
    ds_names = sorted({r.dataset for r in reports})
    if len(ds_names) > 1:
        by = {}
        for r in reports:
            key = (r.dataset, r.provenance)
            if key in by:
                raise CliError(f"two reports for {key}")
            by[key] = r
        provs = sorted({r.provenance for r in reports})
        matrix = np.empty((len(ds_names), len(provs)))
        for i, ds in enumerate(ds_names):
            for j, m in enumerate(provs):
                if (ds, m) not in by:
                    raise CliError(f"no report for method {m!r} on dataset {ds!r}")
                try:
                    v = by[ds, m].metric(metric)
                except KeyError as exc:
                    raise CliError(str(exc)) from None
                if v is None:
                    raise CliError(f"metric {metric!r} undefined for {m!r} on {ds!r}")
                matrix[i, j] = v
        return matrix, provs, ds_names, "datasets"
    provs = []
    for r in reports:
        if r.provenance in provs:
            raise CliError(f"duplicate method {r.provenance!r} among the reports")
        provs.append(r.provenance)
    base = metric[5:] if metric.startswith("mean_") else metric
    common = sorted(set.intersection(*[set(r.per_instance) for r in reports]))
    if not common:
        raise CliError("reports share no explained instances")
    matrix = np.empty((len(common), len(provs)))
    for i, n in enumerate(common):
        for j, r in enumerate(reports):
            row = r.per_instance[n]
            if base not in row:
                raise CliError(
                    f"unknown per-instance metric {base!r}; have {sorted(row)}"
                )
            if row[base] is None:
                raise CliError(
                    f"{provs[j]}: {base!r} undefined for instance {n}; try mean_M"
                )
            matrix[i, j] = row[base]
    return matrix, provs, common, "instances"


def _run_tests(matrix, provs, test: str, alpha: float):
    tests = {}
    cd_diagram = None
    if test == "wilcoxon":
        if len(provs) != 2:
            raise CliError(f"wilcoxon needs exactly two methods, got {len(provs)}")
        res = wilcoxon(
            PairedSample.from_arrays(
                matrix[:, 0], matrix[:, 1], labels=(provs[0], provs[1])
            )
        )
        tests["wilcoxon"] = {
            "w": res.w,
            "p": res.p,
            "w_plus": res.w_plus,
            "w_minus": res.w_minus,
            "n_effective": res.n_effective,
            "method": res.method,
        }
        return tests, cd_diagram
    table = rank_rows(matrix, methods=provs)
    cd_diagram = [
        {"method": m, "mean_rank": float(r), "cd": table.cd_value}
        for m, r in zip(provs, table.mean_ranks)
    ]
    if test in ("friedman", "both"):
        res = friedman(matrix)
        tests["friedman"] = {"chi2": res.chi2, "p": res.p, "dof": len(provs) - 1}
    if test in ("nemenyi", "both"):
        res = nemenyi(table, alpha=alpha)
        tests["nemenyi"] = {
            "alpha": res.alpha,
            "cd": res.cd,
            "mean_ranks": res.mean_ranks.tolist(),
            "q": res.q.tolist(),
            "p_raw": res.p_raw.tolist(),
            "p_report": res.p_report.tolist(),
        }
    return tests, cd_diagram


def cmd_stats(args) -> int:
    reports = [load_report(p) for p in args.reports]
    matrix, provs, blocks, mode = _stats_matrix(reports, args.metric)
    tests, cd_diagram = _run_tests(matrix, provs, args.test, args.alpha)
    obj = {
        "test": args.test,
        "metric": args.metric,
        "mode": mode,
        "methods": provs,
        "blocks": [b if isinstance(b, str) else int(b) for b in blocks],
        "tests": tests,
    }
    if cd_diagram is not None:
        obj["cd_diagram"] = cd_diagram
    _atomic_write(Path(args.out), lambda p: _write_json(obj, p))
    for name, res in tests.items():
        p_val = res.get("p")
        print(f"{name}: " + (f"p={p_val:.6g}" if p_val is not None else "done"))
    return 0


def cmd_plot(args) -> int:
    if args.format != "svg":
        raise CliError(f"only svg output is supported, not {args.format!r}")
    dataset = load_dataset(args.dataset)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    spec = PlotSpec(split=args.split)
    for rules_path in args.rules:
        rs = load_rules(rules_path)
        target = out / f"{dataset.name}_{_sanitize(rs.provenance)}.{args.format}"
        _atomic_write(target, lambda p, r=rs: render_svg(dataset, r, spec, p))
        print(target)
    return 0


# ---------------------------------------------------------------------------
# run pipeline


def _load_run_config(path: Path):
    raw = path.read_bytes()
    if path.suffix.lower() == ".toml":
        cfg = tomllib.loads(raw.decode("utf-8"))
    else:
        cfg = json.loads(raw.decode("utf-8"))
    if not isinstance(cfg, dict):
        raise CliError(f"{path}: config must be a table/object")
    return cfg, hashlib.sha256(raw).hexdigest()


def _extract_base_config(cfg: dict):
    section = dict(cfg.get("extract", {}))
    split = section.pop("split", "test")
    known = {f.name for f in dataclasses.fields(ExtractionConfig)}
    unknown = sorted(set(section) - known)
    if unknown:
        raise CliError(f"unknown extract option(s): {unknown}")
    return ExtractionConfig(**section), split


def cmd_run(args) -> int:
    cfg_path = Path(args.config)
    cfg, cfg_digest = _load_run_config(cfg_path)
    base_dir = cfg_path.parent
    root_seed = _resolve_seed(args.seed, int(cfg.get("seed", 0)))
    out_dir = Path(args.out) if args.out else base_dir / "run_out"
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = _jobs(args.jobs)

    stage_records: list[dict] = []
    inputs: dict[str, str] = {}
    outputs: list[str] = []

    @contextlib.contextmanager
    def stage(name: str, seed: Optional[int] = None):
        t0 = time.perf_counter()
        try:
            yield
        except Exception as exc:
            raise StageError(name, exc) from exc
        rec = {"name": name, "wall_time_s": round(time.perf_counter() - t0, 6)}
        if seed is not None:
            rec["seed"] = seed
        stage_records.append(rec)
        print(f"[{name}] {rec['wall_time_s']:.2f}s")

    def emit(name: str, writer):
        _atomic_write(out_dir / name, writer)
        outputs.append(name)

    with stage("load"):
        ds_cfg = cfg.get("dataset")
        if not ds_cfg or "path" not in ds_cfg:
            raise ValueError("config needs a [dataset] section with a path")
        ds_path = base_dir / ds_cfg["path"]
        dataset = load_dataset(ds_path, name=ds_cfg.get("name"))
        inputs[str(ds_cfg["path"])] = _sha256(ds_path)
        predictor = make_predictor(
            cfg.get("predictor", {}).get("spec", "centroid"), dataset
        )
        sources = []  # (tag, "attr" | "rules", payload)
        for entry in cfg.get("attributions", []):
            p = base_dir / entry["path"]
            tag = entry.get("tag") or Path(entry["path"]).stem
            if any(t == tag for t, _, _ in sources):
                raise ValueError(f"duplicate source tag {tag!r}")
            inputs[str(entry["path"])] = _sha256(p)
            if p.suffix.lower() == ".txt":
                sources.append((tag, "rules", parse_anchor_rules(p, dataset, tag=tag)))
            else:
                sources.append((tag, "attr", load_attributions(p, dataset, tag=tag)))
        if not sources:
            raise ValueError("config lists no attribution sources")
        base_extract, split = _extract_base_config(cfg)

    tune_cfg = cfg.get("tune", {})
    if tune_cfg.get("enabled", False):
        seed = stage_seed(root_seed, "tune")
        with stage("tune", seed=seed):
            first_attr = next((pl for _, k, pl in sources if k == "attr"), None)
            if first_attr is None:
                raise ValueError("tuning needs at least one attribution source")
            tc = TuneConfig(
                trials=int(tune_cfg.get("trials", 30)),
                seed=seed,
                pruning=tune_cfg.get("pruning", "median"),
                defaults_shortcut=bool(tune_cfg.get("defaults_shortcut", False)),
            )
            result = tune(dataset, first_attr, predictor, tc, split=split)
            base_extract = result.best_config
            emit("tuned_config.toml",
                 lambda p: save_extraction_config_toml(result.best_config, p))
            emit("trials.csv", lambda p: save_trials_csv(result, p))

    produced: list = []  # rulesets in order: sources then fusions
    reports = []
    for tag, kind, payload in sources:
        sname = f"extract:{tag}"
        seed = stage_seed(root_seed, sname)
        with stage(sname, seed=seed):
            if kind == "rules":
                rs = payload
            else:
                ecfg = dataclasses.replace(base_extract, seed=seed)
                rs = extract_ruleset(
                    dataset, payload, predictor, ecfg, split=split, jobs=jobs
                )
            emit(f"rules_{tag}.json", lambda p, r=rs: save_rules(r, p))
        with stage(f"evaluate:{tag}"):
            rep = report(rs, dataset, predictor, split=split)
            emit(f"report_{tag}.json", lambda p, r=rep: save_report(r, p))
        produced.append(rs)
        reports.append(rep)

    fusion_cfg = cfg.get("fusion", {})
    for method in fusion_cfg.get("methods", []):
        sname = f"fuse:{method}"
        seed = stage_seed(root_seed, sname)
        with stage(sname, seed=seed):
            fc = FusionConfig(
                method=method,
                weight_metric=fusion_cfg.get("weight_metric", "M"),
                presence_tau=float(fusion_cfg.get("presence_tau", 0.5)),
                lam=fusion_cfg.get("lam"),
                seed=seed,
            )
            fused = fuse_rulesets(
                produced[: len(sources)], fc, dataset=dataset, predictor=predictor
            )
            fused = finalize(fused, dataset, predictor, split=split)
            emit(f"fused_{fc.method}.json", lambda p, r=fused: save_rules(r, p))
        with stage(f"evaluate:fused_{fc.method}"):
            rep = report(fused, dataset, predictor, split=split)
            emit(f"report_fused_{fc.method}.json", lambda p, r=rep: save_report(r, p))
        produced.append(fused)
        reports.append(rep)

    stats_cfg = cfg.get("stats", {})
    if stats_cfg.get("enabled", True) and len(reports) >= 2:
        with stage("stats"):
            provs = [r.provenance for r in reports]
            common = sorted(set.intersection(*[set(r.per_instance) for r in reports]))
            matrix = np.array(
                [[r.per_instance[n]["M"] for r in reports] for n in common]
            )
            which = "wilcoxon" if len(provs) == 2 else (
                "both" if len(provs) <= 20 else "friedman"
            )
            tests, cd_diagram = _run_tests(
                matrix, provs, which, float(stats_cfg.get("alpha", 0.05))
            )
            obj = {
                "metric": "M",
                "mode": "instances",
                "methods": provs,
                "blocks": [int(n) for n in common],
                "tests": tests,
            }
            if cd_diagram is not None:
                obj["cd_diagram"] = cd_diagram
            emit("stats.json", lambda p: _write_json(obj, p))

    plot_cfg = cfg.get("plot", {})
    if plot_cfg.get("enabled", True):
        with stage("plot"):
            if plot_cfg.get("format", "svg") != "svg":
                raise ValueError("only svg plots are supported")
            spec = PlotSpec(split=split)
            for rs in produced:
                name = f"{dataset.name}_{_sanitize(rs.provenance)}.svg"
                emit(name, lambda p, r=rs: render_svg(dataset, r, spec, p))

    manifest = {
        "tool": f"phar {__version__}",
        "config": cfg_path.name,
        "config_digest": cfg_digest,
        "root_seed": root_seed,
        "inputs": inputs,
        "stages": stage_records,
        "outputs": {name: _sha256(out_dir / name) for name in sorted(outputs)},
    }
    _atomic_write(out_dir / "manifest.json", lambda p: _write_json(manifest, p))
    print(f"{len(outputs)} outputs in {out_dir}")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="phar",
        description="Interval rules from attribution tensors: extract, fuse, "
        "evaluate, compare and plot.",
    )
    parser.add_argument(
        "--version", action="version", version=f"phar {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset bundle")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=60)
    p.add_argument("--timesteps", type=int, default=24)
    p.add_argument("--channels", type=int, default=1)
    p.add_argument("--noise", type=float, default=0.25)
    p.add_argument("--attr-noise", type=float, default=0.3)
    p.add_argument("--name", default="synth")
    p.add_argument("--sources", default="LIME,SHAP,GRAD",
                   help="comma list; OCC produces occlusion attributions")
    p.add_argument("--n-samples", type=int, default=2000,
                   help="perturbation sample count written into run_config")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("extract", help="derive interval rules from attributions")
    p.add_argument("--dataset", required=True)
    p.add_argument("--attr", required=True,
                   help="attribution CSV, or rule text (.txt) ingested as-is")
    p.add_argument("--config", help="extraction config TOML/JSON")
    p.add_argument("--predictor", default="centroid")
    p.add_argument("--split", default="test")
    p.add_argument("--tag", help="source tag (default: file stem)")
    p.add_argument("--jobs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("optimize", help="random-search extraction hyperparameters")
    p.add_argument("--dataset", required=True)
    p.add_argument("--attr", required=True)
    p.add_argument("--tag")
    p.add_argument("--predictor", default="centroid")
    p.add_argument("--trials", type=int, default=30)
    p.add_argument("--pruning", choices=("median", "none"), default="median")
    p.add_argument("--defaults-shortcut", action="store_true")
    p.add_argument("--split", default="test")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="best.toml,trials.csv")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("fuse", help="combine rule sets from several sources")
    p.add_argument("--rules", nargs="+", required=True)
    p.add_argument("--method", required=True,
                   choices=tuple(FUSION_METHODS) + ("lasso",))
    p.add_argument("--dataset", help="needed for lasso methods and finalizing")
    p.add_argument("--predictor", default="centroid")
    p.add_argument("--weight-metric", choices=("confidence", "coverage", "M"),
                   default="M")
    p.add_argument("--presence-tau", type=float, default=0.5)
    p.add_argument("--lam", type=float)
    p.add_argument("--split", default="test")
    p.add_argument("--no-finalize", action="store_true",
                   help="keep source metrics instead of re-evaluating")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("evaluate", help="score a rule set on a dataset")
    p.add_argument("--rules", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--predictor", default="centroid")
    p.add_argument("--split", default="test")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("stats", help="nonparametric comparisons across reports")
    p.add_argument("--reports", nargs="+", required=True)
    p.add_argument("--test", choices=("wilcoxon", "friedman", "nemenyi"),
                   required=True)
    p.add_argument("--metric", default="mean_M")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("plot", help="render class-grid figures for rule sets")
    p.add_argument("--dataset", required=True)
    p.add_argument("--rules", nargs="+", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--format", default="svg")
    p.add_argument("--split", default="test")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("run", help="run the configured pipeline end to end")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="output directory (default: run_out next to config)")
    p.add_argument("--jobs", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_run)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except StageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - single surfacing point
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
