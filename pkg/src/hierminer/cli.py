"""Command-line surface: parse, mine, eval, synth.

Flags override values from an optional TOML config file; defaults follow
the standard hyperparameter setting (width 50, depth 4, top 20, alpha 0.2,
beta 0.8, gamma 0.2, eta 1, top 200 classes).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover - version dependent
    import tomli as tomllib

from .evaluation import (
    AttributeSpec,
    PlantedPattern,
    SyntheticSpec,
    generate_synthetic,
    run_comparison,
)
from .ingestion import (
    IngestionError,
    build_prior_table,
    load_dataset,
    load_priors,
    parse_jmap,
    read_attribute_table,
    save_dataset,
    save_priors,
    truncate_top_k,
    assemble_dataset,
)
from .miner import MinerConfig, sca_miner
from .patterns import Selector
from .scoring import MeasureParams, quantile_bucket

log = logging.getLogger(__name__)

CONFIG_KEYS = (
    "width",
    "depth",
    "top",
    "measure",
    "alpha",
    "beta",
    "gamma",
    "eta",
    "theta",
    "bins",
    "jaccard",
    "seed",
    "top_classes",
    "unit",
)


def _add_miner_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="TOML config file (flags win)")
    p.add_argument("--width", type=int, help="beam width (default 50)")
    p.add_argument("--depth", type=int, help="max selectors per description (default 4)")
    p.add_argument("--top", type=int, help="max patterns to emit (default 20)")
    p.add_argument(
        "--measure",
        choices=["si", "si_no_update", "cwracc", "kl"],
        help="interestingness measure (default si)",
    )
    p.add_argument("--alpha", type=float, help="quantile order (default 0.2)")
    p.add_argument("--beta", type=float, help="DL weight of log extent (default 0.8)")
    p.add_argument("--gamma", type=float, help="DL weight of selector count (default 0.2)")
    p.add_argument("--eta", type=float, help="DL weight of the antichain (default 1)")
    p.add_argument("--theta", type=float, help="CWRAcc size exponent (default 1)")
    p.add_argument("--bins", type=int, help="numeric selector bins (default 5)")
    p.add_argument("--jaccard", type=float, help="PP overlap threshold (default 0.5)")
    p.add_argument("--seed", type=int, help="random seed (default 0)")


def _load_config_file(path: Path | None) -> dict:
    if path is None:
        return {}
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    unknown = set(data) - set(CONFIG_KEYS)
    if unknown:
        raise IngestionError(f"unknown config keys: {sorted(unknown)}")
    return data


def _miner_config(args: argparse.Namespace) -> MinerConfig:
    cfg = _load_config_file(getattr(args, "config", None))

    def pick(flag: str, key: str, default):
        v = getattr(args, flag, None)
        if v is not None:
            return v
        return cfg.get(key, default)

    params = MeasureParams(
        alpha=pick("alpha", "alpha", 0.2),
        beta=pick("beta", "beta", 0.8),
        gamma=pick("gamma", "gamma", 0.2),
        eta=pick("eta", "eta", 1.0),
        theta=pick("theta", "theta", 1.0),
    )
    return MinerConfig(
        width=pick("width", "width", 50),
        depth=pick("depth", "depth", 4),
        threshold=pick("top", "top", 20),
        measure=pick("measure", "measure", "si"),
        params=params,
        bins=pick("bins", "bins", 5),
        jaccard_threshold=pick("jaccard", "jaccard", 0.5),
        random_seed=pick("seed", "seed", 0),
    )


def _objectid_from_filename(name: str) -> str:
    stem = Path(name).stem
    if "_" in stem:
        server, _, timestamp = stem.rpartition("_")
        return f"{server};{timestamp}"
    return stem


def _cmd_parse(args: argparse.Namespace) -> int:
    cfg = _load_config_file(args.config)
    top_classes = args.top_classes or cfg.get("top_classes", 200)
    unit = args.unit or cfg.get("unit", 1)
    schema, rows = read_attribute_table(args.attrs)
    histograms = {}
    files = sorted(Path(args.input).glob("*.txt"))
    if not files:
        raise IngestionError(f"no .txt histograms under {args.input}")
    for path in files:
        records = parse_jmap(path.read_text())
        histograms[_objectid_from_filename(path.name)] = truncate_top_k(
            records, top_classes
        )
    dataset = assemble_dataset(schema, rows, histograms, unit=unit)
    save_dataset(dataset, args.out)
    print(f"wrote {args.out}: {len(dataset)} objects, {len(dataset.tree)} concepts")
    if args.refs:
        ref_files = sorted(Path(args.refs).glob("*.txt"))
        refs = [
            (
                _objectid_from_filename(p.name),
                truncate_top_k(parse_jmap(p.read_text()), top_classes),
            )
            for p in ref_files
        ]
        priors = build_prior_table(refs, dataset.tree, unit=unit)
        out = args.priors_out or Path(args.out).with_suffix(".priors.json")
        save_priors(priors, dataset.tree, out)
        print(f"wrote {out}: priors from {len(refs)} reference histograms")
    return 0


def _pattern_report(dataset, patterns, config) -> dict:
    tree = dataset.tree
    entries = []
    for rank, p in enumerate(patterns, start=1):
        rows = np.array(p.extent_indices, dtype=np.int64)
        concepts = []
        for cid in sorted(p.antichain.concept_ids):
            vals = dataset.counter_matrix[rows, cid]
            concepts.append(
                {
                    "concept": tree.name_of(cid),
                    "scale": p.antichain.quantile_buckets[cid],
                    "min": int(vals.min()),
                    "quantile": int(
                        quantile_bucket(vals.tolist(), config.params.alpha)
                    ),
                    "avg": float(vals.mean()),
                    "max": int(vals.max()),
                }
            )
        entries.append(
            {
                "rank": rank,
                "pattern": p.render(tree),
                "description": str(p.subgroup),
                "si": p.si,
                "ic": p.ic,
                "dl": p.dl,
                "score": p.score,
                "extentSize": p.extent_size,
                "extent": [dataset.object_ids[i] for i in p.extent_indices],
                "antichain": concepts,
            }
        )
    return {"measure": config.measure, "patterns": entries}


def _report_markdown(report: dict) -> str:
    lines = [f"# Mining report ({report['measure']})", ""]
    for e in report["patterns"]:
        lines.append(
            f"## {e['rank']}. {e['pattern']}"
        )
        lines.append(
            f"SI = {e['si']:.4f} (IC {e['ic']:.2f}, DL {e['dl']:.2f}), "
            f"extent {e['extentSize']}"
        )
        lines.append("")
        lines.append("| concept | scale | min | q | avg | max |")
        lines.append("| --- | --- | --- | --- | --- | --- |")
        for c in e["antichain"]:
            lines.append(
                f"| {c['concept']} | {c['scale']} | {c['min']} | "
                f"{c['quantile']} | {c['avg']:.1f} | {c['max']} |"
            )
        lines.append("")
    return "\n".join(lines)


def _cmd_mine(args: argparse.Namespace) -> int:
    config = _miner_config(args)
    dataset = load_dataset(args.dataset)
    priors = load_priors(args.priors, dataset.tree)
    patterns = sca_miner(dataset, priors, config)
    report = _pattern_report(dataset, patterns, config)
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(report, fh, indent=1, sort_keys=True)
            fh.write("\n")
    if args.md:
        Path(args.md).write_text(_report_markdown(report))
    for e in report["patterns"]:
        print(
            f"{e['rank']:3d}. {e['pattern']}  "
            f"SI={e['si']:.4f} IC={e['ic']:.2f} DL={e['dl']:.2f} "
            f"extent={e['extentSize']}"
        )
    if not patterns:
        print("no pattern found")
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    config = _miner_config(args)
    dataset = load_dataset(args.dataset)
    priors = load_priors(args.priors, dataset.tree)
    report = run_comparison(dataset, priors, config, k=config.threshold)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "patterns.csv").write_text(report.patterns_csv(dataset.tree))
    (out_dir / "summary.csv").write_text(report.summary_csv())
    (out_dir / "summary.md").write_text(report.markdown_table())
    print(report.markdown_table())
    return 0


def default_synthetic_spec(
    seed: int, objects: int = 300, anomalies: int = 3
) -> SyntheticSpec:
    """The standard planted scenario: overlapping anomalies on a mid-size tree."""
    attributes = (
        AttributeSpec("softType", "categorical", ("Sales", "Factory", "EDI", "Manager")),
        AttributeSpec("softVersion", "categorical", ("V_1", "V_2", "V_3")),
        AttributeSpec("Xmx", "numeric", low=1e9, high=9e9),
        AttributeSpec("weekDay", "boolean"),
    )
    planted = tuple(
        PlantedPattern(
            selectors=(
                Selector("softType", "equals", ("Sales", "Factory", "EDI")[i % 3]),
                Selector("softVersion", "equals", ("V_1", "V_2", "V_3")[i % 3]),
            ),
            target_concepts=(f"p{i}.p0", f"p{i}.p1"),
            inflation=4.0,
        )
        for i in range(anomalies)
    )
    return SyntheticSpec(
        object_count=objects,
        attributes=attributes,
        tree_depth=3,
        branching=6,
        planted=planted,
        noise=(0.9, 1.1),
        seed=seed,
    )


def _cmd_synth(args: argparse.Namespace) -> int:
    spec = default_synthetic_spec(
        seed=args.seed if args.seed is not None else 7,
        objects=args.objects,
        anomalies=args.anomalies,
    )
    dataset, priors, truth = generate_synthetic(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_dataset(dataset, out / "dataset.json")
    save_priors(priors, dataset.tree, out / "priors.json")
    payload = [
        {
            "description": t["description"],
            "extent": sorted(dataset.object_ids[i] for i in t["extent"]),
            "concepts": sorted(
                dataset.tree.name_of(c) for c in t["concept_ids"]
            ),
        }
        for t in truth.patterns
    ]
    with open(out / "ground_truth.json", "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")
    print(f"wrote dataset ({len(dataset)} objects), priors and ground truth to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hierminer",
        description="Mine contrastive subgroup patterns from hierarchical counters",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="convert jmap histograms to a dataset JSON")
    p.add_argument("--in", dest="input", required=True, help="histogram directory")
    p.add_argument("--attrs", required=True, help="attributes CSV")
    p.add_argument("--out", required=True, help="dataset JSON output path")
    p.add_argument("--refs", help="reference histogram directory for priors")
    p.add_argument("--priors-out", type=Path, help="priors JSON output path")
    p.add_argument("--top-classes", type=int, help="top classes per histogram (200)")
    p.add_argument("--unit", type=int, help="counter unit divisor (1 = bytes)")
    p.add_argument("--config", type=Path)
    p.set_defaults(func=_cmd_parse)

    p = sub.add_parser("mine", help="run the pattern miner")
    p.add_argument("--dataset", required=True)
    p.add_argument("--priors", required=True)
    p.add_argument("--out", help="report JSON path")
    p.add_argument("--md", help="report markdown path")
    _add_miner_flags(p)
    p.set_defaults(func=_cmd_mine)

    p = sub.add_parser("eval", help="compare measures on one dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--priors", required=True)
    p.add_argument("--out-dir", required=True)
    _add_miner_flags(p)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("synth", help="generate a planted synthetic dataset")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--objects", type=int, default=300)
    p.add_argument("--anomalies", type=int, default=3)
    p.set_defaults(func=_cmd_synth)
    return parser


def dispatch(argv: list[str] | None = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.WARNING)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code else 0
    try:
        return args.func(args)
    except (IngestionError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # internal failure
        log.exception("internal error: %s", exc)
        return 2


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
