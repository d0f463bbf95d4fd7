"""Operator-facing pipeline: every stage reads and writes files, so a chain
of subcommands is byte-equivalent to the in-process path.

Subcommands: decompose, gen-train, augment, train, integrate, baseline,
eval, ablate, gradcheck. All take --config (a JSON run config), --seed, and
--out; logs go to stderr, data only to files. Exit codes: 0 success,
1 usage/config error, 2 data error, 3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from pathlib import Path

from . import assemble, baseline, evaluate, learner, mapping, perturb
from .canon import SynonymDictionary, UnknownDictionary
from .core import SuperCell, read_cells, write_cells
from .datasets import Fixture
from .ingest import (
    EmptyInput,
    MissingKeyColumn,
    NoRuleMatchedAnything,
    RaggedRow,
    RawTable,
    decompose,
    decompose_log,
)

_CONFIG_KEYS = {
    "sources", "dictionaries", "mapping_spec", "plan", "model",
    "out_dir", "learner", "seed",
}

DATA_ERRORS = (
    EmptyInput, RaggedRow, MissingKeyColumn, NoRuleMatchedAnything,
    UnknownDictionary, mapping.SpecViolation, mapping.KeyResolutionFailure,
    baseline.UncoverableAttribute, baseline.EmptyColumn, learner.EmptyEvalSet,
    FileNotFoundError, json.JSONDecodeError, KeyError, re.error,
)


class UsageError(ValueError):
    pass


def log(message: str) -> None:
    print(message, file=sys.stderr)


def load_config(path: str, seed: int | None, out: str | None) -> dict:
    with open(path, encoding="utf-8") as fh:
        config = json.load(fh)
    unknown = set(config) - _CONFIG_KEYS
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    base = Path(path).resolve().parent

    def resolve(p: str) -> Path:
        candidate = Path(p)
        return candidate if candidate.is_absolute() else base / candidate

    config["_base"] = base
    config["_resolve"] = resolve
    if seed is not None:
        config["seed"] = seed
    if out is not None:
        config["out_dir"] = out
    config.setdefault("seed", 0)
    config.setdefault("out_dir", "runs")
    return config


def _out_dir(config: dict) -> Path:
    out = Path(config["out_dir"])
    if not out.is_absolute():
        out = config["_base"] / out
    out.mkdir(parents=True, exist_ok=True)
    return out


def _dictionaries(config: dict) -> dict:
    out = {}
    for name, rel in config.get("dictionaries", {}).items():
        out[name] = SynonymDictionary.load(name, config["_resolve"](rel))
    return out


def _spec(config: dict) -> mapping.MappingSpec:
    if "mapping_spec" not in config:
        raise UsageError("config needs a 'mapping_spec' path")
    return mapping.MappingSpec.load(config["_resolve"](config["mapping_spec"]))


def _decompose_all(config: dict, spec: mapping.MappingSpec, dictionaries) -> dict[str, list[SuperCell]]:
    by_id = {d.source_id: d for d in spec.sources}
    corpora: dict[str, list[SuperCell]] = {}
    for entry in config.get("sources", []):
        desc = by_id.get(entry["source_id"])
        if desc is None:
            raise UsageError(f"source {entry['source_id']!r} not in mapping spec")
        path = config["_resolve"](entry["path"])
        if desc.format == "log_lines":
            lines = path.read_text(encoding="utf-8").splitlines()
            corpora[desc.source_id] = decompose_log(lines, desc, dictionaries)
        else:
            corpora[desc.source_id] = decompose(RawTable.read(path), desc, dictionaries)
    return corpora


def _read_corpora(path: Path) -> dict[str, list[SuperCell]]:
    corpora: dict[str, list[SuperCell]] = {}
    with open(path, encoding="utf-8") as fh:
        for cell in read_cells(fh):
            corpora.setdefault(cell.source_id, []).append(cell)
    return corpora


def _fixture(config: dict, spec, dictionaries, corpora) -> Fixture:
    tables = {}
    for entry in config.get("sources", []):
        desc = spec.descriptor(entry["source_id"])
        if desc.format != "log_lines":
            tables[entry["source_id"]] = RawTable.read(config["_resolve"](entry["path"]))
    return Fixture(
        spec=spec, tables=tables, corpora=corpora, dictionaries=dictionaries,
        parent_component=spec.parent_components(),
    )


def cmd_decompose(config: dict) -> int:
    dictionaries = _dictionaries(config)
    spec = _spec(config)
    corpora = _decompose_all(config, spec, dictionaries)
    out = _out_dir(config) / "supercells.jsonl"
    n = 0
    with open(out, "w", encoding="utf-8") as fh:
        for desc in spec.sources:
            n += write_cells(corpora.get(desc.source_id, ()), fh)
    log(f"decompose: {n} super cells -> {out}")
    return 0


def cmd_gen_train(config: dict) -> int:
    dictionaries = _dictionaries(config)
    spec = _spec(config)
    corpora = _read_corpora(_out_dir(config) / "supercells.jsonl")
    samples = mapping.generate_training_data(spec, corpora, dictionaries)
    out = _out_dir(config) / "samples.jsonl"
    with open(out, "w", encoding="utf-8") as fh:
        for sample in samples:
            fh.write(sample.to_json() + "\n")
    log(f"gen-train: {len(samples)} samples -> {out}")
    return 0


def cmd_augment(config: dict) -> int:
    dictionaries = _dictionaries(config)
    spec = _spec(config)
    out_dir = _out_dir(config)
    if "plan" not in config:
        raise UsageError("config needs a 'plan' path")
    plan = perturb.PerturbationPlan.load(config["_resolve"](config["plan"]))
    corpora = _read_corpora(out_dir / "supercells.jsonl")
    cells = [c for d in spec.sources for c in corpora.get(d.source_id, ())]
    with open(out_dir / "samples.jsonl", encoding="utf-8") as fh:
        samples = [mapping.LabeledSample.from_json(line) for line in fh if line.strip()]
    plog = perturb.PerturbationLog()
    augmented = perturb.augment(
        samples, plan, dictionaries,
        corpus=cells if len(cells) == len(samples) else None,
        hierarchy=spec.key_hierarchy,
        parent_component=spec.parent_components() or None,
        log=plog,
    )
    out = out_dir / "augmented.jsonl"
    with open(out, "w", encoding="utf-8") as fh:
        for sample in augmented:
            fh.write(sample.to_json() + "\n")
    plog.dump(out_dir / "perturb_log.jsonl")
    log(f"augment: {len(samples)} -> {len(augmented)} samples -> {out}")
    return 0


def _train_config(config: dict) -> learner.TrainConfig:
    cfg = learner.TrainConfig(**config.get("learner", {}))
    cfg.seed = int(config.get("seed", cfg.seed))
    return cfg


def cmd_train(config: dict) -> int:
    dictionaries = _dictionaries(config)
    spec = _spec(config)
    out_dir = _out_dir(config)
    samples_path = out_dir / "augmented.jsonl"
    if not samples_path.exists():
        samples_path = out_dir / "samples.jsonl"
    with open(samples_path, encoding="utf-8") as fh:
        samples = [mapping.LabeledSample.from_json(line) for line in fh if line.strip()]
    kinds_by_attr = spec.key_kinds()
    key_kinds = [kinds_by_attr[a] for a in spec.target.key_attributes]
    dict_payload = {name: d.groups for name, d in dictionaries.items()}
    params, curve = learner.train(
        samples, _train_config(config), spec.target, key_kinds, dict_payload
    )
    model_path = config["_resolve"](config["model"]) if "model" in config else out_dir / "model.npz"
    params.save(model_path)
    (out_dir / "loss_curve.csv").write_text(learner.loss_curve_csv(curve), encoding="utf-8")
    log(f"train: {len(samples)} samples, final loss {curve[-1].loss:.4f}, "
        f"train acc {curve[-1].train_acc:.4f} -> {model_path}")
    return 0


def cmd_integrate(config: dict) -> int:
    out_dir = _out_dir(config)
    model_path = config["_resolve"](config["model"]) if "model" in config else out_dir / "model.npz"
    params = learner.ModelParams.load(model_path)
    spec = _spec(config)
    corpora = _read_corpora(out_dir / "supercells.jsonl")
    cells = [c for d in spec.sources for c in corpora.get(d.source_id, ())]
    table = learner.integrate_predictions(cells, params, spec.target)
    path, report = assemble.finalize_and_write(table, out_dir / "target.csv")
    assemble.write_report(report, out_dir / "assembly_report.json")
    log(f"integrate: {report.cells_written} cells "
        f"({report.cells_skipped} skipped) -> {path}")
    return 0


def cmd_baseline(config: dict) -> int:
    dictionaries = _dictionaries(config)
    spec = _spec(config)
    out_dir = _out_dir(config)
    corpora = _decompose_all(config, spec, dictionaries)
    fixture = _fixture(config, spec, dictionaries, corpora)
    example = evaluate.target_example_from_oracle(fixture)
    matches = baseline.match_columns(fixture.tables, example)
    sigs = {}
    for source_id, table in fixture.tables.items():
        for column in table.header:
            try:
                sigs[(source_id, column)] = baseline.signature(table.column(column))
            except baseline.EmptyColumn:
                continue
    baseline.save_signatures(sigs, out_dir / "signatures.bin")
    with open(out_dir / "matches.json", "w", encoding="utf-8") as fh:
        json.dump(
            {
                "best": {a: [m.source_id, m.column, round(m.score, 4)]
                         for a, m in sorted(matches.best.items())},
                "unmatched": sorted(matches.unmatched),
            },
            fh, indent=1,
        )
    try:
        table = baseline.baseline_integrate(
            matches, fixture.tables, spec.target, spec.key_kinds(), dictionaries
        )
        assemble.finalize_and_write(table, out_dir / "baseline.csv")
        log(f"baseline: wrote {out_dir / 'baseline.csv'}")
    except baseline.UncoverableAttribute as exc:
        log(f"baseline: integration failed (uncoverable: {exc})")
    return 0


def cmd_eval(config: dict) -> int:
    dictionaries = _dictionaries(config)
    spec = _spec(config)
    out_dir = _out_dir(config)
    corpora = _decompose_all(config, spec, dictionaries)
    fixture = _fixture(config, spec, dictionaries, corpora)
    model_path = config["_resolve"](config["model"]) if "model" in config else out_dir / "model.npz"
    params = learner.ModelParams.load(model_path)
    report = evaluate.compare_baseline(
        fixture, params, out_dir / "eval", model_path=model_path
    )
    log(f"eval: learner clean agreement {report['learner_clean_agreement']}")
    return 0


def cmd_ablate(config: dict) -> int:
    dictionaries = _dictionaries(config)
    spec = _spec(config)
    out_dir = _out_dir(config)
    corpora = _decompose_all(config, spec, dictionaries)
    fixture = _fixture(config, spec, dictionaries, corpora)
    seed = int(config.get("seed", 0))
    plan_path = config.get("plan")
    train_plan = (
        perturb.PerturbationPlan.load(config["_resolve"](plan_path))
        if plan_path
        else perturb.PerturbationPlan(seed=seed, synonym_dict=None)
    )
    ablation = evaluate.AblationConfig(
        variants=evaluate.default_variants(seed + 9001),
        with_augmentation=True,
        train_plan=train_plan,
        seed=seed,
    )
    rows = evaluate.run_ablation(_train_config(config), fixture, ablation, out_dir / "ablation")
    for row in rows:
        log(f"ablate: {row['variant']}: {row['accuracy']}")
    return 0


def cmd_gradcheck(config: dict | None) -> int:
    worst = 0.0
    for encoder in ("pooled", "recurrent"):
        err = learner.gradient_check(encoder, seed=0)
        log(f"gradcheck: {encoder}: max relative error {err:.2e}")
        worst = max(worst, err)
    return 0 if worst < 1e-3 else 3


_COMMANDS = {
    "decompose": cmd_decompose,
    "gen-train": cmd_gen_train,
    "augment": cmd_augment,
    "train": cmd_train,
    "integrate": cmd_integrate,
    "baseline": cmd_baseline,
    "eval": cmd_eval,
    "ablate": cmd_ablate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="supercell",
        description="Schema-change-tolerant data integration pipeline",
    )
    sub = parser.add_subparsers(dest="command")
    for name in list(_COMMANDS) + ["gradcheck"]:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=name != "gradcheck")
        cmd.add_argument("--seed", type=int, default=None)
        cmd.add_argument("--out", default=None)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        if args.command == "gradcheck":
            return cmd_gradcheck(None)
        config = load_config(args.config, args.seed, args.out)
        return _COMMANDS[args.command](config)
    except UsageError as exc:
        log(f"usage error: {exc}")
        return 1
    except DATA_ERRORS as exc:
        log(f"data error: {type(exc).__name__}: {exc}")
        return 2
    except Exception as exc:  # invariant violations and bugs
        log(f"internal error: {type(exc).__name__}: {exc}")
        return 3


if __name__ == "__main__":
    sys.exit(main())
