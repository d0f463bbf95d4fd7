"""Measurement protocol: super-cell accuracy under incrementally added
schema changes, augmentation on/off comparison, learner-vs-baseline
comparison, and timing/storage reports.

Reports split into two files per run: a deterministic report (accuracies,
agreements, storage bytes) that must be byte-identical across runs with the
same seeds, and a timing report that is hardware-bound and exempt from the
byte-identity guarantee.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

from .assemble import diff_tables, finalize_and_write
from .baseline import (
    UncoverableAttribute,
    baseline_integrate,
    match_columns,
    storage_report,
)
from .core import discard_position, render_feature
from .datasets import Fixture, build_pivoted_deaths, build_wide_tables, covid_unpivoted_view
from .ingest import RawTable, decompose
from .learner import ModelParams, TrainConfig, accuracy, integrate_predictions, train
from .mapping import LabeledSample, generate_training_data, oracle_integrate
from .perturb import (
    PerturbationPlan,
    augment,
    expand_keys,
    noise_cells,
    reformat_values,
    rename_attributes,
)


@dataclass(frozen=True)
class AblationVariant:
    """One test condition: a perturbation plan applied to the test corpus
    only. ``reference_target`` is an informational accuracy target from
    prior published measurements of this protocol, never a gate."""

    name: str
    plan: PerturbationPlan | None = None
    irrelevant: bool = False
    expansion: bool = False
    reference_target: float | None = None


@dataclass
class AblationConfig:
    variants: list[AblationVariant]
    with_augmentation: bool = True
    dictionary: str = "local"  # local | none
    train_plan: PerturbationPlan = field(default_factory=PerturbationPlan)
    seed: int = 0

    def config_hash(self) -> str:
        payload = {
            "variants": [
                {
                    "name": v.name,
                    "plan": v.plan.to_dict() if v.plan else None,
                    "irrelevant": v.irrelevant,
                    "expansion": v.expansion,
                }
                for v in self.variants
            ],
            "with_augmentation": self.with_augmentation,
            "dictionary": self.dictionary,
            "train_plan": self.train_plan.to_dict(),
            "seed": self.seed,
        }
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:12]


def default_variants(seed: int = 9001) -> list[AblationVariant]:
    """The incremental schema-change ladder used by the ablation report."""

    def plan(**kw) -> PerturbationPlan:
        return PerturbationPlan(seed=seed, synonym_dict="covid_synonyms", **kw)

    return [
        AblationVariant("clean", reference_target=0.999),
        AblationVariant("irrelevant_data", plan(), irrelevant=True,
                        reference_target=0.999),
        AblationVariant("rename_2_attrs", plan(attr_rename_rate=2 / 7),
                        reference_target=0.999),
        AblationVariant("rename_5_attrs", plan(attr_rename_rate=5 / 7),
                        reference_target=0.999),
        AblationVariant(
            "rename_6_attrs_value_formats",
            plan(attr_rename_rate=6 / 7, value_reformat_rate=0.5),
            reference_target=0.975,
        ),
        AblationVariant(
            "key_expansion",
            plan(key_expansion_rate=0.2),
            expansion=True,
            reference_target=0.964,
        ),
    ]


def variant_test_set(
    fixture: Fixture,
    base_samples: list[LabeledSample],
    variant: AblationVariant,
) -> list[LabeledSample]:
    """Build one variant's evaluation set.

    Perturbations apply to the test cells only; labels are carried over
    from the clean cells (renames and reformats never change where a cell
    belongs), except key expansion, which rewrites aggregation labels."""
    cells = fixture.all_cells()
    labels = [s.label for s in base_samples]
    if variant.irrelevant:
        seed = (variant.plan.seed if variant.plan else 0) + 23
        noise = noise_cells("noise_source", 30, 10, seed=seed)
        q = fixture.spec.target.q
        return [
            LabeledSample(render_feature(c), discard_position(q, c.width),
                          (c.source_id, c.row_ordinal))
            for c in noise
        ]
    if variant.expansion:
        assert fixture.spec.key_hierarchy is not None
        cells, labels = expand_keys(
            cells, labels, fixture.spec.key_hierarchy, variant.plan,
            fixture.parent_component or None,
        )
    elif variant.plan is not None:
        cells = rename_attributes(cells, variant.plan, fixture.dictionaries)
        cells = reformat_values(cells, variant.plan, fixture.dictionaries)
    return [
        LabeledSample(render_feature(c), l, (c.source_id, c.row_ordinal))
        for c, l in zip(cells, labels)
    ]


def build_training_samples(
    fixture: Fixture,
    plan: PerturbationPlan,
    with_augmentation: bool,
    dictionary: str = "local",
) -> list[LabeledSample]:
    base = generate_training_data(fixture.spec, fixture.corpora, fixture.dictionaries)
    if not with_augmentation:
        return base
    dictionaries = fixture.dictionaries if dictionary == "local" else {}
    if dictionary != "local":
        plan = PerturbationPlan(**{**plan.to_dict(), "synonym_dict": None})
    return augment(
        base,
        plan,
        dictionaries,
        corpus=fixture.all_cells(),
        hierarchy=fixture.spec.key_hierarchy,
        parent_component=fixture.parent_component or None,
    )


def train_on_fixture(
    fixture: Fixture,
    config: TrainConfig,
    plan: PerturbationPlan,
    with_augmentation: bool,
    dictionary: str = "local",
) -> tuple[ModelParams, list, list[LabeledSample]]:
    samples = build_training_samples(fixture, plan, with_augmentation, dictionary)
    kinds_by_attr = fixture.spec.key_kinds()
    key_kinds = [kinds_by_attr[a] for a in fixture.spec.target.key_attributes]
    dict_payload = {name: d.groups for name, d in fixture.dictionaries.items()}
    params, curve = train(
        samples, config, fixture.spec.target, key_kinds, dict_payload
    )
    return params, curve, samples


def run_ablation(
    model_config: TrainConfig,
    fixture: Fixture,
    ablation: AblationConfig,
    out_dir: str | Path,
) -> list[dict]:
    """Train once per training condition and score every variant.

    Writes ``ablation.csv`` (deterministic) and ``timings.json`` under a
    run directory named by the config hash; returns the report rows."""
    run_dir = Path(out_dir) / ablation.config_hash()
    run_dir.mkdir(parents=True, exist_ok=True)
    timings: dict[str, float] = {}

    started = time.perf_counter()
    params, _, _ = train_on_fixture(
        fixture, model_config, ablation.train_plan,
        ablation.with_augmentation, ablation.dictionary,
    )
    timings["train_s"] = time.perf_counter() - started

    base_samples = generate_training_data(
        fixture.spec, fixture.corpora, fixture.dictionaries
    )
    rows: list[dict] = []
    for variant in ablation.variants:
        test_set = variant_test_set(fixture, base_samples, variant)
        started = time.perf_counter()
        acc = accuracy(test_set, params)
        timings[f"eval_{variant.name}_s"] = time.perf_counter() - started
        rows.append(
            {
                "variant": variant.name,
                "accuracy": round(acc, 4),
                "n_samples": len(test_set),
                "reference_target": variant.reference_target,
                "with_augmentation": ablation.with_augmentation,
                "dictionary": ablation.dictionary,
            }
        )

    with open(run_dir / "ablation.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(
            fh,
            fieldnames=["variant", "accuracy", "n_samples", "reference_target",
                        "with_augmentation", "dictionary"],
            lineterminator="\n",
        )
        writer.writeheader()
        writer.writerows(rows)
    with open(run_dir / "timings.json", "w", encoding="utf-8") as fh:
        json.dump(timings, fh, indent=1)
    return rows


def target_example_from_oracle(fixture: Fixture) -> RawTable:
    """The user-provided example of the expected output: here, the oracle
    table itself, the most generous example the baseline could hope for."""
    oracle = oracle_integrate(fixture.spec, fixture.corpora, fixture.dictionaries)
    return RawTable(tuple(oracle.header()), tuple(tuple(r) for r in oracle.finalized_rows()))


def compare_baseline(
    fixture: Fixture,
    params: ModelParams,
    out_dir: str | Path,
    lsh_L: int = 128,
    storage_L: int = 512,
    model_path: Path | None = None,
) -> dict:
    """Learner pipeline vs MinHash baseline on the clean fixture and on the
    pivoted variant; cell agreement with the oracle, storage accounting,
    and stage timings."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    oracle = oracle_integrate(fixture.spec, fixture.corpora, fixture.dictionaries)
    timings: dict[str, float] = {}
    report: dict = {}

    # Learner on the clean corpus.
    cells = fixture.all_cells()
    started = time.perf_counter()
    learner_table = integrate_predictions(cells, params)
    timings["learner_predict_assemble_s"] = time.perf_counter() - started
    report["learner_clean_agreement"] = round(
        diff_tables(oracle, learner_table)["agreement"], 4
    )

    # Learner on the pivoted scenario: deaths arrive pivoted, the remaining
    # case counts unpivoted; the super-cell multiset is unchanged.
    has_pivot_scenario = (
        "covid" in fixture.tables
        and "Deaths" in fixture.tables["covid"].header
        and "mobility" in fixture.corpora
    )
    if has_pivot_scenario:
        pivoted_table, pivoted_desc = build_pivoted_deaths(fixture)
        cr_table, cr_desc = covid_unpivoted_view(fixture)
        started = time.perf_counter()
        pivot_corpus_cells = (
            decompose(cr_table, cr_desc, fixture.dictionaries)
            + decompose(pivoted_table, pivoted_desc, fixture.dictionaries)
            + fixture.corpora["mobility"]
        )
        timings["pivot_decompose_s"] = time.perf_counter() - started
        pivot_learner = integrate_predictions(pivot_corpus_cells, params)
        report["learner_pivoted_agreement"] = round(
            diff_tables(oracle, pivot_learner)["agreement"], 4
        )

    # Baseline on the clean raw tables.
    example = target_example_from_oracle(fixture)
    raw_sources = dict(fixture.tables)
    started = time.perf_counter()
    matches = match_columns(raw_sources, example, threshold=0.5, L=lsh_L)
    timings["baseline_match_s"] = time.perf_counter() - started
    report["baseline_unmatched_clean"] = sorted(matches.unmatched)
    kinds = fixture.spec.key_kinds()
    try:
        started = time.perf_counter()
        baseline_table = baseline_integrate(
            matches, raw_sources, fixture.spec.target, kinds, fixture.dictionaries
        )
        timings["baseline_join_s"] = time.perf_counter() - started
        report["baseline_clean_agreement"] = round(
            diff_tables(oracle, baseline_table)["agreement"], 4
        )
    except UncoverableAttribute as exc:
        report["baseline_clean_agreement"] = 0.0
        report["baseline_clean_error"] = str(exc)

    # Baseline on the pivoted source: the pivot attribute has no column.
    if has_pivot_scenario:
        pivot_matches = match_columns(
            {"covid": pivoted_table}, example, threshold=0.5, L=lsh_L
        )
        report["baseline_pivoted_unmatched"] = sorted(pivot_matches.unmatched)

    # Storage accounting.
    n_fixture_columns = sum(len(t.header) for t in fixture.tables.values())
    report["fixture_columns"] = n_fixture_columns
    report["signature_store_bytes_fixture"] = storage_report(n_fixture_columns, storage_L)
    wide = build_wide_tables()
    n_wide = sum(len(t.header) for t in wide.values())
    report["wide_columns"] = n_wide
    report["signature_store_bytes_wide"] = storage_report(n_wide, storage_L)
    if model_path is not None and Path(model_path).exists():
        report["model_file_bytes"] = Path(model_path).stat().st_size

    with open(out_dir / "comparison.json", "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=1, sort_keys=True)
        fh.write("\n")
    with open(out_dir / "timings.json", "w", encoding="utf-8") as fh:
        json.dump(timings, fh, indent=1)
    finalize_and_write(oracle, out_dir / "oracle.csv")
    finalize_and_write(learner_table, out_dir / "learner.csv")
    return report


def timing_report(stages: dict[str, tuple[float, int]], path: str | Path | None = None) -> dict:
    """Stage wall-times with sample counts and per-sample derivations."""
    out = {
        "stages": {
            name: {
                "seconds": seconds,
                "count": count,
                "per_item_s": (seconds / count) if count else None,
            }
            for name, (seconds, count) in stages.items()
        }
    }
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(out, fh, indent=1)
            fh.write("\n")
    return out
