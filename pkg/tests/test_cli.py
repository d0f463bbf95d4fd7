"""CLI pipeline: stage outputs, exit codes, file-path/in-process parity."""

import json

import pytest

from supercell import cli
from supercell.assemble import finalize_and_write
from supercell.core import read_cells
from supercell.datasets import build_covid_fixture, write_fixture_files
from supercell.learner import integrate_predictions, train
from supercell.mapping import generate_training_data
from supercell.perturb import PerturbationPlan, augment

from conftest import desk_train_config


LEARNER_CONFIG = dict(
    encoder="recurrent", embed_dim=16, hidden=24, bucket_count=512,
    epochs=32, batch_size=64, seed=11, learning_rate=3e-3,
)


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    fixture = build_covid_fixture(seed=31, n_dates=3, n_states=6)
    paths = write_fixture_files(fixture, root)
    plan = PerturbationPlan(
        seed=11, attr_rename_rate=0.5, char_noise_rate=0.05,
        value_reformat_rate=0.3, key_expansion_rate=0.1,
        add_remove_noise_columns=8, synonym_dict="covid_synonyms",
    )
    with open(root / "plan.json", "w") as fh:
        json.dump(plan.to_dict(), fh)
    config = {
        "sources": [
            {"source_id": "covid", "path": "covid.csv"},
            {"source_id": "mobility", "path": "mobility.csv"},
        ],
        "dictionaries": {
            "covid_synonyms": "covid_synonyms.json",
            "us_states": "us_states.json",
        },
        "mapping_spec": "mapping_spec.json",
        "plan": "plan.json",
        "model": "model.npz",
        "out_dir": "out",
        "learner": LEARNER_CONFIG,
        "seed": 11,
    }
    config_path = root / "config.json"
    with open(config_path, "w") as fh:
        json.dump(config, fh)
    return {"root": root, "fixture": fixture, "plan": plan,
            "config_path": str(config_path)}


def run(args):
    return cli.main(args)


class TestPipeline:
    def test_full_chain_matches_in_process(self, workspace):
        config = workspace["config_path"]
        root = workspace["root"]
        fixture = workspace["fixture"]
        plan = workspace["plan"]

        assert run(["decompose", "--config", config]) == 0
        cells_path = root / "out" / "supercells.jsonl"
        with open(cells_path) as fh:
            cli_cells = list(read_cells(fh))
        expected_cells = fixture.all_cells()
        assert cli_cells == expected_cells

        assert run(["gen-train", "--config", config]) == 0
        assert run(["augment", "--config", config]) == 0
        assert run(["train", "--config", config]) == 0
        assert run(["integrate", "--config", config]) == 0

        target_csv = (root / "out" / "target.csv").read_bytes()

        # In-process path with identical inputs and seeds.
        samples = generate_training_data(fixture.spec, fixture.corpora,
                                         fixture.dictionaries)
        augmented = augment(
            samples, plan, fixture.dictionaries,
            corpus=expected_cells,
            hierarchy=fixture.spec.key_hierarchy,
            parent_component=fixture.spec.parent_components() or None,
        )
        kinds = fixture.spec.key_kinds()
        key_kinds = [kinds[a] for a in fixture.spec.target.key_attributes]
        config_obj = desk_train_config(**LEARNER_CONFIG)
        params, _ = train(
            augmented, config_obj, fixture.spec.target, key_kinds,
            {n: d.groups for n, d in fixture.dictionaries.items()},
        )
        table = integrate_predictions(expected_cells, params, fixture.spec.target)
        path, _ = finalize_and_write(table, root / "in_process.csv")
        assert path.read_bytes() == target_csv

    def test_integrate_matches_oracle_exactly(self, workspace):
        from supercell.mapping import oracle_integrate

        root = workspace["root"]
        fixture = workspace["fixture"]
        oracle = oracle_integrate(fixture.spec, fixture.corpora, fixture.dictionaries)
        target = (root / "out" / "target.csv").read_text()
        assert target == oracle.to_csv()

    def test_baseline_subcommand(self, workspace):
        config = workspace["config_path"]
        root = workspace["root"]
        assert run(["baseline", "--config", config]) == 0
        assert (root / "out" / "matches.json").exists()
        assert (root / "out" / "signatures.bin").exists()
        matches = json.loads((root / "out" / "matches.json").read_text())
        assert "date" in matches["best"]

    def test_eval_subcommand(self, workspace):
        config = workspace["config_path"]
        root = workspace["root"]
        assert run(["eval", "--config", config]) == 0
        report = json.loads((root / "out" / "eval" / "comparison.json").read_text())
        assert "learner_clean_agreement" in report
        assert "baseline_pivoted_unmatched" in report

    def test_ablate_subcommand(self, workspace):
        config = workspace["config_path"]
        root = workspace["root"]
        assert run(["ablate", "--config", config]) == 0
        runs = list((root / "out" / "ablation").iterdir())
        assert runs
        assert (runs[0] / "ablation.csv").exists()

    def test_gradcheck_subcommand(self):
        assert run(["gradcheck"]) == 0


class TestExitCodes:
    def test_missing_config_is_usage_error(self):
        assert run(["decompose"]) == 1

    def test_no_subcommand_is_usage_error(self):
        assert run([]) == 1

    def test_unknown_config_key(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"mapping_spec": "x.json", "bogus": 1}))
        assert run(["decompose", "--config", str(path)]) == 1

    def test_missing_file_is_data_error(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({
            "sources": [{"source_id": "covid", "path": "missing.csv"}],
            "mapping_spec": "missing_spec.json",
        }))
        assert run(["decompose", "--config", str(path)]) == 2

    def test_corrupt_model_is_internal_error(self, workspace, tmp_path):
        root = workspace["root"]
        bad_model = tmp_path / "model.npz"
        bad_model.write_bytes(b"not a model")
        config = {
            "sources": [],
            "mapping_spec": str(root / "mapping_spec.json"),
            "model": str(bad_model),
            "out_dir": str(root / "out"),
        }
        path = tmp_path / "c.json"
        path.write_text(json.dumps(config))
        assert run(["integrate", "--config", str(path)]) == 3

    def test_ragged_csv_is_data_error(self, workspace, tmp_path):
        root = workspace["root"]
        bad_csv = tmp_path / "bad.csv"
        bad_csv.write_text("Date,Province/State,Country/Region,Confirmed,Recovered,Deaths,Fips\n1,2\n")
        config = {
            "sources": [{"source_id": "covid", "path": str(bad_csv)}],
            "dictionaries": {
                "covid_synonyms": str(root / "covid_synonyms.json"),
                "us_states": str(root / "us_states.json"),
            },
            "mapping_spec": str(root / "mapping_spec.json"),
        }
        path = tmp_path / "c.json"
        path.write_text(json.dumps(config))
        assert run(["decompose", "--config", str(path)]) == 2


def test_seed_flag_overrides(workspace, tmp_path):
    config = workspace["config_path"]
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    assert run(["decompose", "--config", config, "--out", str(out_a)]) == 0
    assert run(["decompose", "--config", config, "--out", str(out_b)]) == 0
    a = (out_a / "supercells.jsonl").read_bytes()
    b = (out_b / "supercells.jsonl").read_bytes()
    assert a == b
