import dataclasses

import pytest
import tomli

from bepath.config import (
    ConfigError,
    MissingInputFile,
    default_config_toml,
    load_config,
)


def write_config(tmp_path, text):
    path = tmp_path / "pipeline.toml"
    path.write_text(text)
    return path


class TestDefaults:
    def test_no_file_gives_defaults(self):
        config = load_config(None)
        assert config.n_patients == 150
        assert config.task == "multiclass"
        assert config.report_field == "subsection"
        assert config.optimization_metric == "auroc"
        assert config.model_types == ("baseline_linear",)
        assert config.seeds == (0, 1, 2)
        assert config.batch_by_tokens == {512: 16, 1024: 8, 2048: 4}
        assert config.val_fraction == 0.5
        assert config.eval_fraction == pytest.approx(61 / 301)
        assert config.corpus_path is None and config.split_path is None
        assert config.worker_command == ()
        assert config.seed == 0
        assert sum(config.class_mix) == pytest.approx(1.0)

    def test_empty_file_equals_defaults(self, tmp_path):
        path = write_config(tmp_path, "")
        from_file = load_config(path)
        pure = load_config(None)
        skip = {"output_dir"}  # resolved against different base directories
        for field in dataclasses.fields(pure):
            if field.name in skip:
                continue
            assert getattr(from_file, field.name) == getattr(pure, field.name), field.name

    def test_default_toml_round_trips(self):
        parsed = tomli.loads(default_config_toml())
        assert parsed["generate"]["n_patients"] == 150
        assert parsed["grid"]["batch_by_tokens"] == {"512": 16, "1024": 8, "2048": 4}
        assert parsed["seed"] == 0
        # and the rendered defaults are themselves a loadable config
        assert tomli.loads(default_config_toml()) == parsed


class TestOverrides:
    def test_values_override_defaults(self, tmp_path):
        path = write_config(
            tmp_path,
            "seed = 9\n"
            '[task]\ntask = "binary"\nreport_field = "full"\n'
            "[grid]\nseeds = [5]\nparallelism = 2\n",
        )
        config = load_config(path)
        assert config.task == "binary"
        assert config.report_field == "full"
        assert config.seeds == (5,)
        assert config.parallelism == 2
        assert config.seed == 9
        assert config.n_patients == 150  # untouched sections keep defaults

    def test_grid_expansion_uses_config(self, tmp_path):
        path = write_config(
            tmp_path, '[grid]\nmodel_types = ["clinical_bert", "clinical_bigbird"]\n'
        )
        grid = load_config(path).grid()
        assert len(grid) == 24

    def test_relative_paths_resolve_against_config_dir(self, tmp_path):
        (tmp_path / "c.jsonl").write_text("")
        path = write_config(tmp_path, '[data]\ncorpus_path = "c.jsonl"\n')
        config = load_config(path)
        assert config.corpus_path == tmp_path / "c.jsonl"

    def test_seed_flag_spelled_at_top_level(self, tmp_path):
        config = load_config(write_config(tmp_path, "seed = 4\n"))
        assert config.seed == 4
        assert config.generator_spec().seed == 4
        assert config.generator_spec(seed=11).seed == 11


class TestRejection:
    @pytest.mark.parametrize(
        "text",
        [
            "[mystery]\nx = 1\n",
            "[task]\nflavor = 1\n",
            "data = 5\n",
            '[task]\ntask = "ternary"\n',
            '[tokenizer]\nkind = "bpe"\n',
            "[split]\nval_fraction = 1.5\n",
            "[split]\neval_fraction = 0.0\n",
            "[generate]\nn_patients = 0\n",
            "[grid]\nparallelism = 0\n",
            "[grid]\nbaseline_epochs = 0\n",
            '[grid]\nbatch_by_tokens = { "512" = 0 }\n',
            '[grid]\nbatch_by_tokens = { "big" = 8 }\n',
            "not toml [[",
        ],
    )
    def test_bad_configs(self, tmp_path, text):
        with pytest.raises(ConfigError):
            load_config(write_config(tmp_path, text))

    def test_missing_config_file(self, tmp_path):
        with pytest.raises(MissingInputFile):
            load_config(tmp_path / "absent.toml")

    def test_missing_referenced_corpus(self, tmp_path):
        path = write_config(tmp_path, '[data]\ncorpus_path = "ghost.jsonl"\n')
        with pytest.raises(MissingInputFile):
            load_config(path)
        # existence checking can be deferred for commands that create inputs
        config = load_config(path, check_inputs=False)
        assert config.corpus_path == tmp_path / "ghost.jsonl"


class TestDerivedObjects:
    def test_tokenizer_spec(self, tmp_path):
        vocab = tmp_path / "v.txt"
        vocab.write_text("[UNK]\nword\n")
        path = write_config(
            tmp_path, f'[tokenizer]\nkind = "wordpiece"\nvocab_path = "v.txt"\nlowercase = false\n'
        )
        spec = load_config(path).tokenizer_spec()
        assert spec.kind == "wordpiece"
        assert spec.vocab_path == str(vocab)
        assert spec.lowercase is False

    def test_heading_lexicon(self, tmp_path):
        path = write_config(
            tmp_path,
            '[preprocess]\ndiagnosis_headings = ["IMPRESSION"]\nterminator_headings = ["NOTE"]\n',
        )
        lexicon = load_config(path).heading_lexicon()
        assert lexicon.diagnosis_headings == ("IMPRESSION",)
        assert lexicon.terminator_headings == ("NOTE",)

    def test_default_grid_is_six_baseline_trials(self):
        grid = load_config(None).grid()
        assert len(grid) == 6
        assert all(c.model_type == "baseline_linear" for c in grid)
