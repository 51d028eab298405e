"""Run-configuration tests: parsing, defaults, validation, overrides."""
import json
from fractions import Fraction
from pathlib import Path

import pytest

from carvegen import config as cfg
from carvegen.errors import ConfigError
from carvegen.fragments import DEFAULT_RATIOS

MINIMAL = {"corpus_dir": "corpus", "output_dir": "out"}


def from_doc(doc, base_dir=None):
    return cfg.config_from_dict(doc, base_dir=base_dir)


class TestParsing:
    def test_minimal_doc_gets_documented_defaults(self):
        c = from_doc(dict(MINIMAL))
        assert c.ratios == DEFAULT_RATIOS
        assert c.per_ratio_count == 750
        assert c.seed == 0
        assert c.jobs == 1
        assert c.sample_per_ratio == 10
        assert c.train_corpus_dir is None
        assert isinstance(c.predictor, cfg.BuiltinPredictorSpec)
        assert c.predictor.order == 3
        assert c.predictor.smoothing == 0.1
        assert c.predictor.mode == "greedy"
        assert c.pool.size == 100
        assert c.pool.decoy_sources == ()
        assert c.weights.chi_weight == 0.01
        assert c.weights.jsd_weight == 10.0
        assert c.weights.cosine_weight == 10.0

    def test_relative_paths_resolve_against_base_dir(self):
        base = Path("/somewhere/else")
        c = from_doc(
            dict(MINIMAL, train_corpus_dir="train",
                 pool={"decoy_sources": ["d/a.wav", "/abs/b.png"]}),
            base_dir=base,
        )
        assert c.corpus_dir == base / "corpus"
        assert c.output_dir == base / "out"
        assert c.train_corpus_dir == base / "train"
        assert c.pool.decoy_sources == (base / "d/a.wav", Path("/abs/b.png"))

    def test_absolute_paths_kept_verbatim(self):
        c = from_doc(
            {"corpus_dir": "/data/corpus", "output_dir": "/data/out"},
            base_dir=Path("/ignored"),
        )
        assert c.corpus_dir == Path("/data/corpus")

    def test_ratio_strings_parse_to_fractions(self):
        c = from_doc(dict(MINIMAL, ratios=["1/4", "1/2"]))
        assert c.ratios == (Fraction(1, 4), Fraction(1, 2))

    def test_external_predictor_doc(self):
        c = from_doc(
            dict(
                MINIMAL,
                predictor={"kind": "external", "command": ["prog", "--x"],
                           "timeout": 5.5},
            )
        )
        assert isinstance(c.predictor, cfg.ExternalPredictorSpec)
        assert c.predictor.command == ("prog", "--x")
        assert c.predictor.timeout == 5.5

    def test_format_weights_coerced(self):
        c = from_doc(dict(MINIMAL, pool={"format_weights": {"wav": 2, "png": 1}}))
        assert c.pool.format_weights == {"wav": 2.0, "png": 1.0}

    def test_to_dict_round_trips(self):
        original = from_doc(
            dict(
                MINIMAL,
                corpus_dir="/c",
                output_dir="/o",
                ratios=["2/5", "4/5"],
                per_ratio_count=3,
                seed=11,
                jobs=4,
                sample_per_ratio=2,
                predictor={"kind": "builtin", "order": 2, "mode": "top_k"},
                pool={"size": 7, "decoy_sources": ["/d/x.wav"]},
                weights={"chi": 0.5, "jsd": 1.0, "cosine": 2.0},
            )
        )
        assert from_doc(cfg.config_to_dict(original)) == original


class TestRejection:
    @pytest.mark.parametrize(
        "doc",
        [
            [],
            {"output_dir": "out"},
            {"corpus_dir": "c"},
            dict(MINIMAL, surprise=1),
            dict(MINIMAL, ratios=["0/5"]),
            dict(MINIMAL, ratios=["5/5"]),
            dict(MINIMAL, ratios=["abc"]),
            dict(MINIMAL, ratios=["2/5", "2/5"]),
            dict(MINIMAL, per_ratio_count=0),
            dict(MINIMAL, jobs=0),
            dict(MINIMAL, sample_per_ratio=0),
            dict(MINIMAL, predictor={"kind": "mystery"}),
            dict(MINIMAL, predictor={"kind": "external"}),
            dict(MINIMAL, predictor={"kind": "external", "command": "prog"}),
            dict(MINIMAL, predictor={"kind": "external", "command": ["p"],
                                     "timeout": 0}),
            dict(MINIMAL, predictor={"order": -1}),
            dict(MINIMAL, predictor={"smoothing": 0}),
            dict(MINIMAL, predictor={"mode": "beam"}),
            dict(MINIMAL, pool={"size": 1}),
            dict(MINIMAL, weights={"jsd": -1}),
        ],
    )
    def test_bad_documents_raise_config_error(self, doc):
        with pytest.raises(ConfigError):
            from_doc(doc)


class TestLoadAndOverride:
    def test_load_resolves_against_file_location(self, tmp_path):
        (tmp_path / "run.json").write_text(json.dumps(MINIMAL))
        c = cfg.load_config(tmp_path / "run.json")
        assert c.corpus_dir == tmp_path / "corpus"

    def test_load_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            cfg.load_config(tmp_path / "absent.json")

    def test_load_invalid_json(self, tmp_path):
        (tmp_path / "run.json").write_text("{not json")
        with pytest.raises(ConfigError):
            cfg.load_config(tmp_path / "run.json")

    def test_overrides_win_and_none_is_keep(self):
        c = from_doc(dict(MINIMAL, seed=3, jobs=2))
        same = cfg.apply_overrides(c)
        assert same == c
        changed = cfg.apply_overrides(c, seed=9, jobs=5, output_dir="/elsewhere")
        assert changed.seed == 9
        assert changed.jobs == 5
        assert changed.output_dir == Path("/elsewhere")
        assert changed.corpus_dir == c.corpus_dir

    def test_check_paths_reports_each_missing_piece(self, tmp_path):
        corpus = tmp_path / "corpus"
        corpus.mkdir()
        ok = cfg.RunConfig(corpus_dir=corpus, output_dir=tmp_path / "out")
        ok.check_paths()

        missing_corpus = cfg.RunConfig(
            corpus_dir=tmp_path / "nope", output_dir=tmp_path / "out"
        )
        with pytest.raises(ConfigError, match="corpus"):
            missing_corpus.check_paths()

        missing_train = cfg.RunConfig(
            corpus_dir=corpus,
            output_dir=tmp_path / "out",
            train_corpus_dir=tmp_path / "nope",
        )
        with pytest.raises(ConfigError, match="training"):
            missing_train.check_paths()

        missing_decoy = cfg.RunConfig(
            corpus_dir=corpus,
            output_dir=tmp_path / "out",
            pool=cfg.PoolSpec(decoy_sources=(tmp_path / "gone.wav",)),
        )
        with pytest.raises(ConfigError, match="decoy"):
            missing_decoy.check_paths()

    def test_policy_carries_decoding_knobs(self):
        spec = cfg.BuiltinPredictorSpec(mode="temperature", temperature=0.7)
        policy = spec.policy(seed=42)
        assert policy.mode == "temperature"
        assert policy.temperature == 0.7
        assert policy.seed == 42
