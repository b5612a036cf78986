import pytest

from errors import ConfigInvalid
from loader import ModelConfig, load_labels, load_pipeline_config, load_profiles


class TestProfiles:

    def test_desk_defaults(self):
        config = load_pipeline_config()
        assert config.profile == "desk"
        assert config.lm.hidden_size == 128
        assert config.s2s.hidden_size == 64
        assert config.lm.vocab_size_comment == 2000
        assert (config.valid_size, config.test_size) == (100, 100)
        assert config.lm.keep_probability() == pytest.approx(0.65)

    def test_full_profile(self):
        config = load_pipeline_config(overrides={"profile": "full"})
        assert (config.lm.hidden_size, config.s2s.hidden_size) == (2048, 512)
        assert (config.lm.max_epochs, config.s2s.max_epochs) == (51, 23)
        assert config.train_size == 3000000

    def test_every_profile_validates(self):
        for name in load_profiles():
            load_pipeline_config(overrides={"profile": name})

    def test_unknown_profile(self):
        with pytest.raises(ConfigInvalid):
            load_pipeline_config(overrides={"profile": "huge"})


class TestResolution:

    def test_flags_win_over_file(self, tmp_path):
        path = tmp_path / "craic.yml"
        path.write_text("seed: 11\nlearning_rate: 0.25\nlm.hidden_size: 32\n", encoding="utf-8")
        config = load_pipeline_config(path, {"seed": 5, "lm.hidden_size": None})
        assert config.seed == 5
        assert config.lm.hidden_size == 32
        assert config.lm.learning_rate == config.s2s.learning_rate == 0.25

    def test_model_config_takes_pipeline_seed(self):
        config = load_pipeline_config(overrides={"seed": 9, "compression": "identifier", "max_tokens": 20})
        model = config.model_config("s2s")
        assert (model.seed, model.compression, model.max_tokens) == (9, "identifier", 20)

    def test_unknown_key(self, tmp_path):
        path = tmp_path / "craic.yml"
        path.write_text("hiden_size: 32\n", encoding="utf-8")
        with pytest.raises(ConfigInvalid):
            load_pipeline_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigInvalid):
            load_pipeline_config(tmp_path / "absent.yml")

    def test_not_a_mapping(self, tmp_path):
        path = tmp_path / "craic.yml"
        path.write_text("- a\n- b\n", encoding="utf-8")
        with pytest.raises(ConfigInvalid):
            load_pipeline_config(path)

    def test_bad_value(self):
        with pytest.raises(ConfigInvalid):
            load_pipeline_config(overrides={"lm.batch_size": "many"})

    @pytest.mark.parametrize("overrides", [{"compression": "zip"}, {"max_tokens": 1}, {"lm.clip_norm": 0},
                                           {"s2s.dropout": 0.0}, {"min_count": 0}])
    def test_invalid_values(self, overrides):
        with pytest.raises(ConfigInvalid):
            load_pipeline_config(overrides=overrides)


class TestCoercion:

    def test_optional_int_from_string(self):
        assert load_pipeline_config(overrides={"train_size": "250"}).train_size == 250

    def test_optional_empty(self):
        assert load_pipeline_config(overrides={"profile": "full", "train_size": "None"}).train_size is None

    def test_optional_float(self):
        assert load_pipeline_config(overrides={"strip_threshold": "2.5"}).strip_threshold == 2.5

    @pytest.mark.parametrize("word, expected", [("false", False), ("Off", False), ("0", False),
                                                ("true", True), ("yes", True), (True, True)])
    def test_booleans(self, word, expected):
        config = load_pipeline_config(overrides={"split_underscore_digit": word})
        assert config.split_underscore_digit is expected

    def test_unreadable_boolean(self):
        with pytest.raises(ConfigInvalid):
            load_pipeline_config(overrides={"split_underscore_digit": "sometimes"})

    def test_string_field_stays_string(self):
        assert load_pipeline_config(overrides={"input": 12}).input == "12"

    def test_int_from_string(self):
        config = load_pipeline_config(overrides={"max_tokens": "7", "s2s.hidden_size": "24"})
        assert config.max_tokens == 7 and config.s2s.hidden_size == 24

    def test_required_field_may_not_be_empty(self):
        with pytest.raises(ConfigInvalid):
            load_pipeline_config(overrides={"max_tokens": "None"})


class TestModelConfig:

    def test_drop_semantics(self):
        config = ModelConfig(dropout=0.35, dropout_semantics="drop").validate()
        assert config.keep_probability() == pytest.approx(0.65)

    def test_unknown_semantics(self):
        with pytest.raises(ConfigInvalid):
            ModelConfig(dropout_semantics="maybe").validate()

    def test_from_items(self):
        config = ModelConfig(hidden_size=12, dropout=0.5, learning_rate=0.125)
        items = {k: str(v) for k, v in config.to_items().items()}
        assert ModelConfig.from_items(items) == config


class TestLabels:

    def test_tsv(self, tmp_path):
        path = tmp_path / "labels.tsv"
        path.write_text("# pair\tcategory\n3\trestate\n7\tother\n", encoding="utf-8")
        assert load_labels(path) == {3: "restate", 7: "other"}

    def test_yaml(self, tmp_path):
        path = tmp_path / "labels.yml"
        path.write_text("3: restate\n'7': other\n", encoding="utf-8")
        assert load_labels(path) == {3: "restate", 7: "other"}

    def test_bad_id(self, tmp_path):
        path = tmp_path / "labels.tsv"
        path.write_text("x\trestate\n", encoding="utf-8")
        with pytest.raises(ConfigInvalid):
            load_labels(path)

    def test_missing(self, tmp_path):
        with pytest.raises(ConfigInvalid):
            load_labels(tmp_path / "none.tsv")
