import pytest

from rldefense.config import AUTO, ConfigError, RunConfig, stage_seed


def test_defaults_resolve_to_library_configs():
    cfg = RunConfig()
    assert cfg["attack.epsilon"] == AUTO
    assert cfg.scenario().kind == "highway"
    assert cfg.dqn().episodes == 6000
    assert cfg["pca.variance_target"] == 0.95


def test_file_values_override_defaults_and_set_overrides_file():
    cfg = RunConfig.from_text("run.scenario = merge\ndqn.episodes = 12  # short\n\nattack.epsilon = 0.1\n")
    assert cfg.scenario().kind == "merge"
    assert cfg.dqn().episodes == 12
    assert cfg["attack.epsilon"] == 0.1
    cfg.set("dqn.episodes", "30")
    assert cfg.dqn().episodes == 30


def test_typed_parsing():
    cfg = RunConfig.from_text("attack.apply_every_step = no\nscenario.spawn_window = -10, 200\nnoise.eta = auto\n")
    assert cfg["attack.apply_every_step"] is False
    assert cfg.scenario().spawn_window == (-10.0, 200.0)
    assert cfg["noise.eta"] == AUTO


@pytest.mark.parametrize(
    "text, line",
    [
        ("run.seed = 1\nnot a pair\n", 2),
        ("run.seed = 1\n\nbogus.key = 3\n", 3),
        ("dqn.episodes = many\n", 1),
    ],
)
def test_malformed_lines_report_line_numbers(text, line):
    with pytest.raises(ConfigError) as info:
        RunConfig.from_text(text, source="run.cfg")
    assert info.value.line == line
    assert f"run.cfg:{line}:" in str(info.value)


def test_text_roundtrip():
    cfg = RunConfig.from_text("run.seed = 9\nscenario.lane_count = 3\n")
    again = RunConfig.from_text(cfg.to_text())
    assert again.values == cfg.values


def test_stage_seeds_are_stable_and_distinct():
    assert stage_seed(0, "train") == stage_seed(0, "train")
    assert len({stage_seed(0, s) for s in ("train", "collect", "eval", "noise")}) == 4
    assert stage_seed(0, "train") != stage_seed(1, "train")
    assert 0 <= stage_seed(123, "eval") < 2**63
