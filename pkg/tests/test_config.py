import pytest

from conftest import sample_path
from metareduce.config import RunConfig, env_overrides, load_run_config, parse_bool, parse_int_list
from metareduce.errors import InputError


def test_parse_int_list():
    assert parse_int_list("1..5") == [1, 2, 3, 4, 5]
    assert parse_int_list("1,4, 8") == [1, 4, 8]
    assert parse_int_list("1..3,7") == [1, 2, 3, 7]
    assert parse_int_list([2, "3"]) == [2, 3]
    assert parse_int_list(4) == [4]
    with pytest.raises(ValueError):
        parse_int_list("5..1")


def test_parse_bool():
    assert parse_bool("yes") is True
    assert parse_bool("0") is False
    with pytest.raises(ValueError):
        parse_bool("maybe")


def test_defaults():
    config = load_run_config(environ={})
    assert config == RunConfig()
    assert config.k_grid == [1, 4, 8, 10, 19, 30]
    assert config.alpha == 0.05
    assert config.failure_policy == "penalize"


def test_precedence_flags_over_env_over_file(tmp_path):
    path = tmp_path / "run.json"
    path.write_text('{"budget": 100, "alpha": 0.1, "seeds": "1..3"}')
    environ = {"METAREDUCE_BUDGET": "200", "METAREDUCE_KEY": "best", "OTHER_BUDGET": "1"}

    config = load_run_config(str(path), flags={"budget": 300, "alpha": None}, environ=environ)
    assert config.budget == 300
    assert config.alpha == 0.1
    assert config.key == "best"
    assert config.seeds == [1, 2, 3]
    assert load_run_config(str(path), environ=environ).budget == 200
    assert load_run_config(str(path), environ={}).budget == 100


def test_env_values_are_coerced():
    overrides = env_overrides({"METAREDUCE_SEEDS": "1..2", "METAREDUCE_PERCENT": "true"})
    assert overrides == {"seeds": [1, 2], "percent": True}
    with pytest.raises(InputError):
        env_overrides({"METAREDUCE_PERCENT": "sometimes"})


def test_invalid_settings_are_input_errors(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("budgett: 10\n")
    with pytest.raises(InputError):
        load_run_config(str(path), environ={})
    with pytest.raises(InputError):
        load_run_config(str(tmp_path / "absent.yaml"), environ={})
    with pytest.raises(InputError):
        load_run_config(flags={"alpha": 1.5}, environ={})
    with pytest.raises(InputError):
        load_run_config(flags={"bases": "nowhere.csv"}, environ={})
    assert load_run_config(flags={"bases": sample_path("automl_meta.csv")}, environ={}).bases == [
        sample_path("automl_meta.csv")
    ]
