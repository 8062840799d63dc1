import pytest

from isolab.config import IsolabConfig
from isolab.errors import ConfigurationError
from isolab.isoflow import IntegratorConfig

ISOLAB_VARIABLES = ("ISOLAB_THREADS", "ISOLAB_LOG_LEVEL", "ISOLAB_LOG_DIR", "ISOLAB_TOL", "ISOLAB_HBAR",
                    "ISOLAB_T1_MARGIN", "ISOLAB_MAX_RANK")


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch, tmp_path):
    for name in ISOLAB_VARIABLES:
        monkeypatch.delenv(name, raising=False)
    monkeypatch.chdir(tmp_path)


def test_defaults():
    config = IsolabConfig.from_env()
    assert config.threads >= 1
    assert config.log_level == "INFO"
    assert config.tol == 1e-10
    assert config.max_rank == 3


def test_environment_is_read(monkeypatch):
    monkeypatch.setenv("ISOLAB_THREADS", "3")
    monkeypatch.setenv("ISOLAB_LOG_LEVEL", "debug")
    monkeypatch.setenv("ISOLAB_TOL", "1e-8")
    config = IsolabConfig.from_env()
    assert config.threads == 3
    assert config.log_level == "DEBUG"
    assert config.tol == 1e-8


def test_overrides_win(monkeypatch):
    monkeypatch.setenv("ISOLAB_THREADS", "3")
    assert IsolabConfig.from_env({"threads": 1}).threads == 1
    assert IsolabConfig.from_env({"threads": None}).threads == 3


@pytest.mark.parametrize("name,value", [("ISOLAB_THREADS", "0"), ("ISOLAB_THREADS", "many"),
                                        ("ISOLAB_LOG_LEVEL", "LOUD"), ("ISOLAB_TOL", "-1")])
def test_invalid_environment(monkeypatch, name, value):
    monkeypatch.setenv(name, value)
    with pytest.raises(ConfigurationError):
        IsolabConfig.from_env()


def test_log_dir_must_be_directory(tmp_path):
    target = tmp_path / "isolab.log"
    target.write_text("", encoding="utf-8")
    with pytest.raises(ConfigurationError):
        IsolabConfig(log_dir=str(target)).validate_environment()
    IsolabConfig(log_dir=str(tmp_path)).validate_environment()


def test_integrator_from_config():
    config = IsolabConfig(tol=1e-8, t1_margin=0.01)
    integrator = IntegratorConfig.from_config(config)
    assert integrator.rtol == 1e-8
    assert integrator.atol == pytest.approx(1e-10)
    assert integrator.t1_margin == 0.01
    assert IntegratorConfig.from_config(config, method="RK45", rtol=None).method == "RK45"
    with pytest.raises(ConfigurationError):
        IntegratorConfig.from_config(config, method="BDF")
