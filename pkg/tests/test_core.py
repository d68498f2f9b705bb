"""
Tests for TwoWell Core - Base, Logging and Configuration
"""

import pytest

from twowell.core import (
    BaseReport,
    ConfigError,
    RunConfig,
    load_config,
    save_config,
)


def test_imports():
    """Test that core modules import correctly"""
    from twowell.core import (
        WellPair,
        GridSpec,
        build_configuration,
        relax,
        find_good_rhombus,
        logger,
        TwoWellError
    )
    assert WellPair is not None
    assert GridSpec is not None
    assert build_configuration is not None
    assert relax is not None
    assert find_good_rhombus is not None
    assert logger is not None
    assert TwoWellError is not None


def test_exceptions():
    """Test the exception hierarchy"""
    from twowell.core import (
        TwoWellError,
        DomainError,
        DegenerateError,
        AdmissibilityError,
        LensError,
        ShapeError,
        GridIndexError,
        HypothesisError,
    )

    assert issubclass(DegenerateError, DomainError)
    assert issubclass(LensError, DomainError)
    assert issubclass(DomainError, ValueError)
    assert issubclass(ShapeError, ValueError)
    assert issubclass(GridIndexError, IndexError)
    for exc in (ConfigError, DomainError, ShapeError, HypothesisError):
        assert issubclass(exc, TwoWellError)

    with pytest.raises(DomainError):
        raise AdmissibilityError("det <= 0", cell=(3, 4))

    err = AdmissibilityError("det <= 0", cell=(3, 4))
    assert err.cell == (3, 4)


def test_logger():
    """Test logging setup"""
    from twowell.core import logger

    assert logger is not None
    assert logger.name == "twowell"

    # Test logging doesn't crash
    logger.info("Test info message")
    logger.debug("Test debug message")


def test_report_lines():
    """Test key=value rendering of reports"""

    class Sample(BaseReport):
        def as_dict(self):
            return {"value": 0.1, "flag": True, "count": 3, "pair": [1.5, 2.0]}

    assert Sample().to_lines() == ["value=0.1", "flag=true", "count=3", "pair=1.5,2"]


def test_config_defaults():
    """Test RunConfig defaults"""
    config = RunConfig.from_sources("construct", {}, {"mu": 64.0})
    assert config.lam == 0.8
    assert config.nu1 is None
    assert config.grid_n == 512
    assert config.grid_L is None
    assert config.eta == 0.01
    assert config.eta0 == 0.01
    assert config.delta == 0.2
    assert config.theta == 0.1
    assert config.alpha == pytest.approx(0.05)
    assert config.mu == 64.0


def test_config_rejects_two_wells():
    """Test that lambda and nu1 are exclusive"""
    with pytest.raises(ConfigError):
        RunConfig(command="construct", mu_list=[1.0], lam=0.5, nu1=0.7)
    with pytest.raises(ConfigError):
        RunConfig.from_sources("construct", {"lambda": 0.5, "nu1": 0.7, "mu": 1.0})


def test_config_validation():
    """Test invalid settings"""
    with pytest.raises(ConfigError):
        RunConfig(command="sweep", mu_list=[4.0, 1.0])
    with pytest.raises(ConfigError):
        RunConfig(command="construct", mu_list=[1.0, 4.0])
    with pytest.raises(ConfigError):
        RunConfig(command="construct", mu_list=[])
    with pytest.raises(ConfigError):
        RunConfig(command="construct", mu_list=[1.0], lam=1.0)
    with pytest.raises(ConfigError):
        RunConfig(command="construct", mu_list=[1.0], grid_n=63)
    with pytest.raises(ConfigError):
        RunConfig(command="construct", mu_list=[1.0], delta=0.7)
    with pytest.raises(ConfigError):
        RunConfig(command="explode", mu_list=[1.0])
    with pytest.raises(ConfigError):
        RunConfig.from_sources("construct", {"mu": 1.0, "colour": 3.0})


def test_config_geometric_volumes():
    """Test --mu-min/--mu-max/--points spacing"""
    config = RunConfig.from_sources(
        "sweep", {}, {"mu_min": 2.0 ** -8, "mu_max": 1.0, "points": 9}
    )
    assert config.mu_list == pytest.approx([2.0 ** k for k in range(-8, 1)], rel=1e-12)
    assert config.mu_list[0] == 2.0 ** -8
    assert config.mu_list[-1] == 1.0

    with pytest.raises(ConfigError):
        RunConfig.from_sources("sweep", {}, {"mu_min": 1.0, "mu_max": 4.0})


def test_config_file_round_trip(tmp_path):
    """Test saving and loading key=value config files"""
    path = tmp_path / "run.cfg"
    assert save_config({"lam": 0.5, "mu": 64.0, "grid_n": 256, "relax": True}, path)

    text = path.read_text()
    assert "lambda=0.5" in text

    loaded = load_config(path)
    assert loaded == {"lam": 0.5, "mu": 64.0, "grid_n": 256, "relax": True}


def test_config_file_parsing(tmp_path):
    """Test comments, aliases and bad values"""
    path = tmp_path / "run.cfg"
    path.write_text("# comment\nlambda = 0.6\ngrid-n=128\nmu-list=1,4,16\ngrid_L=auto\n")
    loaded = load_config(path)
    assert loaded["lam"] == 0.6
    assert loaded["grid_n"] == 128
    assert loaded["mu_list"] == [1.0, 4.0, 16.0]
    assert loaded["grid_L"] is None

    path.write_text("grid_n=many\n")
    with pytest.raises(ConfigError):
        load_config(path)

    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.cfg")


def test_config_precedence():
    """Test that flags override the config file"""
    file_values = {"lam": 0.5, "mu": 16.0, "grid_n": 128, "eta": 0.2}
    config = RunConfig.from_sources("construct", file_values, {"grid_n": 64, "mu": None})
    assert config.grid_n == 64
    assert config.mu == 16.0
    assert config.eta == 0.2
    assert config.lam == 0.5

    # a well given on the command line replaces the file's well
    config = RunConfig.from_sources("construct", file_values, {"nu1": 0.7})
    assert config.nu1 == 0.7
    assert config.lam is None
    assert config.well().nu1 == pytest.approx(0.7)


def test_config_provenance():
    """Test the provenance header"""
    config = RunConfig.from_sources("sweep", {}, {"mu_list": [1.0, 4.0], "seed": 3})
    lines = config.provenance()
    assert lines[0] == "# version=1.0.0"
    assert "# command=sweep" in lines
    assert "# lambda=0.8" in lines
    assert "# mu=1,4" in lines
    assert "# seed=3" in lines
    assert all(line.startswith("# ") for line in lines)
    assert config.provenance() == lines
