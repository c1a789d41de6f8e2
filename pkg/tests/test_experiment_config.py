import pytest

from experiment_config import (
    ConfigError,
    ExperimentConfig,
    expand_seeds,
    get_task_param_default,
    load_config,
    splitmix64,
)
from multigrid import CycleKind, RestrictionConvention
from relaxation import PRESETS, RelaxParams, RelaxScheme


# Seeds
def test_splitmix64_reference_outputs():
    """Test the first two splitmix64 outputs from state 0"""
    state, first = splitmix64(0)
    _, second = splitmix64(state)
    assert first == 0xE220A8397B1DCDAF
    assert second == 0x6E789E6AA1B965F4


def test_expand_seeds():
    """Test per-run seeds follow the splitmix64 stream and are reproducible"""
    seeds = expand_seeds(0, 3)
    assert seeds[:2] == [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4]
    assert expand_seeds(0, 3) == seeds
    assert len(set(expand_seeds(20190521, 16))) == 16


# Environment layer
def test_task_param_default_from_environment(clean_env):
    """Test a named default is read from task_parameters"""
    clean_env.setenv("task_parameters", "[{'name': 'seed', 'default': 42}]")
    assert get_task_param_default("seed") == 42
    assert get_task_param_default("k_max", 100) == 100


def test_task_param_default_ignores_malformed_environment(clean_env):
    """Test an unparsable task_parameters value falls back to the default"""
    clean_env.setenv("task_parameters", "[{'name': ")
    assert get_task_param_default("seed", 7) == 7


def test_environment_layer_reaches_config(clean_env):
    """Test task_parameters and the log level variable feed the config"""
    clean_env.setenv("task_parameters", "[{'name': 'seed', 'default': 42}, {'name': 'nus', 'default': '2'}]")
    clean_env.setenv("MGSTOKES_LOG_LEVEL", "debug")
    config = load_config(["tables"])
    assert (config.seed, config.nus, config.log_level) == (42, [2], "DEBUG")


# Command line
def test_defaults(clean_env):
    """Test the bare tables command runs Q-DR two-grid on 32x32 for nu = 1..4"""
    config = load_config(["tables"])
    assert config.scheme is RelaxScheme.QDR
    assert config.params == RelaxParams(omega=0.75)
    assert config.runs == [(CycleKind.TWO_GRID, 32)]
    assert config.nus == [1, 2, 3, 4]
    assert (config.seed, config.k_max, config.workers) == (0, 100, 1)
    assert config.restriction is RestrictionConvention.STANDARD


def test_table_plan(clean_env):
    """Test a table plan sets scheme, preset, runs and expected factors"""
    config = load_config(["tables", "--table", "table1"])
    assert config.scheme is RelaxScheme.QDR
    assert config.preset == "qdr"
    assert config.grid_sizes == [32, 64, 128, 256]
    assert config.kinds == [CycleKind.TWO_GRID, CycleKind.V]
    assert config.expected(CycleKind.TWO_GRID, 32, 1) == 0.328
    assert config.expected(CycleKind.V, 256, 4) == 0.041
    assert config.expected(CycleKind.W, 256, 1) is None


def test_table_plan_with_alternative_preset(clean_env):
    """Test an explicit preset replaces the plan's parameters"""
    config = load_config(["tables", "--table", "table3", "--preset", "table3-caption"])
    assert config.scheme is RelaxScheme.QSIGMA_UZAWA
    assert config.params == PRESETS["table3-caption"][1]
    assert config.expected(CycleKind.W, 128, 4) == 0.106


def test_table_plan_with_explicit_grid(clean_env):
    """Test explicit grid sizes and kinds override the plan's runs"""
    config = load_config(["tables", "--table", "table2", "--grid-sizes", "16", "--kinds", "W"])
    assert config.runs == [(CycleKind.W, 16)]
    assert config.scheme is RelaxScheme.QIBSR


def test_parameter_override(clean_env):
    """Test --omega replaces one field of the preset"""
    config = load_config(["tables", "--preset", "qibsr", "--omega", "1.0"])
    assert config.params == RelaxParams(omega=1.0, alpha=1.4, omega_j=1.0)


def test_unknown_table(clean_env):
    """Test unknown table names are rejected"""
    with pytest.raises(ConfigError) as error:
        load_config(["tables", "--table", "table9"])
    assert error.value.field == "table"


@pytest.mark.parametrize("argv, field", [
    (["tables", "--grid-sizes", ""], "grid_sizes"),
    (["tables", "--grid-sizes", "12"], "grid_sizes"),
    (["tables", "--grid-sizes", "4"], "grid_sizes"),
    (["tables", "--kinds", "F"], "kinds"),
    (["tables", "--nus", "0"], "nus"),
    (["tables", "--seed=-1"], "seed"),
    (["tables", "--kmax", "0"], "k_max"),
    (["tables", "--workers", "0"], "workers"),
    (["lfa-scan", "--resolution", "16"], "resolution"),
    (["lfa-scan", "--search-resolution", "8"], "search_resolution"),
    (["tables", "--restriction", "diagonal"], "restriction"),
    (["solve", "--tolerance", "2"], "tolerance"),
    (["tables", "--scheme", "SIMPLE"], "scheme"),
    (["tables", "--scheme", "QDR", "--preset", "quzawa"], "preset"),
    (["tables", "--omega", "-1"], "omega"),
    (["lfa-scan", "--schemes", "QDR, SOR"], "schemes"),
])
def test_invalid_values(clean_env, argv, field):
    """Test invalid values raise ConfigError naming the field"""
    with pytest.raises(ConfigError) as error:
        load_config(argv)
    assert error.value.field == field


def test_unknown_subcommand(clean_env):
    """Test argparse failures become ConfigError"""
    with pytest.raises(ConfigError):
        load_config(["measure"])


def test_help_exits_cleanly(clean_env):
    """Test --help keeps its zero exit status"""
    with pytest.raises(SystemExit) as error:
        load_config(["tables", "--help"])
    assert not error.value.code


# INI layer
def test_ini_section_with_command_line_override(clean_env, tmp_path):
    """Test INI values apply and command-line flags win over them"""
    config_file = tmp_path / "runs.ini"
    config_file.write_text("[DEFAULT]\nseed = 11\n\n[tables]\ngrid_sizes = 16\nkinds = V\nnus = 2\n")
    config = load_config(["tables", "--config", str(config_file), "--nus", "3"])
    assert config.runs == [(CycleKind.V, 16)]
    assert config.nus == [3]
    assert config.seed == 11


def test_ini_named_section(clean_env, tmp_path):
    """Test --section selects a section other than the subcommand"""
    config_file = tmp_path / "runs.ini"
    config_file.write_text("[uzawa]\ntable = table3\nworkers = 2\n")
    config = load_config(["tables", "--config", str(config_file), "--section", "uzawa"])
    assert config.table == "table3"
    assert config.workers == 2
    assert config.scheme is RelaxScheme.QSIGMA_UZAWA


def test_ini_missing_section(clean_env, tmp_path):
    """Test a missing named section is reported"""
    config_file = tmp_path / "runs.ini"
    config_file.write_text("[tables]\nseed = 1\n")
    with pytest.raises(ConfigError) as error:
        load_config(["tables", "--config", str(config_file), "--section", "solve"])
    assert error.value.field == "section"


def test_ini_missing_file(clean_env, tmp_path):
    """Test an unreadable config file is reported"""
    with pytest.raises(ConfigError) as error:
        load_config(["tables", "--config", str(tmp_path / "missing.ini")])
    assert error.value.field == "config"


def test_from_mapping_accepts_typed_values():
    """Test from_mapping takes lists and booleans as well as strings"""
    raw = {"scheme": "QBSR_exact", "grid_sizes": [8, 16], "kinds": ["V"], "nus": [1], "seed": 3,
           "k_max": 5, "resolution": 32, "search_resolution": 32, "workers": 1, "renormalize": True,
           "quick": "no", "tolerance": 1e-6}
    config = ExperimentConfig.from_mapping("tables", raw, frozenset({"scheme"}))
    assert config.scheme is RelaxScheme.QBSR_EXACT
    assert config.runs == [(CycleKind.V, 8), (CycleKind.V, 16)]
    assert config.renormalize is True
    assert config.quick is False
