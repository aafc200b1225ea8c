from pathlib import Path

import numpy as np
import pytest

from stochastic_bidomain.config import (
    OUTPUT_DIR_ENV,
    ConfigError,
    RunConfig,
    output_root,
    parse_config,
)
from stochastic_bidomain.noise import check_summability
from stochastic_bidomain.sim import ConstantSource, ElectrodeSource

SAMPLE_TOML = """
[grid]
dimension = 1
extent = 1.0
nodes_per_axis = 9

[model]
kind = "allen_cahn"
eta = 0.3

[noise]
rule = "power_law"
modes = 4
scale = 0.5
power = 3.0

[sim]
dt = 0.01
T = 0.5
epsilon = 0.1

[[sim.electrodes]]
amplitude = 2.0
lower = [0.0]
upper = [0.25]
t_off = 0.1

[experiment]
replicas = 8
seed = 5
"""


def _write(tmp_path: Path, text: str, name: str = "run.toml") -> Path:
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_parse_config_reads_sections(tmp_path):
    cfg = parse_config(_write(tmp_path, SAMPLE_TOML))

    assert cfg.grid.extent == 1.0
    assert cfg.grid.nodes_per_axis == 9
    assert cfg.model.kind == "allen_cahn"
    assert cfg.model.params == {"eta": 0.3}
    assert cfg.noise.modes == 4
    assert cfg.sim.electrodes[0].upper == (0.25,)
    assert cfg.experiment.replicas == 8
    # untouched sections keep their defaults
    assert cfg.conductivity.sigma_i == 1.0
    assert cfg.experiment.ci_multiplier == 4.0


def test_empty_config_is_all_defaults(tmp_path):
    cfg = parse_config(_write(tmp_path, ""))

    defaults = RunConfig()
    assert (cfg.grid, cfg.noise, cfg.sim, cfg.experiment) == (
        defaults.grid,
        defaults.noise,
        defaults.sim,
        defaults.experiment,
    )
    assert cfg.model.params == {"eta": 1.0, "a": 0.1, "b": 0.5, "c": 0.5}


def test_defaults_fill_model_parameters(tmp_path):
    cfg = parse_config(_write(tmp_path, '[model]\nkind = "fitzhugh_nagumo"\nb = 0.7\n'))
    assert cfg.model.params == {"eta": 1.0, "a": 0.1, "b": 0.7, "c": 0.5}


@pytest.mark.parametrize(
    "text, message",
    [
        ("[sim]\nepsilonn = 0.1\n", "Unknown key: sim.epsilonn"),
        ("[simulation]\ndt = 0.1\n", r"Unknown section: \[simulation\]"),
        ("[sim]\ndt = -0.1\n", r"sim.dt must be > 0 \(SimConfig invariant dt > 0\)"),
        ("[sim]\ndt = 0.1\nT = 0.05\n", "sim.T must be >= sim.dt"),
        ("[grid]\nnodes_per_axis = 2\n", "nodes_per_axis must be >= 3"),
        ('[model]\nkind = "allen_cahn"\na = 0.2\n', "Unknown key: model.a"),
        ('[model]\nkind = "fitzhugh_nagumo"\na = 1.5\n', "0 < a < 1"),
        ('[model]\nkind = "hodgkin_huxley"\n', "model.kind must be one of"),
        ("[noise]\nscale = -1.0\n", "noise.scale must be >= 0"),
        ('[noise]\nrule = "explicit"\nmodes = 3\ngammas = [1.0, 0.5]\n', "has 2 entries"),
        ("[experiment]\nreplicas = 1\n", "experiment.replicas must be >= 2"),
        ('[experiment]\nseed = "seven"\n', "must be an integer"),
        (
            "[sim]\nsource = 1.0\n"
            "[[sim.electrodes]]\namplitude = 1.0\nlower = [0.0]\nupper = [0.1]\n",
            "exclusive",
        ),
        ("[[sim.electrodes]]\namplitude = 1.0\nlower = [0.0]\n", "Missing key: sim.electrodes"),
    ],
)
def test_invalid_configs_raise_config_error(tmp_path, text, message):
    with pytest.raises(ConfigError, match=message):
        parse_config(_write(tmp_path, text))


def test_toml_syntax_error_carries_line(tmp_path):
    with pytest.raises(ConfigError) as exc:
        parse_config(_write(tmp_path, "[sim]\ndt = 0.1\nT = = 2\n"))

    assert exc.value.line == 3
    assert str(exc.value).startswith("line 3:")


def test_missing_config_file(tmp_path):
    with pytest.raises(FileNotFoundError, match="Config not found"):
        parse_config(tmp_path / "nope.toml")


def test_echo_round_trips(tmp_path):
    cfg = parse_config(_write(tmp_path, SAMPLE_TOML))
    echo = cfg.echo()

    assert echo["model"] == {"kind": "allen_cahn", "eta": 0.3, "box_u": 10.0, "box_w": 10.0}
    assert RunConfig.from_mapping(echo) == cfg


def test_with_overrides_revalidates():
    cfg = RunConfig().with_overrides(seed=11, replicas=50, threads=4)

    assert (cfg.experiment.seed, cfg.experiment.replicas, cfg.experiment.threads) == (11, 50, 4)
    with pytest.raises(ConfigError, match="replicas"):
        RunConfig().with_overrides(replicas=1)


# ---------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------


def test_builders_produce_consistent_objects(tmp_path):
    cfg = parse_config(_write(tmp_path, SAMPLE_TOML))
    grid = cfg.build_grid()
    op = cfg.build_operator(grid)

    assert op.grid == grid
    assert cfg.build_spectrum(op).gammas == pytest.approx([0.5 * k**-3.0 for k in range(1, 5)])
    assert cfg.build_model().params == {"eta": 0.3}
    assert cfg.sample_box().u_max == 10.0

    sim = cfg.build_sim_config(grid)
    assert isinstance(sim.source, ElectrodeSource)
    assert sim.epsilon == 0.1
    assert np.all(cfg.build_initial(grid).u.values == 0.0)

    mc = cfg.mc_config(progress=True)
    assert (mc.replicas, mc.seed, mc.progress) == (8, 5, True)


def test_constant_source_from_config(tmp_path):
    cfg = parse_config(_write(tmp_path, "[grid]\nnodes_per_axis = 5\n[sim]\nsource = 0.5\n"))
    sim = cfg.build_sim_config(cfg.build_grid())

    assert isinstance(sim.source, ConstantSource)
    np.testing.assert_allclose(sim.source(0.0), 0.5)


def test_tensor_conductivity_on_square(tmp_path):
    text = """
[grid]
dimension = 2
extent = [1.0, 1.0]
nodes_per_axis = [5, 5]

[conductivity]
sigma_i = [[2.0, 0.1], [0.1, 1.0]]
sigma_e = 1.0
"""
    cfg = parse_config(_write(tmp_path, text))
    op = cfg.build_operator()

    assert cfg.conductivity.sigma_i == ((2.0, 0.1), (0.1, 1.0))
    assert op.n_modes == 25
    assert op.eigenvalues[0] == 0.0


def test_spectrum_larger_than_operator_is_a_config_error(tmp_path):
    cfg = parse_config(_write(tmp_path, "[grid]\nnodes_per_axis = 5\n[noise]\nmodes = 10\n"))
    with pytest.raises(ConfigError, match="noise: K must be in"):
        cfg.build_spectrum(cfg.build_operator())


def test_electrode_dimension_mismatch_is_a_config_error(tmp_path):
    text = (
        "[grid]\nnodes_per_axis = 5\n"
        "[[sim.electrodes]]\namplitude = 1.0\nlower = [0.0, 0.0]\nupper = [1.0, 1.0]\n"
    )
    cfg = parse_config(_write(tmp_path, text))
    with pytest.raises(ConfigError, match="sim.electrodes"):
        cfg.build_sim_config(cfg.build_grid())


# ---------------------------------------------------------------------
# Output root
# ---------------------------------------------------------------------


def test_output_root_prefers_explicit_dir(tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path / "env"))
    assert output_root(tmp_path / "explicit", root=tmp_path) == tmp_path / "explicit"


def test_output_root_reads_env(tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path / "env"))
    assert output_root(root=tmp_path) == tmp_path / "env"


def test_output_root_reads_dotenv_file(tmp_path, monkeypatch):
    # set then delete so the variable load_dotenv exports is removed at teardown
    monkeypatch.setenv(OUTPUT_DIR_ENV, "placeholder")
    monkeypatch.delenv(OUTPUT_DIR_ENV)
    (tmp_path / ".env").write_text(f"{OUTPUT_DIR_ENV}={tmp_path / 'dotenv'}\n", encoding="utf-8")

    assert output_root(root=tmp_path) == tmp_path / "dotenv"


def test_output_root_defaults_to_runs(tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_DIR_ENV, "placeholder")
    monkeypatch.delenv(OUTPUT_DIR_ENV)
    assert output_root(root=tmp_path) == tmp_path / "runs"


def test_default_noise_spectrum_is_summable(tmp_path):
    cfg = parse_config(_write(tmp_path, ""))
    op = cfg.build_operator()
    spectrum = cfg.build_spectrum(op)

    assert cfg.noise.power == 3.0
    assert spectrum.n_modes == 32
    assert check_summability(spectrum, op).finite
