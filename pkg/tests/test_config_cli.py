"""Strict TOML parsing and the command-line pipeline."""

import json

import numpy as np
import pytest

from arbbands import AccuracyError, OrnsteinUhlenbeck, SolverError, Telegraph, ZeroNoise
from arbbands import cli
from arbbands.config import load_config
from arbbands.errors import ConfigError

MARKET = """
[market]
spot = 20.0
strike = 20.0
rate = 0.1
volatility = 0.4
tau = 1.0
"""

ARBITRAGE = """
[arbitrage]
intensity = 0.1
epsilon = 0.1
"""

OU_NOISE = """
[noise]
kind = "ornstein_uhlenbeck"
mean_reversion = 1.0
diffusion_scale = 0.4472135954999579
"""


def write_config(tmp_path, text, name="run.toml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def read_manifest(outdir):
    with open(outdir / "run_manifest.json") as fh:
        return json.load(fh)


def test_load_minimal_config(tmp_path):
    cfg = load_config(write_config(tmp_path, MARKET + "[run]\nseed = 7\n"))
    mp = cfg.market()
    assert (mp.spot, mp.strike, mp.tau) == (20.0, 20.0, 1.0)
    assert cfg.seed() == 7


@pytest.mark.parametrize("text", [
    "[bogus]\nx = 1\n",
    MARKET + "[market2]\nspot = 1.0\n",
    MARKET.replace("spot = 20.0", "spot = 20.0\nspread = 1.0"),
    "not toml [[[",
])
def test_config_rejections(tmp_path, text):
    with pytest.raises(ConfigError):
        load_config(write_config(tmp_path, text))


@pytest.mark.parametrize("value", ["true", '"20"'])
def test_config_type_rejections(tmp_path, value):
    # Section and key names are screened at load time; value types are
    # checked when the typed accessor reads them.
    text = MARKET.replace("spot = 20.0", f"spot = {value}")
    cfg = load_config(write_config(tmp_path, text))
    with pytest.raises(ConfigError):
        cfg.market()


def test_missing_config_file():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/run.toml")


def test_missing_seed_rejected(tmp_path):
    cfg = load_config(write_config(tmp_path, MARKET))
    with pytest.raises(ConfigError):
        cfg.seed()


def test_axis_forms_agree(tmp_path):
    cfg = load_config(write_config(tmp_path, MARKET + """
[band]
spots = { start = 10.0, stop = 40.0, count = 4 }
taus = [0.5, 1.0]
"""))
    assert cfg.axis("band", "spots") == pytest.approx([10.0, 20.0, 30.0, 40.0])
    assert cfg.axis("band", "taus") == [0.5, 1.0]


@pytest.mark.parametrize("block,cls", [
    (OU_NOISE, OrnsteinUhlenbeck),
    ('[noise]\nkind = "ou"\nmean_reversion = 1.0\ndiffusion_scale = 0.4\n',
     OrnsteinUhlenbeck),
    ('[noise]\nkind = "telegraph"\namplitude = 0.4\nswitch_rate = 1.0\n',
     Telegraph),
    ('[noise]\nkind = "zero"\n', ZeroNoise),
])
def test_noise_kinds(tmp_path, block, cls):
    cfg = load_config(write_config(tmp_path, MARKET + block))
    assert isinstance(cfg.noise(), cls)


@pytest.mark.parametrize("block", [
    '[noise]\nkind = "pink"\n',
    '[noise]\nkind = "ou"\nmean_reversion = 1.0\n',
    '[noise]\nkind = "telegraph"\namplitude = 0.4\nswitch_rate = 1.0\n'
    'mean_reversion = 1.0\n',
])
def test_noise_kind_rejections(tmp_path, block):
    with pytest.raises(ConfigError):
        load_config(write_config(tmp_path, MARKET + block)).noise()


def test_price_command(tmp_path, capsys):
    cfgp = write_config(tmp_path, MARKET)
    out = tmp_path / "out"
    assert cli.main(["price", "--config", cfgp,
                     "--output-dir", str(out)]) == 0
    rows = np.genfromtxt(out / "price.csv", delimiter=",", names=True)
    assert rows["price"] == pytest.approx(4.063693862011739, rel=1e-12)
    assert rows["delta"] == pytest.approx(0.67364477971208, rel=1e-10)
    manifest = read_manifest(out)
    assert manifest["command"] == "price"
    assert manifest["outputs"] == {"price": "price.csv"}
    assert manifest["versions"]["numpy"] == np.__version__
    assert "timestamp_utc" in manifest
    assert "wrote price.csv" in capsys.readouterr().out


def test_band_command_columns(tmp_path):
    cfgp = write_config(tmp_path, MARKET + ARBITRAGE + """
[band]
spots = [15.0, 20.0, 25.0]
taus = [0.5, 1.0]
""")
    out = tmp_path / "out"
    assert cli.main(["band", "--config", cfgp, "--output-dir", str(out)]) == 0
    rows = np.genfromtxt(out / "band.csv", delimiter=",", names=True)
    assert rows.shape == (6,)
    assert np.all(rows["lower"] <= rows["bs_price"])
    assert np.all(rows["bs_price"] <= rows["upper"])
    # At-the-money one-year row reproduces the frozen anchors.
    atm = rows[(rows["spot"] == 20.0) & (rows["tau"] == 1.0)]
    assert atm["bs_price"] == pytest.approx(4.063693862011739, rel=1e-12)
    assert atm["fluct_var"] == pytest.approx(17.706615447559482, rel=1e-9)
    assert atm["upper"] == pytest.approx(6.725018002176517, rel=1e-9)


def test_smile_command(tmp_path):
    cfgp = write_config(tmp_path, MARKET + ARBITRAGE + """
[smile]
strikes = { start = 14.0, stop = 30.0, count = 5 }
""")
    out = tmp_path / "out"
    assert cli.main(["smile", "--config", cfgp, "--output-dir", str(out)]) == 0
    rows = np.genfromtxt(out / "smile.csv", delimiter=",", names=True)
    assert np.all(rows["implied_vol"] >= 0.4)
    assert np.all(np.diff(rows["implied_vol"]) < 0.0)


def test_mc_validate_reproducible_and_seed_override(tmp_path):
    cfgp = write_config(tmp_path, MARKET + ARBITRAGE + OU_NOISE + """
[run]
seed = 11

[mc]
epsilons = [0.01]
n_paths = 1000
""")
    out_a, out_b, out_c = (tmp_path / n for n in ("a", "b", "c"))
    for out in (out_a, out_b):
        assert cli.main(["mc-validate", "--config", cfgp,
                         "--output-dir", str(out)]) == 0
    assert cli.main(["mc-validate", "--config", cfgp, "--seed", "12",
                     "--output-dir", str(out_c)]) == 0
    bytes_a = (out_a / "mc_validate.csv").read_bytes()
    assert bytes_a == (out_b / "mc_validate.csv").read_bytes()
    assert bytes_a != (out_c / "mc_validate.csv").read_bytes()
    assert read_manifest(out_a)["seed"] == 11
    assert read_manifest(out_c)["seed"] == 12


def test_xval_command_checks(tmp_path):
    cfgp = write_config(tmp_path, MARKET + ARBITRAGE + """
[xval]
n_paths = 0
n_space = 201
n_time = 400
taus = [1.0]
""")
    out = tmp_path / "out"
    assert cli.main(["xval", "--config", cfgp, "--output-dir", str(out)]) == 0
    checks = read_manifest(out)["checks"]
    assert checks["quad_vs_closed_pass"] is True
    assert checks["pde_vs_closed_pass"] is True
    assert "mc_vs_closed_pass" not in checks
    rows = np.genfromtxt(out / "xval.csv", delimiter=",", names=True,
                         dtype=None, encoding="utf-8")
    assert set(rows["check"]) == {"quad_vs_closed", "pde_vs_closed"}


def test_exit_code_config_error(tmp_path, capsys):
    cfgp = write_config(tmp_path, "[bogus]\nx = 1\n")
    assert cli.main(["price", "--config", cfgp,
                     "--output-dir", str(tmp_path / "o")]) == 2
    assert "ConfigError" in capsys.readouterr().err


def test_exit_code_parameter_error(tmp_path, capsys):
    cfgp = write_config(tmp_path, MARKET.replace("volatility = 0.4",
                                                 "volatility = -0.4"))
    assert cli.main(["price", "--config", cfgp,
                     "--output-dir", str(tmp_path / "o")]) == 3
    assert "ParameterError" in capsys.readouterr().err


@pytest.mark.parametrize("exc,code", [(SolverError, 4), (AccuracyError, 5)])
def test_exit_codes_numeric_failures(tmp_path, capsys, monkeypatch, exc, code):
    def boom(cfg, outdir):
        raise exc("synthetic failure")
    monkeypatch.setitem(cli._COMMANDS, "price", boom)
    cfgp = write_config(tmp_path, MARKET)
    assert cli.main(["price", "--config", cfgp,
                     "--output-dir", str(tmp_path / "o")]) == code
    assert exc.__name__ in capsys.readouterr().err
