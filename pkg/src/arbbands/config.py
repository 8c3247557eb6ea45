"""Declarative run configuration (TOML).

One file drives every subcommand; parsing is strict so a run is fully
described by its config plus the seed: unknown sections or keys are errors,
and every value is type-checked before it reaches a constructor.  Malformed
structure raises ConfigError; values that are well-formed but outside a
parameter's domain raise ParameterError from the domain types themselves.

Axis-valued keys (spots, taus, strikes, ...) accept either an explicit list
of numbers or an inline table {start, stop, count} meaning a uniform grid.
"""

from __future__ import annotations

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .bscore import MarketParams
from .errors import ConfigError
from .noise import NoiseModel, OrnsteinUhlenbeck, Telegraph, ZeroNoise
from .pde import GridSpec, default_domain
from .variance import ArbitrageParams

__all__ = ["RunConfig", "load_config"]

_SECTION_KEYS: dict[str, set[str]] = {
    "market": {"spot", "strike", "rate", "volatility", "tau"},
    "arbitrage": {"intensity", "epsilon", "band_multiplier"},
    "noise": {"kind", "mean_reversion", "diffusion_scale", "amplitude",
              "switch_rate"},
    "grid": {"n_space", "n_time", "scheme", "x_min", "x_max"},
    "run": {"seed", "threads", "output_dir"},
    "band": {"spots", "taus", "u_source"},
    "usurface": {"spots", "taus", "method"},
    "covpde": {"checkpoints"},
    "smile": {"strikes", "u_source"},
    "mc": {"epsilons", "n_paths"},
    "noise_check": {"epsilons", "tau", "n_paths", "steps_per_corr",
                    "dump_path", "dump_steps"},
    "xval": {"spots", "taus", "epsilon_mc", "n_paths", "n_space", "n_time"},
}

_AXIS_KEYS = {"start", "stop", "count"}


def _number(value: Any, path: str) -> float:
    # bool is an int subclass; reject it explicitly
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path} must be a number, got {value!r}")
    return float(value)


def _integer(value: Any, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path} must be an integer, got {value!r}")
    return value


def _string(value: Any, path: str) -> str:
    if not isinstance(value, str):
        raise ConfigError(f"{path} must be a string, got {value!r}")
    return value


def _boolean(value: Any, path: str) -> bool:
    if not isinstance(value, bool):
        raise ConfigError(f"{path} must be a boolean, got {value!r}")
    return value


def _axis(value: Any, path: str) -> list[float]:
    """List of numbers, or {start, stop, count} for a uniform grid."""
    if isinstance(value, list):
        return [_number(v, f"{path}[{i}]") for i, v in enumerate(value)]
    if isinstance(value, dict):
        unknown = set(value) - _AXIS_KEYS
        if unknown:
            raise ConfigError(
                f"{path} grid table has unknown keys {sorted(unknown)}"
            )
        missing = _AXIS_KEYS - set(value)
        if missing:
            raise ConfigError(
                f"{path} grid table is missing keys {sorted(missing)}"
            )
        start = _number(value["start"], f"{path}.start")
        stop = _number(value["stop"], f"{path}.stop")
        count = _integer(value["count"], f"{path}.count")
        if count < 1:
            raise ConfigError(f"{path}.count must be >= 1, got {count}")
        if count == 1:
            return [start]
        step = (stop - start) / (count - 1)
        return [start + i * step for i in range(count)]
    raise ConfigError(
        f"{path} must be a list of numbers or a {{start, stop, count}} table"
    )


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration document plus its source path."""

    raw: dict
    path: str

    def has(self, section: str) -> bool:
        return section in self.raw

    def section(self, name: str) -> dict:
        if name not in self.raw:
            raise ConfigError(
                f"config {self.path} is missing the required [{name}] section"
            )
        return self.raw[name]

    def market(self) -> MarketParams:
        sec = self.section("market")
        missing = _SECTION_KEYS["market"] - set(sec)
        if missing:
            raise ConfigError(f"[market] is missing keys {sorted(missing)}")
        return MarketParams(
            spot=_number(sec["spot"], "market.spot"),
            strike=_number(sec["strike"], "market.strike"),
            rate=_number(sec["rate"], "market.rate"),
            volatility=_number(sec["volatility"], "market.volatility"),
            tau=_number(sec["tau"], "market.tau"),
        )

    def arbitrage(self) -> ArbitrageParams:
        sec = self.section("arbitrage")
        for key in ("intensity", "epsilon"):
            if key not in sec:
                raise ConfigError(f"[arbitrage] is missing key {key!r}")
        kwargs = {
            "intensity": _number(sec["intensity"], "arbitrage.intensity"),
            "epsilon": _number(sec["epsilon"], "arbitrage.epsilon"),
        }
        if "band_multiplier" in sec:
            kwargs["band_multiplier"] = _number(
                sec["band_multiplier"], "arbitrage.band_multiplier")
        return ArbitrageParams(**kwargs)

    def noise(self) -> NoiseModel:
        sec = self.section("noise")
        kind = _string(sec.get("kind", ""), "noise.kind")
        extra = set(sec) - {"kind"}
        if kind in ("ornstein_uhlenbeck", "ou"):
            wanted = {"mean_reversion", "diffusion_scale"}
            if extra != wanted:
                raise ConfigError(
                    f"[noise] kind {kind!r} needs exactly keys "
                    f"{sorted(wanted)}, got {sorted(extra)}"
                )
            return OrnsteinUhlenbeck(
                mean_reversion=_number(sec["mean_reversion"],
                                       "noise.mean_reversion"),
                diffusion_scale=_number(sec["diffusion_scale"],
                                        "noise.diffusion_scale"),
            )
        if kind == "telegraph":
            wanted = {"amplitude", "switch_rate"}
            if extra != wanted:
                raise ConfigError(
                    f"[noise] kind {kind!r} needs exactly keys "
                    f"{sorted(wanted)}, got {sorted(extra)}"
                )
            return Telegraph(
                amplitude=_number(sec["amplitude"], "noise.amplitude"),
                switch_rate=_number(sec["switch_rate"], "noise.switch_rate"),
            )
        if kind == "zero":
            if extra:
                raise ConfigError(
                    f"[noise] kind 'zero' takes no parameters, got "
                    f"{sorted(extra)}"
                )
            return ZeroNoise()
        raise ConfigError(
            "noise.kind must be 'ornstein_uhlenbeck', 'telegraph' or 'zero', "
            f"got {kind!r}"
        )

    def grid(self, mp: MarketParams, tau_max: float | None = None,
             default: tuple[int, int] | None = None) -> GridSpec:
        """GridSpec from [grid], with the domain defaulted when unset.

        When the section is absent entirely, `default` = (n_space, n_time)
        supplies a fallback resolution; without it the section is required.
        """
        if not self.has("grid"):
            if default is None:
                raise ConfigError(
                    f"config {self.path} is missing the required [grid] section"
                )
            n_space, n_time = default
            lo, hi = default_domain(mp, tau_max)
            return GridSpec(x_min=lo, x_max=hi, n_space=n_space, n_time=n_time)
        sec = self.raw["grid"]
        for key in ("n_space", "n_time"):
            if key not in sec:
                raise ConfigError(f"[grid] is missing key {key!r}")
        if ("x_min" in sec) != ("x_max" in sec):
            raise ConfigError("[grid] must set both or neither of x_min/x_max")
        if "x_min" in sec:
            lo = _number(sec["x_min"], "grid.x_min")
            hi = _number(sec["x_max"], "grid.x_max")
        else:
            lo, hi = default_domain(mp, tau_max)
        return GridSpec(
            x_min=lo,
            x_max=hi,
            n_space=_integer(sec["n_space"], "grid.n_space"),
            n_time=_integer(sec["n_time"], "grid.n_time"),
            scheme=_string(sec.get("scheme", "adi"), "grid.scheme"),
        )

    def seed(self) -> int:
        sec = self.raw.get("run", {})
        if "seed" not in sec:
            raise ConfigError(
                "[run] must set 'seed' for commands that draw random paths"
            )
        return _integer(sec["seed"], "run.seed")

    def threads(self) -> int:
        sec = self.raw.get("run", {})
        n = _integer(sec.get("threads", 1), "run.threads")
        if n < 1:
            raise ConfigError(f"run.threads must be >= 1, got {n}")
        return n

    def output_dir(self) -> str:
        sec = self.raw.get("run", {})
        return _string(sec.get("output_dir", "."), "run.output_dir")

    # typed accessors for subcommand sections

    def axis(self, section: str, key: str) -> list[float]:
        sec = self.section(section)
        if key not in sec:
            raise ConfigError(f"[{section}] is missing key {key!r}")
        return _axis(sec[key], f"{section}.{key}")

    def number(self, section: str, key: str, default: float | None = None) -> float:
        sec = self.section(section)
        if key not in sec:
            if default is None:
                raise ConfigError(f"[{section}] is missing key {key!r}")
            return default
        return _number(sec[key], f"{section}.{key}")

    def integer(self, section: str, key: str, default: int | None = None) -> int:
        sec = self.section(section)
        if key not in sec:
            if default is None:
                raise ConfigError(f"[{section}] is missing key {key!r}")
            return default
        return _integer(sec[key], f"{section}.{key}")

    def string(self, section: str, key: str, default: str | None = None) -> str:
        sec = self.section(section)
        if key not in sec:
            if default is None:
                raise ConfigError(f"[{section}] is missing key {key!r}")
            return default
        return _string(sec[key], f"{section}.{key}")

    def boolean(self, section: str, key: str, default: bool) -> bool:
        sec = self.section(section)
        if key not in sec:
            return default
        return _boolean(sec[key], f"{section}.{key}")


def load_config(path: str | Path) -> RunConfig:
    """Parse and structurally validate a TOML config file.

    Rejects unknown sections and keys outright; value types are checked
    lazily by the typed accessors so errors carry the key path.
    """
    p = Path(path)
    try:
        with open(p, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {p}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config file {p} is not valid TOML: {exc}") from None
    for section, content in raw.items():
        if section not in _SECTION_KEYS:
            raise ConfigError(
                f"unknown config section [{section}] "
                f"(known: {sorted(_SECTION_KEYS)})"
            )
        if not isinstance(content, dict):
            raise ConfigError(f"[{section}] must be a table")
        unknown = set(content) - _SECTION_KEYS[section]
        if unknown:
            raise ConfigError(
                f"unknown keys {sorted(unknown)} in section [{section}]"
            )
    return RunConfig(raw=raw, path=str(p))
