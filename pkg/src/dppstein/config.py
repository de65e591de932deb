"""YAML run configuration.

Sections and keys (lengths in window units, intensity in points per unit
volume)::

    kernel:     m, alpha, rho, d, lambda_envelope
    statistic:  kind, tau, r, p_max, g_bound
    experiment: n_list, replications, seed, kmax_cap, workers,
                window_side, pcf_bins, pcf_r_max
    bound:      d, M, kappa, lambda, gamma, n_list
    output:     directory, formats, dump_w

Unknown sections or keys are rejected.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass
from pathlib import Path

import yaml

from .errors import ConfigError
from .kernels import LaguerreGaussianSpec
from .sampler import DEFAULT_KMAX_CAP
from .statistics import LocalStatistic
from .verify import ExperimentConfig

SCHEMA = {
    "kernel": {"m": int, "alpha": float, "rho": float, "d": int, "lambda_envelope": float},
    "statistic": {"kind": str, "tau": float, "r": float, "p_max": int, "g_bound": float},
    "experiment": {
        "n_list": list, "replications": int, "seed": int, "kmax_cap": int, "workers": int,
        "window_side": float, "pcf_bins": int, "pcf_r_max": float,
    },
    "bound": {"d": int, "M": float, "kappa": float, "lambda": float, "gamma": float, "n_list": list},
    "output": {"directory": str, "formats": list, "dump_w": bool},
}

DEFAULTS = {
    "kernel": {"lambda_envelope": 1.0},
    "statistic": {"g_bound": 1.0},
    "experiment": {"seed": 0, "kmax_cap": DEFAULT_KMAX_CAP, "workers": 1, "pcf_bins": 8},
    "output": {"directory": "out", "formats": ["json", "csv"], "dump_w": False},
}


def _coerce(section, key, value):
    kind = SCHEMA[section][key]
    if value is None:
        return None
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{section}.{key} must be a number, got {value!r}")
        return float(value)
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{section}.{key} must be an integer, got {value!r}")
        return value
    if kind is list:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{section}.{key} must be a list, got {value!r}")
        return list(value)
    if not isinstance(value, kind):
        raise ConfigError(f"{section}.{key} must be {kind.__name__}, got {value!r}")
    return value


@dataclass
class RunConfig:
    sections: dict

    @classmethod
    def from_dict(cls, raw: dict | None) -> "RunConfig":
        raw = raw or {}
        if not isinstance(raw, dict):
            raise ConfigError("configuration root must be a mapping")
        sections = copy.deepcopy(DEFAULTS)
        for name, body in raw.items():
            if name not in SCHEMA:
                raise ConfigError(f"unknown section {name!r}; allowed: {sorted(SCHEMA)}")
            if body is None:
                continue
            if not isinstance(body, dict):
                raise ConfigError(f"section {name!r} must be a mapping")
            for key, value in body.items():
                if key not in SCHEMA[name]:
                    raise ConfigError(f"unknown key {name}.{key}; allowed: {sorted(SCHEMA[name])}")
                sections.setdefault(name, {})[key] = _coerce(name, key, value)
        return cls(sections)

    @classmethod
    def load(cls, path: str | Path | None) -> "RunConfig":
        if path is None:
            return cls.from_dict({})
        with open(path) as fh:
            try:
                raw = yaml.safe_load(fh)
            except yaml.YAMLError as exc:
                raise ConfigError(f"cannot parse {path}: {exc}") from exc
        return cls.from_dict(raw)

    def override(self, section: str, **values):
        for key, value in values.items():
            if value is not None:
                self.sections.setdefault(section, {})[key] = _coerce(section, key, value)

    def get(self, section: str, key: str, default=None):
        return self.sections.get(section, {}).get(key, default)

    def require(self, section: str, *keys):
        missing = [k for k in keys if self.get(section, k) is None]
        if missing:
            raise ConfigError(f"missing required keys: {', '.join(f'{section}.{k}' for k in missing)}")

    def kernel(self) -> LaguerreGaussianSpec:
        self.require("kernel", "m", "alpha", "rho", "d")
        k = self.sections["kernel"]
        return LaguerreGaussianSpec(m=k["m"], alpha=k["alpha"], rho=k["rho"], d=k["d"])

    def statistic(self) -> LocalStatistic:
        self.require("statistic", "kind", "tau")
        s = self.sections["statistic"]
        return LocalStatistic(kind=s["kind"], tau=s["tau"], p_max=s.get("p_max"), r=s.get("r"), g_bound=s["g_bound"])

    def experiment(self) -> ExperimentConfig:
        self.require("experiment", "n_list", "replications", "seed")
        e = self.sections["experiment"]
        return ExperimentConfig(
            kernel=self.kernel(), statistic=self.statistic(), n_list=tuple(e["n_list"]),
            replications=e["replications"], seed=e["seed"],
            lambda_envelope=self.get("kernel", "lambda_envelope"),
            kmax_cap=e["kmax_cap"], workers=e["workers"],
        )

    def echo(self) -> dict:
        """Configuration as written into result files; the output location is
        omitted so identical runs in different directories match byte for byte."""
        out = copy.deepcopy(self.sections)
        out.get("output", {}).pop("directory", None)
        return out
