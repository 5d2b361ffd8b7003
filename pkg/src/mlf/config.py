"""Run configuration: defaults, JSON config files, CLI overrides."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict


class ConfigError(ValueError):
    pass


# default tolerances per check family (overridable via the config file)
DEFAULT_TOLERANCES = {
    "monodromy.deviation": 1e-4,
    "transport.oracle": 1e-6,
    "transport.fiber_error": 1e-6,
    "hnu.linearization": 1e-6,
    "h0.chart_identity": 1e-10,
    "h0.critical_values": 1e-10,
    "upsilon.sphere_value": 1e-10,
    "upsilon.derivative_floor": 1e-10,
    "upsilon.zero_residual": 1e-8,
    "surgery.deviation.closed": 1e-6,
    "surgery.deviation.ode": 1e-4,
    "thimble.imag": 1e-6,
    "thimble.pairing": 1e-4,
    "ms.connection_angle": 1e-3,
    "probe.blowup_min": 10.0,
    "probe.control_max": 2.0,
    "pf.homogeneity": 1e-10,
    "pw.root_residual": 1e-10,
    "pw.gradient_residual": 1e-8,
    "double.g_over_p": 1e-8,
    "sharp.im_h": 1e-8,
    "sharp.nonsolution_floor": 1e-3,
}

DEFAULT_SAMPLES = {
    "scan.interior": 100_000,
    "scan.sphere": 30_000,
    "region": 100_000,
    "fiber_samples": 10_000,
    "slope_samples": 20_000,
    "slice_samples": 200,
    "double_rays": 300,
}


@dataclass
class RunConfig:
    command: str
    scenario: str
    seed: int = 0
    out_dir: str = "mlf-out"
    tolerances: dict = field(default_factory=dict)
    samples: dict = field(default_factory=dict)

    def tol(self, name: str) -> float:
        if name in self.tolerances:
            return float(self.tolerances[name])
        if name not in DEFAULT_TOLERANCES:
            raise ConfigError(f"unknown tolerance key: {name}")
        return DEFAULT_TOLERANCES[name]

    def budget(self, name: str) -> int:
        if name in self.samples:
            return int(self.samples[name])
        if name not in DEFAULT_SAMPLES:
            raise ConfigError(f"unknown sample-budget key: {name}")
        return DEFAULT_SAMPLES[name]

    def as_dict(self):
        return asdict(self)


_ALLOWED_KEYS = {"command", "scenario", "seed", "out_dir", "tolerances", "samples"}


def parse_config(text: str) -> dict:
    """Parse a JSON config; returns a partial-settings dict.

    Unknown top-level keys, unknown tolerance/sample keys, and malformed
    JSON are rejected (no partial config escapes).
    """
    try:
        data = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as e:
        raise ConfigError(f"config parse error at line {e.lineno}, column {e.colno}: {e.msg}")
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(data) - _ALLOWED_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for section, defaults in (("tolerances", DEFAULT_TOLERANCES),
                              ("samples", DEFAULT_SAMPLES)):
        sub = data.get(section, {})
        if not isinstance(sub, dict):
            raise ConfigError(f"{section} must be a JSON object")
        bad = set(sub) - set(defaults)
        if bad:
            raise ConfigError(f"unknown {section} keys: {sorted(bad)}")
    return data


def resolve_config(command: str, scenario: str, config_text: str = "",
                   seed=None, out_dir=None) -> RunConfig:
    """Merge defaults, config file, and CLI overrides (CLI wins)."""
    data = parse_config(config_text)
    cfg = RunConfig(
        command=command or data.get("command", ""),
        scenario=scenario or data.get("scenario", ""),
        seed=int(seed if seed is not None else data.get("seed", 0)),
        out_dir=str(out_dir if out_dir is not None else data.get("out_dir", "mlf-out")),
        tolerances=dict(data.get("tolerances", {})),
        samples=dict(data.get("samples", {})),
    )
    if not cfg.command:
        raise ConfigError("no command given")
    if not cfg.scenario:
        raise ConfigError("no scenario given")
    return cfg
