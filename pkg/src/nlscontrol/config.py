"""Experiment configurations: strict TOML round trip and per-kind schemas.

A config file carries the experiment kind, the seed, the output directory
and one ``[params]`` table.  Parsing is strict: unknown keys anywhere and
unknown parameter names for the declared kind are rejected.  Values are
ints, floats, bools or strings; the writer emits them with round-tripping
representations so that load(save(c)) == c exactly.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = ["ExperimentConfig", "ConfigError", "SCHEMAS", "load_config", "dump_config"]


class ConfigError(ValueError):
    pass


# parameter name -> (type, default); None default means required
SCHEMAS: dict = {
    "exponents": {"alpha": (int, 2), "n": (int, 3)},
    "table1": {},
    "simulate": {
        "n": (int, 1),
        "N": (int, 8),
        "basis": (str, "exponential"),
        "T": (float, 1.0),
        "s": (float, 0.0),
        "samples": (int, 65),
        "damped": (bool, False),
        "a_profile": (str, "bump"),
        "a_amplitude": (float, 1.0),
        "a_fraction": (float, 0.25),
        "field_file": (str, ""),
    },
    "control-internal": {
        "n": (int, 1),
        "N": (int, 16),
        "T": (float, 1.0),
        "s": (float, 0.0),
        "a_profile": (str, "bump"),
        "a_amplitude": (float, 1.0),
        "a_fraction": (float, 0.25),
        "a_truncation": (int, 12),
        "tikhonov": (bool, False),
    },
    "control-dirichlet": {
        "n": (int, 1),
        "N": (int, 16),
        "T": (float, 1.0),
        "s": (float, 0.0),
        "controller_epsilon": (float, 1.2),
        "order": (int, 3),
        "target_decay": (float, 2.0),
        "cond_sweep": (bool, False),
    },
    "control-neumann": {
        "n": (int, 1),
        "N": (int, 16),
        "s": (float, 0.0),
        "T": (float, 6.283185307179586),
        "side": (str, "x1=0"),
    },
    "control-nonlinear": {
        "bc": (str, "periodic"),
        "boundary": (bool, False),
        "n": (int, 1),
        "N": (int, 16),
        "T": (float, 1.0),
        "s": (float, 0.6),
        "b": (float, 0.625),
        "alpha1": (int, 2),
        "alpha2": (int, 1),
        "lam": (float, 1.0),
        "delta": (float, 1e-3),
        "a_profile": (str, "bump"),
        "a_amplitude": (float, 1.0),
        "a_fraction": (float, 0.25),
        "a_truncation": (int, 12),
        "controller_epsilon": (float, 1.2),
        "order": (int, 3),
        "replay_steps": (int, 4096),
    },
    "stabilize": {
        "n": (int, 1),
        "N": (int, 16),
        "s": (float, 0.0),
        "tmax": (float, 400.0),
        "alpha1": (int, 2),
        "alpha2": (int, 1),
        "lam": (float, 1.0),
        "delta": (float, 1e-2),
        "a_profile": (str, "bump"),
        "a_amplitude": (float, 2.0),
        "a_fraction": (float, 0.5),
        "a_truncation": (int, 10),
        "emit_plot": (bool, True),
    },
    "probe-xsb": {
        "probe": (str, "homogeneous"),
        "samples": (int, 20),
        "n": (int, 1),
        "N": (int, 8),
        "s": (float, 0.0),
        "b": (float, 0.55),
        "T": (float, 1.0),
        "a_profile": (str, "bump"),
        "a_amplitude": (float, 1.0),
        "a_fraction": (float, 0.5),
        "a_truncation": (int, 6),
    },
    "probe-multilinear": {
        "alpha": (int, 1),
        "n": (int, 2),
        "N": (int, 6),
        "M": (int, 16),
        "samples": (int, 50),
        "s_offset": (float, 0.1),
        "T": (float, 1.0),
        "contrast": (bool, True),
        "conjugate_bilinear": (bool, False),
        "bilinear_s": (float, -0.36),
        "bilinear_b": (float, 0.40),
    },
    "probe-claims": {
        "claim": (int, 3),
        "gamma": (float, 1.0),
        "lambda_max": (float, 32.0),
        "k_range": (int, 10000),
        "s": (float, -1.0),
        "delta": (float, 0.4),
        "k": (int, 3),
        "n": (int, 2),
        "p_max": (int, 32),
        "q_range": (int, 120),
        "sigma": (float, 0.0),
        "n_max": (int, 64),
        "m_max": (int, 100000),
    },
    "identity-multiplier": {
        "n": (int, 2),
        "N": (int, 8),
        "T": (float, 0.5),
        "delta": (float, 0.4153846153846154),
        "samples": (int, 10),
        "multiplier": (str, "convex"),
        "panels": (int, 16),
    },
}

_TOP_KEYS = {"kind", "seed", "outdir", "params", "tolerances"}


@dataclass
class ExperimentConfig:
    kind: str
    seed: int = 0
    outdir: str = "results"
    params: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in SCHEMAS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        schema = SCHEMAS[self.kind]
        unknown = set(self.params) - set(schema)
        if unknown:
            raise ConfigError(
                f"unknown parameter(s) for {self.kind}: {sorted(unknown)}"
            )
        merged = {}
        for name, (typ, default) in schema.items():
            if name in self.params:
                value = self.params[name]
                if typ is float and isinstance(value, int) and not isinstance(value, bool):
                    value = float(value)
                if not isinstance(value, typ) or (
                    typ in (int, float) and isinstance(value, bool)
                ):
                    raise ConfigError(
                        f"parameter {name} must be {typ.__name__}, got {value!r}"
                    )
                merged[name] = value
            elif default is None:
                raise ConfigError(f"missing required parameter {name}")
            else:
                merged[name] = default
        self.params = merged
        for k, v in self.tolerances.items():
            if not isinstance(v, (int, float)) or isinstance(v, bool):
                raise ConfigError(f"tolerance {k} must be numeric")

    def __getitem__(self, name):
        return self.params[name]


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        text = repr(v)
        return text if any(c in text for c in ".eE") else text + ".0"
    if isinstance(v, str):
        escaped = v.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    raise ConfigError(f"unsupported value type {type(v).__name__}")


def dump_config(cfg: ExperimentConfig) -> str:
    lines = [
        f"kind = {_toml_value(cfg.kind)}",
        f"seed = {cfg.seed}",
        f"outdir = {_toml_value(cfg.outdir)}",
        "",
        "[params]",
    ]
    for name in sorted(cfg.params):
        lines.append(f"{name} = {_toml_value(cfg.params[name])}")
    if cfg.tolerances:
        lines.append("")
        lines.append("[tolerances]")
        for name in sorted(cfg.tolerances):
            lines.append(f"{name} = {_toml_value(cfg.tolerances[name])}")
    return "\n".join(lines) + "\n"


def load_config(text: str) -> ExperimentConfig:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as err:
        raise ConfigError(f"invalid config syntax: {err}") from None
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {sorted(unknown)}")
    if "kind" not in doc:
        raise ConfigError("config must declare a kind")
    return ExperimentConfig(
        kind=doc["kind"],
        seed=int(doc.get("seed", 0)),
        outdir=str(doc.get("outdir", "results")),
        params=dict(doc.get("params", {})),
        tolerances=dict(doc.get("tolerances", {})),
    )
