"""Experiment configuration: TOML parsing, figure presets and dumping."""
from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .analytic import SystemParams
from .pulse import PulseShape, PulseSpec

ARTIFACTS = ("population", "flux", "input_spectrum", "stationary_spectrum",
             "dynamical_spectrum", "report")

# preset -> (photon numbers, gamma * t_p values); gamma = 1, rectangular,
# resonant.
PRESETS = {
    "fig2a": ((1,), (2.0,)),
    "fig2b": ((2,), (2.0,)),
    "fig2c": ((1,), (2.0, 0.5)),
    "fig2d": ((2,), (2.0, 0.5)),
    "fig3": ((1, 2), (2.0,)),
    "fig5": ((1, 2), (10.0,)),
}


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the field path."""


@dataclass
class NumericsConfig:
    dt: float = 0.01
    tail: float = 12.0
    chi_max: int = 32
    svd_tol: float = 1e-10
    # 0 means photon_number + 1
    bin_cutoff: int = 0
    truncation_budget: float = 1e-6

    def cutoff_for(self, photon_number: int) -> int:
        return self.bin_cutoff or photon_number + 1


@dataclass
class ObservablesConfig:
    omega_min: float = -10.0
    omega_max: float = 10.0
    n_omega: int = 401
    time_stride: int = 10


@dataclass
class OutputsConfig:
    directory: str = "out"
    artifacts: list = field(default_factory=lambda: list(ARTIFACTS))
    checkpoint: bool = False


@dataclass
class ExperimentConfig:
    system: SystemParams = field(default_factory=SystemParams)
    pulse: PulseSpec = field(default_factory=PulseSpec)
    numerics: NumericsConfig = field(default_factory=NumericsConfig)
    observables: ObservablesConfig = field(default_factory=ObservablesConfig)
    outputs: OutputsConfig = field(default_factory=OutputsConfig)
    preset: str | None = None

    def cases(self) -> list[PulseSpec]:
        """Pulses to simulate: the preset's (n, t_p) grid or the single
        configured pulse."""
        if self.preset is None:
            return [self.pulse]
        ns, tps = PRESETS[self.preset]
        return [PulseSpec(PulseShape.RECTANGULAR, t_p=tp, photon_number=n)
                for n in ns for tp in tps]


_SECTIONS = {
    "system": SystemParams,
    "pulse": PulseSpec,
    "numerics": NumericsConfig,
    "observables": ObservablesConfig,
    "outputs": OutputsConfig,
}


def _coerce(path: str, value, default):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected true/false, got {value!r}")
        return value
    if isinstance(default, PulseShape):
        try:
            return PulseShape(value)
        except ValueError:
            choices = ", ".join(s.value for s in PulseShape)
            raise ConfigError(f"{path}: expected one of {choices}, "
                              f"got {value!r}") from None
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        if not math.isfinite(value):
            raise ConfigError(f"{path}: must be finite")
        return float(value)
    if isinstance(default, list):
        if not isinstance(value, list):
            raise ConfigError(f"{path}: expected a list, got {value!r}")
        return list(value)
    if not isinstance(value, str):
        raise ConfigError(f"{path}: expected a string, got {value!r}")
    return value


def _build_section(name: str, raw) -> object:
    cls = _SECTIONS[name]
    if not isinstance(raw, dict):
        raise ConfigError(f"{name}: expected a table")
    base = cls()
    known = {f.name for f in fields(cls)}
    kwargs = {}
    for key, value in raw.items():
        if key not in known:
            raise ConfigError(f"{name}.{key}: unknown field "
                              f"(expected one of {', '.join(sorted(known))})")
        kwargs[key] = _coerce(f"{name}.{key}", value, getattr(base, key))
    try:
        return replace(base, **kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: {exc}") from None


def _preset_values(preset: str) -> dict:
    """Allowed values of every field a preset determines."""
    ns, tps = PRESETS[preset]
    return {
        "system.gamma": (1.0,), "system.delta": (0.0,),
        "pulse.shape": (PulseShape.RECTANGULAR,),
        "pulse.t_p": tps, "pulse.carrier_detuning": (0.0,),
        "pulse.photon_number": ns,
    }


def _validate(cfg: ExperimentConfig, raw: dict) -> None:
    num, obs, out = cfg.numerics, cfg.observables, cfg.outputs
    checks = [
        ("numerics.dt", num.dt > 0, "must be positive"),
        ("numerics.tail", num.tail > 0, "must be positive"),
        ("numerics.chi_max", num.chi_max >= 2, "must be >= 2"),
        ("numerics.svd_tol", num.svd_tol >= 0, "must be >= 0"),
        ("numerics.bin_cutoff", num.bin_cutoff >= 0, "must be >= 0"),
        ("observables.n_omega", obs.n_omega >= 2, "must be >= 2"),
        ("observables.omega_max", obs.omega_max > obs.omega_min,
         "must exceed omega_min"),
        ("observables.time_stride", obs.time_stride >= 1, "must be >= 1"),
    ]
    for path, ok, msg in checks:
        if not ok:
            raise ConfigError(f"{path}: {msg}")
    if cfg.preset is not None and cfg.preset not in PRESETS:
        raise ConfigError(f"preset: unknown preset {cfg.preset!r} "
                          f"(expected one of {', '.join(PRESETS)})")
    bad = [a for a in out.artifacts if a not in ARTIFACTS]
    if bad:
        raise ConfigError(f"outputs.artifacts: unknown artifact(s) {bad}")
    for spec in cfg.cases():
        if num.bin_cutoff and num.bin_cutoff < spec.photon_number:
            raise ConfigError(
                f"numerics.bin_cutoff: {num.bin_cutoff} cannot hold "
                f"{spec.photon_number} photons")
    if cfg.system.gamma <= 0:
        raise ConfigError("system.gamma: must be positive")
    if cfg.preset is None:
        return
    for path, allowed in _preset_values(cfg.preset).items():
        section, key = path.split(".")
        if key in raw.get(section, {}):
            value = getattr(getattr(cfg, section), key)
            if value not in allowed:
                raise ConfigError(
                    f"{path}: {value!r} contradicts preset {cfg.preset!r} "
                    f"(allowed: {', '.join(map(str, allowed))})")


def config_from_dict(raw: dict, preset: str | None = None,
                     ) -> ExperimentConfig:
    raw = dict(raw)
    known = set(_SECTIONS) | {"preset"}
    for key in raw:
        if key not in known:
            raise ConfigError(f"{key}: unknown top-level field")
    sections = {name: _build_section(name, raw.get(name, {}))
                for name in _SECTIONS}
    chosen = preset if preset is not None else raw.get("preset")
    if chosen in ("none", ""):
        chosen = None
    if chosen is not None and not isinstance(chosen, str):
        raise ConfigError(f"preset: expected a string, got {chosen!r}")
    cfg = ExperimentConfig(preset=chosen, **sections)
    _validate(cfg, raw)
    return cfg


def load_config(path, preset: str | None = None) -> ExperimentConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: invalid TOML: {exc}") from None
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read: {exc.strerror}") from None
    return config_from_dict(raw, preset=preset)


def _toml_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, PulseShape):
        return f'"{value.value}"'
    if isinstance(value, str):
        return f'"{value}"'
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, list):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    return str(value)


def dump_config(cfg: ExperimentConfig) -> str:
    """Resolved configuration as TOML text."""
    lines = []
    if cfg.preset is not None:
        lines.append(f'preset = "{cfg.preset}"')
    for name in _SECTIONS:
        section = getattr(cfg, name)
        lines.append(f"\n[{name}]")
        for f in fields(section):
            path = f"{name}.{f.name}"
            # fields owned by the preset are echoed as comments so that the
            # dump loads back without conflicts
            if cfg.preset is not None and path in _preset_values(cfg.preset):
                values = _preset_values(cfg.preset)[path]
                shown = ", ".join(_toml_value(v) for v in values)
                lines.append(f"# {f.name}: set by preset ({shown})")
            else:
                lines.append(f"{f.name} = {_toml_value(getattr(section, f.name))}")
    if cfg.preset is not None:
        lines.append("\n# cases fixed by the preset: " + ", ".join(
            f"(n={s.photon_number}, t_p={s.t_p:g})" for s in cfg.cases()))
    return "\n".join(lines).lstrip("\n") + "\n"
