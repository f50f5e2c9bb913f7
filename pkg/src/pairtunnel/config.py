"""Run configurations and figure presets for the command-line front end."""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field, fields

import numpy as np

from .model import MODELS, ModelParams, PotentialProfile
from .dynamics import WavePacketSpec

COMMANDS = ("bands", "scatter", "wavepacket", "verify")
FORMATS = ("csv", "json")


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration (exit code 2)."""


def expand_grid(value, name: str) -> tuple[float, ...]:
    """A grid is a list of numbers or ``{"start", "stop", "num"}`` (inclusive)."""
    if value is None:
        return ()
    if isinstance(value, dict):
        extra = set(value) - {"start", "stop", "num"}
        if extra or len(value) != 3:
            raise ConfigError(f"{name}: grid dict needs exactly start, stop, num (got {sorted(value)})")
        num = value["num"]
        if not isinstance(num, int) or isinstance(num, bool) or num < 1:
            raise ConfigError(f"{name}: num must be a positive integer")
        return tuple(float(v) for v in np.linspace(float(value["start"]), float(value["stop"]), num))
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return (float(value),)
    if isinstance(value, (list, tuple)):
        try:
            out = tuple(float(v) for v in value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{name}: grid entries must be numbers") from exc
        if not all(math.isfinite(v) for v in out):
            raise ConfigError(f"{name}: grid entries must be finite")
        return out
    raise ConfigError(f"{name}: expected a list or {{start, stop, num}}")


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce one CLI run.

    ``series`` holds labelled override dicts; each entry is merged over the
    top-level fields and run in turn, so one file can describe a whole figure.
    """

    command: str = "scatter"
    models: tuple[str, ...] = ("two-state",)
    # model parameters
    J: float = 1.0
    U0: float = -2.0
    U1: float = 0.0
    theta: float = 0.0
    num_sites: int | None = None
    boundary: str | None = None
    # potential
    shape: str = "gaussian"
    V: float = 0.0
    sigma: float = 0.65
    center: int = 0
    site_end: int | None = None
    values: tuple[float, ...] | None = None
    # wave packet
    kappa0: float = math.pi / 2
    packet_center: int = -60
    packet_width: float = 10.0
    construction: str = "bloch-superposition"
    t_final: float | None = None
    sample_every: float = 1.0
    d_bound: int | None = None
    # grids
    kappa: tuple[float, ...] = ()
    V_grid: tuple[float, ...] = ()
    theta_grid: tuple[float, ...] = ()
    hopping: float | None = None
    snapshot: bool = False
    traces: bool = False
    checks: tuple[int, ...] = ()
    series: tuple[dict, ...] = ()
    label: str = ""
    # output
    out: str | None = None
    format: str = "csv"

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"command must be one of {COMMANDS}")
        if self.format not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS}")
        bad = [m for m in self.models if m not in MODELS]
        if bad or not self.models:
            raise ConfigError(f"models must be drawn from {MODELS}, got {list(self.models)}")
        for entry in self.series:
            if "label" not in entry:
                raise ConfigError("every series entry needs a label")
            _check_keys(entry, where=f"series[{entry.get('label')}]", allow_series=False)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        _check_keys(data, where="config")
        kw = dict(data)
        for key in ("kappa", "V_grid", "theta_grid"):
            if key in kw:
                kw[key] = expand_grid(kw[key], key)
        if "values" in kw and kw["values"] is not None:
            kw["values"] = expand_grid(kw["values"], "values")
        if "models" in kw:
            m = kw["models"]
            kw["models"] = (m,) if isinstance(m, str) else tuple(m)
        if "checks" in kw:
            kw["checks"] = tuple(int(c) for c in kw["checks"])
        if "series" in kw:
            kw["series"] = tuple(_normalise_entry(e) for e in kw["series"])
        try:
            return cls(**kw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = [dict(e) for e in v] if f.name == "series" else list(v)
            out[f.name] = v
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def sha256(self) -> str:
        """Hash of the run inputs; where and how results are written is excluded."""
        inputs = {k: v for k, v in self.to_dict().items() if k not in ("out", "format")}
        return hashlib.sha256(json.dumps(inputs, sort_keys=True).encode()).hexdigest()

    def merged(self, overrides: dict) -> "RunConfig":
        base = self.to_dict()
        base.update(overrides)
        base["series"] = []
        return RunConfig.from_dict(base)

    def runs(self) -> list["RunConfig"]:
        """One config per series entry, or the config itself."""
        if not self.series:
            return [self]
        return [self.merged(entry) for entry in self.series]

    def model_params(self, default_sites: int, default_boundary: str) -> ModelParams:
        return ModelParams(
            J=self.J,
            U0=self.U0,
            U1=self.U1,
            theta=self.theta,
            num_sites=self.num_sites if self.num_sites is not None else default_sites,
            boundary=self.boundary if self.boundary is not None else default_boundary,
        )

    def profile(self, V: float | None = None) -> PotentialProfile:
        V = self.V if V is None else V
        if self.shape == "none":
            return PotentialProfile.none()
        if self.shape == "gaussian":
            return PotentialProfile.gaussian(V, self.sigma, self.center)
        if self.shape == "impurity":
            return PotentialProfile.impurity(V, self.center)
        if self.shape == "box":
            if self.site_end is None:
                raise ConfigError("box potential needs site_end")
            return PotentialProfile.box(V, self.center, self.site_end)
        if self.shape == "tabulated":
            if not self.values:
                raise ConfigError("tabulated potential needs values")
            return PotentialProfile.tabulated(self.values, self.center, V)
        raise ConfigError(f"unknown potential shape {self.shape!r}")

    def packet(self) -> WavePacketSpec:
        return WavePacketSpec(self.kappa0, self.packet_center, self.packet_width, self.construction)


_FIELDS = {f.name for f in fields(RunConfig)}


def _check_keys(data: dict, where: str, allow_series: bool = True):
    allowed = _FIELDS if allow_series else (_FIELDS - {"series"})
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")


def _normalise_entry(entry) -> dict:
    if not isinstance(entry, dict):
        raise ConfigError("series entries must be objects")
    _check_keys(entry, where="series entry", allow_series=False)
    out = dict(entry)
    for key in ("kappa", "V_grid", "theta_grid", "values"):
        if key in out and out[key] is not None:
            out[key] = list(expand_grid(out[key], key))
    if isinstance(out.get("models"), str):
        out["models"] = [out["models"]]
    return out


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from exc


FULL_THETA = {"start": 0.0, "stop": 2 * math.pi / 11, "num": 21}
KAPPA_BAND = {"start": -math.pi, "stop": math.pi, "num": 201}
V_FINE = {"start": -4.0, "stop": 4.0, "num": 801}
V_SCAN = {"start": -4.0, "stop": 2.0, "num": 31}

PRESETS: dict[str, dict] = {
    "fig1-left": {
        "command": "bands",
        "models": ["full"],
        "J": 1.0,
        "U0": -2.0,
        "U1": 0.0,
        "num_sites": 11,
        "boundary": "periodic",
        "theta_grid": FULL_THETA,
        "kappa": KAPPA_BAND,
    },
    "fig1-right": {
        "command": "bands",
        "models": ["full"],
        "J": 1.0,
        "U0": -5.0,
        "U1": -3.0,
        "num_sites": 11,
        "boundary": "periodic",
        "theta_grid": FULL_THETA,
        "kappa": KAPPA_BAND,
    },
    "fig2": {
        "command": "scatter",
        "models": ["two-state", "one-state"],
        "J": 1.0,
        "sigma": 0.65,
        "kappa": [math.pi / 2],
        "V_grid": V_FINE,
        "series": [
            {"label": "Delta=1", "U0": -1.0, "U1": 0.0},
            {"label": "Delta=2", "U0": -2.0, "U1": 0.0},
            {"label": "Delta=4", "U0": -4.0, "U1": 0.0},
        ],
    },
    "fig9": {
        "command": "scatter",
        "J": 1.0,
        "sigma": 0.65,
        "kappa": {"start": 0.02, "stop": math.pi - 0.02, "num": 100},
        "V_grid": {"start": -4.0, "stop": 4.0, "num": 161},
        "series": [
            {"label": "one-state", "models": ["one-state"], "U0": -4.0, "U1": -2.0, "hopping": (math.sqrt(3) - 1) / 2},
            {"label": "two-state", "models": ["two-state"], "U0": -4.0, "U1": -2.0},
            {"label": "three-state U1=-2", "models": ["three-state"], "U0": -4.0, "U1": -2.0},
            {"label": "three-state U1=0", "models": ["three-state"], "U0": -2.0, "U1": 0.0},
        ],
    },
    "fig3": {
        "command": "wavepacket",
        "models": ["full"],
        "J": 1.0,
        "U0": -2.0,
        "U1": 0.0,
        "V": -2.0,
        "sigma": 0.65,
        "kappa0": math.pi / 2,
        "snapshot": True,
    },
    "fig7": {
        "command": "wavepacket",
        "J": 1.0,
        "U0": -4.0,
        "U1": -2.0,
        "V": -2.2,
        "sigma": 0.65,
        "kappa0": math.pi / 2,
        # shared time axis; the full model's own transit time is 304.7
        "t_final": 305.0,
        "traces": True,
        "series": [
            {"label": "two-state", "models": ["two-state"]},
            {"label": "three-state", "models": ["three-state"]},
            {"label": "full", "models": ["full"]},
        ],
    },
}
for _name, (_u0, _u1) in {"fig4-top": (-8.0, -6.0), "fig4-mid": (-4.0, -2.0), "fig4-bot": (-2.0, 0.0)}.items():
    PRESETS[_name] = {
        "command": "wavepacket",
        "models": ["full"],
        "J": 1.0,
        "U0": _u0,
        "U1": _u1,
        "sigma": 0.65,
        "kappa0": math.pi / 2,
        "V_grid": V_SCAN,
    }


def preset(name: str) -> dict:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return json.loads(json.dumps(PRESETS[name]))


def build_config(command: str, preset_name: str | None = None, file_data: dict | None = None, **cli) -> RunConfig:
    """Preset, then config file, then command-line options; later wins."""
    data: dict = {}
    if preset_name:
        data.update(preset(preset_name))
        if data.get("command", command) != command:
            raise ConfigError(f"preset {preset_name!r} is for `{data['command']}`, not `{command}`")
    if file_data:
        _check_keys(file_data, where="config")
        data.update(file_data)
    data.update({k: v for k, v in cli.items() if v is not None})
    data["command"] = command
    return RunConfig.from_dict(data)


def replace(cfg: RunConfig, **changes) -> RunConfig:
    return dataclasses.replace(cfg, **changes)
