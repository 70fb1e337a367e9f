"""Experiment configuration: flat TOML files with dotted keys, plus named presets."""

import hashlib
import json
import os
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from ..errors import DomainError, ValidationError
from ..memory import ENTANGLED_PARAMS, QUBIT_PARAMS, MemoryParams

MODES = ("qubit-storage", "entangled-storage", "predict", "analyze", "fit")
STOCHASTIC_MODES = ("qubit-storage", "entangled-storage", "analyze", "fit")
PRESETS = ("qubit-fig2", "entangled-fig4")
SEED_ENV = "PHONONMEM_SEED"

# config key suffix -> MemoryParams field
_MEMORY_KEYS = {
    "S0_hz": "S0", "Nc_hz": "Nc", "N0_hz": "N0", "tau_m_ps": "tau_m",
    "eta_w": "eta_w", "eta_r": "eta_r", "E_w_nj": "E_w", "E_r_nj": "E_r",
    "T_k": "T", "nu_phonon_thz": "nu_phonon",
}


def default_tau_grid():
    return [round(0.5 * k, 10) for k in range(17)]


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str = "qubit-storage"
    qubit_params: MemoryParams = QUBIT_PARAMS
    entangled_params: MemoryParams = ENTANGLED_PARAMS
    tau_grid: tuple = tuple(default_tau_grid())
    # Tomography counts: total output rate at tau = 0 (Hz, None -> model rate) and time per setting (s).
    pair_rate_hz: float = None
    integration_s: float = 140.0
    accidental_hz: float = 0.0
    noiseless: bool = False
    seed: int = None
    mc_resamples: int = 0
    input_state: str = "phi_plus"
    input_werner_p: float = 1.0
    input_matrix_file: str = None
    predict_scenario: str = "cooling"
    predict_temperature_k: float = 233.15
    predict_energy_nj: float = 10.0
    fit_integration_s: float = 5040.0
    fit_method: str = "sequential"
    output_path: str = "report"
    output_format: str = "both"
    source: str = "defaults"
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}, got {self.mode!r}")
        grid = np.asarray(self.tau_grid, dtype=float)
        if grid.ndim != 1 or grid.size == 0:
            raise ValidationError("tau grid must be a non-empty list")
        if np.any(grid < 0) or np.any(np.diff(grid) <= 0):
            raise ValidationError("tau grid must be non-negative and strictly increasing")
        if self.mc_resamples < 0:
            raise ValidationError("mc_resamples must be >= 0")
        if self.mc_resamples == 1:
            raise ValidationError("mc_resamples must be 0 or at least 2")
        if not self.integration_s > 0 or not self.fit_integration_s > 0:
            raise ValidationError("integration times must be positive")
        if self.pair_rate_hz is not None and not self.pair_rate_hz >= 0:
            raise ValidationError("pair rate must be non-negative")
        if self.accidental_hz < 0:
            raise ValidationError("accidental rate must be non-negative")
        if self.output_format not in ("json", "csv", "both"):
            raise ValidationError(f"format must be json, csv or both, got {self.output_format!r}")
        if self.input_state not in ("phi_plus", "werner", "matrix"):
            raise ValidationError(f"input.state must be phi_plus, werner or matrix, got {self.input_state!r}")
        if self.predict_scenario not in ("cooling", "energy", "both", "identity"):
            raise ValidationError(f"unknown prediction scenario {self.predict_scenario!r}")
        if self.fit_method not in ("sequential", "joint"):
            raise ValidationError(f"fit.method must be sequential or joint, got {self.fit_method!r}")

    def replace(self, **changes):
        return replace(self, **changes)

    def require_seed(self):
        if self.seed is None:
            raise ValidationError(f"mode {self.mode!r} is stochastic: pass --seed, set seed in the config or {SEED_ENV}")
        return self.seed

    def to_dict(self):
        """Canonical, JSON-ready form; hashed for provenance."""
        def mem(p):
            return {k: getattr(p, f) for k, f in _MEMORY_KEYS.items()}

        return {
            "mode": self.mode,
            "memory": {"qubit": mem(self.qubit_params), "entangled": mem(self.entangled_params)},
            "tau": {"grid_ps": [float(t) for t in self.tau_grid]},
            "counts": {"pair_rate_hz": self.pair_rate_hz, "integration_s": self.integration_s,
                       "accidental_hz": self.accidental_hz, "noiseless": self.noiseless},
            "seed": self.seed,
            "mc_resamples": self.mc_resamples,
            "input": {"state": self.input_state, "werner_p": self.input_werner_p,
                      "matrix_file": self.input_matrix_file},
            "predict": {"scenario": self.predict_scenario, "temperature_k": self.predict_temperature_k,
                        "energy_nj": self.predict_energy_nj},
            "fit": {"integration_s": self.fit_integration_s, "method": self.fit_method},
        }

    def digest(self):
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()


def _flatten(d, prefix=""):
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def _memory_from(flat, which, base):
    changes = {}
    for suffix, name in _MEMORY_KEYS.items():
        key = f"memory.{which}.{suffix}"
        if key in flat:
            changes[name] = float(flat.pop(key))
    try:
        return base.replace(**changes)
    except DomainError as exc:
        raise ValidationError(f"memory.{which}: {exc}") from None


_SCALARS = {
    "mode": ("mode", str),
    "seed": ("seed", int),
    "mc_resamples": ("mc_resamples", int),
    "counts.pair_rate_hz": ("pair_rate_hz", float),
    "counts.integration_s": ("integration_s", float),
    "counts.accidental_hz": ("accidental_hz", float),
    "counts.noiseless": ("noiseless", bool),
    "input.state": ("input_state", str),
    "input.werner_p": ("input_werner_p", float),
    "input.matrix_file": ("input_matrix_file", str),
    "predict.scenario": ("predict_scenario", str),
    "predict.temperature_k": ("predict_temperature_k", float),
    "predict.energy_nj": ("predict_energy_nj", float),
    "fit.integration_s": ("fit_integration_s", float),
    "fit.method": ("fit_method", str),
    "output.path": ("output_path", str),
    "output.format": ("output_format", str),
}


def config_from_mapping(data, source="mapping"):
    flat = _flatten(data)
    kwargs = {"source": source}
    kwargs["qubit_params"] = _memory_from(flat, "qubit", QUBIT_PARAMS)
    kwargs["entangled_params"] = _memory_from(flat, "entangled", ENTANGLED_PARAMS)
    if "tau.grid_ps" in flat:
        kwargs["tau_grid"] = tuple(float(t) for t in flat.pop("tau.grid_ps"))
    elif any(k in flat for k in ("tau.start_ps", "tau.stop_ps", "tau.step_ps")):
        start = float(flat.pop("tau.start_ps", 0.0))
        stop = float(flat.pop("tau.stop_ps", 8.0))
        step = float(flat.pop("tau.step_ps", 0.5))
        if step <= 0:
            raise ValidationError("tau.step_ps must be positive")
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        kwargs["tau_grid"] = tuple(round(start + k * step, 10) for k in range(n))
    for key, (name, typ) in _SCALARS.items():
        if key in flat:
            v = flat.pop(key)
            if typ is bool and not isinstance(v, bool):
                raise ValidationError(f"{key} must be true or false")
            try:
                kwargs[name] = typ(v)
            except (TypeError, ValueError):
                raise ValidationError(f"{key}: cannot interpret {v!r} as {typ.__name__}") from None
    if flat:
        raise ValidationError(f"unknown config keys: {', '.join(sorted(flat))}")
    return ExperimentConfig(**kwargs)


def load_config(name=None):
    """Load a preset by name, a TOML file by path, or the defaults when ``name`` is None."""
    if name is None:
        cfg = ExperimentConfig()
    elif name in PRESETS:
        text = resources.files("phononmem.presets").joinpath(f"{name}.toml").read_text()
        cfg = config_from_mapping(_parse(text, name), source=name)
    else:
        path = Path(name)
        if not path.is_file():
            raise ValidationError(f"config {name!r} is neither a preset ({', '.join(PRESETS)}) nor a file")
        cfg = config_from_mapping(_parse(path.read_text(), name), source=str(path))
    if cfg.seed is None and os.environ.get(SEED_ENV):
        try:
            cfg = cfg.replace(seed=int(os.environ[SEED_ENV]))
        except ValueError:
            raise ValidationError(f"{SEED_ENV} must be an integer") from None
    return cfg


def _parse(text, where):
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ValidationError(f"{where}: {exc}") from None


def parse_tau_grid(text):
    """``"0:8:0.5"`` (start:stop:step) or a comma separated list."""
    text = text.strip()
    try:
        if ":" in text:
            start, stop, step = (float(x) for x in text.split(":"))
            if step <= 0:
                raise ValidationError("tau grid step must be positive")
            n = int(np.floor((stop - start) / step + 1e-9)) + 1
            return tuple(round(start + k * step, 10) for k in range(n))
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise ValidationError(f"cannot parse tau grid {text!r}") from None
