"""Experiment configuration: JSON schema, loading and derived objects."""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

import jsonschema
import numpy as np

from .dynamics import ForcingSpec, two_mode_forcing, peaks_initial_condition
from .exceptions import ValidationError
from .observation import tensor_observed_modes, selection_observation
from .operators import diffusion_operator
from .spectral import build_mode_grid, laplacian_spectrum, random_vorticity

__all__ = ["ExperimentConfig", "load_config", "CONFIG_SCHEMA"]

_length = {"oneOf": [{"type": "number", "exclusiveMinimum": 0}, {"type": "string", "pattern": r"^[0-9.]*\*?pi$"}]}

CONFIG_SCHEMA = {
    "type": "object",
    "required": [
        "grid",
        "viscosity_nu",
        "time_step_dt",
        "final_time_T",
        "initial_condition",
        "forcing",
        "observation",
        "noise",
        "filter",
    ],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "grid": {
            "type": "object",
            "required": ["N1", "N2", "Lx_length", "Ly_length"],
            "additionalProperties": False,
            "properties": {
                "N1": {"type": "integer", "minimum": 2, "multipleOf": 2},
                "N2": {"type": "integer", "minimum": 2, "multipleOf": 2},
                "Lx_length": _length,
                "Ly_length": _length,
            },
        },
        "viscosity_nu": {"type": "number", "exclusiveMinimum": 0},
        "time_step_dt": {"type": "number", "exclusiveMinimum": 0},
        "final_time_T": {"type": "number", "minimum": 0},
        "initial_condition": {
            "type": "object",
            "required": ["kind"],
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["peaks", "random", "zero"]},
                "resolution": {"type": "integer", "minimum": 3},
                "seed": {"type": "integer", "minimum": 0},
                "scale": {"type": "number", "minimum": 0},
                "decay": {"type": "number", "minimum": 0},
            },
        },
        "forcing": {
            "type": "object",
            "required": ["kind"],
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["two_mode", "none"]},
                "d_wavenumber": {"type": "integer"},
            },
        },
        "observation": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "tensor_wavenumbers": {"type": "array", "items": {"type": "integer"}, "minItems": 1},
                "modes": {
                    "type": "array",
                    "items": {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2},
                    "minItems": 1,
                },
                "all": {"type": "boolean"},
            },
        },
        "noise": {
            "type": "object",
            "required": ["amplitude", "seed"],
            "additionalProperties": False,
            "properties": {
                "amplitude": {"type": "number", "minimum": 0},
                "seed": {"type": "integer", "minimum": 0},
                "interval": {"enum": ["symmetric", "literal"]},
            },
        },
        "filter": {
            "type": "object",
            "required": ["Q_rule", "q_rule"],
            "additionalProperties": False,
            "properties": {
                "assimilate": {"type": "boolean"},
                "Q_rule": {"enum": ["two_over_norm_f", "two_over_norm_f_all_components", "scalar"]},
                "Q_value": {"type": "number", "exclusiveMinimum": 0},
                "q_rule": {"enum": ["multiple_of_max_Q", "absolute"]},
                "q_value": {"type": "number", "exclusiveMinimum": 0},
                "S_scalar": {"type": "number", "exclusiveMinimum": 0},
                "R_scalar": {"type": "number", "exclusiveMinimum": 0},
                "gain_method": {"enum": ["structured", "iterative", "dense"]},
                "gain_refresh": {"type": "integer", "minimum": 1},
                "diagnostics_every": {"type": "integer", "minimum": 0},
                "q_slack": {"type": "number", "minimum": 0},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "snapshot_times": {"type": "array", "items": {"type": "number", "minimum": 0}},
                "snapshot_resolution": {"type": "integer", "minimum": 3},
            },
        },
    },
}

# sections that determine each stage's output
_STAGE_KEYS = {
    "simulate": ["grid", "viscosity_nu", "time_step_dt", "final_time_T", "initial_condition", "forcing"],
    "observe": ["observation", "noise"],
    "assimilate": ["filter"],
}


def _parse_length(v):
    if isinstance(v, str):
        factor = v.replace("pi", "").rstrip("*")
        return (float(factor) if factor else 1.0) * math.pi
    return float(v)


def _hash(obj):
    return hashlib.sha256(json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()).hexdigest()[:16]


@dataclass(frozen=True)
class ExperimentConfig:
    data: dict

    @classmethod
    def from_dict(cls, data):
        try:
            jsonschema.validate(data, CONFIG_SCHEMA)
        except jsonschema.ValidationError as exc:
            loc = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ValidationError(f"config error at {loc}: {exc.message}") from None
        cfg = cls(copy.deepcopy(data))
        cfg._check_semantics()
        return cfg

    def _check_semantics(self):
        f = self.data["filter"]
        if f["Q_rule"] == "scalar" and "Q_value" not in f:
            raise ValidationError("filter.Q_value is required when Q_rule is 'scalar'")
        if "q_value" not in f:
            raise ValidationError("filter.q_value is required (factor or absolute value)")
        if f["Q_rule"].startswith("two_over_norm_f") and self.data["forcing"]["kind"] == "none":
            raise ValidationError(f"Q_rule '{f['Q_rule']}' needs a forcing")
        if self.data["forcing"]["kind"] == "two_mode" and "d_wavenumber" not in self.data["forcing"]:
            raise ValidationError("forcing.d_wavenumber is required for two_mode forcing")
        obs = self.data["observation"]
        if sum(k in obs for k in ("tensor_wavenumbers", "modes", "all")) != 1:
            raise ValidationError("observation needs exactly one of tensor_wavenumbers, modes, all")
        from .dynamics import n_steps

        n_steps(self.dt, self.T)
        self.grid  # noqa: B018 -- validates dimensions

    def with_overrides(self, **dotted):
        data = copy.deepcopy(self.data)
        for key, value in dotted.items():
            node = data
            parts = key.split(".")
            for p in parts[:-1]:
                node = node.setdefault(p, {})
            node[parts[-1]] = value
        return ExperimentConfig.from_dict(data)

    @property
    def hash(self):
        return _hash({k: v for k, v in self.data.items() if k != "output"})

    def stage_hash(self, stage):
        keys = []
        for s in ("simulate", "observe", "assimilate"):
            keys += _STAGE_KEYS[s]
            if s == stage:
                break
        return _hash({k: self.data[k] for k in keys})

    @property
    def grid(self):
        g = self.data["grid"]
        return build_mode_grid(g["N1"], g["N2"], _parse_length(g["Lx_length"]), _parse_length(g["Ly_length"]))

    @property
    def nu(self):
        return float(self.data["viscosity_nu"])

    @property
    def dt(self):
        return float(self.data["time_step_dt"])

    @property
    def T(self):
        return float(self.data["final_time_T"])

    @property
    def snapshot_times(self):
        return list(self.data.get("output", {}).get("snapshot_times", [0.0]))

    @property
    def snapshot_resolution(self):
        g = self.grid
        return int(self.data.get("output", {}).get("snapshot_resolution", max(2 * g.N1, 2 * g.N2, 64)))

    def initial_condition(self, grid):
        ic = self.data["initial_condition"]
        if ic["kind"] == "peaks":
            return peaks_initial_condition(grid, ic.get("resolution", 256))
        if ic["kind"] == "random":
            return random_vorticity(grid, ic.get("seed", 0), decay=ic.get("decay", 2.0), scale=ic.get("scale", 1.0))
        return grid.zeros()

    def forcing(self, grid) -> ForcingSpec:
        fc = self.data["forcing"]
        if fc["kind"] == "none":
            return ForcingSpec.zero(grid)
        return two_mode_forcing(grid, fc["d_wavenumber"])

    def diffusion(self, grid):
        return diffusion_operator(laplacian_spectrum(grid), self.nu)

    def observation_model(self, grid):
        obs = self.data["observation"]
        if "tensor_wavenumbers" in obs:
            modes = tensor_observed_modes(obs["tensor_wavenumbers"])
        elif "modes" in obs:
            modes = [tuple(m) for m in obs["modes"]]
        else:
            c, d = grid.wavenumbers
            modes = list(zip(c.tolist(), d.tolist()))
        R = self.data["filter"].get("R_scalar", 1.0)
        model = selection_observation(grid, modes, R=R * np.eye(len(modes)))
        if self.data["noise"]["amplitude"] == 0:
            model = model.with_noise_matrix(np.zeros((model.M, model.M)))
        return model

    @property
    def noise_amplitude(self):
        return float(self.data["noise"]["amplitude"])

    @property
    def seed(self):
        return int(self.data["noise"]["seed"])

    @property
    def literal_interval(self):
        return self.data["noise"].get("interval", "symmetric") == "literal"

    def bounds(self, grid):
        """``(Q, q)`` from the configured rules.

        ``two_over_norm_f`` uses the coefficient vector of the applied forcing
        ``D f`` (two entries of size d/2 for the two-mode forcing);
        ``two_over_norm_f_all_components`` uses the constant vector ``f`` over
        all N components.
        """
        f = self.data["filter"]
        if f["Q_rule"] == "scalar":
            Q = float(f["Q_value"])
        elif f["Q_rule"] == "two_over_norm_f":
            Q = 2.0 / float(np.linalg.norm(self.forcing(grid).Df(0.0)))
        else:
            Q = 2.0 / float(np.linalg.norm(self.forcing(grid).f_at(0.0)))
        if f["q_rule"] == "multiple_of_max_Q":
            q = float(f["q_value"]) * Q
        else:
            q = float(f["q_value"])
        return Q, q

    @property
    def filter_options(self):
        f = self.data["filter"]
        return {
            "gain_method": f.get("gain_method", "structured"),
            "gain_refresh": f.get("gain_refresh", 1),
            "diagnostics_every": f.get("diagnostics_every", 1),
            "q_slack": f.get("q_slack", 1e-6),
        }

    @property
    def assimilate(self):
        return self.data["filter"].get("assimilate", True)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"config file {path} does not exist")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path} is not valid JSON: {exc}") from None
    return ExperimentConfig.from_dict(data)
