"""Run configuration: TOML parsing, schema validation with explicit
defaults, and a content hash embedded into every artifact."""

import copy
import hashlib
import json

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib


class ConfigError(ValueError):
    """Schema violation: unknown key, wrong type, or bad value."""


#: full schema with defaults; a None default marks an optional value
DEFAULTS = {
    "lattice": {
        "basis": [[6.283185307179586, 0.0, 0.0],
                  [0.0, 6.283185307179586, 0.0],
                  [0.0, 0.0, 6.283185307179586]],
    },
    "coefficients": {
        "family": "layered_isotropic",
        "parameters": {},  # free-form, forwarded to the family builder
        "cell_shape": [64, 4, 4],
    },
    "solver": {
        "cell_tol": 1e-10,
        "cell_maxiter": 5000,
        "eig_tol": 1e-9,
        "cg_tol": 1e-12,
    },
    "germ": {
        "directions": 2000,
        "f_tol_rel": 1e-10,
        "gap_tol_rel": 1e-6,
    },
    "bloch": {
        "cutoff": [8, 2, 2],
        "branches": 3,
        "t_count": 6,
        "theta": [0.0, 0.0, 1.0],
        "seed": 0,
    },
    "sweep": {
        "n_list": [2, 4, 8, 16],
        "tau": 1.0,
        "seed": 0,
        "phi_zero": True,
        "data_max_index": 2,
        "transverse": 8,
        "smoothed": False,
        "energy_guard": 1e-3,
        "dt": None,  # None = CFL-derived step
    },
    "propagate": {
        "n": 4,
        "tau": 1.0,
        "seed": 0,
        "data_max_index": 2,
        "transverse": 8,
    },
    "output": {
        "directory": ".",
        "json": None,
        "csv": None,
        "fields": None,  # basename for binary field dumps
    },
}

_FREE_FORM = {("coefficients", "parameters")}


def _merge(defaults, overrides, path=()):
    out = copy.deepcopy(defaults)
    for key, value in overrides.items():
        if key not in defaults:
            raise ConfigError(f"unknown key {'.'.join(path + (key,))!r}")
        if isinstance(defaults[key], dict) and path + (key,) not in _FREE_FORM:
            if not isinstance(value, dict):
                raise ConfigError(f"{'.'.join(path + (key,))!r} must be a table")
            out[key] = _merge(defaults[key], value, path + (key,))
        else:
            out[key] = copy.deepcopy(value)
    return out


def _validate(cfg):
    basis = cfg["lattice"]["basis"]
    if len(basis) != 3 or any(len(row) != 3 for row in basis):
        raise ConfigError("lattice.basis must be a 3x3 array of rows")
    from .coefficients import FAMILIES

    family = cfg["coefficients"]["family"]
    if family not in FAMILIES:
        raise ConfigError(
            f"unknown coefficient family {family!r}; choose from {sorted(FAMILIES)}"
        )
    shape = cfg["coefficients"]["cell_shape"]
    if len(shape) != 3 or any(int(s) < 2 for s in shape):
        raise ConfigError("coefficients.cell_shape must be three sizes >= 2")
    for n in cfg["sweep"]["n_list"]:
        if int(n) < 1:
            raise ConfigError("sweep.n_list entries must be positive integers")
    if len(cfg["bloch"]["cutoff"]) != 3:
        raise ConfigError("bloch.cutoff must have three entries")
    if len(cfg["bloch"]["theta"]) != 3:
        raise ConfigError("bloch.theta must have three entries")


class RunConfig:
    """Validated configuration with every default made explicit."""

    def __init__(self, data=None):
        self.data = _merge(DEFAULTS, data or {})
        _validate(self.data)

    @classmethod
    def from_file(cls, path):
        with open(path, "rb") as handle:
            try:
                raw = tomllib.load(handle)
            except tomllib.TOMLDecodeError as exc:
                raise ConfigError(f"cannot parse {path}: {exc}") from exc
        return cls(raw)

    def __getitem__(self, key):
        return self.data[key]

    def canonical_json(self):
        return json.dumps(self.data, sort_keys=True, separators=(",", ":"))

    def hash(self):
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()[:16]

    def to_toml(self):
        """Render the fully-resolved configuration as TOML text."""
        lines = []

        def fmt(value):
            if isinstance(value, bool):
                return "true" if value else "false"
            if isinstance(value, str):
                return json.dumps(value)
            if isinstance(value, (list, tuple)):
                return "[" + ", ".join(fmt(v) for v in value) + "]"
            return repr(value)

        for section, table in self.data.items():
            lines.append(f"[{section}]")
            subtables = []
            for key, value in table.items():
                if value is None:
                    continue
                if isinstance(value, dict):
                    if value:
                        subtables.append((key, value))
                    continue
                lines.append(f"{key} = {fmt(value)}")
            for key, value in subtables:
                lines.append(f"[{section}.{key}]")
                for k2, v2 in value.items():
                    lines.append(f"{k2} = {fmt(v2)}")
            lines.append("")
        return "\n".join(lines)
