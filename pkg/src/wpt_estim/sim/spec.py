"""Declarative experiment descriptions and the built-in presets."""
from __future__ import annotations

import json
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from ..errors import InvalidArgumentError
from ..model import NetworkConfig, dbm_to_watts

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

KINDS = ("mse-vs-iteration", "mse-vs-ns", "power-vs-iteration", "power-vs-gamma",
         "tradeoff", "power-control-table", "custom")

#: which field each kind sweeps unless ``sweep_field`` says otherwise
DEFAULT_SWEEP_FIELD = {
    "mse-vs-iteration": "n_r",
    "mse-vs-ns": "n_s",
    "power-vs-iteration": "n_r",
    "power-vs-gamma": "gamma_inv",
    "tradeoff": "size",
    "power-control-table": "n_r",
    "custom": "n_r",
}

#: physical defaults: 30 dBm FC, -103.16 dBm receiver noise, 51 % harvesting
TABLE_I = {
    "P": 1.0,
    "source_var": 1.0,
    "sensing_vars": 0.1,
    "fc_noise_vars": float(dbm_to_watts(-103.16)),
    "harvest_eff": 0.51,
    "circuit_energy": 0.0,
}

DEFAULT_TRIALS = 200


@dataclass(frozen=True)
class ExperimentSpec:
    """One Monte Carlo experiment.

    Parameters
    ----------
    name : str
        Stem of the output files.
    kind : str
        One of :data:`KINDS`.
    sweep : tuple
        Values of ``sweep_field`` to run. For ``tradeoff`` these are sizes with
        ``n_s = n_r``.
    network : dict
        Overrides of the physical network defaults (any ``NetworkConfig`` field).
    params : dict
        Kind-specific knobs: ``gamma_inv``, ``power_factors`` (tradeoff grid
        as multiples of ``P``), ``problem`` and ``baseline`` for ``custom``,
        ``energy_weights``, ``max_iter``, ``n_starts``.
    geometry : dict
        ``half_width``, ``min_distance`` and ``path_loss`` (False gives unit gains).
    """

    name: str
    kind: str
    sweep: tuple
    trials: int = DEFAULT_TRIALS
    seed: int = 0
    network: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    geometry: dict = field(default_factory=dict)
    sweep_field: Optional[str] = None
    output: Optional[str] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidArgumentError(f"unknown experiment kind {self.kind!r}; expected one of {KINDS}")
        sweep = tuple(np.asarray(self.sweep).reshape(-1).tolist())
        if not sweep:
            raise InvalidArgumentError("sweep must be nonempty")
        object.__setattr__(self, "sweep", sweep)
        if int(self.trials) < 1:
            raise InvalidArgumentError("trials must be at least 1")
        object.__setattr__(self, "trials", int(self.trials))
        object.__setattr__(self, "seed", int(self.seed))
        known = {f.name for f in fields(NetworkConfig)}
        extra = set(self.network) - known
        if extra:
            raise InvalidArgumentError(f"unknown network fields {sorted(extra)}")
        if self.sweep_field is None:
            object.__setattr__(self, "sweep_field", DEFAULT_SWEEP_FIELD[self.kind])

    def network_config(self, sweep_value) -> NetworkConfig:
        """Resolved network parameters at one sweep point."""
        kw = {**TABLE_I, **self.network}
        if self.sweep_field == "size":
            kw["n_s"] = kw["n_r"] = int(sweep_value)
        elif self.sweep_field in ("n_s", "n_r"):
            kw[self.sweep_field] = int(sweep_value)
        elif self.sweep_field in kw or self.sweep_field in {f.name for f in fields(NetworkConfig)}:
            kw[self.sweep_field] = sweep_value
        return NetworkConfig(**kw)

    def param(self, key, sweep_value=None, default=None):
        if self.sweep_field == key:
            return sweep_value
        return self.params.get(key, default)

    def with_(self, **changes) -> "ExperimentSpec":
        d = asdict(self)
        d.update(changes)
        return ExperimentSpec(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sweep"] = list(self.sweep)
        return d


def _preset_table():
    return {
        "fig1": ExperimentSpec("fig1", "mse-vs-iteration", (5, 10, 15, 20),
                               network={"n_s": 5, "sensing_vars": 0.1}),
        # same experiment with the sensing-noise level quoted in the body text
        "fig1_text": ExperimentSpec("fig1_text", "mse-vs-iteration", (5, 10, 15, 20),
                                    network={"n_s": 5, "sensing_vars": 0.01}),
        "fig2": ExperimentSpec("fig2", "mse-vs-ns", (2, 4, 6, 8, 10),
                               network={"n_r": 5, "sensing_vars": 0.1}),
        "fig4": ExperimentSpec("fig4", "power-vs-iteration", (5, 10, 15, 20),
                               network={"n_s": 10, "sensing_vars": 0.1},
                               params={"gamma_inv": 0.015}),
        "fig5": ExperimentSpec("fig5", "power-vs-gamma", (0.015, 0.02, 0.03, 0.04, 0.05),
                               network={"n_s": 10, "n_r": 5, "sensing_vars": 0.1}),
        "fig6": ExperimentSpec("fig6", "tradeoff", (4, 8),
                               network={"sensing_vars": 0.01},
                               params={"power_factors": np.logspace(-3, 3, 13).tolist()}),
        "table2": ExperimentSpec("table2", "power-control-table", (2,),
                                 network={"n_s": 7, "sensing_vars": 0.1}, trials=20),
    }


PRESETS = _preset_table()


def preset(name: str, **changes) -> ExperimentSpec:
    try:
        spec = PRESETS[name]
    except KeyError:
        raise InvalidArgumentError(f"unknown preset {name!r}; available: {sorted(PRESETS)}") from None
    return spec.with_(**changes) if changes else spec


def load_spec(path) -> ExperimentSpec:
    """Read a spec from TOML or JSON. A ``preset`` key starts from a built-in."""
    path = Path(path)
    text = path.read_bytes()
    if path.suffix.lower() == ".toml":
        data = tomllib.loads(text.decode())
    elif path.suffix.lower() == ".json":
        data = json.loads(text)
    else:
        raise InvalidArgumentError(f"spec file must be .toml or .json, got {path.suffix!r}")
    base = data.pop("preset", None)
    if base is not None:
        d = preset(base).to_dict()
        for key in ("network", "params", "geometry"):
            d[key] = {**d[key], **data.pop(key, {})}
        d.update(data)
        data = d
    data.setdefault("name", path.stem)
    try:
        return ExperimentSpec(**data)
    except TypeError as exc:
        raise InvalidArgumentError(f"bad spec file {path}: {exc}") from None
