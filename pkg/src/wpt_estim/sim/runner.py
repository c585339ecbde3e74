"""Monte Carlo drivers: one trial function per experiment kind, aggregation
and CSV/JSON emission.

Every emitted design is checked against the constraints of its problem
using only the model formulas (never solver internals) before it is written.
"""
from __future__ import annotations

import io
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy

from ..baselines import EnergyWeights, suboptimal_p1, suboptimal_p2
from ..errors import InfeasibleError, SolverError
from ..joint import StoppingRule, algorithm1, algorithm2
from ..model import (ChannelRealization, DesignPoint, NetworkConfig, available_transmit_power, blue_mse,
                     transmit_powers, watts_to_dbm)
from ..sdp import BACKEND
from ..special import CommonHarvesterConfig, centralized_mse_bound, common_harvester_mse_min
from .geometry import GeometrySample, draw_channels, sample_geometry, trial_rng
from .spec import ExperimentSpec

log = logging.getLogger(__name__)

#: relative slack allowed when re-validating emitted designs
VALIDATION_RTOL = 1e-6
#: a sensor counts as power-controlled when it leaves this fraction of its budget unused
POWER_CONTROL_RTOL = 1e-4

PREFIX = ["row_type", "sweep", "trial", "status", "n_ok"]

# columns with a *_dbm twin are stored in watts and converted when written
COLUMNS = {
    "mse-vs-iteration": ["iteration", "mse", "mse_bound"],
    "power-vs-iteration": ["iteration", "fc_power_w", "fc_power_dbm"],
    "mse-vs-ns": ["mse_optimal", "mse_suboptimal", "mse_bound"],
    "power-vs-gamma": ["fc_power_optimal_w", "fc_power_suboptimal_w", "fc_power_optimal_dbm",
                       "fc_power_suboptimal_dbm", "saving_db"],
    "tradeoff": ["point", "power_w", "power_dbm", "mse", "mse_bound"],
    "power-control-table": ["sensor", "harvested_w", "transmit_w", "harvested_dbm",
                            "transmit_dbm", "power_controlled"],
    "custom": ["mse", "fc_power_w", "fc_power_dbm", "iterations", "baseline_mse",
               "baseline_fc_power_w"],
}
KEY_COLUMN = {
    "mse-vs-iteration": "iteration",
    "power-vs-iteration": "iteration",
    "tradeoff": "point",
    "power-control-table": "sensor",
}


class DesignCheckError(RuntimeError):
    """An emitted design violates a constraint of its own problem."""


# ------------------------------------------------------------------ validation

def validate_design(cfg: NetworkConfig, ch: ChannelRealization, design, *, fc_budget=None,
                    mse_target=None, reported_mse=None, rtol=VALIDATION_RTOL):
    """Raise :class:`DesignCheckError` unless the design meets its constraints.

    Checks the FC power budget (when given), every sensor's forwarding power
    against what it harvested, the distortion target (when given) and that the
    reported MSE is the model MSE of the design.
    """
    W = np.asarray(design.beam_gram)
    used = float(np.real(np.trace(W)))
    if fc_budget is not None and used > fc_budget * (1 + rtol):
        raise DesignCheckError(f"FC power {used:.6g} exceeds budget {fc_budget:.6g}")
    tx = transmit_powers(cfg, design.amp)
    scale = max(float(np.max(tx)), 1e-300)
    for k in range(cfg.n_s):
        avail = available_transmit_power(cfg, ch, W, k)
        if tx[k] > avail + rtol * max(abs(avail), scale):
            raise DesignCheckError(f"sensor {k} sends {tx[k]:.6g} W but has {avail:.6g} W")
    mse = blue_mse(cfg, ch, design)
    if mse_target is not None and mse > mse_target * (1 + rtol):
        raise DesignCheckError(f"MSE {mse:.6g} misses target {mse_target:.6g}")
    if reported_mse is not None and abs(mse - reported_mse) > rtol * mse:
        raise DesignCheckError(f"reported MSE {reported_mse:.6g} differs from model {mse:.6g}")
    return mse


# ------------------------------------------------------------------ channels

def trial_channels(spec: ExperimentSpec, cfg: NetworkConfig, trial: int) -> ChannelRealization:
    """Channel draw for one trial. Sweep points of a trial reuse its layout."""
    rng = trial_rng(spec.seed, trial)
    geo = _geometry(spec, cfg.n_s, rng)
    return draw_channels(cfg.n_r, geo, rng)


def _geometry(spec, n, rng):
    g = spec.geometry
    geo = sample_geometry(n, rng, g.get("half_width", 10.0), g.get("min_distance", 1.0))
    if not g.get("path_loss", True):
        return np.ones(n)
    return geo


def common_harvester_channels(spec: ExperimentSpec, cfg: NetworkConfig, trial: int):
    """Colocated sensors sharing one harvester: one distance for every link."""
    rng = trial_rng(spec.seed, trial)
    geo = _geometry(spec, 1, rng)
    gain = float(geo.gains[0] if isinstance(geo, GeometrySample) else geo[0])
    amp = np.sqrt(gain)
    cn = lambda *s: (rng.standard_normal(s) + 1j * rng.standard_normal(s)) / np.sqrt(2.0)
    h_e = cn(cfg.n_r) * amp
    H = cn(cfg.n_r, cfg.n_s) * amp
    ch = ChannelRealization(G_down=np.tile(h_e, (cfg.n_s, 1)), H_up=H)
    hc = CommonHarvesterConfig(cfg, h_e, harvest_eff=float(cfg.harvest_eff[0]),
                               circuit_energy=float(np.sum(cfg.circuit_energy)))
    return hc, ch


# ------------------------------------------------------------------ trials

def _stop(spec):
    return StoppingRule(max_iter=int(spec.params.get("max_iter", 50)))


def _weights(spec, cfg):
    w = spec.params.get("energy_weights")
    return EnergyWeights.uniform(cfg.n_s) if w is None else EnergyWeights(w)


def _p1(spec, cfg, ch):
    tr = algorithm1(cfg, ch, stop=_stop(spec), n_starts=int(spec.params.get("n_starts", 1)))
    if tr.design is None:
        raise SolverError(f"MSE minimization failed: {tr.status}")
    validate_design(cfg, ch, tr.design, fc_budget=cfg.P, reported_mse=tr.mse)
    return tr


def _p2(spec, cfg, ch, gamma):
    tr = algorithm2(cfg, ch, gamma, stop=_stop(spec), n_starts=int(spec.params.get("n_starts", 1)))
    if tr.design is None:
        raise SolverError(f"power minimization failed: {tr.status}")
    validate_design(cfg, ch, tr.design, mse_target=1.0 / gamma, reported_mse=tr.mse)
    return tr


def _trial_mse_vs_iteration(spec, value, trial):
    cfg = spec.network_config(value)
    ch = trial_channels(spec, cfg, trial)
    tr = _p1(spec, cfg, ch)
    bound = centralized_mse_bound(cfg)
    return [{"iteration": r.iteration, "mse": r.mse, "mse_bound": bound}
            for r in tr.records if r.accepted]


def _trial_power_vs_iteration(spec, value, trial):
    cfg = spec.network_config(value)
    ch = trial_channels(spec, cfg, trial)
    gamma = 1.0 / float(spec.param("gamma_inv", value))
    tr = _p2(spec, cfg, ch, gamma)
    rows = [{"iteration": r.iteration, "fc_power_w": r.objective} for r in tr.records if r.accepted]
    rows[-1]["fc_power_w"] = tr.fc_power
    return rows


def _trial_mse_vs_ns(spec, value, trial):
    cfg = spec.network_config(value)
    ch = trial_channels(spec, cfg, trial)
    tr = _p1(spec, cfg, ch)
    design, mse_sub = suboptimal_p1(cfg, ch, _weights(spec, cfg))
    validate_design(cfg, ch, design, fc_budget=cfg.P, reported_mse=mse_sub)
    return [{"mse_optimal": tr.mse, "mse_suboptimal": mse_sub,
             "mse_bound": centralized_mse_bound(cfg)}]


def _trial_power_vs_gamma(spec, value, trial):
    cfg = spec.network_config(value)
    ch = trial_channels(spec, cfg, trial)
    gamma = 1.0 / float(spec.param("gamma_inv", value))
    tr = _p2(spec, cfg, ch, gamma)
    design, p_sub = suboptimal_p2(cfg, ch, gamma)
    validate_design(cfg, ch, design, mse_target=1.0 / gamma)
    return [{"fc_power_optimal_w": tr.fc_power, "fc_power_suboptimal_w": p_sub}]


def _trial_tradeoff(spec, value, trial):
    cfg = spec.network_config(value)
    hc, ch = common_harvester_channels(spec, cfg, trial)
    factors = np.asarray(spec.params.get("power_factors", np.logspace(-3, 3, 13)), dtype=float)
    bound = centralized_mse_bound(cfg)
    rows, a = [], None
    for i, P in enumerate(cfg.P * factors):
        res = common_harvester_mse_min(hc, ch, init=a, P=P)
        tx = float(np.sum(transmit_powers(cfg, res.amp)))
        if tx > hc.budget(P) * (1 + VALIDATION_RTOL):
            raise DesignCheckError(f"sensors send {tx:.6g} W but the harvester has {hc.budget(P):.6g} W")
        v = np.asarray(res.filter)
        mse = blue_mse(cfg, ch, DesignPoint(res.amp, np.outer(res.beam, res.beam.conj()), v))
        if abs(mse - res.mse) > VALIDATION_RTOL * mse:
            raise DesignCheckError("reported MSE differs from the model MSE")
        rows.append({"point": i, "power_w": float(P), "mse": res.mse, "mse_bound": bound})
        a = res.amp
    return rows


def _trial_power_control(spec, value, trial):
    cfg = spec.network_config(value)
    ch = trial_channels(spec, cfg, trial)
    tr = _p1(spec, cfg, ch)
    rows = []
    for k in range(cfg.n_s):
        h, t = float(tr.harvested_power[k]), float(tr.transmit_power[k])
        rows.append({"sensor": k + 1, "harvested_w": h, "transmit_w": t,
                     "power_controlled": float(t < h * (1 - POWER_CONTROL_RTOL))})
    return rows


def _trial_custom(spec, value, trial):
    cfg = spec.network_config(value)
    ch = trial_channels(spec, cfg, trial)
    problem = spec.params.get("problem", "mse")
    baseline = bool(spec.params.get("baseline", False))
    row = {}
    if problem == "mse":
        tr = _p1(spec, cfg, ch)
        if baseline:
            d, m = suboptimal_p1(cfg, ch, _weights(spec, cfg))
            validate_design(cfg, ch, d, fc_budget=cfg.P, reported_mse=m)
            row.update(baseline_mse=m, baseline_fc_power_w=cfg.P)
    elif problem == "power":
        gamma = 1.0 / float(spec.param("gamma_inv", value))
        tr = _p2(spec, cfg, ch, gamma)
        if baseline:
            d, p = suboptimal_p2(cfg, ch, gamma)
            validate_design(cfg, ch, d, mse_target=1.0 / gamma)
            row.update(baseline_mse=blue_mse(cfg, ch, d), baseline_fc_power_w=p)
    else:
        raise ValueError(f"custom problem must be 'mse' or 'power', got {problem!r}")
    row.update(mse=tr.mse, fc_power_w=tr.fc_power, iterations=tr.iterations)
    return [row]


TRIALS = {
    "mse-vs-iteration": _trial_mse_vs_iteration,
    "power-vs-iteration": _trial_power_vs_iteration,
    "mse-vs-ns": _trial_mse_vs_ns,
    "power-vs-gamma": _trial_power_vs_gamma,
    "tradeoff": _trial_tradeoff,
    "power-control-table": _trial_power_control,
    "custom": _trial_custom,
}


def _status_of(exc) -> str:
    if isinstance(exc, InfeasibleError):
        return "infeasible"
    if isinstance(exc, SolverError):
        return "solver-failure"
    if isinstance(exc, DesignCheckError):
        return "invalid-design"
    return "error:" + type(exc).__name__


def run_trial(spec: ExperimentSpec, sweep_index: int, trial: int):
    """``(sweep_index, trial, status, rows)`` for one trial; never raises."""
    value = spec.sweep[sweep_index]
    try:
        rows = TRIALS[spec.kind](spec, value, trial)
        return sweep_index, trial, "ok", rows
    except Exception as exc:  # recorded in the status column; the run goes on
        log.warning("%s: sweep=%s trial=%d failed: %s", spec.name, value, trial, exc)
        return sweep_index, trial, _status_of(exc), []


def _run_trial_packed(args):
    spec_dict, i, t = args
    return run_trial(ExperimentSpec(**spec_dict), i, t)


# ------------------------------------------------------------------ aggregation

@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    columns: list
    rows: list  # dicts keyed by column name; watts columns only

    def select(self, row_type=None, sweep=None, status=None):
        out = self.rows
        if row_type is not None:
            out = [r for r in out if r["row_type"] == row_type]
        if sweep is not None:
            out = [r for r in out if r["sweep"] == sweep]
        if status is not None:
            out = [r for r in out if r["status"] == status]
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(self.columns) + "\n")
        for r in self.rows:
            buf.write(",".join(_fmt(_derived(r, c)) for c in self.columns) + "\n")
        return buf.getvalue()

    def meta(self) -> dict:
        from .. import __version__
        return {
            "name": self.spec.name,
            "kind": self.spec.kind,
            "spec": self.spec.to_dict(),
            "resolved_network": {str(v): _cfg_dict(self.spec.network_config(v))
                                 for v in self.spec.sweep},
            "columns": self.columns,
            "version": __version__,
            "kernel_backend": BACKEND,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "rng": "Philox keyed by SeedSequence([seed, trial])",
        }

    def write(self, out_dir) -> tuple:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        csv_path = out / f"{self.spec.name}.csv"
        meta_path = out / f"{self.spec.name}.meta.json"
        csv_path.write_text(self.to_csv())
        meta_path.write_text(json.dumps(self.meta(), indent=2, sort_keys=True) + "\n")
        return csv_path, meta_path


def _cfg_dict(cfg):
    d = {}
    for k, v in vars(cfg).items():
        d[k] = v.tolist() if isinstance(v, np.ndarray) else v
    return d


def _derived(row, col):
    if col in row:
        return row[col]
    if col.endswith("_dbm"):
        w = row.get(col[:-4] + "_w", np.nan)
        return watts_to_dbm(w) if np.isfinite(w) and w > 0 else np.nan
    if col == "saving_db":
        a, b = row.get("fc_power_optimal_w", np.nan), row.get("fc_power_suboptimal_w", np.nan)
        return 10.0 * np.log10(b / a) if a > 0 and b > 0 else np.nan
    return np.nan


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if np.isnan(x):
        return "nan"
    return f"{x:.12g}"


def _aggregate(spec, outcomes):
    kind = spec.kind
    key = KEY_COLUMN.get(kind)
    data_cols = [c for c in COLUMNS[kind] if c != key]
    rows = []
    for i, value in enumerate(spec.sweep):
        group = sorted((o for o in outcomes if o[0] == i), key=lambda o: o[1])
        ok = [o for o in group if o[2] == "ok"]
        for _, t, status, trows in group:
            if status != "ok":
                rows.append({"row_type": "trial", "sweep": value, "trial": t, "status": status,
                             "n_ok": 0})
                continue
            for r in trows:
                rows.append({"row_type": "trial", "sweep": value, "trial": t, "status": status,
                             "n_ok": 1, **r})
        if not ok:
            rows.append({"row_type": "mean", "sweep": value, "trial": None, "status": "no-data",
                         "n_ok": 0})
            continue
        if key is None:
            rows.append(_mean_row(value, [o[3][0] for o in ok], data_cols))
            continue
        if key == "iteration":
            # finished traces hold their final value over later iterations
            first = min(r[key] for o in ok for r in o[3])
            last = max(r[key] for o in ok for r in o[3])
            its = range(first, last + 1)
            padded = []
            for o in ok:
                by_it = {r[key]: r for r in o[3]}
                cur, seq = None, []
                for it in its:
                    cur = by_it.get(it, cur)
                    seq.append(cur)
                padded.append(seq)
            for j, it in enumerate(its):
                pts = [seq[j] for seq in padded if seq[j] is not None]
                m = _mean_row(value, pts, data_cols)
                m[key] = it
                rows.append(m)
            continue
        keys = sorted({r[key] for o in ok for r in o[3]})
        for kv in keys:
            pts = [r for o in ok for r in o[3] if r[key] == kv]
            m = _mean_row(value, pts, data_cols)
            m[key] = kv
            rows.append(m)
    return rows


def _mean_row(value, pts, cols):
    row = {"row_type": "mean", "sweep": value, "trial": None, "status": "mean", "n_ok": len(pts)}
    for c in cols:
        vals = [p[c] for p in pts if c in p]
        if vals:
            row[c] = float(np.mean(vals))
    return row


def run_experiment(spec: ExperimentSpec, out_dir=None, threads: int = 1) -> ExperimentResult:
    """Run every (sweep value, trial) pair and aggregate.

    Trials are independent and each owns its random stream, so the result
    (and the CSV) does not depend on ``threads``.
    """
    tasks = [(i, t) for i in range(len(spec.sweep)) for t in range(spec.trials)]
    if threads > 1:
        packed = [(spec.to_dict(), i, t) for i, t in tasks]
        with ProcessPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(_run_trial_packed, packed, chunksize=max(1, len(packed) // (4 * threads))))
    else:
        outcomes = [run_trial(spec, i, t) for i, t in tasks]
    result = ExperimentResult(spec, PREFIX + COLUMNS[spec.kind], _aggregate(spec, outcomes))
    target = out_dir if out_dir is not None else spec.output
    if target is not None:
        result.write(target)
    return result
