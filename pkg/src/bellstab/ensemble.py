"""Monte Carlo campaigns: many independent trajectories, aggregated means,
convergence frequencies, exponent fits, and file outputs.

Trajectories are integrated concurrently (the compiled stepper releases
the GIL); results land in an index-ordered buffer and every aggregate is
computed in a deterministic post-pass, so a campaign's output depends only
on its configuration and master seed, never on scheduling.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .control import Controller
from .metrics import (ExponentFit, NonPositiveValueError, ScalarSeries,
                      bures_to_pure, classify_limit, fit_sample_exponent)
from .model import (BELL_LABELS, ModelParams, OperatorSet, bell, operators,
                    validate_density)
from .sde import IntegrationError, SdeConfig, integrate_trajectory

__all__ = [
    "CampaignConfig",
    "EnsembleSummary",
    "CampaignError",
    "run_campaign",
    "reference_curve",
    "write_outputs",
]

FAILURE_BUDGET = 0.01
SLOPE_FLOOR = 1e-15
CSV_FMT = "%.12g"


class CampaignError(RuntimeError):
    """More than the tolerated fraction of trajectories failed."""


@dataclass(eq=False)
class CampaignConfig:
    model: ModelParams
    controller: Controller
    sde: SdeConfig
    n_traj: int = 10
    rho0: np.ndarray = field(default=None, repr=False)
    rho0_name: str = "maximally_mixed"
    out_dir: Path | None = None
    log_stride: int = 10
    workers: int = 0
    classify_tol: float = 0.05
    fit_window: tuple[float, float] | None = None
    keep_trajectories: bool = False
    per_trajectory_csv: bool = False
    name: str = "campaign"

    def __post_init__(self):
        if self.n_traj < 1:
            raise ValueError(f"n_traj must be >= 1, got {self.n_traj}")
        if self.log_stride < 1:
            raise ValueError(f"log_stride must be >= 1, got {self.log_stride}")
        if self.classify_tol <= 0.0:
            raise ValueError(f"classify_tol must be positive, got {self.classify_tol}")
        if self.workers < 0:
            raise ValueError(f"workers must be >= 0, got {self.workers}")
        if self.rho0 is None:
            raise ValueError("rho0 is required")
        self.rho0 = validate_density(self.rho0)
        if self.fit_window is not None:
            lo, hi = self.fit_window
            if not 0.0 <= lo < hi <= self.sde.t_final:
                raise ValueError(f"fit_window {self.fit_window} outside [0, t_final]")
        if self.controller.target != self.model.target:
            raise ValueError(
                f"controller target {self.controller.target!r} != model target "
                f"{self.model.target!r}")

    @property
    def effective_fit_window(self) -> tuple[float, float]:
        if self.fit_window is not None:
            return self.fit_window
        return (0.2 * self.sde.t_final, 0.8 * self.sde.t_final)

    @property
    def is_reduction_run(self) -> bool:
        """Zero-control campaigns measure distance to the whole Bell set."""
        return self.controller.kind == "zero"


@dataclass
class EnsembleSummary:
    config: CampaignConfig
    times: np.ndarray
    mean_bures: np.ndarray
    mean_lyapunov: np.ndarray
    reference: np.ndarray
    frequencies: dict[str, float]
    n_unconverged: int
    n_failed: int
    exponent: ExponentFit | None
    reference_exponent: float
    trajectory_slopes: np.ndarray
    clipped_mass_per_step: float
    runtime_seconds: float
    labels: list[str | None] = field(repr=False, default_factory=list)
    trajectories: list[dict[str, np.ndarray]] | None = field(repr=False, default=None)

    @property
    def mean_bures_series(self) -> ScalarSeries:
        return ScalarSeries(self.times, self.mean_bures)

    @property
    def mean_lyapunov_series(self) -> ScalarSeries:
        return ScalarSeries(self.times, self.mean_lyapunov)


def reference_curve(rho0, params: ModelParams, kind: str, times,
                    target: str | None = None) -> ScalarSeries:
    """Exponential envelope with rate -min_k eta_k M_k.

    kind 'qsr': 4 sqrt(3) d_B(rho0, Bell set) exp(-C t);
    kind 'feedback': sqrt(2) d_B(rho0, target) exp(-C t).
    """
    from .metrics import bures_to_bell_set

    times = np.asarray(times, dtype=float)
    rate = params.contraction_rate
    if kind == "qsr":
        amp = 4.0 * np.sqrt(3.0) * bures_to_bell_set(rho0)
    elif kind == "feedback":
        tgt = bell(params.target if target is None else target)
        amp = np.sqrt(2.0) * bures_to_pure(rho0, tgt.vector)
    else:
        raise ValueError(f"unknown reference kind {kind!r}")
    return ScalarSeries(times, amp * np.exp(-rate * times))


def _bell_fidelities(states: np.ndarray) -> np.ndarray:
    # (n_log, 4) fidelities of each logged state to the four Bell vectors
    vecs = np.stack([bell(name).vector for name in BELL_LABELS])
    return np.einsum("bi,tij,bj->tb", vecs.conj(), states, vecs).real


def _trajectory_scalars(record, cfg: CampaignConfig) -> dict[str, np.ndarray]:
    states = record.states
    fids = np.clip(_bell_fidelities(states), 0.0, 1.0)
    target_idx = BELL_LABELS.index(cfg.model.target)
    x = fids[:, target_idx]
    if cfg.is_reduction_run:
        d = np.sqrt(np.maximum(2.0 - 2.0 * np.sqrt(fids.max(axis=1)), 0.0))
        lam1 = (states[:, 0, 0] + states[:, 3, 3]).real
        lam2 = (states[:, 1, 1] + states[:, 2, 2]).real
        gam = 2.0 * states[:, 1, 2].real + 2.0 * states[:, 0, 3].real
        v = np.sqrt(np.maximum(lam1 * lam2 + 1.0 - gam * gam, 0.0))
    else:
        d = np.sqrt(np.maximum(2.0 - 2.0 * np.sqrt(x), 0.0))
        v = np.sqrt(np.maximum(1.0 - x, 0.0))
    return {"bures": d, "lyapunov": v, "fidelity": x, "controls": record.controls}


def _fit_slope(times: np.ndarray, values: np.ndarray,
               window: tuple[float, float]) -> float:
    mask = (times >= window[0]) & (times <= window[1])
    if int(mask.sum()) < 2:
        return np.nan
    return float(np.polyfit(times[mask],
                            np.log(np.maximum(values[mask], SLOPE_FLOOR)), 1)[0])


def run_campaign(cfg: CampaignConfig) -> EnsembleSummary:
    """Run cfg.n_traj independent trajectories and aggregate them.

    Raises CampaignError when more than 1% of trajectories fail to
    integrate; individual failures below that budget are only counted.
    """
    t_start = time.perf_counter()
    ops = operators(cfg.model)
    n_traj = cfg.n_traj
    results: list[dict | None] = [None] * n_traj
    errors: list[IntegrationError | None] = [None] * n_traj

    def _one(idx: int):
        try:
            rec = integrate_trajectory(cfg.rho0, cfg.controller, ops, cfg.model,
                                       cfg.sde, traj_index=idx,
                                       log_stride=cfg.log_stride)
        except IntegrationError as exc:
            errors[idx] = exc
            return
        scal = _trajectory_scalars(rec, cfg)
        scal["clipped_total"] = rec.clipped_total
        scal["final_state"] = rec.states[-1].copy()
        scal["times"] = rec.times
        results[idx] = scal

    workers = cfg.workers if cfg.workers > 0 else min(8, os.cpu_count() or 1)
    if workers == 1 or n_traj == 1:
        for i in range(n_traj):
            _one(i)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(_one, range(n_traj)))

    n_failed = sum(e is not None for e in errors)
    if n_failed > FAILURE_BUDGET * n_traj:
        first = next(e for e in errors if e is not None)
        raise CampaignError(
            f"{n_failed}/{n_traj} trajectories failed; first failure: {first}")

    ok_idx = [i for i in range(n_traj) if results[i] is not None]
    times = results[ok_idx[0]]["times"]
    bures_mat = np.stack([results[i]["bures"] for i in ok_idx])
    lyap_mat = np.stack([results[i]["lyapunov"] for i in ok_idx])
    mean_bures = bures_mat.mean(axis=0)
    mean_lyap = lyap_mat.mean(axis=0)

    kind = "qsr" if cfg.is_reduction_run else "feedback"
    ref = reference_curve(cfg.rho0, cfg.model, kind, times)

    window = cfg.effective_fit_window
    slopes = np.full(n_traj, np.nan)
    for i in ok_idx:
        slopes[i] = _fit_slope(times, results[i]["bures"], window)
    try:
        exponent = fit_sample_exponent(ScalarSeries(times, mean_lyap), window)
    except (NonPositiveValueError, ValueError):
        exponent = None

    counts = dict.fromkeys(BELL_LABELS, 0)
    labels: list[str | None] = [None] * n_traj
    for i in ok_idx:
        label = classify_limit(results[i]["final_state"], cfg.classify_tol)
        labels[i] = label
        if label is not None:
            counts[label] += 1
    n_unconverged = len(ok_idx) - sum(counts.values())
    frequencies = {k: v / n_traj for k, v in counts.items()}

    clipped_per_step = float(
        np.mean([results[i]["clipped_total"] for i in ok_idx]) / cfg.sde.n_steps)

    trajectories = None
    if cfg.keep_trajectories or cfg.per_trajectory_csv:
        trajectories = [
            {"times": results[i]["times"], "bures": results[i]["bures"],
             "lyapunov": results[i]["lyapunov"], "fidelity": results[i]["fidelity"],
             "controls": results[i]["controls"]}
            for i in ok_idx
        ]

    return EnsembleSummary(
        config=cfg, times=times, mean_bures=mean_bures, mean_lyapunov=mean_lyap,
        reference=ref.values, frequencies=frequencies,
        n_unconverged=n_unconverged, n_failed=n_failed, exponent=exponent,
        reference_exponent=-cfg.model.contraction_rate,
        trajectory_slopes=slopes, clipped_mass_per_step=clipped_per_step,
        runtime_seconds=time.perf_counter() - t_start, labels=labels,
        trajectories=trajectories)


def _config_echo(cfg: CampaignConfig) -> dict:
    mp, ctl, sde = cfg.model, cfg.controller, cfg.sde
    echo = {
        "name": cfg.name,
        "model": {"channels": mp.n_channels, "eta1": mp.eta1, "M1": mp.M1,
                  "omega": mp.omega, "target": mp.target},
        "controller": {"kind": ctl.kind},
        "sde": {"dt": sde.dt, "t_final": sde.t_final, "scheme": sde.scheme,
                "projection_tol": sde.projection_tol, "seed": sde.rng_master_seed},
        "campaign": {"n_traj": cfg.n_traj, "rho0": cfg.rho0_name,
                     "log_stride": cfg.log_stride, "classify_tol": cfg.classify_tol,
                     "fit_window": list(cfg.effective_fit_window)},
    }
    if mp.n_channels == 2:
        echo["model"]["eta2"] = mp.eta2
        echo["model"]["M2"] = mp.M2
    if ctl.kind == "two_channel":
        echo["controller"].update(alpha=ctl.alpha, beta=ctl.beta, gamma=ctl.gamma)
    elif ctl.kind == "one_channel":
        echo["controller"].update(gamma1=ctl.gamma1, gamma2=ctl.gamma2,
                                  epsilon=ctl.epsilon)
    return echo


def summary_dict(summary: EnsembleSummary) -> dict:
    exp = summary.exponent
    return {
        "config": _config_echo(summary.config),
        "frequencies": summary.frequencies,
        "n_unconverged": summary.n_unconverged,
        "n_failed": summary.n_failed,
        "exponent_fit": None if exp is None else {
            "slope": exp.slope, "intercept": exp.intercept,
            "window": list(exp.window), "r_squared": exp.r_squared},
        "reference_exponent": summary.reference_exponent,
        "clipped_mass_per_step": summary.clipped_mass_per_step,
        "runtime_seconds": round(summary.runtime_seconds, 3),
    }


def write_outputs(summary: EnsembleSummary, out_dir: Path | str) -> dict[str, Path]:
    """Write summary.json and series.csv (plus per-trajectory CSVs when the
    campaign kept them). Returns the paths written."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths: dict[str, Path] = {}

    summary_path = out_dir / "summary.json"
    payload = dict(summary_dict(summary))
    payload["runtime_seconds"] = None  # keep byte-identical across reruns
    summary_path.write_text(json.dumps(payload, indent=2) + "\n")
    paths["summary"] = summary_path

    series_path = out_dir / "series.csv"
    header = "t,mean_bures,mean_lyapunov,reference"
    table = np.column_stack([summary.times, summary.mean_bures,
                             summary.mean_lyapunov, summary.reference])
    np.savetxt(series_path, table, delimiter=",", header=header, comments="",
               fmt=CSV_FMT)
    paths["series"] = series_path

    if summary.config.per_trajectory_csv and summary.trajectories:
        traj_dir = out_dir / "trajectories"
        traj_dir.mkdir(exist_ok=True)
        n_u = summary.trajectories[0]["controls"].shape[1]
        u_cols = ",".join(f"u{j + 1}" for j in range(n_u))
        for i, traj in enumerate(summary.trajectories):
            cols = [traj["times"], traj["bures"], traj["lyapunov"],
                    traj["fidelity"]]
            cols.extend(traj["controls"].T)
            np.savetxt(traj_dir / f"traj_{i:05d}.csv", np.column_stack(cols),
                       delimiter=",", header=f"t,bures,lyapunov,fidelity,{u_cols}",
                       comments="", fmt=CSV_FMT)
        paths["trajectories"] = traj_dir
    return paths
