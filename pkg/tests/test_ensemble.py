import dataclasses
import json

import numpy as np
import pytest

from bellstab.config import preset_config
from bellstab.control import Controller
from bellstab.ensemble import (CampaignConfig, CampaignError, reference_curve,
                               run_campaign, write_outputs)
from bellstab.model import ModelParams, bell, maximally_mixed
from bellstab.sde import SdeConfig


def tiny_campaign(n_traj=4, seed=3, t_final=0.5, **kw):
    model = ModelParams(target="psi_plus")
    defaults = dict(
        model=model,
        controller=Controller.zero(),
        sde=SdeConfig(dt=1e-3, t_final=t_final, rng_master_seed=seed),
        n_traj=n_traj,
        rho0=np.diag([0.2, 0.3, 0.1, 0.4]).astype(complex),
        rho0_name="fig1_diagonal",
        log_stride=10,
        name="tiny",
    )
    defaults.update(kw)
    return CampaignConfig(**defaults)


class TestReferenceCurve:
    def test_qsr_amplitude_at_zero(self):
        rho0 = np.diag([0.2, 0.3, 0.1, 0.4]).astype(complex)
        params = ModelParams()
        ref = reference_curve(rho0, params, "qsr", np.array([0.0, 1.0]))
        from bellstab.metrics import bures_to_bell_set

        assert ref.values[0] == pytest.approx(4 * np.sqrt(3) * bures_to_bell_set(rho0))

    def test_rate_is_min_product(self):
        params = ModelParams(eta1=0.3, M1=1.0, eta2=0.4, M2=0.9)
        t = np.array([0.0, 1.0])
        ref = reference_curve(maximally_mixed(), params, "qsr", t)
        assert ref.values[1] / ref.values[0] == pytest.approx(np.exp(-0.3))

    def test_halving_time(self):
        params = ModelParams()
        half = np.log(2) / 0.3
        t = np.array([0.0, half])
        ref = reference_curve(maximally_mixed(), params, "qsr", t)
        assert ref.values[1] == pytest.approx(0.5 * ref.values[0])

    def test_feedback_amplitude(self):
        params = ModelParams(target="psi_plus")
        rho0 = bell("phi_minus").projector
        ref = reference_curve(rho0, params, "feedback", np.array([0.0]))
        assert ref.values[0] == pytest.approx(np.sqrt(2) * np.sqrt(2))  # d_B = sqrt(2)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            reference_curve(maximally_mixed(), ModelParams(), "other", [0.0])


class TestRunCampaign:
    def test_deterministic_rerun(self):
        a = run_campaign(tiny_campaign())
        b = run_campaign(tiny_campaign())
        assert np.array_equal(a.mean_bures, b.mean_bures)
        assert np.array_equal(a.mean_lyapunov, b.mean_lyapunov)
        assert a.frequencies == b.frequencies

    def test_worker_count_does_not_change_results(self):
        a = run_campaign(tiny_campaign(n_traj=6, workers=1))
        b = run_campaign(tiny_campaign(n_traj=6, workers=3))
        assert np.array_equal(a.mean_bures, b.mean_bures)
        assert np.array_equal(a.trajectory_slopes, b.trajectory_slopes)

    def test_aggregation_is_arithmetic_mean(self):
        cfg = tiny_campaign(n_traj=10, keep_trajectories=True)
        summary = run_campaign(cfg)
        recomputed = np.mean([t["bures"] for t in summary.trajectories], axis=0)
        assert np.array_equal(summary.mean_bures, recomputed)

    def test_frequencies_are_counts(self):
        cfg = tiny_campaign(n_traj=7, t_final=1.0)
        summary = run_campaign(cfg)
        for freq in summary.frequencies.values():
            assert (freq * cfg.n_traj) == pytest.approx(round(freq * cfg.n_traj))
        assert sum(summary.frequencies.values()) <= 1.0 + 1e-12

    def test_equilibrium_start_classifies_immediately(self):
        cfg = tiny_campaign(n_traj=3, rho0=bell("psi_plus").projector,
                            rho0_name="psi_plus", t_final=0.2)
        summary = run_campaign(cfg)
        assert summary.frequencies["psi_plus"] == pytest.approx(1.0)
        assert summary.n_unconverged == 0

    def test_failure_budget(self):
        # alpha overflow forces every trajectory to blow up
        model = ModelParams(target="psi_plus")
        cfg = tiny_campaign(
            n_traj=3, t_final=0.1,
            controller=Controller.two_channel("psi_plus", alpha=1e308, beta=2.0),
            rho0=bell("phi_minus").projector, rho0_name="phi_minus", model=model)
        with pytest.raises(CampaignError):
            run_campaign(cfg)

    def test_slopes_shape(self):
        summary = run_campaign(tiny_campaign(n_traj=5))
        assert summary.trajectory_slopes.shape == (5,)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            tiny_campaign(n_traj=0)
        with pytest.raises(ValueError):
            tiny_campaign(fit_window=(0.4, 0.1))
        with pytest.raises(ValueError):
            tiny_campaign(controller=Controller.zero(target="phi_plus"))


class TestOutputs:
    def test_files_written_and_stable(self, tmp_path):
        cfg = tiny_campaign(n_traj=3, per_trajectory_csv=True,
                            keep_trajectories=True)
        summary = run_campaign(cfg)
        paths = write_outputs(summary, tmp_path / "out")
        assert paths["summary"].exists()
        assert paths["series"].exists()
        traj_files = sorted(paths["trajectories"].glob("traj_*.csv"))
        assert len(traj_files) == 3

        payload = json.loads(paths["summary"].read_text())
        assert set(payload) == {"config", "frequencies", "n_unconverged",
                                "n_failed", "exponent_fit", "reference_exponent",
                                "clipped_mass_per_step", "runtime_seconds"}
        header = paths["series"].read_text().splitlines()[0]
        assert header == "t,mean_bures,mean_lyapunov,reference"
        header_traj = traj_files[0].read_text().splitlines()[0]
        assert header_traj == "t,bures,lyapunov,fidelity,u1"

        # byte-identical rerun
        summary2 = run_campaign(cfg)
        paths2 = write_outputs(summary2, tmp_path / "out2")
        assert paths["summary"].read_bytes() == paths2["summary"].read_bytes()
        assert paths["series"].read_bytes() == paths2["series"].read_bytes()

    def test_series_parse_back(self, tmp_path):
        summary = run_campaign(tiny_campaign(n_traj=2))
        paths = write_outputs(summary, tmp_path)
        data = np.loadtxt(paths["series"], delimiter=",", skiprows=1)
        assert data.shape[1] == 4
        assert np.allclose(data[:, 0], summary.times, atol=1e-9)


class TestPresetCampaigns:
    def test_fig1_preset_runs_small(self):
        cfg = dataclasses.replace(preset_config("fig1_qsr", seed=11), n_traj=4)
        cfg = dataclasses.replace(
            cfg, sde=dataclasses.replace(cfg.sde, t_final=1.0))
        summary = run_campaign(cfg)
        assert summary.n_failed == 0
        assert len(summary.times) == 101

    def test_one_channel_preset_runs_small(self):
        cfg = dataclasses.replace(preset_config("fig4_stab1_psi+", seed=11), n_traj=2)
        cfg = dataclasses.replace(
            cfg, sde=dataclasses.replace(cfg.sde, t_final=1.0))
        summary = run_campaign(cfg)
        assert summary.n_failed == 0
