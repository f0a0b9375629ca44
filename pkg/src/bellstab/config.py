"""Campaign configuration: INI-style files with [model] / [controller] /
[sde] / [campaign] sections, named presets reproducing the five reference
scenarios, and round-trippable serialization.

Unknown keys are rejected; every value is validated by the dataclasses it
feeds. Initial states can be given as a preset name (bell labels,
maximally_mixed, fig1_diagonal) or as 16 comma-separated complex entries
in row-major order.
"""

from __future__ import annotations

import configparser
import io
from pathlib import Path

import numpy as np

from .control import Controller
from .ensemble import CampaignConfig
from .model import (BELL_LABELS, ModelParams, bell, canonical_bell_label,
                    maximally_mixed, validate_density)
from .sde import SdeConfig

__all__ = [
    "ConfigError",
    "PRESET_NAMES",
    "preset_config",
    "preset_descriptions",
    "parse_config",
    "parse_config_text",
    "format_config",
    "resolve_rho0",
]


class ConfigError(ValueError):
    """Configuration file could not be parsed or validated."""


_MODEL_KEYS = {"channels", "eta1", "m1", "eta2", "m2", "omega", "target"}
_CONTROLLER_KEYS = {"kind", "alpha", "beta", "gamma", "gamma1", "gamma2", "epsilon"}
_SDE_KEYS = {"dt", "t_final", "scheme", "projection_tol", "seed"}
_CAMPAIGN_KEYS = {"n_traj", "rho0", "log_stride", "workers", "classify_tol",
                  "fit_window", "name"}

_FIG1_DIAGONAL = np.diag(np.array([0.2, 0.3, 0.1, 0.4], dtype=np.complex128))


def resolve_rho0(spec: str) -> tuple[np.ndarray, str]:
    """Initial state from a preset name or 16 complex row-major entries."""
    text = spec.strip()
    lowered = text.lower()
    if lowered in ("maximally_mixed", "mixed"):
        return maximally_mixed(), "maximally_mixed"
    if lowered == "fig1_diagonal":
        return _FIG1_DIAGONAL.copy(), "fig1_diagonal"
    try:
        label = canonical_bell_label(lowered)
    except ValueError:
        label = None
    if label is not None:
        return bell(label).projector, label
    parts = [p for p in text.replace(";", ",").split(",") if p.strip()]
    if len(parts) != 16:
        raise ConfigError(
            f"rho0 must be a preset name or 16 complex entries, got {spec!r}")
    try:
        entries = np.array([complex(p.strip()) for p in parts],
                           dtype=np.complex128).reshape(4, 4)
    except ValueError as exc:
        raise ConfigError(f"could not parse rho0 entry: {exc}") from None
    try:
        return validate_density(entries), "explicit"
    except ValueError as exc:
        raise ConfigError(f"rho0 is not a valid density matrix: {exc}") from None


def _rho0_text(cfg: CampaignConfig) -> str:
    if cfg.rho0_name != "explicit":
        return cfg.rho0_name
    flat = cfg.rho0.reshape(-1)
    return ", ".join(f"{z.real:.12g}{z.imag:+.12g}j" for z in flat)


# ---------------------------------------------------------------------------
# presets: the five reference scenarios

PRESET_NAMES = ("fig1_qsr", "fig2_stab2_psi+", "fig3_stab2_phi-",
                "fig4_stab1_psi+", "fig5_stab1_phi-")

_PRESET_INFO = {
    "fig1_qsr": "measurement-only state reduction from diag(0.2,0.3,0.1,0.4)",
    "fig2_stab2_psi+": "two-channel feedback to psi_plus starting at phi_minus",
    "fig3_stab2_phi-": "two-channel feedback to phi_minus starting at psi_plus",
    "fig4_stab1_psi+": "one-channel feedback to psi_plus starting at phi_minus",
    "fig5_stab1_phi-": "one-channel feedback to phi_minus starting at psi_plus",
}


def preset_descriptions() -> dict[str, str]:
    return dict(_PRESET_INFO)


def preset_config(name: str, seed: int = 0) -> CampaignConfig:
    """Bind the named scenario to a CampaignConfig with default sizes."""
    two_ch = dict(n_channels=2, eta1=0.3, M1=1.0, eta2=0.4, M2=0.9, omega=0.3)
    one_ch = dict(n_channels=1, eta1=0.3, M1=1.0, omega=0.3)
    if name == "fig1_qsr":
        model = ModelParams(**two_ch, target="psi_plus")
        controller = Controller.zero(target="psi_plus")
        rho0, rho0_name = _FIG1_DIAGONAL.copy(), "fig1_diagonal"
        t_final = 10.0
    elif name == "fig2_stab2_psi+":
        model = ModelParams(**two_ch, target="psi_plus")
        controller = Controller.two_channel("psi_plus", alpha=10.0, beta=12.0,
                                            gamma=1.0)
        rho0, rho0_name = bell("phi_minus").projector, "phi_minus"
        t_final = 10.0
    elif name == "fig3_stab2_phi-":
        model = ModelParams(**two_ch, target="phi_minus")
        controller = Controller.two_channel("phi_minus", alpha=10.0, beta=12.0,
                                            gamma=1.0)
        rho0, rho0_name = bell("psi_plus").projector, "psi_plus"
        t_final = 10.0
    elif name == "fig4_stab1_psi+":
        model = ModelParams(**one_ch, target="psi_plus")
        controller = Controller.one_channel("psi_plus", gamma1=4.0, epsilon=0.15)
        rho0, rho0_name = bell("phi_minus").projector, "phi_minus"
        t_final = 30.0
    elif name == "fig5_stab1_phi-":
        model = ModelParams(**one_ch, target="phi_minus")
        controller = Controller.one_channel("phi_minus", gamma1=4.0, epsilon=0.15)
        rho0, rho0_name = bell("psi_plus").projector, "psi_plus"
        t_final = 30.0
    else:
        raise ConfigError(f"unknown preset {name!r}; available: {PRESET_NAMES}")
    sde = SdeConfig(dt=1e-3, t_final=t_final, rng_master_seed=seed)
    return CampaignConfig(model=model, controller=controller, sde=sde,
                          n_traj=10, rho0=rho0, rho0_name=rho0_name,
                          name=name)


# ---------------------------------------------------------------------------
# INI parsing / serialization

def _check_keys(section: str, present, allowed: set[str]):
    unknown = set(present) - allowed
    if unknown:
        raise ConfigError(
            f"unknown key(s) {sorted(unknown)} in section [{section}]; "
            f"allowed: {sorted(allowed)}")


def _get(parser, section, key, conv, default):
    if not parser.has_option(section, key):
        return default
    raw = parser.get(section, key)
    try:
        return conv(raw)
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError(f"invalid value for {section}.{key}: {raw!r} ({exc})") from None


def parse_config_text(text: str) -> CampaignConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"could not parse config: {exc}") from None
    for section in parser.sections():
        if section not in ("model", "controller", "sde", "campaign"):
            raise ConfigError(f"unknown section [{section}]")

    if parser.has_section("model"):
        _check_keys("model", parser.options("model"), _MODEL_KEYS)
    if parser.has_section("controller"):
        _check_keys("controller", parser.options("controller"), _CONTROLLER_KEYS)
    if parser.has_section("sde"):
        _check_keys("sde", parser.options("sde"), _SDE_KEYS)
    if parser.has_section("campaign"):
        _check_keys("campaign", parser.options("campaign"), _CAMPAIGN_KEYS)

    try:
        model = ModelParams(
            n_channels=_get(parser, "model", "channels", int, 2),
            eta1=_get(parser, "model", "eta1", float, 0.3),
            M1=_get(parser, "model", "m1", float, 1.0),
            eta2=_get(parser, "model", "eta2", float, 0.4),
            M2=_get(parser, "model", "m2", float, 0.9),
            omega=_get(parser, "model", "omega", float, 0.3),
            target=_get(parser, "model", "target", str, "psi_plus"),
        )
        kind = _get(parser, "controller", "kind", str, "zero")
        gamma2 = _get(parser, "controller", "gamma2", float, None)
        controller = Controller(
            kind=kind,
            target=model.target,
            alpha=_get(parser, "controller", "alpha", float, 10.0),
            beta=_get(parser, "controller", "beta", float, 12.0),
            gamma=_get(parser, "controller", "gamma", float, 1.0),
            gamma1=_get(parser, "controller", "gamma1", float, 4.0),
            gamma2=gamma2,
            epsilon=_get(parser, "controller", "epsilon", float, 0.15),
        )
        sde = SdeConfig(
            dt=_get(parser, "sde", "dt", float, 1e-3),
            t_final=_get(parser, "sde", "t_final", float, 10.0),
            scheme=_get(parser, "sde", "scheme", str, "euler_maruyama"),
            projection_tol=_get(parser, "sde", "projection_tol", float, 1e-10),
            rng_master_seed=_get(parser, "sde", "seed", int, 0),
        )
        rho0, rho0_name = resolve_rho0(
            _get(parser, "campaign", "rho0", str, "maximally_mixed"))

        def _window(raw: str):
            lo, hi = (float(p) for p in raw.split(","))
            return (lo, hi)

        return CampaignConfig(
            model=model, controller=controller, sde=sde,
            n_traj=_get(parser, "campaign", "n_traj", int, 10),
            rho0=rho0, rho0_name=rho0_name,
            log_stride=_get(parser, "campaign", "log_stride", int, 10),
            workers=_get(parser, "campaign", "workers", int, 0),
            classify_tol=_get(parser, "campaign", "classify_tol", float, 0.05),
            fit_window=_get(parser, "campaign", "fit_window", _window, None),
            name=_get(parser, "campaign", "name", str, "campaign"),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def parse_config(path: Path | str) -> CampaignConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    return parse_config_text(path.read_text())


def format_config(cfg: CampaignConfig) -> str:
    """Serialize a campaign so parse_config_text reproduces it exactly."""
    mp, ctl, sde = cfg.model, cfg.controller, cfg.sde
    buf = io.StringIO()
    buf.write("[model]\n")
    buf.write(f"channels = {mp.n_channels}\n")
    buf.write(f"eta1 = {mp.eta1!r}\n")
    buf.write(f"m1 = {mp.M1!r}\n")
    if mp.n_channels == 2:
        buf.write(f"eta2 = {mp.eta2!r}\n")
        buf.write(f"m2 = {mp.M2!r}\n")
    buf.write(f"omega = {mp.omega!r}\n")
    buf.write(f"target = {mp.target}\n\n")
    buf.write("[controller]\n")
    buf.write(f"kind = {ctl.kind}\n")
    if ctl.kind == "two_channel":
        buf.write(f"alpha = {ctl.alpha!r}\n")
        buf.write(f"beta = {ctl.beta!r}\n")
        buf.write(f"gamma = {ctl.gamma!r}\n")
    elif ctl.kind == "one_channel":
        buf.write(f"gamma1 = {ctl.gamma1!r}\n")
        buf.write(f"gamma2 = {ctl.gamma2!r}\n")
        buf.write(f"epsilon = {ctl.epsilon!r}\n")
    buf.write("\n[sde]\n")
    buf.write(f"dt = {sde.dt!r}\n")
    buf.write(f"t_final = {sde.t_final!r}\n")
    buf.write(f"scheme = {sde.scheme}\n")
    buf.write(f"projection_tol = {sde.projection_tol!r}\n")
    buf.write(f"seed = {sde.rng_master_seed}\n\n")
    buf.write("[campaign]\n")
    buf.write(f"name = {cfg.name}\n")
    buf.write(f"n_traj = {cfg.n_traj}\n")
    buf.write(f"rho0 = {_rho0_text(cfg)}\n")
    buf.write(f"log_stride = {cfg.log_stride}\n")
    buf.write(f"workers = {cfg.workers}\n")
    buf.write(f"classify_tol = {cfg.classify_tol!r}\n")
    if cfg.fit_window is not None:
        buf.write(f"fit_window = {cfg.fit_window[0]!r}, {cfg.fit_window[1]!r}\n")
    return buf.getvalue()
