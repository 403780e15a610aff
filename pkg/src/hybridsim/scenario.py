"""Scenario schema: YAML-style config files mapped onto simulator objects,
with validation errors that name the offending field path."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .arrays import ArrayGeometry, SteeringAngles
from .channel import BsArray, ImpairmentProfile, Ray

MODES = ("analog_only", "zf", "rzf")


class ConfigError(ValueError):
    """Invalid scenario configuration; message carries the field path."""


def _get(d: dict, key: str, path: str, default=None, required: bool = False):
    if key not in d:
        if required:
            raise ConfigError(f"{path}.{key}: missing required field")
        return default
    return d[key]


def _angles(d: dict, path: str) -> SteeringAngles:
    try:
        return SteeringAngles(float(_get(d, "theta", path, 90.0)),
                              float(_get(d, "phi", path, required=True)))
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _ray(d: dict, path: str) -> Ray:
    gain_db = float(_get(d, "gain_db", path, 0.0))
    phase_deg = float(_get(d, "phase_deg", path, 0.0))
    gain = 10.0 ** (gain_db / 20.0) * np.exp(1j * np.deg2rad(phase_deg))
    try:
        return Ray(aod=_angles(_get(d, "aod", path, required=True), path + ".aod"),
                   aoa=_angles(_get(d, "aoa", path, required=True), path + ".aoa"),
                   gain=gain, delay=int(_get(d, "delay", path, 0)))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


@dataclass
class Drift:
    """Per-frame channel drift: reflections get resampled around the base
    scenario each frame while the geometry stays fixed."""
    gain_jitter_db: float = 0.0
    phase_jitter: bool = True
    keep_los: bool = True


@dataclass
class BeamGrid:
    start_deg: float = -60.0
    stop_deg: float = 60.0
    step_deg: float = 1.0


@dataclass
class Scenario:
    bs: BsArray
    ue: ArrayGeometry
    rays_per_user: list[list[Ray]]
    impairments: ImpairmentProfile | None
    noise_power: float
    modes: tuple[str, ...]
    gamma: float | None               # None = auto heuristic
    frames: int
    codewords_per_frame: int
    seed: int
    phase_bits: int = 8
    beam_grid: BeamGrid = field(default_factory=BeamGrid)
    oracle_csi: bool = False
    timing_offset: int = 0
    decoder_iters: int = 20
    drift: Drift | None = None
    raw: dict = field(default_factory=dict)

    @property
    def n_users(self) -> int:
        return len(self.rays_per_user)

    def __post_init__(self):
        if self.n_users > self.bs.n_subarrays:
            raise ConfigError(
                f"users: {self.n_users} users exceed {self.bs.n_subarrays} RF chains")
        for m in self.modes:
            if m not in MODES:
                raise ConfigError(f"precoder.mode: unknown mode '{m}'")
        if self.frames < 1:
            raise ConfigError("frames: must be >= 1")
        if self.noise_power < 0:
            raise ConfigError("noise_power: must be >= 0")
        if self.decoder_iters < 1:
            raise ConfigError("decoder_iters: must be >= 1")


def scenario_from_dict(cfg: dict) -> Scenario:
    geo = _get(cfg, "geometry", "", {}, required=True)
    bs_cfg = _get(geo, "bs", "geometry", {}, required=True)
    sub = _get(bs_cfg, "subarray", "geometry.bs", {}, required=True)
    try:
        subarray = ArrayGeometry(int(_get(sub, "m_y", "geometry.bs.subarray", required=True)),
                                 int(_get(sub, "m_z", "geometry.bs.subarray", required=True)),
                                 float(_get(sub, "spacing", "geometry.bs.subarray", 0.5)))
    except ValueError as exc:
        raise ConfigError(f"geometry.bs.subarray: {exc}") from None
    bs = BsArray(subarray=subarray,
                 n_subarrays=int(_get(bs_cfg, "n_subarrays", "geometry.bs", 2)),
                 separation_wl=float(_get(bs_cfg, "separation_wl", "geometry.bs", 10.0)))
    ue_cfg = _get(geo, "ue", "geometry", {}, required=True)
    try:
        ue = ArrayGeometry(int(_get(ue_cfg, "m_y", "geometry.ue", required=True)),
                           int(_get(ue_cfg, "m_z", "geometry.ue", required=True)),
                           float(_get(ue_cfg, "spacing", "geometry.ue", 0.5)))
    except ValueError as exc:
        raise ConfigError(f"geometry.ue: {exc}") from None

    users = _get(cfg, "users", "", required=True)
    if not isinstance(users, list) or not users:
        raise ConfigError("users: must be a non-empty list")
    rays_per_user = []
    for u, user in enumerate(users):
        rays = _get(user, "rays", f"users[{u}]", required=True)
        if not rays:
            raise ConfigError(f"users[{u}].rays: must be non-empty")
        rays_per_user.append([_ray(r, f"users[{u}].rays[{i}]")
                              for i, r in enumerate(rays)])

    imp_cfg = _get(cfg, "impairments", "", None)
    impairments = None
    if imp_cfg is not None:
        try:
            impairments = ImpairmentProfile(
                edge_rolloff_db=float(_get(imp_cfg, "edge_rolloff_db", "impairments", 6.0)),
                chain_imbalance_db=tuple(_get(imp_cfg, "chain_imbalance_db",
                                              "impairments", [0.0] * bs.n_subarrays)))
        except ValueError as exc:
            raise ConfigError(f"impairments: {exc}") from None
        if len(impairments.chain_imbalance_db) != bs.n_subarrays:
            raise ConfigError("impairments.chain_imbalance_db: length must equal "
                              f"{bs.n_subarrays} RF chains")

    pre = _get(cfg, "precoder", "", {})
    mode = _get(pre, "mode", "precoder", "both")
    modes = tuple(MODES[:1] + MODES[2:3]) if mode == "both" else (mode,)
    gamma_raw = _get(pre, "gamma", "precoder", "auto")
    gamma = None if gamma_raw == "auto" else float(gamma_raw)
    if gamma is not None and gamma < 0:
        raise ConfigError("precoder.gamma: must be >= 0 or 'auto'")

    drift_cfg = _get(cfg, "drift", "", None)
    drift = None
    if drift_cfg is not None:
        jitter = float(_get(drift_cfg, "gain_jitter_db", "drift", 0.0))
        if jitter < 0:
            raise ConfigError("drift.gain_jitter_db: must be >= 0")
        drift = Drift(gain_jitter_db=jitter,
                      phase_jitter=bool(_get(drift_cfg, "phase_jitter", "drift", True)),
                      keep_los=bool(_get(drift_cfg, "keep_los", "drift", True)))

    grid_cfg = _get(cfg, "beam_grid", "", {})
    grid = BeamGrid(start_deg=float(_get(grid_cfg, "start_deg", "beam_grid", -60.0)),
                    stop_deg=float(_get(grid_cfg, "stop_deg", "beam_grid", 60.0)),
                    step_deg=float(_get(grid_cfg, "step_deg", "beam_grid", 1.0)))

    return Scenario(
        bs=bs, ue=ue, rays_per_user=rays_per_user, impairments=impairments,
        noise_power=float(_get(cfg, "noise_power", "", 0.0)),
        modes=modes, gamma=gamma,
        frames=int(_get(cfg, "frames", "", 100)),
        codewords_per_frame=int(_get(cfg, "codewords_per_frame", "", 10)),
        seed=int(_get(cfg, "seed", "", 1)),
        phase_bits=int(_get(bs_cfg, "phase_bits", "geometry.bs", 8)),
        beam_grid=grid,
        oracle_csi=bool(_get(cfg, "oracle_csi", "", False)),
        timing_offset=int(_get(cfg, "timing_offset", "", 0)),
        decoder_iters=int(_get(cfg, "decoder_iters", "", 20)),
        drift=drift,
        raw=cfg)


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        cfg = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid config syntax: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return scenario_from_dict(cfg)
