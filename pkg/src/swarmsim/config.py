"""Scenario configuration: strict JSON schema with defaults.

Unknown fields are rejected rather than ignored so typos in experiment
files fail loudly. Every field has a default; a minimal file needs nothing
but ``{}``. The full schema lives in docs/config-schema.md.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .failure import FailureEvent, FailureKind
from .netsim import WlanParams, WimaxParams

WLAN_DATA_RATES_MBPS = (6, 18, 36, 54)
WLAN_PROC_RATES_PPS = (5000, 10000, 20000)
VIDEO_BANDWIDTHS_MBPS = (2, 4, 6)
MAX_SDS_NO_VIDEO = 100
MAX_SDS_VIDEO = 14


class ConfigError(ValueError):
    """Configuration file is malformed or out of range."""


@dataclass(frozen=True)
class VideoSettings:
    enabled: bool = False
    bandwidth_mbps: int = 2
    max_calls: int | None = None  # None: derived from link capacity
    forced_calls: int = 0          # load-testing knob: start this many calls per session
    call_duration_s: float = 300.0
    frame_rate: int = 30


@dataclass(frozen=True)
class MissionSettings:
    formation: str = "linear"
    spacing_m: float = 12.0
    speed_kmh: float = 12.0
    session_duration_s: float = 1800.0
    n_sessions: int = 1
    reposition_s: float = 60.0
    transit_distance_m: float = 1000.0
    n_targets: int | None = None   # None: one per SD
    span_m: float = 2000.0
    backup_id: int | None = None   # None: lowest-id SD after the first
    formation_time_s: float = 30.0
    deploy_time_s: float = 30.0
    position_noise_m: float = 0.0


@dataclass(frozen=True)
class EnergySettings:
    dmc_leg_min: float = 6.0
    reposition_min: float = 1.0
    video_multiplier: float = 1.5


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "run"
    seed: int = 0
    duration_s: float = 900.0
    n_sds: int = 10
    profile: int = 2
    infection_rate: float = 0.025
    measure_from_s: float = 0.0
    wlan: WlanParams = WlanParams()
    wimax: WimaxParams = WimaxParams()
    video: VideoSettings = VideoSettings()
    mission: MissionSettings = MissionSettings()
    energy: EnergySettings = EnergySettings()
    failures: tuple[FailureEvent, ...] = ()

    def resolved_backup_id(self) -> int:
        if self.mission.backup_id is not None:
            return self.mission.backup_id
        return 3 if self.n_sds >= 2 else 2


def _expect(data: dict, path: str, known: dict) -> dict:
    """Apply defaults and reject unknown keys; returns a full field dict."""
    if not isinstance(data, dict):
        raise ConfigError(f"field '{path}' must be an object")
    out = dict(known)
    for key, value in data.items():
        if key not in known:
            where = f"{path}.{key}" if path else key
            raise ConfigError(f"unknown field '{where}'")
        out[key] = value
    return out


def _num(value, path: str, lo=None, hi=None, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"field '{path}' must be a number, got {value!r}")
    if integer:
        if float(value) != int(value):
            raise ConfigError(f"field '{path}' must be an integer, got {value!r}")
        value = int(value)
    if lo is not None and value < lo:
        raise ConfigError(f"field '{path}'={value} below minimum {lo}")
    if hi is not None and value > hi:
        raise ConfigError(f"field '{path}'={value} above maximum {hi}")
    return value


def _choice(value, path: str, options):
    if value not in options:
        raise ConfigError(f"field '{path}'={value!r} not one of {sorted(options)}")
    return value


def _bool(value, path: str) -> bool:
    if not isinstance(value, bool):
        raise ConfigError(f"field '{path}' must be true or false")
    return value


def parse_config(data: dict, name: str = "run") -> ScenarioConfig:
    top = _expect(data, "", {
        "name": name, "seed": 0, "duration_s": 900.0, "n_sds": 10, "profile": 2,
        "infection_rate": 0.025, "measure_from_s": 0.0,
        "wlan": {}, "wimax": {}, "video": {}, "mission": {}, "energy": {},
        "failures": [],
    })

    w = _expect(top["wlan"], "wlan", {
        "data_rate_mbps": 54, "proc_rate_pps": 10_000, "edca": False,
        "overhead_bytes": 90, "buffer_bits": 1_000_000, "mtu": 1500,
    })
    wlan = WlanParams(
        data_rate_bps=_choice(w["data_rate_mbps"], "wlan.data_rate_mbps",
                              WLAN_DATA_RATES_MBPS) * 1_000_000,
        proc_rate_pps=_choice(w["proc_rate_pps"], "wlan.proc_rate_pps",
                              WLAN_PROC_RATES_PPS),
        edca=_bool(w["edca"], "wlan.edca"),
        overhead_bytes=_num(w["overhead_bytes"], "wlan.overhead_bytes", 0, 10_000, True),
        buffer_bits=_num(w["buffer_bits"], "wlan.buffer_bits", 1, None, True),
        mtu=_num(w["mtu"], "wlan.mtu", 64, 65_535, True),
    )

    x = _expect(top["wimax"], "wimax", {
        "max_sustained_mbps": 10, "min_reserved_mbps": 5,
        "overhead_bytes": 54, "buffer_bits": 1_000_000, "mtu": 1500,
    })
    wimax = WimaxParams(
        max_sustained_bps=_num(x["max_sustained_mbps"], "wimax.max_sustained_mbps",
                               1, 1000, True) * 1_000_000,
        min_reserved_bps=_num(x["min_reserved_mbps"], "wimax.min_reserved_mbps",
                              0, 1000, True) * 1_000_000,
        overhead_bytes=_num(x["overhead_bytes"], "wimax.overhead_bytes", 0, 10_000, True),
        buffer_bits=_num(x["buffer_bits"], "wimax.buffer_bits", 1, None, True),
        mtu=_num(x["mtu"], "wimax.mtu", 64, 65_535, True),
    )

    v = _expect(top["video"], "video", {
        "enabled": False, "bandwidth_mbps": 2, "max_calls": None,
        "forced_calls": 0, "call_duration_s": 300.0, "frame_rate": 30,
    })
    video = VideoSettings(
        enabled=_bool(v["enabled"], "video.enabled"),
        bandwidth_mbps=_choice(v["bandwidth_mbps"], "video.bandwidth_mbps",
                               VIDEO_BANDWIDTHS_MBPS),
        max_calls=(None if v["max_calls"] is None
                   else _num(v["max_calls"], "video.max_calls", 1, None, True)),
        forced_calls=_num(v["forced_calls"], "video.forced_calls", 0, None, True),
        call_duration_s=_num(v["call_duration_s"], "video.call_duration_s", 0.001, None),
        frame_rate=_num(v["frame_rate"], "video.frame_rate", 1, 240, True),
    )

    m = _expect(top["mission"], "mission", {
        "formation": "linear", "spacing_m": 12.0, "speed_kmh": 12.0,
        "session_duration_s": 1800.0, "n_sessions": 1, "reposition_s": 60.0,
        "transit_distance_m": 1000.0, "n_targets": None, "span_m": 2000.0,
        "backup_id": None, "formation_time_s": 30.0, "deploy_time_s": 30.0,
        "position_noise_m": 0.0,
    })
    mission = MissionSettings(
        formation=_choice(m["formation"], "mission.formation", ("linear", "grid")),
        spacing_m=_num(m["spacing_m"], "mission.spacing_m", 0.001, None),
        speed_kmh=_num(m["speed_kmh"], "mission.speed_kmh", 0.001, None),
        session_duration_s=_num(m["session_duration_s"], "mission.session_duration_s",
                                0.001, None),
        n_sessions=_num(m["n_sessions"], "mission.n_sessions", 1, 1000, True),
        reposition_s=_num(m["reposition_s"], "mission.reposition_s", 0, None),
        transit_distance_m=_num(m["transit_distance_m"], "mission.transit_distance_m",
                                0, None),
        n_targets=(None if m["n_targets"] is None
                   else _num(m["n_targets"], "mission.n_targets", 0, None, True)),
        span_m=_num(m["span_m"], "mission.span_m", 1, None),
        backup_id=(None if m["backup_id"] is None
                   else _num(m["backup_id"], "mission.backup_id", 2, None, True)),
        formation_time_s=_num(m["formation_time_s"], "mission.formation_time_s", 0, None),
        deploy_time_s=_num(m["deploy_time_s"], "mission.deploy_time_s", 0, None),
        position_noise_m=_num(m["position_noise_m"], "mission.position_noise_m", 0, None),
    )

    e = _expect(top["energy"], "energy", {
        "dmc_leg_min": 6.0, "reposition_min": 1.0, "video_multiplier": 1.5,
    })
    energy = EnergySettings(
        dmc_leg_min=_num(e["dmc_leg_min"], "energy.dmc_leg_min", 0, None),
        reposition_min=_num(e["reposition_min"], "energy.reposition_min", 0, None),
        video_multiplier=_num(e["video_multiplier"], "energy.video_multiplier", 1.0, None),
    )

    if not isinstance(top["failures"], list):
        raise ConfigError("field 'failures' must be a list")
    failures = []
    for i, entry in enumerate(top["failures"]):
        f = _expect(entry, f"failures[{i}]", {"kind": None, "drone_id": None, "at_s": None})
        kind = _choice(f["kind"], f"failures[{i}].kind", FailureKind.ALL)
        at_s = _num(f["at_s"], f"failures[{i}].at_s", 0, None)
        drone_id = (None if f["drone_id"] is None
                    else _num(f["drone_id"], f"failures[{i}].drone_id", 1, None, True))
        failures.append(FailureEvent(kind=kind, drone_id=drone_id, at_us=int(at_s * 1e6)))
    failures.sort(key=lambda fe: fe.at_us)

    n_sds = _num(top["n_sds"], "n_sds", 1, MAX_SDS_NO_VIDEO, True)
    if video.enabled and n_sds > MAX_SDS_VIDEO:
        raise ConfigError(
            f"n_sds={n_sds} exceeds the video-call limit of {MAX_SDS_VIDEO}"
        )
    duration_s = _num(top["duration_s"], "duration_s", 0.001, None)

    cfg = ScenarioConfig(
        name=str(top["name"]),
        seed=_num(top["seed"], "seed", 0, None, True),
        duration_s=duration_s,
        n_sds=n_sds,
        profile=_choice(top["profile"], "profile", (1, 2)),
        infection_rate=_num(top["infection_rate"], "infection_rate", 0.0, 1.0),
        measure_from_s=_num(top["measure_from_s"], "measure_from_s", 0.0, None),
        wlan=wlan, wimax=wimax, video=video, mission=mission, energy=energy,
        failures=tuple(failures),
    )
    backup = cfg.resolved_backup_id()
    if not 2 <= backup <= n_sds + 1:
        raise ConfigError(
            f"mission.backup_id={backup} must name an SD (2..{n_sds + 1})"
        )
    if mission.n_targets is not None and mission.n_targets > n_sds:
        raise ConfigError(
            f"mission.n_targets={mission.n_targets} exceeds n_sds={n_sds}"
        )
    return cfg


def load_config(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as ex:
        raise ConfigError(f"cannot read {path}: {ex}") from ex
    try:
        data = json.loads(text)
    except json.JSONDecodeError as ex:
        raise ConfigError(f"{path}: parse error at line {ex.lineno}: {ex.msg}") from ex
    return parse_config(data, name=path.stem)


def to_dict(cfg: ScenarioConfig) -> dict:
    """Full round-trippable echo of a config, defaults applied."""
    return {
        "name": cfg.name,
        "seed": cfg.seed,
        "duration_s": cfg.duration_s,
        "n_sds": cfg.n_sds,
        "profile": cfg.profile,
        "infection_rate": cfg.infection_rate,
        "measure_from_s": cfg.measure_from_s,
        "wlan": {
            "data_rate_mbps": cfg.wlan.data_rate_bps // 1_000_000,
            "proc_rate_pps": cfg.wlan.proc_rate_pps,
            "edca": cfg.wlan.edca,
            "overhead_bytes": cfg.wlan.overhead_bytes,
            "buffer_bits": cfg.wlan.buffer_bits,
            "mtu": cfg.wlan.mtu,
        },
        "wimax": {
            "max_sustained_mbps": cfg.wimax.max_sustained_bps // 1_000_000,
            "min_reserved_mbps": cfg.wimax.min_reserved_bps // 1_000_000,
            "overhead_bytes": cfg.wimax.overhead_bytes,
            "buffer_bits": cfg.wimax.buffer_bits,
            "mtu": cfg.wimax.mtu,
        },
        "video": {
            "enabled": cfg.video.enabled,
            "bandwidth_mbps": cfg.video.bandwidth_mbps,
            "max_calls": cfg.video.max_calls,
            "forced_calls": cfg.video.forced_calls,
            "call_duration_s": cfg.video.call_duration_s,
            "frame_rate": cfg.video.frame_rate,
        },
        "mission": {
            "formation": cfg.mission.formation,
            "spacing_m": cfg.mission.spacing_m,
            "speed_kmh": cfg.mission.speed_kmh,
            "session_duration_s": cfg.mission.session_duration_s,
            "n_sessions": cfg.mission.n_sessions,
            "reposition_s": cfg.mission.reposition_s,
            "transit_distance_m": cfg.mission.transit_distance_m,
            "n_targets": cfg.mission.n_targets,
            "span_m": cfg.mission.span_m,
            "backup_id": cfg.mission.backup_id,
            "formation_time_s": cfg.mission.formation_time_s,
            "deploy_time_s": cfg.mission.deploy_time_s,
            "position_noise_m": cfg.mission.position_noise_m,
        },
        "energy": {
            "dmc_leg_min": cfg.energy.dmc_leg_min,
            "reposition_min": cfg.energy.reposition_min,
            "video_multiplier": cfg.energy.video_multiplier,
        },
        "failures": [
            {"kind": f.kind, "drone_id": f.drone_id, "at_s": f.at_us / 1e6}
            for f in cfg.failures
        ],
    }
