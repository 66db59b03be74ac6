"""Deterministic discrete-event simulator of a self-organizing UAV
data-collection swarm: a leader drone relays between worker drones on a
short-range WLAN and a ground station on a long-range link, with failure
handover, network metrics, and battery-sizing analysis."""

__version__ = "0.1.0"

from .protocol import (
    Message,
    MessageKind,
    VideoCallSpec,
    decode_message,
    encode_message,
    fragment_payload,
    generate_profile_traffic,
    status_report_ld_length,
)
from .swarm import CaseClass, Drone, MissionPlan, Phase, SwarmState, init_swarm
from .netsim import EventQueue, WlanParams, WimaxParams, max_simultaneous_calls
from .energy import DroneSpec, PayloadManifest, durability_report
from .config import ConfigError, ScenarioConfig, load_config
from .runner import RunResult, run_scenario, sweep

__all__ = [
    "Message", "MessageKind", "VideoCallSpec", "decode_message",
    "encode_message", "fragment_payload", "generate_profile_traffic",
    "status_report_ld_length",
    "CaseClass", "Drone", "MissionPlan", "Phase", "SwarmState", "init_swarm",
    "EventQueue", "WlanParams", "WimaxParams", "max_simultaneous_calls",
    "DroneSpec", "PayloadManifest", "durability_report",
    "ConfigError", "ScenarioConfig", "load_config",
    "RunResult", "run_scenario", "sweep",
]
