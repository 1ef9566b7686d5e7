"""The tower-building case study: mission, system and capability models.

Three green boxes have to be stacked on a red base within 10 minutes. One
simulation unit is 10 s, so the deadline is 60 units. Transition parameters
are not published for this study; the values below are reconstructions,
chosen so that one robot needs about 55 units on average (roughly 3 in 4
runs meet the deadline) and extra robots help until there is one per box.
Each reconstruction choice is also stored in the ``note`` metadata of the
element it concerns, so it survives in the shipped files.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources as _res
from pathlib import Path

from .compose import FusionGroup, FusionMap
from .montecarlo import Distribution, SamplingEntry, SamplingSpec, Target
from .net import Duration, Goal, Net, Place, Resource, TokenCondition, Transition
from .reliability import AvailabilityModel, Capability, Device, capability_net

BOXES = 3
DEADLINE = 60.0
CAPABILITIES = ("detection", "tracking", "approach", "manipulation")
MISSION_CAPABILITY = "box_stacking"
RELIABILITY = Distribution("normal", (0.9, 0.05))


def _read(cap: str, extra_in=None, extra_out=None):
    """Arcs that test a capability place: take the token and give it back."""
    return {cap: 1, **(extra_in or {})}, {cap: 1, **(extra_out or {})}


def mission_net(robots: int = 1) -> Net:
    lvl = {"level": "mission"}
    places = [
        Place("boxes", "green boxes not yet assigned", BOXES, {**lvl, "note": "B = 3 green boxes"}),
        Place("available", "boxes ready to fetch", 0, lvl),
        Place("robots", "idle robots", robots, {**lvl, "note": "robot count R; sampled per run in Q1"}),
        Place("carrying", "robot holding a box", 0, lvl),
        Place("tower_free", "tower accepts a box", 1, {**lvl, "note": "one robot at a time can place on the tower"}),
        Place("stacked", "boxes on the tower", 0, lvl),
        Place(
            MISSION_CAPABILITY,
            "mission capability available",
            1,
            {**lvl, "note": "set by the capability view when merged; 1 when run alone"},
        ),
    ]
    gate_in, gate_out = _read(MISSION_CAPABILITY, {"boxes": BOXES}, {"available": BOXES})
    transitions = [
        Transition(
            "assign",
            "release boxes to the robots once stacking is possible",
            Duration.constant(0.0),
            gate_in,
            gate_out,
            metadata=lvl,
        ),
        Transition(
            "fetch",
            "locate, approach and pick up a box",
            Duration.normal(14.0, 4.0),
            {"robots": 1, "available": 1},
            {"carrying": 1},
            metadata={**lvl, "note": "reconstructed: N(14, 4)"},
        ),
        Transition(
            "stack",
            "Stack Box (t2)",
            Duration.normal(4.3, 1.0),
            {"carrying": 1, "tower_free": 1},
            {"stacked": 1, "robots": 1, "tower_free": 1},
            priority=1,
            metadata={**lvl, "note": "reconstructed T2: N(4.3, 1); fetch + stack is about 18.3 per box"},
        ),
    ]
    goal = Goal((TokenCondition("stacked", ">=", BOXES),), (), DEADLINE)
    return Net(
        "mission",
        places,
        (),
        transitions,
        goal,
        "fixed_priority",
        {"level": "mission", "units": "1 time unit = 10 s; deadline 60 = 10 min"},
    )


# system level: one robot's stacking cycle, broken into capability-backed actions
_SYSTEM_STEPS = (
    # id, name, duration, inputs, outputs, energy rate, note
    ("detect_box", "detect box", Duration.normal(3.0, 1.0), {"robots": 1, "available": 1}, {"seen": 1}, -0.7, "uses detection"),
    ("track_box", "track box", Duration.normal(3.0, 1.0), {"seen": 1}, {"tracked": 1}, -0.7, "uses tracking"),
    ("approach_box", "approach box", Duration.normal(5.0, 3.0), {"tracked": 1}, {"near": 1}, -1.1, "uses approach"),
    ("grasp_box", "grasp box", Duration.normal(3.0, 1.0), {"near": 1}, {"holding": 1}, -0.9, "uses manipulation"),
    (
        "align_box",
        "carry to the tower and align",
        Duration.normal(2.5, 0.8),
        {"holding": 1, "tower_free": 1},
        {"at_tower": 1, "placing": 1},
        -0.9,
        "claims the tower",
    ),
    (
        "release_box",
        "release box on the tower",
        Duration.normal(1.8, 0.5),
        {"at_tower": 1},
        {"stacked": 1, "robots": 1, "released": 1},
        -0.45,
        "robot is free again",
    ),
)


def system_net(robots: int = 1, energy: float = 100.0) -> Net:
    lvl = {"level": "system"}
    places = [
        Place("boxes", "green boxes not yet assigned", BOXES, lvl),
        Place("available", "boxes ready to detect", 0, lvl),
        Place("robots", "idle robots", robots, {**lvl, "note": "robot count R; sampled per run in Q1"}),
        Place("tower_free", "tower accepts a box", 1, lvl),
        Place("stacked", "boxes on the tower", 0, lvl),
        Place("placing", "a robot is placing", 0, {**lvl, "note": "inhibits approach: other robots wait while one places"}),
        Place("released", "placement finished", 0, lvl),
    ]
    for pid in ("seen", "tracked", "near", "holding", "at_tower"):
        places.append(Place(pid, pid.replace("_", " "), 0, lvl))
    for cap in CAPABILITIES:
        places.append(Place(cap, f"{cap} capability", 1, {**lvl, "note": "1 when run alone; the capability view sets it when merged"}))
    resources = [
        Resource(
            "energy",
            "shared energy budget (%)",
            energy,
            10.0,
            100.0,
            {**lvl, "note": "E >= 10%; initial level sampled U(40, 100) in Q1"},
        )
    ]
    gate_in = {**{c: 1 for c in CAPABILITIES}, "boxes": BOXES}
    gate_out = {**{c: 1 for c in CAPABILITIES}, "available": BOXES}
    transitions = [
        Transition("start", "start once every capability is available", Duration.constant(0.0), gate_in, gate_out, metadata=lvl)
    ]
    for tid, name, dur, ins, outs, rate, note in _SYSTEM_STEPS:
        transitions.append(
            Transition(
                tid,
                name,
                dur,
                ins,
                outs,
                ("placing",) if tid == "approach_box" else (),
                {"energy": rate},
                priority=1 if tid in ("align_box", "release_box") else 0,
                metadata={**lvl, "note": f"{note}; reconstructed duration and energy rate"},
            )
        )
    transitions.append(
        Transition(
            "clear_tower",
            "tower free for the next box",
            Duration.constant(0.0),
            {"placing": 1, "released": 1},
            {"tower_free": 1},
            priority=2,
            metadata=lvl,
        )
    )
    goal = Goal((TokenCondition("stacked", ">=", BOXES),), (), DEADLINE)
    return Net(
        "system",
        places,
        resources,
        transitions,
        goal,
        "fixed_priority",
        {"level": "system", "units": "1 time unit = 10 s; energy in % of capacity"},
    )


def capability_model(n_systems: int = 1) -> AvailabilityModel:
    """Devices of the four subsystems feeding the four system capabilities.

    The exact device-to-capability wiring is a reconstruction. Every
    combinator is ``all_of``, so the mission capability fails whenever any
    device fails.
    """
    devices = [
        Device("motors", 0.9),
        Device("encoders", 0.9),
        Device("imu", 0.9),
        Device("grip_actuator", 0.9),
        Device("lifter", 0.9),
        Device("pan_tilt", 0.9),
        Device("stereo_camera", 0.9),
        Device("mono_camera", 0.9),
    ]
    sub = "subsystem"
    caps = [
        Capability("locomotion", ("motors", "encoders", "imu"), "all_of", sub),
        Capability("gripper", ("grip_actuator", "lifter"), "all_of", sub),
        Capability("mast", ("pan_tilt",), "all_of", sub),
        Capability("camera", ("stereo_camera", "mono_camera"), "all_of", sub),
        Capability("detection", ("camera", "mast"), "all_of", "system"),
        Capability("tracking", ("camera", "mast", "locomotion"), "all_of", "system"),
        Capability("approach", ("locomotion", "camera"), "all_of", "system"),
        Capability("manipulation", ("gripper", "detection"), "all_of", "system"),
        Capability(MISSION_CAPABILITY, CAPABILITIES, "all_of", "mission"),
    ]
    return AvailabilityModel(devices, caps, MISSION_CAPABILITY, n_systems, "capability")


def fusion_map() -> FusionMap:
    places = [
        FusionGroup(cap, (("system", cap), ("capability", cap)), "capability") for cap in CAPABILITIES
    ]
    places.append(
        FusionGroup(
            MISSION_CAPABILITY,
            (("mission", MISSION_CAPABILITY), ("capability", MISSION_CAPABILITY)),
            "capability",
        )
    )
    return FusionMap(places=places, name="tower")


def q1_mission_sampling() -> SamplingSpec:
    return SamplingSpec([SamplingEntry(Target("initial_tokens", "robots"), Distribution("integer_uniform", (1, 4)), "robots")])


def q1_system_sampling() -> SamplingSpec:
    return SamplingSpec(
        [
            SamplingEntry(Target("initial_tokens", "robots"), Distribution("integer_uniform", (1, 4)), "robots"),
            SamplingEntry(Target("initial_level", "energy"), Distribution("uniform", (40.0, 100.0)), "energy"),
        ]
    )


def robots_fixed(n: int) -> SamplingSpec:
    """Sampling spec that pins the robot count (used for the robot sweep)."""
    return SamplingSpec([SamplingEntry(Target("initial_tokens", "robots"), Distribution("constant", (n,)), "robots")])


@dataclass
class CaseStudyBundle:
    mission: Net
    system: Net
    capability: Net
    model: AvailabilityModel
    reliability: dict
    fusion: FusionMap
    q1_mission: SamplingSpec
    q1_system: SamplingSpec
    files: dict = field(default_factory=dict)

    def nets(self) -> list[Net]:
        return [self.mission, self.system, self.capability]


def build_case_models() -> CaseStudyBundle:
    from .fileformat import serialize_fusion, serialize_model, serialize_net, serialize_sampling

    model = capability_model()
    reliability = {d.id: RELIABILITY for d in model.devices}
    bundle = CaseStudyBundle(
        mission=mission_net(),
        system=system_net(),
        capability=capability_net(model),
        model=model,
        reliability=reliability,
        fusion=fusion_map(),
        q1_mission=q1_mission_sampling(),
        q1_system=q1_system_sampling(),
    )
    bundle.files = {
        "mission.pnet": serialize_net(bundle.mission),
        "system.pnet": serialize_net(bundle.system),
        "capability.pnet": serialize_net(bundle.capability),
        "capability.rel": serialize_model(model, reliability),
        "fusion.map": serialize_fusion(bundle.fusion),
        "q1_mission.sampling": serialize_sampling(bundle.q1_mission),
        "q1_system.sampling": serialize_sampling(bundle.q1_system),
    }
    return bundle


def write_case_models(out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, text in sorted(build_case_models().files.items()):
        path = out / name
        path.write_text(text, encoding="utf-8", newline="\n")
        written.append(path)
    return written


def shipped_dir():
    """Directory of the model files installed with the package."""
    return _res.files("petrisim") / "models"


def shipped_path(name: str) -> Path:
    return Path(str(shipped_dir() / name))
