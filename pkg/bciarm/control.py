"""The two BCI control strategies and the sessions that exercise them.

Process control moves the effector 10 mm per command along the active axis.
LHIM moves backward, RHIM moves forward and two RESTs in a row switch to the
next axis. Goal selection turns a single command into a whole pick-and-place
plan. RHIM places the disk on the target with the greater x, LHIM on the other
one, and REST keeps the arm at home.

A session replays a script of stimuli through one of the strategies. The
classified labels come from the script itself or from a trained classifier
applied to a recording.

"""

import csv
import io
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Literal, Protocol, Sequence, TypeAlias

import numpy as np

import bciarm.classifier as classifier
import bciarm.kinematics as kinematics
import bciarm.signals as signals
import bciarm.vision as vision
from bciarm.classifier import UNDECIDED, Decision
from bciarm.signals import CLASSES, Label

logger = logging.getLogger(__name__)

Point: TypeAlias = tuple[float, float, float]
Axis: TypeAlias = Literal["x", "y", "z"]
Mode: TypeAlias = Literal["cued", "uncued"]
Strategy: TypeAlias = Literal["process_control", "goal_selection"]
Gripper: TypeAlias = Literal["none", "close", "open"]

AXES: tuple[Axis, ...] = ("x", "y", "z")
NEXT_AXIS: dict[Axis, Axis] = {"y": "z", "z": "x", "x": "y"}
STEP_MM = 10.0

HOME: Point = (0.0, 155.5, 284.3)
PROCESS_TARGET: Point = (0.0, 300.0, -49.0)
APPROACH_HEIGHT = 40.0

SCRIPT_VERSION = "v1"
SCRIPT_COLUMNS = (
    "index",
    "label",
    "intended",
    "classified",
    "onset_s",
    "duration_s",
    "inter_stimulus_s",
)


class ScriptError(ValueError):
    pass


class PlanRejected(Exception):
    def __init__(self, waypoint: str, reason: str):
        super().__init__(f"{waypoint}: {reason}")
        self.waypoint = waypoint
        self.reason = reason


# Process control


@dataclass(frozen=True, slots=True)
class ProcessControlState:
    effector: Point = HOME
    active_axis: Axis = "y"
    consecutive_rest_count: int = 0

    def __post_init__(self):
        if self.active_axis not in AXES:
            raise ValueError(f"unknown axis {self.active_axis!r}")
        if self.consecutive_rest_count not in (0, 1):
            raise ValueError("the rest counter is 0 or 1")


@dataclass(frozen=True, slots=True)
class Moved:
    axis: Axis
    delta: float
    effector: Point


@dataclass(frozen=True, slots=True)
class Held:
    rest_count: int
    undecided: bool = False


@dataclass(frozen=True, slots=True)
class AxisChanged:
    old: Axis
    new: Axis


@dataclass(frozen=True, slots=True)
class Rejected:
    axis: Axis
    delta: float
    attempted: Point
    reason: str


ProcessAction: TypeAlias = Moved | Held | AxisChanged | Rejected


class Reachable(Protocol):
    def __contains__(self, x_e: Sequence[float]) -> bool: ...


def process_control_step(
    state: ProcessControlState, label: Decision, workspace: Reachable
) -> tuple[ProcessControlState, ProcessAction]:
    match label:
        case "LHIM" | "RHIM":
            delta = -STEP_MM if label == "LHIM" else STEP_MM
            i = AXES.index(state.active_axis)
            moved = list(state.effector)
            moved[i] = round(moved[i] + delta, 9)
            attempted: Point = (moved[0], moved[1], moved[2])
            if attempted not in workspace:
                logger.info("rejected move to %s", attempted)
                reason = "outside workspace"
                if isinstance(workspace, kinematics.Workspace):
                    reason = workspace.check(attempted).reason
                return state, Rejected(state.active_axis, delta, attempted, reason)
            return (
                replace(state, effector=attempted, consecutive_rest_count=0),
                Moved(state.active_axis, delta, attempted),
            )
        case "REST":
            if state.consecutive_rest_count == 1:
                new = NEXT_AXIS[state.active_axis]
                return (
                    replace(state, active_axis=new, consecutive_rest_count=0),
                    AxisChanged(state.active_axis, new),
                )
            return replace(state, consecutive_rest_count=1), Held(1)
        case "UNDECIDED":
            return state, Held(state.consecutive_rest_count, undecided=True)
        case _:
            raise ScriptError(f"unknown label {label!r}")


# Goal selection


@dataclass(frozen=True, slots=True)
class Waypoint:
    name: str
    position: Point
    gripper: Gripper
    solution: kinematics.IkSolution


@dataclass(frozen=True, slots=True)
class TaskPlan:
    waypoints: tuple[Waypoint, ...] = ()

    def __len__(self) -> int:
        return len(self.waypoints)

    def positions(self) -> list[Point]:
        return [w.position for w in self.waypoints]

    def summary(self) -> str:
        return " ".join(
            f"{w.name}({w.position[0]:.1f},{w.position[1]:.1f},{w.position[2]:.1f})"
            + ("" if w.gripper == "none" else f"[{w.gripper}]")
            for w in self.waypoints
        )


def plan_pick_and_place(
    geom: kinematics.RobotGeometry,
    disk: Sequence[float],
    target: Sequence[float],
    approach_height: float = APPROACH_HEIGHT,
    home: Point = HOME,
) -> TaskPlan:
    """Reach for the disk, put it on the target and return home.

    Every waypoint is solved on the elbow-up branch. The gripper closes and
    opens in place, each taking one waypoint.
    """
    table = -geom.base_height
    grasp_z = table + vision.DISK_HEIGHT
    above_z = grasp_z + approach_height
    dx, dy = float(disk[0]), float(disk[1])
    tx, ty = float(target[0]), float(target[1])

    route: list[tuple[str, Point, Gripper]] = [
        ("home", home, "none"),
        ("above-disk", (dx, dy, above_z), "none"),
        ("disk", (dx, dy, grasp_z), "none"),
        ("close", (dx, dy, grasp_z), "close"),
        ("above-disk", (dx, dy, above_z), "none"),
        ("above-target", (tx, ty, above_z), "none"),
        ("target", (tx, ty, grasp_z), "none"),
        ("open", (tx, ty, grasp_z), "open"),
        ("home", home, "none"),
    ]

    waypoints = []
    for name, position, gripper in route:
        try:
            solution = kinematics.solve_ik(geom, position, "elbow-up")
        except kinematics.IkError as e:
            raise PlanRejected(name, str(e)) from e
        waypoints.append(Waypoint(name, position, gripper, solution))
    return TaskPlan(tuple(waypoints))


@dataclass(frozen=True, slots=True)
class Dispatched:
    label: Label
    target: tuple[float, float]
    plan: TaskPlan


@dataclass(frozen=True, slots=True)
class Stayed:
    label: Decision
    plan: TaskPlan = TaskPlan()


@dataclass(frozen=True, slots=True)
class DispatchRejected:
    """The chosen target could not be planned; the arm stays home."""

    label: Label
    waypoint: str
    reason: str


GoalAction: TypeAlias = Dispatched | Stayed | DispatchRejected


def goal_selection_dispatch(
    label: Decision,
    scene: vision.Scene,
    geom: kinematics.RobotGeometry | None = None,
    approach_height: float = APPROACH_HEIGHT,
) -> GoalAction:
    if label not in ("LHIM", "RHIM"):
        if label not in ("REST", UNDECIDED):
            raise ScriptError(f"unknown label {label!r}")
        return Stayed(label)

    a, b = scene.target_left, scene.target_right
    if a[0] == b[0]:
        raise vision.TargetTie(f"targets share x = {a[0]} mm")
    left, right = (a, b) if a[0] < b[0] else (b, a)
    target = right if label == "RHIM" else left
    geom = geom or kinematics.RobotGeometry.default()
    return Dispatched(label, target, plan_pick_and_place(geom, scene.disk, target, approach_height))


# Scripts


@dataclass(frozen=True, slots=True)
class Stimulus:
    index: int
    label: Label | None = None
    intended: Label | None = None
    classified: Decision | None = None
    onset_s: float = 0.0
    duration_s: float = 4.0
    inter_stimulus_s: float = 0.0

    @property
    def expected(self) -> Label | None:
        return self.label if self.label is not None else self.intended


@dataclass(frozen=True, slots=True)
class SessionScript:
    stimuli: tuple[Stimulus, ...]
    mode: Mode
    strategy: Strategy

    def __post_init__(self):
        object.__setattr__(self, "stimuli", tuple(self.stimuli))
        if self.mode not in ("cued", "uncued"):
            raise ScriptError(f"unknown mode {self.mode!r}")
        if self.strategy not in ("process_control", "goal_selection"):
            raise ScriptError(f"unknown strategy {self.strategy!r}")
        for s in self.stimuli:
            if self.mode == "cued" and s.label is None:
                raise ScriptError(f"stimulus {s.index}: cued stimuli need a presented label")
            if self.mode == "uncued" and s.intended is None:
                raise ScriptError(f"stimulus {s.index}: uncued stimuli need an intended label")
            for value in (s.label, s.intended):
                if value is not None and value not in CLASSES:
                    raise ScriptError(f"stimulus {s.index}: unknown label {value!r}")
            if s.classified is not None and s.classified not in (*CLASSES, UNDECIDED):
                raise ScriptError(f"stimulus {s.index}: unknown label {s.classified!r}")

    def __len__(self) -> int:
        return len(self.stimuli)


PROTOCOL = {
    "baseline_s": 15.0,
    "stimulus_s": 4.0,
    "process_control": (2.0, 4.0),
    "goal_selection": (27.0, 29.0),
}


def schedule_stimuli(
    mode: Mode,
    counts: tuple[int, int, int] = (10, 10, 10),
    seed: int = 0,
    strategy: Strategy = "process_control",
) -> SessionScript:
    """Random order with exact per-class counts (LHIM, REST, RHIM)."""
    if any(c < 0 for c in counts):
        raise ScriptError(f"counts must be non-negative, got {counts}")
    rng = np.random.default_rng(seed)
    labels = [c for c, n in zip(CLASSES, counts) for _ in range(n)]
    order = [labels[i] for i in rng.permutation(len(labels))]
    lo, hi = PROTOCOL[strategy]

    stimuli = []
    onset = PROTOCOL["baseline_s"]
    for index, label in enumerate(order):
        gap = round(float(rng.uniform(lo, hi)), 3)
        stimuli.append(
            Stimulus(
                index,
                label=label if mode == "cued" else None,
                intended=label if mode == "uncued" else None,
                onset_s=round(onset, 3),
                duration_s=PROTOCOL["stimulus_s"],
                inter_stimulus_s=gap,
            )
        )
        onset += PROTOCOL["stimulus_s"] + gap
    return SessionScript(tuple(stimuli), mode, strategy)


def format_script(script: SessionScript) -> str:
    out = io.StringIO()
    out.write(
        f"# session-script {SCRIPT_VERSION} mode={script.mode} strategy={script.strategy}\n"
    )
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(SCRIPT_COLUMNS)
    for s in script.stimuli:
        writer.writerow(
            [
                s.index,
                s.label or "",
                s.intended or "",
                s.classified or "",
                repr(s.onset_s),
                repr(s.duration_s),
                repr(s.inter_stimulus_s),
            ]
        )
    return out.getvalue()


def parse_script(text: str) -> SessionScript:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# session-script"):
        raise ScriptError("missing '# session-script' header")
    words = lines[0][1:].split()
    if len(words) < 2 or words[1] != SCRIPT_VERSION:
        raise ScriptError(f"unsupported script version in {lines[0]!r}")
    settings = dict(w.split("=", 1) for w in words[2:] if "=" in w)
    try:
        mode, strategy = settings["mode"], settings["strategy"]
    except KeyError as e:
        raise ScriptError(f"header is missing {e.args[0]}") from None

    reader = csv.DictReader(lines[1:])
    if tuple(reader.fieldnames or ()) != SCRIPT_COLUMNS:
        raise ScriptError(f"expected columns {','.join(SCRIPT_COLUMNS)}")
    stimuli = []
    for row in reader:
        try:
            stimuli.append(
                Stimulus(
                    int(row["index"]),
                    row["label"] or None,
                    row["intended"] or None,
                    row["classified"] or None,
                    float(row["onset_s"]),
                    float(row["duration_s"]),
                    float(row["inter_stimulus_s"]),
                )
            )
        except (TypeError, ValueError) as e:
            raise ScriptError(f"row {row}: {e}") from None
    return SessionScript(tuple(stimuli), mode, strategy)


def write_script(script: SessionScript, path: Path) -> None:
    with open(path, "w") as f:
        f.write(format_script(script))


def read_script(path: Path) -> SessionScript:
    with open(path) as f:
        return parse_script(f.read())


# Outcome sources


class OutcomeSource(Protocol):
    def outcome(self, stimulus: Stimulus) -> Decision: ...


class ScriptOutcomes:
    """Classified labels written in the script."""

    def outcome(self, stimulus: Stimulus) -> Decision:
        if stimulus.classified is None:
            raise ScriptError(f"stimulus {stimulus.index} has no classified label")
        return stimulus.classified


class ModelOutcomes:
    """Classify the recording at each stimulus onset with a trained model."""

    def __init__(self, model: classifier.ClassifierModel, recording: signals.SignalBlock):
        self.model = model
        self.recording = recording

    def outcome(self, stimulus: Stimulus) -> Decision:
        epochs = signals.epoch_signals(
            self.recording, [stimulus.onset_s], tmax=classifier.MIN_EPOCH_SECONDS
        )
        return classifier.classify_epoch(self.model, epochs[0]).label


# Sessions


@dataclass(frozen=True, slots=True)
class SessionMetrics:
    """Percentages in [0, 100]; a metric is None when the session does not
    define it."""

    n_stimuli: int
    percent_correct: float | None = None
    distance_improvement_rate: float | None = None
    coincidence_rate: float | None = None
    final_distance: float | None = None

    def as_rows(self) -> list[tuple[str, str]]:
        def show(v):
            return "" if v is None else f"{v:.3f}"

        return [
            ("n_stimuli", str(self.n_stimuli)),
            ("percent_correct", show(self.percent_correct)),
            ("distance_improvement_rate", show(self.distance_improvement_rate)),
            ("coincidence_rate", show(self.coincidence_rate)),
            ("final_distance", show(self.final_distance)),
        ]


@dataclass(frozen=True, slots=True)
class EventRecord:
    index: int
    expected: str
    classified: str
    action: str
    detail: str
    running_metric: float

    def row(self) -> list[str]:
        return [
            str(self.index),
            self.expected,
            self.classified,
            self.action,
            self.detail,
            f"{self.running_metric:.3f}",
        ]


EVENT_COLUMNS = ("index", "expected", "classified", "action", "detail", "running_metric")


def format_event_log(events: Sequence[EventRecord]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(EVENT_COLUMNS)
    for e in events:
        writer.writerow(e.row())
    return out.getvalue()


@dataclass(frozen=True, slots=True)
class SessionResult:
    metrics: SessionMetrics
    events: tuple[EventRecord, ...]
    final_state: ProcessControlState | None = None

    def event_log(self) -> str:
        return format_event_log(self.events)


def _rounded(point: Sequence[float]) -> tuple[float, ...]:
    return tuple(round(float(v), 3) for v in point)


def _describe(action: ProcessAction | GoalAction) -> tuple[str, str]:
    match action:
        case Moved(axis, delta, effector):
            return "moved", f"{axis}{delta:+.0f} -> {_rounded(effector)}"
        case Held(count, undecided):
            return "held", "undecided" if undecided else f"rest {count}"
        case AxisChanged(old, new):
            return "axis", f"{old} -> {new}"
        case Rejected(axis, delta, attempted, reason):
            return "rejected", f"{axis}{delta:+.0f} -> {_rounded(attempted)}: {reason}"
        case Dispatched(_, target, plan):
            return "dispatched", f"target {_rounded(target)}; {plan.summary()}"
        case Stayed():
            return "stayed", "home"
        case DispatchRejected(_, waypoint, reason):
            return "rejected", f"{waypoint}: {reason}"
    raise TypeError(f"unknown action {action!r}")


def _percent(hits: int, n: int) -> float:
    return 100.0 * hits / n if n else 0.0


def run_session(
    script: SessionScript,
    outcomes: OutcomeSource | None = None,
    *,
    geom: kinematics.RobotGeometry | None = None,
    scene: vision.Scene | None = None,
    start: ProcessControlState | None = None,
    target: Point = PROCESS_TARGET,
) -> SessionResult:
    """Replay the script and score it.

    Cued sessions score classified against presented labels. Uncued process
    control scores the stimuli that brought the effector closer to `target` or
    switched back to the y-axis. Uncued goal selection scores classified
    against intended labels.
    """
    outcomes = outcomes or ScriptOutcomes()
    geom = geom or kinematics.RobotGeometry.default()
    n = len(script)
    hits = 0
    events = []

    if script.strategy == "process_control":
        workspace = kinematics.Workspace(geom)
        state = start or ProcessControlState()
        goal = np.array(target)
        for k, stimulus in enumerate(script.stimuli):
            label = outcomes.outcome(stimulus)
            before = float(np.linalg.norm(np.array(state.effector) - goal))
            state, action = process_control_step(state, label, workspace)
            if script.mode == "cued":
                hits += label == stimulus.label
            else:
                after = float(np.linalg.norm(np.array(state.effector) - goal))
                match action:
                    case Moved():
                        hits += after < before
                    case AxisChanged(new="y"):
                        hits += 1
            name, detail = _describe(action)
            events.append(
                EventRecord(
                    stimulus.index,
                    stimulus.expected or "",
                    label,
                    name,
                    detail,
                    _percent(hits, k + 1),
                )
            )
            logger.debug("stimulus %d: %s %s", stimulus.index, name, detail)

        final = float(np.linalg.norm(np.array(state.effector) - goal))
        if script.mode == "cued":
            metrics = SessionMetrics(n, percent_correct=_percent(hits, n), final_distance=final)
        else:
            metrics = SessionMetrics(
                n, distance_improvement_rate=_percent(hits, n), final_distance=final
            )
        return SessionResult(metrics, tuple(events), state)

    if scene is None:
        raise ScriptError("goal selection needs a scene")
    for k, stimulus in enumerate(script.stimuli):
        label = outcomes.outcome(stimulus)
        try:
            action = goal_selection_dispatch(label, scene, geom)
        except PlanRejected as e:
            logger.info("stimulus %d: plan rejected at %s", stimulus.index, e.waypoint)
            action = DispatchRejected(label, e.waypoint, e.reason)
        hits += label == stimulus.expected
        name, detail = _describe(action)
        events.append(
            EventRecord(
                stimulus.index,
                stimulus.expected or "",
                label,
                name,
                detail,
                _percent(hits, k + 1),
            )
        )
        logger.debug("stimulus %d: %s", stimulus.index, name)

    if script.mode == "cued":
        metrics = SessionMetrics(n, percent_correct=_percent(hits, n))
    else:
        metrics = SessionMetrics(n, coincidence_rate=_percent(hits, n))
    return SessionResult(metrics, tuple(events))
