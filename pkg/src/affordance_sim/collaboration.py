"""Intent representation, the four-branch robot decision procedure, and the
bi-directional assistance protocol."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import UnknownQueryRef
from .perception import DetectedObjectSet
from .planner import Trajectory, replan_target
from .world import ObjectState, SceneObject


class AgentId(str, enum.Enum):
    H = "H"
    R = "R"

    @property
    def other(self) -> "AgentId":
        return AgentId.R if self is AgentId.H else AgentId.H


class ExperimentMode(str, enum.Enum):
    NONCOMM = "noncomm"
    ROBOT_TO_HUMAN = "r2h"
    SHARED = "shared"


@dataclass(frozen=True)
class Intent:
    """An agent's current target object in the shared world frame."""

    agent: AgentId
    object_id: int
    position: np.ndarray
    time: float

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, float))


class QueryKind(str, enum.Enum):
    MOVE_OBJECT_INTO_ROBOT_AREA = "move_object_into_robot_area"
    CHECK_REACHABLE = "check_reachable"


class ResponseOutcome(str, enum.Enum):
    WILL_DO = "will_do"
    DONE = "done"
    CANNOT_REACH = "cannot_reach"
    DECLINE = "decline"


class TaskAction(str, enum.Enum):
    PICKED = "picked"
    PLACED = "placed"
    BINNED = "binned"


@dataclass(frozen=True)
class IntentUpdate:
    """Current target of the sender; intent None announces a cleared target."""

    sender: AgentId
    intent: Intent | None

    type_name = "intent_update"

    def payload(self) -> dict:
        if self.intent is None:
            return {"agent": self.sender.value, "object_id": None,
                    "position": None}
        return {"agent": self.intent.agent.value,
                "object_id": self.intent.object_id,
                "position": [float(x) for x in self.intent.position]}


@dataclass(frozen=True)
class AffordanceUpdate:
    sender: AgentId
    added_voxels: tuple          # linear voxel ids, sorted

    type_name = "affordance_update"

    def payload(self) -> dict:
        return {"agent": self.sender.value,
                "added_voxels": [int(v) for v in self.added_voxels]}


@dataclass(frozen=True)
class AssistQuery:
    sender: AgentId
    query_id: int
    kind: QueryKind
    object_id: int
    drop_region: tuple = ()      # suggested voxel index triples, may be empty

    type_name = "assist_query"

    def payload(self) -> dict:
        return {"query_id": self.query_id, "kind": self.kind.value,
                "object_id": self.object_id,
                "drop_region": [list(map(int, v)) for v in self.drop_region]}


@dataclass(frozen=True)
class AssistResponse:
    sender: AgentId
    query_id: int
    outcome: ResponseOutcome

    type_name = "assist_response"

    def payload(self) -> dict:
        return {"query_id": self.query_id, "outcome": self.outcome.value}


@dataclass(frozen=True)
class TaskEvent:
    sender: AgentId
    action: TaskAction
    object_id: int

    type_name = "task_event"

    def payload(self) -> dict:
        return {"action": self.action.value, "object_id": self.object_id}


CollabMessage = (IntentUpdate, AffordanceUpdate, AssistQuery, AssistResponse,
                 TaskEvent)


class DecisionKind(str, enum.Enum):
    EXECUTE = "execute"
    REPLAN = "replan"
    QUERY_MOVE = "query_move"
    QUERY_REACHABLE = "query_reachable"
    IDLE = "idle"


@dataclass(frozen=True)
class RobotDecision:
    kind: DecisionKind
    trajectory: Trajectory | None = None
    new_target: int | None = None
    object_id: int | None = None


def decide(trajectory: Trajectory | None, o_r: Intent, o_h: Intent | None,
           a_h, O: DetectedObjectSet,
           objects: dict[int, SceneObject] | None = None,
           exclude: frozenset = frozenset(),
           robot_xy=(0.0, 0.0)) -> RobotDecision:
    """Four-branch decision for the robot's current target.

    branch 1: trajectory found and targets differ      -> execute it
    branch 2: trajectory found but the human wants the
              same object                              -> yield, re-plan from O
    branch 3: no trajectory, target human-affordable   -> ask human to move it
    branch 4: no trajectory, not human-affordable      -> ask if it is reachable

    a_h is the robot's view of the human-affordable area (anything with a
    contains(point) method). Total and deterministic.
    """
    same_target = o_h is not None and o_h.object_id == o_r.object_id
    if trajectory is not None:
        if not same_target:
            return RobotDecision(DecisionKind.EXECUTE, trajectory=trajectory)
        new = replan_target(O, objects, set(exclude) | {o_r.object_id},
                            robot_xy)
        return RobotDecision(DecisionKind.REPLAN, new_target=new)
    if _affordable(a_h, o_r.position):
        return RobotDecision(DecisionKind.QUERY_MOVE, object_id=o_r.object_id)
    return RobotDecision(DecisionKind.QUERY_REACHABLE, object_id=o_r.object_id)


def _affordable(a_h, position) -> bool:
    try:
        return bool(a_h.contains(position))
    except Exception:
        # out-of-bounds target cannot be inside the affordable set
        return False


def estimate_human_intent(hand_position, O: DetectedObjectSet,
                          objects: dict[int, SceneObject] | None,
                          time: float,
                          engagement_radius: float = 0.5) -> Intent | None:
    """Distance-based stand-in for gaze/hand trajectory intent prediction:
    the nearest un-binned detected object within the engagement radius."""
    hand = np.asarray(hand_position, float)
    best: tuple[float, int] | None = None
    for oid in O.ids():
        if objects is not None:
            obj = objects.get(oid)
            if obj is None or obj.state is ObjectState.BINNED:
                continue
        d = float(np.linalg.norm(O.position(oid) - hand))
        if d > engagement_radius:
            continue
        if best is None or (d, oid) < best:
            best = (d, oid)
    if best is None:
        return None
    return Intent(AgentId.H, best[1], O.position(best[1]), time)


def mode_filter(mode: ExperimentMode, msg, sender: AgentId) -> bool:
    """Whether a message may cross between agents in the given mode."""
    if mode is ExperimentMode.NONCOMM:
        return False
    if mode is ExperimentMode.ROBOT_TO_HUMAN:
        return sender is AgentId.R and isinstance(
            msg, (IntentUpdate, AffordanceUpdate))
    return True


class FollowUp(str, enum.Enum):
    REPLAN_TARGET = "replan_target"      # object relocated; plan again from O
    MARK_BLOCKED = "mark_blocked"        # give up on this object
    KEEP_WAITING = "keep_waiting"        # human accepted; await completion


def handle_response(pending: AssistQuery, response: AssistResponse) -> FollowUp:
    """Robot follow-up for a response to one of its outstanding queries."""
    if response.query_id != pending.query_id:
        raise UnknownQueryRef(
            f"response references query {response.query_id}, "
            f"pending is {pending.query_id}")
    if response.outcome is ResponseOutcome.DONE:
        return FollowUp.REPLAN_TARGET
    if response.outcome is ResponseOutcome.WILL_DO:
        return FollowUp.KEEP_WAITING
    return FollowUp.MARK_BLOCKED


@dataclass
class QueryTracker:
    """Outstanding-query bookkeeping with monotonically increasing ids."""

    timeout: float = 30.0
    _next_id: int = 0
    outstanding: dict[int, tuple[AssistQuery, float]] = field(
        default_factory=dict)

    def new_id(self) -> int:
        qid = self._next_id
        self._next_id += 1
        return qid

    def register(self, query: AssistQuery, now: float) -> None:
        self.outstanding[query.query_id] = (query, now)

    def get(self, query_id: int) -> AssistQuery:
        if query_id not in self.outstanding:
            raise UnknownQueryRef(f"no outstanding query {query_id}")
        return self.outstanding[query_id][0]

    def resolve(self, query_id: int) -> None:
        if query_id not in self.outstanding:
            raise UnknownQueryRef(f"no outstanding query {query_id}")
        del self.outstanding[query_id]

    def timed_out(self, now: float) -> list[int]:
        return [qid for qid, (_, t0) in sorted(self.outstanding.items())
                if now - t0 >= self.timeout]
