"""Agent controllers: the autonomous robot state machine executing the
four-branch decision procedure, and the human agent driven by a scripted
policy or live UI commands.

Both tick functions mutate their agent state and the world, log events
through the simulation context, and queue outbound messages on the context's
message queue (delivered next tick, after mode filtering). The robot ticks
before the human every step; the order is fixed because it decides same-tick
races for an object both agents want.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .affordance import pose_reaches, record_interaction
from .collaboration import (AgentId, AssistQuery, AssistResponse,
                            DecisionKind, FollowUp, Intent, IntentUpdate,
                            QueryKind, ResponseOutcome, TaskAction, TaskEvent,
                            decide, estimate_human_intent, handle_response)
from .errors import CommandRejected, OutOfBounds
from .geometry import SE2, rot_z
from .planner import plan, replan_target
from .world import ObjectState

ARRIVE_TOL = 1e-6
APPROACH_DISTANCE = 0.35
CROUCH_RANGE = (0.6, 1.6)
HAND_REST_OFFSET = np.array([0.3, 0.0, -0.25])
DROP_REGION_SIZE = 20


class RobotPhase(str, enum.Enum):
    IDLE = "idle"
    PLANNING = "planning"
    MOVING = "moving"
    MANIPULATING = "manipulating"
    WAITING_ON_HUMAN = "waiting_on_human"


@dataclass
class RobotState:
    base_pose: SE2
    arm_q: np.ndarray
    phase: RobotPhase = RobotPhase.IDLE
    held: int | None = None
    blocked: set[int] = field(default_factory=set)
    intent: Intent | None = None
    trajectory: object | None = None
    waypoint_idx: int = 0
    manip_timer: float = 0.0
    waiting_query: int | None = None
    carrying_to_bin: bool = False

    def gripper_position(self) -> np.ndarray:
        return self.base_pose.as_transform().apply(np.array([0.25, 0.0, 0.5]))


def _set_robot_intent(rs: RobotState, sim, object_id: int | None) -> None:
    prev = rs.intent.object_id if rs.intent else None
    if object_id is None:
        rs.intent = None
    else:
        pos = sim.O.position(object_id) if object_id in sim.O \
            else sim.objects[object_id].position
        rs.intent = Intent(AgentId.R, object_id, pos, sim.time)
    if prev != object_id:
        sim.log.event("intent_change", sim.tick, sim.time, agent="R",
                      object_id=object_id)
        sim.queue_message(IntentUpdate(AgentId.R, rs.intent))


def suggest_drop_region(cap, grid, position, k: int = DROP_REGION_SIZE):
    """k nearest robot-reachable Free voxels to a position, as index triples."""
    reach = cap.reachable_linear_ids()
    if len(reach) == 0:
        return ()
    nx, ny, nz = grid.dims
    ix = reach // (ny * nz)
    iy = (reach // nz) % ny
    iz = reach % nz
    free = ~grid.occupied[ix, iy, iz]
    reach, ix, iy, iz = reach[free], ix[free], iy[free], iz[free]
    centers = grid.origin + (np.stack([ix, iy, iz], axis=1) + 0.5) \
        * grid.resolution
    d = np.linalg.norm(centers - np.asarray(position, float), axis=1)
    order = np.lexsort((reach, d))[:k]
    return tuple((int(ix[i]), int(iy[i]), int(iz[i])) for i in order)


def robot_tick(rs: RobotState, sim, dt: float) -> None:
    if rs.phase is RobotPhase.IDLE:
        target = replan_target(sim.O, sim.objects, rs.blocked,
                               rs.base_pose.xy())
        if target is not None:
            _set_robot_intent(rs, sim, target)
            rs.phase = RobotPhase.PLANNING
    elif rs.phase is RobotPhase.PLANNING:
        _robot_planning(rs, sim)
    elif rs.phase is RobotPhase.MOVING:
        _robot_move(rs, sim, dt)
    elif rs.phase is RobotPhase.MANIPULATING:
        rs.manip_timer -= dt
        if rs.manip_timer <= 1e-9:
            _robot_finish_manipulation(rs, sim)
    elif rs.phase is RobotPhase.WAITING_ON_HUMAN:
        _robot_check_timeout(rs, sim)
    if rs.held is not None:
        sim.objects[rs.held].position = rs.gripper_position()


def _robot_planning(rs: RobotState, sim) -> None:
    if rs.carrying_to_bin:
        _plan_to_bin(rs, sim)
        return
    tried: set[int] = set()
    for _ in range(len(sim.objects) + 1):
        if rs.intent is None:
            rs.phase = RobotPhase.IDLE
            return
        # always plan against the latest fused estimate of the target
        if rs.intent.object_id in sim.O:
            rs.intent = Intent(AgentId.R, rs.intent.object_id,
                               sim.O.position(rs.intent.object_id), sim.time)
        try:
            traj = plan(sim.grid, sim.cap, sim.nav, rs.base_pose,
                        rs.intent.position, rs.intent.object_id)
        except OutOfBounds:
            traj = None
        decision = decide(traj, rs.intent, sim.robot_o_h_belief,
                          sim.robot_a_h_view, sim.O, sim.objects,
                          exclude=frozenset(rs.blocked | tried),
                          robot_xy=rs.base_pose.xy())
        if decision.kind is DecisionKind.EXECUTE:
            rs.trajectory = decision.trajectory
            rs.waypoint_idx = 0
            rs.phase = RobotPhase.MOVING
            sim.log.event("plan", sim.tick, sim.time,
                          target=rs.intent.object_id,
                          cost=round(decision.trajectory.cost, 9))
            return
        if decision.kind is DecisionKind.REPLAN:
            tried.add(rs.intent.object_id)
            _set_robot_intent(rs, sim, decision.new_target)
            if decision.new_target is None:
                rs.phase = RobotPhase.IDLE
                return
            continue
        kind = (QueryKind.MOVE_OBJECT_INTO_ROBOT_AREA
                if decision.kind is DecisionKind.QUERY_MOVE
                else QueryKind.CHECK_REACHABLE)
        drop = suggest_drop_region(sim.cap, sim.grid, rs.intent.position) \
            if kind is QueryKind.MOVE_OBJECT_INTO_ROBOT_AREA else ()
        query = AssistQuery(AgentId.R, sim.tracker.new_id(), kind,
                            rs.intent.object_id, drop)
        sim.tracker.register(query, sim.time)
        sim.queue_message(query)
        rs.waiting_query = query.query_id
        rs.phase = RobotPhase.WAITING_ON_HUMAN
        return
    _set_robot_intent(rs, sim, None)
    rs.phase = RobotPhase.IDLE


def _plan_to_bin(rs: RobotState, sim) -> None:
    obj = sim.objects[rs.held]
    target_bin = sim.bins_by_category[obj.category]
    try:
        traj = plan(sim.grid, sim.cap, sim.nav, rs.base_pose,
                    target_bin.position, -1)
    except OutOfBounds:
        traj = None
    if traj is None:
        # bin unreachable: put the object back and give up on it
        obj.put_down(obj.position)
        sim.log.event("task", sim.tick, sim.time, action="placed", agent="R",
                      object_id=obj.id,
                      position=[round(float(x), 6) for x in obj.position])
        sim.queue_message(TaskEvent(AgentId.R, TaskAction.PLACED, obj.id))
        rs.blocked.add(obj.id)
        rs.held = None
        rs.carrying_to_bin = False
        _set_robot_intent(rs, sim, None)
        rs.phase = RobotPhase.IDLE
        return
    rs.trajectory = traj
    rs.waypoint_idx = 0
    rs.phase = RobotPhase.MOVING
    sim.log.event("plan", sim.tick, sim.time, target=-1,
                  cost=round(traj.cost, 9))


def _robot_move(rs: RobotState, sim, dt: float) -> None:
    budget = sim.config.robot_speed * dt
    pos = np.array([rs.base_pose.x, rs.base_pose.y])
    heading = rs.base_pose.theta
    waypoints = rs.trajectory.waypoints
    while budget > 0 and rs.waypoint_idx < len(waypoints):
        wp = waypoints[rs.waypoint_idx]
        d = np.array([wp.x, wp.y]) - pos
        dist = float(np.hypot(*d))
        if dist <= budget + ARRIVE_TOL:
            pos = np.array([wp.x, wp.y])
            heading = wp.theta
            budget -= dist
            rs.waypoint_idx += 1
        else:
            pos = pos + d / dist * budget
            heading = float(np.arctan2(d[1], d[0]))
            budget = 0.0
    rs.base_pose = SE2(float(pos[0]), float(pos[1]), heading)
    if rs.waypoint_idx >= len(waypoints):
        rs.base_pose = rs.trajectory.terminal
        rs.manip_timer = sim.config.manipulation_delay
        rs.phase = RobotPhase.MANIPULATING


def _robot_finish_manipulation(rs: RobotState, sim) -> None:
    if rs.held is None:
        obj = sim.objects.get(rs.intent.object_id) if rs.intent else None
        if (obj is None or obj.state is not ObjectState.FREE):
            _set_robot_intent(rs, sim, None)
            rs.phase = RobotPhase.IDLE
            return
        if pose_reaches(sim.cap, sim.grid, rs.base_pose, obj.position) \
                <= sim.cap.w_threshold:
            # object moved since planning; try again from the new estimate
            rs.phase = RobotPhase.PLANNING
            return
        obj.pick_up("R")
        rs.held = obj.id
        rs.carrying_to_bin = True
        sim.log.event("task", sim.tick, sim.time, action="picked", agent="R",
                      object_id=obj.id)
        sim.queue_message(TaskEvent(AgentId.R, TaskAction.PICKED, obj.id))
        rs.phase = RobotPhase.PLANNING
    else:
        obj = sim.objects[rs.held]
        target_bin = sim.bins_by_category[obj.category]
        sim.deposit(obj, target_bin.position, AgentId.R)
        rs.held = None
        rs.carrying_to_bin = False
        _set_robot_intent(rs, sim, None)
        rs.phase = RobotPhase.IDLE


def _robot_check_timeout(rs: RobotState, sim) -> None:
    if rs.waiting_query is None:
        rs.phase = RobotPhase.IDLE
        return
    if rs.waiting_query in sim.tracker.timed_out(sim.time):
        query = sim.tracker.get(rs.waiting_query)
        sim.tracker.resolve(rs.waiting_query)
        sim.log.event("query_timeout", sim.tick, sim.time,
                      query_id=rs.waiting_query)
        rs.blocked.add(query.object_id)
        rs.waiting_query = None
        _set_robot_intent(rs, sim, None)
        rs.phase = RobotPhase.IDLE


def robot_on_response(rs: RobotState, sim, response: AssistResponse) -> None:
    """Routed by the loop when an AssistResponse is delivered to the robot."""
    pending = sim.tracker.get(response.query_id)
    follow = handle_response(pending, response)
    if follow is FollowUp.KEEP_WAITING:
        return
    sim.tracker.resolve(response.query_id)
    rs.waiting_query = None
    if follow is FollowUp.REPLAN_TARGET:
        rs.phase = RobotPhase.PLANNING
    else:
        rs.blocked.add(pending.object_id)
        _set_robot_intent(rs, sim, None)
        rs.phase = RobotPhase.IDLE


class HumanPhase(str, enum.Enum):
    IDLE = "idle"
    WALKING = "walking"
    PICKING = "picking"
    PLACING = "placing"


class PolicyId(str, enum.Enum):
    DILIGENT = "diligent"
    DECLINING = "declining"
    INDEPENDENT = "independent"


@dataclass
class HumanState:
    chest: np.ndarray
    heading: float
    standing_z: float
    speed: float
    reach_semi_axes: np.ndarray
    control: str = "scripted"                    # "scripted" | "live"
    hand: np.ndarray = None
    phase: HumanPhase = HumanPhase.IDLE
    held: int | None = None
    intent: Intent | None = None
    blocked: set[int] = field(default_factory=set)
    walk_goal: np.ndarray | None = None          # xy
    after_walk: tuple | None = None              # ("pick", oid) | ("place", pos)
    action_timer: float = 0.0
    action: tuple | None = None
    pending_queries: deque = field(default_factory=deque)
    active_query: AssistQuery | None = None
    a_r_view: set[int] = field(default_factory=set)   # robot-affordable voxels
    robot_intent_display: Intent | None = None
    commands: deque = field(default_factory=deque)

    def __post_init__(self):
        self.chest = np.asarray(self.chest, float)
        if self.hand is None:
            self.hand = self._rest_hand()

    def _rest_hand(self) -> np.ndarray:
        return self.chest + rot_z(self.heading) @ HAND_REST_OFFSET

    def reach_contains(self, p) -> bool:
        local = (np.asarray(p, float) - self.chest) @ rot_z(self.heading)
        return bool(np.sum((local / self.reach_semi_axes) ** 2) <= 1.0)

    def clamp_hand(self, target) -> np.ndarray:
        offset = np.asarray(target, float) - self.chest
        local = offset @ rot_z(self.heading)
        scale = float(np.sqrt(np.sum((local / self.reach_semi_axes) ** 2)))
        if scale > 1.0:
            offset = offset / scale
        return self.chest + offset


def _set_human_intent(hs: HumanState, sim, object_id: int | None) -> None:
    prev = hs.intent.object_id if hs.intent else None
    if object_id is None:
        hs.intent = None
    else:
        pos = sim.O.position(object_id) if object_id in sim.O \
            else sim.objects[object_id].position
        hs.intent = Intent(AgentId.H, object_id, pos, sim.time)
    if prev != object_id:
        sim.log.event("intent_change", sim.tick, sim.time, agent="H",
                      object_id=object_id)
        sim.queue_message(IntentUpdate(AgentId.H, hs.intent))


def _crouch_for(hs: HumanState, target_z: float) -> None:
    hs.chest[2] = float(np.clip(target_z + 0.5, *CROUCH_RANGE))


def _stand(hs: HumanState) -> None:
    hs.chest[2] = hs.standing_z


def _human_record_interaction(hs: HumanState, sim, p) -> None:
    added = record_interaction(sim.a_h, p, sim.config.interaction_radius,
                               sim.grid)
    sim.notify_a_h_added(added)


def _start_walk(hs: HumanState, sim, goal_xy, after: tuple | None) -> None:
    hs.walk_goal = np.asarray(goal_xy, float)[:2]
    hs.after_walk = after
    hs.phase = HumanPhase.WALKING


def _walk_step(hs: HumanState, sim, dt: float) -> bool:
    """Advance toward the goal; True on arrival. Humans ignore occupancy."""
    pos = hs.chest[:2]
    d = hs.walk_goal - pos
    dist = float(np.hypot(*d))
    arrive = APPROACH_DISTANCE if hs.after_walk else 0.05
    if dist > arrive:
        step = min(hs.speed * dt, dist - arrive + 1e-9)
        direction = d / dist
        hs.chest[:2] = pos + direction * step
        hs.heading = float(np.arctan2(direction[1], direction[0]))
        lo = sim.grid.origin + 1e-6
        hi = sim.grid.upper - 1e-6
        hs.chest[:2] = np.clip(hs.chest[:2], lo[:2], hi[:2])
        return float(np.hypot(*(hs.walk_goal - hs.chest[:2]))) <= arrive
    return True


def _begin_action(hs: HumanState, sim, action: tuple) -> None:
    hs.action = action
    if action[0] == "pick":
        hs.action_timer = sim.config.pick_duration
        hs.phase = HumanPhase.PICKING
    else:
        hs.action_timer = sim.config.place_duration
        hs.phase = HumanPhase.PLACING


def _finish_action(hs: HumanState, sim) -> None:
    kind = hs.action[0]
    if kind == "pick":
        oid = hs.action[1]
        obj = sim.objects.get(oid)
        if obj is None or obj.state is not ObjectState.FREE \
                or not hs.reach_contains(obj.position):
            _stand(hs)
            _abort_human_task(hs, sim)
            return
        obj.pick_up("H")
        hs.held = oid
        sim.log.event("task", sim.tick, sim.time, action="picked", agent="H",
                      object_id=oid)
        sim.queue_message(TaskEvent(AgentId.H, TaskAction.PICKED, oid))
        _human_record_interaction(hs, sim, obj.position)
        _stand(hs)
        _after_pick(hs, sim)
    else:
        position = np.asarray(hs.action[1], float)
        obj = sim.objects[hs.held]
        interaction_point = position.copy()
        deposited = sim.deposit(obj, position, AgentId.H)
        if not deposited:
            sim.log.event("task", sim.tick, sim.time, action="placed",
                          agent="H", object_id=obj.id,
                          position=[round(float(x), 6) for x in position])
            sim.queue_message(TaskEvent(AgentId.H, TaskAction.PLACED, obj.id))
        hs.held = None
        _human_record_interaction(hs, sim, interaction_point)
        _stand(hs)
        _after_place(hs, sim)


def _abort_human_task(hs: HumanState, sim) -> None:
    if hs.active_query is not None:
        sim.queue_message(AssistResponse(AgentId.H, hs.active_query.query_id,
                                         ResponseOutcome.CANNOT_REACH))
        hs.active_query = None
    _set_human_intent(hs, sim, None)
    hs.phase = HumanPhase.IDLE
    hs.action = None


def _after_pick(hs: HumanState, sim) -> None:
    obj = sim.objects[hs.held]
    if hs.active_query is not None:
        dest = _query_drop_point(hs, sim)
        if dest is None:
            # nowhere helpful to put it: put it back down and admit defeat
            obj.put_down(obj.position)
            hs.held = None
            sim.queue_message(AssistResponse(
                AgentId.H, hs.active_query.query_id,
                ResponseOutcome.CANNOT_REACH))
            hs.active_query = None
            _set_human_intent(hs, sim, None)
            hs.phase = HumanPhase.IDLE
            return
        _start_walk(hs, sim, dest[:2], ("place", dest))
    else:
        target_bin = sim.bins_by_category[obj.category]
        _start_walk(hs, sim, target_bin.position[:2],
                    ("place", target_bin.position))
    hs.action = None


def _after_place(hs: HumanState, sim) -> None:
    hs.action = None
    if hs.active_query is not None:
        sim.queue_message(AssistResponse(AgentId.H, hs.active_query.query_id,
                                         ResponseOutcome.DONE))
        hs.active_query = None
    _set_human_intent(hs, sim, None)
    hs.phase = HumanPhase.IDLE


def _query_drop_point(hs: HumanState, sim) -> np.ndarray | None:
    """Where to relocate the queried object so the robot can reach it."""
    obj_pos = sim.objects[hs.active_query.object_id].position
    if hs.active_query.drop_region:
        triples = np.array(hs.active_query.drop_region)
    elif hs.a_r_view:
        lins = np.fromiter(sorted(hs.a_r_view), dtype=np.int64)
        nx, ny, nz = sim.grid.dims
        triples = np.stack([lins // (ny * nz), (lins // nz) % ny, lins % nz],
                           axis=1)
        free = ~sim.grid.occupied[triples[:, 0], triples[:, 1], triples[:, 2]]
        triples = triples[free]
    else:
        return None
    if len(triples) == 0:
        return None
    centers = sim.grid.origin + (triples + 0.5) * sim.grid.resolution
    # prefer drop points the human can act at: below its reach ceiling
    ceiling = CROUCH_RANGE[1] + hs.reach_semi_axes[2]
    ok = centers[:, 2] <= ceiling
    if ok.any():
        centers = centers[ok]
    d = np.linalg.norm(centers - obj_pos, axis=1)
    return centers[int(np.argmin(d))]


def _respond(hs: HumanState, sim, query: AssistQuery,
             outcome: ResponseOutcome) -> None:
    sim.queue_message(AssistResponse(AgentId.H, query.query_id, outcome))


def _can_ever_reach(hs: HumanState, z: float) -> bool:
    lo = CROUCH_RANGE[0] - hs.reach_semi_axes[2]
    hi = CROUCH_RANGE[1] + hs.reach_semi_axes[2]
    return lo <= z <= hi


def human_tick(hs: HumanState, sim, dt: float) -> None:
    if hs.control == "live":
        _live_tick(hs, sim, dt)
    else:
        _scripted_tick(hs, sim, dt)
    hs.hand = hs.clamp_hand(_hand_target(hs, sim))
    if hs.held is not None:
        sim.objects[hs.held].position = hs.hand.copy()


def _hand_target(hs: HumanState, sim):
    if hs.phase in (HumanPhase.PICKING, HumanPhase.PLACING) and hs.action:
        if hs.action[0] == "pick":
            obj = sim.objects.get(hs.action[1])
            if obj is not None:
                return obj.position
        else:
            return hs.action[1]
    return hs._rest_hand()


def _scripted_tick(hs: HumanState, sim, dt: float) -> None:
    policy = sim.config.policy
    _policy_handle_queries(hs, sim, policy)
    if hs.phase is HumanPhase.WALKING:
        if _walk_step(hs, sim, dt):
            after, hs.after_walk, hs.walk_goal = hs.after_walk, None, None
            if after is None:
                hs.phase = HumanPhase.IDLE
            elif after[0] == "pick":
                obj = sim.objects.get(after[1])
                if obj is None or obj.state is not ObjectState.FREE:
                    _abort_human_task(hs, sim)
                    return
                _crouch_for(hs, float(obj.position[2]))
                if not hs.reach_contains(obj.position):
                    _stand(hs)
                    _abort_human_task(hs, sim)
                    if policy is PolicyId.INDEPENDENT:
                        hs.blocked.add(after[1])
                    return
                _begin_action(hs, sim, after)
            else:
                _crouch_for(hs, float(after[1][2]))
                _begin_action(hs, sim, after)
    elif hs.phase in (HumanPhase.PICKING, HumanPhase.PLACING):
        hs.action_timer -= dt
        if hs.action_timer <= 1e-9:
            _finish_action(hs, sim)
    elif hs.phase is HumanPhase.IDLE and policy is PolicyId.INDEPENDENT:
        _independent_select(hs, sim)


def _policy_handle_queries(hs: HumanState, sim, policy: PolicyId) -> None:
    if policy is PolicyId.INDEPENDENT:
        hs.pending_queries.clear()          # ignores the robot entirely
        return
    if policy is PolicyId.DECLINING:
        while hs.pending_queries:
            _respond(hs, sim, hs.pending_queries.popleft(),
                     ResponseOutcome.DECLINE)
        return
    # diligent: take on one query at a time, as soon as hands are free
    if hs.active_query is None and hs.pending_queries \
            and hs.phase is HumanPhase.IDLE and hs.held is None:
        query = hs.pending_queries.popleft()
        obj = sim.objects.get(query.object_id)
        if obj is None or obj.state is not ObjectState.FREE \
                or not _can_ever_reach(hs, float(obj.position[2])):
            _respond(hs, sim, query, ResponseOutcome.CANNOT_REACH)
            return
        hs.active_query = query
        _respond(hs, sim, query, ResponseOutcome.WILL_DO)
        _set_human_intent(hs, sim, query.object_id)
        _start_walk(hs, sim, obj.position[:2], ("pick", query.object_id))


def _independent_select(hs: HumanState, sim) -> None:
    best = None
    for oid in sorted(sim.objects):
        obj = sim.objects[oid]
        if obj.state is not ObjectState.FREE or oid in hs.blocked:
            continue
        if not _can_ever_reach(hs, float(obj.position[2])):
            continue
        d = float(np.hypot(*(obj.position[:2] - hs.chest[:2])))
        if best is None or (d, oid) < best:
            best = (d, oid)
    if best is None:
        return
    oid = best[1]
    _set_human_intent(hs, sim, oid)
    _start_walk(hs, sim, sim.objects[oid].position[:2], ("pick", oid))


def _live_tick(hs: HumanState, sim, dt: float) -> None:
    while hs.commands and hs.phase in (HumanPhase.IDLE, HumanPhase.WALKING):
        cmd = hs.commands.popleft()
        try:
            _apply_command(hs, sim, cmd)
        except CommandRejected as e:
            sim.log.event("command_rejected", sim.tick, sim.time,
                          command=cmd.get("kind"), reason=str(e))
            sim.notify_command_result(cmd, ok=False, reason=str(e))
    if hs.phase is HumanPhase.WALKING:
        if _walk_step(hs, sim, dt):
            after, hs.after_walk, hs.walk_goal = hs.after_walk, None, None
            hs.phase = HumanPhase.IDLE
            if after is not None:
                try:
                    _live_try_action(hs, sim, after)
                except CommandRejected as e:
                    sim.log.event("command_rejected", sim.tick, sim.time,
                                  command=after[0], reason=str(e))
                    sim.notify_command_result(None, ok=False, reason=str(e))
    elif hs.phase in (HumanPhase.PICKING, HumanPhase.PLACING):
        hs.action_timer -= dt
        if hs.action_timer <= 1e-9:
            _finish_action(hs, sim)
    if hs.intent is None and hs.held is None and hs.phase is HumanPhase.IDLE:
        est = estimate_human_intent(hs.hand, sim.O, sim.objects, sim.time,
                                    sim.config.engagement_radius)
        if est is not None:
            _set_human_intent(hs, sim, est.object_id)


def _live_try_action(hs: HumanState, sim, action: tuple) -> None:
    if action[0] == "pick":
        obj = sim.objects.get(action[1])
        if obj is None or obj.state is not ObjectState.FREE:
            raise CommandRejected(f"object {action[1]} is not free")
        _crouch_for(hs, float(obj.position[2]))
        if not hs.reach_contains(obj.position):
            _stand(hs)
            raise CommandRejected(f"object {action[1]} is out of reach")
        _begin_action(hs, sim, action)
    else:
        _crouch_for(hs, float(action[1][2]))
        if not hs.reach_contains(action[1]):
            _stand(hs)
            raise CommandRejected("place position is out of reach")
        _begin_action(hs, sim, action)


def _apply_command(hs: HumanState, sim, cmd: dict) -> None:
    kind = cmd.get("kind")
    if kind == "set_intent":
        oid = int(cmd["object_id"])
        obj = sim.objects.get(oid)
        if obj is None or obj.state is ObjectState.BINNED:
            raise CommandRejected(f"object {oid} is not available")
        _set_human_intent(hs, sim, oid)
    elif kind == "move_to":
        goal = np.asarray(cmd["position"], float)[:2]
        _start_walk(hs, sim, goal, None)
    elif kind == "pick":
        oid = int(cmd["object_id"])
        obj = sim.objects.get(oid)
        if obj is None or obj.state is not ObjectState.FREE:
            raise CommandRejected(f"object {oid} is not free")
        if hs.held is not None:
            raise CommandRejected("hands are full")
        if hs.intent is None or hs.intent.object_id != oid:
            _set_human_intent(hs, sim, oid)
        _start_walk(hs, sim, obj.position[:2], ("pick", oid))
    elif kind == "place":
        if hs.held is None:
            raise CommandRejected("not holding anything")
        pos = np.asarray(cmd["position"], float)
        if not sim.grid.in_bounds(pos):
            raise CommandRejected("place position out of bounds")
        _start_walk(hs, sim, pos[:2], ("place", pos))
    elif kind == "respond_to_query":
        qid = int(cmd["query_id"])
        match = [q for q in hs.pending_queries if q.query_id == qid]
        if not match:
            raise CommandRejected(f"no pending query {qid}")
        outcome = ResponseOutcome(cmd["outcome"])
        hs.pending_queries.remove(match[0])
        _respond(hs, sim, match[0], outcome)
    else:
        raise CommandRejected(f"unknown command kind {kind!r}")
