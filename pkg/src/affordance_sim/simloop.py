"""Deterministic fixed-timestep simulation driver.

Tick order: (1) sense both perspectives and fuse into the shared O,
(2) grow the authoritative A_H from the observed human pose, (3) drain and
mode-filter the message queue, (4) robot tick, (5) human tick, (6) stall
bookkeeping, (7) advance time. Runs end Completed, TimedOut or Deadlocked.
"""

from __future__ import annotations

import hashlib
import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import agents
from .affordance import (CapabilityMap, HumanAffordanceGrid, ReachEllipsoid,
                         precompute_capability_map, update_human_affordance)
from .collaboration import (AffordanceUpdate, AgentId, AssistQuery,
                            AssistResponse, ExperimentMode, Intent,
                            IntentUpdate, QueryTracker, TaskAction, TaskEvent,
                            mode_filter)
from .errors import UnknownQueryRef, ValidationError
from .eventlog import EventLog, canonical
from .perception import (DetectedObjectSet, FrameCalibration, fuse,
                         human_observed, sense, sensor_origin)
from .planner import NavGrid, default_base_lattice
from .kinematics import KinematicChain
from .world import Bin, ObjectState, Scenario, load_scenario, try_deposit

OUTCOME_COMPLETED = "completed"
OUTCOME_TIMED_OUT = "timed_out"
OUTCOME_DEADLOCKED = "deadlocked"


@dataclass
class SimConfig:
    scenario_path: str
    mode: ExperimentMode = ExperimentMode.SHARED
    seed: int = 0
    dt: float = 0.1
    max_time: float = 300.0
    policy: agents.PolicyId = agents.PolicyId.DILIGENT
    human_control: str = "scripted"              # "scripted" | "live"
    samples_per_pose: int = 4096
    lattice_spacing: float = 0.2
    lattice_headings: int = 8
    w_threshold: float = 1e-3
    precompute_seed: int = 0
    precompute_threads: int = 1
    capmap_path: str | None = None
    robot_speed: float | None = None             # scenario value when None
    manipulation_delay: float = 2.0
    pick_duration: float = 1.5
    place_duration: float = 1.5
    interaction_radius: float = 0.3
    engagement_radius: float = 0.5
    query_timeout: float = 30.0
    deadlock_window: float = 60.0

    def __post_init__(self):
        if self.dt <= 0:
            raise ValidationError("dt must be > 0")
        if self.max_time <= 0:
            raise ValidationError("max_time must be > 0")
        self.mode = ExperimentMode(self.mode)
        self.policy = agents.PolicyId(self.policy)

    def echo(self) -> dict:
        return {
            "scenario_path": str(self.scenario_path),
            "mode": self.mode.value, "seed": self.seed, "dt": self.dt,
            "max_time": self.max_time, "policy": self.policy.value,
            "human_control": self.human_control,
            "samples_per_pose": self.samples_per_pose,
            "lattice_spacing": self.lattice_spacing,
            "lattice_headings": self.lattice_headings,
            "w_threshold": self.w_threshold,
            "precompute_seed": self.precompute_seed,
            "robot_speed": self.robot_speed,
            "manipulation_delay": self.manipulation_delay,
            "pick_duration": self.pick_duration,
            "place_duration": self.place_duration,
            "interaction_radius": self.interaction_radius,
            "engagement_radius": self.engagement_radius,
            "query_timeout": self.query_timeout,
            "deadlock_window": self.deadlock_window,
        }


@dataclass
class RunReport:
    report: dict
    records: list[dict] = field(repr=False, default_factory=list)

    def digest(self) -> str:
        return hashlib.sha256(canonical(self.report).encode()).hexdigest()

    def dump(self, path) -> None:
        Path(path).write_text(json.dumps(self.report, sort_keys=True,
                                         indent=1) + "\n", encoding="utf-8")


def build_capability_map(scenario: Scenario, config: SimConfig,
                         nav: NavGrid | None = None) -> CapabilityMap:
    nav = nav or NavGrid.from_world(scenario.grid, scenario.robot.height_band,
                                    scenario.robot.footprint_radius)
    lattice = default_base_lattice(nav, config.lattice_spacing,
                                   config.lattice_headings)
    chain = KinematicChain.from_config(scenario.robot.arm)
    return precompute_capability_map(
        chain, scenario.grid, lattice, config.samples_per_pose,
        config.w_threshold, config.precompute_seed, config.precompute_threads)


class Simulation:
    """One run: owns world state, agent states, protocol state and the log."""

    def __init__(self, config: SimConfig, scenario: Scenario | None = None,
                 cap: CapabilityMap | None = None,
                 calibration: FrameCalibration | None = None):
        self.config = config
        self.scenario = scenario or load_scenario(config.scenario_path)
        sc = self.scenario
        self.grid = sc.grid
        self.objects = {o.id: o for o in sc.objects}
        self.bins: list[Bin] = sc.bins
        self.bins_by_category = {b.accepts: b for b in sc.bins}
        self.calibration = calibration or FrameCalibration()
        if config.robot_speed is None:
            config.robot_speed = sc.robot.speed

        self.nav = NavGrid.from_world(sc.grid, sc.robot.height_band,
                                      sc.robot.footprint_radius)
        self.cap = cap if cap is not None else build_capability_map(
            sc, config, self.nav)
        if not self.cap.geometry_matches(sc.grid):
            raise ValidationError(
                "capability map geometry does not match the scenario grid")

        self.robot = agents.RobotState(
            base_pose=sc.robot.base_pose,
            arm_q=np.zeros(self.cap.chain.n_joints))
        self.human = agents.HumanState(
            chest=sc.human.chest_pos.copy(), heading=sc.human.heading,
            standing_z=float(sc.human.chest_pos[2]), speed=sc.human.speed,
            reach_semi_axes=sc.human.reach_semi_axes.copy(),
            control=config.human_control)

        self.a_h = HumanAffordanceGrid(sc.grid)          # authoritative A_H
        self.robot_a_h_view = HumanAffordanceGrid(sc.grid)
        self.robot_o_h_belief: Intent | None = None
        self.O = DetectedObjectSet()
        self.tracker = QueryTracker(timeout=config.query_timeout)
        self.message_queue: deque = deque()
        self.log = EventLog()
        self.tick = 0
        self.time = 0.0
        self.outcome: str | None = None
        self._stall_digest: str | None = None
        self._stall_ticks = 0
        self._command_results: list[dict] = []

        self.rng_headset = np.random.default_rng([config.seed, 0])
        self.rng_robot = np.random.default_rng([config.seed, 1])
        self.rng_policy = np.random.default_rng([config.seed, 2])

        scenario_blob = canonical(sc.raw).encode()
        self.scenario_sha256 = hashlib.sha256(scenario_blob).hexdigest()
        self.log.event("run_start", 0, 0.0, dt=config.dt,
                       mode=config.mode.value, seed=config.seed,
                       policy=config.policy.value,
                       scenario_sha256=self.scenario_sha256,
                       config=config.echo())
        # static robot affordance broadcast; delivered on the first tick
        reach_ids = [int(v) for v in self.cap.reachable_linear_ids()]
        self.queue_message(AffordanceUpdate(AgentId.R, tuple(reach_ids)))

    # --- services used by agent controllers -------------------------------

    def queue_message(self, msg) -> None:
        self.message_queue.append(msg)

    def notify_a_h_added(self, added) -> None:
        if len(added):
            self.queue_message(AffordanceUpdate(
                AgentId.H, tuple(int(v) for v in added)))

    def notify_command_result(self, cmd, ok: bool, reason: str = "") -> None:
        self._command_results.append(
            {"command": cmd, "ok": ok, "reason": reason})

    def deposit(self, obj, position, agent: AgentId) -> bool:
        """Place a held object; True when it landed in its category bin."""
        deposited = try_deposit(obj, position, self.bins)
        if deposited is not None:
            self.log.event("task", self.tick, self.time, action="binned",
                           agent=agent.value, object_id=obj.id,
                           bin_id=deposited.id)
            self.queue_message(TaskEvent(agent, TaskAction.BINNED, obj.id))
            return True
        return False

    # --- tick phases -------------------------------------------------------

    def _sense_phase(self) -> None:
        sc = self.scenario
        objs = list(self.objects.values())
        head_origin_mount = self.human.chest
        dets = sense("headset", sc.sensors.headset, head_origin_mount,
                     self.human.heading, objs, self.grid, self.calibration,
                     self.rng_headset, self.time)
        robot_mount = np.array([self.robot.base_pose.x,
                                self.robot.base_pose.y, 0.0])
        dets += sense("robot", sc.sensors.robot, robot_mount,
                      self.robot.base_pose.theta, objs, self.grid,
                      self.calibration, self.rng_robot, self.time)
        self.O.update_from(fuse(dets, sc.sensors.association_radius))

    def _affordance_phase(self) -> None:
        sc = self.scenario
        robot_origin = sensor_origin(
            sc.sensors.robot,
            np.array([self.robot.base_pose.x, self.robot.base_pose.y, 0.0]),
            self.robot.base_pose.theta)
        if human_observed(sc, self.human.chest, self.human.heading,
                          robot_origin, self.robot.base_pose.theta):
            ell = ReachEllipsoid.for_human(self.human.chest,
                                           self.human.heading,
                                           self.human.reach_semi_axes)
            added = update_human_affordance(self.a_h, ell, self.grid,
                                            self.time)
            self.notify_a_h_added(added)

    def _drain_messages(self) -> None:
        pending = list(self.message_queue)
        self.message_queue.clear()
        for msg in pending:
            if not mode_filter(self.config.mode, msg, msg.sender):
                continue
            self.log.message(msg, self.tick, self.time)
            self._deliver(msg)

    def _deliver(self, msg) -> None:
        if isinstance(msg, IntentUpdate):
            if msg.sender is AgentId.H:
                self.robot_o_h_belief = msg.intent
            else:
                self.human.robot_intent_display = msg.intent
        elif isinstance(msg, AffordanceUpdate):
            if msg.sender is AgentId.H:
                self.robot_a_h_view.add_linear(
                    np.fromiter(msg.added_voxels, dtype=np.int64,
                                count=len(msg.added_voxels)))
            else:
                self.human.a_r_view.update(msg.added_voxels)
        elif isinstance(msg, AssistQuery):
            if msg.sender is AgentId.R:
                self.human.pending_queries.append(msg)
        elif isinstance(msg, AssistResponse):
            if msg.sender is AgentId.H:
                try:
                    agents.robot_on_response(self.robot, self, msg)
                except UnknownQueryRef as e:
                    self.log.event("protocol_error", self.tick, self.time,
                                   reason=str(e))
        # TaskEvent: informational; world truth is already shared desk-scale

    def _task_state_digest(self) -> str:
        state = {
            "objects": [(o.id, o.state.value, o.held_by,
                         [round(float(x), 6) for x in o.position])
                        for o in sorted(self.objects.values(),
                                        key=lambda o: o.id)],
            "robot": (round(self.robot.base_pose.x, 6),
                      round(self.robot.base_pose.y, 6),
                      round(self.robot.base_pose.theta, 6),
                      self.robot.phase.value, self.robot.held,
                      sorted(self.robot.blocked), self.robot.waiting_query,
                      self.robot.intent.object_id if self.robot.intent else None),
            "human": ([round(float(x), 6) for x in self.human.chest],
                      self.human.phase.value, self.human.held,
                      self.human.intent.object_id if self.human.intent else None,
                      len(self.human.pending_queries),
                      self.human.active_query.query_id
                      if self.human.active_query else None),
            "a_h": self.a_h.count,
            "binned": sum(o.state is ObjectState.BINNED
                          for o in self.objects.values()),
        }
        return hashlib.sha256(canonical(state).encode()).hexdigest()

    def step(self) -> None:
        assert self.outcome is None, "simulation already terminated"
        self._sense_phase()
        self._affordance_phase()
        self._drain_messages()
        agents.robot_tick(self.robot, self, self.config.dt)
        agents.human_tick(self.human, self, self.config.dt)
        digest = self._task_state_digest()
        if digest == self._stall_digest:
            self._stall_ticks += 1
        else:
            self._stall_digest = digest
            self._stall_ticks = 0
        self.tick += 1
        self.time = self.tick * self.config.dt

    def _check_termination(self) -> None:
        if self.objects and all(o.state is ObjectState.BINNED
                                for o in self.objects.values()):
            self.outcome = OUTCOME_COMPLETED
        elif not self.objects:
            self.outcome = OUTCOME_COMPLETED
        elif self.time >= self.config.max_time - 1e-9:
            self.outcome = OUTCOME_TIMED_OUT
        elif self._stall_ticks * self.config.dt >= self.config.deadlock_window:
            self.outcome = OUTCOME_DEADLOCKED

    def run(self) -> RunReport:
        self._check_termination()
        while self.outcome is None:
            self.step()
            self._check_termination()
        return self.finalize()

    def finalize(self) -> RunReport:
        from .metrics import summarize
        if self.outcome is None:
            self.outcome = OUTCOME_TIMED_OUT
        self.log.event("run_end", self.tick, self.time, outcome=self.outcome)
        metrics = summarize(self.log.records)
        report = {
            "schema": "acs.run_report.v1",
            "config": self.config.echo(),
            "scenario_sha256": self.scenario_sha256,
            "outcome": self.outcome,
            "ticks": self.tick,
            "duration": round(self.time, 9),
            "metrics": metrics.to_dict(),
            "log_digest": self.log.digest(),
        }
        return RunReport(report, list(self.log.records))


def run(config: SimConfig, scenario: Scenario | None = None,
        cap: CapabilityMap | None = None) -> RunReport:
    return Simulation(config, scenario=scenario, cap=cap).run()
