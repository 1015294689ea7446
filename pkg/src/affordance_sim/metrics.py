"""Team-efficiency measures computed from the event log: completion time,
per-agent idle time, intent-switch counts, plus assistance bookkeeping."""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import MalformedLog
from .eventlog import validate_log


@dataclass
class AgentMetrics:
    idle_time: float = 0.0
    intent_switches: int = 0
    objects_binned: int = 0

    def to_dict(self) -> dict:
        return {"idle_time": round(self.idle_time, 9),
                "intent_switches": self.intent_switches,
                "objects_binned": self.objects_binned}


@dataclass
class MetricsReport:
    outcome: str
    duration: float
    completion_time: float | None
    agents: dict[str, AgentMetrics] = field(default_factory=dict)
    queries_sent: int = 0
    queries_done: int = 0
    queries_declined: int = 0
    queries_timed_out: int = 0

    def to_dict(self) -> dict:
        return {
            "outcome": self.outcome,
            "duration": round(self.duration, 9),
            "completion_time": (None if self.completion_time is None
                                else round(self.completion_time, 9)),
            "agents": {a: m.to_dict() for a, m in sorted(self.agents.items())},
            "queries": {"sent": self.queries_sent, "done": self.queries_done,
                        "declined": self.queries_declined,
                        "timed_out": self.queries_timed_out},
        }


def idle_time(timeline: list[tuple[float, object]], dt: float) -> float:
    """Total time with no object of intent: dt per intent-less sample."""
    return dt * sum(1 for _, target in timeline if target is None)


def intent_switches(timeline: list[tuple[float, object]]) -> int:
    """Transitions between distinct non-null targets. A null gap only counts
    when the target after the gap differs from the one before it."""
    switches = 0
    last = None
    for _, target in timeline:
        if target is None:
            continue
        if last is not None and target != last:
            switches += 1
        last = target
    return switches


def build_timelines(records: list[dict]) -> dict[str, list[tuple[float, object]]]:
    """Per-agent per-tick intent samples reconstructed from change events."""
    start = records[0]
    end = records[-1]
    dt = start["dt"]
    n_ticks = end["tick"]
    changes: dict[str, list[tuple[int, object]]] = {"H": [], "R": []}
    for rec in records:
        if rec.get("kind") == "event" and rec.get("type") == "intent_change":
            changes[rec["agent"]].append((rec["tick"], rec["object_id"]))
    timelines = {}
    for agent, agent_changes in changes.items():
        samples = []
        current = None
        pos = 0
        for k in range(n_ticks):
            while pos < len(agent_changes) and agent_changes[pos][0] <= k:
                current = agent_changes[pos][1]
                pos += 1
            samples.append((k * dt, current))
        timelines[agent] = samples
    return timelines


def summarize(records: list[dict]) -> MetricsReport:
    """Full metrics report from a complete event log."""
    try:
        validate_log(records)
    except MalformedLog:
        raise
    start, end = records[0], records[-1]
    if "dt" not in start or "outcome" not in end:
        raise MalformedLog("run_start/run_end records are incomplete")
    dt = start["dt"]
    outcome = end["outcome"]
    duration = end["tick"] * dt
    report = MetricsReport(
        outcome=outcome, duration=duration,
        completion_time=duration if outcome == "completed" else None,
        agents={"H": AgentMetrics(), "R": AgentMetrics()})

    for agent, timeline in build_timelines(records).items():
        report.agents[agent].idle_time = idle_time(timeline, dt)
        report.agents[agent].intent_switches = intent_switches(timeline)

    resolved: set[int] = set()
    for rec in records:
        if rec["kind"] == "event":
            if rec["type"] == "task" and rec.get("action") == "binned":
                report.agents[rec["agent"]].objects_binned += 1
            elif rec["type"] == "query_timeout":
                report.queries_timed_out += 1
        else:
            if rec["type"] == "assist_query":
                report.queries_sent += 1
            elif rec["type"] == "assist_response":
                qid = rec["payload"]["query_id"]
                outcome_ = rec["payload"]["outcome"]
                if outcome_ == "done" and qid not in resolved:
                    report.queries_done += 1
                    resolved.add(qid)
                elif outcome_ in ("decline", "cannot_reach") \
                        and qid not in resolved:
                    report.queries_declined += 1
                    resolved.add(qid)
    return report
