"""Logical planning: lower a bound query into a staged plan DAG.

The optimized training plan has four stages with materialization barriers
between them:

  1. static entity filters       (anchor-independent conjuncts, pushed down)
  2. anchor expansion            (entity x anchor generator, validity-pruned)
  3. temporal filters            (anchor-dependent conjuncts, then ASSUMING)
  4. target computation          (last; it drops the fewest rows)

Static queries skip stages 2-3. The unoptimized variant used as a benchmark
baseline materializes a genuine entity-by-anchor cross product, computes
targets for every pair, and applies all filters at the end.

Prediction plans have a single anchor, never compute targets, and never
apply ASSUMING; link-prediction plans carry the candidate filter.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple, Union

import numpy as np

from .binder import (
    BoundQuery,
    TaskType,
)
from .errors import PlanError
from .times import format_duration, format_timestamp
from .unparse_bound import describe_condition, describe_target


@dataclass(frozen=True)
class AnchorPolicy:
    """How anchor timestamps are chosen for training tables.

    `stride` and `latest` default to "auto": stride becomes one full
    timeframe (past + future when the past is bounded, else one future
    extent), and the latest anchor becomes the dataset's maximum event time
    minus the future extent. Anchors walk back from the latest one.
    """

    count: int = 10
    stride: Union[int, str] = "auto"  # micros or "auto"
    latest: Union[int, str] = "auto"  # micros or "auto"

    def __post_init__(self):
        if self.count < 1:
            raise PlanError("anchor count must be positive")
        if isinstance(self.stride, int) and self.stride <= 0:
            raise PlanError("anchor stride must be positive")


@dataclass(frozen=True)
class PlanNode:
    kind: str
    detail: str = ""
    payload: object = field(default=None, compare=False, repr=False)
    inputs: Tuple[int, ...] = ()


@dataclass(frozen=True)
class Stage:
    name: str
    node_ids: Tuple[int, ...]
    note: str = ""


@dataclass(frozen=True)
class LogicalPlan:
    mode: str  # "training" | "prediction"
    optimized: bool
    bound: BoundQuery
    policy: Optional[AnchorPolicy]
    nodes: Tuple[PlanNode, ...]
    stages: Tuple[Stage, ...]
    prediction_at: Optional[int] = None

    @property
    def output_columns(self) -> Tuple[str, ...]:
        cols: Tuple[str, ...] = ("ENTITY",)
        if not self.bound.is_static:
            cols += ("TIMESTAMP",)
        if self.mode == "training":
            cols += ("TARGET", "SPLIT")
        return cols


def _entity_stage_nodes(bound: BoundQuery, nodes: List[PlanNode]) -> List[int]:
    ids = [len(nodes)]
    nodes.append(PlanNode("ScanEntities", bound.entity_table))
    for cond in bound.static_conjuncts:
        nid = len(nodes)
        nodes.append(PlanNode("StaticEntityFilter", describe_condition(cond), cond, (nid - 1,)))
        ids.append(nid)
    return ids


def plan_training(
    bound: BoundQuery, policy: Optional[AnchorPolicy] = None, *, optimized: bool = True
) -> LogicalPlan:
    """Lower a bound query to a training-table plan."""
    policy = policy or AnchorPolicy()
    nodes: List[PlanNode] = []
    stages: List[Stage] = []

    if not optimized:
        return _plan_training_naive(bound, policy)

    stage1 = _entity_stage_nodes(bound, nodes)
    stages.append(Stage("static entity filters", tuple(stage1)))

    if bound.is_static:
        stages.append(Stage("anchor expansion", (), note="skipped: static query"))
        stages.append(Stage("temporal filters", (), note="skipped: static query"))
        last = stage1[-1]
    else:
        nid = len(nodes)
        validity = "validity-pruned" if bound.entity_validity else "no validity columns"
        nodes.append(
            PlanNode(
                "AnchorExpand",
                f"count={policy.count} stride={_fmt_stride(policy)} "
                f"latest={_fmt_latest(policy)} ({validity})",
                policy,
                (stage1[-1],),
            )
        )
        stages.append(Stage("anchor expansion", (nid,)))
        last = nid

        stage3: List[int] = []
        for cond in bound.temporal_conjuncts:
            nid = len(nodes)
            nodes.append(PlanNode("TemporalEntityFilter", describe_condition(cond), cond, (last,)))
            stage3.append(nid)
            last = nid
        if bound.assuming is not None:
            nid = len(nodes)
            nodes.append(
                PlanNode("AssumingFilter", describe_condition(bound.assuming), bound.assuming, (last,))
            )
            stage3.append(nid)
            last = nid
        stages.append(Stage("temporal filters", tuple(stage3)))

    target_id = len(nodes)
    nodes.append(PlanNode("TargetCompute", describe_target(bound.target), bound.target, (last,)))
    project_id = len(nodes)
    nodes.append(PlanNode("Project", ", ".join(_output_cols(bound, "training")), None, (target_id,)))
    stages.append(Stage("target computation", (target_id, project_id)))
    return LogicalPlan("training", True, bound, policy, tuple(nodes), tuple(stages))


def _plan_training_naive(bound: BoundQuery, policy: AnchorPolicy) -> LogicalPlan:
    """Baseline plan: real cross product, late filtering, no stage barriers."""
    nodes: List[PlanNode] = [PlanNode("ScanEntities", bound.entity_table)]
    last = 0
    if not bound.is_static:
        nodes.append(
            PlanNode(
                "CrossJoinAnchors",
                f"count={policy.count} stride={_fmt_stride(policy)} (materialized cross product)",
                policy,
                (last,),
            )
        )
        last = 1
    tid = len(nodes)
    nodes.append(PlanNode("TargetCompute", describe_target(bound.target) + " (all pairs)", bound.target, (last,)))
    last = tid
    for conj in bound.conjuncts:
        nid = len(nodes)
        nodes.append(
            PlanNode("LateEntityFilter", describe_condition(conj.condition), conj.condition, (last,))
        )
        last = nid
    if bound.assuming is not None:
        nid = len(nodes)
        nodes.append(PlanNode("AssumingFilter", describe_condition(bound.assuming), bound.assuming, (last,)))
        last = nid
    if bound.entity_validity and not bound.is_static:
        nid = len(nodes)
        nodes.append(PlanNode("LateValidityFilter", "drop anchors outside entity validity", None, (last,)))
        last = nid
    nodes.append(PlanNode("Project", ", ".join(_output_cols(bound, "training")), None, (last,)))
    return LogicalPlan(
        "training",
        False,
        bound,
        policy,
        tuple(nodes),
        (Stage("single pass (no materialization barriers)", tuple(range(len(nodes)))),),
    )


def plan_prediction(bound: BoundQuery, at: Optional[int] = None) -> LogicalPlan:
    """Prediction-table plan: one anchor, no target computation, no ASSUMING."""
    nodes: List[PlanNode] = []
    stages: List[Stage] = []
    stage1 = _entity_stage_nodes(bound, nodes)
    last = stage1[-1]

    if bound.is_static:
        if bound.task.task_type is not TaskType.LINK_PREDICTION:
            nid = len(nodes)
            nodes.append(
                PlanNode(
                    "SelectMissingTarget",
                    f"keep entities whose target {describe_target(bound.target)} is undefined",
                    bound.target,
                    (last,),
                )
            )
            stage1.append(nid)
            last = nid
        stages.append(Stage("static entity filters", tuple(stage1)))
        stages.append(Stage("anchor expansion", (), note="skipped: static query"))
        stages.append(Stage("temporal filters", (), note="skipped: static query"))
    else:
        stages.append(Stage("static entity filters", tuple(stage1)))
        nid = len(nodes)
        at_text = "latest event time" if at is None else format_timestamp(at)
        nodes.append(PlanNode("AnchorExpand", f"single anchor = {at_text}", None, (last,)))
        stages.append(Stage("anchor expansion", (nid,)))
        last = nid
        stage3: List[int] = []
        for cond in bound.temporal_conjuncts:
            nid = len(nodes)
            nodes.append(PlanNode("TemporalEntityFilter", describe_condition(cond), cond, (last,)))
            stage3.append(nid)
            last = nid
        stages.append(Stage("temporal filters", tuple(stage3)))

    extra: List[int] = []
    if bound.task.task_type is TaskType.LINK_PREDICTION:
        nid = len(nodes)
        cand = bound.task.link_target_table
        detail = f"candidates = {cand}"
        if bound.prediction_filter is not None:
            detail += f" where {describe_condition(bound.prediction_filter)}"
        nodes.append(PlanNode("CandidateSet", detail, bound.prediction_filter, (last,)))
        extra.append(nid)
        last = nid
    nid = len(nodes)
    nodes.append(PlanNode("Project", ", ".join(_output_cols(bound, "prediction")), None, (last,)))
    extra.append(nid)
    stages.append(Stage("target computation", tuple(extra), note="skipped: labels are predicted"))
    return LogicalPlan("prediction", True, bound, None, tuple(nodes), tuple(stages), prediction_at=at)


def _output_cols(bound: BoundQuery, mode: str) -> Tuple[str, ...]:
    cols: Tuple[str, ...] = ("ENTITY",)
    if not bound.is_static:
        cols += ("TIMESTAMP",)
    if mode == "training":
        cols += ("TARGET", "SPLIT")
    return cols


def _fmt_stride(policy: AnchorPolicy) -> str:
    return policy.stride if isinstance(policy.stride, str) else format_duration(policy.stride)


def _fmt_latest(policy: AnchorPolicy) -> str:
    return policy.latest if isinstance(policy.latest, str) else format_timestamp(policy.latest)


# ---------------------------------------------------------------------------
# Anchor resolution (needs the data's time range, so it runs at execution)


def resolve_stride(bound: BoundQuery, policy: AnchorPolicy) -> int:
    """One full timeframe, or 0 when that is degenerate (an unbounded
    lookback with no forward window overlaps every anchor regardless, so
    only a single anchor is emitted unless the user sets a stride)."""
    if isinstance(policy.stride, int):
        return policy.stride
    tf = bound.timeframe
    return tf.future if tf.past is None else tf.past + tf.future


def resolve_anchors(bound: BoundQuery, policy: AnchorPolicy, db) -> List[int]:
    """Concrete anchor timestamps, newest first.

    The newest anchor leaves room for the future extent; anchors step back
    one stride at a time. With an unbounded (-INF) lookback the earliest
    anchor keeps one stride of history ahead of the dataset start; otherwise
    anchors simply never precede the dataset start.
    """
    if bound.is_static:
        return []
    max_t = db.max_event_time()
    min_t = db.min_event_time()
    if max_t is None:
        raise PlanError("temporal query over a database with no dated rows")
    stride = resolve_stride(bound, policy)
    latest = policy.latest if isinstance(policy.latest, int) else max_t - bound.timeframe.future
    if stride == 0:
        return [latest] if latest >= min_t else []
    floor = min_t + stride if bound.timeframe.past is None else min_t
    anchors = []
    t = latest
    for _ in range(policy.count):
        if t < floor:
            break
        anchors.append(t)
        t -= stride
    return anchors


# ---------------------------------------------------------------------------
# Explain / serialization


def explain(plan: LogicalPlan) -> str:
    """Stable, human-readable rendering of a plan, stage by stage."""
    bound = plan.bound
    lines = [
        f"{plan.mode.capitalize()}Plan "
        f"({'optimized' if plan.optimized else 'unoptimized'}, "
        f"task={bound.task.task_type.value}, {bound.timeframe.describe()})"
    ]
    for i, stage in enumerate(plan.stages, start=1):
        head = f"Stage {i}: {stage.name}" if plan.optimized else stage.name.capitalize()
        if stage.note:
            head += f" ({stage.note})"
        lines.append(head)
        for nid in stage.node_ids:
            node = plan.nodes[nid]
            detail = f" {node.detail}" if node.detail else ""
            lines.append(f"  {node.kind}{detail}")
    return "\n".join(lines) + "\n"


def plan_to_json(plan: LogicalPlan) -> dict:
    return {
        "mode": plan.mode,
        "optimized": plan.optimized,
        "task": plan.bound.task.to_json(),
        "timeframe": plan.bound.timeframe.to_json(),
        "leakage": plan.bound.leakage.to_json(),
        "output_columns": list(plan.output_columns),
        "stages": [
            {
                "name": s.name,
                "note": s.note or None,
                "nodes": [
                    {
                        "id": nid,
                        "kind": plan.nodes[nid].kind,
                        "detail": plan.nodes[nid].detail,
                        "inputs": list(plan.nodes[nid].inputs),
                    }
                    for nid in s.node_ids
                ],
            }
            for s in plan.stages
        ],
    }
