"""Deterministic synthetic world for mapping, localization and control runs.

Two layouts exist. "corridor" places objects along a line that the agent
walks with a forward-facing camera; "pure_rotation" pins the agent at the
center of an object ring and only the yaw changes, which exercises the
panoramic wraparound path. Everything is seeded: a spec fixes every
observation, command and trial result bit-exactly.

Placement formula (the documented contract; tests reproduce it verbatim):
with rng = numpy.random.default_rng(seed) the draws happen in this order:

1. lateral offsets:  rng.uniform(-1.2, 1.2, n_objects)
2. heights:          rng.uniform(-0.8, 0.8, n_objects)
3. categories:       rng.integers(0, max(2, n_objects // 4), n_objects)
4. base descriptors: rng.normal(size=(n_objects - n_aliases, descriptor_dim)),
   each row l2-normalized; object i takes row i when i < n_base, and object
   j >= n_base copies row (j - n_base) % n_base (exact aliasing)
5. category bank:    rng.normal(size=(max(2, n_objects // 4), 32)), rows
   l2-normalized; each object's semantic vector is its category's row

Positions are not drawn: corridor object i sits at x = (i + 0.5) * L / n
with L = corridor_length; pure_rotation object i sits at ring angle
2 * pi * i / n, radius ring_radius.
"""

from __future__ import annotations

import csv
import math
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .control import (ControlCommand, ControlParams, PidState, continuous_step,
                      discrete_step, pid_yaw)
from .errors import IngestError, PlanningError
from .graph import MapGraph
from .ingest import FrameMeta, FrameSet, SegmentRecord, build_frameset, make_record
from .localize import localize_segments
from .planning import Plan, PlanStrategy, cost_to_all
from .planning import plan as make_plan

SEMANTIC_DIM = 32
AREA_CONST = 20000.0  # px * m^2; area_px = AREA_CONST / range^2

WORLD_MODES = ("corridor", "pure_rotation")


@dataclass(frozen=True)
class WorldSpec:
    seed: int
    n_objects: int = 20
    corridor_length: float = 30.0
    descriptor_dim: int = 64
    noise_sigma: float = 0.0
    n_aliases: int = 0
    image_width: int = 640
    image_height: int = 480
    hfov_deg: float = 90.0
    mode: str = "corridor"
    near: float = 1.0
    far: float = 5.0
    ring_radius: float = 3.0

    def __post_init__(self):
        if self.n_objects < 2:
            raise ValueError(f"n_objects must be >= 2, got {self.n_objects}")
        if self.noise_sigma < 0:
            raise ValueError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if not (0 <= self.n_aliases < self.n_objects):
            raise ValueError(f"n_aliases must be in [0, n_objects), got {self.n_aliases}")
        if self.mode not in WORLD_MODES:
            raise ValueError(f"mode must be one of {WORLD_MODES}, got {self.mode!r}")
        if not (0 < self.near < self.far):
            raise ValueError("need 0 < near < far")
        if not (0 < self.hfov_deg < 180):
            raise ValueError("hfov_deg must be in (0, 180)")


@dataclass(frozen=True)
class WorldObject:
    instance_id: int
    category_id: int
    x: float        # corridor position, or ring angle in pure_rotation
    lateral: float
    height: float
    descriptor: np.ndarray
    semantic_vector: np.ndarray


@dataclass
class World:
    spec: WorldSpec
    objects: list[WorldObject]
    category_bank: np.ndarray


def _wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    w = math.fmod(a + math.pi, 2.0 * math.pi)
    if w <= 0.0:
        w += 2.0 * math.pi
    return w - math.pi


@dataclass(frozen=True)
class AgentPose:
    x: float = 0.0
    yaw: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "yaw", _wrap_angle(self.yaw))


@dataclass(frozen=True)
class TrialResult:
    success: bool
    steps_taken: int
    final_min_path_len: float
    command_log: tuple[dict, ...] = ()

    def __post_init__(self):
        if self.success and self.final_min_path_len != 0:
            raise ValueError("a successful trial must end at path length 0")


def _unit_rows(mat: np.ndarray) -> np.ndarray:
    return mat / np.linalg.norm(mat, axis=1, keepdims=True)


def generate_world(spec: WorldSpec) -> World:
    """Build the world from the placement formula in the module docstring."""
    n = spec.n_objects
    rng = np.random.default_rng(spec.seed)
    lateral = rng.uniform(-1.2, 1.2, n)
    height = rng.uniform(-0.8, 0.8, n)
    n_categories = max(2, n // 4)
    categories = rng.integers(0, n_categories, n)
    n_base = n - spec.n_aliases
    base = _unit_rows(rng.normal(size=(n_base, spec.descriptor_dim)))
    bank = _unit_rows(rng.normal(size=(n_categories, SEMANTIC_DIM)))
    objects = []
    for i in range(n):
        if spec.mode == "corridor":
            x = (i + 0.5) * spec.corridor_length / n
        else:
            x = 2.0 * math.pi * i / n
        desc = base[i] if i < n_base else base[(i - n_base) % n_base]
        objects.append(WorldObject(
            instance_id=i,
            category_id=int(categories[i]),
            x=float(x),
            lateral=float(lateral[i]),
            height=float(height[i]),
            descriptor=desc.copy(),
            semantic_vector=bank[int(categories[i])].copy(),
        ))
    return World(spec=spec, objects=objects, category_bank=bank)


# ---------------------------------------------------------------------------
# Observation
# ---------------------------------------------------------------------------

def _stream_id(stream: str) -> int:
    return zlib.crc32(stream.encode("utf-8"))


def observe(world: World, pose: AgentPose, frame_id: int = 0, tick: int = 0,
            stream: str = "obs") -> tuple[FrameMeta, list[SegmentRecord]]:
    """Project visible objects through a pinhole camera into segment records.

    Visibility: bearing within the half FOV and (corridor mode only) range
    within (near, far). centroid_x = W/2 + f*tan(bearing) with the focal
    length f = (W/2)/tan(hfov/2); area_px = AREA_CONST / range^2. Noise is
    drawn from default_rng([seed, crc32(stream), tick]) per visible object
    in instance order, added to the true descriptor, then renormalized;
    noise_sigma = 0 skips the draw so descriptors match exactly.
    """
    spec = world.spec
    meta = FrameMeta(frame_id=frame_id, image_width=spec.image_width,
                     image_height=spec.image_height)
    half_fov = math.radians(spec.hfov_deg) / 2.0
    focal = (spec.image_width / 2.0) / math.tan(half_fov)
    visible: list[tuple[WorldObject, float, float]] = []
    for obj in world.objects:
        if spec.mode == "corridor":
            dx = obj.x - pose.x
            dy = obj.lateral
            rng_dist = math.hypot(dx, dy)
            bearing = _wrap_angle(math.atan2(dy, dx) - pose.yaw)
            if not (spec.near < rng_dist < spec.far):
                continue
        else:
            rng_dist = spec.ring_radius
            bearing = _wrap_angle(obj.x - pose.yaw)
        if abs(bearing) >= half_fov:
            continue
        visible.append((obj, rng_dist, bearing))

    noise = None
    if spec.noise_sigma > 0 and visible:
        gen = np.random.default_rng([spec.seed, _stream_id(stream), tick])
        noise = gen.normal(0.0, spec.noise_sigma,
                           size=(len(visible), spec.descriptor_dim))

    records = []
    for k, (obj, dist, bearing) in enumerate(visible):
        cx = spec.image_width / 2.0 + focal * math.tan(bearing)
        cy = spec.image_height / 2.0 + focal * obj.height / dist
        cy = min(max(cy, 0.0), float(spec.image_height))
        area = AREA_CONST / dist**2
        side = math.sqrt(area)
        bbox = (max(cx - side / 2.0, 0.0), max(cy - side / 2.0, 0.0),
                min(cx + side / 2.0, float(spec.image_width)),
                min(cy + side / 2.0, float(spec.image_height)))
        desc = obj.descriptor
        if noise is not None:
            desc = desc + noise[k]
            desc = desc / np.linalg.norm(desc)
        records.append(make_record(
            frame_id=frame_id, segment_id=k, centroid_x=cx, centroid_y=cy,
            area_px=area, bbox=bbox, descriptor=desc,
            semantic_vector=obj.semantic_vector,
            gt_instance=obj.instance_id, gt_category=obj.category_id,
        ))
    return meta, records


# ---------------------------------------------------------------------------
# Kinematics
# ---------------------------------------------------------------------------

def step_agent(world: World, pose: AgentPose, cmd: ControlCommand, dt: float,
               yaw_rate: float, v_forward: float) -> AgentPose:
    """Advance the pose one tick; done commands never move the agent.

    The yaw integrates the externally computed yaw_rate (the PID output);
    forward motion projects v_forward onto the corridor axis through the
    updated heading. pure_rotation mode rotates in place.
    """
    if not math.isfinite(dt):
        raise ValueError("dt must be finite")
    if cmd.state == "done":
        return pose
    yaw = _wrap_angle(pose.yaw + yaw_rate * dt)
    x = pose.x
    if cmd.forward and world.spec.mode == "corridor":
        x = x + v_forward * dt * math.cos(yaw)
        x = min(max(x, 0.0), world.spec.corridor_length)
    return AgentPose(x=x, yaw=yaw)


# ---------------------------------------------------------------------------
# Mapping traverses
# ---------------------------------------------------------------------------

def mapping_poses(world: World, n_frames: int) -> list[AgentPose]:
    """Evenly spaced mapping poses.

    Corridor: x from 0 to corridor_length - far so the forward-looking
    camera always has objects in range. pure_rotation: one full turn.
    """
    if n_frames < 2:
        raise ValueError("a mapping traverse needs at least 2 frames")
    spec = world.spec
    if spec.mode == "corridor":
        span = spec.corridor_length - spec.far
        return [AgentPose(x=t * span / (n_frames - 1), yaw=0.0) for t in range(n_frames)]
    return [AgentPose(x=0.0, yaw=2.0 * math.pi * t / n_frames) for t in range(n_frames)]


def mapping_traverse(world: World, n_frames: int, stream: str = "map",
                     yaw_offset: float = 0.0) -> FrameSet:
    """Observe along the mapping poses and bundle the ingest-format frames.

    yaw_offset rotates every pose (pure_rotation only); it relabels which
    heading becomes frame 0, which the pano invariance tests exercise.
    """
    metas = []
    records = []
    for t, pose in enumerate(mapping_poses(world, n_frames)):
        if yaw_offset:
            pose = AgentPose(x=pose.x, yaw=pose.yaw + yaw_offset)
        meta, recs = observe(world, pose, frame_id=t, tick=t, stream=stream)
        if not recs:
            raise IngestError(f"mapping frame {t} sees no objects; adjust the traverse")
        metas.append(meta)
        records.extend(recs)
    return build_frameset(metas, records,
                          pano_wrap=(world.spec.mode == "pure_rotation"))


# ---------------------------------------------------------------------------
# Navigation trials
# ---------------------------------------------------------------------------

def _best_match_node(records: Sequence[SegmentRecord], g: MapGraph) -> int | None:
    matches = localize_segments(records, g, layer=0, theta_loc=None)
    if not matches:
        return None
    best = max(matches, key=lambda m: (m.similarity, -m.map_node))
    return best.map_node


def _min_goal_distance(records: Sequence[SegmentRecord], meta: FrameMeta,
                       g: MapGraph, goal: int, p: ControlParams,
                       strategy: PlanStrategy,
                       cost_from_goal: Sequence[float]) -> float:
    cmd = continuous_step(records, meta, g, goal, p, strategy, cost_from_goal)
    if cmd.min_path_len is None:
        return math.inf
    return cmd.min_path_len


def run_navigation_trial(world: World, g: MapGraph, start: AgentPose, goal: int,
                         mode: str = "continuous",
                         params: ControlParams | None = None,
                         strategy: PlanStrategy = PlanStrategy.INTRA_DT,
                         max_steps: int = 500, dt: float = 0.25,
                         stream: str = "nav") -> TrialResult:
    """Run observe -> control -> step until done or the step budget runs out.

    Discrete mode builds its plan from the first non-empty observation
    (source = best-matching map node) to the goal. Success requires both
    reaching the done state and a final minimum hop distance of 0, checked
    against a fresh observation from the final pose.
    """
    if mode not in ("discrete", "continuous"):
        raise ValueError(f"mode must be discrete or continuous, got {mode!r}")
    p = params or ControlParams()
    pid = PidState()
    pose = start
    cost_from_goal = cost_to_all(g, goal, strategy)
    log: list[dict] = []
    the_plan: Plan | None = None
    cursor = 0
    done = False
    steps = 0
    for tick in range(max_steps):
        meta, recs = observe(world, pose, frame_id=0, tick=tick, stream=stream)
        if mode == "continuous":
            cmd = continuous_step(recs, meta, g, goal, p, strategy, cost_from_goal)
        else:
            if the_plan is None and recs:
                source = _best_match_node(recs, g)
                if source is not None:
                    the_plan = make_plan(g, source, goal, strategy)
                    cursor = 0
            if the_plan is None:
                cmd = ControlCommand(state="lost",
                                     yaw_offset_norm=p.explore_sign * p.explore_step,
                                     forward=False)
            else:
                cmd, cursor = discrete_step(the_plan, cursor, recs, meta, g, p)
        yaw_rate = pid_yaw(cmd.yaw_offset_norm, p, pid, dt)
        log.append({
            "tick": tick, "state": cmd.state,
            "yaw_offset_norm": cmd.yaw_offset_norm, "yaw_rate": yaw_rate,
            "forward": cmd.forward, "cursor": cursor,
            "min_path_len": cmd.min_path_len,
        })
        steps = tick + 1
        if cmd.state == "done":
            done = True
            break
        pose = step_agent(world, pose, cmd, dt, yaw_rate, p.v_forward)

    meta, recs = observe(world, pose, frame_id=0, tick=max_steps, stream=stream)
    final_min = _min_goal_distance(recs, meta, g, goal, p, strategy, cost_from_goal)
    success = done and final_min == 0
    return TrialResult(success=success, steps_taken=steps,
                       final_min_path_len=final_min if not success else 0.0,
                       command_log=tuple(log))


def write_trials_csv(results: Sequence[TrialResult], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["trial", "success", "steps_taken", "final_min_path_len"])
        for i, r in enumerate(results):
            w.writerow([i, int(r.success), r.steps_taken,
                        "inf" if math.isinf(r.final_min_path_len)
                        else f"{r.final_min_path_len:g}"])


def best_view_node(g: MapGraph, instance_id: int) -> int:
    """The map node observing the instance at the largest area (closest view)."""
    best = None
    for n in g.nodes:
        if n.gt_instance != instance_id:
            continue
        if best is None or n.area_px > best.area_px \
                or (n.area_px == best.area_px and n.node_id < best.node_id):
            best = n
    if best is None:
        raise PlanningError(f"instance {instance_id} was never observed in the map")
    return best.node_id


def sample_trial(world: World, g: MapGraph,
                 rng: np.random.Generator) -> tuple[AgentPose, int]:
    """Draw a random (start pose, goal node) pair for a navigation trial.

    The camera faces down the corridor, so the start is sampled in the
    first third and the goal object strictly ahead of it with enough
    clearance to be seen and approached.
    """
    spec = world.spec
    start_x = float(rng.uniform(0.0, spec.corridor_length / 3.0))
    margin = spec.near + 2.0
    candidates = [o for o in world.objects
                  if start_x + margin < o.x < spec.corridor_length - 0.5]
    if not candidates:
        raise ValueError("no goal candidates ahead of the sampled start")
    goal_obj = candidates[int(rng.integers(len(candidates)))]
    return AgentPose(x=start_x, yaw=0.0), best_view_node(g, goal_obj.instance_id)


# ---------------------------------------------------------------------------
# Association evaluation
# ---------------------------------------------------------------------------

def eval_association(map_views: FrameSet, query_views: FrameSet) -> tuple[float, float]:
    """Top-1 descriptor matching accuracy at instance and category level."""
    map_recs = list(map_views.all_records())
    query_recs = list(query_views.all_records())
    if not map_recs or not query_recs:
        raise IngestError("association evaluation needs non-empty view sets")
    for rec in map_recs + query_recs:
        if rec.gt_instance is None or rec.gt_category is None:
            raise IngestError(
                f"record (frame {rec.frame_id}, segment {rec.segment_id}) "
                "lacks ground-truth labels")
    mat = np.stack([r.descriptor for r in map_recs])
    inst = 0
    cat = 0
    for q in query_recs:
        j = int(np.argmax(mat @ q.descriptor))
        if map_recs[j].gt_instance == q.gt_instance:
            inst += 1
        if map_recs[j].gt_category == q.gt_category:
            cat += 1
    n = len(query_recs)
    return inst / n, cat / n


def bbox_iou(a: Sequence[float], b: Sequence[float]) -> float:
    ix0 = max(a[0], b[0])
    iy0 = max(a[1], b[1])
    ix1 = min(a[2], b[2])
    iy1 = min(a[3], b[3])
    iw = max(0.0, ix1 - ix0)
    ih = max(0.0, iy1 - iy0)
    inter = iw * ih
    if inter == 0.0:
        return 0.0
    area_a = (a[2] - a[0]) * (a[3] - a[1])
    area_b = (b[2] - b[0]) * (b[3] - b[1])
    return inter / (area_a + area_b - inter)


def assign_labels_by_iou(reference: FrameSet, unlabeled: FrameSet,
                         min_iou: float = 0.2) -> FrameSet:
    """Copy ground-truth labels onto records by best bbox overlap per frame.

    Records whose best overlap stays below min_iou keep their labels as-is;
    frames present only on one side pass through untouched.
    """
    out_records: list[SegmentRecord] = []
    for meta in unlabeled.frames:
        refs = reference.records_of(meta.frame_id) if meta.frame_id < reference.n_frames else []
        for rec in unlabeled.records_of(meta.frame_id):
            best_ref = None
            best_iou = 0.0
            for ref in refs:
                iou = bbox_iou(rec.bbox, ref.bbox)
                if iou > best_iou:
                    best_iou = iou
                    best_ref = ref
            if best_ref is not None and best_iou >= min_iou:
                rec = make_record(
                    frame_id=rec.frame_id, segment_id=rec.segment_id,
                    centroid_x=rec.centroid_x, centroid_y=rec.centroid_y,
                    area_px=rec.area_px, bbox=rec.bbox,
                    descriptor=rec.descriptor,
                    semantic_vector=rec.semantic_vector,
                    gt_instance=best_ref.gt_instance,
                    gt_category=best_ref.gt_category,
                )
            out_records.append(rec)
    return build_frameset(unlabeled.frames, out_records, pano_wrap=unlabeled.pano_wrap)


# ---------------------------------------------------------------------------
# Benchmark configurations
# ---------------------------------------------------------------------------

def recall_benchmark_spec(noise_sigma: float = 0.3, n_aliases: int = 5) -> WorldSpec:
    """The aliased corridor used by the localization benchmark."""
    return WorldSpec(seed=42, n_objects=20, corridor_length=30.0,
                     descriptor_dim=64, noise_sigma=noise_sigma,
                     n_aliases=n_aliases, near=1.0, far=5.0)


def nav_benchmark_spec() -> WorldSpec:
    """The corridor used by the navigation and dominance benchmarks."""
    return WorldSpec(seed=42, n_objects=20, corridor_length=24.0,
                     descriptor_dim=64, noise_sigma=0.0, n_aliases=0,
                     near=1.0, far=6.5)


def pano_benchmark_spec() -> WorldSpec:
    """The object ring used by the pano invariance checks."""
    return WorldSpec(seed=42, n_objects=12, corridor_length=30.0,
                     descriptor_dim=64, noise_sigma=0.0, n_aliases=0,
                     mode="pure_rotation", ring_radius=3.0)
