"""Batched iterative constraint solver over continuous 3D layouts.

The loop mirrors the classic repair scheme: place everything, relax basic
physics, then repeatedly pick a small batch of violated constraints and
repair just those, clamping results back into their regions, while
tracking the best layout seen. The batch-repair slot is pluggable; the
default is a seeded greedy local search so whole solves are deterministic
and reproducible. An LLM-backed proposer can be dropped into the same
slot.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Iterable, Protocol, Sequence

from sthl import scene
from sthl.constraints import CompiledConstraint, ConstraintSet, evaluate, format_verdict_line
from sthl.errors import PlacementError
from sthl.scene import Region, SceneLayout, SceneObject, Transform

_PAD = 1e-6  # clearance added when separating colliding pairs


@dataclass(frozen=True)
class SolverConfig:
    batch_size: int = 3
    max_iterations: int = 5
    rng_seed: int = 0
    moves_per_proposal: int = 8
    candidate_samples: int = 64
    translation_step: float = 0.1
    rotation_steps: tuple[float, ...] = (0.0, 90.0, 180.0, 270.0)
    relaxation_sweeps: int = 32
    support_tolerance: float = scene.SUPPORT_TOLERANCE

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ValueError("batch size k must be >= 1")
        if self.max_iterations < 0:
            raise ValueError("max iterations T must be >= 0")


@dataclass
class IterationRecord:
    index: int
    layout: SceneLayout
    unsatisfied: tuple[int, ...]
    ratio: float
    batch: tuple[int, ...] = ()
    moved: tuple[str, ...] = ()


@dataclass
class SolveReport:
    iterations: list[IterationRecord]
    best_index: int
    best_layout: SceneLayout
    best_ratio: float
    terminated: str  # 'allSatisfied' | 'iterationLimit'


class BatchSolver(Protocol):
    """Repair slot: adjust the layout to satisfy a batch of constraints.

    Implementations may move or rotate only objects involved in the batch;
    the full constraint set is available as context for scoring.
    """

    def __call__(
        self,
        layout: SceneLayout,
        batch: Sequence[CompiledConstraint],
        cs: ConstraintSet,
        cfg: SolverConfig,
        rng: random.Random,
    ) -> tuple[SceneLayout, set[str]]: ...


# ---------------------------------------------------------------------------
# Evaluation helpers


def _context(cs: ConstraintSet, layout: SceneLayout, cfg: SolverConfig):
    ctx = cs.context(layout, rng_seed=cfg.rng_seed)
    ctx.support_tolerance = cfg.support_tolerance
    return ctx


def _results(cs: ConstraintSet, layout: SceneLayout, cfg: SolverConfig) -> dict[int, bool]:
    ctx = _context(cs, layout, cfg)
    return {c.id: evaluate(c, ctx) for c in cs.constraints}


def _unsatisfied(results: dict[int, bool]) -> tuple[int, ...]:
    return tuple(cid for cid, ok in sorted(results.items()) if not ok)


def _ratio(results: dict[int, bool]) -> float:
    if not results:
        return 1.0
    return sum(results.values()) / len(results)


def _movable_ids(batch: Iterable[CompiledConstraint], layout: SceneLayout) -> list[str]:
    involved: set[str] = set()
    for constraint in batch:
        involved |= constraint.involved
    return [obj.id for obj in layout.objects if obj.id in involved]


# ---------------------------------------------------------------------------
# Initial placement


def _rotated_extents(obj: SceneObject, ry: float) -> tuple[float, float, float]:
    ex, ey, ez = obj.extents()
    if ry % 180.0 == 90.0:
        ex, ez = ez, ex
    return ex, ey, ez


def initial_placement(
    objects: Sequence[SceneObject],
    regions: Sequence[Region],
    cs: ConstraintSet,
    cfg: SolverConfig,
    rng: random.Random | None = None,
) -> SceneLayout:
    """Greedy seeded baseline layout.

    Objects are placed largest footprint first so bulky furniture claims
    space early. For each object, `candidate_samples` floor positions are
    drawn inside its region (rotation drawn from `rotation_steps`) and the
    one violating the fewest constraints among already-placed objects wins.
    Objects carrying an explicit position from the program keep it.
    """
    rng = rng or random.Random(cfg.rng_seed)
    layout = SceneLayout(regions=list(regions), objects=[])
    order = sorted(
        range(len(objects)),
        key=lambda i: (-objects[i].extents()[0] * objects[i].extents()[2], i),
    )
    placed: dict[int, SceneObject] = {}

    for index in order:
        obj = objects[index].copy()
        region = layout.region(obj.region)
        if obj.preplaced:
            layout.objects.append(obj)
            placed[index] = obj
            continue
        min_x, min_z, max_x, max_z = region.bounds()
        ex, ey, ez = obj.extents()
        fits_unrotated = ex <= max_x - min_x and ez <= max_z - min_z
        fits_rotated = ez <= max_x - min_x and ex <= max_z - min_z
        if not fits_unrotated and not fits_rotated:
            raise PlacementError(
                f"object {obj.id!r} footprint {ex:.3f}x{ez:.3f} exceeds region "
                f"{region.id!r} bounding box"
            )

        relevant = [
            c
            for c in cs.constraints
            if obj.id in c.involved
            and all(
                name == obj.id or name in {o.id for o in layout.objects} or
                any(name == r.id for r in layout.regions)
                for name in c.involved
            )
        ]
        best: tuple[int, int] | None = None  # (violations, candidate index)
        best_transform: Transform | None = None
        layout.objects.append(obj)
        for attempt in range(cfg.candidate_samples):
            ry = rng.choice(cfg.rotation_steps)
            rex, rey, rez = _rotated_extents(obj, ry)
            if rex > max_x - min_x or rez > max_z - min_z:
                continue
            x = rng.uniform(min_x + rex / 2.0, max_x - rex / 2.0)
            z = rng.uniform(min_z + rez / 2.0, max_z - rez / 2.0)
            candidate = Transform(
                pos=(x, region.floor_y + rey / 2.0, z),
                rot=(0.0, 0.0, ry),
                scale=obj.transform.scale,
            )
            obj.transform = candidate
            if not scene.inside(obj, region):
                continue
            ctx = _context(cs, layout, cfg)
            violations = sum(1 for c in relevant if not evaluate(c, ctx))
            if best is None or violations < best[0]:
                best = (violations, attempt)
                best_transform = candidate
                if violations == 0:
                    break
        if best_transform is None:
            # No sample landed fully inside (e.g. concave rooms); fall back
            # to the bounding-box center and let the solve loop repair it.
            rex, rey, rez = _rotated_extents(obj, 0.0)
            best_transform = Transform(
                pos=((min_x + max_x) / 2.0, region.floor_y + rey / 2.0, (min_z + max_z) / 2.0),
                rot=(0.0, 0.0, 0.0),
                scale=obj.transform.scale,
            )
        obj.transform = best_transform
        placed[index] = obj

    # Restore declaration order; placement order was size-driven only.
    layout.objects = [placed[i] for i in range(len(objects))]
    return layout


# ---------------------------------------------------------------------------
# Physics relaxation


def physics_relaxation(layout: SceneLayout, cs: ConstraintSet, cfg: SolverConfig) -> SceneLayout:
    """Drop unsupported objects onto the nearest surface, then separate
    colliding pairs along minimum-translation directions (best effort)."""
    layout = layout.copy()
    _drop_pass(layout, cfg)
    for _ in range(cfg.relaxation_sweeps):
        if not _separation_sweep(layout, cs):
            break
    return layout


def _drop_pass(layout: SceneLayout, cfg: SolverConfig) -> None:
    order = sorted(layout.objects, key=lambda o: (scene.bottom_y(o), o.id))
    for obj in order:
        if scene.supported(obj, layout, cfg.support_tolerance):
            continue
        target = scene.support_surface_y(obj, layout)
        bottom = scene.bottom_y(obj)
        delta = target - bottom
        if abs(delta) > 1e-12:
            x, y, z = obj.transform.pos
            obj.transform = Transform((x, y + delta, z), obj.transform.rot, obj.transform.scale)


def _separation_sweep(layout: SceneLayout, cs: ConstraintSet) -> bool:
    any_collision = False
    n = len(layout.objects)
    for i in range(n):
        for j in range(i + 1, n):
            a, b = layout.objects[i], layout.objects[j]
            if tuple(sorted((a.id, b.id))) in cs.allow_collide:
                continue
            depth, axis = scene.minimum_translation(a, b)
            if depth <= 1e-9:
                continue  # face contact is not a collision
            any_collision = True
            shift = (depth / 2.0 + _PAD) * axis
            _translate(a, -shift)
            _translate(b, shift)
    return any_collision


def _translate(obj: SceneObject, delta) -> None:
    x, y, z = obj.transform.pos
    obj.transform = Transform(
        (x + float(delta[0]), y + float(delta[1]), z + float(delta[2])),
        obj.transform.rot,
        obj.transform.scale,
    )


# ---------------------------------------------------------------------------
# Batch selection


def select_batch(
    unsatisfied: Sequence[int],
    k: int,
    cs: ConstraintSet,
    object_ids: set[str],
    history: Sequence[Sequence[int]] = (),
) -> list[int]:
    """Pick min(k, len(unsatisfied)) constraints to repair next.

    Ordering: constraints touching fewer objects first, then by id. A
    constraint already unsatisfied in the two preceding iterations is
    promoted to the front so it cannot starve.
    """
    stale: set[int] = set()
    if len(history) >= 2:
        stale = set(history[-1]) & set(history[-2]) & set(unsatisfied)

    def sort_key(cid: int) -> tuple[int, int, int]:
        constraint = cs.by_id(cid)
        n_objects = len(constraint.involved & object_ids)
        return (0 if cid in stale else 1, n_objects, cid)

    return sorted(unsatisfied, key=sort_key)[: max(0, min(k, len(unsatisfied)))]


# ---------------------------------------------------------------------------
# Local-search batch repair (default BatchSolver)


def local_search_batch_solve(
    layout: SceneLayout,
    batch: Sequence[CompiledConstraint],
    cs: ConstraintSet,
    cfg: SolverConfig,
    rng: random.Random | None = None,
) -> tuple[SceneLayout, set[str]]:
    """Greedy repair: move one batch object at a time, keeping only moves
    that strictly raise the global satisfied count."""
    rng = rng or random.Random(cfg.rng_seed)
    layout = layout.copy()
    movable = _movable_ids(batch, layout)
    moved: set[str] = set()
    if not movable:
        return layout, moved

    by_object: dict[str, list[CompiledConstraint]] = {
        name: [c for c in cs.constraints if name in c.involved] for name in movable
    }
    results = _results(cs, layout, cfg)

    for _ in range(cfg.moves_per_proposal):
        if all(results[c.id] for c in batch):
            break
        best_key: tuple[float, float, int, int] | None = None
        best_move: tuple[SceneObject, Transform, dict[int, bool]] | None = None
        for obj_index, name in enumerate(movable):
            obj = layout.object(name)
            original = obj.transform
            affected = by_object[name]
            before = sum(results[c.id] for c in affected)
            for cand_index, candidate in enumerate(_candidates(obj, layout, cfg, rng)):
                obj.transform = candidate
                ctx = _context(cs, layout, cfg)
                outcome = {c.id: evaluate(c, ctx) for c in affected}
                gain = sum(outcome.values()) - before
                if gain > 0:
                    displacement = _distance(original.pos, candidate.pos)
                    key = (-gain, displacement, obj_index, cand_index)
                    if best_key is None or key < best_key:
                        best_key = key
                        best_move = (obj, candidate, outcome)
            obj.transform = original
        if best_move is None:
            break
        obj, transform, outcome = best_move
        obj.transform = transform
        results.update(outcome)
        moved.add(obj.id)
    return layout, moved


def _distance(a: tuple[float, float, float], b: tuple[float, float, float]) -> float:
    return ((a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2 + (a[2] - b[2]) ** 2) ** 0.5


def _rest_height(
    obj: SceneObject, layout: SceneLayout, x: float, z: float, ey: float, fx: float, fz: float
) -> float:
    """Center height at which the object rests if dropped at (x, z).

    Uses axis-aligned footprints, which is exact for the right-angle yaw
    steps the search proposes.
    """
    region = layout.region_of(obj)
    best = region.floor_y
    own_area = fx * fz
    if own_area <= 0:
        return best + ey / 2.0
    for other in layout.objects:
        if other.id == obj.id:
            continue
        corners = scene.world_box(other).corners()
        o_min_x, o_max_x = float(corners[:, 0].min()), float(corners[:, 0].max())
        o_min_z, o_max_z = float(corners[:, 2].min()), float(corners[:, 2].max())
        overlap_x = min(x + fx / 2.0, o_max_x) - max(x - fx / 2.0, o_min_x)
        overlap_z = min(z + fz / 2.0, o_max_z) - max(z - fz / 2.0, o_min_z)
        if overlap_x <= 0 or overlap_z <= 0:
            continue
        if overlap_x * overlap_z >= scene.SUPPORT_OVERLAP * own_area:
            best = max(best, float(corners[:, 1].max()))
    return best + ey / 2.0


def _candidates(
    obj: SceneObject, layout: SceneLayout, cfg: SolverConfig, rng: random.Random
) -> list[Transform]:
    region = layout.region_of(obj)
    min_x, min_z, max_x, max_z = region.bounds()
    t = obj.transform
    ex, ey, ez = obj.extents()
    fx, fz = (ez, ex) if t.rot[2] % 180.0 == 90.0 else (ex, ez)
    step = cfg.translation_step
    out: list[Transform] = []

    # Local grid around the current position.
    offsets: list[tuple[float, float, float]] = []
    for m in (-2, -1, 1, 2):
        offsets.append((m * step, 0.0, 0.0))
        offsets.append((0.0, 0.0, m * step))
        offsets.append((0.0, m * step, 0.0))
    for mx in (-1, 1):
        for mz in (-1, 1):
            offsets.append((mx * step, 0.0, mz * step))
    for dx, dy, dz in offsets:
        out.append(Transform((t.pos[0] + dx, t.pos[1] + dy, t.pos[2] + dz), t.rot, t.scale))

    # Snap to the nearest support surface at the current spot.
    target = scene.support_surface_y(obj, layout)
    delta = target - scene.bottom_y(obj)
    if abs(delta) > 1e-9:
        out.append(Transform((t.pos[0], t.pos[1] + delta, t.pos[2]), t.rot, t.scale))

    # On top of each other object (reaches stacking arrangements directly).
    for other in layout.objects:
        if other.id == obj.id:
            continue
        ox, _, oz = other.transform.pos
        y = scene.top_y(other) + ey / 2.0
        out.append(Transform((ox, y, oz), t.rot, t.scale))

    # Yaw rotations.
    for ry in cfg.rotation_steps:
        if ry != t.rot[2]:
            out.append(Transform(t.pos, (t.rot[0], t.rot[1], ry), t.scale))

    # Seeded random jumps across the region; even draws land at rest height,
    # odd draws sample the free vertical range.
    for i in range(cfg.candidate_samples):
        lo_x, hi_x = min_x + fx / 2.0, max_x - fx / 2.0
        lo_z, hi_z = min_z + fz / 2.0, max_z - fz / 2.0
        if lo_x > hi_x or lo_z > hi_z:
            break
        x = rng.uniform(lo_x, hi_x)
        z = rng.uniform(lo_z, hi_z)
        if i % 2 == 0 or region.height <= ey:
            y = _rest_height(obj, layout, x, z, ey, fx, fz)
        else:
            y = rng.uniform(region.floor_y + ey / 2.0, region.floor_y + region.height - ey / 2.0)
        out.append(Transform((x, y, z), t.rot, t.scale))
    return out


# ---------------------------------------------------------------------------
# Bounds enforcement


def enforce_bounds(
    layout: SceneLayout, cs: ConstraintSet, only: set[str] | None = None
) -> tuple[SceneLayout, set[str]]:
    """Clamp objects back into their regions with minimal translations.

    Objects granted `allowOutside` are untouched. When `only` is given,
    clamping is restricted to those objects (the solve loop passes the
    batch's objects to preserve batch isolation).
    """
    layout = layout.copy()
    adjusted: set[str] = set()
    for obj in layout.objects:
        if only is not None and obj.id not in only:
            continue
        if obj.id in cs.allow_outside:
            continue
        region = layout.region_of(obj)
        if scene.inside(obj, region):
            continue
        before = obj.transform.pos
        _clamp_vertical(obj, region)
        _clamp_horizontal(obj, region)
        if obj.transform.pos != before:
            adjusted.add(obj.id)
    return layout, adjusted


def _clamp_vertical(obj: SceneObject, region: Region) -> None:
    corners = scene.world_box(obj).corners()
    bottom, top = float(corners[:, 1].min()), float(corners[:, 1].max())
    delta = 0.0
    if bottom < region.floor_y:
        delta = region.floor_y - bottom
    elif top > region.floor_y + region.height:
        delta = region.floor_y + region.height - top
        delta = max(delta, region.floor_y - bottom)  # keep the bottom above the floor
    if delta:
        _translate(obj, (0.0, delta, 0.0))


def _clamp_horizontal(obj: SceneObject, region: Region) -> None:
    polygon = region.vertices
    n = len(polygon)
    for _ in range(8):
        pushed = False
        corners = scene.world_box(obj).corners()[:, [0, 2]]
        for i in range(n):
            ax, az = polygon[i]
            bx, bz = polygon[(i + 1) % n]
            dx, dz = bx - ax, bz - az
            length = (dx * dx + dz * dz) ** 0.5
            if length < 1e-12:
                continue
            nx, nz = -dz / length, dx / length  # inward normal for CCW
            worst = min((cx - ax) * nx + (cz - az) * nz for cx, cz in corners)
            if worst < -1e-12:
                _translate(obj, (-worst * nx, 0.0, -worst * nz))
                corners = scene.world_box(obj).corners()[:, [0, 2]]
                pushed = True
        if not pushed:
            break


# ---------------------------------------------------------------------------
# Full solve loop


def solve(
    objects: Sequence[SceneObject],
    regions: Sequence[Region],
    cs: ConstraintSet,
    cfg: SolverConfig | None = None,
    batch_solver: BatchSolver | None = None,
) -> SolveReport:
    """Run the full repair loop and return the best layout seen.

    Iteration 0 records the relaxed initial placement; iterations 1..T each
    repair one batch of violated constraints. The loop exits early once
    everything is satisfied. Identical inputs and seed produce an identical
    report.
    """
    cfg = cfg or SolverConfig()
    proposer: BatchSolver = batch_solver or local_search_batch_solve
    rng = random.Random(cfg.rng_seed)
    object_ids = {obj.id for obj in objects}

    layout = initial_placement(objects, regions, cs, cfg, rng)
    layout = physics_relaxation(layout, cs, cfg)
    results = _results(cs, layout, cfg)
    records = [
        IterationRecord(0, layout.copy(), _unsatisfied(results), _ratio(results))
    ]
    history: list[tuple[int, ...]] = [records[0].unsatisfied]

    for t in range(1, cfg.max_iterations + 1):
        unsatisfied = records[-1].unsatisfied
        if not unsatisfied:
            break
        batch_ids = select_batch(unsatisfied, cfg.batch_size, cs, object_ids, history)
        batch = [cs.by_id(cid) for cid in batch_ids]
        layout, moved = proposer(layout, batch, cs, cfg, rng)
        batch_objects = set(_movable_ids(batch, layout))
        layout, clamped = enforce_bounds(layout, cs, only=batch_objects)
        results = _results(cs, layout, cfg)
        records.append(
            IterationRecord(
                index=t,
                layout=layout.copy(),
                unsatisfied=_unsatisfied(results),
                ratio=_ratio(results),
                batch=tuple(batch_ids),
                moved=tuple(sorted(moved | clamped)),
            )
        )
        history.append(records[-1].unsatisfied)

    best = records[0]
    for record in records[1:]:
        if record.ratio > best.ratio:
            best = record
    terminated = "allSatisfied" if best.ratio == 1.0 else "iterationLimit"
    return SolveReport(
        iterations=records,
        best_index=best.index,
        best_layout=best.layout,
        best_ratio=best.ratio,
        terminated=terminated,
    )


# ---------------------------------------------------------------------------
# Report rendering


def render_report(
    report: SolveReport, cs: ConstraintSet, cfg: SolverConfig | None = None
) -> str:
    """Human-readable solve report with the per-constraint verdict table."""
    cfg = cfg or SolverConfig()
    lines = ["# sthl solve report"]
    if cfg is not None:
        lines.append(
            f"config: seed={cfg.rng_seed} k={cfg.batch_size} T={cfg.max_iterations}"
        )
    lines.append(f"terminated: {report.terminated}")
    lines.append(f"best: iteration={report.best_index} ratio={report.best_ratio!r}")
    for record in report.iterations:
        batch = ",".join(map(str, record.batch)) if record.batch else "-"
        moved = ",".join(record.moved) if record.moved else "-"
        lines.append(
            f"iteration {record.index}: ratio={record.ratio!r} "
            f"unsatisfied={len(record.unsatisfied)} batch={batch} moved={moved}"
        )
    lines.append("# constraints")
    ctx = cs.context(report.best_layout, rng_seed=cfg.rng_seed)
    for constraint in cs.constraints:
        lines.append(format_verdict_line(constraint, evaluate(constraint, ctx)))
    return "\n".join(lines) + "\n"
