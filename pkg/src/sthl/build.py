"""Bridge from checked programs to solvable scenes.

Region geometry comes from `pos`/`scale`/`rot` assignments on region
declarations: a region is a rectangular room centered at (pos.x, pos.z)
with floor height pos.y, footprint scale.x by scale.z, ceiling height
scale.y, and optional yaw from rot (x and z rotations must be zero).
Regions without geometry assignments default to a 10x3x10 room at the
origin.

Objects get their world extents from their `scale` assignment (base
dimensions stay 1x1x1), an optional initial position from `pos`, and
their region from explicit `inside` assertions (first declared region
otherwise).
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field as dataclass_field

from sthl.assets import AssetEntity
from sthl.constraints import (
    EvalContext,
    evaluate_expression,
    freeze_expression,
    infer_region_assignments,
)
from sthl.dsl.nodes import Assign, Declare, Expr
from sthl.dsl.typecheck import TypedProgram
from sthl.errors import EvalError
from sthl.scene import Connection, Region, SceneLayout, SceneObject, Transform, WALL_THICKNESS

DEFAULT_REGION_SIZE = (10.0, 3.0, 10.0)


@dataclass
class BuiltScene:
    objects: list[SceneObject]
    regions: list[Region]
    connections: list[Connection] = dataclass_field(default_factory=list)

    def entities(self) -> list[AssetEntity]:
        """Asset-query entities for every object, in declaration order."""
        return [
            AssetEntity(
                kind="object",
                category=obj.category,
                color=obj.color,
                material=obj.material,
                features=obj.features,
            )
            for obj in self.objects
        ]


def _category_from_id(name: str) -> str:
    return name.replace("_", " ")


def _evaluate_literal(expr: Expr, bindings: dict[str, Expr], seed: int):
    """Evaluate a layout-independent assignment expression."""
    ctx = EvalContext(SceneLayout(), bindings, rng_seed=seed)
    try:
        return evaluate_expression(expr, ctx)
    except EvalError as exc:
        raise EvalError(
            f"assignment must not depend on object placement: {exc}"
        ) from None


def build_scene(typed: TypedProgram, seed: int = 0, wall_thickness: float = WALL_THICKNESS) -> BuiltScene:
    """Materialize the objects and regions a program describes."""
    rng = random.Random(seed)
    env: dict[str, Expr] = {}
    object_props: dict[str, dict[str, object]] = {}
    region_props: dict[str, dict[str, object]] = {}

    for stmt in typed.program.statements:
        if isinstance(stmt, Declare):
            if stmt.kind == "object":
                object_props[stmt.name] = {}
            elif stmt.kind == "region":
                region_props[stmt.name] = {}
        elif isinstance(stmt, Assign):
            frozen = freeze_expression(stmt.value, env, rng, substitute=True)
            if stmt.prop is None:
                env[stmt.target] = frozen
                continue
            value = _evaluate_literal(frozen, env, seed)
            if stmt.target in object_props:
                object_props[stmt.target][stmt.prop] = value
            else:
                region_props[stmt.target][stmt.prop] = value

    regions = [
        _build_region(name, props, wall_thickness) for name, props in region_props.items()
    ]
    assignments = infer_region_assignments(typed)
    objects = [
        _build_object(name, props, assignments.get(name, ""))
        for name, props in object_props.items()
    ]
    for region in regions:
        region.validate()
    return BuiltScene(objects=objects, regions=regions)


def _build_object(name: str, props: dict[str, object], region: str) -> SceneObject:
    scale = tuple(props.get("scale", (1.0, 1.0, 1.0)))  # type: ignore[arg-type]
    rot = tuple(props.get("rot", (0.0, 0.0, 0.0)))  # type: ignore[arg-type]
    preplaced = "pos" in props
    pos = tuple(props.get("pos", (0.0, scale[1] / 2.0, 0.0)))  # type: ignore[arg-type]
    return SceneObject(
        id=name,
        category=_category_from_id(name),
        dimensions=(1.0, 1.0, 1.0),
        color=str(props.get("color", "")),
        material=str(props.get("material", "")),
        features=str(props.get("features", "")),
        transform=Transform(pos=pos, rot=rot, scale=scale),
        region=region,
        preplaced=preplaced,
    )


def _build_region(name: str, props: dict[str, object], wall_thickness: float) -> Region:
    pos = tuple(props.get("pos", (0.0, 0.0, 0.0)))  # type: ignore[arg-type]
    size = tuple(props.get("scale", DEFAULT_REGION_SIZE))  # type: ignore[arg-type]
    rot = tuple(props.get("rot", (0.0, 0.0, 0.0)))  # type: ignore[arg-type]
    if rot[0] != 0.0 or rot[1] != 0.0:
        raise ValueError(
            f"region {name!r}: only yaw rotation is supported for room footprints"
        )
    cx, floor_y, cz = pos
    half_w, half_d = size[0] / 2.0, size[2] / 2.0
    corners = [(-half_w, -half_d), (half_w, -half_d), (half_w, half_d), (-half_w, half_d)]
    yaw = math.radians(rot[2])
    c, s = math.cos(yaw), math.sin(yaw)
    vertices = tuple(
        (cx + c * x + s * z, cz - s * x + c * z) for x, z in corners
    )
    return Region(
        id=name,
        vertices=vertices,
        floor_y=floor_y,
        height=size[1],
        wall_thickness=wall_thickness,
    )
