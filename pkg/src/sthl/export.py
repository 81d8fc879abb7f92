"""Scene package assembly and round-trip IO.

A package directory holds four files:

- ``scene.json``    versioned scene document (objects with engine-ready
  transforms, regions with wall slabs, connections, solver metadata)
- ``manifest.tsv``  per-object asset rows (uri, verdict, score, native
  extents, base dimensions)
- ``metadata.sthl`` the canonical program text (always re-parses)
- ``report.txt``    solve report with the per-constraint verdict table

Coordinates are written unchanged in the left-handed convention, so engine
importers apply no axis flip. ``rotationXZY`` triples are degrees in
application order x, z, y.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from sthl import scene as scene_mod
from sthl.assets import AssetDecision
from sthl.constraints import (
    CompiledConstraint,
    ConstraintSet,
    compile_constraints,
    evaluate,
)
from sthl.dsl import Program, parse, print_program, typecheck
from sthl.errors import AssetMismatch, FormatError, IoError
from sthl.scene import Connection, Region, SceneLayout, SceneObject, Transform, thicken_walls
from sthl.solver import SolveReport, SolverConfig, render_report, solve

SCHEMA_VERSION = 1

SCENE_FILE = "scene.json"
MANIFEST_FILE = "manifest.tsv"
METADATA_FILE = "metadata.sthl"
REPORT_FILE = "report.txt"

Vec = tuple[float, float, float]


@dataclass(frozen=True)
class PackagedObject:
    id: str
    category: str
    asset_ref: str
    position: Vec
    rotation_xzy: Vec
    scale: Vec  # engine scale: world extents / asset native extents
    region: str
    color: str = ""
    material: str = ""
    features: str = ""
    collider: str = "box"
    static: bool = False


@dataclass(frozen=True)
class ManifestEntry:
    object_id: str
    asset_uri: str
    verdict: str
    score: float
    native_extents: Vec
    dimensions: Vec


@dataclass(frozen=True)
class Light:
    id: str
    position: Vec
    intensity: float = 1.0
    color: str = "white"


@dataclass
class ScenePackage:
    objects: list[PackagedObject]
    regions: list[Region]
    connections: list[Connection]
    manifest: list[ManifestEntry]
    metadata_text: str
    report_text: str
    solver_meta: dict = field(default_factory=dict)
    lights: list[Light] = field(default_factory=list)
    snap_reverted: tuple[str, ...] = ()

    # ------------------------------------------------------------------

    def program(self) -> Program:
        return parse(self.metadata_text)

    def manifest_for(self, object_id: str) -> ManifestEntry:
        for entry in self.manifest:
            if entry.object_id == object_id:
                return entry
        raise KeyError(object_id)

    def to_layout(self) -> SceneLayout:
        """Rebuild the internal scene model from packaged transforms."""
        objects = []
        for packed in self.objects:
            entry = self.manifest_for(packed.id)
            world = tuple(
                s * n for s, n in zip(packed.scale, entry.native_extents)
            )
            transform_scale = tuple(
                w / d if d else 1.0 for w, d in zip(world, entry.dimensions)
            )
            objects.append(
                SceneObject(
                    id=packed.id,
                    category=packed.category,
                    dimensions=entry.dimensions,
                    color=packed.color,
                    material=packed.material,
                    features=packed.features,
                    transform=Transform(
                        pos=packed.position,
                        rot=packed.rotation_xzy,
                        scale=transform_scale,  # type: ignore[arg-type]
                    ),
                    region=packed.region,
                )
            )
        return SceneLayout(
            regions=list(self.regions),
            objects=objects,
            connections=list(self.connections),
        )

    def verdicts_for(self, object_id: str, seed: int | None = None) -> list[tuple[CompiledConstraint, bool]]:
        """Re-evaluate the embedded constraints that involve one object."""
        seed = seed if seed is not None else int(self.solver_meta.get("seed", 0))
        typed = typecheck(self.program())
        cs = compile_constraints(typed, seed=seed)
        layout = self.to_layout()
        ctx = cs.context(layout, rng_seed=seed)
        return [
            (c, evaluate(c, ctx)) for c in cs.constraints if object_id in c.involved
        ]


# ---------------------------------------------------------------------------
# Assembly


def assemble(
    layout: SceneLayout,
    decisions: dict[str, AssetDecision],
    cs: ConstraintSet,
    report: SolveReport,
    program: Program,
    cfg: SolverConfig | None = None,
    default_native_extents: Vec | None = None,
) -> ScenePackage:
    """Combine a solved layout with asset decisions into a package.

    Per-axis engine scale is declared world extents over the asset's
    native extents (AssetMismatch when extents are unknown and no default
    is given). Supported objects are snapped down/up to exact contact with
    their supporting surface; a snap that would flip any previously
    satisfied constraint is reverted and flagged.
    """
    cfg = cfg or SolverConfig()
    missing = [obj.id for obj in layout.objects if obj.id not in decisions]
    if missing:
        raise ValueError(f"asset decisions missing for objects: {', '.join(missing)}")

    layout, reverted = _snap_supported(layout, cs, cfg)

    packaged = []
    manifest = []
    for obj in layout.objects:
        decision = decisions[obj.id]
        native = decision.model.native_extents or default_native_extents
        if native is None:
            raise AssetMismatch(
                f"asset for object {obj.id!r} has no native bounding-box extents"
            )
        world = obj.extents()
        engine_scale = tuple(w / n for w, n in zip(world, native))
        packaged.append(
            PackagedObject(
                id=obj.id,
                category=obj.category,
                asset_ref=decision.model.uri,
                position=obj.transform.pos,
                rotation_xzy=obj.transform.rot,
                scale=engine_scale,  # type: ignore[arg-type]
                region=obj.region,
                color=obj.color,
                material=obj.material,
                features=obj.features,
                collider="box",
                static=_rests_on_floor(obj, layout),
            )
        )
        manifest.append(
            ManifestEntry(
                object_id=obj.id,
                asset_uri=decision.model.uri,
                verdict=decision.verdict,
                score=decision.best_score,
                native_extents=tuple(native),  # type: ignore[arg-type]
                dimensions=obj.dimensions,
            )
        )

    metadata_text = print_program(program)
    report_text = render_report(report, cs, cfg)
    return ScenePackage(
        objects=packaged,
        regions=list(layout.regions),
        connections=list(layout.connections),
        manifest=manifest,
        metadata_text=metadata_text,
        report_text=report_text,
        solver_meta={
            "seed": cfg.rng_seed,
            "k": cfg.batch_size,
            "T": cfg.max_iterations,
            "terminated": report.terminated,
            "bestIteration": report.best_index,
            "bestRatio": report.best_ratio,
        },
        snap_reverted=reverted,
    )


def _rests_on_floor(obj: SceneObject, layout: SceneLayout) -> bool:
    region = layout.region_of(obj)
    return abs(scene_mod.bottom_y(obj) - region.floor_y) <= scene_mod.SUPPORT_TOLERANCE


def _snap_supported(
    layout: SceneLayout, cs: ConstraintSet, cfg: SolverConfig
) -> tuple[SceneLayout, tuple[str, ...]]:
    layout = layout.copy()
    reverted: list[str] = []
    ctx = cs.context(layout, rng_seed=cfg.rng_seed)
    before = {c.id: evaluate(c, ctx) for c in cs.constraints}
    order = sorted(layout.objects, key=lambda o: (scene_mod.bottom_y(o), o.id))
    for obj in order:
        if not scene_mod.supported(obj, layout, cfg.support_tolerance):
            continue
        surface = scene_mod.support_surface_y(obj, layout)
        delta = surface - scene_mod.bottom_y(obj)
        if abs(delta) < 1e-12:
            continue
        original = obj.transform
        x, y, z = original.pos
        obj.transform = Transform((x, y + delta, z), original.rot, original.scale)
        ctx = cs.context(layout, rng_seed=cfg.rng_seed)
        after = {c.id: evaluate(c, ctx) for c in cs.constraints}
        if any(before[cid] and not after[cid] for cid in before):
            obj.transform = original
            reverted.append(obj.id)
        else:
            before = after
    return layout, tuple(reverted)


# ---------------------------------------------------------------------------
# Writing


def _vec(values) -> list[float]:
    return [float(v) for v in values]


def scene_document(pkg: ScenePackage) -> dict:
    regions = []
    for region in pkg.regions:
        mesh = thicken_walls(region, region.wall_thickness)
        regions.append(
            {
                "id": region.id,
                "vertices": [[float(x), float(z)] for x, z in region.vertices],
                "floorY": float(region.floor_y),
                "height": float(region.height),
                "wallThickness": float(region.wall_thickness),
                "floorTexture": region.floor_texture,
                "wallTexture": region.wall_texture,
                "floorSlabThickness": float(mesh.floor_thickness),
                "walls": [
                    {
                        "innerStart": list(w.inner_start),
                        "innerEnd": list(w.inner_end),
                        "outerStart": list(w.outer_start),
                        "outerEnd": list(w.outer_end),
                        "baseY": float(w.base_y),
                        "height": float(w.height),
                        "thickness": float(w.thickness),
                    }
                    for w in mesh.walls
                ],
            }
        )
    return {
        "schemaVersion": SCHEMA_VERSION,
        "solver": pkg.solver_meta,
        "regions": regions,
        "connections": [
            {
                "regionA": c.region_a,
                "regionB": c.region_b,
                "category": c.category,
                "dimensions": _vec(c.dimensions),
            }
            for c in pkg.connections
        ],
        "objects": [
            {
                "id": o.id,
                "category": o.category,
                "assetRef": o.asset_ref,
                "position": _vec(o.position),
                "rotationXZY": _vec(o.rotation_xzy),
                "scale": _vec(o.scale),
                "region": o.region,
                "color": o.color,
                "material": o.material,
                "features": o.features,
                "collider": o.collider,
                "static": o.static,
            }
            for o in pkg.objects
        ],
        "lights": [
            {
                "id": l.id,
                "position": _vec(l.position),
                "intensity": float(l.intensity),
                "color": l.color,
            }
            for l in pkg.lights
        ],
        "snapReverted": list(pkg.snap_reverted),
    }


def write_package(pkg: ScenePackage, out_dir: str | Path) -> list[Path]:
    """Write the four package files; returns the paths written."""
    # Round-trip guarantee is enforced before any file is touched.
    try:
        parse(pkg.metadata_text)
    except Exception as exc:
        raise FormatError(f"embedded program does not re-parse: {exc}") from exc

    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = []
        scene_path = out / SCENE_FILE
        scene_path.write_text(
            json.dumps(scene_document(pkg), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
        paths.append(scene_path)

        manifest_path = out / MANIFEST_FILE
        rows = [
            "\t".join(
                (
                    entry.object_id,
                    entry.asset_uri,
                    entry.verdict,
                    repr(entry.score),
                    ",".join(repr(float(v)) for v in entry.native_extents),
                    ",".join(repr(float(v)) for v in entry.dimensions),
                )
            )
            for entry in pkg.manifest
        ]
        manifest_path.write_text("\n".join(rows) + ("\n" if rows else ""), encoding="utf-8")
        paths.append(manifest_path)

        metadata_path = out / METADATA_FILE
        metadata_path.write_text(pkg.metadata_text, encoding="utf-8")
        paths.append(metadata_path)

        report_path = out / REPORT_FILE
        report_path.write_text(pkg.report_text, encoding="utf-8")
        paths.append(report_path)
        return paths
    except OSError as exc:
        raise IoError(f"cannot write package to {out}: {exc}") from exc


# ---------------------------------------------------------------------------
# Reading


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise FormatError(message)


def _triple(values, what: str) -> Vec:
    _require(isinstance(values, list) and len(values) == 3, f"{what} must be a 3-list")
    return (float(values[0]), float(values[1]), float(values[2]))


def read_package(package_dir: str | Path) -> ScenePackage:
    """Reconstruct a ScenePackage from a directory written by write_package."""
    root = Path(package_dir)
    scene_path = root / SCENE_FILE
    if not scene_path.exists():
        raise FormatError(f"{scene_path}: missing scene document")
    try:
        doc = json.loads(scene_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{scene_path}:{exc.lineno}: invalid JSON: {exc.msg}") from None

    _require(doc.get("schemaVersion") == SCHEMA_VERSION, f"{scene_path}: unsupported schema")

    regions = []
    for entry in doc.get("regions", []):
        try:
            regions.append(
                Region(
                    id=entry["id"],
                    vertices=tuple((float(x), float(z)) for x, z in entry["vertices"]),
                    floor_y=float(entry["floorY"]),
                    height=float(entry["height"]),
                    wall_thickness=float(entry["wallThickness"]),
                    floor_texture=entry.get("floorTexture", ""),
                    wall_texture=entry.get("wallTexture", ""),
                )
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise FormatError(f"{scene_path}: bad region entry: {exc}") from None
    connections = [
        Connection(
            region_a=c["regionA"],
            region_b=c["regionB"],
            category=c.get("category", "door"),
            dimensions=_triple(c["dimensions"], "connection dimensions"),
        )
        for c in doc.get("connections", [])
    ]
    objects = []
    for entry in doc.get("objects", []):
        for key in ("id", "assetRef", "position", "rotationXZY", "scale", "region"):
            _require(key in entry, f"{scene_path}: object missing field {key!r}")
        objects.append(
            PackagedObject(
                id=entry["id"],
                category=entry.get("category", ""),
                asset_ref=entry["assetRef"],
                position=_triple(entry["position"], "position"),
                rotation_xzy=_triple(entry["rotationXZY"], "rotationXZY"),
                scale=_triple(entry["scale"], "scale"),
                region=entry["region"],
                color=entry.get("color", ""),
                material=entry.get("material", ""),
                features=entry.get("features", ""),
                collider=entry.get("collider", "box"),
                static=bool(entry.get("static", False)),
            )
        )
    lights = [
        Light(
            id=l["id"],
            position=_triple(l["position"], "light position"),
            intensity=float(l.get("intensity", 1.0)),
            color=l.get("color", "white"),
        )
        for l in doc.get("lights", [])
    ]

    manifest_path = root / MANIFEST_FILE
    if not manifest_path.exists():
        raise FormatError(f"{manifest_path}: missing manifest")
    manifest = []
    for lineno, line in enumerate(manifest_path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 6:
            raise FormatError(f"{manifest_path}:{lineno}: expected 6 fields, found {len(parts)}")
        try:
            manifest.append(
                ManifestEntry(
                    object_id=parts[0],
                    asset_uri=parts[1],
                    verdict=parts[2],
                    score=float(parts[3]),
                    native_extents=tuple(float(v) for v in parts[4].split(",")),  # type: ignore[arg-type]
                    dimensions=tuple(float(v) for v in parts[5].split(",")),  # type: ignore[arg-type]
                )
            )
        except ValueError as exc:
            raise FormatError(f"{manifest_path}:{lineno}: {exc}") from None

    scene_ids = {o.id for o in objects}
    manifest_ids = {m.object_id for m in manifest}
    for object_id in sorted(manifest_ids - scene_ids):
        raise FormatError(
            f"{scene_path}: object {object_id!r} appears in the manifest but not the scene"
        )
    for object_id in sorted(scene_ids - manifest_ids):
        raise FormatError(
            f"{manifest_path}: object {object_id!r} appears in the scene but not the manifest"
        )

    metadata_path = root / METADATA_FILE
    if not metadata_path.exists():
        raise FormatError(f"{metadata_path}: missing metadata")
    metadata_text = metadata_path.read_text(encoding="utf-8")
    try:
        parse(metadata_text)
    except Exception as exc:
        raise FormatError(f"{metadata_path}: embedded program does not parse: {exc}") from exc

    report_path = root / REPORT_FILE
    report_text = report_path.read_text(encoding="utf-8") if report_path.exists() else ""

    return ScenePackage(
        objects=objects,
        regions=regions,
        connections=connections,
        manifest=manifest,
        metadata_text=metadata_text,
        report_text=report_text,
        solver_meta=doc.get("solver", {}),
        lights=lights,
        snap_reverted=tuple(doc.get("snapReverted", [])),
    )


# ---------------------------------------------------------------------------
# Partial regeneration


def resolve_region(
    pkg: ScenePackage, region_id: str, cfg: SolverConfig | None = None
) -> ScenePackage:
    """Re-solve one region's objects in place, leaving every other region's
    transforms untouched.

    The constraint subset is restricted to constraints fully contained in
    the region (its objects, the region itself, and typed variables).
    """
    cfg = cfg or SolverConfig(rng_seed=int(pkg.solver_meta.get("seed", 0)))
    region = next((r for r in pkg.regions if r.id == region_id), None)
    if region is None:
        raise KeyError(region_id)

    typed = typecheck(pkg.program())
    cs = compile_constraints(typed, seed=cfg.rng_seed)
    layout = pkg.to_layout()
    target_ids = {obj.id for obj in layout.objects if obj.region == region_id}
    scope = target_ids | {region_id} | set(cs.bindings)
    sub_constraints = [c for c in cs.constraints if c.involved <= scope]
    sub_cs = ConstraintSet(
        constraints=sub_constraints,
        allow_collide=cs.allow_collide,
        allow_outside=cs.allow_outside,
        bindings=cs.bindings,
        region_assignments={k: v for k, v in cs.region_assignments.items() if k in target_ids},
    )
    sub_objects = [obj.copy() for obj in layout.objects if obj.id in target_ids]
    for obj in sub_objects:
        obj.preplaced = False
    report = solve(sub_objects, [region], sub_cs, cfg)

    solved = {obj.id: obj for obj in report.best_layout.objects}
    merged = layout.copy()
    for obj in merged.objects:
        if obj.id in solved:
            obj.transform = solved[obj.id].transform
    new_objects = []
    for packed in pkg.objects:
        if packed.id in solved:
            t = solved[packed.id].transform
            new_objects.append(
                replace(
                    packed,
                    position=t.pos,
                    rotation_xzy=t.rot,
                    static=_rests_on_floor(merged.object(packed.id), merged),
                )
            )
        else:
            new_objects.append(packed)

    report_text = (
        pkg.report_text
        + f"# region {region_id} re-solved\n"
        + render_report(report, sub_cs, cfg)
    )
    return ScenePackage(
        objects=new_objects,
        regions=list(pkg.regions),
        connections=list(pkg.connections),
        manifest=list(pkg.manifest),
        metadata_text=pkg.metadata_text,
        report_text=report_text,
        solver_meta=dict(pkg.solver_meta),
        lights=list(pkg.lights),
        snap_reverted=pkg.snap_reverted,
    )
