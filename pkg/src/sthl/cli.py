"""Command-line entry point: parse, fmt, check, solve, assets, export,
eval, and the full pipeline.

Exit codes: 0 success, 1 domain error (parse/type/placement/format), 2
usage error. Diagnostics go to stderr; artifacts go to files.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

from sthl import assets as assets_mod
from sthl import constraints as constraints_mod
from sthl import export as export_mod
from sthl import metrics as metrics_mod
from sthl.build import BuiltScene, build_scene
from sthl.dsl import Program, parse, print_program, typecheck
from sthl.dsl.nodes import (
    AllowCollide,
    AllowOutside,
    Assert,
    Assign,
    Declare,
)
from sthl.dsl.printer import print_assertion, print_expr
from sthl.errors import SthlError
from sthl.scene import Connection, Region, SceneLayout, SceneObject, Transform
from sthl.solver import IterationRecord, SolveReport, SolverConfig, render_report, solve

DEFAULT_SOLVE_OUT = "solve.json"


# ---------------------------------------------------------------------------
# Serialization helpers (solve output file)


def _transform_doc(t: Transform) -> dict:
    return {"pos": list(t.pos), "rotXZY": list(t.rot), "scale": list(t.scale)}


def _read_transform(doc: dict) -> Transform:
    return Transform(
        pos=tuple(doc["pos"]), rot=tuple(doc["rotXZY"]), scale=tuple(doc["scale"])
    )


def solve_output_document(
    program: Program, built: BuiltScene, report: SolveReport, cfg: SolverConfig
) -> dict:
    return {
        "program": print_program(program),
        "config": asdict(cfg),
        "scene": {
            "objects": [
                {
                    "id": o.id,
                    "category": o.category,
                    "dimensions": list(o.dimensions),
                    "color": o.color,
                    "material": o.material,
                    "features": o.features,
                    "region": o.region,
                }
                for o in built.objects
            ],
            "regions": [
                {
                    "id": r.id,
                    "vertices": [list(v) for v in r.vertices],
                    "floorY": r.floor_y,
                    "height": r.height,
                    "wallThickness": r.wall_thickness,
                }
                for r in built.regions
            ],
            "connections": [
                {
                    "regionA": c.region_a,
                    "regionB": c.region_b,
                    "category": c.category,
                    "dimensions": list(c.dimensions),
                }
                for c in built.connections
            ],
        },
        "report": {
            "terminated": report.terminated,
            "bestIndex": report.best_index,
            "bestRatio": report.best_ratio,
            "iterations": [
                {
                    "index": rec.index,
                    "ratio": rec.ratio,
                    "unsatisfied": list(rec.unsatisfied),
                    "batch": list(rec.batch),
                    "moved": list(rec.moved),
                    "transforms": {
                        o.id: _transform_doc(o.transform) for o in rec.layout.objects
                    },
                }
                for rec in report.iterations
            ],
        },
    }


def load_solve_output(path: Path) -> tuple[Program, BuiltScene, SolveReport, SolverConfig]:
    doc = json.loads(path.read_text(encoding="utf-8"))
    program = parse(doc["program"], filename=str(path))
    cfg = SolverConfig(**doc["config"])
    regions = [
        Region(
            id=r["id"],
            vertices=tuple(tuple(v) for v in r["vertices"]),
            floor_y=r["floorY"],
            height=r["height"],
            wall_thickness=r["wallThickness"],
        )
        for r in doc["scene"]["regions"]
    ]
    objects = [
        SceneObject(
            id=o["id"],
            category=o["category"],
            dimensions=tuple(o["dimensions"]),
            color=o["color"],
            material=o["material"],
            features=o["features"],
            region=o["region"],
        )
        for o in doc["scene"]["objects"]
    ]
    connections = [
        Connection(c["regionA"], c["regionB"], c["category"], tuple(c["dimensions"]))
        for c in doc["scene"].get("connections", [])
    ]
    built = BuiltScene(objects=objects, regions=regions)
    records = []
    for rec in doc["report"]["iterations"]:
        layout = SceneLayout(
            regions=list(regions),
            objects=[o.copy() for o in objects],
            connections=connections,
        )
        for obj in layout.objects:
            obj.transform = _read_transform(rec["transforms"][obj.id])
        records.append(
            IterationRecord(
                index=rec["index"],
                layout=layout,
                unsatisfied=tuple(rec["unsatisfied"]),
                ratio=rec["ratio"],
                batch=tuple(rec["batch"]),
                moved=tuple(rec["moved"]),
            )
        )
    best_index = doc["report"]["bestIndex"]
    best = next(r for r in records if r.index == best_index)
    report = SolveReport(
        iterations=records,
        best_index=best_index,
        best_layout=best.layout,
        best_ratio=doc["report"]["bestRatio"],
        terminated=doc["report"]["terminated"],
    )
    return program, built, report, cfg


# ---------------------------------------------------------------------------
# AST JSON (for `parse --json-ast`)


def ast_document(program: Program) -> list[dict]:
    out = []
    for stmt in program.statements:
        if isinstance(stmt, Declare):
            entry = {"stmt": "declare", "kind": stmt.kind, "name": stmt.name}
            if stmt.var_type is not None:
                entry["type"] = stmt.var_type.value
        elif isinstance(stmt, Assert):
            entry = {"stmt": "assert", "condition": print_assertion(stmt.condition)}
        elif isinstance(stmt, AllowCollide):
            entry = {"stmt": "allowCollide", "first": stmt.first, "second": stmt.second}
        elif isinstance(stmt, AllowOutside):
            entry = {"stmt": "allowOutside", "name": stmt.name}
        else:
            assert isinstance(stmt, Assign)
            entry = {
                "stmt": "assign",
                "target": stmt.target,
                "prop": stmt.prop,
                "value": print_expr(stmt.value),
            }
        out.append(entry)
    return out


# ---------------------------------------------------------------------------
# Shared pipeline pieces


@dataclass
class PipelineConfig:
    seed: int = 0
    batch_size: int = 3
    max_iterations: int = 5
    tau: float = assets_mod.DEFAULT_TAU
    visual_weight: float = assets_mod.DEFAULT_VISUAL_WEIGHT
    semantic_weight: float = assets_mod.DEFAULT_SEMANTIC_WEIGHT
    wall_thickness: float = 0.03
    db_path: str | None = None
    out_dir: str = "scene_package"
    keep_intermediates: bool = False

    def solver(self) -> SolverConfig:
        return SolverConfig(
            batch_size=self.batch_size,
            max_iterations=self.max_iterations,
            rng_seed=self.seed,
        )


def _load_database(db_path: str | None) -> list[assets_mod.AssetCandidate]:
    if db_path is None:
        return []
    return assets_mod.AssetDatabase.load(db_path).entries


def _asset_decisions(
    built: BuiltScene, cfg: PipelineConfig
) -> dict[str, assets_mod.AssetDecision]:
    database = _load_database(cfg.db_path)
    decisions = assets_mod.decide_all(
        built.entities(),
        database,
        tau=cfg.tau,
        weights=(cfg.visual_weight, cfg.semantic_weight),
        provider=assets_mod.HashProvider(),
        generator=assets_mod.StubGenerator(),
    )
    return {obj.id: decision for obj, decision in zip(built.objects, decisions)}


def pipeline(path: str | Path, cfg: PipelineConfig) -> export_mod.ScenePackage:
    """Run parse -> check -> compile -> assets -> solve -> export.

    With `keep_intermediates`, each stage's artifact lands in the output
    directory: constraints.txt, decisions.tsv, solve.json, and
    per-iteration layout snapshots.
    """
    source = Path(path).read_text(encoding="utf-8")
    program = parse(source, filename=str(path))
    typed = typecheck(program, filename=str(path))
    built = build_scene(typed, seed=cfg.seed, wall_thickness=cfg.wall_thickness)
    cs = constraints_mod.compile_constraints(typed, seed=cfg.seed)
    out_dir = Path(cfg.out_dir)

    if cfg.keep_intermediates:
        out_dir.mkdir(parents=True, exist_ok=True)
        lines = [
            f"{c.id} {c.provenance} {constraints_mod.print_compiled_assertion(c.assertion)}"
            for c in cs.constraints
        ]
        (out_dir / "constraints.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")

    decisions = _asset_decisions(built, cfg)
    if cfg.keep_intermediates:
        rows = [
            "\t".join((obj_id, d.verdict, repr(d.best_score), d.model.uri))
            for obj_id, d in decisions.items()
        ]
        (out_dir / "decisions.tsv").write_text("\n".join(rows) + "\n", encoding="utf-8")

    solver_cfg = cfg.solver()
    report = solve(built.objects, built.regions, cs, solver_cfg)
    if cfg.keep_intermediates:
        doc = solve_output_document(program, built, report, solver_cfg)
        (out_dir / "solve.json").write_text(
            json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        for rec in report.iterations:
            snapshot = {
                o.id: _transform_doc(o.transform) for o in rec.layout.objects
            }
            (out_dir / f"layout_iter{rec.index}.json").write_text(
                json.dumps(snapshot, indent=2, sort_keys=True) + "\n", encoding="utf-8"
            )

    # Database indexes carry no mesh geometry; assume unit native extents
    # for retrieved assets so the pipeline stays total.
    pkg = export_mod.assemble(
        report.best_layout, decisions, cs, report, program, solver_cfg,
        default_native_extents=(1.0, 1.0, 1.0),
    )
    export_mod.write_package(pkg, out_dir)
    return pkg


# ---------------------------------------------------------------------------
# Subcommand implementations


def _cmd_parse(args: argparse.Namespace) -> int:
    source = Path(args.file).read_text(encoding="utf-8")
    program = parse(source, filename=args.file)
    for note in program.notes:
        print(note, file=sys.stderr)
    if args.json_ast:
        print(json.dumps(ast_document(program), indent=2))
    else:
        print(f"{args.file}: {len(program.statements)} statements", file=sys.stderr)
    return 0


def _cmd_fmt(args: argparse.Namespace) -> int:
    source = Path(args.file).read_text(encoding="utf-8")
    sys.stdout.write(print_program(parse(source, filename=args.file)))
    return 0


def _cmd_check(args: argparse.Namespace) -> int:
    source = Path(args.file).read_text(encoding="utf-8")
    typed = typecheck(parse(source, filename=args.file), filename=args.file)
    cs = constraints_mod.compile_constraints(typed, seed=args.seed)
    explicit = sum(1 for c in cs.constraints if c.provenance == "explicit")
    hidden = len(cs.constraints) - explicit
    print(
        f"{args.file}: {len(typed.objects())} objects, {len(typed.regions())} regions, "
        f"{explicit} explicit + {hidden} hidden constraints",
        file=sys.stderr,
    )
    return 0


def _cmd_solve(args: argparse.Namespace) -> int:
    source = Path(args.file).read_text(encoding="utf-8")
    program = parse(source, filename=args.file)
    typed = typecheck(program, filename=args.file)
    built = build_scene(typed, seed=args.seed)
    cs = constraints_mod.compile_constraints(typed, seed=args.seed)
    cfg = SolverConfig(batch_size=args.k, max_iterations=args.T, rng_seed=args.seed)
    report = solve(built.objects, built.regions, cs, cfg)
    doc = solve_output_document(program, built, report, cfg)
    out = Path(args.out)
    out.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    if args.report:
        Path(args.report).write_text(render_report(report, cs, cfg), encoding="utf-8")
    print(
        f"{args.file}: best ratio {report.best_ratio:.4f} "
        f"({report.terminated}) -> {out}",
        file=sys.stderr,
    )
    return 0


def _cmd_assets(args: argparse.Namespace) -> int:
    source = Path(args.file).read_text(encoding="utf-8")
    typed = typecheck(parse(source, filename=args.file), filename=args.file)
    built = build_scene(typed, seed=args.seed)
    cfg = PipelineConfig(
        seed=args.seed,
        tau=args.tau,
        visual_weight=args.lambda_v,
        semantic_weight=args.lambda_t,
        db_path=args.db,
    )
    decisions = _asset_decisions(built, cfg)
    rows = [
        "\t".join(
            (obj_id, d.query.text, d.verdict, repr(d.best_score), d.model.uri)
        )
        for obj_id, d in decisions.items()
    ]
    text = "\n".join(rows) + ("\n" if rows else "")
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_export(args: argparse.Namespace) -> int:
    program, built, report, solver_cfg = load_solve_output(Path(args.solve_output))
    typed = typecheck(program)
    cs = constraints_mod.compile_constraints(typed, seed=solver_cfg.rng_seed)
    cfg = PipelineConfig(seed=solver_cfg.rng_seed, tau=args.tau, db_path=args.db)
    report.best_layout.connections = list(built.connections)
    decisions = _asset_decisions(built, cfg)
    pkg = export_mod.assemble(
        report.best_layout, decisions, cs, report, program, solver_cfg,
        default_native_extents=(1.0, 1.0, 1.0),
    )
    export_mod.write_package(pkg, args.out)
    print(f"package written to {args.out}", file=sys.stderr)
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    embedder: metrics_mod.Embedder
    if args.embeddings:
        embedder = metrics_mod.TsvEmbedder.load(args.embeddings)
    else:
        embedder = metrics_mod.TrigramEmbedder()

    gen_typed = typecheck(parse(Path(args.gen).read_text(encoding="utf-8"), filename=args.gen))
    gt_typed = typecheck(parse(Path(args.gt).read_text(encoding="utf-8"), filename=args.gt))

    def object_items(typed) -> list[tuple[str, str]]:
        built = build_scene(typed)
        return [
            (obj.id, f"{obj.color} {obj.category} {obj.material} {obj.features}".strip())
            for obj in built.objects
        ]

    def constraint_texts(typed) -> list[str]:
        return [
            print_assertion(stmt.condition)
            for stmt in typed.program.statements
            if isinstance(stmt, Assert)
        ]

    obj_scores = metrics_mod.object_resemblance(
        object_items(gen_typed), object_items(gt_typed), embedder, args.tau
    )
    layout_scores = metrics_mod.layout_resemblance(
        constraint_texts(gen_typed),
        constraint_texts(gt_typed),
        gt_typed.objects(),
        embedder,
        args.tau,
    )
    overall = metrics_mod.overall_resemblance(obj_scores, layout_scores)
    for label, scores in (("object", obj_scores), ("layout", layout_scores), ("overall", overall)):
        print(
            f"{label}: precision={scores.precision:.4f} recall={scores.recall:.4f} "
            f"f1={scores.f1:.4f} (tp={scores.tp} fp={scores.fp} fn={scores.fn})",
            file=sys.stderr,
        )
    return 0


def _cmd_pipeline(args: argparse.Namespace) -> int:
    if args.from_text is not None:
        print(
            "pipeline --from-text is not available: natural-language "
            "formalization requires an external language model; write the "
            "specification as a .sthl program instead",
            file=sys.stderr,
        )
        return 2
    cfg = PipelineConfig(
        seed=args.seed,
        batch_size=args.k,
        max_iterations=args.T,
        tau=args.tau,
        wall_thickness=args.eta,
        db_path=args.db,
        out_dir=args.out,
        keep_intermediates=args.keep_intermediates,
    )
    pkg = pipeline(args.file, cfg)
    print(
        f"{args.file}: scene package with {len(pkg.objects)} objects -> {args.out}",
        file=sys.stderr,
    )
    return 0


# ---------------------------------------------------------------------------
# Argument parsing


def _default_seed() -> int:
    value = os.environ.get("STHL_SEED", "0")
    try:
        return int(value)
    except ValueError:
        return 0


def _positive_int(minimum: int, what: str):
    def convert(text: str) -> int:
        try:
            value = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{what} must be an integer") from None
        if value < minimum:
            raise argparse.ArgumentTypeError(f"{what} must be >= {minimum}")
        return value

    return convert


def build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sthl",
        description="Toolchain for ScenethesisLang scene specifications",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    seed_kwargs = dict(type=int, default=_default_seed(), help="RNG seed (env STHL_SEED)")

    p = sub.add_parser("parse", help="parse a program and report diagnostics")
    p.add_argument("file")
    p.add_argument("--json-ast", action="store_true", help="print the AST as JSON")
    p.set_defaults(func=_cmd_parse)

    p = sub.add_parser("fmt", help="print the canonical form of a program")
    p.add_argument("file")
    p.set_defaults(func=_cmd_fmt)

    p = sub.add_parser("check", help="type-check and compile constraints")
    p.add_argument("file")
    p.add_argument("--seed", **seed_kwargs)
    p.set_defaults(func=_cmd_check)

    p = sub.add_parser("solve", help="solve a program's layout")
    p.add_argument("file")
    p.add_argument("--seed", **seed_kwargs)
    p.add_argument("--k", type=_positive_int(1, "k"), default=3, help="batch size")
    p.add_argument("--T", type=_positive_int(0, "T"), default=5, help="max iterations")
    p.add_argument("--out", default=DEFAULT_SOLVE_OUT, help="solve output file")
    p.add_argument("--report", default=None, help="also write the text report here")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("assets", help="formulate queries and decide retrieve-vs-generate")
    p.add_argument("file")
    p.add_argument("--db", default=None, help="asset index tsv")
    p.add_argument("--tau", type=float, default=assets_mod.DEFAULT_TAU)
    p.add_argument("--lambda-v", type=float, default=assets_mod.DEFAULT_VISUAL_WEIGHT)
    p.add_argument("--lambda-t", type=float, default=assets_mod.DEFAULT_SEMANTIC_WEIGHT)
    p.add_argument("--seed", **seed_kwargs)
    p.add_argument("--out", default=None, help="write decisions tsv here")
    p.set_defaults(func=_cmd_assets)

    p = sub.add_parser("export", help="assemble a scene package from a solve output")
    p.add_argument("solve_output")
    p.add_argument("--out", required=True, help="package directory")
    p.add_argument("--db", default=None)
    p.add_argument("--tau", type=float, default=assets_mod.DEFAULT_TAU)
    p.set_defaults(func=_cmd_export)

    p = sub.add_parser("eval", help="resemblance metrics between two programs")
    p.add_argument("--gen", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--tau", type=float, default=0.7)
    p.add_argument("--embeddings", default=None, help="precomputed vectors tsv")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("pipeline", help="run the full pipeline to a scene package")
    p.add_argument("file", nargs="?")
    p.add_argument("--from-text", default=None, help="(unavailable) natural-language input")
    p.add_argument("--seed", **seed_kwargs)
    p.add_argument("--k", type=_positive_int(1, "k"), default=3)
    p.add_argument("--T", type=_positive_int(0, "T"), default=5)
    p.add_argument("--tau", type=float, default=assets_mod.DEFAULT_TAU)
    p.add_argument("--eta", type=float, default=0.03, help="wall thickness")
    p.add_argument("--db", default=None)
    p.add_argument("--out", default="scene_package")
    p.add_argument("--keep-intermediates", action="store_true")
    p.set_defaults(func=_cmd_pipeline)

    return parser


def run(argv: list[str] | None = None) -> int:
    parser = build_arg_parser()
    args = parser.parse_args(argv)
    if args.command == "pipeline" and args.file is None and args.from_text is None:
        parser.error("pipeline requires a .sthl file")
    if getattr(args, "eta", 0.0) < 0:
        parser.error("eta must be non-negative")
    try:
        return args.func(args)
    except SthlError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
