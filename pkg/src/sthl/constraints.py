"""Compile programs into evaluable constraint sets and check satisfaction.

Compilation is total on type-checked programs. It freezes every `rand`
expression with a seeded RNG (constraints must be stable across solver
iterations), collects `allowCollide`/`allowOutside` exceptions, and
injects the hidden physical-plausibility constraints: pairwise
non-collision, per-object gravity support, and per-object region
containment.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Protocol, Union

from sthl import scene
from sthl.dsl.nodes import (
    AllowCollide,
    AllowOutside,
    And,
    Arith,
    Assert,
    Assertion,
    Assign,
    Compare,
    Dot,
    Expr,
    InsidePred,
    Name,
    Not,
    NumberLit,
    Or,
    PropRef,
    Rand,
    Rot,
    StringLit,
    Vec3,
    referenced_idents,
)
from sthl.dsl.printer import print_assertion, print_expr
from sthl.dsl.typecheck import TypedProgram
from sthl.errors import EvalError

#: Absolute tolerance for `=` comparisons on numbers.
EQ_TOLERANCE = 1e-6


# ---------------------------------------------------------------------------
# Hidden-constraint predicates (not part of the user-writable grammar)


@dataclass(frozen=True)
class NoCollision:
    first: str
    second: str


@dataclass(frozen=True)
class Supported:
    name: str


CompiledAssertion = Union[Assertion, NoCollision, Supported]

PROVENANCE_EXPLICIT = "explicit"
PROVENANCE_COLLISION = "hidden-collision"
PROVENANCE_GRAVITY = "hidden-gravity"
PROVENANCE_BOUNDARY = "hidden-boundary"


@dataclass(frozen=True)
class CompiledConstraint:
    id: int
    assertion: CompiledAssertion
    provenance: str
    involved: frozenset[str]


@dataclass
class ConstraintSet:
    constraints: list[CompiledConstraint]
    allow_collide: frozenset[tuple[str, str]]  # pairs stored sorted
    allow_outside: frozenset[str]
    #: Frozen value expressions of typed variables (last assignment wins).
    bindings: dict[str, Expr] = field(default_factory=dict)
    #: object id -> region id used for the hidden boundary constraints.
    region_assignments: dict[str, str] = field(default_factory=dict)

    def context(self, layout: scene.SceneLayout, rng_seed: int = 0) -> "EvalContext":
        return EvalContext(layout, self.bindings, rng_seed)

    def by_id(self, constraint_id: int) -> CompiledConstraint:
        for c in self.constraints:
            if c.id == constraint_id:
                return c
        raise KeyError(constraint_id)


@dataclass
class EvalContext:
    layout: scene.SceneLayout
    bindings: dict[str, Expr] = field(default_factory=dict)
    rng_seed: int = 0
    support_tolerance: float = scene.SUPPORT_TOLERANCE


class SemanticChecker(Protocol):
    """Hook for an external redundancy/contradiction pass over constraints.

    Implementations receive a compiled set and return the reduced set; the
    toolchain ships no implementation (only the syntactic dedupe below).
    """

    def review(self, cs: ConstraintSet) -> ConstraintSet: ...


# ---------------------------------------------------------------------------
# Region assignment inference


def infer_region_assignments(typed: TypedProgram) -> dict[str, str]:
    """Map each object to its region.

    An explicit `inside(obj, region)` assertion pins the assignment (first
    one in statement order wins); otherwise objects default to the first
    declared region. Programs without regions yield an empty map.
    """
    regions = typed.regions()
    if not regions:
        return {}
    assignments: dict[str, str] = {}
    for stmt in typed.program.statements:
        if not isinstance(stmt, Assert):
            continue
        for pred in _inside_preds(stmt.condition):
            assignments.setdefault(pred.inner, pred.outer)
    for obj in typed.objects():
        assignments.setdefault(obj, regions[0])
    return assignments


def _inside_preds(node: Assertion) -> list[InsidePred]:
    if isinstance(node, InsidePred):
        return [node]
    if isinstance(node, (And, Or)):
        return _inside_preds(node.left) + _inside_preds(node.right)
    if isinstance(node, Not):
        return []  # a negated inside() must not pin the region assignment
    return []


# ---------------------------------------------------------------------------
# Compilation


def compile_constraints(typed: TypedProgram, seed: int = 0) -> ConstraintSet:
    """Build the full constraint set for a type-checked program.

    Hidden constraints follow the explicit ones: one non-collision
    constraint per unordered object pair not in the allow list, one support
    constraint per object, and one containment constraint per object not
    allowed outside (the latter two only when the program declares a
    region).
    """
    rng = random.Random(seed)
    env: dict[str, Expr] = {}
    explicit: list[CompiledAssertion] = []
    allow_collide: set[tuple[str, str]] = set()
    allow_outside: set[str] = set()

    for stmt in typed.program.statements:
        if isinstance(stmt, Assert):
            explicit.append(_freeze_assertion(stmt.condition, env, rng))
        elif isinstance(stmt, AllowCollide):
            allow_collide.add(tuple(sorted((stmt.first, stmt.second))))  # type: ignore[arg-type]
        elif isinstance(stmt, AllowOutside):
            allow_outside.add(stmt.name)
        elif isinstance(stmt, Assign) and stmt.prop is None:
            env[stmt.target] = _freeze_expr(stmt.value, env, rng, substitute=True)

    constraints: list[CompiledConstraint] = []
    for assertion in explicit:
        constraints.append(
            CompiledConstraint(
                id=len(constraints),
                assertion=assertion,
                provenance=PROVENANCE_EXPLICIT,
                involved=frozenset(_involved(assertion)),
            )
        )

    objects = typed.objects()
    assignments = infer_region_assignments(typed)
    for i, first in enumerate(objects):
        for second in objects[i + 1 :]:
            if tuple(sorted((first, second))) in allow_collide:
                continue
            constraints.append(
                CompiledConstraint(
                    id=len(constraints),
                    assertion=NoCollision(first, second),
                    provenance=PROVENANCE_COLLISION,
                    involved=frozenset({first, second}),
                )
            )
    if assignments:
        for name in objects:
            constraints.append(
                CompiledConstraint(
                    id=len(constraints),
                    assertion=Supported(name),
                    provenance=PROVENANCE_GRAVITY,
                    involved=frozenset({name}),
                )
            )
        for name in objects:
            if name in allow_outside:
                continue
            constraints.append(
                CompiledConstraint(
                    id=len(constraints),
                    assertion=InsidePred(name, assignments[name]),
                    provenance=PROVENANCE_BOUNDARY,
                    involved=frozenset({name, assignments[name]}),
                )
            )

    return ConstraintSet(
        constraints=constraints,
        allow_collide=frozenset(allow_collide),
        allow_outside=frozenset(allow_outside),
        bindings=env,
        region_assignments=assignments,
    )


def _involved(assertion: CompiledAssertion) -> set[str]:
    if isinstance(assertion, NoCollision):
        return {assertion.first, assertion.second}
    if isinstance(assertion, Supported):
        return {assertion.name}
    return referenced_idents(assertion)


def _freeze_assertion(node: Assertion, env: dict[str, Expr], rng: random.Random) -> Assertion:
    if isinstance(node, Compare):
        return Compare(
            node.op,
            _freeze_expr(node.left, env, rng),
            _freeze_expr(node.right, env, rng),
            span=node.span,
        )
    if isinstance(node, And):
        return And(
            _freeze_assertion(node.left, env, rng),
            _freeze_assertion(node.right, env, rng),
            span=node.span,
        )
    if isinstance(node, Or):
        return Or(
            _freeze_assertion(node.left, env, rng),
            _freeze_assertion(node.right, env, rng),
            span=node.span,
        )
    if isinstance(node, Not):
        return Not(_freeze_assertion(node.operand, env, rng), span=node.span)
    return node  # InsidePred


def _freeze_expr(
    node: Expr, env: dict[str, Expr], rng: random.Random, substitute: bool = False
) -> Expr:
    if isinstance(node, Rand):
        low = _freeze_expr(node.low, env, rng, substitute)
        high = _freeze_expr(node.high, env, rng, substitute)
        if isinstance(low, NumberLit) and isinstance(high, NumberLit):
            return NumberLit(rng.uniform(low.value, high.value), span=node.span)
        # Bounds depending on layout properties cannot be frozen; sample the
        # unit draw now so evaluation stays deterministic.
        u = rng.random()
        return Arith(
            "+",
            low,
            Arith("*", NumberLit(u), Arith("-", high, low)),
            span=node.span,
        )
    if isinstance(node, Name) and substitute:
        return env.get(node.ident, node)
    if isinstance(node, Arith):
        return Arith(
            node.op,
            _freeze_expr(node.left, env, rng, substitute),
            _freeze_expr(node.right, env, rng, substitute),
            span=node.span,
        )
    if isinstance(node, Vec3):
        return Vec3(
            _freeze_expr(node.x, env, rng, substitute),
            _freeze_expr(node.y, env, rng, substitute),
            _freeze_expr(node.z, env, rng, substitute),
            span=node.span,
        )
    if isinstance(node, Rot):
        return Rot(
            _freeze_expr(node.rx, env, rng, substitute),
            _freeze_expr(node.rz, env, rng, substitute),
            _freeze_expr(node.ry, env, rng, substitute),
            span=node.span,
        )
    if isinstance(node, Dot):
        return Dot(
            _freeze_expr(node.left, env, rng, substitute),
            _freeze_expr(node.right, env, rng, substitute),
            span=node.span,
        )
    return node


# ---------------------------------------------------------------------------
# Evaluation

Value = Union[float, str, tuple]


def freeze_expression(
    expr: Expr, env: dict[str, Expr], rng: random.Random, substitute: bool = False
) -> Expr:
    """Freeze `rand` draws (and optionally substitute variable bindings)."""
    return _freeze_expr(expr, env, rng, substitute)


def evaluate_expression(expr: Expr, ctx: "EvalContext") -> Value:
    """Evaluate one expression tree against a context."""
    return _eval_expr(expr, ctx)


def evaluate(constraint: CompiledConstraint, ctx: EvalContext) -> bool:
    """Truth value of one compiled constraint against the context's layout."""
    return _eval_assertion(constraint.assertion, ctx)


def evaluate_all(cs: ConstraintSet, ctx: EvalContext) -> list[bool]:
    return [evaluate(c, ctx) for c in cs.constraints]


def satisfaction_ratio(cs: ConstraintSet, ctx: EvalContext) -> float:
    """Satisfied over total constraints; an empty set counts as fully satisfied."""
    if not cs.constraints:
        return 1.0
    results = evaluate_all(cs, ctx)
    return sum(results) / len(results)


def _eval_assertion(node: CompiledAssertion, ctx: EvalContext) -> bool:
    if isinstance(node, NoCollision):
        layout = ctx.layout
        return not scene.collides(_object(layout, node.first), _object(layout, node.second))
    if isinstance(node, Supported):
        return scene.supported(_object(ctx.layout, node.name), ctx.layout, ctx.support_tolerance)
    if isinstance(node, InsidePred):
        try:
            region = ctx.layout.region(node.outer)
        except KeyError:
            raise EvalError(f"region {node.outer!r} missing from layout") from None
        return scene.inside(_object(ctx.layout, node.inner), region)
    if isinstance(node, And):
        return _eval_assertion(node.left, ctx) and _eval_assertion(node.right, ctx)
    if isinstance(node, Or):
        return _eval_assertion(node.left, ctx) or _eval_assertion(node.right, ctx)
    if isinstance(node, Not):
        return not _eval_assertion(node.operand, ctx)
    assert isinstance(node, Compare)
    return _compare(node.op, _eval_expr(node.left, ctx), _eval_expr(node.right, ctx))


def _object(layout: scene.SceneLayout, name: str) -> scene.SceneObject:
    try:
        return layout.object(name)
    except KeyError:
        raise EvalError(f"object {name!r} missing from layout") from None


def _compare(op: str, left: Value, right: Value) -> bool:
    if isinstance(left, float) and isinstance(right, float):
        if op == "=":
            return abs(left - right) <= EQ_TOLERANCE
        if op == "!=":
            return not abs(left - right) <= EQ_TOLERANCE
        if op == "<":
            return left < right
        if op == "<=":
            return left <= right
        if op == ">":
            return left > right
        return left >= right
    if op == "=":
        return left == right
    if op == "!=":
        return left != right
    raise EvalError(f"ordering comparison {op!r} on non-numbers")


def _eval_expr(node: Expr, ctx: EvalContext, _stack: frozenset[str] = frozenset()) -> Value:
    if isinstance(node, NumberLit):
        return node.value
    if isinstance(node, StringLit):
        return node.value
    if isinstance(node, Name):
        if node.ident in _stack:
            raise EvalError(f"circular binding for variable {node.ident!r}")
        if node.ident not in ctx.bindings:
            raise EvalError(f"variable {node.ident!r} was never assigned")
        return _eval_expr(ctx.bindings[node.ident], ctx, _stack | {node.ident})
    if isinstance(node, PropRef):
        return _eval_propref(node, ctx)
    if isinstance(node, Arith):
        left = _eval_expr(node.left, ctx, _stack)
        right = _eval_expr(node.right, ctx, _stack)
        if isinstance(left, tuple) and isinstance(right, tuple) and node.op in ("+", "-"):
            if len(left) != len(right):
                raise EvalError("vector arithmetic on mismatched lengths")
            if node.op == "+":
                return tuple(a + b for a, b in zip(left, right))
            return tuple(a - b for a, b in zip(left, right))
        if not isinstance(left, float) or not isinstance(right, float):
            raise EvalError(f"arithmetic {node.op!r} on non-numbers")
        if node.op == "+":
            return left + right
        if node.op == "-":
            return left - right
        if node.op == "*":
            return left * right
        if right == 0.0:
            # IEEE-style result keeps the solver alive on degenerate layouts.
            if left == 0.0:
                return float("nan")
            return float("inf") if left > 0 else float("-inf")
        return left / right
    if isinstance(node, Rand):
        rng = random.Random(ctx.rng_seed)
        low = _eval_expr(node.low, ctx, _stack)
        high = _eval_expr(node.high, ctx, _stack)
        if not isinstance(low, float) or not isinstance(high, float):
            raise EvalError("rand bounds must be numbers")
        return rng.uniform(low, high)
    if isinstance(node, Vec3):
        return tuple(_eval_number(part, ctx, _stack) for part in (node.x, node.y, node.z))
    if isinstance(node, Rot):
        return tuple(_eval_number(part, ctx, _stack) for part in (node.rx, node.rz, node.ry))
    assert isinstance(node, Dot)
    left = _eval_expr(node.left, ctx, _stack)
    right = _eval_expr(node.right, ctx, _stack)
    if not (isinstance(left, tuple) and isinstance(right, tuple) and len(left) == len(right) == 3):
        raise EvalError("dot requires two Vector3 values")
    return sum(a * b for a, b in zip(left, right))


def _eval_number(node: Expr, ctx: EvalContext, _stack: frozenset[str]) -> float:
    value = _eval_expr(node, ctx, _stack)
    if not isinstance(value, float):
        raise EvalError("expected a number component")
    return value


_COMPONENT_INDEX = {
    "pos": {"x": 0, "y": 1, "z": 2},
    "scale": {"x": 0, "y": 1, "z": 2},
    # Rotation triples are stored in application order (x, z, y).
    "rot": {"x": 0, "z": 1, "y": 2},
}


def _eval_propref(node: PropRef, ctx: EvalContext) -> Value:
    layout = ctx.layout
    try:
        obj = layout.object(node.obj)
    except KeyError:
        obj = None
    if obj is not None:
        if node.prop == "pos":
            value: tuple = obj.transform.pos
        elif node.prop == "rot":
            value = obj.transform.rot
        elif node.prop == "scale":
            value = obj.transform.scale
        elif node.prop == "color":
            return obj.color
        elif node.prop == "material":
            return obj.material
        else:
            return obj.features
        if node.component is None:
            return value
        return value[_COMPONENT_INDEX[node.prop][node.component]]
    try:
        region = layout.region(node.obj)
    except KeyError:
        raise EvalError(f"identifier {node.obj!r} missing from layout") from None
    min_x, min_z, max_x, max_z = region.bounds()
    if node.prop == "pos":
        value = ((min_x + max_x) / 2.0, region.floor_y, (min_z + max_z) / 2.0)
    elif node.prop == "scale":
        value = (max_x - min_x, region.height, max_z - min_z)
    elif node.prop == "rot":
        value = (0.0, 0.0, 0.0)
    else:
        raise EvalError(f"region {node.obj!r} has no property {node.prop!r}")
    if node.component is None:
        return value
    return value[_COMPONENT_INDEX[node.prop][node.component]]


# ---------------------------------------------------------------------------
# Syntactic dedupe


def dedupe_syntactic(cs: ConstraintSet) -> ConstraintSet:
    """Drop constraints whose normalized assertion trees coincide.

    Normalization flattens and sorts `&&`/`||` chains and orders the
    operands of `=`/`!=` comparisons; it does not attempt semantic
    subsumption (see SemanticChecker for that hook). Surviving constraints
    keep their original ids.
    """
    seen: set[str] = set()
    kept: list[CompiledConstraint] = []
    for constraint in cs.constraints:
        key = _normal_key(constraint.assertion)
        if key in seen:
            continue
        seen.add(key)
        kept.append(constraint)
    return ConstraintSet(
        constraints=kept,
        allow_collide=cs.allow_collide,
        allow_outside=cs.allow_outside,
        bindings=cs.bindings,
        region_assignments=cs.region_assignments,
    )


def _normal_key(node: CompiledAssertion) -> str:
    if isinstance(node, NoCollision):
        a, b = sorted((node.first, node.second))
        return f"nocollide({a},{b})"
    if isinstance(node, Supported):
        return f"supported({node.name})"
    if isinstance(node, InsidePred):
        return f"inside({node.inner},{node.outer})"
    if isinstance(node, (And, Or)):
        op = "and" if isinstance(node, And) else "or"
        return f"{op}({','.join(sorted(_flatten(node, type(node))))})"
    if isinstance(node, Not):
        return f"not({_normal_key(node.operand)})"
    assert isinstance(node, Compare)
    left, right = print_expr(node.left), print_expr(node.right)
    if node.op in ("=", "!="):
        left, right = sorted((left, right))
    return f"cmp({node.op},{left},{right})"


def _flatten(node: Assertion, kind: type) -> list[str]:
    if isinstance(node, kind):
        return _flatten(node.left, kind) + _flatten(node.right, kind)  # type: ignore[attr-defined]
    return [_normal_key(node)]


# ---------------------------------------------------------------------------
# Report formatting


def print_compiled_assertion(assertion: CompiledAssertion) -> str:
    if isinstance(assertion, NoCollision):
        return f"!collides({assertion.first}, {assertion.second})"
    if isinstance(assertion, Supported):
        return f"supported({assertion.name})"
    return print_assertion(assertion)


def format_verdict_line(constraint: CompiledConstraint, satisfied: bool) -> str:
    state = "satisfied" if satisfied else "violated"
    text = print_compiled_assertion(constraint.assertion)
    return f"{constraint.id} {constraint.provenance} {state} {text}"
