"""Program-to-scene bridge tests."""

from __future__ import annotations

import pytest

from sthl.build import build_scene
from sthl.dsl import parse, typecheck
from sthl.errors import EvalError


def built(source: str, seed: int = 0):
    return build_scene(typecheck(parse(source)), seed=seed)


def test_region_geometry_from_assignments():
    scene = built(
        "region room; room.pos <- vec3(2, 0.5, 3); room.scale <- vec3(4, 2.5, 6);"
    )
    room = scene.regions[0]
    assert room.floor_y == 0.5
    assert room.height == 2.5
    assert set(room.vertices) == {(0.0, 0.0), (4.0, 0.0), (4.0, 6.0), (0.0, 6.0)}


def test_region_defaults_when_unassigned():
    scene = built("region hall;")
    hall = scene.regions[0]
    assert hall.height == 3.0
    min_x, min_z, max_x, max_z = hall.bounds()
    assert (max_x - min_x, max_z - min_z) == (10.0, 10.0)


def test_region_yaw_rotates_footprint():
    scene = built(
        "region room; room.scale <- vec3(4, 3, 2); room.rot <- rot(0, 0, 90);"
    )
    min_x, min_z, max_x, max_z = scene.regions[0].bounds()
    # width/depth swap under a quarter turn
    assert (max_x - min_x) == pytest.approx(2.0)
    assert (max_z - min_z) == pytest.approx(4.0)
    scene.regions[0].validate()  # still CCW


def test_region_tilt_rejected():
    with pytest.raises(ValueError, match="yaw"):
        built("region room; room.rot <- rot(10, 0, 0);")


def test_object_extents_color_and_category():
    scene = built(
        'object coffee_table; coffee_table.scale <- vec3(1.2, 0.4, 0.6);\n'
        'coffee_table.color <- "walnut"; coffee_table.features <- "low";'
    )
    obj = scene.objects[0]
    assert obj.category == "coffee table"
    assert obj.extents() == (1.2, 0.4, 0.6)
    assert obj.color == "walnut"
    assert obj.features == "low"
    assert obj.dimensions == (1.0, 1.0, 1.0)


def test_preplaced_flag_from_pos_assignment():
    scene = built("region r; object a; a.pos <- vec3(1, 0.5, 1); object b;")
    a, b = scene.objects
    assert a.preplaced and a.transform.pos == (1.0, 0.5, 1.0)
    assert not b.preplaced


def test_region_assignment_via_inside():
    scene = built(
        "region r1; region r2; object a; object b; assert inside(b, r2);"
    )
    by_id = {o.id: o.region for o in scene.objects}
    assert by_id == {"a": "r1", "b": "r2"}


def test_variables_and_rand_in_assignments():
    scene1 = built(
        "Number w; w <- 2; object a; a.scale <- vec3(w, 1, w); "
        "object d; d.pos <- vec3(rand(0, 5), 0.5, rand(0, 5));",
        seed=9,
    )
    scene2 = built(
        "Number w; w <- 2; object a; a.scale <- vec3(w, 1, w); "
        "object d; d.pos <- vec3(rand(0, 5), 0.5, rand(0, 5));",
        seed=9,
    )
    assert scene1.objects[0].extents() == (2.0, 1.0, 2.0)
    assert scene1.objects[1].transform.pos == scene2.objects[1].transform.pos
    assert 0 <= scene1.objects[1].transform.pos[0] <= 5


def test_layout_dependent_assignment_rejected():
    with pytest.raises(EvalError, match="placement"):
        built("object a; object b; b.pos <- a.pos;")


def test_entities_for_asset_queries():
    scene = built(
        'object armchair; armchair.color <- "red"; armchair.material <- "velvet";'
    )
    entity = scene.entities()[0]
    assert entity.kind == "object"
    assert (entity.color, entity.category, entity.material) == ("red", "armchair", "velvet")
