"""Boxes, demand tensors, instance IO, and the synthetic generator."""

import json

import numpy as np
import pytest

from vrpanneal.model import (
    Box,
    DemandTensors,
    DrivingWindow,
    GeneratorConfig,
    ParseError,
    ProblemInstance,
    box_soup,
    generate_instance,
    group_boxes,
    load_instance,
    load_time_matrix_csv,
    overall_demand,
    save_instance,
    validate_time_matrix,
)


# -------------------------------------------------------------------- boxes

def test_box_coerces_path_and_volume():
    box = Box(3, np.float64(0.25), [np.int64(0), np.int64(2)])
    assert box.path == (0, 2)
    assert isinstance(box.path[0], int)
    assert isinstance(box.volume, float)


def test_box_validation():
    with pytest.raises(ValueError, match="id"):
        Box(-1, 0.1, (0, 1))
    with pytest.raises(ValueError, match="volume"):
        Box(0, 0.0, (0, 1))
    with pytest.raises(ValueError, match="volume"):
        Box(0, float("inf"), (0, 1))
    with pytest.raises(ValueError, match="2 or 3 nodes"):
        Box(0, 0.1, (0,))
    with pytest.raises(ValueError, match="2 or 3 nodes"):
        Box(0, 0.1, (0, 1, 2, 3))
    with pytest.raises(ValueError, match="non-negative"):
        Box(0, 0.1, (0, -1))
    with pytest.raises(ValueError, match="differ"):
        Box(0, 0.1, (1, 1))
    with pytest.raises(ValueError, match="differ"):
        Box(0, 0.1, (0, 2, 2))
    # revisiting a node non-consecutively is fine
    Box(0, 0.1, (0, 1, 0))


def test_driving_window_validation():
    assert DrivingWindow(5.0).t_max == 5.0
    for bad in (0.0, -1.0, float("nan"), float("inf")):
        with pytest.raises(ValueError):
            DrivingWindow(bad)


# ----------------------------------------------------------- demand tensors

def test_demand_tensors_validation():
    n = 3
    good2 = np.zeros((n, n))
    good3 = np.zeros((n, n, n))
    DemandTensors(good2, good3)

    with pytest.raises(ValueError, match="square"):
        DemandTensors(np.zeros((2, 3)), good3)
    with pytest.raises(ValueError, match="shape"):
        DemandTensors(good2, np.zeros((n, n, n + 1)))
    bad = good2.copy()
    bad[0, 1] = -1.0
    with pytest.raises(ValueError, match="non-negative"):
        DemandTensors(bad, good3)
    bad = good2.copy()
    bad[0, 1] = float("nan")
    with pytest.raises(ValueError, match="finite"):
        DemandTensors(bad, good3)
    bad = good2.copy()
    bad[1, 1] = 2.0
    with pytest.raises(ValueError, match="diagonal"):
        DemandTensors(bad, good3)
    bad3 = good3.copy()
    bad3[1, 1, 2] = 1.0
    with pytest.raises(ValueError, match="consecutive"):
        DemandTensors(good2, bad3)
    bad3 = good3.copy()
    bad3[0, 2, 2] = 1.0
    with pytest.raises(ValueError, match="consecutive"):
        DemandTensors(good2, bad3)


def test_group_boxes_keeps_first_seen_order():
    boxes = [
        Box(10, 0.5, (0, 1)),
        Box(11, 0.25, (2, 1)),
        Box(12, 0.5, (0, 1)),
        Box(13, 1.0, (0, 1, 2)),
    ]
    groups = group_boxes(boxes)
    assert [g.path for g in groups] == [(0, 1), (2, 1), (0, 1, 2)]
    assert groups[0].total_volume == 1.0
    assert groups[0].box_ids == (10, 12)
    assert groups[1].box_ids == (11,)
    assert groups[2].total_volume == 1.0


def test_box_soup_places_volumes_by_path():
    boxes = [Box(0, 0.5, (0, 1)), Box(1, 0.25, (0, 1, 2)), Box(2, 0.125, (2, 1))]
    tensors = box_soup(group_boxes(boxes), 3)
    assert tensors.d2[0, 1] == 0.5
    assert tensors.d2[2, 1] == 0.125
    assert tensors.d3[0, 1, 2] == 0.25
    assert tensors.d2.sum() == 0.625
    assert tensors.d3.sum() == 0.25


def test_box_soup_rejects_out_of_range_nodes():
    with pytest.raises(ValueError, match="outside"):
        box_soup(group_boxes([Box(0, 0.1, (0, 5))]), 3)


def test_overall_demand_hand_example():
    # every path contributes its volume to each consecutive leg it contains
    boxes = [
        Box(0, 0.5, (0, 1)),
        Box(1, 0.25, (0, 1, 2)),
        Box(2, 0.125, (2, 1)),
        Box(3, 0.125, (1, 0)),
    ]
    overall = overall_demand(box_soup(group_boxes(boxes), 3))
    expected = np.zeros((3, 3))
    expected[0, 1] = 0.75
    expected[1, 2] = 0.25
    expected[2, 1] = 0.125
    expected[1, 0] = 0.125
    assert np.array_equal(overall, expected)


def test_overall_demand_conserves_leg_volume():
    rng = np.random.default_rng(0)
    n = 7
    boxes = []
    for i in range(200):
        rank = 3 if rng.random() < 0.4 else 2
        path = [int(rng.integers(n))]
        while len(path) < rank:
            nxt = int(rng.integers(n))
            if nxt != path[-1]:
                path.append(nxt)
        boxes.append(Box(i, float(rng.uniform(0.01, 1.0)), tuple(path)))
    overall = overall_demand(box_soup(group_boxes(boxes), n))
    legs = sum(b.volume * (len(b.path) - 1) for b in boxes)
    assert overall.sum() == pytest.approx(legs, rel=1e-12)
    assert np.all(overall >= 0)
    assert not np.diagonal(overall).any()


# ----------------------------------------------------------------- instance

def test_time_matrix_validation():
    validate_time_matrix([[0.0, 1.0], [2.0, 0.0]])
    with pytest.raises(ValueError, match="square"):
        validate_time_matrix(np.zeros((2, 3)))
    with pytest.raises(ValueError, match="finite"):
        validate_time_matrix([[0.0, np.inf], [1.0, 0.0]])
    with pytest.raises(ValueError, match="non-negative"):
        validate_time_matrix([[0.0, -1.0], [1.0, 0.0]])
    with pytest.raises(ValueError, match="diagonal"):
        validate_time_matrix([[1.0, 1.0], [1.0, 0.0]])


def _tiny_instance():
    time = np.array([[0.0, 10.0, 20.0],
                     [10.0, 0.0, 15.0],
                     [20.0, 15.0, 0.0]])
    boxes = [Box(0, 0.5, (0, 1)), Box(1, 0.25, (1, 2, 0))]
    return ProblemInstance(n=3, time=time, boxes=boxes,
                           window=DrivingWindow(100.0), truck_capacity=1.0)


def test_instance_validation():
    inst = _tiny_instance()
    with pytest.raises(ValueError, match="at least 2"):
        ProblemInstance(1, np.zeros((1, 1)), [], DrivingWindow(10.0))
    with pytest.raises(ValueError, match="shape"):
        ProblemInstance(3, np.zeros((2, 2)), [], DrivingWindow(10.0))
    with pytest.raises(ValueError, match="capacity"):
        ProblemInstance(3, inst.time, [], DrivingWindow(10.0), truck_capacity=0.0)
    with pytest.raises(ValueError, match="outside"):
        ProblemInstance(2, np.zeros((2, 2)), [Box(0, 0.1, (0, 5))], DrivingWindow(10.0))
    with pytest.raises(ValueError, match="unique"):
        ProblemInstance(3, inst.time, [Box(0, 0.1, (0, 1)), Box(0, 0.2, (1, 2))],
                        DrivingWindow(10.0))


def test_instance_equality_and_tensors():
    a = _tiny_instance()
    b = _tiny_instance()
    assert a == b
    assert a != "not an instance"
    tensors = a.demand_tensors()
    assert tensors.d2[0, 1] == 0.5
    assert tensors.d3[1, 2, 0] == 0.25
    overall = overall_demand(tensors)
    assert overall[1, 2] == 0.25
    assert overall[2, 0] == 0.25


def test_instance_json_round_trip(tmp_path):
    inst = _tiny_instance()
    path = tmp_path / "inst.json"
    save_instance(inst, str(path))
    again = load_instance(str(path))
    assert again == inst


def test_instance_from_dict_missing_fields():
    inst = _tiny_instance()
    data = inst.to_dict()
    for field in ("n", "time", "window_s", "capacity", "boxes"):
        broken = dict(data)
        del broken[field]
        with pytest.raises(ParseError, match=field):
            ProblemInstance.from_dict(broken)
    broken = json.loads(json.dumps(data))
    del broken["boxes"][1]["path"]
    with pytest.raises(ParseError, match="box entry 1"):
        ProblemInstance.from_dict(broken)


def test_instance_from_dict_bad_box_value_names_entry():
    data = _tiny_instance().to_dict()
    data["boxes"][0]["volume"] = -1.0
    with pytest.raises(ValueError, match="box entry 0"):
        ProblemInstance.from_dict(data)


def test_load_instance_rejects_broken_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(ParseError, match="JSON"):
        load_instance(str(path))


def test_load_time_matrix_csv(tmp_path):
    path = tmp_path / "time.csv"
    path.write_text("0,5.5\n7.25,0\n")
    time = load_time_matrix_csv(str(path))
    assert np.array_equal(time, [[0.0, 5.5], [7.25, 0.0]])

    bad = tmp_path / "bad.csv"
    bad.write_text("0,apple\n1,0\n")
    with pytest.raises(ParseError, match="numeric"):
        load_time_matrix_csv(str(bad))

    ragged = tmp_path / "rect.csv"
    ragged.write_text("0,1,2\n3,0,4\n")
    with pytest.raises(ValueError, match="square"):
        load_time_matrix_csv(str(ragged))


# ---------------------------------------------------------------- generator

def test_generator_config_validation():
    with pytest.raises(ValueError, match="at least 2"):
        GeneratorConfig(n=1)
    with pytest.raises(ValueError, match="num_paths"):
        GeneratorConfig(num_paths=0)
    with pytest.raises(ValueError, match="num_boxes"):
        GeneratorConfig(num_boxes=10, num_paths=20)
    with pytest.raises(ValueError, match="legs"):
        GeneratorConfig(n=3, num_boxes=100, num_paths=7)
    with pytest.raises(ValueError, match="rank3_fraction"):
        GeneratorConfig(rank3_fraction=1.5)
    with pytest.raises(ValueError, match="volume_range"):
        GeneratorConfig(volume_range=(0.0, 1.0))
    with pytest.raises(ValueError, match="time_range_s"):
        GeneratorConfig(time_range_s=(100.0, 50.0))
    with pytest.raises(ValueError, match="window_s"):
        GeneratorConfig(window_s=0.0)


def test_generate_is_deterministic():
    cfg = GeneratorConfig(n=6, num_boxes=80, num_paths=12)
    a = generate_instance(cfg, seed=5)
    b = generate_instance(cfg, seed=5)
    assert a == b
    assert json.dumps(a.to_dict()) == json.dumps(b.to_dict())
    c = generate_instance(cfg, seed=6)
    assert a != c


def test_generate_rejects_negative_seed():
    with pytest.raises(ValueError, match="seed"):
        generate_instance(GeneratorConfig(n=4, num_boxes=10, num_paths=5), seed=-1)


def test_generate_matches_config_shape():
    cfg = GeneratorConfig(n=8, num_boxes=300, num_paths=30, rank3_fraction=0.3,
                          volume_range=(0.01, 0.2), time_range_s=(60.0, 600.0),
                          window_s=3_600.0)
    inst = generate_instance(cfg, seed=2)
    assert inst.n == 8
    assert len(inst.boxes) == 300
    assert inst.window.t_max == 3_600.0
    assert inst.truck_capacity == 1.0
    assert all(0.01 <= b.volume <= 0.2 for b in inst.boxes)
    offdiag = inst.time[~np.eye(8, dtype=bool)]
    assert np.all((offdiag >= 60.0) & (offdiag <= 600.0))
    assert np.array_equal(inst.time, inst.time.T)
    assert not np.diagonal(inst.time).any()

    ranks = [len(b.path) for b in inst.boxes]
    num_rank3_paths = len({b.path for b in inst.boxes if len(b.path) == 3})
    assert num_rank3_paths == round(0.3 * 30)
    assert set(ranks) == {2, 3}


def test_generate_asymmetric_times():
    cfg = GeneratorConfig(n=6, num_boxes=20, num_paths=10, symmetric_times=False)
    inst = generate_instance(cfg, seed=3)
    assert not np.array_equal(inst.time, inst.time.T)
    assert not np.diagonal(inst.time).any()


def test_generate_paths_equal_legs_equal_nonzero_demand():
    # distinct paths, distinct directed legs, and nonzero pairwise-demand
    # entries all agree with num_paths, and the head boxes cover every path
    for seed in range(4):
        cfg = GeneratorConfig(n=7, num_boxes=120, num_paths=20, rank3_fraction=0.4)
        inst = generate_instance(cfg, seed=seed)
        paths = {b.path for b in inst.boxes}
        assert len(paths) == 20
        legs = {leg for p in paths for leg in zip(p, p[1:])}
        assert len(legs) == 20
        overall = overall_demand(inst.demand_tensors())
        assert int(np.count_nonzero(overall)) == 20
        head = [inst.boxes[i].path for i in range(20)]
        assert len(set(head)) == 20


def test_generate_default_config_production_shape():
    inst = generate_instance(seed=0)
    assert inst.n == 23
    assert len(inst.boxes) == 10_000
    assert len({b.path for b in inst.boxes}) == 115
    overall = overall_demand(inst.demand_tensors())
    assert int(np.count_nonzero(overall)) == 115


def test_generate_rank3_needs_a_rank2_seed_path():
    cfg = GeneratorConfig(n=4, num_boxes=10, num_paths=2, rank3_fraction=1.0)
    with pytest.raises(ValueError, match="two-node"):
        generate_instance(cfg, seed=0)
