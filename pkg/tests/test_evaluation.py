import math

import numpy as np
import pytest
from conftest import prop, real_vertex
from hypothesis import given, settings
from hypothesis import strategies as st

from partmatch.evaluation import (
    NoLocalizationError,
    RankedResult,
    cmc,
    greedy_match,
    match_in_shot,
    overlay_svg,
    pascal_match,
    person_box,
    rank_gallery,
    write_cmc_csv,
    write_rankings_csv,
)
from partmatch.geometry import box_iou
from partmatch.graph import CandidacyGraph
from partmatch.kinematics import fit_kinematics
from partmatch.model import Scene, Template
from partmatch.parts import PARTS, PartType
from partmatch.posterior import derive_state
from partmatch.sampler import ChainConfig
from partmatch.simulator import (
    SimConfig,
    generate_population,
    generate_reference_shot,
    generate_scene,
    make_rng,
    simulate_annotations,
)

P = PartType
H = 100.0
CLEAN = SimConfig(n_individuals=3, false_alarm_rate=0.0, occlusion_rate=0.0)


def test_cmc_example():
    results = [
        RankedResult("q1", (("a", 5.0), ("b", 4.0), ("c", 3.0), ("d", 2.0), ("e", 1.0))),
        RankedResult("q2", (("a", 5.0), ("b", 4.0), ("c", 3.0), ("d", 2.0), ("e", 1.0))),
        RankedResult("q3", (("a", 5.0), ("b", 4.0), ("c", 3.0), ("d", 2.0), ("e", 1.0))),
    ]
    rates = cmc(results, {"q1": "a", "q2": "b", "q3": "e"})
    assert rates.tolist() == pytest.approx([1 / 3, 2 / 3, 2 / 3, 2 / 3, 1.0])
    with pytest.raises(ValueError):
        cmc(results, {"q1": "a"})
    with pytest.raises(ValueError):
        cmc([], {})


def test_ranked_result_contracts():
    with pytest.raises(ValueError):
        RankedResult("q", (("a", 1.0), ("a", 0.5)))
    with pytest.raises(ValueError):
        RankedResult("q", (("a", 1.0), ("b", 2.0)))
    assert RankedResult("q", (("a", 1.0), ("b", -math.inf))).rank_of("b") == 2


def test_pascal_threshold_is_strict():
    assert not pascal_match((0, 0, 2, 1), (0, 0, 1, 1))
    assert pascal_match((0, 0, 2, 1), (0, 0, 1.01, 1))
    assert not pascal_match((0, 0, 1, 1), (5, 5, 6, 6))


boxes = st.tuples(st.floats(0, 50), st.floats(0, 50), st.floats(1, 30), st.floats(1, 30)).map(lambda b: (b[0], b[1], b[0] + b[2], b[1] + b[3]))


@settings(max_examples=200, deadline=None)
@given(boxes, boxes)
def test_box_iou_symmetric_and_bounded(a, b):
    assert box_iou(a, b) == pytest.approx(box_iou(b, a), abs=1e-12)
    assert 0.0 <= box_iou(a, b) <= 1.0
    assert pascal_match(a, a)


def test_person_box_examples():
    head = prop(P.HEAD, 50, 10)  # 16 x 16
    torso = prop(P.TORSO, 50, 40)  # 30 x 35
    g = CandidacyGraph(
        [real_vertex(P.HEAD, 0, target=head), real_vertex(P.TORSO, 0, target=torso)],
        [],
        person_height=H,
    )
    assert person_box(derive_state(g, [1, 0]), g) == pytest.approx((42, 2, 58, 18))
    assert person_box(derive_state(g, [1, 1]), g) == pytest.approx((35, 2, 65, 57.5))
    with pytest.raises(NoLocalizationError):
        person_box(derive_state(g, [0, 0]), g)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.sampled_from(PARTS), st.floats(0, 200), st.floats(0, 200), st.floats(-3, 3)), min_size=2, max_size=6))
def test_person_box_grows_with_parts(parts):
    vs = [real_vertex(p, k, target=prop(p, x, y, t)) for k, (p, x, y, t) in enumerate(parts)]
    g = CandidacyGraph(vs, [], person_height=H)
    fewer = person_box(derive_state(g, [1] * (len(vs) - 1) + [0]), g)
    more = person_box(derive_state(g, [1] * len(vs)), g)
    assert more[0] <= fewer[0] and more[1] <= fewer[1] and more[2] >= fewer[2] and more[3] >= fewer[3]


@pytest.fixture(scope="module")
def world():
    rng = make_rng(21)
    km = fit_kinematics(simulate_annotations(200, rng, CLEAN), CLEAN.person_height)
    pop = generate_population(rng, CLEAN)
    gallery = {}
    for ind in pop:
        scene, _, _ = generate_scene([ind], None, rng, CLEAN, query=None)
        gallery[ind.id] = scene
    templates = {}
    for ind in pop:
        ref = generate_reference_shot(ind, rng, CLEAN)
        templates[ind.id] = Template({p: (q,) for p, q in ref.true_proposals.items()}, CLEAN.person_height)
    return km, pop, gallery, templates


def test_rank_gallery_puts_self_first(world):
    km, pop, gallery, templates = world
    cfg = ChainConfig(iterations=300)
    for ind in pop:
        r = rank_gallery(templates[ind.id], gallery, km, cfg=cfg, query_id=ind.id)
        assert r.rank_of(ind.id) == 1
        assert [g for g, _ in r.ranking] != []
    one = rank_gallery(templates["p0"], {"p0": gallery["p0"]}, km, cfg=cfg)
    assert [g for g, _ in one.ranking] == ["p0"]
    with pytest.raises(ValueError):
        rank_gallery(templates["p0"], {}, km)


def test_rank_gallery_ignores_insertion_order(world):
    km, _, gallery, templates = world
    cfg = ChainConfig(iterations=200, seed=3)
    a = rank_gallery(templates["p1"], gallery, km, cfg=cfg)
    b = rank_gallery(templates["p1"], dict(reversed(list(gallery.items()))), km, cfg=cfg)
    assert a == b


def test_match_in_clean_scene(world):
    km, pop, _, templates = world
    rng = make_rng(22)
    scene, gt, _ = generate_scene(pop[:1], None, rng, CLEAN, query=0)
    res = match_in_shot(templates[pop[0].id], scene, km, cfg=ChainConfig(iterations=1000))
    assert res.box is not None and pascal_match(res.box, gt.boxes[0])
    assert res.score == pytest.approx(max(res.score, greedy_match(templates[pop[0].id], scene, km).score))
    empty = Scene.from_list([], (100, 100), person_height=CLEAN.person_height)
    res = match_in_shot(templates[pop[0].id], empty, km, cfg=ChainConfig(iterations=10))
    assert res.box is None and res.score == -120.0


def test_reports(tmp_path, world):
    write_cmc_csv(tmp_path / "c.csv", np.array([0.5, 1.0]))
    assert (tmp_path / "c.csv").read_text() == "rank,rate\n1,0.500000\n2,1.000000\n"
    write_rankings_csv(tmp_path / "r.csv", [RankedResult("q", (("a", 1.5), ("b", -math.inf)))])
    assert (tmp_path / "r.csv").read_text().splitlines() == ["query,rank,gallery,score", "q,1,a,1.5", "q,2,b,-inf"]
    _, _, gallery, _ = world
    scene = gallery["p0"]
    svg = overlay_svg(scene, [((1, 2, 3, 4), "red")], scene.all_proposals())
    assert svg.startswith("<svg") and svg.count("<polygon") == len(scene)
