import numpy as np
import pytest
from conftest import onehot, prop
from hypothesis import given, settings
from hypothesis import strategies as st

from partmatch.model import TemplateIncompleteError
from partmatch.parts import PARTS, PartType
from partmatch.template import (
    BuildConfig,
    build_scene,
    build_template,
    dedup,
    nms,
    prune_by_foreground,
    strip_filter,
    strip_of,
)

P = PartType
H = 100.0


def test_prune_by_foreground():
    torso = prop(P.TORSO, 50, 50)  # 30 x 35 px at height 100
    ones = np.ones((100, 100), bool)
    assert prune_by_foreground([torso], ones, 0.75, H) == [torso]
    assert prune_by_foreground([torso], np.zeros((100, 100), bool), 0.75, H) == []
    half = np.zeros((100, 100), bool)
    half[:, :50] = True
    assert prune_by_foreground([torso], half, 0.75, H) == []
    assert prune_by_foreground([torso], half, 0.5, H) == [torso]


def test_strip_filter_examples():
    height = 200.0
    top = prop(P.HEAD, 10, 0.1 * height)
    low = prop(P.HEAD, 10, 0.9 * height)
    assert strip_filter([top, low], height) == [top]
    edge = prop(P.TORSO, 10, height / 4)
    assert strip_of(edge.y, height) == 1
    assert strip_filter([edge], height) == [edge]
    assert strip_of(height, height) == 3 and strip_of(-1.0, height) == 0


def test_nms_examples():
    a = prop(P.HEAD, 20, 20, score=0.9)
    assert nms([a], 0.5, H) == [a]
    twin = prop(P.HEAD, 20, 20, score=0.8)
    assert nms([twin, a], 0.5, H) == [a]
    # heads are 16 x 16; shifts of 8 give IoU 1/3 between neighbours and 0 across
    A, B, C = prop(P.HEAD, 20, 20, score=0.9), prop(P.HEAD, 28, 20, score=0.8), prop(P.HEAD, 36, 20, score=0.7)
    assert nms([C, B, A], 0.3, H) == [A, C]


def test_nms_full_tie_break():
    # same score, source and center; only the scale differs
    a, b = prop(P.HEAD, 11, 22, s=0.25, source_id="a"), prop(P.HEAD, 11, 22, s=0.28125, source_id="a")
    assert nms([a, b], 0.5, H) == nms([b, a], 0.5, H) == [a]


def test_nms_tie_break_is_order_free():
    a = prop(P.HEAD, 20, 20, score=0.5, source_id="b")
    b = prop(P.HEAD, 21, 20, score=0.5, source_id="a")
    assert nms([a, b], 0.5, H) == nms([b, a], 0.5, H) == [b]


def _reference(shift=0.0, score=1.0, source="r"):
    """One clean proposal per part laid out in the part's strip of a 100 x 200 frame."""
    props = []
    for i, part in enumerate(PARTS):
        y = (part.strip_index + 0.5) * 50
        props.append(prop(part, 10 + 9 * i + shift, y, s=0.3, score=score, descriptor=onehot(i), source_id=source))
    return props


def test_build_template_one_reference():
    t = build_template([_reference()], [np.ones((200, 100), bool)], BuildConfig(K=4), H)
    assert all(len(t[p]) == 1 for p in PARTS)


def test_build_template_pools_and_truncates():
    refs = [_reference(0, 0.9, "r0"), _reference(30, 0.8, "r1"), _reference(60, 0.7, "r2")]
    t = build_template(refs, [np.ones((200, 200), bool)] * 3, BuildConfig(K=2), H)
    for p in PARTS:
        assert [q.source_id for q in t[p]] == ["r0", "r1"]


def test_build_template_incomplete_names_part():
    ref = [q for q in _reference() if q.part is not P.LEFT_CALF]
    with pytest.raises(TemplateIncompleteError, match="left_calf"):
        build_template([ref], [np.ones((200, 100), bool)], BuildConfig(), H)


def test_dedup():
    a, b, c = (prop(P.HEAD, descriptor=onehot(k)) for k in (0, 0, 1))
    assert dedup([a, b, c], 0.0) == [a, b, c]
    assert dedup([a, b, c], 0.5) == [a, c]
    t = build_template([_reference()], [np.ones((200, 100), bool)], BuildConfig(dedup_distance=0.0), H)
    assert all(len(t[p]) == 1 for p in PARTS)


def test_build_scene_examples():
    empty = build_scene([], None, BuildConfig(), image_size=(50, 50), person_height=H)
    assert len(empty) == 0
    mask = np.zeros((100, 100), bool)
    mask[:50] = True
    inside, outside = prop(P.HEAD, 50, 20, score=0.9), prop(P.HEAD, 50, 80, score=0.9)
    sc = build_scene([inside, outside], mask, BuildConfig(), person_height=H)
    assert sc[P.HEAD] == (inside,)
    dup = prop(P.HEAD, 51, 20, score=0.5)
    sc = build_scene([dup, inside], mask, BuildConfig(), person_height=H)
    assert sc[P.HEAD] == (inside,)


# ---- properties -----------------------------------------------------------

proposal_sets = st.lists(
    st.builds(
        prop,
        st.sampled_from(PARTS),
        st.floats(5, 95),
        st.floats(5, 195),
        st.floats(-3, 3),
        st.floats(0.2, 0.5),
        st.floats(0, 1),
        st.just(None),
        st.sampled_from(["a", "b", "c"]),
    ),
    min_size=1,
    max_size=25,
)


def _key(q):
    return (q.part, q.x, q.y, q.theta, q.s, q.score, q.source_id)


@settings(max_examples=80, deadline=None)
@given(proposal_sets, st.integers(1, 4), st.randoms(use_true_random=False))
def test_builders_filter_and_are_order_free(props, K, rnd):
    mask = np.zeros((200, 100), bool)
    mask[20:180, 10:90] = True
    cfg = BuildConfig(K=K)
    shuffled = list(props)
    rnd.shuffle(shuffled)
    ids = {id(p) for p in props}
    sc = build_scene(props, mask, cfg, person_height=H)
    assert all(id(q) in ids for q in sc.all_proposals())
    assert list(map(_key, sc.all_proposals())) == list(map(_key, build_scene(shuffled, mask, cfg, person_height=H).all_proposals()))
    try:
        t = build_template([props], [mask], cfg, H)
    except TemplateIncompleteError:
        return
    t2 = build_template([shuffled], [mask], cfg, H)
    for p in PARTS:
        assert len(t[p]) <= K
        assert all(id(q) in ids for q in t[p])
        assert list(map(_key, t[p])) == list(map(_key, t2[p]))
