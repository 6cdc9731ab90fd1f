import pytest
from hypothesis import given, strategies as st

from pigpose.errors import SkeletonError
from pigpose.skeleton import (
    PIG_SKELETON_CSV,
    Skeleton,
    KeypointDef,
    parse_skeleton,
    pig_skeleton,
)


class TestParse:
    def test_pig_table(self):
        sk = parse_skeleton(PIG_SKELETON_CSV)
        assert len(sk) == 9
        assert sk.names == [
            "snout", "head", "neck", "forelegL1", "forelegR1",
            "hindlegL1", "hindlegR1", "tailbase", "tailtip",
        ]
        assert len(sk.edges()) == 7
        pairs = {
            frozenset((sk.names[i], sk.names[kp.swap]))
            for i, kp in enumerate(sk.keypoints)
            if kp.swap is not None
        }
        assert pairs == {
            frozenset(("forelegL1", "forelegR1")),
            frozenset(("hindlegL1", "hindlegR1")),
        }

    def test_minimal_single_row(self):
        sk = parse_skeleton("name,parent,swap\nsnout,,\n")
        assert len(sk) == 1
        assert sk.edges() == []

    def test_asymmetric_swap_blames_partner_row(self):
        csv = "name,parent,swap\na,,b\nb,,\n"
        with pytest.raises(SkeletonError, match="asymmetric swap at row 2"):
            parse_skeleton(csv)

    def test_duplicate_name(self):
        with pytest.raises(SkeletonError, match="duplicate keypoint name 'a' at row 2"):
            parse_skeleton("name,parent,swap\na,,\na,,\n")

    def test_unknown_parent(self):
        with pytest.raises(SkeletonError, match="unknown parent 'ghost' at row 1"):
            parse_skeleton("name,parent,swap\na,ghost,\n")

    def test_unknown_swap(self):
        with pytest.raises(SkeletonError, match="unknown swap 'ghost' at row 2"):
            parse_skeleton("name,parent,swap\na,,\nb,,ghost\n")

    def test_parent_cycle(self):
        with pytest.raises(SkeletonError, match="parent cycle"):
            parse_skeleton("name,parent,swap\na,b,\nb,a,\n")

    def test_self_swap(self):
        with pytest.raises(SkeletonError, match="swaps with itself at row 1"):
            parse_skeleton("name,parent,swap\na,,a\n")

    def test_bad_header(self):
        with pytest.raises(SkeletonError, match="header"):
            parse_skeleton("nom,parent,swap\na,,\n")

    def test_empty_text(self):
        with pytest.raises(SkeletonError, match="empty"):
            parse_skeleton("")

    def test_whitespace_trimmed(self):
        sk = parse_skeleton("name,parent,swap\n a ,,\nb, a ,\n")
        assert sk.names == ["a", "b"]
        assert sk.edges() == [(0, 1)]


class TestEdges:
    def test_pig_edges_sorted_by_child(self):
        sk = pig_skeleton()
        names = sk.names
        got = [(names[p], names[c]) for p, c in sk.edges()]
        assert got == [
            ("snout", "head"),
            ("head", "neck"),
            ("neck", "forelegL1"),
            ("neck", "forelegR1"),
            ("tailbase", "hindlegL1"),
            ("tailbase", "hindlegR1"),
            ("tailbase", "tailtip"),
        ]
        children = [c for _, c in sk.edges()]
        assert children == sorted(children)

    def test_chain(self):
        sk = parse_skeleton("name,parent,swap\na,,\nb,a,\nc,b,\n")
        assert sk.edges() == [(0, 1), (1, 2)]


class TestSwapPermutation:
    def test_pig(self):
        sk = pig_skeleton()
        perm = sk.swap_permutation()
        assert perm == [0, 1, 2, 4, 3, 6, 5, 7, 8]
        assert sum(1 for i, p in enumerate(perm) if p != i) == 4

    def test_no_swaps_identity(self):
        sk = parse_skeleton("name,parent,swap\na,,\nb,a,\n")
        assert sk.swap_permutation() == [0, 1]

    def test_involution(self):
        perm = pig_skeleton().swap_permutation()
        assert [perm[p] for p in perm] == list(range(len(perm)))


@st.composite
def skeletons(draw):
    n = draw(st.integers(min_value=1, max_value=9))
    names = [f"kp{i}" for i in range(n)]
    parents = [
        draw(st.one_of(st.none(), st.integers(min_value=0, max_value=i - 1)))
        if i > 0
        else None
        for i in range(n)
    ]
    swaps: list[int | None] = [None] * n
    free = list(range(n))
    draw_pairs = draw(st.integers(min_value=0, max_value=n // 2))
    for _ in range(draw_pairs):
        if len(free) < 2:
            break
        i = free.pop(draw(st.integers(min_value=0, max_value=len(free) - 1)))
        j = free.pop(draw(st.integers(min_value=0, max_value=len(free) - 1)))
        swaps[i], swaps[j] = j, i
    return Skeleton(
        keypoints=tuple(
            KeypointDef(name=names[i], parent=parents[i], swap=swaps[i])
            for i in range(n)
        )
    )


@given(skeletons())
def test_roundtrip_serialize_parse(sk):
    assert parse_skeleton(sk.to_csv()).keypoints == sk.keypoints


@given(skeletons())
def test_swap_permutation_always_involution(sk):
    perm = sk.swap_permutation()
    assert [perm[p] for p in perm] == list(range(len(perm)))


@given(skeletons())
def test_edge_per_parented_keypoint(sk):
    assert len(sk.edges()) == sum(1 for kp in sk.keypoints if kp.parent is not None)


def test_content_hash_tracks_content():
    a = pig_skeleton()
    b = parse_skeleton(PIG_SKELETON_CSV)
    assert a.content_hash() == b.content_hash()
    c = parse_skeleton("name,parent,swap\nsnout,,\n")
    assert a.content_hash() != c.content_hash()
