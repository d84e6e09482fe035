"""Round-trip and validation tests for the tree data model."""

import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lfcoal.errors import (
    InvalidDepthError,
    NewickSyntaxError,
    NonIntegerDepthError,
    NotUltrametricError,
    OutOfRangeError,
)
from lfcoal.fileio import (
    read_depths_auto,
    read_depths_jsonl,
    read_newick_file,
    sniff_format,
    write_depths_jsonl,
    write_newick_file,
)
from lfcoal.trees import (
    DepthSeq,
    Tree,
    TreeNode,
    depths_to_tree,
    parse_newick,
    tree_to_depths,
    write_newick,
)


def all_depth_seqs(t_max, n_max):
    for t in range(1, t_max + 1):
        for n in range(1, n_max + 1):
            for depths in itertools.product(range(1, t + 1), repeat=n - 1):
                yield DepthSeq(T=t, depths=depths)


random_seq = st.integers(1, 8).flatmap(
    lambda t: st.lists(st.integers(1, t), max_size=9).map(
        lambda d: DepthSeq(T=t, depths=tuple(d))
    )
)


class TestDepthSeq:
    def test_single_tip(self):
        seq = DepthSeq(T=4)
        assert seq.n == 1 and seq.depths == ()

    def test_rejects_bad_depths(self):
        with pytest.raises(InvalidDepthError):
            DepthSeq(T=3, depths=(0,))
        with pytest.raises(InvalidDepthError):
            DepthSeq(T=3, depths=(4,))
        with pytest.raises(InvalidDepthError):
            DepthSeq(T=3, depths=(1.5,))

    def test_rejects_bad_height(self):
        with pytest.raises(OutOfRangeError):
            DepthSeq(T=0)

    def test_numpy_integers_normalized(self):
        seq = DepthSeq(T=3, depths=tuple(np.array([1, 2])))
        assert seq.depths == (1, 2)
        assert all(isinstance(d, int) for d in seq.depths)


class TestDepthsToTree:
    def test_single_lineage(self):
        tree = depths_to_tree(DepthSeq(T=3))
        assert tree.height == 3
        assert tree.root.is_tip and tree.root.label == 0

    def test_caterpillar(self):
        # tips 0,1 coalesce at 1; that clade joins tip 2 at 2; stem to 3
        tree = depths_to_tree(DepthSeq(T=3, depths=(1, 2)))
        root = tree.root
        assert root.depth == 2 and len(root.children) == 2
        clade, tip2 = root.children
        assert clade.depth == 1 and [c.label for c in clade.children] == [0, 1]
        assert tip2.label == 2

    def test_trifurcation(self):
        # equal depths hit the same vertical line
        tree = depths_to_tree(DepthSeq(T=3, depths=(2, 2)))
        root = tree.root
        assert root.depth == 2
        assert [c.label for c in root.children] == [0, 1, 2]

    def test_internal_node_count_matches_distinct_runs(self):
        for seq in all_depth_seqs(3, 5):
            tree = depths_to_tree(seq)
            internal = sum(1 for node in _walk(tree.root) if not node.is_tip)
            assert internal == _distinct_merge_events(seq.depths)
            if not tree.root.is_tip:
                assert tree.root.depth == max(seq.depths)

    def test_tip_order(self):
        tree = depths_to_tree(DepthSeq(T=4, depths=(1, 3, 2, 3, 1)))
        assert [tip.label for tip in tree.tips()] == [0, 1, 2, 3, 4, 5]


def _walk(node):
    yield node
    for child in node.children:
        yield from _walk(child)


def _distinct_merge_events(depths):
    # one internal node per maximal run of attachment at the same node: count
    # via the inverse construction itself on a stack of open depths
    events = 0
    stack = []
    for h in depths:
        while stack and stack[-1] < h:
            stack.pop()
        if not (stack and stack[-1] == h):
            events += 1
            stack.append(h)
    return events


class TestTreeToDepths:
    def test_examples(self):
        assert tree_to_depths(depths_to_tree(DepthSeq(T=5))).depths == ()
        assert tree_to_depths(depths_to_tree(DepthSeq(T=3, depths=(1, 2)))).depths == (1, 2)
        assert tree_to_depths(depths_to_tree(DepthSeq(T=3, depths=(2, 2)))).depths == (2, 2)

    def test_exhaustive_round_trip(self):
        for seq in all_depth_seqs(6, 6):
            assert tree_to_depths(depths_to_tree(seq)) == seq

    @given(random_seq)
    @settings(max_examples=500, deadline=None)
    def test_random_round_trip(self, seq):
        assert tree_to_depths(depths_to_tree(seq)) == seq

    def test_rejects_unifurcation(self):
        bad = Tree(height=3, root=TreeNode(2, children=[TreeNode(0, label=0)]))
        with pytest.raises(NotUltrametricError):
            tree_to_depths(bad)

    def test_rejects_tip_off_the_floor(self):
        bad = Tree(
            height=3,
            root=TreeNode(2, children=[TreeNode(1, label=0), TreeNode(0, label=1)]),
        )
        with pytest.raises(NotUltrametricError):
            tree_to_depths(bad)


class TestNewick:
    def test_write_examples(self):
        assert write_newick(depths_to_tree(DepthSeq(T=2))) == "0:2;"
        assert (
            write_newick(depths_to_tree(DepthSeq(T=3, depths=(1, 2))))
            == "((0:1,1:1):1,2:2):1;"
        )
        assert (
            write_newick(depths_to_tree(DepthSeq(T=3, depths=(2, 2))))
            == "(0:2,1:2,2:2):1;"
        )

    def test_parse_trifurcation(self):
        tree = parse_newick("(0:2,1:2,2:2):1;")
        assert tree.height == 3
        assert tree_to_depths(tree).depths == (2, 2)

    def test_parse_by_path_length_arithmetic(self):
        # tips at distance 3 from the outermost node, stem edge 0: the MRCA
        # of tips 0,1 sits at depth 1 and the outermost node at depth 3
        tree = parse_newick("((0:1,1:1):2,2:3):0;")
        assert tree.height == 3
        assert tree_to_depths(tree).depths == (1, 3)

    def test_parse_rejects_fractional_depths(self):
        with pytest.raises(NonIntegerDepthError):
            parse_newick("(0:1,(1:0.5,2:0.5):0.5):0;")

    def test_parse_rejects_non_coplanar_tips(self):
        with pytest.raises(NotUltrametricError):
            parse_newick("(0:1,1:2):1;")

    def test_parse_rejects_zero_length_internal_edge(self):
        with pytest.raises(NotUltrametricError):
            parse_newick("((0:1,1:1):0,2:1):1;")

    def test_parse_syntax_errors_carry_position(self):
        text = "((0:1,1:1):1,2:2):1"
        with pytest.raises(NewickSyntaxError) as err:
            parse_newick(text)
        assert err.value.position == len(text)
        with pytest.raises(NewickSyntaxError):
            parse_newick("(0:1,1:1;")
        with pytest.raises(NewickSyntaxError):
            parse_newick("(0:1,1:x):1;")

    def test_parse_accepts_missing_root_edge(self):
        tree = parse_newick("(a:1,b:1);")
        assert tree.height == 1
        assert tree_to_depths(tree).depths == (1,)

    def test_parse_tolerates_serialization_noise(self):
        tree = parse_newick("(0:0.9999999999,1:1.0000000001):2.0;")
        assert tree.height == 3
        assert tree_to_depths(tree).depths == (1,)

    def test_tips_relabeled_left_to_right(self):
        tree = parse_newick("(zebra:2,(x:1,y:1):1):0;")
        assert [tip.label for tip in tree.tips()] == [0, 1, 2]

    def test_exhaustive_round_trip(self):
        for seq in all_depth_seqs(4, 5):
            tree = depths_to_tree(seq)
            again = parse_newick(write_newick(tree))
            assert again == tree
            assert tree_to_depths(again) == seq

    @given(random_seq)
    @settings(max_examples=500, deadline=None)
    def test_random_round_trip(self, seq):
        tree = depths_to_tree(seq)
        assert parse_newick(write_newick(tree)) == tree


class TestFileIO:
    def test_jsonl_round_trip_bit_exact(self, tmp_path):
        path = tmp_path / "trees.jsonl"
        seqs = [DepthSeq(T=6, depths=(2, 1, 3)), DepthSeq(T=6), DepthSeq(T=2, depths=(1,))]
        write_depths_jsonl(path, seqs)
        assert read_depths_jsonl(path) == seqs
        lines = path.read_text().splitlines()
        header = json.loads(lines[0])
        assert header["format"] == "lfcoal.trees" and header["version"] == 1
        assert json.loads(lines[1]) == {"T": 6, "depths": [2, 1, 3]}

    def test_newick_file_round_trip(self, tmp_path):
        path = tmp_path / "trees.nwk"
        seqs = [DepthSeq(T=3, depths=(1, 2)), DepthSeq(T=4, depths=(4, 1))]
        write_newick_file(path, seqs)
        assert read_newick_file(path) == seqs

    def test_sniffing(self, tmp_path):
        jsonl = tmp_path / "a.jsonl"
        write_depths_jsonl(jsonl, [DepthSeq(T=2, depths=(1,))])
        nwk = tmp_path / "b.nwk"
        write_newick_file(nwk, [DepthSeq(T=2, depths=(1,))])
        assert sniff_format(jsonl) == "jsonl"
        assert sniff_format(nwk) == "newick"
        assert read_depths_auto(jsonl) == read_depths_auto(nwk)

    def test_atomic_write_leaves_no_partial_file(self, tmp_path):
        path = tmp_path / "out.jsonl"

        class Boom(Exception):
            pass

        def bad_records():
            yield DepthSeq(T=2, depths=(1,))
            raise Boom

        with pytest.raises(Boom):
            write_depths_jsonl(path, bad_records())
        assert not path.exists()
        assert list(tmp_path.iterdir()) == []
