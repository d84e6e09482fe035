"""Tree data model: depth sequences, linked ultrametric trees, Newick text.

A height-T genealogy is canonically encoded by its depth sequence: the
height T plus the coalescent depths between consecutive tips.  The linked
representation draws one vertical line per tip down to its depth and hangs
it on the nearest earlier lineage that reaches at least as deep; equal
consecutive depths merge into multifurcations rather than zero-length
edges, which keeps all round trips exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import (
    InvalidDepthError,
    NewickSyntaxError,
    NonIntegerDepthError,
    NotUltrametricError,
    OutOfRangeError,
)

__all__ = [
    "DepthSeq",
    "TreeNode",
    "Tree",
    "depths_to_tree",
    "tree_to_depths",
    "parse_newick",
    "write_newick",
]

_PLACEMENT_TOL = 1e-9


@dataclass(frozen=True)
class DepthSeq:
    """A height-T realization: depths between consecutive tips, each in [1, T].

    A single-tip genealogy has an empty depth tuple.  The implicit stem
    depth T is stored once as the height, not repeated in ``depths``.
    """

    T: int
    depths: tuple[int, ...] = ()

    def __post_init__(self):
        if not (isinstance(self.T, int) and self.T >= 1):
            raise OutOfRangeError(f"height T must be a positive integer, got {self.T!r}")
        clean = tuple(int(d) for d in self.depths)
        for d, raw in zip(clean, self.depths):
            if d != raw:
                raise InvalidDepthError(f"depth {raw!r} is not an integer")
            if not 1 <= d <= self.T:
                raise InvalidDepthError(f"depth {d} outside [1, {self.T}]")
        object.__setattr__(self, "depths", clean)

    @property
    def n(self) -> int:
        """Tip count."""
        return len(self.depths) + 1


@dataclass
class TreeNode:
    """A node of the linked tree: tips carry a label at depth 0."""

    depth: int
    label: int | None = None
    children: list["TreeNode"] = field(default_factory=list)

    @property
    def is_tip(self) -> bool:
        return not self.children


@dataclass
class Tree:
    """Rooted ordered ultrametric tree of integer height.

    ``root`` is the deepest coalescence (or the single tip); the stem edge
    of length ``height - root.depth`` reaches up to the observation height.
    """

    height: int
    root: TreeNode

    def tips(self) -> list[TreeNode]:
        out = []
        stack = [self.root]
        while stack:
            node = stack.pop()
            if node.is_tip:
                out.append(node)
            else:
                stack.extend(reversed(node.children))
        return out


def depths_to_tree(seq: DepthSeq) -> Tree:
    """Build the linked tree for a depth sequence.

    Tip i hangs at its depth on the lineage of the nearest earlier tip
    whose depth is at least as large (the stem, at depth T, backstops
    every tip).  Ties in depth join the existing node as a multifurcation.
    """
    root = TreeNode(0, label=0)
    spine = [root]  # path from the root to the most recent tip
    for i, h in enumerate(seq.depths, start=1):
        tip = TreeNode(0, label=i)
        j = len(spine) - 1
        while j >= 0 and spine[j].depth < h:
            j -= 1
        if j >= 0 and spine[j].depth == h:
            spine[j].children.append(tip)
            spine = spine[: j + 1] + [tip]
        else:
            below = spine[j + 1]
            node = TreeNode(h, children=[below, tip])
            if j >= 0:
                spine[j].children[-1] = node
            else:
                root = node
            spine = spine[: j + 1] + [node, tip]
    return Tree(height=seq.T, root=root)


def _validate_tree(tree: Tree):
    if tree.height < 1:
        raise OutOfRangeError(f"tree height must be >= 1, got {tree.height!r}")
    if tree.root.depth > tree.height:
        raise NotUltrametricError(
            f"root depth {tree.root.depth} exceeds height {tree.height}"
        )

    def check(node: TreeNode):
        if node.is_tip:
            if node.depth != 0:
                raise NotUltrametricError(f"tip at depth {node.depth}, expected 0")
            return
        if not isinstance(node.depth, int):
            raise NonIntegerDepthError(f"internal depth {node.depth!r} is not an integer")
        if node.depth < 1:
            raise NotUltrametricError(f"internal node at depth {node.depth} < 1")
        if len(node.children) < 2:
            raise NotUltrametricError("internal node with a single child")
        for child in node.children:
            if not child.is_tip and child.depth >= node.depth:
                raise NotUltrametricError(
                    f"child depth {child.depth} not below parent depth {node.depth}"
                )
            check(child)

    check(tree.root)


def tree_to_depths(tree: Tree) -> DepthSeq:
    """Read back the depth sequence: the depth between consecutive tips is
    the depth of their most recent common ancestor.  Exact inverse of
    depths_to_tree."""
    _validate_tree(tree)
    depths = []

    def walk(node: TreeNode):
        if node.is_tip:
            return
        for idx, child in enumerate(node.children):
            if idx > 0:
                depths.append(node.depth)
            walk(child)

    walk(tree.root)
    return DepthSeq(T=tree.height, depths=tuple(depths))


# ---------------------------------------------------------------------------
# Newick


class _NewickParser:
    """Recursive-descent parser for one Newick string."""

    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def error(self, message):
        raise NewickSyntaxError(message, self.pos)

    def peek(self):
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def parse(self):
        self.skip_ws()
        node = self.subtree()
        self.skip_ws()
        root_edge = 0.0
        if self.peek() == ":":
            self.pos += 1
            root_edge = self.number()
            self.skip_ws()
        if self.peek() != ";":
            self.error("expected ';'")
        self.pos += 1
        self.skip_ws()
        if self.pos != len(self.text):
            self.error("trailing characters after ';'")
        return node, root_edge

    def subtree(self):
        # returns (children, name, length) with length=None at the root level
        self.skip_ws()
        if self.peek() == "(":
            self.pos += 1
            children = [self.child()]
            while self.peek() == ",":
                self.pos += 1
                children.append(self.child())
            if self.peek() != ")":
                self.error("expected ')' or ','")
            self.pos += 1
            name = self.name()
            return {"children": children, "name": name}
        name = self.name()
        if name == "" and self.peek() not in ":":
            self.error("expected a subtree")
        return {"children": [], "name": name}

    def child(self):
        node = self.subtree()
        self.skip_ws()
        if self.peek() != ":":
            self.error("expected ':' and a branch length")
        self.pos += 1
        node["length"] = self.number()
        return node

    def name(self):
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos] not in "():,;[]' \t\n":
            self.pos += 1
        return self.text[start : self.pos]

    def number(self):
        self.skip_ws()
        start = self.pos
        while self.pos < len(self.text) and (
            self.text[self.pos].isdigit() or self.text[self.pos] in ".+-eE"
        ):
            self.pos += 1
        token = self.text[start : self.pos]
        try:
            value = float(token)
        except ValueError:
            self.error(f"expected a branch length, got {token!r}")
        if value < 0:
            self.error("branch lengths must be nonnegative")
        return value


def _as_integer(value: float, what: str) -> int:
    nearest = round(value)
    if abs(value - nearest) > _PLACEMENT_TOL:
        raise NonIntegerDepthError(f"{what} {value!r} is not an integer generation")
    return int(nearest)


def parse_newick(text: str) -> Tree:
    """Parse one Newick tree with nonnegative numeric branch lengths.

    Node depths are derived from root-to-node path lengths; the tips must
    be coplanar and every depth an integer, both within 1e-9.  Tip labels
    in the input are ignored: tips are relabeled 0..n-1 left to right.
    An optional length after the outermost group is the stem edge.
    """
    raw, root_edge = _NewickParser(text).parse()

    dists = []  # (raw tip node order check happens via traversal order)

    def collect(node, dist):
        if not node["children"]:
            node["dist"] = dist
            dists.append(dist)
            return
        node["dist"] = dist
        for child in node["children"]:
            collect(child, dist + child["length"])

    collect(raw, 0.0)
    span = max(dists)
    for d in dists:
        if abs(d - span) > _PLACEMENT_TOL:
            raise NotUltrametricError(
                f"tips not coplanar: root-to-tip distances {d!r} and {span!r}"
            )
    height = _as_integer(span + root_edge, "height")
    if height < 1:
        raise OutOfRangeError("tree height must be >= 1")

    next_label = [0]

    def build(node) -> TreeNode:
        if not node["children"]:
            label = next_label[0]
            next_label[0] += 1
            return TreeNode(0, label=label)
        depth = _as_integer(span - node["dist"], "node depth")
        if depth < 1:
            raise NotUltrametricError("internal node at depth < 1")
        built = TreeNode(depth, children=[build(c) for c in node["children"]])
        for child in built.children:
            if not child.is_tip and child.depth >= depth:
                raise NotUltrametricError(
                    "zero-length internal edge; equal depths must be a multifurcation"
                )
        return built

    tree = Tree(height=height, root=build(raw))
    _validate_tree(tree)
    return tree


def write_newick(tree: Tree) -> str:
    """Canonical Newick: integer branch lengths, tips labeled left to right,
    a stem edge after the outermost group, trailing ';'."""
    _validate_tree(tree)
    counter = [0]

    def emit(node: TreeNode, parent_depth: int) -> str:
        if node.is_tip:
            label = counter[0]
            counter[0] += 1
            return f"{label}:{parent_depth}"
        inner = ",".join(emit(child, node.depth) for child in node.children)
        return f"({inner}):{parent_depth - node.depth}"

    return emit(tree.root, tree.height) + ";"
