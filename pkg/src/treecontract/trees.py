"""Rooted trees with ordered children, preorder decomposition and Big-Small classification.

Vertices are integer ids. deg(v) counts children only; the parent edge is not
part of the degree. Payload sizes are measured in machine words: one word per
scalar (int, flag, sentinel); a Fraction costs two. Containers are free, they
only give the payload its shape.
"""

from fractions import Fraction
from math import ceil, log2

from .errors import InputError

NEG_INF = float("-inf")


def word_count(obj):
    """Number of machine words a payload occupies."""
    if obj is None or isinstance(obj, (bool, int, float)):
        return 1
    if isinstance(obj, Fraction):
        return 2
    if isinstance(obj, str):
        return 1
    if isinstance(obj, (tuple, list)):
        return sum(word_count(x) for x in obj)
    raise TypeError("unsupported payload element: %r" % (obj,))


def log_words(n):
    """Bits per word for budget statements, against the original size n."""
    return ceil(log2(n + 1))


class WeightVector:
    """Declared-size wrapper around a payload object.

    bit_len is the semantic length (words * bits-per-word); the physical
    encoding may be longer, never shorter.
    """

    __slots__ = ("obj", "words", "bit_len")

    def __init__(self, obj, bits_n):
        self.obj = obj
        self.words = word_count(obj)
        self.bit_len = self.words * log_words(bits_n)

    def __repr__(self):
        return "WeightVector(%r, words=%d)" % (self.obj, self.words)


class Tree:
    """Mutable rooted tree. parent maps vertex -> parent id (None for root);
    children keeps insertion order. attrs carries per-vertex input keys
    (ew, vw, bypass); payload carries the problem's working data."""

    __slots__ = ("root", "parent", "children", "attrs", "payload", "bits_n")

    def __init__(self, root, parent, child_order=None, attrs=None, bits_n=None):
        self.root = root
        self.parent = dict(parent)
        self.children = {v: [] for v in self.parent}
        if child_order is not None:
            for v, cs in child_order.items():
                if v not in self.children:
                    raise InputError("unknown vertex %r in child order" % (v,))
                self.children[v] = list(cs)
        else:
            for v in self.parent:  # insertion order of the parent map
                p = self.parent[v]
                if p is not None:
                    if p not in self.children:
                        raise InputError("unknown parent %r of vertex %r" % (p, v))
                    self.children[p].append(v)
        self.attrs = {v: dict(attrs.get(v, {})) for v in self.parent} if attrs else {
            v: {} for v in self.parent}
        self.payload = {}
        self.bits_n = bits_n if bits_n is not None else len(self.parent)
        self.validate()

    @property
    def n(self):
        return len(self.parent)

    def deg(self, v):
        return len(self.children[v])

    def is_leaf(self, v):
        return not self.children[v]

    def vertices(self):
        return self.parent.keys()

    def validate(self):
        if self.root not in self.parent or self.parent[self.root] is not None:
            raise InputError("root %r missing or has a parent" % (self.root,))
        roots = [v for v, p in self.parent.items() if p is None]
        if roots != [self.root] and set(roots) != {self.root}:
            raise InputError("expected exactly one root, found %r" % (roots,))
        seen = 0
        for v in self.preorder():
            seen += 1
        if seen != self.n:
            raise InputError("tree is disconnected or cyclic")
        for v, cs in self.children.items():
            for c in cs:
                if self.parent.get(c) != v:
                    raise InputError("parent/children maps disagree at %r" % (c,))

    def preorder(self):
        """Iterative preorder walk in child order."""
        stack = [self.root]
        while stack:
            v = stack.pop()
            yield v
            stack.extend(reversed(self.children[v]))

    def postorder(self):
        """Reverse-preorder walk: every vertex is seen after all descendants."""
        order = list(self.preorder())
        return reversed(order)

    def height(self, v=None):
        h = {}
        for u in self.postorder():
            h[u] = 1 + max((h[c] for c in self.children[u]), default=-1)
        return h[v if v is not None else self.root]

    def subtree(self, v):
        stack, out = [v], []
        while stack:
            u = stack.pop()
            out.append(u)
            stack.extend(reversed(self.children[u]))
        return out

    def copy(self):
        t = Tree.__new__(Tree)
        t.root = self.root
        t.parent = dict(self.parent)
        t.children = {v: list(cs) for v, cs in self.children.items()}
        t.attrs = {v: dict(a) for v, a in self.attrs.items()}
        t.payload = dict(self.payload)
        t.bits_n = self.bits_n
        return t

    def slice(self, members, root):
        """Standalone subtree over `members` rooted at `root`. Members must be
        closed under children (no dangling child edges)."""
        ms = set(members)
        for v in ms:
            for c in self.children[v]:
                if c not in ms:
                    raise InputError("slice is not closed below %r" % (v,))
        t = Tree.__new__(Tree)
        t.root = root
        t.parent = {v: (self.parent[v] if v != root else None) for v in members}
        t.children = {v: list(self.children[v]) for v in members}
        t.attrs = {v: dict(self.attrs[v]) for v in members}
        t.payload = {v: self.payload[v] for v in members if v in self.payload}
        t.bits_n = self.bits_n
        return t

    def set_payload(self, v, obj, c_w=None):
        self.payload[v] = obj
        if c_w is not None:
            check_payload_budget(self, v, c_w)

    def remove_leaf(self, v):
        if self.children[v]:
            raise InputError("remove_leaf on internal vertex %r" % (v,))
        p = self.parent[v]
        if p is not None:
            self.children[p].remove(v)
        del self.parent[v]
        del self.children[v]
        self.attrs.pop(v, None)
        self.payload.pop(v, None)

    def contract(self, members, survivor):
        """Contract the connected set `members` into `survivor` (its topmost
        member). External children of removed members reattach to the survivor
        in member order, then child order."""
        ms = set(members)
        adopted = []
        for m in members:
            for c in self.children[m]:
                if c not in ms:
                    adopted.append(c)
        kept = [c for c in self.children[survivor] if c not in ms]
        # survivor keeps its own external children first, then adopts.
        new_children = kept + [c for c in adopted if self.parent[c] != survivor]
        for m in members:
            if m == survivor:
                continue
            del self.parent[m]
            del self.children[m]
            self.attrs.pop(m, None)
            self.payload.pop(m, None)
        self.children[survivor] = new_children
        for c in new_children:
            self.parent[c] = survivor

    def __eq__(self, other):
        return (isinstance(other, Tree) and self.root == other.root
                and self.parent == other.parent
                and self.children == other.children
                and self.attrs == other.attrs)

    def __hash__(self):
        return hash((self.root, self.n))


def check_payload_budget(tree, v, c_w):
    """Payload of v must fit C_w*(deg(v)+1) words."""
    w = word_count(tree.payload[v])
    cap = c_w * (tree.deg(v) + 1)
    if w > cap:
        raise InputError("payload of %r is %d words, budget %d" % (v, w, cap))
    return w


# ---------------------------------------------------------------------------
# text format: line 1 "n root"; then one line per vertex in id order:
# "id parent|- key=value ..."

def parse_tree(text):
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise InputError("empty tree file")
    head = lines[0].split()
    if len(head) != 2:
        raise InputError("header must be 'n root_id'")
    try:
        n, root = int(head[0]), int(head[1])
    except ValueError:
        raise InputError("header must be 'n root_id'") from None
    if len(lines) - 1 != n:
        raise InputError("expected %d vertex lines, found %d" % (n, len(lines) - 1))
    parent, attrs, order = {}, {}, []
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) < 2:
            raise InputError("bad vertex line: %r" % ln)
        try:
            v = int(parts[0])
        except ValueError:
            raise InputError("bad vertex id: %r" % parts[0]) from None
        p = None if parts[1] == "-" else int(parts[1])
        kv = {}
        for tok in parts[2:]:
            if "=" not in tok:
                raise InputError("bad attribute %r on vertex %d" % (tok, v))
            k, val = tok.split("=", 1)
            try:
                kv[k] = int(val)
            except ValueError:
                raise InputError("attribute %s of vertex %d is not an integer" % (k, v)) from None
        if v in parent:
            raise InputError("duplicate vertex id %d" % v)
        parent[v] = p
        attrs[v] = kv
        order.append(v)
    if order != sorted(order):
        raise InputError("vertex lines must be in id order")
    if root not in parent:
        raise InputError("root %d has no vertex line" % root)
    return Tree(root, parent, attrs=attrs)


def serialize_tree(tree):
    out = ["%d %d" % (tree.n, tree.root)]
    for v in sorted(tree.parent):
        p = tree.parent[v]
        toks = [str(v), "-" if p is None else str(p)]
        for k in sorted(tree.attrs[v]):
            toks.append("%s=%d" % (k, tree.attrs[v][k]))
        out.append(" ".join(toks))
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# preorder numbering and decomposition

def preorder_number(tree):
    """Ranks 1..n in preorder; parent before child, subtrees contiguous."""
    rank = {}
    for i, v in enumerate(tree.preorder(), start=1):
        rank[v] = i
    return rank


class Decomposition:
    """Contiguous preorder groups with per-group degree sum <= lam.

    boundaries[i] counts vertices in groups 1..i; order lists vertex ids by
    rank, so group i is order[boundaries[i-1]:boundaries[i]].
    """

    __slots__ = ("boundaries", "lam", "order")

    def __init__(self, boundaries, lam, order):
        self.boundaries = tuple(boundaries)
        self.lam = lam
        self.order = tuple(order)

    @property
    def k(self):
        return len(self.boundaries) - 1

    def groups(self):
        b = self.boundaries
        return [list(self.order[b[i - 1]:b[i]]) for i in range(1, len(b))]


def decompose(tree, lam, rank=None):
    """Greedy left-to-right packing over preorder ranks. A group is closed once
    its degree sum reached lam, or when the next vertex would push it past lam."""
    if lam < 1:
        raise InputError("lambda must be positive")
    if rank is None:
        rank = preorder_number(tree)
    order = sorted(tree.vertices(), key=rank.__getitem__)
    for v in order:
        if tree.deg(v) > lam:
            raise InputError("degree of vertex %r exceeds lambda=%d" % (v, lam))
    boundaries = [0]
    cur = 0
    for i, v in enumerate(order):
        d = tree.deg(v)
        if i > 0 and (cur >= lam or cur + d > lam):
            boundaries.append(i)
            cur = 0
        cur += d
    boundaries.append(len(order))
    dec = Decomposition(boundaries, lam, order)
    assert dec.k <= ceil(2 * tree.n / lam) or tree.n == 1
    return dec


def group_components(tree, dec):
    """Connected components of each group's induced forest, as
    (group_index, component vertex set) in (group, min-rank) order."""
    group_of = {}
    for gi, grp in enumerate(dec.groups(), start=1):
        for v in grp:
            group_of[v] = gi
    out = []
    for gi, grp in enumerate(dec.groups(), start=1):
        grp_set = set(grp)
        assert grp, "empty group"
        seen = set()
        for v in grp:  # rank order; component root is met first
            if v in seen:
                continue
            p = tree.parent[v]
            if p is not None and p in grp_set:
                continue  # not a component root within the group
            comp = []
            stack = [v]
            while stack:
                u = stack.pop()
                comp.append(u)
                seen.add(u)
                for c in tree.children[u]:
                    if c in grp_set:
                        stack.append(c)
            out.append((gi, frozenset(comp)))
    return out


class DependencyTree:
    """Each node is one within-group component; edges follow source-tree edges
    across components. A node is dependent iff it has child components."""

    __slots__ = ("nodes", "parent_of", "group", "members", "dependent")

    def __init__(self, nodes, parent_of, group, members, dependent):
        self.nodes = nodes
        self.parent_of = parent_of
        self.group = group
        self.members = members
        self.dependent = dependent

    def dependents_per_group(self):
        counts = {}
        for cid in self.nodes:
            if self.dependent[cid]:
                g = self.group[cid]
                counts[g] = counts.get(g, 0) + 1
        return counts


def dependency_tree(tree, dec):
    comps = group_components(tree, dec)
    comp_of = {}
    for cid, (gi, members) in enumerate(comps):
        for v in members:
            comp_of[v] = cid
    parent_of, dependent = {}, {}
    group, members_of = {}, {}
    for cid, (gi, members) in enumerate(comps):
        group[cid] = gi
        members_of[cid] = members
        dependent[cid] = False
        top = next(v for v in members
                   if tree.parent[v] is None or tree.parent[v] not in members)
        p = tree.parent[top]
        parent_of[cid] = comp_of[p] if p is not None else None
    for cid, pc in parent_of.items():
        if pc is not None:
            dependent[pc] = True
    return DependencyTree(list(range(len(comps))), parent_of, group,
                          members_of, dependent)


# ---------------------------------------------------------------------------
# Big-Small classification

def low_degree_components(tree, alpha):
    """Maximal components over {v : deg(v) < alpha}, each tagged with whether
    it is a leaf of the induced Big-Small tree (no big vertex below it)."""
    if alpha < 2:
        raise InputError("alpha must be >= 2")
    small = {v for v in tree.vertices() if tree.deg(v) < alpha}
    comps = []
    seen = set()
    for v in tree.preorder():
        if v not in small or v in seen:
            continue
        p = tree.parent[v]
        if p is not None and p in small:
            continue
        comp, is_leaf = [], True
        stack = [v]
        while stack:
            u = stack.pop()
            comp.append(u)
            seen.add(u)
            for c in tree.children[u]:
                if c in small:
                    stack.append(c)
                else:
                    is_leaf = False
        comps.append((frozenset(comp), is_leaf))
    return comps


class BigSmallTree:
    """Minor with big vertices kept and each maximal low-degree component
    contracted to one node. Node ids: ('b', v) for big, ('s', i) for small."""

    __slots__ = ("alpha", "nodes", "parent_of", "kind", "members")

    def __init__(self, alpha, nodes, parent_of, kind, members):
        self.alpha = alpha
        self.nodes = nodes
        self.parent_of = parent_of
        self.kind = kind
        self.members = members

    def children_count(self, node):
        return sum(1 for x in self.nodes if self.parent_of[x] == node)

    def leaves(self):
        has_child = {x: False for x in self.nodes}
        for x in self.nodes:
            p = self.parent_of[x]
            if p is not None:
                has_child[p] = True
        return [x for x in self.nodes if not has_child[x]]


def build_big_small(tree, alpha):
    comps = low_degree_components(tree, alpha)
    node_of = {}
    members = {}
    nodes = []
    for i, (comp, _leaf) in enumerate(comps):
        nid = ("s", i)
        nodes.append(nid)
        members[nid] = comp
        for v in comp:
            node_of[v] = nid
    for v in tree.vertices():
        if tree.deg(v) >= alpha:
            nid = ("b", v)
            nodes.append(nid)
            members[nid] = frozenset([v])
            node_of[v] = nid
    parent_of, kind = {}, {}
    for nid in nodes:
        kind[nid] = "small" if nid[0] == "s" else "big"
        top = next(v for v in members[nid]
                   if tree.parent[v] is None or node_of[tree.parent[v]] != nid)
        p = tree.parent[top]
        parent_of[nid] = node_of[p] if p is not None else None
    return BigSmallTree(alpha, nodes, parent_of, kind, members)


def leaf_fraction(bst):
    return Fraction(len(bst.leaves()), len(bst.nodes))
