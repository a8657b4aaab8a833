"""Tree contraction over the round simulator.

Payload representation shared by every problem plugin: a vertex's payload is
a small residual tree encoded as nested tuples. A known node is
("k", vertex_id, edge_up, data, kids); an unresolved child slot is
("s", child_id, acc) where acc is an edge accumulated from vertices removed
between the child and this node (None = nothing pending). edge_up is the
problem's edge object toward the current parent (None at the tree root, and
everywhere in unary algebras). Plain pending children are not represented:
only the payload's root node may have them, and the host ships their ids
alongside each component, so a payload stays O(C_w) words no matter how many
children a vertex has. Problem semantics live entirely in an Algebra
instance; the engine stitches residual trees, runs the local two-way
contraction, and keeps the books.
"""

import math

from .errors import InputError, LogIntegrityError, SimFault
from .sim import Machine, Simulator, _entry_words
from .trees import (
    decompose,
    group_components,
    low_degree_components,
    preorder_number,
    word_count,
)


class Algebra:
    """Problem plugin interface. data/edge/value objects must be built from
    ints, bools, strs, floats (only -inf), Fractions, None, and tuples, so
    word accounting and the log codec apply uniformly.

    Required: init_data, fresh_edge, node_value, through_edge, absorb,
    sibling_fold, finalize. Removing a one-child vertex needs either
    chain+compose (edge algebras) or merge_chain (unary lifts); returning
    NotImplemented from both leaves the vertex in the residual tree. absorb
    must not care in which order a vertex's children arrive.
    """

    name = "abstract"
    C_w = 16

    def init_data(self, tree, v):
        raise NotImplementedError

    def fresh_edge(self, tree, v):
        raise NotImplementedError

    def node_value(self, data):
        """Value of a vertex all of whose children have been absorbed."""
        raise NotImplementedError

    def through_edge(self, value, edge):
        """Contribution of a child subtree with the given value, seen through
        the child's upward edge."""
        raise NotImplementedError

    def absorb(self, data, contribution):
        raise NotImplementedError

    def chain(self, hi_edge, data, lo_edge):
        """Edge replacing a removed one-child vertex. lo_edge None = identity."""
        return NotImplemented

    def compose(self, hi_edge, lo_edge):
        """Edge concatenation with no vertex at the junction."""
        return NotImplemented

    def merge_chain(self, parent_data, mid_data):
        """Unary-lift alternative to chain: fold a one-child vertex's data
        into its known parent, reattaching the child below the parent. Only
        sound when every edge involved is the identity."""
        return NotImplemented

    def sibling_fold(self, contributions):
        """Fold fully contracted leaf siblings; returns (data, edge_up) for
        the one leaf that stands in for the batch."""
        raise NotImplementedError

    def finalize(self, data):
        return self.node_value(data)


def initial_payload(plugin, tree, v):
    return ("k", v, plugin.fresh_edge(tree, v), plugin.init_data(tree, v), ())


def payload_slots(rnode):
    if rnode[0] == "s":
        return 1
    return sum(payload_slots(kid) for kid in rnode[4])


def payload_slot_ids(rnode):
    out = set()
    stack = [rnode]
    while stack:
        nd = stack.pop()
        if nd[0] == "s":
            out.add(nd[1])
        else:
            stack.extend(nd[4])
    return out


def check_payload_budget(rnode, c_w, who):
    budget = c_w * (payload_slots(rnode) + 1)
    words = word_count(rnode)
    if words > budget:
        raise SimFault("%s: payload of %d words exceeds %d (non-conforming "
                       "contractor)" % (who, words, budget))


def _compose(plugin, hi, lo):
    if hi is None:
        return lo
    if lo is None:
        return hi
    out = plugin.compose(hi, lo)
    if out is NotImplemented:
        raise SimFault("algebra %s cannot compose edges" % plugin.name)
    return out


# ---------------------------------------------------------------------------
# machine-local residual trees

class _LN:
    """Mutable working form of a residual-tree node."""

    __slots__ = ("known", "vid", "edge", "data", "kids", "parent", "acc",
                 "outs")

    def __init__(self, known, vid, edge=None, data=None, acc=None):
        self.known = known
        self.vid = vid
        self.edge = edge
        self.data = data
        self.acc = acc
        self.kids = []
        self.parent = None
        self.outs = []


def _thaw(rnode):
    if rnode[0] == "s":
        return _LN(False, rnode[1], acc=rnode[2])
    node = _LN(True, rnode[1], edge=rnode[2], data=rnode[3])
    for kid in rnode[4]:
        child = _thaw(kid)
        child.parent = node
        node.kids.append(child)
    return node


def _freeze(node, is_root=True):
    if not node.known:
        return ("s", node.vid, node.acc)
    kids = [_freeze(kid, False) for kid in node.kids]
    if not is_root:
        # a surviving inner vertex must expose its remaining plain children,
        # or later stitches cannot find their place in the structure
        kids.extend(("s", u, None) for u in node.outs)
    return ("k", node.vid, node.edge, node.data, tuple(kids))


def _stitch(plugin, members, parents, outs, payloads):
    """Assemble one component: thaw all member payloads, hang each non-root
    member under its parent (through the parent's pending slot when one
    exists), and note still-live external children on each member root."""
    nodes = {m: _thaw(payloads[m]) for m in members}
    slot_at = {}
    for m in members:
        stack = [nodes[m]]
        while stack:
            nd = stack.pop()
            if nd.known:
                stack.extend(nd.kids)
            else:
                slot_at[nd.vid] = nd
    for m, pm in zip(members, parents):
        if pm is None:
            continue
        sub = nodes[m]
        slot = slot_at.pop(m, None)
        if slot is not None:
            sub.edge = _compose(plugin, slot.acc, sub.edge)
            holder = slot.parent
            holder.kids[holder.kids.index(slot)] = sub
            sub.parent = holder
        else:
            root = nodes[pm]
            sub.parent = root
            root.kids.append(sub)
    for m, os in zip(members, outs):
        nodes[m].outs = list(os)
    return nodes[members[0]]


def _local_contract(plugin, root):
    """Trim known leaves and remove one-child known vertices until no rule
    applies. The component root always survives."""
    changed = True
    while changed:
        changed = False
        order = []
        stack = [root]
        while stack:
            node = stack.pop()
            order.append(node)
            stack.extend(node.kids)
        for node in reversed(order):  # children before parents
            if not node.known or node.parent is None:
                continue
            parent = node.parent
            holes = len(node.kids) + len(node.outs)
            if holes == 0:
                value = plugin.node_value(node.data)
                parent.data = plugin.absorb(
                    parent.data, plugin.through_edge(value, node.edge))
                parent.kids.remove(node)
                changed = True
                continue
            if holes != 1:
                continue
            if node.kids:
                kid = node.kids[0]
                lo = kid.edge if kid.known else kid.acc
                edge = plugin.chain(node.edge, node.data, lo)
                if edge is not NotImplemented:
                    if kid.known:
                        kid.edge = edge
                    else:
                        kid.acc = edge
                    kid.parent = parent
                    parent.kids[parent.kids.index(node)] = kid
                    changed = True
                    continue
                clean = node.edge is None and (kid.known or kid.acc is None)
            else:
                kid = None
                edge = plugin.chain(node.edge, node.data, None)
                if edge is not NotImplemented:
                    slot = _LN(False, node.outs[0], acc=edge)
                    slot.parent = parent
                    parent.kids[parent.kids.index(node)] = slot
                    changed = True
                    continue
                clean = node.edge is None
            if not clean:
                continue
            merged = plugin.merge_chain(parent.data, node.data)
            if merged is NotImplemented:
                continue
            parent.data = merged
            if kid is None:
                kid = _LN(False, node.outs[0])
            kid.parent = parent
            parent.kids[parent.kids.index(node)] = kid
            changed = True
    return root


def contract_component(plugin, members, parents, outs, payloads):
    """Pure form of one connected contraction; returns the survivor payload."""
    root = _stitch(plugin, members, parents, outs, payloads)
    _local_contract(plugin, root)
    return _freeze(root)


def rnode_value(plugin, rnode, slot_fn, extra=()):
    """Subtree value of a residual tree. slot_fn(child_id, acc) supplies the
    contribution of a slot child; extra lists contributions of the root
    node's plain pending children."""
    if rnode[0] == "s":
        raise LogIntegrityError("value of a bare slot %r" % (rnode[1],))
    data = rnode[3]
    for kid in rnode[4]:
        if kid[0] == "s":
            data = plugin.absorb(data, slot_fn(kid[1], kid[2]))
        else:
            data = plugin.absorb(data, plugin.through_edge(
                rnode_value(plugin, kid, slot_fn), kid[2]))
    for contribution in extra:
        data = plugin.absorb(data, contribution)
    return plugin.node_value(data)


# ---------------------------------------------------------------------------
# contraction log

class Record:
    """One contraction. members is survivor-first in component preorder;
    payloads are the members' payloads exactly as the machine read them;
    parents give each member's attachment within the component; outs list
    each member's still-live children outside it (for the component root
    only when root_outs_known); virtual flags members that stood in for a
    folded sibling batch rather than one original vertex."""

    __slots__ = ("label", "kind", "survivor", "members", "payloads",
                 "virtual", "parent_out", "parents", "outs",
                 "root_outs_known")

    def __init__(self, label, kind, survivor, members, payloads, virtual,
                 parent_out, parents=(), outs=(), root_outs_known=True):
        self.label = label
        self.kind = kind
        self.survivor = survivor
        self.members = tuple(members)
        self.payloads = dict(payloads)
        self.virtual = frozenset(virtual)
        self.parent_out = parent_out
        self.parents = tuple(parents)
        self.outs = tuple(tuple(o) for o in outs)
        self.root_outs_known = bool(root_outs_known)

    def to_obj(self):
        return (self.label, self.kind, self.survivor, self.members,
                tuple(self.payloads[m] for m in self.members),
                tuple(sorted(self.virtual)), self.parent_out, self.parents,
                self.outs, self.root_outs_known)

    @classmethod
    def from_obj(cls, obj):
        (label, kind, survivor, members, payloads, virtual, parent_out,
         parents, outs, root_outs_known) = obj
        return cls(label, kind, survivor, members,
                   dict(zip(members, payloads)), virtual, parent_out,
                   parents, outs, root_outs_known)


LOG_MAGIC = b"TCLOG1\n"


def _enc_uint(n, out):
    while True:
        b = n & 0x7F
        n >>= 7
        if n:
            out.append(b | 0x80)
        else:
            out.append(b)
            return


def _enc_obj(obj, out):
    from fractions import Fraction
    if obj is None:
        out.append(0)
    elif obj is True:
        out.append(1)
    elif obj is False:
        out.append(2)
    elif isinstance(obj, int):
        out.append(3)
        _enc_uint(obj << 1 if obj >= 0 else ((-obj) << 1) | 1, out)
    elif isinstance(obj, float):
        if obj != float("-inf"):
            raise InputError("only -inf floats are encodable")
        out.append(4)
    elif isinstance(obj, Fraction):
        out.append(5)
        n = obj.numerator
        _enc_uint(n << 1 if n >= 0 else ((-n) << 1) | 1, out)
        _enc_uint(obj.denominator, out)
    elif isinstance(obj, str):
        raw = obj.encode("utf-8")
        out.append(6)
        _enc_uint(len(raw), out)
        out.extend(raw)
    elif isinstance(obj, tuple):
        out.append(7)
        _enc_uint(len(obj), out)
        for item in obj:
            _enc_obj(item, out)
    else:
        raise InputError("unencodable object %r" % (obj,))


def _dec_uint(buf, pos):
    n = shift = 0
    while True:
        b = buf[pos]
        pos += 1
        n |= (b & 0x7F) << shift
        if not b & 0x80:
            return n, pos
        shift += 7


def _dec_obj(buf, pos):
    from fractions import Fraction
    tag = buf[pos]
    pos += 1
    if tag == 0:
        return None, pos
    if tag == 1:
        return True, pos
    if tag == 2:
        return False, pos
    if tag == 3:
        z, pos = _dec_uint(buf, pos)
        return (-(z >> 1) if z & 1 else z >> 1), pos
    if tag == 4:
        return float("-inf"), pos
    if tag == 5:
        z, pos = _dec_uint(buf, pos)
        d, pos = _dec_uint(buf, pos)
        return Fraction(-(z >> 1) if z & 1 else z >> 1, d), pos
    if tag == 6:
        k, pos = _dec_uint(buf, pos)
        return buf[pos:pos + k].decode("utf-8"), pos + k
    if tag == 7:
        k, pos = _dec_uint(buf, pos)
        items = []
        for _ in range(k):
            item, pos = _dec_obj(buf, pos)
            items.append(item)
        return tuple(items), pos
    raise InputError("bad tag %d at offset %d" % (tag, pos - 1))


class ContractionLog:
    """Append-only record list plus what reconstruction needs up front: the
    root, its final payload, and the original vertex set."""

    def __init__(self, root=None, vertices=()):
        self.root = root
        self.vertices = tuple(sorted(vertices))
        self.final_payload = None
        self.records = []
        self.total_words = 0

    def append(self, rec):
        self.records.append(rec)
        self.total_words += word_count(rec.to_obj())

    def __len__(self):
        return len(self.records)

    def save(self, path):
        out = bytearray(LOG_MAGIC)
        header = (self.root, self.vertices, self.final_payload,
                  len(self.records))
        _enc_obj(header, out)
        for rec in self.records:
            _enc_obj(rec.to_obj(), out)
        with open(path, "wb") as fh:
            fh.write(bytes(out))

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            buf = fh.read()
        if not buf.startswith(LOG_MAGIC):
            raise InputError("not a contraction log: bad header")
        pos = len(LOG_MAGIC)
        header, pos = _dec_obj(buf, pos)
        root, vertices, final_payload, count = header
        log = cls(root, vertices)
        log.final_payload = final_payload
        for _ in range(count):
            obj, pos = _dec_obj(buf, pos)
            log.append(Record.from_obj(obj))
        if pos != len(buf):
            raise InputError("trailing bytes in log file")
        return log


# ---------------------------------------------------------------------------
# machine builders

def _comp_spec(tree, members, virtual, root_outs_known=True):
    mset = set(members)
    parents, outs = [], []
    for i, m in enumerate(members):
        p = tree.parent[m]
        parents.append(p if p in mset else None)
        if i == 0 and not root_outs_known:
            outs.append(())
            continue
        slots = payload_slot_ids(tree.payload[m])
        outs.append(tuple(u for u in tree.children[m]
                          if u not in mset and u not in slots))
    return (tuple(members), tuple(parents), tuple(outs),
            tuple(m for m in members if m in virtual), root_outs_known)


def _spec_words(spec):
    members, _parents, outs, _virt, _known = spec
    return sum(4 + len(o) for o in outs)


def _estimate(tree, spec):
    return _spec_words(spec) + sum(word_count(tree.payload[m])
                                   for m in spec[0])


def _cc_machine(plugin, stage, comp_specs):
    input_words = sum(_spec_words(spec) for spec in comp_specs)

    def run(ctx):
        out = []
        for members, parents, outs, virt, root_outs_known in comp_specs:
            payloads = {m: ctx.read(("P", m)) for m in members}
            new_payload = contract_component(plugin, members, parents, outs,
                                             payloads)
            check_payload_budget(new_payload, plugin.C_w,
                                 "%s survivor %r" % (stage, members[0]))
            rec = Record(stage, "connected", members[0], members, payloads,
                         virt, None, parents, outs, root_outs_known)
            obj = rec.to_obj()
            ctx.write(("P", members[0]), new_payload)
            ctx.write(("LOG", stage, members[0]), obj)
            out.append((new_payload, obj))
        return out

    return Machine(input_words, run, stage)


def _sc_machine(plugin, stage, batch_specs):
    input_words = sum(len(leaves) + 3 for _p, leaves, _v in batch_specs)

    def run(ctx):
        out = []
        for parent, leaves, virt in batch_specs:
            payloads = {}
            contributions = []
            for leaf in leaves:
                node = ctx.read(("P", leaf))
                if node[4]:
                    raise SimFault("%s: sibling %r is not fully contracted"
                                   % (stage, leaf))
                payloads[leaf] = node
                contributions.append(plugin.through_edge(
                    plugin.node_value(node[3]), node[2]))
            data, edge = plugin.sibling_fold(contributions)
            new_payload = ("k", leaves[0], edge, data, ())
            check_payload_budget(new_payload, plugin.C_w,
                                 "%s survivor %r" % (stage, leaves[0]))
            rec = Record(stage, "sibling", leaves[0], leaves, payloads, virt,
                         parent)
            obj = rec.to_obj()
            ctx.write(("P", leaves[0]), new_payload)
            ctx.write(("LOG", stage, leaves[0]), obj)
            out.append((new_payload, obj))
        return out

    return Machine(input_words, run, stage)


def _pack(items, sizes, cap):
    """First-fit decreasing bin packing; returns lists of items."""
    order = sorted(range(len(items)), key=lambda i: -sizes[i])
    bins, loads = [], []
    for i in order:
        for b in range(len(bins)):
            if loads[b] + sizes[i] <= cap:
                bins[b].append(items[i])
                loads[b] += sizes[i]
                break
        else:
            bins.append([items[i]])
            loads.append(sizes[i])
    return bins


def _apply_results(tree, log, virtual, results):
    for machine_out in results:
        for new_payload, obj in machine_out:
            rec = Record.from_obj(obj)
            if rec.kind == "connected":
                tree.contract(set(rec.members), rec.survivor)
            else:
                for leaf in rec.members[1:]:
                    tree.remove_leaf(leaf)
                virtual.add(rec.survivor)
            tree.payload[rec.survivor] = new_payload
            log.append(rec)


# ---------------------------------------------------------------------------
# algorithm unit generators

def degree_budget(cfg):
    """Largest per-group degree sum (and per-vertex degree) the bounded
    algorithm accepts: a group's payload traffic must fit one machine."""
    return max(2, cfg.S // (2 * cfg.C_w))


def sibling_batch(cfg):
    return max(2, math.ceil(cfg.n ** cfg.epsilon))


def _ordered_comp(members, rank):
    return tuple(sorted(members, key=rank.__getitem__))


def _bounded_units(tree, plugin, cfg, rank, log, virtual, prefix=""):
    """Unit stream of the bounded-degree contraction. Yields
    ("charge", label, rounds), ("round", machines) whose send-value is the
    per-machine results, or ("fault", message). Every phase emits the same
    unit shapes, so parallel streams can be merged step by step."""
    lam = degree_budget(cfg)
    for v in tree.vertices():
        if tree.deg(v) > lam:
            raise InputError(
                "vertex %r has degree %d over the budget %d; use the general "
                "contraction or an expansion first" % (v, tree.deg(v), lam))
    phase = 0
    while tree.n > 1:
        phase += 1
        if phase > cfg.phase_cap:
            yield ("fault", "%sphase %d exceeds the cap of %d"
                   % (prefix, phase, cfg.phase_cap))
        label = "%sphase %d" % (prefix, phase)
        if phase == 1:
            yield ("charge", "preorder", cfg.inv_eps)
        else:
            yield ("charge", "relabel", 1)
        dec = decompose(tree, lam, rank)
        k = dec.k
        per_group = {}
        for gi, comp in group_components(tree, dec):
            if len(comp) > 1:
                spec = _comp_spec(tree, _ordered_comp(comp, rank), virtual)
                per_group.setdefault(gi, []).append(spec)
        machines = [_cc_machine(plugin, label + " compress", specs)
                    for _gi, specs in sorted(per_group.items())]
        results = yield ("round", machines)
        _apply_results(tree, log, virtual, results)
        specs, sizes = [], []
        for p in sorted(tree.vertices(), key=rank.__getitem__):
            leaf_kids = [u for u in tree.children[p] if tree.is_leaf(u)]
            if leaf_kids:
                spec = _comp_spec(tree, (p,) + tuple(leaf_kids), virtual)
                specs.append(spec)
                sizes.append(_estimate(tree, spec))
        machines = [_cc_machine(plugin, label + " rake", bundle)
                    for bundle in _pack(specs, sizes, cfg.S)]
        results = yield ("round", machines)
        _apply_results(tree, log, virtual, results)
        if tree.n > max(1, k):
            raise LogIntegrityError(
                "%s left %d vertices, over the group count %d"
                % (label, tree.n, k))


def _general_units(tree, plugin, cfg, rank, log, virtual):
    lam = degree_budget(cfg)
    alpha = sibling_batch(cfg)
    phase = 0
    while tree.n > 1:
        spec = _comp_spec(tree, _ordered_comp(tree.vertices(), rank), virtual)
        if _estimate(tree, spec) <= cfg.S:
            results = yield ("round", [_cc_machine(plugin, "final", [spec])])
            _apply_results(tree, log, virtual, results)
            break
        phase += 1
        if phase > cfg.phase_cap:
            yield ("fault", "phase %d exceeds the cap of %d"
                   % (phase, cfg.phase_cap))
        label = "phase %d" % phase
        n_before = tree.n
        yield ("charge", "connectivity", cfg.inv_eps)
        direct, direct_sizes, nested = [], [], []
        for comp, is_fringe in low_degree_components(tree, lam + 1):
            if not is_fringe or len(comp) < 2:
                continue
            members = _ordered_comp(comp, rank)
            spec = _comp_spec(tree, members, virtual)
            size = _estimate(tree, spec)
            if size <= cfg.S:
                direct.append(spec)
                direct_sizes.append(size)
            else:
                nested.append(members)
        machines = [_cc_machine(plugin, label + " compress", bundle)
                    for bundle in _pack(direct, direct_sizes, cfg.S)]
        results = yield ("round", machines)
        _apply_results(tree, log, virtual, results)
        if nested:
            slices, subs = [], []
            for members in nested:
                sub = tree.slice(set(members), members[0])
                slices.append((members, sub))
                subs.append(_bounded_units(sub, plugin, cfg, rank, log,
                                           virtual, prefix=label + " "))
            yield ("lockstep", subs)
            for members, sub in slices:
                if sub.n != 1:
                    raise LogIntegrityError(
                        "nested run left %d vertices" % sub.n)
                tree.contract(set(members), members[0])
                tree.payload[members[0]] = sub.payload[members[0]]
        level = 0
        while True:
            batches = []
            for p in sorted(tree.vertices(), key=rank.__getitem__):
                slots = payload_slot_ids(tree.payload[p])
                leaf_kids = [u for u in tree.children[p]
                             if tree.is_leaf(u) and u not in slots]
                for i in range(0, len(leaf_kids), alpha):
                    chunk = leaf_kids[i:i + alpha]
                    if len(chunk) > 1:
                        batches.append(
                            (p, tuple(chunk),
                             tuple(u for u in chunk if u in virtual)))
            if not batches:
                break
            level += 1
            if level > cfg.inv_eps:
                yield ("fault", "%s sibling level %d exceeds %d"
                       % (label, level, cfg.inv_eps))
            sizes = [sum(word_count(tree.payload[u]) + 2 for u in chunk)
                     for _p, chunk, _v in batches]
            machines = [_sc_machine(plugin, "%s rake L%d" % (label, level),
                                    bundle)
                        for bundle in _pack(batches, sizes, cfg.S)]
            results = yield ("round", machines)
            _apply_results(tree, log, virtual, results)
        specs, sizes = [], []
        for p in sorted(tree.vertices(), key=rank.__getitem__):
            leaf_kids = [u for u in tree.children[p] if tree.is_leaf(u)]
            if leaf_kids:
                spec = _comp_spec(tree, (p,) + tuple(leaf_kids), virtual,
                                  root_outs_known=False)
                specs.append(spec)
                sizes.append(_estimate(tree, spec))
        machines = [_cc_machine(plugin, label + " fold", bundle)
                    for bundle in _pack(specs, sizes, cfg.S)]
        results = yield ("round", machines)
        _apply_results(tree, log, virtual, results)
        if tree.n >= n_before:
            raise LogIntegrityError("%s made no progress (%d vertices)"
                                    % (label, tree.n))


# ---------------------------------------------------------------------------
# drivers

def _exec_unit(sim, unit):
    kind = unit[0]
    if kind == "charge":
        sim.charge_subroutine(unit[1], unit[2])
        return None
    if kind == "round":
        machines = unit[1]
        return sim.run_round(machines) if machines else []
    if kind == "fault":
        sim.fault(unit[1])
        return None
    if kind == "lockstep":
        _lockstep(sim, unit[1])
        return None
    raise InputError("unknown unit %r" % (kind,))


def _drive(sim, gen):
    send = None
    while True:
        try:
            unit = gen.send(send)
        except StopIteration:
            return
        send = _exec_unit(sim, unit)


def _lockstep(sim, gens):
    """Run unit streams side by side, one merged unit per step. The streams
    emit identical unit shapes within a phase, so merged steps stay aligned;
    a stream that finishes early just drops out."""
    active = dict(enumerate(gens))
    send = {i: None for i in active}
    while active:
        units = {}
        for i in sorted(active):
            try:
                units[i] = active[i].send(send.get(i))
            except StopIteration:
                del active[i]
        if not units:
            break
        kinds = {u[0] for u in units.values()}
        if len(kinds) != 1:
            raise LogIntegrityError("parallel runs diverged: %r" % (kinds,))
        kind = kinds.pop()
        send = {}
        if kind == "charge":
            charges = {(u[1], u[2]) for u in units.values()}
            if len(charges) != 1:
                raise LogIntegrityError("parallel charges diverged: %r"
                                        % (charges,))
            name, rounds = charges.pop()
            sim.charge_subroutine(name, rounds)
            send = {i: None for i in units}
        elif kind == "round":
            order = sorted(units)
            merged = []
            for i in order:
                merged.extend(units[i][1])
            results = sim.run_round(merged) if merged else []
            pos = 0
            for i in order:
                take = len(units[i][1])
                send[i] = results[pos:pos + take]
                pos += take
        elif kind == "fault":
            for i in sorted(units):
                sim.fault(units[i][1])
                send[i] = None
        else:
            raise LogIntegrityError("unit %r inside a parallel step"
                                    % (kind,))


# ---------------------------------------------------------------------------
# public entry points

def _fresh_run(tree, plugin, cfg, sim):
    if plugin.C_w != cfg.C_w:
        cfg = cfg.replaced(C_w=plugin.C_w)
    work = tree.copy()
    for v in work.vertices():
        work.payload[v] = initial_payload(plugin, work, v)
        check_payload_budget(work.payload[v], plugin.C_w, "vertex %r" % (v,))
    if sim is None:
        sim = Simulator(cfg, initial={("P", v): work.payload[v]
                                      for v in work.vertices()})
    else:
        table = dict(sim.generation)
        words = sim._gen_words
        for v in work.vertices():
            key = ("P", v)
            if key in table:
                words -= _entry_words(key, table[key])
            table[key] = work.payload[v]
            words += _entry_words(key, work.payload[v])
        sim.generation = table
        sim._gen_words = words
        sim.total_words = max(sim.total_words, words)
    log = ContractionLog(work.root, work.vertices())
    return work, cfg, sim, log


def _finish(work, plugin, sim, log):
    payload = work.payload[work.root]
    if payload[4]:
        raise LogIntegrityError("root payload still has pending children")
    log.final_payload = payload
    budget = sim.cfg.total_budget_factor * sim.cfg.n
    if log.total_words > budget:
        sim.fault("contraction log of %d words exceeds %d"
                  % (log.total_words, budget))
    return plugin.finalize(payload[3]), log, sim.snapshot_metrics()


def bounded_tree_contract(tree, plugin, cfg, sim=None):
    """Contract a tree whose degrees fit the decomposition budget; the answer
    is read at the root. Returns (answer, ContractionLog, metrics)."""
    work, cfg, sim, log = _fresh_run(tree, plugin, cfg, sim)
    if work.n > 1:
        rank = preorder_number(work)
        virtual = set()
        gen = _bounded_units(work, plugin, cfg, rank, log, virtual)
        with sim.phase("contract"):
            _drive(sim, gen)
    return _finish(work, plugin, sim, log)


def tree_contract(tree, plugin, cfg, sim=None):
    """General contraction: per phase, contract the low-degree fringe of the
    degree-split structure (components too big for one machine run the
    bounded algorithm on a slice, side by side with their peers), then fold
    leaf siblings in batches and absorb the last leaf of every star."""
    work, cfg, sim, log = _fresh_run(tree, plugin, cfg, sim)
    if work.n > 1:
        rank = preorder_number(work)
        virtual = set()
        gen = _general_units(work, plugin, cfg, rank, log, virtual)
        with sim.phase("contract"):
            _drive(sim, gen)
    return _finish(work, plugin, sim, log)


# ---------------------------------------------------------------------------
# unary lifting and the sequential reference

class LiftedAlgebra(Algebra):
    """General contractor built from a unary pair: c1 folds one child's value
    into its parent, r1 folds two sibling values. The pair must satisfy the
    compatibility law c1(c1(a, x), y) == c1(a, r1(x, y)), which also makes
    the engine's absorption order immaterial."""

    C_w = 8

    def __init__(self, c1, r1, init=None, name="lifted"):
        self.c1 = c1
        self.r1 = r1
        self.init = init
        self.name = name

    def init_data(self, tree, v):
        if self.init is not None:
            return self.init(tree, v)
        return tree.attrs[v]["val"]

    def fresh_edge(self, tree, v):
        return None

    def node_value(self, data):
        return data

    def through_edge(self, value, edge):
        if edge is not None:
            raise LogIntegrityError("unary lift saw an edge object")
        return value

    def absorb(self, data, contribution):
        return self.c1(data, contribution)

    def merge_chain(self, parent_data, mid_data):
        return self.c1(parent_data, mid_data)

    def sibling_fold(self, contributions):
        folded = contributions[0]
        for value in contributions[1:]:
            folded = self.r1(folded, value)
        return folded, None

    def finalize(self, data):
        return data


def lift_unary(c1, r1, init=None, name="lifted"):
    return LiftedAlgebra(c1, r1, init, name)


def two_contraction_reference(tree, c1, r1, init=None):
    """Sequential rake/compress contraction used as a semantic oracle for
    unary contractor pairs. Phase count is asserted logarithmic."""
    work = tree.copy()
    vals = {v: (init(work, v) if init else work.attrs[v]["val"])
            for v in work.vertices()}
    cap = 2 * math.ceil(math.log2(work.n + 1)) + 1
    phases = 0
    while work.n > 1:
        phases += 1
        if phases > cap:
            raise LogIntegrityError("reference contraction exceeded %d phases"
                                    % cap)
        leaves = [v for v in work.vertices()
                  if work.is_leaf(v) and v != work.root]
        by_parent = {}
        for v in leaves:
            by_parent.setdefault(work.parent[v], []).append(v)
        for p, kids in by_parent.items():
            folded = vals[kids[0]]
            for u in kids[1:]:
                folded = r1(folded, vals[u])
            vals[p] = c1(vals[p], folded)
            for u in kids:
                work.remove_leaf(u)
                del vals[u]
        if work.n == 1:
            break
        depth = {}
        for v in work.preorder():
            p = work.parent[v]
            depth[v] = 0 if p is None else depth[p] + 1
        for comp, _is_fringe in low_degree_components(work, 2):
            if len(comp) == 1:
                continue
            members = sorted(comp, key=depth.__getitem__)
            top = members[0]
            for v in members[1:]:
                vals[top] = c1(vals[top], vals[v])
                del vals[v]
            work.contract(comp, top)
    return vals[work.root]


# ---------------------------------------------------------------------------
# reconstruction

def reconstruct(log, plugin):
    """Per-vertex subtree values, by undoing the log newest-first.

    Maintains, per vertex id, the value and upward edge current for the
    moment the replay has reached; each record rewrites its members' entries
    from the stored snapshots, so earlier records always see the state their
    machines saw. Fold survivors carry the batch aggregate until their own
    fold record restores the single-vertex value."""
    if log.final_payload is None:
        raise LogIntegrityError("log has no final payload")
    values = {log.root: plugin.node_value(log.final_payload[3])}
    edges = {}
    out = {log.root: values[log.root]}

    def value_of(u, local):
        if u in local:
            return local[u]
        if u not in values:
            raise LogIntegrityError("missing value for vertex %r" % (u,))
        return values[u]

    def edge_of(u):
        if u not in edges:
            raise LogIntegrityError("missing edge for vertex %r" % (u,))
        return edges[u]

    def resolve(m, value):
        if m in out:
            raise LogIntegrityError("vertex %r resolved twice" % (m,))
        out[m] = value

    for rec in reversed(log.records):
        if rec.kind == "sibling":
            for m in rec.members:
                snap = rec.payloads[m]
                if snap[4]:
                    raise LogIntegrityError(
                        "folded sibling %r had pending children" % (m,))
                values[m] = plugin.node_value(snap[3])
                edges[m] = snap[2]
                if m not in rec.virtual:
                    resolve(m, values[m])
            continue
        snap_slots = {m: payload_slot_ids(rec.payloads[m])
                      for m in rec.members}
        kids_of = {m: [] for m in rec.members}
        for u, pu in zip(rec.members, rec.parents):
            if pu is not None and u not in snap_slots[pu]:
                kids_of[pu].append(u)
        local = {}

        def slot_fn(u, acc):
            edge = rec.payloads[u][2] if u in rec.payloads else edge_of(u)
            return plugin.through_edge(value_of(u, local),
                                       _compose(plugin, acc, edge))

        for i, m in reversed(list(enumerate(rec.members))):
            if m == rec.survivor and not rec.root_outs_known:
                continue
            extra = [plugin.through_edge(local[u], rec.payloads[u][2])
                     for u in kids_of[m]]
            extra.extend(plugin.through_edge(value_of(u, local), edge_of(u))
                         for u in rec.outs[i])
            local[m] = rnode_value(plugin, rec.payloads[m], slot_fn, extra)
        if rec.root_outs_known:
            if values.get(rec.survivor) != local[rec.survivor]:
                raise LogIntegrityError(
                    "undo mismatch at %r: stored %r, derived %r"
                    % (rec.survivor, values.get(rec.survivor),
                       local[rec.survivor]))
        for m in rec.members:
            edges[m] = rec.payloads[m][2]
            if m == rec.survivor:
                continue
            values[m] = local[m]
            if m not in rec.virtual:
                resolve(m, local[m])
    missing = set(log.vertices) - set(out)
    if missing:
        raise LogIntegrityError("unresolved vertices: %r"
                                % (sorted(missing)[:5],))
    phantom = set(out) - set(log.vertices)
    if phantom:
        raise LogIntegrityError("phantom vertices resolved: %r"
                                % (sorted(phantom)[:5],))
    return out
