"""Expression evaluation straight from the raw string.

The string is made precedence-explicit by local parenthesis insertions, a
chunked matcher pairs every parenthesis, one simultaneous pass deletes the
redundant pairs, and a top-level operator scan turns the remainder into a
binary tree. Contraction then evaluates it with edges carrying Mobius maps
(a*x + b)/(c*x + d): removing a one-child operator composes its partial
application onto the edge. `**` with a non-literal exponent is not a Mobius
map, so such vertices ride along as residual payload until both operands
resolve; literal exponents never reach the contractor (see _pow_unfold).
"""

import math
from fractions import Fraction

from ..engine import Algebra, bounded_tree_contract, reconstruct
from ..errors import ExprArithmeticError, InputError, LogIntegrityError
from ..sim import Simulator
from ..trees import Tree

_CODE = {"+": 1, "-": 2, "*": 3, "/": 4, "**": 5}
_POW_CAP = 64


def tokenize(s):
    """Tokens (kind, value, position-in-s) with kind num | op | paren.
    Unicode multiplication/division/minus signs are accepted."""
    s = s.replace("−", "-").replace("×", "*").replace("÷", "/")
    toks = []
    i = 0
    while i < len(s):
        ch = s[i]
        if ch.isspace():
            i += 1
        elif ch.isdigit():
            j = i
            while j < len(s) and s[j].isdigit():
                j += 1
            toks.append(("num", int(s[i:j]), i))
            i = j
        elif s.startswith("**", i):
            toks.append(("op", "**", i))
            i += 2
        elif ch in "+-*/":
            toks.append(("op", ch, i))
            i += 1
        elif ch in "()":
            toks.append(("paren", ch, i))
            i += 1
        else:
            raise InputError("unexpected character %r at position %d" % (ch, i))
    return toks


# ---------------------------------------------------------------------------
# step 1: insertions. Additive operators get two parentheses on each side,
# multiplicative get one, `**` none, and source parentheses are tripled, so
# every parenthesis level holds operators of a single precedence class.

def _insert(toks):
    syn_open = ("(", None, -1)
    syn_close = (")", None, -1)
    cells = [syn_open, syn_open]
    for kind, val, pos in toks:
        if kind == "num":
            cells.append(("num", val, pos))
        elif kind == "paren" and val == "(":
            cells += [("(", None, pos), syn_open, syn_open]
        elif kind == "paren":
            cells += [syn_close, syn_close, (")", None, pos)]
        elif val in "+-":
            cells += [syn_close, syn_close, ("op", val, pos), syn_open, syn_open]
        elif val in "*/":
            cells += [syn_close, ("op", val, pos), syn_open]
        else:
            cells.append(("op", val, pos))
    cells += [syn_close, syn_close]
    return cells


def _render(cells):
    """Concatenated text plus a map from parenthesis character offsets back to
    cell indices (parentheses are the only cells the matcher cares about)."""
    parts = []
    cell_at = {}
    at = 0
    for i, (kind, val, _) in enumerate(cells):
        txt = kind if kind in "()" else (str(val) if kind == "num" else val)
        if kind in "()":
            cell_at[at] = i
        parts.append(txt)
        at += len(txt)
    return "".join(parts), cell_at


def inserted_form(s):
    """The precedence-explicit string the pipeline matches parentheses on."""
    return _render(_insert(tokenize(s)))[0]


# ---------------------------------------------------------------------------
# step 2: chunked matching. Chunks of ~n^eps cancel their complete pairs
# locally; what is left of a chunk is a run of ')' then a run of '(' and those
# residues merge in groups per level until one summary remains.

def _match_levels(s, epsilon):
    out = {}
    if not s:
        return out, 0
    alpha = max(2, math.ceil(len(s) ** epsilon))
    summaries = []
    for start in range(0, len(s), alpha):
        closes, opens = [], []
        for i in range(start, min(start + alpha, len(s))):
            if s[i] == "(":
                opens.append(i)
            elif s[i] == ")":
                if opens:
                    j = opens.pop()
                    out[i] = j
                    out[j] = i
                else:
                    closes.append(i)
        summaries.append((closes, opens))
    levels = 0
    while len(summaries) > 1:
        levels += 1
        merged = []
        for g in range(0, len(summaries), alpha):
            closes, opens = [], []
            for cs, os in summaries[g:g + alpha]:
                for i in cs:
                    if opens:
                        j = opens.pop()
                        out[i] = j
                        out[j] = i
                    else:
                        closes.append(i)
                opens.extend(os)
            merged.append((closes, opens))
        summaries = merged
    closes, opens = summaries[0]
    if closes:
        raise InputError("unbalanced ')' at position %d" % closes[0])
    if opens:
        raise InputError("unbalanced '(' at position %d" % opens[-1])
    return out, levels


def match_parens(s, cfg, sim=None):
    """Position involution over the parentheses of s; non-paren characters
    are opaque. Each merge level books one round on the ledger."""
    out, levels = _match_levels(s, cfg.epsilon)
    if sim is not None:
        sim.charge_subroutine("paren scan", 1)
        if levels:
            sim.charge_subroutine("paren merge", levels)
    return out


# ---------------------------------------------------------------------------
# step 3: simultaneous deletion of immediately-nested twin pairs, decided on
# the pre-deletion string.

def _prune(cells, cmatch):
    dead = set()
    for i in range(len(cells) - 1):
        if (cells[i][0] == "(" and cells[i + 1][0] == "("
                and cmatch[i] == cmatch[i + 1] + 1):
            dead.add(i)
            dead.add(cmatch[i])
    return dead


# ---------------------------------------------------------------------------
# step 4: operator tree. Within one level the surviving operators share a
# precedence class; the root is the last additive (or multiplicative) one,
# or the first `**` since that one associates to the right.

def _pos_near(cells, alive, a, b):
    for t in range(a, b):
        if cells[alive[t]][2] >= 0:
            return cells[alive[t]][2]
    for t in range(min(a, len(alive) - 1), -1, -1):
        if cells[alive[t]][2] >= 0:
            return cells[alive[t]][2]
    return 0


def _build(cells, cmatch, dead):
    alive = [i for i in range(len(cells)) if i not in dead]

    def node(a, b):
        while (a < b and cells[alive[a]][0] == "("
               and cmatch.get(alive[a]) == alive[b - 1]):
            a += 1
            b -= 1
        if a >= b:
            raise InputError("expected a number near position %d"
                             % _pos_near(cells, alive, a, b))
        depth = 0
        ops = []
        for t in range(a, b):
            kind = cells[alive[t]][0]
            if kind == "(":
                depth += 1
            elif kind == ")":
                depth -= 1
            elif kind == "op" and depth == 0:
                ops.append(t)
        if not ops:
            if b - a == 1 and cells[alive[a]][0] == "num":
                _, val, pos = cells[alive[a]]
                return ("num", Fraction(val), pos)
            raise InputError("expected a number near position %d"
                             % _pos_near(cells, alive, a, b))
        addsub = [t for t in ops if cells[alive[t]][1] in "+-"]
        muldiv = [t for t in ops if cells[alive[t]][1] in "*/"]
        pick = addsub[-1] if addsub else (muldiv[-1] if muldiv else ops[0])
        _, sym, pos = cells[alive[pick]]
        return (sym, pos, node(a, pick), node(pick + 1, b))

    return node(0, len(alive))


def _pow_unfold(shape):
    """x ** d with a literal d becomes a balanced product of d copies of x
    (d = 0 becomes x*0 + 1 so errors inside x still surface). Only `**` with
    a computed exponent stays a vertex."""
    if shape[0] == "num":
        return shape
    sym, pos, left, right = shape
    left = _pow_unfold(left)
    right = _pow_unfold(right)
    if sym != "**" or right[0] != "num":
        return (sym, pos, left, right)
    d = right[1]
    if d.denominator != 1 or d < 0 or d > _POW_CAP:
        raise ExprArithmeticError(
            "exponent near position %d must be an integer in 0..64" % pos)
    d = int(d)
    if d == 0:
        return ("+", pos, ("*", pos, left, ("num", Fraction(0), pos)),
                ("num", Fraction(1), pos))

    def bal(k):
        if k == 1:
            return left
        h = k // 2
        return ("*", pos, bal(k - h), bal(h))

    return bal(d)


def _to_tree(shape):
    parent = {}
    attrs = {}
    counter = [0]

    def emit(nd, p):
        counter[0] += 1
        v = counter[0]
        parent[v] = p
        if nd[0] == "num":
            attrs[v] = {"op": None, "num": nd[1], "pos": nd[2]}
        else:
            attrs[v] = {"op": nd[0], "pos": nd[1]}
            emit(nd[2], v)
            emit(nd[3], v)
        return v

    emit(shape, None)
    return Tree(1, parent, attrs=attrs)


def _simplify(s, cfg):
    toks = tokenize(s)
    if not toks:
        raise InputError("empty expression")
    cells = _insert(toks)
    text, cell_at = _render(cells)
    cm, levels = _match_levels(text, cfg.epsilon)
    cmatch = {cell_at[i]: cell_at[j] for i, j in cm.items()}
    dead = _prune(cells, cmatch)
    shape = _pow_unfold(_build(cells, cmatch, dead))
    return _to_tree(shape), levels


def _charge_pipeline(sim, levels):
    sim.charge_subroutine("insertions", 1)
    sim.charge_subroutine("paren scan", 1)
    if levels:
        sim.charge_subroutine("paren merge", levels)
    sim.charge_subroutine("paren deletions", 1)
    sim.charge_subroutine("operator scan", 1)


def simplify_expression(s, cfg, sim=None):
    """Binary operator tree for the expression. Vertex attrs: op (None on
    number leaves), num, and pos, the operator's offset in the source."""
    tree, levels = _simplify(s, cfg)
    if sim is not None:
        _charge_pipeline(sim, levels)
    return tree


# ---------------------------------------------------------------------------
# evaluation algebra

def _mob_mul(A, B):
    a, b, c, d = A
    e, f, g, h = B
    return (a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h)


def _mob_apply(M, x):
    a, b, c, d = M
    den = c * x + d
    if den == 0:
        raise ExprArithmeticError("division by zero in a contracted chain")
    return (a * x + b) / den


class EvalAlgebra(Algebra):
    """Data is (opcode, left operand, right operand, source position); an
    edge is (child position under its parent, Mobius map or None)."""

    name = "eval"
    C_w = 16

    def init_data(self, tree, v):
        a = tree.attrs[v]
        if a["op"] is None:
            return (0, a["num"], None, a["pos"])
        return (_CODE[a["op"]], None, None, a["pos"])

    def fresh_edge(self, tree, v):
        p = tree.parent[v]
        if p is None:
            return None
        return (tree.children[p].index(v), None)

    def node_value(self, data):
        code, x, y, pos = data
        if code == 0:
            return x
        if x is None or y is None:
            raise LogIntegrityError(
                "operator at position %d is missing an operand" % pos)
        if code == 1:
            return x + y
        if code == 2:
            return x - y
        if code == 3:
            return x * y
        if code == 4:
            if y == 0:
                raise ExprArithmeticError(
                    "division by zero near position %d" % pos)
            return x / y
        if y.denominator != 1 or y < 0 or y > _POW_CAP:
            raise ExprArithmeticError(
                "exponent near position %d must be an integer in 0..64" % pos)
        return x ** int(y)

    def through_edge(self, value, edge):
        at, M = edge
        return (at, value if M is None else _mob_apply(M, value))

    def absorb(self, data, contribution):
        code, x, y, pos = data
        at, val = contribution
        if code == 0:
            raise LogIntegrityError("number at position %d took an operand" % pos)
        if at == 0:
            if x is not None:
                raise LogIntegrityError("operand 0 arrived twice at position %d" % pos)
            return (code, val, y, pos)
        if y is not None:
            raise LogIntegrityError("operand 1 arrived twice at position %d" % pos)
        return (code, x, val, pos)

    def chain(self, hi_edge, data, lo_edge):
        code, x, y, pos = data
        if code in (0, 5):
            return NotImplemented
        pend = lo_edge[0] if lo_edge is not None else (0 if x is None else 1)
        other = y if pend == 0 else x
        if other is None:
            return NotImplemented
        if code == 1:
            M = (1, other, 0, 1)
        elif code == 2:
            M = (1, -other, 0, 1) if pend == 0 else (-1, other, 0, 1)
        elif code == 3:
            M = (other, 0, 0, 1)
        elif pend == 0:
            if other == 0:
                raise ExprArithmeticError(
                    "division by zero near position %d" % pos)
            M = (1, 0, 0, other)
        else:
            M = (0, other, 1, 0)
        at, HM = hi_edge
        if HM is not None:
            M = _mob_mul(HM, M)
        if lo_edge is not None and lo_edge[1] is not None:
            M = _mob_mul(M, lo_edge[1])
        return (at, M)

    def compose(self, hi_edge, lo_edge):
        at, HM = hi_edge
        LM = lo_edge[1]
        if HM is None:
            return (at, LM)
        if LM is None:
            return (at, HM)
        return (at, _mob_mul(HM, LM))

    def sibling_fold(self, contributions):
        raise LogIntegrityError("binary operator trees never batch siblings")


def subexpression_values(log):
    """Per-vertex exact values recovered from a finished contraction log."""
    return reconstruct(log, EvalAlgebra())


def evaluate_expression(s, cfg, sim=None):
    """Returns (exact Fraction value, operator tree, log, metrics)."""
    plugin = EvalAlgebra()
    if plugin.C_w != cfg.C_w:
        cfg = cfg.replaced(C_w=plugin.C_w)
    tree, levels = _simplify(s, cfg)
    if tree.n > cfg.n:
        cfg = cfg.replaced(n=tree.n)
    if sim is None:
        sim = Simulator(cfg)
    _charge_pipeline(sim, levels)
    value, log, _ = bounded_tree_contract(tree, plugin, cfg, sim=sim)
    return value, tree, log, sim.snapshot_metrics()
