"""Randomized rooted-tree isomorphism, plus the height contractor it needs.

Each vertex gets the polynomial Q_v = prod over children u of (x_{h_v} - Q_u),
with Q = 1 at leaves and one indeterminate per height level. Two isomorphic
trees share Q for every assignment; non-isomorphic trees of equal size and
height disagree with high probability once the x_i are drawn at random mod m.
Both evaluations run through the contraction engine: an edge is an affine map
t -> (a*t + b) mod m, so removing chain vertices stays one multiplication.
"""

import random

from ..engine import Algebra, reconstruct, tree_contract
from ..errors import InputError
from ..sim import Simulator

NEG_INF = float("-inf")


class HeightAlgebra(Algebra):
    """Subtree heights, leaves at 0. An edge (k, m) lifts a pending child
    height t to max(t + k, m): k edges climbed, m the best already-resolved
    height hanging off the removed stretch."""

    name = "height"
    C_w = 16

    def init_data(self, tree, v):
        return 0

    def fresh_edge(self, tree, v):
        if tree.parent[v] is None:
            return None
        return (1, NEG_INF)

    def node_value(self, data):
        return data

    def through_edge(self, value, edge):
        k, m = edge
        return max(value + k, m)

    def absorb(self, data, contribution):
        return max(data, contribution)

    def chain(self, hi_edge, data, lo_edge):
        k1, m1 = hi_edge
        k2, m2 = lo_edge if lo_edge is not None else (0, NEG_INF)
        return (k1 + k2, max(max(m2, data) + k1, m1))

    def compose(self, hi_edge, lo_edge):
        k1, m1 = hi_edge
        k2, m2 = lo_edge
        return (k1 + k2, max(m2 + k1, m1))

    def sibling_fold(self, contributions):
        return (max(contributions), (0, NEG_INF))


def height_run(tree, cfg, sim=None):
    """Root height plus the log (reconstructable to per-vertex heights)."""
    plugin = HeightAlgebra()
    if plugin.C_w != cfg.C_w:
        cfg = cfg.replaced(C_w=plugin.C_w)
    if sim is None:
        sim = Simulator(cfg)
    value, log, _ = tree_contract(tree, plugin, cfg, sim=sim)
    return value, log, sim.snapshot_metrics()


def subtree_heights(log):
    return reconstruct(log, HeightAlgebra())


class IsoAlgebra(Algebra):
    """Data is the running product of (x - Q_child) factors mod m; an edge
    (a, b) maps a pending child's polynomial value t to (a*t + b) mod m. The
    fresh edge of v is t -> x_{h(parent)} - t, with the drawn x stamped on v
    as the `xh` attribute."""

    name = "iso"
    C_w = 16

    def __init__(self, m):
        self.m = m

    def init_data(self, tree, v):
        return 1

    def fresh_edge(self, tree, v):
        if tree.parent[v] is None:
            return None
        return (self.m - 1, tree.attrs[v]["xh"] % self.m)

    def node_value(self, data):
        return data % self.m

    def through_edge(self, value, edge):
        a, b = edge
        return (a * value + b) % self.m

    def absorb(self, data, contribution):
        return (data * contribution) % self.m

    def chain(self, hi_edge, data, lo_edge):
        a1, b1 = hi_edge
        a2, b2 = lo_edge if lo_edge is not None else (1, 0)
        return ((a1 * data * a2) % self.m, (a1 * data * b2 + b1) % self.m)

    def compose(self, hi_edge, lo_edge):
        a1, b1 = hi_edge
        a2, b2 = lo_edge
        return ((a1 * a2) % self.m, (a1 * b2 + b1) % self.m)

    def sibling_fold(self, contributions):
        p = 1
        for c in contributions:
            p = (p * c) % self.m
        return (p, (1, 0))


_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def is_prime(n):
    # exact far beyond any modulus range this module draws from
    if n < 2:
        return False
    for p in _MR_BASES:
        if n % p == 0:
            return n == p
    d = n - 1
    r = 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def make_prime_table(n, height, alpha=1, count=32, seed=0):
    """Primes in [h*n^(alpha+1), 2*h*n^(alpha+1)]. Small ranges are scanned
    outright; large ones are probed at random positions."""
    base = max(1, height) * n ** (alpha + 1)
    lo, hi = base, 2 * base
    if hi <= 1 << 16:
        return [p for p in range(max(2, lo), hi + 1) if is_prime(p)]
    rng = random.Random(seed)
    out = set()
    for _ in range(400 * count):
        c = rng.randint(lo, hi) | 1
        if is_prime(c):
            out.add(c)
            if len(out) >= count:
                break
    return sorted(out)


def _stamped(tree, heights, xs, m):
    out = tree.copy()
    for v in out.vertices():
        p = out.parent[v]
        if p is not None:
            out.attrs[v]["xh"] = xs[heights[p] - 1] % m
    return out


def tree_isomorphism(t1, t2, cfg, alpha=1, seed=0, prime_table=None, sim=None):
    """Verdict plus a JSON-safe detail dict. One-sided: isomorphic inputs are
    never rejected; a non-isomorphic pair can slip through with probability
    shrinking in n^alpha, so callers repeat with fresh seeds."""
    detail = {"n_left": t1.n, "n_right": t2.n, "alpha": alpha, "seed": seed}
    if t1.n != t2.n:
        detail["reason"] = "size"
        return False, detail
    if cfg.n < t1.n:
        cfg = cfg.replaced(n=t1.n)
    if sim is None:
        sim = Simulator(cfg.replaced(C_w=HeightAlgebra.C_w))
    h1, log1, _ = height_run(t1, cfg, sim=sim)
    h2, log2, _ = height_run(t2, cfg, sim=sim)
    detail["height_left"] = h1
    detail["height_right"] = h2
    if h1 != h2:
        detail["reason"] = "height"
        detail["metrics"] = sim.snapshot_metrics()
        return False, detail
    rng = random.Random(seed)
    base = max(1, h1) * t1.n ** (alpha + 1)
    if prime_table is not None:
        usable = [p for p in prime_table if base <= p <= 2 * base]
        if not usable:
            raise InputError("prime table covers no prime in [%d, %d]"
                             % (base, 2 * base))
        m = usable[rng.randrange(len(usable))]
    else:
        m = rng.randint(base * base, 2 * base * base)
    sim.charge_subroutine("modulus draw", 1)
    xs = [rng.randint(1, m) for _ in range(h1)]
    plugin = IsoAlgebra(m)
    q1, _, _ = tree_contract(_stamped(t1, subtree_heights(log1), xs, m),
                             plugin, cfg, sim=sim)
    q2, _, _ = tree_contract(_stamped(t2, subtree_heights(log2), xs, m),
                             plugin, cfg, sim=sim)
    detail.update(reason="polynomial", modulus=m, q_left=q1, q_right=q2,
                  metrics=sim.snapshot_metrics())
    return q1 == q2, detail


def detection_count(t1, t2, cfg, trials, seed=0, alpha=1, prime_table=None):
    """How many of `trials` independent runs call the pair non-isomorphic."""
    rng = random.Random(seed)
    hits = 0
    for _ in range(trials):
        verdict, _ = tree_isomorphism(t1, t2, cfg, alpha=alpha,
                                      seed=rng.randrange(2 ** 32),
                                      prime_table=prime_table)
        if not verdict:
            hits += 1
    return hits
