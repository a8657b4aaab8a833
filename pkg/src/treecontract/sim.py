"""Round-accurate simulator of the adaptive MPC machine model.

Machines run one round at a time against a frozen previous hash-table
generation; their writes materialize the next generation at round end.
All budgets are counted in machine words (word_count in trees.py). Costs of
cited external subroutines (preorder numbering, connectivity, relabeling)
are charged as opaque round blocks rather than re-implemented.
"""

import json
import math
import os
import random
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager

from .errors import InputError, SimFault
from .trees import word_count


class SimConfig:
    """Run parameters plus the constants the asymptotic bounds hide.

    S = max(4, ceil(C_s * n^epsilon)) local words per machine; reads and
    writes per machine-round are capped at C_q*S words; payloads at
    C_w*(deg+1) words; the outer phase loop at ceil(C_p/epsilon).
    """

    __slots__ = ("epsilon", "n", "C_s", "C_q", "C_w", "C_p",
                 "total_budget_factor", "seed", "strict")

    def __init__(self, epsilon, n, C_s=16, C_q=4, C_w=8, C_p=4,
                 total_budget_factor=64, seed=0, strict=True):
        if not 0 < epsilon < 1:
            raise InputError("epsilon must lie in (0,1)")
        if n < 1:
            raise InputError("n must be positive")
        if C_w > 16:
            raise InputError("C_w above 16 breaks the machine-count bound")
        self.epsilon = epsilon
        self.n = n
        self.C_s = C_s
        self.C_q = C_q
        self.C_w = C_w
        self.C_p = C_p
        self.total_budget_factor = total_budget_factor
        self.seed = seed
        self.strict = strict

    @property
    def S(self):
        return max(4, math.ceil(self.C_s * self.n ** self.epsilon))

    @property
    def inv_eps(self):
        return math.ceil(1 / self.epsilon)

    @property
    def phase_cap(self):
        return math.ceil(self.C_p / self.epsilon)

    @property
    def machine_cap(self):
        return math.ceil(self.total_budget_factor * self.n / self.S)

    def replaced(self, **kw):
        args = {k: getattr(self, k) for k in self.__slots__}
        args.update(kw)
        return SimConfig(**args)


class Machine:
    """One machine-program for one round: a declared input size in words and
    a body run against the round context."""

    __slots__ = ("input_words", "run", "label")

    def __init__(self, input_words, run, label=""):
        self.input_words = input_words
        self.run = run
        self.label = label


class _Ctx:
    """Per-machine round context: adaptive reads from the frozen previous
    generation, writes buffered for the round-end merge."""

    __slots__ = ("_table", "read_ops", "read_words", "writes", "write_words",
                 "_closed")

    def __init__(self, table):
        self._table = table
        self.read_ops = 0
        self.read_words = 0
        self.writes = {}
        self.write_words = 0
        self._closed = False

    def read(self, key, default=KeyError):
        if self._closed:
            raise SimFault("read after round end (generation frozen)")
        self.read_ops += 1
        if key in self._table:
            value = self._table[key]
        elif default is KeyError:
            raise SimFault("read of missing key %r" % (key,))
        else:
            value = default
        self.read_words += word_count(value) if key in self._table else 1
        return value

    def write(self, key, value):
        if self._closed:
            raise SimFault("write after round end (generation frozen)")
        if key in self.writes and self.writes[key] != value:
            raise SimFault("conflicting writes to key %r" % (key,))
        self.writes[key] = value
        self.write_words += 1 + word_count(value)


def _entry_words(key, value):
    return 1 + word_count(value)


class Simulator:
    """Owns the generation sequence, the round/phase ledger, and the budget
    checks. strict=True turns any violation into a SimFault naming the
    machine and round; otherwise violations are recorded and the run
    proceeds."""

    def __init__(self, cfg, initial=None):
        self.cfg = cfg
        self.rounds = 0
        self.generation = dict(initial) if initial else {}
        self._gen_words = sum(_entry_words(k, v)
                              for k, v in self.generation.items())
        self.peak_machine_words = 0
        self.total_words = self._gen_words
        self.dht_reads = 0
        self.dht_writes = 0
        self.violations = []
        self.phases = []
        self._phase_stack = []
        self.rng = random.Random(cfg.seed)
        self._threads = max(1, int(os.environ.get("TC_THREADS", "1") or 1))

    # -- faults ------------------------------------------------------------

    def fault(self, msg):
        self.violations.append(msg)
        if self.cfg.strict:
            raise SimFault(msg)

    # -- rounds ------------------------------------------------------------

    def _advance(self, k):
        self.rounds += k
        if self._phase_stack:
            self._phase_stack[-1]["rounds"] += k

    def run_round(self, machines):
        """Execute machine-programs against the frozen current generation;
        merge their writes into the next one. Returns their results in
        machine order."""
        frozen = self.generation
        self._advance(1)
        if len(machines) > self.cfg.machine_cap:
            self.fault("round %d: %d machines exceed cap %d"
                       % (self.rounds, len(machines), self.cfg.machine_cap))
        ctxs = [_Ctx(frozen) for _ in machines]

        def run_one(i):
            return machines[i].run(ctxs[i])

        if self._threads > 1 and len(machines) > 1:
            with ThreadPoolExecutor(max_workers=self._threads) as pool:
                results = list(pool.map(run_one, range(len(machines))))
        else:
            results = [run_one(i) for i in range(len(machines))]

        nxt = dict(frozen)
        words = self._gen_words
        merged = {}
        cap = self.cfg.C_q * self.cfg.S
        for i, (m, ctx) in enumerate(zip(machines, ctxs)):
            ctx._closed = True
            who = "round %d machine %d%s" % (
                self.rounds, i, " (%s)" % m.label if m.label else "")
            if m.input_words > self.cfg.S:
                self.fault("%s: input %d words exceeds local space %d"
                           % (who, m.input_words, self.cfg.S))
            if ctx.read_words > cap:
                self.fault("%s: read %d words exceeds budget %d"
                           % (who, ctx.read_words, cap))
            if ctx.write_words > cap:
                self.fault("%s: write %d words exceeds budget %d"
                           % (who, ctx.write_words, cap))
            self.peak_machine_words = max(self.peak_machine_words,
                                          m.input_words + ctx.read_words)
            self.dht_reads += ctx.read_ops
            self.dht_writes += len(ctx.writes)
            for key, value in ctx.writes.items():
                if key in merged and merged[key] != value:
                    self.fault("%s: conflicting write to key %r" % (who, key))
                merged[key] = value
                if key in nxt:
                    words -= _entry_words(key, nxt[key])
                nxt[key] = value
                words += _entry_words(key, value)
        self.generation = nxt
        self._gen_words = words
        self.total_words = max(self.total_words, words)
        return results

    def charge_subroutine(self, name, rounds):
        """Advance the clock for a cited external subroutine."""
        if rounds < 1:
            raise InputError("charged rounds must be >= 1")
        self._advance(rounds)
        if not self._phase_stack:
            self.phases.append({"label": name, "rounds": rounds})

    @contextmanager
    def phase(self, label):
        entry = {"label": label, "rounds": 0}
        self.phases.append(entry)
        self._phase_stack.append(entry)
        try:
            yield entry
        finally:
            self._phase_stack.pop()

    # -- reporting ----------------------------------------------------------

    def table(self):
        """Read-only view of the current generation (host-side inspection)."""
        return self.generation

    def snapshot_metrics(self):
        return {
            "rounds": self.rounds,
            "phases": [dict(p) for p in self.phases],
            "peak_machine_words": self.peak_machine_words,
            "total_words": self.total_words,
            "dht_reads": self.dht_reads,
            "dht_writes": self.dht_writes,
            "violations": list(self.violations),
        }

    def metrics_json(self):
        return json.dumps(self.snapshot_metrics(), sort_keys=True)
