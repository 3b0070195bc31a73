"""Dynamic maximum-matching size via the random Tutte matrix.

The graph lives in the formula f(I1, T, I2) = I1*T*I2 over Z_p: T is the
random skew-symmetric Tutte matrix, I1 and I2 are diagonal selectors, and
matching size = rank(f)/2.  Every graph operation decomposes into entry
updates routed through the rank tracker:

  insert(u,v):  T[u][v] <- x_uv, T[v][u] <- -x_uv   (x_uv memoized per pair)
  remove(u,v):  both <- 0
  vertex_on/off(v):  (I1)[v][v] and (I2)[v][v] <- 1 / 0
  merge(u,v):   (I1)[u][v] <- 1, (I2)[v][u] <- 1, (I1)[v][v] <- 0,
                (I2)[v][v] <- 0, and the same re-routing for every vertex
                previously merged into v (so chained merges keep the
                quotient graph's edges attached to the survivor)

Merged-away vertices are inert: any later op addressing one is rejected,
and on/off is rejected for merge survivors too (their selector row no
longer has the single-diagonal shape a toggle assumes).
"""

import random

from .errors import ConfigError, InvalidVertex
from .rank import RankState
from .scalars import DEFAULT_PRIME


class TutteState:

    def __init__(self, n, p=DEFAULT_PRIME, seed=0):
        if n < 1:
            raise ConfigError(f"need at least one vertex, got {n}")
        self.n = n
        self.p = p
        self.seed = seed
        self.rng = random.Random(f"tutte:{seed}")   # distinct stream from the rank tracker's
        ident = [[1 if r == c else 0 for c in range(n)] for r in range(n)]
        zero = [[0] * n for _ in range(n)]
        try:
            self.rk = RankState("I1:{0}x{0}; T:{0}x{0}; I2:{0}x{0}; I1*T*I2".format(n),
                                {"I1": ident, "T": zero, "I2": ident}, p=p, seed=seed)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        by_name = {}
        for lid, (_r, _c, _s, name) in self.rk.cons.leaf_blocks.items():
            by_name.setdefault(name, lid)
        self._leaf = by_name
        self.edges = set()                  # frozensets of original endpoints
        self.active = set(range(n))
        self.merged_into = {}               # merged-away vertex -> survivor
        self.members = {v: [] for v in range(n)}   # survivor -> absorbed list
        self._x = {}                        # frozenset pair -> memoized randomness

    def _edge_x(self, u, v):
        key = frozenset((u, v))
        if key not in self._x:
            self._x[key] = self.rng.randrange(self.p)
        return self._x[key]

    def _check_vertex(self, v, *, allow_survivor=True):
        if not isinstance(v, int) or not 0 <= v < self.n:
            raise InvalidVertex(f"vertex {v!r} outside 0..{self.n - 1}")
        if v in self.merged_into:
            raise InvalidVertex(f"vertex {v} was merged away")
        if not allow_survivor and self.members[v]:
            raise InvalidVertex(f"vertex {v} absorbed a merge; on/off undefined")

    def _set(self, leaf_name, i, j, value):
        return self.rk.apply_update(self._leaf[leaf_name], i, j, value)

    def matching_size(self):
        rank = self.rk.rank()
        if rank % 2:
            raise ArithmeticError(f"Tutte rank {rank} is odd; internal inconsistency")
        return rank // 2

    def insert(self, u, v):
        self._check_vertex(u)
        self._check_vertex(v)
        if u == v:
            raise InvalidVertex("self-loops are not graph edges")
        key = frozenset((u, v))
        if key not in self.edges:
            a, b = min(u, v), max(u, v)
            x = self._edge_x(a, b)
            self._set("T", a, b, x)
            self._set("T", b, a, (-x) % self.p)
            self.edges.add(key)
        return self.matching_size()

    def remove(self, u, v):
        self._check_vertex(u)
        self._check_vertex(v)
        key = frozenset((u, v))
        if key in self.edges:
            a, b = min(u, v), max(u, v)
            self._set("T", a, b, 0)
            self._set("T", b, a, 0)
            self.edges.remove(key)
        return self.matching_size()

    def vertex_on(self, v):
        self._check_vertex(v, allow_survivor=False)
        if v not in self.active:
            self._set("I1", v, v, 1)
            self._set("I2", v, v, 1)
            self.active.add(v)
        return self.matching_size()

    def vertex_off(self, v):
        self._check_vertex(v, allow_survivor=False)
        if v in self.active:
            self._set("I1", v, v, 0)
            self._set("I2", v, v, 0)
            self.active.discard(v)
        return self.matching_size()

    def merge(self, u, v):
        """Contract v into u; v (and its absorbed class) re-route to u."""
        self._check_vertex(u)
        self._check_vertex(v)
        if u == v:
            raise InvalidVertex("cannot merge a vertex with itself")
        if u not in self.active or v not in self.active:
            raise InvalidVertex("merge endpoints must both be on")
        self._set("I1", u, v, 1)
        self._set("I2", v, u, 1)
        self._set("I1", v, v, 0)
        self._set("I2", v, v, 0)
        for w in self.members[v]:
            self._set("I1", u, w, 1)
            self._set("I2", w, u, 1)
            self._set("I1", v, w, 0)
            self._set("I2", w, v, 0)
        self.members[u].append(v)
        self.members[u].extend(self.members[v])
        for w in (v, *self.members[v]):
            self.merged_into[w] = u
        self.members[v] = []
        self.active.discard(v)
        return self.matching_size()

    def to_json(self):
        return {"n": self.n, "size": self.matching_size(), "rank": self.rk.rank(),
                "edges": sorted(tuple(sorted(e)) for e in self.edges),
                "active": sorted(self.active),
                "merged": {str(k): val for k, val in sorted(self.merged_into.items())}}


def matching_new(n, p=DEFAULT_PRIME, seed=0):
    return TutteState(n, p, seed)


def apply_graph_update(st, update):
    """Dispatch one update given as a tuple, e.g. ("insert", u, v) or ("vertex_off", v)."""
    op, *args = update
    table = {"insert": st.insert, "remove": st.remove, "vertex_on": st.vertex_on,
             "vertex_off": st.vertex_off, "merge": st.merge}
    if op not in table:
        raise ConfigError(f"unknown graph update {op!r}")
    return table[op](*args)


_LINE_OPS = {"ins": ("insert", 2), "del": ("remove", 2), "on": ("vertex_on", 1),
             "off": ("vertex_off", 1), "merge": ("merge", 2)}


def parse_update(line):
    """Parse one update line: "ins u v" | "del u v" | "on v" | "off v" | "merge u v"."""
    parts = line.split()
    if not parts or parts[0] not in _LINE_OPS:
        raise ConfigError(f"unparseable graph update {line!r}")
    op, arity = _LINE_OPS[parts[0]]
    if len(parts) != arity + 1:
        raise ConfigError(f"{parts[0]} takes {arity} vertex ids: {line!r}")
    try:
        ids = [int(tok) for tok in parts[1:]]
    except ValueError:
        raise ConfigError(f"vertex ids must be integers: {line!r}") from None
    return (op, *ids)
