"""Exhaustive typed grounding with static-predicate compilation and relaxed reachability pruning."""
from __future__ import annotations

from bisect import bisect_left
from collections import OrderedDict, defaultdict
from dataclasses import dataclass
from itertools import product
from functools import cached_property, lru_cache
from typing import NamedTuple

from .model import ActionSchema, Atom, Domain, Literal, Problem

DEFAULT_ACTION_CAP = 10**6


class GroundingSizeError(RuntimeError):
    def __init__(self, count: int, cap: int, schema: str):
        super().__init__(f"grounding {schema!r} exceeds the cap of {cap} actions (reached {count})")
        self.count = count
        self.cap = cap
        self.schema = schema


class GroundAction(NamedTuple):
    index: int
    name: str
    args: tuple[str, ...]
    pre: frozenset[int]
    add: frozenset[int]
    delete: frozenset[int]
    cost: int

    @property
    def ident(self) -> str:
        return "(" + " ".join((self.name,) + self.args) + ")"


def _mask(indices) -> int:
    m = 0
    for i in indices:
        m |= 1 << i
    return m


@dataclass(frozen=True, eq=False)
class GroundedTask:
    """Propositional STRIPS task.  States are frozensets of fact indices."""

    facts: tuple[Atom, ...]
    actions: tuple[GroundAction, ...]
    init: frozenset[int]
    goal: frozenset[int]
    static_goal_holds: bool = True
    static_facts: frozenset[Atom] = frozenset()
    name: str = ""

    @cached_property
    def fact_index(self) -> dict[Atom, int]:
        return {a: i for i, a in enumerate(self.facts)}

    @cached_property
    def action_index(self) -> dict[str, int]:
        return {a.ident: a.index for a in self.actions}

    def lookup(self, ident: str) -> int | None:
        """Index of the action written ``(name arg...)``, found by bisection on the sorted actions."""
        parts = ident.strip().lstrip("(").rstrip(")").split()
        if not parts:
            return None
        key = (parts[0].lower(), tuple(a.lower() for a in parts[1:]))
        i = bisect_left(self.actions, key, key=lambda a: (a.name, a.args))
        if i < len(self.actions) and (self.actions[i].name, self.actions[i].args) == key:
            return i
        return None

    @property
    def n_facts(self) -> int:
        return len(self.facts)

    def goal_satisfied(self, state: frozenset[int]) -> bool:
        return self.static_goal_holds and self.goal <= state

    def state_atoms(self, state: frozenset[int]) -> list[Atom]:
        return [self.facts[i] for i in sorted(state)]

    def masks(self) -> tuple[list[int], list[int], list[int]]:
        """Per-action bitmasks ``(pre, add, delete)`` over fact indices."""
        return ([_mask(a.pre) for a in self.actions], [_mask(a.add) for a in self.actions],
                [_mask(a.delete) for a in self.actions])


class _Template:
    """An atom whose arguments are positions in ``binding + constants``."""

    __slots__ = ("predicate", "slots")

    def __init__(self, atom: Atom, pos: dict[str, int], consts: list[str]):
        slots = []
        for a in atom.args:
            if a in pos:
                slots.append(pos[a])
            else:
                if a not in consts:
                    consts.append(a)
                slots.append(-1 - consts.index(a))
        self.predicate = atom.predicate
        self.slots = tuple(slots)

    def source(self, consts: tuple[str, ...]) -> str:
        args = [f"b[{s}]" if s >= 0 else repr(consts[-1 - s]) for s in self.slots]
        return f"({self.predicate!r}, ({', '.join(args)}{',' if len(args) == 1 else ''}))"


class _Schema:
    def __init__(self, schema: ActionSchema, statics: frozenset[str]):
        self.name = schema.name
        self.cost = schema.cost
        self.params = [v for v, _ in schema.params]
        self.types = [t for _, t in schema.params]
        pos = {v: i for i, v in enumerate(self.params)}
        consts: list[str] = []
        mk = lambda a: _Template(a, pos, consts)
        self.static_pos = [mk(l.atom) for l in schema.precondition if l.positive and l.atom.predicate in statics]
        self.static_neg = [mk(l.atom) for l in schema.precondition
                           if not l.positive and l.atom.predicate in statics]
        self.pre = [mk(l.atom) for l in schema.precondition if l.atom.predicate not in statics]
        self.add = [mk(a) for a in schema.add]
        self.delete = [mk(a) for a in schema.delete]
        self.consts = tuple(consts)
        self.static_preds = tuple(sorted({l.atom.predicate for l in schema.precondition
                                          if l.atom.predicate in statics}))
        n = len(self.params)
        tup = lambda ts: "(" + "".join(t.source(self.consts) + ", " for t in ts) + ")"
        # one compiled expression per schema builds every instantiated atom list at once
        self.neg = eval(f"lambda b: {tup(self.static_neg)}")  # noqa: S307 - generated from parsed names
        self.inst = eval(f"lambda b: ({tup(self.pre)}, {tup(self.add)}, {tup(self.delete)})")  # noqa: S307
        # join order: each next literal shares the most variables with those already bound
        order: list[int] = []
        remaining = list(self.static_pos)
        self.join: list[_JoinStep] = []
        while remaining:
            remaining.sort(key=lambda t: -sum(1 for x in t.slots if x in order))
            step = _JoinStep(remaining.pop(0), order, self.consts)
            self.join.append(step)
            order.extend(step.new_vars)
        self.free = [i for i in range(n) if i not in order]
        order.extend(self.free)
        self.perm = tuple(order.index(i) for i in range(n))


class _JoinStep:
    """Hash join of bound variables against one positive static literal."""

    def __init__(self, t: _Template, order: list[int], consts: tuple[str, ...]):
        self.predicate = t.predicate
        self.const_at = tuple((k, consts[-1 - s]) for k, s in enumerate(t.slots) if s < 0)
        self.key_at = tuple(k for k, s in enumerate(t.slots) if s >= 0 and s in order)
        self.key_from = tuple(order.index(t.slots[k]) for k in self.key_at)
        first: dict[int, int] = {}
        self.same_as: list[tuple[int, int]] = []
        for k, s in enumerate(t.slots):
            if s >= 0 and s not in order:
                if s in first:
                    self.same_as.append((k, first[s]))
                else:
                    first[s] = k
        self.new_vars = tuple(first)
        self.new_at = tuple(first.values())

    def table(self, rows, types, obj_type) -> dict[tuple, list[tuple]]:
        out: dict[tuple, list[tuple]] = defaultdict(list)
        checks = [(k, types[v]) for v, k in zip(self.new_vars, self.new_at) if types[v] != "object"]
        for args in rows:
            if any(args[k] != c for k, c in self.const_at) or any(args[k] != args[j] for k, j in self.same_as):
                continue
            if any(obj_type.get(args[k]) != ty for k, ty in checks):
                continue
            out[tuple(args[k] for k in self.key_at)].append(tuple(args[k] for k in self.new_at))
        return out


class _StaticIndex:
    def __init__(self, facts):
        self.facts = set(facts)
        self.by_pred: dict[str, list[tuple[str, ...]]] = defaultdict(list)
        for pred, args in sorted(self.facts):
            self.by_pred[pred].append(args)
        self._tables: dict = {}

    def table(self, step: _JoinStep, types, obj_type):
        key = (step.predicate, step.const_at, step.key_at, tuple(step.same_as), step.new_at,
               tuple(types[v] for v in step.new_vars))
        tab = self._tables.get(key)
        if tab is None:
            tab = self._tables[key] = step.table(self.by_pred.get(step.predicate, ()), types, obj_type)
        return tab


def _bindings(sc: _Schema, index: _StaticIndex, objects_of, obj_type, cap: int) -> list[tuple]:
    partial: list[tuple] = [()]
    for step in sc.join:
        tab = index.table(step, sc.types, obj_type)
        kf = step.key_from
        nxt = []
        for b in partial:
            for vals in tab.get(tuple([b[i] for i in kf]), ()):
                nxt.append(b + vals)
        partial = nxt
        if not partial:
            return []
    if sc.free:
        pools = [objects_of.get(sc.types[v], []) for v in sc.free]
        size = len(partial)
        for pl in pools:
            size *= len(pl)
        if size > cap:
            raise GroundingSizeError(size, cap, sc.name)
        partial = [b + combo for b in partial for combo in product(*pools)]
    perm = sc.perm
    if perm != tuple(range(len(perm))):
        partial = [tuple([b[i] for i in perm]) for b in partial]
    return partial


@lru_cache(maxsize=256)
def _compiled(schema: ActionSchema, statics: frozenset[str]) -> _Schema:
    return _Schema(schema, statics)


class _RowCache:
    """Instantiated schema rows keyed by the static facts they depend on.

    Facts are interned to ints so reachability hashes small integers.  Replanning
    on one grid reuses every movement and scan row; only schemas touching changed
    static predicates are re-instantiated.
    """

    def __init__(self, max_entries: int = 512, max_facts: int = 2_000_000):
        self.max_entries = max_entries
        self.max_facts = max_facts
        self.clear()

    def clear(self) -> None:
        self.ids: dict[tuple, int] = {}
        self.facts: list[tuple] = []
        self.rows: OrderedDict = OrderedDict()

    def intern(self, fact: tuple) -> int:
        i = self.ids.get(fact)
        if i is None:
            i = self.ids[fact] = len(self.facts)
            self.facts.append(fact)
        return i

    def get(self, key):
        hit = self.rows.get(key)
        if hit is not None:
            self.rows.move_to_end(key)
        return hit

    def put(self, key, value) -> None:
        self.rows[key] = value
        if len(self.rows) > self.max_entries:
            self.rows.popitem(last=False)


_CACHE = _RowCache()


def clear_grounding_cache() -> None:
    _CACHE.clear()


def _instantiate(sc: _Schema, index: _StaticIndex, objects_of, obj_type, cap: int) -> list[tuple]:
    bs = _bindings(sc, index, objects_of, obj_type, cap)
    if sc.static_neg:
        sfacts, neg = index.facts, sc.neg
        bs = [b for b in bs if sfacts.isdisjoint(neg(b))]
    intern, inst, name, cost = _CACHE.intern, sc.inst, sc.name, sc.cost
    out = []
    for b in bs:
        pre, add, dele = inst(b)
        out.append((name, b, tuple(map(intern, pre)), tuple(map(intern, add)), tuple(map(intern, dele)), cost))
    return out


def ground(domain: Domain, problem: Problem, cap: int = DEFAULT_ACTION_CAP) -> GroundedTask:
    statics = domain.static_predicates()
    obj_type: dict[str, str] = dict(domain.constants)
    obj_type.update(problem.objects)
    objects_of: dict[str, list[str]] = defaultdict(list)
    for o in sorted(obj_type):
        objects_of[obj_type[o]].append(o)
    objects_of["object"] = sorted(obj_type)
    types_key = tuple(sorted(obj_type.items()))

    static_init = frozenset(a for a in problem.init if a.predicate in statics)
    rows_of: dict[str, set] = defaultdict(set)
    for a in static_init:
        rows_of[a.predicate].add(a.args)
    frozen = {p: frozenset(r) for p, r in rows_of.items()}
    index = None

    if len(_CACHE.facts) > _CACHE.max_facts:
        _CACHE.clear()
    raw: list[tuple] = []
    for schema in domain.actions:
        sc = _compiled(schema, statics)
        key = (sc, types_key, tuple(frozen.get(p, _EMPTY) for p in sc.static_preds))
        rows = _CACHE.get(key)
        if rows is None:
            if index is None:
                index = _StaticIndex((a.predicate, a.args) for a in static_init)
            rows = _instantiate(sc, index, objects_of, obj_type, cap)
            _CACHE.put(key, rows)
        raw.extend(rows)
        if len(raw) > cap:
            raise GroundingSizeError(len(raw), cap, sc.name)

    intern = _CACHE.intern
    init_ids = {intern((a.predicate, a.args)) for a in problem.init if a.predicate not in statics}
    reached, live = _relaxed_reachability(init_ids, raw)

    goal_lits: list[Literal] = list(problem.goal)
    static_goal_holds = all((l.atom.args in frozen.get(l.atom.predicate, _EMPTY)) == l.positive
                            for l in goal_lits if l.atom.predicate in statics)
    goal_ids = {intern((l.atom.predicate, l.atom.args)) for l in goal_lits if l.atom.predicate not in statics}
    table = _CACHE.facts
    universe = sorted(reached | goal_ids, key=table.__getitem__)
    fidx = {a: i for i, a in enumerate(universe)}

    # (name, args) is unique per action, so plain tuple order sorts by it
    kept = sorted([raw[i] for i in live])
    get = fidx.get
    actions = tuple(
        GroundAction(k, name, args, frozenset(map(get, pre)), frozenset(map(get, add)),
                     # deleting a fact that can never hold is a no-op
                     frozenset(map(get, delete)) - _NONE, cost)
        for k, (name, args, pre, add, delete, cost) in enumerate(kept))
    return GroundedTask(tuple(Atom(*table[i]) for i in universe), actions,
                        frozenset(map(get, init_ids)), frozenset(map(get, goal_ids)),
                        static_goal_holds, static_init, problem.name)


_NONE = frozenset([None])
_EMPTY: frozenset = frozenset()


def _relaxed_reachability(init: set, raw) -> tuple[set, list[int]]:
    """Delete-relaxed forward reachability; returns reached facts and live action positions."""
    reached = set(init)
    waiting: dict = defaultdict(list)
    missing = []
    queue: list[int] = []
    for i, r in enumerate(raw):
        need = [a for a in r[2] if a not in reached]
        missing.append(len(need))
        for a in need:
            waiting[a].append(i)
        if not need:
            queue.append(i)
    live = []
    while queue:
        i = queue.pop()
        live.append(i)
        for a in raw[i][3]:
            if a not in reached:
                reached.add(a)
                for j in waiting.pop(a, ()):
                    missing[j] -= 1
                    if missing[j] == 0:
                        queue.append(j)
    return reached, live
