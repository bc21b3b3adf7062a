"""Knowledge Store and Context Reasoner.

Facts are ground ``predicate(args...)`` records tagged with the tick and the
component that asserted them.  The reasoner runs positive Datalog-style rules
to a fixpoint with semi-naive evaluation; reasoner-derived facts are
recomputed on every :meth:`KnowledgeStore.infer` call.
"""
from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

from .geometry import SituationalMap
from .pddl.sexpr import SemanticError, SList, Sym, read_all

Value = Union[str, int, float]
SOURCES = ("sensor", "reasoner", "planner", "mission-package", "coordinator")
DEFAULT_ROUND_CAP = 1000


class KnowledgeError(ValueError):
    pass


class DivergenceError(RuntimeError):
    pass


def is_var(v) -> bool:
    return isinstance(v, str) and v.startswith("?")


@dataclass(frozen=True)
class Pattern:
    predicate: str
    args: tuple = ()

    def variables(self) -> set[str]:
        return {a for a in self.args if is_var(a)}

    def is_ground(self) -> bool:
        return not self.variables()

    def match(self, args: tuple, binding: dict | None = None) -> dict | None:
        if len(args) != len(self.args):
            return None
        b = dict(binding) if binding else {}
        for p, v in zip(self.args, args):
            if is_var(p):
                cur = b.get(p, _MISSING)
                if cur is _MISSING:
                    b[p] = v
                elif cur != v:
                    return None
            elif p != v:
                return None
        return b

    def substitute(self, binding: dict) -> "Pattern":
        return Pattern(self.predicate, tuple(binding.get(a, a) if is_var(a) else a for a in self.args))

    def __str__(self) -> str:
        return f"{self.predicate}({','.join(_fmt(a) for a in self.args)})"


_MISSING = object()


def _fmt(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def P(predicate: str, *args) -> Pattern:
    return Pattern(predicate, tuple(args))


@dataclass(frozen=True)
class Fact:
    predicate: str
    args: tuple = ()
    tick: int = 0
    source: str = "sensor"

    def __post_init__(self):
        if self.source not in SOURCES:
            raise KnowledgeError(f"unknown fact source {self.source!r}")
        if any(is_var(a) for a in self.args):
            raise KnowledgeError(f"fact {self.predicate}{self.args} is not ground")

    @property
    def key(self) -> tuple:
        return (self.predicate, self.args)

    def to_dict(self) -> dict:
        return {"p": self.predicate, "a": list(self.args), "t": self.tick, "s": self.source}

    @classmethod
    def from_dict(cls, d: dict) -> "Fact":
        return cls(d["p"], tuple(d["a"]), int(d["t"]), d["s"])

    def __str__(self) -> str:
        return f"{self.predicate}({','.join(_fmt(a) for a in self.args)})"


@dataclass(frozen=True)
class Rule:
    name: str
    body: tuple[Pattern, ...]
    head: Pattern

    def __post_init__(self):
        if not self.body:
            raise KnowledgeError(f"rule {self.name!r} has an empty body")
        bound = set().union(*(b.variables() for b in self.body))
        loose = self.head.variables() - bound
        if loose:
            raise KnowledgeError(f"rule {self.name!r} is not range-restricted: {sorted(loose)}")


@dataclass(frozen=True)
class KnowledgeSnapshot:
    facts: tuple[Fact, ...]
    tick: int
    map_json: str | None = None

    def query(self, pattern: Pattern) -> list[Fact]:
        return [f for f in self.facts if f.predicate == pattern.predicate and pattern.match(f.args) is not None]

    @property
    def situational_map(self) -> SituationalMap | None:
        return None if self.map_json is None else SituationalMap.from_dict(json.loads(self.map_json))

    def to_dict(self) -> dict:
        return {"tick": self.tick, "facts": [f.to_dict() for f in self.facts],
                "map": None if self.map_json is None else json.loads(self.map_json)}

    @classmethod
    def from_dict(cls, d: dict) -> "KnowledgeSnapshot":
        m = d.get("map")
        return cls(tuple(Fact.from_dict(f) for f in d["facts"]), int(d["tick"]),
                   None if m is None else json.dumps(m, sort_keys=True))


@dataclass
class _Entry:
    fact: Fact
    revision: int


class KnowledgeStore:
    def __init__(self):
        self._entries: dict[tuple, _Entry] = {}
        self._by_pred: dict[str, dict[tuple, None]] = defaultdict(dict)
        self._revision = 0
        self._last_tick: dict[str, int] = {}
        self.map: SituationalMap | None = None
        self.artifacts: dict[str, object] = {}
        self.tick = 0

    @property
    def revision(self) -> int:
        return self._revision

    def __len__(self) -> int:
        return len(self._entries)

    def assert_fact(self, fact: Fact) -> int:
        last = self._last_tick.get(fact.source)
        if last is not None and fact.tick < last:
            raise KnowledgeError(f"tick {fact.tick} precedes {last} for source {fact.source}")
        self._last_tick[fact.source] = fact.tick
        self.tick = max(self.tick, fact.tick)
        self._revision += 1
        entry = self._entries.get(fact.key)
        if entry is None:
            self._entries[fact.key] = _Entry(fact, self._revision)
            self._by_pred[fact.predicate][fact.key] = None
        else:
            entry.fact = fact
            entry.revision = self._revision
        return self._revision

    def tell(self, predicate: str, *args, tick: int | None = None, source: str = "sensor") -> int:
        return self.assert_fact(Fact(predicate, tuple(args), self.tick if tick is None else tick, source))

    def retract(self, pattern: Pattern, sources: Sequence[str] = ("sensor", "coordinator")) -> list[Fact]:
        """Remove matching facts.  Only sensor and coordinator facts may be retracted."""
        gone = []
        for key in list(self._by_pred.get(pattern.predicate, ())):
            entry = self._entries[key]
            if pattern.match(entry.fact.args) is None:
                continue
            if entry.fact.source not in sources or entry.fact.source in ("reasoner", "mission-package"):
                raise KnowledgeError(f"cannot retract {entry.fact} (source {entry.fact.source})")
            gone.append(entry.fact)
            self._drop(key)
        return gone

    def _drop(self, key: tuple) -> None:
        fact = self._entries.pop(key).fact
        del self._by_pred[fact.predicate][key]

    def query(self, pattern: Pattern) -> list[Fact]:
        """Facts matching ``pattern`` in the order they were first asserted."""
        out = []
        for key in self._by_pred.get(pattern.predicate, ()):
            f = self._entries[key].fact
            if pattern.match(f.args) is not None:
                out.append(f)
        return out

    def holds(self, pattern: Pattern) -> bool:
        return bool(self.query(pattern))

    def facts(self) -> list[Fact]:
        return [e.fact for e in self._entries.values()]

    def revision_of(self, predicate: str, *args) -> int | None:
        e = self._entries.get((predicate, tuple(args)))
        return None if e is None else e.revision

    def infer(self, rules: Iterable[Rule], round_cap: int = DEFAULT_ROUND_CAP) -> list[Fact]:
        """Recompute reasoner facts to a fixpoint; return the ones not present before."""
        rules = list(rules)
        previous = {k for k, e in self._entries.items() if e.fact.source == "reasoner"}
        base = {k for k, e in self._entries.items() if e.fact.source != "reasoner"}
        derived = fixpoint(base, rules, round_cap)
        fresh = derived - base
        for key in previous - fresh:
            self._drop(key)
        new = []
        for key in sorted(fresh - previous, key=_sort_key):
            f = Fact(key[0], key[1], self.tick, "reasoner")
            self.assert_fact(f)
            new.append(f)
        return new

    def snapshot(self) -> KnowledgeSnapshot:
        return KnowledgeSnapshot(tuple(self.facts()), self.tick,
                                 None if self.map is None else json.dumps(self.map.to_dict(), sort_keys=True))

    def dump(self) -> str:
        """Line-oriented debug dump: ``tick predicate(args) source`` in revision order."""
        entries = sorted(self._entries.values(), key=lambda e: e.revision)
        return "".join(f"{e.fact.tick} {e.fact} {e.fact.source}\n" for e in entries)


def _sort_key(key: tuple):
    return (key[0], tuple((type(a).__name__, _fmt(a)) for a in key[1]))


def _join(body: Sequence[Pattern], sources: Sequence[dict[str, list[tuple]]], binding: dict, i: int = 0):
    if i == len(body):
        yield binding
        return
    pat = body[i]
    for args in sources[i].get(pat.predicate, ()):
        b = pat.match(args, binding)
        if b is not None:
            yield from _join(body, sources, b, i + 1)


def fixpoint(base: set[tuple], rules: Sequence[Rule], round_cap: int = DEFAULT_ROUND_CAP) -> set[tuple]:
    """Semi-naive forward chaining over ``(predicate, args)`` keys."""
    known = set(base)
    full: dict[str, list[tuple]] = defaultdict(list)
    for p, a in sorted(known, key=_sort_key):
        full[p].append(a)
    delta = dict(full)
    rounds = 0
    while delta:
        rounds += 1
        if rounds > round_cap:
            raise DivergenceError(f"no fixpoint after {round_cap} rounds")
        new: set[tuple] = set()
        for rule in rules:
            n = len(rule.body)
            for i in range(n):
                if rule.body[i].predicate not in delta:
                    continue
                # at least one body atom comes from the last round's delta
                sources = [full] * n
                sources[i] = delta
                for b in _join(rule.body, sources, {}):
                    head = rule.head.substitute(b)
                    key = (head.predicate, head.args)
                    if key not in known:
                        new.add(key)
        delta = defaultdict(list)
        for p, a in sorted(new, key=_sort_key):
            delta[p].append(a)
            full[p].append(a)
        known |= new
        delta = dict(delta)
    return known


def naive_fixpoint(base: set[tuple], rules: Sequence[Rule], round_cap: int = DEFAULT_ROUND_CAP) -> set[tuple]:
    """Reference evaluation: re-join every rule against everything until nothing changes."""
    known = set(base)
    for _ in range(round_cap):
        full: dict[str, list[tuple]] = defaultdict(list)
        for p, a in known:
            full[p].append(a)
        new = set()
        for rule in rules:
            for b in _join(rule.body, [full] * len(rule.body), {}):
                h = rule.head.substitute(b)
                new.add((h.predicate, h.args))
        if new <= known:
            return known
        known |= new
    raise DivergenceError(f"no fixpoint after {round_cap} rounds")


def parse_value(s: str) -> Value:
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def pattern_from_sexpr(node, source: str | None = None) -> Pattern:
    if not isinstance(node, SList) or not node.items or not isinstance(node.items[0], Sym):
        line, col = getattr(node, "line", None), getattr(node, "col", None)
        raise SemanticError("expected a fact pattern (predicate args...)", line, col, "semantic.bad-pattern",
                            source=source)
    items = []
    for it in node.items[1:]:
        if not isinstance(it, Sym):
            raise SemanticError("nested list inside a fact pattern", it.line, it.col, "semantic.bad-pattern",
                                source=source)
        items.append(parse_value(it.value))
    return Pattern(node.items[0].value.lower(), tuple(items))


def conjunction_from_sexpr(node, source: str | None = None) -> tuple[Pattern, ...]:
    if isinstance(node, SList) and node.head() == "and":
        return tuple(pattern_from_sexpr(n, source) for n in node.items[1:])
    if isinstance(node, SList) and not node.items:
        return ()
    return (pattern_from_sexpr(node, source),)


def parse_rules(text: str, source: str | None = None) -> list[Rule]:
    """Read ``(rule NAME :if CONJUNCTION :then PATTERN)`` forms."""
    rules = []
    for form in read_all(text, source):
        if form.head() != "rule" or len(form) != 6:
            raise SemanticError("expected (rule NAME :if (...) :then (...))", form.line, form.col,
                                "semantic.bad-rule", source=source)
        name = form[1].value if isinstance(form[1], Sym) else None
        keys = [x.value.lower() if isinstance(x, Sym) else None for x in (form[2], form[4])]
        if name is None or keys != [":if", ":then"]:
            raise SemanticError("expected (rule NAME :if (...) :then (...))", form.line, form.col,
                                "semantic.bad-rule", source=source)
        try:
            rules.append(Rule(name, conjunction_from_sexpr(form[3], source), pattern_from_sexpr(form[5], source)))
        except KnowledgeError as exc:
            raise SemanticError(str(exc), form.line, form.col, "semantic.rule-range", source=source) from None
    return rules
