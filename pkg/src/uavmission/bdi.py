"""Belief-desire-intention task coordinator driven by a mission package.

A mission package is a set of s-expression files:

* ``*.plans``  ``(plan NAME :goal G :utility U :precondition C :context C :body (STEP...) :effects (PAT...))``
* ``*.rules``  reasoning rules, see :func:`uavmission.knowledge.parse_rules`
* ``*.facts``  ``(predicates (NAME ARG...)...)`` declarations and ``(init (FACT)...)``

Body steps are ``(command KIND ARG...)``, ``(assert PATTERN)``, ``(wait-for PATTERN)``,
``(request SERVICE LABEL [:on-failure STEP])`` and ``(dp-request LABEL [:on-failure STEP])``,
the last being shorthand for a request to ``dp.solve``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

from .bus import Bus, Envelope, response_result
from .knowledge import (Fact, KnowledgeStore, Pattern, Rule, conjunction_from_sexpr, is_var, parse_rules,
                        parse_value, pattern_from_sexpr)
from .pddl.sexpr import SemanticError, SList, Sym, read_all

ACTIVE, WAITING, SUSPENDED, SUCCEEDED, FAILED = "active", "waiting", "suspended", "succeeded", "failed"
DP_SERVICE = "dp.solve"
COORDINATOR = "coordinator"
# facts the coordinator itself asserts; always declared
COORDINATOR_PREDICATES = {"artifact-ready": 1, "plan-failed": 2, "request-failed": 2}


class MissionPackageError(ValueError):
    pass


@dataclass(frozen=True)
class Step:
    kind: str  # command | assert | wait-for | request
    args: tuple = ()
    pattern: Pattern | None = None
    service: str = ""
    on_failure: "Step | None" = None

    def bind(self, binding: dict) -> tuple:
        return tuple(binding.get(a, a) if is_var(a) else a for a in self.args)

    def __str__(self) -> str:
        if self.kind == "command":
            return "(command " + " ".join(map(str, self.args)) + ")"
        if self.kind == "request":
            return f"(request {self.service} {' '.join(map(str, self.args))})"
        return f"({self.kind} {self.pattern})"


@dataclass(frozen=True)
class PlanSpec:
    name: str
    goal: str
    precondition: tuple[Pattern, ...]
    context: tuple[Pattern, ...]
    body: tuple[Step, ...]
    utility: float
    effects: tuple[Pattern, ...] = ()
    line: int | None = None

    def patterns(self) -> Iterable[tuple[Pattern, str]]:
        for p in self.precondition:
            yield p, "precondition"
        for p in self.context:
            yield p, "context"
        for p in self.effects:
            yield p, "effects"
        for s in self.body:
            for st in (s, s.on_failure):
                if st is not None and st.pattern is not None:
                    yield st.pattern, st.kind


@dataclass
class Intention:
    plan: PlanSpec
    bindings: dict
    pc: int = 0
    status: str = ACTIVE
    pending: Any = None
    reason: str = ""

    @property
    def name(self) -> str:
        return self.plan.name

    def to_dict(self) -> dict:
        return {"plan": self.plan.name, "goal": self.plan.goal, "pc": self.pc, "status": self.status,
                "bindings": {k: self.bindings[k] for k in sorted(self.bindings)}}


@dataclass(frozen=True)
class MissionPackage:
    plans: tuple[PlanSpec, ...]
    facts: tuple[tuple[str, tuple], ...] = ()
    rules: tuple[Rule, ...] = ()
    predicates: dict = field(default_factory=dict)

    def plan(self, name: str) -> PlanSpec:
        for p in self.plans:
            if p.name == name:
                return p
        raise KeyError(name)

    def seed(self, ks: KnowledgeStore, tick: int = 0) -> None:
        for pred, args in self.facts:
            ks.assert_fact(Fact(pred, args, tick, "mission-package"))


# ---------------------------------------------------------------- parsing

def _sym(node, what: str, source) -> str:
    if not isinstance(node, Sym):
        raise SemanticError(f"expected {what}", getattr(node, "line", None), getattr(node, "col", None),
                            "semantic.mission-package", source=source)
    return node.value


def _step(node, source) -> Step:
    if not isinstance(node, SList) or not node.items:
        raise SemanticError("expected a plan step", getattr(node, "line", None), getattr(node, "col", None),
                            "semantic.bad-step", source=source)
    head = node.head()
    items = node.items[1:]
    if head == "command":
        if not items:
            raise SemanticError("command step needs a kind", node.line, node.col, "semantic.bad-step", source=source)
        return Step("command", tuple(parse_value(_sym(i, "a command argument", source)) for i in items))
    if head in ("assert", "wait-for"):
        if len(items) != 1:
            raise SemanticError(f"{head} takes exactly one pattern", node.line, node.col, "semantic.bad-step",
                                source=source)
        return Step(head, pattern=pattern_from_sexpr(items[0], source))
    if head in ("request", "dp-request"):
        if head == "dp-request":
            items = [Sym(DP_SERVICE, node.line, node.col)] + list(items)
        on_failure = None
        if len(items) >= 4 and isinstance(items[-2], Sym) and items[-2].value.lower() == ":on-failure":
            on_failure = _step(items[-1], source)
            items = items[:-2]
        if len(items) != 2:
            raise SemanticError(f"expected ({head} ... LABEL [:on-failure STEP])", node.line, node.col,
                                "semantic.bad-step", source=source)
        return Step("request", (_sym(items[1], "a request label", source),),
                    service=_sym(items[0], "a service name", source), on_failure=on_failure)
    raise SemanticError(f"unknown step kind {head!r}", node.line, node.col, "semantic.bad-step",
                        expected=("command", "assert", "wait-for", "request", "dp-request"), source=source)


_PLAN_KEYS = (":goal", ":utility", ":precondition", ":context", ":body", ":effects")


def parse_plans(text: str, source: str | None = None) -> list[PlanSpec]:
    plans = []
    for form in read_all(text, source):
        if form.head() != "plan" or len(form) < 2:
            raise SemanticError("expected (plan NAME :key value ...)", form.line, form.col,
                                "semantic.bad-plan", source=source)
        name = _sym(form[1], "a plan name", source)
        rest = form.items[2:]
        if len(rest) % 2:
            raise SemanticError(f"plan {name}: keyword without a value", form.line, form.col,
                                "semantic.bad-plan", source=source)
        fields: dict[str, Any] = {}
        for k, v in zip(rest[::2], rest[1::2]):
            key = _sym(k, "a plan keyword", source).lower()
            if key not in _PLAN_KEYS:
                raise SemanticError(f"plan {name}: unknown keyword {key}", k.line, k.col, "semantic.bad-plan",
                                    expected=_PLAN_KEYS, source=source)
            if key in fields:
                raise SemanticError(f"plan {name}: repeated {key}", k.line, k.col, "semantic.bad-plan",
                                    source=source)
            fields[key] = v
        if ":body" not in fields:
            raise SemanticError(f"plan {name} has no :body", form.line, form.col, "semantic.bad-plan",
                                source=source)
        body_node = fields[":body"]
        if not isinstance(body_node, SList) or not body_node.items:
            raise SemanticError(f"plan {name} has an empty body", form.line, form.col, "semantic.bad-plan",
                                source=source)
        try:
            utility = float(_sym(fields.get(":utility", Sym("0", form.line, form.col)), "a number", source))
        except ValueError:
            raise SemanticError(f"plan {name}: utility is not a number", form.line, form.col,
                                "semantic.bad-plan", source=source) from None
        if utility != utility or utility in (float("inf"), float("-inf")):
            raise SemanticError(f"plan {name}: utility must be finite", form.line, form.col,
                                "semantic.bad-plan", source=source)
        effects_node = fields.get(":effects")
        effects = () if effects_node is None else tuple(
            pattern_from_sexpr(n, source) for n in (effects_node.items if isinstance(effects_node, SList) else ()))
        empty = SList((), form.line, form.col)
        plans.append(PlanSpec(
            name=name,
            goal=_sym(fields[":goal"], "a goal label", source) if ":goal" in fields else name,
            precondition=conjunction_from_sexpr(fields.get(":precondition", empty), source),
            context=conjunction_from_sexpr(fields.get(":context", empty), source),
            body=tuple(_step(n, source) for n in body_node.items),
            utility=utility, effects=effects, line=form.line))
    return plans


def parse_facts(text: str, source: str | None = None) -> tuple[dict[str, int], list[tuple[str, tuple]]]:
    preds: dict[str, int] = {}
    facts: list[tuple[str, tuple]] = []
    for form in read_all(text, source):
        head = form.head()
        if head == "predicates":
            for decl in form.items[1:]:
                pat = pattern_from_sexpr(decl, source)
                if pat.predicate in preds and preds[pat.predicate] != len(pat.args):
                    raise SemanticError(f"predicate {pat.predicate} declared with two arities", decl.line,
                                        decl.col, "semantic.duplicate-predicate", source=source)
                preds[pat.predicate] = len(pat.args)
        elif head == "init":
            for node in form.items[1:]:
                pat = pattern_from_sexpr(node, source)
                if not pat.is_ground():
                    raise SemanticError(f"initial fact {pat} is not ground", node.line, node.col,
                                        "semantic.non-ground", source=source)
                facts.append((pat.predicate, pat.args))
        else:
            raise SemanticError("expected (predicates ...) or (init ...)", form.line, form.col,
                                "semantic.bad-facts", expected=("predicates", "init"), source=source)
    return preds, facts


def load_mission_package(files: str | Path | Sequence[str | Path],
                         builtin_predicates: dict[str, int] | None = None) -> MissionPackage:
    """Load and validate a mission package from a directory or explicit file list."""
    if isinstance(files, (str, Path)) and Path(files).is_dir():
        paths = sorted(p for p in Path(files).iterdir() if p.suffix in (".plans", ".rules", ".facts"))
    else:
        paths = [Path(files)] if isinstance(files, (str, Path)) else [Path(f) for f in files]
    plans: list[PlanSpec] = []
    rules: list[Rule] = []
    facts: list[tuple[str, tuple]] = []
    preds: dict[str, int] = {**COORDINATOR_PREDICATES, **(builtin_predicates or {})}
    plan_src: dict[str, tuple[str, int | None]] = {}
    for path in paths:
        text = path.read_text(encoding="utf-8")
        src = str(path)
        if path.suffix == ".plans":
            for p in parse_plans(text, src):
                if p.name in plan_src:
                    raise MissionPackageError(f"{src}:{p.line}: duplicate plan name {p.name!r} "
                                              f"(first defined at {plan_src[p.name][0]}:{plan_src[p.name][1]})")
                plan_src[p.name] = (src, p.line)
                plans.append(p)
        elif path.suffix == ".rules":
            rules.extend(parse_rules(text, src))
        elif path.suffix == ".facts":
            d, f = parse_facts(text, src)
            for k, n in d.items():
                if preds.get(k, n) != n:
                    raise MissionPackageError(f"{src}: predicate {k} redeclared with arity {n}")
                preds[k] = n
            facts.extend(f)
        else:
            raise MissionPackageError(f"{src}: unknown mission-package file type {path.suffix!r}")
    if not plans:
        raise MissionPackageError("a mission package needs at least one plan")
    pkg = MissionPackage(tuple(plans), tuple(facts), tuple(rules), preds)
    validate_package(pkg, plan_src)
    return pkg


def validate_package(pkg: MissionPackage, where: dict | None = None) -> None:
    where = where or {}
    preds = pkg.predicates

    def check(pat: Pattern, ctx: str) -> None:
        if pat.predicate not in preds:
            raise MissionPackageError(f"{ctx}: undeclared predicate {pat.predicate!r}")
        if preds[pat.predicate] != len(pat.args):
            raise MissionPackageError(f"{ctx}: {pat.predicate} takes {preds[pat.predicate]} arguments, "
                                      f"got {len(pat.args)}")

    names = set()
    for p in pkg.plans:
        if p.name in names:
            raise MissionPackageError(f"duplicate plan name {p.name!r}")
        names.add(p.name)
        src, line = where.get(p.name, ("<package>", p.line))
        for pat, part in p.patterns():
            check(pat, f"{src}:{line}: plan {p.name} {part}")
        bound = set().union(*(q.variables() for q in p.precondition)) if p.precondition else set()
        for pat, part in p.patterns():
            if part in ("precondition", "wait-for"):
                bound |= pat.variables()
                continue
            loose = pat.variables() - bound
            if loose:
                raise MissionPackageError(f"{src}:{line}: plan {p.name} {part} uses unbound {sorted(loose)}")
    for r in pkg.rules:
        for pat in r.body + (r.head,):
            check(pat, f"rule {r.name}")
    for pred, args in pkg.facts:
        check(Pattern(pred, args), "initial knowledge")


# ---------------------------------------------------------------- selection

def match_all(ks_or_facts, patterns: Sequence[Pattern], binding: dict | None = None) -> dict | None:
    """First binding (in knowledge order) satisfying every pattern, or None."""
    query = ks_or_facts.query

    def rec(i: int, b: dict):
        if i == len(patterns):
            return b
        for f in query(patterns[i].substitute(b)):
            nb = patterns[i].match(f.args, b)
            if nb is not None:
                out = rec(i + 1, nb)
                if out is not None:
                    return out
        return None

    return rec(0, dict(binding or {}))


def applicable_plans(pkg: MissionPackage, beliefs) -> list[tuple[PlanSpec, dict]]:
    """Plans whose preconditions hold, by utility (descending) then declaration order."""
    out = []
    for order, plan in enumerate(pkg.plans):
        b = match_all(beliefs, plan.precondition)
        if b is not None:
            out.append((-plan.utility, order, plan, b))
    out.sort(key=lambda t: (t[0], t[1]))
    return [(p, b) for _, _, p, b in out]


@dataclass(frozen=True)
class IssuedCommand:
    kind: str
    args: tuple
    plan: str
    step: int
    tick: int
    data: Any = None

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "args": list(self.args), "plan": self.plan, "step": self.step, "tick": self.tick}
        if self.data is not None:
            d["data"] = self.data
        return d


PayloadBuilder = Callable[[str, "Coordinator", Intention], Any]


class Coordinator:
    """Single-intention BDI executor with suspension.

    ``bus`` carries service requests; ``on_command`` receives every emitted
    command; ``on_event`` receives ``(kind, payload)`` transition records.
    """

    def __init__(self, package: MissionPackage, ks: KnowledgeStore, bus: Bus | None = None, *,
                 on_command: Callable[[IssuedCommand], None] | None = None,
                 on_event: Callable[[str, dict], None] | None = None,
                 payload_builders: dict[str, PayloadBuilder] | None = None,
                 result_hooks: dict[str, Callable[[str, Any, "Coordinator"], None]] | None = None,
                 request_timeout: int = 200, name: str = "atc"):
        self.package = package
        self.ks = ks
        self.bus = bus
        self.name = name
        self.on_command = on_command
        self.on_event = on_event
        self.payload_builders = dict(payload_builders or {})
        self.result_hooks = dict(result_hooks or {})
        self.request_timeout = request_timeout
        self.stack: list[Intention] = []
        self.achieved: set[str] = set()
        self.failed: set[tuple] = set()
        self.history: list[tuple[int, str, str]] = []
        self.tick = 0

    # ---- bookkeeping
    @property
    def active(self) -> Intention | None:
        if self.stack and self.stack[-1].status in (ACTIVE, WAITING):
            return self.stack[-1]
        return None

    def _event(self, kind: str, it: Intention, **extra) -> None:
        self.history.append((self.tick, it.name, it.status))
        if self.on_event is not None:
            payload = it.to_dict()
            payload.update(extra)
            self.on_event(kind, payload)

    def _tell(self, pred: str, *args) -> None:
        self.ks.assert_fact(Fact(pred, tuple(args), max(self.tick, self.ks.tick), COORDINATOR))

    def _candidate(self) -> tuple[PlanSpec, dict] | None:
        intended = {i.plan.goal for i in self.stack} | {i.name for i in self.stack}
        for plan, b in applicable_plans(self.package, self.ks):
            if plan.goal in self.achieved or plan.goal in intended or plan.name in intended:
                continue
            if (plan.name, _freeze(b)) in self.failed:
                continue
            return plan, b
        return None

    def _adopt(self, plan: PlanSpec, b: dict) -> None:
        cur = self.active
        if cur is not None:
            cur.status = SUSPENDED
            self._event("intention", cur, reason=f"preempted by {plan.name}")
        it = Intention(plan, b)
        self.stack.append(it)
        self._event("intention", it, reason="adopted")

    def _fail(self, it: Intention, reason: str) -> None:
        it.status = FAILED
        it.reason = reason
        self.failed.add((it.name, _freeze(it.bindings)))
        self.stack.remove(it)
        self._tell("plan-failed", it.name, reason)
        self._event("intention", it, reason=reason)

    def _succeed(self, it: Intention) -> None:
        it.status = SUCCEEDED
        for pat in it.plan.effects:
            p = pat.substitute(it.bindings)
            self._tell(p.predicate, *p.args)
        self.achieved.add(it.plan.goal)
        self.stack.remove(it)
        self._event("intention", it, reason="completed")

    # ---- one deliberation cycle
    def step(self, tick: int | None = None) -> list[IssuedCommand]:
        if tick is not None:
            self.tick = tick
        self.ks.infer(self.package.rules)
        out: list[IssuedCommand] = []
        cur = self.active
        if cur is not None and match_all(self.ks, cur.plan.context, cur.bindings) is None:
            self._fail(cur, "context-violated")
        cand = self._candidate()
        cur = self.active
        if cur is None:
            while self.stack and self.active is None:
                top = self.stack[-1]
                if cand is not None and cand[0].utility > top.plan.utility:
                    break
                if match_all(self.ks, top.plan.context, top.bindings) is None:
                    self._fail(top, "context-violated")
                    continue
                top.status = WAITING if top.pending is not None else ACTIVE
                self._event("intention", top, reason="resumed")
            if self.active is None and cand is not None:
                self._adopt(*cand)
        elif cand is not None and cand[0].utility > cur.plan.utility:
            self._adopt(*cand)
        cur = self.active
        if cur is not None and cur.status == ACTIVE:
            self._execute(cur, out)
        return out

    def _emit(self, it: Intention, step: Step, idx: int, out: list | None) -> IssuedCommand:
        args = step.bind(it.bindings)
        kind, params = str(args[0]), tuple(args[1:])
        data = None
        art = self.ks.artifacts.get(str(params[0])) if params else None
        if kind == "fly-path" and isinstance(art, dict):
            data = {"waypoints": art.get("waypoints", [])}
        elif kind == "fly-baseline" and isinstance(art, dict):
            # the fallback coverage needs the area and what has been mapped so far
            data = {"area": art.get("area"),
                    "map": None if self.ks.map is None else self.ks.map.to_dict()}
        cmd = IssuedCommand(kind, params, it.name, idx, self.tick, data)
        if out is not None:
            out.append(cmd)
        if self.on_command is not None:
            self.on_command(cmd)
        return cmd

    def _execute(self, it: Intention, out: list) -> None:
        idx = it.pc
        step = it.plan.body[idx]
        if step.kind == "command":
            self._emit(it, step, idx, out)
            it.pc += 1
        elif step.kind == "assert":
            p = step.pattern.substitute(it.bindings)
            self._tell(p.predicate, *p.args)
            it.pc += 1
        elif step.kind == "wait-for":
            b = match_all(self.ks, (step.pattern,), it.bindings)
            if b is None:
                return
            it.bindings = b
            it.pc += 1
        else:
            self._request(it, step, idx)
            return
        if it.pc >= len(it.plan.body):
            self._succeed(it)

    def _request(self, it: Intention, step: Step, idx: int) -> None:
        label = str(step.bind(it.bindings)[0])
        if self.bus is None:
            self._request_failed(it, step, idx, "no-bus")
            return
        builder = self.payload_builders.get(step.service)
        payload = builder(label, self, it) if builder else {"label": label, "snapshot": self.ks.snapshot().to_dict()}
        it.status = WAITING
        self._event("intention", it, reason=f"waiting for {step.service}", label=label)

        def on_response(env: Envelope) -> None:
            it.pending = None
            try:
                result = response_result(env)
            except Exception as exc:  # timeout, fault, unknown service
                self._request_failed(it, step, idx, _reason(exc))
                return
            status = result.get("status", "ok") if isinstance(result, dict) else "ok"
            if status not in ("ok", "solved"):
                self._request_failed(it, step, idx, str(status))
                return
            self.ks.artifacts[label] = result
            hook = self.result_hooks.get(step.service)
            if hook is not None:
                hook(label, result, self)
            self._tell("artifact-ready", label)
            it.pc += 1
            if it.status == WAITING:
                it.status = ACTIVE
            if it.pc >= len(it.plan.body) and it in self.stack:
                self._succeed(it)

        it.pending = self.bus.request(step.service, payload, sender=self.name, timeout=self.request_timeout,
                                      callback=on_response)

    def _request_failed(self, it: Intention, step: Step, idx: int, reason: str) -> None:
        self._tell("request-failed", step.service, reason)
        if it in self.stack:
            self._fail(it, reason)
        if step.on_failure is not None:
            fb = step.on_failure
            if fb.kind == "command":
                self._emit(it, fb, idx, None)
            elif fb.kind == "assert":
                p = fb.pattern.substitute(it.bindings)
                self._tell(p.predicate, *p.args)


def _reason(exc: Exception) -> str:
    name = type(exc).__name__
    return {"RequestTimeout": "timeout", "HandlerFault": "fault", "NoSuchServiceError": "no-such-service"}.get(
        name, name)


def _freeze(b: dict) -> tuple:
    return tuple(sorted((k, repr(v)) for k, v in b.items()))


def bdi_step(coordinator: Coordinator, tick: int | None = None) -> list[IssuedCommand]:
    return coordinator.step(tick)
