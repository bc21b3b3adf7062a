"""Reader for the typed-STRIPS PDDL subset (grammar: ``docs/grammar.md``)."""
from __future__ import annotations

from .model import ActionSchema, Atom, Domain, Literal, PredicateSchema, Problem
from .sexpr import Node, ParseError, SemanticError, SList, Sym, read_one

_DOMAIN_SECTIONS = frozenset({":requirements", ":types", ":constants", ":predicates", ":action"})
_PROBLEM_SECTIONS = frozenset({":domain", ":requirements", ":objects", ":init", ":goal"})
_ACTION_KEYS = frozenset({":parameters", ":precondition", ":effect", "(:action-cost"})
_UNSUPPORTED = frozenset({"or", "imply", "forall", "exists", "when", "increase", "decrease", "="})


class _Ctx:
    def __init__(self, source: str | None):
        self.source = source

    def syntax(self, msg: str, node: Node, code: str, expected=()) -> ParseError:
        return ParseError(msg, node.line, node.col, code, frozenset(expected), self.source)

    def semantic(self, msg: str, node: Node, code: str) -> SemanticError:
        return SemanticError(msg, node.line, node.col, code, source=self.source)


def _sym(ctx: _Ctx, node: Node, what: str) -> str:
    if not isinstance(node, Sym):
        raise ctx.syntax(f"expected {what}, found a list", node, "syntax.expected-symbol", {what})
    return node.value.lower()


def _list(ctx: _Ctx, node: Node, what: str) -> SList:
    if not isinstance(node, SList):
        raise ctx.syntax(f"expected {what}, found {node.value!r}", node, "syntax.expected-list", {"("})
    return node


def _header(ctx: _Ctx, root: SList, kind: str) -> tuple[str, list[Node]]:
    if root.head() != "define":
        raise ctx.syntax("file must start with (define ...)", root, "syntax.expected-define", {"define"})
    if len(root) < 2:
        raise ctx.syntax(f"missing ({kind} NAME)", root, "syntax.expected-header", {f"({kind}"})
    hdr = _list(ctx, root[1], f"({kind} NAME)")
    if hdr.head() != kind or len(hdr) != 2:
        raise ctx.syntax(f"expected ({kind} NAME)", hdr, "syntax.expected-header", {kind})
    return _sym(ctx, hdr[1], "name"), list(root.items[2:])


def _typed_list(ctx: _Ctx, items, variables: bool) -> list[tuple[str, str, Node]]:
    """``a b - t c`` → [(a, t), (b, t), (c, object)] keeping nodes for diagnostics."""
    out: list[tuple[str, str, Node]] = []
    pending: list[tuple[str, Node]] = []
    it = list(items)
    i = 0
    while i < len(it):
        node = it[i]
        name = _sym(ctx, node, "variable" if variables else "name")
        if name == "-":
            if not pending or i + 1 >= len(it):
                raise ctx.syntax("dangling '-' in typed list", node, "syntax.typed-list", {"name"})
            tname = _sym(ctx, it[i + 1], "type name")
            out.extend((n, tname, nd) for n, nd in pending)
            pending = []
            i += 2
            continue
        if variables and not name.startswith("?"):
            raise ctx.syntax(f"expected a ?variable, found {name!r}", node, "syntax.expected-variable", {"?var"})
        if not variables and name.startswith("?"):
            raise ctx.syntax(f"unexpected variable {name!r}", node, "syntax.unexpected-variable", {"name"})
        pending.append((name, node))
        i += 1
    out.extend((n, "object", nd) for n, nd in pending)
    return out


def _atom(ctx: _Ctx, node: Node) -> tuple[Atom, SList]:
    lst = _list(ctx, node, "an atom")
    if not lst.items:
        raise ctx.syntax("empty atom", lst, "syntax.empty-atom", {"predicate"})
    name = _sym(ctx, lst[0], "predicate name")
    if name in _UNSUPPORTED or name in ("and", "not"):
        raise ctx.semantic(f"{name!r} is not allowed here", lst, "semantic.unsupported-formula")
    return Atom(name, tuple(_sym(ctx, a, "argument") for a in lst.items[1:])), lst


def _literal(ctx: _Ctx, node: Node) -> tuple[Literal, SList]:
    lst = _list(ctx, node, "a literal")
    if lst.head() == "not":
        if len(lst) != 2:
            raise ctx.syntax("(not ...) takes exactly one atom", lst, "syntax.not-arity")
        atom, anode = _atom(ctx, lst[1])
        return Literal(atom, False), anode
    atom, anode = _atom(ctx, lst)
    return Literal(atom, True), anode


def _conjunction(ctx: _Ctx, node: Node) -> list[tuple[Literal, SList]]:
    lst = _list(ctx, node, "a formula")
    head = lst.head()
    if not lst.items:
        return []
    if head in _UNSUPPORTED:
        raise ctx.semantic(f"{head!r} formulas are outside the supported STRIPS subset", lst,
                           "semantic.unsupported-formula")
    if head == "and":
        out = []
        for item in lst.items[1:]:
            sub = _list(ctx, item, "a literal")
            if sub.head() == "and":
                out.extend(_conjunction(ctx, sub))
            else:
                out.append(_literal(ctx, sub))
        return out
    return [_literal(ctx, lst)]


def _check_atom(ctx: _Ctx, atom: Atom, node: SList, preds: dict[str, PredicateSchema],
                arg_types: dict[str, str], unknown_code: str) -> None:
    schema = preds.get(atom.predicate)
    if schema is None:
        raise ctx.semantic(f"undeclared predicate {atom.predicate!r}", node, "semantic.undeclared-predicate")
    if schema.arity != len(atom.args):
        raise ctx.semantic(f"{atom.predicate} takes {schema.arity} argument(s), got {len(atom.args)}",
                           node, "semantic.arity-mismatch")
    for arg, (_, ptype), anode in zip(atom.args, schema.params, node.items[1:]):
        t = arg_types.get(arg)
        if t is None:
            what = "variable" if arg.startswith("?") else "object"
            code = "semantic.undeclared-variable" if arg.startswith("?") else unknown_code
            raise ctx.semantic(f"undeclared {what} {arg!r}", anode, code)
        if ptype != "object" and t != ptype:
            raise ctx.semantic(f"{arg!r} has type {t}, {atom.predicate} expects {ptype}", anode,
                               "semantic.type-mismatch")


def parse_domain(text: str | bytes, source: str | None = None) -> Domain:
    ctx = _Ctx(source)
    root = read_one(text, source)
    name, sections = _header(ctx, root, "domain")
    requirements: list[str] = []
    types: list[str] = []
    constants: list[tuple[str, str, Node]] = []
    predicates: dict[str, PredicateSchema] = {}
    raw_actions: list[SList] = []
    for sec in sections:
        sec = _list(ctx, sec, "a domain section")
        head = sec.head()
        if head not in _DOMAIN_SECTIONS:
            raise ctx.syntax(f"unknown domain section {head!r}", sec, "syntax.unknown-section", _DOMAIN_SECTIONS)
        body = sec.items[1:]
        if head == ":requirements":
            requirements.extend(_sym(ctx, r, "requirement") for r in body)
        elif head == ":types":
            for tname, parent, tnode in _typed_list(ctx, body, variables=False):
                if parent != "object":
                    raise ctx.semantic("only a flat type list is supported", tnode, "semantic.type-hierarchy")
                if tname in types:
                    raise ctx.semantic(f"duplicate type {tname!r}", tnode, "semantic.duplicate-type")
                types.append(tname)
        elif head == ":constants":
            constants.extend(_typed_list(ctx, body, variables=False))
        elif head == ":predicates":
            for pnode in body:
                plist = _list(ctx, pnode, "a predicate declaration")
                if not plist.items:
                    raise ctx.syntax("empty predicate declaration", plist, "syntax.empty-atom")
                pname = _sym(ctx, plist[0], "predicate name")
                if pname in predicates:
                    raise ctx.semantic(f"duplicate predicate {pname!r}", plist, "semantic.duplicate-predicate")
                params = _typed_list(ctx, plist.items[1:], variables=True)
                predicates[pname] = PredicateSchema(pname, tuple((v, t) for v, t, _ in params))
                for _, t, tnode in params:
                    if t != "object" and t not in types:
                        raise ctx.semantic(f"undeclared type {t!r}", tnode, "semantic.undeclared-type")
        else:
            raw_actions.append(sec)

    const_types: dict[str, str] = {}
    for cname, ctype, cnode in constants:
        if ctype != "object" and ctype not in types:
            raise ctx.semantic(f"undeclared type {ctype!r}", cnode, "semantic.undeclared-type")
        if cname in const_types:
            raise ctx.semantic(f"duplicate constant {cname!r}", cnode, "semantic.duplicate-constant")
        const_types[cname] = ctype

    actions: list[ActionSchema] = []
    neg_checks: list[tuple[Literal, SList]] = []
    for sec in raw_actions:
        act, negs = _parse_action(ctx, sec, types, predicates, const_types)
        if any(a.name == act.name for a in actions):
            raise ctx.semantic(f"duplicate action {act.name!r}", sec, "semantic.duplicate-action")
        actions.append(act)
        neg_checks.extend(negs)

    fluents = frozenset(a.predicate for act in actions for a in act.add + act.delete)
    for lit, lnode in neg_checks:
        if lit.atom.predicate in fluents:
            raise ctx.semantic(f"negative precondition on fluent predicate {lit.atom.predicate!r} is unsupported",
                               lnode, "semantic.unsupported-negation")

    return Domain(name, tuple(requirements), tuple(types),
                  tuple((c, t) for c, t, _ in constants), tuple(predicates.values()), tuple(actions))


def _parse_action(ctx: _Ctx, sec: SList, types, predicates, const_types):
    if len(sec) < 2:
        raise ctx.syntax("action needs a name", sec, "syntax.expected-symbol", {"name"})
    aname = _sym(ctx, sec[1], "action name")
    params: list[tuple[str, str, Node]] = []
    pre: list[tuple[Literal, SList]] = []
    eff: list[tuple[Literal, SList]] = []
    cost = 1
    items = list(sec.items[2:])
    i = 0
    while i < len(items):
        node = items[i]
        if isinstance(node, SList):
            if node.head() != ":action-cost":
                raise ctx.syntax("unexpected list in action body", node, "syntax.unknown-keyword", _ACTION_KEYS)
            if len(node) != 2:
                raise ctx.syntax("(:action-cost n) takes one integer", node, "syntax.expected-integer", {"integer"})
            raw = _sym(ctx, node[1], "integer")
            try:
                cost = int(raw)
            except ValueError:
                raise ctx.syntax(f"action cost {raw!r} is not an integer", node[1],
                                 "syntax.expected-integer", {"integer"}) from None
            if cost < 0:
                raise ctx.semantic("action cost must be non-negative", node[1], "semantic.bad-cost")
            i += 1
            continue
        key = node.value.lower()
        if key not in (":parameters", ":precondition", ":effect"):
            raise ctx.syntax(f"unknown action keyword {key!r}", node, "syntax.unknown-keyword", _ACTION_KEYS)
        if i + 1 >= len(items):
            raise ctx.syntax(f"{key} needs a value", node, "syntax.missing-value", {"("})
        value = items[i + 1]
        if key == ":parameters":
            params = _typed_list(ctx, _list(ctx, value, "parameter list").items, variables=True)
        elif key == ":precondition":
            pre = _conjunction(ctx, value)
        else:
            eff = _conjunction(ctx, value)
        i += 2

    arg_types: dict[str, str] = dict(const_types)
    for v, t, vnode in params:
        if t != "object" and t not in types:
            raise ctx.semantic(f"undeclared type {t!r}", vnode, "semantic.undeclared-type")
        if v in arg_types:
            raise ctx.semantic(f"duplicate parameter {v!r}", vnode, "semantic.duplicate-parameter")
        arg_types[v] = t
    for lit, lnode in pre + eff:
        _check_atom(ctx, lit.atom, lnode, predicates, arg_types, "semantic.undeclared-constant")
    negs = [(lit, lnode) for lit, lnode in pre if not lit.positive]
    add = tuple(l.atom for l, _ in eff if l.positive)
    delete = tuple(l.atom for l, _ in eff if not l.positive)
    return ActionSchema(aname, tuple((v, t) for v, t, _ in params), tuple(l for l, _ in pre),
                        add, delete, cost), negs


def parse_problem(text: str | bytes, domain: Domain, source: str | None = None) -> Problem:
    ctx = _Ctx(source)
    root = read_one(text, source)
    name, sections = _header(ctx, root, "problem")
    dname = None
    objects: list[tuple[str, str, Node]] = []
    init_nodes: list[Node] = []
    goal_node: Node | None = None
    for sec in sections:
        sec = _list(ctx, sec, "a problem section")
        head = sec.head()
        if head not in _PROBLEM_SECTIONS:
            raise ctx.syntax(f"unknown problem section {head!r}", sec, "syntax.unknown-section", _PROBLEM_SECTIONS)
        if head == ":domain":
            if len(sec) != 2:
                raise ctx.syntax("expected (:domain NAME)", sec, "syntax.expected-header", {"name"})
            dname = _sym(ctx, sec[1], "domain name")
            if dname != domain.name:
                raise ctx.semantic(f"problem is for domain {dname!r}, not {domain.name!r}", sec,
                                   "semantic.domain-mismatch")
        elif head == ":objects":
            objects.extend(_typed_list(ctx, sec.items[1:], variables=False))
        elif head == ":init":
            init_nodes.extend(sec.items[1:])
        elif head == ":goal":
            if len(sec) != 2:
                raise ctx.syntax("expected (:goal FORMULA)", sec, "syntax.missing-value", {"("})
            goal_node = sec[1]
    if dname is None:
        raise ctx.syntax("missing (:domain NAME)", root, "syntax.missing-section", {"(:domain"})
    if goal_node is None:
        raise ctx.syntax("missing (:goal ...)", root, "syntax.missing-section", {"(:goal"})

    arg_types = dict(domain.constants)
    for oname, otype, onode in objects:
        if otype != "object" and otype not in domain.types:
            raise ctx.semantic(f"undeclared type {otype!r}", onode, "semantic.undeclared-type")
        if oname in arg_types:
            raise ctx.semantic(f"duplicate object {oname!r}", onode, "semantic.duplicate-object")
        arg_types[oname] = otype
    preds = {p.name: p for p in domain.predicates}

    init: set[Atom] = set()
    for node in init_nodes:
        atom, anode = _atom(ctx, node)
        _check_ground(ctx, atom, anode)
        _check_atom(ctx, atom, anode, preds, arg_types, "semantic.undeclared-object")
        init.add(atom)

    goal = _conjunction(ctx, goal_node)
    fluents = domain.fluent_predicates()
    for lit, lnode in goal:
        _check_ground(ctx, lit.atom, lnode)
        _check_atom(ctx, lit.atom, lnode, preds, arg_types, "semantic.undeclared-object")
        if not lit.positive and lit.atom.predicate in fluents:
            raise ctx.semantic("negative goals on fluent predicates are unsupported", lnode,
                               "semantic.unsupported-negation")
    return Problem(name, dname, tuple((o, t) for o, t, _ in objects), frozenset(init),
                   tuple(dict.fromkeys(l for l, _ in goal)))


def _check_ground(ctx: _Ctx, atom: Atom, node: SList) -> None:
    for arg, anode in zip(atom.args, node.items[1:]):
        if arg.startswith("?"):
            raise ctx.semantic(f"variable {arg!r} in a ground atom", anode, "semantic.non-ground")
