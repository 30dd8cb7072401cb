"""Parser, linter and pretty-printer for the domain and evidence file formats.

Both formats are keyword-block UTF-8 text with s-expression proposition
literals and ``;`` comments. The parser recovers from errors and reports
everything it finds; it must survive arbitrary byte soup, so every failure
path records a diagnostic instead of raising. ``docs/grammar.md`` carries the
full grammar.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ParseFailure
from .evidence import EvidenceSet, Frame, MassFunction, _canonical
from .model import (
    CHOOSE_ONE,
    DO_ALL,
    PLANFAIL_BACKTRACK,
    PLANFAIL_REJECT_BRANCH,
    CausalRule,
    CompatibilityRelation,
    PlotEntry,
    ProbabilityRule,
    Proposition,
    ReductionOperator,
)
from .planner import ReviewPolicy

TOP_KEYWORDS = {"levels", "goal", "review", "coverage", "compat", "rule", "operator"}
SLOT_KEYWORDS = {
    "level", "necessary", "satisfiable", "plot", "probability",
    "when", "default", "postconditions", "planfail",
}
EVIDENCE_KEYWORDS = {"frame", "mass"}
RESERVED = TOP_KEYWORDS | SLOT_KEYWORDS | EVIDENCE_KEYWORDS | {
    "not", "assert", "retract", "=>", "->", "recover", "rho",
    "choose-one", "do-all", "if", "then",
}

MAX_PROP_DEPTH = 64
MAX_ERRORS = 200


@dataclass(frozen=True)
class ParseError:
    file: str
    line: int
    column: int
    message: str
    token: str = ""

    def __str__(self):
        return f"{self.file}:{self.line}:{self.column}: {self.message}"


@dataclass(frozen=True)
class Diagnostic:
    """A lint finding; ``severity`` is 'error' or 'warning'."""

    severity: str
    message: str

    def __str__(self):
        return f"{self.severity}: {self.message}"


@dataclass(frozen=True)
class DomainSpec:
    """A parsed planning domain."""

    n_levels: int
    operators: tuple
    causal_rules: tuple = ()
    compat: tuple = ()
    goal: str = ""
    goal_fulfilment: float = 1000.0
    review: ReviewPolicy = field(default_factory=ReviewPolicy)
    coverage_threshold: tuple = (0.0, 0.0)

    def operator(self, name: str) -> ReductionOperator:
        for op in self.operators:
            if op.name == name:
                return op
        raise KeyError(name)

    def has_operator(self, name: str) -> bool:
        return any(op.name == name for op in self.operators)


# --- tokenizer -------------------------------------------------------------

_SPECIALS = "(){}@="
_IDENT_EXTRA = "_-?.+/'*<!&%$#~^|\\"


@dataclass(frozen=True)
class _Token:
    kind: str  # lparen rparen lbrace rbrace at equals arrow darrow ident number eof
    text: str
    value: float | None
    line: int
    column: int


def _tokenize(text: str, filename: str, errors: list) -> list:
    tokens = []
    line, col = 1, 1
    i, n = 0, len(text)
    bad_run_start = None

    def flush_bad(end_line, end_col):
        nonlocal bad_run_start
        if bad_run_start and len(errors) < MAX_ERRORS:
            errors.append(ParseError(filename, bad_run_start[0], bad_run_start[1],
                                     "unexpected characters", bad_run_start[2]))
        bad_run_start = None

    while i < n:
        c = text[i]
        if c == "\n":
            flush_bad(line, col)
            line += 1
            col = 1
            i += 1
            continue
        if c.isspace():
            flush_bad(line, col)
            i += 1
            col += 1
            continue
        if c == ";":
            flush_bad(line, col)
            while i < n and text[i] != "\n":
                i += 1
            continue
        if text.startswith("=>", i):
            flush_bad(line, col)
            tokens.append(_Token("darrow", "=>", None, line, col))
            i += 2
            col += 2
            continue
        if text.startswith("->", i):
            flush_bad(line, col)
            tokens.append(_Token("arrow", "->", None, line, col))
            i += 2
            col += 2
            continue
        if c in _SPECIALS:
            flush_bad(line, col)
            kind = {"(": "lparen", ")": "rparen", "{": "lbrace",
                    "}": "rbrace", "@": "at", "=": "equals"}[c]
            tokens.append(_Token(kind, c, None, line, col))
            i += 1
            col += 1
            continue
        if c.isalnum() or c in _IDENT_EXTRA:
            flush_bad(line, col)
            start, start_col = i, col
            while i < n:
                ch = text[i]
                if not (ch.isalnum() or ch in _IDENT_EXTRA):
                    break
                if ch == "-" and text.startswith("->", i):
                    break
                i += 1
                col += 1
            word = text[start:i]
            try:
                value = float(word)
                tokens.append(_Token("number", word, value, line, start_col))
            except ValueError:
                tokens.append(_Token("ident", word, None, line, start_col))
            continue
        # Unclassifiable character: fold runs into a single diagnostic.
        if bad_run_start is None:
            bad_run_start = (line, col, c)
        i += 1
        col += 1
    flush_bad(line, col)
    tokens.append(_Token("eof", "", None, line, col))
    return tokens


# --- parser core ------------------------------------------------------------

class _Parser:
    def __init__(self, text: str, filename: str):
        self.filename = filename
        self.errors: list = []
        self.tokens = _tokenize(text, filename, self.errors)
        self.pos = 0

    def peek(self, ahead: int = 0) -> _Token:
        idx = min(self.pos + ahead, len(self.tokens) - 1)
        return self.tokens[idx]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        if self.pos < len(self.tokens) - 1:
            self.pos += 1
        return tok

    def at_keyword(self, words) -> bool:
        tok = self.peek()
        return tok.kind == "ident" and tok.text in words

    def error(self, message: str, tok: _Token | None = None):
        tok = tok or self.peek()
        if len(self.errors) < MAX_ERRORS:
            self.errors.append(
                ParseError(self.filename, tok.line, tok.column, message, tok.text)
            )

    def skip_to(self, keywords):
        """Error recovery: drop tokens until a statement keyword or EOF."""
        while self.peek().kind != "eof" and not self.at_keyword(keywords):
            self.advance()

    def expect_ident(self, what: str) -> str | None:
        tok = self.peek()
        if tok.kind == "ident" and tok.text not in RESERVED:
            self.advance()
            return tok.text
        self.error(f"expected {what}", tok)
        return None

    def expect_number(self, what: str) -> float | None:
        tok = self.peek()
        if tok.kind == "number":
            self.advance()
            return tok.value
        self.error(f"expected {what}", tok)
        return None

    def expect_int(self, what: str) -> int | None:
        value = self.expect_number(what)
        if value is None:
            return None
        if value != int(value):
            self.error(f"{what} must be an integer")
            return None
        return int(value)

    def parse_proposition(self, depth: int = 0) -> Proposition | None:
        tok = self.peek()
        if tok.kind != "lparen":
            self.error("expected '(' starting a proposition", tok)
            return None
        if depth > MAX_PROP_DEPTH:
            self.error("proposition nested too deeply", tok)
            self.advance()
            return None
        self.advance()
        head = self.peek()
        if head.kind == "ident" and head.text == "not":
            self.advance()
            inner = self.parse_proposition(depth + 1)
            if self.peek().kind == "rparen":
                self.advance()
            else:
                self.error("expected ')' closing (not ...)")
            return inner.negated() if inner else None
        if head.kind != "ident" or head.text in RESERVED:
            self.error("expected predicate name", head)
            while self.peek().kind not in ("rparen", "eof"):
                self.advance()
            if self.peek().kind == "rparen":
                self.advance()
            return None
        self.advance()
        args = []
        while self.peek().kind in ("ident", "number"):
            args.append(self.advance().text)
        if self.peek().kind == "rparen":
            self.advance()
        else:
            self.error("expected ')' closing proposition")
            return None
        return Proposition(head.text, tuple(args))

    def parse_level_suffix(self) -> int | None:
        """An optional '@ <int>' after a proposition."""
        if self.peek().kind == "at":
            self.advance()
            return self.expect_int("level index after '@'")
        return None

    def parse_prop_list(self, default_level: int | None):
        """Propositions with optional level suffixes, until a non-'(' token."""
        out = []
        while self.peek().kind == "lparen":
            prop = self.parse_proposition()
            level = self.parse_level_suffix()
            if prop is not None:
                out.append((prop, default_level if level is None else level))
        return out


# --- domain parsing ---------------------------------------------------------

def parse_domain(text: str, filename: str = "<domain>") -> DomainSpec:
    """Parse a domain file; raises :class:`ParseFailure` with every error found."""
    p = _Parser(text, filename)
    n_levels = None
    goal = None
    goal_fulfilment = 1000.0
    rho = 0.1
    coverage = (0.0, 0.0)
    compat = []
    rules = []
    operators = []
    op_locations = {}
    subgoal_refs = []   # (parent op, subgoal name, token) for resolution
    recover_refs = []   # (op name, recovery name, token)

    while p.peek().kind != "eof":
        if not p.at_keyword(TOP_KEYWORDS):
            p.error(f"expected a top-level keyword, found {p.peek().text!r}")
            p.advance()
            p.skip_to(TOP_KEYWORDS)
            continue
        keyword = p.advance().text
        if keyword == "levels":
            value = p.expect_int("level count after 'levels'")
            if value is not None:
                if value < 1:
                    p.error("level count must be >= 1")
                elif n_levels is not None:
                    p.error("duplicate levels declaration")
                else:
                    n_levels = value
        elif keyword == "goal":
            tok = p.peek()
            name = p.expect_ident("goal operator name")
            if name is not None:
                if goal is not None:
                    p.error("duplicate goal declaration", tok)
                else:
                    goal = (name, tok)
            if p.peek().kind == "number":
                goal_fulfilment = p.advance().value
                if goal_fulfilment < 0:
                    p.error("goal fulfilment must be >= 0")
                    goal_fulfilment = 1000.0
        elif keyword == "review":
            if p.at_keyword({"rho"}):
                p.advance()
            value = p.expect_number("offset fraction after 'review rho'")
            if value is not None:
                if value < 0:
                    p.error("review rho must be >= 0")
                else:
                    rho = value
        elif keyword == "coverage":
            s = p.expect_number("coverage support threshold")
            pl = p.expect_number("coverage plausibility threshold")
            if s is not None and pl is not None:
                coverage = (s, pl)
        elif keyword == "compat":
            rel = _parse_compat(p)
            if rel is not None:
                compat.append(rel)
        elif keyword == "rule":
            rule = _parse_rule(p)
            if rule is not None:
                rules.append(rule)
        elif keyword == "operator":
            op = _parse_operator(p, subgoal_refs, recover_refs)
            if op is not None:
                tok = op_locations.get(op.name)
                if tok is not None:
                    p.error(f"duplicate operator name {op.name!r}")
                else:
                    op_locations[op.name] = p.peek()
                    operators.append(op)

    # Resolution pass.
    if n_levels is None:
        p.error("missing levels declaration", p.peek())
        n_levels = 1
    if goal is None:
        p.error("missing goal declaration", p.peek())
    names = {op.name for op in operators}
    for parent, ref, tok in subgoal_refs:
        if ref not in names:
            p.error(f"plot of {parent!r} references undeclared operator {ref!r}", tok)
    for parent, ref, tok in recover_refs:
        if ref not in names:
            p.error(f"planfail of {parent!r} names undeclared operator {ref!r}", tok)
    if goal is not None:
        if goal[0] not in names:
            p.error(f"goal names undeclared operator {goal[0]!r}", goal[1])
        else:
            goal_op = next(op for op in operators if op.name == goal[0])
            if goal_op.abstraction_level != 1:
                p.error(f"goal operator {goal[0]!r} must be at abstraction level 1",
                        goal[1])
    for op in operators:
        if not 1 <= op.abstraction_level <= n_levels:
            p.error(f"operator {op.name!r} is at level {op.abstraction_level}, "
                    f"outside 1..{n_levels}")
        for pattern_set in (op.necessary, op.satisfiable, op.postconditions):
            for _, level in pattern_set:
                if not 1 <= level <= n_levels:
                    p.error(f"operator {op.name!r} uses level {level}, "
                            f"outside 1..{n_levels}")

    if p.errors:
        raise ParseFailure(p.errors)
    return DomainSpec(
        n_levels=n_levels,
        operators=tuple(operators),
        causal_rules=tuple(rules),
        compat=tuple(compat),
        goal=goal[0],
        goal_fulfilment=goal_fulfilment,
        review=ReviewPolicy(offset_fraction=rho),
        coverage_threshold=coverage,
    )


def _parse_compat(p: _Parser) -> CompatibilityRelation | None:
    if_prop = p.parse_proposition()
    if_level = p.parse_level_suffix()
    if if_level is None:
        p.error("compat antecedent needs an explicit '@ level'")
    if p.peek().kind == "darrow":
        p.advance()
    else:
        p.error("expected '=>' in compat relation")
        p.skip_to(TOP_KEYWORDS)
        return None
    then_prop = p.parse_proposition()
    then_level = p.parse_level_suffix()
    if then_level is None:
        p.error("compat consequent needs an explicit '@ level'")
    if None in (if_prop, if_level, then_prop, then_level):
        return None
    return CompatibilityRelation(if_level, if_prop, then_level, then_prop)


def _parse_rule(p: _Parser) -> CausalRule | None:
    name = ""
    if p.peek().kind == "ident" and not p.at_keyword({"when"}):
        got = p.expect_ident("rule name")
        name = got or ""
    if p.at_keyword({"when"}):
        p.advance()
    else:
        p.error("expected 'when' in rule")
        p.skip_to(TOP_KEYWORDS)
        return None
    retract_trigger = False
    if p.at_keyword({"retract"}):
        p.advance()
        retract_trigger = True
    trigger = p.parse_proposition()
    if trigger is None:
        p.skip_to(TOP_KEYWORDS)
        return None
    if retract_trigger:
        trigger = trigger.negated()
    conditions = []
    if p.at_keyword({"if"}):
        p.advance()
        conditions = p.parse_prop_list(default_level=None)
    if p.at_keyword({"then"}):
        p.advance()
    else:
        p.error("expected 'then' in rule")
        p.skip_to(TOP_KEYWORDS)
        return None
    effects = []
    while p.at_keyword({"assert", "retract"}):
        op = p.advance().text
        prop = p.parse_proposition()
        level = p.parse_level_suffix()
        if level is None:
            p.error("rule effects need an explicit '@ level'")
        if prop is not None and level is not None:
            effects.append((op, prop, level))
    if not effects:
        p.error("rule has no effects")
        return None
    return CausalRule(trigger, tuple(conditions), tuple(effects), name)


def _parse_operator(p: _Parser, subgoal_refs: list, recover_refs: list):
    name_tok = p.peek()
    name = p.expect_ident("operator name")
    if name is None:
        p.skip_to(TOP_KEYWORDS)
        return None
    level = None
    necessary = []
    satisfiable = []
    plot_mode = None
    plot_entries = []
    prob_rules = []
    prob_default_seen = False
    prob_block_seen = False
    postconditions = []
    planfail = PLANFAIL_BACKTRACK

    while p.at_keyword(SLOT_KEYWORDS):
        slot = p.advance().text
        if slot == "level":
            level = p.expect_int("abstraction level")
        elif slot == "necessary":
            necessary.extend(p.parse_prop_list(default_level=None))
        elif slot == "satisfiable":
            satisfiable.extend(p.parse_prop_list(default_level=None))
        elif slot == "plot":
            if p.at_keyword({"choose-one"}):
                p.advance()
                plot_mode = CHOOSE_ONE
            elif p.at_keyword({"do-all"}):
                p.advance()
                plot_mode = DO_ALL
            else:
                p.error("expected 'choose-one' or 'do-all' after 'plot'")
                plot_mode = DO_ALL
            plot_entries.extend(_parse_plot_entries(p, name, subgoal_refs))
        elif slot == "probability":
            prob_block_seen = True
        elif slot == "when":
            conds = p.parse_prop_list(default_level=None)
            if p.peek().kind == "darrow":
                p.advance()
            else:
                p.error("expected '=>' after probability condition")
            value = p.expect_number("probability value")
            if value is not None:
                if not 0.0 <= value <= 1.0:
                    p.error(f"probability {value} outside [0, 1]")
                elif prob_default_seen:
                    p.error("probability 'when' clause after 'default'")
                else:
                    prob_rules.append((tuple(conds), value))
        elif slot == "default":
            value = p.expect_number("default probability value")
            if value is not None:
                if not 0.0 <= value <= 1.0:
                    p.error(f"probability {value} outside [0, 1]")
                else:
                    prob_rules.append(((), value))
                    prob_default_seen = True
        elif slot == "postconditions":
            postconditions.extend(p.parse_prop_list(default_level=None))
        elif slot == "planfail":
            if p.at_keyword({"backtrack"}):
                p.advance()
                planfail = PLANFAIL_BACKTRACK
            elif p.at_keyword({"reject-branch"}):
                p.advance()
                planfail = PLANFAIL_REJECT_BRANCH
            elif p.at_keyword({"recover"}):
                tok = p.advance()
                target = p.expect_ident("recovery operator name")
                if target is not None:
                    planfail = target
                    recover_refs.append((name, target, tok))
            else:
                p.error("expected 'backtrack', 'reject-branch' or 'recover <name>'")

    if level is None:
        p.error(f"operator {name!r} is missing its abstraction level", name_tok)
        return None
    if prob_block_seen and not prob_default_seen:
        p.error(f"operator {name!r}: probability table must end with a default",
                name_tok)
    if not prob_rules:
        prob_rules = [((), 1.0)]

    def fill(pairs):
        return tuple((prop, level if lvl is None else lvl) for prop, lvl in pairs)

    try:
        return ReductionOperator(
            name=name,
            abstraction_level=level,
            necessary=fill(necessary),
            satisfiable=fill(satisfiable),
            plot_mode=plot_mode or DO_ALL,
            plot=tuple(plot_entries),
            probability_rules=tuple(
                ProbabilityRule(fill(conds), value) for conds, value in prob_rules
            ),
            postconditions=fill(postconditions),
            planfail=planfail,
        )
    except ValueError as exc:
        p.error(f"operator {name!r}: {exc}", name_tok)
        return None


def _parse_plot_entries(p: _Parser, parent: str, subgoal_refs: list):
    entries = []
    while True:
        tok = p.peek()
        if tok.kind == "ident" and tok.text in ("assert", "retract"):
            p.advance()
            prop = p.parse_proposition()
            level = p.parse_level_suffix()
            if level is None:
                p.error("plot edits need an explicit '@ level'")
            if prop is not None and level is not None:
                entries.append(PlotEntry("state-edit", edits=((tok.text, prop, level),)))
        elif tok.kind == "ident" and tok.text not in RESERVED:
            p.advance()
            fulfilment = p.expect_number(f"fulfilment after subgoal {tok.text!r}")
            if fulfilment is not None:
                if fulfilment < 0:
                    p.error("fulfilment must be >= 0")
                else:
                    entries.append(PlotEntry("subgoal", subgoal_name=tok.text,
                                             fulfilment=fulfilment))
                    subgoal_refs.append((parent, tok.text, tok))
        else:
            break
    return entries


# --- evidence parsing --------------------------------------------------------

def parse_evidence(text: str, filename: str = "<evidence>") -> EvidenceSet:
    """Parse an evidence file; raises :class:`ParseFailure` on any error."""
    p = _Parser(text, filename)
    frames: list = []
    masses = []  # (frame name, [(subset, value)], token)

    while p.peek().kind != "eof":
        if not p.at_keyword(EVIDENCE_KEYWORDS):
            p.error(f"expected 'frame' or 'mass', found {p.peek().text!r}")
            p.advance()
            p.skip_to(EVIDENCE_KEYWORDS)
            continue
        keyword = p.advance().text
        if keyword == "frame":
            frame = _parse_frame(p)
            if frame is not None:
                if any(f.name == frame.name for f in frames):
                    p.error(f"duplicate frame {frame.name!r}")
                else:
                    frames.append(frame)
        else:
            _parse_mass(p, masses)

    built_masses = []
    by_name = {f.name: f for f in frames}
    for frame_name, assignments, tok in masses:
        frame = by_name.get(frame_name)
        if frame is None:
            p.error(f"mass references undeclared frame {frame_name!r}", tok)
            continue
        total = sum(v for _, v in assignments)
        if abs(total - 1.0) > 1e-6 or total <= 0:
            p.error(f"masses sum to {total:g}", tok)
            continue
        scaled = {}
        for subset, value in assignments:
            unknown = sorted(set(subset) - set(frame.elements))
            if unknown:
                p.error(f"mass subset references unknown element(s) {unknown}", tok)
                break
            key = frozenset(subset)
            if key in scaled:
                p.error(f"duplicate mass subset {sorted(subset)}", tok)
                break
            scaled[key] = value / total
        else:
            try:
                built_masses.append(MassFunction(frame, _canonical(scaled)))
            except ValueError as exc:
                p.error(str(exc), tok)

    if p.errors:
        raise ParseFailure(p.errors)
    return EvidenceSet(tuple(frames), tuple(built_masses))


def _parse_frame(p: _Parser) -> Frame | None:
    name = p.expect_ident("frame name")
    if name is None:
        p.skip_to(EVIDENCE_KEYWORDS)
        return None
    if p.peek().kind == "lbrace":
        p.advance()
    else:
        p.error("expected '{' opening frame elements")
        p.skip_to(EVIDENCE_KEYWORDS)
        return None
    elements = []
    while p.peek().kind in ("ident", "number"):
        elements.append(p.advance().text)
    if p.peek().kind == "rbrace":
        p.advance()
    else:
        p.error("expected '}' closing frame elements")
    if not elements:
        p.error(f"frame {name!r} declares no elements")
        return None
    if len(set(elements)) != len(elements):
        p.error(f"frame {name!r} repeats an element")
        return None
    mappings = []
    while (p.peek().kind == "ident" and p.peek().text not in RESERVED
           and p.peek(1).kind == "arrow"):
        element_tok = p.advance()
        p.advance()  # ->
        pairs = []
        for prop, level in p.parse_prop_list(default_level=None):
            if level is None:
                p.error("frame element propositions need an explicit '@ level'",
                        element_tok)
            else:
                pairs.append((prop, level))
        if element_tok.text not in elements:
            p.error(f"mapping for unknown element {element_tok.text!r}", element_tok)
        else:
            mappings.append((element_tok.text, tuple(pairs)))
    return Frame(name, tuple(elements), tuple(mappings))


def _parse_mass(p: _Parser, masses: list):
    tok = p.peek()
    frame_name = p.expect_ident("frame name after 'mass'")
    if frame_name is None:
        p.skip_to(EVIDENCE_KEYWORDS)
        return
    assignments = []
    while p.peek().kind == "lbrace":
        p.advance()
        subset = []
        while p.peek().kind in ("ident", "number"):
            subset.append(p.advance().text)
        if p.peek().kind == "rbrace":
            p.advance()
        else:
            p.error("expected '}' closing mass subset")
            break
        if p.peek().kind == "equals":
            p.advance()
        else:
            p.error("expected '=' after mass subset")
            break
        value = p.expect_number("mass value")
        if value is None:
            break
        if not subset:
            p.error("mass assigned to the empty set")
            continue
        assignments.append((tuple(subset), value))
    if not assignments:
        p.error(f"mass declaration for {frame_name!r} assigns nothing", tok)
        return
    masses.append((frame_name, assignments, tok))


# --- linter -----------------------------------------------------------------

def _patterns_unify(a: Proposition, b: Proposition) -> bool:
    """Could some ground instance match both patterns?"""
    if a.predicate != b.predicate or a.polarity != b.polarity:
        return False
    if len(a.args) != len(b.args):
        return False
    from .model import is_variable
    return all(
        is_variable(x) or is_variable(y) or x == y
        for x, y in zip(a.args, b.args)
    )


def _effect_change(op: str, prop: Proposition) -> Proposition:
    """The change literal an effect produces: retracts flip polarity."""
    return prop if op == "assert" else prop.negated()


def lint_domain(spec: DomainSpec) -> list:
    """Static checks beyond the grammar; returns :class:`Diagnostic` items."""
    out = []

    # Causal rules must be stratified or deduction may never terminate.
    rules = spec.causal_rules
    edges = {i: set() for i in range(len(rules))}
    for i, ri in enumerate(rules):
        for op, prop, _level in ri.effects:
            change = _effect_change(op, prop)
            for j, rj in enumerate(rules):
                if _patterns_unify(change, rj.trigger):
                    edges[i].add(j)
    state = {}  # 0 visiting, 1 done

    def has_cycle(i, stack):
        state[i] = 0
        stack.append(i)
        for j in edges[i]:
            if state.get(j) == 0:
                return True
            if j not in state and has_cycle(j, stack):
                return True
        stack.pop()
        state[i] = 1
        return False

    for i in range(len(rules)):
        if i not in state and has_cycle(i, []):
            label = rules[i].name or f"rule #{i + 1}"
            out.append(Diagnostic(
                "error",
                f"causal rules are not stratifiable: {label} can re-trigger itself",
            ))
            break

    # Plot shape checks.
    for op in spec.operators:
        kinds = {e.kind for e in op.plot}
        if kinds == {"subgoal", "state-edit"}:
            out.append(Diagnostic("error", f"operator {op.name!r} mixes subgoals "
                                           "and state edits in one plot"))
        if op.plot_mode == CHOOSE_ONE:
            if "state-edit" in kinds:
                out.append(Diagnostic("error", f"operator {op.name!r} has state edits "
                                               "in a choose-one plot"))
            if len(op.plot) == 1:
                out.append(Diagnostic("warning", f"operator {op.name!r} has a "
                                                 "choose-one plot with a single entry"))
        if op.plot_mode == DO_ALL and not op.plot:
            out.append(Diagnostic("error", f"operator {op.name!r} has a do-all plot "
                                           "with no entries"))
        if "state-edit" in kinds and op.abstraction_level != spec.n_levels:
            out.append(Diagnostic("error", f"operator {op.name!r} edits the state but "
                                           "is not at the lowest abstraction level"))
        for entry in op.subgoal_entries():
            child = spec.operator(entry.subgoal_name)
            if child.abstraction_level < op.abstraction_level:
                out.append(Diagnostic(
                    "error",
                    f"plot of {op.name!r} (level {op.abstraction_level}) references "
                    f"{child.name!r} at the more abstract level {child.abstraction_level}",
                ))

    # Reachability from the goal: plots, recovery operators, and operators
    # usable as helpers for a reachable operator's satisfiable preconditions.
    reachable = {spec.goal}
    frontier = [spec.goal]
    while frontier:
        name = frontier.pop()
        op = spec.operator(name)
        referenced = [e.subgoal_name for e in op.subgoal_entries()]
        if op.planfail not in (PLANFAIL_BACKTRACK, PLANFAIL_REJECT_BRANCH):
            referenced.append(op.planfail)
        for target, level in op.satisfiable:
            for candidate in spec.operators:
                if candidate.abstraction_level < op.abstraction_level:
                    continue
                if any(_patterns_unify(post, target) and post_level == level
                       for post, post_level in candidate.postconditions):
                    referenced.append(candidate.name)
        for ref in referenced:
            if ref not in reachable:
                reachable.add(ref)
                frontier.append(ref)
    for op in spec.operators:
        if op.name not in reachable:
            out.append(Diagnostic("warning",
                                  f"operator {op.name!r} is unreachable from the goal"))
    return out


# --- pretty-printers ---------------------------------------------------------

def _format_prop_level(prop: Proposition, level: int | None) -> str:
    return f"{prop}@{level}" if level is not None else str(prop)


def format_domain(spec: DomainSpec) -> str:
    """Canonical text for a domain; reparsing it yields an equal DomainSpec."""
    lines = [f"levels {spec.n_levels}", f"goal {spec.goal} {spec.goal_fulfilment!r}",
             f"review rho {spec.review.offset_fraction!r}",
             f"coverage {spec.coverage_threshold[0]!r} {spec.coverage_threshold[1]!r}",
             ""]
    for rel in spec.compat:
        lines.append(f"compat {rel.if_pattern}@{rel.if_at_level} => "
                     f"{rel.then_pattern}@{rel.then_at_level}")
    if spec.compat:
        lines.append("")
    for rule in spec.causal_rules:
        head = "rule"
        if rule.name:
            head += f" {rule.name}"
        trigger = rule.trigger
        head += (f" when retract {trigger.negated()}" if not trigger.polarity
                 else f" when {trigger}")
        if rule.conditions:
            head += " if " + " ".join(
                _format_prop_level(c, lvl) for c, lvl in rule.conditions
            )
        head += " then " + " ".join(
            f"{op} {prop}@{lvl}" for op, prop, lvl in rule.effects
        )
        lines.append(head)
    if spec.causal_rules:
        lines.append("")
    for op in spec.operators:
        lines.append(f"operator {op.name}")
        lines.append(f"  level {op.abstraction_level}")
        for label, pairs in (("necessary", op.necessary),
                             ("satisfiable", op.satisfiable)):
            if pairs:
                lines.append(f"  {label} " + " ".join(
                    _format_prop_level(prop, lvl) for prop, lvl in pairs
                ))
        mode = "choose-one" if op.plot_mode == CHOOSE_ONE else "do-all"
        if op.plot:
            lines.append(f"  plot {mode}")
            for entry in op.plot:
                if entry.kind == "subgoal":
                    lines.append(f"    {entry.subgoal_name} {entry.fulfilment!r}")
                else:
                    for edit_op, prop, lvl in entry.edits:
                        lines.append(f"    {edit_op} {prop}@{lvl}")
        lines.append("  probability")
        for rule in op.probability_rules:
            if rule.conditions:
                conds = " ".join(_format_prop_level(c, lvl) for c, lvl in rule.conditions)
                lines.append(f"    when {conds} => {rule.value!r}")
            else:
                lines.append(f"    default {rule.value!r}")
        if op.postconditions:
            lines.append("  postconditions " + " ".join(
                _format_prop_level(prop, lvl) for prop, lvl in op.postconditions
            ))
        if op.planfail in (PLANFAIL_BACKTRACK, PLANFAIL_REJECT_BRANCH):
            lines.append(f"  planfail {op.planfail}")
        else:
            lines.append(f"  planfail recover {op.planfail}")
        lines.append("")
    return "\n".join(lines).rstrip() + "\n"


def format_evidence(ev: EvidenceSet) -> str:
    """Canonical text for an evidence set."""
    lines = []
    for frame in ev.frames:
        lines.append(f"frame {frame.name} {{{' '.join(frame.elements)}}}")
        for element, pairs in frame.to_propositions:
            if pairs:
                body = " ".join(f"{prop}@{lvl}" for prop, lvl in pairs)
                lines.append(f"  {element} -> {body}")
        for m in ev.masses:
            if m.frame.name == frame.name:
                parts = " ".join(
                    f"{{{' '.join(sorted(subset))}}}={mass!r}"
                    for subset, mass in m.masses
                )
                lines.append(f"mass {frame.name} {parts}")
        lines.append("")
    return "\n".join(lines).rstrip() + "\n"
