"""Hilbert-style presentations of k-dimensional deductive systems and
bounded forward-saturation proof search.

A presentation packages a signature with axiom schemes (k-formulas) and
inference rules (sequents with nonempty premise sets).  ``derive`` runs
a deterministic saturation loop under an explicit budget and returns
either a checkable proof object or an Unknown verdict with an
exhaustion report — never a silent failure.  Refutation by finite
countermodel lives in :mod:`refinekit.models`; the two get fused by
:mod:`refinekit.refinement`.

Search discipline
-----------------
* Hypotheses enter with their variables frozen; frozen variables act as
  constants and are never instantiated.
* Axiom instances draw their substitutions from a finite universe: the
  subterms of the hypotheses and the goal, a small palette of fresh
  variables per sort, closed under the signature operations up to the
  budget's instantiation depth.
* Instances stream in a fixed order — instantiation depth class first,
  then total size, then axiom position, then a lexicographic tiebreak —
  and the whole run is one deterministic sequence of additions that a
  budget can only cut short.  Raising a budget component extends the
  sequence instead of reshuffling it, which is what makes the
  monotonicity properties testable.
* Rule closure stores every derived formula verbatim.  Collapsing
  renaming-equivalent variants would lose instances that later rule
  joins need, because joins match premises against stored formulas
  exactly (no unification).
"""

from __future__ import annotations

import heapq
import itertools
import time
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional, Sequence, Union

from .errors import DimensionMismatchError, SortError
from .sigterm import (
    App,
    KFormula,
    Sequent,
    Signature,
    Substitution,
    Term,
    Variable,
    alpha_renaming,
    canonicalize,
    check_well_sorted,
    formula_key,
    free_variables,
    freeze_named,
    iter_variables,
    match_formula,
    substitute_term,
    subterms,
    term_key,
)

__all__ = [
    "Axiom",
    "Rule",
    "Presentation",
    "free_equational_presentation",
    "horn_presentation",
    "extend_presentation",
    "Budget",
    "ProofStep",
    "Hyp",
    "AxiomInstance",
    "RuleInstance",
    "Proof",
    "ProofCheckResult",
    "check_proof",
    "Proved",
    "Refuted",
    "Unknown",
    "Verdict",
    "directly_derivable",
    "derive",
    "bounded_consequences",
]


# ---------------------------------------------------------------------------
# Presentations


@dataclass(frozen=True)
class Axiom:
    """A named axiom scheme.  ``base`` marks machinery that comes with
    the ambient system (reflexivity and friends) rather than with the
    theory being specified on top of it."""

    name: str
    formula: KFormula
    base: bool = False


@dataclass(frozen=True)
class Rule:
    """A named inference rule; the sequent must have premises."""

    name: str
    sequent: Sequent
    base: bool = False

    def __post_init__(self):
        if not self.sequent.premises:
            raise DimensionMismatchError(
                f"rule {self.name!r} has no premises; premise-free rules are axioms"
            )


class Presentation:
    """A finitely presented k-dimensional deductive system."""

    __slots__ = ("name", "signature", "k", "axioms", "rules", "_by_name")

    def __init__(
        self,
        signature: Signature,
        k: int,
        axioms: Sequence[Axiom],
        rules: Sequence[Rule],
        name: str = "",
    ):
        if k < 1:
            raise DimensionMismatchError("dimension must be at least 1")
        self.name = name
        self.signature = signature
        self.k = k
        self.axioms = tuple(axioms)
        self.rules = tuple(rules)
        by_name: dict[str, Union[Axiom, Rule]] = {}
        for ax in self.axioms:
            if ax.formula.k != k:
                raise DimensionMismatchError(
                    f"axiom {ax.name!r} has dimension {ax.formula.k}, system has {k}"
                )
            for c in ax.formula.components:
                check_well_sorted(signature, c)
            if ax.name in by_name:
                raise SortError(f"duplicate item name {ax.name!r}")
            by_name[ax.name] = ax
        for rule in self.rules:
            if rule.sequent.k != k:
                raise DimensionMismatchError(
                    f"rule {rule.name!r} has dimension {rule.sequent.k}, system has {k}"
                )
            for f in rule.sequent.premises + (rule.sequent.conclusion,):
                for c in f.components:
                    check_well_sorted(signature, c)
            if rule.name in by_name:
                raise SortError(f"duplicate item name {rule.name!r}")
            by_name[rule.name] = rule
        self._by_name = by_name

    def axiom(self, name: str) -> Axiom:
        item = self._by_name.get(name)
        if not isinstance(item, Axiom):
            raise KeyError(f"no axiom named {name!r}")
        return item

    def rule(self, name: str) -> Rule:
        item = self._by_name.get(name)
        if not isinstance(item, Rule):
            raise KeyError(f"no rule named {name!r}")
        return item

    @property
    def proper_axioms(self) -> tuple[Axiom, ...]:
        return tuple(ax for ax in self.axioms if not ax.base)

    @property
    def proper_rules(self) -> tuple[Rule, ...]:
        return tuple(r for r in self.rules if not r.base)

    def __repr__(self) -> str:
        label = self.name or "Presentation"
        return (
            f"<{label}: k={self.k}, {len(self.axioms)} axioms, "
            f"{len(self.rules)} rules>"
        )


def free_equational_presentation(sig: Signature, name: str = "") -> Presentation:
    """The free 2-dimensional equational system over ``sig``:
    reflexivity per sort, symmetry and transitivity per sort, one
    congruence rule per operation of arity at least one.  Constants get
    no congruence rule — it would need an empty premise set, and its
    only instance already follows from reflexivity."""
    axioms = []
    rules = []
    for sort in sorted(sig.sorts):
        x = Variable("x", sort)
        y = Variable("y", sort)
        z = Variable("z", sort)
        axioms.append(Axiom(f"refl-{sort}", KFormula([x, x]), base=True))
        rules.append(
            Rule(
                f"sym-{sort}",
                Sequent([KFormula([x, y])], KFormula([y, x])),
                base=True,
            )
        )
        rules.append(
            Rule(
                f"trans-{sort}",
                Sequent([KFormula([x, y]), KFormula([y, z])], KFormula([x, z])),
                base=True,
            )
        )
    for op in sorted(sig.ops):
        arg_sorts, result = sig.profile(op)
        if not arg_sorts:
            continue
        xs = [Variable(f"x{i}", s) for i, s in enumerate(arg_sorts)]
        ys = [Variable(f"y{i}", s) for i, s in enumerate(arg_sorts)]
        premises = [KFormula([a, b]) for a, b in zip(xs, ys)]
        conclusion = KFormula([App(op, xs, result), App(op, ys, result)])
        rules.append(Rule(f"cong-{op}", Sequent(premises, conclusion), base=True))
    return Presentation(sig, 2, axioms, rules, name=name or f"EQ({sig.name or '?'})")


def horn_presentation(
    sig: Signature,
    eqs: Iterable[tuple[str, KFormula]],
    ceqs: Iterable[tuple[str, Sequent]] = (),
    name: str = "",
) -> Presentation:
    """Compile a Horn theory: the free equational machinery plus the
    given equations as axioms and conditional equations as rules."""
    base = free_equational_presentation(sig)
    axioms = list(base.axioms)
    rules = list(base.rules)
    for eq_name, formula in eqs:
        if formula.k != 2:
            raise DimensionMismatchError(
                f"equation {eq_name!r} must be 2-dimensional, got {formula.k}"
            )
        axioms.append(Axiom(eq_name, formula))
    for ceq_name, seq in ceqs:
        rules.append(Rule(ceq_name, seq))
    return Presentation(sig, 2, axioms, rules, name=name)


def extend_presentation(
    p: Presentation,
    axioms: Iterable[Union[Axiom, tuple[str, KFormula]]] = (),
    rules: Iterable[Union[Rule, tuple[str, Sequent]]] = (),
    signature: Optional[Signature] = None,
    name: str = "",
) -> Presentation:
    """Extend a presentation by axioms and rules (and optionally by a
    larger signature).  Nothing is removed, so every consequence of
    ``p`` stays derivable."""
    sig = signature if signature is not None else p.signature
    if signature is not None and not p.signature.is_subsignature_of(signature):
        raise SortError("extension signature must contain the original one")
    new_axioms = list(p.axioms)
    for item in axioms:
        new_axioms.append(item if isinstance(item, Axiom) else Axiom(*item))
    new_rules = list(p.rules)
    for item in rules:
        new_rules.append(item if isinstance(item, Rule) else Rule(*item))
    return Presentation(sig, p.k, new_axioms, new_rules, name=name or p.name)


# ---------------------------------------------------------------------------
# Budgets and verdicts


@dataclass(frozen=True)
class Budget:
    """Resource limits for one search.  ``max_instantiation_depth`` caps
    how far the instantiation universe is closed under the signature's
    operations; the other three cap the saturation loop itself."""

    max_rounds: int = 8
    max_derived: int = 6000
    max_instantiation_depth: int = 2
    time_cap_ms: int = 10_000

    def __post_init__(self):
        for fname in (
            "max_rounds",
            "max_derived",
            "max_instantiation_depth",
            "time_cap_ms",
        ):
            if getattr(self, fname) <= 0:
                raise ValueError(f"budget field {fname} must be strictly positive")


class Verdict:
    """Base class; see :class:`Proved`, :class:`Refuted`, :class:`Unknown`."""

    kind = "verdict"


@dataclass(frozen=True)
class Proved(Verdict):
    proof: "Proof"

    kind = "proved"


@dataclass(frozen=True)
class Refuted(Verdict):
    """Refutation by a finite countermodel.  Built by the models layer;
    defined here so the three verdicts share one home."""

    witness: object

    kind = "refuted"


@dataclass(frozen=True)
class Unknown(Verdict):
    report: dict

    kind = "unknown"


# ---------------------------------------------------------------------------
# Proof objects


@dataclass(frozen=True)
class Hyp:
    index: int


@dataclass(frozen=True)
class AxiomInstance:
    axiom: str
    substitution: Substitution


@dataclass(frozen=True)
class RuleInstance:
    rule: str
    substitution: Substitution
    premises: tuple[int, ...]


Justification = Union[Hyp, AxiomInstance, RuleInstance]


@dataclass(frozen=True)
class ProofStep:
    formula: KFormula
    justification: Justification


class Proof:
    """A Hilbert-style derivation: every step is a hypothesis, an axiom
    instance, or a rule instance whose premises point strictly backwards."""

    __slots__ = ("hypotheses", "steps")

    def __init__(self, hypotheses: Iterable[KFormula], steps: Sequence[ProofStep]):
        self.hypotheses = tuple(sorted(set(hypotheses), key=formula_key))
        self.steps = tuple(steps)
        if not self.steps:
            raise ValueError("a proof needs at least one step")

    @property
    def conclusion(self) -> KFormula:
        return self.steps[-1].formula

    def __len__(self) -> int:
        return len(self.steps)

    def substituted(self, theta: Substitution) -> "Proof":
        """Apply ``theta`` to every step.  Each justification composes
        with theta, so the result is again a step-by-step valid proof —
        provided theta leaves the hypotheses fixed (it always does when
        they are fully frozen)."""
        new_steps = []
        for step in self.steps:
            just = step.justification
            if isinstance(just, AxiomInstance):
                just = AxiomInstance(just.axiom, theta.compose(just.substitution))
            elif isinstance(just, RuleInstance):
                just = RuleInstance(
                    just.rule, theta.compose(just.substitution), just.premises
                )
            new_steps.append(ProofStep(theta(step.formula), just))
        return Proof(self.hypotheses, new_steps)

    def renamed(self, renaming: dict[Variable, Variable]) -> "Proof":
        """Specialization of :meth:`substituted` to a variable renaming."""
        return self.substituted(Substitution(renaming))


@dataclass(frozen=True)
class ProofCheckResult:
    accepted: bool
    step: Optional[int] = None
    reason: Optional[str] = None

    def __bool__(self) -> bool:
        return self.accepted


def check_proof(p: Presentation, proof: Proof) -> ProofCheckResult:
    """Replay every step against the presentation; report the first
    failure with its step index."""

    def reject(i: int, why: str) -> ProofCheckResult:
        return ProofCheckResult(False, i, why)

    for i, step in enumerate(proof.steps):
        just = step.justification
        if isinstance(just, Hyp):
            if not 0 <= just.index < len(proof.hypotheses):
                return reject(i, f"hypothesis index {just.index} out of range")
            if proof.hypotheses[just.index] != step.formula:
                return reject(i, "formula is not the referenced hypothesis")
        elif isinstance(just, AxiomInstance):
            try:
                ax = p.axiom(just.axiom)
            except KeyError:
                return reject(i, f"unknown axiom {just.axiom!r}")
            if just.substitution(ax.formula) != step.formula:
                return reject(i, f"not the claimed instance of axiom {just.axiom!r}")
        elif isinstance(just, RuleInstance):
            try:
                rule = p.rule(just.rule)
            except KeyError:
                return reject(i, f"unknown rule {just.rule!r}")
            seq = rule.sequent
            if len(just.premises) != len(seq.premises):
                return reject(i, f"rule {just.rule!r} premise count mismatch")
            for prem_formula, j in zip(seq.premises, just.premises):
                if not 0 <= j < i:
                    return reject(i, f"premise index {j} not strictly earlier")
                if just.substitution(prem_formula) != proof.steps[j].formula:
                    return reject(
                        i, f"step {j} is not the required instance of a premise"
                    )
            if just.substitution(seq.conclusion) != step.formula:
                return reject(i, f"not the conclusion of rule {just.rule!r}")
        else:  # pragma: no cover - defensive
            return reject(i, f"unrecognized justification {just!r}")
    return ProofCheckResult(True)


# ---------------------------------------------------------------------------
# Direct derivability


def directly_derivable(
    rule: Sequent, gamma: Iterable[KFormula], psi: KFormula
) -> Optional[Substitution]:
    """Find a substitution h with h(conclusion) = psi and every
    h(premise) in gamma, matching the conclusion first and then
    backtracking over premise/member pairings."""
    pool = list(gamma)
    conclusion_binding = match_formula(rule.conclusion, psi)
    if conclusion_binding is None:
        return None

    premises = rule.premises

    def extend(idx: int, theta: dict) -> Optional[dict]:
        if idx == len(premises):
            return theta
        for member in pool:
            attempt = match_formula(premises[idx], member, dict(theta))
            if attempt is not None:
                result = extend(idx + 1, attempt)
                if result is not None:
                    return result
        return None

    solution = extend(0, conclusion_binding)
    return None if solution is None else Substitution(solution)


# ---------------------------------------------------------------------------
# The saturation engine

_FRESH_PER_SORT = 3
_UNIVERSE_CAP_PER_SORT = 4000


def _instantiation_universe(
    sig: Signature, seeds: Iterable[Term], depth: int
) -> dict[str, list[tuple[int, Term]]]:
    """Terms the prover may substitute for axiom variables, per sort,
    each tagged with its closure class (0 = seed, d = first appearance
    at closure level d).  Listed in (class, size, lexicographic) order.
    The per-sort cap is a fixed constant, not a budget function, so the
    universe for a deeper budget extends the shallower one."""
    by_sort: dict[str, dict[Term, int]] = {s: {} for s in sig.sorts}

    def add(term: Term, level: int) -> bool:
        bucket = by_sort[term.sort]
        if term in bucket or len(bucket) >= _UNIVERSE_CAP_PER_SORT:
            return False
        bucket[term] = level
        return True

    for seed in seeds:
        for t in subterms(seed):
            add(t, 0)
    for sort in sig.sorts:
        for i in range(_FRESH_PER_SORT):
            add(Variable(f"v{i}", sort), 0)

    for level in range(1, depth + 1):
        added_any = False
        for op in sorted(sig.ops):
            arg_sorts, result = sig.profile(op)
            if len(by_sort[result]) >= _UNIVERSE_CAP_PER_SORT:
                continue
            pools = [sorted(by_sort[s], key=term_key) for s in arg_sorts]
            if any(not pool for pool in pools):
                continue
            if not arg_sorts:
                if add(App(op, (), result), 1 if level == 1 else level):
                    added_any = True
                continue
            for combo in itertools.product(*pools):
                # A term first appears one level after its deepest
                # argument; skip combos that would re-make older terms.
                if max(by_sort[s][t] for s, t in zip(arg_sorts, combo)) != level - 1:
                    continue
                if add(App(op, combo, result), level):
                    added_any = True
        if not added_any:
            break

    ordered: dict[str, list[tuple[int, Term]]] = {}
    for sort, terms in by_sort.items():
        ordered[sort] = sorted(
            ((lvl, t) for t, lvl in terms.items()),
            key=lambda pair: (pair[0], term_key(pair[1])),
        )
    return ordered


def _axiom_variables(ax: Axiom) -> tuple[Variable, ...]:
    ordered: list[Variable] = []
    seen: set[Variable] = set()
    for comp in ax.formula.components:
        for v in iter_variables(comp):
            if not v.frozen and v not in seen:
                seen.add(v)
                ordered.append(v)
    return tuple(ordered)


def _axiom_instance_stream(
    axioms: Sequence[Axiom],
    universe: dict[str, list[tuple[int, Term]]],
) -> Iterator[tuple[KFormula, Axiom, Substitution]]:
    """All axiom instances over the universe, lazily, in (depth class,
    total size, axiom position, index-vector) order."""
    heap: list = []
    seen: set[tuple[int, tuple[int, ...]]] = set()
    var_lists: dict[int, tuple[Variable, ...]] = {}

    def push(ax_idx: int, indices: tuple[int, ...]):
        var_list = var_lists[ax_idx]
        level = 0
        size = 0
        for v, i in zip(var_list, indices):
            lvl, t = universe[v.sort][i]
            if lvl > level:
                level = lvl
            size += t.size
        heapq.heappush(heap, ((level, size, ax_idx, indices), ax_idx, indices))

    for ax_idx, ax in enumerate(axioms):
        var_list = _axiom_variables(ax)
        if any(not universe[v.sort] for v in var_list):
            continue
        var_lists[ax_idx] = var_list
        start = tuple(0 for _ in var_list)
        seen.add((ax_idx, start))
        push(ax_idx, start)

    while heap:
        _, ax_idx, indices = heapq.heappop(heap)
        ax = axioms[ax_idx]
        var_list = var_lists[ax_idx]
        theta = Substitution(
            {v: universe[v.sort][i][1] for v, i in zip(var_list, indices)}
        )
        yield theta(ax.formula), ax, theta
        for pos, v in enumerate(var_list):
            if indices[pos] + 1 < len(universe[v.sort]):
                succ = indices[:pos] + (indices[pos] + 1,) + indices[pos + 1 :]
                if (ax_idx, succ) not in seen:
                    seen.add((ax_idx, succ))
                    push(ax_idx, succ)


class _Store:
    """Saturation state.  Formulas are stored at admission; the join
    indexes only see a formula once the agenda loop has processed it,
    so each premise combination fires exactly once — at the pop of its
    last member."""

    def __init__(self, k: int, size_limit: int):
        self.known: dict[KFormula, int] = {}  # formula -> inference depth
        self.just: dict[KFormula, tuple] = {}
        self.order: list[KFormula] = []
        self.size_limit = size_limit
        self.processed: list[KFormula] = []
        self.index: list[dict[Term, list[KFormula]]] = [dict() for _ in range(k)]

    def __contains__(self, formula: KFormula) -> bool:
        return formula in self.known

    def admissible(self, formula: KFormula) -> bool:
        return all(c.size <= self.size_limit for c in formula.components)

    def add(self, formula: KFormula, depth: int, justification: tuple) -> bool:
        if formula in self.known or not self.admissible(formula):
            return False
        self.known[formula] = depth
        self.just[formula] = justification
        self.order.append(formula)
        return True

    def mark_processed(self, formula: KFormula):
        self.processed.append(formula)
        for pos, comp in enumerate(formula.components):
            self.index[pos].setdefault(comp, []).append(formula)

    def candidates(self, premise: KFormula, theta: dict) -> Sequence[KFormula]:
        """Processed formulas that could match ``premise`` under
        ``theta``, looked up by the first component the bindings make
        ground."""
        for pos, comp in enumerate(premise.components):
            image = substitute_term(theta, comp)
            if not any(not v.frozen for v in iter_variables(image)):
                return self.index[pos].get(image, ())
        return self.processed


class _Search:
    """One bounded saturation run over a presentation.

    After seeding the hypotheses, the loop repeatedly processes the
    smallest admitted formula (by size, then inference depth, then a
    lexicographic key) and fires every rule combination that uses it
    together with already-processed formulas.  Axiom instances are not
    admitted up front: the instance stream is merged in lazily, ahead
    of any agenda entry at least as large, so a goal within reach of
    small instances is found before the bulk of the universe is ever
    materialized.  A conclusion's inference depth is one more than its
    deepest premise, and ``max_rounds`` bounds that depth — so the
    reachable set matches round-stratified closure, while the
    small-first processing order keeps congruence-style rules from
    burying a nearby goal under large conclusions."""

    def __init__(
        self,
        p: Presentation,
        gamma: Sequence[KFormula],
        goal: Optional[KFormula],
        budget: Budget,
    ):
        self.p = p
        self.budget = budget
        self.started = time.monotonic()
        self.deadline = self.started + budget.time_cap_ms / 1000.0

        frozen_pairs = {(v.name, v.sort) for g in gamma for v in free_variables(g)}
        self.hypotheses = tuple(
            sorted({freeze_named(g, frozen_pairs) for g in gamma}, key=formula_key)
        )
        self.goal = freeze_named(goal, frozen_pairs) if goal is not None else None

        for h in self.hypotheses:
            self._validate(h, "hypothesis")
        if self.goal is not None:
            self._validate(self.goal, "goal")

        seeds: list[Term] = [c for h in self.hypotheses for c in h.components]
        if self.goal is not None:
            seeds.extend(self.goal.components)
        self.seeds = seeds
        input_size = max((t.size for t in seeds), default=1)
        self.store = _Store(p.k, size_limit=max(48, 2 * input_size))
        self.agenda: list[tuple[tuple, KFormula]] = []

        self.derived = 0
        self.limits_hit: list[str] = []
        self.depth_reached = 0
        self.depth_rejected = False
        self.matched: Optional[KFormula] = None
        self.stream: Iterator = iter(())
        self.stream_head = None
        self.pending: list = []
        self.pending_counter = 0

    def _validate(self, f: KFormula, what: str):
        if f.k != self.p.k:
            raise DimensionMismatchError(
                f"{what} has dimension {f.k}, system has {self.p.k}"
            )
        for c in f.components:
            check_well_sorted(self.p.signature, c)

    # -- budget plumbing ----------------------------------------------------

    def _out_of_time(self) -> bool:
        return time.monotonic() > self.deadline

    def report(self) -> dict:
        limits = list(self.limits_hit)
        if not limits:
            limits = ["max_rounds"] if self.depth_rejected else ["saturated"]
        return {
            "rounds_completed": min(self.budget.max_rounds, self.depth_reached + 1),
            "derived": self.derived,
            "limits_hit": limits,
            "millis": int((time.monotonic() - self.started) * 1000),
        }

    # -- the run ------------------------------------------------------------

    def run(self):
        for i, h in enumerate(self.hypotheses):
            if self.store.add(h, 0, ("hyp", i)):
                self._enqueue(h)
            if self._goal_hit(h):
                return
        universe = _instantiation_universe(
            self.p.signature, self.seeds, self.budget.max_instantiation_depth
        )
        self.universe_terms = {
            sort: {t for _, t in entries} for sort, entries in universe.items()
        }
        self.stream = _axiom_instance_stream(self.p.axioms, universe)
        self.stream_head = next(self.stream, None)
        self._agenda_loop()

    def _goal_hit(self, formula: KFormula) -> bool:
        if self.goal is not None and alpha_renaming(formula, self.goal) is not None:
            self.matched = formula
            return True
        return False

    def _enqueue(self, formula: KFormula):
        key = (
            formula.size,
            self.store.known[formula],
            formula_key(formula),
        )
        heapq.heappush(self.agenda, (key, formula))

    def _admit(self, formula: KFormula, depth: int, justification: tuple) -> Optional[bool]:
        """Budget-checked insertion.  True = stored, False = duplicate
        or inadmissible, None = a budget limit fired."""
        if self.derived >= self.budget.max_derived:
            self.limits_hit.append("max_derived")
            return None
        if self._out_of_time():
            self.limits_hit.append("time_cap")
            return None
        if not self.store.add(formula, depth, justification):
            return False
        self.derived += 1
        if depth > self.depth_reached:
            self.depth_reached = depth
        self._enqueue(formula)
        return True

    def _is_universe_instance(self, formula: KFormula) -> bool:
        """Whether the formula is an axiom instance the stream will (or
        did) produce.  Such formulas sit at inference depth 0 no matter
        which route admitted them first, keeping depths — and therefore
        the round stratification — independent of admission order."""
        for ax in self.p.axioms:
            theta = match_formula(ax.formula, formula)
            if theta is not None and all(
                t in self.universe_terms.get(v.sort, ()) for v, t in theta.items()
            ):
                return True
        return False

    def _offer(self, formula: KFormula, depth: int, justification: tuple) -> bool:
        """Route a rule conclusion: a goal match is admitted on the spot,
        everything else waits in the pending heap for the size frontier —
        so large join products cost nothing until the search actually
        climbs to their size.  Returns True when the loop should stop."""
        if formula in self.store:
            return False
        if self.goal is not None and alpha_renaming(formula, self.goal) is not None:
            admitted = self._admit(formula, depth, justification)
            if admitted is None:
                return True
            return self._goal_hit(formula)
        self.pending_counter += 1
        heapq.heappush(
            self.pending,
            (
                (formula.size, depth, formula_key(formula)),
                self.pending_counter,
                formula,
                justification,
            ),
        )
        return False

    def _drain(self) -> bool:
        """Admit queued axiom instances and deferred conclusions up to
        the agenda's (size, depth) frontier — everything, smallest first,
        when the agenda is empty.  Gating on depth as well as size lets
        an axiom instance be processed, and its one-step consequences
        seen, before equally-sized join products are even admitted.
        Returns True when the goal was matched or a budget limit fired."""
        while True:
            stream_key = (
                (self.stream_head[0].size, 0) if self.stream_head is not None else None
            )
            pending_key = self.pending[0][0][:2] if self.pending else None
            if stream_key is None and pending_key is None:
                return False
            from_stream = stream_key is not None and (
                pending_key is None or stream_key <= pending_key
            )
            source_key = stream_key if from_stream else pending_key
            if self.agenda and self.agenda[0][0][:2] < source_key:
                return False
            if from_stream:
                formula, ax, theta = self.stream_head
                self.stream_head = next(self.stream, None)
                admitted = self._admit(formula, 0, ("axiom", ax.name, theta))
            else:
                key, _, formula, justification = heapq.heappop(self.pending)
                admitted = self._admit(formula, key[1], justification)
            if admitted is None:
                return True
            if admitted and self._goal_hit(formula):
                return True

    def _agenda_loop(self):
        store = self.store
        depth_cap = self.budget.max_rounds - 1
        while self.agenda or self.pending or self.stream_head is not None:
            if self._out_of_time():
                self.limits_hit.append("time_cap")
                return
            if self._drain():
                return
            if not self.agenda:
                return
            _, given = heapq.heappop(self.agenda)
            store.mark_processed(given)
            if self._fire_rules(given, depth_cap):
                return

    def _fire_rules(self, given: KFormula, depth_cap: int) -> bool:
        """All rule applications using ``given`` at its first matching
        premise position and processed formulas elsewhere.  Returns True
        when the goal was matched or a budget limit fired."""
        store = self.store
        for rule in self.p.rules:
            seq = rule.sequent
            premises = seq.premises
            for j, pattern in enumerate(premises):
                theta = match_formula(pattern, given)
                if theta is None:
                    continue
                used: list[KFormula] = [given]

                def extend(idx: int, binding: dict) -> Optional[bool]:
                    if idx == len(premises):
                        subst = Substitution(dict(binding))
                        out = subst(seq.conclusion)
                        if out in store or not store.admissible(out):
                            return False
                        depth = 1 + max(store.known[f] for f in used)
                        if self._is_universe_instance(out):
                            depth = 0
                        if depth > depth_cap:
                            self.depth_rejected = True
                            return False
                        # premises listed in rule order, not join order
                        ordered = tuple(
                            used[0] if i == j else used[1 + (i if i < j else i - 1)]
                            for i in range(len(premises))
                        )
                        return self._offer(
                            out, depth, ("rule", rule.name, subst, ordered)
                        )
                    if idx == j:
                        return extend(idx + 1, binding)
                    for member in store.candidates(premises[idx], binding):
                        # a combination fires at the pop of its last
                        # member; earlier positions equal to the given
                        # formula were handled at a smaller j
                        if idx < j and member == given:
                            continue
                        attempt = match_formula(premises[idx], member, dict(binding))
                        if attempt is None:
                            continue
                        used.append(member)
                        outcome = extend(idx + 1, attempt)
                        used.pop()
                        if outcome:
                            return True
                    return False

                if extend(0, theta):
                    return True
        return False


def _reconstruct(store: _Store, hyps: tuple[KFormula, ...], target: KFormula) -> Proof:
    """Demand-driven proof extraction: walk the justification graph back
    from the target, emitting steps in dependency order."""
    indices: dict[KFormula, int] = {}
    steps: list[ProofStep] = []

    def emit(formula: KFormula) -> int:
        known = indices.get(formula)
        if known is not None:
            return known
        tag = store.just[formula]
        if tag[0] == "hyp":
            step = ProofStep(formula, Hyp(tag[1]))
        elif tag[0] == "axiom":
            step = ProofStep(formula, AxiomInstance(tag[1], tag[2]))
        else:
            _, rule_name, subst, used = tag
            premise_ids = tuple(emit(premise) for premise in used)
            step = ProofStep(formula, RuleInstance(rule_name, subst, premise_ids))
        indices[formula] = len(steps)
        steps.append(step)
        return indices[formula]

    emit(target)
    return Proof(hyps, steps)


def _unify_terms(a: Term, b: Term, binding: dict, flexible: frozenset) -> bool:
    """First-order unification where only ``flexible`` variables may be
    bound; everything else is rigid.  ``binding`` is mutated and kept
    idempotent: every stored image is fully resolved, so applying it
    once is applying it completely."""
    a = substitute_term(binding, a)
    b = substitute_term(binding, b)
    if a == b:
        return True
    for v, t in ((a, b), (b, a)):
        if isinstance(v, Variable) and v in flexible:
            if v.sort != t.sort or any(w == v for w in iter_variables(t)):
                return False
            swap = {v: t}
            for key, value in binding.items():
                binding[key] = substitute_term(swap, value)
            binding[v] = t
            return True
    if (
        isinstance(a, App)
        and isinstance(b, App)
        and a.op == b.op
        and len(a.args) == len(b.args)
    ):
        return all(_unify_terms(x, y, binding, flexible) for x, y in zip(a.args, b.args))
    return False


def _unify_formulas(f: KFormula, g: KFormula, binding: dict, flexible: frozenset) -> bool:
    if len(f.components) != len(g.components):
        return False
    return all(
        _unify_terms(x, y, binding, flexible)
        for x, y in zip(f.components, g.components)
    )


def _backward_proof(
    p: Presentation,
    hypotheses: tuple[KFormula, ...],
    goal: KFormula,
    max_depth: int,
    node_cap: int,
    deadline: float,
) -> Optional[Proof]:
    """Goal-directed pre-pass: try to close the goal by matching it
    against a hypothesis, an axiom scheme, or a rule conclusion, and
    recursing on the rule's premises.  Bindings come from one-sided
    matching, except that a premise variable the conclusion leaves open
    (a transitivity middle, say) may be grounded against a hypothesis
    or unified with a fresh copy of an axiom scheme — the shapes short
    certificate obligations take.  Anything richer is left to
    saturation.  Deterministic: axioms, rules, and hypotheses are tried
    in presentation order, first success wins, and the caps are
    monotone in the budget."""
    hyp_index = {h: i for i, h in enumerate(hypotheses)}
    nodes = 0
    # deepest allowance at which a subgoal already failed outright,
    # keyed up to renaming of plain variables so that fresh copies of
    # the same shape share one verdict
    fail_at: dict[tuple, int] = {}

    def memo_key(formula: KFormula) -> tuple:
        names: dict[Variable, int] = {}

        def key(t: Term) -> tuple:
            if isinstance(t, Variable):
                if t.frozen:
                    return ("f", t.name, t.sort)
                return ("v", names.setdefault(t, len(names)), t.sort)
            return ("a", t.op, tuple(key(a) for a in t.args))

        return tuple(key(c) for c in formula.components)
    reserved = {v.name for h in hypotheses for v in free_variables(h)}
    reserved.update(v.name for v in free_variables(goal))
    for ax in p.axioms:
        reserved.update(v.name for v in free_variables(ax.formula))
    for rule in p.rules:
        reserved.update(v.name for v in free_variables(rule.sequent))
    fresh_ids = itertools.count()

    def fresh_mapping(obj) -> dict:
        """Never-before-seen plain variables for the object's plain ones."""
        while True:
            n = next(fresh_ids)
            mapping = {
                v: Variable(f"_u{n}_{v.name}", v.sort)
                for v in free_variables(obj)
                if not v.frozen
            }
            if all(w.name not in reserved for w in mapping.values()):
                return mapping

    def rename_apart(formula: KFormula) -> tuple[KFormula, dict]:
        """A copy of the formula over never-before-seen plain variables."""
        mapping = fresh_mapping(formula)
        renamed = KFormula(
            [substitute_term(mapping, c) for c in formula.components]
        )
        return renamed, mapping

    def rename_sequent(seq: Sequent) -> tuple[Sequent, dict]:
        """A copy of the sequent over never-before-seen plain variables.

        Rules must not be matched with their schematic variables as
        written: a rule variable that shares its name with a plain
        variable of the goal would let unification capture the latter
        when bindings are composed."""
        mapping = fresh_mapping(seq)
        renamed = Sequent(
            tuple(
                KFormula([substitute_term(mapping, c) for c in f.components])
                for f in seq.premises
            ),
            KFormula(
                [substitute_term(mapping, c) for c in seq.conclusion.components]
            ),
        )
        return renamed, mapping

    def rough_match(conclusion: KFormula, subgoal: KFormula) -> bool:
        """Cheap necessary condition for the conclusion to match."""
        return all(
            not isinstance(cc, App) or (isinstance(sc, App) and cc.op == sc.op)
            for cc, sc in zip(conclusion.components, subgoal.components)
        )

    def close(subgoal: KFormula, depth: int, path: frozenset) -> Optional[tuple]:
        nonlocal nodes
        shape = memo_key(subgoal)
        if shape in path or fail_at.get(shape, -1) >= depth:
            return None
        if nodes >= node_cap or time.monotonic() > deadline:
            return None
        nodes += 1
        i = hyp_index.get(subgoal)
        if i is not None:
            return ("hyp", i)
        for ax in p.axioms:
            theta = match_formula(ax.formula, subgoal)
            if theta is not None:
                return ("ax", ax.name, Substitution(theta))
        if depth > 0:
            deeper = path | {shape}
            for rule in p.rules:
                if nodes >= node_cap or time.monotonic() > deadline:
                    break
                if not rough_match(rule.sequent.conclusion, subgoal):
                    continue
                nodes += 1
                seq, rule_fresh = rename_sequent(rule.sequent)
                theta = match_formula(seq.conclusion, subgoal)
                if theta is None:
                    continue
                got = premises(seq.premises, 0, theta, (), depth - 1, deeper)
                if got is not None:
                    binding, plans = got
                    done = tuple(
                        (
                            "ax",
                            plan[1],
                            Substitution(
                                {
                                    orig: binding.get(new, new)
                                    for orig, new in plan[2].items()
                                }
                            ),
                        )
                        if plan[0] == "axu"
                        else plan
                        for plan in plans
                    )
                    sigma = Substitution(
                        {
                            orig: binding.get(new, new)
                            for orig, new in rule_fresh.items()
                        }
                    )
                    return ("rule", rule.name, sigma, done)
        fail_at[shape] = depth
        return None

    def premises(
        patterns, idx: int, binding: dict, plans: tuple, depth: int, path: frozenset
    ) -> Optional[tuple[dict, tuple]]:
        nonlocal nodes
        if idx == len(patterns):
            return binding, plans
        pattern = patterns[idx]
        open_vars = {
            v for v in free_variables(pattern) if not v.frozen and v not in binding
        }
        if not open_vars:
            subgoal = Substitution(binding)(pattern)
            plan = close(subgoal, depth, path)
            if plan is None:
                return None
            return premises(patterns, idx + 1, binding, plans + (plan,), depth, path)
        # open premise variables: ground them against a hypothesis…
        for h in hypotheses:
            attempt = match_formula(pattern, h, dict(binding))
            if attempt is None:
                continue
            got = premises(
                patterns, idx + 1, attempt, plans + (("hyp", hyp_index[h]),), depth, path
            )
            if got is not None:
                return got
        # …or invent them by unifying the premise with a fresh copy of an
        # axiom scheme.  The copy's leftover variables stay open until the
        # whole rule application succeeds, so the instance is resolved
        # against the final binding (the "axu" placeholder, closed above).
        for ax in p.axioms:
            if nodes >= node_cap or time.monotonic() > deadline:
                return None
            nodes += 1
            renamed, fresh = rename_apart(ax.formula)
            trial = dict(binding)
            if not _unify_formulas(
                pattern, renamed, trial, frozenset(open_vars) | frozenset(fresh.values())
            ):
                continue
            got = premises(
                patterns, idx + 1, trial, plans + (("axu", ax.name, fresh),), depth, path
            )
            if got is not None:
                return got
        return None

    # Iterative deepening: shallow proofs (the common case for
    # certificate obligations) are found without paying for the search
    # space the deeper allowances open up.  ``fail_at`` carries over —
    # an entry only blocks allowances no larger than the one that
    # already failed.
    plan = None
    for limit in range(max_depth + 1):
        plan = close(goal, limit, frozenset())
        if plan is not None:
            break
        if nodes >= node_cap or time.monotonic() > deadline:
            return None
    if plan is None:
        return None

    steps: list[ProofStep] = []
    index: dict[KFormula, int] = {}

    def emit(node: tuple) -> int:
        if node[0] == "hyp":
            formula: KFormula = hypotheses[node[1]]
            if formula in index:
                return index[formula]
            step = ProofStep(formula, Hyp(node[1]))
        elif node[0] == "ax":
            _, name, sub = node
            formula = sub(p.axiom(name).formula)
            if formula in index:
                return index[formula]
            step = ProofStep(formula, AxiomInstance(name, sub))
        else:
            _, name, sub, subplans = node
            formula = sub(p.rule(name).sequent.conclusion)
            if formula in index:
                return index[formula]
            ids = tuple(emit(sp) for sp in subplans)
            step = ProofStep(formula, RuleInstance(name, sub, ids))
        index[formula] = len(steps)
        steps.append(step)
        return index[formula]

    emit(plan)
    return Proof(hypotheses, steps)


def derive(
    p: Presentation,
    gamma: Iterable[KFormula],
    goal: KFormula,
    budget: Optional[Budget] = None,
) -> Verdict:
    """Bounded proof search.  Returns Proved with a checkable proof
    whose conclusion is exactly the goal (with hypothesis-named
    variables frozen), or Unknown with an exhaustion report.  Never
    Refuted — countermodels are the models layer's job.

    A goal-directed pre-pass catches the short proofs certificate
    obligations tend to have; forward saturation takes over when the
    goal is not within direct matching reach."""
    search = _Search(p, list(gamma), goal, budget or Budget())
    b = search.budget
    quick = _backward_proof(
        p,
        search.hypotheses,
        search.goal,
        max_depth=min(12, b.max_rounds - 1),
        node_cap=min(4000, b.max_derived),
        deadline=min(search.deadline, search.started + b.time_cap_ms / 4000.0),
    )
    if quick is not None:
        verdict = check_proof(p, quick)
        if not verdict:
            raise AssertionError(
                "internal: goal-directed proof rejected at step "
                f"{verdict.step}: {verdict.reason}"
            )
        return Proved(quick)
    search.run()
    if search.matched is None:
        return Unknown(search.report())
    proof = _reconstruct(search.store, search.hypotheses, search.matched)
    renaming = alpha_renaming(search.matched, search.goal)
    if renaming and any(v != w for v, w in renaming.items()):
        proof = proof.renamed(renaming)
    verdict = check_proof(p, proof)
    if not verdict:
        raise AssertionError(
            "internal: reconstructed proof rejected at step "
            f"{verdict.step}: {verdict.reason}"
        )
    return Proved(proof)


def bounded_consequences(
    p: Presentation,
    gamma: Iterable[KFormula],
    budget: Optional[Budget] = None,
) -> set[KFormula]:
    """The bounded under-approximation of the theory generated by
    ``gamma``: everything the saturation loop reaches within budget.
    Formulas without frozen variables come back canonicalized, so the
    result is a set of schemes rather than of alphabetic variants."""
    search = _Search(p, list(gamma), None, budget or Budget())
    search.run()
    out: set[KFormula] = set()
    for f in search.store.order:
        if any(v.frozen for v in free_variables(f)):
            out.add(f)
        else:
            out.add(canonicalize(f))
    return out
