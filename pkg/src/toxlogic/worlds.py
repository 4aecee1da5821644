"""Grounding and exact inference by weighted enumeration of possible worlds.

A ground program is a set of `ChoiceGroup`s (annotated disjunctions: exactly
one outcome, or the residual none-of-these, holds per world) plus ground
deterministic rules.  A group with a nonempty guard is active only in worlds
where every guard atom holds; its die is still rolled in every world, so the
group weight always enters the world weight, but the selected atom only
materializes under the guard.

Queries condition on evidence and sum world weights where the query holds
(the weighted-model-count reading).  Groups whose outcome atoms never feed a
guard, a rule body, or an evidence atom are statistically independent sinks:
their contribution to any query atom is a closed-form noisy-or, so only the
remaining groups are enumerated combinatorially.  The enumeration cap applies
to those combinatorial groups; exceeding it is a refusal, never an
approximation.

Evidence semantics: an evidence atom that some group or rule can produce is
conditioned on (worlds violating it are discarded and the weight
renormalized).  An evidence atom nothing in the program can produce is
treated as an exogenous supplied fact, true in every world; asserting such an
atom false is vacuous.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field, replace
from functools import cached_property

from .rulelang import Atom, Binding, Clause, Constant, ConstProb, Program, ScaledProb, Variable

DEFAULT_ENUMERATION_CAP = 20

_WEIGHT_TOL = 1e-9


class GroundingError(Exception):
    pass


class EnumerationCapError(Exception):
    pass


class InconsistentEvidenceError(Exception):
    pass


# ---------------------------------------------------------------------------
# Ground representation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChoiceGroup:
    """One ground annotated disjunction: exclusive outcomes plus residual mass."""

    id: int
    outcomes: tuple[tuple[Atom, float], ...]
    residual: float
    guard: tuple[Atom, ...] = ()
    source: str = ""

    def __str__(self) -> str:
        opts = ", ".join(f"{a}: {w:g}" for a, w in self.outcomes)
        guard = f" :- {', '.join(map(str, self.guard))}" if self.guard else ""
        return f"group {self.id} {{{opts}; residual {self.residual:g}}}{guard}"


@dataclass(frozen=True)
class GroundRule:
    head: Atom
    body: tuple[Atom, ...]
    source: str = ""

    def __str__(self) -> str:
        if not self.body:
            return f"{self.head}."
        return f"{self.head} :- {', '.join(map(str, self.body))}."


@dataclass(frozen=True)
class World:
    """A complete selection: one outcome index per group (-1 for residual)."""

    selection: tuple[int, ...]
    weight: float


@dataclass(frozen=True)
class Posterior:
    """Per-label conditional probabilities, with the evidence probability."""

    entries: dict[Atom, float]
    evidence_probability: float
    argmax: Atom

    def normalized(self) -> dict[Atom, float]:
        total = sum(self.entries.values())
        if total <= 0.0:
            raise InconsistentEvidenceError("all labels have zero probability")
        return {a: v / total for a, v in self.entries.items()}


@dataclass(frozen=True)
class GroundProgram:
    groups: tuple[ChoiceGroup, ...]
    rules: tuple[GroundRule, ...]
    evidence: tuple[tuple[Atom, bool], ...] = ()

    def with_group(self, outcomes, residual: float, guard=(), source: str = "") -> "GroundProgram":
        group = ChoiceGroup(len(self.groups), tuple(outcomes), residual, tuple(guard), source)
        return replace(self, groups=self.groups + (group,))

    @cached_property
    def _prep(self) -> "_Prepared":
        return _Prepared(self)


# ---------------------------------------------------------------------------
# Grounding
# ---------------------------------------------------------------------------

def _object_vars(clause: Clause) -> list[Variable]:
    seen: list[Variable] = []
    for atom in clause.head_atoms() + clause.body_atoms():
        for term in atom.args:
            if isinstance(term, Variable) and term not in seen:
                seen.append(term)
    return seen


def _subst(atom: Atom, env: dict[Variable, Constant]) -> Atom:
    return Atom(atom.predicate, tuple(env.get(t, t) if isinstance(t, Variable) else t
                                      for t in atom.args))


def ground(program: Program, individuals: list[str]) -> GroundProgram:
    """Instantiate every clause over the given individuals.

    Annotated clauses become choice groups (guarded by their ground body
    atoms); deterministic clauses become ground rules.  Scaled annotations are
    resolved against the clause's ``is`` bindings.  Raises `GroundingError`
    for cyclic dependencies, weight sums above one, or duplicate ground head
    atoms within one group.
    """
    if not individuals:
        raise GroundingError("at least one individual is required")
    consts = [Constant(name) for name in individuals]
    groups: list[ChoiceGroup] = []
    rules: list[GroundRule] = []
    for idx, clause in enumerate(program.clauses, start=1):
        variables = _object_vars(clause)
        bound = {b.var: b.value for b in clause.bindings()}
        for combo in itertools.product(consts, repeat=len(variables)):
            env = dict(zip(variables, combo))
            head = [(_resolve_prob(p, bound, idx), _subst(a, env)) for p, a in clause.head]
            body = tuple(_subst(a, env) for a in clause.body_atoms())
            source = f"clause {idx}: {clause}"
            if clause.deterministic:
                rules.append(GroundRule(head[0][1], body, source))
                continue
            atoms = [a for _, a in head]
            if len(set(atoms)) != len(atoms):
                raise GroundingError(f"{source}: duplicate ground head atom after substitution")
            total = sum(w for w, _ in head)
            if total > 1.0 + _WEIGHT_TOL:
                raise GroundingError(f"{source}: outcome weights sum to {total:g} > 1")
            residual = max(0.0, 1.0 - total)
            groups.append(ChoiceGroup(len(groups), tuple((a, w) for w, a in head),
                                      residual, body, source))
    for atom, _ in program.evidence:
        if any(isinstance(t, Variable) for t in atom.args):
            raise GroundingError(f"evidence atom {atom} is not ground")
    gp = GroundProgram(tuple(groups), tuple(rules), program.evidence)
    gp._prep  # validates acyclicity eagerly
    return gp


def _resolve_prob(prob, bound: dict[Variable, float], idx: int) -> float:
    if isinstance(prob, ConstProb):
        return prob.value
    if isinstance(prob, ScaledProb):
        if prob.var not in bound:
            raise GroundingError(f"clause {idx}: probability variable {prob.var} unresolved")
        return prob.coefficient * bound[prob.var]
    raise GroundingError(f"clause {idx}: unknown probability expression {prob!r}")


# ---------------------------------------------------------------------------
# Prepared (indexed) form
# ---------------------------------------------------------------------------

class _Prepared:
    """Bitmask-indexed view of a ground program, shared across queries."""

    def __init__(self, gp: GroundProgram):
        self.gp = gp
        self.atom_bit: dict[Atom, int] = {}

        def bit(atom: Atom) -> int:
            b = self.atom_bit.get(atom)
            if b is None:
                b = 1 << len(self.atom_bit)
                self.atom_bit[atom] = b
            return b

        structural = 0
        self.rules: list[tuple[int, int]] = []  # (body_mask, head_bit)
        for rule in gp.rules:
            body_mask = 0
            for a in rule.body:
                body_mask |= bit(a)
            structural |= body_mask
            self.rules.append((body_mask, bit(rule.head)))

        # choices: (outcome index, weight, atom bit); residual only if positive
        self.choices: list[list[tuple[int, float, int]]] = []
        self.guard_masks: list[int] = []
        self.outcome_weight: list[dict[Atom, float]] = []
        derivers: dict[Atom, list[int]] = {}
        for g in gp.groups:
            guard_mask = 0
            for a in g.guard:
                guard_mask |= bit(a)
            structural |= guard_mask
            options = [(i, w, bit(a)) for i, (a, w) in enumerate(g.outcomes) if w > 0.0]
            if g.residual > 0.0:
                options.append((-1, g.residual, 0))
            if not options:
                raise GroundingError(f"{g.source or g}: no positive-weight outcome")
            self.choices.append(options)
            self.guard_masks.append(guard_mask)
            self.outcome_weight.append({a: w for a, w in g.outcomes if w > 0.0})
            for a, w in g.outcomes:
                if w > 0.0:
                    derivers.setdefault(a, []).append(g.id)

        rule_heads = {rule.head for rule in gp.rules}
        self.rule_heads = rule_heads
        self.derivers = derivers
        self.structural_mask = structural
        # groups whose outcomes can influence guards or rule bodies must be
        # enumerated; the rest are closed-form sinks unless evidence touches them
        self.base_enumerated = [
            g.id for g in gp.groups
            if any(self.atom_bit[a] & structural for a, w in g.outcomes if w > 0.0)
        ]
        self.base_sinks = [g.id for g in gp.groups if g.id not in set(self.base_enumerated)]
        self._check_acyclic()

    def bit_of(self, atom: Atom) -> int:
        return self.atom_bit.get(atom, 0)

    def _check_acyclic(self) -> None:
        edges: dict[Atom, set[Atom]] = {}
        for rule in self.gp.rules:
            for a in rule.body:
                edges.setdefault(a, set()).add(rule.head)
        for g in self.gp.groups:
            for a in g.guard:
                for out, w in g.outcomes:
                    if w > 0.0:
                        edges.setdefault(a, set()).add(out)
        state: dict[Atom, int] = {}

        def visit(node: Atom) -> None:
            state[node] = 1
            for nxt in edges.get(node, ()):
                mark = state.get(nxt, 0)
                if mark == 1:
                    raise GroundingError(f"cyclic dependency through {nxt}")
                if mark == 0:
                    visit(nxt)
            state[node] = 2

        for node in list(edges):
            if state.get(node, 0) == 0:
                visit(node)

    def closure(self, base_mask: int, selections: dict[int, int]) -> int:
        """Least model over the given group selections plus exogenous facts.

        ``selections`` maps group id to the bit of its selected outcome
        (0 for residual).  Guards gate outcome materialization, so the
        computation iterates to a fixpoint; acyclicity bounds the passes.
        """
        truth = base_mask
        guard_masks = self.guard_masks
        rules = self.rules
        changed = True
        while changed:
            changed = False
            for gid, atom_bit in selections.items():
                if atom_bit and not truth & atom_bit and (truth & guard_masks[gid]) == guard_masks[gid]:
                    truth |= atom_bit
                    changed = True
            for body_mask, head_bit in rules:
                if not truth & head_bit and (truth & body_mask) == body_mask:
                    truth |= head_bit
                    changed = True
        return truth


# ---------------------------------------------------------------------------
# Evidence preparation
# ---------------------------------------------------------------------------

def _split_evidence(prep: _Prepared, evidence):
    """Partition evidence into conditioned masks and exogenous facts.

    Returns (true_mask, false_mask, exogenous_mask, conditioned_atoms,
    conditioned_true_atoms).
    """
    true_mask = 0
    false_mask = 0
    exo_mask = 0
    conditioned: list[Atom] = []
    conditioned_true: list[Atom] = []
    wanted: dict[Atom, bool] = {}
    for atom, truth in evidence:
        if atom in wanted and wanted[atom] != truth:
            raise InconsistentEvidenceError(f"evidence asserts {atom} both true and false")
        wanted[atom] = truth
    for atom, truth in wanted.items():
        derivable = atom in prep.derivers or atom in prep.rule_heads
        if not derivable:
            if truth:
                exo_mask |= _exo_bit(prep, atom)
            # asserting an underivable atom false is vacuous (closed world)
            continue
        bit = prep.bit_of(atom)
        conditioned.append(atom)
        if truth:
            true_mask |= bit
            conditioned_true.append(atom)
        else:
            false_mask |= bit
    return true_mask, false_mask, exo_mask, conditioned, conditioned_true


def _exo_bit(prep: _Prepared, atom: Atom) -> int:
    bit = prep.atom_bit.get(atom)
    if bit is None:
        bit = 1 << len(prep.atom_bit)
        prep.atom_bit[atom] = bit
    return bit


# ---------------------------------------------------------------------------
# Inference
# ---------------------------------------------------------------------------

def _sweep(gp: GroundProgram, labels, evidence, cap: int | None):
    """Shared enumeration: returns (per-label numerators, evidence weight)."""
    prep = gp._prep
    ev = gp.evidence if evidence is None else tuple(evidence)
    cap = DEFAULT_ENUMERATION_CAP if cap is None else cap
    true_mask, false_mask, exo_mask, conditioned, conditioned_true = _split_evidence(prep, ev)

    ev_atoms = set(conditioned)
    enumerated = list(prep.base_enumerated)
    enumerated_set = set(enumerated)
    for g in gp.groups:
        if g.id not in enumerated_set and any(a in ev_atoms for a, w in g.outcomes if w > 0.0):
            enumerated.append(g.id)
            enumerated_set.add(g.id)
    sinks = [gid for gid in range(len(gp.groups)) if gid not in enumerated_set]

    if len(enumerated) > cap:
        raise EnumerationCapError(
            f"{len(enumerated)} choice groups require enumeration, cap is {cap}")

    # pin groups forced by positive evidence on an atom only they can produce
    choice_lists: list[tuple[int, list[tuple[int, float, int]]]] = []
    for gid in enumerated:
        options = prep.choices[gid]
        pinned = None
        for atom in conditioned_true:
            owners = prep.derivers.get(atom, [])
            if owners == [gid] and atom not in prep.rule_heads:
                want_bit = prep.bit_of(atom)
                keep = [opt for opt in options if opt[2] == want_bit]
                # pinning is a pruning aid only; the evidence check below is
                # still authoritative (guards can defeat a pinned selection)
                if keep:
                    pinned = keep
                break
        choice_lists.append((gid, pinned if pinned is not None else options))

    label_list = list(labels)
    label_bits = [prep.bit_of(a) for a in label_list]
    # per sink group: (guard_mask, [(label position, 1 - weight), ...])
    sink_terms: list[tuple[int, list[tuple[int, float]]]] = []
    for gid in sinks:
        weights = prep.outcome_weight[gid]
        terms = [(i, 1.0 - weights[a]) for i, a in enumerate(label_list) if a in weights]
        if terms:
            sink_terms.append((prep.guard_masks[gid], terms))

    nums = [0.0] * len(label_list)
    den = 0.0
    gids = [gid for gid, _ in choice_lists]
    guard_masks = prep.guard_masks
    for combo in itertools.product(*(opts for _, opts in choice_lists)):
        weight = 1.0
        for _, w, _bit in combo:
            weight *= w
        selections = {gid: c[2] for gid, c in zip(gids, combo)}
        truth = prep.closure(exo_mask, selections)
        if (truth & true_mask) != true_mask or truth & false_mask:
            continue
        den += weight
        residuals = None
        for pos, lbit in enumerate(label_bits):
            if lbit and truth & lbit:
                nums[pos] += weight
                continue
            if residuals is None:
                residuals = [1.0] * len(label_list)
                for guard_mask, terms in sink_terms:
                    if (truth & guard_mask) == guard_mask:
                        for pos2, one_minus in terms:
                            residuals[pos2] *= one_minus
            nums[pos] += weight * (1.0 - residuals[pos])
    return label_list, nums, den


def query_probability(gp: GroundProgram, query: Atom, evidence=None,
                      cap: int | None = None) -> float:
    """Conditional probability of ``query`` given the evidence.

    Uses the program's own evidence when ``evidence`` is None.  Raises
    `EnumerationCapError` when too many groups need combinatorial
    enumeration and `InconsistentEvidenceError` when the evidence has zero
    probability.
    """
    _, nums, den = _sweep(gp, [query], evidence, cap)
    if den <= 0.0:
        raise InconsistentEvidenceError("evidence has probability 0")
    return nums[0] / den


def posterior(gp: GroundProgram, labels, evidence=None, cap: int | None = None) -> Posterior:
    """Conditional probability for every label, with a deterministic argmax.

    Exact probability ties are broken toward the lexicographically smallest
    label text.
    """
    label_list, nums, den = _sweep(gp, labels, evidence, cap)
    if not label_list:
        raise ValueError("labels must be nonempty")
    if den <= 0.0:
        raise InconsistentEvidenceError("evidence has probability 0")
    entries = {a: n / den for a, n in zip(label_list, nums)}
    argmax = min(label_list, key=lambda a: (-entries[a], str(a)))
    return Posterior(entries, den, argmax)


def holds(world: World, gp: GroundProgram, atom: Atom) -> bool:
    """True iff the atom is selected (with its guard met) or rule-derivable."""
    prep = gp._prep
    selections = _world_selections(prep, world)
    truth = prep.closure(0, selections)
    bit = prep.bit_of(atom)
    return bool(bit and truth & bit)


def _world_selections(prep: _Prepared, world: World) -> dict[int, int]:
    if len(world.selection) != len(prep.gp.groups):
        raise ValueError("world selection length does not match group count")
    selections: dict[int, int] = {}
    for gid, idx in enumerate(world.selection):
        if idx == -1:
            selections[gid] = 0
        else:
            atom, w = prep.gp.groups[gid].outcomes[idx]
            selections[gid] = prep.bit_of(atom)
    return selections


def iter_worlds(gp: GroundProgram, max_worlds: int = 1_000_000):
    """Yield every positive-weight world (full cross product of all groups)."""
    prep = gp._prep
    count = 1
    for options in prep.choices:
        count *= len(options)
        if count > max_worlds:
            raise EnumerationCapError(f"more than {max_worlds} worlds")
    for combo in itertools.product(*prep.choices):
        weight = 1.0
        for _, w, _bit in combo:
            weight *= w
        yield World(tuple(idx for idx, _, _ in combo), weight)


def explain(gp: GroundProgram, label: Atom, evidence=None, top_n: int = 3,
            max_pops: int = 200_000):
    """Heaviest evidence-consistent worlds in which the label holds.

    Returns up to ``top_n`` tuples ``(world, weight, fired_rules)`` in
    descending weight order, where ``fired_rules`` lists the ground rule
    instances participating in the label's derivation (empty when the label
    holds by direct selection).  Weights sum to at most the label's
    unnormalized evidence-consistent mass.
    """
    if top_n <= 0:
        return []
    prep = gp._prep
    ev = gp.evidence if evidence is None else tuple(evidence)
    true_mask, false_mask, exo_mask, conditioned, conditioned_true = _split_evidence(prep, ev)

    ranked: list[list[tuple[int, float, int]]] = []
    for gid in range(len(gp.groups)):
        options = prep.choices[gid]
        for atom in conditioned_true:
            owners = prep.derivers.get(atom, [])
            if owners == [gid] and atom not in prep.rule_heads:
                want_bit = prep.bit_of(atom)
                keep = [opt for opt in options if opt[2] == want_bit]
                if keep:
                    options = keep
                break
        ranked.append(sorted(options, key=lambda o: (-o[1], o[0])))

    def world_at(ranks: tuple[int, ...]) -> tuple[tuple[int, ...], float, dict[int, int]]:
        sel = []
        weight = 1.0
        selections = {}
        for gid, r in enumerate(ranks):
            idx, w, bit = ranked[gid][r]
            sel.append(idx)
            weight *= w
            selections[gid] = bit
        return tuple(sel), weight, selections

    label_bit = prep.bit_of(label)
    start = tuple(0 for _ in ranked)
    _, w0, _ = world_at(start)
    heap = [(-w0, start, 0)]
    seen = {start}
    results = []
    pops = 0
    while heap and len(results) < top_n:
        pops += 1
        if pops > max_pops:
            raise EnumerationCapError(f"explain search exceeded {max_pops} worlds")
        neg_w, ranks, frontier = heapq.heappop(heap)
        selection, weight, selections = world_at(ranks)
        truth = prep.closure(exo_mask, selections)
        ok = (truth & true_mask) == true_mask and not truth & false_mask
        if ok and label_bit and truth & label_bit:
            world = World(selection, weight)
            results.append((world, weight, _fired_rules(prep, truth, label)))
        for gid in range(frontier, len(ranked)):
            if ranks[gid] + 1 < len(ranked[gid]):
                child = ranks[:gid] + (ranks[gid] + 1,) + ranks[gid + 1:]
                if child not in seen:
                    seen.add(child)
                    _, w, _ = world_at(child)
                    heapq.heappush(heap, (-w, child, gid))
    return results


def _fired_rules(prep: _Prepared, truth: int, label: Atom) -> tuple[GroundRule, ...]:
    fired = [(rule, mask) for rule, (mask, head_bit) in zip(prep.gp.rules, prep.rules)
             if (truth & mask) == mask and truth & head_bit]
    needed = {label}
    changed = True
    while changed:
        changed = False
        for rule, _ in fired:
            if rule.head in needed:
                for a in rule.body:
                    if a not in needed:
                        needed.add(a)
                        changed = True
    return tuple(rule for rule, _ in fired if rule.head in needed)
