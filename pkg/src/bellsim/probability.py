"""Finite discrete probability tables with tagged conditioning slots.

A :class:`TaggedJoint` is a joint distribution over named finite variables
together with the assignments it is conditioned on.  Every conditioning slot
carries a :class:`Modality` tag: ``FACTUAL`` for propositions the owner has
locally verified, ``COUNTERFACTUAL`` for propositions merely posited "if
true".  The tag never changes a number -- conditioning is ordinary
probability conditioning either way -- it changes what may be *claimed*
about the result, and downstream code reads the claim off the tags.

Rendering uses a double-bar grammar that is a stable text format:
counterfactual slots sit between two single bars, factual slots follow a
double bar, e.g. ``P_A(±b|θb|±a,θa,ψ0,t±)`` or ``P_A(±b,θb‖±a,θa,ψ0,t±)``.

All tables are immutable after construction and every operation is a pure
function, so values may be shared freely across threads.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .errors import ImpossibleEvidenceError

#: Tolerance for every normalization / equality comparison in this module.
TOL = 1e-12


class Modality(Enum):
    FACTUAL = "factual"
    COUNTERFACTUAL = "counterfactual"


@dataclass(frozen=True)
class Variable:
    """A named proposition with an ordered finite domain.

    The domain order is fixed and meaningful: it is used for deterministic
    tie-breaking in argmax queries and for the fixed cell order of samplers.
    """

    name: str
    domain: tuple

    def __post_init__(self):
        if not self.domain:
            raise ValueError(f"variable {self.name!r} needs a non-empty domain")
        if len(set(self.domain)) != len(self.domain):
            raise ValueError(f"variable {self.name!r} has duplicate domain values")

    def index(self, value) -> int:
        try:
            return self.domain.index(value)
        except ValueError:
            raise ValueError(f"{value!r} not in domain of {self.name!r}: {self.domain}") from None

    @classmethod
    def singleton(cls, label: str) -> "Variable":
        return cls(label, (label,))


@dataclass(frozen=True)
class Conditioner:
    """One conditioning slot: a variable pinned to a value, with its tag."""

    variable: Variable
    value: Any
    modality: Modality


def _as_name(v) -> str:
    return v.name if isinstance(v, Variable) else str(v)


class TaggedJoint:
    """Joint distribution over free variables, given tagged conditioners."""

    __slots__ = ("free", "conditioners", "array", "label")

    def __init__(
        self,
        free: Sequence[Variable],
        probabilities,
        conditioners: Sequence[Conditioner] = (),
        label: str = "",
    ):
        free = tuple(free)
        conditioners = tuple(conditioners)
        arr = np.asarray(probabilities, dtype=float)
        shape = tuple(len(v.domain) for v in free)
        if arr.shape != shape:
            raise ValueError(f"probability array shape {arr.shape} does not match domains {shape}")
        names = [v.name for v in free]
        if len(set(names)) != len(names):
            raise ValueError("free variables must have distinct names")
        cond_names = [c.variable.name for c in conditioners]
        if len(set(cond_names)) != len(cond_names):
            raise ValueError("conditioners must have distinct names")
        overlap = set(names) & set(cond_names)
        if overlap:
            raise ValueError(f"variables both free and conditioned: {sorted(overlap)}")
        if arr.min(initial=0.0) < -TOL:
            raise ValueError("negative probability entry")
        arr = np.where(arr < 0.0, 0.0, arr)
        total = float(arr.sum())
        if abs(total - 1.0) > TOL:
            raise ValueError(f"probabilities sum to {total!r}, not 1")
        arr.setflags(write=False)
        self.free = free
        self.conditioners = conditioners
        self.array = arr
        self.label = label

    # -- lookups ---------------------------------------------------------

    @property
    def free_names(self) -> tuple:
        return tuple(v.name for v in self.free)

    def variable(self, name) -> Variable:
        name = _as_name(name)
        for v in self.free:
            if v.name == name:
                return v
        raise KeyError(f"{name!r} is not a free variable of {self.render()}")

    def conditioned_value(self, name):
        name = _as_name(name)
        for c in self.conditioners:
            if c.variable.name == name:
                return c.value
        raise KeyError(f"{name!r} is not a conditioner of {self.render()}")

    def prob(self, assignment: Mapping[str, Any]) -> float:
        """Probability of a full assignment of the free variables."""
        idx = tuple(v.index(assignment[v.name]) for v in self.free)
        return float(self.array[idx])

    # -- structure helpers ------------------------------------------------

    def relabel(self, label: str) -> "TaggedJoint":
        return TaggedJoint(self.free, self.array, self.conditioners, label)

    def with_conditioners(self, conditioners: Sequence[Conditioner]) -> "TaggedJoint":
        return TaggedJoint(self.free, self.array, tuple(conditioners), self.label)

    def reorder(self, names: Sequence) -> "TaggedJoint":
        """Permute the free variables into the given name order."""
        wanted = [_as_name(n) for n in names]
        if sorted(wanted) != sorted(self.free_names):
            raise ValueError(f"reorder names {wanted} must be a permutation of {self.free_names}")
        perm = [self.free_names.index(n) for n in wanted]
        arr = np.transpose(self.array, perm) if perm else self.array
        return TaggedJoint([self.free[i] for i in perm], arr, self.conditioners, self.label)

    def equals(self, other: "TaggedJoint", tol: float = TOL, ignore_modality: bool = True) -> bool:
        """Entrywise equality after aligning axes by variable name.

        Conditioners must match as (name, value) pairs; modality is ignored
        by default because the tag never carries numerical content.
        """
        if sorted(self.free_names) != sorted(other.free_names):
            return False
        for a, b in zip(sorted(self.free, key=lambda v: v.name), sorted(other.free, key=lambda v: v.name)):
            if a != b:
                return False

        def key(c):
            return (c.variable.name, c.value) if ignore_modality else (c.variable.name, c.value, c.modality)

        if sorted(map(key, self.conditioners), key=repr) != sorted(map(key, other.conditioners), key=repr):
            return False
        perm = [other.free_names.index(n) for n in self.free_names]
        arr = np.transpose(other.array, perm) if perm else other.array
        return bool(np.max(np.abs(self.array - arr), initial=0.0) <= tol)

    # -- rendering ---------------------------------------------------------

    def render(self) -> str:
        """Double-bar grammar: ``P_<obs>(<free>|<counterfactual>|<factual>)``.

        An empty counterfactual slot collapses the two bars into ``‖``; with
        no conditioners at all the bars disappear entirely.
        """
        head = f"P_{self.label}" if self.label else "P"
        free = ",".join(self.free_names)
        cf = ",".join(c.variable.name for c in self.conditioners if c.modality is Modality.COUNTERFACTUAL)
        fact = ",".join(c.variable.name for c in self.conditioners if c.modality is Modality.FACTUAL)
        if not self.conditioners:
            return f"{head}({free})"
        if cf:
            return f"{head}({free}|{cf}|{fact})"
        return f"{head}({free}‖{fact})"

    def __repr__(self):
        return f"<TaggedJoint {self.render()}>"


class ConditionalTable:
    """``p(free | given)`` on finite domains, with a conditioning context.

    The array axes are ordered free variables first, then given variables.
    Slices whose marginal vanished are stored as all-zero: the conditional is
    undefined there, and any product with a marginal must put zero mass on
    such slices.
    """

    __slots__ = ("free", "given", "array", "conditioners", "label")

    def __init__(self, free, given, table, conditioners=(), label=""):
        free = tuple(free)
        given = tuple(given)
        arr = np.asarray(table, dtype=float)
        shape = tuple(len(v.domain) for v in free) + tuple(len(v.domain) for v in given)
        if arr.shape != shape:
            raise ValueError(f"table shape {arr.shape} does not match domains {shape}")
        if arr.min(initial=0.0) < -TOL:
            raise ValueError("negative probability entry")
        arr = np.where(arr < 0.0, 0.0, arr)
        nfree = int(np.prod([len(v.domain) for v in free], dtype=int)) if free else 1
        sums = arr.reshape(nfree, -1).sum(axis=0)
        bad = np.abs(sums - 1.0) > TOL
        if np.any(bad & (sums > TOL)):
            raise ValueError("a conditional slice sums to neither 1 nor 0")
        arr.setflags(write=False)
        self.free = free
        self.given = given
        self.array = arr
        self.conditioners = tuple(conditioners)
        self.label = label

    @property
    def free_names(self):
        return tuple(v.name for v in self.free)

    @property
    def given_names(self):
        return tuple(v.name for v in self.given)


# ---------------------------------------------------------------------------
# operations


def condition(d: TaggedJoint, assignment, modality: Modality = Modality.FACTUAL) -> TaggedJoint:
    """Move a free variable into the conditioners, pinned to ``value``.

    Numerically this is plain conditioning by the product rule regardless of
    the tag.  Conditioning on a zero-probability assignment raises
    :class:`ImpossibleEvidenceError`; for factual receptions the caller turns
    that into a realism violation.
    """
    name, value = assignment
    var = d.variable(name)
    axis = d.free.index(var)
    slab = np.take(d.array, var.index(value), axis=axis)
    norm = float(slab.sum())
    if norm <= TOL:
        raise ImpossibleEvidenceError(
            f"assignment {var.name}={value!r} has probability {norm:.3e} under {d.render()}"
        )
    rest = d.free[:axis] + d.free[axis + 1 :]
    conds = (Conditioner(var, value, modality),) + d.conditioners
    return TaggedJoint(rest, slab / norm, conds, d.label)


def marginalize(d: TaggedJoint, variable) -> TaggedJoint:
    """Sum a free variable out, by an ordered left-to-right fold.

    The result reads as "probability of the rest and (v or not v)": the
    disjunction over the full domain is certainly true, so nothing but the
    summed variable changes.
    """
    var = d.variable(variable)
    axis = d.free.index(var)
    moved = np.moveaxis(d.array, axis, 0)
    acc = np.array(moved[0], dtype=float, copy=True)
    for k in range(1, moved.shape[0]):
        acc = acc + moved[k]
    rest = d.free[:axis] + d.free[axis + 1 :]
    return TaggedJoint(rest, acc, d.conditioners, d.label)


def keep_only(d: TaggedJoint, names: Iterable) -> TaggedJoint:
    """Marginalize out every free variable not listed, then order as listed."""
    keep = [_as_name(n) for n in names]
    out = d
    for n in list(out.free_names):
        if n not in keep:
            out = marginalize(out, n)
    return out.reorder([n for n in keep if n in out.free_names])


def condition_table(d: TaggedJoint, variable) -> ConditionalTable:
    """Rewrite the joint as ``p(rest | v)`` over v's whole domain."""
    var = d.variable(variable)
    axis = d.free.index(var)
    moved = np.moveaxis(d.array, axis, -1)
    n = len(var.domain)
    flat = moved.reshape(-1, n)
    norms = flat.sum(axis=0)
    out = np.zeros_like(moved)
    for j in range(n):
        if norms[j] > TOL:
            out[..., j] = moved[..., j] / norms[j]
    rest = d.free[:axis] + d.free[axis + 1 :]
    return ConditionalTable(rest, (var,), out, d.conditioners, d.label)


def product(conditional: ConditionalTable, marginal: TaggedJoint) -> TaggedJoint:
    """Recombine ``p(rest | v)`` with a marginal over v into a joint.

    The conditional's given variables must be exactly the marginal's free
    variables.  Conditioning contexts are merged and must agree wherever they
    overlap.
    """
    if sorted(conditional.given_names) != sorted(marginal.free_names):
        raise ValueError(
            f"conditioning variables {conditional.given_names} do not match "
            f"marginal's free variables {marginal.free_names}"
        )
    aligned = marginal.reorder(conditional.given_names)
    out = conditional.array * aligned.array
    merged = list(conditional.conditioners)
    have = {c.variable.name: c for c in merged}
    for c in marginal.conditioners:
        prev = have.get(c.variable.name)
        if prev is None:
            merged.append(c)
        elif prev.value != c.value:
            raise ValueError(f"conflicting conditioner {c.variable.name!r}")
    free = conditional.free + conditional.given
    return TaggedJoint(free, out, tuple(merged), conditional.label or marginal.label)


def bayes_invert(prior: TaggedJoint, likelihood: ConditionalTable, observed,
                 modality: Modality = Modality.FACTUAL) -> TaggedJoint:
    """Posterior over the prior's variables given one observed value.

    ``likelihood`` must be ``p(b | a...)`` with a single free variable b and
    given variables exactly the prior's free variables; the result is
    ``p(a... | b=observed) = p(b|a...) p(a...) / p(b)``.
    """
    if len(likelihood.free) != 1:
        raise ValueError("likelihood must have exactly one free variable")
    (bvar,) = likelihood.free
    if sorted(likelihood.given_names) != sorted(prior.free_names):
        raise ValueError(
            f"likelihood conditions on {likelihood.given_names}, "
            f"prior is over {prior.free_names}"
        )
    slab = np.take(likelihood.array, bvar.index(observed), axis=0)
    perm = [likelihood.given_names.index(n) for n in prior.free_names]
    slab = np.transpose(slab, perm) if perm else slab
    joint = slab * prior.array
    norm = float(joint.sum())
    if norm <= TOL:
        raise ImpossibleEvidenceError(f"evidence {bvar.name}={observed!r} has probability {norm:.3e}")
    merged = [Conditioner(bvar, observed, modality)] + list(prior.conditioners)
    have = {c.variable.name for c in merged}
    for c in likelihood.conditioners:
        if c.variable.name not in have:
            merged.append(c)
    return TaggedJoint(prior.free, joint / norm, tuple(merged), prior.label or likelihood.label)


# ---------------------------------------------------------------------------
# factorization enumeration


@dataclass(frozen=True)
class Factorization:
    """Chain-rule rewrite ``p(B1|B2..Bm) p(B2|B3..Bm) ... p(Bm)``.

    Blocks are disjoint groups of free variables; an all-singleton block list
    is an ordinary chain ordering.
    """

    blocks: tuple

    def describe(self) -> str:
        parts = []
        for k, block in enumerate(self.blocks):
            head = ",".join(v.name for v in block)
            tail = ",".join(v.name for b in self.blocks[k + 1 :] for v in b)
            parts.append(f"p({head}|{tail})" if tail else f"p({head})")
        return "".join(parts)

    def remultiply(self, d: TaggedJoint) -> np.ndarray:
        """Evaluate the chain and return the joint array aligned to ``d``.

        Factors on zero-probability context cells use the 0/0 -> 0
        convention, so the product reproduces the original table exactly on
        its support and stays zero off it.
        """
        arr = d.array
        axes = {v.name: i for i, v in enumerate(d.free)}

        def marg(keep_names):
            drop = tuple(i for n, i in axes.items() if n not in keep_names)
            return arr.sum(axis=drop, keepdims=True) if drop else arr

        result = np.ones((1,) * arr.ndim)
        suffix: set = set()
        for block in reversed(self.blocks):
            names = {v.name for v in block}
            upper = marg(suffix | names)
            lower = marg(suffix) if suffix else np.ones((1,) * arr.ndim)
            with np.errstate(divide="ignore", invalid="ignore"):
                factor = np.where(lower > 0.0, upper / np.where(lower > 0.0, lower, 1.0), 0.0)
            result = result * factor
            suffix |= names
        return result


def enumerate_factorizations(d: TaggedJoint, ordered_blocks: bool = False) -> tuple:
    """All chain-rule rewrites of the joint.

    With ``ordered_blocks=False``: the n! single-variable chain orderings.
    With ``ordered_blocks=True``: every ordered partition of the variables
    into blocks, from the single-block identity to the fully factored chains.
    """
    if not d.free:
        raise ValueError("cannot factorize a joint with no free variables")
    if not ordered_blocks:
        return tuple(
            Factorization(tuple((v,) for v in perm)) for perm in itertools.permutations(d.free)
        )

    def partitions(items):
        if not items:
            yield ()
            return
        first, rest = items[0], items[1:]
        for r in range(len(rest) + 1):
            for extra in itertools.combinations(rest, r):
                block = (first,) + extra
                remainder = tuple(v for v in rest if v not in extra)
                for tail in partitions(remainder):
                    yield (block,) + tail

    out = []
    for part in partitions(d.free):
        for ordering in itertools.permutations(part):
            out.append(Factorization(ordering))
    return tuple(out)


def render(d: TaggedJoint) -> str:
    return d.render()
