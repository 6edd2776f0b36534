"""Per-observer belief ledgers driven by locally received events.

Each observer keeps a :class:`~bellsim.probability.TaggedJoint` over the four
data propositions (own/far setting and outcome).  Factual conditioning happens
only when an event physically arrives on the observer's worldline; anything
not yet received can still be *inquired about* counterfactually, which is
numerically ordinary conditioning but keeps the counterfactual tag.  After
both wings exchange reports, the two ledgers pool into a single product of
measurement-uncertainty factors from which the trial's data point is read.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Iterable, Mapping

import numpy as np

from .errors import ImpossibleEvidenceError, RealismViolationError
from .models import Behavior, ChshSettings
from .probability import (
    TOL,
    Conditioner,
    Modality,
    TaggedJoint,
    Variable,
    condition,
    condition_table,
    keep_only,
    product,
)
from .spacetime import (
    PREPARED_SYMBOL,
    Detection,
    Message,
    SettingChoice,
    SpacetimeEvent,
    StatePreparation,
    Worldline,
    outcome_symbol,
    reception_time,
    setting_symbol,
)

OUTCOME_VALUES = (1, -1)

#: Canonical free-variable order for ledgers over the four data propositions.
CANONICAL = ("±a", "θa", "±b", "θb")


class Stage(Enum):
    """The four stage labels an observer's clock moves through."""

    INITIAL = "t0"
    SETTING = "tθ"
    DETECTION = "t±"
    COMMUNICATION = "tc"


_STAGE_ORDER = {s: i for i, s in enumerate(Stage)}


def stage_variable(stage: Stage) -> Variable:
    return Variable.singleton(stage.value)


def _payload_stage(payload) -> Stage:
    if isinstance(payload, StatePreparation):
        return Stage.INITIAL
    if isinstance(payload, SettingChoice):
        return Stage.SETTING
    if isinstance(payload, Detection):
        return Stage.DETECTION
    if isinstance(payload, Message):
        return Stage.COMMUNICATION
    raise TypeError(f"unknown payload {payload!r}")


@dataclass(frozen=True)
class QUncertainty:
    """Measurement-uncertainty distribution over one variable's domain."""

    variable: Variable
    weights: tuple

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (len(self.variable.domain),):
            raise ValueError("weights must cover the variable's domain")
        if w.min() < -TOL or abs(w.sum() - 1.0) > TOL:
            raise ValueError("weights must form a distribution")

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=float)

    @property
    def is_delta(self) -> bool:
        return max(self.weights) >= 1.0 - TOL

    def mode(self):
        return self.variable.domain[int(np.argmax(self.array))]

    @classmethod
    def delta(cls, variable: Variable, value) -> "QUncertainty":
        w = [0.0] * len(variable.domain)
        w[variable.index(value)] = 1.0
        return cls(variable, tuple(w))

    @classmethod
    def peaked(cls, variable: Variable, center, width: float) -> "QUncertainty":
        """Discrete bump around ``center``; ``width`` is in grid steps."""
        if width <= 0.0:
            return cls.delta(variable, center)
        k = variable.index(center)
        w = [math.exp(-((i - k) ** 2) / (2.0 * width**2)) for i in range(len(variable.domain))]
        norm = sum(w)
        return cls(variable, tuple(v / norm for v in w))

    @classmethod
    def two_point(cls, variable: Variable, first, second) -> "QUncertainty":
        w = [0.0] * len(variable.domain)
        w[variable.index(first)] += 0.5
        w[variable.index(second)] += 0.5
        return cls(variable, tuple(w))

    @classmethod
    def uniform(cls, variable: Variable) -> "QUncertainty":
        n = len(variable.domain)
        return cls(variable, tuple(1.0 / n for _ in range(n)))


@dataclass(frozen=True)
class ObserverState:
    """One observer's information and beliefs at a point on their worldline.

    ``received`` is exactly the information the observer possesses; the
    ledger's factual conditioners never go beyond it (plus the shared
    prepared state and the stage label).  States are immutable; every update
    returns a new state.
    """

    observer: str
    worldline: Worldline | None
    ledger: TaggedJoint
    stage: Stage
    received: tuple = ()
    clock: float = float("-inf")
    factual: Mapping[str, Any] = None
    qs: Mapping[str, QUncertainty] = None
    uncertain: frozenset = frozenset()
    initial_ledger: TaggedJoint = None
    history: tuple = ()

    def __post_init__(self):
        if self.factual is None:
            object.__setattr__(self, "factual", {})
        if self.qs is None:
            object.__setattr__(self, "qs", {})
        if self.initial_ledger is None:
            object.__setattr__(self, "initial_ledger", self.ledger)

    def stage_ledgers(self) -> dict:
        out = dict(self.history)
        out[self.stage] = self.ledger
        return out

    def received_propositions(self) -> set:
        out = set()
        for e in self.received:
            out.update(e.payload.propositions())
        return out

    @property
    def own_setting(self) -> str:
        return setting_symbol(self.observer)

    @property
    def own_outcome(self) -> str:
        return outcome_symbol(self.observer)


def _canonical(d: TaggedJoint) -> TaggedJoint:
    order = [n for n in CANONICAL if n in d.free_names]
    order += [n for n in d.free_names if n not in order]
    return d.reorder(order)


def data_variables(behavior: Behavior) -> dict:
    """The four proposition variables induced by a behavior's grids."""
    return {
        "±a": Variable("±a", OUTCOME_VALUES),
        "θa": Variable("θa", tuple(behavior.grid_a)),
        "±b": Variable("±b", OUTCOME_VALUES),
        "θb": Variable("θb", tuple(behavior.grid_b)),
    }


def init_beliefs(
    behavior: Behavior,
    *,
    setting_prior=None,
    prior_a=None,
    prior_b=None,
    preset=None,
    worldline_a: Worldline | None = None,
    worldline_b: Worldline | None = None,
) -> tuple:
    """Both observers' shared starting ledger over the four data propositions.

    The ledger is the behavior times a prior over setting pairs, conditioned
    factually on the prepared state and the initial stage label.  Both
    observers must start from the same table; injecting unequal per-observer
    priors is rejected.  ``preset`` optionally pins both settings factually
    from the start (the pre-agreed-settings mode).
    """
    nx, ny = len(behavior.grid_a), len(behavior.grid_b)
    if setting_prior is None:
        setting_prior = np.full((nx, ny), 1.0 / (nx * ny))
    setting_prior = np.asarray(setting_prior, dtype=float)
    if setting_prior.shape != (nx, ny):
        raise ValueError(f"setting prior must have shape {(nx, ny)}")
    pa = np.asarray(prior_a, dtype=float) if prior_a is not None else setting_prior
    pb = np.asarray(prior_b, dtype=float) if prior_b is not None else setting_prior
    if pa.shape != pb.shape or np.max(np.abs(pa - pb)) > TOL:
        raise ValueError("observers must start from equal ledgers; per-observer priors differ")
    setting_prior = pa

    variables = data_variables(behavior)
    # canonical axis order (±a, θa, ±b, θb) from table axes [x, y, a, b]
    joint = np.einsum("xyab->axby", behavior.table) * setting_prior[None, :, None, :]
    conds = (
        Conditioner(Variable.singleton(PREPARED_SYMBOL), PREPARED_SYMBOL, Modality.FACTUAL),
        Conditioner(stage_variable(Stage.INITIAL), Stage.INITIAL.value, Modality.FACTUAL),
    )
    free = tuple(variables[n] for n in CANONICAL)

    def make(observer, worldline):
        ledger = TaggedJoint(free, joint, conds, label=observer)
        state = ObserverState(
            observer=observer,
            worldline=worldline,
            ledger=ledger,
            stage=Stage.INITIAL,
        )
        if preset is not None:
            theta_a, theta_b = preset
            ledger2 = condition(ledger, ("θa", theta_a), Modality.FACTUAL)
            ledger2 = condition(ledger2, ("θb", theta_b), Modality.FACTUAL)
            # replace() keeps initial_ledger pointing at the unconditioned table
            state = replace(
                state,
                ledger=ledger2,
                factual={"θa": theta_a, "θb": theta_b},
                qs={
                    "θa": QUncertainty.delta(variables["θa"], theta_a),
                    "θb": QUncertainty.delta(variables["θb"], theta_b),
                },
            )
        return state

    wa = worldline_a if worldline_a is not None else Worldline("A", -1.0)
    wb = worldline_b if worldline_b is not None else Worldline("B", 1.0)
    return make("A", wa), make("B", wb)


def _replace_stage(d: TaggedJoint, old: Stage, new: Stage) -> TaggedJoint:
    conds = [c for c in d.conditioners if c.variable.name != old.value]
    conds.append(Conditioner(stage_variable(new), new.value, Modality.FACTUAL))
    return d.with_conditioners(conds)


def receive(state: ObserverState, event: SpacetimeEvent, q: QUncertainty | None = None) -> ObserverState:
    """Factually absorb an event that has reached the observer's worldline.

    With an exact (delta) uncertainty the payload value is conditioned
    factually; with a spread ``q`` the ledger is rebuilt as the conditional
    times ``q``, leaving the variable free but locally measured with
    uncertainty.  A zero-probability reception is a realism violation: a
    factual report contradicting the observer's own table.
    """
    payload = event.payload
    if isinstance(payload, Message) and payload.recipient != state.observer:
        raise ValueError(f"message addressed to {payload.recipient!r} delivered to {state.observer!r}")
    target_stage = _payload_stage(payload)
    if _STAGE_ORDER[target_stage] < _STAGE_ORDER[state.stage]:
        raise ValueError(
            f"{state.observer} at stage {state.stage.value} cannot accept a {target_stage.value} event"
        )
    clock = state.clock
    if state.worldline is not None:
        arrived = reception_time(event, state.worldline)
        if arrived < clock - TOL:
            raise ValueError("events must be received in causal order")
        clock = max(clock, arrived)

    if isinstance(payload, StatePreparation):
        return replace(state, received=state.received + (event,), clock=clock)

    ((name, value),) = payload.propositions()
    ledger = state.ledger
    factual = dict(state.factual)
    qs = dict(state.qs)
    uncertain = state.uncertain

    if name in (c.variable.name for c in ledger.conditioners):
        # already pinned (preset mode or duplicate delivery)
        if ledger.conditioned_value(name) != value:
            raise RealismViolationError(
                f"{state.observer} received {name}={value!r} contradicting the "
                f"already-established value {ledger.conditioned_value(name)!r}"
            )
    else:
        var = ledger.variable(name)
        if q is None:
            q = QUncertainty.delta(var, value)
        if q.variable.name != name:
            raise ValueError(f"uncertainty is over {q.variable.name!r}, event carries {name!r}")
        if q.is_delta:
            try:
                ledger = condition(ledger, (name, value), Modality.FACTUAL)
            except ImpossibleEvidenceError as exc:
                raise RealismViolationError(
                    f"{state.observer} factually received {name}={value!r}, "
                    f"an event of probability zero"
                ) from exc
            factual[name] = value
            qs[name] = q
        else:
            ct = condition_table(ledger, name)
            ledger = _canonical(product(ct, TaggedJoint((var,), q.array, (), ledger.label)))
            qs[name] = q
            uncertain = uncertain | {name}

    history = state.history
    if target_stage is not state.stage:
        history = history + ((state.stage, state.ledger),)
        ledger = _replace_stage(ledger, state.stage, target_stage)

    return replace(
        state,
        ledger=ledger,
        stage=target_stage,
        received=state.received + (event,),
        clock=clock,
        factual=factual,
        qs=qs,
        uncertain=uncertain,
        history=history,
    )


def inquire(state: ObserverState, targets: Iterable, counterfactuals: Iterable = ()) -> TaggedJoint:
    """Ask about targets given posited values of not-yet-received variables.

    Counterfactual inquiry is always permitted, however far outside the
    observer's light cone the posited proposition lives; the only failure is
    positing something of probability zero.
    """
    d = state.ledger
    # condition back to front so the stored (and rendered) slot order matches
    # the order the caller listed the posits in
    for name, value in reversed(list(counterfactuals)):
        if name not in d.free_names:
            raise ValueError(
                f"{name!r} is already factual for {state.observer}; "
                "counterfactual inquiry needs an unreceived variable"
            )
        d = condition(d, (name, value), Modality.COUNTERFACTUAL)
    return keep_only(d, targets)


@dataclass(frozen=True)
class StageRow:
    stage: Stage
    rendered_a: str
    rendered_b: str
    equal: bool

    @property
    def mark(self) -> str:
        return "y" if self.equal else "n"


@dataclass(frozen=True)
class StageTable:
    rows: tuple

    @property
    def pattern(self) -> tuple:
        return tuple(r.mark for r in self.rows)

    def to_dicts(self):
        return [
            {"stage": r.stage.value, "A": r.rendered_a, "B": r.rendered_b, "equal": r.mark}
            for r in self.rows
        ]


def stage_table(state_a: ObserverState, state_b: ObserverState) -> StageTable:
    """Side-by-side ledgers per stage with an entrywise-equality column."""
    la, lb = state_a.stage_ledgers(), state_b.stage_ledgers()
    if set(la) != set(lb):
        raise ValueError(
            f"incomplete run: observers completed different stages "
            f"({sorted(s.value for s in la)} vs {sorted(s.value for s in lb)})"
        )
    if not la:
        raise ValueError("incomplete run: no stages recorded")
    rows = []
    for stage in Stage:
        if stage not in la:
            continue
        da, db = la[stage], lb[stage]
        rows.append(StageRow(stage, da.render(), db.render(), da.equals(db, tol=TOL)))
    return StageTable(tuple(rows))


@dataclass(frozen=True)
class PooledState:
    """The post-communication union of both observers' information."""

    ledger: TaggedJoint
    data: Mapping[str, Any]
    observer_a: ObserverState
    observer_b: ObserverState


def pool(state_a: ObserverState, state_b: ObserverState) -> PooledState:
    """Merge the two observers' information after communication completes.

    The pooled ledger is the product of the per-variable measurement
    uncertainties; exact measurements make it a point mass.  The trial's data
    point is the ledger's maximizing assignment (ties broken by lowest domain
    index).  Contradictory reports, or reports the shared starting table gave
    probability zero, violate realism.
    """
    if state_a.stage is Stage.INITIAL and state_b.stage is Stage.INITIAL \
            and not state_a.received and not state_b.received:
        if not state_a.ledger.equals(state_b.ledger, tol=TOL):
            raise RealismViolationError("observers disagree before any event was received")
        return PooledState(state_a.ledger.relabel("A∪B"), {}, state_a, state_b)

    for s in (state_a, state_b):
        if s.stage is not Stage.COMMUNICATION:
            raise ValueError(f"{s.observer} has not reached {Stage.COMMUNICATION.value}")

    for name in sorted(set(state_a.factual) & set(state_b.factual)):
        if state_a.factual[name] != state_b.factual[name]:
            raise RealismViolationError(
                f"pooled records contradict: {name}={state_a.factual[name]!r} "
                f"for A but {name}={state_b.factual[name]!r} for B"
            )
    for name in sorted(set(state_a.qs) & set(state_b.qs)):
        if np.max(np.abs(state_a.qs[name].array - state_b.qs[name].array)) > TOL:
            raise RealismViolationError(f"pooled uncertainty for {name} differs between observers")

    base = state_a.initial_ledger
    qs = {**state_b.qs, **state_a.qs}
    missing = [n for n in base.free_names if n not in qs]
    if missing:
        raise ValueError(f"cannot pool: no record for {missing}")

    arrays = [qs[n].array for n in base.free_names]
    pooled = arrays[0]
    for arr in arrays[1:]:
        pooled = np.multiply.outer(pooled, arr)

    # realism: the pooled belief must overlap the support of the shared
    # starting table; a point mass on a zero cell (a forged report) has none
    overlap = float((pooled * (base.array > TOL)).sum())
    if overlap <= TOL:
        raise RealismViolationError(
            "pooled records lie entirely outside the shared starting table's support"
        )

    conds = (
        Conditioner(Variable.singleton(PREPARED_SYMBOL), PREPARED_SYMBOL, Modality.FACTUAL),
        Conditioner(stage_variable(Stage.COMMUNICATION), Stage.COMMUNICATION.value, Modality.FACTUAL),
    )
    ledger = TaggedJoint(base.free, pooled, conds, label="A∪B")
    data = {n: qs[n].mode() for n in base.free_names}
    new_a = replace(state_a, ledger=ledger.relabel("A"))
    new_b = replace(state_b, ledger=ledger.relabel("B"))
    return PooledState(ledger, data, new_a, new_b)


def retrodict(state: ObserverState, target: str, past_stage: Stage) -> TaggedJoint:
    """Re-evaluate a past-stage likelihood with everything now known.

    The result is the past ledger conditioned on the data learned by
    communication time, rendered in two-time notation: the past stage label
    sits in the counterfactual slot, current knowledge after the double bar.
    """
    if state.stage is not Stage.COMMUNICATION:
        raise ValueError("retrodiction needs the pooled, post-communication state")
    ledgers = state.stage_ledgers()
    if past_stage not in ledgers:
        raise ValueError(f"no ledger recorded at stage {past_stage.value}")
    past = ledgers[past_stage]
    if target not in state.factual:
        raise ValueError(f"{target!r} is not part of the recorded data")
    if target not in past.free_names:
        raise ValueError(f"{target!r} was already factual at {past_stage.value}")

    d = past
    conditioned = []
    for name in past.free_names:
        if name == target or name not in state.factual:
            continue
        d = condition(d, (name, state.factual[name]), Modality.FACTUAL)
        conditioned.append(name)
    d = keep_only(d, [target])

    # two-time notation: own setting first, then the freshly conditioned data,
    # then the current stage; the past stage sits in the counterfactual slot
    names = []
    if state.own_setting in state.factual and state.own_setting != target:
        names.append(state.own_setting)
    names.extend(n for n in conditioned if n not in names)
    conds = [Conditioner(stage_variable(past_stage), past_stage.value, Modality.COUNTERFACTUAL)]
    for n in names:
        conds.append(Conditioner(state.initial_ledger.variable(n), state.factual[n], Modality.FACTUAL))
    conds.append(Conditioner(stage_variable(Stage.COMMUNICATION), Stage.COMMUNICATION.value, Modality.FACTUAL))
    return TaggedJoint(d.free, d.array, tuple(conds), label=state.observer)


def ledger_chsh_expectation(ledger: TaggedJoint, settings: ChshSettings) -> float:
    """Signed outcome expectation over whatever the ledger still distributes.

    Variables already pinned by conditioning contribute their fixed value;
    free variables are summed with their ledger weights.  Setting pairs
    outside the four chosen ones carry sign zero.
    """
    roles = ("±a", "θa", "±b", "θb")
    fixed = {}
    for name in roles:
        if name not in ledger.free_names:
            fixed[name] = ledger.conditioned_value(name)
    other_free = [v.name for v in ledger.free if v.name not in roles]
    if other_free:
        raise ValueError(f"ledger has unexpected free variables {other_free}")

    total = 0.0
    domains = [v.domain for v in ledger.free]
    for combo in itertools.product(*domains) if domains else [()]:
        assignment = dict(zip(ledger.free_names, combo))
        values = {**fixed, **assignment}
        sign = settings.sign_of(values["θa"], values["θb"])
        if sign == 0.0:
            continue
        total += values["±a"] * values["±b"] * sign * ledger.prob(assignment)
    return total
