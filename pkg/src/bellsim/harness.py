"""Trial sampling, frequency estimation, and the violation classifier.

Randomness is counter-based: the master seed keys a Philox generator and
trial ``i`` owns counter block ``i`` (four uniform draws: two setting draws,
one outcome draw, one spare).  A single traced trial, a sequential batch, and
any chunked parallel batch therefore produce bit-identical results.

Outcomes are drawn by inverse CDF over the four cells of the behavior slice
in fixed cell order, so zero-probability cells are structurally unreachable.
"""

from __future__ import annotations

import csv
import io
import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Any, Mapping

import numpy as np

from .angles import setting_text
from .config import ExperimentConfig, build_model, build_run_schedule
from .errors import MissingDataError, RealismViolationError
from .models import Behavior, ChshSettings
from .observers import (
    ObserverState,
    PooledState,
    QUncertainty,
    Stage,
    init_beliefs,
    pool,
    receive,
)
from .probability import TOL, Modality, TaggedJoint, condition, keep_only
from .spacetime import Detection, Message, Schedule, SettingChoice

#: Uniform draws reserved per trial: one Philox counter block.
DRAWS_PER_TRIAL = 4
_SLOT_SETTING_A, _SLOT_SETTING_B, _SLOT_OUTCOME = 0, 1, 2

#: Fixed cell order of the inverse-CDF sampler: row-major over (a, b).
CELL_OUTCOMES = ((1, 1), (1, -1), (-1, 1), (-1, -1))
_CELL_A = np.array([1, 1, -1, -1])
_CELL_B = np.array([1, -1, 1, -1])


def substream(master_seed: int, trial_index: int) -> np.random.Generator:
    """The generator owning trial ``trial_index``'s counter block."""
    bg = np.random.Philox(key=master_seed)
    if trial_index:
        bg.advance(trial_index)
    return np.random.Generator(bg)


def trial_uniforms(master_seed: int, trial_index: int) -> np.ndarray:
    return substream(master_seed, trial_index).random(DRAWS_PER_TRIAL)


def _block_uniforms(master_seed: int, start_trial: int, count: int) -> np.ndarray:
    """Rows ``start_trial .. start_trial+count-1`` of the per-trial uniforms."""
    return substream(master_seed, start_trial).random((count, DRAWS_PER_TRIAL))


def _sample_cells(slice2x2: np.ndarray, u: np.ndarray) -> np.ndarray:
    cum = np.cumsum(slice2x2.reshape(-1))
    cum[-1] = 1.0  # guard against a float shortfall at the top
    return np.searchsorted(cum, u, side="right")


# ---------------------------------------------------------------------------
# records and datasets


@dataclass(frozen=True, slots=True)
class TrialRecord:
    """One experiment's factual data point with its reception bookkeeping."""

    trial: int
    theta_a: Any
    theta_b: Any
    outcome_a: int
    outcome_b: int
    reception_times: Mapping[str, Mapping[str, float]]
    substream: int


@dataclass(frozen=True)
class TrialTrace:
    """A fully simulated trial: record plus both observers' state histories."""

    record: TrialRecord
    observer_a: ObserverState
    observer_b: ObserverState
    pooled: PooledState
    preset: bool = False


class Dataset:
    """Trial records plus the per-pair outcome counts ``n(a, b, x, y)``."""

    def __init__(self, grid_a, grid_b, counts, n_per_pair, records=(), master_seed=0):
        self.grid_a = tuple(grid_a)
        self.grid_b = tuple(grid_b)
        self.counts = np.asarray(counts, dtype=np.int64)
        self.n_per_pair = np.asarray(n_per_pair, dtype=np.int64)
        expected = (len(self.grid_a), len(self.grid_b), 2, 2)
        if self.counts.shape != expected:
            raise ValueError(f"counts shape {self.counts.shape}, expected {expected}")
        if np.any(self.counts < 0):
            raise ValueError("counts must be non-negative")
        if not np.array_equal(self.counts.sum(axis=(2, 3)), self.n_per_pair):
            raise ValueError("counts must sum to the per-pair trial totals")
        self.records = tuple(records)
        self.master_seed = master_seed

    @property
    def total_trials(self) -> int:
        return int(self.n_per_pair.sum())

    def counts_for(self, x, y) -> np.ndarray:
        i = self.grid_a.index(x)
        j = self.grid_b.index(y)
        return self.counts[i, j]

    def merge(self, other: "Dataset") -> "Dataset":
        """Count-additive concatenation; grids must match exactly."""
        if self.grid_a != other.grid_a or self.grid_b != other.grid_b:
            raise ValueError("datasets cover different setting grids")
        return Dataset(
            self.grid_a,
            self.grid_b,
            self.counts + other.counts,
            self.n_per_pair + other.n_per_pair,
            self.records + other.records,
            self.master_seed,
        )


# ---------------------------------------------------------------------------
# running trials


def _choose_setting(grid, u: float):
    idx = min(int(u * len(grid)), len(grid) - 1)
    return grid[idx]


def run_trial(
    behavior: Behavior,
    schedule: Schedule,
    *,
    master_seed: int,
    trial_index: int,
    forced_settings=None,
    preset: bool = False,
    setting_prior=None,
    q_setting_width: float = 0.0,
    q_outcome_width: float = 0.0,
    unresolved_local_setting: bool = False,
) -> TrialTrace:
    """One full-fidelity trial driven through both observers' ledgers.

    Settings are drawn independently per wing from the behavior's grids
    unless ``forced_settings`` pins them; outcomes are sampled jointly from
    the behavior's slice.  Every reception goes through the observer update,
    and the trial ends with pooled information and an extracted data point.
    Deterministic given (master seed, trial index).
    """
    u = trial_uniforms(master_seed, trial_index)
    if forced_settings is not None:
        theta_a, theta_b = forced_settings
    else:
        theta_a = _choose_setting(behavior.grid_a, u[_SLOT_SETTING_A])
        theta_b = _choose_setting(behavior.grid_b, u[_SLOT_SETTING_B])
    cell = int(_sample_cells(behavior.slice(theta_a, theta_b), np.array([u[_SLOT_OUTCOME]]))[0])
    outcome_a, outcome_b = CELL_OUTCOMES[cell]

    events = schedule.trial_events(theta_a, theta_b, outcome_a, outcome_b)
    state_a, state_b = init_beliefs(
        behavior,
        setting_prior=setting_prior,
        preset=(theta_a, theta_b) if preset else None,
        worldline_a=schedule.worldline_a,
        worldline_b=schedule.worldline_b,
    )

    # each wing's uncertainty about its own measurements, fixed up front;
    # a report can only carry the sender's own uncertainty about the value
    variables = {v.name: v for v in state_a.initial_ledger.free}
    own_qs: dict[str, QUncertainty] = {}
    if not preset:
        for name, value, mine in (("θa", theta_a, "A"), ("θb", theta_b, "B")):
            if unresolved_local_setting and mine == "A" and name == "θa":
                own_qs[name] = QUncertainty.uniform(variables[name])
            elif q_setting_width > 0.0:
                own_qs[name] = QUncertainty.peaked(variables[name], value, q_setting_width)
    if q_outcome_width > 0.0:
        own_qs["±a"] = QUncertainty.peaked(variables["±a"], outcome_a, q_outcome_width)
        own_qs["±b"] = QUncertainty.peaked(variables["±b"], outcome_b, q_outcome_width)
    own_qs = {k: v for k, v in own_qs.items() if not v.is_delta}

    def q_for(event) -> QUncertainty | None:
        payload = event.payload
        if isinstance(payload, (SettingChoice, Detection, Message)):
            return own_qs.get(payload.propositions()[0][0])
        return None

    for event in schedule.events_for("A", events):
        state_a = receive(state_a, event, q_for(event))
    for event in schedule.events_for("B", events):
        state_b = receive(state_b, event, q_for(event))
    pooled = pool(state_a, state_b)

    record = TrialRecord(
        trial=trial_index,
        theta_a=theta_a,
        theta_b=theta_b,
        outcome_a=outcome_a,
        outcome_b=outcome_b,
        reception_times={
            "A": schedule.data_reception_times("A"),
            "B": schedule.data_reception_times("B"),
        },
        substream=trial_index,
    )
    return TrialTrace(record, pooled.observer_a, pooled.observer_b, pooled, preset=preset)


def run_experiment(config: ExperimentConfig) -> Dataset:
    """Sample ``trials_per_pair`` trials at every setting pair of the grids.

    Per-trial substreams make the dataset identical for any worker count;
    chunks are merged in trial order.  Sampled outcomes are checked against
    the model's zero cells, which would be the realism-violation signal.
    """
    behavior = build_model(config)
    schedule = build_run_schedule(config)
    return sample_dataset(
        behavior,
        schedule,
        trials_per_pair=config.trials_per_pair,
        master_seed=config.seed,
        workers=config.workers,
        keep_records=config.keep_records,
    )


def sample_dataset(
    behavior: Behavior,
    schedule: Schedule | None,
    *,
    trials_per_pair: int,
    master_seed: int,
    workers: int = 1,
    keep_records: bool = True,
) -> Dataset:
    if trials_per_pair < 1:
        raise ValueError("need at least one trial per setting pair")
    nx, ny = len(behavior.grid_a), len(behavior.grid_b)
    counts = np.zeros((nx, ny, 2, 2), dtype=np.int64)
    records: list = []
    times = (
        {
            "A": schedule.data_reception_times("A"),
            "B": schedule.data_reception_times("B"),
        }
        if schedule is not None
        else {"A": {}, "B": {}}
    )

    pair_list = list(itertools.product(range(nx), range(ny)))

    def chunk_bounds(n: int, k: int):
        k = max(1, min(k, n))
        step = (n + k - 1) // k
        return [(lo, min(lo + step, n)) for lo in range(0, n, step)]

    for p_idx, (i, j) in enumerate(pair_list):
        base = p_idx * trials_per_pair
        slab = behavior.table[i, j]

        def sample_chunk(bounds):
            lo, hi = bounds
            u = _block_uniforms(master_seed, base + lo, hi - lo)
            return _sample_cells(slab, u[:, _SLOT_OUTCOME])

        bounds = chunk_bounds(trials_per_pair, workers)
        if workers > 1 and len(bounds) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool_:
                parts = list(pool_.map(sample_chunk, bounds))
        else:
            parts = [sample_chunk(b) for b in bounds]
        cells = np.concatenate(parts)

        pair_counts = np.bincount(cells, minlength=4).reshape(2, 2)
        dead = slab.reshape(-1) <= TOL
        if np.any(pair_counts.reshape(-1)[dead] > 0):
            raise RealismViolationError(
                f"sampled an outcome of probability zero at settings "
                f"({setting_text(behavior.grid_a[i])}, {setting_text(behavior.grid_b[j])})"
            )
        counts[i, j] = pair_counts

        if keep_records:
            a_vals = _CELL_A[cells]
            b_vals = _CELL_B[cells]
            x, y = behavior.grid_a[i], behavior.grid_b[j]
            records.extend(
                TrialRecord(base + m, x, y, int(a_vals[m]), int(b_vals[m]), times, base + m)
                for m in range(trials_per_pair)
            )

    n_per_pair = np.full((nx, ny), trials_per_pair, dtype=np.int64)
    return Dataset(behavior.grid_a, behavior.grid_b, counts, n_per_pair, records, master_seed)


# ---------------------------------------------------------------------------
# estimation


@dataclass(frozen=True)
class EstimatedBehavior:
    """Frequency estimate of a behavior with per-cell standard errors."""

    behavior: Behavior
    stderr: np.ndarray


def estimate_behavior(dataset: Dataset) -> EstimatedBehavior:
    """Cellwise ``n/N`` with binomial standard errors ``sqrt(p(1-p)/N)``."""
    n = dataset.n_per_pair
    if np.any(n == 0):
        i, j = map(int, np.argwhere(n == 0)[0])
        raise MissingDataError(
            f"no trials for setting pair ({setting_text(dataset.grid_a[i])}, "
            f"{setting_text(dataset.grid_b[j])})"
        )
    denom = n[:, :, None, None].astype(float)
    phat = dataset.counts / denom
    stderr = np.sqrt(phat * (1.0 - phat) / denom)
    return EstimatedBehavior(Behavior(dataset.grid_a, dataset.grid_b, phat), stderr)


@dataclass(frozen=True)
class ChshEstimate:
    value: float
    stderr: float
    correlators: tuple  # (x, y, estimate, stderr) per chosen pair


def estimate_chsh(dataset: Dataset, settings: ChshSettings) -> ChshEstimate:
    """The signed sum from empirical correlators, errors added in quadrature."""
    total, var = 0.0, 0.0
    per_pair = []
    for (x, y), sign in zip(settings.pairs(), settings.signs):
        try:
            c = dataset.counts_for(x, y)
        except ValueError:
            raise MissingDataError(
                f"dataset lacks setting pair ({setting_text(x)}, {setting_text(y)})"
            ) from None
        n = int(c.sum())
        if n == 0:
            raise MissingDataError(
                f"no trials for setting pair ({setting_text(x)}, {setting_text(y)})"
            )
        corr = float(c[0, 0] + c[1, 1] - c[0, 1] - c[1, 0]) / n
        se = float(np.sqrt(max(1.0 - corr * corr, 0.0) / n))
        per_pair.append((x, y, corr, se))
        total += sign * corr
        var += se * se
    return ChshEstimate(total, float(np.sqrt(var)), tuple(per_pair))


# ---------------------------------------------------------------------------
# classification


class ViolationClass(Enum):
    FACTUAL_LOCAL = "factual-local"
    COUNTERFACTUAL_LOCAL = "counterfactual-local"
    COUNTERFACTUAL_NONLOCAL = "counterfactual-nonlocal"
    NOT_APPLICABLE = "not-applicable"


@dataclass(frozen=True)
class ViolationReport:
    stage: Stage
    observer: str
    s_value: float | None
    s_stderr: float | None
    violated: bool | None
    classification: ViolationClass
    counterfactual_conditioners: tuple
    nonlocal_counterfactuals: tuple
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "stage": self.stage.value,
            "observer": self.observer,
            "s_value": self.s_value,
            "s_stderr": self.s_stderr,
            "violated": self.violated,
            "classification": self.classification.value,
            "counterfactual_conditioners": list(self.counterfactual_conditioners),
            "nonlocal_counterfactuals": list(self.nonlocal_counterfactuals),
            "note": self.note,
        }


def _form_chsh(initial: TaggedJoint, settings: ChshSettings) -> float:
    """The signed sum carried by the shared starting table's functional form."""
    total = 0.0
    for (x, y), sign in zip(settings.pairs(), settings.signs):
        t = condition(initial, ("θa", x), Modality.COUNTERFACTUAL)
        t = condition(t, ("θb", y), Modality.COUNTERFACTUAL)
        t = keep_only(t, ("±a", "±b"))
        corr = 0.0
        for a in (1, -1):
            for b in (1, -1):
                corr += a * b * t.prob({"±a": a, "±b": b})
        total += sign * corr
    return total


def classify_violation(
    traces,
    stage: Stage,
    settings: ChshSettings,
    *,
    dataset: Dataset | None = None,
    observer: str = "A",
    posit_alternates: bool = False,
) -> ViolationReport:
    """Attach the modality/locality class to a four-term-sum evaluation.

    Before communication the far wing's setting can only be posited, so any
    violation there is counterfactual and nonlocal.  With pre-agreed settings
    everything relevant is factual from the start and the evaluation is a
    local statement (counterfactual-local if alternates are posited).  At
    communication time the pooled multi-trial estimate is an ordinary local
    statistic.  A single trial whose settings are all factual cannot test the
    bound at all: it has only one setting pair.
    """
    trace = traces[0] if isinstance(traces, (list, tuple)) else traces
    state = trace.observer_a if observer == "A" else trace.observer_b
    ledgers = state.stage_ledgers()
    if stage not in ledgers:
        raise ValueError(f"stage {stage.value} not in trace")
    far = "θb" if observer == "A" else "θa"
    ledger = ledgers[stage]
    cf_settings = tuple(n for n in ("θa", "θb") if n in ledger.free_names)
    nonlocal_cf = tuple(n for n in cf_settings if n == far)

    if stage is Stage.COMMUNICATION or (trace.preset and not posit_alternates):
        if dataset is None:
            return ViolationReport(
                stage,
                observer,
                None,
                None,
                None,
                ViolationClass.NOT_APPLICABLE,
                (),
                (),
                "a single experiment has only one factual set of measurement settings",
            )
        est = estimate_chsh(dataset, settings)
        return ViolationReport(
            stage,
            observer,
            est.value,
            est.stderr,
            abs(est.value) > 2.0,
            ViolationClass.FACTUAL_LOCAL,
            (),
            (),
            "pooled multi-trial estimate from factually communicated data",
        )

    if trace.preset and posit_alternates:
        s = _form_chsh(state.initial_ledger, settings)
        return ViolationReport(
            stage,
            observer,
            s,
            0.0,
            abs(s) > 2.0,
            ViolationClass.COUNTERFACTUAL_LOCAL,
            ("θa", "θb"),
            (),
            "alternates of pre-agreed, locally known settings are posited",
        )

    s = _form_chsh(state.initial_ledger, settings)
    if nonlocal_cf:
        classification = ViolationClass.COUNTERFACTUAL_NONLOCAL
        note = f"the far setting {far} enters only counterfactually at {stage.value}"
    elif cf_settings:
        classification = ViolationClass.COUNTERFACTUAL_LOCAL
        note = "only the observer's own unchosen setting is posited"
    else:
        classification = ViolationClass.FACTUAL_LOCAL
        note = ""
    return ViolationReport(
        stage,
        observer,
        s,
        0.0,
        abs(s) > 2.0,
        classification,
        cf_settings,
        nonlocal_cf,
        note,
    )


# ---------------------------------------------------------------------------
# export


def dataset_to_csv(dataset: Dataset) -> str:
    """Delimited per-trial rows; requires records to have been kept."""
    if not dataset.records:
        raise MissingDataError("dataset was sampled without records; nothing to export")
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(
        [
            "trial",
            "x",
            "y",
            "a",
            "b",
            "t_setting_A",
            "t_outcome_A",
            "t_reports_A",
            "t_setting_B",
            "t_outcome_B",
            "t_reports_B",
        ]
    )
    for r in sorted(dataset.records, key=lambda r: r.trial):
        ta = r.reception_times.get("A", {})
        tb = r.reception_times.get("B", {})
        writer.writerow(
            [
                r.trial,
                setting_text(r.theta_a),
                setting_text(r.theta_b),
                r.outcome_a,
                r.outcome_b,
                ta.get("θa", ""),
                ta.get("±a", ""),
                ta.get("θb", ""),
                tb.get("θb", ""),
                tb.get("±b", ""),
                tb.get("θa", ""),
            ]
        )
    return out.getvalue()
