"""Cross-validated comparison of generalized vs group models.

For a fixed grouping strategy and model kind, participants are split into
k folds per group.  Every fold trains one generalized model (all training
participants) and one model per group (that group's training participants
only); both conditions predict exactly the same held-out observations.
Per-group RMSEs over the pooled test predictions are combined into a
weighted RMSE (WRMSE) that is compared against the generalized RMSE.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import derive_seed
from .errors import ValidationError
from .features import FeatureTable
from .models import fit
from .profiling import Grouping

GENERALIZED_ID = -1  # group_id used for generalized-condition rows in CSVs


class EmptyInput(ValidationError):
    pass


class GroupTooSmall(ValidationError):
    def __init__(self, group_id: int):
        super().__init__(f"group {group_id} has a single participant")
        self.group_id = group_id


def rmse(predictions: np.ndarray, targets: np.ndarray) -> float:
    predictions = np.asarray(predictions, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if predictions.size == 0 or targets.size == 0:
        raise EmptyInput("rmse needs at least one prediction")
    if predictions.shape != targets.shape:
        raise ValidationError(
            f"length mismatch: {predictions.shape} vs {targets.shape}")
    return float(np.sqrt(np.mean((predictions - targets) ** 2)))


def wrmse(per_group: list[tuple[int, float]]) -> float:
    """Observation-count-weighted mean of per-group RMSEs."""
    if not per_group:
        raise EmptyInput("wrmse needs at least one group")
    counts = np.array([n for n, _ in per_group], dtype=np.float64)
    values = np.array([r for _, r in per_group], dtype=np.float64)
    if np.any(counts <= 0):
        raise ValidationError("group observation counts must be positive")
    # normalize first so a single group reproduces its RMSE exactly
    return float((counts / counts.sum()) @ values)


@dataclass(frozen=True)
class FoldPlan:
    """Per-group held-out participant sets; fold f of the generalized
    condition tests the union of every group's fold f."""

    group_folds: dict[int, tuple[tuple[str, ...], ...]]
    borrowed: tuple[int, ...]
    k: int
    seed: int

    @property
    def n_folds(self) -> int:
        return max(len(f) for f in self.group_folds.values())

    def test_pids(self, fold: int) -> tuple[str, ...]:
        out: list[str] = []
        for gid in sorted(self.group_folds):
            folds = self.group_folds[gid]
            if fold < len(folds):
                out.extend(folds[fold])
        return tuple(sorted(out))

    def all_pids(self) -> tuple[str, ...]:
        out: list[str] = []
        for folds in self.group_folds.values():
            for f in folds:
                out.extend(f)
        return tuple(sorted(out))


def make_folds(grouping: Grouping, k: int = 5, seed: int = 0,
               borrow_generalized: bool = True) -> FoldPlan:
    """Split each group's participants into min(k, size) seeded folds.

    Singleton groups cannot hold their only member out of their own
    training set; with borrow_generalized they are marked for fallback
    to the generalized model, otherwise GroupTooSmall is raised.
    """
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    rng = np.random.default_rng(derive_seed(seed, "folds"))
    group_folds: dict[int, tuple[tuple[str, ...], ...]] = {}
    borrowed: list[int] = []
    for gid, members in enumerate(grouping.groups()):
        if not members:
            raise ValidationError(f"group {gid} is empty")
        if len(members) == 1:
            if not borrow_generalized:
                raise GroupTooSmall(gid)
            borrowed.append(gid)
        order = rng.permutation(len(members))
        shuffled = [members[i] for i in order]
        n_folds = min(k, len(members))
        group_folds[gid] = tuple(
            tuple(sorted(str(p) for p in part))
            for part in np.array_split(shuffled, n_folds))
    return FoldPlan(group_folds, tuple(borrowed), k, seed)


@dataclass(frozen=True)
class GroupResult:
    group_id: int
    n_participants: int
    n_test_obs: int
    rmse: float
    borrowed: bool = False


@dataclass(frozen=True)
class FoldCell:
    """One fold x condition entry; group_id == GENERALIZED_ID for the
    generalized condition."""

    fold: int
    group_id: int
    n_participants: int
    n_obs: int
    rmse: float


@dataclass(frozen=True)
class EvalReport:
    strategy: str
    kind: str
    generalized_rmse: float
    groups: tuple[GroupResult, ...]
    wrmse: float
    seed: int
    config_digest: str
    cells: tuple[FoldCell, ...]
    flags: tuple[str, ...] = ()
    predictions_generalized: np.ndarray | None = field(
        default=None, compare=False)
    predictions_grouped: np.ndarray | None = field(default=None, compare=False)

    @property
    def delta(self) -> float:
        """Positive when grouping beats the generalized model."""
        return self.generalized_rmse - self.wrmse


def _row_index(features: FeatureTable) -> dict[str, np.ndarray]:
    pids = np.asarray(features.participant_ids)
    return {pid: np.flatnonzero(pids == pid) for pid in dict.fromkeys(pids)}


def evaluate(features: FeatureTable, grouping: Grouping, kind: str,
             plan: FoldPlan, seed: int = 0, *, weight_by: str = "obs",
             config_digest: str = "", keep_predictions: bool = False,
             n_jobs: int = 1, **fit_kwargs) -> EvalReport:
    """Run the full generalized-vs-grouped comparison for one strategy
    and one model kind.

    Fit seeds depend only on (seed, kind, fold), never on the group, so
    a single-group strategy reproduces the generalized fits exactly.
    """
    if weight_by not in ("obs", "participants"):
        raise ValidationError(f"unknown weight_by {weight_by!r}")
    rows_of = _row_index(features)
    plan_pids = set(plan.all_pids())
    missing = plan_pids - set(rows_of)
    if missing:
        raise ValidationError(
            f"fold plan references participants without features: "
            f"{sorted(missing)}")

    n_folds = plan.n_folds
    members = grouping.groups()

    # jobs: (fold, group_id) -> fit + predict; GENERALIZED_ID trains on all
    jobs: list[tuple[int, int]] = []
    train_rows: dict[tuple[int, int], np.ndarray] = {}
    test_rows: dict[tuple[int, int], np.ndarray] = {}
    for f in range(n_folds):
        test_pids = set(plan.test_pids(f))
        train_pids = plan_pids - test_pids
        gen_test = [pid for pid in sorted(rows_of) if pid in test_pids]
        gen_train = [pid for pid in sorted(rows_of) if pid in train_pids]
        train_rows[(f, GENERALIZED_ID)] = _concat_rows(rows_of, gen_train)
        test_rows[(f, GENERALIZED_ID)] = _concat_rows(rows_of, gen_test)
        jobs.append((f, GENERALIZED_ID))
        for gid in range(grouping.k):
            if gid in plan.borrowed:
                continue
            g_test = [p for p in members[gid] if p in test_pids]
            if not g_test:
                continue
            g_train = [p for p in members[gid] if p in train_pids]
            train_rows[(f, gid)] = _concat_rows(rows_of, g_train)
            test_rows[(f, gid)] = _concat_rows(rows_of, g_test)
            jobs.append((f, gid))
    jobs.sort()

    def run_job(key: tuple[int, int]) -> tuple[np.ndarray, tuple[str, ...]]:
        f, _ = key
        tr, te = train_rows[key], test_rows[key]
        fit_seed = derive_seed(seed, "fit", kind, f"fold{f}")
        model = fit(kind, features.X[tr], features.y[tr], seed=fit_seed,
                    **fit_kwargs)
        mean, _ = model.predict(features.X[te])
        return mean, tuple(model.flags)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = dict(zip(jobs, pool.map(run_job, jobs)))
    else:
        results = {key: run_job(key) for key in jobs}

    n = len(features)
    pred_gen = np.full(n, np.nan)
    pred_grp = np.full(n, np.nan)
    flags: list[str] = []
    cells: list[FoldCell] = []
    for key in jobs:
        f, gid = key
        te = test_rows[key]
        mean, job_flags = results[key]
        for flag in job_flags:
            flags.append(f"fold{f}_group{gid}_{flag}")
        if gid == GENERALIZED_ID:
            pred_gen[te] = mean
            n_part = len(plan.test_pids(f))
        else:
            pred_grp[te] = mean
            n_part = len(plan.group_folds[gid][f]) if f < len(
                plan.group_folds[gid]) else 0
        cells.append(FoldCell(f, gid, n_part, len(te),
                              rmse(mean, features.y[te])))

    # borrowed singletons are predicted by the fold's generalized model
    for gid in plan.borrowed:
        flags.append(f"group{gid}_borrowed_generalized")
        for f in range(len(plan.group_folds[gid])):
            te = _concat_rows(rows_of, list(plan.group_folds[gid][f]))
            pred_grp[te] = pred_gen[te]
            cells.append(FoldCell(f, gid, len(plan.group_folds[gid][f]),
                                  len(te), rmse(pred_grp[te], features.y[te])))
    cells.sort(key=lambda c: (c.fold, c.group_id))

    covered = ~np.isnan(pred_gen)
    if not np.array_equal(covered, ~np.isnan(pred_grp)):
        raise ValidationError("conditions predicted different test sets")

    group_results: list[GroupResult] = []
    for gid in range(grouping.k):
        rows = _concat_rows(rows_of, members[gid])
        rows = rows[covered[rows]]
        group_results.append(GroupResult(
            gid, len(members[gid]), len(rows),
            rmse(pred_grp[rows], features.y[rows]),
            borrowed=gid in plan.borrowed))
    weights = [(g.n_test_obs if weight_by == "obs" else g.n_participants,
                g.rmse) for g in group_results]
    return EvalReport(
        strategy=grouping.strategy_name,
        kind=kind,
        generalized_rmse=rmse(pred_gen[covered], features.y[covered]),
        groups=tuple(group_results),
        wrmse=wrmse(weights),
        seed=seed,
        config_digest=config_digest,
        cells=tuple(cells),
        flags=tuple(flags),
        predictions_generalized=pred_gen if keep_predictions else None,
        predictions_grouped=pred_grp if keep_predictions else None,
    )


def _concat_rows(rows_of: dict[str, np.ndarray], pids: list[str]) -> np.ndarray:
    if not pids:
        return np.empty(0, dtype=np.intp)
    return np.concatenate([rows_of[pid] for pid in pids])


@dataclass(frozen=True)
class SampleSizeTable:
    """Per-group rows sorted by participant count, with RMSE dispersion
    in the smallest and largest size tertiles."""

    rows: tuple[GroupResult, ...]
    small_tertile_var: float
    large_tertile_var: float


def sample_size_analysis(report: EvalReport) -> SampleSizeTable:
    rows = tuple(sorted(report.groups,
                        key=lambda g: (g.n_participants, g.group_id)))
    m = max(1, len(rows) // 3)
    small = np.array([g.rmse for g in rows[:m]])
    large = np.array([g.rmse for g in rows[-m:]])
    return SampleSizeTable(rows, float(np.var(small)), float(np.var(large)))


def _fmt(value: float) -> str:
    return repr(float(value))


def fold_metric(report: EvalReport, fold: int, generalized: bool) -> float:
    """Fold-level generalized RMSE, or fold-level WRMSE across groups."""
    cells = [c for c in report.cells if c.fold == fold
             and (c.group_id == GENERALIZED_ID) == generalized]
    if not cells:
        raise EmptyInput(f"no cells for fold {fold}")
    if generalized:
        return cells[0].rmse
    return wrmse([(c.n_obs, c.rmse) for c in cells])


def _fold_spread(report: EvalReport, generalized: bool) -> float:
    """Error bar: 2 sample standard deviations across folds."""
    folds = sorted({c.fold for c in report.cells})
    vals = [fold_metric(report, f, generalized) for f in folds]
    if len(vals) < 2:
        return 0.0
    return float(2.0 * np.std(vals, ddof=1))


def write_report_csv(reports: list[EvalReport], path) -> None:
    lines = ["strategy,model,fold,group_id,n_part,n_obs,rmse"]
    for rep in reports:
        for c in rep.cells:
            lines.append(f"{rep.strategy},{rep.kind},{c.fold},{c.group_id},"
                         f"{c.n_participants},{c.n_obs},{_fmt(c.rmse)}")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def write_summary_csv(reports: list[EvalReport], path) -> None:
    lines = ["strategy,model,wrmse,generalized_rmse,delta"]
    for rep in reports:
        lines.append(f"{rep.strategy},{rep.kind},{_fmt(rep.wrmse)},"
                     f"{_fmt(rep.generalized_rmse)},{_fmt(rep.delta)}")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def write_plotdata_csv(reports: list[EvalReport], path) -> None:
    """Tidy rows for external plotting.

    panel wrmse_by_strategy: y = condition-level (W)RMSE, err = 2 std
    across folds.  panel rmse_by_group_size: x = group participant
    count, y = pooled group RMSE.
    """
    lines = ["panel,strategy,model,series,x,y,err"]
    for rep in reports:
        lines.append(
            f"wrmse_by_strategy,{rep.strategy},{rep.kind},grouped,"
            f"{rep.strategy},{_fmt(rep.wrmse)},"
            f"{_fmt(_fold_spread(rep, generalized=False))}")
        lines.append(
            f"wrmse_by_strategy,{rep.strategy},{rep.kind},generalized,"
            f"{rep.strategy},{_fmt(rep.generalized_rmse)},"
            f"{_fmt(_fold_spread(rep, generalized=True))}")
        for g in sorted(rep.groups, key=lambda g: (g.n_participants,
                                                   g.group_id)):
            lines.append(
                f"rmse_by_group_size,{rep.strategy},{rep.kind},group,"
                f"{g.n_participants},{_fmt(g.rmse)},")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
