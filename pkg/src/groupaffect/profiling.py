"""Participant grouping: G-means clustering, SIAS cutoffs, and the ten
named strategies.

G-means grows k from 1 by statistical splitting: each cluster is split in
two along its principal component, and the split is kept only when the
projection of the cluster onto the child-centroid direction fails an
Anderson-Darling normality test. Profile-driven strategies cluster modality
blocks of the participant design matrix; SIAS strategies cut on the
questionnaire score.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import log_ndtr

from groupaffect.config import STRATEGY_NAMES, derive_seed
from groupaffect.errors import ValidationError
from groupaffect.features import BehaviorProfile, build_design_matrix

# A^2* critical values for the composite-normality test (Stephens 1974)
AD_CRITICAL = {0.0001: 1.8692, 0.01: 1.092, 0.05: 0.787}
AD_MIN_N = 8

SIAS_CUTOFFS = (34, 43)  # low < 34 <= medium < 43 <= high, left-closed
SIAS_LEVELS = ("low", "medium", "high")


class KTooLarge(ValidationError):
    def __init__(self, k: int, n: int):
        super().__init__(f"k={k} exceeds number of points n={n}")
        self.k = k
        self.n = n


class TooFewPoints(ValidationError):
    def __init__(self, n: int):
        super().__init__(f"normality test needs n >= {AD_MIN_N}, got {n}")
        self.n = n


class MissingScore(ValidationError):
    def __init__(self, participant_id: str):
        super().__init__(f"no SIAS score for participant {participant_id!r}")
        self.participant_id = participant_id


class UnknownStrategy(ValidationError):
    def __init__(self, name: str):
        super().__init__(f"unknown strategy {name!r}; expected one of {STRATEGY_NAMES}")
        self.name = name


@dataclass
class Grouping:
    strategy_name: str
    assignment: dict[str, int]
    k: int
    centroids: np.ndarray | None = None
    group_labels: list[str] | None = None

    def __post_init__(self):
        seen = sorted(set(self.assignment.values()))
        if seen != list(range(self.k)):
            raise ValidationError(
                f"group ids must be dense 0..{self.k - 1}, got {seen}")

    def groups(self) -> list[list[str]]:
        out: list[list[str]] = [[] for _ in range(self.k)]
        for pid in sorted(self.assignment):
            out[self.assignment[pid]].append(pid)
        return out

    def sizes(self) -> list[int]:
        return [len(g) for g in self.groups()]


@dataclass
class GmeansConfig:
    alpha: float = 0.0001
    k_max: int | None = None  # None -> floor(N/2), at least 1
    seed: int = 0
    max_iter: int = 300
    tol: float = 1e-8

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValidationError(f"alpha must be in (0,1), got {self.alpha}")
        if self.k_max is not None and self.k_max < 1:
            raise ValidationError(f"k_max must be >= 1, got {self.k_max}")


def _plus_plus_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(X)
    centroids = np.empty((k, X.shape[1]))
    centroids[0] = X[rng.integers(n)]
    d2 = cdist(X, centroids[:1], "sqeuclidean")[:, 0]
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:  # all points coincide with chosen centers
            centroids[j] = X[rng.integers(n)]
            continue
        centroids[j] = X[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, cdist(X, centroids[j:j + 1], "sqeuclidean")[:, 0])
    return centroids


def _lloyd(X: np.ndarray, centroids: np.ndarray, max_iter: int, tol: float,
           trace: list[float] | None = None) -> tuple[np.ndarray, np.ndarray, float]:
    """Lloyd iterations from given centroids; empty clusters get the point
    farthest from its assigned centroid. Returned centroids are exactly the
    group means of the returned assignment."""
    k = len(centroids)
    centroids = centroids.copy()
    rows = np.arange(len(X))
    assign = np.zeros(len(X), dtype=int)
    inertia = 0.0
    for _ in range(max(1, max_iter)):
        d2 = cdist(X, centroids, "sqeuclidean")
        assign = np.argmin(d2, axis=1)
        dist_own = d2[rows, assign]
        for j in range(k):
            if not np.any(assign == j):
                far = int(np.argmax(dist_own))
                assign[far] = j
                dist_own[far] = -1.0  # never steal the same point twice
        new_centroids = np.vstack([X[assign == j].mean(axis=0) for j in range(k)])
        shift = float(np.max(np.linalg.norm(new_centroids - centroids, axis=1)))
        centroids = new_centroids
        inertia = float(np.sum((X - centroids[assign]) ** 2))
        if trace is not None:
            trace.append(inertia)
        if shift < tol:
            break
    return assign, centroids, inertia


def kmeans(X: np.ndarray, k: int, seed: int, max_iter: int = 300,
           tol: float = 1e-8, trace: list[float] | None = None,
           ) -> tuple[np.ndarray, np.ndarray, float]:
    """k-means++ seeded Lloyd clustering; deterministic given seed."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or not np.all(np.isfinite(X)):
        raise ValidationError("X must be a finite 2-D array")
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    if k > len(X):
        raise KTooLarge(k, len(X))
    rng = np.random.default_rng(seed)
    centroids = _plus_plus_init(X, k, rng)
    return _lloyd(X, centroids, max_iter, tol, trace)


def anderson_darling_normal(values: np.ndarray,
                            alpha: float = 0.0001) -> tuple[float, bool]:
    """Composite-normality A^2* statistic and the reject decision at alpha.

    Standardizes by sample mean and std, applies the small-sample correction
    A^2* = A^2 (1 + 4/n - 25/n^2), and compares against the Stephens
    critical table.
    """
    if alpha not in AD_CRITICAL:
        raise ValidationError(f"alpha must be one of {sorted(AD_CRITICAL)}")
    x = np.sort(np.asarray(values, dtype=float))
    n = len(x)
    if n < AD_MIN_N:
        raise TooFewPoints(n)
    std = float(np.std(x, ddof=1))
    if std == 0.0:
        # a point mass carries no evidence against normality here; the
        # caller (gmeans) must not split it
        return 0.0, False
    z = (x - np.mean(x)) / std
    log_cdf = log_ndtr(z)
    log_sf = log_ndtr(-z)
    i = np.arange(1, n + 1)
    a2 = -n - np.mean((2 * i - 1) * (log_cdf + log_sf[::-1]))
    a2_star = a2 * (1.0 + 4.0 / n - 25.0 / (n * n))
    return float(a2_star), bool(a2_star > AD_CRITICAL[alpha])


def _split_direction(points: np.ndarray) -> np.ndarray | None:
    """Principal component scaled by sqrt(2 lambda / pi); None if degenerate."""
    cov = np.cov(points, rowvar=False, ddof=0)
    cov = np.atleast_2d(cov)
    eigvals, eigvecs = np.linalg.eigh(cov)
    lam = float(eigvals[-1])
    if lam <= 0:
        return None
    return eigvecs[:, -1] * np.sqrt(2.0 * lam / np.pi)


def gmeans(X: np.ndarray, config: GmeansConfig | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Grow k from 1 by statistical splitting; returns (assignment, centroids).

    A cluster splits when the 2-means children are kept by the normality
    test on the cluster's projection onto the child-centroid direction.
    Finishes with a global k-means polish from the accepted centroids.
    """
    config = config or GmeansConfig()
    X = np.asarray(X, dtype=float)
    if len(X) < 2:
        raise ValidationError("gmeans needs at least 2 points")
    k_max = config.k_max if config.k_max is not None else max(1, len(X) // 2)

    centroids: list[np.ndarray] = [X.mean(axis=0)]
    changed = True
    while changed:
        changed = False
        assign = np.argmin(cdist(X, np.vstack(centroids), "sqeuclidean"), axis=1)
        budget = k_max - len(centroids)
        survivors: list[np.ndarray] = []
        for j, c in enumerate(centroids):
            members = X[assign == j]
            if budget <= 0 or len(members) < AD_MIN_N:
                survivors.append(c)
                continue
            direction = _split_direction(members)
            if direction is None:  # point mass, nothing to split
                survivors.append(c)
                continue
            children = np.vstack([c + direction, c - direction])
            _, child_centroids, _ = _lloyd(members, children,
                                           config.max_iter, config.tol)
            gap = child_centroids[0] - child_centroids[1]
            norm = float(np.linalg.norm(gap))
            if norm == 0.0:
                survivors.append(c)
                continue
            _, reject = anderson_darling_normal(members @ (gap / norm),
                                                config.alpha)
            if reject:
                survivors.extend(child_centroids)
                changed = True
                budget -= 1
            else:
                survivors.append(c)
        centroids = survivors
    assign, final_centroids, _ = _lloyd(X, np.vstack(centroids),
                                        config.max_iter, config.tol)
    # the farthest-point rule in _lloyd keeps every final group non-empty
    return assign, final_centroids


def _grouping_from_assign(name: str, row_ids: list[str], assign: np.ndarray,
                          centroids: np.ndarray | None = None) -> Grouping:
    """Relabel group ids densely by first appearance over sorted row ids."""
    remap: dict[int, int] = {}
    assignment: dict[str, int] = {}
    order = np.argsort(row_ids)
    for i in order:
        gid = int(assign[i])
        if gid not in remap:
            remap[gid] = len(remap)
        assignment[row_ids[i]] = remap[gid]
    if centroids is not None:
        inv = sorted(remap, key=remap.get)
        centroids = centroids[inv]
    return Grouping(name, assignment, len(remap), centroids)


def sias_groups(sias: dict[str, int], participants: list[str],
                name: str = "SIAS") -> Grouping:
    """Cut scores at 34 and 43 into low/medium/high; empty levels dropped."""
    levels: dict[str, int] = {}
    for pid in participants:
        if pid not in sias:
            raise MissingScore(pid)
        score = sias[pid]
        levels[pid] = int(np.digitize(score, SIAS_CUTOFFS))
    used = sorted(set(levels.values()))
    remap = {lvl: i for i, lvl in enumerate(used)}
    assignment = {pid: remap[lvl] for pid, lvl in levels.items()}
    return Grouping(name, assignment, len(used),
                    group_labels=[SIAS_LEVELS[lvl] for lvl in used])


def binarize_by_activity(grouping: Grouping, scores: dict[str, float]) -> dict[str, bool]:
    """Mark the top floor(k/2) groups by mean member score as active."""
    means = []
    for gid, members in enumerate(grouping.groups()):
        means.append((float(np.mean([scores[p] for p in members])), gid))
    ranked = sorted(means, key=lambda t: (-t[0], t[1]))
    active_gids = {gid for _, gid in ranked[: grouping.k // 2]}
    return {pid: gid in active_gids for pid, gid in grouping.assignment.items()}


def regroup_communication(sms_grouping: Grouping, call_grouping: Grouping,
                          sms_scores: dict[str, float],
                          call_scores: dict[str, float],
                          name: str = "Communication") -> Grouping:
    """Binarize SMS and call groups into active/inactive and cross them into
    {both, either, neither}."""
    sms_active = binarize_by_activity(sms_grouping, sms_scores)
    call_active = binarize_by_activity(call_grouping, call_scores)
    labels = ("both", "either", "neither")
    raw: dict[str, int] = {}
    for pid in sms_grouping.assignment:
        n_active = int(sms_active[pid]) + int(call_active[pid])
        raw[pid] = 2 - n_active  # both -> 0, either -> 1, neither -> 2
    used = sorted(set(raw.values()))
    remap = {lvl: i for i, lvl in enumerate(used)}
    return Grouping(name, {pid: remap[lvl] for pid, lvl in raw.items()},
                    len(used), group_labels=[labels[lvl] for lvl in used])


def cross_groupings(name: str, a: Grouping, b: Grouping) -> Grouping:
    """Cross-product partition; empty cells dropped with dense re-indexing."""
    cells: dict[tuple[int, int], int] = {}
    assignment: dict[str, int] = {}
    pairs = {pid: (a.assignment[pid], b.assignment[pid]) for pid in a.assignment}
    for pair in sorted(set(pairs.values())):
        cells[pair] = len(cells)
    for pid, pair in pairs.items():
        assignment[pid] = cells[pair]
    return Grouping(name, assignment, len(cells))


def expected_level(props: np.ndarray) -> float:
    """Mean level index under a profile block's proportions."""
    return float(props @ np.arange(len(props)))


def zscore_columns(X: np.ndarray) -> np.ndarray:
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    sd[sd == 0] = 1.0
    return (X - mu) / sd


def strategy_groups(
    strategy: str,
    profiles: dict[str, BehaviorProfile],
    sias: dict[str, int],
    seed: int = 0,
    alpha: float = 0.0001,
    k_max: int | None = None,
    standardize: bool = True,
) -> Grouping:
    """Dispatch one of the ten canonical grouping strategies."""
    if strategy not in STRATEGY_NAMES:
        raise UnknownStrategy(strategy)
    participants = sorted(profiles)

    def run_gmeans(name: str, X: np.ndarray, *seed_names: str) -> Grouping:
        cfg = GmeansConfig(alpha=alpha, k_max=k_max,
                           seed=derive_seed(seed, strategy, *seed_names))
        assign, centroids = gmeans(zscore_columns(X) if standardize else X, cfg)
        return _grouping_from_assign(name, participants, assign, centroids)

    def modality_matrix(modalities: list[str]) -> np.ndarray:
        return build_design_matrix(profiles, modalities, sias=sias).X

    def comm_parts() -> tuple[Grouping, Grouping, dict[str, float], dict[str, float]]:
        sms_g = run_gmeans("SMS", modality_matrix(["sms"]), "sms")
        call_g = run_gmeans("Calls", modality_matrix(["calls"]), "calls")
        sms_scores = {p: expected_level(profiles[p].sms_props) for p in participants}
        call_scores = {p: expected_level(profiles[p].call_props) for p in participants}
        return sms_g, call_g, sms_scores, call_scores

    if strategy in ("Location", "Activity", "SMS", "Calls"):
        modality = strategy.lower()
        return run_gmeans(strategy, modality_matrix([modality]))
    if strategy == "SIAS":
        return sias_groups(sias, participants)
    if strategy == "Communication":
        return regroup_communication(*comm_parts())
    if strategy == "DailyActivity":
        sms_g, call_g, sms_scores, call_scores = comm_parts()
        sms_active = binarize_by_activity(sms_g, sms_scores)
        call_active = binarize_by_activity(call_g, call_scores)
        base = modality_matrix(["location", "activity"])
        comm = np.array([[float(sms_active[p]), float(call_active[p])]
                         for p in participants])
        return run_gmeans(strategy, np.hstack([base, comm]))
    if strategy == "SIAS+Communication":
        comm = regroup_communication(*comm_parts())
        return cross_groupings(strategy, sias_groups(sias, participants), comm)
    if strategy == "AllMinusCommunication":
        return run_gmeans(strategy, modality_matrix(["location", "activity", "sias"]))
    if strategy == "AllMinusSIAS":
        return run_gmeans(strategy,
                          modality_matrix(["location", "activity", "sms", "calls"]))
    raise UnknownStrategy(strategy)


def write_groups_csv(groupings: list[Grouping], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["participant_id", "strategy", "group_id"])
        for g in groupings:
            for pid in sorted(g.assignment):
                w.writerow([pid, g.strategy_name, g.assignment[pid]])
