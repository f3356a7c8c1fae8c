"""Runtime boundary learning and trend-based fault prediction."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from depguard.core import OBSERVABLES, Feature, Observable


class Side(enum.Enum):
    BELOW = "Below"
    ABOVE = "Above"

    def beyond(self, value: float, tau: float) -> bool:
        return value < tau if self is Side.BELOW else value > tau


class Flag(enum.Enum):
    NORMAL_SIDE = "NormalSide"
    FAILURE_SIDE = "FailureSide"


@dataclass(frozen=True)
class ThresholdEntry:
    tau: float = math.nan
    failure_side: Side = Side.BELOW
    confidence: float = 0.0
    sample_count: int = 0
    usable: bool = False
    source: str = "unlearned"  # learned | bootstrap | unlearned
    low_confidence: bool = False
    balanced_accuracy: float = 0.0


@dataclass
class ThresholdModel:
    entries: dict = field(default_factory=lambda: {obs: ThresholdEntry() for obs in OBSERVABLES})

    def __getitem__(self, obs: Observable) -> ThresholdEntry:
        return self.entries[obs]

    def to_dict(self) -> dict:
        return {obs.value: {"tau": e.tau, "failure_side": e.failure_side.value,
                            "confidence": e.confidence, "sample_count": e.sample_count,
                            "usable": e.usable, "source": e.source}
                for obs, e in self.entries.items()}


def bootstrap_model(rx_sensitivity: float = -90.0, analysis_cfg=None) -> ThresholdModel:
    """Conservative thresholds used until enough labels exist."""
    from depguard.config import AnalysisConfig

    cfg = analysis_cfg or AnalysisConfig()
    taus = {
        Observable.RSSI_MEAN: rx_sensitivity + cfg.bootstrap_rssi_margin,
        Observable.NEIGHBOR_COUNT: cfg.bootstrap_neighbors,
        Observable.MESSAGES_RECEIVED: cfg.bootstrap_messages,
        Observable.BATTERY_LEVEL: cfg.bootstrap_battery,
    }
    return ThresholdModel({obs: ThresholdEntry(tau, Side.BELOW, usable=True, source="bootstrap")
                           for obs, tau in taus.items()})


@dataclass(frozen=True)
class Stump:
    tau: float
    failure_side: Side
    correct: int
    total: int
    margin: float
    balanced_accuracy: float

    @property
    def accuracy(self) -> float:
        return self.correct / self.total


def fit_stump(values, failure) -> Stump | None:
    """Best single-threshold split of ``values`` given boolean ``failure`` labels.

    Candidate cuts are midpoints between consecutive distinct values.  Ties on
    accuracy go to the wider margin, then to the lower threshold, then Below.
    """
    v = np.asarray(values, dtype=float)
    y = np.asarray(failure, dtype=bool)
    uniq, inverse = np.unique(v, return_inverse=True)
    if len(uniq) < 2:
        return None
    f_per = np.bincount(inverse, weights=y, minlength=len(uniq))
    n_per = np.bincount(inverse, weights=~y, minlength=len(uniq))
    f_le = np.cumsum(f_per)[:-1]
    n_le = np.cumsum(n_per)[:-1]
    f_tot, n_tot = f_per.sum(), n_per.sum()
    below = f_le + (n_tot - n_le)  # failure predicted for v < cut
    above = n_le + (f_tot - f_le)
    cuts = (uniq[:-1] + uniq[1:]) / 2.0
    margins = (uniq[1:] - uniq[:-1]) / 2.0
    correct = np.concatenate([below, above]).astype(np.int64)
    margin = np.concatenate([margins, margins])
    tau = np.concatenate([cuts, cuts])
    # most correct, then widest margin, then lowest tau, then Below (lower index)
    cand = np.flatnonzero(correct == correct.max())
    cand = cand[margin[cand] == margin[cand].max()]
    cand = cand[tau[cand] == tau[cand].min()]
    best = int(cand[0])
    side = Side.BELOW if best < len(cuts) else Side.ABOVE
    i = best % len(cuts)
    if side is Side.BELOW:
        tp, tn = f_le[i], n_tot - n_le[i]
    else:
        tp, tn = f_tot - f_le[i], n_le[i]
    if f_tot and n_tot:
        balanced = 0.5 * (tp / f_tot + tn / n_tot)
    else:
        balanced = (tp + tn) / len(v)
    return Stump(float(tau[best]), side, int(correct[best]), len(v), float(margin[best]),
                 float(balanced))


def learn_thresholds(labeled, *, bootstrap: ThresholdModel | None = None, min_samples: int = 10,
                     min_balanced_accuracy: float = 0.75) -> ThresholdModel:
    """Fit one decision stump per observable from (frame, label) pairs.

    Stale frames are skipped.  An entry is usable when each class has at least
    ``min_samples`` frames and the stump's balanced accuracy reaches
    ``min_balanced_accuracy``; otherwise the bootstrap entry (if any) is kept.
    """
    pairs = [(f, lab) for f, lab in labeled if f.reachable]
    values = np.array([f.values for f, _ in pairs], dtype=float).reshape(-1, len(OBSERVABLES))
    failure = np.array([not lab.normal for _, lab in pairs], dtype=bool)
    return learn_from_arrays(values, failure, bootstrap=bootstrap, min_samples=min_samples,
                             min_balanced_accuracy=min_balanced_accuracy)


def learn_from_arrays(values, failure, *, bootstrap: ThresholdModel | None = None,
                      min_samples: int = 10, min_balanced_accuracy: float = 0.75) -> ThresholdModel:
    """Same as :func:`learn_thresholds` on an (n, 4) value matrix and failure mask."""
    model = ThresholdModel()
    n_fail = int(np.count_nonzero(failure))
    n_norm = len(failure) - n_fail
    for obs in OBSERVABLES:
        fallback = bootstrap[obs] if bootstrap is not None else ThresholdEntry()
        stump = fit_stump(values[:, obs.index], failure) if n_fail and n_norm else None
        if stump is None:
            model.entries[obs] = fallback
            continue
        low = stump.balanced_accuracy < min_balanced_accuracy
        usable = min(n_fail, n_norm) >= min_samples and not low
        entry = ThresholdEntry(stump.tau, stump.failure_side, stump.accuracy, len(failure),
                               usable=usable, source="learned", low_confidence=low,
                               balanced_accuracy=stump.balanced_accuracy)
        model.entries[obs] = entry if usable or bootstrap is None else fallback
    return model


@dataclass(frozen=True)
class Classification:
    flag: Flag
    unlearned: bool = False

    @property
    def failure(self) -> bool:
        return self.flag is Flag.FAILURE_SIDE


def classify_value(value: float, entry: ThresholdEntry) -> Classification:
    if not entry.usable:
        return Classification(Flag.NORMAL_SIDE, unlearned=True)
    return Classification(Flag.FAILURE_SIDE if entry.failure_side.beyond(value, entry.tau)
                          else Flag.NORMAL_SIDE)


def failure_mask(values, model: ThresholdModel) -> np.ndarray:
    """Boolean (n, 4) matrix: True where a value lies beyond a usable threshold."""
    values = np.asarray(values, dtype=float).reshape(-1, len(OBSERVABLES))
    out = np.zeros(values.shape, dtype=bool)
    for obs in OBSERVABLES:
        e = model[obs]
        if e.usable:
            col = values[:, obs.index]
            out[:, obs.index] = col < e.tau if e.failure_side is Side.BELOW else col > e.tau
    return out


def classify(frame, model: ThresholdModel) -> dict:
    """Per-observable side of the boundary; values equal to tau are normal."""
    return {obs: classify_value(frame.values[obs.index], model[obs]) for obs in OBSERVABLES}


@dataclass(frozen=True)
class TrendFit:
    slope: float
    intercept: float  # value at the first tick of the window
    residual_sigma: float
    window_len: int
    start: float

    def at(self, tick: float) -> float:
        return self.intercept + self.slope * (tick - self.start)


def fit_line(ticks, values) -> TrendFit:
    """Least-squares line through points given as parallel arrays."""
    return _fit_columns(np.asarray(ticks, dtype=float),
                        np.asarray(values, dtype=float)[:, None])[0]


def fit_trend(series) -> TrendFit:
    """Least-squares line through (tick, value) pairs.

    ``residual_sigma`` is the residual standard error (``n - 2`` degrees of
    freedom), zero for an exact line or a two-point window.
    """
    pairs = list(series)
    if len(pairs) < 2:
        raise ValueError("need at least 2 points")
    arr = np.asarray(pairs, dtype=float)
    return fit_line(arr[:, 0], arr[:, 1])


def _fit_columns(t, Y) -> list[TrendFit]:
    slopes, intercepts, sigmas, start = _fit_arrays(t, Y)
    return [TrendFit(float(m), float(b), float(s), len(t), start)
            for m, b, s in zip(slopes, intercepts, sigmas)]


def _fit_arrays(t, Y):
    n = len(t)
    if n < 2 or np.ptp(t) == 0:
        raise ValueError("need at least 2 points with distinct ticks")
    tm = t.mean()
    dt = t - tm
    sxx = float(dt @ dt)
    ym = Y.mean(axis=0)
    slopes = (dt @ (Y - ym)) / sxx
    start = float(t.min())
    intercepts = ym + slopes * (start - tm)
    resid = Y - (ym + np.outer(dt, slopes))
    if n > 2:
        sigmas = np.sqrt((resid * resid).sum(axis=0) / (n - 2))
    else:
        sigmas = np.zeros(Y.shape[1])
    return slopes, intercepts, sigmas, start


class FaultType(enum.Enum):
    BATTERY_DEPLETION = "BatteryDepletion"
    CONNECTIVITY_LOSS = "ConnectivityLoss"
    MESSAGE_LOSS = "MessageLoss"
    NODE_UNREACHABLE = "NodeUnreachable"


FAULT_OF_TRIGGER = {
    Observable.BATTERY_LEVEL: FaultType.BATTERY_DEPLETION,
    Observable.RSSI_MEAN: FaultType.CONNECTIVITY_LOSS,
    Observable.NEIGHBOR_COUNT: FaultType.CONNECTIVITY_LOSS,
    Observable.MESSAGES_RECEIVED: FaultType.MESSAGE_LOSS,
}


@dataclass(frozen=True)
class FaultPrediction:
    node: int
    feature: Feature
    fault_type: FaultType
    t_min: int
    t_max: int
    issued_at: int
    trigger: Observable | None  # None for NodeUnreachable

    def __post_init__(self):
        if not self.issued_at <= self.t_min <= self.t_max:
            raise ValueError(f"bad interval: issued {self.issued_at}, [{self.t_min}, {self.t_max}]")

    @property
    def subject(self) -> tuple[int, Feature]:
        return (self.node, self.feature)

    @property
    def key(self) -> tuple[int, Observable | None]:
        return (self.node, self.trigger)


def _ceil(x: float) -> int:
    return math.ceil(round(x, 9))


def crossing_interval(fit: TrendFit, tau: float, side: Side, band_k: float):
    """(early, central, late) times at which the fitted line and its band reach tau.

    Returns None when the trend is flat or moves away from the failure side.
    """
    m = fit.slope
    if (side is Side.BELOW and m >= 0) or (side is Side.ABOVE and m <= 0):
        return None
    band = band_k * fit.residual_sigma
    # the band edge nearer the failure side crosses first
    lead = band if side is Side.BELOW else -band
    central = fit.start + (tau - fit.intercept) / m
    early = fit.start + (tau + lead - fit.intercept) / m
    late = fit.start + (tau - lead - fit.intercept) / m
    return early, central, late


def predict_node(node: int, frames, model: ThresholdModel, horizon: int, *, band_k: float = 2.0,
                 unreachable_after: int = 5, skip=frozenset(), issued_at: int | None = None,
                 min_points: int = 2):
    """Predictions for one node from its recent frames (oldest first)."""
    if not frames:
        return []
    latest = frames[-1]
    issued = latest.tick if issued_at is None else issued_at
    out = []
    if not latest.reachable:
        run = 0
        for f in reversed(frames):
            if f.reachable:
                break
            run += 1
        if run >= unreachable_after and (node, None) not in skip:
            out.append(FaultPrediction(node, Feature.COMMUNICATION, FaultType.NODE_UNREACHABLE,
                                       issued, issued, issued, None))
        return out
    fresh = [f for f in frames if f.reachable]
    if len(fresh) < max(2, min_points):
        return out
    wanted = [obs for obs in OBSERVABLES if model[obs].usable and (node, obs) not in skip]
    if not wanted:
        return out
    ticks = np.array([f.tick for f in fresh], dtype=float)
    vals = np.array([f.values for f in fresh], dtype=float)[:, [obs.index for obs in wanted]]
    fits = _fit_columns(ticks, vals)
    return [p for obs, fit in zip(wanted, fits)
            if (p := _predict_one(node, obs, fit, model, issued, horizon, band_k)) is not None]


def _predict_batch(nodes, ticks, Y, usable, model, horizon, band_k, skip):
    """Predictions for ``nodes`` whose usable observables are the column blocks of ``Y``."""
    m, b0, sd, start = _fit_arrays(ticks, Y)
    issued = int(ticks[-1])
    k = len(usable)
    out = []
    # cheap vectorized screen; survivors go through the exact scalar path
    slopes = m.reshape(len(nodes), k)
    starts = b0.reshape(len(nodes), k)
    taus = np.array([model[o].tau for o in usable])
    below = np.array([model[o].failure_side is Side.BELOW for o in usable])
    toward = np.where(below, slopes < 0, slopes > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        central = ticks[0] + (taus - starts) / slopes
    near = toward & (central <= issued + horizon + 1)
    for b, j in zip(*np.nonzero(near)):
        node, obs = nodes[b], usable[j]
        if (node, obs) in skip:
            continue
        c = b * k + j
        fit = TrendFit(float(m[c]), float(b0[c]), float(sd[c]), len(ticks), start)
        p = _predict_one(node, obs, fit, model, issued, horizon, band_k)
        if p is not None:
            out.append(p)
    return out


def _predict_one(node, obs, fit, model, issued, horizon, band_k) -> FaultPrediction | None:
    entry = model[obs]
    times = crossing_interval(fit, entry.tau, entry.failure_side, band_k)
    if times is None:
        return None
    early, central, late = times
    if max(_ceil(central), issued) > issued + horizon:
        return None
    lo, hi = issued, issued + horizon
    t_min = min(max(_ceil(early), lo), hi)
    t_max = min(max(_ceil(late), lo), hi)
    return FaultPrediction(node, obs.feature, FAULT_OF_TRIGGER[obs], t_min, t_max, issued, obs)


def predict_faults(history, model: ThresholdModel, horizon: int, *, window: int = 30,
                   band_k: float = 2.0, unreachable_after: int = 5, open_keys=frozenset(),
                   min_points: int = 2):
    """Fault predictions for every node in ``history``.

    ``open_keys`` holds (node, trigger) pairs that already have an open
    prediction; those are suppressed.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    depth = max(window, unreachable_after)
    usable = [obs for obs in OBSERVABLES if model[obs].usable]
    need = max(2, min_points)
    grid = history.grid(window)
    batched = set()
    out = []
    if grid is not None and usable:
        # nodes whose whole window is fresh share one tick vector: fit them together
        nodes, ticks, values, reach = grid
        if len(ticks) >= need:
            fresh = np.flatnonzero(reach.all(axis=0))
            if len(fresh):
                batched = {nodes[i] for i in fresh}
                cols = [obs.index for obs in usable]
                Y = values[:, fresh][:, :, cols].reshape(len(ticks), -1)
                out.extend(_predict_batch([nodes[i] for i in fresh], ticks, Y, usable, model,
                                          horizon, band_k, open_keys))
    for node in history.nodes:
        if node in batched:
            continue
        frames = history.frames(node, depth)
        if frames[-1].reachable:
            frames = frames[-window:]
        out.extend(predict_node(node, frames, model, horizon, band_k=band_k,
                                unreachable_after=unreachable_after, skip=open_keys,
                                min_points=min_points))
    out.sort(key=lambda p: (p.node, -1 if p.trigger is None else p.trigger.index))
    return out
