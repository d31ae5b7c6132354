"""Monte Carlo estimators for the walk's asymptotic quantities.

Every estimator returns an Estimate carrying a standard error computed
from the same sample, so callers can gate on value +- k * std_error.
Sampling always goes through the chunked engine in walk.py, which keeps
results independent of the worker count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .matrices import SimplexPoint
from .walk import WalkConfig, simulate_batch, simulate_from_states
from . import statkit

__all__ = [
    "Estimate",
    "HarmonicEstimate",
    "estimate_lyapunov",
    "estimate_sigma2",
    "estimate_invariant",
    "estimate_survival",
    "estimate_harmonic",
    "harmonic_surface",
    "estimate_local",
    "estimate_window_unconditioned",
    "conditioned_terminal_sample",
]

DEFAULT_BURN_IN = 128


@dataclass(frozen=True)
class Estimate:
    value: float
    std_error: float
    n_samples: int
    method: str
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "std_error": self.std_error,
            "n_samples": self.n_samples,
            "method": self.method,
            "extra": self.extra,
        }


def _uniform_cfg(spec, level, horizon, direction="forward"):
    return WalkConfig(
        start=SimplexPoint.uniform(spec.dim),
        start_level=level,
        horizon=horizon,
        direction=direction,
    )


def estimate_lyapunov(
    spec,
    *,
    n: int = 1024,
    reps: int = 2048,
    seed: int = 0,
    burn_in: int = DEFAULT_BURN_IN,
    workers: int = 1,
    direction: str = "forward",
    stream_tag: int = 0,
) -> Estimate:
    """Top log-norm growth rate: mean of S_n / n over reps paths.

    The burn-in lets the direction component forget the uniform start
    before accumulation begins, removing the O(1/n) boundary bias from
    the level estimate (it still decays like 1/n in the correlated tail).
    For the dual walk the accumulated increments are negated levels, so
    the returned rate is the growth rate of the dual log-norm.
    """
    cfg = _uniform_cfg(spec, 0.0, n, direction)
    batch = simulate_batch(
        spec, cfg, reps, seed,
        workers=workers, burn_in=burn_in, store_points=False, stream_tag=stream_tag,
    )
    sums = batch.cum_sum if direction == "forward" else -batch.cum_sum
    per_step = sums / n
    value = float(per_step.mean())
    se = float(per_step.std(ddof=1) / math.sqrt(reps))
    return Estimate(value, se, reps, "lyapunov_mean", {"horizon": n, "burn_in": burn_in})


def estimate_sigma2(
    spec,
    *,
    horizon: int = 1024,
    reps: int = 4096,
    seed: int = 0,
    burn_in: int = DEFAULT_BURN_IN,
    workers: int = 1,
) -> Estimate:
    """Asymptotic variance rate sigma^2 = lim Var(S_n)/n.

    Var(S_n)/n has an O(1/n) bias from increment autocovariance edge
    effects, so the estimate combines horizons n and 2n by Richardson
    extrapolation: 2*v(2n) - v(n).  Both raw values ride along in extra.
    """
    values = {}
    ses = {}
    for tag, n in enumerate((horizon, 2 * horizon)):
        cfg = _uniform_cfg(spec, 0.0, n)
        batch = simulate_batch(
            spec, cfg, reps, seed,
            workers=workers, burn_in=burn_in, store_points=False, stream_tag=tag,
        )
        s = batch.cum_sum
        centered = s - s.mean()
        v = float(centered.var(ddof=1) / n)
        # standard error of a sample variance via the fourth moment
        m4 = float((centered**4).mean())
        var_of_var = (m4 - centered.var(ddof=0) ** 2) / reps
        values[n] = v
        ses[n] = math.sqrt(max(var_of_var, 0.0)) / n
    value = 2.0 * values[2 * horizon] - values[horizon]
    se = math.sqrt(4.0 * ses[2 * horizon] ** 2 + ses[horizon] ** 2)
    return Estimate(
        value,
        se,
        2 * reps,
        "sigma2_richardson",
        {"raw": {str(n): values[n] for n in values}, "horizons": [horizon, 2 * horizon]},
    )


def estimate_invariant(
    spec,
    u,
    *,
    reps: int = 8192,
    burn_in: int = DEFAULT_BURN_IN,
    seed: int = 0,
    workers: int = 1,
    direction: str = "forward",
) -> Estimate:
    """Mean of u under the stationary law of the direction component.

    u maps an (reps, dim) array of simplex points to an (reps,) array.
    extra carries the one-step invariance residual mean(u(X_{k+1})) -
    mean(u(X_k)), which should sit within a few of its own se when the
    chain has mixed.
    """
    cfg = _uniform_cfg(spec, 0.0, burn_in, direction)
    batch = simulate_batch(spec, cfg, reps, seed, workers=workers, store_points=True)
    vals = np.asarray(u(batch.terminal_point), dtype=float)
    value = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(reps)) if reps > 1 else float("inf")
    stepped, _ = _one_step_points(spec, batch.terminal_point, seed + 1, direction)
    vals2 = np.asarray(u(stepped), dtype=float)
    resid = float(vals2.mean() - value)
    resid_se = float((vals2 - vals).std(ddof=1) / math.sqrt(reps)) if reps > 1 else float("inf")
    return Estimate(
        value, se, reps, "invariant_burnin",
        {"one_step_residual": resid, "one_step_residual_se": resid_se, "burn_in": burn_in},
    )


def _one_step_points(spec, points, seed, direction):
    batch = simulate_from_states(
        spec, points, np.zeros(points.shape[0]), 1, seed, direction=direction,
    )
    return batch.terminal_point, batch.terminal_level


def estimate_survival(
    spec,
    *,
    start_level: float,
    horizon: int,
    count: int,
    seed: int = 0,
    start: SimplexPoint | None = None,
    workers: int = 1,
    direction: str = "forward",
    stream_tag: int = 0,
) -> Estimate:
    """Binomial estimate of P(exit time > horizon) from start_level."""
    cfg = WalkConfig(
        start=start if start is not None else SimplexPoint.uniform(spec.dim),
        start_level=start_level,
        horizon=horizon,
        direction=direction,
    )
    batch = simulate_batch(
        spec, cfg, count, seed,
        workers=workers, early_exit=True, store_points=False, stream_tag=stream_tag,
    )
    hits = int(batch.survived.sum())
    value, se = statkit.binomial_estimate(hits, count)
    extra = {"hits": hits, "horizon": horizon, "start_level": start_level}
    if hits == 0:
        extra["upper_bound_95"] = 3.0 / count  # rule of three
    return Estimate(value, se, count, "survival_binomial", extra)


@dataclass(frozen=True)
class HarmonicEstimate:
    """Two routes to the exit-time harmonic mass at one start level.

    v_mart is the martingale route E[(a + S_n) 1{exit > n}], increasing in
    n toward the limit; v_tail converts the survival probability through
    its sqrt(n) tail law and needs sigma.  consistent means the two routes
    agree within 3 combined standard errors at the horizon used.
    """

    at: float
    v_mart: float
    v_mart_se: float
    v_tail: float
    v_tail_se: float
    horizon_used: int
    table: dict
    consistent: bool

    def to_dict(self) -> dict:
        return {
            "at": self.at,
            "v_mart": self.v_mart,
            "v_mart_se": self.v_mart_se,
            "v_tail": self.v_tail,
            "v_tail_se": self.v_tail_se,
            "horizon_used": self.horizon_used,
            "table": self.table,
            "consistent": self.consistent,
        }


def harmonic_surface(
    spec,
    a_values,
    horizons,
    count: int,
    seed: int = 0,
    *,
    workers: int = 1,
    direction: str = "forward",
    stream_tag: int = 0,
):
    """Martingale-route harmonic values for every (a, horizon) pair at once.

    One batch walks from level 0 without exit handling while recording the
    running minimum m_k and level s_k at each horizon; the walk started at
    level a survives to k iff a + m_k > 0 and then sits at a + s_k.  All
    start levels therefore share one set of paths, which keeps the surface
    monotone in a by construction.

    Returns (v (len(a) x len(horizons)), se, survival (same shape)).
    """
    a_values = np.asarray(a_values, dtype=float)
    horizons = sorted(int(h) for h in horizons)
    cfg = WalkConfig(
        start=SimplexPoint.uniform(spec.dim),
        start_level=0.0,
        horizon=horizons[-1],
        direction=direction,
    )
    batch = simulate_batch(
        spec, cfg, count, seed,
        workers=workers, early_exit=False, store_points=False,
        checkpoints=horizons, stream_tag=stream_tag,
    )
    mins = batch.checkpoint_min  # (count, H)
    levels = batch.checkpoint_level
    v = np.empty((a_values.size, len(horizons)))
    se = np.empty_like(v)
    surv = np.empty_like(v)
    for i, a in enumerate(a_values):
        alive = mins > -a  # (count, H)
        contrib = np.where(alive, a + levels, 0.0)
        v[i] = contrib.mean(axis=0)
        se[i] = contrib.std(axis=0, ddof=1) / math.sqrt(count)
        surv[i] = alive.mean(axis=0)
    return v, se, surv


def estimate_harmonic(
    spec,
    *,
    start_level: float,
    horizons=(256, 1024, 4096),
    count: int = 200_000,
    seed: int = 0,
    sigma: float | None = None,
    sigma_se: float = 0.0,
    workers: int = 1,
    direction: str = "forward",
    stream_tag: int = 0,
) -> HarmonicEstimate:
    """Harmonic mass at one start level via both routes.

    The martingale route needs no external inputs.  The tail route
    v_tail = (sigma * sqrt(2 pi n) / 2) * P(exit > n) converts the
    survival rate at the largest horizon whose survivor count is adequate
    (>= 100) and whose survival has entered the decay regime (<= 1/2;
    above that the start level still sits on the diffusive scale and the
    conversion is meaningless).  sigma's own error propagates into
    v_tail_se.  Without a usable tail route it is reported as nan and
    consistency is judged against the martingale trend instead.
    """
    a = float(start_level)
    v, se, surv = harmonic_surface(
        spec, [a], horizons, count, seed,
        workers=workers, direction=direction, stream_tag=stream_tag,
    )
    horizons = sorted(int(h) for h in horizons)
    table = {
        str(h): {"v_mart": float(v[0, j]), "se": float(se[0, j]), "survival": float(surv[0, j])}
        for j, h in enumerate(horizons)
    }
    # martingale value at the largest horizon
    v_mart = float(v[0, -1])
    v_mart_se = float(se[0, -1])
    horizon_used = horizons[-1]
    # tail route at the largest horizon with enough survivors
    v_tail = float("nan")
    v_tail_se = float("inf")
    if sigma is not None:
        for j in range(len(horizons) - 1, -1, -1):
            hits = surv[0, j] * count
            if hits >= 100 and surv[0, j] <= 0.5:
                n = horizons[j]
                p = float(surv[0, j])
                p_se = math.sqrt(max(p * (1 - p), 0.0) / count)
                coef = math.sqrt(2.0 * math.pi * n) / 2.0
                v_tail = coef * sigma * p
                v_tail_se = coef * math.hypot(sigma * p_se, p * sigma_se)
                horizon_used = n
                break
    if math.isnan(v_tail):
        # no tail route: accept if the martingale values have flattened
        gap = abs(v[0, -1] - v[0, -2]) if len(horizons) > 1 else 0.0
        consistent = gap <= 3.0 * (se[0, -1] + se[0, -2]) if len(horizons) > 1 else True
    else:
        j = horizons.index(horizon_used)
        consistent = abs(v_tail - float(v[0, j])) <= 3.0 * (v_tail_se + float(se[0, j]))
        v_mart = float(v[0, j])
        v_mart_se = float(se[0, j])
    return HarmonicEstimate(
        at=a,
        v_mart=v_mart,
        v_mart_se=v_mart_se,
        v_tail=v_tail,
        v_tail_se=v_tail_se,
        horizon_used=horizon_used,
        table=table,
        consistent=bool(consistent),
    )


def estimate_local(
    spec,
    *,
    start_level: float,
    horizon: int,
    window: tuple[float, float],
    count: int,
    seed: int = 0,
    strategy: str = "naive",
    start: SimplexPoint | None = None,
    workers: int = 1,
    direction: str = "forward",
    stream_tag: int = 0,
) -> Estimate:
    """P(exit > horizon, terminal level in [window[0], window[1]]).

    strategy "naive" runs every path to the horizon.  strategy "split"
    spends half the paths reaching m = horizon // 2, then restarts a
    balanced number of replicas from each survivor state, multiplying the
    two phase estimates; by the Markov property the product is unbiased,
    and the replica correlation within an ancestor is absorbed by a
    clustered standard error.  Splitting wins when survival to the horizon
    is rare but survival to m is not.
    """
    lo, hi = float(window[0]), float(window[1])
    if hi < lo:
        raise ValueError("window upper edge below lower edge")
    x0 = start if start is not None else SimplexPoint.uniform(spec.dim)
    if strategy == "naive":
        cfg = WalkConfig(start=x0, start_level=start_level, horizon=horizon, direction=direction)
        batch = simulate_batch(
            spec, cfg, count, seed,
            workers=workers, early_exit=True, store_points=False, stream_tag=stream_tag,
        )
        ok = batch.survived & (batch.terminal_level >= lo) & (batch.terminal_level <= hi)
        value, se = statkit.binomial_estimate(int(ok.sum()), count)
        return Estimate(value, se, count, "local_naive",
                        {"window": [lo, hi], "horizon": horizon, "hits": int(ok.sum())})
    if strategy != "split":
        raise ValueError("strategy must be 'naive' or 'split'")
    if horizon < 2:
        raise ValueError("split strategy needs horizon >= 2")
    m = horizon // 2
    count1 = count // 2
    cfg1 = WalkConfig(start=x0, start_level=start_level, horizon=m, direction=direction)
    phase1 = simulate_batch(
        spec, cfg1, count1, seed,
        workers=workers, early_exit=True, store_points=True, stream_tag=stream_tag,
    )
    alive = phase1.survived
    k = int(alive.sum())
    p1, se1 = statkit.binomial_estimate(k, count1)
    if k == 0:
        return Estimate(0.0, se1, count1, "local_split",
                        {"window": [lo, hi], "horizon": horizon, "phase1_survivors": 0,
                         "upper_bound_95": 3.0 / count1})
    reps = max(1, (count - count1) // k)
    pts = np.repeat(phase1.terminal_point[alive], reps, axis=0)
    lvls = np.repeat(phase1.terminal_level[alive], reps)
    phase2 = simulate_from_states(
        spec, pts, lvls, horizon - m, seed + 1,
        direction=direction, early_exit=True, store_points=False,
        stream_tag=stream_tag + 1,
    )
    ok = phase2.survived & (phase2.terminal_level >= lo) & (phase2.terminal_level <= hi)
    per_ancestor = ok.reshape(k, reps).mean(axis=1)
    p2 = float(per_ancestor.mean())
    se2 = float(per_ancestor.std(ddof=1) / math.sqrt(k)) if k > 1 else float("inf")
    value = p1 * p2
    if value > 0.0:
        se = value * math.hypot(se1 / p1, se2 / p2 if p2 > 0 else 0.0)
    else:
        se = p1 * se2 + p2 * se1
    return Estimate(value, se, count1 + k * reps, "local_split",
                    {"window": [lo, hi], "horizon": horizon, "phase1_survivors": k,
                     "replication": reps, "phase1": p1, "phase2": p2})


def estimate_window_unconditioned(
    spec,
    *,
    horizon: int,
    window: tuple[float, float],
    count: int,
    seed: int = 0,
    start: SimplexPoint | None = None,
    workers: int = 1,
    direction: str = "forward",
    stream_tag: int = 0,
) -> Estimate:
    """P(S_horizon in [window[0], window[1]]) with no exit conditioning."""
    lo, hi = float(window[0]), float(window[1])
    cfg = WalkConfig(
        start=start if start is not None else SimplexPoint.uniform(spec.dim),
        start_level=0.0,
        horizon=horizon,
        direction=direction,
    )
    batch = simulate_batch(
        spec, cfg, count, seed,
        workers=workers, early_exit=False, store_points=False, stream_tag=stream_tag,
    )
    s = batch.cum_sum
    hits = int(((s >= lo) & (s <= hi)).sum())
    value, se = statkit.binomial_estimate(hits, count)
    return Estimate(value, se, count, "window_unconditioned",
                    {"window": [lo, hi], "horizon": horizon, "hits": hits})


def conditioned_terminal_sample(
    spec,
    *,
    start_level: float,
    horizon: int,
    target: int,
    seed: int = 0,
    batch_size: int = 65_536,
    max_paths: int = 50_000_000,
    workers: int = 1,
    direction: str = "forward",
):
    """Terminal levels of surviving paths, collected until target is met.

    Draws batches on successive stream tags so the sample stays
    reproducible, and raises if max_paths is exhausted first.  Returns
    (levels array of size >= target, total paths simulated).
    """
    cfg = WalkConfig(
        start=SimplexPoint.uniform(spec.dim),
        start_level=start_level,
        horizon=horizon,
        direction=direction,
    )
    got = []
    total = 0
    tag = 0
    n_hits = 0
    while n_hits < target:
        if total >= max_paths:
            raise RuntimeError(
                f"collected {n_hits}/{target} survivors after {total} paths; "
                "survival too rare at this horizon"
            )
        batch = simulate_batch(
            spec, cfg, batch_size, seed,
            workers=workers, early_exit=True, store_points=False, stream_tag=tag,
        )
        lv = batch.terminal_level[batch.survived]
        got.append(lv)
        n_hits += lv.size
        total += batch_size
        tag += 1
    return np.concatenate(got), total
