"""Vectorized batch simulation of the matrix-product walk and its dual.

A path is (X_k, level_k): the simplex direction and the accumulated
log-norm level starting from `start_level`.  Raw matrix products are never
stored; each step renormalizes the direction and adds the log-norm
increment, so nothing can overflow at any horizon.

Reproducibility contract: paths are split into fixed chunks of CHUNK
consecutive path indices; chunk i draws from its own counter-based Philox
stream keyed by (seed_namespace, seed, stream_tag, i).  Workers own
disjoint chunk ranges and results are concatenated in chunk order, so the
output is byte-identical for any worker count.  The per-chunk draw order
(one block of matrix draws per step for the currently active paths) is
part of the contract.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .ensembles import EnsembleSpec, family_kernel
from .matrices import SimplexPoint

__all__ = [
    "CHUNK",
    "WalkConfig",
    "WalkPathRecord",
    "WalkBatch",
    "simulate_batch",
    "simulate_from_states",
    "one_step",
    "ExactLaw",
    "enumerate_exact",
]

CHUNK = 8192  # paths per rng stream; frozen, results must not depend on worker count

_ENUM_BLOCK = 65_536  # max vectorized leaf block in enumerate_exact


@dataclass(frozen=True)
class WalkConfig:
    """Where a batch starts and how long it runs.

    direction "forward" walks level_k = a + ln|g_k ... g_1 x|; "dual" walks
    level_k = b - ln|x g_1 ... g_k| on row points (decrements).  The exit
    time is the first k >= 1 with level_k <= 0 (weak inequality).
    """

    start: np.ndarray
    start_level: float
    horizon: int
    direction: str = "forward"

    def __post_init__(self):
        coords = self.start.coords if isinstance(self.start, SimplexPoint) else self.start
        coords = np.array(coords, dtype=float)
        if coords.ndim != 1 or np.any(coords < 0.0) or abs(coords.sum() - 1.0) > 1e-9:
            raise ValueError("start must be a nonnegative vector summing to 1")
        coords /= coords.sum()
        coords.setflags(write=False)
        object.__setattr__(self, "start", coords)
        object.__setattr__(self, "start_level", float(self.start_level))
        if self.horizon < 1 or int(self.horizon) != self.horizon:
            raise ValueError("horizon must be an integer >= 1")
        object.__setattr__(self, "horizon", int(self.horizon))
        if self.direction not in ("forward", "dual"):
            raise ValueError("direction must be 'forward' or 'dual'")


@dataclass(frozen=True)
class WalkPathRecord:
    path_index: int
    exit_time: int | None
    terminal_level: float
    terminal_point: np.ndarray | None
    survived: bool


class WalkBatch:
    """Column-oriented outcome of `count` simulated paths.

    terminal_level is the level at min(exit, horizon) when the batch ran
    in early-exit mode, and the level at the horizon otherwise (exited
    paths keep walking, which is what the crossed-exit experiments need).
    min_level tracks the running minimum of the level over the simulated
    steps of each path.
    """

    def __init__(
        self,
        config: WalkConfig,
        start_levels: np.ndarray,
        exit_time: np.ndarray,
        terminal_level: np.ndarray,
        terminal_point: np.ndarray | None,
        min_level: np.ndarray,
        checkpoints: tuple[int, ...] = (),
        checkpoint_alive: np.ndarray | None = None,
        checkpoint_level: np.ndarray | None = None,
        checkpoint_min: np.ndarray | None = None,
        early_exit: bool = False,
    ):
        self.config = config
        self.start_levels = start_levels
        self.exit_time = exit_time
        self.terminal_level = terminal_level
        self.terminal_point = terminal_point
        self.min_level = min_level
        self.checkpoints = checkpoints
        self.checkpoint_alive = checkpoint_alive
        self.checkpoint_level = checkpoint_level
        self.checkpoint_min = checkpoint_min
        self.early_exit = early_exit

    @property
    def count(self) -> int:
        return self.exit_time.size

    @property
    def survived(self) -> np.ndarray:
        return self.exit_time < 0

    @property
    def cum_sum(self) -> np.ndarray:
        """Accumulated increments up to the last simulated step."""
        return self.terminal_level - self.start_levels

    @property
    def min_partial(self) -> np.ndarray:
        """Running minimum of the accumulated increments (level minus start)."""
        return self.min_level - self.start_levels

    def survival_rate(self) -> float:
        return float(self.survived.mean())

    def records(self):
        pts = self.terminal_point
        for i in range(self.count):
            et = int(self.exit_time[i])
            yield WalkPathRecord(
                path_index=i,
                exit_time=None if et < 0 else et,
                terminal_level=float(self.terminal_level[i]),
                terminal_point=None if pts is None else pts[i],
                survived=et < 0,
            )

    def dump_records(self, path) -> None:
        """CSV dump, one line per path: path_index,exit_time_or_-1,terminal_level,survived."""
        with open(path, "w", newline="") as fh:
            fh.write("path_index,exit_time_or_-1,terminal_level,survived\n")
            for i in range(self.count):
                fh.write(
                    f"{i},{int(self.exit_time[i])},{float(self.terminal_level[i])!r},"
                    f"{int(self.exit_time[i] < 0)}\n"
                )


def _chunk_rng(namespace: int, seed: int, stream_tag: int, chunk_index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(
        entropy=(
            int(namespace) & 0xFFFFFFFFFFFFFFFF,
            int(seed) & 0xFFFFFFFFFFFFFFFF,
            int(stream_tag) & 0xFFFFFFFFFFFFFFFF,
            int(chunk_index),
        )
    )
    return np.random.Generator(np.random.Philox(seed=ss))


def _simulate_chunk(kernel, start, levels0, horizon, rng, dual, early_exit, burn_in, checkpoints, store_points):
    """One chunk of paths; start (k,d) and levels0 (k,) are per-path."""
    k, d = start.shape
    x = np.array(start)
    for _ in range(burn_in):
        x, _ = kernel.step(rng, x, dual)

    level = np.array(levels0, dtype=float)
    exit_time = np.full(k, -1, dtype=np.int64)
    min_level = np.full(k, np.inf)
    term_level = np.array(levels0, dtype=float)
    term_point = np.empty((k, d)) if store_points else None
    ncp = len(checkpoints)
    cp_alive = np.zeros((k, ncp), dtype=bool) if ncp else None
    cp_level = np.zeros((k, ncp)) if ncp else None
    cp_min = np.zeros((k, ncp)) if ncp else None
    ci = 0

    if early_exit:
        pos = np.arange(k)
        for step in range(1, horizon + 1):
            if pos.size:
                x, inc = kernel.step(rng, x, dual)
                level = level + inc
                min_level[pos] = np.minimum(min_level[pos], level)
                exited = level <= 0.0
                if exited.any():
                    epos = pos[exited]
                    exit_time[epos] = step
                    term_level[epos] = level[exited]
                    if store_points:
                        term_point[epos] = x[exited]
                    keep = ~exited
                    pos, x, level = pos[keep], x[keep], level[keep]
            if ci < ncp and step == checkpoints[ci]:
                cp_alive[pos, ci] = True
                cp_level[pos, ci] = level
                cp_min[:, ci] = min_level
                ci += 1
        term_level[pos] = level
        if store_points:
            term_point[pos] = x
    else:
        for step in range(1, horizon + 1):
            x, inc = kernel.step(rng, x, dual)
            level = level + inc
            np.minimum(min_level, level, out=min_level)
            newly = (exit_time < 0) & (level <= 0.0)
            exit_time[newly] = step
            if ci < ncp and step == checkpoints[ci]:
                cp_alive[:, ci] = exit_time < 0
                cp_level[:, ci] = level
                cp_min[:, ci] = min_level
                ci += 1
        term_level[:] = level
        if store_points:
            term_point[:] = x

    return exit_time, term_level, term_point, min_level, cp_alive, cp_level, cp_min


def _simulate_range(spec, cfg, count, seed, chunk_lo, chunk_hi, opts, states=None):
    """Simulate chunks [chunk_lo, chunk_hi); top-level so worker processes can run it."""
    kernel = family_kernel(spec)
    dual = cfg.direction == "dual"
    outs = []
    for chunk in range(chunk_lo, chunk_hi):
        lo = chunk * CHUNK
        k = min(CHUNK, count - lo)
        if k <= 0:
            break
        rng = _chunk_rng(spec.seed_namespace, seed, opts["stream_tag"], chunk)
        if states is None:
            start = np.broadcast_to(cfg.start, (k, cfg.start.size))
            levels0 = np.full(k, cfg.start_level)
        else:
            start = states[0][lo : lo + k]
            levels0 = states[1][lo : lo + k]
        outs.append(
            _simulate_chunk(
                kernel,
                start,
                levels0,
                cfg.horizon,
                rng,
                dual,
                opts["early_exit"],
                opts["burn_in"],
                opts["checkpoints"],
                opts["store_points"],
            )
        )
    return outs


def _assemble(cfg, start_levels, chunk_outs, checkpoints, early_exit):
    exit_time = np.concatenate([o[0] for o in chunk_outs])
    term_level = np.concatenate([o[1] for o in chunk_outs])
    term_point = None
    if chunk_outs[0][2] is not None:
        term_point = np.concatenate([o[2] for o in chunk_outs])
    min_level = np.concatenate([o[3] for o in chunk_outs])
    cp_alive = cp_level = cp_min = None
    if checkpoints:
        cp_alive = np.concatenate([o[4] for o in chunk_outs])
        cp_level = np.concatenate([o[5] for o in chunk_outs])
        cp_min = np.concatenate([o[6] for o in chunk_outs])
    return WalkBatch(
        config=cfg,
        start_levels=start_levels,
        exit_time=exit_time,
        terminal_level=term_level,
        terminal_point=term_point,
        min_level=min_level,
        checkpoints=tuple(checkpoints),
        checkpoint_alive=cp_alive,
        checkpoint_level=cp_level,
        checkpoint_min=cp_min,
        early_exit=early_exit,
    )


def _normalize_opts(horizon, early_exit, burn_in, checkpoints, store_points, stream_tag):
    cps = tuple(sorted(int(c) for c in (checkpoints or ())))
    if any(c < 1 or c > horizon for c in cps) or len(set(cps)) != len(cps):
        raise ValueError("checkpoints must be distinct steps within [1, horizon]")
    if burn_in < 0:
        raise ValueError("burn_in must be >= 0")
    return {
        "early_exit": bool(early_exit),
        "burn_in": int(burn_in),
        "checkpoints": cps,
        "store_points": bool(store_points),
        "stream_tag": int(stream_tag),
    }


def simulate_batch(
    spec: EnsembleSpec,
    cfg: WalkConfig,
    count: int,
    seed: int,
    *,
    workers: int = 1,
    early_exit: bool = False,
    burn_in: int = 0,
    checkpoints=None,
    store_points: bool = True,
    stream_tag: int = 0,
) -> WalkBatch:
    """Simulate `count` independent paths of the configured walk.

    early_exit=True stops simulating a path at its exit time (records then
    hold the state at exit); the default runs every path to the horizon so
    terminal levels exist for exited paths too and so that draw counts, and
    therefore path couplings across configs with the same seed, do not
    depend on the start level.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if cfg.start.size != spec.dim:
        raise ValueError("start point dimension does not match the ensemble")
    opts = _normalize_opts(cfg.horizon, early_exit, burn_in, checkpoints, store_points, stream_tag)
    n_chunks = -(-count // CHUNK)
    if workers <= 1 or n_chunks == 1:
        outs = _simulate_range(spec, cfg, count, seed, 0, n_chunks, opts)
    else:
        w = min(workers, n_chunks)
        bounds = [round(i * n_chunks / w) for i in range(w + 1)]
        spans = [(bounds[i], bounds[i + 1]) for i in range(w) if bounds[i] < bounds[i + 1]]
        outs = []
        with ProcessPoolExecutor(max_workers=len(spans)) as pool:
            futures = [
                pool.submit(_simulate_range, spec, cfg, count, seed, lo, hi, opts)
                for lo, hi in spans
            ]
            for fut in futures:
                outs.extend(fut.result())
    start_levels = np.full(count, cfg.start_level)
    return _assemble(cfg, start_levels, outs, opts["checkpoints"], opts["early_exit"])


def simulate_from_states(
    spec: EnsembleSpec,
    points: np.ndarray,
    levels: np.ndarray,
    horizon: int,
    seed: int,
    *,
    direction: str = "forward",
    early_exit: bool = False,
    checkpoints=None,
    store_points: bool = True,
    stream_tag: int = 0,
) -> WalkBatch:
    """Continue the walk from per-path (point, level) states.

    Used by the survivor-splitting estimator and the one-step kernel
    checks; stream discipline is identical to simulate_batch.
    """
    points = np.asarray(points, dtype=float)
    levels = np.asarray(levels, dtype=float)
    if points.ndim != 2 or points.shape[0] != levels.size:
        raise ValueError("points must be (count, dim) matching levels")
    count = levels.size
    cfg = WalkConfig(
        start=points[0] / points[0].sum(),
        start_level=0.0,
        horizon=horizon,
        direction=direction,
    )
    opts = _normalize_opts(horizon, early_exit, 0, checkpoints, store_points, stream_tag)
    n_chunks = -(-count // CHUNK)
    outs = _simulate_range(spec, cfg, count, seed, 0, n_chunks, opts, states=(points, levels))
    return _assemble(cfg, np.array(levels), outs, opts["checkpoints"], opts["early_exit"])


def one_step(spec: EnsembleSpec, points: np.ndarray, seed: int, *, direction: str = "forward", stream_tag: int = 0):
    """Apply one random matrix to each point; returns (new_points, increments)."""
    points = np.asarray(points, dtype=float)
    batch = simulate_from_states(
        spec,
        points,
        np.zeros(points.shape[0]),
        horizon=1,
        seed=seed,
        direction=direction,
        stream_tag=stream_tag,
    )
    return batch.terminal_point, batch.terminal_level


@dataclass(frozen=True)
class ExactLaw:
    """Exact terminal law of a finite-support walk: one atom per matrix word.

    levels hold the terminal level at the horizon for every word (exited
    words keep evolving, matching the engine's run-to-horizon mode);
    survived marks words whose level stayed > 0 at every step.
    """

    horizon: int
    direction: str
    probs: np.ndarray
    levels: np.ndarray
    survived: np.ndarray

    @property
    def survival(self) -> float:
        return float(self.probs[self.survived].sum())

    def window_probability(self, lo: float, hi: float) -> float:
        """Exact P(exit > horizon, terminal level in [lo, hi])."""
        sel = self.survived & (self.levels >= lo) & (self.levels <= hi)
        return float(self.probs[sel].sum())

    def crossed_window_probability(self, lo: float, hi: float) -> float:
        """Exact P(exit <= horizon, terminal level in [lo, hi])."""
        sel = ~self.survived & (self.levels >= lo) & (self.levels <= hi)
        return float(self.probs[sel].sum())


def enumerate_exact(spec: EnsembleSpec, cfg: WalkConfig, budget: int = 20_000_000) -> ExactLaw:
    """Exact weighted enumeration over all matrix words of length horizon.

    Only for finite_support ensembles with support_size**horizon <= budget.
    Word order is lexicographic in (g_1, ..., g_n), so outputs are
    deterministic arrays usable as oracles.
    """
    if spec.family != "finite_support":
        raise ValueError("exact enumeration needs a finite_support ensemble")
    atoms = np.array(spec.params["atoms"], dtype=float)
    weights = np.array(spec.params["weights"], dtype=float)
    m = atoms.shape[0]
    n = cfg.horizon
    if m**n > budget:
        raise ValueError(f"support_size**horizon = {m**n} exceeds budget {budget}")
    dual = cfg.direction == "dual"
    shift = spec.centering_shift

    probs_out, levels_out, alive_out = [], [], []

    # Smallest depth whose remaining subtree fits one vectorized block.
    cutoff = n
    width = 1
    while cutoff > 0 and width * m <= _ENUM_BLOCK:
        width *= m
        cutoff -= 1

    def expand_block(x, level, alive, prob, depth):
        xs = x[None, :]
        levels = np.array([level])
        alives = np.array([alive])
        probs = np.array([prob])
        for _ in range(n - depth):
            if dual:
                z = (atoms[None, :, :, :] * xs[:, None, :, None]).sum(axis=2)
            else:
                z = (atoms[None, :, :, :] * xs[:, None, None, :]).sum(axis=3)
            nrm = z.sum(axis=2)
            inc = np.log(nrm) + shift
            if dual:
                inc = -inc
            levels = (levels[:, None] + inc).reshape(-1)
            xs = (z / nrm[:, :, None]).reshape(-1, x.size)
            alives = np.repeat(alives, m) & (levels > 0.0)
            probs = (probs[:, None] * weights[None, :]).reshape(-1)
        probs_out.append(probs)
        levels_out.append(levels)
        alive_out.append(alives)

    def walk(x, level, alive, prob, depth):
        if depth >= cutoff:
            expand_block(x, level, alive, prob, depth)
            return
        for j in range(m):
            y = (x @ atoms[j]) if dual else (atoms[j] @ x)
            nrm = y.sum()
            inc = math.log(nrm) + shift
            if dual:
                inc = -inc
            new_level = level + inc
            walk(y / nrm, new_level, alive and new_level > 0.0, prob * weights[j], depth + 1)

    walk(np.array(cfg.start), cfg.start_level, True, 1.0, 0)
    return ExactLaw(
        horizon=n,
        direction=cfg.direction,
        probs=np.concatenate(probs_out),
        levels=np.concatenate(levels_out),
        survived=np.concatenate(alive_out),
    )
