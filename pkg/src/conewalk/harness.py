"""Verification experiments: each one turns a limit theorem or inequality
about the conditioned walk into a pass/fail verdict with an explicit
statistic and threshold.

Monte Carlo gates are calibrated so that a correct implementation passes
with margin (typically 3 standard errors) while a wrong constant, a wrong
exponent, or a broken conditioning fails decisively.  Experiments that
cannot resolve their claim at the configured budget report status
"inconclusive" rather than pretending either way.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import statkit
from .ensembles import EnsembleSpec, family_kernel
from .estimators import (
    conditioned_terminal_sample,
    estimate_harmonic,
    estimate_invariant,
    estimate_local,
    estimate_sigma2,
    estimate_survival,
    estimate_window_unconditioned,
    harmonic_surface,
)
from .matrices import SimplexPoint
from .walk import WalkConfig, enumerate_exact, simulate_batch

__all__ = [
    "VerdictReport",
    "ExperimentInfo",
    "EXPERIMENTS",
    "run_experiment",
    "experiment_names",
]


@dataclass(frozen=True)
class VerdictReport:
    """Outcome of one verification experiment.

    statistic is compared against threshold in the direction recorded in
    details["gate"]; status is "pass", "fail", or "inconclusive" (the
    budget could not resolve the claim).  inputs_hash fingerprints the
    ensemble, parameters, and seed that produced the verdict.
    """

    experiment: str
    statistic: float
    threshold: float
    passed: bool
    status: str
    inputs_hash: str
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "statistic": self.statistic,
            "threshold": self.threshold,
            "passed": self.passed,
            "status": self.status,
            "inputs_hash": self.inputs_hash,
            "details": self.details,
        }


def _json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return [_json_safe(v) for v in obj.tolist()]
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def _hash_inputs(experiment: str, spec: EnsembleSpec, params: dict, seed: int) -> str:
    payload = json.dumps(
        _json_safe({"experiment": experiment, "spec": spec.to_dict(), "params": params, "seed": seed}),
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def _verdict(experiment, spec, params, seed, statistic, threshold, status, details):
    return VerdictReport(
        experiment=experiment,
        statistic=float(statistic),
        threshold=float(threshold),
        passed=status == "pass",
        status=status,
        inputs_hash=_hash_inputs(experiment, spec, params, seed),
        details=_json_safe(details),
    )


def _resolve_sigma(spec, params, seed, workers):
    """sigma and its se: taken from params when supplied, else estimated.

    The internal budget targets a relative se around half a percent; the
    variance of a sample variance does not depend on the horizon, so short
    horizons with many paths are the cheap way to precision, and the
    Richardson step still removes the O(1/n) bias.
    """
    if params.get("sigma") is not None:
        return float(params["sigma"]), float(params.get("sigma_se", 0.0)), {"sigma_source": "supplied"}
    est = estimate_sigma2(spec, horizon=256, reps=65_536, seed=seed + 90_001, workers=workers)
    sigma = math.sqrt(max(est.value, 1e-12))
    sigma_se = est.std_error / (2.0 * sigma)
    return sigma, sigma_se, {"sigma_source": "estimated", "sigma2_estimate": est.to_dict()}


def _resolve_harmonic_mass(spec, params, seed, sigma, sigma_se, workers):
    """Harmonic mass at the experiment's start level, estimated if absent."""
    if params.get("harmonic_value") is not None:
        return float(params["harmonic_value"]), float(params.get("harmonic_se", 0.0)), {
            "harmonic_source": "supplied"
        }
    h = estimate_harmonic(
        spec,
        start_level=params["start_level"],
        horizons=(256, 1024),
        count=100_000,
        seed=seed + 90_002,
        sigma=sigma,
        sigma_se=sigma_se,
        workers=workers,
    )
    return h.v_mart, h.v_mart_se, {"harmonic_source": "estimated", "harmonic_estimate": h.to_dict()}


# ---------------------------------------------------------------------------
# 1. product comparability audit


def run_audit_comparability(spec, *, seed=0, workers=1, words=2000, word_lengths=(1, 2, 4, 8, 16), slack=1e-9):
    """Entrywise comparability of products and the norm sandwich bounds.

    Products of matrices whose entries are within ratio B stay within
    ratio B^2, and with delta = dim^2 B^2 every product g satisfies
    |g|/delta <= |g x|, |y g|, v(g) and 1/delta <= (y g x)/|g| <= delta
    for simplex x, y, plus |g||h|/delta <= |g h| <= |g||h| for pairs.
    The word budget is split evenly over the requested lengths and every
    check is evaluated arraywise on running products (rescaled each step;
    all audited ratios are scale invariant).
    """
    params = {"words": words, "word_lengths": list(word_lengths), "slack": slack}
    rng = np.random.Generator(np.random.Philox(seed=np.random.SeedSequence((spec.seed_namespace, seed, 0xA0D17))))
    kernel = family_kernel(spec)
    constants = spec.constants
    delta = constants.delta
    bsq = spec.comparability**2
    lengths = [int(m) for m in word_lengths]
    per = max(1, words // len(lengths))

    worst = -float("inf")
    worst_case = None
    failures = 0
    checked = 0

    def _tally(margins, kind, length):
        nonlocal worst, worst_case, failures, checked
        m = float(margins.max())
        checked += margins.size
        failures += int((margins > slack).sum())
        if m > worst:
            worst, worst_case = m, {"kind": kind, "length": length, "margin": m}

    for length in lengths:
        draws = kernel.sample_scaled(rng, per * length).reshape(per, length, spec.dim, spec.dim)
        prod = draws[:, 0]
        for j in range(1, length):
            prod = prod @ draws[:, j]
            prod /= prod.sum(axis=(1, 2), keepdims=True)
        bound = spec.comparability if length == 1 else bsq
        _tally(prod.max(axis=(1, 2)) / prod.min(axis=(1, 2)) / bound - 1.0, "entry_ratio", length)

        norm = prod.sum(axis=(1, 2))
        col = prod.sum(axis=1)            # column sums = |g e_j|, min is v(g)
        row = prod.sum(axis=2)            # row sums = |e_i^T g|
        x = rng.random((per, spec.dim)) + 0.05
        x /= x.sum(axis=1, keepdims=True)
        yt = rng.random((per, spec.dim)) + 0.05
        yt /= yt.sum(axis=1, keepdims=True)
        gx = np.einsum("kij,kj->ki", prod, x).sum(axis=1)
        yg = np.einsum("ki,kij->kj", yt, prod).sum(axis=1)
        ygx = np.einsum("ki,kij,kj->k", yt, prod, x)
        for action, kind in ((col.min(axis=1), "column_floor"), (row.min(axis=1), "row_floor"),
                             (gx, "simplex_action"), (yg, "dual_action")):
            r = norm / action               # must lie in [1, delta]
            _tally(np.maximum(1.0 - r, r / delta - 1.0), kind, length)
        r = ygx / norm                      # must lie in [1/delta, delta]
        _tally(np.maximum(r / delta - 1.0, 1.0 / (delta * r) - 1.0), "bilinear", length)

        half = per // 2
        if half:
            g, h = prod[:half], prod[half : 2 * half]
            gh_norm = (g @ h).sum(axis=(1, 2))
            s = norm[:half] * norm[half : 2 * half] / gh_norm   # must lie in [1, delta]
            _tally(np.maximum(1.0 - s, s / delta - 1.0), "split_norm", length)

    status = "pass" if failures == 0 else "fail"
    return _verdict(
        "audit_comparability", spec, params, seed, worst, slack, status,
        {
            "gate": "max relative violation <= slack",
            "words": per * len(lengths),
            "checked": checked,
            "failures": failures,
            "worst_case": worst_case,
            "delta": delta,
        },
    )


# ---------------------------------------------------------------------------
# 2. reversal inequalities between the walk and its dual


def run_reversal_inequalities(
    spec,
    *,
    seed=0,
    workers=1,
    start_level=None,
    target=None,
    width=None,
    horizon=64,
    count=400_000,
    exact=False,
):
    """Two-sided duality bounds for the confined-window probability.

    Upper: P_a(alive, level in [b, b+l]) <= dual P from b+l+D confined to
    [a, a+l+2D], with D = ln(dim^2 B^2).  Lower (needs a >= l > 2D and
    b >= D): the same forward probability dominates the dual P from b-D
    confined to [a-l, a-2D].  Monte Carlo margins are in combined standard
    errors; the exact branch enumerates a finite-support ensemble and
    demands nonnegative margins outright.
    """
    delta_log = spec.constants.log_delta
    ell = 2.0 * delta_log + 0.5 if width is None else float(width)
    a = ell + 1.0 if start_level is None else float(start_level)
    b = delta_log + 0.25 if target is None else float(target)
    params = {
        "start_level": a, "target": b, "width": ell, "horizon": horizon,
        "count": count, "exact": exact,
    }
    guards = {"lower_valid": a >= ell > 2.0 * delta_log and b >= delta_log}
    if ell <= 0 or a <= 0 or b < 0:
        raise ValueError("need width > 0, start_level > 0, target >= 0")

    fwd_window = (b, b + ell)
    up_start = b + ell + delta_log
    up_window = (a, a + ell + 2.0 * delta_log)
    lo_start = b - delta_log
    lo_window = (a - ell, a - 2.0 * delta_log)

    if exact:
        cfg_f = WalkConfig(start=SimplexPoint.uniform(spec.dim), start_level=a, horizon=horizon)
        law_f = enumerate_exact(spec, cfg_f)
        p_f = law_f.window_probability(*fwd_window)
        cfg_u = WalkConfig(start=SimplexPoint.uniform(spec.dim), start_level=up_start,
                           horizon=horizon, direction="dual")
        p_u = enumerate_exact(spec, cfg_u).window_probability(*up_window)
        margins = [p_u - p_f]
        detail = {"forward": p_f, "dual_upper": p_u}
        if guards["lower_valid"]:
            cfg_l = WalkConfig(start=SimplexPoint.uniform(spec.dim), start_level=lo_start,
                               horizon=horizon, direction="dual")
            p_l = enumerate_exact(spec, cfg_l).window_probability(*lo_window)
            margins.append(p_f - p_l)
            detail["dual_lower"] = p_l
        statistic = min(margins)
        threshold = -1e-12
        status = "pass" if statistic >= threshold else "fail"
        detail.update({"gate": "min margin >= -1e-12 (exact)", "guards": guards,
                       "windows": {"forward": fwd_window, "upper": up_window, "lower": lo_window}})
        return _verdict("check_reversal_inequalities", spec, params, seed, statistic, threshold, status, detail)

    e_f = estimate_local(spec, start_level=a, horizon=horizon, window=fwd_window,
                         count=count, seed=seed, workers=workers, stream_tag=1)
    e_u = estimate_local(spec, start_level=up_start, horizon=horizon, window=up_window,
                         count=count, seed=seed, workers=workers, direction="dual", stream_tag=2)
    margins = []
    se_floor = 1.0 / count
    m1 = (e_u.value - e_f.value) / max(math.hypot(e_u.std_error, e_f.std_error), se_floor)
    margins.append(m1)
    detail = {
        "forward": e_f.to_dict(), "dual_upper": e_u.to_dict(),
        "upper_margin_se_units": m1, "guards": guards,
        "windows": {"forward": fwd_window, "upper": up_window, "lower": lo_window},
    }
    if guards["lower_valid"]:
        e_l = estimate_local(spec, start_level=lo_start, horizon=horizon, window=lo_window,
                             count=count, seed=seed, workers=workers, direction="dual", stream_tag=3)
        m2 = (e_f.value - e_l.value) / max(math.hypot(e_f.std_error, e_l.std_error), se_floor)
        margins.append(m2)
        detail["dual_lower"] = e_l.to_dict()
        detail["lower_margin_se_units"] = m2
    statistic = min(margins)
    threshold = -3.0
    status = "pass" if statistic >= threshold else "fail"
    detail["gate"] = "min inequality margin >= -3 combined se"
    return _verdict("check_reversal_inequalities", spec, params, seed, statistic, threshold, status, detail)


# ---------------------------------------------------------------------------
# 3. averaged local limit for the unconditioned walk


def run_averaged_llt(
    spec,
    *,
    seed=0,
    workers=1,
    horizons=(64, 256, 1024),
    count=200_000,
    bump=(-3.0, 3.0, 1.0),
    sigma=None,
    sigma_se=0.0,
    burn_in=0,
):
    """sqrt(n) E[u(X_n) phi(S_n)] approaches nu(u)/(sigma sqrt(2 pi)) * Int phi.

    phi is a fixed smooth plateau; the comparison keeps the finite-n
    Gaussian factor exp(-y^2 / (2 sigma^2 n)) inside the integral so the
    residual isolates genuine local-limit error.  Gates: the residual at
    the largest horizon within 3 propagated standard errors, and no
    residual growth from the smallest to the largest horizon beyond noise.
    Tested with u = 1 and u = first coordinate of the direction.
    """
    params = {"horizons": list(horizons), "count": count, "bump": list(bump),
              "sigma": sigma, "burn_in": burn_in}
    sigma, sigma_se, sig_detail = _resolve_sigma(spec, params, seed, workers) if sigma is None else (
        float(sigma), float(sigma_se), {"sigma_source": "supplied"})
    lo, hi, edge = bump
    phi = statkit.smooth_bump(lo, hi, edge)
    horizons = sorted(int(n) for n in horizons)

    nu = estimate_invariant(spec, lambda P: P[:, 0], reps=16_384, seed=seed + 7, workers=workers)
    u_funcs = {"one": (lambda P: np.ones(P.shape[0]), 1.0, 0.0),
               "coord0": (lambda P: P[:, 0], nu.value, nu.std_error)}

    rows = []
    worst_stat = 0.0
    for n in horizons:
        cfg = WalkConfig(start=SimplexPoint.uniform(spec.dim), start_level=0.0, horizon=n)
        batch = simulate_batch(spec, cfg, count, seed + n, workers=workers,
                               burn_in=burn_in, store_points=True, stream_tag=4)
        s = batch.cum_sum
        width = sigma * math.sqrt(n)

        def predicted(sig):
            integral = statkit.gauss_integral(phi, 0.0, sig * math.sqrt(n), step=min(edge / 20.0, sig * math.sqrt(n) / 200.0))
            return integral / (sig * math.sqrt(2.0 * math.pi))

        base = predicted(sigma)
        h = max(sigma_se, 1e-6)
        dpred = (predicted(sigma + h) - predicted(sigma - h)) / (2.0 * h)
        for name, (u, nu_val, nu_se) in u_funcs.items():
            vals = u(batch.terminal_point) * phi(s)
            emp = math.sqrt(n) * float(vals.mean())
            emp_se = math.sqrt(n) * float(vals.std(ddof=1)) / math.sqrt(count)
            pred = nu_val * base
            pred_se = abs(base) * nu_se + abs(nu_val * dpred) * sigma_se
            resid = emp - pred
            se_tot = emp_se + pred_se
            rows.append({"horizon": n, "u": name, "empirical": emp, "empirical_se": emp_se,
                         "predicted": pred, "predicted_se": pred_se, "residual": resid,
                         "residual_se": se_tot,
                         "residual_over_se": resid / se_tot if se_tot > 0 else float("inf")})

    by_u = {}
    for row in rows:
        by_u.setdefault(row["u"], []).append(row)
    fail = False
    for name, seq in by_u.items():
        first, last = seq[0], seq[-1]
        stat = abs(last["residual_over_se"])
        worst_stat = max(worst_stat, stat)
        if stat > 3.0:
            fail = True
        # a wrong normalization makes the residual grow like sqrt(n)
        if abs(last["residual"]) > abs(first["residual"]) + 3.0 * (first["residual_se"] + last["residual_se"]):
            fail = True
    status = "fail" if fail else "pass"
    detail = {"gate": "|residual| <= 3 se at n_max and no residual growth",
              "rows": rows, "sigma": sigma, "sigma_se": sigma_se,
              "invariant_coord0": nu.to_dict()}
    detail.update(sig_detail)
    return _verdict("check_averaged_llt", spec, params, seed, worst_stat, 3.0, status, detail)


# ---------------------------------------------------------------------------
# 4. unconditioned window bounds: sqrt(n)-boundedness and Gaussian far-target decay


def run_window_bounds(
    spec,
    *,
    seed=0,
    workers=1,
    horizons=(64, 256, 1024),
    width=1.0,
    count=400_000,
    t_grid=(0.0, 0.75, 1.5, 2.25, 3.0),
    sigma=None,
    sigma_se=0.0,
):
    """P(S_n in [b, b+l]) <= c l / sqrt(n), improving to c l exp(-c t^2)/sqrt(n)
    when the window sits t sigma sqrt(n) away from the mean.

    Gates: sqrt(n) P-hat / l stays within a factor 2 band across horizons
    at b = 0, and a weighted fit of ln P-hat(t) = ln C - c-hat t^2 over the
    t grid at the largest horizon returns c-hat >= 0.25 by 3 se (Gaussian
    walks give c-hat about 1/2).
    """
    params = {"horizons": list(horizons), "width": width, "count": count,
              "t_grid": list(t_grid), "sigma": sigma}
    sigma, sigma_se, sig_detail = _resolve_sigma(spec, params, seed, workers) if sigma is None else (
        float(sigma), float(sigma_se), {"sigma_source": "supplied"})
    horizons = sorted(int(n) for n in horizons)
    ell = float(width)

    scaled = {}
    far_rows = []
    for n in horizons:
        cfg = WalkConfig(start=SimplexPoint.uniform(spec.dim), start_level=0.0, horizon=n)
        batch = simulate_batch(spec, cfg, count, seed + 13 * n, workers=workers,
                               store_points=False, stream_tag=5)
        s = batch.cum_sum
        root = math.sqrt(n)
        for t in t_grid:
            b = t * sigma * root
            hits = int(((s >= b) & (s <= b + ell)).sum())
            p, se = statkit.binomial_estimate(hits, count)
            if t == 0.0:
                scaled[n] = {"value": root * p / ell, "se": root * se / ell, "hits": hits}
            if n == horizons[-1]:
                far_rows.append({"t": t, "b": b, "p": p, "se": se, "hits": hits})

    vals = [scaled[n]["value"] for n in horizons]
    stability = max(vals) / max(min(vals), 1e-300)
    # far-target decay fit on positive-t points with enough hits
    pts = [(r["t"], r["p"], r["se"]) for r in far_rows if r["p"] > 0 and r["hits"] >= 25]
    c_hat, c_se = float("nan"), float("inf")
    decay_ok = False
    if len(pts) >= 3:
        # ln p = ln C - c t^2 is a log-log line in the variable exp(t^2)
        w = [(p / se) ** 2 for _, p, se in pts]
        fit = statkit.loglog_fit([(math.exp(t * t), p) for t, p, _ in pts], weights=w)
        c_hat, c_se = -fit.slope, fit.slope_std_error
        decay_ok = c_hat - 3.0 * c_se >= 0.25
    status = "pass" if (stability <= 2.0 and decay_ok) else "fail"
    if len(pts) < 3:
        status = "inconclusive"
    detail = {"gate": "sqrt(n) P/l max/min <= 2 and fitted decay c >= 0.25",
              "scaled_at_zero": {str(n): scaled[n] for n in horizons},
              "far_rows": far_rows, "stability_ratio": stability,
              "decay_c": c_hat, "decay_c_se": c_se, "sigma": sigma}
    detail.update(sig_detail)
    return _verdict("check_window_bounds", spec, params, seed, stability, 2.0, status, detail)


# ---------------------------------------------------------------------------
# 5. conditioned window bounds: n-scaling and crossed-exit suppression


def run_conditioned_window_bounds(
    spec,
    *,
    seed=0,
    workers=1,
    horizons=(64, 256, 1024),
    start_level=2.0,
    b_coef=1.0,
    width=1.0,
    count=400_000,
    sigma=None,
    sigma_se=0.0,
    crossed_t=1.0,
):
    """P(alive at n, level in [b_n, b_n + l]) scales like V l / n along
    b_n = b_coef sigma sqrt(n), and paths that exited cannot reappear in a
    high window: P(exit <= n, level in window) is Gaussian-suppressed.

    Gates: T(n) = n P-hat / l stays within a factor 2 band across
    horizons; the crossed-exit probability at the largest horizon, with
    start a > l + 2 ln(delta) + t sigma sqrt(n) and b > t sigma sqrt(n),
    stays below exp(-t^2/2) * l / sqrt(n) (a generous envelope for the
    proven c t^2 rate).
    """
    params = {"horizons": list(horizons), "start_level": start_level, "b_coef": b_coef,
              "width": width, "count": count, "crossed_t": crossed_t, "sigma": sigma}
    sigma, sigma_se, sig_detail = _resolve_sigma(spec, params, seed, workers) if sigma is None else (
        float(sigma), float(sigma_se), {"sigma_source": "supplied"})
    horizons = sorted(int(n) for n in horizons)
    ell = float(width)
    a = float(start_level)

    rows = []
    for n in horizons:
        b = b_coef * sigma * math.sqrt(n)
        est = estimate_local(
            spec, start_level=a, horizon=n, window=(b, b + ell), count=count,
            seed=seed + 17 * n, strategy="split" if n >= 256 else "naive",
            workers=workers, stream_tag=6,
        )
        rows.append({"horizon": n, "b": b, "estimate": est.to_dict(),
                     "scaled": n * est.value / ell, "scaled_se": n * est.std_error / ell})
    vals = [r["scaled"] for r in rows]
    stability = max(vals) / max(min(vals), 1e-300)

    # crossed-exit suppression at the largest horizon
    n = horizons[-1]
    t = float(crossed_t)
    delta_log = spec.constants.log_delta
    a_cross = ell + 2.0 * delta_log + t * sigma * math.sqrt(n) + 1.0
    b_cross = max(t * sigma * math.sqrt(n), delta_log) + 1.0
    cfg = WalkConfig(start=SimplexPoint.uniform(spec.dim), start_level=a_cross, horizon=n)
    batch = simulate_batch(spec, cfg, count, seed + 23, workers=workers,
                           store_points=False, stream_tag=7)
    crossed = (~batch.survived) & (batch.terminal_level >= b_cross) & (batch.terminal_level <= b_cross + ell)
    hits = int(crossed.sum())
    p_cross, se_cross = statkit.binomial_estimate(hits, count)
    envelope = math.exp(-t * t / 2.0) * ell / math.sqrt(n)
    crossed_ok = p_cross - 3.0 * se_cross <= envelope

    status = "pass" if (stability <= 2.0 and crossed_ok) else "fail"
    detail = {"gate": "n P/l max/min <= 2 and crossed-exit below Gaussian envelope",
              "rows": rows, "stability_ratio": stability,
              "crossed": {"start": a_cross, "window": [b_cross, b_cross + ell],
                          "p": p_cross, "se": se_cross, "hits": hits,
                          "envelope": envelope, "ok": crossed_ok},
              "sigma": sigma}
    detail.update(sig_detail)
    return _verdict("check_conditioned_window_bounds", spec, params, seed, stability, 2.0, status, detail)


# ---------------------------------------------------------------------------
# 6. conditioned local profile in b (both normalizations)


def run_gnedenko_profile(
    spec,
    *,
    seed=0,
    workers=1,
    horizons=(256, 1024, 4096),
    start_level=2.0,
    count=600_000,
    width=2.0,
    beta_grid=(0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0, 2.5),
    sigma=None,
    sigma_se=0.0,
    harmonic_value=None,
    harmonic_se=0.0,
):
    """Shape of n P(alive at n, level in [b, b+l]) across b = beta sigma sqrt(n).

    The window length l is held fixed while b tracks the diffusive scale,
    so n P-hat converges pointwise to the Rayleigh-consistent main term
        M2(n, b) = 2 V(a) b l exp(-b^2/(2 sigma^2 n)) / (sqrt(2 pi) sigma^3 sqrt(n))
    and the residual R(n, b) = n P-hat - M2 must shrink along the horizon
    list.  A published variant differing in its sigma powers,
        M1(n, b) = 2 sqrt(2 pi) V(a) b l exp(-b^2/(2n)) / (sigma^2 sqrt(n)),
    is reported alongside but not gated (the two disagree by 2 pi at
    sigma = 1 and cannot both match the Rayleigh terminal law).
    Gates: max-over-b |R| at the last horizon below its value at the
    first; a weighted one-parameter fit of
    n P-hat = kappa V b exp(-b^2/(2 sigma^2 n)) l / sqrt(n) at the largest
    horizon returns kappa within 25 percent of 2/(sqrt(2 pi) sigma^3);
    and the profile vanishes at both ends (n P-hat at b = 0 decreasing
    along horizons, zero hits at b = 10 sigma sqrt(n)).
    """
    params = {"horizons": list(horizons), "start_level": start_level, "count": count,
              "width": width, "beta_grid": list(beta_grid), "sigma": sigma,
              "harmonic_value": harmonic_value}
    sigma, sigma_se, sig_detail = _resolve_sigma(spec, params, seed, workers) if sigma is None else (
        float(sigma), float(sigma_se), {"sigma_source": "supplied"})
    res_params = dict(params)
    res_params["start_level"] = start_level
    vham, vham_se, ham_detail = _resolve_harmonic_mass(spec, res_params, seed, sigma, sigma_se, workers) \
        if harmonic_value is None else (float(harmonic_value), float(harmonic_se), {"harmonic_source": "supplied"})

    horizons = sorted(int(n) for n in horizons)
    a = float(start_level)
    ell = float(width)
    all_rows = []
    max_resid = []          # (horizon, max_b |R|, se at the argmax)
    zero_rows = []          # b = 0 companion window per horizon
    end_checks = {}
    for n in horizons:
        root = sigma * math.sqrt(n)
        cfg = WalkConfig(start=SimplexPoint.uniform(spec.dim), start_level=a, horizon=n)
        batch = simulate_batch(spec, cfg, count, seed + 29 * n, workers=workers,
                               early_exit=True, store_points=False, stream_tag=8)
        lv = batch.terminal_level[batch.survived]
        rows_n = []
        for beta in beta_grid:
            b = beta * root
            hits = int(((lv >= b) & (lv <= b + ell)).sum())
            p, se = statkit.binomial_estimate(hits, count)
            m2 = 2.0 * vham * b * ell * math.exp(-b * b / (2.0 * sigma * sigma * n)) / (
                math.sqrt(2.0 * math.pi) * sigma**3 * math.sqrt(n))
            m1 = 2.0 * math.sqrt(2.0 * math.pi) * vham * b * ell * math.exp(-b * b / (2.0 * n)) / (
                sigma**2 * math.sqrt(n))
            rows_n.append({"horizon": n, "beta": beta, "b": b, "width": ell,
                           "p": p, "se": se, "hits": hits,
                           "scaled": n * p, "scaled_se": n * se,
                           "main_term_rayleigh": m2, "main_term_paper": m1,
                           "residual": n * p - m2})
        all_rows.extend(rows_n)
        peak = max(rows_n, key=lambda r: abs(r["residual"]))
        max_resid.append({"horizon": n, "max_abs_residual": abs(peak["residual"]),
                          "at_beta": peak["beta"], "se": peak["scaled_se"]})
        hits0 = int(((lv >= 0.0) & (lv <= ell)).sum())
        p0, se0 = statkit.binomial_estimate(hits0, count)
        zero_rows.append({"horizon": n, "scaled": n * p0, "scaled_se": n * se0, "hits": hits0})
        if n == horizons[-1]:
            b_far = 10.0 * root
            hits_far = int(((lv >= b_far) & (lv <= b_far + ell)).sum())
            p_far, se_far = statkit.binomial_estimate(hits_far, count)
            end_checks["far_hits"] = hits_far
            end_checks["far_ok"] = n * p_far <= 3.0 * n * max(se_far, 1e-300)

    # residual trend: the scaled residual must shrink from first to last horizon
    r_first, r_last = max_resid[0], max_resid[-1]
    trend_ok = r_last["max_abs_residual"] < r_first["max_abs_residual"]
    trend_resolved = r_first["max_abs_residual"] > 3.0 * (r_first["se"] + r_last["se"])
    # b = 0 companion: the scaled probability itself decreases
    z_first, z_last = zero_rows[0], zero_rows[-1]
    end_checks["near_zero_ok"] = (
        z_last["scaled"] < z_first["scaled"] + 3.0 * (z_first["scaled_se"] + z_last["scaled_se"]))

    # one-parameter fit of kappa at the largest horizon
    n = horizons[-1]
    fit_rows = [r for r in all_rows if r["horizon"] == n]
    shape = np.array([r["b"] * r["width"] * math.exp(-r["b"] ** 2 / (2.0 * sigma * sigma * n))
                      * vham / math.sqrt(n) for r in fit_rows])
    svals = np.array([r["scaled"] for r in fit_rows])
    ses = np.array([max(r["scaled_se"], 1e-300) for r in fit_rows])
    w = 1.0 / ses**2
    kappa = float((w * svals * shape).sum() / (w * shape * shape).sum())
    kappa_se = float(math.sqrt(1.0 / (w * shape * shape).sum()))
    kappa_target = 2.0 / (math.sqrt(2.0 * math.pi) * sigma**3)
    rel_dev = abs(kappa / kappa_target - 1.0)

    total_hits = sum(r["hits"] for r in fit_rows)
    if total_hits < 500 or not trend_resolved:
        status = "inconclusive"
    else:
        status = "pass" if (trend_ok and rel_dev <= 0.25 and end_checks["near_zero_ok"]
                            and end_checks["far_ok"]) else "fail"
    detail = {"gate": "max_b |n P - M2| shrinking, |kappa/kappa_target - 1| <= 0.25, vanishing ends",
              "rows": all_rows, "max_residual_by_horizon": max_resid,
              "residual_trend_ok": trend_ok, "residual_trend_resolved": trend_resolved,
              "zero_window": zero_rows, "kappa": kappa, "kappa_se": kappa_se,
              "kappa_target": kappa_target, "relative_deviation": rel_dev,
              "end_checks": end_checks, "sigma": sigma, "harmonic_value": vham,
              "harmonic_se": vham_se}
    detail.update(sig_detail)
    detail.update(ham_detail)
    return _verdict("check_gnedenko_profile", spec, params, seed, rel_dev, 0.25, status, detail)


# ---------------------------------------------------------------------------
# 7. fixed-window decay rate n^{-3/2}


def run_three_halves_rate(
    spec,
    *,
    seed=0,
    workers=1,
    horizons=(256, 1024, 4096),
    start_level=2.0,
    target=None,
    width=2.0,
    count=200_000,
    sigma=None,
    sigma_se=0.0,
):
    """P(alive at n, level in a fixed window) decays like n^{-3/2}.

    The window [b, b+l] is fixed in space, so for n with sigma sqrt(n)
    well above b + l the probability is C n^{-3/2} (1 + o(1)).  Gates: the
    log-log slope across horizons within -1.5 +- 0.15, and the compensated
    values n^{3/2} P-hat within a factor 4 band.
    """
    params = {"horizons": list(horizons), "start_level": start_level,
              "target": target, "width": width, "count": count, "sigma": sigma}
    sigma, sigma_se, sig_detail = _resolve_sigma(spec, params, seed, workers) if sigma is None else (
        float(sigma), float(sigma_se), {"sigma_source": "supplied"})
    horizons = sorted(int(n) for n in horizons)
    delta_log = spec.constants.log_delta
    b = delta_log if target is None else float(target)
    ell = float(width)
    a = float(start_level)

    rows = []
    for n in horizons:
        est = estimate_local(
            spec, start_level=a, horizon=n, window=(b, b + ell), count=count,
            seed=seed + 31 * n, strategy="split" if n >= 512 else "naive",
            workers=workers, stream_tag=9,
        )
        rows.append({"horizon": n, "p": est.value, "se": est.std_error,
                     "compensated": n**1.5 * est.value, "estimate": est.to_dict()})
    if any(r["p"] <= 0 for r in rows):
        return _verdict("check_three_halves_rate", spec, params, seed, float("nan"), 0.15,
                        "inconclusive", {"gate": "log-log slope within -1.5 +- 0.15",
                                         "rows": rows, "reason": "zero-hit horizon"})
    pts = [(r["horizon"], r["p"]) for r in rows]
    wts = [(r["p"] / r["se"]) ** 2 for r in rows]
    fit = statkit.loglog_fit(pts, weights=wts)
    slope_dev = abs(fit.slope + 1.5)
    comp = [r["compensated"] for r in rows]
    band = max(comp) / min(comp)
    status = "pass" if (slope_dev <= 0.15 and band <= 4.0) else "fail"
    detail = {"gate": "log-log slope within -1.5 +- 0.15 and n^{3/2} P band <= 4",
              "rows": rows, "slope": fit.slope, "slope_se": fit.slope_std_error,
              "band_ratio": band, "window": [b, b + ell], "sigma": sigma}
    detail.update(sig_detail)
    return _verdict("check_three_halves_rate", spec, params, seed, slope_dev, 0.15, status, detail)


# ---------------------------------------------------------------------------
# 8. Rayleigh law of the conditioned terminal level


def run_rayleigh_terminal(
    spec,
    *,
    seed=0,
    workers=1,
    horizon=2048,
    start_level=2.0,
    survivors=10_000,
    max_paths=20_000_000,
    threshold=0.05,
    sigma=None,
    sigma_se=0.0,
):
    """Conditioned on survival, level_n / (sigma sqrt(n)) is Rayleigh.

    Kolmogorov-Smirnov distance against 1 - exp(-t^2/2), passing when the
    distance stays below the threshold.  At the default 10^4 survivors
    the sampling floor of the distance is about 0.014, so the threshold
    0.05 is dominated by genuine shape error; the KS p-value is reported
    for reference but not gated because at fixed finite n the residual
    shape error always loses to the p-value as survivors grow.
    """
    params = {"horizon": horizon, "start_level": start_level,
              "survivors": survivors, "threshold": threshold, "sigma": sigma}
    sigma, sigma_se, sig_detail = _resolve_sigma(spec, params, seed, workers) if sigma is None else (
        float(sigma), float(sigma_se), {"sigma_source": "supplied"})
    try:
        levels, used = conditioned_terminal_sample(
            spec, start_level=start_level, horizon=horizon, target=survivors,
            seed=seed + 41, max_paths=max_paths, workers=workers,
        )
    except RuntimeError as exc:
        return _verdict("check_rayleigh_terminal", spec, params, seed, float("nan"), threshold,
                        "inconclusive", {"gate": "KS distance <= threshold", "reason": str(exc)})
    sample = np.sort(levels[:survivors] / (sigma * math.sqrt(horizon)))
    dist, pval = statkit.ks_one_sample(sample, statkit.rayleigh_cdf)
    status = "pass" if dist <= threshold else "fail"
    detail = {"gate": "KS distance <= threshold against Rayleigh", "ks_distance": dist,
              "ks_p": pval, "survivors_used": survivors, "paths_simulated": used,
              "sample_mean": float(sample.mean()),
              "rayleigh_mean": math.sqrt(math.pi / 2.0), "sigma": sigma}
    detail.update(sig_detail)
    return _verdict("check_rayleigh_terminal", spec, params, seed, dist, threshold, status, detail)


# ---------------------------------------------------------------------------
# 9. harmonicity of the exit-time mass


def run_harmonicity(
    spec,
    *,
    seed=0,
    workers=1,
    horizon=128,
    count=100_000,
    levels=None,
    directions=11,
    one_step_draws=8192,
):
    """V_n(x, a) = E[ V_{n-1}(g x, a + rho(g, x)) ; a + rho > 0 ] exactly.

    The left side is the finite-horizon mass E[(a + S_n) 1{alive}], the
    right side resamples one step and reads V_{n-1} off an interpolated
    surface over (direction, level).  Only available in dimension 2 where
    the direction is one number.  Gate: worst |lhs - rhs| over the level
    grid within 3 standard errors plus the interpolation budget; if the
    interpolation budget dominates the tolerance everywhere the verdict is
    inconclusive.
    """
    if spec.dim != 2:
        raise ValueError("harmonicity surface check needs dim = 2")
    a_grid = np.arange(0.25, 6.01, 0.25) if levels is None else np.asarray(levels, dtype=float)
    params = {"horizon": horizon, "count": count, "levels": list(np.asarray(a_grid)),
              "directions": directions, "one_step_draws": one_step_draws}
    t_grid = np.linspace(0.05, 0.95, directions)

    v_prev = np.empty((directions, a_grid.size))   # V_{n-1}
    v_prev_se = np.empty_like(v_prev)
    v_last = np.empty_like(v_prev)                 # V_n
    v_last_se = np.empty_like(v_prev)
    for i, t in enumerate(t_grid):
        cfg_start = SimplexPoint(np.array([t, 1.0 - t]))
        cfg = WalkConfig(start=cfg_start, start_level=0.0, horizon=horizon)
        batch = simulate_batch(spec, cfg, count, seed + 1000 + i, workers=workers,
                               early_exit=False, store_points=False,
                               checkpoints=(horizon - 1, horizon), stream_tag=10)
        mins = batch.checkpoint_min
        lvls = batch.checkpoint_level
        for j, aj in enumerate(a_grid):
            alive_prev = mins[:, 0] > -aj
            contrib_prev = np.where(alive_prev, aj + lvls[:, 0], 0.0)
            v_prev[i, j] = contrib_prev.mean()
            v_prev_se[i, j] = contrib_prev.std(ddof=1) / math.sqrt(count)
            alive_last = mins[:, 1] > -aj
            contrib_last = np.where(alive_last, aj + lvls[:, 1], 0.0)
            v_last[i, j] = contrib_last.mean()
            v_last_se[i, j] = contrib_last.std(ddof=1) / math.sqrt(count)

    # interpolation budget from discrete curvature of the surface
    curv_t = np.zeros_like(v_prev)
    curv_t[1:-1] = np.abs(v_prev[2:] - 2 * v_prev[1:-1] + v_prev[:-2])
    curv_a = np.zeros_like(v_prev)
    curv_a[:, 1:-1] = np.abs(v_prev[:, 2:] - 2 * v_prev[:, 1:-1] + v_prev[:, :-2])
    interp_budget = (curv_t.max() + curv_a.max()) / 8.0

    kernel = family_kernel(spec)
    kernel_rng = np.random.Generator(np.random.Philox(
        seed=np.random.SeedSequence((spec.seed_namespace, seed, 0x0135))))

    def interp_v(tq, aq):
        """Bilinear read of V_{n-1}; linear slope-1 extension above the level grid."""
        tq = np.clip(tq, t_grid[0], t_grid[-1])
        over = np.maximum(aq - a_grid[-1], 0.0)
        aq = np.clip(aq, a_grid[0], a_grid[-1])
        ti = np.clip(np.searchsorted(t_grid, tq) - 1, 0, t_grid.size - 2)
        ai = np.clip(np.searchsorted(a_grid, aq) - 1, 0, a_grid.size - 2)
        ft = (tq - t_grid[ti]) / (t_grid[ti + 1] - t_grid[ti])
        fa = (aq - a_grid[ai]) / (a_grid[ai + 1] - a_grid[ai])
        v00 = v_prev[ti, ai]
        v01 = v_prev[ti, ai + 1]
        v10 = v_prev[ti + 1, ai]
        v11 = v_prev[ti + 1, ai + 1]
        out = (v00 * (1 - ft) * (1 - fa) + v01 * (1 - ft) * fa
               + v10 * ft * (1 - fa) + v11 * ft * fa)
        return out + over  # mass grows with unit slope far above the grid

    rows = []
    worst = 0.0
    resolvable = 0
    for i, t in enumerate(t_grid):
        x = np.array([t, 1.0 - t])
        pts = np.broadcast_to(x, (one_step_draws, 2)).copy()
        stepped, incs = _kernel_one_step(kernel, pts, kernel_rng)
        for j, aj in enumerate(a_grid):
            new_levels = aj + incs
            alive = new_levels > 0.0
            vals = np.where(alive, interp_v(stepped[:, 0], new_levels), 0.0)
            rhs = float(vals.mean())
            rhs_se = float(vals.std(ddof=1)) / math.sqrt(one_step_draws)
            lhs = float(v_last[i, j])
            lhs_se = float(v_last_se[i, j])
            tol = 3.0 * (lhs_se + rhs_se + v_prev_se[i, j]) + interp_budget
            gap = abs(lhs - rhs)
            rows.append({"t": float(t), "level": float(aj), "lhs": lhs, "rhs": rhs,
                         "gap": gap, "tolerance": tol})
            worst = max(worst, gap / tol if tol > 0 else float("inf"))
            if interp_budget < 0.5 * tol:
                resolvable += 1

    if resolvable == 0:
        status = "inconclusive"
    else:
        status = "pass" if worst <= 1.0 else "fail"
    detail = {"gate": "max |lhs-rhs| / (3 se + interpolation budget) <= 1",
              "interp_budget": interp_budget, "grid_points": len(rows),
              "resolvable_points": resolvable,
              "worst_rows": sorted(rows, key=lambda r: -r["gap"] / max(r["tolerance"], 1e-300))[:5]}
    return _verdict("check_harmonicity", spec, params, seed, worst, 1.0, status, detail)


def _kernel_one_step(kernel, pts, rng):
    new_pts, incs = kernel.step(rng, pts, False)
    return new_pts, incs


# ---------------------------------------------------------------------------
# registry


@dataclass(frozen=True)
class ExperimentInfo:
    name: str
    runner: object
    summary: str
    guards: tuple
    defaults: dict


EXPERIMENTS = {
    info.name: info
    for info in [
        ExperimentInfo(
            "audit_comparability", run_audit_comparability,
            "products of comparable matrices stay comparable and satisfy the norm sandwich",
            ("entries of each support matrix within ratio B",),
            {"words": 2000, "word_lengths": [1, 2, 4, 8, 16], "slack": 1e-9},
        ),
        ExperimentInfo(
            "check_reversal_inequalities", run_reversal_inequalities,
            "confined-window probabilities of the walk and its dual dominate each other "
            "after padding windows by ln(dim^2 B^2)",
            ("lower bound needs start_level >= width > 2 ln(dim^2 B^2) and target >= ln(dim^2 B^2)",),
            {"horizon": 64, "count": 400_000, "exact": False},
        ),
        ExperimentInfo(
            "check_averaged_llt", run_averaged_llt,
            "sqrt(n) E[u(X_n) phi(S_n)] converges to nu(u) Int(phi) / (sigma sqrt(2 pi))",
            (),
            {"horizons": [64, 256, 1024], "count": 200_000, "bump": [-3.0, 3.0, 1.0]},
        ),
        ExperimentInfo(
            "check_window_bounds", run_window_bounds,
            "window mass decays like 1/sqrt(n), with Gaussian decay for windows "
            "t sigma sqrt(n) from the mean",
            (),
            {"horizons": [64, 256, 1024], "width": 1.0, "count": 400_000,
             "t_grid": [0.0, 0.75, 1.5, 2.25, 3.0]},
        ),
        ExperimentInfo(
            "check_conditioned_window_bounds", run_conditioned_window_bounds,
            "surviving-window mass scales like V l / n; exited paths cannot reach high windows",
            ("crossed-exit start must exceed width + 2 ln(dim^2 B^2) + t sigma sqrt(n)",),
            {"horizons": [64, 256, 1024], "start_level": 2.0, "b_coef": 1.0,
             "width": 1.0, "count": 400_000, "crossed_t": 1.0},
        ),
        ExperimentInfo(
            "check_gnedenko_profile", run_gnedenko_profile,
            "scaled window mass n P matches b exp(-b^2/(2 sigma^2 n)) with the "
            "Rayleigh-consistent constant, residual shrinking along horizons",
            (),
            {"horizons": [256, 1024, 4096], "start_level": 2.0, "count": 600_000,
             "width": 2.0,
             "beta_grid": [0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0, 2.5]},
        ),
        ExperimentInfo(
            "check_three_halves_rate", run_three_halves_rate,
            "fixed-window surviving mass decays like n^{-3/2}",
            ("window should sit well inside the bulk at the smallest horizon",),
            {"horizons": [256, 1024, 4096], "start_level": 2.0, "width": 2.0, "count": 200_000},
        ),
        ExperimentInfo(
            "check_rayleigh_terminal", run_rayleigh_terminal,
            "conditioned terminal level over sigma sqrt(n) is Rayleigh distributed",
            (),
            {"horizon": 2048, "start_level": 2.0, "survivors": 10_000, "threshold": 0.05},
        ),
        ExperimentInfo(
            "check_harmonicity", run_harmonicity,
            "the finite-horizon exit mass is one-step harmonic for the killed walk",
            ("dimension 2 only",),
            {"horizon": 128, "count": 100_000, "directions": 11, "one_step_draws": 8192},
        ),
    ]
}


def experiment_names():
    return list(EXPERIMENTS)


def run_experiment(name: str, spec: EnsembleSpec, *, seed: int = 0, workers: int = 1, **params) -> VerdictReport:
    if name not in EXPERIMENTS:
        raise KeyError(f"unknown experiment {name!r}; known: {', '.join(EXPERIMENTS)}")
    info = EXPERIMENTS[name]
    merged = dict(info.defaults)
    merged.update(params)
    return info.runner(spec, seed=seed, workers=workers, **merged)
