"""Threshold-search fitting of the discrete truncated power law.

(x_min, x_max) are chosen by minimizing the Kolmogorov-Smirnov distance
between the empirical and model CCDFs over a candidate grid built from the
k% smallest / largest distinct degree values; alpha is fit per pair by
maximum likelihood. A semi-parametric bootstrap (re-running the full search
on synthetic samples) supplies the goodness-of-fit p-value.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .tpl import (
    DomainError,
    TplParams,
    DegreeSample,
    ALPHA_MAX,
    zeta_trunc,
    sample_discrete,
    log_likelihood,
)

# pair-chunk size cap for the vectorized search (rows x support columns)
_CHUNK_BUDGET = 1 << 24


@dataclass(frozen=True)
class FitConfig:
    """Knobs for the threshold grid, alpha optimizer and bootstrap."""

    k_percent: float = 30.0
    alpha_bounds: tuple = (1.0 + 1e-6, 20.0)
    alpha_tol: float = 1e-6
    n_boot: int = 100
    seed: int = 0

    def __post_init__(self):
        if not (0 < self.k_percent <= 50):
            raise DomainError(f"k_percent must be in (0, 50], got {self.k_percent}")
        lo, hi = self.alpha_bounds
        if not (1.0 < lo < hi <= ALPHA_MAX):
            raise DomainError(f"alpha_bounds must lie within (1, {ALPHA_MAX}]")


@dataclass
class FitResult:
    """Fitted parameters with the KS statistic and likelihood at the optimum."""

    params: TplParams
    ks_stat: float
    n_tail: int
    log_lik: float
    grid_sizes: tuple
    p_value: float | None = None

    def to_dict(self):
        d = {
            "alpha": self.params.alpha,
            "x_min": int(self.params.x_min),
            "x_max": int(self.params.x_max),
            "ks_stat": self.ks_stat,
            "n_tail": self.n_tail,
            "log_lik": self.log_lik,
            "grid_sizes": list(self.grid_sizes),
        }
        if self.p_value is not None:
            d["p_value"] = self.p_value
        return d


def _restrict(sample: DegreeSample, p: TplParams):
    lo, hi = p.require_integer_support()
    d = sample.degrees
    r = d[(d >= lo) & (d <= hi)]
    if r.size == 0:
        raise DomainError("no data inside [x_min, x_max]")
    return r, lo, hi


def empirical_ccdf(sample: DegreeSample, p: TplParams) -> dict:
    """Empirical P(X >= x) of the restricted sample at every integer x in support."""
    r, lo, hi = _restrict(sample, p)
    xs = np.arange(lo, hi + 1)
    # count of restricted points >= x
    ge = r.size - np.searchsorted(r, xs, side="left")
    return {int(x): float(g) / r.size for x, g in zip(xs, ge)}


def ks_statistic(sample: DegreeSample, p: TplParams) -> float:
    """max over integer x in [x_min, x_max] of |empirical CCDF - model CCDF|."""
    r, lo, hi = _restrict(sample, p)
    if r.size < 2:
        raise DomainError("need at least 2 restricted points")
    xs = np.arange(lo, hi + 1)
    emp = (r.size - np.searchsorted(r, xs, side="left")) / r.size
    w = xs.astype(float)**(-p.alpha)
    # model S(x) = tail sum / total sum, accumulated from the top
    tail = np.cumsum(w[::-1])[::-1]
    model = tail / tail[0]
    return float(np.max(np.abs(emp - model)))


def _loglik_terms(alpha: float, lo: int, hi: int, n: int, sum_log: float) -> float:
    return -alpha * sum_log - n * math.log(zeta_trunc(alpha, lo, hi))


def mle_alpha(sample: DegreeSample, x_min: int, x_max: int, cfg: FitConfig = FitConfig()) -> float:
    """Maximum-likelihood exponent on the restricted sample.

    Bounded 1-D maximization: a coarse 32-point bracket scan guards against
    flat regions, then Brent refines to cfg.alpha_tol.
    """
    if x_min == x_max:
        raise DomainError("alpha is unidentifiable on single-point support")
    d = sample.degrees
    r = d[(d >= x_min) & (d <= x_max)]
    if r.size < 2:
        raise DomainError("need at least 2 restricted points")
    n = r.size
    sum_log = float(np.sum(np.log(r.astype(float))))
    a_lo, a_hi = cfg.alpha_bounds

    grid = np.linspace(a_lo, a_hi, 32)
    vals = [_loglik_terms(a, x_min, x_max, n, sum_log) for a in grid]
    i = int(np.argmax(vals))
    b_lo = grid[max(i - 1, 0)]
    b_hi = grid[min(i + 1, len(grid) - 1)]
    if b_lo == b_hi:  # degenerate bracket at an endpoint
        return float(grid[i])
    res = minimize_scalar(
        lambda a: -_loglik_terms(a, x_min, x_max, n, sum_log),
        bounds=(b_lo, b_hi),
        method="bounded",
        options={"xatol": cfg.alpha_tol},
    )
    best = float(res.x)
    # the optimum must dominate both global bound endpoints
    for endpoint in (a_lo, a_hi):
        if _loglik_terms(endpoint, x_min, x_max, n, sum_log) > _loglik_terms(best, x_min, x_max, n, sum_log):
            best = endpoint
    return best


def _suffix_tables(alphas: np.ndarray, max_deg: int):
    """Suffix sums S[a, k-1] = sum_{j=k}^{max_deg} j^-a (and the log-weighted sums).

    Suffix (not prefix) accumulation avoids catastrophic cancellation when a
    range sum at large alpha is dominated by its smallest k.  Arrays carry a
    trailing zero column so S[:, hi] is the sum strictly above hi.
    """
    logk = np.log(np.arange(1, max_deg + 1, dtype=float))
    w = np.exp(-np.outer(np.atleast_1d(alphas), logk))
    c = np.zeros((w.shape[0], max_deg + 1))
    lsum = np.zeros_like(c)
    c[:, :max_deg] = np.cumsum(w[:, ::-1], axis=1)[:, ::-1]
    lsum[:, :max_deg] = np.cumsum((w * logk)[:, ::-1], axis=1)[:, ::-1]
    return c, lsum


def _solve_alpha_vec(targets, lo, hi, cfg: FitConfig, max_deg: int):
    """Per-pair MLE alpha via monotone root finding of the mean-log equation.

    The likelihood is stationary where the model mean of log(k) on [lo, hi]
    equals the data mean of log(d); that model mean is strictly decreasing
    in alpha, so a bracketing grid plus Illinois refinement converges fast.
    """
    a_lo, a_hi = cfg.alpha_bounds
    n_pairs = targets.size
    g = int(max(32, min(256, _CHUNK_BUDGET // max(1, max_deg))))
    agrid = a_lo + (a_hi - a_lo) * (np.geomspace(1.0, 2.0, g) - 1.0)
    agrid[-1] = a_hi
    cg, lg = _suffix_tables(agrid, max_deg)

    alpha_hat = np.empty(n_pairs)
    lo_b = np.empty(n_pairs)
    hi_b = np.empty(n_pairs)
    f_lo = np.empty(n_pairs)
    f_hi = np.empty(n_pairs)
    at_bound = np.zeros(n_pairs, dtype=bool)

    chunk = max(1, _CHUNK_BUDGET // g)
    for s in range(0, n_pairs, chunk):
        e = min(s + chunk, n_pairs)
        csum = cg[:, lo[s:e] - 1] - cg[:, hi[s:e]]
        lsum = lg[:, lo[s:e] - 1] - lg[:, hi[s:e]]
        m = lsum / csum  # (g, chunk), decreasing along axis 0
        t = targets[s:e]
        # first grid index where m <= t (m decreasing): bracket is [idx-1, idx]
        idx = np.argmax(m <= t[None, :], axis=0)
        none_below = ~np.any(m <= t[None, :], axis=0)
        # clamp to bounds where the target is outside the attainable range
        hi_bound = none_below  # even alpha=a_hi gives mean log above target
        lo_bound = (idx == 0) & ~none_below  # already below target at alpha=a_lo
        at_bound[s:e] = hi_bound | lo_bound
        alpha_hat[s:e] = np.where(hi_bound, a_hi, np.where(lo_bound, a_lo, 0.0))
        j = np.clip(idx, 1, g - 1)
        lo_b[s:e] = agrid[j - 1]
        hi_b[s:e] = agrid[j]
        f_lo[s:e] = m[j - 1, np.arange(e - s)] - t
        f_hi[s:e] = m[j, np.arange(e - s)] - t

    free = ~at_bound
    if np.any(free):
        alpha_hat[free] = _illinois_refine(
            targets[free], lo[free], hi[free], lo_b[free], hi_b[free],
            f_lo[free], f_hi[free], max_deg, cfg.alpha_tol,
        )
    return alpha_hat


def _mean_log_exact(alphas, lo, hi, max_deg):
    """Model mean of log k on [lo, hi] for per-pair alphas, pair-chunked."""
    out = np.empty(alphas.size)
    chunk = max(1, _CHUNK_BUDGET // max_deg)
    for s in range(0, alphas.size, chunk):
        e = min(s + chunk, alphas.size)
        cw, clw = _suffix_tables(alphas[s:e], max_deg)
        rows = np.arange(e - s)
        csum = cw[rows, lo[s:e] - 1] - cw[rows, hi[s:e]]
        lsum = clw[rows, lo[s:e] - 1] - clw[rows, hi[s:e]]
        out[s:e] = lsum / csum
    return out


def _illinois_refine(targets, lo, hi, a, b, fa, fb, max_deg, tol, iters=40):
    """Vectorized Illinois (modified regula falsi) on f(alpha) = meanlog - target."""
    a = a.copy()
    b = b.copy()
    fa = fa.copy()
    fb = fb.copy()
    x = 0.5 * (a + b)
    for _ in range(iters):
        denom = fb - fa
        safe = np.abs(denom) > 0
        x = np.where(safe, b - fb * (b - a) / np.where(safe, denom, 1.0), 0.5 * (a + b))
        x = np.clip(x, np.minimum(a, b), np.maximum(a, b))
        fx = _mean_log_exact(x, lo, hi, max_deg) - targets
        # f decreasing in alpha: fa > 0 > fb on the bracket
        go_left = fx < 0  # root is in [a, x]
        b = np.where(go_left, x, b)
        fb = np.where(go_left, fx, fb)
        # Illinois: halve the stale endpoint's value to force movement
        fa = np.where(go_left, fa * 0.5, fa)
        a = np.where(go_left, a, x)
        fa = np.where(go_left, fa, fx)
        fb = np.where(go_left, fb, fb * 0.5)
        if np.max(np.abs(b - a)) < tol * 1e-2:
            break
    return 0.5 * (a + b)


def _ks_vec(alphas, lo, hi, suffix_ge, max_deg):
    """KS distance per pair at its fitted alpha, evaluated at every integer."""
    out = np.empty(alphas.size)
    ks_idx = np.arange(1, max_deg + 1)
    chunk = max(1, _CHUNK_BUDGET // max_deg)
    for s in range(0, alphas.size, chunk):
        e = min(s + chunk, alphas.size)
        cw, _ = _suffix_tables(alphas[s:e], max_deg)
        rows = np.arange(e - s)
        # model S(x) = (suffix[x] - suffix[hi+1]) / (suffix[lo] - suffix[hi+1])
        above = cw[rows, hi[s:e]][:, None]
        z = (cw[rows, lo[s:e] - 1][:, None] - above)
        model = (cw[:, :max_deg] - above) / z
        # empirical tail counts among restricted points
        n_hi = suffix_ge[hi[s:e] + 1][:, None]
        n_t = (suffix_ge[lo[s:e]] - suffix_ge[hi[s:e] + 1])[:, None].astype(float)
        emp = (suffix_ge[ks_idx][None, :] - n_hi) / n_t
        diff = np.abs(emp - model)
        valid = (ks_idx[None, :] >= lo[s:e, None]) & (ks_idx[None, :] <= hi[s:e, None])
        diff = np.where(valid, diff, 0.0)
        out[s:e] = diff.max(axis=1)
    return out


def fit_tpl(sample: DegreeSample, cfg: FitConfig = FitConfig()) -> FitResult:
    """Full threshold search: KS-minimizing (x_min, x_max) with per-pair MLE alpha.

    Candidate x_min (x_max) values are the floor(n*k%) smallest (largest)
    distinct positive degree values; zero degrees are excluded beforehand.
    Ties on the minimal KS distance prefer larger n_tail, then smaller x_min.
    """
    n_layer = len(sample)
    pos = sample.positive()
    if pos.size < 2:
        raise DomainError("need at least 2 nodes with degree >= 1")
    u, counts = np.unique(pos, return_counts=True)
    m = u.size
    # candidates are the distinct values among the floor(n*k%) smallest
    # (resp. largest) degree observations, so the window always spans the
    # middle (100 - 2k)% of the data
    g = max(1, int(math.floor(n_layer * cfg.k_percent / 100.0)))
    g = min(g, pos.size)
    lo_cands = np.unique(pos[:g])
    hi_cands = np.unique(pos[pos.size - g:])

    lo_pos = np.searchsorted(u, lo_cands)
    hi_pos = np.searchsorted(u, hi_cands)
    # feasible pairs need at least two distinct restricted values: j > i
    I, J = np.meshgrid(lo_pos, hi_pos, indexing="ij")
    keep = J > I
    I, J = I[keep], J[keep]
    if I.size == 0:
        raise DomainError("no feasible (x_min, x_max) pair")

    lo = u[I].astype(np.int64)
    hi = u[J].astype(np.int64)
    max_deg = int(u[-1])

    cumc = np.cumsum(counts)
    cuml = np.cumsum(counts * np.log(u.astype(float)))
    n_t = cumc[J] - np.where(I > 0, cumc[I - 1], 0)
    s_log = cuml[J] - np.where(I > 0, cuml[I - 1], 0.0)
    targets = s_log / n_t

    alphas = _solve_alpha_vec(targets, lo, hi, cfg, max_deg)

    # suffix_ge[x] = number of positive degrees >= x, x in [0, max_deg+1]
    xs = np.arange(max_deg + 2)
    suffix_ge = pos.size - np.searchsorted(pos, xs, side="left")

    ks = _ks_vec(alphas, lo, hi, suffix_ge, max_deg)

    order = np.lexsort((lo, -n_t, ks))
    best = order[0]
    b_lo, b_hi = int(lo[best]), int(hi[best])

    alpha_hat = mle_alpha(sample, b_lo, b_hi, cfg)
    params = TplParams(alpha=alpha_hat, x_min=b_lo, x_max=b_hi)
    ks_stat = ks_statistic(sample, params)
    restricted = pos[(pos >= b_lo) & (pos <= b_hi)]
    ll = log_likelihood(DegreeSample(restricted, sample.layer_name), params)
    return FitResult(
        params=params,
        ks_stat=ks_stat,
        n_tail=int(n_t[best]),
        log_lik=ll,
        grid_sizes=(int(lo_cands.size), int(hi_cands.size)),
    )


def bootstrap_pvalue(sample: DegreeSample, fit: FitResult, cfg: FitConfig = FitConfig()) -> float:
    """Semi-parametric bootstrap p-value: fraction of synthetic refits with D >= observed.

    Each replicate draws n_tail points from the fitted model and re-runs the
    full threshold search, per the Clauset-style recipe. Deterministic in
    cfg.seed.
    """
    if cfg.n_boot < 1:
        raise DomainError("n_boot must be >= 1")
    ss = np.random.SeedSequence(cfg.seed)
    seeds = ss.generate_state(cfg.n_boot)
    count = 0
    for b in range(cfg.n_boot):
        synth = sample_discrete(fit.params, fit.n_tail, int(seeds[b]))
        try:
            refit = fit_tpl(synth, cfg)
        except DomainError:
            # degenerate replicate (e.g. all draws identical): counts as extreme
            count += 1
            continue
        if refit.ks_stat >= fit.ks_stat:
            count += 1
    return count / cfg.n_boot
