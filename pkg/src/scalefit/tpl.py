"""Truncated power-law (TPL) distribution math, continuous and discrete.

The continuous family exists as reference math (log-log CCDF line behavior);
all fitting uses the discrete family because node degrees are integers.
"""

import math
from dataclasses import dataclass

import numpy as np

ALPHA_MIN = 1.0
ALPHA_MAX = 20.0

# widest support for which sampling precomputes the full CDF table
_CDF_TABLE_MAX_WIDTH = 1 << 20


class DomainError(ValueError):
    """Argument outside the distribution's support or parameter domain."""


@dataclass(frozen=True)
class TplParams:
    """Exponent and support thresholds of a truncated power law.

    For the discrete family x_min and x_max must be positive integers.
    """

    alpha: float
    x_min: float
    x_max: float

    def __post_init__(self):
        if not (ALPHA_MIN < self.alpha <= ALPHA_MAX):
            raise DomainError(f"alpha must be in ({ALPHA_MIN}, {ALPHA_MAX}], got {self.alpha}")
        if not (1 <= self.x_min <= self.x_max):
            raise DomainError(f"need 1 <= x_min <= x_max, got ({self.x_min}, {self.x_max})")
        if not math.isfinite(self.x_max):
            raise DomainError("x_max must be finite")

    def require_integer_support(self):
        if self.x_min != int(self.x_min) or self.x_max != int(self.x_max):
            raise DomainError("discrete family requires integer x_min, x_max")
        return int(self.x_min), int(self.x_max)


@dataclass
class DegreeSample:
    """Multiset of node degrees for one layer, stored sorted ascending."""

    degrees: np.ndarray
    layer_name: str = ""

    def __post_init__(self):
        d = np.sort(np.asarray(self.degrees, dtype=np.int64))
        if d.size and d[0] < 0:
            raise DomainError("degrees must be non-negative")
        self.degrees = d

    def __len__(self):
        return int(self.degrees.size)

    def positive(self):
        """Degrees >= 1 (fully pruned nodes excluded)."""
        return self.degrees[self.degrees >= 1]


def _check_continuous(p: TplParams):
    if p.x_min >= p.x_max:
        raise DomainError("continuous family needs x_min < x_max (zero-width support)")


def pdf_continuous(x, p: TplParams):
    """Density (1-alpha)/(x_max^(1-alpha) - x_min^(1-alpha)) * x^(-alpha)."""
    _check_continuous(p)
    x = np.asarray(x, dtype=float)
    if np.any(x < p.x_min) or np.any(x > p.x_max):
        raise DomainError("x outside [x_min, x_max]")
    b = 1.0 - p.alpha
    norm = b / (p.x_max**b - p.x_min**b)
    out = norm * x**(-p.alpha)
    return float(out) if out.ndim == 0 else out


def ccdf_continuous(x, p: TplParams):
    """P(X >= x) = (x^(1-a) - x_max^(1-a)) / (x_min^(1-a) - x_max^(1-a))."""
    _check_continuous(p)
    x = np.asarray(x, dtype=float)
    if np.any(x < p.x_min) or np.any(x > p.x_max):
        raise DomainError("x outside [x_min, x_max]")
    b = 1.0 - p.alpha
    out = (x**b - p.x_max**b) / (p.x_min**b - p.x_max**b)
    return float(out) if out.ndim == 0 else out


def log_ccdf_continuous(x, p: TplParams):
    """log of the continuous CCDF, stable far below x_max.

    Returns -inf at x == x_max (sentinel for plot emitters, not an error).
    """
    _check_continuous(p)
    x = np.asarray(x, dtype=float)
    if np.any(x < p.x_min) or np.any(x > p.x_max):
        raise DomainError("x outside [x_min, x_max)")
    b = 1.0 - p.alpha
    # log(x^b - xmax^b) = b*log(x) + log1p(-exp(b*(log xmax - log x)))
    with np.errstate(divide="ignore"):
        ratio = b * (np.log(p.x_max) - np.log(x))  # <= 0
        num = b * np.log(x) + np.log1p(-np.exp(ratio))
    denom = b * math.log(p.x_min) + math.log1p(-math.exp(b * (math.log(p.x_max) - math.log(p.x_min))))
    out = num - denom
    out = np.where(x == p.x_max, -np.inf, out)
    return float(out) if out.ndim == 0 else out


def zeta_trunc(alpha: float, lo: int, hi: int) -> float:
    """Sum_{k=lo}^{hi} k^(-alpha), compensated (exact rounding via fsum).

    Terms are generated descending in k so the smallest magnitudes are
    accumulated first on wide supports.
    """
    if lo > hi:
        raise DomainError(f"need lo <= hi, got ({lo}, {hi})")
    if lo < 1:
        raise DomainError("lo must be >= 1")
    k = np.arange(hi, lo - 1, -1, dtype=float)
    return math.fsum(k**(-alpha))


def _zeta_cumsum(alpha: float, hi: int) -> np.ndarray:
    """Cumulative sums C[k] = sum_{j=1}^{k+1} j^(-alpha) for k = 0..hi-1."""
    k = np.arange(1, hi + 1, dtype=float)
    return np.cumsum(k**(-alpha))


def pmf_discrete(x, p: TplParams):
    """x^(-alpha) / zeta_trunc(alpha, x_min, x_max)."""
    lo, hi = p.require_integer_support()
    x = np.asarray(x)
    if np.any(x != np.floor(x)) or np.any(x < lo) or np.any(x > hi):
        raise DomainError("x outside integer support")
    z = zeta_trunc(p.alpha, lo, hi)
    out = np.asarray(x, dtype=float)**(-p.alpha) / z
    return float(out) if out.ndim == 0 else out


def ccdf_discrete(x, p: TplParams):
    """P(X >= x) = zeta_trunc(alpha, x, x_max) / zeta_trunc(alpha, x_min, x_max)."""
    lo, hi = p.require_integer_support()
    xs = np.atleast_1d(np.asarray(x))
    if np.any(xs != np.floor(xs)) or np.any(xs < lo) or np.any(xs > hi):
        raise DomainError("x outside integer support")
    z = zeta_trunc(p.alpha, lo, hi)
    out = np.array([zeta_trunc(p.alpha, int(v), hi) for v in xs]) / z
    return float(out[0]) if np.ndim(x) == 0 else out


def sample_discrete(p: TplParams, n: int, seed: int, layer_name: str = "") -> DegreeSample:
    """n i.i.d. draws from the discrete TPL, deterministic given seed.

    Uses inverse-CDF over a precomputed table when the support is narrow
    enough; falls back to rejection from a continuous envelope otherwise.
    """
    lo, hi = p.require_integer_support()
    if n < 1:
        raise DomainError("n must be >= 1")
    rng = np.random.default_rng(seed)
    if hi - lo <= _CDF_TABLE_MAX_WIDTH:
        support = np.arange(lo, hi + 1, dtype=float)
        w = support**(-p.alpha)
        cdf = np.cumsum(w)
        cdf /= cdf[-1]
        u = rng.random(n)
        draws = lo + np.searchsorted(cdf, u, side="left")
    else:
        draws = _sample_rejection(p, n, rng, lo, hi)
    return DegreeSample(degrees=draws.astype(np.int64), layer_name=layer_name)


def _sample_rejection(p: TplParams, n: int, rng, lo: int, hi: int) -> np.ndarray:
    # continuous TPL envelope on [lo - 0.5, hi + 0.5]; pmf(k) <= c * envelope
    # density integrated over [k-0.5, k+0.5] with c covering the discretization gap.
    b = 1.0 - p.alpha
    a, bnd = lo - 0.5, hi + 0.5
    z = zeta_trunc(p.alpha, lo, hi)
    out = np.empty(0, dtype=np.int64)
    while out.size < n:
        m = int(1.5 * (n - out.size)) + 16
        u = rng.random(m)
        xs = (a**b + u * (bnd**b - a**b))**(1.0 / b)
        ks = np.rint(xs).astype(np.int64)
        ks = np.clip(ks, lo, hi)
        # envelope mass on [k-0.5, k+0.5] under the continuous density
        kf = ks.astype(float)
        env = ((kf - 0.5)**b - (kf + 0.5)**b) / (a**b - bnd**b)
        target = kf**(-p.alpha) / z
        acc = rng.random(m) < target / (1.5 * env)
        out = np.concatenate([out, ks[acc]])
    return out[:n]


def log_likelihood(sample: DegreeSample, p: TplParams) -> float:
    """Sum_i [-alpha*log(d_i)] - n*log(zeta_trunc(alpha, x_min, x_max))."""
    lo, hi = p.require_integer_support()
    d = sample.degrees
    if d.size == 0:
        raise DomainError("empty sample")
    if d[0] < lo or d[-1] > hi:
        raise DomainError("sample contains degrees outside [x_min, x_max]")
    z = zeta_trunc(p.alpha, lo, hi)
    return float(-p.alpha * np.sum(np.log(d.astype(float))) - d.size * math.log(z))
