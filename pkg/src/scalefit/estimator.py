"""scikit-learn style estimator wrapping the truncated power-law fit."""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .tpl import DegreeSample, TplParams, pmf_discrete, ccdf_discrete, sample_discrete
from .fitting import FitConfig, fit_tpl, bootstrap_pvalue


class TruncatedPowerLawFit(BaseEstimator):
    """Fit a discrete truncated power law to integer degree data.

    Thresholds are chosen by KS minimization over candidate grids built from
    the k% smallest/largest distinct values; the exponent is fit per pair by
    maximum likelihood. With gof=True a parametric bootstrap p-value is
    computed as well.

    Parameters
    ----------
    k_percent : float, size of the threshold candidate grids (percent of n).
    alpha_max : float, upper bound for the exponent search.
    alpha_tol : float, convergence tolerance of the 1-D likelihood maximizer.
    gof : bool, whether to run the bootstrap goodness-of-fit test.
    n_boot : int, bootstrap replicate count.
    seed : int, RNG seed for the bootstrap.
    """

    def __init__(self, k_percent=30.0, alpha_max=20.0, alpha_tol=1e-6,
                 gof=False, n_boot=100, seed=0):
        self.k_percent = k_percent
        self.alpha_max = alpha_max
        self.alpha_tol = alpha_tol
        self.gof = gof
        self.n_boot = n_boot
        self.seed = seed

    def _config(self):
        return FitConfig(
            k_percent=self.k_percent,
            alpha_bounds=(1.0 + 1e-6, self.alpha_max),
            alpha_tol=self.alpha_tol,
            n_boot=self.n_boot,
            seed=self.seed,
        )

    def fit(self, X, y=None):
        X = check_array(X, ensure_2d=False, dtype="numeric")
        if X.ndim == 2:
            if X.shape[1] != 1:
                raise ValueError("X must be 1-D or a single column of degrees")
            X = X.ravel()
        if np.any(X != np.floor(X)):
            raise ValueError("degrees must be integers")
        sample = DegreeSample(X.astype(np.int64))
        cfg = self._config()
        result = fit_tpl(sample, cfg)
        if self.gof:
            result.p_value = bootstrap_pvalue(sample, result, cfg)
        self.result_ = result
        self.alpha_ = result.params.alpha
        self.x_min_ = int(result.params.x_min)
        self.x_max_ = int(result.params.x_max)
        self.ks_stat_ = result.ks_stat
        self.n_tail_ = result.n_tail
        self.log_lik_ = result.log_lik
        self.p_value_ = result.p_value
        return self

    def _params(self):
        check_is_fitted(self, "result_")
        return TplParams(self.alpha_, self.x_min_, self.x_max_)

    def pmf(self, x):
        return pmf_discrete(x, self._params())

    def ccdf(self, x):
        return ccdf_discrete(x, self._params())

    def sample(self, n, seed=0):
        return sample_discrete(self._params(), n, seed).degrees

    def score(self, X, y=None):
        """Mean log-likelihood per point of X restricted to the fitted support."""
        p = self._params()
        X = np.asarray(X).ravel().astype(np.int64)
        r = X[(X >= self.x_min_) & (X <= self.x_max_)]
        if r.size == 0:
            raise ValueError("no data inside the fitted support")
        from .tpl import log_likelihood
        return log_likelihood(DegreeSample(r), p) / r.size
