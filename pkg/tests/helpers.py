"""Shared test utilities."""

from __future__ import annotations

import numpy as np
from scipy.stats import chi2, poisson


def poisson_gof_pvalue(counts, lam: float) -> float:
    """Chi-square goodness-of-fit p-value of observed counts vs Poisson(lam).

    Bins are pooled from both tails until every expected cell count is >= 5.
    """
    counts = np.asarray(counts)
    n = len(counts)
    kmax = int(counts.max())
    ks = np.arange(0, kmax + 1)
    probs = poisson.pmf(ks, lam)
    probs = np.append(probs, poisson.sf(kmax, lam))  # right tail lumped
    observed = np.append(np.bincount(counts, minlength=kmax + 1), 0)

    # pool cells until expected >= 5
    pooled_obs, pooled_prob = [], []
    acc_o, acc_p = 0.0, 0.0
    for o, p in zip(observed, probs):
        acc_o += o
        acc_p += p
        if acc_p * n >= 5.0:
            pooled_obs.append(acc_o)
            pooled_prob.append(acc_p)
            acc_o, acc_p = 0.0, 0.0
    if acc_p > 0:
        if pooled_obs:
            pooled_obs[-1] += acc_o
            pooled_prob[-1] += acc_p
        else:
            pooled_obs.append(acc_o)
            pooled_prob.append(acc_p)

    pooled_obs = np.asarray(pooled_obs)
    expected = np.asarray(pooled_prob) * n
    stat = float(np.sum((pooled_obs - expected) ** 2 / expected))
    dof = len(pooled_obs) - 1
    if dof < 1:
        return 1.0
    return float(chi2.sf(stat, dof))
