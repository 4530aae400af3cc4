"""
    robolead.stats
    ~~~~~~~~~~~~~~

    Two-sample tests and regressions used to compare experiment arms.

    :copyright: (c) 2024 by the robolead authors.
    :license: GPLv3, see LICENSE for more details.
"""

import math
from collections import namedtuple
import numpy as np
from scipy.stats import rankdata, tiecorrect, distributions, linregress
from .errors import InvalidInputError


EXACT_LIMIT = 8


class TestResult(namedtuple('TestResult', ['statistic', 'p_value', 'cles', 'n1', 'n2', 'center1', 'center2',
                                           'range1', 'range2', 'method'])):
    """Outcome of a two-sample test. Centers are medians for U tests and means for t tests."""
    __slots__ = ()

    def describe(self):
        name = 't' if self.method == 'student' else 'U'
        text = 'N1/2={:d}/{:d}, {:s}={:.1f} P={:.3g}'.format(self.n1, self.n2, name, self.statistic, self.p_value)
        if self.cles is not None:
            text += ', CLES={:.2f}'.format(self.cles)
        return text


Regression = namedtuple('Regression', ['slope', 'intercept', 'r2', 'n'])


def _sample(values, minimum, name):
    values = np.asarray(values, dtype=float).ravel()
    if values.size < minimum:
        raise InvalidInputError('{:s} needs at least {:d} values, got {:d}'.format(name, minimum, values.size))
    if not np.isfinite(values).all():
        raise InvalidInputError('{:s} holds non-finite values'.format(name))
    return values


def cles(u, n1, n2):
    """Common-language effect size in the dominant direction, max(U, n1*n2 - U) / (n1*n2)"""
    total = n1 * n2
    if not (total > 0 and 0 <= u <= total):
        raise InvalidInputError('U={} outside [0, {}]'.format(u, total))
    return max(u, total - u) / float(total)


def exact_u_distribution(ranks, k):
    """Counts of every doubled rank sum of k items drawn from ranks.

    Returns
    -------
    numpy.ndarray
        counts[s] is the number of k-subsets whose doubled ranks sum to s
    """

    doubled = np.rint(2.0 * np.asarray(ranks)).astype(int)
    total = int(doubled.sum())
    counts = np.zeros((k + 1, total + 1))
    counts[0, 0] = 1.0
    for r in doubled:
        # descending k, each item used at most once
        for j in range(k - 1, -1, -1):
            counts[j + 1, r:] += counts[j, :total + 1 - r]
    return counts[k]


def mann_whitney_u(x, y):
    """Two-sided Mann-Whitney U test with midrank ties.

    Uses the normal approximation with tie and continuity correction when both samples hold more
    than eight values, the exact permutation distribution of the midranks otherwise.

    Parameters:
    ----------
    x, y : {sequence of float}
        Samples, at least one value each

    Raises
    ------
    InvalidInputError
        If a sample is empty

    Returns
    -------
    TestResult
        U of x (pairs with x > y, ties count half), two-sided p and CLES
    """

    x = _sample(x, 1, 'x')
    y = _sample(y, 1, 'y')
    n1, n2 = x.size, y.size
    ranked = rankdata(np.concatenate((x, y)))
    u = float(ranked[:n1].sum() - n1 * (n1 + 1) / 2.0)
    mean = n1 * n2 / 2.0

    if np.all(ranked == ranked[0]):
        p, method = 1.0, 'identical'
    elif min(n1, n2) > EXACT_LIMIT:
        sd = math.sqrt(tiecorrect(ranked) * n1 * n2 * (n1 + n2 + 1) / 12.0)
        z = max(abs(u - mean) - 0.5, 0.0) / sd
        p, method = min(1.0, 2.0 * float(distributions.norm.sf(z))), 'normal'
    else:
        # subsets of the smaller sample's size, same two-sided tail
        k = min(n1, n2)
        counts = exact_u_distribution(ranked, k)
        sums = np.arange(counts.size)
        expected = k * (n1 + n2 + 1)
        observed = 2.0 * (u + n1 * (n1 + 1) / 2.0) if k == n1 else 2.0 * (n1 * n2 - u + n2 * (n2 + 1) / 2.0)
        extreme = np.abs(sums - expected) >= abs(observed - expected) - 1e-9
        p, method = min(1.0, float(counts[extreme].sum() / counts.sum())), 'exact'

    return TestResult(u, p, cles(u, n1, n2), n1, n2, float(np.median(x)), float(np.median(y)),
                      (float(x.min()), float(x.max())), (float(y.min()), float(y.max())), method)


def unpaired_t(x, y):
    """Two-sided Student t test with pooled variance.

    Two constant samples with equal means give t = 0 and p = 1.
    """

    x = _sample(x, 2, 'x')
    y = _sample(y, 2, 'y')
    n1, n2 = x.size, y.size
    df = n1 + n2 - 2
    diff = float(x.mean() - y.mean())
    pooled = (((x - x.mean()) ** 2).sum() + ((y - y.mean()) ** 2).sum()) / df
    if pooled == 0.0:
        t, p = (0.0, 1.0) if diff == 0.0 else (math.copysign(math.inf, diff), 0.0)
    else:
        t = diff / math.sqrt(pooled * (1.0 / n1 + 1.0 / n2))
        p = min(1.0, 2.0 * float(distributions.t.sf(abs(t), df)))
    return TestResult(t, p, None, n1, n2, float(x.mean()), float(y.mean()),
                      (float(x.min()), float(x.max())), (float(y.min()), float(y.max())), 'student')


def linear_regression(x, y):
    """Least-squares line with R^2 = 1 - SSE/SST (1 for a constant y on a perfect fit)

    Raises
    ------
    InvalidInputError
        If fewer than two points are given, the lengths differ or x is constant
    """

    x = _sample(x, 2, 'x')
    y = _sample(y, 2, 'y')
    if x.size != y.size:
        raise InvalidInputError('x has {:d} values, y {:d}'.format(x.size, y.size))
    if np.all(x == x[0]):
        raise InvalidInputError('x is constant')
    fit = linregress(x, y)
    sse = float(((y - (fit.intercept + fit.slope * x)) ** 2).sum())
    sst = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - sse / sst if sst > 0 else 1.0
    return Regression(float(fit.slope), float(fit.intercept), r2, int(x.size))
