"""Independent reference computations used by the test suite.

These deliberately avoid the library's solver paths: conditioning uses
direct matrix inversion and Schur complements, distances use closed
forms, so agreement with the package is a genuine cross-check.
"""

import numpy as np


def kernel_value(family, r, lam, var):
    """Closed-form kernel value at distance r (independent of gpbayes)."""
    r = np.asarray(r, dtype=float)
    if family == "matern12":
        return var * np.exp(-r / lam)
    if family == "matern32":
        s = np.sqrt(3) * r / lam
        return var * (1 + s) * np.exp(-s)
    if family == "matern52":
        s = np.sqrt(5) * r / lam
        return var * (1 + s + s**2 / 3) * np.exp(-s)
    if family == "sqexp":
        return var * np.exp(-0.5 * (r / lam) ** 2)
    raise ValueError(family)


def kernel_gram(family, pts_a, pts_b, lam, var):
    a = np.atleast_2d(pts_a)
    b = np.atleast_2d(pts_b)
    r = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2)
    return kernel_value(family, r, lam, var)


def condition_joint_gaussian(family, lam, var, train, f_train, test, mean=None):
    """Brute-force GP conditioning via inversion of the joint covariance.

    Returns (posterior mean at test points, posterior covariance matrix)
    computed with np.linalg.inv and the Schur complement.
    """
    train = np.atleast_2d(train)
    test = np.atleast_2d(test)
    k_tt = kernel_gram(family, train, train, lam, var)
    k_st = kernel_gram(family, test, train, lam, var)
    k_ss = kernel_gram(family, test, test, lam, var)
    inv = np.linalg.inv(k_tt)
    m_train = np.zeros(train.shape[0]) if mean is None else mean(train)
    m_test = np.zeros(test.shape[0]) if mean is None else mean(test)
    post_mean = m_test + k_st @ inv @ (np.asarray(f_train) - m_train)
    post_cov = k_ss - k_st @ inv @ k_st.T
    return post_mean, post_cov


def hellinger_gaussians(m1, s1, m2, s2):
    """Closed-form Hellinger distance between N(m1, s1^2) and N(m2, s2^2)."""
    bc = np.sqrt(2 * s1 * s2 / (s1**2 + s2**2)) * np.exp(
        -((m1 - m2) ** 2) / (4 * (s1**2 + s2**2))
    )
    return np.sqrt(1 - bc)
