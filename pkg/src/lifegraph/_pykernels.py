"""Pure numpy implementations of the hot kernels.

Used when the compiled extension is unavailable or ``LIFEGRAPH_PURE_PYTHON``
is set. Signatures and results match ``_ckernels`` to rounding.
"""
import numpy as np


def efron_terms(X, T, E, beta):
    """Efron log partial likelihood with its gradient and Hessian.

    ``X`` (n, p), ``T`` and ``E`` must be sorted by ascending ``T``. Returns
    ``(loglik, gradient, hessian)`` of the unpenalized log-likelihood.
    """
    X = np.asarray(X, dtype=np.float64)
    T = np.asarray(T, dtype=np.float64)
    E = np.asarray(E, dtype=np.float64)
    beta = np.asarray(beta, dtype=np.float64)
    n, p = X.shape
    eta = X @ beta
    shift = eta.max() if n else 0.0
    phi = np.exp(eta - shift)

    loglik = 0.0
    grad = np.zeros(p)
    hess = np.zeros((p, p))
    if n == 0:
        return loglik, grad, hess

    # group boundaries of tied times, walked from the latest group backwards
    starts = np.flatnonzero(np.r_[True, T[1:] != T[:-1]])
    ends = np.r_[starts[1:], n]
    risk0 = 0.0
    risk1 = np.zeros(p)
    risk2 = np.zeros((p, p))
    for s, e in zip(starts[::-1], ends[::-1]):
        Xg = X[s:e]
        pg = phi[s:e]
        px = pg[:, None] * Xg
        risk0 += pg.sum()
        risk1 += px.sum(axis=0)
        risk2 += Xg.T @ px
        dead = E[s:e] > 0
        d = int(dead.sum())
        if d == 0:
            continue
        Xd = Xg[dead]
        pd = pg[dead]
        pxd = px[dead]
        tie0 = pd.sum()
        tie1 = pxd.sum(axis=0)
        tie2 = Xd.T @ pxd
        xsum = Xd.sum(axis=0)
        frac = np.arange(d) / d
        den = risk0 - frac * tie0
        num = risk1[None, :] - frac[:, None] * tie1[None, :]
        loglik += xsum @ beta - np.log(den).sum() - d * shift
        z = num / den[:, None]
        grad += xsum - z.sum(axis=0)
        hess -= np.einsum("l,ab->ab", 1.0 / den, risk2) - np.einsum("l,ab->ab", frac / den, tie2) - z.T @ z
    return float(loglik), grad, hess


def concordance_counts(scores, T, E):
    """Concordance numerator and admissible-pair count.

    Admissible ordered pairs are ``(i, j)`` with ``E[i] == 1``, ``j != i`` and
    ``T[j] >= T[i]``; a pair scores 1 when ``scores[i] > scores[j]`` and 0.5
    on a score tie.
    """
    s = np.asarray(scores, dtype=np.float64)
    T = np.asarray(T, dtype=np.float64)
    E = np.asarray(E)
    num = 0.0
    count = 0
    for i in np.flatnonzero(E > 0):
        mask = T >= T[i]
        mask[i] = False
        sj = s[mask]
        count += sj.size
        num += np.count_nonzero(s[i] > sj) + 0.5 * np.count_nonzero(s[i] == sj)
    return float(num), int(count)
