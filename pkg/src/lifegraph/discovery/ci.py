"""G-squared (likelihood-ratio) conditional independence test for discrete data."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.stats import chi2

from ..errors import DataError


@dataclass(frozen=True)
class CITestResult:
    statistic: float
    dof: int
    p_value: float
    independent: bool


def _codes(col: np.ndarray) -> tuple[np.ndarray, int]:
    levels, inv = np.unique(col, return_inverse=True)
    return inv.ravel(), len(levels)


def g2_statistic(data: np.ndarray, x: int, y: int, s: Iterable[int] = ()) -> tuple[float, int]:
    """G-squared statistic and degrees of freedom of ``x`` vs ``y`` given ``s``.

    The statistic sums ``2 * O * ln(O / E)`` over the cells of every stratum
    of ``s``; each non-empty stratum contributes ``(r_x - 1)(r_y - 1)``
    degrees of freedom, counting only the levels observed in that stratum.
    """
    data = np.asarray(data)
    s = list(s)
    xc, kx = _codes(data[:, x])
    yc, ky = _codes(data[:, y])
    if s:
        _, sc = np.unique(data[:, s], axis=0, return_inverse=True)
        sc = sc.ravel()
        ks = int(sc.max()) + 1
    else:
        sc = np.zeros(len(data), dtype=np.int64)
        ks = 1
    counts = np.bincount((sc * kx + xc) * ky + yc, minlength=ks * kx * ky).reshape(ks, kx, ky).astype(float)
    n_s = counts.sum(axis=(1, 2))
    row = counts.sum(axis=2)
    col = counts.sum(axis=1)
    expected = row[:, :, None] * col[:, None, :] / np.where(n_s > 0, n_s, 1.0)[:, None, None]
    pos = counts > 0
    g2 = 2.0 * float(np.sum(counts[pos] * np.log(counts[pos] / expected[pos])))
    dof = int(np.sum(np.maximum((row > 0).sum(axis=1) - 1, 0) * np.maximum((col > 0).sum(axis=1) - 1, 0)))
    return max(g2, 0.0), dof


def ci_test(data, x: int, y: int, s: Iterable[int] = (), alpha: float = 0.05) -> CITestResult:
    """Test ``x`` independent of ``y`` given ``s``; independence is accepted when ``p > alpha``."""
    data = np.asarray(data)
    s = tuple(s)
    if data.ndim != 2 or data.shape[0] == 0:
        raise DataError("ci_test needs a non-empty 2-D data matrix")
    if x == y or x in s or y in s:
        raise DataError(f"x={x}, y={y} and s={s} must be disjoint")
    if not 0.0 < alpha < 1.0:
        raise DataError(f"alpha must lie in (0, 1), got {alpha}")
    g2, dof = g2_statistic(data, x, y, s)
    p = 1.0 if dof == 0 else float(chi2.sf(g2, dof))
    return CITestResult(g2, dof, p, p > alpha)
