# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: Efron partial likelihood derivatives and the
concordance pair scan. See ``_pykernels`` for the reference semantics."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log

cnp.import_array()


def efron_terms(X, T, E, beta):
    cdef double[:, ::1] x = np.ascontiguousarray(X, dtype=np.float64)
    cdef double[::1] t = np.ascontiguousarray(T, dtype=np.float64)
    cdef double[::1] e = np.ascontiguousarray(E, dtype=np.float64)
    cdef double[::1] b = np.ascontiguousarray(beta, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t p = x.shape[1]
    cdef Py_ssize_t i, j, k, l, d

    grad_arr = np.zeros(p)
    hess_arr = np.zeros((p, p))
    cdef double[::1] grad = grad_arr
    cdef double[:, ::1] hess = hess_arr
    if n == 0:
        return 0.0, grad_arr, hess_arr

    eta_arr = np.empty(n)
    cdef double[::1] eta = eta_arr
    cdef double shift = -1e308
    cdef double acc
    for i in range(n):
        acc = 0.0
        for j in range(p):
            acc += x[i, j] * b[j]
        eta[i] = acc
        if acc > shift:
            shift = acc

    risk1_arr = np.zeros(p)
    tie1_arr = np.zeros(p)
    xsum_arr = np.zeros(p)
    num_arr = np.zeros(p)
    risk2_arr = np.zeros((p, p))
    tie2_arr = np.zeros((p, p))
    cdef double[::1] risk1 = risk1_arr
    cdef double[::1] tie1 = tie1_arr
    cdef double[::1] xsum = xsum_arr
    cdef double[::1] num = num_arr
    cdef double[:, ::1] risk2 = risk2_arr
    cdef double[:, ::1] tie2 = tie2_arr
    cdef double risk0 = 0.0, tie0 = 0.0, phi, frac, den, loglik = 0.0, xb

    d = 0
    for i in range(n - 1, -1, -1):
        phi = exp(eta[i] - shift)
        risk0 += phi
        for j in range(p):
            risk1[j] += phi * x[i, j]
            for k in range(j + 1):
                risk2[j, k] += phi * x[i, j] * x[i, k]
        if e[i] > 0:
            d += 1
            tie0 += phi
            for j in range(p):
                xsum[j] += x[i, j]
                tie1[j] += phi * x[i, j]
                for k in range(j + 1):
                    tie2[j, k] += phi * x[i, j] * x[i, k]
        if i > 0 and t[i - 1] == t[i]:
            continue
        if d == 0:
            continue
        xb = 0.0
        for j in range(p):
            xb += xsum[j] * b[j]
            grad[j] += xsum[j]
        loglik += xb - d * shift
        for l in range(d):
            frac = <double>l / d
            den = risk0 - frac * tie0
            loglik -= log(den)
            for j in range(p):
                num[j] = (risk1[j] - frac * tie1[j]) / den
                grad[j] -= num[j]
            for j in range(p):
                for k in range(j + 1):
                    hess[j, k] -= (risk2[j, k] - frac * tie2[j, k]) / den - num[j] * num[k]
        d = 0
        tie0 = 0.0
        for j in range(p):
            xsum[j] = 0.0
            tie1[j] = 0.0
            for k in range(j + 1):
                tie2[j, k] = 0.0

    for j in range(p):
        for k in range(j):
            hess[k, j] = hess[j, k]
    return loglik, grad_arr, hess_arr


def concordance_counts(scores, T, E):
    cdef double[::1] s = np.ascontiguousarray(scores, dtype=np.float64)
    cdef double[::1] t = np.ascontiguousarray(T, dtype=np.float64)
    cdef double[::1] e = np.ascontiguousarray(E, dtype=np.float64)
    cdef Py_ssize_t n = s.shape[0]
    cdef Py_ssize_t i, j
    cdef double num = 0.0, si, ti
    cdef long long count = 0, gt, eq, adm
    for i in range(n):
        if e[i] <= 0:
            continue
        si, ti = s[i], t[i]
        gt = eq = adm = 0
        # branch-free inner loop; the i == j term is removed afterwards
        for j in range(n):
            adm += t[j] >= ti
            gt += (t[j] >= ti) & (si > s[j])
            eq += (t[j] >= ti) & (si == s[j])
        count += adm - 1
        num += gt + 0.5 * (eq - 1)
    return num, count
