# Compiled hot kernels: O(n^2) soft-permutation loops and the pointwise QNorm
# map. Signatures mirror _kernels_py.
import numpy as np

from libc.math cimport exp, fabs, isfinite, INFINITY
from scipy.linalg.cython_blas cimport dgemv

from ranknorm.errors import SinkhornDivergence

NAME = "cython"


cdef inline double _logistic(double z) nogil:
    cdef double e
    if z >= 0:
        return 1.0 / (1.0 + exp(-z))
    e = exp(z)
    return e / (1.0 + e)


def logistic(z):
    arr = np.ascontiguousarray(z, dtype=np.float64)
    out = np.empty_like(arr)
    cdef const double[::1] src = arr.reshape(-1)
    cdef double[::1] dst = out.reshape(-1)
    cdef Py_ssize_t i
    with nogil:
        for i in range(src.shape[0]):
            dst[i] = _logistic(src[i])
    return out


def qnorm_map(X, mu, sigma, double eps_out):
    arr = np.ascontiguousarray(X, dtype=np.float64)
    cdef const double[:, ::1] x = arr
    cdef const double[::1] m = np.ascontiguousarray(mu, dtype=np.float64)
    cdef const double[::1] s = np.ascontiguousarray(sigma, dtype=np.float64)
    out = np.empty_like(arr)
    cdef double[:, ::1] o = out
    cdef double scale = 1.0 - 2.0 * eps_out
    cdef Py_ssize_t i, j
    with nogil:
        for i in range(x.shape[0]):
            for j in range(x.shape[1]):
                o[i, j] = _logistic((x[i, j] - m[j]) / s[j]) * scale + eps_out
    return out


def softsort_column(const double[::1] x, const double[::1] v, double tau, bint want_matrix):
    cdef Py_ssize_t n = x.shape[0], i, j
    out = np.empty(n)
    cdef double[::1] o = out
    row_buf = np.empty(n)
    cdef double[::1] row = row_buf
    cdef double[:, ::1] W
    W_arr = None
    if want_matrix:
        W_arr = np.empty((n, n))
        W = W_arr
    cdef double xi, d, lmax, total, acc
    with nogil:
        for i in range(n):
            xi = x[i]
            lmax = -INFINITY
            for j in range(n):
                d = xi - x[j]
                row[j] = -(d * d) / tau
                if row[j] > lmax:
                    lmax = row[j]
            total = 0.0
            for j in range(n):
                row[j] = exp(row[j] - lmax)
                total += row[j]
            acc = 0.0
            for j in range(n):
                row[j] = row[j] / total
                acc += row[j] * v[j]
            o[i] = acc
            if want_matrix:
                for j in range(n):
                    W[i, j] = row[j]
    return out, W_arr


def sinkhorn_column(const double[::1] x, const double[::1] lin, double eps,
                    int iters, double floor, bint want_matrix):
    cdef int n = <int>x.shape[0], inc = 1
    cdef Py_ssize_t i, j
    cdef int it
    cdef double one = 1.0, zero = 0.0
    cdef char trans = b'N'
    K_arr = np.empty((n, n))
    cdef double[:, ::1] K = K_arr
    u_arr = np.empty(n)
    v_arr = np.ones(n)
    tmp_arr = np.empty(n)
    cdef double[::1] u = u_arr
    cdef double[::1] v = v_arr
    cdef double[::1] tmp = tmp_arr
    cdef double k
    cdef bint ok = True
    with nogil:
        # |x_i - x_j| is symmetric: one exp per unordered pair
        for i in range(n):
            K[i, i] = 1.0 if 1.0 > floor else floor
            for j in range(i + 1, n):
                k = exp(-fabs(x[i] - x[j]) / eps)
                if k < floor:
                    k = floor
                K[i, j] = k
                K[j, i] = k
    for it in range(1, iters + 1):
        with nogil:
            # K is symmetric, so its row-major buffer read column-major is K
            # itself and one dgemv serves both K v and K^T u
            dgemv(&trans, &n, &n, &one, &K[0, 0], &n, &v[0], &inc, &zero, &tmp[0], &inc)
            for i in range(n):
                u[i] = 1.0 / tmp[i]
            dgemv(&trans, &n, &n, &one, &K[0, 0], &n, &u[0], &inc, &zero, &tmp[0], &inc)
            for i in range(n):
                v[i] = 1.0 / tmp[i]
            for i in range(n):
                if not (isfinite(u[i]) and isfinite(v[i])):
                    ok = False
                    break
        if not ok:
            raise SinkhornDivergence(it)
    out = np.empty(n)
    cdef double[::1] o = out
    P_arr = None
    cdef double[:, ::1] P
    with nogil:
        for j in range(n):
            tmp[j] = v[j] * lin[j]
        dgemv(&trans, &n, &n, &one, &K[0, 0], &n, &tmp[0], &inc, &zero, &o[0], &inc)
        for i in range(n):
            o[i] = u[i] * o[i]
    if want_matrix:
        P_arr = np.empty((n, n))
        P = P_arr
        with nogil:
            for i in range(n):
                for j in range(n):
                    P[i, j] = u[i] * K[i, j] * v[j]
    return out, P_arr
