"""Hot numeric kernels.

Each kernel exists twice: a scalar/loop version compiled with ``numba.njit``
and a vectorised pure-numpy version.  The numba path is used when numba is
importable and ``CVQKD_TAMPER_DISABLE_NUMBA`` is unset (or ``0``).  Both
paths are importable explicitly (``numba_impl`` / ``numpy_impl``) so tests and
the benchmark can compare them.

Key-rate conventions: variances in shot-noise units, ``trusted`` selects the
detector model, and a block size ``N <= 0`` means the asymptotic limit.
Failed finite-size estimation (worst-case transmittance not positive) is
signalled with NaN; callers translate it into an exception.
"""

from __future__ import annotations

import math
import os
from types import SimpleNamespace

import numpy as np

_DISABLED = os.environ.get("CVQKD_TAMPER_DISABLE_NUMBA", "0").strip().lower() not in ("", "0", "false", "no")

try:
    import numba

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    NUMBA_AVAILABLE = False

USE_NUMBA = NUMBA_AVAILABLE and not _DISABLED

LOG2 = math.log(2.0)


# ---------------------------------------------------------------------------
# numpy path
# ---------------------------------------------------------------------------


def _np_entropy(x):
    x = np.maximum(np.asarray(x, dtype=float), 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (x + 1.0) * np.log2(x + 1.0) - np.where(x > 0, x * np.log2(np.where(x > 0, x, 1.0)), 0.0)
    return out


def _np_g_lambda(lam):
    return _np_entropy((np.maximum(lam, 1.0) - 1.0) / 2.0)


def _np_kinf_untrusted(VA, T, xi, eta, vel, beta):
    VA, T, xi = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (VA, T, xi)))
    a = VA + 1.0
    b = eta * T * (VA + xi) + 1.0 + vel
    c2 = eta * T * (VA * VA + 2.0 * VA)
    I = np.log2((b + 1.0) / (b - c2 / (a + 1.0) + 1.0))
    delta = a * a + b * b - 2.0 * c2
    det = (a * b - c2) ** 2
    root = np.sqrt(np.maximum(delta * delta - 4.0 * det, 0.0))
    l1 = np.sqrt(np.maximum(0.5 * (delta + root), 0.0))
    l2 = np.sqrt(np.maximum(0.5 * (delta - root), 0.0))
    l3 = a - c2 / (b + 1.0)
    chi = _np_g_lambda(l1) + _np_g_lambda(l2) - _np_g_lambda(l3)
    return beta * I - chi


def _np_kinf_trusted(VA, T, xi, eta, vel, beta):
    VA, T, xi = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (VA, T, xi)))
    blocked = T <= 0.0
    T = np.where(blocked, 1.0, T)
    V = VA + 1.0
    chil = 1.0 / T - 1.0 + xi
    chih = (2.0 - eta + vel) / eta
    chit = chil + chih / T
    I = np.log2((V + chit) / (1.0 + chit))
    A = V * V * (1.0 - 2.0 * T) + 2.0 * T + T * T * (V + chil) ** 2
    B = T * T * (V * chil + 1.0) ** 2
    r1 = np.sqrt(np.maximum(A * A - 4.0 * B, 0.0))
    l1 = np.sqrt(np.maximum(0.5 * (A + r1), 0.0))
    l2 = np.sqrt(np.maximum(0.5 * (A - r1), 0.0))
    sB = np.sqrt(B)
    den = (T * (V + chit)) ** 2
    C = (A * chih * chih + B + 1.0 + 2.0 * chih * (V * sB + T * (V + chil)) + 2.0 * T * (V * V - 1.0)) / den
    D = (V + sB * chih) ** 2 / den
    r2 = np.sqrt(np.maximum(C * C - 4.0 * D, 0.0))
    l3 = np.sqrt(np.maximum(0.5 * (C + r2), 0.0))
    l4 = np.sqrt(np.maximum(0.5 * (C - r2), 0.0))
    chi = _np_g_lambda(l1) + _np_g_lambda(l2) - _np_g_lambda(l3) - _np_g_lambda(l4)
    return np.where(blocked, 0.0, beta * I - chi)


def _np_kinf(VA, T, xi, eta, vel, beta, trusted):
    if trusted:
        return _np_kinf_trusted(VA, T, xi, eta, vel, beta)
    return _np_kinf_untrusted(VA, T, xi, eta, vel, beta)


def _np_kfinite(VA, T, xi, eta, vel, beta, trusted, N, m, w, V0, c_pe, p_ec, delta_aep, theta):
    if N <= 0:
        return _np_kinf(VA, T, xi, eta, vel, beta, trusted)
    VA, T, xi = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (VA, T, xi)))
    n = N - m
    with np.errstate(divide="ignore", invalid="ignore"):
        s_t = 2.0 * T / math.sqrt(V0 * m) * np.sqrt(c_pe + (xi + (V0 + vel) / (eta * T)) / VA)
        t_wc = T - w * s_t
        ok = (T > 0.0) & (t_wc > 0.0)
        t_wc_safe = np.where(ok, t_wc, 1.0)
        s_xi = math.sqrt(2.0 / (V0 * m)) * (eta * T + V0 + vel) / (eta * t_wc_safe)
        xi_wc = T / t_wc_safe * xi + w * s_xi
    k = _np_kinf(VA, t_wc_safe, np.where(ok, xi_wc, 0.0), eta, vel, beta, trusted)
    k = n * p_ec / N * (k - delta_aep / math.sqrt(n) + theta / n)
    return np.where(ok, k, np.nan)


def _np_optimize_va(T, xi_b, sigma, eta, vel, beta, trusted, N, m, w, V0, c_pe, p_ec, delta_aep, theta,
                    lo, hi, n_grid, tol):
    def objective(v):
        xi = xi_b + (v + 1.0) / 4.0 * sigma
        k = _np_kfinite(v, T, xi, eta, vel, beta, trusted, N, m, w, V0, c_pe, p_ec, delta_aep, theta)
        return np.where(np.isnan(k), -np.inf, k)

    grid = np.linspace(lo, hi, n_grid)
    vals = objective(grid)
    i = int(np.argmax(vals))
    best_v, best_k = float(grid[i]), float(vals[i])
    if not np.isfinite(best_k) or np.all(vals == vals[0]):
        return best_v, best_k
    a = float(grid[max(i - 1, 0)])
    b = float(grid[min(i + 1, n_grid - 1)])
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = float(objective(c)), float(objective(d))
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = float(objective(c))
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = float(objective(d))
    mid = 0.5 * (a + b)
    fm = float(objective(mid))
    if fm > best_k:
        return mid, fm
    return best_v, best_k


def _np_gini_best_split(x, y, n_classes, min_leaf):
    n = x.shape[0]
    if n < 2:
        return np.inf, -1
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), y] = 1.0
    left = np.cumsum(onehot, axis=0)[:-1]
    right = left[-1] + onehot[-1] - left
    n_left = np.arange(1, n, dtype=float)
    n_right = n - n_left
    score = n_left - (left * left).sum(axis=1) / n_left + n_right - (right * right).sum(axis=1) / n_right
    valid = (x[:-1] < x[1:]) & (n_left >= min_leaf) & (n_right >= min_leaf)
    if not valid.any():
        return np.inf, -1
    score = np.where(valid, score, np.inf)
    pos = int(np.argmin(score))
    return float(score[pos]), pos


def _np_row_moments(T):
    T = np.asarray(T, dtype=float)
    return T.mean(axis=1), np.sqrt(T).mean(axis=1)


numpy_impl = SimpleNamespace(
    entropy=_np_entropy,
    kinf=_np_kinf,
    kfinite=_np_kfinite,
    optimize_va=_np_optimize_va,
    gini_best_split=_np_gini_best_split,
    row_moments=_np_row_moments,
)


# ---------------------------------------------------------------------------
# numba path
# ---------------------------------------------------------------------------

if NUMBA_AVAILABLE:
    _jit = numba.njit(cache=False, nogil=True, fastmath=False)

    @_jit
    def _nb_entropy(x):
        if x <= 0.0:
            return 0.0
        return ((x + 1.0) * math.log(x + 1.0) - x * math.log(x)) / LOG2

    @_jit
    def _nb_g_lambda(lam):
        if lam <= 1.0:
            return 0.0
        return _nb_entropy((lam - 1.0) / 2.0)

    @_jit
    def _nb_kinf_untrusted(VA, T, xi, eta, vel, beta):
        a = VA + 1.0
        b = eta * T * (VA + xi) + 1.0 + vel
        c2 = eta * T * (VA * VA + 2.0 * VA)
        I = math.log((b + 1.0) / (b - c2 / (a + 1.0) + 1.0)) / LOG2
        delta = a * a + b * b - 2.0 * c2
        det = (a * b - c2) ** 2
        root = math.sqrt(max(delta * delta - 4.0 * det, 0.0))
        l1 = math.sqrt(max(0.5 * (delta + root), 0.0))
        l2 = math.sqrt(max(0.5 * (delta - root), 0.0))
        l3 = a - c2 / (b + 1.0)
        chi = _nb_g_lambda(l1) + _nb_g_lambda(l2) - _nb_g_lambda(l3)
        return beta * I - chi

    @_jit
    def _nb_kinf_trusted(VA, T, xi, eta, vel, beta):
        if T <= 0.0:
            return 0.0
        V = VA + 1.0
        chil = 1.0 / T - 1.0 + xi
        chih = (2.0 - eta + vel) / eta
        chit = chil + chih / T
        I = math.log((V + chit) / (1.0 + chit)) / LOG2
        A = V * V * (1.0 - 2.0 * T) + 2.0 * T + T * T * (V + chil) ** 2
        B = T * T * (V * chil + 1.0) ** 2
        r1 = math.sqrt(max(A * A - 4.0 * B, 0.0))
        l1 = math.sqrt(max(0.5 * (A + r1), 0.0))
        l2 = math.sqrt(max(0.5 * (A - r1), 0.0))
        sB = math.sqrt(B)
        den = (T * (V + chit)) ** 2
        C = (A * chih * chih + B + 1.0 + 2.0 * chih * (V * sB + T * (V + chil)) + 2.0 * T * (V * V - 1.0)) / den
        D = (V + sB * chih) ** 2 / den
        r2 = math.sqrt(max(C * C - 4.0 * D, 0.0))
        l3 = math.sqrt(max(0.5 * (C + r2), 0.0))
        l4 = math.sqrt(max(0.5 * (C - r2), 0.0))
        chi = _nb_g_lambda(l1) + _nb_g_lambda(l2) - _nb_g_lambda(l3) - _nb_g_lambda(l4)
        return beta * I - chi

    @_jit
    def _nb_kinf_scalar(VA, T, xi, eta, vel, beta, trusted):
        if trusted:
            return _nb_kinf_trusted(VA, T, xi, eta, vel, beta)
        return _nb_kinf_untrusted(VA, T, xi, eta, vel, beta)

    @_jit
    def _nb_kfinite_scalar(VA, T, xi, eta, vel, beta, trusted, N, m, w, V0, c_pe, p_ec, delta_aep, theta):
        if N <= 0.0:
            return _nb_kinf_scalar(VA, T, xi, eta, vel, beta, trusted)
        if T <= 0.0:
            return np.nan
        n = N - m
        s_t = 2.0 * T / math.sqrt(V0 * m) * math.sqrt(c_pe + (xi + (V0 + vel) / (eta * T)) / VA)
        t_wc = T - w * s_t
        if t_wc <= 0.0:
            return np.nan
        s_xi = math.sqrt(2.0 / (V0 * m)) * (eta * T + V0 + vel) / (eta * t_wc)
        xi_wc = T / t_wc * xi + w * s_xi
        k = _nb_kinf_scalar(VA, t_wc, xi_wc, eta, vel, beta, trusted)
        return n * p_ec / N * (k - delta_aep / math.sqrt(n) + theta / n)

    @_jit
    def _nb_kfinite_array(VA, T, xi, eta, vel, beta, trusted, N, m, w, V0, c_pe, p_ec, delta_aep, theta):
        out = np.empty(VA.shape[0])
        for i in range(VA.shape[0]):
            out[i] = _nb_kfinite_scalar(VA[i], T[i], xi[i], eta, vel, beta, trusted, N, m, w, V0, c_pe, p_ec,
                                        delta_aep, theta)
        return out

    @_jit
    def _nb_objective(v, T, xi_b, sigma, eta, vel, beta, trusted, N, m, w, V0, c_pe, p_ec, delta_aep, theta):
        xi = xi_b + (v + 1.0) / 4.0 * sigma
        k = _nb_kfinite_scalar(v, T, xi, eta, vel, beta, trusted, N, m, w, V0, c_pe, p_ec, delta_aep, theta)
        if math.isnan(k):
            return -np.inf
        return k

    @_jit
    def _nb_optimize_va(T, xi_b, sigma, eta, vel, beta, trusted, N, m, w, V0, c_pe, p_ec, delta_aep, theta,
                        lo, hi, n_grid, tol):
        best_i = 0
        best_k = -np.inf
        first = 0.0
        all_equal = True
        step = (hi - lo) / (n_grid - 1)
        for i in range(n_grid):
            v = lo + i * step if i < n_grid - 1 else hi
            k = _nb_objective(v, T, xi_b, sigma, eta, vel, beta, trusted, N, m, w, V0, c_pe, p_ec, delta_aep,
                              theta)
            if i == 0:
                first = k
            elif k != first:
                all_equal = False
            if k > best_k:
                best_k = k
                best_i = i
        best_v = lo + best_i * step if best_i < n_grid - 1 else hi
        if not math.isfinite(best_k) or all_equal:
            return best_v, best_k
        a = lo + max(best_i - 1, 0) * step
        b = min(lo + (best_i + 1) * step, hi)
        invphi = (math.sqrt(5.0) - 1.0) / 2.0
        c = b - invphi * (b - a)
        d = a + invphi * (b - a)
        fc = _nb_objective(c, T, xi_b, sigma, eta, vel, beta, trusted, N, m, w, V0, c_pe, p_ec, delta_aep, theta)
        fd = _nb_objective(d, T, xi_b, sigma, eta, vel, beta, trusted, N, m, w, V0, c_pe, p_ec, delta_aep, theta)
        while b - a > tol:
            if fc >= fd:
                b = d
                d = c
                fd = fc
                c = b - invphi * (b - a)
                fc = _nb_objective(c, T, xi_b, sigma, eta, vel, beta, trusted, N, m, w, V0, c_pe, p_ec,
                                   delta_aep, theta)
            else:
                a = c
                c = d
                fc = fd
                d = a + invphi * (b - a)
                fd = _nb_objective(d, T, xi_b, sigma, eta, vel, beta, trusted, N, m, w, V0, c_pe, p_ec,
                                   delta_aep, theta)
        mid = 0.5 * (a + b)
        fm = _nb_objective(mid, T, xi_b, sigma, eta, vel, beta, trusted, N, m, w, V0, c_pe, p_ec, delta_aep, theta)
        if fm > best_k:
            return mid, fm
        return best_v, best_k

    @_jit
    def _nb_gini_best_split(x, y, n_classes, min_leaf):
        n = x.shape[0]
        total = np.zeros(n_classes)
        for i in range(n):
            total[y[i]] += 1.0
        left = np.zeros(n_classes)
        best = np.inf
        pos = -1
        for i in range(n - 1):
            left[y[i]] += 1.0
            n_left = i + 1.0
            n_right = n - n_left
            if x[i] >= x[i + 1] or n_left < min_leaf or n_right < min_leaf:
                continue
            sl = 0.0
            sr = 0.0
            for c in range(n_classes):
                r = total[c] - left[c]
                sl += left[c] * left[c]
                sr += r * r
            score = n_left - sl / n_left + n_right - sr / n_right
            if score < best:
                best = score
                pos = i
        return best, pos

    @_jit
    def _nb_row_moments(T):
        rows, cols = T.shape
        e_t = np.empty(rows)
        e_s = np.empty(rows)
        for r in range(rows):
            s1 = 0.0
            s2 = 0.0
            for c in range(cols):
                v = T[r, c]
                s1 += v
                s2 += math.sqrt(v)
            e_t[r] = s1 / cols
            e_s[r] = s2 / cols
        return e_t, e_s

    def _nb_kinf(VA, T, xi, eta, vel, beta, trusted):
        VA, T, xi = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (VA, T, xi)))
        shape = VA.shape
        out = _nb_kfinite_array(np.ascontiguousarray(VA).ravel(), np.ascontiguousarray(T).ravel(),
                                np.ascontiguousarray(xi).ravel(), float(eta), float(vel), float(beta),
                                bool(trusted), 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0)
        return out.reshape(shape)

    def _nb_kfinite(VA, T, xi, eta, vel, beta, trusted, N, m, w, V0, c_pe, p_ec, delta_aep, theta):
        VA, T, xi = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (VA, T, xi)))
        shape = VA.shape
        out = _nb_kfinite_array(np.ascontiguousarray(VA).ravel(), np.ascontiguousarray(T).ravel(),
                                np.ascontiguousarray(xi).ravel(), float(eta), float(vel), float(beta),
                                bool(trusted), float(N), float(m), float(w), float(V0), float(c_pe),
                                float(p_ec), float(delta_aep), float(theta))
        return out.reshape(shape)

    def _nb_entropy_vec(x):
        x = np.asarray(x, dtype=float)
        return np.vectorize(_nb_entropy, otypes=[float])(x)

    def _nb_optimize_va_py(T, xi_b, sigma, eta, vel, beta, trusted, N, m, w, V0, c_pe, p_ec, delta_aep, theta,
                           lo, hi, n_grid, tol):
        v, k = _nb_optimize_va(float(T), float(xi_b), float(sigma), float(eta), float(vel), float(beta),
                               bool(trusted), float(N), float(m), float(w), float(V0), float(c_pe), float(p_ec),
                               float(delta_aep), float(theta), float(lo), float(hi), int(n_grid), float(tol))
        return float(v), float(k)

    def _nb_gini_py(x, y, n_classes, min_leaf):
        best, pos = _nb_gini_best_split(np.ascontiguousarray(x, dtype=np.float64),
                                        np.ascontiguousarray(y, dtype=np.int64), int(n_classes), float(min_leaf))
        return float(best), int(pos)

    def _nb_row_moments_py(T):
        return _nb_row_moments(np.ascontiguousarray(T, dtype=np.float64))

    numba_impl = SimpleNamespace(
        entropy=_nb_entropy_vec,
        kinf=_nb_kinf,
        kfinite=_nb_kfinite,
        optimize_va=_nb_optimize_va_py,
        gini_best_split=_nb_gini_py,
        row_moments=_nb_row_moments_py,
    )
else:  # pragma: no cover
    numba_impl = None


active = numba_impl if USE_NUMBA else numpy_impl

kinf = active.kinf
kfinite = active.kfinite
optimize_va = active.optimize_va
gini_best_split = active.gini_best_split
row_moments = active.row_moments


def backend() -> str:
    """Name of the active kernel path."""
    return "numba" if USE_NUMBA else "numpy"
