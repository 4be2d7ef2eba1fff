# Compiled threshold scan. Arithmetic mirrors _scan_py.scan_threshold exactly
# (same expressions, same order) so both backends pick identical splits.

from libc.math cimport log


cdef inline double _term(double n_xy, double n_x, double mu, double n_total) noexcept:
    if n_xy == 0.0:
        return 0.0
    return (n_xy / n_total) * log(n_xy / (n_x * mu))


def scan_threshold(
    double[::1] sx,
    double[::1] wx_cum,
    double[::1] sxy,
    double[::1] wxy_cum,
    bint is_x,
    double mu_parent,
    double mu_rest,
    double y_lo,
    double y_hi,
    double min_nxy,
    double min_nx,
    double min_len,
    double n_total,
    double parent_term,
):
    cdef Py_ssize_t n_sx = sx.shape[0]
    cdef Py_ssize_t n_sxy = sxy.shape[0]
    cdef double total_x = wx_cum[n_sx - 1] if n_sx else 0.0
    cdef double total_xy = wxy_cum[n_sxy - 1] if n_sxy else 0.0

    cdef double best_gain = -1.0
    cdef double best_t = 0.0
    cdef double best_nx_l = 0.0
    cdef double best_nxy_l = 0.0
    cdef bint found = False

    cdef Py_ssize_t i, pxy
    cdef double a, b, t, nx_l, nx_r, nxy_l, nxy_r, gain, d_l, d_r, mu_l, mu_r

    if is_x:
        if n_sx < 2:
            return False, 0.0, 0.0, 0.0, 0.0
        pxy = 0
        for i in range(n_sx - 1):
            a = sx[i]
            b = sx[i + 1]
            if a == b:
                continue
            t = (a + b) / 2.0
            if not (a < t < b):
                continue
            nx_l = wx_cum[i]
            nx_r = total_x - nx_l
            while pxy < n_sxy and sxy[pxy] < t:
                pxy += 1
            nxy_l = wxy_cum[pxy - 1] if pxy > 0 else 0.0
            nxy_r = total_xy - nxy_l
            if nx_l <= 0.0 or nx_r <= 0.0:
                continue
            if nx_l < min_nx or nx_r < min_nx:
                continue
            if nxy_l < min_nxy or nxy_r < min_nxy:
                continue
            gain = (
                _term(nxy_l, nx_l, mu_parent, n_total)
                + _term(nxy_r, nx_r, mu_parent, n_total)
                - parent_term
            )
            if not found or gain > best_gain:
                found = True
                best_gain = gain
                best_t = t
                best_nx_l = nx_l
                best_nxy_l = nxy_l
    else:
        if n_sxy < 2:
            return False, 0.0, 0.0, 0.0, 0.0
        if total_x <= 0.0 or total_x < min_nx:
            return False, 0.0, 0.0, 0.0, 0.0
        for i in range(n_sxy - 1):
            a = sxy[i]
            b = sxy[i + 1]
            if a == b:
                continue
            t = (a + b) / 2.0
            if not (a < t < b):
                continue
            d_l = t - y_lo
            d_r = y_hi - t
            if d_l <= 0.0 or d_r <= 0.0:
                continue
            if d_l < min_len or d_r < min_len:
                continue
            nxy_l = wxy_cum[i]
            nxy_r = total_xy - nxy_l
            if nxy_l < min_nxy or nxy_r < min_nxy:
                continue
            mu_l = mu_rest * d_l
            mu_r = mu_rest * d_r
            gain = (
                _term(nxy_l, total_x, mu_l, n_total)
                + _term(nxy_r, total_x, mu_r, n_total)
                - parent_term
            )
            if not found or gain > best_gain:
                found = True
                best_gain = gain
                best_t = t
                best_nx_l = total_x
                best_nxy_l = nxy_l

    return found, best_gain, best_t, best_nx_l, best_nxy_l
