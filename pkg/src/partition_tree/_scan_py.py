"""Pure-Python threshold scan, the fallback for the compiled kernel.

Candidate thresholds are midpoints between consecutive distinct sorted values
(covariate members for X-splits, joint members for Y-splits); counts come from
prefix sums in one increasing pass. Every arithmetic expression here must stay
textually identical to the compiled kernel so both backends select the same
split even on exact gain ties.
"""

from math import log


def _term(n_xy: float, n_x: float, mu: float, n_total: float) -> float:
    if n_xy == 0.0:
        return 0.0
    return (n_xy / n_total) * log(n_xy / (n_x * mu))


def scan_threshold(
    sx,
    wx_cum,
    sxy,
    wxy_cum,
    is_x: bool,
    mu_parent: float,
    mu_rest: float,
    y_lo: float,
    y_hi: float,
    min_nxy: float,
    min_nx: float,
    min_len: float,
    n_total: float,
    parent_term: float,
):
    """Best feasible threshold on one continuous coordinate.

    Returns (found, gain, threshold, n_x_left, n_xy_left). Ties keep the
    smaller threshold because only strictly larger gains replace the incumbent.
    """
    n_sx = len(sx)
    n_sxy = len(sxy)
    total_x = wx_cum[n_sx - 1] if n_sx else 0.0
    total_xy = wxy_cum[n_sxy - 1] if n_sxy else 0.0

    best_gain = -1.0
    best_t = 0.0
    best_nx_l = 0.0
    best_nxy_l = 0.0
    found = False

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


def threshold_candidates(sorted_vals) -> list[float]:
    """Midpoints between consecutive distinct values; degenerate pairs dropped."""
    out = []
    for i in range(len(sorted_vals) - 1):
        a = sorted_vals[i]
        b = sorted_vals[i + 1]
        if a == b:
            continue
        t = (a + b) / 2.0
        if a < t < b:
            out.append(t)
    return out


def scan_threshold_table(sx, wx_cum, sxy, wxy_cum, is_x: bool):
    """Per-candidate (threshold, n_x_left, n_xy_left) table; test/debug aid."""
    n_sx = len(sx)
    n_sxy = len(sxy)
    total_x = wx_cum[n_sx - 1] if n_sx else 0.0
    base = sx if is_x else sxy
    rows = []
    for t in threshold_candidates(base):
        px = 0
        while px < n_sx and sx[px] < t:
            px += 1
        pxy = 0
        while pxy < n_sxy and sxy[pxy] < t:
            pxy += 1
        nx_l = (wx_cum[px - 1] if px > 0 else 0.0) if is_x else total_x
        nxy_l = wxy_cum[pxy - 1] if pxy > 0 else 0.0
        rows.append((t, nx_l, nxy_l))
    return rows
