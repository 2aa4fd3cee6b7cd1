"""Compiled inner loops for the descriptor extractor.

numba-jitted when numba is importable, with equivalent (slower) numpy
fallbacks otherwise. Both paths are deterministic for identical inputs; the
test suite cross-checks the root finder against numpy's companion-matrix
eigenvalues.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    NUMBA_OK = True
except ImportError:  # pragma: no cover - exercised only without numba
    NUMBA_OK = False

    def njit(*args, **kwargs):
        def deco(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return deco


@njit(cache=True)
def _laguerre_one(coeffs: np.ndarray, roots_out: np.ndarray) -> None:
    """All roots of one monic complex polynomial (descending coefficients).

    Laguerre's method with synthetic-division deflation, smallest-degree last;
    robust for the stable real-coefficient polynomials LPC produces.
    """
    n = len(coeffs) - 1
    work = coeffs.copy()
    for k in range(n - 1, -1, -1):
        m = k + 1
        z = 0.0 + 0.0j
        for _ in range(80):
            p = work[0]
            dp = 0.0 + 0.0j
            d2p = 0.0 + 0.0j
            for i in range(1, m + 1):
                d2p = d2p * z + 2.0 * dp
                dp = dp * z + p
                p = p * z + work[i]
            if abs(p) < 1e-14:
                break
            g = dp / p
            h = g * g - d2p / p
            rad = np.sqrt((m - 1) * (m * h - g * g))
            d1 = g + rad
            d2 = g - rad
            denom = d1 if abs(d1) > abs(d2) else d2
            if abs(denom) < 1e-300:
                dz = 1.0 + 0.0j
            else:
                dz = m / denom
            z -= dz
            if abs(dz) < 1e-12 * max(1.0, abs(z)):
                break
        roots_out[k] = z
        new = np.empty(m, dtype=np.complex128)
        new[0] = work[0]
        for i in range(1, m):
            new[i] = work[i] + new[i - 1] * z
        work = new


@njit(cache=True)
def _poly_roots_batch_jit(a: np.ndarray) -> np.ndarray:
    rows, n1 = a.shape
    out = np.empty((rows, n1 - 1), dtype=np.complex128)
    for i in range(rows):
        _laguerre_one(a[i].astype(np.complex128), out[i])
    return out


def _poly_roots_batch_np(a: np.ndarray) -> np.ndarray:
    """Companion-matrix eigenvalues, batched."""
    rows, n1 = a.shape
    p = n1 - 1
    comp = np.zeros((rows, p, p))
    comp[:, 0, :] = -a[:, 1:]
    idx = np.arange(p - 1)
    comp[:, idx + 1, idx] = 1.0
    return np.linalg.eigvals(comp)


@njit(cache=True)
def _lpc_batch_jit(rows: np.ndarray, window: np.ndarray, preemph: float,
                   order: int) -> np.ndarray:
    """Pre-emphasize + window each row, then autocorrelation Levinson-Durbin.

    Returns monic LPC coefficient rows (n, order+1); silent rows come back as
    passthrough filters (their polynomial has no usable resonance roots).
    """
    n, w = rows.shape
    a = np.zeros((n, order + 1))
    for i in range(n):
        y = np.empty(w)
        r = np.empty(order + 1)
        y[0] = rows[i, 0] * window[0]
        for t in range(1, w):
            y[t] = (rows[i, t] - preemph * rows[i, t - 1]) * window[t]
        for k in range(order + 1):
            acc = 0.0
            for t in range(w - k):
                acc += y[t] * y[t + k]
            r[k] = acc
        a[i, 0] = 1.0
        if r[0] <= 1e-14:
            continue
        r[0] *= 1.0 + 1e-9
        err = r[0]
        for m in range(1, order + 1):
            acc = 0.0
            for j in range(m):
                acc += a[i, j] * r[m - j]
            k_ref = -acc / err
            if k_ref > 0.9999999:
                k_ref = 0.9999999
            elif k_ref < -0.9999999:
                k_ref = -0.9999999
            half = m // 2 + 1
            for j in range(half):
                tmp1 = a[i, j] + k_ref * a[i, m - j]
                tmp2 = a[i, m - j] + k_ref * a[i, j]
                a[i, j] = tmp1
                a[i, m - j] = tmp2
            err *= 1.0 - k_ref * k_ref
            if err < 1e-15:
                err = 1e-15
    return a


def _lpc_batch_np(rows: np.ndarray, window: np.ndarray, preemph: float,
                  order: int) -> np.ndarray:
    y = rows.copy()
    y[:, 1:] -= preemph * rows[:, :-1]
    y *= window
    n, w = y.shape
    r = np.empty((n, order + 1))
    for k in range(order + 1):
        r[:, k] = np.einsum("ij,ij->i", y[:, :w - k], y[:, k:])
    ok = r[:, 0] > 1e-14
    r[~ok, 0] = 1.0
    r[:, 0] *= 1.0 + 1e-9
    a = np.zeros((n, order + 1))
    a[:, 0] = 1.0
    err = r[:, 0].copy()
    for m in range(1, order + 1):
        acc = np.einsum("nj,nj->n", a[:, :m], r[:, m:0:-1])
        k_ref = np.clip(-acc / err, -0.9999999, 0.9999999)
        a[:, :m + 1] = a[:, :m + 1] + k_ref[:, None] * a[:, m::-1]
        err *= 1.0 - k_ref * k_ref
        np.maximum(err, 1e-15, out=err)
    a[~ok, 1:] = 0.0
    return a


@njit(cache=True)
def _formant_batch_jit(rows: np.ndarray, window: np.ndarray, preemph: float,
                       order: int, sr: float, ceiling: float, max_bw: float
                       ) -> tuple[np.ndarray, np.ndarray]:
    """LPC -> polynomial roots -> first three resonances by frequency.

    Returns (freq, bandwidth) arrays of shape (n, 3), NaN-padded where fewer
    than three roots survive the frequency/bandwidth plausibility gates.
    """
    a = _lpc_batch_jit(rows, window, preemph, order)
    n = rows.shape[0]
    freq3 = np.full((n, 3), np.nan)
    bw3 = np.full((n, 3), np.nan)
    roots = np.empty(order, dtype=np.complex128)
    cf = np.empty(order)
    cb = np.empty(order)
    f_hi = min(ceiling, 0.475 * sr)
    two_pi = 2.0 * np.pi
    for i in range(n):
        _laguerre_one(a[i].astype(np.complex128), roots)
        cnt = 0
        for r in roots:
            ang = np.arctan2(r.imag, r.real)
            if ang <= 1e-6:
                continue
            f = ang * sr / two_pi
            if f < 50.0 or f > f_hi:
                continue
            m = abs(r)
            if m <= 1e-12:
                continue
            bw = -np.log(m) * sr / np.pi
            if bw <= 0.0 or bw > max_bw:
                continue
            cf[cnt] = f
            cb[cnt] = bw
            cnt += 1
        for u in range(1, cnt):
            fv = cf[u]
            bv = cb[u]
            w = u - 1
            while w >= 0 and cf[w] > fv:
                cf[w + 1] = cf[w]
                cb[w + 1] = cb[w]
                w -= 1
            cf[w + 1] = fv
            cb[w + 1] = bv
        top = 3 if cnt > 3 else cnt
        for j in range(top):
            freq3[i, j] = cf[j]
            bw3[i, j] = cb[j]
    return freq3, bw3


def _formant_batch_np(rows: np.ndarray, window: np.ndarray, preemph: float,
                      order: int, sr: float, ceiling: float, max_bw: float
                      ) -> tuple[np.ndarray, np.ndarray]:
    a = _lpc_batch_np(rows, window, preemph, order)
    roots = _poly_roots_batch_np(a)
    ang = np.angle(roots)
    freq = ang * (sr / (2.0 * np.pi))
    mag = np.abs(roots)
    bw = -np.log(np.maximum(mag, 1e-12)) * (sr / np.pi)
    valid = ((ang > 1e-6) & (freq >= 50.0) & (freq <= min(ceiling, 0.475 * sr))
             & (bw <= max_bw) & (bw > 0))
    freq_sort = np.where(valid, freq, np.inf)
    order_idx = np.argsort(freq_sort, axis=1)[:, :3]
    f3 = np.take_along_axis(freq_sort, order_idx, axis=1)
    b3 = np.take_along_axis(bw, order_idx, axis=1)
    missing = ~np.isfinite(f3)
    f3[missing] = np.nan
    b3[missing] = np.nan
    return f3, b3


@njit(cache=True)
def _pitch_pick_jit(norm: np.ndarray, lag_min: int, rel: float
                    ) -> tuple[np.ndarray, np.ndarray]:
    """Best autocorrelation peak per row plus the shortest near-best peak lag.

    A peak is a local maximum (>= left neighbor, > right) on lags in
    (lag_min, lag_max); rows without peaks report -inf and lag_min+1.
    """
    n, L = norm.shape
    best = np.empty(n)
    lag = np.empty(n, dtype=np.int64)
    for i in range(n):
        bi = -np.inf
        for k in range(lag_min + 1, L - 1):
            v = norm[i, k]
            if v >= norm[i, k - 1] and v > norm[i, k + 1] and v > bi:
                bi = v
        best[i] = bi
        lag[i] = lag_min + 1
        if bi == -np.inf:
            continue
        thr = bi * rel
        if thr < 1e-12:
            thr = 1e-12
        for k in range(lag_min + 1, L - 1):
            v = norm[i, k]
            if v >= norm[i, k - 1] and v > norm[i, k + 1] and v >= thr:
                lag[i] = k
                break
    return best, lag


def _pitch_pick_np(norm: np.ndarray, lag_min: int, rel: float
                   ) -> tuple[np.ndarray, np.ndarray]:
    band = norm[:, lag_min:]
    interior = band[:, 1:-1]
    is_peak = (interior >= band[:, :-2]) & (interior > band[:, 2:])
    peak_vals = np.where(is_peak, interior, -np.inf)
    best = peak_vals.max(axis=1)
    near_best = peak_vals >= np.maximum(best[:, None] * rel, 1e-12)
    lag = lag_min + 1 + np.argmax(near_best, axis=1)
    return best, lag


@njit(cache=True)
def _window_peak_jit(mags: np.ndarray, centers_hz: np.ndarray,
                     half_hz: np.ndarray, df: float) -> np.ndarray:
    rows, n_bins = mags.shape
    out = np.empty(rows)
    for i in range(rows):
        c = int(round(centers_hz[i] / df))
        w = int(half_hz[i] / df)
        if w < 1:
            w = 1
        lo = c - w
        hi = c + w
        if lo < 0:
            lo = 0
        if hi > n_bins - 1:
            hi = n_bins - 1
        if lo > n_bins - 1:
            lo = n_bins - 1
        best = mags[i, lo]
        for b in range(lo + 1, hi + 1):
            if mags[i, b] > best:
                best = mags[i, b]
        out[i] = best
    return out


def _window_peak_np(mags: np.ndarray, centers_hz: np.ndarray,
                    half_hz: np.ndarray, df: float) -> np.ndarray:
    n_bins = mags.shape[1]
    cb = np.clip(np.round(centers_hz / df).astype(np.intp), 0, n_bins - 1)
    half_bins = np.maximum((half_hz / df).astype(np.intp), 1)
    w = int(half_bins.max())
    rows = np.arange(len(cb))
    out = mags[rows, cb]
    for off in range(1, w + 1):
        allow = half_bins >= off
        for b in (np.minimum(cb + off, n_bins - 1), np.maximum(cb - off, 0)):
            out = np.where(allow, np.maximum(out, mags[rows, b]), out)
    return out


@njit(cache=True)
def _track_cycles_jit(x: np.ndarray, period0: float,
                      pos_out: np.ndarray, h_out: np.ndarray) -> int:
    n = len(x)
    first_end = int(round(1.5 * period0)) + 1
    if first_end > n:
        first_end = n
    if first_end < 3:
        return 0
    p = 0
    best = x[0]
    for t in range(1, first_end):
        if x[t] > best:
            best = x[t]
            p = t
    count = 0
    # parabolic refinement of peak position and height
    if 0 < p < n - 1:
        ym, y0, yp = x[p - 1], x[p], x[p + 1]
        den = ym - 2.0 * y0 + yp
        if den < -1e-30:
            d = 0.5 * (ym - yp) / den
            pos_out[count] = p + d
            h_out[count] = y0 - 0.25 * (ym - yp) * d
        else:
            pos_out[count] = p
            h_out[count] = y0
    else:
        pos_out[count] = p
        h_out[count] = x[p]
    count = 1
    period = period0
    max_out = len(pos_out)
    while count < max_out:
        lo = p + int(round(0.7 * period))
        hi = p + int(round(1.3 * period)) + 1
        if lo >= n or hi - lo < 2:
            break
        if hi > n:
            hi = n
        q = lo
        best = x[lo]
        for t in range(lo + 1, hi):
            if x[t] > best:
                best = x[t]
                q = t
        if 0 < q < n - 1:
            ym, y0, yp = x[q - 1], x[q], x[q + 1]
            den = ym - 2.0 * y0 + yp
            if den < -1e-30:
                d = 0.5 * (ym - yp) / den
                pos_out[count] = q + d
                h_out[count] = y0 - 0.25 * (ym - yp) * d
            else:
                pos_out[count] = q
                h_out[count] = y0
        else:
            pos_out[count] = q
            h_out[count] = x[q]
        count += 1
        step = q - p
        if step < 0.5 * period0:
            step = 0.5 * period0
        elif step > 2.0 * period0:
            step = 2.0 * period0
        period = step
        p = q
    return count


def _track_cycles_np(x: np.ndarray, period0: float,
                     pos_out: np.ndarray, h_out: np.ndarray) -> int:
    n = len(x)
    first_end = min(n, int(round(1.5 * period0)) + 1)
    if first_end < 3:
        return 0

    def refine(idx: int) -> tuple[float, float]:
        if 0 < idx < n - 1:
            ym, y0, yp = x[idx - 1], x[idx], x[idx + 1]
            den = ym - 2.0 * y0 + yp
            if den < -1e-30:
                d = 0.5 * (ym - yp) / den
                return idx + d, y0 - 0.25 * (ym - yp) * d
        return float(idx), float(x[idx])

    p = int(x[:first_end].argmax())
    pos_out[0], h_out[0] = refine(p)
    count = 1
    period = period0
    while count < len(pos_out):
        lo = p + int(round(0.7 * period))
        hi = p + int(round(1.3 * period)) + 1
        if lo >= n or hi - lo < 2:
            break
        hi = min(hi, n)
        q = lo + int(x[lo:hi].argmax())
        pos_out[count], h_out[count] = refine(q)
        count += 1
        period = min(max(q - p, 0.5 * period0), 2.0 * period0)
        p = q
    return count


if NUMBA_OK:
    poly_roots_batch = _poly_roots_batch_jit
    lpc_batch = _lpc_batch_jit
    formant_batch = _formant_batch_jit
    track_cycles_core = _track_cycles_jit
    window_peak = _window_peak_jit
    pitch_pick = _pitch_pick_jit
else:  # pragma: no cover
    poly_roots_batch = _poly_roots_batch_np
    lpc_batch = _lpc_batch_np
    formant_batch = _formant_batch_np
    track_cycles_core = _track_cycles_np
    window_peak = _window_peak_np
    pitch_pick = _pitch_pick_np
