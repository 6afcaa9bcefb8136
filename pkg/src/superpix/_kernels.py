"""Numba kernels for the E/M steps.

Parallelism is arranged so results never depend on thread count: the
E-step partitions pixels and each pixel writes only its own candidate
row; the M-step partitions superpixels and each one accumulates over its
window in row-major order.
"""

import numpy as np
from numba import njit, prange

LN_2PI = 1.8378770664093453


@njit(cache=True, inline="always")
def _cell_of(x, v, n):
    c = x // v
    if c > n - 1:
        c = n - 1
    return c


@njit(cache=True, parallel=True)
def estep_kernel(features, width, height, vx, vy, nx, ny,
                 mu, inv_s, inv_l, inv_ab, logdet, is_color,
                 cand, resp, loglik):
    num_pixels = width * height
    dim = features.shape[1]
    for i in prange(num_pixels):
        x = i % width
        y = i // width
        kx0 = _cell_of(x, vx, nx)
        ky0 = _cell_of(y, vy, ny)
        logp = np.empty(9)
        for slot in range(9):
            dx = slot % 3 - 1
            dy = slot // 3 - 1
            kx = kx0 + dx
            ky = ky0 + dy
            ok = 0 <= kx < nx and 0 <= ky < ny
            if ok:
                xb = max(0, vx * (kx - 1))
                xe = min(width, vx * (kx + 2))
                yb = max(0, vy * (ky - 1))
                ye = min(height, vy * (ky + 2))
                ok = xb <= x < xe and yb <= y < ye
            if not ok:
                cand[i, slot] = -1
                logp[slot] = -np.inf
                continue
            k = ky * nx + kx
            cand[i, slot] = k
            d0 = features[i, 0] - mu[k, 0]
            d1 = features[i, 1] - mu[k, 1]
            q = (d0 * (inv_s[k, 0, 0] * d0 + inv_s[k, 0, 1] * d1)
                 + d1 * (inv_s[k, 1, 0] * d0 + inv_s[k, 1, 1] * d1))
            dl = features[i, 2] - mu[k, 2]
            q += dl * dl * inv_l[k]
            if is_color:
                da = features[i, 3] - mu[k, 3]
                db = features[i, 4] - mu[k, 4]
                q += (da * (inv_ab[k, 0, 0] * da + inv_ab[k, 0, 1] * db)
                      + db * (inv_ab[k, 1, 0] * da + inv_ab[k, 1, 1] * db))
            logp[slot] = -0.5 * (dim * LN_2PI + logdet[k] + q)
        m = -np.inf
        for slot in range(9):
            if logp[slot] > m:
                m = logp[slot]
        total = 0.0
        for slot in range(9):
            if cand[i, slot] >= 0:
                resp[i, slot] = np.exp(logp[slot] - m)
                total += resp[i, slot]
            else:
                resp[i, slot] = 0.0
        for slot in range(9):
            resp[i, slot] /= total
        loglik[i] = m + np.log(total)


@njit(cache=True, parallel=True)
def mstep_kernel(features, width, height, vx, vy, nx, ny,
                 cand, resp, is_color,
                 mu_out, cov_s_out, var_l_out, cov_ab_out, fault):
    num_k = nx * ny
    dim = features.shape[1]
    for k in prange(num_k):
        kx = k % nx
        ky = k // nx
        xb = max(0, vx * (kx - 1))
        xe = min(width, vx * (kx + 2))
        yb = max(0, vy * (ky - 1))
        ye = min(height, vy * (ky + 2))

        wsum = 0.0
        acc = np.zeros(dim)
        for y in range(yb, ye):
            for x in range(xb, xe):
                i = y * width + x
                dx = kx - _cell_of(x, vx, nx)
                dy = ky - _cell_of(y, vy, ny)
                if dx < -1 or dx > 1 or dy < -1 or dy > 1:
                    continue
                slot = (dy + 1) * 3 + (dx + 1)
                if cand[i, slot] != k:
                    continue
                w = resp[i, slot]
                wsum += w
                for d in range(dim):
                    acc[d] += w * features[i, d]
        if wsum <= 0.0:
            fault[0] = 1
            continue
        for d in range(dim):
            mu_out[k, d] = acc[d] / wsum

        s00 = 0.0
        s01 = 0.0
        s11 = 0.0
        cl = 0.0
        a00 = 0.0
        a01 = 0.0
        a11 = 0.0
        for y in range(yb, ye):
            for x in range(xb, xe):
                i = y * width + x
                dx = kx - _cell_of(x, vx, nx)
                dy = ky - _cell_of(y, vy, ny)
                if dx < -1 or dx > 1 or dy < -1 or dy > 1:
                    continue
                slot = (dy + 1) * 3 + (dx + 1)
                if cand[i, slot] != k:
                    continue
                w = resp[i, slot]
                d0 = features[i, 0] - mu_out[k, 0]
                d1 = features[i, 1] - mu_out[k, 1]
                s00 += w * d0 * d0
                s01 += w * d0 * d1
                s11 += w * d1 * d1
                dl = features[i, 2] - mu_out[k, 2]
                cl += w * dl * dl
                if is_color:
                    da = features[i, 3] - mu_out[k, 3]
                    db = features[i, 4] - mu_out[k, 4]
                    a00 += w * da * da
                    a01 += w * da * db
                    a11 += w * db * db
        cov_s_out[k, 0, 0] = s00 / wsum
        cov_s_out[k, 0, 1] = s01 / wsum
        cov_s_out[k, 1, 0] = s01 / wsum
        cov_s_out[k, 1, 1] = s11 / wsum
        var_l_out[k] = cl / wsum
        if is_color:
            cov_ab_out[k, 0, 0] = a00 / wsum
            cov_ab_out[k, 0, 1] = a01 / wsum
            cov_ab_out[k, 1, 0] = a01 / wsum
            cov_ab_out[k, 1, 1] = a11 / wsum
