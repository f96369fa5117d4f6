"""Independent reference implementations the tests check the library against.

Everything here is written straight from the definitions (explicit loops,
bounds checks instead of padding, Jacobi rotations instead of LAPACK) so a
bug in the library cannot hide in a shared code path.
"""

import math

import numpy as np


def naive_conv2d(x, w, b, stride=1, padding=0):
    """Direct convolution with explicit bounds checks."""
    c_out, c_in, k, _ = w.shape
    _, h, wd = x.shape
    oh = (h + 2 * padding - k) // stride + 1
    ow = (wd + 2 * padding - k) // stride + 1
    out = np.zeros((c_out, oh, ow))
    for co in range(c_out):
        for oy in range(oh):
            for ox in range(ow):
                acc = b[co]
                for ci in range(c_in):
                    for ky in range(k):
                        for kx in range(k):
                            iy = oy * stride + ky - padding
                            ix = ox * stride + kx - padding
                            if 0 <= iy < h and 0 <= ix < wd:
                                acc += w[co, ci, ky, kx] * x[ci, iy, ix]
                out[co, oy, ox] = acc
    return out


def naive_maxpool(x, k):
    c, h, w = x.shape
    oh, ow = h // k, w // k
    out = np.zeros((c, oh, ow))
    for ch in range(c):
        for oy in range(oh):
            for ox in range(ow):
                out[ch, oy, ox] = x[ch, oy * k:(oy + 1) * k, ox * k:(ox + 1) * k].max()
    return out


def naive_fc(x, w, b):
    o_dim, i_dim = w.shape
    out = np.zeros(o_dim)
    for o in range(o_dim):
        acc = b[o]
        for i in range(i_dim):
            acc += w[o, i] * x[i]
        out[o] = acc
    return out


def central_difference_gradient(f, x, h=1e-5):
    """Componentwise central finite differences of a scalar function."""
    x = np.array(x, dtype=float)
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f(x)
        flat[i] = orig - h
        fm = f(x)
        flat[i] = orig
        gf[i] = (fp - fm) / (2.0 * h)
    return g


def gradient_relative_error(analytic, numeric, floor=1e-8):
    """Max per-component relative disagreement between two gradients."""
    a = np.asarray(analytic).reshape(-1)
    b = np.asarray(numeric).reshape(-1)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / denom))


def brute_force_partition(profile, rate_bps):
    """Re-evaluates the total latency of every split, in the same canonical
    term order the planner defines (edge + uplink + cloud + downlink)."""
    n = profile.n_layers
    totals = []
    for m in range(n + 1):
        if m == 0:
            up = profile.input_bits
        elif m == n:
            up = 0.0
        else:
            up = profile.output_bits[m - 1]
        total = (sum(profile.edge_seconds[:m]) + up / rate_bps
                 + sum(profile.cloud_seconds[m:]) + profile.result_bits / rate_bps)
        totals.append(total)
    best_m = 0
    for m in range(1, n + 1):
        if totals[m] < totals[best_m]:
            best_m = m
    return best_m, totals


def jacobi_singular_values(a, max_sweeps=100, tol=1e-13):
    """Singular values via one-sided Jacobi column orthogonalization."""
    a = np.array(a, dtype=float)
    if a.shape[0] < a.shape[1]:
        a = a.T
    n = a.shape[1]
    for _ in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                alpha = a[:, p] @ a[:, p]
                beta = a[:, q] @ a[:, q]
                gamma = a[:, p] @ a[:, q]
                if abs(gamma) <= tol * math.sqrt(alpha * beta) or gamma == 0.0:
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                if zeta == 0.0:
                    t = 1.0
                else:
                    t = math.copysign(1.0, zeta) / (abs(zeta) + math.sqrt(1.0 + zeta * zeta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = c * t
                ap = a[:, p].copy()
                a[:, p] = c * ap - s * a[:, q]
                a[:, q] = s * ap + c * a[:, q]
        if not rotated:
            break
    sv = np.sqrt(np.sum(a * a, axis=0))
    return np.sort(sv)[::-1]


def jacobi_numerical_rank(mat, tau_rel):
    s = jacobi_singular_values(mat)
    if s.size == 0 or s[0] <= 0:
        return 0
    return int(np.count_nonzero(s > tau_rel * s[0]))


def loop_mse(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    terms = [(x - y) ** 2 for x, y in zip(a.reshape(-1), b.reshape(-1))]
    return math.fsum(terms) / len(terms)


def loop_ssim(a, b, c1, c2):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim == 2:
        a, b = a[None], b[None]
    vals = []
    for ch in range(a.shape[0]):
        x = a[ch].reshape(-1)
        y = b[ch].reshape(-1)
        n = x.size
        mx = math.fsum(x) / n
        my = math.fsum(y) / n
        vx = math.fsum((v - mx) ** 2 for v in x) / n
        vy = math.fsum((v - my) ** 2 for v in y) / n
        cov = math.fsum((u - mx) * (v - my) for u, v in zip(x, y)) / n
        vals.append((2 * mx * my + c1) * (2 * cov + c2)
                    / ((mx * mx + my * my + c1) * (vx + vy + c2)))
    return sum(vals) / len(vals)


def loop_psnr(a, b):
    m = loop_mse(a, b)
    if m == 0.0:
        return math.inf
    return 10.0 * math.log10(255.0 ** 2 / m)


def loop_total_variation(x, beta):
    x = np.asarray(x, dtype=float)
    if x.ndim == 2:
        x = x[None]
    total = 0.0
    for ch in range(x.shape[0]):
        img = x[ch]
        h, w = img.shape
        for i in range(h):
            for j in range(w):
                dv = img[i + 1, j] - img[i, j] if i + 1 < h else 0.0
                dh = img[i, j + 1] - img[i, j] if j + 1 < w else 0.0
                total += (dv * dv + dh * dh) ** (beta / 2.0)
    return total
