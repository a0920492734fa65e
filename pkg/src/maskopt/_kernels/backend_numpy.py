"""NumPy implementations of the hot kernels.

conv2d runs as im2col + one BLAS matmul; dart placement is a plain Python
loop over the supplied draw stream.  The compiled extension mirrors these
semantics exactly.
"""

import math

import numpy as np


def _im2col(x, kh, kw):
    """(C_in*kh*kw, H*W) patch matrix of x padded to 'same' output size."""
    c, h, w = x.shape
    ph, pw = kh // 2, kw // 2
    xp = np.pad(x, ((0, 0), (ph, ph), (pw, pw)))
    windows = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(1, 2))
    # windows: (C, H, W, kh, kw) -> (C, kh, kw, H, W)
    cols = windows.transpose(0, 3, 4, 1, 2).reshape(c * kh * kw, h * w)
    return np.ascontiguousarray(cols)


def conv2d_forward(x, w, b):
    """Same-size 2D cross-correlation.

    x: (C_in, H, W), w: (C_out, C_in, kh, kw) with odd kh/kw, b: (C_out,).
    Returns (C_out, H, W).
    """
    c_out = w.shape[0]
    _, h, wd = x.shape
    cols = _im2col(x, w.shape[2], w.shape[3])
    y = w.reshape(c_out, -1) @ cols + b[:, None]
    return y.reshape(c_out, h, wd)


def conv2d_backward(x, w, grad_y):
    """Gradients of conv2d_forward w.r.t. input, weights, and bias."""
    c_out, c_in, kh, kw = w.shape
    _, h, wd = x.shape
    ph, pw = kh // 2, kw // 2

    gy = grad_y.reshape(c_out, -1)
    grad_b = gy.sum(axis=1)

    cols = _im2col(x, kh, kw)
    grad_w = (gy @ cols.T).reshape(w.shape)

    grad_cols = (w.reshape(c_out, -1).T @ gy).reshape(c_in, kh, kw, h, wd)
    grad_xp = np.zeros((c_in, h + 2 * ph, wd + 2 * pw))
    for dy in range(kh):
        for dx in range(kw):
            grad_xp[:, dy : dy + h, dx : dx + wd] += grad_cols[:, dy, dx]
    grad_x = grad_xp[:, ph : ph + h, pw : pw + wd]
    return np.ascontiguousarray(grad_x), grad_w, grad_b


def place_points(h, w, ys, xs, n_placed, count, min_dist, occ, draws, since_accept, attempts_cap):
    """Consume random pixel draws, accepting those at least min_dist from
    every previously accepted point.

    ys/xs (int64, length >= count) and occ (uint8 h-by-w occupancy grid) are
    mutated in place; n_placed and since_accept carry state across draw
    chunks.  Returns (n_placed, since_accept, status) with status 1 = done,
    0 = draws exhausted, -1 = attempts_cap consecutive rejections.
    """
    if n_placed >= count:
        return n_placed, since_accept, 1
    # neighbors with max(|dy|,|dx|) >= min_dist cannot be closer than min_dist
    rw = max(0, math.ceil(min_dist) - 1)
    r2 = min_dist * min_dist
    for idx in draws:
        y, x = divmod(int(idx), w)
        ok = not occ[y, x]
        if ok and rw > 0:
            y0, y1 = max(0, y - rw), min(h, y + rw + 1)
            x0, x1 = max(0, x - rw), min(w, x + rw + 1)
            for yy in range(y0, y1):
                row = occ[yy]
                dy2 = (yy - y) * (yy - y)
                for xx in range(x0, x1):
                    if row[xx] and dy2 + (xx - x) * (xx - x) < r2:
                        ok = False
                        break
                if not ok:
                    break
        if ok:
            occ[y, x] = 1
            ys[n_placed] = y
            xs[n_placed] = x
            n_placed += 1
            since_accept = 0
            if n_placed == count:
                return n_placed, since_accept, 1
        else:
            since_accept += 1
            if since_accept >= attempts_cap:
                return n_placed, since_accept, -1
    return n_placed, since_accept, 0
