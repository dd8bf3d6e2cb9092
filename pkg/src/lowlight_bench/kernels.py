"""Inner loops with a numba path and a pure-numpy path.

Every kernel comes in two flavours, ``<name>_numba`` and ``<name>_numpy``,
that compute the same quantity. The public name (no suffix) is bound to one
of them according to :data:`lowlight_bench._accel.BACKEND`.
"""

import numpy as np

from ._accel import USE_NUMBA, njit

# A window whose summed squared deviation is below this (per pixel) counts as
# textureless.
ZERO_VARIANCE_EPS = 1e-9


# --------------------------------------------------------------------------
# Radix-2 FFT along the last axis of a 2-D complex array
# --------------------------------------------------------------------------


def _check_pow2(n):
    if n < 1 or n & (n - 1):
        raise ValueError(f"FFT length must be a power of two, got {n}")


def _bit_reverse_indices(n):
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


@njit
def _fft_rows_kernel(x, rev, inverse):
    rows, n = x.shape
    out = np.empty_like(x)
    for r in range(rows):
        for k in range(n):
            out[r, rev[k]] = x[r, k]
    sign = 1.0 if inverse else -1.0
    size = 2
    while size <= n:
        half = size // 2
        step = sign * 2.0 * np.pi / size
        for r in range(rows):
            for start in range(0, n, size):
                for k in range(half):
                    ang = step * k
                    tw = complex(np.cos(ang), np.sin(ang))
                    a = out[r, start + k]
                    b = out[r, start + k + half] * tw
                    out[r, start + k] = a + b
                    out[r, start + k + half] = a - b
        size *= 2
    if inverse:
        out /= n
    return out


def fft_rows_numba(x, inverse=False):
    x = np.ascontiguousarray(x, dtype=np.complex128)
    _check_pow2(x.shape[-1])
    return _fft_rows_kernel(x, _bit_reverse_indices(x.shape[-1]), inverse)


def fft_rows_numpy(x, inverse=False):
    x = np.asarray(x, dtype=np.complex128)
    n = x.shape[-1]
    _check_pow2(n)
    out = x[:, _bit_reverse_indices(n)].copy()
    sign = 1.0 if inverse else -1.0
    rows = x.shape[0]
    size = 2
    while size <= n:
        half = size // 2
        tw = np.exp(sign * 2j * np.pi * np.arange(half) / size)
        blocks = out.reshape(rows, n // size, size)
        a = blocks[:, :, :half].copy()
        b = blocks[:, :, half:] * tw
        blocks[:, :, :half] = a + b
        blocks[:, :, half:] = a - b
        size *= 2
    if inverse:
        out /= n
    return out


# --------------------------------------------------------------------------
# Exhaustive zero-normalized cross-correlation search
# --------------------------------------------------------------------------


@njit
def _ncc_scores_kernel(image, tmpl_c, tmpl_ss, x0, y0, radius, eps):
    H, W = image.shape
    th, tw = tmpl_c.shape
    n = th * tw
    side = 2 * radius + 1
    scores = np.full((side, side), -np.inf)
    for iy in range(side):
        y = y0 + iy - radius
        if y < 0 or y + th > H:
            continue
        for ix in range(side):
            x = x0 + ix - radius
            if x < 0 or x + tw > W:
                continue
            s = 0.0
            for r in range(th):
                for c in range(tw):
                    s += image[y + r, x + c]
            mu = s / n
            num = 0.0
            ss = 0.0
            for r in range(th):
                for c in range(tw):
                    d = image[y + r, x + c] - mu
                    num += d * tmpl_c[r, c]
                    ss += d * d
            if ss <= eps * n or tmpl_ss <= eps * n:
                scores[iy, ix] = -1.0
            else:
                scores[iy, ix] = num / np.sqrt(ss * tmpl_ss)
    return scores


def _center_template(template):
    t = np.asarray(template, dtype=np.float64)
    tc = t - t.mean()
    return np.ascontiguousarray(tc), float((tc * tc).sum())


def ncc_scores_numba(image, template, x0, y0, radius):
    """ZNCC of ``template`` against every window whose top-left corner lies
    within ``radius`` of ``(x0, y0)``.

    Returns a ``(2r+1, 2r+1)`` array indexed ``[dy + r, dx + r]``. Windows that
    do not fit inside the image score ``-inf``; textureless windows score -1.
    """
    tc, tss = _center_template(template)
    img = np.ascontiguousarray(image, dtype=np.float64)
    return _ncc_scores_kernel(img, tc, tss, int(x0), int(y0), int(radius), ZERO_VARIANCE_EPS)


def ncc_scores_numpy(image, template, x0, y0, radius):
    tc, tss = _center_template(template)
    img = np.asarray(image, dtype=np.float64)
    H, W = img.shape
    th, tw = tc.shape
    n = th * tw
    side = 2 * radius + 1
    scores = np.full((side, side), -np.inf)
    xs = np.arange(x0 - radius, x0 + radius + 1)
    xmask = (xs >= 0) & (xs + tw <= W)
    if not xmask.any():
        return scores
    xa, xb = xs[xmask][0], xs[xmask][-1]
    for iy in range(side):
        y = y0 + iy - radius
        if y < 0 or y + th > H:
            continue
        strip = img[y:y + th, xa:xb + tw]
        win = np.lib.stride_tricks.sliding_window_view(strip, (th, tw))[0]
        mu = win.mean(axis=(1, 2))
        d = win - mu[:, None, None]
        num = (d * tc).sum(axis=(1, 2))
        ss = (d * d).sum(axis=(1, 2))
        row = np.where(
            (ss <= ZERO_VARIANCE_EPS * n) | (tss <= ZERO_VARIANCE_EPS * n),
            -1.0,
            num / np.sqrt(np.maximum(ss * tss, 1e-300)),
        )
        scores[iy, np.nonzero(xmask)[0]] = row
    return scores


# --------------------------------------------------------------------------
# Box blur with edge replication
# --------------------------------------------------------------------------


@njit
def _box_blur_kernel(img, radius):
    H, W = img.shape
    k = 2 * radius + 1
    tmp = np.empty_like(img)
    for y in range(H):
        for x in range(W):
            s = 0.0
            for d in range(-radius, radius + 1):
                xx = min(max(x + d, 0), W - 1)
                s += img[y, xx]
            tmp[y, x] = s / k
    out = np.empty_like(img)
    for y in range(H):
        for x in range(W):
            s = 0.0
            for d in range(-radius, radius + 1):
                yy = min(max(y + d, 0), H - 1)
                s += tmp[yy, x]
            out[y, x] = s / k
    return out


def box_blur_numba(img, radius):
    img = np.ascontiguousarray(img, dtype=np.float64)
    if radius <= 0:
        return img.copy()
    return _box_blur_kernel(img, int(radius))


def box_blur_numpy(img, radius):
    img = np.asarray(img, dtype=np.float64)
    if radius <= 0:
        return img.copy()
    k = 2 * radius + 1
    p = np.pad(img, ((0, 0), (radius, radius)), mode="edge")
    win = np.lib.stride_tricks.sliding_window_view(p, k, axis=1)
    tmp = win.sum(axis=-1) / k
    p = np.pad(tmp, ((radius, radius), (0, 0)), mode="edge")
    win = np.lib.stride_tricks.sliding_window_view(p, k, axis=0)
    return win.sum(axis=-1) / k


# --------------------------------------------------------------------------
# Bilinear resampling of an axis-aligned region
# --------------------------------------------------------------------------


@njit
def _bilinear_crop_kernel(img, cx, cy, src_w, src_h, out_w, out_h):
    H, W = img.shape
    out = np.empty((out_h, out_w))
    sx = src_w / out_w
    sy = src_h / out_h
    for r in range(out_h):
        py = cy - src_h / 2.0 + (r + 0.5) * sy - 0.5
        py = min(max(py, 0.0), H - 1.0)
        y0 = int(np.floor(py))
        y1 = min(y0 + 1, H - 1)
        fy = py - y0
        for c in range(out_w):
            px = cx - src_w / 2.0 + (c + 0.5) * sx - 0.5
            px = min(max(px, 0.0), W - 1.0)
            x0 = int(np.floor(px))
            x1 = min(x0 + 1, W - 1)
            fx = px - x0
            top = img[y0, x0] * (1.0 - fx) + img[y0, x1] * fx
            bot = img[y1, x0] * (1.0 - fx) + img[y1, x1] * fx
            out[r, c] = top * (1.0 - fy) + bot * fy
    return out


def bilinear_crop_numba(img, cx, cy, src_w, src_h, out_w, out_h):
    """Resample the ``src_w x src_h`` region centred at ``(cx, cy)`` (pixel
    units, top-left origin, pixel centres at ``i + 0.5``) to ``out_h x out_w``.
    Samples outside the image clamp to the border.
    """
    img = np.ascontiguousarray(img, dtype=np.float64)
    return _bilinear_crop_kernel(img, float(cx), float(cy), float(src_w), float(src_h),
                                 int(out_w), int(out_h))


def bilinear_crop_numpy(img, cx, cy, src_w, src_h, out_w, out_h):
    img = np.asarray(img, dtype=np.float64)
    H, W = img.shape
    px = cx - src_w / 2.0 + (np.arange(out_w) + 0.5) * (src_w / out_w) - 0.5
    py = cy - src_h / 2.0 + (np.arange(out_h) + 0.5) * (src_h / out_h) - 0.5
    px = np.clip(px, 0.0, W - 1.0)
    py = np.clip(py, 0.0, H - 1.0)
    x0 = np.floor(px).astype(np.int64)
    y0 = np.floor(py).astype(np.int64)
    x1 = np.minimum(x0 + 1, W - 1)
    y1 = np.minimum(y0 + 1, H - 1)
    fx = (px - x0)[None, :]
    fy = (py - y0)[:, None]
    top = img[y0][:, x0] * (1.0 - fx) + img[y0][:, x1] * fx
    bot = img[y1][:, x0] * (1.0 - fx) + img[y1][:, x1] * fx
    return top * (1.0 - fy) + bot * fy


if USE_NUMBA:
    fft_rows = fft_rows_numba
    ncc_scores = ncc_scores_numba
    box_blur = box_blur_numba
    bilinear_crop = bilinear_crop_numba
else:
    fft_rows = fft_rows_numpy
    ncc_scores = ncc_scores_numpy
    box_blur = box_blur_numpy
    bilinear_crop = bilinear_crop_numpy
