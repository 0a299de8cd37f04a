"""FFT-backed 2-D cross-correlation with zero same-padding.

Serves the forward map and both adjoints of a stride-1 correlation layer:

    forward   y[o,p,q]    = sum_{i,u,v} w[o,i,u,v] * x[i, p+u-r, q+v-r]
    d/dx      dx[i,m,n]   = sum_{o,u,v} w[o,i,u,v] * dy[o, m+r-u, n+r-v]
    d/dw      dw[o,i,u,v] = sum_{p,q} dy[o,p,q] * x[i, p+u-r, q+v-r]

with r = (f - 1) / 2 and out-of-range samples reading as zero. The input
and kernel transforms computed in the forward pass are cached so the
backward pass only transforms the output gradient.

Small images use one zero-padded spectral grid of fast length
>= extent + f - 1 per axis (which rules out circular aliasing). Large
images are split into tiles on a fixed small grid: overlap-save for the
forward correlation and the weight gradient (input tiles carry an
r-pixel halo), overlap-add for the input gradient. That keeps every
kernel transform on the small grid, where it is cheap, instead of on an
image-sized one.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft

_WORKERS = os.cpu_count() or 1
_TILE_GRIDS = (128, 144, 160, 192, 256)


@dataclass
class CorrCache:
    xf: np.ndarray   # full: (Cin, S0, S1r); tiled: (Cin, nb0, nb1, G, Gr)
    wf: np.ndarray   # full: (Cout, Cin, S0, S1r); tiled on the tile grid
    x_shape: tuple[int, int, int]
    w_shape: tuple[int, int, int, int]
    fft_shape: tuple[int, int]
    tiled: bool


def _plan(h: int, w: int, f: int, cin: int, cout: int) -> tuple[bool, int]:
    """Pick full-grid or a tile size by an FFT work estimate.

    Channel transforms scale with tile count, kernel transforms do not;
    both are weighed so layers with many channel pairs prefer small
    kernel grids (tiles) and small images prefer one full grid.
    """

    def units(g0: int, g1: int, count: float) -> float:
        return count * g0 * g1 * np.log2(g0 * g1)

    s0 = sfft.next_fast_len(h + f - 1, real=True)
    s1 = sfft.next_fast_len(w + f - 1, real=True)
    per_image = 2 * (cin + cout)   # forward in/out + backward dy/dx
    per_kernel = 2 * cin * cout    # kernel transforms + weight-grad inverses
    best_cost = units(s0, s1, per_image + per_kernel)
    best = (False, 0)
    for g in _TILE_GRIDS:
        b = g - (f - 1)
        if b < 16:
            continue
        nb = (-(-h // b)) * (-(-w // b))
        cost = units(g, g, nb * per_image + per_kernel)
        if cost < best_cost:
            best_cost = cost
            best = (True, g)
    return best


def _halo_tiles(x: np.ndarray, g: int, b: int, r: int,
                nb0: int, nb1: int) -> np.ndarray:
    """Overlapping g x g tiles with stride b; tile k starts at k*b - r."""
    c, h, w = x.shape
    pad = np.zeros((c, nb0 * b + 2 * r, nb1 * b + 2 * r), dtype=x.dtype)
    pad[:, r:r + h, r:r + w] = x
    view = np.lib.stride_tricks.sliding_window_view(pad, (g, g), axis=(1, 2))
    return view[:, ::b, ::b]


def _plain_tiles(x: np.ndarray, b: int, nb0: int, nb1: int) -> np.ndarray:
    """Non-overlapping b x b tiles (zero-padded at the far edges)."""
    c, h, w = x.shape
    pad = np.zeros((c, nb0 * b, nb1 * b), dtype=x.dtype)
    pad[:, :h, :w] = x
    return pad.reshape(c, nb0, b, nb1, b).transpose(0, 1, 3, 2, 4)


def _channel_mix(xf: np.ndarray, kf: np.ndarray) -> np.ndarray:
    """out[o, tiles...] = sum_i xf[i, tiles...] * kf[o, i]; the kernel
    spectra broadcast over the tile axes. Plain loops beat einsum here
    because einsum would expand the kernel across every tile."""
    cin = xf.shape[0]
    cout = kf.shape[0]
    out = np.empty((cout,) + xf.shape[1:], dtype=xf.dtype)
    for o in range(cout):
        acc = xf[0] * kf[o, 0]
        for i in range(1, cin):
            acc += xf[i] * kf[o, i]
        out[o] = acc
    return out


def corr2d(x: np.ndarray, w: np.ndarray) -> tuple[np.ndarray, CorrCache]:
    """Multi-channel same-padded cross-correlation.

    x: (Cin, H, W) real; w: (Cout, Cin, f, f) with f odd.
    Returns y: (Cout, H, W) and the transform cache for the adjoints.
    """
    cin, h, wd = x.shape
    cout, cin_w, f, f2 = w.shape
    if cin_w != cin or f != f2 or f % 2 == 0:
        raise ValueError(f"kernel shape {w.shape} incompatible with input {x.shape}")
    r = (f - 1) // 2

    tiled, g = _plan(h, wd, f, cin, cout)
    if tiled:
        b = g - (f - 1)
        nb0 = -(-h // b)
        nb1 = -(-wd // b)
        tiles = _halo_tiles(x, g, b, r, nb0, nb1)
        xf = sfft.rfft2(tiles, (g, g), axes=(-2, -1), workers=_WORKERS)
        wf = sfft.rfft2(w, (g, g), axes=(-2, -1), workers=_WORKERS)
        yf = _channel_mix(xf, np.conj(wf))
        ytiles = sfft.irfft2(yf, (g, g), axes=(-2, -1), workers=_WORKERS)
        y = (
            ytiles[..., :b, :b]
            .transpose(0, 1, 3, 2, 4)
            .reshape(cout, nb0 * b, nb1 * b)[:, :h, :wd]
        )
        return np.ascontiguousarray(y), CorrCache(xf, wf, x.shape, w.shape, (g, g), True)

    shape = (sfft.next_fast_len(h + f - 1, real=True),
             sfft.next_fast_len(wd + f - 1, real=True))
    xf = sfft.rfft2(x, shape, axes=(-2, -1), workers=_WORKERS)
    wf = sfft.rfft2(w, shape, axes=(-2, -1), workers=_WORKERS)
    yf = np.einsum("iab,oiab->oab", xf, np.conj(wf))
    yfull = sfft.irfft2(yf, shape, axes=(-2, -1), workers=_WORKERS)
    # y[p,q] = yfull[(p - r) % S0, (q - r) % S1]
    y = np.roll(yfull, (r, r), axis=(-2, -1))[:, :h, :wd]
    return np.ascontiguousarray(y), CorrCache(xf, wf, x.shape, w.shape, shape, False)


def corr2d_grads(dy: np.ndarray, cache: CorrCache,
                 need_dx: bool = True) -> tuple[np.ndarray, np.ndarray | None]:
    """Gradients wrt kernel and (optionally) input, given d(loss)/d(output)."""
    if cache.tiled:
        return _grads_tiled(dy, cache, need_dx)
    cout, cin, f, _ = cache.w_shape
    _, h, wd = cache.x_shape
    r = (f - 1) // 2
    shape = cache.fft_shape
    dyf = sfft.rfft2(dy, shape, axes=(-2, -1), workers=_WORKERS)

    cross = np.einsum("iab,oab->oiab", cache.xf, np.conj(dyf))
    corr_full = sfft.irfft2(cross, shape, axes=(-2, -1), workers=_WORKERS)
    lag = np.arange(f) - r
    dw = corr_full[:, :, (lag % shape[0])[:, None], (lag % shape[1])[None, :]]

    dx = None
    if need_dx:
        dxf = np.einsum("oab,oiab->iab", dyf, cache.wf)
        dxfull = sfft.irfft2(dxf, shape, axes=(-2, -1), workers=_WORKERS)
        dx = np.ascontiguousarray(dxfull[:, r:r + h, r:r + wd])
    return np.ascontiguousarray(dw), dx


def _grads_tiled(dy: np.ndarray, cache: CorrCache,
                 need_dx: bool) -> tuple[np.ndarray, np.ndarray | None]:
    cout, cin, f, _ = cache.w_shape
    _, h, wd = cache.x_shape
    r = (f - 1) // 2
    g = cache.fft_shape[0]
    b = g - (f - 1)
    _, nb0, nb1 = cache.xf.shape[:3]

    dytiles = _plain_tiles(dy, b, nb0, nb1)
    dyf = sfft.rfft2(dytiles, (g, g), axes=(-2, -1), workers=_WORKERS)

    # dw[u,v]: cross-spectra of halo'd input tiles against plain output
    # tiles, summed over tiles before the one small inverse transform.
    cross = np.einsum("ibcak,obcak->oiak", cache.xf, np.conj(dyf))
    corr_full = sfft.irfft2(cross, (g, g), axes=(-2, -1), workers=_WORKERS)
    dw = corr_full[:, :, :f, :f]

    dx = None
    if need_dx:
        dxf = _channel_mix(dyf, cache.wf.transpose(1, 0, 2, 3))
        dxtiles = sfft.irfft2(dxf, (g, g), axes=(-2, -1), workers=_WORKERS)
        acc = np.zeros((cin, nb0 * b + 2 * r, nb1 * b + 2 * r), dtype=dxtiles.dtype)
        for i0 in range(nb0):
            for i1 in range(nb1):
                acc[:, i0 * b:i0 * b + g, i1 * b:i1 * b + g] += dxtiles[:, i0, i1]
        dx = np.ascontiguousarray(acc[:, r:r + h, r:r + wd])
    return np.ascontiguousarray(dw), dx
