"""Texture renderers and the deterministic lattice noise they share.

All randomness comes from a counter-based 64-bit hash (splitmix64 finalizer)
of lattice coordinates and the tag seed, so a pixel's value depends only on
(tag, size). No stateful RNG is involved anywhere: re-rendering any tag
reproduces the image bit for bit, and rendering order cannot matter.
"""

from __future__ import annotations

import math

import numpy as np

_U64 = np.uint64
_GOLD = _U64(0x9E3779B97F4A7C15)
_MIX1 = _U64(0xBF58476D1CE4E5B9)
_MIX2 = _U64(0x94D049BB133111EB)
_TO_UNIT = float(2.0**-53)

# 16 unit gradient directions at multiples of 2*pi/16.
_GRAD_X = np.array([math.cos(2.0 * math.pi * k / 16.0) for k in range(16)])
_GRAD_Y = np.array([math.sin(2.0 * math.pi * k / 16.0) for k in range(16)])

# Tight bound on 2-D gradient noise with unit gradients.
_PERLIN_NORM = math.sqrt(2.0) / 2.0


def _splitmix64(x: np.ndarray) -> np.ndarray:
    # uint64 arithmetic is modular by design; silence numpy's 0-d overflow warning
    with np.errstate(over="ignore"):
        x = x + _GOLD
        x = (x ^ (x >> _U64(30))) * _MIX1
        x = (x ^ (x >> _U64(27))) * _MIX2
        return x ^ (x >> _U64(31))


def channel_key(seed: int, salt: int = 0) -> np.uint64:
    """Derive an independent hash stream for (seed, salt)."""
    base = np.asarray((seed + salt * 0x632BE59BD9B4E019) % (1 << 64), dtype=np.uint64)
    return _splitmix64(base)


def _hash_lattice(ix: np.ndarray, iy: np.ndarray, key: np.uint64) -> np.ndarray:
    a = _splitmix64(ix.astype(np.int64).astype(np.uint64) + key)
    return _splitmix64(a + iy.astype(np.int64).astype(np.uint64))


def _unit(h: np.ndarray) -> np.ndarray:
    return (h >> _U64(11)).astype(np.float64) * _TO_UNIT


def _fade(t: np.ndarray) -> np.ndarray:
    return t * t * t * (t * (t * 6.0 - 15.0) + 10.0)


def value_noise(x, y, key) -> np.ndarray:
    """Smoothly interpolated lattice noise in [0, 1]."""
    x0 = np.floor(x)
    y0 = np.floor(y)
    fx = x - x0
    fy = y - y0
    ix = x0.astype(np.int64)
    iy = y0.astype(np.int64)
    v00 = _unit(_hash_lattice(ix, iy, key))
    v10 = _unit(_hash_lattice(ix + 1, iy, key))
    v01 = _unit(_hash_lattice(ix, iy + 1, key))
    v11 = _unit(_hash_lattice(ix + 1, iy + 1, key))
    u = _fade(fx)
    v = _fade(fy)
    top = v00 + u * (v10 - v00)
    bot = v01 + u * (v11 - v01)
    return top + v * (bot - top)


def perlin_noise(x, y, key) -> np.ndarray:
    """Gradient noise, normalized to roughly [-1, 1]."""
    x0 = np.floor(x)
    y0 = np.floor(y)
    fx = x - x0
    fy = y - y0
    ix = x0.astype(np.int64)
    iy = y0.astype(np.int64)

    def corner(dx, dy):
        h = _hash_lattice(ix + dx, iy + dy, key) & _U64(15)
        idx = h.astype(np.int64)
        return _GRAD_X[idx] * (fx - dx) + _GRAD_Y[idx] * (fy - dy)

    n00 = corner(0, 0)
    n10 = corner(1, 0)
    n01 = corner(0, 1)
    n11 = corner(1, 1)
    u = _fade(fx)
    v = _fade(fy)
    top = n00 + u * (n10 - n00)
    bot = n01 + u * (n11 - n01)
    return (top + v * (bot - top)) / _PERLIN_NORM


def fbm(x, y, cell, octaves, seed, noise="perlin", persistence=0.5, lacunarity=2.0):
    """Octave sum of lattice noise, normalized by total amplitude.

    Output is in [-1, 1] for "perlin" and [0, 1] for "value".
    """
    octaves = max(1, int(round(octaves)))
    total = np.zeros_like(np.asarray(x, dtype=float))
    amp = 1.0
    amp_sum = 0.0
    freq = 1.0 / float(cell)
    for o in range(octaves):
        k = channel_key(int(seed), o + 1)
        if noise == "value":
            layer = value_noise(x * freq, y * freq, k)
        else:
            layer = perlin_noise(x * freq, y * freq, k)
        total += amp * layer
        amp_sum += amp
        amp *= persistence
        freq *= lacunarity
    return total / amp_sum


def _pixel_grid(width, height):
    y, x = np.mgrid[0:height, 0:width]
    return x.astype(float), y.astype(float)


def _smooth01(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


def _worley(x, y, cell, jitter, seed):
    """F1 and F2 distances (in cell units) to jittered lattice points."""
    gx = x / cell
    gy = y / cell
    cx = np.floor(gx).astype(np.int64)
    cy = np.floor(gy).astype(np.int64)
    k1 = channel_key(seed, 101)
    k2 = channel_key(seed, 202)
    d2 = []
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            nx = cx + dx
            ny = cy + dy
            u1 = _unit(_hash_lattice(nx, ny, k1))
            u2 = _unit(_hash_lattice(nx, ny, k2))
            px = nx + 0.5 + jitter * (u1 - 0.5)
            py = ny + 0.5 + jitter * (u2 - 0.5)
            d2.append((gx - px) ** 2 + (gy - py) ** 2)
    d2 = np.stack(d2, axis=-1)
    d2.partition(1, axis=-1)
    f1 = np.sqrt(d2[..., 0])
    f2 = np.sqrt(d2[..., 1])
    return f1, f2


def render_checkerboard(params, seed, width, height):
    period, contrast = params
    x, y = _pixel_grid(width, height)
    parity = (np.floor(x / period) + np.floor(y / period)) % 2.0
    return 0.5 + (0.5 - parity) * contrast


def render_stripes(params, seed, width, height):
    wavelength, angle = params
    x, y = _pixel_grid(width, height)
    t = x * math.cos(angle) + y * math.sin(angle)
    return 0.5 + 0.5 * np.sin(2.0 * math.pi * t / wavelength)


def render_polka_dots(params, seed, width, height):
    spacing, radius_frac = params
    x, y = _pixel_grid(width, height)
    cx = np.round(x / spacing) * spacing
    cy = np.round(y / spacing) * spacing
    d = np.hypot(x - cx, y - cy)
    r = radius_frac * spacing
    inside = _smooth01((r + 0.75 - d) / 1.5)
    return 0.9 - 0.75 * inside


def render_honeycomb(params, seed, width, height):
    cell, wall_frac = params
    x, y = _pixel_grid(width, height)
    row_h = cell * math.sqrt(3.0) / 2.0
    row = np.floor(y / row_h + 0.5).astype(np.int64)
    d2 = []
    for dr in (-1, 0, 1):
        r = row + dr
        off = np.where(r % 2 == 0, 0.0, cell / 2.0)
        col = np.floor((x - off) / cell + 0.5).astype(np.int64)
        for dc in (-1, 0, 1):
            c = col + dc
            px = c * cell + off
            py = r * row_h
            d2.append((x - px) ** 2 + (y - py) ** 2)
    d2 = np.stack(d2, axis=-1)
    d2.partition(1, axis=-1)
    m = (np.sqrt(d2[..., 1]) - np.sqrt(d2[..., 0])) / cell
    return 0.15 + 0.75 * _smooth01((m - wall_frac) / 0.08)


def render_weave(params, seed, width, height):
    period, gap_frac = params
    x, y = _pixel_grid(width, height)
    u = x / period - np.floor(x / period)
    v = y / period - np.floor(y / period)
    tw = (1.0 - gap_frac) / 2.0
    du = np.abs(u - 0.5)
    dv = np.abs(v - 0.5)
    vert = du <= tw
    horiz = dv <= tw
    parity = (np.floor(x / period) + np.floor(y / period)) % 2.0
    vert_on_top = parity == 0.0
    shade_v = 0.9 - 0.45 * (du / tw) ** 2
    shade_h = 0.75 - 0.4 * (dv / tw) ** 2
    out = np.full_like(x, 0.08)
    out = np.where(horiz, shade_h, out)
    out = np.where(vert, shade_v, out)
    both = vert & horiz
    out = np.where(both & ~vert_on_top, shade_h, out)
    return out


def render_value_fbm(params, seed, width, height):
    scale, octaves = params
    x, y = _pixel_grid(width, height)
    v = fbm(x, y, scale, octaves, seed, noise="value")
    return np.clip(0.5 + (v - 0.5) * 1.8, 0.0, 1.0)


def render_perlin_fbm(params, seed, width, height):
    scale, octaves = params
    x, y = _pixel_grid(width, height)
    v = fbm(x, y, scale, octaves, seed, noise="perlin")
    return np.clip(0.5 + 0.5 * v, 0.0, 1.0)


def render_marble(params, seed, width, height):
    scale, turb_power = params
    x, y = _pixel_grid(width, height)
    t = fbm(x, y, scale, 4, seed, noise="perlin")
    phase = 2.0 * math.pi * (x * 0.8 + y * 0.35) / scale + turb_power * t
    return 0.5 + 0.5 * np.sin(phase)


def render_wood_rings(params, seed, width, height):
    ring_period, distort = params
    x, y = _pixel_grid(width, height)
    cx = (width - 1) / 2.0
    cy = (height - 1) / 2.0
    r = np.hypot(x - cx, y - cy)
    n = fbm(x, y, 32.0, 3, seed, noise="perlin")
    phase = 2.0 * math.pi * (r + distort * ring_period * 0.35 * n) / ring_period
    return 0.5 + 0.5 * np.sin(phase)


def render_worley_cellular(params, seed, width, height):
    density, jitter = params
    x, y = _pixel_grid(width, height)
    cell = 64.0 / density
    f1, _ = _worley(x, y, cell, jitter, seed)
    return np.clip(1.0 - 0.8 * f1, 0.0, 1.0)


def render_worley_edges(params, seed, width, height):
    density, sharpness = params
    x, y = _pixel_grid(width, height)
    cell = 64.0 / density
    f1, f2 = _worley(x, y, cell, 1.0, seed)
    return np.clip(0.9 * sharpness * (f2 - f1), 0.0, 1.0)


def render_spiral(params, seed, width, height):
    arms, twist = params
    x, y = _pixel_grid(width, height)
    cx = (width - 1) / 2.0
    cy = (height - 1) / 2.0
    theta = np.arctan2(y - cy, x - cx)
    r = np.hypot(x - cx, y - cy)
    k = max(1, int(round(arms)))
    return 0.5 + 0.5 * np.sin(k * theta + twist * 2.0 * math.pi * r)


RENDERERS = {
    "checkerboard": render_checkerboard,
    "stripes": render_stripes,
    "polka_dots": render_polka_dots,
    "honeycomb": render_honeycomb,
    "weave": render_weave,
    "value_fbm": render_value_fbm,
    "perlin_fbm": render_perlin_fbm,
    "marble": render_marble,
    "wood_rings": render_wood_rings,
    "worley_cellular": render_worley_cellular,
    "worley_edges": render_worley_edges,
    "spiral": render_spiral,
}
