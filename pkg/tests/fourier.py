"""Random Fourier loops and a finite-difference functional gradient.

The discrete functional is S[u] = h Σ_k F(u, Du, D²u, ...)(x_k) with spectral
derivatives D on a periodic grid.  Perturbing one grid value at a time gives
the gradient that the Euler operator should reproduce pointwise.
"""
from __future__ import annotations

import numpy as np

from loopalg.symexpr import evaluate, max_jet_order
from loopalg.varcalc import euler

GRID = 256
MODES = 3


def random_loop(rng: np.random.Generator, n: int, grid: int = GRID):
    """Band-limited loops u^i(x) with exact derivatives; returns (x, spectra)."""
    x = np.arange(grid) * (2 * np.pi / grid)
    spectra = []
    for _ in range(n):
        a0 = rng.uniform(0.5, 1.5)
        a = rng.normal(scale=0.3, size=MODES)
        b = rng.normal(scale=0.3, size=MODES)
        spectra.append((a0, a, b))
    return x, spectra


def loop_jets(x, spectra, max_s: int) -> dict:
    out = {}
    m = np.arange(1, MODES + 1)[:, None]
    for i, (a0, a, b) in enumerate(spectra, start=1):
        for s in range(max_s + 1):
            # d^s/dx^s of cos(mx), sin(mx)
            c = np.cos(m * x + s * np.pi / 2) * m ** s
            d = np.sin(m * x + s * np.pi / 2) * m ** s
            v = (a[:, None] * c + b[:, None] * d).sum(axis=0)
            out[(i, s)] = v + (a0 if s == 0 else 0.0)
    return out


def _spectral_derivs(v, max_s: int) -> list:
    N = v.size
    k = np.fft.fftfreq(N, d=1.0 / N)
    V = np.fft.fft(v)
    out = [v]
    for s in range(1, max_s + 1):
        ks = (1j * k) ** s
        if s % 2:
            ks[N // 2] = 0.0
        out.append(np.real(np.fft.ifft(ks * V)))
    return out


def discrete_action(density, fields: list, max_s: int) -> float:
    jets = {}
    for i, v in enumerate(fields, start=1):
        for s, d in enumerate(_spectral_derivs(v, max_s)):
            jets[(i, s)] = d
    h = 2 * np.pi / fields[0].size
    return float(h * np.sum(evaluate(density, jets)))


def fd_gradient(density, fields: list, step: float = 1e-5) -> np.ndarray:
    max_s = max_jet_order(density)
    h = 2 * np.pi / fields[0].size
    grads = []
    for i in range(len(fields)):
        g = np.empty(fields[i].size)
        for k in range(fields[i].size):
            plus = [f.copy() for f in fields]
            minus = [f.copy() for f in fields]
            plus[i][k] += step
            minus[i][k] -= step
            g[k] = (discrete_action(density, plus, max_s) - discrete_action(density, minus, max_s)) / (2 * step * h)
        grads.append(g)
    return np.array(grads)


def euler_gradient(F, x, spectra) -> np.ndarray:
    n = len(spectra)
    comps = [euler(F, i) for i in range(1, n + 1)]
    top = max([max_jet_order(c) for c in comps] + [0])
    jets = loop_jets(x, spectra, top)
    return np.array([np.broadcast_to(evaluate(c, jets), x.shape) for c in comps])


def relative_error(F, rng: np.random.Generator) -> float:
    n = F.n
    x, spectra = random_loop(rng, n)
    jets = loop_jets(x, spectra, 0)
    fields = [jets[(i, 0)] for i in range(1, n + 1)]
    fd = fd_gradient(F.density, fields)
    ex = euler_gradient(F, x, spectra)
    return float(np.linalg.norm(fd - ex) / np.linalg.norm(ex))


__all__ = ["random_loop", "loop_jets", "fd_gradient", "euler_gradient", "relative_error",
           "discrete_action"]
