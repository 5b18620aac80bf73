"""Exact-in-law path simulation for finite-activity triplets.

Paths are produced in fixed-size blocks.  A block is a padded matrix of
records, one row per path.  Record k moves the path from t[k-1] to t[k]: first
a continuous increment dC over dt = t[k] - t[k-1], then (on jump records) a
jump dJ at t[k].  Grid records come from the uniform grid; every jump time is
a record of its own, so jumps are never smeared across steps.

Each block draws from its own Philox stream keyed by (seed, block index).  The
block size is fixed, so the sample of path i depends on (seed, i) only and
not on how many worker threads evaluate the blocks.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .characteristics import Triplet
from .errors import InfiniteActivity, InvalidConfig, InvalidPath, NonpositiveWealth
from .tilt import TiltField, tilted_triplet

BLOCK = 4096


@dataclass(frozen=True)
class SimConfig:
    n_paths: int = 100_000
    n_steps: int = 64
    seed: int = 0
    insert_jumps: bool = True
    workers: int = 1

    def __post_init__(self):
        if not (isinstance(self.n_paths, (int, np.integer)) and self.n_paths >= 1):
            raise InvalidConfig(f"n_paths must be a positive integer, got {self.n_paths!r}")
        if not (isinstance(self.n_steps, (int, np.integer)) and self.n_steps >= 1):
            raise InvalidConfig(f"n_steps must be a positive integer, got {self.n_steps!r}")
        if not (0 <= int(self.seed) < 2 ** 64):
            raise InvalidConfig("seed must fit in 64 unsigned bits")
        if int(self.workers) < 1:
            raise InvalidConfig("workers must be >= 1")


def block_rng(seed, block, stream=0):
    key = np.array([seed, (int(stream) << 32) + block], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass
class PathBlock:
    """Padded records of a group of paths (rows)."""

    start: int  # global index of row 0
    T: float
    c: float
    t: np.ndarray  # (B, M) record end times
    dt: np.ndarray
    dW: np.ndarray
    dC: np.ndarray  # continuous increment of S, drift and compensator included
    dJ: np.ndarray  # jump size, 0 on grid records
    jump: np.ndarray  # bool, record carries a jump
    valid: np.ndarray  # bool, record exists
    S0: float = 0.0

    @property
    def n(self):
        return self.t.shape[0]

    def row(self, i) -> "PathBlock":
        sl = slice(i, i + 1)
        return PathBlock(self.start + i, self.T, self.c, self.t[sl], self.dt[sl], self.dW[sl],
                         self.dC[sl], self.dJ[sl], self.jump[sl], self.valid[sl], self.S0)

    def times(self):
        """Grid of one path including t = 0 (row 0), padding stripped."""
        v = self.valid[0]
        return np.concatenate([[0.0], self.t[0, v]])

    @property
    def n_jumps(self):
        return self.jump.sum(axis=1)

    def S(self):
        """(B, M + 1) values of S at 0 and after each record."""
        inc = np.cumsum(self.dC + self.dJ, axis=1)
        return self.S0 + np.concatenate([np.zeros((self.n, 1)), inc], axis=1)

    def S_T(self):
        return self.S0 + (self.dC + self.dJ).sum(axis=1)

    def S_left(self):
        """Left limits S(t-) at the record times."""
        S = self.S()
        return S[:, 1:] - self.dJ

    def W(self):
        return np.concatenate([np.zeros((self.n, 1)), np.cumsum(self.dW, axis=1)], axis=1)


def _log_factors(block: PathBlock, p, mode):
    """Per-record log growth factors of E(int p dS); p scalar or (k,) -> (B, M[, k])."""
    p = np.asarray(p, dtype=float)
    dC, dJ, dt = block.dC, block.dJ, block.dt
    if p.ndim:
        dC, dJ, dt = dC[..., None], dJ[..., None], dt[..., None]
    jf = 1.0 + p * dJ
    if np.any(jf <= 0.0):
        raise NonpositiveWealth("a jump sends the wealth to zero or below (1 + p dS <= 0)")
    if mode == "exact":
        cont = p * dC - 0.5 * p * p * block.c * dt
    elif mode == "euler":
        cf = 1.0 + p * dC
        if np.any(cf <= 0.0):
            raise NonpositiveWealth("a continuous step sends the wealth to zero or below; refine the grid")
        cont = np.log(cf)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return cont + np.log(jf)


def stoch_exp(block: PathBlock, p, mode="euler", terminal=False):
    """E(int p dS) along the records, X(0) = 1.

    mode 'euler' multiplies (1 + p dC)(1 + p dJ) per record; 'exact' uses
    exp(p dC - p**2 c dt / 2)(1 + p dJ), the exact Doleans-Dade factor.
    Returns (B, M + 1) values, or (B,) terminal values (with a trailing k axis
    for vector p).
    """
    lf = _log_factors(block, p, mode)
    if terminal:
        return np.exp(lf.sum(axis=1))
    cum = np.cumsum(lf, axis=1)
    zero = np.zeros((block.n, 1) + cum.shape[2:])
    return np.exp(np.concatenate([zero, cum], axis=1))


def density_path(block: PathBlock, Y: TiltField, terminal=False):
    """L = product of Y over realized jumps (valid under mass preservation)."""
    logy = np.zeros_like(block.dJ)
    if Y is not None and not Y.is_identity and np.any(block.jump):
        logy[block.jump] = Y.log_evaluate(block.dJ[block.jump])
    if terminal:
        return np.exp(logy.sum(axis=1))
    return np.exp(np.concatenate([np.zeros((block.n, 1)), np.cumsum(logy, axis=1)], axis=1))


def discrete_exp(increments, terminal=False):
    """Discrete stochastic exponential: running product of (1 + dU) along axis 1."""
    f = 1.0 + np.asarray(increments, dtype=float)
    if terminal:
        return np.prod(f, axis=1)
    return np.concatenate([np.ones((f.shape[0], 1)), np.cumprod(f, axis=1)], axis=1)


def increments(block: PathBlock, p):
    """Sub-increments of int p dS: continuous part then jump part, interleaved (B, 2M)."""
    out = np.empty((block.n, 2 * block.dC.shape[1]))
    out[:, 0::2] = p * block.dC
    out[:, 1::2] = p * block.dJ
    return out


def ratio_increments(block: PathBlock, p, p_tilde):
    """Sub-increments of R^{p|p~} so that E(R) = E(int p dS) / E(int p~ dS) in Euler form.

    R = int (p - p~) dS - (p - p~) p~ d[S^c] - sum (p - p~) p~ dS**2 / (1 + p~ dS),
    with the discrete squared continuous step playing the role of d[S^c].
    """
    d = p - p_tilde
    out = np.empty((block.n, 2 * block.dC.shape[1]))
    for k, x in ((0, block.dC), (1, block.dJ)):
        out[:, k::2] = d * x - d * p_tilde * x * x / (1.0 + p_tilde * x)
    return out


def make_path(t: Triplet, n_steps, jumps=(), dW=None, S0=0.0):
    """A single deterministic path on the triplet's law, for checks and examples.

    ``jumps`` is a sequence of (time, size); ``dW`` the Brownian increments of
    the grid and jump records in time order (zeros if omitted).
    """
    m1 = _compensator(t)
    times = list(np.linspace(0.0, t.T, n_steps + 1)[1:])
    rec = sorted([(x, False, 0.0) for x in times] + [(float(s), True, float(z)) for s, z in jumps],
                 key=lambda r: (r[0], r[1]))
    tt = np.array([r[0] for r in rec])
    jump = np.array([r[1] for r in rec])
    dJ = np.array([r[2] for r in rec])
    dt = np.diff(np.concatenate([[0.0], tt]))
    if dW is None:
        dW = np.zeros_like(dt)
    dW = np.asarray(dW, dtype=float)
    dC = (t.a - m1) * dt + math.sqrt(t.c) * dW
    one = lambda v: np.asarray(v)[None, :]
    return PathBlock(0, t.T, t.c, one(tt), one(dt), one(dW), one(dC), one(dJ), one(jump),
                     np.ones((1, tt.size), dtype=bool), S0)


def _compensator(t: Triplet):
    if t.kappa.is_null:
        return 0.0
    return float(t.kappa.integrate(lambda x: x))


class PathCollection:
    """Lazily generated paths of one law; blocks are regenerated on demand."""

    def __init__(self, t: Triplet, cfg: SimConfig, law: TiltField | None = None, stream: int = 0):
        self.base = t
        self.stream = stream
        self.cfg = cfg
        self.law = law
        self.triplet = t if law is None or law.is_identity else tilted_triplet(t, law)
        lam = self.triplet.kappa.total_mass() if not self.triplet.kappa.is_null else 0.0
        if math.isinf(lam):
            raise InfiniteActivity("simulation needs a finite jump measure (kappa[R] < inf)")
        self.intensity = float(lam)
        self.m1 = _compensator(self.triplet)
        self.n_blocks = -(-cfg.n_paths // BLOCK)

    @property
    def n_paths(self):
        return self.cfg.n_paths

    def block(self, j) -> PathBlock:
        cfg, tr = self.cfg, self.triplet
        keep = min(BLOCK, cfg.n_paths - j * BLOCK)
        # always draw a full block so a path depends on (seed, index) only, not on n_paths
        B = BLOCK
        rng = block_rng(int(cfg.seed), j, self.stream)
        T, n = tr.T, cfg.n_steps
        N = rng.poisson(self.intensity * T, size=B) if self.intensity > 0 else np.zeros(B, int)
        tot = int(N.sum())
        jt = rng.random(tot) * T
        js = tr.kappa.sample(tot, rng) if tot else np.empty(0)
        if not cfg.insert_jumps and tot:
            h = T / n
            jt = np.minimum(np.ceil(jt / h) * h, T)
        maxN = int(N.max()) if B else 0
        M = n + maxN
        grid = np.linspace(0.0, T, n + 1)[1:]
        times = np.full((B, M), np.inf)
        times[:, :n] = grid
        sizes = np.zeros((B, M))
        isj = np.zeros((B, M), dtype=bool)
        if tot:
            rows = np.repeat(np.arange(B), N)
            first = np.concatenate([[0], np.cumsum(N)[:-1]])
            cols = n + np.arange(tot) - np.repeat(first, N)
            times[rows, cols] = jt
            sizes[rows, cols] = js
            isj[rows, cols] = True
        # grid records sort before a jump at the same instant
        order = _row_order(times, isj)
        r = np.arange(B)[:, None]
        times, sizes, isj = times[r, order], sizes[r, order], isj[r, order]
        valid = np.isfinite(times)
        prev = np.concatenate([np.zeros((B, 1)), times[:, :-1]], axis=1)
        with np.errstate(invalid="ignore"):
            dt = np.where(valid, times - prev, 0.0)
        dW = rng.standard_normal((B, M)) * np.sqrt(dt)
        dC = (tr.a - self.m1) * dt + math.sqrt(tr.c) * dW
        r = slice(0, keep)
        M = n + int(N[:keep].max()) if keep else n
        c = slice(0, M)
        return PathBlock(j * BLOCK, T, tr.c, np.where(valid, times, T)[r, c], dt[r, c], dW[r, c], dC[r, c],
                         np.where(valid, sizes, 0.0)[r, c], (isj & valid)[r, c], valid[r, c])

    def map_blocks(self, fn, workers=None):
        """[fn(block) for each block], in block order, optionally threaded."""
        w = int(workers or self.cfg.workers)
        if w <= 1 or self.n_blocks == 1:
            return [fn(self.block(j)) for j in range(self.n_blocks)]
        with ThreadPoolExecutor(max_workers=w) as ex:
            return list(ex.map(lambda j: fn(self.block(j)), range(self.n_blocks)))

    def collect(self, fn, workers=None):
        """Concatenate per-block arrays along the path axis."""
        return np.concatenate(self.map_blocks(fn, workers), axis=0)

    def path(self, i) -> PathBlock:
        if not 0 <= i < self.n_paths:
            raise InvalidPath(f"path index {i} out of range")
        return self.block(i // BLOCK).row(i % BLOCK)

    def first_paths(self, k):
        out = []
        for j in range(self.n_blocks):
            b = self.block(j)
            for i in range(b.n):
                if len(out) == k:
                    return out
                out.append(b.row(i))
        return out


def _row_order(times, isj):
    # stable sort on time with grid records first at ties
    key = np.where(isj, np.nextafter(times, np.inf), times)
    return np.argsort(key, axis=1, kind="stable")


def simulate_paths(t: Triplet, cfg: SimConfig, law: TiltField | None = None,
                   stream: int = 0) -> PathCollection:
    return PathCollection(t, cfg, law, stream)
