"""Euler-Maruyama discretization with projection reflection.

Each step proposes y + (alpha - gamma*y) dt + sigma sqrt(dt) xi and projects
onto the allowed interval; the clipped amount is charged to the idle (lower)
or loss (upper) regulator.  Contact writes the barrier value itself, so the
discrete complementarity of ReflectedPath holds with exact equality.

Randomness: path i of a batch uses its own counter-based Philox stream keyed
by ``path_seed(master_seed, i)``, a splitmix64 derivation.  Batches are
therefore a pure function of (config, n_paths, master_seed): the same paths
come out regardless of execution order, chunking, or worker count, and a
single-path simulation with the derived seed reproduces batch member i
bitwise.  The projection scheme's boundary functionals carry a weak O(sqrt
dt) bias; see the README for measurements.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Sequence, TextIO

import numpy as np

from .errors import OutOfSupport, UnstableStep
from .model import BoundarySpec, OUParams, ReflectedPath

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(state: int) -> int:
    """One output of the splitmix64 mixing function (public domain constants)."""
    z = (state + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def path_seed(master_seed: int, index: int) -> int:
    """64-bit stream key for batch member ``index``: splitmix64 applied to
    the mixed master seed advanced by the path index."""
    base = splitmix64(int(master_seed) & _MASK64)
    return splitmix64((base + int(index) * _GOLDEN) & _MASK64)


@dataclass(frozen=True)
class SimConfig:
    """One simulation setup.  Immutable and picklable."""

    params: OUParams
    boundary: BoundarySpec
    x0: float
    dt: float
    horizon: float
    seed: int = 0
    # batches keep only terminal summaries unless this is set
    record_full_path: bool = False

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise UnstableStep(f"dt must be positive and finite, got {self.dt!r}")
        if not (self.horizon > self.dt):
            raise UnstableStep(
                f"horizon {self.horizon!r} must exceed dt {self.dt!r}")
        guard = 0.1 / self.params.gamma
        if self.dt > guard:
            raise UnstableStep(
                f"dt={self.dt!r} violates the stability guard dt <= 0.1/gamma"
                f" = {guard!r}")
        if not self.boundary.contains(self.x0):
            raise OutOfSupport(self.x0, "initial state must respect the barriers")

    @property
    def n_steps(self) -> int:
        # snap to the grid when horizon/dt is an exact multiple up to rounding
        return int(math.floor(self.horizon / self.dt + 1e-6))


def reflect_step(y: float, increment: float,
                 boundary: BoundarySpec) -> tuple[float, float, float]:
    """Project one proposed move; returns (y_next, dL, dU).

    At most one of dL, dU is positive, and a positive push lands the state
    exactly on its barrier.
    """
    proposed = y + increment
    d_l = d_u = 0.0
    if boundary.lower is not None and proposed < boundary.lower:
        d_l = boundary.lower - proposed
        proposed = boundary.lower
    elif boundary.upper is not None and proposed > boundary.upper:
        d_u = proposed - boundary.upper
        proposed = boundary.upper
    return proposed, d_l, d_u


def _advance(cfg: SimConfig, streams, *, record: bool = False,
             capture: Optional[np.ndarray] = None, block: int = 2048):
    """Core stepping loop over a vector of paths in lockstep.

    streams: one np.random.Generator per path.  Returns (y, l, u) terminal
    vectors, optionally full per-step records (single path only) and rows
    captured at requested grid indices.
    """
    n_paths = len(streams)
    p = cfg.params
    lo, hi = cfg.boundary.lower, cfg.boundary.upper
    width = (hi - lo) if (lo is not None and hi is not None) else None
    n = cfg.n_steps
    dt = cfg.dt
    sq = p.sigma * math.sqrt(dt)
    a, g = p.alpha, p.gamma

    y = np.full(n_paths, float(cfg.x0))
    l = np.zeros(n_paths)
    u = np.zeros(n_paths)

    rec_y = rec_l = rec_u = None
    if record:
        rec_y = np.empty((n + 1, n_paths))
        rec_l = np.empty((n + 1, n_paths))
        rec_u = np.empty((n + 1, n_paths))
        rec_y[0] = y
        rec_l[0] = 0.0
        rec_u[0] = 0.0

    cap_rows: dict[int, tuple] = {}
    cap_list = np.unique(capture) if capture is not None else np.empty(0, int)
    if 0 in cap_list:
        cap_rows[0] = (y.copy(), l.copy(), u.copy())
    cap_ptr = int(np.searchsorted(cap_list, 1))

    block = max(1, min(block, (4_000_000 // max(n_paths, 1)) or 1))
    scalar = n_paths == 1  # same IEEE arithmetic, far less per-step overhead
    if scalar:
        ys, ls, us = float(y[0]), 0.0, 0.0
    k = 0
    while k < n:
        b = min(block, n - k)
        if scalar:
            xi = streams[0].standard_normal(b)
            for i in range(b):
                prop = ys + (a - g * ys) * dt + sq * xi[i]
                dls = dus = 0.0
                if lo is not None and prop < lo:
                    dls = lo - prop
                    ls += dls
                    prop = lo
                elif hi is not None and prop > hi:
                    dus = prop - hi
                    us += dus
                    prop = hi
                if width is not None and (dls > width or dus > width):
                    raise UnstableStep(
                        "a proposed step crossed both barriers; decrease dt")
                ys = prop
                step = k + i + 1
                if record:
                    rec_y[step] = ys
                    rec_l[step] = ls
                    rec_u[step] = us
                if cap_ptr < len(cap_list) and cap_list[cap_ptr] == step:
                    cap_rows[step] = (np.array([ys]), np.array([ls]),
                                      np.array([us]))
                    cap_ptr += 1
            k += b
            continue
        xi = np.stack([s.standard_normal(b) for s in streams], axis=1)
        for i in range(b):
            prop = y + (a - g * y) * dt + sq * xi[i]
            if lo is not None:
                dl = np.maximum(lo - prop, 0.0)
                l += dl
                np.maximum(prop, lo, out=prop)
            if hi is not None:
                du = np.maximum(prop - hi, 0.0)
                u += du
                np.minimum(prop, hi, out=prop)
            if width is not None and (dl.max() > width or du.max() > width):
                raise UnstableStep(
                    "a proposed step crossed both barriers; decrease dt")
            y = prop
            step = k + i + 1
            if record:
                rec_y[step] = y
                rec_l[step] = l
                rec_u[step] = u
            if cap_ptr < len(cap_list) and cap_list[cap_ptr] == step:
                cap_rows[step] = (y.copy(), l.copy(), u.copy())
                cap_ptr += 1
        k += b
    if scalar:
        y = np.array([ys])
        l = np.array([ls])
        u = np.array([us])
    return y, l, u, (rec_y, rec_l, rec_u), cap_rows


def simulate_path(cfg: SimConfig) -> ReflectedPath:
    """One path, recorded on the full grid; deterministic in (cfg, cfg.seed)."""
    stream = np.random.Generator(np.random.Philox(key=cfg.seed & _MASK64))
    _, _, _, (ry, rl, ru), _ = _advance(cfg, [stream], record=True)
    n = cfg.n_steps
    times = np.arange(n + 1) * cfg.dt
    return ReflectedPath(dt=cfg.dt, times=times, y=ry[:, 0], l_cum=rl[:, 0],
                         u_cum=ru[:, 0], seed=cfg.seed, boundary=cfg.boundary)


@dataclass(frozen=True)
class BatchResult:
    """Terminal summaries (and optional sampled rows) for a batch of paths."""

    y_t: np.ndarray            # terminal state per path
    l_t: np.ndarray            # terminal idle total per path
    u_t: np.ndarray            # terminal loss total per path
    seeds: np.ndarray          # per-path stream keys
    sample_times: Optional[np.ndarray] = None
    y_at: Optional[np.ndarray] = None   # (n_paths, n_times), nearest-grid state
    l_at: Optional[np.ndarray] = None   # (n_paths, n_times), linear in t
    u_at: Optional[np.ndarray] = None
    paths: Optional[tuple] = None       # full ReflectedPath per member on request

    def __len__(self) -> int:
        return len(self.y_t)


def _sample_indices(cfg: SimConfig, sample_times: np.ndarray):
    """Bracketing grid indices and weights for evaluation at absolute times:
    regulators interpolate linearly between k0 and k1, the state is read at
    the nearest grid point."""
    if sample_times is None or not len(sample_times):
        return None
    pos = np.asarray(sample_times, dtype=float) / cfg.dt
    k0 = np.floor(pos + 1e-9).astype(int)
    frac = np.clip(pos - k0, 0.0, 1.0)
    k0 = np.minimum(k0, cfg.n_steps)
    k1 = np.minimum(k0 + 1, cfg.n_steps)
    nearest = np.where(frac < 0.5, k0, k1)
    return k0, k1, frac, nearest


def _run_chunk(cfg: SimConfig, master_seed: int, indices: Sequence[int],
               sample_times: Optional[np.ndarray]):
    streams = [np.random.Generator(np.random.Philox(key=path_seed(master_seed, i)))
               for i in indices]
    capture = None
    interp = _sample_indices(cfg, sample_times)
    if interp is not None:
        k0, k1, _, nearest = interp
        capture = np.unique(np.concatenate([k0, k1, nearest]))
    y, l, u, _, rows = _advance(cfg, streams, capture=capture)
    out = {"y_t": y, "l_t": l, "u_t": u}
    if interp is not None:
        k0, k1, frac, nearest = interp
        n_times = len(k0)
        y_at = np.empty((len(indices), n_times))
        l_at = np.empty((len(indices), n_times))
        u_at = np.empty((len(indices), n_times))
        for j in range(n_times):
            y_at[:, j] = rows[nearest[j]][0]
            l_at[:, j] = (1.0 - frac[j]) * rows[k0[j]][1] + frac[j] * rows[k1[j]][1]
            u_at[:, j] = (1.0 - frac[j]) * rows[k0[j]][2] + frac[j] * rows[k1[j]][2]
        out.update(y_at=y_at, l_at=l_at, u_at=u_at)
    return out


def batch_simulate(cfg: SimConfig, n_paths: int, master_seed: int,
                   *, sample_times: Optional[Sequence[float]] = None,
                   workers: int = 1) -> BatchResult:
    """n_paths independent paths; terminal (Y_T, L_T, U_T) per path.

    ``sample_times`` additionally records the state (nearest grid point) and
    the regulators (linear interpolation) at the given absolute times.
    Results are a pure function of (cfg, n_paths, master_seed) for any
    ``workers``.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    st = None
    idx = None
    if sample_times is not None:
        st = np.asarray(sorted(sample_times), dtype=float)
        if len(st) and (st[0] < 0 or st[-1] > cfg.n_steps * cfg.dt * (1 + 1e-12)):
            raise ValueError("sample_times must lie within [0, horizon]")
        idx = _sample_indices(cfg, st)
    seeds = np.array([path_seed(master_seed, i) for i in range(n_paths)],
                     dtype=np.uint64)

    if cfg.record_full_path:
        if (cfg.n_steps + 1) * n_paths > 20_000_000:
            raise ValueError(
                "record_full_path would hold >2e7 grid points in memory; "
                "drop the flag or reduce n_paths/horizon")
        paths = tuple(simulate_path(member_config(cfg, master_seed, i))
                      for i in range(n_paths))
        out = dict(
            y_t=np.array([p.y[-1] for p in paths]),
            l_t=np.array([p.l_cum[-1] for p in paths]),
            u_t=np.array([p.u_cum[-1] for p in paths]),
        )
        if idx is not None:
            k0, k1, frac, nearest = idx
            out["y_at"] = np.stack([p.y[nearest] for p in paths])
            out["l_at"] = np.stack([(1.0 - frac) * p.l_cum[k0]
                                    + frac * p.l_cum[k1] for p in paths])
            out["u_at"] = np.stack([(1.0 - frac) * p.u_cum[k0]
                                    + frac * p.u_cum[k1] for p in paths])
        return BatchResult(seeds=seeds, sample_times=st, paths=paths, **out)

    chunks = np.array_split(np.arange(n_paths), max(1, min(workers, n_paths)))
    chunks = [c for c in chunks if len(c)]
    if len(chunks) == 1:
        parts = [_run_chunk(cfg, master_seed, chunks[0], st)]
    else:
        with ProcessPoolExecutor(max_workers=len(chunks)) as pool:
            parts = list(pool.map(_run_chunk, [cfg] * len(chunks),
                                  [master_seed] * len(chunks), chunks,
                                  [st] * len(chunks)))
    cat = {k: np.concatenate([p[k] for p in parts])
           for k in parts[0] if parts[0][k] is not None}
    return BatchResult(
        y_t=cat["y_t"], l_t=cat["l_t"], u_t=cat["u_t"], seeds=seeds,
        sample_times=st,
        y_at=cat.get("y_at"), l_at=cat.get("l_at"), u_at=cat.get("u_at"),
    )


def member_config(cfg: SimConfig, master_seed: int, index: int) -> SimConfig:
    """Config whose simulate_path reproduces batch member ``index`` bitwise."""
    return replace(cfg, seed=path_seed(master_seed, index))


def write_summary_csv(batch: BatchResult, out: TextIO) -> None:
    """Terminal summaries as CSV rows ``path_index,y_T,l_T,u_T``."""
    out.write("path_index,y_T,l_T,u_T\n")
    for i, (y, l, u) in enumerate(zip(batch.y_t, batch.l_t, batch.u_t)):
        out.write(f"{i},{y:.12g},{l:.12g},{u:.12g}\n")
