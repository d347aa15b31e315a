"""Batch indicator kernels: the hot loop, JIT-compiled with a numpy fallback.

One indicator sample is: pick a time slot uniformly from the state's class,
draw every user's deviation, sum demand, test power-slot membership.  At
verification scale this loop runs 1e6..1e9 times, so it is compiled with
numba (``@njit(nogil=True)``, so worker threads generate batches in
parallel).  A pure-numpy vectorized fallback implements the identical
arithmetic for environments without a working numba.

Backend selection: the ``PPSV_BACKEND`` environment variable (``numba``,
``numpy``, or ``auto``; default auto) picks the implementation at import
time; :func:`set_backend` switches at runtime (used by the benchmark and
the cross-backend tests).

Determinism contract: for the same (key, start, count) and scenario tables,
both backends return byte-identical bit vectors, which also replay the
scalar reference samplers in :mod:`ppsv.model` exactly.  Everything in the
draw path is integer arithmetic plus exactly-rounded float ops; the one
transcendental (log, inside the normal quantile) hits the same libm from
both backends.  Tests pin golden vectors and cross-check all three paths.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _normal
from .model import (
    DiscreteDeviation,
    Scenario,
    TruncatedGaussianDeviation,
    UniformDeviation,
)

_U64 = np.uint64
_GOLDEN = _U64(0x9E3779B97F4A7C15)
_MIX1 = _U64(0xBF58476D1CE4E5B9)
_MIX2 = _U64(0x94D049BB133111EB)
_S30 = _U64(30)
_S27 = _U64(27)
_S31 = _U64(31)
_S11 = _U64(11)
_ONE = _U64(1)
_DSCALE = 1.0 / 9007199254740992.0  # 2**-53

_A = _normal._A
_B = _normal._B
_C = _normal._C
_D = _normal._D
_P_LOW = _normal._P_LOW
_P_HIGH = _normal._P_HIGH
_P_MIN = _normal._P_MIN
_P_MAX = _normal._P_MAX

KIND_DISCRETE = 0
KIND_UNIFORM = 1
KIND_TGAUSS = 2


def _finalize_u64(z):
    # splitmix64 finalizer; works on uint64 scalars (numba) and arrays (numpy)
    z = (z ^ (z >> _S30)) * _MIX1
    z = (z ^ (z >> _S27)) * _MIX2
    return z ^ (z >> _S31)


# ---------------------------------------------------------------------------
# Scenario -> flat arrays the kernels can consume.

@dataclass
class KernelTables:
    n_users: int
    n_time_slots: int
    epp: np.ndarray          # (U, T) float64
    kind: np.ndarray         # (U, T) int8
    par: np.ndarray          # (U, T, 4) float64; meaning depends on kind
    disc_off: np.ndarray     # (U, T) int64 into the flat discrete arrays
    disc_len: np.ndarray     # (U, T) int64
    disc_cdf: np.ndarray     # flat float64, cumulative probabilities
    disc_val: np.ndarray     # flat float64, support points
    max_disc_len: int
    breakpoints: np.ndarray  # (k+1,) float64
    state_labels: tuple[str, ...]
    state_index: dict[str, int]
    tslots: dict[str, np.ndarray]  # state label -> int64 time-slot indices

    @property
    def n_power_slots(self) -> int:
        return len(self.breakpoints) - 1

    def slot_bounds(self, slot: int) -> tuple[float, float, bool]:
        if not 0 <= slot < self.n_power_slots:
            raise IndexError(f"slot index {slot} out of range 0..{self.n_power_slots - 1}")
        return (float(self.breakpoints[slot]), float(self.breakpoints[slot + 1]),
                slot == self.n_power_slots - 1)


@lru_cache(maxsize=32)
def compile_tables(scenario: Scenario) -> KernelTables:
    """Flatten a scenario into the arrays the batch kernels read.

    The discrete CDFs are accumulated with the same running sum the scalar
    sampler uses, and the truncated-Gaussian bounds are precomputed with the
    same expressions, so table-driven draws equal reference draws exactly.
    """
    n_users = len(scenario.users)
    n_t = scenario.n_time_slots
    epp = np.empty((n_users, n_t), dtype=np.float64)
    kind = np.zeros((n_users, n_t), dtype=np.int8)
    par = np.zeros((n_users, n_t, 4), dtype=np.float64)
    disc_off = np.zeros((n_users, n_t), dtype=np.int64)
    disc_len = np.zeros((n_users, n_t), dtype=np.int64)
    cdf_flat: list[float] = []
    val_flat: list[float] = []
    seen: dict[DiscreteDeviation, tuple[int, int]] = {}
    max_len = 1
    for ui, user in enumerate(scenario.users):
        epp[ui, :] = user.epp
        for t in range(n_t):
            model = user.deviation[t]
            if isinstance(model, DiscreteDeviation):
                kind[ui, t] = KIND_DISCRETE
                if model in seen:
                    off, length = seen[model]
                else:
                    off = len(cdf_flat)
                    length = len(model.support)
                    acc = 0.0
                    for p in model.probs:
                        acc += p
                        cdf_flat.append(acc)
                    val_flat.extend(model.support)
                    seen[model] = (off, length)
                disc_off[ui, t] = off
                disc_len[ui, t] = length
                max_len = max(max_len, length)
            elif isinstance(model, UniformDeviation):
                kind[ui, t] = KIND_UNIFORM
                par[ui, t, 0] = model.lo
                par[ui, t, 1] = model.hi
            elif isinstance(model, TruncatedGaussianDeviation):
                kind[ui, t] = KIND_TGAUSS
                a = (model.lo - model.mean) / model.stddev
                b = (model.hi - model.mean) / model.stddev
                cdf_lo = _normal.norm_cdf(a)
                span = _normal.norm_cdf(b) - cdf_lo
                par[ui, t, 0] = model.mean
                par[ui, t, 1] = model.stddev
                par[ui, t, 2] = cdf_lo
                par[ui, t, 3] = span
            else:
                raise TypeError(f"unknown deviation model {type(model).__name__}")
    labels = scenario.substation.states
    tslots = {
        v: np.asarray(scenario.substation.slots_for(v), dtype=np.int64)
        for v in labels
    }
    return KernelTables(
        n_users=n_users,
        n_time_slots=n_t,
        epp=epp,
        kind=kind,
        par=par,
        disc_off=disc_off,
        disc_len=disc_len,
        disc_cdf=np.asarray(cdf_flat, dtype=np.float64),
        disc_val=np.asarray(val_flat, dtype=np.float64),
        max_disc_len=max_len,
        breakpoints=np.asarray(scenario.slots.breakpoints, dtype=np.float64),
        state_labels=labels,
        state_index={v: i for i, v in enumerate(labels)},
        tslots=tslots,
    )


# ---------------------------------------------------------------------------
# numba backend.  The kernel source is a plain python function; it is
# compiled on first use and cached on disk.

def _indicator_batch_loop(key, start, count, tslots, epp, kind, par,
                          disc_off, disc_len, disc_cdf, disc_val,
                          slot_lo, slot_hi, closed, out):
    n_users = epp.shape[0]
    dps = _U64(n_users + 1)
    n_tv = len(tslots)
    for i in range(count):
        base = (_U64(start) + _U64(i)) * dps
        z = _finalize_scalar(key + (base + _ONE) * _GOLDEN)
        ut = (z >> _S11) * _DSCALE
        ti = int(ut * n_tv)
        if ti > n_tv - 1:
            ti = n_tv - 1
        t = tslots[ti]
        acc = 0.0
        for u in range(n_users):
            z = _finalize_scalar(key + (base + _U64(2 + u)) * _GOLDEN)
            uu = (z >> _S11) * _DSCALE
            k = kind[u, t]
            if k == KIND_DISCRETE:
                off = disc_off[u, t]
                last = disc_len[u, t] - 1
                j = 0
                while j < last and uu >= disc_cdf[off + j]:
                    j += 1
                dev = disc_val[off + j]
            elif k == KIND_UNIFORM:
                lo = par[u, t, 0]
                hi = par[u, t, 1]
                dev = lo + uu * (hi - lo)
            else:
                mean = par[u, t, 0]
                sd = par[u, t, 1]
                cdf_lo = par[u, t, 2]
                span = par[u, t, 3]
                dev = mean + sd * _norm_quantile_jit(cdf_lo + uu * span)
            acc += epp[u, t] + dev
        if acc >= slot_lo and (acc < slot_hi or (closed and acc <= slot_hi)):
            out[i] = 1
        else:
            out[i] = 0
    return out


# Aliases the jitted kernel resolves at its own compile time.  _build_numba
# rebinds them to dispatcher objects first; the loop is only ever executed
# through numba, the vectorized path keeps the plain _finalize_u64.
_finalize_scalar = _finalize_u64
_norm_quantile_jit = _normal.norm_quantile
_batch_numba = None


def _build_numba():
    global _norm_quantile_jit, _finalize_scalar, _batch_numba
    if _batch_numba is not None:
        return
    import numba

    _norm_quantile_jit = numba.njit(cache=True)(_normal.norm_quantile)
    _finalize_scalar = numba.njit(cache=True)(_finalize_u64)
    _batch_numba = numba.njit(cache=True, nogil=True)(_indicator_batch_loop)


# ---------------------------------------------------------------------------
# numpy fallback: same arithmetic, vectorized over the batch.

def _norm_quantile_vec(p):
    # term-for-term mirror of _normal.norm_quantile on arrays
    p = np.minimum(np.maximum(p, _P_MIN), _P_MAX)
    out = np.empty_like(p)
    lo_m = p < _P_LOW
    hi_m = p > _P_HIGH
    mid = ~(lo_m | hi_m)
    if lo_m.any():
        q = np.sqrt(-2.0 * np.log(p[lo_m]))
        out[lo_m] = (
            ((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]
        ) / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)
    if hi_m.any():
        q = np.sqrt(-2.0 * np.log(1.0 - p[hi_m]))
        out[hi_m] = -(
            ((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]
        ) / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)
    if mid.any():
        q = p[mid] - 0.5
        r = q * q
        out[mid] = (
            ((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]
        ) * q / (
            ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
        )
    return out


def _indicator_batch_numpy(key, start, count, tslots, epp, kind, par,
                           disc_off, disc_len, disc_cdf, disc_val,
                           max_disc_len, slot_lo, slot_hi, closed, out):
    n_users = epp.shape[0]
    dps = _U64(n_users + 1)
    base = (np.arange(count, dtype=np.uint64) + _U64(start)) * dps
    n_tv = len(tslots)
    ut = (_finalize_u64(key + (base + _ONE) * _GOLDEN) >> _S11) * _DSCALE
    ti = np.minimum((ut * n_tv).astype(np.int64), n_tv - 1)
    t = tslots[ti]
    acc = np.zeros(count, dtype=np.float64)
    for u in range(n_users):
        uu = (_finalize_u64(key + (base + _U64(2 + u)) * _GOLDEN) >> _S11) * _DSCALE
        ku = kind[u][t]
        dev = np.empty(count, dtype=np.float64)
        sel = np.nonzero(ku == KIND_DISCRETE)[0]
        if len(sel):
            off = disc_off[u][t[sel]]
            last = disc_len[u][t[sel]] - 1
            usub = uu[sel]
            j = np.zeros(len(sel), dtype=np.int64)
            moving = np.ones(len(sel), dtype=bool)
            for _ in range(max_disc_len):
                moving = moving & (j < last) & (usub >= disc_cdf[off + j])
                if not moving.any():
                    break
                j += moving
            dev[sel] = disc_val[off + j]
        sel = np.nonzero(ku == KIND_UNIFORM)[0]
        if len(sel):
            lo = par[u, t[sel], 0]
            hi = par[u, t[sel], 1]
            dev[sel] = lo + uu[sel] * (hi - lo)
        sel = np.nonzero(ku == KIND_TGAUSS)[0]
        if len(sel):
            mean = par[u, t[sel], 0]
            sd = par[u, t[sel], 1]
            cdf_lo = par[u, t[sel], 2]
            span = par[u, t[sel], 3]
            dev[sel] = mean + sd * _norm_quantile_vec(cdf_lo + uu[sel] * span)
        acc += epp[u][t] + dev
    if closed:
        bits = (acc >= slot_lo) & (acc <= slot_hi)
    else:
        bits = (acc >= slot_lo) & (acc < slot_hi)
    out[:] = bits
    return out


# ---------------------------------------------------------------------------
# Backend selection and dispatch.

def _numba_available() -> bool:
    import importlib.util

    return importlib.util.find_spec("numba") is not None


def _resolve(name: str) -> str:
    if name in ("", "auto"):
        return "numba" if _numba_available() else "numpy"
    if name == "numba":
        if not _numba_available():
            raise RuntimeError("PPSV_BACKEND=numba requested but numba is not importable")
        return "numba"
    if name == "numpy":
        return "numpy"
    raise ValueError(f"unknown backend {name!r} (use 'numba', 'numpy', or 'auto')")


_active = _resolve(os.environ.get("PPSV_BACKEND", "auto").strip().lower())


def active_backend() -> str:
    return _active


def set_backend(name: str) -> str:
    """Switch the kernel implementation ('numba', 'numpy', or 'auto')."""
    global _active
    _active = _resolve(name.strip().lower())
    return _active


def indicator_batch(tables: KernelTables, key: int, start: int, count: int,
                    state: str, slot: int) -> np.ndarray:
    """Indicator bits for samples [start, start+count) of stream ``key``.

    Sample i of a (state, slot) stream uses counters
    ``i*(1+n_users) .. i*(1+n_users)+n_users``; the result is a pure
    function of (key, i) per element, so any batch split yields the same
    concatenated stream.
    """
    if state not in tables.tslots:
        raise ValueError(f"unknown substation state {state!r}")
    if count < 0:
        raise ValueError("count must be >= 0")
    tv = tables.tslots[state]
    slot_lo, slot_hi, closed = tables.slot_bounds(slot)
    out = np.empty(count, dtype=np.uint8)
    if count == 0:
        return out
    if _active == "numba":
        _build_numba()
        _batch_numba(_U64(key), start, count, tv, tables.epp, tables.kind,
                     tables.par, tables.disc_off, tables.disc_len,
                     tables.disc_cdf, tables.disc_val,
                     slot_lo, slot_hi, closed, out)
    else:
        _indicator_batch_numpy(_U64(key), start, count, tv, tables.epp,
                               tables.kind, tables.par, tables.disc_off,
                               tables.disc_len, tables.disc_cdf,
                               tables.disc_val, tables.max_disc_len,
                               slot_lo, slot_hi, closed, out)
    return out


def warmup() -> None:
    """Force JIT compilation (no-op on the numpy backend)."""
    if _active == "numba":
        _build_numba()
