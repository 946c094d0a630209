"""Numeric inner loops: batched charge-balance bisection and FTCS diffusion.

Two implementations are provided for each kernel: a pure-numpy version and
a numba ``@njit`` version. Selection happens at import time: numba is used
when importable unless the environment variable ``PHKIT_DISABLE_NUMBA`` is
set to a non-empty value. ``benchmarks/bench_kernels.py`` compares the two.

Both paths compute identical float64 arithmetic in the same order per cell,
so results are reproducible across the switch.
"""

import os

import numpy as np

KW = 1e-14
LOG10 = np.log(10.0)

# species-kind codes used by the packed composition arrays
KIND_INERT = 0
KIND_WEAK_ACID = 1
KIND_STRONG_ACID = 2
KIND_STRONG_BASE = 3
KIND_SALT = 4

MAX_PROTONS = 3


def _charge_balance_py(h, conc, kind, zfix, nprot, kaprod):
    """Charge-balance residual f(h) for one cell. numpy-scalar friendly.

    conc: (S,) analytical concentrations; kind/zfix/nprot: (S,) species meta;
    kaprod: (S, MAX_PROTONS+1) cumulative Ka products (kaprod[s,0] == 1).
    """
    f = h - KW / h
    for s in range(conc.shape[0]):
        c = conc[s]
        if c == 0.0:
            continue
        k = kind[s]
        if k == KIND_STRONG_ACID:
            f -= c
        elif k == KIND_STRONG_BASE:
            f += c * zfix[s]
        elif k == KIND_WEAK_ACID or k == KIND_SALT:
            n = nprot[s]
            denom = 0.0
            num = 0.0
            for j in range(n + 1):
                t = kaprod[s, j] * h ** (n - j)
                denom += t
                num += j * t
            # average anion charge = protons removed minus fully
            # protonated core charge (zero for the shipped species)
            f -= c * (num / denom)
            if k == KIND_SALT:
                f += c * zfix[s]
    return f


def _solve_ph_batch_py(conc, kind, zfix, nprot, kaprod, tol, max_iter):
    """Bisection on log10(h) in [-14, 0] for every cell, numpy path.

    conc: (S, N) per-species per-cell concentrations. Returns pH (N,).
    """
    n_cells = conc.shape[1]
    out = np.empty(n_cells)
    for i in range(n_cells):
        out[i] = _solve_ph_one(conc[:, i], kind, zfix, nprot, kaprod, tol, max_iter)
    return out


def _solve_ph_one(c, kind, zfix, nprot, kaprod, tol, max_iter):
    lo, hi = -14.0, 0.0  # log10(h); f increasing in h => f(10^lo)<0<f(10^hi)
    flo = _charge_balance_py(10.0 ** lo, c, kind, zfix, nprot, kaprod)
    fhi = _charge_balance_py(10.0 ** hi, c, kind, zfix, nprot, kaprod)
    if flo > 0.0 or fhi < 0.0:
        return np.nan  # caller turns this into an internal-consistency error
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = _charge_balance_py(10.0 ** mid, c, kind, zfix, nprot, kaprod)
        if fm < 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol and abs(fm) <= tol:
            break
    return -0.5 * (lo + hi)


def _diffuse_step_py(field, r, left_fixed, right_fixed, left_values, right_values):
    """One FTCS update of field (S, N); r = D*dt/dx^2 per species (S,).

    Closed boundaries are zero-flux (mirror); fixed boundaries re-impose the
    boundary concentration on the end node after the update.
    """
    s_n, n = field.shape
    out = np.empty_like(field)
    for s in range(s_n):
        rs = r[s]
        for i in range(n):
            cl = field[s, i - 1] if i > 0 else field[s, 0]
            cr = field[s, i + 1] if i < n - 1 else field[s, n - 1]
            out[s, i] = field[s, i] + rs * (cl - 2.0 * field[s, i] + cr)
        if left_fixed:
            out[s, 0] = left_values[s]
        if right_fixed:
            out[s, n - 1] = right_values[s]
    return out


_USE_NUMBA = False
if not os.environ.get("PHKIT_DISABLE_NUMBA"):
    try:
        from numba import njit

        _charge_balance_nb = njit(cache=True)(_charge_balance_py)

        @njit(cache=True)
        def _solve_ph_one_nb(c, kind, zfix, nprot, kaprod, tol, max_iter):
            lo, hi = -14.0, 0.0
            flo = _charge_balance_nb(10.0 ** lo, c, kind, zfix, nprot, kaprod)
            fhi = _charge_balance_nb(10.0 ** hi, c, kind, zfix, nprot, kaprod)
            if flo > 0.0 or fhi < 0.0:
                return np.nan
            for _ in range(max_iter):
                mid = 0.5 * (lo + hi)
                fm = _charge_balance_nb(10.0 ** mid, c, kind, zfix, nprot, kaprod)
                if fm < 0.0:
                    lo = mid
                else:
                    hi = mid
                if hi - lo <= tol and abs(fm) <= tol:
                    break
            return -0.5 * (lo + hi)

        @njit(cache=True)
        def _solve_ph_batch_nb(conc, kind, zfix, nprot, kaprod, tol, max_iter):
            n_cells = conc.shape[1]
            out = np.empty(n_cells)
            for i in range(n_cells):
                out[i] = _solve_ph_one_nb(
                    conc[:, i].copy(), kind, zfix, nprot, kaprod, tol, max_iter
                )
            return out

        @njit(cache=True)
        def _diffuse_step_nb(field, r, left_fixed, right_fixed, left_values, right_values):
            s_n, n = field.shape
            out = np.empty_like(field)
            for s in range(s_n):
                rs = r[s]
                for i in range(n):
                    cl = field[s, i - 1] if i > 0 else field[s, 0]
                    cr = field[s, i + 1] if i < n - 1 else field[s, n - 1]
                    out[s, i] = field[s, i] + rs * (cl - 2.0 * field[s, i] + cr)
                if left_fixed:
                    out[s, 0] = left_values[s]
                if right_fixed:
                    out[s, n - 1] = right_values[s]
            return out

        _USE_NUMBA = True
    except ImportError:  # pragma: no cover - numba is an optional extra
        _USE_NUMBA = False


def backend() -> str:
    """Name of the active kernel backend ('numba' or 'numpy')."""
    return "numba" if _USE_NUMBA else "numpy"


def solve_ph_batch(conc, kind, zfix, nprot, kaprod, tol=1e-6, max_iter=200):
    conc = np.ascontiguousarray(conc, dtype=np.float64)
    if _USE_NUMBA:
        return _solve_ph_batch_nb(conc, kind, zfix, nprot, kaprod, tol, max_iter)
    return _solve_ph_batch_py(conc, kind, zfix, nprot, kaprod, tol, max_iter)


def solve_ph_single(conc, kind, zfix, nprot, kaprod, tol=1e-6, max_iter=200):
    conc = np.ascontiguousarray(conc, dtype=np.float64)
    if _USE_NUMBA:
        return _solve_ph_one_nb(conc, kind, zfix, nprot, kaprod, tol, max_iter)
    return _solve_ph_one(conc, kind, zfix, nprot, kaprod, tol, max_iter)


def charge_balance_residual(h, conc, kind, zfix, nprot, kaprod):
    conc = np.ascontiguousarray(conc, dtype=np.float64)
    if _USE_NUMBA:
        return _charge_balance_nb(h, conc, kind, zfix, nprot, kaprod)
    return _charge_balance_py(h, conc, kind, zfix, nprot, kaprod)


def diffuse_step(field, r, left_fixed, right_fixed, left_values, right_values):
    field = np.ascontiguousarray(field, dtype=np.float64)
    r = np.ascontiguousarray(r, dtype=np.float64)
    if _USE_NUMBA:
        return _diffuse_step_nb(
            field, r, left_fixed, right_fixed, left_values, right_values
        )
    return _diffuse_step_py(field, r, left_fixed, right_fixed, left_values, right_values)
