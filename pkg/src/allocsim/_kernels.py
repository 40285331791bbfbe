"""Hot per-arrival loops, compiled with numba when available.

Two implementations of the same integrated loop live here:

* a scalar kernel (`_integrated_scalar`) that numba compiles, and
* a vectorized pure-numpy twin (`_integrated_numpy`).

The active backend is chosen at import from ALLOCSIM_BACKEND ("numba" or
"numpy"; default numba when importable). All randomness is pre-drawn by the
caller (`u_select`, `u_purchase`), so a run is reproducible bit-for-bit per
backend, and the two backends agree to float rounding (their summation
orders differ). Budgets are consumed by assignment: each non-null assignment
of a capped item takes one unit of its remaining stock.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = [
    "BACKEND",
    "HAS_NUMBA",
    "available_backends",
    "integrated_loop",
    "greedy_loop",
]

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


_env = os.environ.get("ALLOCSIM_BACKEND", "").strip().lower()
if _env == "numpy":
    BACKEND = "numpy"
elif _env == "numba":
    if not HAS_NUMBA:
        raise ImportError("ALLOCSIM_BACKEND=numba but numba is not importable")
    BACKEND = "numba"
elif _env:
    raise ImportError(f"ALLOCSIM_BACKEND={_env!r} not recognized (use numba or numpy)")
else:
    BACKEND = "numba" if HAS_NUMBA else "numpy"


def available_backends() -> tuple[str, ...]:
    return ("numba", "numpy") if HAS_NUMBA else ("numpy",)


# ============================================================
# Integrated loop, scalar form (numba target)
# ============================================================

def _integrated_scalar(
    types,
    weights,
    phi,
    phi_constant,
    s_budget,
    p_true,
    rewards,
    budgets,
    infinite,
    mu,
    lam,
    remaining,
    counts,
    purchases,
    p_hat,
    type_rounds,
    last_change,
    prev_ckpt,
    r_max,
    k_interval,
    eps_p,
    lam_max,
    etas,
    t_offset,
    u_select,
    u_purchase,
):
    T = types.shape[0]
    m, n = p_true.shape
    assigned = np.empty(T, dtype=np.int64)
    bought = np.zeros(T, dtype=np.uint8)
    phase = np.zeros(T, dtype=np.uint8)
    f_vals = np.empty(T, dtype=np.float64)

    max_ck = T // k_interval + 2
    ck_t = np.empty(max_ck, dtype=np.int64)
    ck_err = np.empty(max_ck, dtype=np.float64)
    ck_chg = np.empty(max_ck, dtype=np.float64)
    ck_lam = np.empty((max_ck, n), dtype=np.float64)
    ck_rem = np.empty((max_ck, n), dtype=np.float64)
    n_ck = 0

    grad = np.empty(n, dtype=np.float64)
    xrow = np.empty(n, dtype=np.float64)

    for t in range(T):
        g = t_offset + t + 1
        j = types[t]
        type_rounds[j] += 1
        use_ucb = (last_change > eps_p) and (g <= r_max)
        phase[t] = 0 if use_ucb else 1

        n_avail = 0
        for i in range(n):
            if infinite[i] or remaining[i] >= 1.0:
                n_avail += 1

        sel = -1
        if n_avail > 0:
            if use_ucb:
                best_score = -np.inf
                log_tj = np.log(np.float64(type_rounds[j]))
                for i in range(n):
                    if not (infinite[i] or remaining[i] >= 1.0):
                        continue
                    if counts[j, i] == 0:
                        score = np.inf
                    else:
                        score = p_hat[j, i] + np.sqrt(1.5 * log_tj / counts[j, i])
                    if score > best_score:
                        best_score = score
                        sel = i
            else:
                pbar = 0.0
                for i in range(n):
                    if p_hat[j, i] > pbar:
                        pbar = p_hat[j, i]
                total = 0.0
                if pbar <= 0.0:
                    for i in range(n):
                        if infinite[i] or remaining[i] >= 1.0:
                            xrow[i] = 1.0
                            total += 1.0
                        else:
                            xrow[i] = 0.0
                else:
                    shift = -np.inf
                    for i in range(n):
                        if infinite[i] or remaining[i] >= 1.0:
                            e = (rewards[i] - lam[i]) * p_hat[j, i] / (pbar * mu)
                            xrow[i] = e
                            if e > shift:
                                shift = e
                        else:
                            xrow[i] = -np.inf
                    for i in range(n):
                        if xrow[i] == -np.inf:
                            xrow[i] = 0.0
                        else:
                            xrow[i] = np.exp(xrow[i] - shift)
                            total += xrow[i]
                u = u_select[t] * total
                acc = 0.0
                for i in range(n):
                    if xrow[i] > 0.0:
                        acc += xrow[i]
                        if u < acc:
                            sel = i
                            break
                if sel == -1:
                    for i in range(n - 1, -1, -1):
                        if xrow[i] > 0.0:
                            sel = i
                            break

        assigned[t] = sel
        if sel >= 0:
            if u_purchase[t] < p_true[j, sel]:
                bought[t] = 1
                purchases[j, sel] += 1
            if not infinite[sel]:
                remaining[sel] -= 1.0
            counts[j, sel] += 1
            p_hat[j, sel] = purchases[j, sel] / counts[j, sel]

        # gradient of the weighted dual at the pre-step iterate
        for i in range(n):
            if infinite[i]:
                grad[i] = 0.0
            else:
                grad[i] = s_budget * budgets[i]
        for jj in range(m):
            w = weights[jj]
            if w <= 0.0:
                continue
            pbar = 0.0
            for i in range(n):
                if p_hat[jj, i] > pbar:
                    pbar = p_hat[jj, i]
            pb = pbar if pbar > 0.0 else 1.0
            shift = -np.inf
            for i in range(n):
                e = (rewards[i] - lam[i]) * p_hat[jj, i] / (pb * mu)
                xrow[i] = e
                if e > shift:
                    shift = e
            z = 0.0
            for i in range(n):
                xrow[i] = np.exp(xrow[i] - shift)
                z += xrow[i]
            for i in range(n):
                if not infinite[i]:
                    grad[i] -= w * p_hat[jj, i] * xrow[i] / z

        eta = etas[t]
        for i in range(n):
            if infinite[i]:
                lam[i] = 0.0
            else:
                v = lam[i] - eta * grad[i]
                if v < 0.0:
                    v = 0.0
                elif v > lam_max:
                    v = lam_max
                lam[i] = v

        # recorded dual value at the post-step iterate
        prow = 0 if phi_constant else t
        fval = 0.0
        for jj in range(m):
            ph = phi[prow, jj]
            if ph == 0.0:
                continue
            pbar = 0.0
            for i in range(n):
                if p_hat[jj, i] > pbar:
                    pbar = p_hat[jj, i]
            pb = pbar if pbar > 0.0 else 1.0
            shift = -np.inf
            for i in range(n):
                e = (rewards[i] - lam[i]) * p_hat[jj, i] / (pb * mu)
                xrow[i] = e
                if e > shift:
                    shift = e
            z = 0.0
            for i in range(n):
                z += np.exp(xrow[i] - shift)
            fval += ph * mu * pbar * (shift + np.log(z))
        for i in range(n):
            if not infinite[i]:
                fval += s_budget * lam[i] * budgets[i]
        f_vals[t] = fval

        if g % k_interval == 0:
            err = 0.0
            chg = 0.0
            for jj in range(m):
                for i in range(n):
                    d1 = p_hat[jj, i] - p_true[jj, i]
                    err += d1 * d1
                    d2 = p_hat[jj, i] - prev_ckpt[jj, i]
                    chg += d2 * d2
                    prev_ckpt[jj, i] = p_hat[jj, i]
            err = np.sqrt(err)
            chg = np.sqrt(chg)
            last_change = chg
            ck_t[n_ck] = g
            ck_err[n_ck] = err
            ck_chg[n_ck] = chg
            for i in range(n):
                ck_lam[n_ck, i] = lam[i]
                ck_rem[n_ck, i] = remaining[i]
            n_ck += 1

    return (
        assigned, bought, phase, f_vals, last_change,
        ck_t[:n_ck], ck_err[:n_ck], ck_chg[:n_ck],
        ck_lam[:n_ck], ck_rem[:n_ck],
    )


_integrated_jit = njit(cache=True)(_integrated_scalar) if HAS_NUMBA else None


# ============================================================
# Integrated loop, vectorized numpy fallback
# ============================================================

def _integrated_numpy(
    types, weights, phi, phi_constant, s_budget, p_true, rewards, budgets,
    infinite, mu, lam, remaining, counts, purchases, p_hat, type_rounds,
    last_change, prev_ckpt, r_max, k_interval, eps_p, lam_max, etas,
    t_offset, u_select, u_purchase,
):
    T = types.shape[0]
    m, n = p_true.shape
    assigned = np.empty(T, dtype=np.int64)
    bought = np.zeros(T, dtype=np.uint8)
    phase = np.zeros(T, dtype=np.uint8)
    f_vals = np.empty(T, dtype=np.float64)

    ck_t, ck_err, ck_chg, ck_lam, ck_rem = [], [], [], [], []
    w_col = weights[:, None]
    fin = ~infinite
    fin_budgets = np.where(fin, budgets, 0.0)

    for t in range(T):
        g = t_offset + t + 1
        j = types[t]
        type_rounds[j] += 1
        use_ucb = (last_change > eps_p) and (g <= r_max)
        phase[t] = 0 if use_ucb else 1

        avail = infinite | (remaining >= 1.0)
        sel = -1
        if avail.any():
            if use_ucb:
                row_counts = counts[j]
                seen = row_counts > 0
                scores = np.full(n, np.inf)
                scores[seen] = p_hat[j, seen] + np.sqrt(
                    1.5 * np.log(np.float64(type_rounds[j])) / row_counts[seen]
                )
                scores[~avail] = -np.inf
                sel = int(np.argmax(scores))
            else:
                pbar = p_hat[j].max()
                if pbar <= 0.0:
                    wts = avail.astype(np.float64)
                else:
                    e = np.where(avail, (rewards - lam) * p_hat[j] / (pbar * mu), -np.inf)
                    wts = np.exp(e - e.max())
                    wts[~avail] = 0.0
                cum = np.cumsum(wts)
                u = u_select[t] * cum[-1]
                sel = int(np.searchsorted(cum, u, side="right"))
                if sel >= n:
                    sel = int(np.flatnonzero(wts > 0.0)[-1])

        assigned[t] = sel
        if sel >= 0:
            if u_purchase[t] < p_true[j, sel]:
                bought[t] = 1
                purchases[j, sel] += 1
            if not infinite[sel]:
                remaining[sel] -= 1.0
            counts[j, sel] += 1
            p_hat[j, sel] = purchases[j, sel] / counts[j, sel]

        pbar_all = p_hat.max(axis=1)
        pb = np.where(pbar_all > 0.0, pbar_all, 1.0)
        E = (rewards - lam)[None, :] * p_hat / (pb[:, None] * mu)
        shift = E.max(axis=1, keepdims=True)
        W = np.exp(E - shift)
        Z = W.sum(axis=1)
        X = W / Z[:, None]
        grad = s_budget * fin_budgets - (w_col * p_hat * X).sum(axis=0)
        grad[infinite] = 0.0

        lam -= etas[t] * grad
        np.clip(lam, 0.0, lam_max, out=lam)
        lam[infinite] = 0.0

        E = (rewards - lam)[None, :] * p_hat / (pb[:, None] * mu)
        shift = E.max(axis=1)
        log_z = shift + np.log(np.exp(E - shift[:, None]).sum(axis=1))
        prow = phi[0] if phi_constant else phi[t]
        f_vals[t] = mu * float(prow @ (pbar_all * log_z)) + s_budget * float(
            lam[fin] @ budgets[fin]
        )

        if g % k_interval == 0:
            err = float(np.linalg.norm(p_hat - p_true))
            chg = float(np.linalg.norm(p_hat - prev_ckpt))
            prev_ckpt[...] = p_hat
            last_change = chg
            ck_t.append(g)
            ck_err.append(err)
            ck_chg.append(chg)
            ck_lam.append(lam.copy())
            ck_rem.append(remaining.copy())

    def _stack(rows, width):
        return np.array(rows) if rows else np.empty((0, width))

    return (
        assigned, bought, phase, f_vals, last_change,
        np.array(ck_t, dtype=np.int64), np.array(ck_err), np.array(ck_chg),
        _stack(ck_lam, n), _stack(ck_rem, n),
    )


# ============================================================
# Greedy loop
# ============================================================

def _greedy_scalar(types, order, p_true, infinite, remaining, u_purchase):
    T = types.shape[0]
    n = remaining.shape[0]
    assigned = np.empty(T, dtype=np.int64)
    bought = np.zeros(T, dtype=np.uint8)
    for t in range(T):
        sel = -1
        for k in range(n):
            i = order[k]
            if infinite[i] or remaining[i] >= 1.0:
                sel = i
                break
        assigned[t] = sel
        if sel >= 0:
            if u_purchase[t] < p_true[types[t], sel]:
                bought[t] = 1
            if not infinite[sel]:
                remaining[sel] -= 1.0
    return assigned, bought


_greedy_jit = njit(cache=True)(_greedy_scalar) if HAS_NUMBA else None


# ============================================================
# Dispatch
# ============================================================

def integrated_loop(*args, backend: str | None = None):
    """Run the per-arrival integrated loop on the selected backend.

    Mutates the state arrays (lam, remaining, counts, purchases, p_hat,
    type_rounds, prev_ckpt) in place; callers pass copies they own.
    """
    b = BACKEND if backend is None else backend
    if b == "numba":
        if _integrated_jit is None:
            raise RuntimeError("numba backend requested but numba is unavailable")
        return _integrated_jit(*args)
    if b == "numpy":
        return _integrated_numpy(*args)
    raise ValueError(f"unknown backend {b!r}")


def greedy_loop(types, order, p_true, infinite, remaining, u_purchase,
                backend: str | None = None):
    """Highest-reward-available assignment loop; mutates `remaining`."""
    b = BACKEND if backend is None else backend
    if b == "numba":
        if _greedy_jit is None:
            raise RuntimeError("numba backend requested but numba is unavailable")
        return _greedy_jit(types, order, p_true, infinite, remaining, u_purchase)
    if b == "numpy":
        return _greedy_scalar(types, order, p_true, infinite, remaining, u_purchase)
    raise ValueError(f"unknown backend {b!r}")
