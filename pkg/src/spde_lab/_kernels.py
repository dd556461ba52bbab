"""Hot numerical kernels: tridiagonal solves, discrete norms, implicit Euler steps.

Every kernel is a plain loop-based function, built twice by :func:`_build`:
once compiled with ``numba.njit(nogil=True)`` (the default when numba imports)
and once left as interpreted Python/numpy.  Set ``SPDE_LAB_NUMBA=0`` to select
the interpreted fallback.  Both variants execute the same floating-point
operations in the same order, so their outputs are bit-for-bit identical;
``benchmarks/bench_backends.py`` measures the speed gap.

The module-level :data:`kernels` namespace holds the active variant and
:data:`BACKEND` records which one it is.  ``get_kernels("numpy")`` /
``get_kernels("numba")`` return a specific variant regardless of the flag,
which is what the benchmark and the backend-equivalence test use.
"""

from __future__ import annotations

import math
import os
from types import SimpleNamespace

import numpy as np

KIND_P_LAPLACE = 0
KIND_FAST_DIFFUSION = 1
KIND_LINEAR_HEAT = 2


def _build(jit):
    """Construct the kernel namespace, decorating every function with `jit`."""

    @jit
    def solve_tridiag(lower, diag, upper, rhs):
        # Thomas algorithm; `lower[i-1]`, `diag[i]`, `upper[i]` address row i.
        n = rhs.shape[0]
        scratch = np.empty(n)
        x = np.empty(n)
        beta = diag[0]
        x[0] = rhs[0] / beta
        for i in range(1, n):
            scratch[i - 1] = upper[i - 1] / beta
            beta = diag[i] - lower[i - 1] * scratch[i - 1]
            x[i] = (rhs[i] - lower[i - 1] * x[i - 1]) / beta
        for i in range(n - 2, -1, -1):
            x[i] -= scratch[i] * x[i + 1]
        return x

    @jit
    def poisson_solve(f, h):
        # Solve -lap_h u = f with homogeneous Dirichlet values.
        n = f.shape[0]
        inv_h2 = 1.0 / (h * h)
        lower = np.full(n - 1, -inv_h2)
        upper = np.full(n - 1, -inv_h2)
        diag = np.full(n, 2.0 * inv_h2)
        return solve_tridiag(lower, diag, upper, f)

    @jit
    def laplacian(u, h):
        n = u.shape[0]
        inv_h2 = 1.0 / (h * h)
        out = np.empty(n)
        for i in range(n):
            left = u[i - 1] if i > 0 else 0.0
            right = u[i + 1] if i < n - 1 else 0.0
            out[i] = (left - 2.0 * u[i] + right) * inv_h2
        return out

    @jit
    def inner_l2(u, v, h):
        acc = 0.0
        for i in range(u.shape[0]):
            acc += u[i] * v[i]
        return h * acc

    @jit
    def h_norm_sq(u, h, kind):
        # Squared norm of the active pivot space H: L^2 for the p-Laplace and
        # heat triples, W^{-1,2} (via a Poisson solve) for fast diffusion.
        if kind == KIND_FAST_DIFFUSION:
            w = poisson_solve(u, h)
            acc = 0.0
            for i in range(u.shape[0]):
                acc += u[i] * w[i]
            return h * acc
        acc = 0.0
        for i in range(u.shape[0]):
            acc += u[i] * u[i]
        return h * acc

    @jit
    def w1p_pow(u, h, p):
        # h * sum_j |D_j u|^p over the n+1 forward differences (zero boundary).
        n = u.shape[0]
        inv_h = 1.0 / h
        acc = 0.0
        prev = 0.0
        for i in range(n):
            d = (u[i] - prev) * inv_h
            acc += abs(d) ** p
            prev = u[i]
        d = (0.0 - prev) * inv_h
        acc += abs(d) ** p
        return h * acc

    @jit
    def lr_pow(u, h, s):
        acc = 0.0
        for i in range(u.shape[0]):
            acc += abs(u[i]) ** s
        return h * acc

    @jit
    def v_alpha_pow(u, h, kind, exponent):
        # ||u||_V^alpha without the root: the coercivity pairs norm^alpha with
        # alpha equal to the norm's own exponent for every triple.
        if kind == KIND_P_LAPLACE:
            return w1p_pow(u, h, exponent)
        if kind == KIND_FAST_DIFFUSION:
            return lr_pow(u, h, exponent + 1.0)
        return w1p_pow(u, h, 2.0)

    @jit
    def flux(g, p, eps):
        # (g^2 + eps^2)^((p-2)/2) * g, continuously extended by 0 at the origin.
        a = abs(g)
        if a > 1e150:
            # g*g would overflow; eps is negligible at this magnitude
            return a ** (p - 1.0) if g > 0.0 else -(a ** (p - 1.0))
        s2 = g * g + eps * eps
        if s2 == 0.0:
            return 0.0
        return s2 ** (0.5 * (p - 2.0)) * g

    @jit
    def dflux(g, p, eps):
        a = abs(g)
        if a > 1e150:
            return (p - 1.0) * a ** (p - 2.0)
        s2 = g * g + eps * eps
        if s2 == 0.0:
            return 0.0
        return s2 ** (0.5 * (p - 4.0)) * ((p - 1.0) * g * g + eps * eps)

    @jit
    def power_map(s, r, eps):
        # (s^2 + eps^2)^((r-1)/2) * s, continuously extended by 0 at the origin.
        a = abs(s)
        if a > 1e150:
            return a ** r if s > 0.0 else -(a ** r)
        s2 = s * s + eps * eps
        if s2 == 0.0:
            return 0.0
        return s2 ** (0.5 * (r - 1.0)) * s

    @jit
    def dpower_map(s, r, eps):
        a = abs(s)
        if a > 1e150:
            return r * a ** (r - 1.0)
        s2 = s * s + eps * eps
        if s2 == 0.0:
            return 0.0
        return s2 ** (0.5 * (r - 3.0)) * (r * s * s + eps * eps)

    @jit
    def drift_apply(u, h, kind, exponent, eps):
        n = u.shape[0]
        out = np.empty(n)
        inv_h = 1.0 / h
        if kind == KIND_P_LAPLACE:
            # divergence of the regularized flux of the forward differences
            prev_flux = flux(u[0] * inv_h, exponent, eps)
            for i in range(n):
                nxt = u[i + 1] if i < n - 1 else 0.0
                cur_flux = flux((nxt - u[i]) * inv_h, exponent, eps)
                out[i] = (cur_flux - prev_flux) * inv_h
                prev_flux = cur_flux
            return out
        if kind == KIND_FAST_DIFFUSION:
            w = np.empty(n)
            for i in range(n):
                w[i] = power_map(u[i], exponent, eps)
            return laplacian(w, h)
        return laplacian(u, h)

    @jit
    def _residual(z, rhs, h, dt, kind, exponent, eps):
        a = drift_apply(z, h, kind, exponent, eps)
        n = z.shape[0]
        out = np.empty(n)
        for i in range(n):
            out[i] = z[i] - dt * a[i] - rhs[i]
        return out

    @jit
    def phi_inverse(v, r, eps):
        """Solve power_map(z, r, eps) = v for z (odd, strictly increasing).

        Newton with a bisection safeguard; the map is concave on z > 0, so
        plain Newton is monotone from either side and the safeguard only
        handles rounding edge cases.  Saturates at 1e300 for inputs beyond
        representable roots (rejected later by the step line search).
        """
        if v == 0.0:
            return 0.0
        sign = 1.0 if v > 0.0 else -1.0
        m = abs(v)
        if m >= 10.0 ** (295.0 * r):
            # the root m^(1/r) overflows float64; saturate (such trial points
            # only arise on diverging line-search probes, which get rejected)
            return sign * 1e300
        hi = m ** (1.0 / r)
        alt = m * eps ** (1.0 - r) if eps > 0.0 else hi
        if alt > hi:
            hi = alt
        if eps > hi:
            hi = eps
        if hi < 1e-300:
            hi = 1e-300
        if hi > 5e299:
            hi = 5e299
        hi *= 2.0
        guard = 0
        while power_map(hi, r, eps) < m and guard < 600:
            hi *= 2.0
            guard += 1
            if hi > 1e300:
                hi = 1e300
                break
        lo = 0.0
        z = hi
        for _ in range(200):
            f = power_map(z, r, eps) - m
            if f == 0.0:
                break
            if f > 0.0:
                hi = z
            else:
                lo = z
            d = dpower_map(z, r, eps)
            znew = z - f / d if d > 0.0 else 0.5 * (lo + hi)
            if not (lo < znew < hi):
                znew = 0.5 * (lo + hi)
            if znew == z:
                break
            z = znew
            if hi - lo <= 1e-16 * hi:
                break
        return sign * z

    @jit
    def _step_fast_diffusion(rhs, h, dt, r, eps, tol, max_iter, max_halvings):
        # Newton in the flux variable v = phi_eps(z): the transformed system
        # psi(v) - dt*lap(v) = rhs has a linear stiff part, an SPD strictly
        # diagonally dominant Jacobian diag(psi') - dt*lap, and mild curvature,
        # where Newton on the nodal form crawls at the eps-scale singularity.
        n = rhs.shape[0]
        thresh = tol * (1.0 + math.sqrt(h_norm_sq(rhs, h, KIND_FAST_DIFFUSION)))
        inv_h2 = 1.0 / (h * h)
        v = np.empty(n)
        z = np.empty(n)
        for i in range(n):
            v[i] = power_map(rhs[i], r, eps)
            z[i] = rhs[i]
        lap = laplacian(v, h)
        res = np.empty(n)
        for i in range(n):
            res[i] = z[i] - dt * lap[i] - rhs[i]
        rnorm = math.sqrt(h_norm_sq(res, h, KIND_FAST_DIFFUSION))
        iters = 0
        lower = np.empty(n - 1) if n > 1 else np.empty(0)
        upper = np.empty(n - 1) if n > 1 else np.empty(0)
        diag = np.empty(n)
        neg = np.empty(n)
        while rnorm > thresh:
            if iters >= max_iter:
                return z, rnorm, iters, False
            for i in range(n):
                slope = dpower_map(z[i], r, eps)
                diag[i] = (1.0 / slope if slope > 0.0 else np.inf) + 2.0 * dt * inv_h2
                neg[i] = -res[i]
            for i in range(n - 1):
                lower[i] = -dt * inv_h2
                upper[i] = -dt * inv_h2
            delta = solve_tridiag(lower, diag, upper, neg)
            step = 1.0
            accepted = False
            for _ in range(max_halvings + 1):
                tv = np.empty(n)
                tz = np.empty(n)
                for i in range(n):
                    tv[i] = v[i] + step * delta[i]
                    tz[i] = phi_inverse(tv[i], r, eps)
                tlap = laplacian(tv, h)
                tres = np.empty(n)
                for i in range(n):
                    tres[i] = tz[i] - dt * tlap[i] - rhs[i]
                tnorm = math.sqrt(h_norm_sq(tres, h, KIND_FAST_DIFFUSION))
                if np.isfinite(tnorm) and tnorm < rnorm:
                    v = tv
                    z = tz
                    res = tres
                    rnorm = tnorm
                    accepted = True
                    break
                step *= 0.5
            iters += 1
            if not accepted:
                return z, rnorm, iters, False
        return z, rnorm, iters, True

    @jit
    def _step_p_laplace(rhs, h, dt, p, eps, tol, max_iter, max_halvings):
        # Newton in the edge flux w_j = flux(D_j z): the nodal equation gives
        # z = rhs + dt*div(w) explicitly, and the remaining edge system
        # flux^{-1}(w) - dt*lap_edge(w) = D rhs has a linear stiff part and an
        # SPD strictly dominant Jacobian, like the fast-diffusion stepper.
        # (flux(., p) coincides with power_map(., p-1), so phi_inverse applies.)
        n = rhs.shape[0]
        r = p - 1.0
        m = n + 1
        inv_h = 1.0 / h
        inv_h2 = inv_h * inv_h
        thresh = tol * (1.0 + math.sqrt(h_norm_sq(rhs, h, KIND_P_LAPLACE)))
        dr = np.empty(m)
        prev = 0.0
        for i in range(n):
            dr[i] = (rhs[i] - prev) * inv_h
            prev = rhs[i]
        dr[n] = -prev * inv_h
        w = np.empty(m)
        zeta = np.empty(m)
        G = np.empty(m)
        for j in range(m):
            w[j] = power_map(dr[j], r, eps)
            zeta[j] = phi_inverse(w[j], r, eps)
        # edge residual G(w) and its Euclidean size (line-search merit)
        gnorm = 0.0
        for j in range(m):
            left = w[j - 1] if j > 0 else w[0]
            right = w[j + 1] if j < m - 1 else w[m - 1]
            G[j] = zeta[j] - dt * (left - 2.0 * w[j] + right) * inv_h2 - dr[j]
            gnorm += G[j] * G[j]
        gnorm = math.sqrt(gnorm)
        z = np.empty(n)
        res = np.empty(n)
        for i in range(n):
            z[i] = rhs[i] + dt * (w[i + 1] - w[i]) * inv_h
        a = drift_apply(z, h, KIND_P_LAPLACE, p, eps)
        for i in range(n):
            res[i] = z[i] - dt * a[i] - rhs[i]
        rnorm = math.sqrt(h_norm_sq(res, h, KIND_P_LAPLACE))
        iters = 0
        lower = np.empty(m - 1)
        upper = np.empty(m - 1)
        diag = np.empty(m)
        neg = np.empty(m)
        while rnorm > thresh:
            if iters >= max_iter:
                return z, rnorm, iters, False
            for j in range(m):
                slope = dpower_map(zeta[j], r, eps)
                ends = 1.0 if j == 0 or j == m - 1 else 2.0
                diag[j] = (1.0 / slope if slope > 0.0 else np.inf) + ends * dt * inv_h2
                neg[j] = -G[j]
            for j in range(m - 1):
                lower[j] = -dt * inv_h2
                upper[j] = -dt * inv_h2
            delta = solve_tridiag(lower, diag, upper, neg)
            step = 1.0
            accepted = False
            for _ in range(max_halvings + 1):
                tw = np.empty(m)
                tzeta = np.empty(m)
                for j in range(m):
                    tw[j] = w[j] + step * delta[j]
                    tzeta[j] = phi_inverse(tw[j], r, eps)
                tG = np.empty(m)
                tnorm = 0.0
                for j in range(m):
                    left = tw[j - 1] if j > 0 else tw[0]
                    right = tw[j + 1] if j < m - 1 else tw[m - 1]
                    tG[j] = tzeta[j] - dt * (left - 2.0 * tw[j] + right) * inv_h2 - dr[j]
                    tnorm += tG[j] * tG[j]
                tnorm = math.sqrt(tnorm)
                if np.isfinite(tnorm) and tnorm < gnorm:
                    w = tw
                    zeta = tzeta
                    G = tG
                    gnorm = tnorm
                    accepted = True
                    break
                step *= 0.5
            iters += 1
            if not accepted:
                return z, rnorm, iters, False
            for i in range(n):
                z[i] = rhs[i] + dt * (w[i + 1] - w[i]) * inv_h
            a = drift_apply(z, h, KIND_P_LAPLACE, p, eps)
            for i in range(n):
                res[i] = z[i] - dt * a[i] - rhs[i]
            rnorm = math.sqrt(h_norm_sq(res, h, KIND_P_LAPLACE))
        return z, rnorm, iters, True

    @jit
    def _step_linear_heat(rhs, h, dt, tol):
        # constant-coefficient solve: one stable Thomas sweep is exact
        n = rhs.shape[0]
        inv_h2 = 1.0 / (h * h)
        lower = np.full(n - 1, -dt * inv_h2)
        upper = np.full(n - 1, -dt * inv_h2)
        diag = np.full(n, 1.0 + 2.0 * dt * inv_h2)
        z = solve_tridiag(lower, diag, upper, rhs)
        res = _residual(z, rhs, h, dt, KIND_LINEAR_HEAT, 2.0, 0.0)
        rnorm = math.sqrt(h_norm_sq(res, h, KIND_LINEAR_HEAT))
        thresh = tol * (1.0 + math.sqrt(h_norm_sq(rhs, h, KIND_LINEAR_HEAT)))
        return z, rnorm, 1, rnorm <= thresh

    @jit
    def implicit_step(rhs, h, dt, kind, exponent, eps, tol, max_iter, max_halvings):
        """One backward Euler solve: find z with z - dt*A(z) = rhs.

        Returns (z, residual_norm, iterations, ok).  The singular drifts use
        damped Newton on their flux-variable forms (tridiagonal SPD Jacobian
        solves; the reported residual is the stated H-norm one in the original
        variables); the linear drift is solved directly.
        """
        if dt == 0.0:
            return rhs.copy(), 0.0, 0, True
        if kind == KIND_FAST_DIFFUSION:
            return _step_fast_diffusion(
                rhs, h, dt, exponent, eps, tol, max_iter, max_halvings
            )
        if kind == KIND_P_LAPLACE:
            return _step_p_laplace(
                rhs, h, dt, exponent, eps, tol, max_iter, max_halvings
            )
        return _step_linear_heat(rhs, h, dt, tol)

    @jit
    def simulate(x0, dw, h, dt, kind, exponent, eps, tol, max_iter, max_halvings,
                 v_int0, record_idx):
        """March `dw.shape[0]` implicit steps from x0, sharing one noise array.

        Returns (status, h_norm_sq_series, v_alpha_int_series, states, last_res)
        where status is -1 on success or the failing step index, the series
        have length steps+1, and `states` holds the state at each requested
        step index (sorted ascending).
        """
        steps = dw.shape[0]
        n = x0.shape[0]
        hns = np.empty(steps + 1)
        vint = np.empty(steps + 1)
        states = np.empty((record_idx.shape[0], n))
        x = x0.copy()
        hns[0] = h_norm_sq(x, h, kind)
        vint[0] = v_int0
        pos = 0
        if pos < record_idx.shape[0] and record_idx[pos] == 0:
            for j in range(n):
                states[pos, j] = x[j]
            pos += 1
        last_res = 0.0
        for k in range(steps):
            va = v_alpha_pow(x, h, kind, exponent)
            rhs = np.empty(n)
            for j in range(n):
                rhs[j] = x[j] + dw[k, j]
            z, rnorm, _, ok = implicit_step(rhs, h, dt, kind, exponent, eps,
                                            tol, max_iter, max_halvings)
            last_res = rnorm
            if not ok:
                return k, hns, vint, states, last_res
            x = z
            hns[k + 1] = h_norm_sq(x, h, kind)
            vint[k + 1] = vint[k] + dt * va
            if pos < record_idx.shape[0] and record_idx[pos] == k + 1:
                for j in range(n):
                    states[pos, j] = x[j]
                pos += 1
        return -1, hns, vint, states, last_res

    @jit
    def simulate_coupled(x0, y0, dw, h, dt, kind, exponent, eps, tol, max_iter,
                         max_halvings, vx_int0, vy_int0, record_idx):
        """Two implicit Euler chains driven by the same noise increments.

        Returns (status, dist, hns_x, vint_x, hns_y, vint_y, states_x,
        states_y, last_res); `dist[k]` is the H-norm of the difference at
        step k.
        """
        steps = dw.shape[0]
        n = x0.shape[0]
        dist = np.empty(steps + 1)
        hns_x = np.empty(steps + 1)
        hns_y = np.empty(steps + 1)
        vint_x = np.empty(steps + 1)
        vint_y = np.empty(steps + 1)
        states_x = np.empty((record_idx.shape[0], n))
        states_y = np.empty((record_idx.shape[0], n))
        x = x0.copy()
        y = y0.copy()
        diff = np.empty(n)
        for j in range(n):
            diff[j] = x[j] - y[j]
        dist[0] = math.sqrt(h_norm_sq(diff, h, kind))
        hns_x[0] = h_norm_sq(x, h, kind)
        hns_y[0] = h_norm_sq(y, h, kind)
        vint_x[0] = vx_int0
        vint_y[0] = vy_int0
        pos = 0
        if pos < record_idx.shape[0] and record_idx[pos] == 0:
            for j in range(n):
                states_x[pos, j] = x[j]
                states_y[pos, j] = y[j]
            pos += 1
        last_res = 0.0
        rhs = np.empty(n)
        for k in range(steps):
            vax = v_alpha_pow(x, h, kind, exponent)
            vay = v_alpha_pow(y, h, kind, exponent)
            for j in range(n):
                rhs[j] = x[j] + dw[k, j]
            zx, rx, _, okx = implicit_step(rhs, h, dt, kind, exponent, eps,
                                           tol, max_iter, max_halvings)
            if not okx:
                return k, dist, hns_x, vint_x, hns_y, vint_y, states_x, states_y, rx
            for j in range(n):
                rhs[j] = y[j] + dw[k, j]
            zy, ry, _, oky = implicit_step(rhs, h, dt, kind, exponent, eps,
                                           tol, max_iter, max_halvings)
            if not oky:
                return k, dist, hns_x, vint_x, hns_y, vint_y, states_x, states_y, ry
            x = zx
            y = zy
            last_res = max(rx, ry)
            for j in range(n):
                diff[j] = x[j] - y[j]
            dist[k + 1] = math.sqrt(h_norm_sq(diff, h, kind))
            hns_x[k + 1] = h_norm_sq(x, h, kind)
            hns_y[k + 1] = h_norm_sq(y, h, kind)
            vint_x[k + 1] = vint_x[k] + dt * vax
            vint_y[k + 1] = vint_y[k] + dt * vay
            if pos < record_idx.shape[0] and record_idx[pos] == k + 1:
                for j in range(n):
                    states_x[pos, j] = x[j]
                    states_y[pos, j] = y[j]
                pos += 1
        return -1, dist, hns_x, vint_x, hns_y, vint_y, states_x, states_y, last_res

    return SimpleNamespace(
        solve_tridiag=solve_tridiag,
        poisson_solve=poisson_solve,
        laplacian=laplacian,
        inner_l2=inner_l2,
        h_norm_sq=h_norm_sq,
        w1p_pow=w1p_pow,
        lr_pow=lr_pow,
        v_alpha_pow=v_alpha_pow,
        flux=flux,
        dflux=dflux,
        power_map=power_map,
        dpower_map=dpower_map,
        drift_apply=drift_apply,
        phi_inverse=phi_inverse,
        implicit_step=implicit_step,
        simulate=simulate,
        simulate_coupled=simulate_coupled,
    )


def _numba_requested():
    flag = os.environ.get("SPDE_LAB_NUMBA", "").strip().lower()
    return flag not in {"0", "false", "no", "off"}


_CACHE = {}


def get_kernels(backend):
    """Return the kernel namespace for `backend` ("numba" or "numpy")."""
    if backend not in {"numba", "numpy"}:
        raise ValueError(f"unknown kernel backend {backend!r}")
    if backend not in _CACHE:
        if backend == "numba":
            from numba import njit

            _CACHE[backend] = _build(njit(nogil=True))
        else:
            _CACHE[backend] = _build(lambda f: f)
    return _CACHE[backend]


def _select_backend():
    if _numba_requested():
        try:
            import numba  # noqa: F401
        except ImportError:
            return "numpy"
        return "numba"
    return "numpy"


BACKEND = _select_backend()
kernels = get_kernels(BACKEND)
