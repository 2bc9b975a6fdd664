"""Compiled Metropolis-within-Gibbs sweeps.

All randomness is supplied by the caller as pre-drawn arrays (standard normal
increments and log-uniforms, one column per coordinate per sweep), so a chain
is fully determined by its numpy ``Generator``.

Coordinate layout (``P = K + 3J + 3``):
alpha | beta_tilde | lambda | tau | rho | ridge (J) | global (1).

The ridge and global coordinates are scale-exchange moves that leave ``beta``
unchanged: ``(lambda_j, beta_tilde_j) -> (lambda_j e^d, beta_tilde_j e^-d)`` and
``(tau, lambda) -> (tau e^d, lambda e^-d)`` (or ``beta_tilde e^-d`` when the
local scales are fixed).  They need no likelihood evaluation.
Recorded columns (``K + 3J + 2``): alpha | beta_tilde | log_lambda | log_tau | rho | beta.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

LOG_PI = math.log(math.pi)
LOG_2 = math.log(2.0)
PI2 = math.pi * math.pi
ETA_MAX = 700.0

LC, HS, TC, FIXED = 0, 1, 2, 3


@njit(cache=True, nogil=True)
def scale_logpdf(code, x, tc_lognorm, tc_lower):
    if code == LC:
        lx = math.log(x)
        return -lx - math.log(PI2 + lx * lx)
    if code == HS:
        return LOG_2 - LOG_PI - math.log1p(x * x)
    if code == TC:
        if x < tc_lower or x > 1.0:
            return -np.inf
        return -math.log1p(x * x) - tc_lognorm
    return 0.0


@njit(cache=True, nogil=True)
def soft_log(x, eta):
    t = -eta * x
    if t > 0.0:
        return -(t + math.log1p(math.exp(-t)))
    return -math.log1p(math.exp(t))


@njit(cache=True, nogil=True)
def scale_target(code, s, sigmoid_mode, eta, tc_lognorm, tc_lower):
    """Log target of one scale coordinate ``s`` and the scale value it encodes."""
    if sigmoid_mode:
        x = s
        ax = abs(x)
        if ax == 0.0 or not math.isfinite(ax):
            return -np.inf, x
        return scale_logpdf(code, ax, tc_lognorm, tc_lower) + soft_log(x, eta), x
    if s > 700.0 or s < -700.0:
        return -np.inf, math.exp(min(max(s, -700.0), 700.0))
    x = math.exp(s)
    return scale_logpdf(code, x, tc_lognorm, tc_lower) + s, x


@njit(cache=True, nogil=True)
def loglik_delta(y, eta, expeta, col, d, new_exp):
    """Change in Poisson log-likelihood when ``eta += d * col``; fills ``new_exp``."""
    n = y.shape[0]
    s = 0.0
    for i in range(n):
        de = d * col[i]
        e = eta[i] + de
        if e > ETA_MAX:
            return -np.inf
        ne = math.exp(e)
        new_exp[i] = ne
        s += y[i] * de - (ne - expeta[i])
    return s


@njit(cache=True, nogil=True)
def logdet_part(rho, mu):
    s = 0.0
    for i in range(mu.shape[0]):
        v = 1.0 - rho * mu[i]
        if v <= 0.0:
            return -np.inf
        s += math.log(v)
    return s


@njit(cache=True, nogil=True)
def refresh(Wt, Xt, alpha, beta, eta_w, eta_x, eta, expeta):
    n = eta.shape[0]
    for i in range(n):
        eta_w[i] = 0.0
        eta_x[i] = 0.0
    for k in range(Wt.shape[0]):
        a = alpha[k]
        if a != 0.0:
            for i in range(n):
                eta_w[i] += Wt[k, i] * a
    for j in range(Xt.shape[0]):
        b = beta[j]
        if b != 0.0:
            for i in range(n):
                eta_x[i] += Xt[j, i] * b
    for i in range(n):
        eta[i] = eta_w[i] + eta_x[i]
        expeta[i] = math.exp(min(eta[i], ETA_MAX))


@njit(cache=True, nogil=True)
def run_sweeps(
    y, Wt, Xt,
    indptr, indices, degrees, mu,
    alpha, bt, s_lam, s_tau, rho_arr,
    steps, z, logu,
    tau_code, lam_code, rho_free, sigmoid_mode, eta_sig, zeta, tc_lognorm, tc_lower,
    acc, out, sweep0, burn_in, thin, exchange,
):
    """Run ``z.shape[0]`` sweeps in place; returns the number of rows written to ``out``."""
    K = alpha.shape[0]
    J = bt.shape[0]
    n = y.shape[0]
    o_bt = K
    o_lam = K + J
    o_tau = K + 2 * J
    o_rho = o_tau + 1
    o_ridge = o_rho + 1
    o_glob = o_ridge + J

    lam = np.empty(J)
    lam_lp = np.empty(J)
    for j in range(J):
        if lam_code == FIXED:
            lam[j] = 1.0
            lam_lp[j] = 0.0
        else:
            lam_lp[j], lam[j] = scale_target(lam_code, s_lam[j], sigmoid_mode, eta_sig, tc_lognorm, tc_lower)
    if tau_code == FIXED:
        tau = 1.0
        tau_lp = 0.0
    else:
        tau_lp, tau = scale_target(tau_code, s_tau[0], sigmoid_mode, eta_sig, tc_lognorm, tc_lower)
    rho = rho_arr[0]

    beta = np.empty(J)
    for j in range(J):
        beta[j] = tau * lam[j] * bt[j]
    eta_w = np.empty(n)
    eta_x = np.empty(n)
    eta = np.empty(n)
    expeta = np.empty(n)
    new_exp = np.empty(n)
    refresh(Wt, Xt, alpha, beta, eta_w, eta_x, eta, expeta)
    inv_z2 = 1.0 / (zeta * zeta)
    rows = 0
    n_sweeps = z.shape[0]

    for t in range(n_sweeps):
        # alpha
        for k in range(K):
            p = k
            d = steps[p] * z[t, p]
            a0 = alpha[k]
            a1 = a0 + d
            dlp = -0.5 * (a1 * a1 - a0 * a0) * inv_z2
            if n > 0:
                dlp += loglik_delta(y, eta, expeta, Wt[k], d, new_exp)
            if logu[t, p] < dlp:
                alpha[k] = a1
                acc[p] += 1
                if n > 0 and d != 0.0:
                    for i in range(n):
                        eta_w[i] += Wt[k, i] * d
                        eta[i] += Wt[k, i] * d
                        expeta[i] = new_exp[i]
        # beta_tilde
        for j in range(J):
            p = o_bt + j
            d = steps[p] * z[t, p]
            b0 = bt[j]
            b1 = b0 + d
            nb = 0.0
            for q in range(indptr[j], indptr[j + 1]):
                nb += bt[indices[q]]
            dlp = -0.5 * (degrees[j] * (b1 * b1 - b0 * b0) - 2.0 * rho * d * nb)
            dbeta = tau * lam[j] * d
            if n > 0:
                dlp += loglik_delta(y, eta, expeta, Xt[j], dbeta, new_exp)
            if logu[t, p] < dlp:
                bt[j] = b1
                beta[j] += dbeta
                acc[p] += 1
                if n > 0 and dbeta != 0.0:
                    for i in range(n):
                        eta_x[i] += Xt[j, i] * dbeta
                        eta[i] += Xt[j, i] * dbeta
                        expeta[i] = new_exp[i]
        # local scales
        if lam_code != FIXED:
            for j in range(J):
                p = o_lam + j
                s1 = s_lam[j] + steps[p] * z[t, p]
                lp1, l1 = scale_target(lam_code, s1, sigmoid_mode, eta_sig, tc_lognorm, tc_lower)
                if lp1 == -np.inf:
                    continue
                dlp = lp1 - lam_lp[j]
                b1 = tau * l1 * bt[j]
                dbeta = b1 - beta[j]
                if n > 0 and dbeta != 0.0:
                    dlp += loglik_delta(y, eta, expeta, Xt[j], dbeta, new_exp)
                if logu[t, p] < dlp:
                    s_lam[j] = s1
                    lam[j] = l1
                    lam_lp[j] = lp1
                    beta[j] = b1
                    acc[p] += 1
                    if n > 0 and dbeta != 0.0:
                        for i in range(n):
                            eta_x[i] += Xt[j, i] * dbeta
                            eta[i] += Xt[j, i] * dbeta
                            expeta[i] = new_exp[i]
        # scale exchange between lambda_j and beta_tilde_j (beta_j fixed)
        if exchange and lam_code != FIXED:
            for j in range(J):
                p = o_ridge + j
                d = steps[p] * z[t, p]
                if d == 0.0:
                    if logu[t, p] < 0.0:
                        acc[p] += 1
                    continue
                f = math.exp(d)
                if sigmoid_mode:
                    s1 = s_lam[j] * f
                    jac = 0.0
                else:
                    s1 = s_lam[j] + d
                    jac = -d
                lp1, l1 = scale_target(lam_code, s1, sigmoid_mode, eta_sig, tc_lognorm, tc_lower)
                if lp1 == -np.inf:
                    continue
                b0 = bt[j]
                b1 = b0 / f
                nb = 0.0
                for q in range(indptr[j], indptr[j + 1]):
                    nb += bt[indices[q]]
                dlp = lp1 - lam_lp[j] + jac
                dlp += -0.5 * (degrees[j] * (b1 * b1 - b0 * b0) - 2.0 * rho * (b1 - b0) * nb)
                if logu[t, p] < dlp:
                    s_lam[j] = s1
                    lam[j] = l1
                    lam_lp[j] = lp1
                    bt[j] = b1
                    acc[p] += 1
        # global scale
        if tau_code != FIXED:
            p = o_tau
            s1 = s_tau[0] + steps[p] * z[t, p]
            lp1, t1 = scale_target(tau_code, s1, sigmoid_mode, eta_sig, tc_lognorm, tc_lower)
            if lp1 != -np.inf:
                dlp = lp1 - tau_lp
                ok = True
                if n > 0:
                    if tau != 0.0:
                        r = t1 / tau
                        ll = 0.0
                        for i in range(n):
                            e = eta_w[i] + r * eta_x[i]
                            if e > ETA_MAX:
                                ok = False
                                break
                            ne = math.exp(e)
                            new_exp[i] = ne
                            ll += y[i] * (e - eta[i]) - (ne - expeta[i])
                        dlp += ll
                    else:
                        ok = False
                if ok and logu[t, p] < dlp:
                    r = t1 / tau
                    s_tau[0] = s1
                    tau = t1
                    tau_lp = lp1
                    acc[p] += 1
                    for j in range(J):
                        beta[j] *= r
                    if n > 0:
                        for i in range(n):
                            eta_x[i] *= r
                            eta[i] = eta_w[i] + eta_x[i]
                            expeta[i] = new_exp[i]
        # scale exchange between tau and the local scales (beta fixed)
        if exchange and tau_code != FIXED:
            p = o_glob
            d = steps[p] * z[t, p]
            f = math.exp(d)
            if sigmoid_mode:
                s1 = s_tau[0] * f
            else:
                s1 = s_tau[0] + d
            lp1, t1 = scale_target(tau_code, s1, sigmoid_mode, eta_sig, tc_lognorm, tc_lower)
            if lp1 != -np.inf:
                dlp = lp1 - tau_lp
                if lam_code != FIXED:
                    # lambda_j -> lambda_j / f
                    jac = d * (1.0 - J) if sigmoid_mode else 0.0
                    new_lp = np.empty(J)
                    new_l = np.empty(J)
                    new_s = np.empty(J)
                    for j in range(J):
                        new_s[j] = s_lam[j] / f if sigmoid_mode else s_lam[j] - d
                        new_lp[j], new_l[j] = scale_target(lam_code, new_s[j], sigmoid_mode, eta_sig, tc_lognorm, tc_lower)
                        dlp += new_lp[j] - lam_lp[j]
                    dlp += jac
                    if logu[t, p] < dlp:
                        s_tau[0] = s1
                        tau = t1
                        tau_lp = lp1
                        for j in range(J):
                            s_lam[j] = new_s[j]
                            lam[j] = new_l[j]
                            lam_lp[j] = new_lp[j]
                        acc[p] += 1
                else:
                    # beta_tilde -> beta_tilde / f
                    g2 = 1.0 / (f * f)
                    qd = 0.0
                    qa = 0.0
                    for j in range(J):
                        s = 0.0
                        for q in range(indptr[j], indptr[j + 1]):
                            s += bt[indices[q]]
                        qa += bt[j] * s
                        qd += degrees[j] * bt[j] * bt[j]
                    quad = qd - rho * qa
                    jac = (1.0 - J) * d if sigmoid_mode else -J * d
                    dlp += -0.5 * quad * (g2 - 1.0) + jac
                    if logu[t, p] < dlp:
                        s_tau[0] = s1
                        tau = t1
                        tau_lp = lp1
                        for j in range(J):
                            bt[j] /= f
                        acc[p] += 1
        # CAR dependence, random walk on logit(rho)
        if rho_free:
            p = o_rho
            u0 = math.log(rho) - math.log1p(-rho)
            u1 = u0 + steps[p] * z[t, p]
            r1 = 1.0 / (1.0 + math.exp(-u1))
            if 0.0 < r1 < 1.0:
                ld1 = logdet_part(r1, mu)
                if ld1 != -np.inf:
                    qa = 0.0
                    for j in range(J):
                        s = 0.0
                        for q in range(indptr[j], indptr[j + 1]):
                            s += bt[indices[q]]
                        qa += bt[j] * s
                    ld0 = logdet_part(rho, mu)
                    dlp = 0.5 * (ld1 - ld0) + 0.5 * (r1 - rho) * qa
                    dlp += math.log(r1) + math.log1p(-r1) - math.log(rho) - math.log1p(-rho)
                    if logu[t, p] < dlp:
                        rho = r1
                        acc[p] += 1

        g = sweep0 + t + 1
        if g > burn_in and (g - burn_in) % thin == 0:
            c = 0
            for k in range(K):
                out[rows, c] = alpha[k]
                c += 1
            for j in range(J):
                out[rows, c] = bt[j]
                c += 1
            for j in range(J):
                out[rows, c] = math.log(abs(lam[j])) if lam[j] != 0.0 else -np.inf
                c += 1
            out[rows, c] = math.log(abs(tau)) if tau != 0.0 else -np.inf
            c += 1
            out[rows, c] = rho
            c += 1
            for j in range(J):
                out[rows, c] = beta[j]
                c += 1
            rows += 1

    rho_arr[0] = rho
    return rows
