"""Compiled inner loops: 4x4 Jacobi eigensolver, physicality projection,
Euler-Maruyama trajectory integration, and the deterministic reachability ODE.

Everything here works on raw complex128 arrays and returns status codes
instead of raising; the public modules translate those into exceptions.
Status codes: 0 ok, 1 non-finite entry, 2 clipped eigenvalue mass too large,
3 trace collapsed below 0.5 before renormalization.

The per-step clipped-mass budget (0.05) separates the benign second-order
overshoot of strong feedback kicks at pure states (measured <= 5e-3 per
step at dt = 1e-3 with the reference gains) from genuine integration
blowup, which clips at trace scale within a few steps.
"""

import numpy as np
from numba import njit

# controller kinds
KIND_ZERO = 0
KIND_TWO_CHANNEL = 1
KIND_ONE_CHANNEL = 2

STATUS_OK = 0
STATUS_NONFINITE = 1
STATUS_CLIP_MASS = 2
STATUS_TRACE_LOST = 3

CLIP_MASS_LIMIT = 0.05
TRACE_FLOOR = 0.5


@njit(cache=True, nogil=True)
def _mm4(a, b, out):
    for i in range(4):
        for j in range(4):
            s = 0.0 + 0.0j
            for k in range(4):
                s += a[i, k] * b[k, j]
            out[i, j] = s


@njit(cache=True, nogil=True)
def _trace_prod_re(a, b):
    # Re Tr(a b)
    s = 0.0
    for i in range(4):
        for k in range(4):
            s += (a[i, k] * b[k, i]).real
    return s


@njit(cache=True, nogil=True)
def jacobi_eigh4(a, w, v):
    """Cyclic Jacobi diagonalization of a 4x4 Hermitian matrix.

    `a` is destroyed. Eigenvalues land in `w` ascending, matching
    eigenvector columns in `v`. Sweeps until the off-diagonal Frobenius
    norm falls below 1e-14 relative to the matrix scale.
    """
    for i in range(4):
        for j in range(4):
            v[i, j] = 1.0 + 0.0j if i == j else 0.0 + 0.0j
    scale2 = 0.0
    for i in range(4):
        for j in range(4):
            m = abs(a[i, j])
            scale2 += m * m
    if scale2 < 1.0:
        scale2 = 1.0
    thr2 = 1e-28 * scale2
    for _sweep in range(60):
        off2 = 0.0
        for i in range(4):
            for j in range(i + 1, 4):
                m = abs(a[i, j])
                off2 += 2.0 * m * m
        if off2 <= thr2:
            break
        for p in range(3):
            for q in range(p + 1, 4):
                apq = a[p, q]
                r = abs(apq)
                if r == 0.0:
                    continue
                ph = apq / r
                app = a[p, p].real
                aqq = a[q, q].real
                tau = (aqq - app) / (2.0 * r)
                if tau >= 0.0:
                    t = 1.0 / (tau + np.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                a[p, p] = app - t * r
                a[q, q] = aqq + t * r
                a[p, q] = 0.0
                a[q, p] = 0.0
                for k in range(4):
                    if k == p or k == q:
                        continue
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * np.conj(ph) * akq
                    a[k, q] = s * ph * akp + c * akq
                    a[p, k] = np.conj(a[k, p])
                    a[q, k] = np.conj(a[k, q])
                for k in range(4):
                    vkp = v[k, p]
                    vkq = v[k, q]
                    v[k, p] = c * vkp - s * np.conj(ph) * vkq
                    v[k, q] = s * ph * vkp + c * vkq
    for i in range(4):
        w[i] = a[i, i].real
    # insertion sort ascending, carrying eigenvector columns
    for i in range(1, 4):
        key = w[i]
        c0 = v[0, i]
        c1 = v[1, i]
        c2 = v[2, i]
        c3 = v[3, i]
        j = i - 1
        while j >= 0 and w[j] > key:
            w[j + 1] = w[j]
            v[0, j + 1] = v[0, j]
            v[1, j + 1] = v[1, j]
            v[2, j + 1] = v[2, j]
            v[3, j + 1] = v[3, j]
            j -= 1
        w[j + 1] = key
        v[0, j + 1] = c0
        v[1, j + 1] = c1
        v[2, j + 1] = c2
        v[3, j + 1] = c3


@njit(cache=True, nogil=True)
def project_density4(rho, tol, clip_limit, scratch, w, v):
    """Hermitize, clip negative eigenvalues, renormalize trace in place.

    Negative eigenvalues with magnitude above `tol` count toward the
    returned clipped mass; smaller ones are treated as roundoff.
    Returns (clipped_mass, status).
    """
    for i in range(4):
        for j in range(i, 4):
            m = 0.5 * (rho[i, j] + np.conj(rho[j, i]))
            scratch[i, j] = m
            scratch[j, i] = np.conj(m)
    jacobi_eigh4(scratch, w, v)
    clipped = 0.0
    tr = 0.0
    for i in range(4):
        if w[i] < 0.0:
            if -w[i] > tol:
                clipped += -w[i]
            w[i] = 0.0
        tr += w[i]
    if clipped > clip_limit:
        return clipped, STATUS_CLIP_MASS
    if tr < TRACE_FLOOR:
        return clipped, STATUS_TRACE_LOST
    inv = 1.0 / tr
    for i in range(4):
        for j in range(4):
            s = 0.0 + 0.0j
            for k in range(4):
                s += v[i, k] * w[k] * np.conj(v[j, k])
            rho[i, j] = s * inv
    return clipped, STATUS_OK


@njit(cache=True, nogil=True)
def smoothing_gate(x, eps):
    if x < eps:
        return 0.0
    if x >= 1.0 - eps:
        return 1.0
    return 0.5 * np.sin(np.pi * (x - 0.5) / (1.0 - 2.0 * eps)) + 0.5


@njit(cache=True, nogil=True)
def control_eval(rho, kind, cpar, hc, tgt, tmp, b, u):
    """Evaluate the feedback law at `rho` into u[0:2].

    cpar = (alpha, beta, gamma, gamma1, gamma2, epsilon);
    hc holds the control Hamiltonians, tgt the target projector.
    """
    u[0] = 0.0
    u[1] = 0.0
    if kind == KIND_ZERO:
        return
    x = _trace_prod_re(rho, tgt)
    _mm4(rho, tgt, tmp)
    _mm4(hc[0], tmp, b)
    z = 0.0 + 0.0j
    for i in range(4):
        z += b[i, i]
    t1 = -2.0 * z.imag  # Tr(i[H1, rho] tgt)
    if kind == KIND_TWO_CHANNEL:
        u[0] = cpar[0] * (1.0 - x) ** cpar[1] - cpar[2] * t1
        return
    # one-channel law: u1 unconditional, u2 gated by the smoothing function
    u[0] = cpar[3] - t1
    _mm4(hc[1], tmp, b)
    z = 0.0 + 0.0j
    for i in range(4):
        z += b[i, i]
    t2 = -2.0 * z.imag
    u[1] = smoothing_gate(x, cpar[5]) * (cpar[4] - t2)


@njit(cache=True, nogil=True)
def integrate_em_kernel(rho0, dt, n_steps, dW, n_ch, L, Lsq, eta, H0,
                        n_controls, hc, kind, cpar, tgt, proj_tol,
                        stride, out_states, out_u):
    """Euler-Maruyama integration with per-step physicality projection.

    dW holds actual Wiener increments, shape (n_steps, channels).
    States and control values are logged every `stride` steps (plus the
    final step when it does not fall on the stride grid).
    Returns (status, failed_step, n_logged, clipped_total, clipped_max).
    """
    rho = rho0.copy()
    tmp = np.empty((4, 4), dtype=np.complex128)
    b = np.empty((4, 4), dtype=np.complex128)
    heff = np.empty((4, 4), dtype=np.complex128)
    drift = np.empty((4, 4), dtype=np.complex128)
    gdif = np.empty((2, 4, 4), dtype=np.complex128)
    scratch = np.empty((4, 4), dtype=np.complex128)
    w = np.empty(4, dtype=np.float64)
    v = np.empty((4, 4), dtype=np.complex128)
    u = np.zeros(2, dtype=np.float64)
    se = np.empty(2, dtype=np.float64)
    for ch in range(n_ch):
        se[ch] = np.sqrt(eta[ch])
    clipped_total = 0.0
    clipped_max = 0.0
    control_eval(rho, kind, cpar, hc, tgt, tmp, b, u)
    for i in range(4):
        for j in range(4):
            out_states[0, i, j] = rho[i, j]
    out_u[0, 0] = u[0]
    out_u[0, 1] = u[1]
    n_log = 1
    for step in range(n_steps):
        control_eval(rho, kind, cpar, hc, tgt, tmp, b, u)
        for i in range(4):
            for j in range(4):
                heff[i, j] = H0[i, j]
        for m in range(n_controls):
            if u[m] != 0.0:
                for i in range(4):
                    for j in range(4):
                        heff[i, j] += u[m] * hc[m, i, j]
        _mm4(heff, rho, tmp)
        for i in range(4):
            for j in range(4):
                drift[i, j] = -1j * (tmp[i, j] - np.conj(tmp[j, i]))
        for ch in range(n_ch):
            _mm4(L[ch], rho, b)  # b = L rho
            ell = 0.0
            for i in range(4):
                ell += b[i, i].real
            _mm4(b, L[ch], tmp)  # tmp = L rho L
            for i in range(4):
                for j in range(4):
                    gdif[ch, i, j] = b[i, j] + np.conj(b[j, i]) - 2.0 * ell * rho[i, j]
                    drift[i, j] += tmp[i, j]
            _mm4(Lsq[ch], rho, tmp)  # tmp = L^2 rho
            for i in range(4):
                for j in range(4):
                    drift[i, j] -= 0.5 * (tmp[i, j] + np.conj(tmp[j, i]))
        for i in range(4):
            for j in range(4):
                acc = rho[i, j] + drift[i, j] * dt
                for ch in range(n_ch):
                    acc += se[ch] * gdif[ch, i, j] * dW[step, ch]
                rho[i, j] = acc
        ok = True
        for i in range(4):
            for j in range(4):
                val = rho[i, j]
                if not (np.isfinite(val.real) and np.isfinite(val.imag)):
                    ok = False
        if not ok:
            return STATUS_NONFINITE, step, n_log, clipped_total, clipped_max
        clipped, status = project_density4(rho, proj_tol, CLIP_MASS_LIMIT, scratch, w, v)
        if status != STATUS_OK:
            return status, step, n_log, clipped_total, clipped_max
        clipped_total += clipped
        if clipped > clipped_max:
            clipped_max = clipped
        if (step + 1) % stride == 0 or step == n_steps - 1:
            control_eval(rho, kind, cpar, hc, tgt, tmp, b, u)
            for i in range(4):
                for j in range(4):
                    out_states[n_log, i, j] = rho[i, j]
            out_u[n_log, 0] = u[0]
            out_u[n_log, 1] = u[1]
            n_log += 1
    return STATUS_OK, -1, n_log, clipped_total, clipped_max


@njit(cache=True, nogil=True)
def support_field(rho, v_in, n_ch, L, eta, M, H0, n_controls, hc,
                  kind, cpar, tgt, tmp, b, u, out):
    """Right-hand side of the deterministic reachability equation.

    drift = F0(rho, u(rho)) + sum_j Fhat_j(rho) + sum_j sqrt(eta_j) G_j(rho) v_j
    with Fhat_j = (1-eta_j)(L_j rho L_j - M_j rho) + 2 eta_j Tr(L_j rho) G_j(rho).
    """
    control_eval(rho, kind, cpar, hc, tgt, tmp, b, u)
    for i in range(4):
        for j in range(4):
            out[i, j] = 0.0 + 0.0j
    # Hamiltonian part
    for i in range(4):
        for j in range(4):
            tmp[i, j] = H0[i, j]
    for m in range(n_controls):
        if u[m] != 0.0:
            for i in range(4):
                for j in range(4):
                    tmp[i, j] += u[m] * hc[m, i, j]
    _mm4(tmp, rho, b)
    for i in range(4):
        for j in range(4):
            out[i, j] += -1j * (b[i, j] - np.conj(b[j, i]))
    for ch in range(n_ch):
        _mm4(L[ch], rho, b)  # L rho
        ell = 0.0
        for i in range(4):
            ell += b[i, i].real
        _mm4(b, L[ch], tmp)  # L rho L
        one_minus = 1.0 - eta[ch]
        coef = 2.0 * eta[ch] * ell + np.sqrt(eta[ch]) * v_in[ch]
        for i in range(4):
            for j in range(4):
                g = b[i, j] + np.conj(b[j, i]) - 2.0 * ell * rho[i, j]
                out[i, j] += one_minus * (tmp[i, j] - M[ch] * rho[i, j]) + coef * g


@njit(cache=True, nogil=True)
def integrate_support_kernel(rho0, dt, n_steps, v_path, n_ch, L, eta, M,
                             H0, n_controls, hc, kind, cpar, tgt, L_unit,
                             lam_bar, demo_gain, demo_cap, proj_tol, stride,
                             out_states):
    """Classical Runge-Kutta integration of the reachability equation.

    When demo_gain > 0 the inputs follow the constructive feedback
    v_j = K (lam_bar_j - Tr(L_unit_j rho)) / X(rho), capped at demo_cap;
    otherwise the piecewise-constant rows of v_path are used. Inputs are
    held constant across the substeps of each step.
    Returns (status, failed_step, n_logged).
    """
    rho = rho0.copy()
    tmp = np.empty((4, 4), dtype=np.complex128)
    b = np.empty((4, 4), dtype=np.complex128)
    u = np.zeros(2, dtype=np.float64)
    k1 = np.empty((4, 4), dtype=np.complex128)
    k2 = np.empty((4, 4), dtype=np.complex128)
    k3 = np.empty((4, 4), dtype=np.complex128)
    k4 = np.empty((4, 4), dtype=np.complex128)
    stage = np.empty((4, 4), dtype=np.complex128)
    scratch = np.empty((4, 4), dtype=np.complex128)
    w = np.empty(4, dtype=np.float64)
    vv = np.empty((4, 4), dtype=np.complex128)
    v_in = np.zeros(2, dtype=np.float64)
    for i in range(4):
        for j in range(4):
            out_states[0, i, j] = rho[i, j]
    n_log = 1
    for step in range(n_steps):
        if demo_gain > 0.0:
            x = _trace_prod_re(rho, tgt)
            for ch in range(n_ch):
                p = lam_bar[ch] - _trace_prod_re(L_unit[ch], rho)
                if x * demo_cap > demo_gain * abs(p):
                    raw = demo_gain * p / x
                else:
                    raw = demo_cap if p >= 0.0 else -demo_cap
                v_in[ch] = raw
        else:
            for ch in range(n_ch):
                v_in[ch] = v_path[step, ch]
        support_field(rho, v_in, n_ch, L, eta, M, H0, n_controls, hc,
                      kind, cpar, tgt, tmp, b, u, k1)
        for i in range(4):
            for j in range(4):
                stage[i, j] = rho[i, j] + 0.5 * dt * k1[i, j]
        support_field(stage, v_in, n_ch, L, eta, M, H0, n_controls, hc,
                      kind, cpar, tgt, tmp, b, u, k2)
        for i in range(4):
            for j in range(4):
                stage[i, j] = rho[i, j] + 0.5 * dt * k2[i, j]
        support_field(stage, v_in, n_ch, L, eta, M, H0, n_controls, hc,
                      kind, cpar, tgt, tmp, b, u, k3)
        for i in range(4):
            for j in range(4):
                stage[i, j] = rho[i, j] + dt * k3[i, j]
        support_field(stage, v_in, n_ch, L, eta, M, H0, n_controls, hc,
                      kind, cpar, tgt, tmp, b, u, k4)
        ok = True
        for i in range(4):
            for j in range(4):
                rho[i, j] += (dt / 6.0) * (k1[i, j] + 2.0 * k2[i, j]
                                           + 2.0 * k3[i, j] + k4[i, j])
                val = rho[i, j]
                if not (np.isfinite(val.real) and np.isfinite(val.imag)):
                    ok = False
        if not ok:
            return STATUS_NONFINITE, step, n_log
        clipped, status = project_density4(rho, proj_tol, CLIP_MASS_LIMIT, scratch, w, vv)
        if status != STATUS_OK:
            return status, step, n_log
        if (step + 1) % stride == 0 or step == n_steps - 1:
            for i in range(4):
                for j in range(4):
                    out_states[n_log, i, j] = rho[i, j]
            n_log += 1
    return STATUS_OK, -1, n_log
