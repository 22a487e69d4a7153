"""Compiled inner loops: small Hermitian eigensolver and filter steps.

Everything here works on plain complex128 arrays so the same code serves the
single-step Python API and the per-path simulation loop.
"""

import numpy as np
from numba import njit

# status codes returned by the path kernel
OK = 0
STEP_TOO_LARGE = 1
DARK_JUMP = 2

HOMODYNE = 0
COUNTING = 1

DARK_THRESHOLD = 1e-12
TRACE_GUARD = 0.5


@njit(cache=True)
def _jacobi_inplace(a, V, max_sweeps):
    """Diagonalize Hermitian a in place, accumulating rotations into V (preset to I)."""
    n = a.shape[0]
    frob2 = 0.0
    for i in range(n):
        for j in range(n):
            frob2 += a[i, j].real ** 2 + a[i, j].imag ** 2
    if frob2 == 0.0 or n == 1:
        return True
    for sweep in range(max_sweeps + 1):
        off2 = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                off2 += a[i, j].real ** 2 + a[i, j].imag ** 2
        if off2 <= 1e-32 * frob2:
            return True
        if sweep == max_sweeps:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                b = a[p, q]
                g = abs(b)
                if g == 0.0:
                    continue
                e = b / g
                ebar = e.conjugate()
                theta = (a[q, q].real - a[p, p].real) / (2.0 * g)
                if theta >= 0.0:
                    t = 1.0 / (theta + np.sqrt(theta * theta + 1.0))
                else:
                    t = -1.0 / (-theta + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                # columns: a <- a G with G = [[c, s], [-s ebar, c ebar]]
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * ebar * akq
                    a[k, q] = s * akp + c * ebar * akq
                    vkp = V[k, p]
                    vkq = V[k, q]
                    V[k, p] = c * vkp - s * ebar * vkq
                    V[k, q] = s * vkp + c * ebar * vkq
                # rows: a <- G^* a
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = c * apk - s * e * aqk
                    a[q, k] = s * apk + c * e * aqk
                a[p, q] = 0.0
                a[q, p] = 0.0
                a[p, p] = a[p, p].real
                a[q, q] = a[q, q].real
    return False


@njit(cache=True)
def jacobi_eigh(A, max_sweeps):
    """Cyclic complex Jacobi. Returns (ascending eigenvalues, eigenvectors, converged)."""
    n = A.shape[0]
    a = A.copy()
    V = np.eye(n, dtype=np.complex128)
    converged = _jacobi_inplace(a, V, max_sweeps)
    w = np.empty(n)
    for i in range(n):
        w[i] = a[i, i].real
    order = np.argsort(w)
    w_sorted = np.empty(n)
    V_sorted = np.empty((n, n), dtype=np.complex128)
    for j in range(n):
        w_sorted[j] = w[order[j]]
        for i in range(n):
            V_sorted[i, j] = V[i, order[j]]
    return w_sorted, V_sorted, converged


@njit(cache=True)
def _mm(A, B, out):
    n = A.shape[0]
    for i in range(n):
        for j in range(n):
            acc = 0.0j
            for k in range(n):
                acc += A[i, k] * B[k, j]
            out[i, j] = acc


@njit(cache=True)
def _mm_adj(A, B, out):
    """out = A @ B^*"""
    n = A.shape[0]
    for i in range(n):
        for j in range(n):
            acc = 0.0j
            for k in range(n):
                acc += A[i, k] * B[j, k].conjugate()
            out[i, j] = acc


@njit(cache=True)
def _trace(A):
    acc = 0.0j
    for i in range(A.shape[0]):
        acc += A[i, i]
    return acc


@njit(cache=True)
def lindblad_state_drift(r, K, Ls, out, tmp, tmp2):
    """out = K r + r K^* + sum_k L_k r L_k^*, the predual generator applied to r."""
    n = r.shape[0]
    _mm(K, r, tmp)
    for i in range(n):
        for j in range(n):
            out[i, j] = tmp[i, j] + tmp[j, i].conjugate()
    for c in range(Ls.shape[0]):
        for i in range(n):
            for j in range(n):
                acc = 0.0j
                for k in range(n):
                    acc += Ls[c, i, k] * r[k, j]
                tmp[i, j] = acc
        for i in range(n):
            for j in range(n):
                acc = 0.0j
                for k in range(n):
                    acc += tmp[i, k] * Ls[c, j, k].conjugate()
                out[i, j] += acc


@njit(cache=True)
def _first_times(Ls, r, out):
    """out = L_1 r, returns Tr[(L_1 + L_1^*) r]."""
    n = r.shape[0]
    tr = 0.0
    for i in range(n):
        for j in range(n):
            acc = 0.0j
            for k in range(n):
                acc += Ls[0, i, k] * r[k, j]
            out[i, j] = acc
        tr += out[i, i].real
    return 2.0 * tr


@njit(cache=True)
def _intensity_into(r, Ls, jump_part, tmp):
    """jump_part = L_1 r L_1^*, returns its trace."""
    n = r.shape[0]
    _first_times(Ls, r, tmp)
    tr = 0.0
    for i in range(n):
        for j in range(n):
            acc = 0.0j
            for k in range(n):
                acc += tmp[i, k] * Ls[0, j, k].conjugate()
            jump_part[i, j] = acc
        tr += jump_part[i, i].real
    return tr


@njit(cache=True)
def _homodyne_into(r, dY, K, Ls, eta, dt, out, drift, tmp, tmp2):
    n = r.shape[0]
    lindblad_state_drift(r, K, Ls, drift, tmp, tmp2)
    m = _first_times(Ls, r, tmp)
    se = np.sqrt(eta)
    innov = dY - se * m * dt
    for i in range(n):
        for j in range(n):
            out[i, j] = (r[i, j] + drift[i, j] * dt
                         + se * (tmp[i, j] + tmp[j, i].conjugate() - m * r[i, j]) * innov)


@njit(cache=True)
def homodyne_raw(r, dY, K, Ls, eta, dt):
    """Euler-Maruyama increment of the diffusive filter, before reprojection."""
    n = r.shape[0]
    out = np.empty((n, n), dtype=np.complex128)
    drift = np.empty((n, n), dtype=np.complex128)
    tmp = np.empty((n, n), dtype=np.complex128)
    tmp2 = np.empty((n, n), dtype=np.complex128)
    _homodyne_into(r, dY, K, Ls, eta, dt, out, drift, tmp, tmp2)
    return out


@njit(cache=True)
def jump_intensity(r, Ls):
    """Tr[L_1 r L_1^*]."""
    n = r.shape[0]
    tmp = np.empty((n, n), dtype=np.complex128)
    jump_part = np.empty((n, n), dtype=np.complex128)
    return _intensity_into(r, Ls, jump_part, tmp)


@njit(cache=True)
def _counting_into(r, jumped, K, Ls, eta, dt, out, drift, jump_part, tmp, tmp2):
    """Writes the unnormalized next state into out; False for a jump from a dark state."""
    n = r.shape[0]
    lam = _intensity_into(r, Ls, jump_part, tmp)
    if jumped:
        if lam <= DARK_THRESHOLD:
            return False
        for i in range(n):
            for j in range(n):
                out[i, j] = jump_part[i, j] / lam
        return True
    lindblad_state_drift(r, K, Ls, drift, tmp, tmp2)
    for i in range(n):
        for j in range(n):
            out[i, j] = r[i, j] + (drift[i, j] - eta * (jump_part[i, j] - lam * r[i, j])) * dt
    return True


@njit(cache=True)
def counting_raw(r, jumped, K, Ls, eta, dt):
    """Returns (unnormalized next state, ok). ok is False for a jump from a dark state."""
    n = r.shape[0]
    out = r.copy()
    drift = np.empty((n, n), dtype=np.complex128)
    jump_part = np.empty((n, n), dtype=np.complex128)
    tmp = np.empty((n, n), dtype=np.complex128)
    tmp2 = np.empty((n, n), dtype=np.complex128)
    ok = _counting_into(r, jumped, K, Ls, eta, dt, out, drift, jump_part, tmp, tmp2)
    return out, ok


@njit(cache=True)
def _reproject_into(r, h, a, V):
    """h <- normalized PSD projection of r; a and V are workspace."""
    n = r.shape[0]
    for i in range(n):
        for j in range(n):
            h[i, j] = 0.5 * (r[i, j] + r[j, i].conjugate())
            a[i, j] = h[i, j]
            V[i, j] = 1.0 if i == j else 0.0
    converged = _jacobi_inplace(a, V, 60)
    wmin = a[0, 0].real
    for i in range(1, n):
        if a[i, i].real < wmin:
            wmin = a[i, i].real
    clipped = wmin < 0.0
    if clipped:
        for i in range(n):
            for j in range(n):
                acc = 0.0j
                for k in range(n):
                    w = a[k, k].real
                    if w > 0.0:
                        acc += V[i, k] * w * V[j, k].conjugate()
                h[i, j] = acc
    tr = 0.0
    for i in range(n):
        tr += h[i, i].real
    if tr > 0.0:
        for i in range(n):
            for j in range(n):
                h[i, j] = h[i, j] / tr
    return clipped, wmin, tr, converged


@njit(cache=True)
def reproject(r):
    """Symmetrize, clip negative eigenvalues, renormalize.

    Returns (state, clipped, min eigenvalue before clipping, trace before
    renormalization, converged).
    """
    h = np.empty_like(r)
    clipped, ev, tr, converged = _reproject_into(r, h, np.empty_like(r), np.empty_like(r))
    return h, clipped, ev, tr, converged


@njit(cache=True)
def run_pair(mode, K, Ls, eta, dt, r1, r2, noise, store_every, track_mis):
    """Propagate the true filter (which also generates the record) and the
    misspecified filter over len(noise) steps.

    noise holds standard normals (homodyne) or uniforms on [0, 1) (counting).
    States are stored at step 0, every store_every steps, and at the end.
    """
    n_steps = noise.shape[0]
    p = r1.shape[0]
    n_store = n_steps // store_every + 1
    if n_steps % store_every != 0:
        n_store += 1
    states = np.empty((n_store, 2, p, p), dtype=np.complex128)
    store_steps = np.empty(n_store, dtype=np.int64)
    obs = np.empty(n_steps)
    a = r1.copy()
    b = r2.copy()
    raw = np.empty((p, p), dtype=np.complex128)
    drift = np.empty((p, p), dtype=np.complex128)
    jump_part = np.empty((p, p), dtype=np.complex128)
    tmp = np.empty((p, p), dtype=np.complex128)
    tmp2 = np.empty((p, p), dtype=np.complex128)
    states[0, 0] = a
    states[0, 1] = b
    store_steps[0] = 0
    slot = 1
    n_clips = 0
    min_eig = np.inf
    max_trace_dev = 0.0
    max_jump_prob = 0.0
    status = OK
    status_step = -1
    status_branch = -1
    sqdt = np.sqrt(dt)
    se = np.sqrt(eta)
    wa = np.empty((p, p), dtype=np.complex128)
    wV = np.empty((p, p), dtype=np.complex128)
    dY = 0.0
    jumped = False
    for k in range(n_steps):
        if mode == HOMODYNE:
            m = _first_times(Ls, a, tmp)
            dY = se * m * dt + sqdt * noise[k]
            obs[k] = dY
        else:
            prob = eta * _intensity_into(a, Ls, jump_part, tmp) * dt
            if prob > 1.0:
                prob = 1.0
            if prob > max_jump_prob:
                max_jump_prob = prob
            jumped = noise[k] < prob
            obs[k] = 1.0 if jumped else 0.0
        for branch in range(2):
            if branch == 1 and not track_mis:
                b[:, :] = a
                break
            cur = a if branch == 0 else b
            if mode == HOMODYNE:
                _homodyne_into(cur, dY, K, Ls, eta, dt, raw, drift, tmp, tmp2)
            elif not _counting_into(cur, jumped, K, Ls, eta, dt, raw, drift, jump_part, tmp, tmp2):
                status = DARK_JUMP
                status_step = k
                status_branch = branch
                break
            clipped, ev, tr, _ = _reproject_into(raw, cur, wa, wV)
            if clipped:
                n_clips += 1
            if ev < min_eig:
                min_eig = ev
            if abs(tr - 1.0) > max_trace_dev:
                max_trace_dev = abs(tr - 1.0)
            if abs(tr - 1.0) > TRACE_GUARD:
                status = STEP_TOO_LARGE
                status_step = k
                status_branch = branch
                break
        if status != OK:
            break
        if (k + 1) % store_every == 0 or k + 1 == n_steps:
            states[slot, 0] = a
            states[slot, 1] = b
            store_steps[slot] = k + 1
            slot += 1
    return (states[:slot], store_steps[:slot], obs, n_clips, min_eig,
            max_trace_dev, max_jump_prob, status, status_step, status_branch)
