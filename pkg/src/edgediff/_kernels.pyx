# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the loops in ``_kernels_py``. Same signatures, same results."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, cos, sin, exp, fabs

cnp.import_array()


def cone_sum(targets, sources, prefactor, back_dirs, edge_dirs, double wavenumber,
             double half_diag, double fixed_tol, bint average):
    cdef const double[:, ::1] T = np.ascontiguousarray(targets, dtype=np.float64)
    cdef const double[:, ::1] S = np.ascontiguousarray(sources, dtype=np.float64)
    cdef const double[:, ::1] B = np.ascontiguousarray(back_dirs, dtype=np.float64)
    cdef const double[:, ::1] E = np.ascontiguousarray(edge_dirs, dtype=np.float64)
    pref = np.ascontiguousarray(prefactor, dtype=np.complex128)
    cdef const double[::1] pre = pref.real.copy()
    cdef const double[::1] pim = pref.imag.copy()
    cdef Py_ssize_t n = T.shape[0], m_src = S.shape[0], r, m
    out = np.zeros(n, dtype=np.complex128)
    cnt = np.zeros(n, dtype=np.int64)
    cdef double[::1] o_re = np.zeros(n)
    cdef double[::1] o_im = np.zeros(n)
    cdef long long[::1] c = cnt
    cdef double rx, ry, rz, d, res, tol, amp, ph, cph, sph
    for r in range(n):
        for m in range(m_src):
            rx = T[r, 0] - S[m, 0]
            ry = T[r, 1] - S[m, 1]
            rz = T[r, 2] - S[m, 2]
            d = sqrt(rx * rx + ry * ry + rz * rz)
            res = (rx / d + B[m, 0]) * E[m, 0] + (ry / d + B[m, 1]) * E[m, 1] + (rz / d + B[m, 2]) * E[m, 2]
            if fixed_tol >= 0:
                tol = fixed_tol
            else:
                tol = half_diag / d
            if fabs(res) <= tol:
                amp = 1.0 / sqrt(d)
                ph = wavenumber * d
                cph = cos(ph) * amp
                sph = -sin(ph) * amp
                o_re[r] += pre[m] * cph - pim[m] * sph
                o_im[r] += pre[m] * sph + pim[m] * cph
                c[r] += 1
        if average and c[r] > 0:
            o_re[r] /= c[r]
            o_im[r] /= c[r]
    out.real = np.asarray(o_re)
    out.imag = np.asarray(o_im)
    return out, cnt


def intensity_volume(rx, weights, pixels, tx, dirs, double wavenumber, double half_diag,
                     bint normalize):
    cdef const double[:, ::1] R = np.ascontiguousarray(rx, dtype=np.float64)
    cdef const double[:, ::1] P = np.ascontiguousarray(pixels, dtype=np.float64)
    cdef const double[:, ::1] D = np.ascontiguousarray(dirs, dtype=np.float64)
    w = np.ascontiguousarray(weights, dtype=np.complex128)
    cdef const double[::1] w_re = w.real.copy()
    cdef const double[::1] w_im = w.imag.copy()
    cdef const double[::1] t = np.ascontiguousarray(tx, dtype=np.float64)
    cdef Py_ssize_t n_rx = R.shape[0], n_pix = P.shape[0], n_dir = D.shape[0]
    cdef Py_ssize_t i, r, q
    out = np.zeros((n_pix, n_dir))
    cdef double[:, ::1] O = out
    cdef double[::1] acc_re = np.zeros(n_dir)
    cdef double[::1] acc_im = np.zeros(n_dir)
    cdef long long[::1] hits = np.zeros(n_dir, dtype=np.int64)
    cdef double px, py, pz, bx, by, bz, dt, ex, ey, ez, d, ux, uy, uz, tol, res
    cdef double ph, c_re, c_im, mag
    cdef bint have_phase
    for i in range(n_pix):
        px = P[i, 0]
        py = P[i, 1]
        pz = P[i, 2]
        bx = t[0] - px
        by = t[1] - py
        bz = t[2] - pz
        dt = sqrt(bx * bx + by * by + bz * bz)
        bx = bx / dt
        by = by / dt
        bz = bz / dt
        for q in range(n_dir):
            acc_re[q] = 0.0
            acc_im[q] = 0.0
            hits[q] = 0
        for r in range(n_rx):
            ex = R[r, 0] - px
            ey = R[r, 1] - py
            ez = R[r, 2] - pz
            d = sqrt(ex * ex + ey * ey + ez * ez)
            ux = ex / d + bx
            uy = ey / d + by
            uz = ez / d + bz
            tol = half_diag / d
            have_phase = False
            for q in range(n_dir):
                res = ux * D[q, 0] + uy * D[q, 1] + uz * D[q, 2]
                if fabs(res) <= tol:
                    if not have_phase:
                        ph = wavenumber * d
                        c_re = w_re[r] * cos(ph) - w_im[r] * sin(ph)
                        c_im = w_re[r] * sin(ph) + w_im[r] * cos(ph)
                        have_phase = True
                    acc_re[q] += c_re
                    acc_im[q] += c_im
                    hits[q] += 1
        for q in range(n_dir):
            mag = sqrt(acc_re[q] * acc_re[q] + acc_im[q] * acc_im[q])
            if normalize:
                if hits[q] > 0:
                    mag = mag / hits[q]
                else:
                    mag = 0.0
            O[i, q] = mag
    return out


def metropolis_walk(assign, movable, options, n_options, neighbors, int n_targets,
                    picks, alt_u, acc_u, temps):
    cdef int[::1] a = np.array(assign, dtype=np.int32)
    cdef const int[::1] mov = np.ascontiguousarray(movable, dtype=np.int32)
    cdef const int[:, ::1] opt = np.ascontiguousarray(options, dtype=np.int32)
    cdef const int[::1] nopt = np.ascontiguousarray(n_options, dtype=np.int32)
    cdef const int[:, ::1] nbr = np.ascontiguousarray(neighbors, dtype=np.int32)
    cdef const long long[::1] pk = np.ascontiguousarray(picks, dtype=np.int64)
    cdef const double[::1] au = np.ascontiguousarray(alt_u, dtype=np.float64)
    cdef const double[::1] cu = np.ascontiguousarray(acc_u, dtype=np.float64)
    cdef const double[::1] tk = np.ascontiguousarray(temps, dtype=np.float64)
    cdef Py_ssize_t n = a.shape[0], n_steps = pk.shape[0], n_nbr = nbr.shape[1]
    cdef long long[::1] counts = np.zeros(n_targets + 1, dtype=np.int64)
    history = np.empty(n_steps, dtype=np.int64)
    cdef long long[::1] hist = history
    best = np.array(a, dtype=np.int32)
    cdef int[::1] b = best
    cdef Py_ssize_t i, j, s, t
    cdef long long cut = 0, energy, best_e, d_cut, d_e, imb, accepted = 0
    cdef int cur, new, aj, k, r, seen, o

    for i in range(n):
        counts[a[i]] += 1
    for i in range(n):
        if a[i] == 0:
            continue
        for s in range(n_nbr):
            j = nbr[i, s]
            if j > i and a[j] != 0 and a[j] != a[i]:
                cut += 1
    energy = cut + _imbalance(counts, n_targets)
    best_e = energy

    for t in range(n_steps):
        i = mov[pk[t]]
        cur = a[i]
        k = nopt[pk[t]]
        r = <int>(au[t] * (k - 1))
        if r >= k - 1:
            r = k - 2
        new = -1
        seen = 0
        for s in range(k):
            o = opt[pk[t], s]
            if o == cur:
                continue
            if seen == r:
                new = o
                break
            seen += 1
        d_cut = 0
        for s in range(n_nbr):
            j = nbr[i, s]
            if j < 0:
                continue
            aj = a[j]
            if aj == 0:
                continue
            d_cut += (aj != new) - (aj != cur)
        counts[cur] -= 1
        counts[new] += 1
        imb = _imbalance(counts, n_targets)
        d_e = d_cut + imb - (energy - cut)
        if d_e <= 0 or cu[t] < exp(-d_e / tk[t]):
            a[i] = new
            cut += d_cut
            energy += d_e
            accepted += 1
            if energy < best_e:
                best_e = energy
                b[:] = a
        else:
            counts[cur] += 1
            counts[new] -= 1
        hist[t] = best_e
    return best, int(best_e), history, int(accepted)


cdef long long _imbalance(long long[::1] counts, int n_targets):
    cdef long long lo = counts[1], hi = counts[1]
    cdef int k
    for k in range(2, n_targets + 1):
        if counts[k] < lo:
            lo = counts[k]
        if counts[k] > hi:
            hi = counts[k]
    return hi - lo
