"""Pure numpy/Python implementations of the hot loops.

Signatures mirror the compiled ``_kernels`` extension exactly; see
:mod:`edgediff.backend` for selection.
"""
import math

import numpy as np

_CHUNK = 64


def cone_sum(targets, sources, prefactor, back_dirs, edge_dirs, wavenumber,
             half_diag, fixed_tol, average):
    """Sum Keller-gated edge contributions at each target point.

    A source ``m`` contributes ``prefactor[m] * exp(-j k d) / sqrt(d)`` at a
    target ``d`` away whenever the target lies within tolerance of the cone
    defined by ``back_dirs[m]`` (unit vector toward the illuminator) and
    ``edge_dirs[m]``. The tolerance is ``fixed_tol`` when nonnegative, else
    ``half_diag / d``. With ``average`` the sum is divided by the number of
    contributing sources.

    Returns ``(field, count)``.
    """
    targets = np.ascontiguousarray(targets, dtype=float)
    sources = np.ascontiguousarray(sources, dtype=float)
    n = targets.shape[0]
    out = np.zeros(n, dtype=complex)
    cnt = np.zeros(n, dtype=np.int64)
    for m in range(sources.shape[0]):
        rx = targets[:, 0] - sources[m, 0]
        ry = targets[:, 1] - sources[m, 1]
        rz = targets[:, 2] - sources[m, 2]
        d = np.sqrt(rx * rx + ry * ry + rz * rz)
        b = back_dirs[m]
        e = edge_dirs[m]
        res = (rx / d + b[0]) * e[0] + (ry / d + b[1]) * e[1] + (rz / d + b[2]) * e[2]
        tol = fixed_tol if fixed_tol >= 0 else half_diag / d
        hit = np.abs(res) <= tol
        if not hit.any():
            continue
        dh = d[hit]
        out[hit] += prefactor[m] * np.exp(-1j * wavenumber * dh) / np.sqrt(dh)
        cnt[hit] += 1
    if average:
        nz = cnt > 0
        out[nz] /= cnt[nz]
    return out, cnt


def intensity_volume(rx, weights, pixels, tx, dirs, wavenumber, half_diag, normalize):
    """Coherent Keller-gated sums ``|sum_r w_r exp(+j k |r - p|)|`` per pixel and direction.

    ``weights`` already carry the transmitter phase compensation. Returns an
    ``(n_pixels, n_dirs)`` array.
    """
    rx = np.ascontiguousarray(rx, dtype=float)
    pixels = np.ascontiguousarray(pixels, dtype=float)
    dirs = np.ascontiguousarray(dirs, dtype=float)
    weights = np.asarray(weights, dtype=complex)
    m_pix = pixels.shape[0]
    out = np.zeros((m_pix, dirs.shape[0]))
    for start in range(0, m_pix, _CHUNK):
        p = pixels[start:start + _CHUNK]
        rxx = rx[None, :, 0] - p[:, None, 0]
        ryy = rx[None, :, 1] - p[:, None, 1]
        rzz = rx[None, :, 2] - p[:, None, 2]
        d = np.sqrt(rxx * rxx + ryy * ryy + rzz * rzz)
        tx_x = tx[0] - p[:, 0]
        tx_y = tx[1] - p[:, 1]
        tx_z = tx[2] - p[:, 2]
        dt = np.sqrt(tx_x * tx_x + tx_y * tx_y + tx_z * tx_z)
        ux = rxx / d + (tx_x / dt)[:, None]
        uy = ryy / d + (tx_y / dt)[:, None]
        uz = rzz / d + (tx_z / dt)[:, None]
        tol = half_diag / d
        term = weights[None, :] * np.exp(1j * wavenumber * d)
        for q in range(dirs.shape[0]):
            e = dirs[q]
            res = ux * e[0] + uy * e[1] + uz * e[2]
            hit = np.abs(res) <= tol
            acc = np.where(hit, term, 0).sum(axis=1)
            val = np.abs(acc)
            if normalize:
                c = hit.sum(axis=1)
                val = np.where(c > 0, val / np.maximum(c, 1), 0.0)
            out[start:start + _CHUNK, q] = val
    return out


def metropolis_walk(assign, movable, options, n_options, neighbors, n_targets,
                    picks, alt_u, acc_u, temps):
    """Run one Metropolis chain over target assignments.

    ``assign`` holds 0 for idle elements and 1..K otherwise. Each step picks
    ``movable[picks[t]]``, moves it to an alternative drawn from its option
    row using ``alt_u[t]``, and accepts with probability
    ``min(1, exp(-dE / temps[t]))`` tested against ``acc_u[t]``.

    Returns ``(best_assign, best_energy, best_history, n_accepted)``.
    """
    a = [int(x) for x in assign]
    nbr = [[int(j) for j in row if j >= 0] for row in neighbors]
    counts = [0] * (n_targets + 1)
    for x in a:
        counts[x] += 1
    cut = 0
    for i, row in enumerate(nbr):
        if a[i] == 0:
            continue
        for j in row:
            if j > i and a[j] != 0 and a[j] != a[i]:
                cut += 1

    def imbalance():
        c = counts[1:]
        return max(c) - min(c)

    energy = cut + imbalance()
    best = list(a)
    best_e = energy
    history = np.empty(len(picks), dtype=np.int64)
    accepted = 0
    for t in range(len(picks)):
        m = int(picks[t])
        i = int(movable[m])
        cur = a[i]
        k = int(n_options[m])
        # choose uniformly among the k - 1 options other than the current one
        r = int(alt_u[t] * (k - 1))
        if r >= k - 1:
            r = k - 2
        new = -1
        seen = 0
        for s in range(k):
            o = int(options[m, s])
            if o == cur:
                continue
            if seen == r:
                new = o
                break
            seen += 1
        d_cut = 0
        for j in nbr[i]:
            aj = a[j]
            if aj == 0:
                continue
            d_cut += (aj != new) - (aj != cur)
        counts[cur] -= 1
        counts[new] += 1
        d_e = d_cut + imbalance() - (energy - cut)
        if d_e <= 0 or acc_u[t] < math.exp(-d_e / temps[t]):
            a[i] = new
            cut += d_cut
            energy += d_e
            accepted += 1
            if energy < best_e:
                best_e = energy
                best = list(a)
        else:
            counts[cur] += 1
            counts[new] -= 1
        history[t] = best_e
    return np.asarray(best, dtype=np.int32), int(best_e), history, accepted
