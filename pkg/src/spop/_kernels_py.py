"""Pure-numpy Jacobi sweep kernels.

Fallback for environments without the compiled extension.  Same algorithm
and sweep schedule as the compiled kernels: one-sided Jacobi rotations for
vector orthogonalization (SVD) and two-sided Jacobi rotations for symmetric
eigenvalues.  Rounds of disjoint pairs are applied batched; within a round
the rotations commute, so this matches sequential processing.
"""

import numpy as np

from ._schedule import pair_rounds


def svd_sweeps(vecs, acc, tol, max_sweeps):
    """Mutually orthogonalize the rows of ``vecs`` in place.

    ``vecs`` holds one vector per row (the columns of the matrix being
    decomposed).  ``acc`` (n_vec x n_vec, or None) accumulates the applied
    rotations, one basis vector per row.  Returns the number of sweeps used,
    or -1 if the worst off-diagonal ratio still exceeds ``tol`` after
    ``max_sweeps``.
    """
    n = vecs.shape[0]
    rounds = pair_rounds(n)
    if not rounds:
        return 1
    # cached square norms, updated analytically per rotation (de Rijk);
    # drift only affects rotation decisions, final norms are recomputed
    sqn = np.einsum("ik,ik->i", vecs, vecs)
    # vectors below 1e-14 of the largest are rank-clamped to zero by the
    # caller anyway; rotating such rounding-noise clusters cycles without
    # converging, so freeze them (1e-28 on the squared norms)
    tiny = 1e-28 * float(sqn.max(initial=0.0))
    for sweep in range(max_sweeps):
        if sweep > 0:
            # refresh the cache: accumulated drift must not bias the
            # convergence ratios near the tolerance
            sqn = np.einsum("ik,ik->i", vecs, vecs)
        worst = 0.0
        for pairs in rounds:
            i = pairs[:, 0]
            j = pairs[:, 1]
            app = sqn[i]
            aqq = sqn[j]
            apq = np.einsum("ik,ik->i", vecs[i], vecs[j])
            live = (app > tiny) & (aqq > tiny)
            denom = np.sqrt(app * aqq)
            ratio = np.divide(
                np.abs(apq), denom, out=np.zeros_like(apq), where=live
            )
            if ratio.size:
                worst = max(worst, float(ratio.max()))
            rot = ratio > tol
            if not rot.any():
                continue
            apq_r = apq[rot]
            tau = (aqq[rot] - app[rot]) / (2.0 * apq_r)
            t = np.sign(tau) / (np.abs(tau) + np.sqrt(1.0 + tau * tau))
            t[tau == 0.0] = 1.0
            c = (1.0 / np.sqrt(1.0 + t * t))[:, None]
            s = (t[:, None]) * c
            ir = i[rot]
            jr = j[rot]
            ri = vecs[ir]
            rj = vecs[jr]
            vecs[ir] = c * ri - s * rj
            vecs[jr] = s * ri + c * rj
            if acc is not None:
                vi = acc[ir]
                vj = acc[jr]
                acc[ir] = c * vi - s * vj
                acc[jr] = s * vi + c * vj
            # the shrinking side of the update cancels; refresh it exactly
            # so stale norms cannot fake convergence on dying columns
            new_i = sqn[ir] - t * apq_r
            new_j = sqn[jr] + t * apq_r
            stale_i = new_i < 0.1 * sqn[ir]
            stale_j = new_j < 0.1 * sqn[jr]
            if stale_i.any():
                fresh = vecs[ir[stale_i]]
                new_i[stale_i] = np.einsum("ik,ik->i", fresh, fresh)
            if stale_j.any():
                fresh = vecs[jr[stale_j]]
                new_j[stale_j] = np.einsum("ik,ik->i", fresh, fresh)
            sqn[ir] = np.maximum(new_i, 0.0)
            sqn[jr] = np.maximum(new_j, 0.0)
        if worst <= tol:
            return sweep + 1
    return -1


def eig_sweeps(a, tol, max_sweeps):
    """Diagonalize the symmetric matrix ``a`` in place (eigenvalues only).

    Returns sweeps used, or -1 on non-convergence.  The rotation threshold
    is relative to the local diagonal magnitude, so indefinite matrices are
    handled; a zero diagonal with a nonzero off-diagonal still rotates.
    """
    n = a.shape[0]
    rounds = pair_rounds(n)
    if not rounds:
        return 1
    # off-diagonals at the rounding floor of the matrix norm are
    # numerically zero; rotating them cycles without converging
    tiny = 1e-15 * float(np.sqrt(np.sum(a * a)))
    for sweep in range(max_sweeps):
        worst = 0.0
        for pairs in rounds:
            p = pairs[:, 0]
            q = pairs[:, 1]
            app = a[p, p]
            aqq = a[q, q]
            apq = a[p, q]
            live = np.abs(apq) > tiny
            denom = np.sqrt(app * app + aqq * aqq)
            ratio = np.divide(
                np.abs(apq), denom, out=np.zeros_like(apq), where=live & (denom > 0.0)
            )
            ratio[live & (denom == 0.0)] = np.inf
            if ratio.size:
                worst = max(worst, float(ratio.max()))
            rot = ratio > tol
            if not rot.any():
                continue
            tau = (aqq[rot] - app[rot]) / (2.0 * apq[rot])
            t = np.sign(tau) / (np.abs(tau) + np.sqrt(1.0 + tau * tau))
            t[tau == 0.0] = 1.0
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            pr = p[rot]
            qr = q[rot]
            rp = a[pr, :]
            rq = a[qr, :]
            a[pr, :] = c[:, None] * rp - s[:, None] * rq
            a[qr, :] = s[:, None] * rp + c[:, None] * rq
            cp = a[:, pr]
            cq = a[:, qr]
            a[:, pr] = c * cp - s * cq
            a[:, qr] = s * cp + c * cq
            a[pr, qr] = 0.0
            a[qr, pr] = 0.0
        if worst <= tol:
            return sweep + 1
    return -1
