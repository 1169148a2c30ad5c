"""
Compiled inner loops for the one-sided upwind sweeps.

Index conventions: rows i = 0..2I (y), columns j = 0..2J (v), r = J // I and
the diagonal of row i sits at column d = r*i.  In row units W_ij / dy equals
(j - d) / r.  Columns j > d of a row are updated by the backward sweep
(ascending i), columns j < d by the forward sweep (descending i).  The
diagonal node is computed twice, once by each sweep, with W*Q set to zero.

The input state of a step is ``scale * Q - shift * P``; this lets the caller
fold the previous normalization (equilibrium) or mean-zero projection
(corrector) into the next sweep instead of spending a pass on it.
"""

from __future__ import annotations

import numba as nb
import numpy as np

_OPTS = dict(cache=True, boundscheck=False, error_model="numpy", nogil=True)


# reassociation lets LLVM vectorize the reduction; order is still fixed per build
@nb.njit(cache=True, boundscheck=False, fastmath={"reassoc"})
def _rowsum(x, lo, hi):
    s = 0.0
    for j in range(lo, hi):
        s += x[j]
    return s


@nb.njit(**_OPTS)
def sweep_step(Q, QL, QR, avg, scale, P, PL, PR, avgP, shift, S, SL, SR,
               lam, dt, I, J, Qn, QLn, QRn, avg_new):
    """
    One semi-implicit step.  Loss and transport are implicit, the gain
    Lambda0 * <Q> and the optional source S are explicit.  Writes the new
    state into (Qn, QLn, QRn) and its row averages into ``avg_new``.
    """
    n_i = 2 * I
    n_j = 2 * J
    r = J // I
    inv_r = 1.0 / r
    idt = 1.0 / dt
    a = scale * idt
    b = shift * idt
    has_p = P is not None
    has_s = S is not None
    # rec[m] = 1 / (idt + lam + 1.5 m / r), refreshed when lam changes between rows
    rec = np.empty(n_j + 1)
    rec_lam = np.nan

    Qn[0, :] = 0.0
    Qn[n_i, :] = 0.0
    QLn[0] = 0.0
    QRn[0] = 0.0
    QLn[n_i] = 0.0
    QRn[n_i] = 0.0

    # backward sweep: y_i <= v_j G
    for i in range(1, n_i):
        li = lam[i]
        if has_p:
            gain = li * (scale * avg[i] - shift * avgP[i])
        else:
            gain = li * scale * avg[i]
        base = idt + li
        d = r * i
        if li != rec_lam:
            for m in range(n_j + 1):
                rec[m] = 1.0 / (base + 1.5 * m * inv_r)
            rec_lam = li
        out = Qn[i]
        cur = Q[i]
        if i == 1:
            if has_p and has_s:
                pr = P[i]
                sr = S[i]
                for j in range(d + 1, n_j + 1):
                    k = (j - d) * inv_r
                    out[j] = (a * cur[j] - b * pr[j] + gain + sr[j]) / (base + k)
            elif has_p:
                pr = P[i]
                for j in range(d + 1, n_j + 1):
                    k = (j - d) * inv_r
                    out[j] = (a * cur[j] - b * pr[j] + gain) / (base + k)
            elif has_s:
                sr = S[i]
                for j in range(d + 1, n_j + 1):
                    k = (j - d) * inv_r
                    out[j] = (a * cur[j] + gain + sr[j]) / (base + k)
            else:
                for j in range(d + 1, n_j + 1):
                    k = (j - d) * inv_r
                    out[j] = (a * cur[j] + gain) / (base + k)
            inflow = 0.0
        else:
            p1 = Qn[i - 1]
            p2 = Qn[i - 2]
            if has_p and has_s:
                pr = P[i]
                sr = S[i]
                for j in range(d + 1, n_j + 1):
                    k = (j - d) * inv_r
                    out[j] = (a * cur[j] - b * pr[j] + gain + sr[j]
                              + 2.0 * (k + 1.0) * p1[j] - 0.5 * (k + 2.0) * p2[j]) * rec[j - d]
            elif has_p:
                pr = P[i]
                for j in range(d + 1, n_j + 1):
                    k = (j - d) * inv_r
                    out[j] = (a * cur[j] - b * pr[j] + gain
                              + 2.0 * (k + 1.0) * p1[j] - 0.5 * (k + 2.0) * p2[j]) * rec[j - d]
            elif has_s:
                sr = S[i]
                for j in range(d + 1, n_j + 1):
                    k = (j - d) * inv_r
                    out[j] = (a * cur[j] + gain + sr[j]
                              + 2.0 * (k + 1.0) * p1[j] - 0.5 * (k + 2.0) * p2[j]) * rec[j - d]
            else:
                for j in range(d + 1, n_j + 1):
                    k = (j - d) * inv_r
                    out[j] = (a * cur[j] + gain
                              + 2.0 * (k + 1.0) * p1[j] - 0.5 * (k + 2.0) * p2[j]) * rec[j - d]
            # W at rows i-1, i-2 on this column is dy and 2 dy
            inflow = 2.0 * p1[d] - p2[d]
        xl = a * QL[i] + gain + inflow
        if has_p:
            xl -= b * PL[i]
        if has_s:
            xl += SL[i]
        QLn[i] = xl / base
        avg_new[i] = 2.0 * _rowsum(out, d + 1, n_j) + out[n_j] + QLn[i]

    # forward sweep: y_i >= v_j G
    for i in range(n_i - 1, 0, -1):
        li = lam[i]
        if has_p:
            gain = li * (scale * avg[i] - shift * avgP[i])
        else:
            gain = li * scale * avg[i]
        base = idt + li
        d = r * i
        if li != rec_lam:
            for m in range(n_j + 1):
                rec[m] = 1.0 / (base + 1.5 * m * inv_r)
            rec_lam = li
        out = Qn[i]
        cur = Q[i]
        if i == n_i - 1:
            if has_p and has_s:
                pr = P[i]
                sr = S[i]
                for j in range(0, d):
                    k = (d - j) * inv_r
                    out[j] = (a * cur[j] - b * pr[j] + gain + sr[j]) / (base + k)
            elif has_p:
                pr = P[i]
                for j in range(0, d):
                    k = (d - j) * inv_r
                    out[j] = (a * cur[j] - b * pr[j] + gain) / (base + k)
            elif has_s:
                sr = S[i]
                for j in range(0, d):
                    k = (d - j) * inv_r
                    out[j] = (a * cur[j] + gain + sr[j]) / (base + k)
            else:
                for j in range(0, d):
                    k = (d - j) * inv_r
                    out[j] = (a * cur[j] + gain) / (base + k)
            inflow = 0.0
        else:
            p1 = Qn[i + 1]
            p2 = Qn[i + 2]
            if has_p and has_s:
                pr = P[i]
                sr = S[i]
                for j in range(0, d):
                    k = (d - j) * inv_r
                    out[j] = (a * cur[j] - b * pr[j] + gain + sr[j]
                              + 2.0 * (k + 1.0) * p1[j] - 0.5 * (k + 2.0) * p2[j]) * rec[d - j]
            elif has_p:
                pr = P[i]
                for j in range(0, d):
                    k = (d - j) * inv_r
                    out[j] = (a * cur[j] - b * pr[j] + gain
                              + 2.0 * (k + 1.0) * p1[j] - 0.5 * (k + 2.0) * p2[j]) * rec[d - j]
            elif has_s:
                sr = S[i]
                for j in range(0, d):
                    k = (d - j) * inv_r
                    out[j] = (a * cur[j] + gain + sr[j]
                              + 2.0 * (k + 1.0) * p1[j] - 0.5 * (k + 2.0) * p2[j]) * rec[d - j]
            else:
                for j in range(0, d):
                    k = (d - j) * inv_r
                    out[j] = (a * cur[j] + gain
                              + 2.0 * (k + 1.0) * p1[j] - 0.5 * (k + 2.0) * p2[j]) * rec[d - j]
            inflow = 2.0 * p1[d] - p2[d]
        xr = a * QR[i] + gain + inflow
        if has_p:
            xr -= b * PR[i]
        if has_s:
            xr += SR[i]
        QRn[i] = xr / base
        out[d] = 0.5 * (QLn[i] + QRn[i])
        s = avg_new[i] + out[0] + 2.0 * _rowsum(out, 1, d) + QRn[i]
        avg_new[i] = 0.25 * s / J
    avg_new[0] = 0.0
    avg_new[n_i] = 0.0


@nb.njit(**_OPTS)
def row_averages(Q, QL, QR, I, J, out):
    n_i = 2 * I
    n_j = 2 * J
    r = J // I
    out[0] = 0.0
    out[n_i] = 0.0
    for i in range(1, n_i):
        d = r * i
        row = Q[i]
        s = row[0] + 2.0 * _rowsum(row, 1, d) + QR[i] + QL[i] + 2.0 * _rowsum(row, d + 1, n_j) + row[n_j]
        out[i] = 0.25 * s / J


@nb.njit(**_OPTS)
def l1_distance(A, AL, AR, sa, B, BL, BR, sb, I, J):
    """Sum over stored unknowns of |sa*A - sb*B|; the diagonal counts both values."""
    r = J // I
    total = 0.0
    for i in range(A.shape[0]):
        d = r * i
        ra = A[i]
        rb = B[i]
        s = 0.0
        for j in range(A.shape[1]):
            s += abs(sa * ra[j] - sb * rb[j])
        s -= abs(sa * ra[d] - sb * rb[d])
        total += s
    for i in range(AL.shape[0]):
        total += abs(sa * AL[i] - sb * BL[i]) + abs(sa * AR[i] - sb * BR[i])
    return total


@nb.njit(**_OPTS)
def all_finite(A):
    for i in range(A.shape[0]):
        for j in range(A.shape[1]):
            if not np.isfinite(A[i, j]):
                return False
    return True
