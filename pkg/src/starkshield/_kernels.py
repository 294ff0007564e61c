"""Jitted fixed-step RK4 kernels for one noise realization.

The integrator walks precomputed segment edges (noise-cell boundaries,
pulse edges, sample times), so the held noise value and the pulse drive
are constant inside every RK4 step by construction.  Drive and probe
phases are evaluated at absolute time within each stage.
"""

import numpy as np
from numba import njit

SQRT2 = np.sqrt(2.0)


@njit(inline="always")
def _coupling(t, drive_on, om, dd, probe_on, g, dw, pulse_h01):
    w = SQRT2 * om * np.cos(dd * t) if drive_on else 0.0
    h01 = pulse_h01
    if probe_on:
        ph = dw * t
        h01 = h01 + 0.5 * g * (np.cos(ph) - 1j * np.sin(ph))
    return w, h01


@njit(inline="always")
def _rhs_pure(y0, y1, y2, d, sd, w, h01):
    f0 = -1j * (h01 * y1)
    f1 = -1j * (np.conj(h01) * y0 - d * y1 + w * y2)
    f2 = -1j * (w * y1 + sd * y2)
    return f0, f1, f2


@njit(cache=True)
def evolve_pure_kernel(
    psi,
    edges,
    samp_idx,
    out,
    nvals,
    ndt,
    s,
    drive_on,
    om,
    dd,
    probe_on,
    g,
    dw,
    pulse_t0,
    pulse_tf,
    pulse_kind,
    pulse_rabi,
    h_target,
):
    y0 = psi[0]
    y1 = psi[1]
    y2 = psi[2]
    ncells = nvals.shape[0]
    straddles = 0
    drift = 0.0
    nsteps = 0
    if samp_idx[0] >= 0:
        m = samp_idx[0]
        out[m, 0] = y0
        out[m, 1] = y1
        out[m, 2] = y2
    for ie in range(edges.shape[0] - 1):
        a = edges[ie]
        b = edges[ie + 1]
        seg = b - a
        if seg > 0.0:
            mid = 0.5 * (a + b)
            cell = int(mid / ndt)
            if cell >= ncells:
                cell = ncells - 1
            d = nvals[cell]
            sd = s * d
            ia = int((a + 1e-9 * ndt) / ndt)
            ib = int((b - 1e-9 * ndt) / ndt)
            if ia != ib and seg > 2e-9 * ndt:
                straddles += 1
            pulse_h01 = 0.0 + 0.0j
            for ip in range(pulse_t0.shape[0]):
                if pulse_t0[ip] <= mid < pulse_tf[ip]:
                    if pulse_kind[ip] == 0:
                        pulse_h01 += pulse_rabi[ip]
                    else:
                        pulse_h01 += -1j * pulse_rabi[ip]
            nsub = int(np.ceil(seg / h_target))
            if nsub < 1:
                nsub = 1
            h = seg / nsub
            for j in range(nsub):
                t = a + j * h
                tm = t + 0.5 * h
                tb = t + h
                wa, ca = _coupling(t, drive_on, om, dd, probe_on, g, dw, pulse_h01)
                wm, cm = _coupling(tm, drive_on, om, dd, probe_on, g, dw, pulse_h01)
                wb, cb = _coupling(tb, drive_on, om, dd, probe_on, g, dw, pulse_h01)
                k10, k11, k12 = _rhs_pure(y0, y1, y2, d, sd, wa, ca)
                k20, k21, k22 = _rhs_pure(
                    y0 + 0.5 * h * k10, y1 + 0.5 * h * k11, y2 + 0.5 * h * k12, d, sd, wm, cm
                )
                k30, k31, k32 = _rhs_pure(
                    y0 + 0.5 * h * k20, y1 + 0.5 * h * k21, y2 + 0.5 * h * k22, d, sd, wm, cm
                )
                k40, k41, k42 = _rhs_pure(
                    y0 + h * k30, y1 + h * k31, y2 + h * k32, d, sd, wb, cb
                )
                y0 = y0 + (h / 6.0) * (k10 + 2.0 * k20 + 2.0 * k30 + k40)
                y1 = y1 + (h / 6.0) * (k11 + 2.0 * k21 + 2.0 * k31 + k41)
                y2 = y2 + (h / 6.0) * (k12 + 2.0 * k22 + 2.0 * k32 + k42)
            nsteps += nsub
            nrm = (
                y0.real * y0.real
                + y0.imag * y0.imag
                + y1.real * y1.real
                + y1.imag * y1.imag
                + y2.real * y2.real
                + y2.imag * y2.imag
            )
            dn = abs(np.sqrt(nrm) - 1.0)
            if dn > drift:
                drift = dn
        if samp_idx[ie + 1] >= 0:
            m = samp_idx[ie + 1]
            out[m, 0] = y0
            out[m, 1] = y1
            out[m, 2] = y2
    psi[0] = y0
    psi[1] = y1
    psi[2] = y2
    return drift, nsteps, straddles


@njit(inline="always")
def _lindblad_rhs(r, d, sd, w, h01, gamma, out):
    # out = -i[H, r] + (gamma/2) * (2 L r L+ - L+L r - r L+L), L = |1><2|
    h01c = np.conj(h01)
    for j in range(3):
        r0j = r[0, j]
        r1j = r[1, j]
        r2j = r[2, j]
        out[0, j] = h01 * r1j
        out[1, j] = h01c * r0j - d * r1j + w * r2j
        out[2, j] = w * r1j + sd * r2j
    for i in range(3):
        ri0 = r[i, 0]
        ri1 = r[i, 1]
        ri2 = r[i, 2]
        out[i, 0] -= ri1 * h01c
        out[i, 1] -= ri0 * h01 - ri1 * d + ri2 * w
        out[i, 2] -= ri1 * w + ri2 * sd
    for i in range(3):
        for j in range(3):
            out[i, j] = -1j * out[i, j]
    if gamma > 0.0:
        hg = 0.5 * gamma
        out[0, 0] += gamma * r[1, 1]
        out[1, 0] -= hg * r[1, 0]
        out[1, 1] -= gamma * r[1, 1]
        out[1, 2] -= hg * r[1, 2]
        out[0, 1] -= hg * r[0, 1]
        out[2, 1] -= hg * r[2, 1]


@njit(cache=True)
def evolve_lindblad_kernel(
    rho,
    edges,
    samp_idx,
    out,
    nvals,
    ndt,
    s,
    gamma,
    drive_on,
    om,
    dd,
    probe_on,
    g,
    dw,
    pulse_t0,
    pulse_tf,
    pulse_kind,
    pulse_rabi,
    h_target,
):
    r = rho.copy()
    k1 = np.empty((3, 3), dtype=np.complex128)
    k2 = np.empty((3, 3), dtype=np.complex128)
    k3 = np.empty((3, 3), dtype=np.complex128)
    k4 = np.empty((3, 3), dtype=np.complex128)
    tmp = np.empty((3, 3), dtype=np.complex128)
    ncells = nvals.shape[0]
    straddles = 0
    trace_drift = 0.0
    nsteps = 0
    if samp_idx[0] >= 0:
        out[samp_idx[0]] = r
    for ie in range(edges.shape[0] - 1):
        a = edges[ie]
        b = edges[ie + 1]
        seg = b - a
        if seg > 0.0:
            mid = 0.5 * (a + b)
            cell = int(mid / ndt)
            if cell >= ncells:
                cell = ncells - 1
            d = nvals[cell]
            sd = s * d
            ia = int((a + 1e-9 * ndt) / ndt)
            ib = int((b - 1e-9 * ndt) / ndt)
            if ia != ib and seg > 2e-9 * ndt:
                straddles += 1
            pulse_h01 = 0.0 + 0.0j
            for ip in range(pulse_t0.shape[0]):
                if pulse_t0[ip] <= mid < pulse_tf[ip]:
                    if pulse_kind[ip] == 0:
                        pulse_h01 += pulse_rabi[ip]
                    else:
                        pulse_h01 += -1j * pulse_rabi[ip]
            nsub = int(np.ceil(seg / h_target))
            if nsub < 1:
                nsub = 1
            h = seg / nsub
            for j in range(nsub):
                t = a + j * h
                tm = t + 0.5 * h
                tb = t + h
                wa, ca = _coupling(t, drive_on, om, dd, probe_on, g, dw, pulse_h01)
                wm, cm = _coupling(tm, drive_on, om, dd, probe_on, g, dw, pulse_h01)
                wb, cb = _coupling(tb, drive_on, om, dd, probe_on, g, dw, pulse_h01)
                _lindblad_rhs(r, d, sd, wa, ca, gamma, k1)
                for p in range(3):
                    for q in range(3):
                        tmp[p, q] = r[p, q] + 0.5 * h * k1[p, q]
                _lindblad_rhs(tmp, d, sd, wm, cm, gamma, k2)
                for p in range(3):
                    for q in range(3):
                        tmp[p, q] = r[p, q] + 0.5 * h * k2[p, q]
                _lindblad_rhs(tmp, d, sd, wm, cm, gamma, k3)
                for p in range(3):
                    for q in range(3):
                        tmp[p, q] = r[p, q] + h * k3[p, q]
                _lindblad_rhs(tmp, d, sd, wb, cb, gamma, k4)
                for p in range(3):
                    for q in range(3):
                        r[p, q] = r[p, q] + (h / 6.0) * (
                            k1[p, q] + 2.0 * k2[p, q] + 2.0 * k3[p, q] + k4[p, q]
                        )
                # keep the Hermitian part only
                for p in range(3):
                    r[p, p] = complex(r[p, p].real, 0.0)
                    for q in range(p + 1, 3):
                        avg = 0.5 * (r[p, q] + np.conj(r[q, p]))
                        r[p, q] = avg
                        r[q, p] = np.conj(avg)
            nsteps += nsub
            tr = r[0, 0].real + r[1, 1].real + r[2, 2].real
            dtr = abs(tr - 1.0)
            if dtr > trace_drift:
                trace_drift = dtr
        if samp_idx[ie + 1] >= 0:
            out[samp_idx[ie + 1]] = r
    rho[:, :] = r
    return trace_drift, nsteps, straddles
