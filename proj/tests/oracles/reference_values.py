#!/usr/bin/env python3
"""Independent reference values for the regression tests.

Shares no code with the C++ library. The FIM comes from brute-force finite
differences of the full (K x M x N_R) mean-signal tensor, position Jacobians from
finite differences of the geometry, and everything else is dense numpy algebra.

Run:  python3 tests/oracles/reference_values.py > tests/oracles/reference_values.hpp
"""
import numpy as np

C = 299792458.0

# default radio parameters
P = dict(NT=16, NR=16, Mf=1120, Ka=3168, fc=28e9, df=120e3, Ts=8.92e-6,
         rho_f=0.2, rho_t=0.1, PT=0.1, N0=4e-20, GT=1.0, GR=1.0, eta=1.0)


def frame(p):
    K = int(np.floor(p["rho_f"] * p["Ka"] + 1e-9))
    M = int(np.floor(p["rho_t"] * p["Mf"] + 1e-9))
    return K, M


def ula(n, th):
    l = np.arange(n) - (n - 1) / 2
    return np.exp(1j * np.pi * l * np.sin(th))


def alpha2(p, rt, rr, rcs=1.0):
    return p["GT"] * p["GR"] * C**2 * rcs / ((4 * np.pi) ** 3 * p["fc"] ** 2 * rt**2 * rr**2)


def snr(p, rt, rr, psens, rcs=1.0):
    K, _ = frame(p)
    return alpha2(p, rt, rr, rcs) * (psens / K) * p["NT"] / (p["N0"] * p["df"])


def mean_tensor(p, th, gamma):
    a, ph, fd, tau, thr = th
    K, M = frame(p)
    k = np.arange(K)[:, None, None]
    m = np.arange(M)[None, :, None]
    b = ula(p["NR"], thr)[None, None, :]
    return a * np.exp(1j * ph) * gamma * np.exp(2j * np.pi * m * p["Ts"] * fd) * np.exp(-2j * np.pi * k * p["df"] * tau) * b


def fim_fd(p, th, gamma):
    floors = [0.0, 1e-8, 1e-3, 1e-12, 1e-8]
    d = []
    for i in range(5):
        h = max(floors[i], 1e-6 * abs(th[i]))
        tp = list(th); tm = list(th)
        tp[i] += h; tm[i] -= h
        d.append(((mean_tensor(p, tp, gamma) - mean_tensor(p, tm, gamma)) / (2 * h)).ravel())
    sig2 = p["eta"] * p["N0"] * p["df"]
    F = np.empty((5, 5))
    for i in range(5):
        for j in range(5):
            F[i, j] = 2 / sig2 * np.real(np.vdot(d[i], d[j]))
    return F


def efim(F, keep):
    drop = [i for i in range(5) if i not in keep]
    A = F[np.ix_(drop, drop)]; B = F[np.ix_(drop, keep)]; Cc = F[np.ix_(keep, keep)]
    return Cc - B.T @ np.linalg.solve(A, B)


def facing(s, c=(42.0, 42.0)):
    return np.arctan2(c[1] - s[1], c[0] - s[0])


def local_angle(p, s, ori):
    d = np.asarray(p) - np.asarray(s)
    x = np.cos(ori) * d[0] + np.sin(ori) * d[1]
    y = -np.sin(ori) * d[0] + np.cos(ori) * d[1]
    return np.arctan2(y, x)


def numjac(f, x, h):
    x = np.asarray(x, float)
    f0 = np.asarray(f(x))
    J = np.zeros((f0.size, x.size))
    for i in range(x.size):
        e = np.zeros_like(x); e[i] = h
        J[:, i] = (np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2 * h)
    return J


def link_position_efim(p, tx, rx, target, psens, rcs=1.0):
    """2x2 global-frame position EFIM of one link through the numeric pipeline."""
    tx = np.asarray(tx, float); rx = np.asarray(rx, float); target = np.asarray(target, float)
    ori = facing(rx)
    rt = np.linalg.norm(target - tx); rr = np.linalg.norm(target - rx)
    thr = local_angle(target, rx, ori)
    gamma = np.sqrt(psens / frame(p)[0] / p["NT"]) * p["NT"]  # boresight beam, a^H w
    th = [np.sqrt(alpha2(p, rt, rr, rcs)), 0.0, 0.0, (rt + rr) / C, thr]
    E = efim(fim_fd(p, th, gamma), [3, 4])

    def obs(q):
        return [(np.linalg.norm(q - tx) + np.linalg.norm(q - rx)) / C, local_angle(q, rx, ori)]

    J = numjac(obs, target, 1e-4)
    return J.T @ E @ J


def main():
    p = dict(P)
    K, M = frame(p)
    psens = p["rho_f"] * p["PT"]
    out = {}

    out["kSnrDefaultsAt50m"] = snr(p, 50.0, 50.0, psens)

    I = link_position_efim(p, (42, 0), (42, 0), (70, 56), psens)
    out["kPebMonoNode42_0Target70_56"] = np.sqrt(np.trace(np.linalg.inv(I)))

    I = link_position_efim(p, (42, 0), (0, 42), (70, 56), psens)
    out["kPebBisTx42_0Rx0_42Target70_56"] = np.sqrt(np.trace(np.linalg.inv(I)))

    total = np.zeros((2, 2))
    for s in [(42, 0), (0, 42), (84, 42), (42, 84)]:
        total += link_position_efim(p, s, s, (42, 42), psens / 4)
    out["kEfim4NodeCenterXX"] = total[0, 0]
    out["kEfim4NodeCenterXY"] = total[0, 1]
    out["kEfim4NodeCenterYY"] = total[1, 1]

    total = np.zeros((2, 2))
    for s in [(42, 0), (0, 42), (84, 42), (42, 84)]:
        total += link_position_efim(p, s, s, (30, 60), psens / 4)
    out["kEfim4NodeOffXX"] = total[0, 0]
    out["kEfim4NodeOffXY"] = total[0, 1]
    out["kEfim4NodeOffYY"] = total[1, 1]

    print("// Generated by tests/oracles/reference_values.py. Do not edit by hand.")
    print("#pragma once\n")
    print("namespace isac_ref {\n")
    print(f"inline constexpr int kFrameK = {K};")
    print(f"inline constexpr int kFrameM = {M};")
    for k, v in out.items():
        print(f"inline constexpr double {k} = {v:.12e};")
    print("\n}  // namespace isac_ref")


if __name__ == "__main__":
    main()
