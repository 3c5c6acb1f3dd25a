#!/usr/bin/env python3
"""Writes a small seeded active-space instance: FCIDUMP + dipole sidecar.

6 spatial orbitals, 7 electrons, 2S_z = 1 (sector dimension 300). Orbital 1 is a
deep 1s-like core level placed so the K edge lands near 530 eV; orbitals 2-4 are
occupied valence, 5-6 virtual.

    python3 tools/make_toy_instance.py data/toy
"""
import sys

import numpy as np

N_ORB = 6
N_ELEC = 7
MS2 = 1
SEED = 20240531


def build(rng):
    n = N_ORB
    eps = np.array([-24.52, -1.05, -0.85, -0.70, 0.15, 0.40])
    h = np.diag(eps)
    off = 0.04 * rng.standard_normal((n, n))
    off = 0.5 * (off + off.T)
    off[0, :] = off[:, 0] = 0.0  # core stays localized in the one-body part
    np.fill_diagonal(off, 0.0)
    h = h + off

    # positive semidefinite supermatrix V(pq|rs) = sum_k L^k_pq L^k_rs
    core = np.zeros((n, n))
    core[0, 0] = 2.0
    vecs = [core]
    diag = np.diag([0.35, 0.80, 0.75, 0.70, 0.55, 0.50])
    vecs.append(diag)
    for _ in range(5):
        m = 0.18 * rng.standard_normal((n, n))
        m = 0.5 * (m + m.T)
        m[0, 1:] *= 0.3
        m[1:, 0] *= 0.3
        vecs.append(m)
    v = np.zeros((n, n, n, n))
    for m in vecs:
        v += np.einsum("pq,rs->pqrs", m, m)
    v = 0.5 * (v + v.transpose(1, 0, 2, 3))
    v = 0.5 * (v + v.transpose(0, 1, 3, 2))
    v = 0.5 * (v + v.transpose(2, 3, 0, 1))

    dip = np.zeros((3, n, n))
    for a in range(3):
        d = 0.05 * rng.standard_normal((n, n))
        d = 0.5 * (d + d.T)
        d[0, 1:] = 0.12 * rng.standard_normal(n - 1) * (1.0 + 0.5 * a)
        d[1:, 0] = d[0, 1:]
        d[0, 0] = 0.0
        dip[a] = d
    return h, v, dip


def write_fcidump(path, h, v, e_core):
    n = h.shape[0]
    with open(path, "w") as f:
        f.write(f" &FCI NORB={n},NELEC={N_ELEC},MS2={MS2},\n")
        f.write("  ORBSYM=" + "1," * n + "\n  ISYM=1,\n &END\n")
        for p in range(n):
            for q in range(p + 1):
                for r in range(n):
                    for s in range(r + 1):
                        if p * (p + 1) // 2 + q < r * (r + 1) // 2 + s:
                            continue
                        x = v[p, q, r, s]
                        if abs(x) > 1e-14:
                            f.write(f"{x:23.14E} {p + 1:4d} {q + 1:4d} {r + 1:4d} {s + 1:4d}\n")
        for p in range(n):
            for q in range(p + 1):
                if abs(h[p, q]) > 1e-14:
                    f.write(f"{h[p, q]:23.14E} {p + 1:4d} {q + 1:4d} {0:4d} {0:4d}\n")
        f.write(f"{e_core:23.14E} {0:4d} {0:4d} {0:4d} {0:4d}\n")


def write_dipole(path, dip):
    n = dip.shape[1]
    with open(path, "w") as f:
        f.write("# toy dipole integrals (a.u.)\n")
        f.write(f"NORB {n}\nCORE 1\n")
        for a, axis in enumerate("xyz"):
            for p in range(n):
                for q in range(p + 1):
                    if abs(dip[a, p, q]) > 1e-14:
                        f.write(f"{axis} {dip[a, p, q]:.15E} {p + 1} {q + 1}\n")


def main():
    stem = sys.argv[1] if len(sys.argv) > 1 else "data/toy"
    h, v, dip = build(np.random.default_rng(SEED))
    write_fcidump(stem + ".fcidump", h, v, -75.0)
    write_dipole(stem + ".dipole", dip)


if __name__ == "__main__":
    main()
