#!/usr/bin/env python3
"""Independent oracle for the golden files.

Builds the transverse-field Ising chain, runs the measurement/feedback
protocol and the information-theoretic bound chain directly with numpy
(dense matrices, numpy.linalg.eigh), and freezes the resulting scalars
into golden/. Kept deliberately separate from the C++ implementation:
same conventions, different code path and eigensolver.

Conventions shared with the library:
  - site 0 is the slowest tensor index,
  - open boundary: T_n = X_n - 1/2 sum_l (g_{n-1/2} Y Y + g_{n+1/2} Y Y)
    with bond terms absent past the chain ends,
  - receiver system for the pointer construction is the support window of
    H_B (the region padded by one bond site each side, clipped).

Usage: python3 reference_oracle.py [--out-dir ../../golden]
"""

import argparse
import json
import os

import numpy as np

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
I2 = np.eye(2, dtype=complex)


def embed(op, first, n_sites):
    """Embed an operator on contiguous sites [first, ...] into the chain."""
    k = int(round(np.log2(op.shape[0])))
    out = np.eye(1, dtype=complex)
    out = np.kron(out, np.eye(2 ** first, dtype=complex))
    out = np.kron(out, op)
    out = np.kron(out, np.eye(2 ** (n_sites - first - k), dtype=complex))
    return out


def energy_density(n, n_sites, b, g, shifts=None):
    t = b * embed(SZ, n, n_sites)
    if shifts is not None:
        t = t - shifts[n] * np.eye(2 ** n_sites)
    if n > 0:
        t = t - 0.5 * g * embed(np.kron(SX, SX), n - 1, n_sites)
    if n + 1 < n_sites:
        t = t - 0.5 * g * embed(np.kron(SX, SX), n, n_sites)
    return t


def hamiltonian(n_sites, b, g, shifts=None):
    h = np.zeros((2 ** n_sites, 2 ** n_sites), dtype=complex)
    for n in range(n_sites):
        h = h + energy_density(n, n_sites, b, g, shifts)
    return h


def reduced(psi_or_rho, keep, n_sites):
    full = psi_or_rho
    if full.ndim == 1:
        t = full.reshape([2] * n_sites)
        rest = [n for n in range(n_sites) if n not in keep]
        t = np.transpose(t, keep + rest)
        t = t.reshape(2 ** len(keep), 2 ** len(rest))
        return t @ t.conj().T
    t = full.reshape([2] * (2 * n_sites))
    rest = [n for n in range(n_sites) if n not in keep]
    perm = keep + rest + [n + n_sites for n in keep] + [n + n_sites for n in rest]
    t = np.transpose(t, perm)
    dk, dr = 2 ** len(keep), 2 ** len(rest)
    t = t.reshape(dk, dr, dk, dr)
    return np.einsum("irjr->ij", t)


def entropy(rho):
    w = np.linalg.eigvalsh(rho)
    w = w[w > 1e-14]
    return float(-np.sum(w * np.log(w)))


def trace_norm(x):
    return float(np.sum(np.abs(np.linalg.eigvalsh(x))))


def op_norm(x):
    return float(np.max(np.abs(np.linalg.eigvalsh(x))))


class Run:
    pass


def run_protocol(n_sites, b, g, n_a, l_a, n_b, l_b, thetas="optimize"):
    """Projective sx measurement on A, sy generator at n_b, theta optimized
    per outcome via the involutive closed form."""
    shifts0 = None
    h0 = hamiltonian(n_sites, b, g)
    w0, v0 = np.linalg.eigh(h0)
    gvec = v0[:, 0]
    shifts = np.array([
        float(np.real(gvec.conj() @ energy_density(n, n_sites, b, g) @ gvec))
        for n in range(n_sites)
    ])
    h = hamiltonian(n_sites, b, g, shifts)
    # ground state unchanged by identity shifts
    g_energy = float(np.real(gvec.conj() @ h @ gvec))

    bsup_first = max(0, n_b - l_b - 1)
    bsup_last = min(n_sites - 1, n_b + l_b + 1)
    bhat = list(range(bsup_first, bsup_last + 1))
    h_b = np.zeros_like(h)
    for n in range(n_b - l_b, n_b + l_b + 1):
        h_b = h_b + energy_density(n, n_sites, b, g, shifts)
    hb_norm = op_norm(h_b)

    # measurement: product of per-site sx projectors over A
    a_sites = list(range(n_a - l_a, n_a + l_a + 1))
    pp = (I2 + SX) / 2
    pm = (I2 - SX) / 2
    kraus = [np.eye(1, dtype=complex)]
    for _ in a_sites:
        kraus = [np.kron(k, p) for k in kraus for p in (pp, pm)]
    kraus_full = [embed(k, a_sites[0], n_sites) for k in kraus]

    gen = embed(SY, n_b, n_sites)  # involutive

    probs, psi1 = [], []
    for m in kraus_full:
        phi = m @ gvec
        p = float(np.real(phi.conj() @ phi))
        probs.append(p)
        psi1.append(phi / np.sqrt(p) if p > 1e-14 else None)

    run = Run()
    run.probs = probs
    rho1 = sum(p * np.outer(v, v.conj()) for p, v in zip(probs, psi1) if v is not None)
    run.e_a = float(np.real(np.trace(h @ rho1)))
    run.tr_hb_rho1 = float(np.real(np.trace(h_b @ rho1)))

    def u_of(theta):
        return np.cos(theta) * np.eye(2 ** n_sites) - 1j * np.sin(theta) * gen

    def e_mu(mu, theta):
        u = u_of(theta)
        pig = kraus_full[mu].conj().T @ (kraus_full[mu] @ gvec)
        val = pig.conj() @ (u.conj().T @ (h_b @ (u @ gvec)))
        return -float(np.real(val))

    if thetas == "optimize":
        run.thetas, e_star = [], 0.0
        for mu in range(len(kraus_full)):
            f0, f45, f90 = e_mu(mu, 0.0), e_mu(mu, np.pi / 4), e_mu(mu, np.pi / 2)
            alpha = (f0 + f90) / 2
            beta = (f0 - f90) / 2
            gamma = f45 - alpha
            th = 0.5 * np.arctan2(gamma, beta)
            run.thetas.append(float(th))
            e_star += alpha + np.hypot(beta, gamma)
        run.e_b_correlator = float(e_star)
    else:
        run.thetas = list(thetas)
        run.e_b_correlator = float(sum(e_mu(mu, t) for mu, t in enumerate(run.thetas)))

    psi2 = [u_of(t) @ v for t, v in zip(run.thetas, psi1)]
    rho2 = sum(p * np.outer(v, v.conj()) for p, v in zip(probs, psi2))
    run.e_b_direct = float(np.real(np.trace(h @ rho1) - np.trace(h @ rho2)))
    run.tr_hb_rho2 = float(np.real(np.trace(h_b @ rho2)))
    run.mean_h = float(sum(
        p * np.real(gvec.conj() @ (u_of(t).conj().T @ (h @ (u_of(t) @ gvec))))
        for p, t in zip(probs, run.thetas)
    ))

    # bound chain on the padded receiver window
    run.s_ent = entropy(reduced(gvec, a_sites, n_sites))
    run.s_ent_bar = entropy(reduced(gvec, [n for n in range(n_sites) if n not in a_sites], n_sites))
    run.i_ab = (
        entropy(reduced(gvec, a_sites, n_sites))
        + entropy(reduced(gvec, bhat, n_sites))
        - entropy(reduced(gvec, sorted(a_sites + bhat), n_sites))
    )
    rho_b = reduced(gvec, bhat, n_sites)
    blocks = [reduced(v, bhat, n_sites) for v in psi1]
    s_apb = 0.0
    for p, blk in zip(probs, blocks):
        w = np.linalg.eigvalsh(p * blk)
        w = w[w > 1e-14]
        s_apb -= float(np.sum(w * np.log(w)))
    s_ap = float(-np.sum([p * np.log(p) for p in probs if p > 1e-14]))
    run.i_apb = s_ap + entropy(rho_b) - s_apb
    run.half_trace_sq = 0.5 * sum(p * trace_norm(blk - rho_b) for p, blk in zip(probs, blocks)) ** 2
    run.witness_term = (run.e_b_direct + run.mean_h) ** 2 / (2 * hb_norm ** 2)
    run.rhs_22 = run.witness_term / 2
    run.rhs_70 = run.e_b_direct ** 2 / (4 * hb_norm ** 2)
    run.hb_norm = hb_norm
    run.ground_energy_preshift = float(w0[0])
    run.gap = float(w0[1] - w0[0])
    run.shifts = [float(s) for s in shifts]
    return run


def fmt(x):
    return float(f"{x:.17g}")


def dump_17g(obj, indent=0):
    """json.dump with floats pinned to 17 significant digits."""
    pad = "  " * indent
    if isinstance(obj, dict):
        items = [f'{pad}  "{k}": {dump_17g(v, indent + 1).lstrip()}' for k, v in obj.items()]
        return pad + "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, list):
        items = [dump_17g(v, indent + 1).lstrip() for v in obj]
        return pad + "[" + ", ".join(items) + "]"
    if isinstance(obj, float):
        return pad + f"{obj:.17g}"
    return pad + json.dumps(obj)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out-dir", default=os.path.join(os.path.dirname(__file__), "..", "..", "golden"))
    args = ap.parse_args()

    # --- reference run: N=8, b=1, g=0.5, n_a=1 (l_a=0), n_b=5 (l_b=1) ---
    r = run_protocol(8, 1.0, 0.5, 1, 0, 5, 1)
    print("reference run N=8 b=1 g=0.5 n_a=1 n_b=5")
    print(f"  ground_energy_preshift = {r.ground_energy_preshift:.17g}")
    print(f"  gap                    = {r.gap:.17g}")
    print(f"  shifts                 = {[f'{s:.17g}' for s in r.shifts]}")
    print(f"  hb_norm                = {r.hb_norm:.17g}")
    print(f"  probs                  = {[f'{p:.17g}' for p in r.probs]}")
    print(f"  thetas                 = {[f'{t:.17g}' for t in r.thetas]}")
    print(f"  e_a                    = {r.e_a:.17g}")
    print(f"  e_b_direct             = {r.e_b_direct:.17g}")
    print(f"  e_b_correlator         = {r.e_b_correlator:.17g}")
    print(f"  mean_h                 = {r.mean_h:.17g}")
    print(f"  tr_hb_rho2             = {r.tr_hb_rho2:.17g}")
    print(f"  s_ent                  = {r.s_ent:.17g}")
    print(f"  i_ab                   = {r.i_ab:.17g}")
    print(f"  i_apb                  = {r.i_apb:.17g}")
    print(f"  half_trace_sq          = {r.half_trace_sq:.17g}")
    print(f"  rhs_22                 = {r.rhs_22:.17g}")
    print(f"  rhs_70                 = {r.rhs_70:.17g}")

    results = {
        "e_a": fmt(r.e_a),
        "e_b_direct": fmt(r.e_b_direct),
        "e_b_correlator": fmt(r.e_b_correlator),
        "mean_h": fmt(r.mean_h),
        "h_b_norm": fmt(r.hb_norm),
        "tr_hb_rho2": fmt(r.tr_hb_rho2),
        "s_ent": fmt(r.s_ent),
        "i_ab": fmt(r.i_ab),
        "i_apb": fmt(r.i_apb),
        "half_trace_sq": fmt(r.half_trace_sq),
        "witness_term": fmt(r.witness_term),
        "rhs_22": fmt(r.rhs_22),
        "rhs_70": fmt(r.rhs_70),
        "probabilities": [fmt(p) for p in r.probs],
        "thetas": [fmt(t) for t in r.thetas],
    }
    out = os.path.join(args.out_dir, "reference_run")
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "record.json"), "w") as f:
        f.write(dump_17g(results) + "\n")
    with open(os.path.join(out, "tolerances.json"), "w") as f:
        f.write(dump_17g({"default": 1e-9, "overrides": {"thetas": 1e-7}}) + "\n")
    print(f"wrote {out}/record.json")

    # --- separable sanity: g = 0 ---
    s = run_protocol(8, 1.0, 0.0, 1, 0, 5, 1)
    print("separable g=0 sanity")
    print(f"  e_b_direct = {s.e_b_direct:.3e}  thetas = {s.thetas}  s_ent = {s.s_ent:.3e}")

    # --- role exchange: N=10, measured region = [6,8], receiver A = [1,3] ---
    m = run_protocol(10, 1.0, 0.5, 7, 1, 2, 1)
    s_ent_a = m.s_ent_bar  # receiver interval [1,3] is the complement side here
    rho_recv = None
    print("role exchange N=10: measure [6,8], actuate {2}, H_A over [1,3]")
    print(f"  e_tilde      = {m.e_b_direct:.17g}")
    print(f"  h_a_norm     = {m.hb_norm:.17g}")
    print(f"  s_ent(recv A region [1,3]) = {entropy_of_region(10, 1.0, 0.5, [1, 2, 3]):.17g}")
    print(f"  rhs_70       = {m.rhs_70:.17g}")

    # --- perturbative scaling sanity on the reference model ---
    for eps in (1e-3, 1e-4):
        thetas = [eps, -eps]
        rq = run_protocol(8, 1.0, 0.5, 1, 0, 5, 1, thetas=thetas)
        first = first_order(8, 1.0, 0.5, 1, 0, 5, 1, thetas)
        print(f"  eps={eps:g}: exact={rq.e_b_direct:.12e} first={first:.12e} "
              f"diff={abs(rq.e_b_direct - first):.6e}")


def entropy_of_region(n_sites, b, g, region):
    h0 = hamiltonian(n_sites, b, g)
    _, v0 = np.linalg.eigh(h0)
    return entropy(reduced(v0[:, 0], region, n_sites))


def first_order(n_sites, b, g, n_a, l_a, n_b, l_b, thetas):
    h0 = hamiltonian(n_sites, b, g)
    w0, v0 = np.linalg.eigh(h0)
    gvec = v0[:, 0]
    shifts = np.array([
        float(np.real(gvec.conj() @ energy_density(n, n_sites, b, g) @ gvec))
        for n in range(n_sites)
    ])
    h_b = np.zeros_like(h0)
    for n in range(n_b - l_b, n_b + l_b + 1):
        h_b = h_b + energy_density(n, n_sites, b, g, shifts)
    gen = embed(SY, n_b, n_sites)
    gdot = 1j * (h_b @ gen - gen @ h_b)
    a_sites = list(range(n_a - l_a, n_a + l_a + 1))
    pp = (I2 + SX) / 2
    pm = (I2 - SX) / 2
    kraus = [np.eye(1, dtype=complex)]
    for _ in a_sites:
        kraus = [np.kron(k, p) for k in kraus for p in (pp, pm)]
    total = 0.0
    for mu, k in enumerate(kraus):
        kf = embed(k, a_sites[0], n_sites)
        pig = kf.conj().T @ (kf @ gvec)
        total += thetas[mu] * float(np.real(pig.conj() @ (gdot @ gvec)))
    return total


if __name__ == "__main__":
    main()
