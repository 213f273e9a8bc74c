"""Independent reference solves used to freeze expected objectives.

This script does not use the Rust library. It parses the MATPOWER fixture
with its own reader, builds the AC OPF in bus-injection form from the complex
bus admittance matrix (no lifted branch-flow variables), differentiates with
jax, and solves with scipy's SLSQP.

    python3 python/oracles/reference_opf.py data/case5.m
    python3 python/oracles/reference_opf.py lv:100
"""

import re
import sys

import jax
import jax.numpy as jnp
import numpy as np
from scipy.optimize import minimize

jax.config.update("jax_enable_x64", True)


def read_matrix(text, name):
    m = re.search(r"mpc\." + name + r"\s*=\s*\[(.*?)\]", text, re.S)
    if m is None:
        return None
    rows = []
    for line in m.group(1).split("\n"):
        line = line.split("%")[0]
        for chunk in line.split(";"):
            vals = chunk.replace(",", " ").split()
            if vals:
                rows.append([float(v) for v in vals])
    return np.array(rows)


def load(path):
    text = open(path).read()
    base = float(re.search(r"mpc\.baseMVA\s*=\s*([0-9.eE+-]+)", text).group(1))
    bus = read_matrix(text, "bus")
    gen = read_matrix(text, "gen")
    branch = read_matrix(text, "branch")
    cost = read_matrix(text, "gencost")
    gen_on = gen[:, 7] > 0
    gen, cost = gen[gen_on], cost[gen_on]
    branch = branch[branch[:, 10] > 0]
    return base, bus, gen, branch, cost


def solve_opf(path):
    base, bus, gen, branch, cost = load(path)
    nb, ng, nl = len(bus), len(gen), len(branch)
    pos = {int(b): i for i, b in enumerate(bus[:, 0])}
    f = np.array([pos[int(v)] for v in branch[:, 0]])
    t = np.array([pos[int(v)] for v in branch[:, 1]])
    gbus = np.array([pos[int(v)] for v in gen[:, 0]])

    r, x, bc = branch[:, 2], branch[:, 3], branch[:, 4]
    tap = np.where(branch[:, 8] == 0, 1.0, branch[:, 8])
    shift = np.deg2rad(branch[:, 9])
    ys = 1.0 / (r + 1j * x)
    tc = tap * np.exp(1j * shift)
    yff = (ys + 0.5j * bc) / (tc * np.conj(tc))
    yft = -ys / np.conj(tc)
    ytf = -ys / tc
    ytt = ys + 0.5j * bc

    ybus = np.zeros((nb, nb), dtype=complex)
    for k in range(nl):
        ybus[f[k], f[k]] += yff[k]
        ybus[f[k], t[k]] += yft[k]
        ybus[t[k], f[k]] += ytf[k]
        ybus[t[k], t[k]] += ytt[k]
    ybus += np.diag((bus[:, 4] + 1j * bus[:, 5]) / base)
    G, B = jnp.array(ybus.real), jnp.array(ybus.imag)

    pd, qd = bus[:, 2] / base, bus[:, 3] / base
    rate = branch[:, 5] / base
    limited = rate > 0
    angmin = np.deg2rad(branch[:, 11])
    angmax = np.deg2rad(branch[:, 12])
    angmin = np.where(angmin <= -np.pi / 2, -np.pi / 3, angmin)
    angmax = np.where(angmax >= np.pi / 2, np.pi / 3, angmax)
    ref = int(np.where(bus[:, 1] == 3)[0][0])

    # gencost columns: model, startup, shutdown, n, coefficients (highest first)
    coeffs = np.zeros((ng, 3))
    for i in range(ng):
        n = int(cost[i, 3])
        c = cost[i, 4 : 4 + n]
        coeffs[i, 3 - n :] = c
    c2, c1, c0 = jnp.array(coeffs[:, 0]), jnp.array(coeffs[:, 1]), jnp.array(coeffs[:, 2])

    cg = np.zeros((nb, ng))
    cg[gbus, np.arange(ng)] = 1.0
    cg = jnp.array(cg)

    def unpack(z):
        return z[:nb], z[nb : 2 * nb], z[2 * nb : 2 * nb + ng], z[2 * nb + ng :]

    def objective(z):
        _, _, pg, _ = unpack(z)
        mw = pg * base
        return jnp.sum(c2 * mw**2 + c1 * mw + c0)

    def balance(z):
        va, vm, pg, qg = unpack(z)
        vr, vi = vm * jnp.cos(va), vm * jnp.sin(va)
        ir = G @ vr - B @ vi
        ii = B @ vr + G @ vi
        p = vr * ir + vi * ii
        q = vi * ir - vr * ii
        return jnp.concatenate([p + pd - cg @ pg, q + qd - cg @ qg, va[ref : ref + 1]])

    yffj, yftj, ytfj, yttj = (jnp.array(v) for v in (yff, yft, ytf, ytt))

    def flows(z):
        va, vm, _, _ = unpack(z)
        v = vm * jnp.exp(1j * va)
        sf = v[f] * jnp.conj(yffj * v[f] + yftj * v[t])
        st = v[t] * jnp.conj(ytfj * v[f] + yttj * v[t])
        lim = jnp.array(rate**2)
        thermal = jnp.concatenate(
            [(lim - jnp.abs(sf) ** 2)[limited], (lim - jnp.abs(st) ** 2)[limited]]
        )
        d = va[f] - va[t]
        return jnp.concatenate([thermal, d - angmin, angmax - d])

    bounds = (
        [(None, None)] * nb
        + list(zip(bus[:, 12], bus[:, 11]))
        + list(zip(gen[:, 9] / base, gen[:, 8] / base))
        + list(zip(gen[:, 4] / base, gen[:, 3] / base))
    )
    z0 = np.concatenate(
        [np.zeros(nb), np.ones(nb), (gen[:, 8] + gen[:, 9]) / (2 * base), (gen[:, 3] + gen[:, 4]) / (2 * base)]
    )
    cons = [
        {"type": "eq", "fun": jax.jit(balance), "jac": jax.jit(jax.jacfwd(balance))},
        {"type": "ineq", "fun": jax.jit(flows), "jac": jax.jit(jax.jacfwd(flows))},
    ]
    res = minimize(
        jax.jit(objective),
        z0,
        jac=jax.jit(jax.grad(objective)),
        bounds=bounds,
        constraints=cons,
        method="SLSQP",
        options={"ftol": 1e-15, "maxiter": 2000},
    )
    viol = max(np.max(np.abs(balance(res.x))), max(0.0, -np.min(flows(res.x))))
    return res, viol


def solve_lv(n):
    def objective(x):
        return jnp.sum(100.0 * (x[:-1] ** 2 - x[1:]) ** 2 + (x[:-1] - 1.0) ** 2)

    def cons(x):
        a, b, c = x[:-2], x[1:-1], x[2:]
        return (
            3 * b**3 + 2 * c - 5 + jnp.sin(b - c) * jnp.sin(b + c) + 4 * b - a * jnp.exp(a - b) - 3
        )

    x0 = np.array([-1.2 if (i + 1) % 2 == 1 else 1.0 for i in range(n)])
    res = minimize(
        jax.jit(objective),
        x0,
        jac=jax.jit(jax.grad(objective)),
        constraints=[{"type": "eq", "fun": jax.jit(cons), "jac": jax.jit(jax.jacfwd(cons))}],
        method="SLSQP",
        options={"ftol": 1e-12, "maxiter": 5000},
    )
    return res, float(np.max(np.abs(cons(res.x))))


if __name__ == "__main__":
    target = sys.argv[1]
    if target.startswith("lv:"):
        res, viol = solve_lv(int(target[3:]))
    else:
        res, viol = solve_opf(target)
    print(f"success={res.success} message={res.message!r}")
    print(f"objective={res.fun:.12e} violation={viol:.3e} iterations={res.nit}")
