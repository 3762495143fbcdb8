"""
Shared min-max linear program behind the seminorm and certificate solvers.

Given sample values f on atoms, a list of cubes (as atom index sets) with
positive scalings D_Q and difference bounds B_QR on selected pairs, find

    min t  s.t.  sum_{a in Q} w_a |f(a) - c_Q| <= t * D_Q      for every Q
                 |c_Q - c_R| <= t * B_QR                       for every pair

The absolute values are linearized with one slack per (cube, atom)
incidence.  The data are shifted and rescaled to [-1, 1] before solving,
which makes the returned value exactly translation invariant and
homogeneous up to rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .errors import SolverFailure

HIGHS_OPTIONS = {
    "primal_feasibility_tolerance": 1e-10,
    "dual_feasibility_tolerance": 1e-10,
}


@dataclass
class MinimaxSolution:
    value: float          # max residual re-evaluated at the returned constants
    lp_value: float       # raw solver objective (rescaled back)
    constants: np.ndarray
    osc_residuals: np.ndarray
    pair_residuals: np.ndarray


def residuals(values, weights, members, denoms, pairs, bounds, constants):
    """Re-evaluate both constraint groups at given constants (no solver)."""
    osc = np.array([
        math.fsum(weights[idx] * np.abs(values[idx] - constants[q])) / denoms[q]
        if len(idx) else 0.0
        for q, idx in enumerate(members)
    ])
    if len(pairs):
        P = np.asarray(pairs, dtype=int)
        diff = np.abs(constants[P[:, 0]] - constants[P[:, 1]]) / np.asarray(bounds)
    else:
        diff = np.zeros(0)
    return osc, diff


def solve_minimax(values, weights, members, denoms, pairs, bounds) -> MinimaxSolution:
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    denoms = np.asarray(denoms, dtype=float)
    bounds = np.asarray(bounds, dtype=float)
    nq = len(members)

    lo, hi = float(values.min()), float(values.max())
    mid = 0.5 * (lo + hi)
    spread = 0.5 * (hi - lo)
    if spread == 0.0:
        c = np.full(nq, mid)
        osc, diff = residuals(values, weights, members, denoms, pairs, bounds, c)
        return MinimaxSolution(0.0, 0.0, c, osc, diff)
    g = (values - mid) / spread

    sizes = np.array([len(idx) for idx in members], dtype=int)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    n_s = int(offsets[-1])
    nvar = 1 + nq + n_s          # [t, c_1..c_q, s_...]
    rows, cols, data, rhs = [], [], [], []
    r = 0

    # sum_a (w_a / D_Q) s_{Q,a} - t <= 0
    for q, idx in enumerate(members):
        if not len(idx):
            continue
        k = np.arange(offsets[q], offsets[q + 1]) + 1 + nq
        rows += [r] * (len(idx) + 1)
        cols += [0] + k.tolist()
        data += [-1.0] + (weights[idx] / denoms[q]).tolist()
        rhs.append(0.0)
        r += 1

    # +-(g_a - c_Q) - s_{Q,a} <= 0
    if n_s:
        q_of = np.repeat(np.arange(nq), sizes)
        atom = np.concatenate([np.asarray(idx, dtype=int) for idx in members])
        s_col = 1 + nq + np.arange(n_s)
        r_lo = r + 2 * np.arange(n_s)
        rows += np.concatenate([r_lo, r_lo, r_lo + 1, r_lo + 1]).tolist()
        cols += np.concatenate([1 + q_of, s_col, 1 + q_of, s_col]).tolist()
        data += np.concatenate([-np.ones(n_s), -np.ones(n_s),
                                np.ones(n_s), -np.ones(n_s)]).tolist()
        pair_rhs = np.empty(2 * n_s)
        pair_rhs[0::2] = -g[atom]
        pair_rhs[1::2] = g[atom]
        rhs += pair_rhs.tolist()
        r += 2 * n_s

    # +-(c_Q - c_R) - t B <= 0
    for (i, j), b in zip(pairs, bounds):
        rows += [r, r, r, r + 1, r + 1, r + 1]
        cols += [1 + i, 1 + j, 0, 1 + i, 1 + j, 0]
        data += [1.0, -1.0, -b, -1.0, 1.0, -b]
        rhs += [0.0, 0.0]
        r += 2

    A = sparse.csr_matrix((data, (rows, cols)), shape=(r, nvar))
    cost = np.zeros(nvar)
    cost[0] = 1.0
    var_bounds = [(0, None)] + [(-1.0, 1.0)] * nq + [(0, None)] * n_s
    res = linprog(cost, A_ub=A, b_ub=np.array(rhs), bounds=var_bounds,
                  method="highs-ds", options=HIGHS_OPTIONS)
    if res.status != 0:
        raise SolverFailure(f"LP solver status {res.status}: {res.message}")

    c = mid + spread * res.x[1:1 + nq]
    osc, diff = residuals(values, weights, members, denoms, pairs, bounds, c)
    value = max(float(osc.max(initial=0.0)), float(diff.max(initial=0.0)))
    return MinimaxSolution(value, spread * float(res.fun), c, osc, diff)
