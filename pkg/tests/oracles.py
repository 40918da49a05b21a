"""Independent brute-force oracles used to pin expected values.

These deliberately avoid the package's solvers: dense grids, local
refinement and closed-form eigenvalue arithmetic only.
"""

import numpy as np
from scipy.optimize import minimize


def herm2(a, b, c, d):
    return np.array([[a, c + 1j * d], [c - 1j * d, b]])


def opn(M):
    return float(np.max(np.abs(np.linalg.eigvalsh(M))))


def mineig(M):
    return float(np.linalg.eigvalsh(M)[0])


def decompose_value_bruteforce(x, grid=13, penalty=1e10):
    """min ||y|| + ||y - x|| over Hermitian 2x2 y with y, y - x >= 0.

    Dense 4-parameter grid followed by Nelder-Mead refinement of a penalised
    objective; any residual infeasibility is repaired by an identity shift
    before the value is reported, so the result is certified feasible.
    """
    x = np.asarray(x, dtype=complex)
    r = opn(x)
    best = (np.inf, None)
    for a in np.linspace(0, 2 * r, grid):
        for b in np.linspace(0, 2 * r, grid):
            for c in np.linspace(-r, r, grid):
                for d in np.linspace(-r, r, grid):
                    y = herm2(a, b, c, d)
                    if mineig(y) < -1e-9 or mineig(y - x) < -1e-9:
                        continue
                    v = opn(y) + opn(y - x)
                    if v < best[0]:
                        best = (v, (a, b, c, d))
    if best[1] is None:
        return np.inf

    def objective(p):
        y = herm2(*p)
        pen = max(0.0, -mineig(y)) + max(0.0, -mineig(y - x))
        return opn(y) + opn(y - x) + penalty * pen * pen

    res = minimize(objective, np.array(best[1]), method="Nelder-Mead",
                   options={"xatol": 1e-13, "fatol": 1e-13, "maxiter": 40000})
    y = herm2(*res.x)
    shift = max(0.0, -mineig(y), -mineig(y - x))
    y = y + 2.0 * shift * np.eye(2)
    assert mineig(y) >= -1e-12 and mineig(y - x) >= -1e-12
    return float(opn(y) + opn(y - x))


def spin_decompose_value(b_target, grid=4001):
    """min (a+|b|) + (a+|b-t|) s.t. a >= max(|b|, |b-t|), for span{1, sx}.

    The selfadjoint elements of span{1, E12+E21} are a*1 + b*sx with operator
    norm |a| + |b| on the positive cone side; this scans the split parameter.
    """
    t = b_target
    best = np.inf
    for b in np.linspace(min(0.0, t) - 1, max(0.0, t) + 1, grid):
        a = max(abs(b), abs(b - t))
        best = min(best, (a + abs(b)) + (a + abs(b - t)))
    return best


def transpose_choi_min_eig(d=2):
    """Smallest eigenvalue of the Choi matrix of the transpose map (the swap)."""
    C = np.zeros((d * d, d * d), dtype=complex)
    for i in range(d):
        for j in range(d):
            E = np.zeros((d, d), dtype=complex)
            E[i, j] = 1.0
            C += np.kron(E, E.T)
    return float(np.linalg.eigvalsh(C)[0])
