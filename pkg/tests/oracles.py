"""Independent reference computations used only by the tests.

Nothing here imports the package under test.
"""

import math
from fractions import Fraction

import numpy as np


def truncated_chain(lam, mu, m, tail_tol=1e-12):
    """Stationary law of the M/M/m birth-death chain cut at N states.

    Solves pi Q = 0, sum(pi) = 1 with a dense linear solve. N is grown until
    the mass beyond the cut (geometric above m) is below ``tail_tol``.
    """
    rho = lam / (m * mu)
    extra = 50 if rho == 0 else int(math.ceil(math.log(tail_tol * 1e-3) / math.log(rho))) + 50
    n = m + extra
    q = np.zeros((n + 1, n + 1))
    for k in range(n):
        q[k, k + 1] = lam
        q[k + 1, k] = mu * min(k + 1, m)
    np.fill_diagonal(q, -q.sum(axis=1))
    a = q.T.copy()
    a[-1, :] = 1.0
    b = np.zeros(n + 1)
    b[-1] = 1.0
    pi = np.linalg.solve(a, b)
    tail = pi[-1] * rho / (1 - rho)
    assert tail < tail_tol, tail
    k = np.arange(n + 1)
    return {
        "p0": float(pi[0]),
        "p_wait": float(pi[m:].sum()),
        "mean_tasks": float((k * pi).sum()),
        "pi": pi,
    }


def exact_erlang(lam, mu, m):
    """p0, P_wait and mean population in exact rational arithmetic."""
    lam, mu = Fraction(lam), Fraction(mu)
    a = lam / mu
    rho = a / m
    head = sum(a**k / math.factorial(k) for k in range(m))
    tail = a**m / math.factorial(m) / (1 - rho)
    p0 = 1 / (head + tail)
    pw = tail * p0
    return p0, pw, m * rho + rho / (1 - rho) * pw


def mmm_wait(lam, mu, m):
    """FCFS M/M/m mean wait, P_wait / (m mu - lam), from the exact Erlang-C value."""
    _, pw, _ = exact_erlang(lam, mu, m)
    return float(pw / (m * Fraction(mu) - Fraction(lam)))
