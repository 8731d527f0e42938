"""Shared helpers for the test suite."""

import numpy as np


def random_interior_alpha(rng, n, rmax=0.9, real=False):
    """Random Verblunsky entries strictly inside the disk (or interval)."""
    if real:
        return rng.uniform(-rmax, rmax, n)
    r = rmax * np.sqrt(rng.uniform(0, 1, n))
    phi = rng.uniform(-np.pi, np.pi, n)
    return r * np.exp(1j * phi)


def reference_periodic_entries(alpha):
    """Periodic Lax matrix written entry by entry, 1-based site bookkeeping.

    Independent of the block-product construction: rows come from the
    closed-form entry table (odd rows carry conj(alpha_j) factors, even rows
    carry -alpha_j factors, with alpha_0 identified with alpha_N).
    """
    a = np.asarray(alpha)
    n = len(a)
    rho = np.sqrt(1.0 - np.abs(a) ** 2)
    E = np.zeros((n, n), complex)

    def A(j):  # alpha_j, 1-based, cyclic
        return a[(j - 1) % n]

    def R(j):
        return rho[(j - 1) % n]

    for j in range(1, n + 1, 2):  # odd site, rows j and j+1 (1-based)
        r0, r1 = j - 1, j % n  # 0-based row indices
        cols = [(j - 2) % n, (j - 1) % n, j % n, (j + 1) % n]
        E[r0, cols[0]] += np.conj(A(j)) * R(j - 1)
        E[r0, cols[1]] += -np.conj(A(j)) * A(j - 1)
        E[r0, cols[2]] += R(j) * np.conj(A(j + 1))
        E[r0, cols[3]] += R(j) * R(j + 1)
        E[r1, cols[0]] += R(j) * R(j - 1)
        E[r1, cols[1]] += -R(j) * A(j - 1)
        E[r1, cols[2]] += -A(j) * np.conj(A(j + 1))
        E[r1, cols[3]] += -A(j) * R(j + 1)
    return E
