"""Polynomial coefficient arithmetic and Durand-Kerner root finding.

Coefficient arrays are ordered constant term first.
"""

from __future__ import annotations

import numpy as np

DEDUP_RADIUS = 1e-9


class NoConvergence(RuntimeError):
    def __init__(self, message: str, roots: np.ndarray):
        super().__init__(message)
        self.roots = roots


def trim(c: np.ndarray) -> np.ndarray:
    c = np.asarray(c, dtype=complex)
    nz = np.flatnonzero(c)
    return c[: nz[-1] + 1] if len(nz) else c[:1] * 0


def degree(c: np.ndarray) -> int:
    c = trim(c)
    return len(c) - 1 if c[-1] != 0 else -1


def polyval(c: np.ndarray, z):
    out = np.zeros_like(np.asarray(z, dtype=complex))
    for a in c[::-1]:
        out = out * z + a
    return out


def derivative(c: np.ndarray) -> np.ndarray:
    if len(c) <= 1:
        return np.zeros(1, dtype=complex)
    return c[1:] * np.arange(1, len(c))


def compose(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Coefficients of p(q(z)) by Horner's scheme on coefficient arrays."""
    out = np.array([p[-1]], dtype=complex)
    for a in p[-2::-1]:
        out = np.convolve(out, q)
        out[0] += a
    return trim(out)


def durand_kerner(c: np.ndarray, tol: float = 1e-12, max_iter: int = 500) -> np.ndarray:
    """All roots of the polynomial with coefficients ``c``, with multiplicity.

    Exact zero roots are split off first.  Initial guesses lie on a circle of
    radius 1 + max|c_k / c_n| (Cauchy's bound), rotated off the real axis.
    Iteration stops when the largest update falls below ``tol`` (relative
    to 1 + |root|).
    """
    c = trim(c)
    n = len(c) - 1
    if n < 1:
        return np.zeros(0, dtype=complex)
    zeros = 0
    while zeros < n and c[zeros] == 0:
        zeros += 1
    c = c[zeros:]
    m = len(c) - 1
    if m == 0:
        return np.zeros(zeros, dtype=complex)
    monic = c / c[-1]
    if m == 1:
        return np.concatenate([np.zeros(zeros, dtype=complex), [-monic[0]]])
    radius = 1 + np.max(np.abs(monic[:-1]))
    z = radius * np.exp(1j * (2 * np.pi * np.arange(m) / m + 0.4))
    converged = False
    for _ in range(max_iter):
        diff = z[:, None] - z[None, :]
        np.fill_diagonal(diff, 1.0)
        step = polyval(monic, z) / np.prod(diff, axis=1)
        z = z - step
        if np.max(np.abs(step) / (1 + np.abs(z))) < tol:
            converged = True
            break
    # Newton polish on the original polynomial
    dc = derivative(monic)
    for _ in range(2):
        with np.errstate(all="ignore"):
            d = polyval(dc, z)
            upd = np.where(d != 0, polyval(monic, z) / d, 0)
        z = np.where(np.isfinite(upd) & (np.abs(upd) < 1e-6 * (1 + np.abs(z))), z - upd, z)
    roots = np.concatenate([np.zeros(zeros, dtype=complex), z])
    if not converged and not np.all(np.isfinite(roots)):
        raise NoConvergence("Durand-Kerner did not converge", roots)
    return roots


def dedup(points, radius: float = DEDUP_RADIUS) -> list[complex]:
    """Greedy deduplication keeping first occurrences."""
    kept: list[complex] = []
    if len(points) == 0:
        return kept
    arr = np.asarray(points, dtype=complex)
    keep = np.ones(len(arr), dtype=bool)
    for i in range(len(arr)):
        if not keep[i]:
            continue
        close = np.abs(arr[i + 1 :] - arr[i]) <= radius
        keep[i + 1 :][close] = False
        kept.append(complex(arr[i]))
    return kept


def cluster_multiplicities(roots, rel_radius: float = 1e-4) -> list[tuple[complex, int]]:
    """Group roots closer than ``rel_radius*(1+|z|)``; returns (centroid, count).

    Repeated roots come out of simultaneous iteration spread by roughly
    eps**(1/multiplicity) (about 2e-5 for a triple root), inside this radius
    up to multiplicity 3.  The centroid of a cluster is accurate to about eps.
    """
    arr = np.asarray(roots, dtype=complex)
    used = np.zeros(len(arr), dtype=bool)
    out = []
    for i in range(len(arr)):
        if used[i]:
            continue
        group = ~used & (np.abs(arr - arr[i]) <= rel_radius * (1 + abs(arr[i])))
        used |= group
        out.append((complex(arr[group].mean()), int(group.sum())))
    return out


def root_clusters(c: np.ndarray, rel_radius: float = 1e-4) -> list[tuple[complex, int]]:
    """Distinct roots with multiplicities.

    A cluster of k roots is a k-fold root of p, hence a simple root of the
    (k-1)-th derivative; a few Newton steps on that derivative restore full
    accuracy to the location.
    """
    c = trim(c)
    out = []
    for z, k in cluster_multiplicities(durand_kerner(c), rel_radius):
        if k > 1 and z != 0:
            d = c
            for _ in range(k - 1):
                d = derivative(d)
            dd = derivative(d)
            for _ in range(5):
                den = polyval(dd, z)
                if den == 0:
                    break
                step = polyval(d, z) / den
                if not np.isfinite(step) or abs(step) > rel_radius * (1 + abs(z)):
                    break
                z = z - step
        out.append((complex(z), k))
    return out
