"""Basis inverse for standard-form matrices ``[A | I]``.

Basic identity columns contribute unit rows, so only the square block of
structural columns against the rows they cover needs a dense inverse.
"""
import numpy as np


def basis_inverse(A: np.ndarray, basis: np.ndarray) -> np.ndarray:
    """Inverse of ``A[:, basis]`` assuming the last ``m`` columns of ``A`` are
    the identity. Raises ``numpy.linalg.LinAlgError`` for a singular basis."""
    m, ntot = A.shape
    n = ntot - m
    basis = np.asarray(basis)
    struct = basis < n
    S = np.flatnonzero(struct)
    I = np.flatnonzero(~struct)
    rho = basis[I] - n
    free = np.ones(m, dtype=bool)
    free[rho] = False
    R = np.flatnonzero(free)
    if R.size != S.size:
        return np.linalg.inv(A[:, basis])
    Binv = np.zeros((m, m))
    if S.size:
        cols = basis[S]
        Cinv = np.linalg.inv(A[np.ix_(R, cols)])
        Binv[np.ix_(S, R)] = Cinv
        if I.size:
            Binv[np.ix_(I, R)] = -A[np.ix_(rho, cols)] @ Cinv
    Binv[I, rho] = 1.0
    return Binv
