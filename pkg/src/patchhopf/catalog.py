"""Reference dispersion matrices and growth rates used by the examples and tests."""

import numpy as np

M4 = np.array([7.5, 7.0, 6.5, 6.0])
M2 = np.array([1.0, 2.0])

A1 = np.array([
    [-1.0, 0.2, 0.5, 0.6],
    [0.5, -1.2, 0.2, 0.1],
    [0.0, 0.1, -0.9, 0.1],
    [0.0, 0.1, 0.2, -1.2],
])
A2 = np.array([
    [-2.0, 0.2, 0.5, 0.0],
    [0.5, -1.2, 0.2, 0.1],
    [0.0, 0.1, -0.9, 0.1],
    [0.0, 0.1, 0.2, -1.2],
])
A3 = np.array([[-2.0, 1.0], [0.9, -1.0]])
A4 = np.array([[-20.0, 1.0], [15.0, -1.0]])
SYMMETRIC = np.array([[-2.0, 1.0], [1.0, -2.0]])

MATRICES = {"A1": (A1, M4), "A2": (A2, M4), "A3": (A3, M2), "A4": (A4, M2), "symmetric": (SYMMETRIC, np.ones(2))}
