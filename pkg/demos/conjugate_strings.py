"""Where conjugate strings appear, and where they do not.

Integrates the matrix Jacobi equation for a constant tidal matrix
M = lambda I and reads off the zeros of det A.
"""

import numpy as np

from wsmorse.jacobi import TidalMatrix, find_conjugate_strings, integrate_jacobi

for lam in (-1.0, 0.0, 0.25, 1.0, 4.0):
    tr = integrate_jacobi(TidalMatrix.explicit(lam, 2), T=8.0, dt=1e-3)
    found = find_conjugate_strings(tr)
    roots = ", ".join(f"{c.tau_star:.6f} (x{c.multiplicity})" for c in found) or "none"
    print(f"lambda = {lam:5.2f}: det A(8) = {tr.detA[-1]:+.3e}; conjugate strings: {roots}")

# unequal eigenvalues split the roots
tr = integrate_jacobi(TidalMatrix.explicit(np.diag([1.0, 2.0])), T=5.0, dt=1e-3)
print("\nM = diag(1, 2):", [round(c.tau_star, 6) for c in find_conjugate_strings(tr)])
print("expected:      ", [round(float(x), 6) for x in (np.pi / np.sqrt(2), np.pi, 2 * np.pi / np.sqrt(2))])

# the Wronskian A'^T A - A^T A' stays zero only for symmetric M
sym = integrate_jacobi(TidalMatrix.explicit([[1.0, 0.4], [0.4, 0.5]]), 3.0, 1e-3)
skew = integrate_jacobi(TidalMatrix.explicit([[0.0, 1.0], [0.0, 0.0]]), 1.0, 1e-3)
print("\nWronskian, symmetric M:", sym.wronskian_norm.max())
print("Wronskian, M = [[0,1],[0,0]] at tau=1:", skew.wronskian_norm[-1], "(sqrt(2)/3 =", np.sqrt(2) / 3, ")")
