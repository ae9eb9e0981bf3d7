"""Tidal matrix of a string wrapped on the equator of R x S^2.

The tidal matrix is contracted from the chart's Riemann tensor in a
parallel-transported frame, not typed in.  The result is lambda = -1 in
the gauge time, for any radius, so no conjugate strings ever form.
"""

import numpy as np

from wsmorse.evolution import equator_state, step
from wsmorse.jacobi import find_conjugate_strings, integrate_jacobi, tidal_matrix_from_grid
from wsmorse.manifold import product_time_sphere_chart
from wsmorse.worldsheet import equator_tube, geodesic_residual

for K in (0.25, 1.0, 4.0):
    r = 1 / np.sqrt(K)
    grid = equator_tube(K, T=6.0, Ntau=601, Nsigma=16)
    frame = [[0.0, 1 / r, 0.0]]  # unit e_theta
    M = tidal_matrix_from_grid(grid, frame)
    tr = integrate_jacobi(M, 6.0, 1e-2)
    print(
        f"K = {K:4.2f}: M = {M(0.0)[0, 0]:+.10f}, residual {np.abs(geodesic_residual(grid)).max():.1e}, "
        f"det A(6) = {tr.detA[-1]:.4e} (sinh 6 = {np.sinh(6):.4e}), conjugate strings: {len(find_conjugate_strings(tr))}"
    )

# the evolved string stays put
chart = product_time_sphere_chart(3, 1.0)
st = equator_state(1.0, 64, 2 * np.pi / 64 / 4)
x0 = st.X.copy()
for _ in range(1000):
    st = step(st, chart)
print("\nafter 1000 steps, max drift off the equator:", np.abs(st.X[:, 1:] - x0[:, 1:]).max())
