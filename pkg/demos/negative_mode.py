"""Past a conjugate string the second variation goes negative.

With M = I the Jacobi field sin(tau) vanishes again at r = pi.  Cut it off
there, add a small multiple of a bump k, and the index form of
eta = eps k + J / eps tends to -4 pi c.
"""

import numpy as np

from wsmorse.indexform import VariationField, index_form, negative_mode, positivity_certificate, sine_field
from wsmorse.jacobi import TidalMatrix

M = TidalMatrix.explicit(1.0, 1)
T = 1.5 * np.pi
taus = np.linspace(0.0, T, 3001)  # pi is node 2000

w = np.pi / T
scale = 1.0 / np.sin(w * np.pi)  # makes k(pi) = 1


def bump(t):
    return (scale * np.sin(w * t))[:, None], (scale * w * np.cos(w * t))[:, None], (-scale * w * w * np.sin(w * t))[:, None]


k = VariationField.from_function(taus, bump)
res = negative_mode(M, np.pi, T, k, epsilons=(0.3, 0.1, 0.03, 0.01, 0.003))

print("c      =", res.c)
print("I(k,J) =", res.I_kJ, "  -2 pi c =", -2 * np.pi * res.c)
print("I(J,J) =", res.I_JJ)
print("I(k,k) =", res.I_kk)
print("\n  eps      I(eta, eta)")
for e, v in zip(res.epsilons, res.I_total_by_eps):
    print(f"{e:6.3f}  {v:+.8f}")
print("limit  ", res.I_total_limit, "  -4 pi c =", -4 * np.pi * res.c)

# before the conjugate string the same machinery certifies positivity
short = np.linspace(0.0, 0.9 * np.pi, 901)
V = sine_field(short, 1)
print("\nT = 0.9 pi: I(V,V) =", index_form(V, V, M), " certificate =", positivity_certificate(M, None, V))
