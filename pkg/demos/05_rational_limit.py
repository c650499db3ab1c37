# Scale lambda, u, v, mu by r and let r -> 0.  The error against the rational
# Hamiltonian H_0 behaves like r (v - u)(H_0 - n), so it is first order unless
# u = v, and the linear regime starts once r lambda_1 is small.
import numpy as np

from rsvd.models import ham_rational
from rsvd.reduction import ReducedPoint, build_params

rp = ReducedPoint([3.0, 1.5, 0.5], [0.3, 1.0, 2.0])
p = build_params(3, 0.1, 0.3, np.log(2))
h0 = ham_rational(rp, p, 0)
print("H_0 =", h0, " predicted (H_r - H_0)/r ->", (p.v - p.u) * (h0 - 3))
for r in (1e-1, 1e-2, 1e-3, 1e-4, 1e-5):
    print(f"r={r:.0e}  (H_r - H_0)/r = {(ham_rational(rp, p, r) - h0) / r: .6f}")

p = build_params(3, 0.2, 0.2, np.log(2))
h0 = ham_rational(rp, p, 0)
print("u = v: the first-order term cancels")
for r in (1e-2, 1e-3, 1e-4):
    print(f"r={r:.0e}  (H_r - H_0)/r^2 = {(ham_rational(rp, p, r) - h0) / r**2: .6f}")
