# Build the constrained triple (Omega, L, w) for a point (lambda, theta) and
# compare 1/2 tr L with the closed-form reduced Hamiltonian.
import numpy as np

from rsvd.matgroup import free_hamiltonian
from rsvd.models import ham_phi1_red
from rsvd.reduction import ReducedPoint, build_params, extract_invariants, reconstruct

# n = 1, u = v = 0, mu = ln 2 is small enough to do by hand:
# Lambda = (4, 1/4), moduli (0.6, 0.15), 1/2 tr L = 0.36 + 0.64 cos(theta)
p = build_params(1, 0.0, 0.0, np.log(2))
for theta in (0.0, np.pi / 3, np.pi / 2):
    rec = reconstruct(ReducedPoint([np.log(2)], [theta]), p)
    print(f"theta={theta:.4f}  moduli={rec.moduli}  1/2 tr L={free_hamiltonian('Phi', 1, rec.triple):.12f}"
          f"  closed form={0.36 + 0.64 * np.cos(theta):.12f}")

# a generic n = 3 point, and the way back
p = build_params(3, 0.1, 0.3, np.log(2))
rp = ReducedPoint([3.1, 1.9, 0.8], [0.2, 1.4, -2.0])
rec = reconstruct(rp, p)
print("Omega spectrum   ", np.sort(np.linalg.eigvalsh(rec.triple.Omega))[::-1])
print("(Lambda, 1/Lambda)", np.sort(rec.frame.Lambda_full)[::-1])
print("Phi1 closed form ", ham_phi1_red(rp, p))
print("1/2 tr L         ", free_hamiltonian("Phi", 1, rec.triple))
back = extract_invariants(rec.triple, p)
print("recovered lambda ", back.lam, " theta", back.theta)
