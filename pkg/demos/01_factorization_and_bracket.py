# Factor random elements of SL(2n, C) as g = k b and check that the two
# families F_l = tr(Omega^l)/2l and Phi_l = tr(L^l)/2l each Poisson-commute.
import numpy as np

from rsvd.matgroup import decompose_kb, master_function, observables, poisson_bracket, random_sl
from rsvd.reduction import make_rng

rng = make_rng(0)
g = random_sl(2, rng)
p = decompose_kb(g)

print("|k b - g|       ", np.abs(p.k @ p.b - g).max())
print("|k^dag k - 1|   ", np.abs(p.k.conj().T @ p.k - np.eye(4)).max())
print("diag(b)         ", np.round(np.diag(p.b).real, 6))

t = observables(p, np.array([1.0, 0.5j, 0, 0]))
print("triple invariant violation", t.check())

# brackets within a family vanish; across families they do not
F1, F2 = master_function("F", 1), master_function("F", 2)
P1, P2 = master_function("Phi", 1), master_function("Phi", 2)
print("{F1, F2}   =", poisson_bracket(F1, F2, g))
print("{Phi1,Phi2} =", poisson_bracket(P1, P2, g))
print("{F1, Phi1} =", poisson_bracket(F1, P1, g))
