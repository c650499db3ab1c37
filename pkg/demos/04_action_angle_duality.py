# Under the flows of F_l the lambdas stay put and each theta_j turns at the
# constant rate 2 sinh(2 l lambda_j): lambda are actions, theta are angles.
# The eigenvalue phases of L give the dual coordinates phat on which the
# Phi_l become functions of position only.
import numpy as np

from rsvd.dynamics import duality_experiment
from rsvd.matgroup import free_hamiltonian
from rsvd.models import actions_phi_dual
from rsvd.reduction import ReducedPoint, build_params, domain_check, reconstruct_point

p = build_params(1, 0.0, 0.0, np.log(2))
rep = duality_experiment(ReducedPoint([np.log(2)], [0.5]), p, l=1, t_end=1.0)
print("slope expected", rep.expected_slope, "measured", rep.measured_slope)  # 2 sinh(2 ln 2) = 3.75

p = build_params(2, 0.1, 0.3, np.log(2))
rp = ReducedPoint([2.2, 0.9], [0.3, 2.0])
for l in (1, 2):
    rep = duality_experiment(rp, p, l=l, t_end=1.0)
    print(f"l={l}  lambda drift={rep.lambda_deviation:.1e}  theta deviation={rep.theta_deviation:.1e}")

t = reconstruct_point(rp, p)
q = np.sort(np.abs(np.angle(np.linalg.eigvals(t.L))) / 2)[::2]
phat = np.sort(np.log(np.sin(q)))[::-1]
print("phat from the spectrum of L", phat, "in dual domain:", bool(domain_check("phat", phat, p)))
for l in (1, 2, 3):
    print(f"Phi_{l}: dual formula {actions_phi_dual(l, phat):.12f}   tr L^l/2l {free_hamiltonian('Phi', l, t):.12f}")
