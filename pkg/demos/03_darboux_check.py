# Two routes to the same motion.  Route one integrates the Phi_1 flow of the
# full triple and reads (lambda, theta) off each step.  Route two integrates
# Hamilton's equations for the closed-form reduced Hamiltonian with
# dlambda/dt = -dH/dtheta, dtheta/dt = dH/dlambda.  They agree only if
# (lambda, theta) are canonical coordinates.
import numpy as np

from rsvd.dynamics import darboux_experiment
from rsvd.reduction import ReducedPoint, build_params, make_rng, sample_domain

for n in (1, 2, 3):
    p = build_params(n, 0.1, 0.3, np.log(2))
    rng = make_rng(n)
    rp = ReducedPoint(sample_domain("lambda", p, rng), rng.uniform(0, 2 * np.pi, n))
    rep = darboux_experiment(rp, p, t_end=0.1, dt=1e-4)
    flipped = darboux_experiment(rp, p, t_end=0.1, dt=1e-4, sign=-1)
    print(f"n={n}  deviation={rep.max_deviation:.2e}  with the opposite orientation={flipped.max_deviation:.2e}")
