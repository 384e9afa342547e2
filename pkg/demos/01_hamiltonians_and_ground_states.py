"""Build a random-bond Heisenberg family and solve for ground states.

The family is H(x) = sum_<ij> J_ij (XX + YY + ZZ) on an open grid, with one
coupling J_ij in [0, 2] per bond stored as x_ij = J_ij - 1.  The targets are
the two-body correlators C_ij = (XX + YY + ZZ)/3 on every bond.
"""

import numpy as np

from gslearn import (SolverConfig, build_heisenberg, expectation,
                     ground_state, map_couplings, obs_distance,
                     local_coordinates)

rng = np.random.default_rng(0)

# a 2x3 grid: 6 qubits, 7 bonds, 7 coupling parameters
ham, observables = build_heisenberg(2, 3)
print(f"sites={ham.n_sites}  bonds={len(ham.lattice.bonds)}  m={ham.m}")
print("observables:", ", ".join(o.name for o in observables))

# the single-bond case has an exact answer: for any J > 0 the ground state
# is the singlet, with energy -3J, gap 4J, and C_01 = -1 independent of J
bond, (c01,) = build_heisenberg(1, 2)
for coupling in (0.4, 1.0, 1.9):
    gs = ground_state(bond, map_couplings(np.array([coupling])))
    print(f"J={coupling:.1f}: E0={gs.energy:+.4f} gap={gs.gap:.4f} "
          f"C01={expectation(c01, gs):+.4f}")

# a random instance of the 2x3 family
x = rng.uniform(-1.0, 1.0, ham.m)
gs = ground_state(ham, x, SolverConfig(dense_cutoff=12))
print(f"\nrandom 2x3 instance: E0={gs.energy:.4f} gap={gs.gap:.4f} "
      f"degeneracy={gs.degeneracy}")
for obs in observables[:3]:
    print(f"  {obs.name} = {expectation(obs, gs):+.4f}")

# the geometry the learning algorithms lean on: distances between
# observables and the local coordinate sets I_P
p = observables[0].components[0][1]
q = observables[-1].components[0][1]
print(f"\nd_obs({p}, {q}) = {obs_distance(p, q, ham.lattice)}")
for delta1 in (0.0, 1.0, 2.0):
    i_p = local_coordinates(p, ham, delta1)
    print(f"delta1={delta1}: |I_P|={len(i_p)} coords={i_p}")
