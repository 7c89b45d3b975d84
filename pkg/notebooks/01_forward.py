# %% [markdown]
# # Forward map: from a potential to its m-particle density
#
# Two particles on two cells with unit weights.  The pair potential is
# `log 2` on the doubly occupied cell `00` and zero elsewhere.

# %%
import math

import numpy as np

from canonical_inverse import CanonicalSystem, StateSpace, SymmetricTable
from canonical_inverse.ensemble import log_partition, m_density, reduce_density

space = StateSpace.uniform(2)
sys = CanonicalSystem(space, N=2, m=2)
u = SymmetricTable(space, 2, [math.log(2), 0.0, 0.0])

# %% [markdown]
# The four ordered configurations carry Boltzmann weights 1/2, 1, 1, 1, so
# Z = 3.5 and the pair density on (00, 01, 11) is (1, 2, 2) / 7.

# %%
print("log Z   ", log_partition(sys, u), math.log(3.5))
rho = m_density(sys, u)
print("rho * 7 ", rho.values * 7)
print("rho1 * 7", reduce_density(rho, 1).values * 7)

# %% [markdown]
# A larger system with a weighted space.  The density is a per-tuple value;
# integrating it against the cell weights gives one.

# %%
from canonical_inverse import PotentialSpec, integrate, random_table

rng = np.random.default_rng(0)
space = StateSpace((0.5, 1.0, 1.5, 2.0))
W = PotentialSpec((random_table(space, 2, -1, 1, rng),))
sys = CanonicalSystem(space, N=5, m=2, W=W)
u = random_table(space, 2, -1, 1, rng)
rho = m_density(sys, u)
print(sys.num_configurations, "configurations")
print("integral", integrate(rho))
for k in (1, 2, 3):
    print(k, np.round(m_density(sys, u, k).values[:6], 5))
