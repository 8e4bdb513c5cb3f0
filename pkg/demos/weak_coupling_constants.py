"""
Weak-coupling constants from momentum space
===========================================

Evaluates the analytic side of the weak-coupling theory: the resolvent
norm that tends to alpha^2, the first-chaos pairing whose lambda -> 0
intercept is half the diffusivity enhancement sigma^2(alpha), and the
off-diagonal pairing that separates the self-repelling polymer (-1/32)
from its divergence-free companion model (0).
"""

import numpy as np

from srbp2d.fock import (diffusivity_pairing, intercept_fit, offdiag_pairing,
                         sigma2)
from srbp2d.spectral import gamma_weak_lambda, weak_norm

alpha = 1.0
print(f"sigma^2({alpha}) = {sigma2(alpha):.4f}, "
      f"target diffusivity 1 + sigma^2 = {1 + sigma2(alpha):.4f}\n")

# the weak-coupling norm saturates at alpha^2 ...
print("lambda      gamma^2     weak norm")
for lam in (1e-2, 1e-4, 1e-7, 1e-10):
    g2 = gamma_weak_lambda(lam, alpha) ** 2
    print(f"{lam:8.0e}   {g2:.5f}    {weak_norm(lam, alpha=alpha):.5f}")

# ... while at fixed gamma it diverges like log(1/lambda)
fixed = [weak_norm(lam, gamma=1.0) for lam in (1e-3, 1e-5, 1e-7)]
print(f"\nfixed gamma = 1: {fixed[0]:.2f} -> {fixed[1]:.2f} -> "
      f"{fixed[2]:.2f}  (steps of log(100) = {np.log(100):.2f})")

# the pairing carries an O(gamma^2) excess; extrapolate it away
lams = [1e-4, 1e-6, 1e-8, 1e-10]
vals = [diffusivity_pairing(lam, alpha)[0] for lam in lams]
fit = intercept_fit(lams, vals, alpha)
print(f"\ndiffusivity pairing at lambda = {lams}:")
print(f"  values    {np.round(vals, 4)}")
print(f"  intercept {fit['intercept']:.4f}  "
      f"(target sigma^2/2 = {0.5 * sigma2(alpha):.4f})")

# the off-diagonal pairing tells the two models apart
v_srbp, e_srbp = offdiag_pairing("srbp", 1e-8, alpha, quad_samples=400000)
v_dc, e_dc = offdiag_pairing("dcgff", 1e-8, alpha, quad_samples=400000)
print(f"\noff-diagonal pairing at lambda = 1e-8:")
print(f"  polymer          {v_srbp:+.5f} +- {e_srbp:.5f}  "
      f"(limit -1/32 = {-1 / 32:.5f})")
print(f"  divergence-free  {v_dc:+.5f} +- {e_dc:.5f}  (limit 0)")
