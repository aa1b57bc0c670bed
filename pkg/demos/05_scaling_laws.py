"""Training-cost arithmetic and saturating power-law loss fits.

Fits L(x) = L_inf + (x0/x)^alpha to synthetic loss measurements and reads
off the irreducible floor, then prices a few training runs with C = 6 N D.
"""

import numpy as np

from motordiag.scaling import compute_cost, fit_scaling_law, predict_loss

rng = np.random.default_rng(0)
truth = dict(l_inf=0.18, x0=250.0, alpha=0.55)
xs = np.array([20.0, 60.0, 200.0, 600.0, 2000.0, 6000.0, 20000.0])
losses = truth["l_inf"] + (truth["x0"] / xs) ** truth["alpha"]
losses = losses * (1.0 + 0.01 * rng.standard_normal(xs.size))  # 1% measurement noise

fit = fit_scaling_law(list(zip(xs, losses)))
print("Fitted saturating power law:")
print(f"  L(x) = {fit.l_inf:.4f} + ({fit.x0:.1f}/x)^{fit.alpha:.3f}   rss={fit.rss:.2e}")
print(f"  generating parameters were L_inf={truth['l_inf']}, x0={truth['x0']}, alpha={truth['alpha']}")

print("\nPredicted loss along the curve:")
for x in (50.0, 500.0, 5000.0, 5e6):
    print(f"  x={x:>10.0f}: L={predict_loss(fit, x):.4f}")
print(f"  irreducible floor: {fit.l_inf:.4f}")

print("\nTraining cost C = 6 N D:")
for n_params, batch, steps in ((8e6, 32, 2000), (35e6, 64, 10000), (341e6, 64, 10000)):
    cost = compute_cost(n_params, batch_size=batch, steps=steps)
    print(f"  N={n_params:>9.2e} params, B={batch}, S={steps}: C={cost:.3e}")
