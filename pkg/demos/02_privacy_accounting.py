"""Walk through the privacy accountant, from one step to a full budget.

The trainer releases each discriminator update through the subsampled
Gaussian mechanism. The accountant tracks the Renyi divergence cost of every
release across a grid of orders and converts the running total into an
(epsilon, delta) statement at the end.
"""

import numpy as np

from dpsynth import dp

# Cost of a single release, per order. With full batches (q = 1) the cost is
# exactly alpha / (2 sigma^2); subsampling (q < 1) buys a large discount.
sigma = 2.0
for q in (1.0, 0.1, 0.004):
    costs = [dp.rdp_subsampled_gaussian(q, sigma, a) for a in (2, 8, 32)]
    print(f"q = {q:<6} per-step cost at orders 2/8/32: "
          + "  ".join(f"{c:.2e}" for c in costs))

# Costs add across steps, so a ledger is just a running sum per order.
cfg = dp.DpConfig(noise_multiplier=sigma, sample_rate=50 / 12384)
ledger = dp.ledger_compose(dp.new_ledger(), cfg, steps=7000)
eps, order = dp.eps_and_order(ledger)
print(f"\n7000 steps at q = 50/12384, sigma = 2: "
      f"epsilon = {eps:.4f} at delta = {ledger.delta:g} (best order {order})")

# More noise, less budget spent: epsilon falls monotonically in sigma.
print("\nsigma -> epsilon (same run length):")
for s in (1.0, 1.5, 2.0, 4.0, 8.0):
    print(f"  sigma = {s:<4} epsilon = {dp.epsilon_for(50 / 12384, s, 7000, 1e-5):8.4f}")

# Calibration inverts that curve: name the budget, get the noise level.
target = dp.PrivacySpec(epsilon=1.0, delta=1e-5)
sigma_cal = dp.calibrate_sigma(target, q=50 / 12384, steps=7000)
achieved = dp.epsilon_for(50 / 12384, sigma_cal, 7000, 1e-5)
print(f"\ntarget epsilon = 1.0 -> calibrated sigma = {sigma_cal:.4f} "
      f"(achieves epsilon = {achieved:.6f})")

# The same arithmetic backs the DP-SGD release itself: clip each per-example
# gradient to norm C, average, and add N(0, (sigma C / B)^2) noise per
# coordinate.
rng = np.random.default_rng(0)
grads = rng.standard_normal((50, 8)) * 3.0
release_cfg = dp.DpConfig(clip_norm=1.0, noise_multiplier=sigma, sample_rate=0.01)
noisy_mean = dp.privatize(grads, release_cfg, rng)
print(f"\nprivate gradient release (B = 50, C = 1): {np.round(noisy_mean, 4)}")
