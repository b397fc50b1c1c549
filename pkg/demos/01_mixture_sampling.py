import numpy as np

from stochmdn.mixture import MixtureParams, cdf, gnll_point, mixture_mean, mixture_std, pdf
from stochmdn.sampling import QuantilePolicy, SampleContext, inverse_cdf, sample_with_policy, standard_sample
from stochmdn.evalsuite import ks_2samp_statistic, ks_critical_value

# %%
# A two-component mixture, roughly what the load voltage looks like near a
# switching event: most of the mass on the superconducting level, some on
# the resistive one.

mix = MixtureParams(means=[0.0, 0.0235], sigmas=[2e-4, 5e-4], alphas=[0.7, 0.3])
print("mean", mixture_mean(mix), "std", mixture_std(mix))

xs = np.array([-4e-4, 0.0, 4e-4, 0.01, 0.0225, 0.0235, 0.0245])
for x, d, c in zip(xs, pdf(mix, xs), cdf(mix, xs)):
    print(f"x={x:+.4f}  pdf={d:10.3f}  cdf={c:.4f}")

# %%
# Negative log-likelihood of one observation.  Sitting on a mode is cheap,
# sitting between the modes is not.

for x in (0.0, 0.01, 0.0235):
    print(f"GNLL at {x}: {gnll_point(mix, x):.3f}")

# %%
# Inverse CDF.  Quantiles below 0.7 land on the lower mode, above on the
# upper one; the median sits close to zero.

qs = np.array([0.05, 0.5, 0.69, 0.71, 0.95])
print(dict(zip(qs.tolist(), inverse_cdf(mix, qs).round(6).tolist())))

# %%
# Inverse-transform sampling with fresh uniform quantiles matches the usual
# pick-a-component-then-draw sampler.  A two-sample KS test should not see a
# difference.

rng = np.random.default_rng(0)
n = 5000
a = standard_sample(mix, rng, n)
b = inverse_cdf(mix, rng.uniform(size=n))
stat = ks_2samp_statistic(a, b)
print(f"KS {stat:.4f}  critical (1%) {ks_critical_value(n, 0.01, n):.4f}")

# %%
# Quantile policies.  ``held_per_sweep`` keeps the same quantile until a
# sweep boundary, so consecutive samples move smoothly; ``fresh_per_call``
# draws a new one every time.

for mode in ("held_per_sweep", "fresh_per_call"):
    ctx = SampleContext(QuantilePolicy(mode), np.random.default_rng(3))
    draws = [sample_with_policy(mix, ctx, "sweep_boundary" if k == 3 else "step") for k in range(6)]
    print(mode, np.round(draws, 5))
