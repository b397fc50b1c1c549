import numpy as np

from stochmdn.device import (
    DeviceState,
    GroundTruthConfig,
    ModelConfig,
    SweepProtocol,
    fit_iv_model,
    fit_switching_model,
    generate_dataset,
    switching_model_predict,
    v_mid_rule_of,
)
from stochmdn.evalsuite import (
    default_gate_grid,
    empirical_switching_probability,
    ground_truth_switching_curve,
    mae,
    model_switching_curve,
    r_squared,
)
from stochmdn.mixture import mixture_mean, mixture_std
from stochmdn.network import TrainConfig

# %%
# Synthetic device.  Critical and retrapping currents are Gaussian with
# means that fall linearly with bias.  We sweep the gate up and back down
# at two bias levels, 150 times each.

truth = GroundTruthConfig()
protocol = SweepProtocol(bias_levels_uA=(16.5, 28.0), repeats=150)
iv, sw = generate_dataset(truth, protocol, seed=11)
print(len(iv), "I-V records,", len(sw), "switching records")

for b in protocol.bias_levels_uA:
    print(f"I_B={b}: mu_c={float(truth.mu_c(b)):.3f} uA  mu_r={float(truth.mu_r(b)):.3f} uA")

# %%
# Train a small I-V model.  The inputs are gate current, bias current and the
# branch the device is on.  A few epochs are enough for a rough fit.

net, history = fit_iv_model(iv, ModelConfig(hidden_sizes=(16, 16), K=3, target_scale=2e-4),
                            TrainConfig(epochs=8, batch_size=512, learning_rate=3e-3))
print("loss per epoch", np.round(history, 3))

# %%
# Switching probability is the mass of the predicted load voltage above the
# midpoint between the two voltage levels.  Compare with the sweeps we
# actually ran and with the analytic law.

grid = default_gate_grid(0.0, 3.0, 0.05)
rule = v_mid_rule_of(net)
for b in protocol.bias_levels_uA:
    model = model_switching_curve(net, grid, b, rule(b)).probabilities
    emp = empirical_switching_probability(iv, grid, b, rule(b)).probabilities
    gt = ground_truth_switching_curve(truth, grid, b).probabilities
    print(f"I_B={b}: MAE vs data {100 * mae(model, emp):.2f}%  vs law {100 * mae(model, gt):.2f}%"
          f"  R2 {r_squared(model, gt):.4f}")

# %%
# The switching-current variant predicts I_c (state 0) and I_r (state 1)
# directly from the bias.  With 600 records and a short run the spread is
# only roughly right; compare against the true sigma.

swnet, _ = fit_switching_model(sw, ModelConfig(hidden_sizes=(16, 16), K=2, target_scale=0.01),
                               TrainConfig(epochs=300, batch_size=64, learning_rate=3e-3))
for b in protocol.bias_levels_uA:
    for st in (DeviceState.SUPERCONDUCTING, DeviceState.RESISTIVE):
        p = switching_model_predict(swnet, b, st)
        true_sd = truth.sigma_c(b) if st == DeviceState.SUPERCONDUCTING else truth.sigma_r(b)
        print(f"I_B={b} {st.name:15s} mean {mixture_mean(p):.3f}  std {mixture_std(p):.4f}  (true {float(true_sd):.4f})")
