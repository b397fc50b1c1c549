import numpy as np

from stochmdn.device import (
    GroundTruthConfig,
    ModelConfig,
    SweepProtocol,
    fit_iv_model,
    generate_dataset,
    transient_simulate,
    triangle_waveform,
    v_mid_rule_of,
)
from stochmdn.export import ExportBundle, check_equivalence, emit_veriloga, reference_interpret
from stochmdn.network import TrainConfig
from stochmdn.sampling import QuantilePolicy

# %%
# A quick model to drive.  Same recipe as the device demo, one bias level.

iv, _ = generate_dataset(GroundTruthConfig(), SweepProtocol(bias_levels_uA=(16.5, 23.5), repeats=100), seed=5)
net, _ = fit_iv_model(iv, ModelConfig(hidden_sizes=(16, 16), K=3),
                      TrainConfig(epochs=8, batch_size=512, learning_rate=3e-3))
rule = v_mid_rule_of(net)

# %%
# Triangular gate drive at constant bias.  The state is fed back each step:
# once a sample lands above the midpoint voltage the device stays resistive
# until the gate current drops low enough to retrap.

t, i_g, i_b = triangle_waveform(periods=2, points_per_period=80, i_g_max=3.0, i_b=23.5)
for q in (0.05, 0.5, 0.95):
    tr = transient_simulate(net, t, i_g, i_b, QuantilePolicy.fixed(q), rule, seed=0)
    up = np.flatnonzero(np.diff(tr.state) == 1)
    down = np.flatnonzero(np.diff(tr.state) == -1)
    print(f"q={q}: switch at I_G={i_g[up + 1].round(3)}  retrap at I_G={i_g[down + 1].round(3)}")

# %%
# With ``held_per_sweep`` a new quantile is drawn whenever the gate ramp
# changes direction, so each sweep switches at a different current.

tr = transient_simulate(net, t, i_g, i_b, QuantilePolicy("held_per_sweep"), rule, seed=1)
print("quantile redraws at steps", tr.q_events, "->", tr.q[tr.q_events].round(3))

# %%
# Export to Verilog-A and check the emitted functions against the native
# model by interpreting them.

bundle = ExportBundle(net, QuantilePolicy("held_per_sweep"))
text = emit_veriloga(bundle)
print(text.count("\n"), "lines")
print("native", float(tr.v_l[10]), "interpreted", reference_interpret(text, (i_g[10], i_b[10], float(tr.state[9])), tr.q[10]))
print("worst deviation over 20 random points:", check_equivalence(bundle, text, n=20, seed=0))
