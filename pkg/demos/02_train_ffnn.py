"""
Training a block-wise autoencoder
=================================

Encoder and decoder are small feedforward networks trained jointly
through the differentiable link.  Each block is encoded and decoded on
its own, so the decoder cannot look at the neighbours that leak into it.
"""

import math

from fiberae import ChannelConfig, TrainConfig, build_model, evaluate_ber, train

channel = ChannelConfig(distance=20.0)
model = build_model("ffnn", M=16, n=12, seed=1, zero_output=True)

# the zeroed output layer makes the first loss exactly ln M
cfg = TrainConfig(seed=1, iterations=1500, eval_interval=250, channel=channel)
report = train(model, cfg)
print(f"initial loss {report.initial_loss:.4f} (ln 16 = {math.log(16):.4f})")
for it, loss, bler in report.records:
    print(f"iteration {it:5d}  loss {loss:.4f}  held-out block errors {bler:.4f}")

res = evaluate_ber(model, channel, max_blocks=20_000, seq_blocks=10)
print(f"BER {res.ber:.3e}  95% CI [{res.ci95[0]:.2e}, {res.ci95[1]:.2e}]")

# %%
# The same model at other distances: it was only ever trained at 20 km.
for L in (10, 30, 40):
    r = evaluate_ber(model, channel.replace(distance=L), max_blocks=20_000, seq_blocks=10)
    print(f"{L} km: BER {r.ber:.3e}")
