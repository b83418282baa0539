"""
Sliding-window sequence estimation
==================================

The recurrent receiver decodes windows of W consecutive blocks.  Every
block is covered by up to W windows and the probability estimates are
averaged before deciding.  The model here is trained through the same
estimator (window 10) on 20-block sequences at 50 km.

This takes a few minutes on one core.
"""

from fiberae import ChannelConfig, TrainConfig, build_model, evaluate_ber, train

channel = ChannelConfig(distance=50.0)
model = build_model("brnn", M=16, n=12, seed=1, zero_output=True)
cfg = TrainConfig(seed=1, iterations=2000, seq_len=20, window=10, eval_interval=500, channel=channel)
for it, loss, bler in train(model, cfg).records:
    print(f"iteration {it:5d}  loss {loss:.4f}  held-out block errors {bler:.4f}")

# %%
# Shorter windows give each decision less context.
print(" W   BER")
for W in (1, 2, 4, 6, 8, 10):
    r = evaluate_ber(model, channel, window=W, max_blocks=20_000, seq_blocks=20)
    print(f"{W:2d}   {r.ber:.3e}")
