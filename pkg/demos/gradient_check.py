"""
Checking backpropagation numerically
====================================

The two-layer networks are trained with hand-written gradients. Central
finite differences give an independent estimate to compare against.
"""

import numpy as np

from dggan.kernel import MlpParams, backward_mlp, forward_mlp, gradient_check

rng = np.random.default_rng(0)
net = MlpParams(
    rng.normal(size=(8, 16)), rng.normal(size=16),
    rng.normal(size=(16, 4)), rng.normal(size=4),
    negative_slope=0.2,
)
x = rng.normal(size=(10, 8))


def loss(p):
    return 0.5 * float(np.sum(forward_mlp(p, x).output_pre ** 2))


cache = forward_mlp(net, x)
grads = backward_mlp(net, cache, cache.output_pre)

###############################################################################
# Every parameter entry is perturbed in turn; the worst relative error
# should sit far below the 1e-5 tolerance.
res = gradient_check(net, loss, grads)
print("passed:", res.passed)
print("worst relative error:", f"{res.worst_relative_error:.2e}", "at", res.worst_location)

###############################################################################
# A deliberately wrong gradient is caught.
bad = grads.tensors()
bad["b2"] = bad["b2"] + 1e-3
print("corrupted gradient passes?", gradient_check(net, loss, bad).passed)
