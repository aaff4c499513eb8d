"""NumPy reference implementations of the hot training kernels.

The compiled extension (``samrl._kernels._core``) mirrors these functions
exactly; this module is the fallback selected when the extension is not
built. Layer convention: tanh on hidden layers, identity on the output.
"""

import numpy as np

NAME = "python"


def mlp_forward(weights, biases, x):
    """Evaluate the network on a single input vector."""
    h = x
    last = len(weights) - 1
    for k in range(len(weights)):
        h = weights[k] @ h + biases[k]
        if k < last:
            np.tanh(h, out=h)
    return h


def mlp_forward_cached(weights, biases, x):
    """Forward pass keeping post-activation values for the backward pass.

    Returns (output, acts) where acts[0] is the input and acts[k+1] the
    output of layer k after its activation.
    """
    acts = [x]
    h = x
    last = len(weights) - 1
    for k in range(len(weights)):
        h = weights[k] @ h + biases[k]
        if k < last:
            np.tanh(h, out=h)
        acts.append(h)
    return h, acts


def mlp_backward(weights, biases, acts, upstream):
    """Exact reverse-mode gradient of upstream . output.

    Returns (weight_grads, bias_grads, input_grad).
    """
    n = len(weights)
    gws = [None] * n
    gbs = [None] * n
    d = np.array(upstream, dtype=np.float64)
    for k in range(n - 1, -1, -1):
        if k < n - 1:
            # tanh'(z) = 1 - tanh(z)^2, and acts[k+1] is tanh(z)
            d = d * (1.0 - acts[k + 1] ** 2)
        gws[k] = np.outer(d, acts[k])
        gbs[k] = d
        d = weights[k].T @ d
    return gws, gbs, d


def scaled_add(arrays, grads, scale):
    """In-place arrays[i] += scale * grads[i]."""
    for a, g in zip(arrays, grads):
        a += scale * g


def scale_inplace(arrays, factor):
    for a in arrays:
        a *= factor


def sq_norm(arrays):
    """Sum of squared entries over a list of arrays."""
    total = 0.0
    for a in arrays:
        flat = a.ravel()
        total += float(np.dot(flat, flat))
    return total
