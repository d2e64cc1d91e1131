"""Central finite-difference comparison shared by the engine tests."""
import numpy as np

from s2pnilm.nn import backprop_gradients


def worst_relative_error(params, batch, h=1e-4, floor=1e-8):
    """Largest |analytic - numeric| / max(|analytic|, |numeric|) over every parameter entry.

    Pairs where both magnitudes are below ``floor`` count as agreeing.
    """
    _, grads = backprop_gradients(params, batch)
    worst = 0.0
    for name, arr in params.arrays.items():
        for idx in np.ndindex(arr.shape):
            old = arr[idx]
            arr[idx] = old + h
            up, _ = backprop_gradients(params, batch)
            arr[idx] = old - h
            down, _ = backprop_gradients(params, batch)
            arr[idx] = old
            numeric = (up - down) / (2 * h)
            analytic = grads[name][idx]
            scale = max(abs(numeric), abs(analytic))
            if scale > floor:
                worst = max(worst, abs(numeric - analytic) / scale)
    return worst
