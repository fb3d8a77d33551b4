"""Second-order finite differences on uniform tensor grids.

Central stencils inside, 3-point one-sided stencils on the boundary rows.
Axis 0 is the marching/streamwise direction, axis 1 the transverse one.
"""

import numpy as np

__all__ = ["d1", "d2"]


def d1(f, h):
    """d/d(axis 0)."""
    out = np.empty_like(f)
    out[1:-1, :] = (f[2:, :] - f[:-2, :]) / (2 * h)
    out[0, :] = (-3 * f[0, :] + 4 * f[1, :] - f[2, :]) / (2 * h)
    out[-1, :] = (3 * f[-1, :] - 4 * f[-2, :] + f[-3, :]) / (2 * h)
    return out


def d2(f, h):
    """d/d(axis 1); also differentiates 1-D arrays."""
    f = np.asarray(f)
    if f.ndim == 1:
        out = np.empty_like(f)
        out[1:-1] = (f[2:] - f[:-2]) / (2 * h)
        out[0] = (-3 * f[0] + 4 * f[1] - f[2]) / (2 * h)
        out[-1] = (3 * f[-1] - 4 * f[-2] + f[-3]) / (2 * h)
        return out
    out = np.empty_like(f)
    out[:, 1:-1] = (f[:, 2:] - f[:, :-2]) / (2 * h)
    out[:, 0] = (-3 * f[:, 0] + 4 * f[:, 1] - f[:, 2]) / (2 * h)
    out[:, -1] = (3 * f[:, -1] - 4 * f[:, -2] + f[:, -3]) / (2 * h)
    return out
