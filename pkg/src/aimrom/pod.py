"""Proper orthogonal decomposition of snapshot ensembles."""

from dataclasses import dataclass, field

import numpy as np

__all__ = ["PodModel", "QuadraticFit", "pod_fit", "pod_project", "pod_lift", "quadratic_fit"]


@dataclass(frozen=True)
class PodModel:
    """Orthonormal modes (columns) with singular values and energy content.

    energy_fractions[k] is the cumulative variance captured by the first
    k + 1 modes; the last entry is 1 by construction.
    """

    mean: np.ndarray = field(repr=False)
    modes: np.ndarray = field(repr=False)
    singular_values: np.ndarray = field(repr=False)
    energy_fractions: np.ndarray = field(repr=False)
    centered: bool = True

    @property
    def ambient_dim(self):
        return self.modes.shape[0]

    @property
    def rank(self):
        return self.modes.shape[1]


def pod_fit(snapshots, center=True):
    """SVD of the (optionally centered) snapshot matrix, rows = snapshots.

    Mode signs are fixed so each mode's largest-magnitude entry is positive.
    """
    x = np.asarray(snapshots, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("snapshots must be (n, d) with n >= 2")
    mean = x.mean(axis=0) if center else np.zeros(x.shape[1])
    xc = x - mean
    u, s, vt = np.linalg.svd(xc, full_matrices=False)
    scale = np.max(np.abs(x)) if np.max(np.abs(x)) > 0 else 1.0
    if s[0] < 1e-13 * scale:
        raise ValueError("snapshot matrix has rank 0 after centering")
    modes = vt.T
    for j in range(modes.shape[1]):
        i = np.argmax(np.abs(modes[:, j]))
        if modes[i, j] < 0:
            modes[:, j] = -modes[:, j]
    energy = np.cumsum(s**2) / np.sum(s**2)
    return PodModel(
        mean=mean,
        modes=modes,
        singular_values=s,
        energy_fractions=energy,
        centered=bool(center),
    )


def pod_project(model, x, k=None):
    """Coefficients of x in the first k modes; accepts (d,) or (n, d)."""
    k = model.rank if k is None else int(k)
    if not (1 <= k <= model.rank):
        raise ValueError(f"k must be in [1, {model.rank}]")
    x = np.asarray(x, dtype=float)
    return (x - model.mean) @ model.modes[:, :k]


def pod_lift(model, coeffs, k=None):
    """Reconstruct ambient vectors from leading-mode coefficients."""
    c = np.asarray(coeffs, dtype=float)
    width = c.shape[-1]
    k = width if k is None else int(k)
    if k != width or not (1 <= k <= model.rank):
        raise ValueError("coefficient width must equal k and fit the model rank")
    return c @ model.modes[:, :k].T + model.mean


@dataclass(frozen=True)
class QuadraticFit:
    """Least-squares parabola c2 ~ a*c1^2 + b*c1 + c with its R^2."""

    coeffs: np.ndarray
    r_squared: float

    def __call__(self, c1):
        c1 = np.asarray(c1, dtype=float)
        a, b, c = self.coeffs
        return a * c1**2 + b * c1 + c


def quadratic_fit(c1, c2):
    """Fit the second coefficient as a quadratic function of the first."""
    c1 = np.asarray(c1, dtype=float)
    c2 = np.asarray(c2, dtype=float)
    if c1.shape != c2.shape or c1.ndim != 1 or c1.size < 3:
        raise ValueError("c1 and c2 must be equal-length vectors of size >= 3")
    design = np.stack([c1**2, c1, np.ones_like(c1)], axis=1)
    if np.linalg.matrix_rank(design) < 3:
        raise ValueError("degenerate abscissa: quadratic fit is not identifiable")
    coeffs, *_ = np.linalg.lstsq(design, c2, rcond=None)
    resid = c2 - design @ coeffs
    total = c2 - c2.mean()
    ss_tot = float(total @ total)
    if ss_tot == 0.0:
        r2 = 1.0 if float(resid @ resid) < 1e-28 else 0.0
    else:
        r2 = 1.0 - float(resid @ resid) / ss_tot
    return QuadraticFit(coeffs=coeffs, r_squared=r2)
