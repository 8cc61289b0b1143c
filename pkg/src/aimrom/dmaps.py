"""Diffusion maps and geometric harmonics on plain numpy.

Diffusion maps use the Gaussian kernel exp(-||xi - xj||^2 / (2 eps)) with
density normalization exponent 1 (kernel divided by the product of row
densities) followed by row normalization to a Markov matrix.  Eigenpairs
come from the symmetric conjugate D^(-1/2) K D^(-1/2), so eigenvalues are
real and the trivial pair is lambda_0 = 1 with a constant eigenvector.

New points enter by Nystrom restriction; functions defined on the latent
coordinates extend back to ambient space by geometric harmonics (the
double-diffusion-maps lift) using a second, symmetric kernel on the
latent training coordinates.
"""

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DiffusionMap",
    "GeometricHarmonics",
    "median_epsilon",
    "dmaps_fit",
    "select_independent",
    "nystrom_restrict",
    "gh_fit",
    "gh_extend",
    "double_dmaps_lift",
]


def _sq_dists(a, b):
    # ||a_i - b_j||^2 without forming the difference tensor
    aa = np.sum(a * a, axis=1)[:, None]
    bb = np.sum(b * b, axis=1)[None, :]
    d = aa + bb - 2.0 * (a @ b.T)
    np.maximum(d, 0.0, out=d)
    return d


def median_epsilon(points):
    """Median squared pairwise distance, the default kernel scale."""
    x = np.asarray(points, dtype=float)
    d = _sq_dists(x, x)
    iu = np.triu_indices(x.shape[0], k=1)
    return float(np.median(d[iu]))


@dataclass(frozen=True)
class DiffusionMap:
    """Fitted diffusion map: eigenpairs plus what Nystrom restriction needs.

    eigenvectors columns are the phi_i, sorted by descending eigenvalue,
    sign-fixed so the first entry of visible magnitude is positive.
    kept_indices is filled by select_independent (column indices into
    eigenvectors, never 0).
    """

    epsilon: float
    alpha_density: float
    train_points: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray = field(repr=False)
    eigenvectors: np.ndarray = field(repr=False)
    point_density: np.ndarray = field(repr=False)
    kept_indices: tuple = ()

    @property
    def n_train(self):
        return self.train_points.shape[0]

    @property
    def n_pairs(self):
        return self.eigenvalues.shape[0]

    def coordinates(self, indices=None):
        """Latent coordinate block: kept columns by default."""
        if indices is None:
            indices = self.kept_indices
        if len(indices) == 0:
            raise ValueError("no coordinate indices selected")
        return self.eigenvectors[:, list(indices)]


def _fix_signs(vecs):
    out = vecs.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        big = np.abs(col) > 1e-12 * np.max(np.abs(col))
        first = np.argmax(big)
        if col[first] < 0:
            out[:, j] = -col
    return out


def dmaps_fit(points, epsilon=None, n_eigs=10):
    """Fit a diffusion map; epsilon defaults to the median squared distance.

    Returns n_eigs + 1 eigenpairs including the trivial one.
    """
    x = np.asarray(points, dtype=float)
    if x.ndim != 2 or x.shape[0] < 3:
        raise ValueError("points must be (n, d) with n >= 3")
    if n_eigs < 1 or n_eigs >= x.shape[0] - 1:
        raise ValueError("n_eigs must be in [1, n_points - 2]")
    if epsilon is None:
        epsilon = median_epsilon(x)
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")

    a = np.exp(-_sq_dists(x, x) / (2.0 * epsilon))
    p = a.sum(axis=1)
    if np.any(p - 1.0 < 1e-14):
        raise ValueError(
            "kernel is disconnected: some point sees no neighbors; increase epsilon"
        )
    k = a / np.outer(p, p)
    d = k.sum(axis=1)
    sym = k / np.sqrt(np.outer(d, d))
    eigvals, eigvecs = np.linalg.eigh(sym)
    order = np.argsort(eigvals)[::-1][: n_eigs + 1]
    lam = eigvals[order]
    phi = eigvecs[:, order] / np.sqrt(d)[:, None]
    phi = _fix_signs(phi)
    return DiffusionMap(
        epsilon=float(epsilon),
        alpha_density=1.0,
        train_points=x.copy(),
        eigenvalues=lam,
        eigenvectors=phi,
        point_density=p,
    )


def nystrom_restrict(dm, x_new):
    """Latent coordinates of new ambient points, one row per point.

    Applies the same density and row normalizations to the new kernel row,
    then averages the training eigenvectors: phi_i(x) = lambda_i^-1 *
    sum_j ktilde(x, x_j) phi_i(x_j).  Columns whose eigenvalue is below
    1e-12 in magnitude cannot be divided out and return NaN.
    """
    x = np.asarray(x_new, dtype=float)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.shape[1] != dm.train_points.shape[1]:
        raise ValueError("ambient dimension does not match the training data")
    a = np.exp(-_sq_dists(x, dm.train_points) / (2.0 * dm.epsilon))
    p_new = a.sum(axis=1)
    if np.any(p_new < 1e-300):
        raise ValueError("a query point sees no training neighbors at this epsilon")
    k = a / np.outer(p_new, dm.point_density)
    ktilde = k / k.sum(axis=1)[:, None]
    coords = ktilde @ dm.eigenvectors
    lam = dm.eigenvalues
    reliable = np.abs(lam) > 1e-12
    with np.errstate(divide="ignore", invalid="ignore"):
        coords = np.where(reliable, coords / lam, np.nan)
    return coords[0] if single else coords


def _loo_linear_residual(basis, target, bandwidth_factor):
    """Normalized leave-one-out error of local linear prediction.

    Predicts target at each training point from a kernel-weighted linear
    fit on basis (the earlier coordinates), excluding the point itself.
    """
    n = basis.shape[0]
    d2 = _sq_dists(basis, basis)
    iu = np.triu_indices(n, k=1)
    # bandwidth: median pairwise distance shrunk by the factor, so the
    # regression stays local on the scale of the coordinate cloud
    scale = np.median(np.sqrt(d2[iu])) / bandwidth_factor
    w = np.exp(-d2 / (scale * scale))
    np.fill_diagonal(w, 0.0)

    preds = np.empty(n)
    ones = np.ones((n, 1))
    for i in range(n):
        xc = np.hstack([ones, basis - basis[i]])
        wx = w[i][:, None] * xc
        coef, *_ = np.linalg.lstsq(xc.T @ wx, wx.T @ target, rcond=None)
        preds[i] = coef[0]
    return float(np.sqrt(np.sum((target - preds) ** 2) / np.sum(target**2)))


def select_independent(dm, regression_bandwidth_factor=3.0, residual_threshold=0.2):
    """Greedy pruning of repeated eigendirections.

    The first nontrivial coordinate is always kept (its residual is defined
    as 1).  Each later phi_k is kept only if a local linear model on the
    previously retained... on all earlier nontrivial coordinates fails to
    predict it: normalized leave-one-out residual above the threshold.
    Returns the kept column indices and stores them on a new model.
    """
    if dm.n_pairs < 2:
        raise ValueError("need at least one nontrivial eigenpair")
    residuals = [1.0]
    kept = [1]
    for k in range(2, dm.n_pairs):
        basis = dm.eigenvectors[:, 1:k]
        target = dm.eigenvectors[:, k]
        r = _loo_linear_residual(basis, target, regression_bandwidth_factor)
        residuals.append(r)
        if r > residual_threshold:
            kept.append(k)
    new_dm = DiffusionMap(
        epsilon=dm.epsilon,
        alpha_density=dm.alpha_density,
        train_points=dm.train_points,
        eigenvalues=dm.eigenvalues,
        eigenvectors=dm.eigenvectors,
        point_density=dm.point_density,
        kept_indices=tuple(kept),
    )
    return new_dm, np.array(residuals)


@dataclass(frozen=True)
class GeometricHarmonics:
    """Out-of-sample extension of functions defined on latent coordinates.

    Fitted from a symmetric Gaussian kernel on the latent inputs; only
    eigenpairs with sigma_i > delta * sigma_0 enter the extension.
    """

    epsilon_star: float
    delta: float
    inputs: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray = field(repr=False)
    eigenvectors: np.ndarray = field(repr=False)
    coefficients: np.ndarray = field(repr=False)
    in_sample_mse: float = np.nan

    @property
    def n_kept(self):
        return self.eigenvalues.shape[0]

    @property
    def d_out(self):
        return self.coefficients.shape[1]


def gh_fit(inputs, f_values, epsilon_star=None, delta=1e-6):
    """Project f onto the leading kernel eigenspace over the input cloud."""
    x = np.asarray(inputs, dtype=float)
    f = np.asarray(f_values, dtype=float)
    if f.ndim == 1:
        f = f[:, None]
    if x.ndim != 2 or f.shape[0] != x.shape[0]:
        raise ValueError("inputs (n, d) and f_values (n, k) must align")
    if epsilon_star is None:
        epsilon_star = median_epsilon(x)
    if epsilon_star <= 0 or delta <= 0:
        raise ValueError("epsilon_star and delta must be positive")

    a = np.exp(-_sq_dists(x, x) / (2.0 * epsilon_star))
    sigma, psi = np.linalg.eigh(a)
    order = np.argsort(sigma)[::-1]
    sigma = sigma[order]
    psi = psi[:, order]
    keep = sigma > delta * sigma[0]
    if not np.any(keep):
        raise ValueError("no eigenpairs above the delta cut; decrease delta")
    sigma = sigma[keep]
    # contiguous copy so a reloaded model reproduces extensions bit for bit
    psi = np.ascontiguousarray(psi[:, keep])
    coeffs = psi.T @ f
    in_sample = psi @ coeffs
    mse = float(np.mean((in_sample - f) ** 2))
    return GeometricHarmonics(
        epsilon_star=float(epsilon_star),
        delta=float(delta),
        inputs=x.copy(),
        eigenvalues=sigma,
        eigenvectors=psi,
        coefficients=coeffs,
        in_sample_mse=mse,
    )


def gh_extend(gh, x_new):
    """Evaluate the extension at new latent points: rows of predictions."""
    x = np.asarray(x_new, dtype=float)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.shape[1] != gh.inputs.shape[1]:
        raise ValueError("latent dimension does not match the fitted inputs")
    a = np.exp(-_sq_dists(x, gh.inputs) / (2.0 * gh.epsilon_star))
    out = (a @ (gh.eigenvectors / gh.eigenvalues)) @ gh.coefficients
    return out[0] if single else out


def double_dmaps_lift(dm, ambient_values, epsilon_star=None, delta=1e-6):
    """Geometric harmonics from the kept diffusion coordinates to ambient data.

    This is the lifting half of the double-diffusion-maps construction:
    fit on (kept phi columns -> ambient values), extend with gh_extend.
    """
    if len(dm.kept_indices) == 0:
        raise ValueError("run select_independent before lifting")
    return gh_fit(
        dm.coordinates(),
        ambient_values,
        epsilon_star=epsilon_star,
        delta=delta,
    )
