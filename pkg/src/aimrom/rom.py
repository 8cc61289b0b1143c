"""Reduced-order pipelines: learned vector fields, closures, end-to-end runs.

A pipeline integrates a reduced model (analytic truncation or a learned
field), applies a closure once at the final time to append the unresolved
modes, and scores the assembled state against a ground-truth run from the
same initial condition.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .aim import Closure, euler_galerkin_closure, postprocess, zero_closure
from .dmaps import gh_extend
from .integrate import rk4
from .metrics import MetricsBundle, decompose_errors, mape, mape_series, mse
from .models import VectorField, chafee_field, ks_field
from .nn import TrainConfig, decode, decoder_invert, forward, init_mlp, train
from .pod import pod_lift, pod_project
from .spectral import BasisSpec, SpectralState, reconstruct, uniform_grid

__all__ = [
    "ConfigurationError",
    "MissingArtifactError",
    "DerivativeDataset",
    "LearnedField",
    "PipelineConfig",
    "PipelineResult",
    "build_derivative_dataset",
    "make_closure_dataset",
    "learn_black_box",
    "learn_gray_box",
    "learn_latent_map",
    "run_pipeline",
    "validate_pipeline",
]

MODELS = {"chafee": (2, 3, 0.16), "ks": (3, 8, 33.0)}
ROUTES = ("fourier", "pod", "autoencoder", "dmaps")
DYNAMICS = ("truncated", "black-box", "gray-box")
CLOSURES = ("euler-galerkin", "mlp", "double-dmaps", "decoder-inversion", "none")

_BASIS_KIND = {"chafee": "sine-dirichlet", "ks": "sine-periodic-odd"}


class ConfigurationError(ValueError):
    """Invalid or incompatible pipeline configuration."""


class MissingArtifactError(LookupError):
    """A model referenced by the configuration is not in the store."""


@dataclass(frozen=True)
class DerivativeDataset:
    """Supervised pairs (reduced state, reduced time derivative)."""

    inputs: np.ndarray = field(repr=False)
    derivs: np.ndarray = field(repr=False)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        x = np.asarray(self.inputs, dtype=float)
        y = np.asarray(self.derivs, dtype=float)
        if x.ndim != 2 or y.ndim != 2 or x.shape[0] != y.shape[0]:
            raise ValueError("inputs and derivs must be aligned 2d arrays")
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "derivs", y)

    @property
    def n_samples(self):
        return self.inputs.shape[0]


def build_derivative_dataset(states, full_field, n_lead, lead_inputs=None):
    """Leading-block derivative targets from full snapshots.

    Targets are the first n_lead components of the full analytic
    right-hand side evaluated on each snapshot; inputs default to the
    snapshots' own leading coefficients.  Passing lead_inputs swaps in
    reconstructed coordinates while keeping the analytic targets.
    """
    s = np.asarray(states, dtype=float)
    if s.ndim != 2 or s.shape[1] != full_field.dim:
        raise ValueError("states must be (n, full dim)")
    if not (1 <= n_lead < full_field.dim):
        raise ValueError("n_lead must be below the full dimension")
    derivs = np.asarray(full_field.eval(s), dtype=float)[:, :n_lead]
    inputs = s[:, :n_lead] if lead_inputs is None else np.asarray(lead_inputs, dtype=float)
    if inputs.shape != derivs.shape:
        raise ValueError("lead_inputs must be (n, n_lead)")
    source = "analytic-full-rhs" if lead_inputs is None else "analytic-full-rhs/reconstructed-inputs"
    return DerivativeDataset(inputs=inputs, derivs=derivs, meta={"derivative_source": source, "n_lead": n_lead})


def make_closure_dataset(states, n_low):
    """Split full snapshots into (leading block, tail block) training pairs."""
    s = np.asarray(states, dtype=float)
    if s.ndim != 2 or not (1 <= n_low < s.shape[1]):
        raise ValueError("states must be (n, d) with 1 <= n_low < d")
    return s[:, :n_low], s[:, n_low:]


@dataclass(frozen=True)
class LearnedField:
    """Vector field backed by a network, optionally around an analytic base.

    kind "black-box": da/dt = net(a).  kind "gray-box": da/dt =
    base(a) + net(a), the network learning only the truncation residual.
    """

    kind: str
    dim: int
    net: object
    base: VectorField = None

    def __post_init__(self):
        if self.kind not in ("black-box", "gray-box"):
            raise ValueError(f"unknown learned field kind: {self.kind!r}")
        if self.kind == "gray-box" and self.base is None:
            raise ValueError("gray-box fields need an analytic base")
        if self.net.d_in != self.dim or self.net.d_out != self.dim:
            raise ValueError("network must map dim -> dim")

    def eval(self, a):
        out = forward(self.net, a)
        if self.base is not None:
            out = out + self.base.eval(a)
        return out


def _default_cfg(cfg):
    return cfg if cfg is not None else TrainConfig(epochs=200, batch_size=64)


def learn_black_box(dataset, hidden=(64, 64, 64, 64), train_cfg=None, seed=0):
    """Fit da/dt = net(a) to the dataset; returns (field, history)."""
    d = dataset.inputs.shape[1]
    net = init_mlp((d,) + tuple(hidden) + (d,), seed=seed)
    trained, hist = train(net, dataset.inputs, dataset.derivs, _default_cfg(train_cfg))
    return LearnedField(kind="black-box", dim=d, net=trained), hist


def learn_gray_box(dataset, base, hidden=(95,) * 6, train_cfg=None, seed=0):
    """Fit the residual da/dt - base(a) = net(a); returns (field, history)."""
    d = dataset.inputs.shape[1]
    if base.dim != d:
        raise ValueError("base field dimension must match the dataset")
    resid = dataset.derivs - np.asarray(base.eval(dataset.inputs), dtype=float)
    net = init_mlp((d,) + tuple(hidden) + (d,), seed=seed)
    trained, hist = train(net, dataset.inputs, resid, _default_cfg(train_cfg))
    return LearnedField(kind="gray-box", dim=d, net=trained, base=base), hist


def learn_latent_map(lead_coords, latents, hidden=(80,) * 5, train_cfg=None, seed=0):
    """Fit the map from leading coefficients to latent coordinates."""
    x = np.asarray(lead_coords, dtype=float)
    y = np.asarray(latents, dtype=float)
    net = init_mlp((x.shape[1],) + tuple(hidden) + (y.shape[1],), seed=seed)
    return train(net, x, y, _default_cfg(train_cfg))


@dataclass(frozen=True)
class PipelineConfig:
    """End-to-end run description.

    ic is the full-model initial coefficient vector (a reduced-width ic is
    zero-padded).  For the pod route the reduced run lives in POD
    coefficient space; everywhere else it lives in the leading sine modes.
    """

    model: str
    latent_route: str
    dynamics: str
    closure: str
    ic: tuple
    final_time: float
    dt: float
    seed: int = 0
    nu: float = None
    grid_points: int = 65
    pod_rank_low: int = 2
    pod_rank_full: int = 3

    def __post_init__(self):
        if self.model not in MODELS:
            raise ConfigurationError(f"unknown model: {self.model!r}")
        if self.latent_route not in ROUTES:
            raise ConfigurationError(f"unknown latent route: {self.latent_route!r}")
        if self.dynamics not in DYNAMICS:
            raise ConfigurationError(f"unknown dynamics: {self.dynamics!r}")
        if self.closure not in CLOSURES:
            raise ConfigurationError(f"unknown closure: {self.closure!r}")
        n_low, n_full, nu_default = MODELS[self.model]
        ic = tuple(float(v) for v in np.atleast_1d(np.asarray(self.ic, dtype=float)))
        if len(ic) == n_low:
            ic = ic + (0.0,) * (n_full - n_low)
        if len(ic) != n_full:
            raise ConfigurationError(
                f"ic must have {n_low} or {n_full} components for model {self.model}"
            )
        object.__setattr__(self, "ic", ic)
        if self.nu is None:
            object.__setattr__(self, "nu", nu_default)
        if self.final_time <= 0 or self.dt <= 0:
            raise ConfigurationError("final_time and dt must be positive")
        if self.grid_points < 2 * (2 * n_full) + 1:
            raise ConfigurationError("grid_points too small for exact projection")

    @property
    def n_low(self):
        return MODELS[self.model][0]

    @property
    def n_full(self):
        return MODELS[self.model][1]

    def with_ic(self, ic, final_time=None):
        t = self.final_time if final_time is None else float(final_time)
        return replace(self, ic=tuple(np.asarray(ic, dtype=float)), final_time=t)

    def label(self):
        return f"{self.model}/{self.latent_route}/{self.dynamics}/{self.closure}"


@dataclass(frozen=True)
class PipelineResult:
    config: PipelineConfig
    truth: object
    reduced: object
    corrected_coeffs: np.ndarray = field(repr=False)
    raw_metrics: MetricsBundle = None
    corrected_metrics: MetricsBundle = None
    decomposition: object = None


_ARTIFACT_NEEDS = {
    ("dynamics", "black-box"): ("dynamics-net",),
    ("dynamics", "gray-box"): ("dynamics-net",),
    ("closure", "mlp"): ("closure-net",),
    ("closure", "double-dmaps"): ("latent-map", "lift"),
    ("closure", "decoder-inversion"): ("autoencoder",),
}


def validate_pipeline(cfg, artifacts):
    """Reject incompatible configurations before any computation runs."""
    if cfg.closure == "euler-galerkin":
        if cfg.model != "chafee" or cfg.latent_route != "fourier":
            raise ConfigurationError(
                "euler-galerkin closure requires the chafee model on the fourier route"
            )
    if cfg.closure == "double-dmaps" and cfg.latent_route != "dmaps":
        raise ConfigurationError("double-dmaps closure requires the dmaps route")
    if cfg.closure == "decoder-inversion" and cfg.latent_route != "autoencoder":
        raise ConfigurationError("decoder-inversion closure requires the autoencoder route")
    if cfg.closure == "mlp" and cfg.latent_route not in ("fourier", "pod"):
        raise ConfigurationError("mlp closure runs on the fourier or pod routes")
    if cfg.dynamics == "gray-box" and cfg.latent_route == "pod":
        raise ConfigurationError("gray-box dynamics have no analytic base in POD coordinates")
    if cfg.dynamics == "truncated" and cfg.latent_route == "pod":
        raise ConfigurationError("pod route requires learned dynamics")
    if cfg.latent_route == "pod" and cfg.closure not in ("mlp", "none"):
        raise ConfigurationError("pod route supports the mlp closure or none")
    if cfg.latent_route == "pod" and "pod" not in artifacts:
        raise MissingArtifactError("pipeline needs artifact 'pod'")

    for (slot, value), names in _ARTIFACT_NEEDS.items():
        chosen = cfg.dynamics if slot == "dynamics" else cfg.closure
        if chosen == value:
            for name in names:
                if name not in artifacts:
                    raise MissingArtifactError(f"pipeline needs artifact {name!r}")


def _full_field(cfg):
    if cfg.model == "chafee":
        return chafee_field(3, cfg.nu)
    return ks_field(8, cfg.nu)


def _truncated_field(cfg):
    if cfg.model == "chafee":
        return chafee_field(2, cfg.nu)
    return ks_field(3, cfg.nu)


def _reduced_field(cfg, artifacts, dim):
    if cfg.dynamics == "truncated":
        return _truncated_field(cfg)
    net = artifacts["dynamics-net"]
    if not isinstance(net, LearnedField):
        raise ConfigurationError("artifact 'dynamics-net' must be a LearnedField")
    if net.dim != dim:
        raise ConfigurationError(
            f"dynamics-net dimension {net.dim} does not match the reduced space ({dim})"
        )
    if net.kind != cfg.dynamics:
        raise ConfigurationError(
            f"dynamics-net kind {net.kind!r} does not match requested {cfg.dynamics!r}"
        )
    return net


def _build_closure(cfg, artifacts, n_low, n_high):
    if cfg.closure == "none":
        return zero_closure(n_low, n_high)
    if cfg.closure == "euler-galerkin":
        return euler_galerkin_closure(cfg.nu)
    if cfg.closure == "mlp":
        net = artifacts["closure-net"]
        if net.d_in != n_low or net.d_out != n_high:
            raise ConfigurationError("closure-net must map the lead block to the tail block")
        return Closure(n_low=n_low, n_high=n_high, map=lambda p: forward(net, p))
    if cfg.closure == "double-dmaps":
        latent_map = artifacts["latent-map"]
        lift = artifacts["lift"]
        if latent_map.d_in != n_low:
            raise ConfigurationError("latent-map input width must match the lead block")
        if lift.d_out != n_low + n_high:
            raise ConfigurationError("lift output width must match the full coefficient vector")

        def dd_map(p):
            latent = forward(latent_map, p)
            full = gh_extend(lift, latent)
            return full[..., n_low:]

        return Closure(n_low=n_low, n_high=n_high, map=dd_map)
    # decoder inversion
    ae = artifacts["autoencoder"]
    if ae.decoder.d_out != n_low + n_high:
        raise ConfigurationError("autoencoder ambient width must match the full state")
    candidates = artifacts.get("invert-candidates")

    def inv_map(p):
        if candidates is None:
            padded = np.concatenate([p, np.zeros(n_high)])
            starts = forward(ae.encoder, padded)[None, :]
        else:
            starts = np.asarray(candidates, dtype=float)
        latent = decoder_invert(ae.decoder, p, starts)
        return decode(ae, latent)[n_low:]

    return Closure(n_low=n_low, n_high=n_high, map=inv_map)


def _field_metrics(u_pred_rows, u_truth_rows, times, u_pred_final, u_truth_final):
    return MetricsBundle(
        mape_final=mape(u_pred_final, u_truth_final),
        mse_final=mse(u_pred_final, u_truth_final),
        percent_error_series=mape_series(u_pred_rows, u_truth_rows),
        times=times,
    )


def run_pipeline(cfg, artifacts):
    """Integrate, close, and score one pipeline; returns a PipelineResult."""
    validate_pipeline(cfg, artifacts)
    full_field = _full_field(cfg)
    ic_full = np.asarray(cfg.ic, dtype=float)
    truth = rk4(full_field, ic_full, cfg.final_time, cfg.dt)

    basis_full = BasisSpec(_BASIS_KIND[cfg.model], cfg.n_full)
    grid = uniform_grid(basis_full, cfg.grid_points)
    sines = np.sin(np.outer(grid.points, basis_full.wavenumbers()))
    u_truth = truth.states @ sines.T

    if cfg.latent_route == "pod":
        return _run_pod_pipeline(cfg, artifacts, truth, u_truth, grid)

    n_low, n_high = cfg.n_low, cfg.n_full - cfg.n_low
    reduced_field = _reduced_field(cfg, artifacts, n_low)
    reduced = rk4(reduced_field, ic_full[:n_low], cfg.final_time, cfg.dt)
    closure = _build_closure(cfg, artifacts, n_low, n_high)

    low_final = SpectralState(BasisSpec(_BASIS_KIND[cfg.model], n_low), reduced.final_state)
    corrected = postprocess(low_final, closure)

    u_raw = reduced.states @ sines[:, :n_low].T
    u_raw_final = u_raw[-1]
    u_corr_final = reconstruct(corrected, grid)
    u_truth_final = u_truth[-1]

    raw_metrics = _field_metrics(u_raw, u_truth, reduced.times, u_raw_final, u_truth_final)
    corr_metrics = MetricsBundle(
        mape_final=mape(u_corr_final, u_truth_final),
        mse_final=mse(u_corr_final, u_truth_final),
        percent_error_series=raw_metrics.percent_error_series,
        times=reduced.times,
    )
    decomp = decompose_errors(truth.final_state, reduced.final_state, closure, grid)
    return PipelineResult(
        config=cfg,
        truth=truth,
        reduced=reduced,
        corrected_coeffs=corrected.coeffs,
        raw_metrics=raw_metrics,
        corrected_metrics=corr_metrics,
        decomposition=decomp,
    )


def _run_pod_pipeline(cfg, artifacts, truth, u_truth, grid):
    """Reduced dynamics in POD coefficient space, lifted back to the grid."""
    pod = artifacts["pod"]
    if pod.ambient_dim != grid.n_points:
        raise ConfigurationError("pod artifact was fitted on a different grid")
    if pod.rank < cfg.pod_rank_full:
        raise ConfigurationError("pod artifact rank is below pod_rank_full")
    n_low, n_high = cfg.pod_rank_low, cfg.pod_rank_full - cfg.pod_rank_low

    c0 = pod_project(pod, u_truth[0], cfg.pod_rank_low)
    reduced_field = _reduced_field(cfg, artifacts, n_low)
    reduced = rk4(reduced_field, c0, cfg.final_time, cfg.dt)
    closure = _build_closure(cfg, artifacts, n_low, n_high)

    tail = closure(reduced.final_state)
    corrected_coeffs = np.concatenate([reduced.final_state, tail])

    u_raw = pod_lift(pod, reduced.states, n_low)
    u_corr_final = pod_lift(pod, corrected_coeffs, cfg.pod_rank_full)
    u_truth_final = u_truth[-1]

    raw_metrics = _field_metrics(u_raw, u_truth, reduced.times, u_raw[-1], u_truth_final)
    corr_metrics = MetricsBundle(
        mape_final=mape(u_corr_final, u_truth_final),
        mse_final=mse(u_corr_final, u_truth_final),
        percent_error_series=raw_metrics.percent_error_series,
        times=reduced.times,
    )
    return PipelineResult(
        config=cfg,
        truth=truth,
        reduced=reduced,
        corrected_coeffs=corrected_coeffs,
        raw_metrics=raw_metrics,
        corrected_metrics=corr_metrics,
        decomposition=None,
    )
