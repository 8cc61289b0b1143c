"""Fully connected networks, written on plain numpy.

Architecture: affine layers with tanh on every layer except the last,
which stays linear.  Training is mini-batch Adam on the summed squared
error.  Per-feature standardization constants (zero mean, unit variance
on the training split) are stored on the model and applied inside
``forward``; gradients and Jacobians are therefore always expressed in
raw data units.
"""

from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "Mlp",
    "TrainConfig",
    "TrainHistory",
    "TrainingDivergedError",
    "Autoencoder",
    "IftSummary",
    "init_mlp",
    "forward",
    "gradient",
    "jacobian",
    "train",
    "lead_submodel",
    "ift_check",
    "decoder_invert",
    "init_autoencoder",
    "train_autoencoder",
    "encode",
    "decode",
]


class TrainingDivergedError(RuntimeError):
    """Raised when the training loss stops being finite."""

    def __init__(self, epoch):
        self.epoch = epoch
        super().__init__(f"training loss became non-finite at epoch {epoch}")


@dataclass(frozen=True)
class Mlp:
    """Weights, biases, and standardization constants of one network.

    weights[i] has shape (fan_out, fan_in); the input is standardized by
    (x - x_shift) / x_scale and the raw output is y_shift + y_scale * core(x).
    Instances are treated as immutable; training returns a new model.
    """

    layer_sizes: tuple
    weights: tuple = field(repr=False)
    biases: tuple = field(repr=False)
    x_shift: np.ndarray = field(repr=False)
    x_scale: np.ndarray = field(repr=False)
    y_shift: np.ndarray = field(repr=False)
    y_scale: np.ndarray = field(repr=False)

    @property
    def d_in(self):
        return self.layer_sizes[0]

    @property
    def d_out(self):
        return self.layer_sizes[-1]


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps_hat: float = 1e-8
    epochs: int = 100
    batch_size: int = 32
    seed: int = 0
    validation_fraction: float = 0.1

    def __post_init__(self):
        if not (0.0 <= self.validation_fraction < 1.0):
            raise ValueError("validation_fraction must lie in [0, 1)")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")


@dataclass(frozen=True)
class TrainHistory:
    """Per-epoch mean squared error in raw data units."""

    train_mse: np.ndarray
    val_mse: np.ndarray


def init_mlp(layer_sizes, seed=0):
    """Glorot-uniform weights, zero biases, identity standardization."""
    sizes = tuple(int(s) for s in layer_sizes)
    if len(sizes) < 2 or any(s < 1 for s in sizes):
        raise ValueError("layer_sizes needs at least input and output width")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return Mlp(
        layer_sizes=sizes,
        weights=tuple(weights),
        biases=tuple(biases),
        x_shift=np.zeros(sizes[0]),
        x_scale=np.ones(sizes[0]),
        y_shift=np.zeros(sizes[-1]),
        y_scale=np.ones(sizes[-1]),
    )


def _core_forward(weights, biases, x):
    """Return the list of activations; x is (n, d_in), no standardization."""
    acts = [x]
    h = x
    last = len(weights) - 1
    for i, (w, b) in enumerate(zip(weights, biases)):
        z = h @ w.T + b
        h = z if i == last else np.tanh(z)
        acts.append(h)
    return acts


def _core_backprop(weights, acts, delta):
    """Parameter gradients and input gradient for an output-side delta.

    delta is dL/d(core output), shape (n, d_out).  Hidden activations are
    the stored tanh outputs, so tanh' = 1 - a^2 needs no extra state.
    """
    grads_w = [None] * len(weights)
    grads_b = [None] * len(weights)
    for i in range(len(weights) - 1, -1, -1):
        grads_w[i] = delta.T @ acts[i]
        grads_b[i] = delta.sum(axis=0)
        delta = delta @ weights[i]
        if i > 0:
            delta = delta * (1.0 - acts[i] ** 2)
    return grads_w, grads_b, delta


def _as_batch(x, d):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        if x.shape[0] != d:
            raise ValueError(f"input width {x.shape[0]} does not match model ({d})")
        return x[None, :], True
    if x.ndim != 2 or x.shape[1] != d:
        raise ValueError(f"input must be (n, {d})")
    return x, False


def forward(mlp, x):
    """Evaluate the network in raw units; accepts (d_in,) or (n, d_in)."""
    xb, single = _as_batch(x, mlp.d_in)
    xs = (xb - mlp.x_shift) / mlp.x_scale
    y = _core_forward(mlp.weights, mlp.biases, xs)[-1]
    y = mlp.y_shift + mlp.y_scale * y
    return y[0] if single else y


def gradient(mlp, x, y_target):
    """Exact parameter gradient of sum ||forward(x) - y_target||^2.

    Returns a list of (dW, db) pairs, one per layer, in raw units.
    """
    xb, _ = _as_batch(x, mlp.d_in)
    yb, _ = _as_batch(y_target, mlp.d_out)
    if xb.shape[0] != yb.shape[0]:
        raise ValueError("x and y_target must have the same batch size")
    xs = (xb - mlp.x_shift) / mlp.x_scale
    acts = _core_forward(mlp.weights, mlp.biases, xs)
    y = mlp.y_shift + mlp.y_scale * acts[-1]
    delta = 2.0 * (y - yb) * mlp.y_scale
    gw, gb, _ = _core_backprop(mlp.weights, acts, delta)
    return list(zip(gw, gb))


def jacobian(mlp, x):
    """d(output)/d(input) at one point, shape (d_out, d_in), raw units."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != mlp.d_in:
        raise ValueError(f"jacobian expects a single point of width {mlp.d_in}")
    xs = (x - mlp.x_shift) / mlp.x_scale
    acts = _core_forward(mlp.weights, mlp.biases, xs[None, :])
    jac = mlp.weights[0] / mlp.x_scale
    for i in range(1, len(mlp.weights)):
        jac = mlp.weights[i] @ ((1.0 - acts[i][0] ** 2)[:, None] * jac)
    return mlp.y_scale[:, None] * jac


def _standardization(data):
    shift = data.mean(axis=0)
    scale = data.std(axis=0)
    scale = np.where(scale < 1e-12, 1.0, scale)
    return shift, scale


class _Adam:
    def __init__(self, shapes, cfg):
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]
        self.t = 0
        self.cfg = cfg

    def step(self, params, grads):
        c = self.cfg
        self.t += 1
        out = []
        for i, (p, g) in enumerate(zip(params, grads)):
            self.m[i] = c.beta1 * self.m[i] + (1.0 - c.beta1) * g
            self.v[i] = c.beta2 * self.v[i] + (1.0 - c.beta2) * g * g
            mhat = self.m[i] / (1.0 - c.beta1**self.t)
            vhat = self.v[i] / (1.0 - c.beta2**self.t)
            out.append(p - c.learning_rate * mhat / (np.sqrt(vhat) + c.eps_hat))
        return out


def _split_indices(n, cfg):
    rng = np.random.default_rng(cfg.seed)
    perm = rng.permutation(n)
    n_val = int(round(cfg.validation_fraction * n))
    return perm[n_val:], perm[:n_val], rng


def train(mlp, x, y, cfg):
    """Mini-batch Adam on mean squared error; returns (trained model, history).

    Standardization constants are computed from the training split and
    stored on the returned model.  The optimization itself runs on the
    standardized residuals; the reported history is raw-unit MSE.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 2 or y.ndim != 2 or x.shape[0] != y.shape[0]:
        raise ValueError("x (n, d_in) and y (n, d_out) must align")
    if x.shape[1] != mlp.d_in or y.shape[1] != mlp.d_out:
        raise ValueError("data width does not match the model")
    train_idx, val_idx, rng = _split_indices(x.shape[0], cfg)
    if train_idx.size == 0:
        raise ValueError("empty training split")

    x_shift, x_scale = _standardization(x[train_idx])
    y_shift, y_scale = _standardization(y[train_idx])
    xs = (x - x_shift) / x_scale
    ys = (y - y_shift) / y_scale

    weights = [w.copy() for w in mlp.weights]
    biases = [b.copy() for b in mlp.biases]
    opt = _Adam([w.shape for w in weights] + [b.shape for b in biases], cfg)

    n_train = train_idx.size
    train_hist = np.empty(cfg.epochs)
    val_hist = np.empty(cfg.epochs)
    y_var = y_scale**2

    for epoch in range(cfg.epochs):
        order = rng.permutation(n_train)
        for start in range(0, n_train, cfg.batch_size):
            sel = train_idx[order[start : start + cfg.batch_size]]
            xb, yb = xs[sel], ys[sel]
            acts = _core_forward(weights, biases, xb)
            resid = acts[-1] - yb
            delta = 2.0 * resid / (resid.shape[0] * resid.shape[1])
            gw, gb, _ = _core_backprop(weights, acts, delta)
            updated = opt.step(weights + biases, gw + gb)
            weights = updated[: len(weights)]
            biases = updated[len(weights) :]

        pred = _core_forward(weights, biases, xs[train_idx])[-1]
        train_hist[epoch] = float(np.mean((pred - ys[train_idx]) ** 2 * y_var))
        if val_idx.size:
            predv = _core_forward(weights, biases, xs[val_idx])[-1]
            val_hist[epoch] = float(np.mean((predv - ys[val_idx]) ** 2 * y_var))
        else:
            val_hist[epoch] = np.nan
        if not np.isfinite(train_hist[epoch]):
            raise TrainingDivergedError(epoch)

    trained = replace(
        mlp,
        weights=tuple(weights),
        biases=tuple(biases),
        x_shift=x_shift,
        x_scale=x_scale,
        y_shift=y_shift,
        y_scale=y_scale,
    )
    return trained, TrainHistory(train_mse=train_hist, val_mse=val_hist)


def lead_submodel(mlp, k):
    """Restrict the network to its first k output components."""
    if not (1 <= k <= mlp.d_out):
        raise ValueError("k must be between 1 and d_out")
    weights = mlp.weights[:-1] + (mlp.weights[-1][:k],)
    biases = mlp.biases[:-1] + (mlp.biases[-1][:k],)
    return Mlp(
        layer_sizes=mlp.layer_sizes[:-1] + (k,),
        weights=weights,
        biases=biases,
        x_shift=mlp.x_shift,
        x_scale=mlp.x_scale,
        y_shift=mlp.y_shift[:k],
        y_scale=mlp.y_scale[:k],
    )


@dataclass(frozen=True)
class IftSummary:
    """Jacobian determinant sweep used as an implicit-function-theorem check."""

    dets: np.ndarray = field(repr=False)
    majority_sign: float = 0.0
    majority_fraction: float = 0.0

    @property
    def single_sign(self):
        return self.majority_fraction == 1.0


def ift_check(mlp, points):
    """Determinant of the square input-output Jacobian at each point.

    A consistent nonzero sign across the sampled region is the practical
    criterion for local invertibility of the map.
    """
    if mlp.d_in != mlp.d_out:
        raise ValueError("ift_check needs a square Jacobian (d_in == d_out)")
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
    dets = np.array([np.linalg.det(jacobian(mlp, p)) for p in pts])
    signs = np.sign(dets)
    n_pos = int(np.sum(signs > 0))
    n_neg = int(np.sum(signs < 0))
    if n_pos == 0 and n_neg == 0:
        return IftSummary(dets=dets, majority_sign=0.0, majority_fraction=0.0)
    majority = 1.0 if n_pos >= n_neg else -1.0
    return IftSummary(
        dets=dets,
        majority_sign=majority,
        majority_fraction=max(n_pos, n_neg) / dets.shape[0],
    )


def decoder_invert(decoder, target_lead, candidates, max_iters=200, tol=1e-12):
    """Solve argmin_L ||lead(decoder(L)) - target_lead||^2 by multi-start descent.

    candidates seeds the starts (rows are latent vectors); each start runs
    gradient descent with backtracking line search.  Returns the best latent
    vector found.  Raises if every start ends non-finite.
    """
    target = np.asarray(target_lead, dtype=float)
    k = target.shape[0]
    sub = lead_submodel(decoder, k)
    cands = np.asarray(candidates, dtype=float)
    if cands.ndim == 1:
        cands = cands[None, :]
    if cands.shape[1] != decoder.d_in:
        raise ValueError("candidate width does not match the decoder input")

    def objective(latent):
        r = forward(sub, latent) - target
        return float(r @ r)

    best_l, best_val = None, np.inf
    for start in cands:
        latent = start.copy()
        val = objective(latent)
        step = 0.1
        for _ in range(max_iters):
            r = forward(sub, latent) - target
            g = 2.0 * jacobian(sub, latent).T @ r
            gnorm = float(g @ g)
            if gnorm < tol:
                break
            # backtracking: shrink until the step actually decreases the objective
            improved = False
            for _ in range(40):
                trial = latent - step * g
                tval = objective(trial)
                if np.isfinite(tval) and tval < val:
                    latent, val = trial, tval
                    step *= 1.5
                    improved = True
                    break
                step *= 0.5
            if not improved:
                break
        if np.isfinite(val) and val < best_val:
            best_l, best_val = latent, val
    if best_l is None:
        raise RuntimeError("all descent starts failed to produce a finite objective")
    return best_l


@dataclass(frozen=True)
class Autoencoder:
    """Encoder and decoder trained jointly on reconstruction error."""

    encoder: Mlp
    decoder: Mlp

    @property
    def bottleneck_dim(self):
        return self.encoder.d_out


def init_autoencoder(d_ambient, d_latent, hidden, seed=0):
    """Symmetric encoder/decoder with the given hidden widths."""
    hidden = tuple(hidden)
    enc = init_mlp((d_ambient,) + hidden + (d_latent,), seed=seed)
    dec = init_mlp((d_latent,) + tuple(reversed(hidden)) + (d_ambient,), seed=seed + 1)
    return Autoencoder(encoder=enc, decoder=dec)


def encode(ae, x):
    return forward(ae.encoder, x)


def decode(ae, latent):
    return forward(ae.decoder, latent)


def train_autoencoder(ae, x, cfg):
    """Joint reconstruction training: backprop through decoder then encoder.

    Ambient standardization sits on the encoder input and the decoder
    output; the bottleneck stays unscaled.  History is raw-unit MSE.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != ae.encoder.d_in:
        raise ValueError("x must be (n, d_ambient)")
    if ae.decoder.d_out != ae.encoder.d_in or ae.decoder.d_in != ae.encoder.d_out:
        raise ValueError("encoder and decoder dimensions do not compose")
    train_idx, val_idx, rng = _split_indices(x.shape[0], cfg)
    if train_idx.size == 0:
        raise ValueError("empty training split")

    shift, scale = _standardization(x[train_idx])
    xs = (x - shift) / scale

    enc_w = [w.copy() for w in ae.encoder.weights]
    enc_b = [b.copy() for b in ae.encoder.biases]
    dec_w = [w.copy() for w in ae.decoder.weights]
    dec_b = [b.copy() for b in ae.decoder.biases]
    shapes = [w.shape for w in enc_w + dec_w] + [b.shape for b in enc_b + dec_b]
    opt = _Adam(shapes, cfg)

    n_train = train_idx.size
    train_hist = np.empty(cfg.epochs)
    val_hist = np.empty(cfg.epochs)
    var = scale**2

    def recon(batch):
        latent = _core_forward(enc_w, enc_b, batch)[-1]
        return _core_forward(dec_w, dec_b, latent)[-1]

    for epoch in range(cfg.epochs):
        order = rng.permutation(n_train)
        for start in range(0, n_train, cfg.batch_size):
            xb = xs[train_idx[order[start : start + cfg.batch_size]]]
            enc_acts = _core_forward(enc_w, enc_b, xb)
            dec_acts = _core_forward(dec_w, dec_b, enc_acts[-1])
            resid = dec_acts[-1] - xb
            delta = 2.0 * resid / (resid.shape[0] * resid.shape[1])
            gdw, gdb, dlatent = _core_backprop(dec_w, dec_acts, delta)
            gew, geb, _ = _core_backprop(enc_w, enc_acts, dlatent)
            params = enc_w + dec_w + enc_b + dec_b
            grads = gew + gdw + geb + gdb
            updated = opt.step(params, grads)
            ne, nd = len(enc_w), len(dec_w)
            enc_w = updated[:ne]
            dec_w = updated[ne : ne + nd]
            enc_b = updated[ne + nd : ne + nd + ne]
            dec_b = updated[ne + nd + ne :]

        pred = recon(xs[train_idx])
        train_hist[epoch] = float(np.mean((pred - xs[train_idx]) ** 2 * var))
        if val_idx.size:
            predv = recon(xs[val_idx])
            val_hist[epoch] = float(np.mean((predv - xs[val_idx]) ** 2 * var))
        else:
            val_hist[epoch] = np.nan
        if not np.isfinite(train_hist[epoch]):
            raise TrainingDivergedError(epoch)

    ident_latent = np.zeros(ae.encoder.d_out), np.ones(ae.encoder.d_out)
    encoder = replace(
        ae.encoder,
        weights=tuple(enc_w),
        biases=tuple(enc_b),
        x_shift=shift,
        x_scale=scale,
        y_shift=ident_latent[0],
        y_scale=ident_latent[1],
    )
    decoder = replace(
        ae.decoder,
        weights=tuple(dec_w),
        biases=tuple(dec_b),
        x_shift=ident_latent[0].copy(),
        x_scale=ident_latent[1].copy(),
        y_shift=shift,
        y_scale=scale,
    )
    trained = Autoencoder(encoder=encoder, decoder=decoder)
    return trained, TrainHistory(train_mse=train_hist, val_mse=val_hist)
