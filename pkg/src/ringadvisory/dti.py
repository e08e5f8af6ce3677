"""Unsupervised driver-trait inference: a recurrent variational autoencoder
over windows of normalized ego observations.

The encoder LSTM consumes a T-step window and emits a 2-dim Gaussian
latent; the decoder LSTM reconstructs the window from the latent
(replicated as its per-step input). Training minimizes the Euclidean
reconstruction norm plus a (tiny) KL term against the standard normal.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import advisory, driver, sim, trainer
from .nn import Adam, LSTMCell, Tensor

OBS_DIM = 3
DEFAULT_WINDOW = 50


def _linear_head(rng, fan_in, fan_out, zero_init=False):
    """Output head; zero_init starts the head at the constant zero map.

    The latent heads are zero-initialized so an untrained model emits the
    standard-normal prior exactly (mu=0, sigma=1): untrained latents then
    carry no structure, which downstream separation checks rely on.
    """
    if zero_init:
        w = Tensor(np.zeros((fan_in, fan_out)), requires_grad=True)
    else:
        bound = 1.0 / np.sqrt(fan_in)
        w = Tensor(rng.uniform(-bound, bound, size=(fan_in, fan_out)), requires_grad=True)
    b = Tensor(np.zeros(fan_out), requires_grad=True)
    return w, b


class DtiModel:
    def __init__(self, seed: int = 0, hidden: int = 32, latent_dim: int = 2,
                 window: int = DEFAULT_WINDOW, beta_recon: float = 1.0,
                 beta_kl: float = 1e-6):
        if beta_recon < 0 or beta_kl < 0:
            raise ValueError("loss weights must be non-negative")
        rng = np.random.default_rng(seed)
        self.hidden = hidden
        self.latent_dim = latent_dim
        self.window = window
        self.beta_recon = beta_recon
        self.beta_kl = beta_kl
        self.encoder = LSTMCell(OBS_DIM, hidden, rng)
        self.decoder = LSTMCell(latent_dim, hidden, rng)
        self.w_mu, self.b_mu = _linear_head(rng, hidden, latent_dim, zero_init=True)
        self.w_logvar, self.b_logvar = _linear_head(rng, hidden, latent_dim, zero_init=True)
        self.w_out, self.b_out = _linear_head(rng, hidden, OBS_DIM)

    def parameters(self):
        return (self.encoder.parameters() + self.decoder.parameters()
                + [self.w_mu, self.b_mu, self.w_logvar, self.b_logvar,
                   self.w_out, self.b_out])

    def param_dict(self):
        out = {}
        for name, p in self.encoder.param_dict().items():
            out[f"enc_{name}"] = p
        for name, p in self.decoder.param_dict().items():
            out[f"dec_{name}"] = p
        out.update(w_mu=self.w_mu, b_mu=self.b_mu, w_logvar=self.w_logvar,
                   b_logvar=self.b_logvar, w_out=self.w_out, b_out=self.b_out)
        return out

    # -- forward -------------------------------------------------------

    def encode(self, x: np.ndarray):
        """x: (B, T, 3) -> (mu, logvar) tensors of shape (B, latent_dim)."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 2:
            x = x[None]
        if x.shape[1] != self.window or x.shape[2] != OBS_DIM:
            raise ValueError(f"window shape {x.shape[1:]} != ({self.window}, {OBS_DIM})")
        batch = x.shape[0]
        h, c = self.encoder.init_state(batch)
        for t in range(x.shape[1]):
            h, c = self.encoder.step(Tensor(x[:, t, :]), h, c)
        mu = h @ self.w_mu + self.b_mu
        logvar = h @ self.w_logvar + self.b_logvar
        return mu, logvar

    def decode(self, z: Tensor, steps: int):
        """Reconstruct `steps` observation frames from the latent."""
        batch = z.data.shape[0]
        h, c = self.decoder.init_state(batch)
        frames = []
        for _ in range(steps):
            h, c = self.decoder.step(z, h, c)
            frames.append(h @ self.w_out + self.b_out)
        return frames

    def loss(self, x: np.ndarray, eta: np.ndarray | None = None,
             rng: np.random.Generator | None = None) -> Tensor:
        """Scalar training loss for a batch of windows.

        `eta` fixes the reparameterization noise (used by gradient checks);
        otherwise it is drawn from `rng`, or zero if neither is given.
        """
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 2:
            x = x[None]
        mu, logvar = self.encode(x)
        if eta is None:
            eta = (rng.standard_normal(mu.data.shape) if rng is not None
                   else np.zeros(mu.data.shape))
        sigma = (logvar * 0.5).exp()
        z = mu + sigma * Tensor(eta)
        frames = self.decode(z, x.shape[1])
        sq = None
        for t, frame in enumerate(frames):
            diff = frame - Tensor(x[:, t, :])
            term = (diff * diff).sum(axis=1)
            sq = term if sq is None else sq + term
        recon = (sq ** 0.5).mean()
        kl_terms = (mu * mu + logvar.exp() - logvar - 1.0) * 0.5
        kl = kl_terms.sum(axis=1).mean()
        return recon * self.beta_recon + kl * self.beta_kl

    def infer(self, x: np.ndarray, mode: str = "mean",
              rng: np.random.Generator | None = None):
        """Latent for each window: (z, mu, sigma) numpy arrays."""
        mu, logvar = self.encode(np.asarray(x, dtype=np.float64))
        mu_v = mu.data
        sigma_v = np.exp(0.5 * logvar.data)
        if mode == "mean":
            z = mu_v.copy()
        elif mode == "sample":
            if rng is None:
                raise ValueError("sample mode needs an rng")
            z = mu_v + sigma_v * rng.standard_normal(mu_v.shape)
        else:
            raise ValueError(f"unknown mode {mode!r}")
        return z, mu_v, sigma_v


@dataclass
class DtiPair:
    """The two trait models used jointly: reaction-delay first, offset second."""

    delay_model: DtiModel
    offset_model: DtiModel

    def infer(self, window, mode="sample", rng=None) -> np.ndarray:
        x = np.asarray(window, dtype=np.float64)[None]
        zd, _, _ = self.delay_model.infer(x, mode=mode, rng=rng)
        zo, _, _ = self.offset_model.infer(x, mode=mode, rng=rng)
        return np.concatenate([zd[0], zo[0]])


# -- dataset -----------------------------------------------------------


@dataclass
class TraitDataset:
    x: np.ndarray  # (M, T, 3)
    labels: np.ndarray  # (M,) trait value of interest
    deltas: np.ndarray  # (M,)
    advice_changed: np.ndarray  # (M,) bool: advice changed inside window

    def __len__(self):
        return len(self.x)

    def split(self, train_frac: float = 0.8, seed: int = 0):
        rng = np.random.default_rng(seed)
        order = rng.permutation(len(self.x))
        cut = int(round(train_frac * len(self.x)))
        tr, te = order[:cut], order[cut:]
        return (TraitDataset(self.x[tr], self.labels[tr], self.deltas[tr], self.advice_changed[tr]),
                TraitDataset(self.x[te], self.labels[te], self.deltas[te], self.advice_changed[te]))

    def content_hash(self) -> str:
        import hashlib

        h = hashlib.sha256()
        h.update(self.x.tobytes())
        h.update(self.labels.tobytes())
        return h.hexdigest()


def _windows_from_record(record: sim.EpisodeRecord, cfg: sim.RingConfig, T: int):
    """Non-overlapping post-warm-up observation windows with advice-change flags.

    Windows start half a window after the advising phase begins so that,
    when the hold length equals the window length, each window straddles a
    hold boundary instead of coinciding with a single hold segment.
    """
    speeds = record.speeds_array()
    heads = record.headways_array()
    advice = record.advice_array()
    e = 0
    lead = (e + 1) % cfg.n_vehicles
    obs = np.stack(
        [speeds[:, e] / cfg.v_max, speeds[:, lead] / cfg.v_max,
         heads[:, e] / cfg.circumference], axis=1
    )
    start = cfg.warmup_steps + T // 2
    out = []
    while start + T <= len(obs):
        chunk_advice = advice[start:start + T]
        changed = np.unique(chunk_advice[np.isfinite(chunk_advice)]).size > 1
        out.append((obs[start:start + T], changed))
        start += T
    return out


def gen_dataset(
    base_policies: dict,
    trait: str,
    size: int,
    cfg: sim.RingConfig,
    seed: int = 0,
    window: int = DEFAULT_WINDOW,
    noise_enabled: bool = True,
) -> TraitDataset:
    """Simulate advised episodes and slice labeled observation windows.

    `base_policies` maps hold-length to its trained base policy; `trait` is
    "offset" or "delay" (the labeled trait; the other is sampled uniformly).
    Episodes that collide are discarded and resampled. Label counts are
    exactly balanced.
    """
    if trait == "offset":
        values = driver.OFFSETS
    elif trait == "delay":
        values = driver.REACTION_DELAYS
    else:
        raise ValueError(f"unknown trait {trait!r}")
    per_label = size // len(values)
    rng = np.random.default_rng(seed)
    deltas = sorted(base_policies)
    xs, labels, ds, changed = [], [], [], []
    for value in values:
        have = 0
        while have < per_label:
            delta = int(rng.choice(deltas))
            if trait == "offset":
                traits = driver.DriverTraits(float(rng.choice(driver.REACTION_DELAYS)),
                                             float(value), noise_enabled)
            else:
                traits = driver.DriverTraits(float(value),
                                             float(rng.choice(driver.OFFSETS)), noise_enabled)
            ep_seed = int(rng.integers(0, 2 ** 31))
            _, record = trainer.rollout(
                base_policies[delta], cfg, ep_seed, traits=traits, reward="pc",
            )
            if record.collided:
                continue
            for obs, chg in _windows_from_record(record, cfg, window):
                if have >= per_label:
                    break
                xs.append(obs)
                labels.append(value)
                ds.append(delta)
                changed.append(chg)
                have += 1
    return TraitDataset(np.asarray(xs), np.asarray(labels), np.asarray(ds),
                        np.asarray(changed, dtype=bool))


# -- training ----------------------------------------------------------


def train_dti(
    x_train: np.ndarray,
    epochs: int = 100,
    lr: float = 1e-3,
    batch: int = 16,
    seed: int = 0,
    x_val: np.ndarray | None = None,
    model: DtiModel | None = None,
    progress=None,
):
    """Train (or continue training) a trait model; returns (model, history)."""
    x_train = np.asarray(x_train, dtype=np.float64)
    if len(x_train) == 0:
        raise ValueError("empty dataset")
    model = model or DtiModel(seed=seed, window=x_train.shape[1])
    opt = Adam(model.parameters(), lr)
    rng = np.random.default_rng(seed + 1)
    history = {"train_loss": [], "val_loss": []}
    for epoch in range(epochs):
        order = rng.permutation(len(x_train))
        losses = []
        for lo in range(0, len(order), batch):
            xb = x_train[order[lo:lo + batch]]
            loss = model.loss(xb, rng=rng)
            if not np.isfinite(loss.data):
                raise FloatingPointError(f"non-finite loss at epoch {epoch}")
            opt.zero_grad()
            loss.backward()
            if lr > 0:
                opt.step()
            losses.append(float(loss.data))
        history["train_loss"].append(float(np.mean(losses)))
        if x_val is not None:
            history["val_loss"].append(evaluate_loss(model, x_val))
        if progress is not None:
            progress(epoch, history["train_loss"][-1])
    return model, history


def evaluate_loss(model: DtiModel, x: np.ndarray, batch: int = 256) -> float:
    x = np.asarray(x, dtype=np.float64)
    vals, weights = [], []
    for lo in range(0, len(x), batch):
        xb = x[lo:lo + batch]
        vals.append(float(model.loss(xb).data))
        weights.append(len(xb))
    return float(np.average(vals, weights=weights))


# -- evaluation --------------------------------------------------------


def knn_accuracy(z: np.ndarray, labels: np.ndarray, k: int = 5) -> float:
    """Leave-one-out k-nearest-neighbour label accuracy in latent space."""
    z = np.asarray(z)
    if len(z) == 0:
        return float("nan")
    d = np.linalg.norm(z[:, None, :] - z[None, :, :], axis=-1)
    np.fill_diagonal(d, np.inf)
    hits = 0
    for i in range(len(z)):
        nn = np.argsort(d[i])[:k]
        vals, counts = np.unique(labels[nn], return_counts=True)
        if vals[np.argmax(counts)] == labels[i]:
            hits += 1
    return hits / len(z)


def silhouette(z: np.ndarray, labels: np.ndarray):
    """Mean silhouette score; None for fewer than two classes."""
    classes = np.unique(labels)
    if len(labels) == 0 or len(classes) < 2:
        return None
    z = np.asarray(z)
    d = np.linalg.norm(z[:, None, :] - z[None, :, :], axis=-1)
    scores = []
    for i in range(len(z)):
        same = (labels == labels[i])
        same_i = same.copy()
        same_i[i] = False
        if not same_i.any():
            continue
        a = d[i][same_i].mean()
        b = min(d[i][labels == c].mean() for c in classes if c != labels[i])
        denom = max(a, b)
        scores.append((b - a) / denom if denom > 0 else 0.0)
    return float(np.mean(scores))


def latent_separation_report(model: DtiModel, dataset: TraitDataset,
                             require_advice_change: bool = True) -> dict:
    """Cluster metrics over a labeled test set (informative windows only)."""
    mask = dataset.advice_changed if require_advice_change else np.ones(len(dataset), bool)
    x, labels = dataset.x[mask], dataset.labels[mask]
    deltas = dataset.deltas[mask]
    _, mu, _ = model.infer(x, mode="mean")
    return {
        "n": int(len(x)),
        "n_classes": int(np.unique(labels).size),
        "chance": 1.0 / max(np.unique(labels).size, 1),
        "knn_accuracy": knn_accuracy(mu, labels),
        "silhouette": silhouette(mu, labels),
        "latents": mu,
        "labels": labels,
        "deltas": deltas,
    }


def export_latent_scatter(report: dict, path):
    rows = np.column_stack([report["latents"], report["labels"], report["deltas"]])
    np.savetxt(path, rows, delimiter=",", header="z1,z2,trait_label,delta", comments="")


def rolling_latent_trace(model: DtiModel, record: sim.EpisodeRecord,
                         cfg: sim.RingConfig, stride: int = 10) -> np.ndarray:
    """(t, z1, z2) rows for a single episode, window slid by `stride` steps."""
    speeds = record.speeds_array()
    heads = record.headways_array()
    e = 0
    lead = (e + 1) % cfg.n_vehicles
    obs = np.stack([speeds[:, e] / cfg.v_max, speeds[:, lead] / cfg.v_max,
                    heads[:, e] / cfg.circumference], axis=1)
    T = model.window
    rows = []
    for end in range(T, len(obs) + 1, stride):
        _, mu, _ = model.infer(obs[None, end - T:end], mode="mean")
        rows.append([end - 1, mu[0, 0], mu[0, 1]])
    return np.asarray(rows)
