"""Cooperation-degree detection from short observation windows.

A shared per-frame encoder feeds two heads: a recurrent classifier that
scores how cooperative the observed agent is, and a per-frame decoder that
reconstructs the input. Raw scores become degrees through per-own-policy
linear calibration.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np
from scipy import stats

from .envs.base import TwoPlayerEnv
from .gamecore import derive_seed, rollout
from .numerics import (
    DimensionError,
    DomainError,
    Network,
    NetworkSpec,
    ParameterSet,
    dumps_params,
    loads_params,
    make_optimizer,
    mse_loss_and_grad,
    optimizer_step,
    wbce_loss_and_grad,
)
from .policies import clamp_degree, mix

DATASET_FORMAT = "spdlab-detector-dataset/1"
MODEL_FORMAT = "spdlab-detector/1"
DEFAULT_OPPONENT_DEGREES = (0.0, 0.25, 0.5, 0.75, 1.0)


class DetectorDivergence(RuntimeError):
    def __init__(self, message: str, losses: Sequence[float]):
        super().__init__(f"{message}; loss trace tail: {list(losses)[-5:]}")
        self.losses = list(losses)


# -- windows -----------------------------------------------------------------

def window_at(observations: np.ndarray, t: int, n: int) -> tuple[np.ndarray, bool]:
    """Trailing ``n`` frames ending at index ``t``, left-padded with the earliest frame."""
    if n < 1:
        raise DomainError("window length must be >= 1")
    lo = t - n + 1
    if lo >= 0:
        return observations[lo : t + 1], False
    head = observations[: t + 1]
    pad = np.repeat(head[:1], -lo, axis=0)
    return np.concatenate([pad, head]), True


def pad_window(frames: Sequence[np.ndarray], n: int) -> np.ndarray:
    frames = np.asarray(frames)
    if len(frames) == 0:
        raise DomainError("empty window")
    return window_at(frames, len(frames) - 1, n)[0]


# -- dataset -------------------------------------------------------------------

@dataclass
class DetectionDataset:
    game: str
    n: int
    windows: np.ndarray  # (N, n, obs) uint8
    labels: np.ndarray  # (N,)
    meta: dict[str, np.ndarray] = field(default_factory=dict)
    channels: tuple[str, ...] = ()

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def class_counts(self) -> dict[int, int]:
        return {1: int(self.labels.sum()), 0: int(len(self.labels) - self.labels.sum())}

    def save(self, path: str | Path) -> None:
        header = {"format": DATASET_FORMAT, "game": self.game, "n": self.n,
                  "channels": list(self.channels),
                  "counts": {str(k): v for k, v in self.class_counts.items()}}
        np.savez_compressed(path, header=np.array(json.dumps(header, sort_keys=True)),
                            windows=self.windows, labels=self.labels,
                            **{f"meta_{k}": v for k, v in self.meta.items()})

    @classmethod
    def load(cls, path: str | Path) -> "DetectionDataset":
        with np.load(path) as z:
            header = json.loads(str(z["header"]))
            if header.get("format") != DATASET_FORMAT:
                raise ValueError(f"unsupported dataset format {header.get('format')!r}")
            meta = {k[5:]: z[k] for k in z.files if k.startswith("meta_")}
            return cls(header["game"], int(header["n"]), z["windows"], z["labels"], meta,
                       tuple(header["channels"]))


def generate_dataset(
    env: TwoPlayerEnv,
    target_baselines: tuple,
    observer_baselines: tuple,
    n: int,
    samples_per_class: int,
    seed: int = 0,
    target: int = 1,
    opponent_degrees: Sequence[float] = DEFAULT_OPPONENT_DEGREES,
    min_states: int = 3,
    offsets: str = "random",
) -> DetectionDataset:
    """Balanced windows labelled 1 when ``target`` plays its cooperative baseline.

    The observer (the other agent) plays a mixture drawn from
    ``opponent_degrees``; windows are taken from the observer's view and end
    at a uniform offset that has seen at least ``min_states`` states
    (``offsets="random"``) or at the terminal state (``offsets="end"``).
    """
    if offsets not in ("random", "end"):
        raise ValueError(f"offsets must be 'random' or 'end', got {offsets!r}")
    if n < 1:
        raise DomainError("n must be >= 1")
    if n > env.max_steps + 1:
        raise DomainError(f"window length {n} exceeds the episode length {env.max_steps + 1}")
    if samples_per_class < 1:
        raise DomainError("samples_per_class must be >= 1")
    observer = 1 - target
    obs_coop, obs_def = observer_baselines
    t_coop, t_def = target_baselines
    rng = np.random.default_rng(seed)
    total = 2 * samples_per_class
    windows = np.empty((total, n, env.obs_size), dtype=np.uint8)
    labels = np.empty(total, dtype=np.int8)
    meta = {k: np.empty(total) for k in ("own_degree", "opp_degree")}
    meta["seed"] = np.empty(total, dtype=np.int64)
    meta["end"] = np.empty(total, dtype=np.int64)
    meta["padded"] = np.empty(total, dtype=bool)
    k = 0
    for label, tpol in ((1, t_coop), (0, t_def)):
        for _ in range(samples_per_class):
            w = float(opponent_degrees[int(rng.integers(len(opponent_degrees)))])
            ep_seed = int(rng.integers(1 << 62))
            opol = mix(obs_coop, obs_def, w)
            pair = (opol, tpol) if observer == 0 else (tpol, opol)
            obs = rollout(env, *pair, seed=ep_seed).observations(observer)
            lo = min(min_states - 1, len(obs) - 1)
            t = int(rng.integers(lo, len(obs))) if offsets == "random" else len(obs) - 1
            win, padded = window_at(obs, t, n)
            windows[k] = win
            labels[k] = label
            meta["own_degree"][k] = w
            meta["opp_degree"][k] = float(label)
            meta["seed"][k] = ep_seed
            meta["end"][k] = t
            meta["padded"][k] = padded
            k += 1
    return DetectionDataset(env.game_id, n, windows, labels, meta, tuple(env.channels))


# -- model -----------------------------------------------------------------------

@dataclass
class DetectorConfig:
    n: int = 8
    encoder: tuple[int, ...] = (256, 64)
    recurrent: int = 32
    recon_weight: float = 0.5
    w1: float = 1.0
    w2: float = 2.0
    lr: float = 1e-3
    epochs: int = 60
    batch: int = 128
    holdout: float = 0.2

    def __post_init__(self):
        self.encoder = tuple(int(h) for h in self.encoder)
        if self.n < 1 or self.recurrent < 1 or not self.encoder:
            raise DomainError("detector sizes must be positive")
        if self.recon_weight < 0 or self.w1 <= 0 or self.w2 <= 0:
            raise DomainError("loss weights must be positive (reconstruction weight may be 0)")
        if not 0.0 <= self.holdout < 1.0:
            raise DomainError("holdout fraction must lie in [0, 1)")


class DetectorModel:
    """Encoder shared by a GRU classifier and a per-frame decoder."""

    def __init__(self, obs_size: int, config: DetectorConfig | None = None, seed: int = 0,
                 game: str = ""):
        self.config = cfg = config or DetectorConfig()
        self.obs_size = obs_size
        self.game = game
        self.seed = seed
        dims = [obs_size, *cfg.encoder]
        enc = [{"kind": "dense", "name": f"enc.h{i}", "n_in": a, "n_out": b, "activation": "relu"}
               for i, (a, b) in enumerate(zip(dims, dims[1:]))]
        self.encoder = Network(NetworkSpec(enc))
        self.classifier = Network(NetworkSpec([
            {"kind": "gru", "name": "cls.gru", "n_in": dims[-1], "hidden": cfg.recurrent},
            {"kind": "dense", "name": "cls.out", "n_in": cfg.recurrent, "n_out": 1, "activation": "sigmoid"},
        ]))
        self.decoder = Network(NetworkSpec([
            {"kind": "dense", "name": "dec.out", "n_in": dims[-1], "n_out": obs_size, "activation": "sigmoid"},
        ]))
        rng = np.random.default_rng(seed)
        arrays: dict[str, np.ndarray] = {}
        for net in (self.encoder, self.classifier, self.decoder):
            for layer in net.layers:
                arrays.update(layer.init(rng))
        self.params = ParameterSet(arrays)

    @property
    def n(self) -> int:
        return self.config.n

    def _check(self, windows: np.ndarray) -> np.ndarray:
        x = np.asarray(windows, dtype=np.float64)
        if x.ndim == 2:
            x = x[None]
        if x.ndim != 3 or x.shape[2] != self.obs_size:
            raise DimensionError(f"expected (batch, {self.n}, {self.obs_size}) windows, got {x.shape}")
        if x.shape[1] != self.n:
            raise DimensionError(f"window length {x.shape[1]} does not match detector n={self.n}")
        return x

    def scores(self, windows: np.ndarray, params: ParameterSet | None = None) -> np.ndarray:
        p = self.params if params is None else params
        x = self._check(windows)
        z = self.encoder.predict(p, x)
        return self.classifier.predict(p, z)[:, 0]

    def loss(self, windows: np.ndarray, labels: np.ndarray, params: ParameterSet | None = None) -> float:
        """The training loss alone, without the backward pass."""
        cfg = self.config
        p = self.params if params is None else params
        x = self._check(windows)
        z = self.encoder.predict(p, x)
        prob = self.classifier.predict(p, z)[:, 0]
        loss = wbce_loss_and_grad(prob, labels, cfg.w1, cfg.w2)[0]
        if cfg.recon_weight > 0:
            loss += cfg.recon_weight * mse_loss_and_grad(self.decoder.predict(p, z), x)[0]
        return float(loss)

    def loss_and_grad(self, windows: np.ndarray, labels: np.ndarray,
                      params: ParameterSet | None = None) -> tuple[float, ParameterSet, dict[str, float]]:
        """Weighted BCE on the final recurrent state plus weighted per-frame reconstruction."""
        cfg = self.config
        p = self.params if params is None else params
        x = self._check(windows)
        z, ztape = self.encoder.forward(p, x)
        prob, ctape = self.classifier.forward(p, z)
        cls_loss, gprob = wbce_loss_and_grad(prob[:, 0], labels, cfg.w1, cfg.w2)
        grads, gz = self.classifier.backward(p, ctape, gprob[:, None])
        loss = cls_loss
        rec_loss = 0.0
        if cfg.recon_weight > 0:
            rec, dtape = self.decoder.forward(p, z)
            rec_loss, grec = mse_loss_and_grad(rec, x)
            dgrads, gz_dec = self.decoder.backward(p, dtape, cfg.recon_weight * grec)
            loss += cfg.recon_weight * rec_loss
            gz = gz + gz_dec
            for k, v in dgrads.items():
                grads[k][...] += v
        egrads, _ = self.encoder.backward(p, ztape, gz)
        for k, v in egrads.items():
            grads[k][...] += v
        return float(loss), grads, {"classification": float(cls_loss), "reconstruction": float(rec_loss)}

    # persistence
    def describe(self) -> dict[str, Any]:
        cfg = asdict(self.config)
        cfg["encoder"] = list(cfg["encoder"])
        return {"format": MODEL_FORMAT, "game": self.game, "obs_size": self.obs_size,
                "seed": self.seed, "config": cfg}

    def save(self, path: str | Path) -> None:
        header = json.dumps(self.describe(), sort_keys=True).encode()
        blob = dumps_params(self.params)
        with open(path, "wb") as fh:
            fh.write(len(header).to_bytes(4, "little"))
            fh.write(header)
            fh.write(blob)

    @classmethod
    def load(cls, path: str | Path) -> "DetectorModel":
        data = Path(path).read_bytes()
        size = int.from_bytes(data[:4], "little")
        header = json.loads(data[4 : 4 + size])
        if header.get("format") != MODEL_FORMAT:
            raise ValueError(f"unsupported detector format {header.get('format')!r}")
        model = cls(int(header["obs_size"]), DetectorConfig(**header["config"]),
                    int(header["seed"]), header["game"])
        params = loads_params(data[4 + size :])
        model.params.check_compatible(params)
        model.params = params
        return model


@dataclass
class TrainingReport:
    epoch_losses: list[float]
    train_accuracy: float
    heldout_accuracy: float
    heldout_size: int
    heldout_coop_hit_rate: float


def accuracy(model: DetectorModel, windows: np.ndarray, labels: np.ndarray, batch: int = 1024) -> float:
    if len(labels) == 0:
        return float("nan")
    pred = np.concatenate([model.scores(windows[i : i + batch]) for i in range(0, len(labels), batch)])
    return float(np.mean((pred > 0.5) == (np.asarray(labels) == 1)))


def train_detector(dataset: DetectionDataset, config: DetectorConfig | None = None,
                   seed: int = 0, symmetries: Sequence[np.ndarray] | None = None,
                   ) -> tuple[DetectorModel, TrainingReport]:
    """Mini-batch Adam on a shuffled split; the ``holdout`` share is never trained on.

    ``symmetries`` are observation index maps; each training window is
    passed through one of them drawn at random.
    """
    if len(dataset) == 0:
        raise DomainError("empty dataset")
    config = config or DetectorConfig(n=dataset.n)
    if config.n != dataset.n:
        raise DimensionError(f"config n={config.n} but dataset n={dataset.n}")
    rng = np.random.default_rng(derive_seed(seed, 1))
    model = DetectorModel(dataset.windows.shape[2], config, derive_seed(seed, 0), dataset.game)
    order = rng.permutation(len(dataset))
    n_hold = int(round(config.holdout * len(dataset)))
    hold, train = order[:n_hold], order[n_hold:]
    opt = make_optimizer(model.params, "adam", config.lr)
    epoch_losses = []
    for _ in range(config.epochs):
        perm = rng.permutation(train)
        total, count = 0.0, 0
        for i in range(0, len(perm), config.batch):
            idx = perm[i : i + config.batch]
            x = dataset.windows[idx]
            if symmetries is not None and len(symmetries) > 1:
                pick = rng.integers(len(symmetries), size=len(idx))
                x = np.stack([w[:, symmetries[k]] for w, k in zip(x, pick)])
            loss, grads, _ = model.loss_and_grad(x, dataset.labels[idx])
            if not np.isfinite(loss):
                raise DetectorDivergence("non-finite detector loss", epoch_losses + [loss])
            optimizer_step(model.params, grads, opt)
            total += loss * len(idx)
            count += len(idx)
        epoch_losses.append(total / max(count, 1))
    hw, hl = dataset.windows[hold], dataset.labels[hold]
    coop = hl == 1
    hit = float(np.mean(model.scores(hw[coop]) > 0.5)) if coop.any() else float("nan")
    report = TrainingReport(
        epoch_losses,
        accuracy(model, dataset.windows[train], dataset.labels[train]),
        accuracy(model, hw, hl),
        int(n_hold),
        hit,
    )
    return model, report


def detect(model, window: np.ndarray) -> float:
    """Raw cooperation score of one window; a pure function of model and window."""
    w = np.asarray(window)
    if w.ndim != 2:
        raise DimensionError(f"expected one (n, obs) window, got {w.shape}")
    return float(model.scores(w[None])[0])


# -- calibration -------------------------------------------------------------------

@dataclass(frozen=True)
class CalibrationEntry:
    own_degree: float
    slope: float
    intercept: float
    residual_rms: float
    degenerate: bool = False


@dataclass
class CalibrationTable:
    entries: list[CalibrationEntry]

    def save(self, path: str | Path) -> None:
        lines = ["# own_degree slope intercept residual_rms degenerate"]
        for e in self.entries:
            lines.append(f"{e.own_degree!r} {e.slope!r} {e.intercept!r} {e.residual_rms!r} {int(e.degenerate)}")
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "CalibrationTable":
        entries = []
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if not line.strip() or line.startswith("#"):
                continue
            own, a, b, rms, deg = line.split()
            entries.append(CalibrationEntry(float(own), float(a), float(b), float(rms), bool(int(deg))))
        return cls(entries)


def fit_line(scores: Sequence[float], degrees: Sequence[float], own_degree: float = 1.0) -> CalibrationEntry:
    """Least-squares map from mean raw score to true degree."""
    s = np.asarray(scores, dtype=np.float64)
    d = np.asarray(degrees, dtype=np.float64)
    if s.shape != d.shape or s.size == 0:
        raise DimensionError("scores and degrees must be equal-length and non-empty")
    if s.size < 2 or np.var(s) < 1e-12:
        b = float(d.mean())
        return CalibrationEntry(float(own_degree), 0.0, b, float(np.sqrt(np.mean((d - b) ** 2))), True)
    a, b = np.polyfit(s, d, 1)
    resid = d - (a * s + b)
    return CalibrationEntry(float(own_degree), float(a), float(b), float(np.sqrt(np.mean(resid**2))))


def nearest_entry(table: CalibrationTable, own_degree: float) -> CalibrationEntry:
    """Entry whose own degree is nearest the query; ties go to the lower degree."""
    if not table.entries:
        raise DomainError("empty calibration table")
    return min(table.entries, key=lambda e: (abs(e.own_degree - own_degree), e.own_degree))


def calibrated_value(table: CalibrationTable, own_degree: float, score: float) -> float:
    """Affine calibration without clamping, so averages of it stay unbiased."""
    entry = nearest_entry(table, own_degree)
    return float(entry.slope * score + entry.intercept)


def calibrated_degree(table: CalibrationTable, own_degree: float, score: float) -> float:
    """Calibrated degree of a raw score, clamped to [0, 1]."""
    return clamp_degree(calibrated_value(table, own_degree, score))


def degree_scores(
    model: DetectorModel,
    env: TwoPlayerEnv,
    observer_baselines: tuple,
    target_baselines: tuple,
    own_degree: float,
    degrees: Sequence[float],
    episodes: int,
    seed: int = 0,
    target: int = 1,
    min_states: int = 1,
) -> np.ndarray:
    """Mean raw score over every window of ``episodes`` rollouts, per true degree.

    Windows end at each step of the episode, as an online agent would query.
    """
    observer = 1 - target
    own = mix(observer_baselines[0], observer_baselines[1], own_degree)
    out = np.empty(len(degrees))
    for gi, w in enumerate(degrees):
        opp = mix(target_baselines[0], target_baselines[1], float(w))
        pair = (own, opp) if observer == 0 else (opp, own)
        wins = []
        for ep in range(episodes):
            obs = rollout(env, *pair, seed=derive_seed(seed, gi, ep)).observations(observer)
            for t in range(min(min_states - 1, len(obs) - 1), len(obs)):
                wins.append(window_at(obs, t, model.n)[0])
        wins = np.asarray(wins)
        out[gi] = float(np.mean(np.concatenate(
            [model.scores(wins[i : i + 2048]) for i in range(0, len(wins), 2048)])))
    return out


def fit_calibration(
    model: DetectorModel,
    env: TwoPlayerEnv,
    observer_baselines: tuple,
    target_baselines: tuple,
    own_grid: Sequence[float] = (0.0, 0.25, 0.5, 0.75, 1.0),
    degree_grid: Sequence[float] = tuple(np.round(np.linspace(0, 1, 11), 10)),
    episodes: int = 50,
    seed: int = 0,
    target: int = 1,
) -> CalibrationTable:
    if not own_grid or not degree_grid:
        raise DomainError("calibration grids must be non-empty")
    entries = []
    for k, own in enumerate(own_grid):
        s = degree_scores(model, env, observer_baselines, target_baselines, own, degree_grid,
                          episodes, derive_seed(seed, k), target)
        entries.append(fit_line(s, degree_grid, own))
    return CalibrationTable(entries)


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    if np.ptp(np.asarray(x, dtype=float)) == 0 or np.ptp(np.asarray(y, dtype=float)) == 0:
        return 0.0
    rho = stats.spearmanr(x, y).statistic
    return float(rho) if np.isfinite(rho) else 0.0
