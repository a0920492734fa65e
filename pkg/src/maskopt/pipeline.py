"""End-to-end training and evaluation.

Joint training alternates, per epoch: project the probability matrix onto
its feasible set, synthesize one constrained mask for the epoch, then run
minibatch updates through mask -> inverse transform -> magnitude ->
residual network with the joint loss
lambda1 * 0.5‖x_u - y‖² + lambda2 * 0.5‖x_rec - y‖².  The network
parameters get exact gradients; the probability matrix gets the
straight-through estimate.  The placement seed is held fixed across epochs
so the epoch masks evolve continuously with the probabilities.

Everything here is deterministic given the config seeds: batch order and
mask synthesis draw from per-epoch `SeedSequence` children, so a run can
be checkpointed and resumed bit-exactly.
"""

import configparser
import csv
import math
import os
import struct
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields

import numpy as np

from .core import (ComplexGrid, ProbabilityMatrix, RealImage, SamplingMask,
                   save_mask, save_probability)
from .fourier import (_ift_backward_planes, _inverse_planes, center_shift,
                      center_shift_inverse)
from .recon import (AdamState, ReconNet, adam_init, adam_step, load_network,
                    save_network)
from .sampling import (ConstraintConfig, generate_constrained_mask,
                       project_probabilities, save_region_reports)

_ADAM_MAGIC = b"ADM1"

#: MSE at or below this fraction of peak² counts as an exact match and
#: reports the +inf PSNR sentinel; it is far below any real image
#: difference but above double-precision transform round-off.
_EXACT_MSE_FRACTION = 1e-24

_LOG_FIELDS = ("epoch", "lr", "L_IFT", "L_rec", "L_joint",
               "val_psnr_u", "val_psnr_rec", "realized_rate")


class TrainingDiverged(RuntimeError):
    """Raised when an epoch produces a non-finite loss or gradient."""

    def __init__(self, message, checkpoint_dir=None):
        super().__init__(message)
        self.checkpoint_dir = checkpoint_dir


@dataclass(frozen=True)
class TrainConfig:
    """Training hyperparameters; defaults follow the full-scale recipe
    (batch 16, 200 epochs, lr 1e-3 decaying by sqrt(10) every 20 epochs)."""

    target_rate: float
    recnet_depth: int = 5
    channels: int = 16
    lambda1: float = 1.0
    lambda2: float = 1.0
    batch_size: int = 16
    max_epochs: int = 200
    initial_lr: float = 1e-3
    lr_decay_factor: float = math.sqrt(10.0)
    decay_step: int = 20
    min_lr: float = 1e-8
    weight_decay: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 0.001
    region_size: int = 10
    p_min: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.target_rate <= 1.0:
            raise ValueError(f"target_rate must be in (0, 1], got {self.target_rate}")
        if self.recnet_depth != 0 and self.recnet_depth < 2:
            raise ValueError("recnet_depth must be 0 (no network) or >= 2")
        if self.lambda1 < 0.0 or self.lambda2 < 0.0:
            raise ValueError("lambda weights must be >= 0")
        if min(self.batch_size, self.max_epochs, self.decay_step,
               self.channels, self.region_size) < 1:
            raise ValueError("batch_size, max_epochs, decay_step, channels, "
                             "region_size must be >= 1")
        if min(self.initial_lr, self.lr_decay_factor, self.min_lr, self.epsilon) <= 0.0:
            raise ValueError("learning-rate and epsilon settings must be positive")
        if self.weight_decay < 0.0:
            raise ValueError("weight_decay must be >= 0")

    def constraint_config(self) -> ConstraintConfig:
        return ConstraintConfig(target_rate=self.target_rate, epsilon=self.epsilon,
                                region_size=self.region_size, p_min=self.p_min,
                                seed=self.seed)


def learning_rate(cfg: TrainConfig, epoch_index: int) -> float:
    """Step-decay schedule for the zero-based update-epoch index."""
    return max(cfg.min_lr,
               cfg.initial_lr * cfg.lr_decay_factor ** (-(epoch_index // cfg.decay_step)))


@dataclass
class EvalReport:
    method: str
    realized_rate: float       # rounded to 4 decimals
    psnr_u: list
    psnr_rec: list | None
    mean_psnr_u: float
    mean_psnr_rec: float | None
    runtime_s: float


@dataclass
class TrainResult:
    p_u: ProbabilityMatrix | None
    mask: SamplingMask
    net: ReconNet | None
    log: list
    region_reports: list


def mse(a, b) -> float:
    a = a.pixels if isinstance(a, RealImage) else np.asarray(a, dtype=np.float64)
    b = b.pixels if isinstance(b, RealImage) else np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    diff = a - b
    return float(np.mean(diff * diff))

def psnr(a, b, peak=1.0) -> float:
    """10·log10(peak²/MSE); differences at double-rounding noise level
    report the +inf sentinel (see _EXACT_MSE_FRACTION).  Non-finite images
    give -inf (infinite error) or nan rather than raising."""
    err = mse(a, b)
    if math.isnan(err):
        return math.nan
    if math.isinf(err):
        return -math.inf
    if err <= _EXACT_MSE_FRACTION * peak * peak:
        return math.inf
    return 10.0 * math.log10(peak * peak / err)


def _mean_psnr(values):
    has_pos = any(v == math.inf for v in values)
    has_neg = any(v == -math.inf for v in values)
    if has_pos and has_neg:
        return math.nan
    if has_pos:
        return math.inf
    if has_neg:
        return -math.inf
    return float(np.mean(values))


def joint_loss(x_u, x_rec, y, lambda1=1.0, lambda2=1.0) -> float:
    """lambda1 * 0.5‖x_u - y‖²_F + lambda2 * 0.5‖x_rec - y‖²_F."""
    xu = x_u.pixels if isinstance(x_u, RealImage) else np.asarray(x_u, dtype=np.float64)
    xr = x_rec.pixels if isinstance(x_rec, RealImage) else np.asarray(x_rec, dtype=np.float64)
    yy = y.pixels if isinstance(y, RealImage) else np.asarray(y, dtype=np.float64)
    du = xu - yy
    dr = xr - yy
    return float(lambda1 * 0.5 * np.sum(du * du) + lambda2 * 0.5 * np.sum(dr * dr))


def _magnitude_backward(grad_mag, re, im, mag):
    """Gradient of hypot through both planes; zero where the magnitude is 0."""
    safe = np.where(mag > 0.0, mag, 1.0)
    scale = np.where(mag > 0.0, grad_mag / safe, 0.0)
    return scale * re, scale * im


def _mask_plane(m_u: SamplingMask):
    """DC-centered mask as a float plane in transform (unshifted) order."""
    return center_shift_inverse(m_u.bits).astype(np.float64)


def undersampled_image(k: ComplexGrid, m_u: SamplingMask) -> RealImage:
    """Zero-filled reconstruction: magnitude of the inverse transform of the
    masked k-space.  `k` is in transform order, the mask DC-centered."""
    if (k.m, k.n) != (m_u.m, m_u.n):
        raise ValueError(f"k-space {(k.m, k.n)} and mask {(m_u.m, m_u.n)} differ")
    mt = _mask_plane(m_u)
    xr, xi = _inverse_planes(k.real * mt, k.imag * mt)
    return RealImage(np.hypot(xr, xi))


def default_probability(m, n, cfg: ConstraintConfig, sigma=None,
                        core_fraction=0.5) -> ProbabilityMatrix:
    """Variable-density starting point: a fully-sampled DC-centred disc plus a
    Gaussian tail.

    The disc takes `core_fraction` of the sampling budget, so the dominant
    low-frequency coefficients are always kept (losing any of them costs far
    more signal energy than any tail cell can return); the remaining budget
    decays smoothly into high frequencies.  `sigma` is the tail width
    (default min(m, n)/4).
    """
    if sigma is None:
        sigma = min(m, n) / 4.0
    if not 0.0 <= core_fraction <= 1.0:
        raise ValueError("core_fraction must lie in [0, 1]")
    yy, xx = np.mgrid[0:m, 0:n]
    r = np.hypot(yy - m // 2, xx - n // 2)
    budget = cfg.target_rate * m * n
    r_core = math.sqrt(core_fraction * budget / math.pi)
    core = r <= r_core
    tail = np.exp(-0.5 * ((r - r_core) / sigma) ** 2.0) * ~core
    base = core.astype(np.float64)
    remaining = budget - base.sum()
    if remaining > 0.0 and tail.sum() > 0.0:
        base += tail * min(1.0, remaining / tail.sum())
    return project_probabilities(base, cfg)


def _item_eval(kr, ki, mt, net):
    """(x_u, x_rec) magnitudes for one item; x_rec is x_u when net is None."""
    xr, xi = _inverse_planes(kr * mt, ki * mt)
    x_u = np.hypot(xr, xi)
    if net is None:
        return x_u, x_u
    residual, _ = net.forward(x_u)
    return x_u, x_u + residual


def _check_dims(ds):
    if len(ds) == 0:
        raise ValueError("dataset is empty")
    m, n = ds.images[0].m, ds.images[0].n
    for img in ds.images:
        if (img.m, img.n) != (m, n):
            raise ValueError("dataset items must share one grid size")
    return m, n


def train(train_ds, cfg: TrainConfig, val_ds=None, fixed_mask=None,
          out_dir=None, resume_from=None) -> TrainResult:
    """Joint training of the probability matrix and the residual network.

    `fixed_mask` trains the network against a frozen mask instead of the
    probabilistic layer (used for per-family comparisons).  `out_dir`, when
    given, receives a checkpoint bundle after every epoch; `resume_from`
    restores one and continues bit-exactly.  Returns the trained artifacts
    and the per-epoch log (row 0 is a pre-training evaluation).
    """
    m, n = _check_dims(train_ds)
    if val_ds is None:
        val_ds = train_ds
    else:
        if _check_dims(val_ds) != (m, n):
            raise ValueError("validation grid size differs from training")
    if fixed_mask is not None and (fixed_mask.m, fixed_mask.n) != (m, n):
        raise ValueError("fixed_mask size does not match the dataset")
    ccfg = cfg.constraint_config()

    kr_list = [k.real for k in train_ds.kspace]
    ki_list = [k.imag for k in train_ds.kspace]
    y_list = [img.pixels for img in train_ds.images]

    if resume_from is not None:
        state = load_checkpoint(resume_from, cfg, fixed_mask=fixed_mask)
        start_epoch = state.epoch + 1
        p_arr, net = state.p_raw, state.net
        net_state, p_state = state.net_opt, state.p_opt
        log = state.log
    else:
        start_epoch = 1
        p_arr = None if fixed_mask is not None else \
            default_probability(m, n, ccfg).probs.copy()
        net = None if cfg.recnet_depth == 0 else \
            ReconNet(cfg.recnet_depth, channels=cfg.channels, seed=cfg.seed)
        net_state = None if net is None else adam_init(net.parameters())
        p_state = None if p_arr is None else adam_init([p_arr])
        log = []

    def epoch_mask():
        if fixed_mask is not None:
            return fixed_mask, [], None
        proj = project_probabilities(p_arr, ccfg)
        mask, reports = generate_constrained_mask(proj, ccfg)
        return mask, reports, proj

    def validate(mask, mt):
        pu, pr = [], []
        for k, img in zip(val_ds.kspace, val_ds.images):
            x_u, x_rec = _item_eval(k.real, k.imag, mt, net)
            pu.append(psnr(x_u, img.pixels))
            pr.append(psnr(x_rec, img.pixels))
        return _mean_psnr(pu), _mean_psnr(pr)

    def mean_losses(mt):
        li = lr_ = 0.0
        for kr, ki, y in zip(kr_list, ki_list, y_list):
            x_u, x_rec = _item_eval(kr, ki, mt, net)
            du = x_u - y
            dr = x_rec - y
            li += 0.5 * float(np.sum(du * du))
            lr_ += 0.5 * float(np.sum(dr * dr))
        return li / len(train_ds), lr_ / len(train_ds)

    def log_row(epoch, lr, li, lrec, mask, vu, vr):
        log.append({"epoch": epoch, "lr": lr, "L_IFT": li, "L_rec": lrec,
                    "L_joint": cfg.lambda1 * li + cfg.lambda2 * lrec,
                    "val_psnr_u": vu, "val_psnr_rec": vr,
                    "realized_rate": mask.rate})

    if resume_from is None:
        mask0, _, _ = epoch_mask()
        mt0 = _mask_plane(mask0)
        li0, lr0 = mean_losses(mt0)
        vu0, vr0 = validate(mask0, mt0)
        log_row(0, learning_rate(cfg, 0), li0, lr0, mask0, vu0, vr0)

    for epoch in range(start_epoch, cfg.max_epochs + 1):
        lr = learning_rate(cfg, epoch - 1)
        mask, reports, proj = epoch_mask()
        if proj is not None:
            p_arr[...] = proj.probs
        mt = _mask_plane(mask)
        order = np.random.default_rng(
            np.random.SeedSequence([cfg.seed, epoch])).permutation(len(train_ds))
        sum_li = sum_lr = 0.0
        try:
            for b0 in range(0, len(order), cfg.batch_size):
                batch = order[b0:b0 + cfg.batch_size]
                grad_p = None if p_arr is None else np.zeros((m, n))
                net_grads = None
                for idx in batch:
                    kr, ki, y = kr_list[idx], ki_list[idx], y_list[idx]
                    mr, mi = kr * mt, ki * mt
                    xr, xi = _inverse_planes(mr, mi)
                    mag = np.hypot(xr, xi)
                    if net is not None:
                        residual, tape = net.forward(mag)
                        x_rec = mag + residual
                    else:
                        x_rec = mag
                    du = mag - y
                    dr = x_rec - y
                    sum_li += 0.5 * float(np.sum(du * du))
                    sum_lr += 0.5 * float(np.sum(dr * dr))
                    grad_mag = cfg.lambda1 * du + cfg.lambda2 * dr
                    if net is not None:
                        pgrads, gx = net.backward(tape, cfg.lambda2 * dr)
                        grad_mag = grad_mag + gx
                        if net_grads is None:
                            net_grads = pgrads
                        else:
                            net_grads = [a + g for a, g in zip(net_grads, pgrads)]
                    if grad_p is not None:
                        g_re, g_im = _magnitude_backward(grad_mag, xr, xi, mag)
                        gkr, gki = _ift_backward_planes(g_re, g_im)
                        grad_p += center_shift(gkr * kr + gki * ki)
                scale = 1.0 / len(batch)
                if net is not None:
                    adam_step(net.parameters(), [g * scale for g in net_grads],
                              net_state, lr, beta1=cfg.beta1, beta2=cfg.beta2,
                              weight_decay=cfg.weight_decay)
                    net.mark_updated()
                if grad_p is not None:
                    # The projection pins mean(p) to the target rate, so only
                    # the component of the gradient tangent to that constraint
                    # can move the distribution; the mean component would be
                    # cancelled later anyway but meanwhile distorts the
                    # per-cell Adam moments, so remove it before the step.
                    grad_p -= grad_p.mean()
                    adam_step([p_arr], [grad_p * scale], p_state, lr,
                              beta1=cfg.beta1, beta2=cfg.beta2)
        except FloatingPointError as exc:
            if out_dir is not None:
                save_checkpoint(out_dir, TrainState(epoch - 1, p_arr, net,
                                                    net_state, p_state, log, cfg), mask)
            raise TrainingDiverged(f"epoch {epoch}: {exc}", out_dir) from exc
        li = sum_li / len(train_ds)
        lrec = sum_lr / len(train_ds)
        if not (math.isfinite(li) and math.isfinite(lrec)):
            if out_dir is not None:
                save_checkpoint(out_dir, TrainState(epoch - 1, p_arr, net,
                                                    net_state, p_state, log, cfg), mask)
            raise TrainingDiverged(f"epoch {epoch}: non-finite loss", out_dir)
        vu, vr = validate(mask, mt)
        log_row(epoch, lr, li, lrec, mask, vu, vr)
        if out_dir is not None:
            save_checkpoint(out_dir, TrainState(epoch, p_arr, net, net_state,
                                                p_state, log, cfg), mask)

    if fixed_mask is not None:
        return TrainResult(None, fixed_mask, net, log, [])
    p_final = project_probabilities(p_arr, ccfg)
    final_mask, final_reports = generate_constrained_mask(p_final, ccfg)
    return TrainResult(p_final, final_mask, net, log, final_reports)


def evaluate(ds, mask: SamplingMask, net: ReconNet = None, threads=None,
             method="") -> EvalReport:
    """Two-indicator evaluation: zero-filled PSNR always, reconstruction
    PSNR when a network is supplied.  `threads` parallelizes over items
    with deterministic ordering."""
    m, n = _check_dims(ds)
    if (mask.m, mask.n) != (m, n):
        raise ValueError("mask size does not match the dataset")
    mt = _mask_plane(mask)
    t0 = time.perf_counter()

    def one(i):
        y = ds.images[i].pixels
        x_u, x_rec = _item_eval(ds.kspace[i].real, ds.kspace[i].imag, mt, net)
        return psnr(x_u, y), psnr(x_rec, y)

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            pairs = list(pool.map(one, range(len(ds))))
    else:
        pairs = [one(i) for i in range(len(ds))]
    psnr_u = [p[0] for p in pairs]
    psnr_rec = [p[1] for p in pairs] if net is not None else None
    return EvalReport(
        method=method,
        realized_rate=round(mask.rate, 4),
        psnr_u=psnr_u,
        psnr_rec=psnr_rec,
        mean_psnr_u=_mean_psnr(psnr_u),
        mean_psnr_rec=_mean_psnr(psnr_rec) if psnr_rec is not None else None,
        runtime_s=time.perf_counter() - t0,
    )


def _fmt(v):
    if v is None or v == "":
        return ""
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(float(v))  # shortest round-trip string, reload is bit-exact
    return str(v)


def compare_methods(ds, rates, families, artifacts, out_path=None, threads=None):
    """Method-comparison sweep over `rates` x `families`.

    `artifacts` maps (family, rate) to (mask, net-or-None).  Returns
    (header, rows) with one row per rate and an undersampling/reconstruction
    PSNR column pair per family; a missing artifact leaves its cells blank.
    Writes CSV to `out_path` when given.
    """
    header = ["rate"]
    for fam in families:
        header += [f"{fam}_psnr_u", f"{fam}_psnr_rec"]
    rows = []
    for rate in rates:
        row = [rate]
        for fam in families:
            entry = artifacts.get((fam, rate))
            if entry is None:
                warnings.warn(f"no artifact for ({fam}, {rate}); leaving cells blank")
                row += ["", ""]
                continue
            mask, net = entry
            rep = evaluate(ds, mask, net=net, method=fam, threads=threads)
            row += [rep.mean_psnr_u,
                    rep.mean_psnr_rec if rep.mean_psnr_rec is not None else ""]
        rows.append(row)
    if out_path is not None:
        with open(out_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in rows:
                writer.writerow([_fmt(v) for v in row])
    return header, rows


def export_probability_profile(p_u: ProbabilityMatrix):
    """DC-centered radial mean profile and per-axis marginals.

    Returns (radial, row_marginal, col_marginal); the radial profile has
    ceil(diagonal/2) bins, with empty bins reported as nan.
    """
    m, n = p_u.m, p_u.n
    bins = math.ceil(math.hypot(m, n) / 2.0)
    yy, xx = np.mgrid[0:m, 0:n]
    r = np.hypot(yy - m // 2, xx - n // 2).ravel()
    idx = np.minimum(np.floor(r).astype(np.int64), bins - 1)
    vals = p_u.probs.ravel()
    sums = np.bincount(idx, weights=vals, minlength=bins)
    counts = np.bincount(idx, minlength=bins)
    radial = np.full(bins, np.nan)
    nz = counts > 0
    radial[nz] = sums[nz] / counts[nz]
    return radial, p_u.probs.mean(axis=1), p_u.probs.mean(axis=0)


def save_probability_profile(path, p_u: ProbabilityMatrix):
    """Profile CSV with kind/index/value rows (kinds: radial, row, col)."""
    radial, row_m, col_m = export_probability_profile(p_u)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["kind", "index", "value"])
        for kind, series in (("radial", radial), ("row", row_m), ("col", col_m)):
            for i, v in enumerate(series):
                writer.writerow([kind, i, "" if math.isnan(v) else f"{v:.12g}"])


def save_training_log(path, log):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_LOG_FIELDS)
        for row in log:
            writer.writerow([_fmt(row[k]) if k != "realized_rate"
                             else f"{row[k]:.4f}" for k in _LOG_FIELDS])


def load_training_log(path):
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != list(_LOG_FIELDS):
            raise ValueError(f"unexpected training-log header in {path}")
        for rec in reader:
            row = {k: float(rec[k]) for k in _LOG_FIELDS}
            row["epoch"] = int(rec["epoch"])
            out.append(row)
    return out


@dataclass
class TrainState:
    """Everything needed to resume training bit-exactly."""

    epoch: int                 # completed update epochs
    p_raw: np.ndarray | None   # pre-projection trainable probabilities
    net: ReconNet | None
    net_opt: AdamState | None
    p_opt: AdamState | None
    log: list
    cfg: TrainConfig


def _save_adam(path, state: AdamState):
    with open(path, "wb") as fh:
        fh.write(_ADAM_MAGIC)
        fh.write(struct.pack("<QI", state.step, len(state.m)))
        for m_arr, v_arr in zip(state.m, state.v):
            fh.write(np.ascontiguousarray(m_arr, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(v_arr, dtype="<f8").tobytes())


def _load_adam(path, templates) -> AdamState:
    with open(path, "rb") as fh:
        if fh.read(4) != _ADAM_MAGIC:
            raise ValueError(f"not an optimizer state file: {path}")
        step, count = struct.unpack("<QI", fh.read(12))
        if count != len(templates):
            raise ValueError(f"optimizer state holds {count} arrays, expected "
                             f"{len(templates)}")
        ms, vs = [], []
        for tpl in templates:
            nbytes = 8 * tpl.size
            ms.append(np.frombuffer(fh.read(nbytes), dtype="<f8").reshape(tpl.shape).copy())
            vs.append(np.frombuffer(fh.read(nbytes), dtype="<f8").reshape(tpl.shape).copy())
    return AdamState(step=step, m=ms, v=vs)


def save_checkpoint(out_dir, state: TrainState, mask: SamplingMask = None):
    """Checkpoint bundle: probabilities, mask snapshot, network, optimizer
    states, config snapshot, and the training log so far."""
    os.makedirs(out_dir, exist_ok=True)
    meta = configparser.ConfigParser()
    meta["checkpoint"] = {"epoch": str(state.epoch),
                          "fixed_mask": str(state.p_raw is None)}
    meta["config"] = {f.name: repr(getattr(state.cfg, f.name))
                      for f in fields(TrainConfig)}
    with open(os.path.join(out_dir, "meta.ini"), "w") as fh:
        meta.write(fh)
    if state.p_raw is not None:
        save_probability(os.path.join(out_dir, "probability.txt"),
                         ProbabilityMatrix(np.clip(state.p_raw, 0.0, 1.0)))
        np.save(os.path.join(out_dir, "probability_raw.npy"), state.p_raw)
        _save_adam(os.path.join(out_dir, "p_opt.bin"), state.p_opt)
    if mask is not None:
        save_mask(os.path.join(out_dir, "mask.txt"), mask)
    if state.net is not None:
        save_network(os.path.join(out_dir, "network.bin"), state.net)
        _save_adam(os.path.join(out_dir, "net_opt.bin"), state.net_opt)
    save_training_log(os.path.join(out_dir, "training_log.csv"), state.log)


def load_checkpoint(out_dir, cfg: TrainConfig, fixed_mask=None) -> TrainState:
    """Restore a bundle written by save_checkpoint.

    The stored config must match `cfg` in every field except max_epochs,
    so a finished run can be extended; extending is bit-identical to having
    trained that long in one go."""
    meta = configparser.ConfigParser()
    read = meta.read(os.path.join(out_dir, "meta.ini"))
    if not read:
        raise FileNotFoundError(f"no checkpoint meta in {out_dir}")
    stored = dict(meta["config"])
    current = {f.name: repr(getattr(cfg, f.name)) for f in fields(TrainConfig)}
    stored.pop("max_epochs", None)
    current.pop("max_epochs", None)
    if stored != current:  # TrainConfig field names are already lowercase
        raise ValueError("checkpoint config does not match the supplied TrainConfig")
    epoch = int(meta["checkpoint"]["epoch"])
    was_fixed = meta["checkpoint"].getboolean("fixed_mask")
    if was_fixed != (fixed_mask is not None):
        raise ValueError("checkpoint fixed-mask mode does not match the call")
    p_raw = p_opt = None
    if not was_fixed:
        p_raw = np.load(os.path.join(out_dir, "probability_raw.npy"))
        p_opt = _load_adam(os.path.join(out_dir, "p_opt.bin"), [p_raw])
    net = net_opt = None
    net_path = os.path.join(out_dir, "network.bin")
    if os.path.exists(net_path):
        net = load_network(net_path)
        net_opt = _load_adam(os.path.join(out_dir, "net_opt.bin"), net.parameters())
    log = load_training_log(os.path.join(out_dir, "training_log.csv"))
    return TrainState(epoch, p_raw, net, net_opt, p_opt, log, cfg)
