"""Supervised training with plateau LR scheduling and early stopping."""

from __future__ import annotations

import csv
import logging
import io
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from cebed.autodiff import ops
from cebed.autodiff.nn import Module
from cebed.autodiff.optim import AdamState, adam_step
from cebed.autodiff.tensor import Tape, Tensor, backward
from cebed.grid import derive_seed, rng_for

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    initial_lr: float = 1e-3
    batch_size: int = 512
    plateau_patience: int = 3
    plateau_factor: float = 0.5
    min_lr: float = 1e-5
    early_stop_patience: int = 10
    max_epochs: int = 100
    seed: int = 0
    improvement_rtol: float = 1e-7

    def __post_init__(self):
        if not 0 < self.plateau_factor < 1:
            raise ValueError("plateau_factor must lie in (0, 1)")
        if self.min_lr <= 0 or self.initial_lr <= 0:
            raise ValueError("learning rates must be positive")
        if self.plateau_patience < 1 or self.early_stop_patience < 1:
            raise ValueError("patiences must be >= 1")
        if self.batch_size < 1 or self.max_epochs < 1:
            raise ValueError("batch_size and max_epochs must be >= 1")


def improved(value: float, best: float, rtol: float = 1e-7) -> bool:
    """Strict decrease of the best-so-far by at least ``rtol`` relative."""
    if not math.isfinite(best):
        return True
    return value < best - rtol * abs(best)


@dataclass
class PlateauState:
    lr: float
    factor: float = 0.5
    patience: int = 3
    min_lr: float = 1e-5
    rtol: float = 1e-7
    best: float = math.inf
    stagnant: int = 0


def plateau_step(state: PlateauState, val_loss: float) -> float:
    """Halve the learning rate after ``patience`` non-improving epochs."""
    if not math.isfinite(val_loss):
        raise ValueError("validation loss must be finite")
    if improved(val_loss, state.best, state.rtol):
        state.best = val_loss
        state.stagnant = 0
    else:
        state.stagnant += 1
        if state.stagnant >= state.patience:
            state.lr = max(state.lr * state.factor, state.min_lr)
            state.stagnant = 0
    return state.lr


@dataclass
class EarlyStopping:
    patience: int = 10
    rtol: float = 1e-7
    best: float = math.inf
    best_epoch: int = -1
    waited: int = 0

    def step(self, epoch: int, val_loss: float) -> bool:
        """Record one epoch; True when training should stop."""
        if improved(val_loss, self.best, self.rtol):
            self.best, self.best_epoch, self.waited = val_loss, epoch, 0
            return False
        self.waited += 1
        return self.waited >= self.patience


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    lr: float
    wall_time: float = field(default=0.0, compare=False)


@dataclass
class TrainHistory:
    epochs: list = field(default_factory=list)
    best_epoch: int = -1
    stopped_early: bool = False

    @property
    def val_losses(self) -> list[float]:
        return [e.val_loss for e in self.epochs]

    @property
    def train_losses(self) -> list[float]:
        return [e.train_loss for e in self.epochs]

    @property
    def lrs(self) -> list[float]:
        return [e.lr for e in self.epochs]

    @property
    def best_val_loss(self) -> float:
        return self.epochs[self.best_epoch].val_loss if self.epochs else math.inf

    def to_csv(self, include_time: bool = True) -> str:
        buf = io.StringIO()
        names = ["epoch", "train_loss", "val_loss", "lr"] + (["wall_time"] if include_time else [])
        writer = csv.DictWriter(buf, fieldnames=names, lineterminator="\n")
        writer.writeheader()
        for e in self.epochs:
            row = asdict(e)
            if not include_time:
                row.pop("wall_time")
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
        return buf.getvalue()


def validation_mse(model: Module, x: np.ndarray, y: np.ndarray, batch_size: int = 512) -> float:
    """MSE over ``(x, y)`` accumulated in float64."""
    dtype = next(iter(model.parameters().values())).dtype
    total = 0.0
    for start in range(0, len(x), batch_size):
        pred = model(Tensor(x[start : start + batch_size], dtype=dtype)).data.astype(np.float64)
        diff = pred - y[start : start + batch_size]
        total += float(np.sum(diff * diff))
    return total / y.size


def train(
    model: Module,
    train_data: tuple,
    val_data: tuple,
    config: TrainConfig = TrainConfig(),
    val_loss_fn=None,
    on_epoch=None,
) -> tuple[Module, TrainHistory]:
    """Fit ``model`` on ``(inputs, targets)`` arrays and restore the
    parameters of the best validation epoch.

    ``val_loss_fn(model, epoch) -> float`` overrides the validation MSE.
    """
    x_tr, y_tr = (np.asarray(a) for a in train_data)
    x_va, y_va = (np.asarray(a) for a in val_data)
    if len(x_tr) == 0 or len(x_va) == 0:
        raise ValueError("train and validation splits must be non-empty")
    if len(x_tr) != len(y_tr) or len(x_va) != len(y_va):
        raise ValueError("inputs and targets differ in length")
    params = model.parameters()
    dtype = next(iter(params.values())).dtype
    adam = AdamState(lr=config.initial_lr)
    plateau = PlateauState(
        config.initial_lr, config.plateau_factor, config.plateau_patience, config.min_lr, config.improvement_rtol
    )
    stopper = EarlyStopping(config.early_stop_patience, config.improvement_rtol)
    history = TrainHistory()
    best_state = model.state_dict()

    for epoch in range(config.max_epochs):
        t0 = time.perf_counter()
        order = rng_for(derive_seed(config.seed, "batches", epoch)).permutation(len(x_tr))
        lr_used = adam.lr
        total, count = 0.0, 0
        for b, start in enumerate(range(0, len(order), config.batch_size)):
            idx = order[start : start + config.batch_size]
            with Tape() as tape:
                loss = ops.mse_loss(model(Tensor(x_tr[idx], dtype=dtype)), Tensor(y_tr[idx], dtype=dtype))
            value = float(loss.data)
            if not math.isfinite(value):
                raise FloatingPointError(f"non-finite training loss at epoch {epoch}, batch {b}")
            grads = backward(tape, loss, params)
            new, adam = adam_step({k: p.data for k, p in params.items()}, grads, adam)
            for k, p in params.items():
                p.data = new[k]
            total += value * len(idx)
            count += len(idx)

        if val_loss_fn is not None:
            val = float(val_loss_fn(model, epoch))
        else:
            val = validation_mse(model, x_va, y_va, config.batch_size)
        if not math.isfinite(val):
            raise FloatingPointError(f"non-finite validation loss at epoch {epoch}")
        history.epochs.append(EpochRecord(epoch, total / count, val, lr_used, time.perf_counter() - t0))
        stop = stopper.step(epoch, val)
        if stopper.best_epoch == epoch:
            best_state = model.state_dict()
        adam.lr = plateau_step(plateau, val)
        log.debug("epoch %d train %.5g val %.5g lr %.2e", epoch, total / count, val, lr_used)
        if on_epoch is not None:
            on_epoch(history.epochs[-1])
        if stop:
            history.stopped_early = True
            break

    history.best_epoch = stopper.best_epoch
    model.load_state_dict(best_state)
    return model, history
