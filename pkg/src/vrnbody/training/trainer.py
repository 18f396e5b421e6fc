"""Training loop, run logs, checkpoints and evaluation.

Every random choice is a function of ``(seed, epoch)`` or ``(seed, epoch,
sample index)``: the train/eval split, the batch order and the per-sample
augmentation. Nothing depends on how many epochs ran in this process, so a
run resumed from a checkpoint continues exactly as the uninterrupted run.
"""

from __future__ import annotations

import hashlib
import math
import time
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from ..autodiff.checkpoint import load_checkpoint, save_checkpoint
from ..autodiff.optim import OptimizerState, rmsprop_step
from ..autodiff.tensor import Tape, Tensor, backward
from ..config import format_config, parse_bool, parse_config, read_config
from ..encoding.sample import assemble_input, augment_sample
from ..errors import ConfigurationError, NonFiniteLossError, ParseError, UsageError
from ..nn.network import NetworkSpec, build_network
from ..synth.dataset import Manifest
from .loss import multitap_loss

CHECKPOINT_DIR = "checkpoints"
LATEST = "latest.vxfm"
RUNLOG = "runlog.tsv"
NETWORK_CONFIG = "network.cfg"
TRAIN_CONFIG = "train.cfg"
RMSPROP_DECAY = 0.99
RMSPROP_EPSILON = 1e-8

# the training seed also seeds the network initialization
_SPEC_KEYS = {f.name for f in fields(NetworkSpec)} - {"seed"}


@dataclass(frozen=True)
class TrainConfig:
    spec: NetworkSpec
    manifest: str
    epochs: int = 60
    batch_size: int = 6
    lr_initial: float = 1e-4
    lr_reduced: float = 1e-5
    lr_switch_epoch: int | None = None  # default: a third of the epochs
    seed: int = 0
    checkpoint_every: int = 1
    eval_every: int = 1
    eval_fraction: float = 0.1
    augment: bool = True
    normalize_loss: bool = True
    threshold: float = 0.5
    run_dir: str = "run"

    def __post_init__(self):
        if self.spec.seed != self.seed:
            object.__setattr__(self, "spec", replace(self.spec, seed=self.seed))
        self.validate()

    @property
    def switch_epoch(self):
        if self.lr_switch_epoch is not None:
            return self.lr_switch_epoch
        # at least one epoch runs at the initial rate
        return max(1, int(round(self.epochs / 3)))

    def validate(self):
        if self.epochs < 1:
            raise ConfigurationError(f"epochs must be positive, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigurationError(f"batch size must be positive, got {self.batch_size}")
        if not self.lr_initial > self.lr_reduced > 0:
            raise ConfigurationError(
                f"learning rates need lr_initial > lr_reduced > 0, got {self.lr_initial}, {self.lr_reduced}")
        if not 0 <= self.switch_epoch <= self.epochs:
            raise ConfigurationError(f"lr switch epoch {self.switch_epoch} outside [0, {self.epochs}]")
        if not 0 < self.eval_fraction < 1:
            raise ConfigurationError(f"eval fraction must be in (0, 1), got {self.eval_fraction}")
        if self.checkpoint_every < 1 or self.eval_every < 1:
            raise ConfigurationError("checkpoint and eval cadence must be positive")

    def learning_rate(self, epoch):
        """Two-stage schedule on 0-based epochs: reduced from ``switch_epoch`` on."""
        return self.lr_initial if epoch < self.switch_epoch else self.lr_reduced

    def replace(self, **changes):
        return replace(self, **changes)

    def to_mapping(self):
        values = parse_config(self.spec.to_config())
        del values["seed"]
        for f in fields(self):
            if f.name == "spec":
                continue
            v = getattr(self, f.name)
            values[f.name] = "auto" if v is None else (str(v).lower() if isinstance(v, bool) else str(v))
        return values

    def to_config(self):
        return format_config(self.to_mapping())

    def digest(self):
        """Hash of everything that affects the numbers (the run directory does not)."""
        values = self.to_mapping()
        values.pop("run_dir")
        return hashlib.sha256(format_config(values).encode()).hexdigest()[:16]

    @classmethod
    def from_mapping(cls, raw):
        raw = dict(raw)
        known = {f.name for f in fields(cls)} - {"spec"}
        unknown = sorted(set(raw) - known - _SPEC_KEYS)
        if unknown:
            raise ConfigurationError(f"unknown config keys: {', '.join(unknown)}")
        spec_raw = {k: raw.pop(k) for k in list(raw) if k in _SPEC_KEYS}
        if "manifest" not in raw:
            raise ConfigurationError("training config needs a manifest")
        spec = NetworkSpec.from_mapping(spec_raw)
        kwargs = {}
        for f in fields(cls):
            if f.name not in raw:
                continue
            value = raw[f.name]
            try:
                if f.name in ("manifest", "run_dir"):
                    kwargs[f.name] = str(value)
                elif f.name in ("augment", "normalize_loss"):
                    kwargs[f.name] = parse_bool(value)
                elif f.name == "lr_switch_epoch":
                    kwargs[f.name] = None if str(value) == "auto" else int(value)
                elif f.name in ("lr_initial", "lr_reduced", "eval_fraction", "threshold"):
                    kwargs[f.name] = float(value)
                else:
                    kwargs[f.name] = int(value)
            except ValueError:
                raise ConfigurationError(f"bad value for {f.name}: {value!r}") from None
        return cls(spec=spec, **kwargs)

    @classmethod
    def load(cls, path):
        return cls.from_mapping(read_config(path))


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    learning_rate: float
    iou: tuple | None = None  # one entry per supervised tap, when evaluated
    seconds: float = 0.0
    config: str = ""

    def same_numbers(self, other, tolerance=0.0):
        if (self.epoch, self.learning_rate, self.config) != (other.epoch, other.learning_rate, other.config):
            return False
        if abs(self.loss - other.loss) > tolerance:
            return False
        if (self.iou is None) != (other.iou is None):
            return False
        return self.iou is None or np.allclose(self.iou, other.iou, rtol=0, atol=tolerance)

    def progress_line(self):
        line = f"epoch={self.epoch} loss={self.loss:.6g} lr={self.learning_rate:.6g}"
        if self.iou is not None:
            line += " iou=" + ",".join(f"{v:.6g}" for v in self.iou)
        return line


RUNLOG_FIELDS = ("epoch", "loss", "lr", "iou", "seconds", "config")


@dataclass
class RunLog:
    """One record per epoch; ``seconds`` is wall-clock and excluded from comparisons."""

    records: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]

    def __eq__(self, other):
        return isinstance(other, RunLog) and self.matches(other)

    def matches(self, other, tolerance=0.0):
        return len(self) == len(other) and all(a.same_numbers(b, tolerance) for a, b in zip(self, other))

    @property
    def losses(self):
        return [r.loss for r in self.records]

    def last_iou(self):
        for r in reversed(self.records):
            if r.iou is not None:
                return r.iou
        return None

    def iou_at(self, epoch):
        for r in self.records:
            if r.epoch == epoch:
                return r.iou
        return None

    def format(self):
        lines = ["\t".join(RUNLOG_FIELDS)]
        for r in self.records:
            iou = "-" if r.iou is None else ",".join(repr(float(v)) for v in r.iou)
            lines.append("\t".join([str(r.epoch), repr(float(r.loss)), repr(float(r.learning_rate)),
                                    iou, f"{r.seconds:.3f}", r.config]))
        return "\n".join(lines) + "\n"

    def save(self, path):
        Path(path).write_text(self.format())

    @classmethod
    def parse(cls, text, path=None):
        records = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip() or lineno == 1 and line.startswith("epoch"):
                continue
            parts = line.split("\t")
            if len(parts) != len(RUNLOG_FIELDS):
                raise ParseError(f"run log line needs {len(RUNLOG_FIELDS)} fields", lineno, path)
            try:
                iou = None if parts[3] == "-" else tuple(float(v) for v in parts[3].split(","))
                records.append(EpochRecord(int(parts[0]), float(parts[1]), float(parts[2]), iou,
                                           float(parts[4]), parts[5]))
            except ValueError:
                raise ParseError("bad number in run log", lineno, path) from None
        return cls(records)

    @classmethod
    def load(cls, path):
        path = Path(path)
        return cls.parse(path.read_text(), str(path))


# -- data

def split_indices(count, fraction, seed):
    """Deterministic ``(train, eval)`` index arrays; eval gets ``ceil(fraction * count)`` samples."""
    if count < 2:
        raise UsageError(f"need at least two samples to split, got {count}")
    n_eval = min(count - 1, max(1, math.ceil(fraction * count)))
    order = np.random.default_rng([seed, 0x5EED]).permutation(count)
    return np.sort(order[n_eval:]), np.sort(order[:n_eval])


def load_samples(manifest):
    if isinstance(manifest, (str, Path)):
        manifest = Manifest.load(manifest)
    if not len(manifest):
        raise UsageError("manifest lists no samples")
    return [manifest.load_sample(e) for e in manifest]


def target_volume(sample):
    """Target in the network's ``D, H, W`` output layout."""
    return np.ascontiguousarray(sample.target.values.transpose(2, 1, 0), dtype=np.float32)


def batch_order(train_indices, epoch, seed):
    return np.random.default_rng([seed, epoch]).permutation(train_indices)


def augmentation_rng(seed, epoch, index):
    return np.random.default_rng([seed, epoch, int(index), 0xA11])


def make_batch(samples, indices, variant, seed=None, epoch=None, augment=True):
    xs, ts = [], []
    for i in indices:
        s = samples[i]
        if augment:
            s = augment_sample(s, augmentation_rng(seed, epoch, i))
        xs.append(assemble_input(variant, s))
        ts.append(target_volume(s))
    return np.stack(xs), np.stack(ts)


# -- evaluation

def batch_iou(pred, target, threshold=0.5):
    """Per-sample IoU of ``pred >= threshold`` against binary ``target`` (both empty -> 1)."""
    p = pred >= threshold
    t = target >= 0.5
    axes = tuple(range(1, p.ndim))
    inter = np.logical_and(p, t).sum(axis=axes)
    union = np.logical_or(p, t).sum(axis=axes)
    return np.where(union > 0, inter / np.maximum(union, 1), 1.0)


def evaluate(network, samples, threshold=0.5, batch_size=16, variant=None):
    """Mean IoU per supervised tap over ``samples`` (a list of Samples or a Manifest)."""
    if isinstance(samples, (Manifest, str, Path)):
        samples = load_samples(samples)
    samples = list(samples)
    if not samples:
        raise UsageError("cannot evaluate on an empty sample set")
    variant = variant or network.spec.variant
    totals = None
    for start in range(0, len(samples), batch_size):
        idx = range(start, min(start + batch_size, len(samples)))
        x, t = make_batch(samples, idx, variant, augment=False)
        preds = network.predict(x)
        scores = [batch_iou(p, t, threshold).sum() for p in preds]
        totals = scores if totals is None else [a + b for a, b in zip(totals, scores)]
    return tuple(float(v / len(samples)) for v in totals)


# -- checkpoints

def checkpoint_arrays(network, optimizer, next_epoch):
    arrays = {}
    for name, p in network.named_parameters().items():
        arrays[f"param/{name}"] = p.data
    for name, b in network.named_buffers().items():
        arrays[f"buffer/{name}"] = b
    for name, acc in optimizer.accumulators.items():
        arrays[f"opt/{name}"] = acc
    arrays["meta/epoch"] = np.array(next_epoch, np.float32)
    return arrays


def restore_checkpoint(path, network, optimizer=None):
    """Load weights (and optimizer state) in place; returns the next epoch to run."""
    arrays = load_checkpoint(path)
    state = {}
    for key, value in arrays.items():
        kind, _, name = key.partition("/")
        if kind in ("param", "buffer"):
            state[name] = value
        elif kind == "opt" and optimizer is not None:
            optimizer.accumulators[name] = value.copy()
    try:
        network.load_state_dict(state)
    except KeyError as err:
        raise ConfigurationError(f"{path}: checkpoint does not match the network: {err}") from None
    return int(arrays.get("meta/epoch", np.zeros(()))) if "meta/epoch" in arrays else 0


def load_trained_network(checkpoint):
    """Network described by the ``network.cfg`` next to ``checkpoint``, with its weights loaded."""
    checkpoint = Path(checkpoint)
    for folder in (checkpoint.parent, checkpoint.parent.parent):
        cfg = folder / NETWORK_CONFIG
        if cfg.exists():
            spec = NetworkSpec.from_config(cfg.read_text(), str(cfg))
            break
    else:
        raise UsageError(f"no {NETWORK_CONFIG} next to {checkpoint}")
    network = build_network(spec)
    restore_checkpoint(checkpoint, network)
    network.eval()
    return network


def _save_state(run_dir, network, optimizer, next_epoch):
    arrays = checkpoint_arrays(network, optimizer, next_epoch)
    path = run_dir / CHECKPOINT_DIR / f"epoch-{next_epoch:04d}.vxfm"
    save_checkpoint(path, arrays)
    save_checkpoint(run_dir / LATEST, arrays)
    return path


# -- training

def _dump_nonfinite(run_dir, diagnostics):
    path = run_dir / "nonfinite.txt"
    path.write_text(format_config({k: v for k, v in diagnostics.items()}))
    return path


def train(config, resume=None, stop_after=None, samples=None, progress=None):
    """Train per ``config``; returns the RunLog.

    ``resume`` is a checkpoint path (or ``True`` for ``<run_dir>/latest.vxfm``).
    ``stop_after`` ends this invocation after that many epochs, which is how
    interrupted runs are simulated. ``progress`` receives each EpochRecord.
    """
    run_dir = Path(config.run_dir)
    (run_dir / CHECKPOINT_DIR).mkdir(parents=True, exist_ok=True)
    samples = load_samples(config.manifest) if samples is None else samples
    train_idx, eval_idx = split_indices(len(samples), config.eval_fraction, config.seed)
    eval_samples = [samples[i] for i in eval_idx]

    spec = config.spec
    network = build_network(spec)
    (run_dir / NETWORK_CONFIG).write_text(network.spec.to_config())
    (run_dir / TRAIN_CONFIG).write_text(config.to_config())
    optimizer = OptimizerState(config.lr_initial, RMSPROP_DECAY, RMSPROP_EPSILON)
    digest = config.digest()

    log = RunLog()
    start = 0
    if resume:
        path = run_dir / LATEST if resume is True else Path(resume)
        start = restore_checkpoint(path, network, optimizer)
        previous = run_dir / RUNLOG
        if previous.exists():
            log = RunLog([r for r in RunLog.load(previous) if r.epoch < start])
    end = config.epochs if stop_after is None else min(config.epochs, start + stop_after)

    params = network.named_parameters()
    for epoch in range(start, end):
        began = time.perf_counter()
        lr = config.learning_rate(epoch)
        optimizer.set_learning_rate(lr)
        network.train()
        total, count = 0.0, 0
        order = batch_order(train_idx, epoch, config.seed)
        for step, first in enumerate(range(0, len(order), config.batch_size)):
            indices = order[first:first + config.batch_size]
            x, t = make_batch(samples, indices, spec.variant, config.seed, epoch, config.augment)
            network.zero_grad()
            with Tape() as tape:
                loss = multitap_loss(network.forward(Tensor(x)), t, config.normalize_loss)
            value = float(loss.data)
            if not math.isfinite(value):
                diagnostics = dict(epoch=epoch, step=step, learning_rate=lr, loss=value,
                                   batch_indices=",".join(str(int(i)) for i in indices))
                dump = _dump_nonfinite(run_dir, diagnostics)
                raise NonFiniteLossError(
                    f"non-finite loss {value} at epoch {epoch} step {step} (lr {lr}); details in {dump}",
                    diagnostics)
            backward(loss, tape)
            rmsprop_step(params, {k: p.grad for k, p in params.items()}, optimizer)
            total += value * len(indices)
            count += len(indices)

        iou = None
        if (epoch + 1) % config.eval_every == 0 or epoch + 1 == config.epochs:
            iou = evaluate(network, eval_samples, config.threshold)
        record = EpochRecord(epoch, total / count, lr, iou, time.perf_counter() - began, digest)
        log.records.append(record)
        if (epoch + 1) % config.checkpoint_every == 0 or epoch + 1 == end:
            _save_state(run_dir, network, optimizer, epoch + 1)
        log.save(run_dir / RUNLOG)
        if progress is not None:
            progress(record)
    return log


def steps_per_epoch(train_count, batch_size):
    return math.ceil(train_count / batch_size)
