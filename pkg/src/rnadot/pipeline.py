"""End-to-end orchestration: batch sampling, training, and evaluation.

Class encoding is fixed: different-family = 0, same-family = 1. All
randomness derives from the run seed through hashed substreams, so a
run's log and checkpoints are reproducible byte for byte.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import LABEL_DIFFERENT, LABEL_SAME, DatasetManifest, PairRecord
from .imaging import read_pgm
from .nn import (
    Model,
    ModelSpec,
    TrainConfig,
    init_model,
    load_checkpoint,
    lr_schedule,
    save_checkpoint,
    sgd_momentum_step,
    zero_velocity,
)
from .rng import substream

CLASS_DIFFERENT = 0
CLASS_SAME = 1

#: fixed evaluation chunk so metric computation order never varies
EVAL_BATCH = 256


def record_class(rec: PairRecord) -> int:
    return CLASS_SAME if rec.label == LABEL_SAME else CLASS_DIFFERENT


@dataclass
class Metrics:
    """Per-class accuracies and their arithmetic mean."""

    acc_diff: float
    acc_same: float
    avg: float

    def __post_init__(self):
        for name in ("acc_diff", "acc_same", "avg"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} = {v} outside [0, 1]")

    @classmethod
    def from_counts(
        cls, correct_diff: int, n_diff: int, correct_same: int, n_same: int
    ) -> "Metrics":
        """Build from integer counts.

        The average is computed as one exact integer ratio,
        (cd*ns + cs*nd) / (2*nd*ns), so it is the correctly rounded
        mean of the two class accuracies rather than the float sum
        halved; the two can differ by one ulp.
        """
        if n_diff < 1 or n_same < 1:
            raise ValueError("both classes must be non-empty")
        if not (0 <= correct_diff <= n_diff and 0 <= correct_same <= n_same):
            raise ValueError("correct counts outside [0, n]")
        avg = (correct_diff * n_same + correct_same * n_diff) / (2 * n_diff * n_same)
        return cls(
            acc_diff=correct_diff / n_diff,
            acc_same=correct_same / n_same,
            avg=avg,
        )

    def as_dict(self) -> dict:
        return {"acc_diff": self.acc_diff, "acc_same": self.acc_same, "avg": self.avg}


def avg_class_accuracy(acc_diff: float, acc_same: float) -> float:
    return (acc_diff + acc_same) / 2


# ---------------------------------------------------------------------------
# Image access

class ImageStore:
    """Loads record images as (1, S, S) float64 arrays, cached by path."""

    def __init__(self, root: Path, side: int):
        self.root = Path(root)
        self.side = side
        self._cache: dict[str, np.ndarray] = {}

    def load(self, rel_path: str) -> np.ndarray:
        hit = self._cache.get(rel_path)
        if hit is None:
            img = read_pgm((self.root / rel_path).read_bytes())
            if img.side != self.side:
                raise ValueError(
                    f"{rel_path}: image side {img.side} does not match "
                    f"manifest side {self.side}"
                )
            hit = self._cache[rel_path] = img.pixels[None, :, :]
        return hit

    def batch(self, records: list[PairRecord]) -> tuple[np.ndarray, np.ndarray]:
        x = np.stack([self.load(r.image_path) for r in records])
        y = np.array([record_class(r) for r in records], dtype=np.int64)
        return x, y


# ---------------------------------------------------------------------------
# Sampling

def split_pools(records: list[PairRecord]) -> tuple[list[PairRecord], list[PairRecord]]:
    """(different-class pool, same-class pool)."""
    diff = [r for r in records if r.label == LABEL_DIFFERENT]
    same = [r for r in records if r.label == LABEL_SAME]
    return diff, same


def sample_batch(
    records: list[PairRecord], cfg: TrainConfig, rng: np.random.Generator
) -> list[PairRecord]:
    """Ratio-controlled draw with replacement from the two class pools,
    order shuffled."""
    diff, same = split_pools(records)
    parts = cfg.ratio[0] + cfg.ratio[1]
    n_diff = cfg.batch * cfg.ratio[0] // parts
    n_same = cfg.batch - n_diff
    if n_diff and not diff:
        raise ValueError("different-class pool is empty")
    if n_same and not same:
        raise ValueError("same-class pool is empty")
    picks = [diff[i] for i in rng.integers(len(diff), size=n_diff)]
    picks += [same[i] for i in rng.integers(len(same), size=n_same)]
    return [picks[i] for i in rng.permutation(len(picks))]


# ---------------------------------------------------------------------------
# Evaluation

def evaluate_model(
    model: Model, records: list[PairRecord], store: ImageStore
) -> Metrics:
    """Argmax the 2-class output per record, count per class exactly."""
    diff, same = split_pools(records)
    if not diff or not same:
        raise ValueError("evaluation split must contain both classes")
    counts = {CLASS_DIFFERENT: [0, len(diff)], CLASS_SAME: [0, len(same)]}
    ordered = diff + same
    for start in range(0, len(ordered), EVAL_BATCH):
        chunk = ordered[start : start + EVAL_BATCH]
        x, y = store.batch(chunk)
        pred = model.predict(x)
        for cls in (CLASS_DIFFERENT, CLASS_SAME):
            counts[cls][0] += int(((pred == y) & (y == cls)).sum())
    return Metrics.from_counts(
        counts[CLASS_DIFFERENT][0],
        counts[CLASS_DIFFERENT][1],
        counts[CLASS_SAME][0],
        counts[CLASS_SAME][1],
    )


def training_accuracy(
    model: Model, records: list[PairRecord], store: ImageStore
) -> float:
    """Plain fraction correct over the given records."""
    correct = 0
    for start in range(0, len(records), EVAL_BATCH):
        chunk = records[start : start + EVAL_BATCH]
        x, y = store.batch(chunk)
        correct += int((model.predict(x) == y).sum())
    return correct / len(records)


# ---------------------------------------------------------------------------
# Training

@dataclass
class TrainResult:
    final: Model
    best: Model
    best_iteration: int | None
    best_metrics: Metrics | None
    log_text: str


def train(
    manifest: DatasetManifest,
    spec: ModelSpec,
    cfg: TrainConfig,
    data_root: Path,
    out_dir: Path | None = None,
) -> TrainResult:
    """Momentum-SGD training with periodic validation-based selection.

    Validates on the full val split every val_every iterations (and
    after the last iteration); keeps the checkpoint with the best
    validation average class accuracy, earliest iteration winning ties.
    With no usable val split the final model doubles as best. Writes
    best.ckpt, final.ckpt, and train_log.jsonl when out_dir is given.
    """
    store = ImageStore(Path(data_root), manifest.image_side)
    train_records = manifest.split_records("train")
    if not train_records:
        raise ValueError("no train records in manifest")
    val_diff, val_same = split_pools(manifest.split_records("val"))
    can_validate = bool(val_diff) and bool(val_same)
    val_records = val_diff + val_same

    model = init_model(spec, cfg.seed)
    velocity = zero_velocity(model)
    lines = []
    best_blob: bytes | None = None
    best_metrics: Metrics | None = None
    best_iteration: int | None = None
    val_every = cfg.effective_val_every

    def validate(iteration: int) -> None:
        nonlocal best_blob, best_metrics, best_iteration
        metrics = evaluate_model(model, val_records, store)
        is_best = best_metrics is None or metrics.avg > best_metrics.avg
        if is_best:
            best_blob = save_checkpoint(model)
            best_metrics = metrics
            best_iteration = iteration
        lines.append(
            json.dumps(
                {"iteration": iteration, "event": "val", "best": is_best}
                | metrics.as_dict(),
                sort_keys=True,
                separators=(",", ":"),
            )
        )

    for i in range(cfg.iterations):
        lr = lr_schedule(i, cfg)
        batch = sample_batch(train_records, cfg, substream(cfg.seed, "batch", i))
        x, y = store.batch(batch)
        loss, grads = model.loss_and_grads(x, y)
        sgd_momentum_step(model.params, grads, velocity, lr, cfg.momentum)
        lines.append(
            json.dumps(
                {"iteration": i, "lr": lr, "loss": loss},
                sort_keys=True,
                separators=(",", ":"),
            )
        )
        if can_validate and ((i + 1) % val_every == 0 or i == cfg.iterations - 1):
            validate(i)

    final_blob = save_checkpoint(model)
    if best_blob is None:
        best_blob = final_blob
    log_text = "".join(line + "\n" for line in lines)
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "best.ckpt").write_bytes(best_blob)
        (out_dir / "final.ckpt").write_bytes(final_blob)
        (out_dir / "train_log.jsonl").write_text(log_text)
    return TrainResult(
        final=model,
        best=load_checkpoint(best_blob),
        best_iteration=best_iteration,
        best_metrics=best_metrics,
        log_text=log_text,
    )
