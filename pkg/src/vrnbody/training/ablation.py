"""Train several network variants on one dataset and tabulate their IoU.

Each row reports the final-tap IoU at mid-training and at the end, next to
the published full-scale numbers for the same variant. The report is a TSV,
an aligned text table and a bar chart.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import UsageError, VrnError
from .trainer import load_samples, train

# published full-scale IoU (%) per variant: (at mid-training, at the end)
PUBLISHED_IOU = {
    "multistack": (61.1, 68.3),
    "vrn-guided": (61.6, 63.9),
    "landmarks-only": (58.6, 61.0),
    "image-only": (46.8, 48.3),
    "mask-only": (52.8, 53.0),
    "conv3d-flat": (57.3, 61.6),
    "old-residual": (60.5, 66.1),
}

COLUMNS = ("label", "variant", "seed", "epochs", "iou_mid", "iou_final", "published_mid", "published_final", "status")


@dataclass
class AblationRow:
    label: str
    variant: str
    seed: int
    epochs: int
    iou_mid: float | None
    iou_final: float | None
    status: str = "ok"

    @property
    def published(self):
        return PUBLISHED_IOU.get(self.variant, (None, None))

    def cells(self):
        def num(v, scale=1.0):
            return "-" if v is None else f"{v * scale:.6g}"

        mid, final = self.published
        return [self.label, self.variant, str(self.seed), str(self.epochs), num(self.iou_mid), num(self.iou_final),
                num(mid), num(final), self.status]


class AblationReport:
    def __init__(self, rows):
        self.rows = list(rows)

    def __len__(self):
        return len(self.rows)

    def format_tsv(self):
        lines = ["\t".join(COLUMNS)] + ["\t".join(r.cells()) for r in self.rows]
        return "\n".join(lines) + "\n"

    def format_text(self):
        table = [list(COLUMNS)] + [r.cells() for r in self.rows]
        widths = [max(len(row[i]) for row in table) for i in range(len(COLUMNS))]
        lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in table]
        lines.insert(1, "  ".join("-" * w for w in widths))
        lines.append("")
        lines.append("iou_* are final-tap validation IoU at threshold 0.5 (fractions);")
        lines.append("published_* are full-scale reference results in percent, for direction only.")
        return "\n".join(lines) + "\n"

    def mean_final(self):
        """Mean final IoU per variant over successful rows."""
        groups = {}
        for r in self.rows:
            if r.iou_final is not None:
                groups.setdefault(r.variant, []).append(r.iou_final)
        return {v: float(np.mean(s)) for v, s in groups.items()}

    def save(self, out_dir, stem="ablation"):
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        tsv = out_dir / f"{stem}.tsv"
        txt = out_dir / f"{stem}.txt"
        png = out_dir / f"{stem}.png"
        tsv.write_text(self.format_tsv())
        txt.write_text(self.format_text())
        plot_report(self, png)
        return tsv, txt, png


def plot_report(report, path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    variants = list(dict.fromkeys(r.variant for r in report.rows))
    fig, ax = plt.subplots(figsize=(1.4 * len(variants) + 3, 4))
    xs = np.arange(len(variants))
    for i, v in enumerate(variants):
        finals = [r.iou_final for r in report.rows if r.variant == v and r.iou_final is not None]
        if finals:
            ax.bar(i - 0.2, np.mean(finals) * 100, 0.4, color="tab:blue", label="this run" if i == 0 else None)
            ax.scatter(np.full(len(finals), i - 0.2), np.array(finals) * 100, color="k", s=10, zorder=3)
        pub = PUBLISHED_IOU.get(v)
        if pub:
            ax.bar(i + 0.2, pub[1], 0.4, color="tab:gray", label="published" if i == 0 else None)
    ax.set_xticks(xs)
    ax.set_xticklabels(variants, rotation=20, ha="right")
    ax.set_ylabel("final-tap IoU (%)")
    ax.set_ylim(0, 100)
    ax.legend(loc="upper right")
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)


def _check_shared(configs):
    manifests = {str(c.manifest) for c in configs}
    epochs = {c.epochs for c in configs}
    if len(manifests) > 1 or len(epochs) > 1:
        raise UsageError("ablation configs must share the dataset manifest and the epoch count")


def run_ablation(configs, labels=None, progress=None):
    """Train each config; a failed run becomes a row with its error as status."""
    configs = list(configs)
    if not configs:
        raise UsageError("ablation needs at least one config")
    _check_shared(configs)
    labels = labels or [f"{c.spec.variant}-s{c.seed}" for c in configs]
    samples = load_samples(configs[0].manifest)
    rows = []
    for label, config in zip(labels, configs):
        mid_epoch = config.epochs // 2 - 1
        try:
            log = train(config, samples=samples, progress=progress)
        except (VrnError, FloatingPointError, OSError) as err:
            rows.append(AblationRow(label, config.spec.variant, config.seed, config.epochs, None, None,
                                    f"failed: {type(err).__name__}: {err}".replace("\t", " ").replace("\n", " ")))
            continue
        mid = log.iou_at(mid_epoch)
        final = log.last_iou()
        rows.append(AblationRow(label, config.spec.variant, config.seed, config.epochs,
                                None if mid is None else mid[-1], None if final is None else final[-1]))
    return AblationReport(rows)
