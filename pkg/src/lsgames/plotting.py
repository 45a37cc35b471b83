"""Report figures.  Everything renders off-screen to PNG files."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

_META = {"Software": None}


def _save(fig, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata=_META)
    plt.close(fig)
    return path


def stage_sizes(stages: Sequence[Mapping], path: Path) -> Path:
    """Bar chart of generator and relation counts per pipeline stage."""
    names = [s["stage"] for s in stages]
    gens = [s.get("generators", 0) for s in stages]
    rels = [s.get("relations", 0) for s in stages]
    fig, ax = plt.subplots(figsize=(6, 3.5))
    xs = range(len(names))
    ax.bar([x - 0.2 for x in xs], gens, width=0.4, label="generators / columns")
    ax.bar([x + 0.2 for x in xs], rels, width=0.4, label="relations / rows")
    ax.set_xticks(list(xs), names)
    ax.set_yscale("log")
    ax.set_ylabel("count")
    ax.legend(frameon=False)
    return _save(fig, path)


def area_blowup(labels: Sequence[str], areas: Sequence[int], bounds: Sequence[int], path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    xs = range(len(labels))
    ax.plot(xs, areas, "o-", label="measured area")
    ax.plot(xs, bounds, "s--", label="bound")
    ax.set_xticks(list(xs), labels)
    ax.set_yscale("log")
    ax.set_ylabel("certificate area")
    ax.legend(frameon=False)
    return _save(fig, path)


def npa_bounds(levels: Sequence[int], values: Sequence[float], lower: Mapping[str, float], path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(levels, values, "o-", label="moment bound")
    for k, (name, v) in enumerate(sorted(lower.items())):
        ax.axhline(v, ls=":", color=f"C{k + 1}", label=name)
    ax.set_xticks(list(levels))
    ax.set_xlabel("level")
    ax.set_ylabel("value")
    ax.legend(frameon=False)
    return _save(fig, path)


def sampler_frequencies(labels: Sequence[str], observed: Sequence[float], expected: Sequence[float],
                        sigma: Sequence[float], path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 3.5))
    xs = range(len(labels))
    ax.errorbar(xs, observed, yerr=[3 * s for s in sigma], fmt="o", capsize=3, label="observed (3 sigma)")
    ax.plot(xs, expected, "k_", markersize=18, label="exact")
    ax.set_xticks(list(xs), labels, rotation=45, ha="right")
    ax.set_ylabel("frequency")
    ax.legend(frameon=False)
    return _save(fig, path)
