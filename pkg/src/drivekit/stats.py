"""Dataset statistics: caption word frequency, task and camera-view shares."""

from __future__ import annotations

from collections import Counter
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .lang import tokenize
from .model import SURROUND, VIEWS, Task, TaskSample


def word_frequency(captions: Iterable[str], top_n: Optional[int] = None) -> List[Tuple[str, int]]:
    """Token counts sorted by count descending, then token ascending.

    ``top_n=None`` keeps every token.
    """
    if top_n is not None and top_n < 1:
        raise ValueError(f"top_n must be >= 1, got {top_n}")
    counts: Counter = Counter()
    for text in captions:
        counts.update(tokenize(text))
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return ranked if top_n is None else ranked[:top_n]


def _fractions(counts: Counter, order: Sequence[str]) -> Dict[str, float]:
    total = sum(counts.values())
    return {k: counts[k] / total for k in order if counts.get(k)}


def task_distribution(samples: Sequence[TaskSample]) -> Dict[str, float]:
    if not samples:
        raise ValueError("task distribution of an empty sample set is undefined")
    counts = Counter(s.task.value for s in samples)
    return _fractions(counts, [t.value for t in Task])


def view_distribution(samples: Sequence[TaskSample]) -> Tuple[Dict[str, float], int]:
    """Per-camera shares over single-view samples, plus the surround count.

    Surround-view samples (planning, dense caption) are excluded from the
    fractions and reported as the second element.
    """
    surround = sum(1 for s in samples if s.view == SURROUND)
    counts = Counter(s.view for s in samples if s.view != SURROUND)
    if not counts:
        raise ValueError("no single-view samples to distribute")
    return _fractions(counts, VIEWS), surround
