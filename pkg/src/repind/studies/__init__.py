"""Built-in case studies."""

from __future__ import annotations

from . import cost, matrices, monoids, multisets, queues

STUDIES = {
    "queues": queues.run,
    "multisets": multisets.run,
    "matrices": matrices.run,
    "monoids": monoids.run,
    "cost": cost.run,
}

__all__ = ["STUDIES", "cost", "matrices", "monoids", "multisets", "queues"]
