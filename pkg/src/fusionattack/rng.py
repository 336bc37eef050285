"""Deterministic random-stream derivation.

All randomness in a run flows from one master seed. Distinct purposes
(profile sampling, timeline labels, training shuffles, ...) get
independent substreams derived from (seed, label...) so that changing
how much one consumer draws never perturbs the others, and so that the
same labels always reproduce the same stream.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["substream", "derive_seed"]

_MASK64 = (1 << 64) - 1


def _label_entropy(label: str) -> int:
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def substream(seed: int, *labels: str) -> np.random.Generator:
    """Return an independent Generator for (seed, labels...).

    Streams with different labels are statistically independent; the
    same (seed, labels) pair always yields an identical stream.
    """
    entropy = [int(seed) & _MASK64] + [_label_entropy(l) for l in labels]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def derive_seed(seed: int, *labels: str) -> int:
    """Collapse (seed, labels...) to a single 64-bit seed.

    Used where a component stores a scalar seed field rather than
    holding a Generator.
    """
    h = hashlib.sha256()
    h.update(int(seed & _MASK64).to_bytes(8, "little"))
    for label in labels:
        h.update(b"\x00")
        h.update(label.encode("utf-8"))
    return int.from_bytes(h.digest()[:8], "little")
