"""Deterministic seed derivation for nested randomized stages.

Every randomized stage (split plans, per-tree bootstraps, per-iteration
model refits) derives its own seed from a parent seed and an index, so
results never depend on scheduling or on how many workers ran the job.
"""

_MASK = (1 << 64) - 1


def mix64(seed: int, index: int) -> int:
    """Derive a child seed from ``(seed, index)``.

    splitmix64 finalizer applied to the seed advanced along the
    golden-gamma stream by ``index + 1`` positions; distinct indices give
    uncorrelated child streams.
    """
    z = (seed + 0x9E3779B97F4A7C15 * (index + 1)) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return (z ^ (z >> 31)) & _MASK
