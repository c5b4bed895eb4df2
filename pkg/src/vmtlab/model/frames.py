"""Uniform frame subsampling."""


def sample_frames(T: int, k: int = 12) -> list[int]:
    """Indices of up to k frames sampled uniformly from a clip of T frames.

    Short clips are kept whole.  Longer clips take the frame at the center of
    each of k equal strata, which keeps the indices strictly increasing.
    """
    if T < 1:
        raise ValueError(f"clip must have at least one frame, got T={T}")
    if k < 1:
        raise ValueError(f"cannot sample fewer than one frame, got k={k}")
    if T <= k:
        return list(range(T))
    return [int((j + 0.5) * T / k) for j in range(k)]
