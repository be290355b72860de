"""Independent reference implementations used to check the production code.

Everything here is deliberately written the slow, obvious way and shares
no code with the package: per-frame recounting for activity detection and
a full threshold sweep for the detection metrics.
"""

import math

import numpy as np


def naive_activity_mask(x, threshold_db, frame_len, hop):
    """Boolean per-sample activity mask from a fresh per-frame RMS check."""
    n = len(x)
    active = np.zeros(n, dtype=bool)
    i = 0
    while i * hop < n:
        start = i * hop
        end = min(start + frame_len, n)
        acc = 0.0
        for v in x[start:end]:
            acc += float(v) * float(v)
        level = 20.0 * math.log10(math.sqrt(acc / (end - start)) + 1e-10)
        if level >= threshold_db:
            active[start:end] = True
        i += 1
    return active


def mask_runs(mask):
    """(start, end) runs of True in a boolean mask."""
    runs = []
    start = None
    for i, flag in enumerate(mask):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            runs.append((start, i))
            start = None
    if start is not None:
        runs.append((start, len(mask)))
    return runs


def sweep_points(sims, labels):
    """Operating points recounted at every distinct threshold, O(n^2).

    Same convention as the package: accept at score >= threshold, miss =
    targets strictly below, plus the reject-all endpoint.
    """
    sims = np.asarray(sims, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    target = sims[labels]
    nontarget = sims[~labels]
    points = []
    for thr in sorted(set(sims.tolist())):
        p_miss = float(np.count_nonzero(target < thr)) / target.size
        p_fa = float(np.count_nonzero(nontarget >= thr)) / nontarget.size
        points.append((p_fa, p_miss))
    points.append((0.0, 1.0))
    return points


def sweep_eer(sims, labels):
    """EER from the sweep, linearly interpolated at the miss/fa crossing."""
    points = sweep_points(sims, labels)
    for (fa0, miss0), (fa1, miss1) in zip(points, points[1:]):
        d0 = miss0 - fa0
        d1 = miss1 - fa1
        if d0 == 0.0:
            return miss0
        if d0 < 0.0 <= d1:
            alpha = -d0 / (d1 - d0)
            return miss0 + alpha * (miss1 - miss0)
    return points[-1][1]


def sweep_min_dcf(sims, labels, p_target, c_miss, c_fa):
    best = math.inf
    for p_fa, p_miss in sweep_points(sims, labels):
        cost = c_miss * p_target * p_miss + c_fa * (1.0 - p_target) * p_fa
        best = min(best, cost)
    return best / min(c_miss * p_target, c_fa * (1.0 - p_target))
