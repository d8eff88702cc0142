"""Compiled event loops. Plain arrays in, plain arrays out; wrappers live in the sibling modules.

Both loops return ``(area, succ, per_link, counts)``: per-batch occupancy
integrals and success counts, post-warmup successes per link, and an int64
counter array indexed by the constants below.
"""
import numpy as np
from numba import njit

GENERATED, CONSUMED, EVICTED, DECOHERED, ATTEMPTED, SUCCEEDED, MAX_OCC, MAX_NONEMPTY, VIOLATIONS, STORED_END = range(10)
N_COUNTS = 10


BLOCK = 4096


# Draws are taken from the generator in blocks: calling it from inside the
# branchy event loops is several times slower than these tight refill loops.
@njit(cache=True)
def _fill_uniform(rng, block):
    for i in range(block.shape[0]):
        block[i] = rng.random()


@njit(cache=True)
def _fill_exponential(rng, block):
    for i in range(block.shape[0]):
        block[i] = rng.standard_exponential()


@njit(cache=True)
def _pop_head(buf, head, length, l):
    # ring buffers have power-of-two width, so masking replaces the modulo
    t = buf[l, head[l]]
    head[l] = (head[l] + 1) & (buf.shape[1] - 1)
    length[l] -= 1
    return t


@njit(cache=True)
def _push(buf, head, length, l, t):
    buf[l, (head[l] + length[l]) & (buf.shape[1] - 1)] = t
    length[l] += 1


@njit(cache=True)
def _grow(buf, head, length):
    k, cap = buf.shape
    new = np.empty((k, 2 * cap))
    for l in range(k):
        for m in range(length[l]):
            new[l, m] = buf[l, (head[l] + m) & (cap - 1)]
        head[l] = 0
    return new


@njit(cache=True)
def _remove_at(buf, head, length, l, pos):
    # drop the pos-th oldest pair of link l, keeping FIFO order of the rest
    mask = buf.shape[1] - 1
    for m in range(pos, length[l] - 1):
        buf[l, (head[l] + m) & mask] = buf[l, (head[l] + m + 1) & mask]
    length[l] -= 1


@njit(cache=True)
def _batch_edges(start, stop, batches):
    # edges[b] is where batch b begins; batch -1 is the warmup
    edges = np.empty(batches)
    span = (stop - start) / batches
    for b in range(batches):
        edges[b] = start + b * span
    return edges


@njit(cache=True)
def continuous_loop(rng, rates, n, buffer, q, alpha, horizon, warmup, batches, check):
    """Exponential race over generation and decoherence clocks under OLEF.

    ``buffer < 0`` means unbounded.
    """
    k = rates.shape[0]
    gamma = rates.sum()
    cum = np.cumsum(rates)
    width = 64
    while width < buffer:
        width *= 2
    buf = np.empty((k, width))
    head = np.zeros(k, np.int64)
    length = np.zeros(k, np.int64)
    counts = np.zeros(N_COUNTS, np.int64)
    per_link = np.zeros(k, np.int64)
    area = np.zeros(batches)
    succ = np.zeros(batches, np.int64)
    picked = np.zeros(k, np.bool_)
    edges = _batch_edges(warmup, horizon, batches)

    ublock = np.empty(BLOCK)
    eblock = np.empty(BLOCK)
    ui = BLOCK
    ei = BLOCK
    t = 0.0
    b = -1
    stored = 0
    nonempty = 0
    while True:
        total_rate = gamma + alpha * stored
        if ei == BLOCK:
            _fill_exponential(rng, eblock)
            ei = 0
        t_next = t + eblock[ei] / total_rate
        ei += 1
        # integrate occupancy over [t, t_next), split at batch edges
        hi = min(t_next, horizon)
        lo = t
        while b < batches - 1 and edges[b + 1] <= hi:
            if b >= 0:
                area[b] += stored * (edges[b + 1] - lo)
            lo = edges[b + 1]
            b += 1
        if b >= 0:
            area[b] += stored * (hi - lo)
        t = t_next
        if t >= horizon:
            break

        if ui == BLOCK:
            _fill_uniform(rng, ublock)
            ui = 0
        u = ublock[ui] * total_rate
        ui += 1
        if u >= gamma:
            # decoherence: a uniformly chosen stored pair is lost
            m = int((u - gamma) / alpha)
            if m >= stored:
                m = stored - 1
            l = 0
            while m >= length[l]:
                m -= length[l]
                l += 1
            _remove_at(buf, head, length, l, m)
            stored -= 1
            if length[l] == 0:
                nonempty -= 1
            counts[DECOHERED] += 1
        else:
            l = 0
            while l < k - 1 and u >= cum[l]:
                l += 1
            counts[GENERATED] += 1
            others = nonempty - (1 if length[l] > 0 else 0)
            if others >= n - 1:
                ok = True
                if q < 1.0:
                    if ui == BLOCK:
                        _fill_uniform(rng, ublock)
                        ui = 0
                    ok = ublock[ui] < q
                    ui += 1
                if n == 2:
                    # the single other nonempty link
                    m = 0
                    while length[m] == 0:
                        m += 1
                    _pop_head(buf, head, length, m)
                    if length[m] == 0:
                        nonempty -= 1
                    if ok and b >= 0:
                        per_link[m] += 1
                else:
                    # OLEF: the n-1 other links with the oldest head pairs, ties to the lower index
                    for m in range(k):
                        picked[m] = False
                    for _ in range(n - 1):
                        best = -1
                        for m in range(k):
                            if m != l and length[m] > 0 and not picked[m]:
                                if best < 0 or buf[m, head[m]] < buf[best, head[best]]:
                                    best = m
                        picked[best] = True
                    for m in range(k):
                        if picked[m]:
                            _pop_head(buf, head, length, m)
                            if length[m] == 0:
                                nonempty -= 1
                            if ok and b >= 0:
                                per_link[m] += 1
                stored -= n - 1
                counts[CONSUMED] += n
                counts[ATTEMPTED] += 1
                if ok:
                    counts[SUCCEEDED] += 1
                    if b >= 0:
                        per_link[l] += 1
                        succ[b] += 1
            else:
                if length[l] == 0:
                    nonempty += 1
                if buffer > 0 and length[l] == buffer:
                    _pop_head(buf, head, length, l)
                    stored -= 1
                    counts[EVICTED] += 1
                elif length[l] == buf.shape[1]:
                    buf = _grow(buf, head, length)
                _push(buf, head, length, l, t)
                stored += 1

        if stored > counts[MAX_OCC]:
            counts[MAX_OCC] = stored
        if nonempty > counts[MAX_NONEMPTY]:
            counts[MAX_NONEMPTY] = nonempty
        if check:
            seen = 0
            total = 0
            for m in range(k):
                total += length[m]
                if length[m] > 0:
                    seen += 1
                if buffer > 0 and length[m] > buffer:
                    counts[VIOLATIONS] += 1
            if seen > n - 1 or seen != nonempty or total != stored:
                counts[VIOLATIONS] += 1

    counts[STORED_END] = stored
    return area, succ, per_link, counts


@njit(cache=True)
def slotted_loop(rng, probs, buffer, q, slots, warmup, batches, check):
    """Bernoulli slots for the bipartite switch; at most one link ever stores pairs.

    Occupancy is sampled after each slot's update.
    """
    k = probs.shape[0]
    cap = buffer if buffer > 0 else 64
    buf = np.empty(cap)  # FIFO of the single stored link, timestamps = slot index
    head = 0
    size = 0
    owner = -1
    counts = np.zeros(N_COUNTS, np.int64)
    per_link = np.zeros(k, np.int64)
    area = np.zeros(batches)
    succ = np.zeros(batches, np.int64)
    order = np.empty(k, np.int64)
    span = (slots - warmup) // batches

    for s in range(slots):
        measured = s >= warmup
        b = min((s - warmup) // span, batches - 1) if measured else 0
        r = 0
        for l in range(k):
            if rng.random() < probs[l]:
                counts[GENERATED] += 1
                if l == owner:
                    # the stored link enqueues before the others consume
                    if buffer > 0 and size == buffer:
                        head = (head + 1) % buf.shape[0]
                        size -= 1
                        counts[EVICTED] += 1
                    elif size == buf.shape[0]:
                        new = np.empty(2 * size)
                        for m in range(size):
                            new[m] = buf[(head + m) % size]
                        buf = new
                        head = 0
                    buf[(head + size) % buf.shape[0]] = s
                    size += 1
                else:
                    order[r] = l
                    r += 1
        # random service order among the other successful links
        for i in range(r - 1, 0, -1):
            j = int(rng.random() * (i + 1))
            order[i], order[j] = order[j], order[i]
        i = 0
        while i < r and size > 0:
            head = (head + 1) % buf.shape[0]
            size -= 1
            _count_measurement(rng, q, counts, per_link, succ, b, measured, order[i], owner)
            i += 1
        if size == 0:
            owner = -1
        while i + 1 < r:
            _count_measurement(rng, q, counts, per_link, succ, b, measured, order[i], order[i + 1])
            i += 2
        if i < r:
            owner = order[i]
            buf[head] = s
            size = 1
        if measured:
            area[b] += size
        if size > counts[MAX_OCC]:
            counts[MAX_OCC] = size
        nonempty = 1 if size > 0 else 0
        if nonempty > counts[MAX_NONEMPTY]:
            counts[MAX_NONEMPTY] = nonempty
        if check and ((buffer > 0 and size > buffer) or (size > 0) != (owner >= 0)):
            counts[VIOLATIONS] += 1

    counts[STORED_END] = size
    return area, succ, per_link, counts


@njit(cache=True)
def _count_measurement(rng, q, counts, per_link, succ, b, measured, a, c):
    counts[CONSUMED] += 2
    counts[ATTEMPTED] += 1
    if q >= 1.0 or (q > 0.0 and rng.random() < q):
        counts[SUCCEEDED] += 1
        if measured:
            succ[b] += 1
            per_link[a] += 1
            per_link[c] += 1
