"""Pure-Python twin of the compiled kernel in ``_kernel.pyx``."""
import numpy as np


def advance(occ, nbrs, p_remove, u, pos, count, targets, target_counts, max_steps):
    n = len(occ)
    m = len(u)
    nb = nbrs.tolist()
    tg = [bytes(row) for row in targets]
    tc = [int(c) for c in target_counts]
    state = bytearray(occ)
    uu = u.tolist()
    steps = 0
    hit = -1
    count = int(count)
    while pos < m and steps < max_steps:
        x = uu[pos] * n
        s = int(x)
        if s >= n:
            s = n - 1
        r = x - s
        pos += 1
        steps += 1
        if state[s]:
            if r < p_remove:
                state[s] = 0
                count -= 1
            else:
                continue
        else:
            for w in nb[s]:
                if state[w]:
                    break
            else:
                state[s] = 1
                count += 1
            if not state[s]:
                continue
        for t, c in enumerate(tc):
            if c == count and state == tg[t]:
                hit = t
                break
        if hit >= 0:
            break
    occ[:] = np.frombuffer(bytes(state), dtype=np.uint8)
    return pos, steps, count, hit
