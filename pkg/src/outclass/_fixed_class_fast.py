"""DFS core of the fixed-conjugacy-class search.

Written in the numpy-scalar subset that numba can compile; imported with a
pure-Python fallback so the package works without numba (slower, small
caps only).  Letters are signed ints; the search enumerates cyclically
reduced words of bounded length whose abelianized vector can possibly be
fixed, maintaining the freely reduced image of the current prefix
incrementally on a stack.
"""

from __future__ import annotations

import numpy as np

try:  # pragma: no cover - exercised implicitly
    from numba import njit

    HAVE_NUMBA = True
except Exception:  # pragma: no cover
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


@njit(cache=True)
def _letter_key(x):
    # order a < A < b < B < ...
    return 2 * abs(x) - (1 if x > 0 else 0)


@njit(cache=True)
def _scan(n, length_cap, img_flat, img_off, targets, out, out_len):
    """Enumerate candidate fixed words; returns number found.

    img_flat/img_off: concatenated letter images under phi^k, indexed by
    code (x-1 for x>0, n-x-1 for x<0).  targets: allowed abelianization
    vectors (rows).  out: (max_results, length_cap+1) result buffer, row =
    [m, letters...]; out_len: scratch unused.
    """
    word = np.zeros(length_cap + 1, dtype=np.int64)
    # image stack: generous bound on reduced image length
    max_img = 0
    for c in range(2 * n):
        L = img_off[c + 1] - img_off[c]
        if L > max_img:
            max_img = L
    img = np.zeros(length_cap * max_img + 4, dtype=np.int64)
    img_len = np.zeros(length_cap + 2, dtype=np.int64)
    # a push can cancel into (and then overwrite) the parent's segment of
    # the image stack; save the at-most-max_img letters below the base and
    # restore them (LIFO with the DFS) whenever the node is left
    save_buf = np.zeros((length_cap + 1, max_img + 1), dtype=np.int64)
    save_pos = np.zeros(length_cap + 1, dtype=np.int64)
    save_n = np.zeros(length_cap + 1, dtype=np.int64)
    v = np.zeros(n, dtype=np.int64)
    # letters in key order
    letters = np.zeros(2 * n, dtype=np.int64)
    for i in range(n):
        letters[2 * i] = i + 1
        letters[2 * i + 1] = -(i + 1)

    n_found = 0
    # choice[d] = index into letters at depth d
    choice = np.full(length_cap + 1, -1, dtype=np.int64)
    depth = 0
    while depth >= 0:
        choice[depth] += 1
        # undo the previous push at this depth before replacing/leaving it
        for i in range(save_n[depth]):
            img[save_pos[depth] + i] = save_buf[depth, i]
        save_n[depth] = 0
        if choice[depth] >= 2 * n:
            # backtrack
            choice[depth] = -1
            depth -= 1
            if depth >= 0:
                x = word[depth]
                v[abs(x) - 1] -= 1 if x > 0 else -1
            continue
        x = letters[choice[depth]]
        if depth > 0:
            if x == -word[depth - 1]:
                continue
            # necklace filter: first letter minimal in key order
            if _letter_key(x) < _letter_key(word[0]):
                continue
        # tentative abelianization
        d_idx = abs(x) - 1
        dv = 1 if x > 0 else -1
        v[d_idx] += dv
        remaining = length_cap - (depth + 1)
        # prune: some target must be reachable within the remaining letters
        ok = False
        for t in range(targets.shape[0]):
            dist = 0
            for i in range(n):
                dist += abs(v[i] - targets[t, i])
            if dist <= remaining:
                ok = True
                break
        if not ok:
            v[d_idx] -= dv
            continue
        word[depth] = x
        # push image of x with cancellation against the stack
        base = img_len[depth]
        c = (x - 1) if x > 0 else (n - x - 1)
        lo0 = base - (img_off[c + 1] - img_off[c])
        if lo0 < 0:
            lo0 = 0
        save_pos[depth] = lo0
        save_n[depth] = base - lo0
        for i in range(base - lo0):
            save_buf[depth, i] = img[lo0 + i]
        pos = base
        for j in range(img_off[c], img_off[c + 1]):
            y = img_flat[j]
            if pos > 0 and img[pos - 1] == -y:
                pos -= 1
            else:
                img[pos] = y
                pos += 1
        img_len[depth + 1] = pos
        m = depth + 1
        # candidate check: cyclically reduced word, exact target vector
        if word[m - 1] != -word[0] or m == 1:
            exact = False
            for t in range(targets.shape[0]):
                same = True
                for i in range(n):
                    if v[i] != targets[t, i]:
                        same = False
                        break
                if same:
                    exact = True
                    break
            if exact:
                # cyclic reduction of the image by trimming matched ends
                lo = 0
                hi = pos
                while hi - lo >= 2 and img[lo] == -img[hi - 1]:
                    lo += 1
                    hi -= 1
                if hi - lo == m:
                    # rotation match against the word
                    matched = False
                    for r in range(m):
                        good = True
                        for i in range(m):
                            if img[lo + (r + i) % m] != word[i]:
                                good = False
                                break
                        if good:
                            matched = True
                            break
                    if matched and n_found < out.shape[0]:
                        out[n_found, 0] = m
                        for i in range(m):
                            out[n_found, 1 + i] = word[i]
                        n_found += 1
        if depth + 1 < length_cap:
            depth += 1
        else:
            v[d_idx] -= dv
    return n_found


def scan_fixed_words(
    n: int,
    length_cap: int,
    images: list[tuple[int, ...]],
    targets: np.ndarray,
    max_results: int = 4096,
) -> list[tuple[int, ...]]:
    """All cyclically reduced words w, |w| <= cap, with [phi^k(w)] = [w].

    `images` lists the reduced image of each letter in code order
    (1..n, -1..-n) under the iterate being tested; `targets` the
    abelianization vectors allowed by the eigenspace prefilter.
    """
    img_flat = np.array(
        [y for im in images for y in im] or [0], dtype=np.int64
    )
    img_off = np.zeros(2 * n + 1, dtype=np.int64)
    for i, im in enumerate(images):
        img_off[i + 1] = img_off[i] + len(im)
    targets = np.asarray(targets, dtype=np.int64).reshape(-1, n)
    out = np.zeros((max_results, length_cap + 1), dtype=np.int64)
    found = _scan(n, length_cap, img_flat, img_off, targets, out, 0)
    results = []
    for r in range(found):
        m = int(out[r, 0])
        results.append(tuple(int(x) for x in out[r, 1 : 1 + m]))
    return results
