import numpy as np
import pytest


def blob_mask(rng, size=8, n_squares=4, shape=None):
    """Connected union of random 3x3 squares, each overlapping the previous ones.

    With more than one square the result is never a lone 3x3 block.
    """
    h, w = shape or (size, size)
    mask = np.zeros((h, w), dtype=bool)
    v, u = rng.integers(0, h - 2), rng.integers(0, w - 2)
    mask[v:v + 3, u:u + 3] = True
    for _ in range(n_squares - 1):
        vs, us = np.nonzero(mask)
        k = rng.integers(len(vs))
        v = int(np.clip(vs[k] + rng.integers(-2, 1), 0, h - 3))
        u = int(np.clip(us[k] + rng.integers(-2, 1), 0, w - 3))
        mask[v:v + 3, u:u + 3] = True
    if n_squares > 1 and mask.sum() == 9:
        # a lone 3x3 block is one kernel support; grow it by a column
        vs, us = np.nonzero(mask)
        col = us.max() + 1 if us.max() + 1 < w else us.min() - 1
        mask[vs.min():vs.max() + 1, col] = True
    return mask


def split_mask(rng, size=8):
    """Two or three blobs in separate vertical bands with empty columns between them."""
    h, w = size, size * 2 + 4 if rng.random() < 0.5 else size * 3 + 8
    mask = np.zeros((h, w), dtype=bool)
    band = size + 4
    for start in range(0, w - size + 1, band):
        mask[:, start:start + size] = blob_mask(rng, size, n_squares=3)
    return mask


def brute_components(mask):
    """Union-find over all 8-adjacent foreground pairs; labels in raster order."""
    h, w = mask.shape
    parent = {}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    cells = [(v, u) for v in range(h) for u in range(w) if mask[v, u]]
    for c in cells:
        parent[c] = c
    for v, u in cells:
        for dv in (-1, 0, 1):
            for du in (-1, 0, 1):
                q = (v + dv, u + du)
                if q in parent:
                    ra, rb = find((v, u)), find(q)
                    if ra != rb:
                        parent[max(ra, rb)] = min(ra, rb)
    roots = {}
    return [roots.setdefault(find(c), len(roots)) for c in cells]


def normal_equation_pinv(C):
    """Independent pseudoinverse for full-column-rank C via (C^T C)^{-1} C^T."""
    return np.linalg.solve(C.T @ C, C.T)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
