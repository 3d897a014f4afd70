import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from sgrecon.domain import build_domain
from sgrecon.operators import (
    KernelConfig,
    assemble_operators,
    matvec,
    read_triplets,
    vstack,
    write_triplets,
)

from conftest import blob_mask, split_mask

CONFIGS = [
    KernelConfig("sg", 3, 2),
    KernelConfig("sg", 5, 3),
    KernelConfig("fw"),
    KernelConfig("bw"),
    KernelConfig("c"),
    KernelConfig("sc"),
]


def dense_rank(A):
    return np.linalg.matrix_rank(A.toarray())


def test_center_row_matches_square_kernel():
    d = build_domain(np.ones((5, 5), bool))
    b = assemble_operators(d, KernelConfig("sg", 3, 2))
    c = d.index_of[2, 2]
    row = b.Du.getrow(c)
    got = {tuple(d.pixel_of[j] - [2, 2]): w for j, w in zip(row.indices, row.data)}
    assert set(got) == {(du, dv) for du in (-1, 1) for dv in (-1, 0, 1)}
    for (du, dv), w in got.items():
        assert w == pytest.approx(du / 6, abs=1e-15)


@pytest.mark.parametrize("cfg", CONFIGS, ids=lambda c: f"{c.kind}{c.size}k{c.order}")
def test_constants(cfg, rng):
    d = build_domain(blob_mask(rng, 12, 6))
    b = assemble_operators(d, cfg)
    ones = np.ones(d.n)
    assert np.max(np.abs(b.Du @ ones)) <= 1e-10
    assert np.max(np.abs(b.Dv @ ones)) <= 1e-10
    assert np.max(np.abs(b.S @ ones - 1)) <= 1e-10


def test_quadratic_derivative_interior():
    d = build_domain(np.ones((8, 8), bool))
    b = assemble_operators(d, KernelConfig("sg", 3, 2))
    u = d.u.astype(float)
    got = b.Du @ u ** 2
    # quadratic fits are exact everywhere, including KNN boundary kernels
    assert np.max(np.abs(got - 2 * u)) <= 1e-10
    assert np.max(np.abs(b.Dv @ u ** 2)) <= 1e-10


def test_ramp_on_4x4():
    d = build_domain(np.ones((4, 4), bool))
    for kind in ("sg", "fw", "bw", "c", "sc"):
        cfg = KernelConfig(kind, 3, 2)
        b = assemble_operators(d, cfg)
        assert np.allclose(matvec(b.Du, d.u.astype(float)), 1.0, atol=1e-12)
        assert np.allclose(matvec(b.Dv, d.u.astype(float)), 0.0, atol=1e-12)


def test_matvec_basic():
    x = np.arange(5.0)
    assert np.array_equal(matvec(sp.identity(5, format="csr"), x), x)
    assert np.array_equal(matvec(sp.csr_matrix((3, 5)), x), np.zeros(3))
    with pytest.raises(ValueError, match="dimension mismatch"):
        matvec(sp.identity(4, format="csr"), x)


def test_vstack_examples():
    I = sp.identity(4, format="csr")
    assert (vstack([(1, I)]) != I).nnz == 0
    assert np.array_equal(vstack([(2, sp.identity(2))]).toarray(), np.diag([2.0, 2.0]))
    with pytest.raises(ValueError, match="column mismatch"):
        vstack([(1, I), (1, sp.identity(3))])
    d = build_domain(np.ones((6, 6), bool))
    b = assemble_operators(d, KernelConfig("sg", 3, 2))
    assert dense_rank(vstack([(1, b.Du), (1, b.Dv)])) == d.n - 1


def test_rank_connected_random():
    rng = np.random.default_rng(3)
    for _ in range(20):
        d = build_domain(blob_mask(rng, 8, int(rng.integers(2, 6))))
        assert d.n_components == 1
        b = assemble_operators(d, KernelConfig("sg", 3, 2))
        assert dense_rank(vstack([(1, b.Du), (1, b.Dv)])) == d.n - 1


def test_rank_single_kernel_support():
    # every row is a derivative of the same quadratic fit: rank 5, not n - 1
    d = build_domain(np.ones((3, 3), bool))
    b = assemble_operators(d, KernelConfig("sg", 3, 2))
    assert dense_rank(vstack([(1, b.Du), (1, b.Dv)])) == 5


def test_rank_disconnected_random():
    rng = np.random.default_rng(4)
    for _ in range(10):
        d = build_domain(split_mask(rng, 8))
        assert d.n_components >= 2
        b = assemble_operators(d, KernelConfig("sg", 3, 2))
        assert dense_rank(vstack([(1, b.Du), (1, b.Dv)])) == d.n - d.n_components


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_support_size_and_locality(seed):
    rng = np.random.default_rng(seed)
    d = build_domain(blob_mask(rng, 12, 8))
    size = 3 if d.n < 25 else 5
    b = assemble_operators(d, KernelConfig("sg", size, 2))
    K = size * size
    counts = (b.support >= 0).sum(axis=1)
    assert np.all(counts == min(K, d.n))
    for i in range(d.n):
        cols = b.support[i][b.support[i] >= 0]
        assert np.all(d.component_of[cols] == d.component_of[i])
        for A in (b.Du, b.Dv, b.S):
            row = A.indices[A.indptr[i]:A.indptr[i + 1]]
            assert set(row) <= set(cols)
            assert np.all(np.diff(row) > 0)


@pytest.mark.parametrize("cfg", CONFIGS[:3] + CONFIGS[5:], ids=lambda c: c.kind)
def test_matvec_dense_oracle(cfg, rng):
    d = build_domain(blob_mask(rng, 16, 10))
    assert d.n <= 256
    b = assemble_operators(d, cfg)
    x = rng.standard_normal(d.n)
    for A in (b.Du, b.Dv, b.S):
        assert np.max(np.abs(matvec(A, x) - A.toarray() @ x)) <= 1e-12


def test_classic_fallback_at_boundary():
    d = build_domain(np.ones((3, 4), bool))
    fw = assemble_operators(d, KernelConfig("fw"))
    last = d.index_of[1, 3]
    row = fw.Du.getrow(last)
    assert dict(zip(row.indices, row.data)) == {d.index_of[1, 2]: -1.0, last: 1.0}
    sc = assemble_operators(d, KernelConfig("sc"))
    mid = d.index_of[1, 1]
    assert sc.Du.getrow(mid).nnz == 6
    # on the top row sc falls back to central differences
    assert sc.Du.getrow(d.index_of[0, 1]).nnz == 2


def test_classic_isolated_column():
    mask = np.zeros((4, 4), bool)
    mask[:, 1] = True
    with pytest.raises(ValueError, match=r"degenerate neighborhood at pixel \(1, 0\)"):
        assemble_operators(build_domain(mask), KernelConfig("fw"))


def test_3d_requires_depth():
    d = build_domain(np.ones((6, 6), bool))
    with pytest.raises(ValueError, match="requires depth"):
        assemble_operators(d, KernelConfig("sg", 3, 2, "3d"))


def test_triplet_roundtrip(tmp_path, rng):
    d = build_domain(blob_mask(rng, 10, 5))
    A = assemble_operators(d, KernelConfig("sg", 3, 2)).Du
    path = tmp_path / "du.txt"
    write_triplets(A, path)
    assert path.read_text().splitlines()[0] == f"{d.n} {d.n} {A.nnz}"
    B = read_triplets(path)
    assert (A != B).nnz == 0


def test_assembly_deterministic(rng):
    d = build_domain(blob_mask(rng, 14, 7))
    a = assemble_operators(d, KernelConfig("sg", 5, 3))
    b = assemble_operators(d, KernelConfig("sg", 5, 3))
    for x, y in ((a.Du, b.Du), (a.Dv, b.Dv), (a.S, b.S)):
        assert x.data.tobytes() == y.data.tobytes()
        assert x.indices.tobytes() == y.indices.tobytes()
