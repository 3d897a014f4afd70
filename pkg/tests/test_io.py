import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from sgrecon import io
from sgrecon.domain import build_domain
from sgrecon.reconstruct import CameraIntrinsics, DepthField


def test_pfm_1x1(tmp_path):
    p = tmp_path / "one.pfm"
    p.write_bytes(b"Pf\n1 1\n-1.0\n" + np.float32(1.0).astype("<f4").tobytes())
    m = io.read_pfm(p)
    assert (m.width, m.height, m.channels) == (1, 1, 1)
    assert m.data.tolist() == [[1.0]]


def test_pfm_color_roundtrip(tmp_path):
    data = np.arange(36, dtype=np.float32).reshape(3, 4, 3) - 7.5
    p = tmp_path / "c.pfm"
    io.write_pfm(data, p)
    m = io.read_pfm(p)
    assert m.channels == 3 and m.data.shape == (3, 4, 3)
    assert np.array_equal(m.data, data)


def test_pfm_bottom_up_layout(tmp_path):
    data = np.array([[1, 2], [3, 4]], dtype=np.float32)
    p = tmp_path / "g.pfm"
    io.write_pfm(data, p)
    payload = np.frombuffer(p.read_bytes()[-16:], "<f4")
    # the last image row is stored first
    assert payload.tolist() == [3, 4, 1, 2]


def test_pfm_byte_identical(tmp_path):
    rng = np.random.default_rng(0)
    src = tmp_path / "a.pfm"
    body = rng.standard_normal((5, 7)).astype("<f4").tobytes()
    src.write_bytes(b"Pf\n7 5\n-0.5\n" + body)
    out = tmp_path / "b.pfm"
    io.write_pfm(io.read_pfm(src), out)
    assert out.read_bytes() == src.read_bytes()


def test_pfm_big_endian_twin(tmp_path):
    rng = np.random.default_rng(1)
    vals = rng.standard_normal((4, 6, 3)).astype(np.float32)
    little, big = tmp_path / "le.pfm", tmp_path / "be.pfm"
    little.write_bytes(b"PF\n6 4\n-1.0\n" + vals.astype("<f4").tobytes())
    raw = vals.astype("<f4").tobytes()
    # byte-swap oracle: reverse every 4-byte group by hand
    swapped = b"".join(raw[i:i + 4][::-1] for i in range(0, len(raw), 4))
    big.write_bytes(b"PF\n6 4\n1.0\n" + swapped)
    assert np.array_equal(io.read_pfm(little).data, io.read_pfm(big).data)


@settings(max_examples=30, deadline=None)
@given(arrays(np.float32, st.tuples(st.integers(1, 6), st.integers(1, 6)),
              elements=st.floats(width=32, allow_nan=False, allow_infinity=False)))
def test_pfm_roundtrip_exact(tmp_path_factory, data):
    p = tmp_path_factory.mktemp("pfm") / "x.pfm"
    io.write_pfm(data, p)
    assert io.read_pfm(p).data.tobytes() == data.tobytes()


@pytest.mark.parametrize("content,msg", [
    (b"P6\n1 1\n-1\n" + b"\0" * 4, "not a PFM"),
    (b"Pf\n1 x\n-1\n" + b"\0" * 4, "dimensions"),
    (b"Pf\n2 2\n-1\n" + b"\0" * 4, "truncated"),
    (b"Pf\n1 1\n0\n" + b"\0" * 4, "scale"),
    (b"Pf\n1 1\n", "truncated"),
])
def test_pfm_errors(tmp_path, content, msg):
    p = tmp_path / "bad.pfm"
    p.write_bytes(content)
    with pytest.raises(io.FormatError, match=msg):
        io.read_pfm(p)


def test_pgm(tmp_path):
    mask = np.zeros((3, 5), bool)
    mask[1, 1:4] = True
    p = tmp_path / "m.pgm"
    io.write_pgm(mask, p)
    assert np.array_equal(io.read_mask(p), mask)
    q = tmp_path / "c.pgm"
    q.write_bytes(b"P5\n# comment\n2 1\n65535\n" + np.array([0, 300], ">u2").tobytes())
    assert io.read_pgm(q).tolist() == [[0, 300]]
    r = tmp_path / "a.pgm"
    r.write_bytes(b"P2\n1 1\n255\n0\n")
    with pytest.raises(io.FormatError, match="P5"):
        io.read_pgm(r)


def test_intrinsics(tmp_path):
    p = tmp_path / "k.txt"
    p.write_text("f=100\ncu=32\ncv=32")
    assert io.read_intrinsics(p) == CameraIntrinsics(100.0, 32.0, 32.0)
    p.write_text("# camera\ncv=1.5  # principal v\n\nf=20\ncu=2\n")
    assert io.read_intrinsics(p) == CameraIntrinsics(20.0, 2.0, 1.5)
    for text, msg in (("f=0\ncu=1\ncv=1", "positive"), ("f=1\ncu=1", "missing cv"),
                      ("f=1\ncu=1\ncv=a", "bad number"), ("g=1", "expected")):
        p.write_text(text)
        with pytest.raises(io.FormatError, match=msg):
            io.read_intrinsics(p)
    io.write_intrinsics(CameraIntrinsics(12.5, 3.0, 4.0), p)
    assert io.read_intrinsics(p) == CameraIntrinsics(12.5, 3.0, 4.0)


def test_obj_export(tmp_path):
    mask = np.ones((2, 3), bool)
    mask[0, 2] = False
    d = build_domain(mask)
    z = DepthField(d, np.arange(d.n, dtype=float) + 1)
    p = tmp_path / "m.obj"
    io.write_obj(z, p)
    lines = p.read_text().splitlines()
    assert sum(1 for line in lines if line.startswith("v ")) == 5
    # one full 2x2 block (2 triangles) and one 3-pixel block (1 triangle)
    assert sum(1 for line in lines if line.startswith("f ")) == 3
    io.write_obj(z, p, CameraIntrinsics(10.0, 1.0, 0.5))
    first = p.read_text().splitlines()[0].split()
    assert [float(t) for t in first[1:]] == pytest.approx([-0.1, -0.05, 1.0])
