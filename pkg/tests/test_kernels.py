import numpy as np
import pytest

from dgat.tensor import kernels, serialize
from dgat.tensor import _kernels_py

needs_compiled = pytest.mark.skipif("cython" not in kernels.available(), reason="extension not built")


def random_case(seed, n=9, m=11, heads=2, dh=3, kmax=5):
    rng = np.random.default_rng(seed)
    width = heads * dh
    q, k, v = (rng.normal(size=s) for s in [(n, width), (m, width), (m, width)])
    idx = rng.integers(0, m, size=(n, kmax)).astype(np.int64)
    counts = rng.integers(1, kmax + 1, size=n).astype(np.int64)
    drop = (rng.random((n, heads, kmax)) >= 0.25) / 0.75
    return q, k, v, idx, counts, heads, drop, rng.normal(size=(n, width))


@needs_compiled
@pytest.mark.parametrize("seed", range(4))
@pytest.mark.parametrize("with_drop", [False, True])
def test_backends_agree(seed, with_drop):
    q, k, v, idx, counts, heads, drop, g = random_case(seed)
    drop = drop if with_drop else None
    compiled = kernels.get("cython")
    o1, a1 = compiled.attention_forward(q, k, v, idx, counts, heads, 0.7, drop)
    o2, a2 = _kernels_py.attention_forward(q, k, v, idx, counts, heads, 0.7, drop)
    np.testing.assert_allclose(o1, o2, rtol=0, atol=1e-13)
    np.testing.assert_allclose(a1, a2, rtol=0, atol=1e-14)
    for x, y in zip(compiled.attention_backward(g, q, k, v, idx, counts, heads, 0.7, a1, drop),
                    _kernels_py.attention_backward(g, q, k, v, idx, counts, heads, 0.7, a2, drop)):
        np.testing.assert_allclose(x, y, rtol=0, atol=1e-13)


@needs_compiled
def test_scatter_add_agrees():
    rng = np.random.default_rng(3)
    src = rng.normal(size=(50, 4))
    idx = rng.integers(0, 7, size=50).astype(np.int64)
    np.testing.assert_allclose(kernels.get("cython").scatter_add_rows(src, idx, 9),
                               _kernels_py.scatter_add_rows(src, idx, 9), atol=1e-14)


def test_padded_slots_have_zero_weight():
    q, k, v, idx, counts, heads, _, _ = random_case(5)
    for name in kernels.available():
        _, alpha = kernels.get(name).attention_forward(q, k, v, idx, counts, heads, 1.0)
        for i, c in enumerate(counts):
            assert (alpha[i, :, c:] == 0).all()


def test_use_backend_switches_and_restores():
    before = kernels.backend_name()
    with kernels.use_backend("python"):
        assert kernels.backend_name() == "python"
    assert kernels.backend_name() == before
    with pytest.raises(ValueError):
        kernels.get("fortran")


def test_checkpoint_roundtrip_is_f32(tmp_path):
    rng = np.random.default_rng(0)
    tensors = {"a": rng.normal(size=(3, 4)), "b": rng.normal(size=(1, 5))}
    path = tmp_path / "m.ckpt"
    serialize.save(path, tensors, {"version": 1, "feature_scheme_hash": "x"})
    manifest, back = serialize.load(path)
    assert manifest["version"] == 1
    assert [t["name"] for t in manifest["tensors"]] == ["a", "b"]
    for name, arr in tensors.items():
        np.testing.assert_array_equal(back[name], arr.astype(np.float32).astype(np.float64))
    raw = path.read_bytes()
    assert raw[:8] == serialize.MAGIC
    assert raw[-20:] == tensors["b"].astype("<f4").tobytes()
    assert not list(tmp_path.glob("*.tmp"))


def test_checkpoint_rejects_garbage():
    with pytest.raises(serialize.CheckpointError):
        serialize.decode(b"nonsense" * 4)
