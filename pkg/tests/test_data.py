import json

import numpy as np
import pytest
import scipy.io
from hypothesis import given, settings, strategies as st

from blocksketch.data import (DatasetKind, DatasetSpec, MatrixMarketError, gen_gaussian,
                              gen_lowrank_noise, load_dataset, nnz_density, read_coordinate,
                              read_dense, read_matrix_market, write_dense, write_matrix_market)


def corpus(data_dir):
    return json.loads((data_dir / "mm" / "manifest.json").read_text())


def test_gaussian_deterministic_and_moments():
    assert np.array_equal(gen_gaussian(2, 2, 5), gen_gaussian(2, 2, 5))
    assert not np.array_equal(gen_gaussian(2, 2, 5), gen_gaussian(2, 2, 6))
    x = gen_gaussian(10_000, 1, 1)[:, 0]
    assert abs(x.mean()) <= 4 / 100 and abs(x.var() - 1) <= 0.1
    assert gen_gaussian(16384, 1024, 0, dtype=np.float32).shape == (16384, 1024)
    with pytest.raises(ValueError):
        gen_gaussian(0, 3)


def test_lowrank_structure():
    sv = np.linalg.svd(gen_lowrank_noise(200, 80, 1, 0.0, seed=1), compute_uv=False)
    assert sv[1] / sv[0] <= 1e-10
    sv = np.linalg.svd(gen_lowrank_noise(200, 80, 7, 0.0, seed=2), compute_uv=False)
    assert sv[6] / sv[0] > 1e-6 and sv[7] / sv[0] <= 1e-12
    ok = 0
    for seed in range(5):
        sv = np.linalg.svd(gen_lowrank_noise(1024, 256, 16, 0.1, seed), compute_uv=False)
        ok += sv[16] / sv[15] <= 0.5
    assert ok == 5
    with pytest.raises(ValueError):
        gen_lowrank_noise(10, 5, 6)
    with pytest.raises(ValueError):
        gen_lowrank_noise(10, 5, 2, noise_sigma=-1)


def test_lowrank_frobenius_norm():
    A = gen_lowrank_noise(512, 256, 8, 0.5, seed=3)
    assert np.sum(A ** 2) == pytest.approx(512 * 256 * 1.25, rel=0.1)


def test_dataset_spec_validation(data_dir):
    with pytest.raises(ValueError):
        DatasetSpec("lowrank", 10, 10)
    with pytest.raises(ValueError):
        DatasetSpec("mtx", 10, 10)
    A = load_dataset(DatasetSpec(DatasetKind.MATRIX_MARKET, 2, 2,
                                 path=str(data_dir / "mm" / "general_basic.mtx")))
    assert A.tolist() == [[0, 3.5], [0, 0]]
    with pytest.raises(ValueError):
        load_dataset(DatasetSpec("mtx", 3, 3, path=str(data_dir / "mm" / "general_basic.mtx")))


def test_corpus_has_twenty_files(data_dir):
    files = sorted(p.name for p in (data_dir / "mm").glob("*.mtx"))
    assert len(files) == 20 and set(files) == set(corpus(data_dir))


@pytest.mark.parametrize("name", sorted(json.loads(
    (__import__("pathlib").Path(__file__).parent / "data/mm/manifest.json").read_text())))
def test_corpus_file(name, data_dir, tmp_path):
    entry = corpus(data_dir)[name]
    path = data_dir / "mm" / name
    if "dense" in entry:
        A = read_matrix_market(path)
        expected = np.array(entry["dense"], dtype=float).reshape(A.shape)
        assert np.array_equal(A, expected)
        # scipy only allows comments in the header, so the oracle reads a copy without them
        lines = path.read_text().splitlines()
        body = [ln for ln in lines[1:] if not ln.lstrip().startswith("%")]
        clean = tmp_path / name
        clean.write_text("\n".join([lines[0], *body]) + "\n")
        assert np.array_equal(A, scipy.io.mmread(clean).toarray())
    else:
        with pytest.raises(MatrixMarketError) as exc:
            read_matrix_market(path)
        assert exc.value.line == entry["error_line"]
        assert f"{name}:{entry['error_line']}:" in str(exc.value)


def test_symmetric_mirroring(data_dir):
    A = read_matrix_market(data_dir / "mm" / "symmetric_mirror.mtx")
    assert A[1, 0] == A[0, 1] == 1.0


def test_crop_window(data_dir):
    path = data_dir / "mm" / "random_20x15.mtx"
    full = read_matrix_market(path)
    assert np.array_equal(read_matrix_market(path, rows=7, cols=4), full[:7, :4])
    assert nnz_density(path) == pytest.approx(45 / 300)
    assert nnz_density(path, 7, 4) == pytest.approx(np.count_nonzero(full[:7, :4]) / 28)


def test_duplicates_kept_as_triplets(data_dir):
    c = read_coordinate(data_dir / "mm" / "duplicates.mtx")
    assert len(c.vals) == 4 and c.to_dense()[0, 0] == 4.0


@settings(max_examples=50, deadline=None)
@given(m=st.integers(1, 30), n=st.integers(1, 30), density=st.floats(0, 1),
       seed=st.integers(0, 2**32 - 1), symmetric=st.booleans())
def test_round_trip_exact(tmp_path_factory, m, n, density, seed, symmetric):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, n)) * (rng.random((m, n)) < density)
    A *= 10.0 ** rng.integers(-200, 200, size=(m, n))
    if symmetric:
        A = np.tril(A[:min(m, n), :min(m, n)])
        A = A + np.tril(A, -1).T
    path = tmp_path_factory.mktemp("mm") / "a.mtx"
    write_matrix_market(path, A, symmetric=symmetric, comment="round trip\nsecond line")
    assert np.array_equal(read_matrix_market(path), A)


def test_write_rejects_asymmetric(tmp_path):
    with pytest.raises(ValueError):
        write_matrix_market(tmp_path / "x.mtx", np.array([[1.0, 2.0], [0.0, 1.0]]), symmetric=True)


def test_more_malformed_inputs(tmp_path):
    cases = {
        "%%MatrixMarket matrix coordinate real general\n2 2 1\n0 1 1.0\n": 3,
        "%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1 nan\n": 3,
        "%%MatrixMarket matrix coordinate real general\n2 2\n": 2,
        "%%MatrixMarket matrix coordinate real skew-symmetric\n2 2 1\n1 1 1.0\n": 3,
        "%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1 1\n2 2 2\n": 4,
        "": 1,
    }
    for i, (text, line) in enumerate(cases.items()):
        p = tmp_path / f"c{i}.mtx"
        p.write_text(text)
        with pytest.raises(MatrixMarketError) as exc:
            read_matrix_market(p)
        assert exc.value.line == line, text


def test_dense_dump_round_trip(tmp_path):
    for dt in (np.float32, np.float64):
        Y = np.random.default_rng(0).standard_normal((7, 3)).astype(dt)
        write_dense(tmp_path / "y.bin", Y)
        raw = (tmp_path / "y.bin").read_bytes()
        assert raw[:4] == b"BSKY" and len(raw) == 16 + Y.nbytes
        back = read_dense(tmp_path / "y.bin")
        assert back.dtype == dt and np.array_equal(back, Y)
    (tmp_path / "bad.bin").write_bytes(b"XXXX" + bytes(12))
    with pytest.raises(ValueError):
        read_dense(tmp_path / "bad.bin")
    with pytest.raises(ValueError):
        write_dense(tmp_path / "i.bin", np.ones((2, 2), dtype=np.int32))


def test_spal_density(spal_path):
    density = nnz_density(spal_path, rows=16384, cols=1024)
    assert abs(density - 0.014) <= 0.005
