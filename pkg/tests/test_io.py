import numpy as np
import pytest
import scipy.sparse as sp

from tensorlev.dataio import ingest, read_csv, read_libsvm, write_csv, write_libsvm
from tensorlev.errors import DataError
from tensorlev.synthetic import gaussian_cloud, regression_task, sparse_dataset


def test_libsvm_line(tmp_path):
    f = tmp_path / "a.svm"
    f.write_text("1 3:0.5 7:-2\n")
    X, y = read_libsvm(f)
    assert y.tolist() == [1.0]
    col = X[:, 0]
    assert sorted(zip(col.indices.tolist(), col.data.tolist())) == [(2, 0.5), (6, -2.0)]


@pytest.mark.parametrize("fmt", ["csv", "libsvm"])
def test_empty_file(tmp_path, fmt):
    f = tmp_path / "empty"
    f.write_text("\n\n")
    with pytest.raises(DataError):
        ingest(f, fmt)


def test_missing_file(tmp_path):
    with pytest.raises(DataError):
        ingest(tmp_path / "nope.csv")


def test_csv_malformed_line_number(tmp_path):
    f = tmp_path / "bad.csv"
    f.write_text("1,2,3\n1,x,3\n")
    with pytest.raises(DataError, match=":2:"):
        read_csv(f)


def test_csv_inconsistent_width(tmp_path):
    f = tmp_path / "bad.csv"
    f.write_text("1,2,3\n1,2\n")
    with pytest.raises(DataError, match="expected 3 fields"):
        read_csv(f)


@pytest.mark.parametrize("line", ["1 0:3", "1 4:1 2:1", "1 a:b"])
def test_libsvm_malformed(tmp_path, line):
    f = tmp_path / "bad.svm"
    f.write_text("0 1:1\n" + line + "\n")
    with pytest.raises(DataError, match=":2:"):
        read_libsvm(f)


def test_libsvm_declared_dimension(tmp_path):
    f = tmp_path / "a.svm"
    f.write_text("1 5:1\n")
    assert read_libsvm(f, n_features=8)[0].shape == (8, 1)
    with pytest.raises(DataError):
        read_libsvm(f, n_features=3)


def test_csv_and_libsvm_agree(tmp_path):
    X = np.round(gaussian_cloud(4, 10, seed=2), 6)
    X[X < -0.5] = 0.0  # some structural zeros
    y = np.arange(10.0)
    write_csv(tmp_path / "a.csv", X, y)
    write_libsvm(tmp_path / "a.svm", X, y)
    Xc, yc = ingest(tmp_path / "a.csv", "csv")
    Xl, yl = ingest(tmp_path / "a.svm", "libsvm", n_features=4)
    assert np.array_equal(Xc, Xl.toarray())
    assert np.array_equal(Xc, X)
    assert np.array_equal(yc, yl)


def test_csv_label_column(tmp_path):
    f = tmp_path / "a.csv"
    f.write_text("0.5,7,1\n0.25,8,2\n")
    X, y = read_csv(f, label_col=1)
    assert y.tolist() == [7.0, 8.0]
    assert X.tolist() == [[0.5, 0.25], [1.0, 2.0]]
    X, y = read_csv(f, label_col=None)
    assert y is None and X.shape == (3, 2)


def test_synthetic_generators():
    X = gaussian_cloud(5, 30, seed=1, radius=2.0)
    assert np.linalg.norm(X, axis=0).max() == pytest.approx(2.0)
    assert np.array_equal(X, gaussian_cloud(5, 30, seed=1, radius=2.0))
    S = sparse_dataset(20, 10, 37, seed=4)
    assert sp.issparse(S) and S.nnz == 37
    Xtr, ytr, Xte, yte = regression_task(4, 20, 10, seed=3)
    assert Xtr.shape == (4, 20) and Xte.shape == (4, 10) and ytr.shape == (20,) and yte.shape == (10,)
