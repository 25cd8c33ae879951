"""Seeded sketching primitives.

CountSketch, degree-2 TensorSketch, the PolySketch tree (with the cached
prefix sweep), the fast Walsh-Hadamard transform, SRHT, the shared-sign
SRHT family and Gaussian JL maps.

Matrices are stored with data points as columns, so a sketch maps a
d x n array to an m x n array. Every apply function accepts a single
vector or a batch of columns; dense numpy arrays and scipy sparse
matrices both work where the cost should track nnz.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import ContractError
from .rng import RngStream


def next_pow2(x: int) -> int:
    return 1 << max(0, int(x) - 1).bit_length()


def _as_columns(x, d: int, name: str = "input"):
    """Return (2-D operand, was_vector)."""
    if sp.issparse(x):
        if x.ndim != 2 or x.shape[0] != d:
            raise ContractError(f"{name} has {x.shape[0]} rows, expected {d}")
        return x.tocsc(), False
    a = np.asarray(x, dtype=float)
    if a.ndim == 1:
        if a.shape[0] != d:
            raise ContractError(f"{name} has length {a.shape[0]}, expected {d}")
        return a[:, None], True
    if a.ndim != 2 or a.shape[0] != d:
        raise ContractError(f"{name} has shape {a.shape}, expected ({d}, n)")
    return a, False


# ---------------------------------------------------------------- CountSketch


@dataclass(frozen=True, eq=False)
class CountSketchSpec:
    d: int
    m: int
    h: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        if self.d < 1 or self.m < 1:
            raise ContractError("CountSketch dims must be positive")
        if self.h.shape != (self.d,) or self.sigma.shape != (self.d,):
            raise ContractError("hash and sign arrays must have length d")
        if self.h.min() < 0 or self.h.max() >= self.m:
            raise ContractError("hash values out of range")

    @classmethod
    def build(cls, d: int, m: int, rng: RngStream) -> "CountSketchSpec":
        g = rng.generator()
        h = g.integers(0, m, size=d)
        sigma = g.integers(0, 2, size=d) * 2.0 - 1.0
        return cls(int(d), int(m), h, sigma)

    @cached_property
    def matrix(self) -> sp.csc_matrix:
        return sp.csc_matrix((self.sigma, self.h, np.arange(self.d + 1)), shape=(self.m, self.d))

    def e1_image(self) -> np.ndarray:
        """Sketch of the first standard basis vector."""
        out = np.zeros(self.m)
        out[self.h[0]] = self.sigma[0]
        return out


def countsketch_apply(spec: CountSketchSpec, x) -> np.ndarray:
    a, vec = _as_columns(x, spec.d)
    out = spec.matrix @ a
    if sp.issparse(out):
        out = out.toarray()
    out = np.asarray(out, dtype=float)
    return out[:, 0] if vec else out


# ---------------------------------------------------------------- TensorSketch


@dataclass(frozen=True, eq=False)
class TensorSketch2Spec:
    c1: CountSketchSpec
    c2: CountSketchSpec

    def __post_init__(self):
        m = self.c1.m
        if not (self.c1.d == self.c2.d == self.c2.m == m):
            raise ContractError("inner CountSketches must both be m -> m")

    @property
    def m(self) -> int:
        return self.c1.m

    @classmethod
    def build(cls, m: int, rng: RngStream) -> "TensorSketch2Spec":
        return cls(CountSketchSpec.build(m, m, rng.child(0)), CountSketchSpec.build(m, m, rng.child(1)))

    def left_spectrum(self, a: np.ndarray) -> np.ndarray:
        return np.fft.rfft(countsketch_apply(self.c1, a), axis=0)

    def right_spectrum(self, b: np.ndarray) -> np.ndarray:
        return np.fft.rfft(countsketch_apply(self.c2, b), axis=0)

    def combine(self, fa: np.ndarray, fb: np.ndarray) -> np.ndarray:
        return np.fft.irfft(fa * fb, n=self.m, axis=0)


def tensorsketch2_apply(spec: TensorSketch2Spec, a, b) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape[0] != spec.m or b.shape[0] != spec.m:
        raise ContractError("TensorSketch inputs must have length m")
    return spec.combine(spec.left_spectrum(a), spec.right_spectrum(b))


# ---------------------------------------------------------------- PolySketch


@dataclass(frozen=True, eq=False)
class PolySketchTree:
    """Complete binary tree over qbar leaves, heap-indexed from 1.

    Leaf j (0-based) sits at heap index qbar + j. Leaves past the real
    degree are padding and always see the 1-dimensional vector [1].
    """

    dims: tuple[int, ...]
    m: int
    leaves: tuple[CountSketchSpec, ...]
    nodes: tuple[TensorSketch2Spec, ...]

    @property
    def q(self) -> int:
        return len(self.dims)

    @property
    def qbar(self) -> int:
        return len(self.leaves)

    def node(self, idx: int) -> TensorSketch2Spec:
        return self.nodes[idx - 1]


def polysketch_build(dims, m: int, rng: RngStream) -> PolySketchTree:
    dims = tuple(int(x) for x in dims)
    if not dims or min(dims) < 1 or m < 1:
        raise ContractError("PolySketch needs at least one factor and positive dims")
    qbar = next_pow2(len(dims))
    leaf_dims = dims + (1,) * (qbar - len(dims))
    leaves = tuple(CountSketchSpec.build(dj, m, rng.child(0, j)) for j, dj in enumerate(leaf_dims))
    nodes = tuple(TensorSketch2Spec.build(m, rng.child(1, i)) for i in range(1, qbar))
    return PolySketchTree(dims, int(m), leaves, nodes)


class _SweepState:
    """Per-node values and child spectra for one evaluation of the tree."""

    def __init__(self, tree: PolySketchTree, leaf_vals: list):
        self.tree = tree
        qbar = tree.qbar
        self.val = [None] * (2 * qbar)
        self.fl = [None] * qbar
        self.fr = [None] * qbar
        for j, v in enumerate(leaf_vals):
            self.val[qbar + j] = v
        for i in range(qbar - 1, 0, -1):
            node = tree.node(i)
            self.fl[i] = node.left_spectrum(self.val[2 * i])
            self.fr[i] = node.right_spectrum(self.val[2 * i + 1])
            self.val[i] = node.combine(self.fl[i], self.fr[i])

    def replace_leaf(self, j: int, v):
        i = self.tree.qbar + j
        self.val[i] = v
        while i > 1:
            child, i = i, i // 2
            node = self.tree.node(i)
            if child % 2 == 0:
                self.fl[i] = node.left_spectrum(self.val[child])
            else:
                self.fr[i] = node.right_spectrum(self.val[child])
            self.val[i] = node.combine(self.fl[i], self.fr[i])

    @property
    def root(self):
        return self.val[1]


def _leaf_values(tree: PolySketchTree, factors) -> tuple[list, bool, int | None]:
    if len(factors) != tree.q:
        raise ContractError(f"expected {tree.q} factors, got {len(factors)}")
    vals, ncols, vec = [], None, None
    for j, (leaf, f) in enumerate(zip(tree.leaves, factors)):
        a, is_vec = _as_columns(f, leaf.d, f"factor {j}")
        if vec is None:
            vec, ncols = is_vec, a.shape[1]
        elif is_vec != vec or a.shape[1] != ncols:
            raise ContractError("factors must share one column count")
        vals.append(countsketch_apply(leaf, a))
    for leaf in tree.leaves[tree.q:]:
        vals.append(leaf.e1_image()[:, None])
    return vals, vec, ncols


def polysketch_apply(tree: PolySketchTree, factors) -> np.ndarray:
    """S(u_1 (x) ... (x) u_q), column by column when the factors are matrices."""
    vals, vec, _ = _leaf_values(tree, factors)
    out = _SweepState(tree, vals).root
    out = np.broadcast_to(out, (tree.m, out.shape[1])) if out.ndim == 2 else out
    return np.array(out[:, 0] if vec else out)


def polysketch_prefix_sweep(tree: PolySketchTree, factors) -> list[np.ndarray]:
    """Outputs j = 0..q, output j having the first j factors replaced by e_1."""
    vals, vec, ncols = _leaf_values(tree, factors)
    state = _SweepState(tree, vals)

    def emit(v):
        v = np.broadcast_to(v, (tree.m, ncols))
        return np.array(v[:, 0] if vec else v)

    outs = [emit(state.root)]
    for j in range(tree.q):
        state.replace_leaf(j, tree.leaves[j].e1_image()[:, None])
        outs.append(emit(state.root))
    return outs


# ---------------------------------------------------------------- Hadamard


def fwht_inplace(v: np.ndarray) -> np.ndarray:
    """Unnormalized Walsh-Hadamard transform along axis 0, in place."""
    n = v.shape[0]
    if n < 1 or n & (n - 1):
        raise ContractError("FWHT length must be a power of two")
    if not v.flags.c_contiguous:
        raise ContractError("FWHT needs a C-contiguous array")
    w = v.reshape(n, -1)
    h = 1
    while h < n:
        blk = w.reshape(n // (2 * h), 2, h, w.shape[1])
        top = blk[:, 0].copy()
        blk[:, 0] += blk[:, 1]
        np.subtract(top, blk[:, 1], out=blk[:, 1])
        h *= 2
    return v


def _hadamard_signed(signs: np.ndarray, x, d: int) -> tuple[np.ndarray, bool]:
    a, vec = _as_columns(x, d)
    dbar = signs.shape[0]
    y = np.zeros((dbar, a.shape[1]))
    y[:d] = a.toarray() if sp.issparse(a) else a
    y *= signs[:, None]
    return fwht_inplace(y), vec


@dataclass(frozen=True, eq=False)
class SrhtSpec:
    d: int
    m: int
    signs: np.ndarray
    coords: np.ndarray

    def __post_init__(self):
        dbar = self.signs.shape[0]
        if dbar != next_pow2(self.d):
            raise ContractError("sign vector must live in the padded dimension")
        if self.coords.shape != (self.m,) or len(np.unique(self.coords)) != self.m:
            raise ContractError("coordinate list must hold m distinct entries")
        if self.m > dbar:
            raise ContractError("SRHT output dim exceeds padded input dim")

    @property
    def dbar(self) -> int:
        return self.signs.shape[0]


def _draw_signs(dbar: int, rng: RngStream) -> np.ndarray:
    return rng.generator().integers(0, 2, size=dbar) * 2.0 - 1.0


def _draw_coords(dbar: int, m: int, rng: RngStream) -> np.ndarray:
    return np.sort(rng.generator().choice(dbar, size=m, replace=False))


def srht_build(d: int, m: int, rng: RngStream) -> SrhtSpec:
    dbar = next_pow2(d)
    if m > dbar:
        raise ContractError(f"SRHT output dim {m} exceeds padded dim {dbar}")
    return SrhtSpec(int(d), int(m), _draw_signs(dbar, rng.child(0)), _draw_coords(dbar, m, rng.child(1, 0)))


def srht_apply(spec: SrhtSpec, X) -> np.ndarray:
    y, vec = _hadamard_signed(spec.signs, X, spec.d)
    out = y[spec.coords] / np.sqrt(spec.m)
    return out[:, 0] if vec else out


@dataclass(frozen=True, eq=False)
class SharedSignSrhtFamily:
    d: int
    m: int
    signs: np.ndarray
    coords: tuple[np.ndarray, ...]

    @property
    def q(self) -> int:
        return len(self.coords)

    def member(self, c: int) -> SrhtSpec:
        return SrhtSpec(self.d, self.m, self.signs, self.coords[c])


def shared_sign_family_build(q: int, d: int, m: int, rng: RngStream) -> SharedSignSrhtFamily:
    dbar = next_pow2(d)
    if m > dbar:
        raise ContractError(f"SRHT output dim {m} exceeds padded dim {dbar}")
    if q < 1:
        raise ContractError("family needs at least one member")
    signs = _draw_signs(dbar, rng.child(0))
    coords = tuple(_draw_coords(dbar, m, rng.child(1, c)) for c in range(q))
    return SharedSignSrhtFamily(int(d), int(m), signs, coords)


def shared_sign_family_apply_all(family: SharedSignSrhtFamily, X) -> list[np.ndarray]:
    y, vec = _hadamard_signed(family.signs, X, family.d)
    scale = 1.0 / np.sqrt(family.m)
    outs = [y[c] * scale for c in family.coords]
    return [o[:, 0] for o in outs] if vec else outs


# ---------------------------------------------------------------- Gaussian JL


@dataclass(frozen=True, eq=False)
class GaussianJlSpec:
    rows: int
    n: int
    rng: RngStream

    @cached_property
    def matrix(self) -> np.ndarray:
        return self.rng.generator().standard_normal((self.rows, self.n))


def gaussian_jl_apply(spec: GaussianJlSpec, A) -> np.ndarray:
    """H @ A with unnormalized standard normal H."""
    if A.shape[0] != spec.n:
        raise ContractError(f"JL input has {A.shape[0]} rows, expected {spec.n}")
    out = spec.matrix @ A
    return np.asarray(out.toarray() if sp.issparse(out) else out, dtype=float)
