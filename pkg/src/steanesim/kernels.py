"""Low-level array kernels for state vectors and density matrices.

Conventions used throughout the package:

* An n-qubit pure state is a complex array whose last axis has length 2**n.
* An n-qubit density matrix is a complex array whose last two axes are
  (2**n, 2**n) (rows, columns).
* Qubit k addresses bit k of the flat index, so qubit 0 is the least
  significant bit.  Leading axes, if any, are batch axes and are broadcast
  untouched.

Gates are applied by reshaping the index axis into (high, 2, low) blocks and
contracting or permuting the middle axis; a full 2**n x 2**n operator matrix is
never formed.  All kernels return the result array and may reuse or mutate the
input buffer, so callers must use the returned array and drop the argument.
"""

from __future__ import annotations

import numpy as np

COMPLEX = np.complex128

_SQRT1_2 = 1.0 / np.sqrt(2.0)


def _split(n: int, q: int) -> tuple[int, int, int]:
    """Sizes (high, 2, low) for bit q of an n-bit index axis."""
    if not 0 <= q < n:
        raise ValueError(f"qubit {q} out of range for {n} qubits")
    return 2 ** (n - 1 - q), 2, 2**q


# ---------------------------------------------------------------------------
# state-vector kernels


def vec_apply_1q(arr: np.ndarray, n: int, q: int, u: np.ndarray) -> np.ndarray:
    h, _, l = _split(n, q)
    batch = arr.shape[:-1]
    a = arr.reshape(batch + (h, 2, l))
    out = np.einsum("ij,...hjl->...hil", u, a)
    return out.reshape(batch + (2**n,))


def vec_apply_phase(arr: np.ndarray, n: int, q: int, phase: complex) -> np.ndarray:
    """Diagonal gate diag(1, phase) on qubit q, in place."""
    h, _, l = _split(n, q)
    a = arr.reshape(arr.shape[:-1] + (h, 2, l))
    a[..., 1, :] *= phase
    return arr


def vec_apply_h(arr: np.ndarray, n: int, q: int) -> np.ndarray:
    """Hadamard on qubit q, in place (one half-size scratch copy)."""
    h, _, l = _split(n, q)
    a = arr.reshape(arr.shape[:-1] + (h, 2, l))
    a0 = a[..., 0, :].copy()
    a1 = a[..., 1, :]
    a[..., 0, :] += a1
    a[..., 0, :] *= _SQRT1_2
    np.subtract(a0, a1, out=a1)
    a1 *= _SQRT1_2
    return arr


def vec_apply_pauli(arr: np.ndarray, n: int, q: int, which: str) -> np.ndarray:
    h, _, l = _split(n, q)
    a = arr.reshape(arr.shape[:-1] + (h, 2, l))
    if which == "X":
        a[:] = a[..., ::-1, :]
    elif which == "Z":
        a[..., 1, :] *= -1.0
    elif which == "Y":
        a[:] = a[..., ::-1, :]
        a[..., 0, :] *= -1j
        a[..., 1, :] *= 1j
    else:
        raise ValueError(f"unknown Pauli {which!r}")
    return arr


def vec_apply_cnot(arr: np.ndarray, n: int, control: int, target: int) -> np.ndarray:
    """CNOT as an index permutation, in place."""
    if control == target:
        raise ValueError("control and target must differ")
    hi, lo = max(control, target), min(control, target)
    a_ = arr.reshape(
        arr.shape[:-1] + (2 ** (n - 1 - hi), 2, 2 ** (hi - lo - 1), 2, 2**lo)
    )
    if control > target:
        sub = a_[..., 1, :, :, :]  # control bit set
        sub[:] = sub[..., ::-1, :]
    else:
        sub = a_[..., 1, :]  # control is the low axis
        sub[:] = sub[..., ::-1, :, :]
    return arr


def vec_prob_one(arr: np.ndarray, n: int, q: int) -> np.ndarray:
    """Squared weight of the qubit-q = 1 slice (not normalized)."""
    h, _, l = _split(n, q)
    a = arr.reshape(arr.shape[:-1] + (h, 2, l))
    return np.sum(np.abs(a[..., 1, :]) ** 2, axis=(-2, -1))


def vec_collapse(arr: np.ndarray, n: int, q: int, bit: int) -> np.ndarray:
    """Project qubit q onto |bit> and remove it (unnormalized)."""
    h, _, l = _split(n, q)
    a = arr.reshape(arr.shape[:-1] + (h, 2, l))
    return np.ascontiguousarray(a[..., bit, :]).reshape(
        arr.shape[:-1] + (2 ** (n - 1),)
    )


def vec_measure_x_split(arr: np.ndarray, n: int, q: int):
    """Unnormalized X-basis components of qubit q: (plus, minus), each on
    the reduced register.  The |b> readout branch after a Hadamard is
    (plus|minus)/sqrt(2) with squared weight ||.||^2 / 2."""
    h, _, l = _split(n, q)
    a = arr.reshape(h, 2, l)
    plus = a[:, 0, :] + a[:, 1, :]
    minus = a[:, 0, :] - a[:, 1, :]
    return plus.reshape(-1), minus.reshape(-1)


def vec_project_keep(arr: np.ndarray, n: int, q: int, bit: int) -> np.ndarray:
    """Project qubit q onto |bit> keeping the register size, in place."""
    h, _, l = _split(n, q)
    a = arr.reshape(arr.shape[:-1] + (h, 2, l))
    a[..., 1 - bit, :] = 0.0
    return arr


def vec_join(a: np.ndarray, na: int, b: np.ndarray, nb: int) -> np.ndarray:
    """Tensor product: a occupies qubits 0..na-1, b the ones above."""
    out = np.einsum("...j,...i->...ji", b, a)
    return out.reshape(out.shape[: -2] + (2 ** (na + nb),))


# ---------------------------------------------------------------------------
# density-matrix kernels


def dm_apply_1q(arr: np.ndarray, n: int, q: int, u: np.ndarray) -> np.ndarray:
    dim = 2**n
    h, _, l = _split(n, q)
    batch = arr.shape[:-2]
    a = arr.reshape(batch + (h, 2, l, dim))
    out = np.einsum("ij,...hjlc->...hilc", u, a).reshape(batch + (dim, dim))
    a = out.reshape(batch + (dim, h, 2, l))
    out = np.einsum("ij,...rhjl->...rhil", u.conj(), a)
    return out.reshape(batch + (dim, dim))


def dm_apply_diag(arr: np.ndarray, n: int, q: int, phase: complex) -> np.ndarray:
    """Diagonal gate diag(1, phase) on qubit q, in place."""
    dim = 2**n
    h, _, l = _split(n, q)
    batch = arr.shape[:-2]
    a = arr.reshape(batch + (h, 2, l, dim))
    a[..., 1, :, :] *= phase
    a = arr.reshape(batch + (dim, h, 2, l))
    a[..., 1, :] *= np.conj(phase)
    return arr


def dm_apply_pauli(arr: np.ndarray, n: int, q: int, which: str) -> np.ndarray:
    """Sandwich P rho P for a Pauli P on qubit q, in place.

    Y has real sandwich action (phases cancel), so X/Y/Z all act by slice
    swaps and sign flips.
    """
    dim = 2**n
    h, _, l = _split(n, q)
    batch = arr.shape[:-2]
    if which in ("X", "Y"):
        a = arr.reshape(batch + (h, 2, l, dim))
        a[:] = a[..., ::-1, :, :]
        a = arr.reshape(batch + (dim, h, 2, l))
        a[:] = a[..., ::-1, :]
    if which in ("Z", "Y"):
        a = arr.reshape(batch + (h, 2, l, dim))
        a[..., 1, :, :] *= -1.0
        a = arr.reshape(batch + (dim, h, 2, l))
        a[..., 1, :] *= -1.0
    if which not in ("X", "Y", "Z"):
        raise ValueError(f"unknown Pauli {which!r}")
    return arr


def dm_apply_cnot(arr: np.ndarray, n: int, control: int, target: int) -> np.ndarray:
    """CNOT conjugation as row and column permutations, in place."""
    if control == target:
        raise ValueError("control and target must differ")
    dim = 2**n
    hi, lo = max(control, target), min(control, target)
    shape5 = (2 ** (n - 1 - hi), 2, 2 ** (hi - lo - 1), 2, 2**lo)
    batch = arr.shape[:-2]
    # rows: trailing axes (A, 2hi, M, 2lo, L, C); cols: (R, A, 2hi, M, 2lo, L)
    a = arr.reshape(batch + shape5 + (dim,))
    if control > target:
        sub = a[..., 1, :, :, :, :]  # fix hi=control; flip lo=target
        sub[:] = np.flip(sub, axis=-3)
    else:
        sub = a[..., 1, :, :]  # fix lo=control; flip hi=target
        sub[:] = np.flip(sub, axis=-4)
    a = arr.reshape(batch + (dim,) + shape5)
    if control > target:
        sub = a[..., 1, :, :, :]
        sub[:] = np.flip(sub, axis=-2)
    else:
        sub = a[..., 1, :]
        sub[:] = np.flip(sub, axis=-3)
    return arr


def dm_pauli_channel(
    arr: np.ndarray, n: int, q: int, probs: tuple[float, float, float, float]
) -> np.ndarray:
    """Pauli channel p0*rho + px*X.rho.X + py*Y.rho.Y + pz*Z.rho.Z on qubit q.

    Single fused pass over the four (row-bit, col-bit) blocks:

        out[0,0] = (p0+pz)*b00 + (px+py)*b11      out[1,1] symmetric
        out[0,1] = (p0-pz)*b01 + (px-py)*b10      out[1,0] symmetric
    """
    p0, px, py, pz = probs
    h, _, l = _split(n, q)
    batch = arr.shape[:-2]
    a6 = arr.reshape(batch + (h, 2, l, h, 2, l))
    out = np.empty_like(arr)
    o6 = out.reshape(batch + (h, 2, l, h, 2, l))
    keep, swap = p0 + pz, px + py
    kee2, swa2 = p0 - pz, px - py
    np.multiply(a6[..., 0, :, :, 0, :], keep, out=o6[..., 0, :, :, 0, :])
    o6[..., 0, :, :, 0, :] += swap * a6[..., 1, :, :, 1, :]
    np.multiply(a6[..., 1, :, :, 1, :], keep, out=o6[..., 1, :, :, 1, :])
    o6[..., 1, :, :, 1, :] += swap * a6[..., 0, :, :, 0, :]
    np.multiply(a6[..., 0, :, :, 1, :], kee2, out=o6[..., 0, :, :, 1, :])
    o6[..., 0, :, :, 1, :] += swa2 * a6[..., 1, :, :, 0, :]
    np.multiply(a6[..., 1, :, :, 0, :], kee2, out=o6[..., 1, :, :, 0, :])
    o6[..., 1, :, :, 0, :] += swa2 * a6[..., 0, :, :, 1, :]
    return out


def dm_trace(arr: np.ndarray) -> np.ndarray:
    return np.einsum("...ii->...", arr)


def dm_measure_weights(arr: np.ndarray, n: int, q: int) -> tuple[np.ndarray, np.ndarray]:
    """Real weights (w0, w1) of a Z measurement on qubit q (not normalized)."""
    h, _, l = _split(n, q)
    diag = np.einsum("...ii->...i", arr).real
    d = diag.reshape(arr.shape[:-2] + (h, 2, l))
    w1 = d[..., 1, :].sum(axis=(-2, -1))
    w0 = d[..., 0, :].sum(axis=(-2, -1))
    return w0, w1


def dm_collapse(arr: np.ndarray, n: int, q: int, bit: int) -> np.ndarray:
    """Project qubit q onto |bit> and remove it (unnormalized)."""
    dim2 = 2 ** (n - 1)
    h, _, l = _split(n, q)
    batch = arr.shape[:-2]
    a = arr.reshape(batch + (h, 2, l, h, 2, l))
    return np.ascontiguousarray(a[..., bit, :, :, bit, :]).reshape(
        batch + (dim2, dim2)
    )


def dm_project_keep(arr: np.ndarray, n: int, q: int, bit: int) -> np.ndarray:
    """Pi rho Pi for Pi = |bit><bit| on qubit q, keeping the register size."""
    out = np.zeros_like(arr)
    h, _, l = _split(n, q)
    batch = arr.shape[:-2]
    a = arr.reshape(batch + (h, 2, l, h, 2, l))
    o = out.reshape(batch + (h, 2, l, h, 2, l))
    o[..., bit, :, :, bit, :] = a[..., bit, :, :, bit, :]
    return out


def dm_join(a: np.ndarray, na: int, b: np.ndarray, nb: int) -> np.ndarray:
    """Tensor product: a occupies qubits 0..na-1, b the ones above."""
    out = np.einsum("...ij,...kl->...kilj", a, b)
    dim = 2 ** (na + nb)
    return out.reshape(out.shape[: -4] + (dim, dim))


def dm_ptrace_qubit(arr: np.ndarray, n: int, q: int) -> np.ndarray:
    """Trace out qubit q."""
    dim2 = 2 ** (n - 1)
    h, _, l = _split(n, q)
    batch = arr.shape[:-2]
    a = arr.reshape(batch + (h, 2, l, h, 2, l))
    out = a[..., 0, :, :, 0, :] + a[..., 1, :, :, 1, :]
    return np.ascontiguousarray(out).reshape(batch + (dim2, dim2))


def dm_from_vec(vec: np.ndarray) -> np.ndarray:
    return np.einsum("...i,...j->...ij", vec, vec.conj())


# ---------------------------------------------------------------------------
# support-superoperator application (syndrome-measurement instruments)


def dm_gather_support(arr: np.ndarray, n: int, support: tuple[int, ...]) -> tuple:
    """Reorder a (2**n, 2**n) matrix into (s, rest, s', rest') with the
    support qubits gathered into the leading index pair.

    The support sub-index uses bit a for the a-th listed qubit.  Returns the
    gathered array (k-dim pairs leading) and the axis permutation needed to
    undo the reordering.
    """
    k = len(support)
    rest = [q for q in range(n) if q not in support]
    # axis of qubit q in the (2,)*n row unfolding is n-1-q
    row_axes = [n - 1 - q for q in reversed(support)] + [
        n - 1 - q for q in reversed(rest)
    ]
    col_axes = [n + ax for ax in row_axes]
    a = arr.reshape((2,) * n + (2,) * n)
    perm = row_axes + col_axes
    g = np.transpose(a, perm)
    inv = np.argsort(perm)
    return (
        np.ascontiguousarray(g).reshape(2**k, 2 ** (n - k), 2**k, 2 ** (n - k)),
        inv,
    )


def dm_scatter_support(
    g: np.ndarray, n: int, support: tuple[int, ...], inv: np.ndarray
) -> np.ndarray:
    """Inverse of dm_gather_support."""
    dim = 2**n
    a = g.reshape((2,) * (2 * n))
    return np.ascontiguousarray(np.transpose(a, inv)).reshape(dim, dim)


def dm_apply_support_superop(
    arr: np.ndarray, n: int, support: tuple[int, ...], stacked: np.ndarray
) -> list[np.ndarray]:
    """Apply superoperators acting on a subset of qubits.

    stacked has shape (m * d*d, d*d) for d = 2**len(support): m vertically
    stacked superoperators in the (row, col) -> flat vec convention of
    dm_gather_support.  Returns the m output matrices.
    """
    k = len(support)
    d = 2**k
    g, inv = dm_gather_support(arr, n, support)
    rest = g.shape[1]
    m = stacked.shape[0] // (d * d)
    mat = g.transpose(0, 2, 1, 3).reshape(d * d, rest * rest)
    res = stacked @ mat
    outs = []
    for i in range(m):
        block = res[i * d * d : (i + 1) * d * d].reshape(d, d, rest, rest)
        block = block.transpose(0, 2, 1, 3)
        outs.append(dm_scatter_support(block, n, support, inv))
    return outs


# ---------------------------------------------------------------------------
# teleportation measurement step

# register layout during teleportation: target data qubit at position 0,
# its control (ancilla-block partner) at position 7, m = 14 - k qubits total.


def _teleport_blocks(arr: np.ndarray, m: int):
    """View as (A, 2, B, 2) x (A, 2, B, 2) over (control bit, target bit)."""
    a_hi = 2 ** (m - 8)
    b_mid = 2**6
    return arr.reshape(a_hi, 2, b_mid, 2, a_hi, 2, b_mid, 2)


def dm_teleport_step(
    arr: np.ndarray,
    m: int,
    target_probs: tuple[float, float, float, float],
    control_probs: tuple[float, float, float, float] | None,
) -> tuple[np.ndarray, np.ndarray]:
    """CNOT(control=7 -> target=0), Pauli channels, measure-and-remove qubit 0.

    target_probs is the composed Pauli channel on the target (gate noise
    followed by measurement noise); control_probs, when not None, is applied
    to the control qubit after the CNOT.  Returns unnormalized (out0, out1)
    on m-1 qubits.  The CNOT is folded into block indexing, so the full
    post-CNOT matrix is never formed.
    """
    p0, px, py, pz = target_probs
    lam, mu = p0 + pz, px + py
    a = _teleport_blocks(arr, m)
    dim2 = 2 ** (m - 1)
    outs = []
    for b in (0, 1):
        out = np.empty(
            (2 ** (m - 8), 2, 2**6, 2 ** (m - 8), 2, 2**6), dtype=arr.dtype
        )
        for h in (0, 1):
            for hp in (0, 1):
                # post-CNOT block (q0=b, q7=h ; q0'=b, q7'=hp) reads the
                # pre-CNOT block (q0=b^h, q7=h ; q0'=b^hp, q7'=hp)
                blk = lam * a[:, h, :, b ^ h, :, hp, :, b ^ hp]
                blk += mu * a[:, h, :, 1 - (b ^ h), :, hp, :, 1 - (b ^ hp)]
                out[:, h, :, :, hp, :] = blk
        out = out.reshape(dim2, dim2)
        if control_probs is not None:
            out = dm_pauli_channel(out, m - 1, 6, control_probs)
        outs.append(out)
    return outs[0], outs[1]


def vec_teleport_step(arr: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Noiseless pure-state version of dm_teleport_step."""
    a = arr.reshape(2 ** (m - 8), 2, 2**6, 2)
    outs = []
    for b in (0, 1):
        out = np.empty((2 ** (m - 8), 2, 2**6), dtype=arr.dtype)
        for h in (0, 1):
            out[:, h, :] = a[:, h, :, b ^ h]
        outs.append(out.reshape(2 ** (m - 1)))
    return outs[0], outs[1]


def dm_teleport_first_step(
    data: np.ndarray,
    theta: np.ndarray,
    target_probs: tuple[float, float, float, float],
    control_probs: tuple[float, float, float, float] | None,
) -> tuple[np.ndarray, np.ndarray]:
    """First teleportation step computed from the 7-qubit factors.

    Equivalent to dm_teleport_step(dm_join(data, 7, theta, 7), 14, ...) but
    the 14-qubit joint matrix is never materialized: each 13-qubit output is
    assembled from Kronecker products of 64x64 sub-blocks.  Peak memory is
    one output matrix plus one sub-block.
    """
    p0, px, py, pz = target_probs
    lam, mu = p0 + pz, px + py
    d4 = data.reshape(64, 2, 64, 2)  # (rest, q0) rows x cols
    t4 = theta.reshape(64, 2, 64, 2)  # (rest, theta0) rows x cols
    outs = []
    for b in (0, 1):
        out = np.empty((64, 2, 64, 64, 2, 64), dtype=data.dtype)
        for h in (0, 1):
            for hp in (0, 1):
                dsub = lam * d4[:, b ^ h, :, b ^ hp]
                dsub += mu * d4[:, 1 - (b ^ h), :, 1 - (b ^ hp)]
                tsub = t4[:, h, :, hp]
                blk = np.multiply.outer(tsub, dsub)  # (tr, tc, dr, dc)
                out[:, h, :, :, hp, :] = blk.transpose(0, 2, 1, 3)
        out = out.reshape(2**13, 2**13)
        if control_probs is not None:
            out = dm_pauli_channel(out, 13, 6, control_probs)
        outs.append(out)
    return outs[0], outs[1]
