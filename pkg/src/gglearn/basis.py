"""Pairwise basis functions and the flat feature layout built on them.

Every part of the library (synthetic game generator, sampling oracle,
learner, diagnostics) shares one vocabulary of two-argument functions
psi_k(x_i, x_j).  The built-in family is the set of sine/cosine products

    cos(2*pi*l*x_i) * cos(2*pi*m*x_j),   cos(2*pi*l*x_i) * sin(2*pi*m*x_j),
    sin(2*pi*l*x_i) * cos(2*pi*m*x_j),   sin(2*pi*l*x_i) * sin(2*pi*m*x_j),

for l, m in {1..order}, giving r = 4*order**2 functions on the unit square.
They are mutually orthogonal on [0,1]^2 (each with squared L2 norm 1/4) and
uniformly bounded by 1.

Indexing is 0-based everywhere.  Term k of the built-in family is the k-th
entry of the lexicographic enumeration over (l, m, combo) with combo running
through (cc, cs, sc, ss).  The flat feature layout for player i orders the
other players ascending (skipping i) and the r terms ascending within each
player, so entry ``pos(j)*r + k`` holds psi_k(x_i, x_j).
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "BasisSet",
    "FourierPairwiseBasis",
    "CustomBasis",
    "eval_basis",
    "feature_vector",
    "feature_matrix",
    "other_players",
    "flat_index",
    "flat_pairs",
    "support_columns",
    "basis_to_json",
    "basis_from_json",
]

_COMBOS = ("cc", "cs", "sc", "ss")


class BasisSet:
    """Interface for a set of ``r`` pairwise basis functions bounded by ``psi_bar``."""

    r: int
    psi_bar: float

    def profile(self, xi, xj) -> np.ndarray:
        """Evaluate all r functions at (xi, xj).

        ``xi`` and ``xj`` are broadcast against each other; the result has
        one trailing axis of length r.
        """
        raise NotImplementedError

    def term(self, k: int, xi, xj):
        """Evaluate function k only.  Raises IndexError for k outside 0..r-1."""
        if not 0 <= k < self.r:
            raise IndexError(f"basis index {k} out of range for r={self.r}")
        return self.profile(xi, xj)[..., k]

    def term_any(self, k: int, xi, xj):
        """Evaluate function k without the upper bound, if the family extends.

        Only families with a natural continuation beyond r (the built-in
        trigonometric one) support this; it backs the truncated-tail oracle.
        """
        raise NotImplementedError(
            "this basis does not define functions beyond index r-1"
        )


class FourierPairwiseBasis(BasisSet):
    """Products of sines and cosines of harmonics up to ``order`` per axis.

    r = 4*order**2, psi_bar = 1.  Beyond the retained block the family
    continues through frequency shells max(l, m) = order+1, order+2, ...,
    each shell enumerated lexicographically with the same four combos, so
    ``term_any`` is defined for every k >= 0.
    """

    def __init__(self, order: int):
        if order < 1:
            raise ValueError("order must be >= 1")
        self.order = int(order)
        self.r = 4 * self.order**2
        self.psi_bar = 1.0
        self._terms = [
            (l, m, combo)
            for l in range(1, self.order + 1)
            for m in range(1, self.order + 1)
            for combo in _COMBOS
        ]

    def __repr__(self):
        return f"FourierPairwiseBasis(order={self.order})"

    def __eq__(self, other):
        return isinstance(other, FourierPairwiseBasis) and other.order == self.order

    def __hash__(self):
        return hash(("fourier", self.order))

    def term_spec(self, k: int) -> tuple[int, int, str]:
        """(l, m, combo) of term k, valid for any k >= 0."""
        if k < 0:
            raise IndexError("basis index must be nonnegative")
        if k < self.r:
            return self._terms[k]
        base = self.r
        s = self.order + 1
        while True:
            shell = [(l, s) for l in range(1, s)] + [(s, m) for m in range(1, s + 1)]
            block = 4 * len(shell)
            if k < base + block:
                off = k - base
                l, m = shell[off // 4]
                return (l, m, _COMBOS[off % 4])
            base += block
            s += 1

    @staticmethod
    def _factor(combo_char: str, harmonic: int, x):
        ang = (2.0 * np.pi * harmonic) * np.asarray(x, dtype=float)
        return np.cos(ang) if combo_char == "c" else np.sin(ang)

    def profile(self, xi, xj) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        xj = np.asarray(xj, dtype=float)
        xi, xj = np.broadcast_arrays(xi, xj)
        harmonics = 2.0 * np.pi * np.arange(1, self.order + 1)
        ang_i = xi[..., None] * harmonics
        ang_j = xj[..., None] * harmonics
        ci, si = np.cos(ang_i), np.sin(ang_i)
        cj, sj = np.cos(ang_j), np.sin(ang_j)
        out = np.empty(xi.shape + (self.r,))
        for k, (l, m, combo) in enumerate(self._terms):
            a = ci[..., l - 1] if combo[0] == "c" else si[..., l - 1]
            b = cj[..., m - 1] if combo[1] == "c" else sj[..., m - 1]
            out[..., k] = a * b
        return out

    def term(self, k: int, xi, xj):
        if not 0 <= k < self.r:
            raise IndexError(f"basis index {k} out of range for r={self.r}")
        return self.term_any(k, xi, xj)

    def term_any(self, k: int, xi, xj):
        l, m, combo = self.term_spec(k)
        return self._factor(combo[0], l, xi) * self._factor(combo[1], m, xj)


class CustomBasis(BasisSet):
    """User-supplied evaluators with an explicitly declared uniform bound.

    ``funcs`` is a sequence of callables f(xi, xj) that must accept numpy
    arrays and broadcast.  The bound is never inferred; the caller owns it.
    """

    def __init__(self, funcs, psi_bar: float):
        funcs = tuple(funcs)
        if not funcs:
            raise ValueError("need at least one basis function")
        if not psi_bar > 0:
            raise ValueError("psi_bar must be positive and declared explicitly")
        self._funcs = funcs
        self.r = len(funcs)
        self.psi_bar = float(psi_bar)

    def __repr__(self):
        return f"CustomBasis(r={self.r}, psi_bar={self.psi_bar})"

    def profile(self, xi, xj) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        xj = np.asarray(xj, dtype=float)
        xi, xj = np.broadcast_arrays(xi, xj)
        out = np.empty(xi.shape + (self.r,))
        for k, f in enumerate(self._funcs):
            out[..., k] = f(xi, xj)
        return out

    def term(self, k: int, xi, xj):
        if not 0 <= k < self.r:
            raise IndexError(f"basis index {k} out of range for r={self.r}")
        return np.asarray(self._funcs[k](np.asarray(xi, float), np.asarray(xj, float)))


def eval_basis(basis: BasisSet, k: int, xi: float, xj: float) -> float:
    """Value of basis function k at the pair (xi, xj)."""
    if not (np.isfinite(xi) and np.isfinite(xj)):
        raise ValueError("actions must be finite")
    return float(basis.term(k, xi, xj))


def other_players(i: int, n: int) -> list[int]:
    """Ascending player indices excluding i; the row order of the flat layout."""
    if not 0 <= i < n:
        raise IndexError(f"player {i} out of range for n={n}")
    return [j for j in range(n) if j != i]


def flat_index(i: int, j: int, k: int, n: int, r: int) -> int:
    """Flat position of pair (j, k) in player i's feature vector."""
    if j == i:
        raise IndexError("a player is never its own feature")
    if not 0 <= j < n:
        raise IndexError(f"player {j} out of range for n={n}")
    if not 0 <= k < r:
        raise IndexError(f"basis index {k} out of range for r={r}")
    pos = j if j < i else j - 1
    return pos * r + k


def flat_pairs(i: int, n: int, r: int) -> list[tuple[int, int]]:
    """(j, k) for every flat position of player i's feature vector, in order."""
    return [(j, k) for j in other_players(i, n) for k in range(r)]


def support_columns(i: int, neighbors, n: int, r: int) -> np.ndarray:
    """Flat columns belonging to the given in-neighbor set of player i."""
    cols = [flat_index(i, j, k, n, r) for j in sorted(neighbors) for k in range(r)]
    return np.asarray(cols, dtype=np.intp)


def feature_matrix(basis: BasisSet, i: int, actions: np.ndarray) -> np.ndarray:
    """Stacked feature vectors for player i over a batch of joint actions.

    ``actions`` has shape (N, n); the result has shape (N, r*(n-1)) with the
    flat layout documented at module level.
    """
    actions = np.asarray(actions, dtype=float)
    if actions.ndim != 2:
        raise ValueError("actions must be a 2-d array of shape (N, n)")
    n = actions.shape[1]
    blocks = [basis.profile(actions[:, i], actions[:, j]) for j in other_players(i, n)]
    return np.concatenate(blocks, axis=1)


def feature_vector(basis: BasisSet, i: int, x) -> np.ndarray:
    """Feature vector of one joint action; entry pos(j)*r + k is psi_k(x_i, x_j)."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("x must be a 1-d joint action")
    return feature_matrix(basis, i, x[None, :])[0]


def all_feature_matrices(basis: BasisSet, actions: np.ndarray) -> list[np.ndarray]:
    """Design matrices for every player over one action batch.

    Equivalent to ``[feature_matrix(basis, i, actions) for i in range(n)]``;
    the built-in family takes a vectorized path (trig per player computed
    once, pair blocks as outer products) that the learner's hot loops rely on.
    """
    actions = np.asarray(actions, dtype=float)
    if actions.ndim != 2:
        raise ValueError("actions must be a 2-d array of shape (N, n)")
    n = actions.shape[1]
    if not isinstance(basis, FourierPairwiseBasis):
        return [feature_matrix(basis, i, actions) for i in range(n)]
    order = basis.order
    n_samples = actions.shape[0]
    harmonics = 2.0 * np.pi * np.arange(1, order + 1)
    ang = actions[..., None] * harmonics  # (N, n, order)
    factors = np.stack([np.cos(ang), np.sin(ang)], axis=2)  # (N, n, 2, order)
    out = []
    for i in range(n):
        # outer products over (l, m, trig combo); C-order flatten of
        # (l, m, a, b) matches the lexicographic term enumeration
        tensor = np.einsum("nal,njbm->njlmab", factors[:, i], factors)
        tensor = tensor.reshape(n_samples, n, basis.r)
        keep = [j for j in range(n) if j != i]
        out.append(tensor[:, keep, :].reshape(n_samples, (n - 1) * basis.r))
    return out


def basis_to_json(basis: BasisSet) -> dict:
    """JSON-able description.  Custom evaluators are code, only metadata is kept."""
    if isinstance(basis, FourierPairwiseBasis):
        return {"kind": "fourier", "order": basis.order}
    return {"kind": "custom", "r": basis.r, "psi_bar": basis.psi_bar}


def basis_from_json(obj: dict) -> BasisSet:
    """Rebuild a basis from its JSON description (built-in kinds only)."""
    kind = obj.get("kind")
    if kind == "fourier":
        return FourierPairwiseBasis(int(obj["order"]))
    if kind == "custom":
        raise ValueError(
            "custom bases carry code, not data; re-create them in code and "
            "declare psi_bar explicitly"
        )
    raise ValueError(f"unknown basis kind: {kind!r}")
