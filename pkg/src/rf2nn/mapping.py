"""Direct tree-to-network mapping and network size accounting.

The mapped network has one first-layer neuron per split node, one
second-layer neuron per leaf and a linear output layer:

* split neuron ``s``: ``z = x[f(s)] - theta(s)``; the hard step is closed on
  the right, so it fires exactly when the forest routes right;
* leaf neuron ``l``: ``+1`` from splits where ``l`` lies right, ``-1`` where it
  lies left, bias ``0.5 - #right``; it is positive (0.5) only when every
  decision on the root-to-``l`` path agrees, otherwise at most -0.5;
* output: ``P_leaf(l) / n_trees`` from each leaf neuron.

Parameter counts are dense (structural zeros included) even though the
matrices are stored sparse.
"""

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.special import expit

MODES = ("hard", "soft")


@dataclass
class MappedNetwork:
    w1: sparse.csr_matrix
    b1: np.ndarray
    w2: sparse.csr_matrix
    b2: np.ndarray
    w3: np.ndarray
    b3: np.ndarray
    leaf_offsets: np.ndarray
    mode: str = "hard"
    beta: float = 1e4

    @property
    def layer_sizes(self):
        return [self.w1.shape[0], self.w1.shape[1], self.w2.shape[1], self.w3.shape[1]]

    @property
    def n_parameters(self):
        sizes = self.layer_sizes
        return sum(a * b + b for a, b in zip(sizes[:-1], sizes[1:]))

    def _act(self, z):
        if self.mode == "hard":
            return (z >= 0.0).astype(np.float64)
        return expit(self.beta * z)

    def forward(self, x, chunk=2048):
        x = np.asarray(x, dtype=np.float64)
        X = np.atleast_2d(x)
        if X.shape[1] != self.layer_sizes[0]:
            raise ValueError(f"network expects {self.layer_sizes[0]} inputs, got {X.shape[1]}")
        out = np.zeros((X.shape[0], self.w3.shape[1]))
        for lo in range(0, X.shape[0], chunk):
            h1 = self._act(np.asarray(X[lo:lo + chunk] @ self.w1) + self.b1)
            h2 = self._act(np.asarray(h1 @ self.w2) + self.b2)
            acc = out[lo:lo + chunk]
            # tree by tree, in the same order the forest averages its trees
            for a, b in zip(self.leaf_offsets[:-1], self.leaf_offsets[1:]):
                acc += h2[:, a:b] @ self.w3[a:b]
            acc += self.b3
        return out[0] if x.ndim == 1 else out

    def to_dict(self):
        """Dense document in the network JSON layout, plus activation info."""
        return {
            "layer_sizes": self.layer_sizes,
            "weights": [self.w1.toarray().tolist(), self.w2.toarray().tolist(), self.w3.tolist()],
            "biases": [self.b1.tolist(), self.b2.tolist(), self.b3.tolist()],
            "activation": "step" if self.mode == "hard" else "sigmoid",
            "beta": self.beta,
            "leaf_offsets": self.leaf_offsets.tolist(),
        }


def map_direct(rf, mode="hard", beta=1e4):
    """Two-hidden-layer network reproducing ``rf``."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    N, C, nt = rf.n_features, rf.n_classes, rf.n_trees
    s_rows, s_cols, b1 = [], [], []
    l_rows, l_cols, l_vals, b2, w3 = [], [], [], [], []
    leaf_offsets = [0]
    for tree in rf.trees:
        split_id = {}
        for s in tree.split_nodes:
            split_id[int(s)] = len(b1)
            s_rows.append(int(tree.feature[s]))
            s_cols.append(len(b1))
            b1.append(-float(tree.threshold[s]))
        for leaf, path in sorted(tree.leaf_paths().items()):
            j = len(b2)
            n_right = 0
            for s, went_right in path:
                l_rows.append(split_id[s])
                l_cols.append(j)
                l_vals.append(1.0 if went_right else -1.0)
                n_right += went_right
            b2.append(0.5 - n_right)
            w3.append(tree.value[leaf] / nt)
        leaf_offsets.append(len(b2))
    S, L = len(b1), len(b2)
    w1 = sparse.csr_matrix((np.ones(S), (s_rows, s_cols)), shape=(N, S))
    w2 = sparse.csr_matrix((l_vals, (l_rows, l_cols)), shape=(S, L))
    return MappedNetwork(w1, np.array(b1), w2, np.array(b2), np.array(w3).reshape(L, C),
                         np.zeros(C), np.array(leaf_offsets), mode, float(beta))


def count_parameters(net):
    """Weights plus biases, dense; accepts an Mlp or a MappedNetwork."""
    return int(net.n_parameters)


def direct_mapping_size(rf):
    """Parameter count of ``map_direct(rf)`` without building it."""
    S = sum(t.split_nodes.size for t in rf.trees)
    L = sum(t.leaf_nodes.size for t in rf.trees)
    N, C = rf.n_features, rf.n_classes
    return N * S + S + S * L + L + L * C + C


def _tree_blocks_size(tree, r, N, C):
    """Size of one tree cut into depth-``r`` blocks, output bias excluded.

    Each block is a small direct mapping (its splits against all inputs, its
    leaf slots against its splits). A slot is either a real leaf, which
    feeds the C outputs, or a cut split that roots a child block. A child
    block's leaf neurons take one extra gate input from their parent slot.
    """
    depth = tree.node_depths()
    total = 0
    pending = [(int(tree.root), True)]
    while pending:
        b, is_root = pending.pop()
        n_split, n_slot, n_real = 0, 0, 0
        stack = [b]
        while stack:
            n = stack.pop()
            if tree.is_leaf(n):
                n_slot += 1
                n_real += 1
            elif n != b and depth[n] - depth[b] >= r:
                n_slot += 1
                pending.append((n, False))
            else:
                n_split += 1
                stack += [int(tree.left[n]), int(tree.right[n])]
        total += n_split * (N + 1) + n_slot * (n_split + 1) + n_real * C
        if not is_root:
            total += n_slot
    return total


def split_mapping_size(rf, r):
    """Estimated parameter count of the subtree-splitting mapping at subtree depth ``r``."""
    if r < 1:
        raise ValueError("subtree depth must be >= 1")
    N, C = rf.n_features, rf.n_classes
    return sum(_tree_blocks_size(t, r, N, C) for t in rf.trees) + C


def best_split_mapping(rf):
    """Sweep every subtree depth; returns ``(best_r, best_size, {r: size})``."""
    max_depth = max(1, max(t.depth() for t in rf.trees))
    sizes = {r: split_mapping_size(rf, r) for r in range(1, max_depth + 1)}
    best = min(sizes, key=lambda r: (sizes[r], r))
    return best, sizes[best], sizes
