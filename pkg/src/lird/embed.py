"""Item embeddings from session logs.

Items are treated as words and the positively-engaged items of a session as
a sentence; skip-gram with negative sampling learns the vectors. Only the
input vectors are exposed as the embedding table, so items that never occur
in the corpus keep their seeded random initialization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Session


@dataclass
class EmbeddingTable:
    """catalog_size x d matrix of item vectors; rows indexed by item id."""

    vectors: np.ndarray

    @property
    def n_items(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def lookup(self, item: int) -> np.ndarray:
        if not 0 <= item < self.n_items:
            raise IndexError(f"item id {item} outside catalog of {self.n_items}")
        return self.vectors[item]

    def save(self, path) -> None:
        with open(path, "w", encoding="ascii") as fh:
            fh.write(f"{self.n_items} {self.dim}\n")
            for row in self.vectors:
                fh.write(" ".join(repr(float(x)) for x in row) + "\n")

    @classmethod
    def load(cls, path) -> "EmbeddingTable":
        with open(path, "r", encoding="ascii") as fh:
            header = fh.readline().split()
            n, d = int(header[0]), int(header[1])
            vectors = np.empty((n, d))
            for i in range(n):
                row = np.fromstring(fh.readline(), sep=" ")
                if row.shape != (d,):
                    raise ValueError(f"embedding row {i} has wrong width")
                vectors[i] = row
        return cls(vectors)

    def checksum(self) -> int:
        import zlib

        return zlib.crc32(np.ascontiguousarray(self.vectors).tobytes())


def build_corpus(sessions: list[Session]) -> list[list[int]]:
    """One sentence of positive items per session; empty sentences dropped."""
    corpus = [s.positive_items() for s in sessions]
    return [sent for sent in corpus if len(sent) >= 1]


def _sigmoid(x):
    out = np.empty_like(x, dtype=float)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _log_sigmoid(x):
    # stable: log sigma(x) = min(x, 0) - log1p(exp(-|x|))
    return np.minimum(x, 0.0) - np.log1p(np.exp(-np.abs(x)))


def sgns_loss_and_grad(w_in, w_out, centers, contexts, negatives):
    """Negative-sampling objective and exact gradients for one batch.

    centers, contexts: int arrays (B,); negatives: int array (B, m).
    Returns (mean loss, grad wrt w_in, grad wrt w_out).
    """
    v = w_in[centers]                     # (B, d)
    u_pos = w_out[contexts]               # (B, d)
    u_neg = w_out[negatives]              # (B, m, d)

    pos_logit = np.einsum("bd,bd->b", v, u_pos)
    neg_logit = np.einsum("bd,bmd->bm", v, u_neg)
    loss = -_log_sigmoid(pos_logit) - _log_sigmoid(-neg_logit).sum(axis=1)

    b = len(centers)
    g_pos = (_sigmoid(pos_logit) - 1.0) / b          # (B,)
    g_neg = _sigmoid(neg_logit) / b                  # (B, m)

    grad_in = np.zeros_like(w_in)
    grad_out = np.zeros_like(w_out)
    dv = g_pos[:, None] * u_pos + np.einsum("bm,bmd->bd", g_neg, u_neg)
    np.add.at(grad_in, centers, dv)
    np.add.at(grad_out, contexts, g_pos[:, None] * v)
    np.add.at(
        grad_out.reshape(-1, w_out.shape[1]),
        negatives.ravel(),
        (g_neg[:, :, None] * v[:, None, :]).reshape(-1, w_out.shape[1]),
    )
    return float(loss.mean()), grad_in, grad_out


def _skipgram_pairs(corpus, window):
    centers, contexts = [], []
    for sent in corpus:
        n = len(sent)
        for i, c in enumerate(sent):
            lo, hi = max(0, i - window), min(n, i + window + 1)
            for j in range(lo, hi):
                if j != i:
                    centers.append(c)
                    contexts.append(sent[j])
    return np.asarray(centers, dtype=np.int64), np.asarray(contexts, dtype=np.int64)


def train_embeddings(
    sessions: list[Session],
    catalog_size: int,
    d: int = 50,
    window: int = 5,
    n_negative: int = 5,
    epochs: int = 5,
    lr: float = 0.025,
    seed: int = 0,
    batch_size: int = 512,
    center: bool = True,
):
    """Train item vectors; returns (EmbeddingTable, per-epoch mean losses).

    With `center` the table is mean-centered after training. Skip-gram
    vectors share a large common direction that washes out cosine
    contrasts between item groups; removing the mean restores isotropy,
    so similarities downstream actually discriminate.
    """
    if d < 1 or window < 1:
        raise ValueError("need d >= 1 and window >= 1")
    rng = np.random.default_rng(seed)
    w_in = rng.uniform(-0.5 / d, 0.5 / d, size=(catalog_size, d))
    w_out = np.zeros((catalog_size, d))

    def finish(vectors):
        if center:
            vectors = vectors - vectors.mean(axis=0)
        return EmbeddingTable(vectors)

    corpus = build_corpus(sessions)
    if not corpus:
        raise ValueError("no positive items in any session; cannot train embeddings")
    if epochs == 0:
        return finish(w_in), []

    centers, contexts = _skipgram_pairs(corpus, window)
    if len(centers) == 0:
        return finish(w_in), []

    # Unigram^0.75 negative-sampling distribution over corpus items.
    counts = np.bincount(
        np.concatenate([np.asarray(s) for s in corpus]), minlength=catalog_size
    ).astype(float)
    neg_weights = counts**0.75
    neg_weights /= neg_weights.sum()

    epoch_losses = []
    for _ in range(epochs):
        order = rng.permutation(len(centers))
        losses = []
        for start in range(0, len(order), batch_size):
            idx = order[start : start + batch_size]
            negs = rng.choice(
                catalog_size, size=(len(idx), n_negative), p=neg_weights
            )
            loss, g_in, g_out = sgns_loss_and_grad(
                w_in, w_out, centers[idx], contexts[idx], negs
            )
            # grads are of the batch-mean loss; scale back to per-pair SGD
            w_in -= lr * len(idx) * g_in
            w_out -= lr * len(idx) * g_out
            losses.append(loss)
        epoch_losses.append(float(np.mean(losses)))
    return finish(w_in), epoch_losses


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine undefined for zero-norm vector")
    return float(a @ b / (na * nb))
