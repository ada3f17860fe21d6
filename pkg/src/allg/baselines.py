"""Classical reference selectors: random, K-Means nearest-centroid, DCS.

Every selector produces a full deterministic ranking of the candidate
columns; callers take the top-m prefix for a given query budget.  A small
registry keys ranking functions by kind so the CLI and the evaluation
harness treat all selectors uniformly.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericalError
from .rng import substream


@dataclass
class SelectorSpec:
    """A selector kind plus its per-kind parameters."""

    kind: str
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.params.get("K", 1) < 1:
            raise ConfigError("kmeans K must be >= 1")
        if self.params.get("rank", 1) < 1:
            raise ConfigError("dcs rank must be >= 1")

    @property
    def label(self) -> str:
        return self.params.get("name", self.kind)


def select_random(n: int, m: int, seed: int) -> list:
    """m distinct uniform indices, deterministic under seed."""
    if m > n:
        raise ConfigError(f"cannot select m={m} from n={n} candidates")
    rng = substream(seed, "random_selector")
    return [int(i) for i in rng.permutation(n)[:m]]


def _farthest_point_init(x: np.ndarray, k: int, rng) -> np.ndarray:
    n = x.shape[1]
    first = int(rng.integers(n))
    chosen = [first]
    min_d = np.sum((x - x[:, [first]]) ** 2, axis=0)
    for _ in range(1, k):
        nxt = int(np.argmax(min_d))  # ties -> lowest index
        chosen.append(nxt)
        np.minimum(min_d, np.sum((x - x[:, [nxt]]) ** 2, axis=0), out=min_d)
    return x[:, chosen].copy()


def kmeans_fit(x: np.ndarray, k: int, seed: int, max_iter: int = 300):
    """Lloyd's algorithm with seeded farthest-point init.

    Returns (centroids d x k, assignments, within-cluster-SS history).
    Empty clusters are re-seeded to the point farthest from its centroid.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[1]
    if k > n:
        raise ConfigError(f"kmeans K={k} exceeds n={n}")
    rng = substream(seed, "kmeans")
    centroids = _farthest_point_init(x, k, rng)
    assign = np.full(n, -1)
    wcss_history = []
    for _ in range(max_iter):
        d2 = (
            np.sum(x * x, axis=0)[:, None]
            + np.sum(centroids * centroids, axis=0)[None, :]
            - 2.0 * x.T @ centroids
        )
        np.maximum(d2, 0.0, out=d2)
        new_assign = np.argmin(d2, axis=1)  # ties -> lowest cluster index
        for c in range(k):
            members = new_assign == c
            if not members.any():
                worst = int(np.argmax(d2[np.arange(n), new_assign]))
                centroids[:, c] = x[:, worst]
                new_assign[worst] = c
                members = new_assign == c
            centroids[:, c] = x[:, members].mean(axis=1)
        wcss = float(np.sum((x - centroids[:, new_assign]) ** 2))
        wcss_history.append(wcss)
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
    return centroids, assign, wcss_history


def select_kmeans(x: np.ndarray, m: int, k: int = 5, seed: int = 0) -> list:
    """Centroid-proximal ranking, round-robin across the K clusters."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[1]
    if m > n:
        raise ConfigError(f"cannot select m={m} from n={n} candidates")
    centroids, assign, _ = kmeans_fit(x, k, seed)
    dist = np.sqrt(np.sum((x - centroids[:, assign]) ** 2, axis=0))
    queues = []
    for c in range(k):
        members = np.where(assign == c)[0]
        order = np.lexsort((members, dist[members]))
        queues.append(list(members[order]))
    ranking = []
    while any(queues):
        for c in range(k):
            if queues[c]:
                ranking.append(int(queues[c].pop(0)))
    return ranking[:m]


def select_dcs(x: np.ndarray, m: int, rank: int) -> list:
    """Deterministic column sampling by top-`rank` subspace leverage.

    Column scores are the squared norms of each column's coordinates in
    the top-`rank` left singular basis (components with singular value
    below 1e-10 * sigma_max contribute nothing).
    """
    x = np.asarray(x, dtype=np.float64)
    d, n = x.shape
    if rank > min(d, n):
        raise ConfigError(f"dcs rank={rank} exceeds min(d, n)={min(d, n)}")
    if m > n:
        raise ConfigError(f"cannot select m={m} from n={n} candidates")
    try:
        u, s, _ = np.linalg.svd(x, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD failed on a {d}x{n} matrix: {exc}") from exc
    keep = s[:rank] > 1e-10 * (s[0] if s.size else 0.0)
    coords = (u[:, :rank][:, keep].T @ x) / s[:rank][keep][:, None]
    scores = np.sum(coords * coords, axis=0)
    order = np.argsort(-scores, kind="stable")  # ties -> lowest index
    return [int(i) for i in order[:m]]


# ---------------------------------------------------------------------------
# Selector registry: kind -> full-ranking function
# ---------------------------------------------------------------------------

_RANKERS = {}


def register_selector(kind: str, fn) -> None:
    """Register fn(x, spec, seed) -> full ranking under `kind`."""
    _RANKERS[kind] = fn


def rank_candidates(x: np.ndarray, spec: SelectorSpec, seed: int | None = None) -> list:
    """Full ranking of the columns of x by the selector `spec`."""
    if spec.kind not in _RANKERS:
        raise ConfigError(f"unknown selector kind {spec.kind!r}; "
                          f"known: {sorted(_RANKERS)}")
    return _RANKERS[spec.kind](x, spec, spec.seed if seed is None else seed)


register_selector("random", lambda x, spec, seed: select_random(x.shape[1], x.shape[1], seed))
register_selector(
    "kmeans",
    lambda x, spec, seed: select_kmeans(x, x.shape[1], k=spec.params.get("K", 5), seed=seed),
)
register_selector(
    "dcs",
    lambda x, spec, seed: select_dcs(x, x.shape[1], rank=spec.params.get("rank", 5)),
)
