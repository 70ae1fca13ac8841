"""Session logs: schema, parsing, temporal split, and a synthetic generator.

A session log is line-delimited text, one session per line:

    session_id<TAB>prior:id,id,...<TAB>events:id:feedback,id:feedback,...

with feedback in {skip, click, order}. A catalog file lists one item id per
line with an optional whitespace-separated label.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

DEFAULT_REWARDS = {"skip": 0.0, "click": 1.0, "order": 5.0}


class Feedback(enum.Enum):
    SKIP = "skip"
    CLICK = "click"
    ORDER = "order"


@dataclass(frozen=True)
class Session:
    """One recommendation session: prior positives seed the initial state."""

    session_id: int
    prior_positives: tuple[int, ...]
    events: tuple[tuple[int, Feedback], ...]

    def positive_items(self) -> list[int]:
        """Prior positives plus clicked/ordered event items, in order."""
        out = list(self.prior_positives)
        out.extend(item for item, fb in self.events if fb is not Feedback.SKIP)
        return out


@dataclass(frozen=True)
class Catalog:
    n_items: int
    labels: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if self.n_items <= 0:
            raise ValueError("catalog must contain at least one item")


class SessionLogError(ValueError):
    """Malformed session-log line; carries the 1-based line number."""

    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


def _parse_feedback(token: str, lineno: int) -> Feedback:
    try:
        return Feedback(token)
    except ValueError:
        raise SessionLogError(lineno, f"unknown feedback token {token!r}") from None


def parse_session_line(line: str, lineno: int, n_items: int | None = None) -> Session:
    parts = line.rstrip("\n").split("\t")
    if len(parts) != 3:
        raise SessionLogError(lineno, f"expected 3 tab-separated fields, got {len(parts)}")
    sid_str, prior_part, events_part = parts
    try:
        sid = int(sid_str)
    except ValueError:
        raise SessionLogError(lineno, f"bad session id {sid_str!r}") from None
    if not prior_part.startswith("prior:"):
        raise SessionLogError(lineno, "second field must start with 'prior:'")
    if not events_part.startswith("events:"):
        raise SessionLogError(lineno, "third field must start with 'events:'")

    def check_item(tok: str) -> int:
        try:
            item = int(tok)
        except ValueError:
            raise SessionLogError(lineno, f"bad item id {tok!r}") from None
        if item < 0:
            raise SessionLogError(lineno, f"negative item id {item}")
        if n_items is not None and item >= n_items:
            raise SessionLogError(lineno, f"item id {item} >= catalog size {n_items}")
        return item

    prior_body = prior_part[len("prior:"):]
    prior = tuple(check_item(t) for t in prior_body.split(",") if t != "")
    events_body = events_part[len("events:"):]
    events = []
    for chunk in events_body.split(","):
        if chunk == "":
            continue
        if ":" not in chunk:
            raise SessionLogError(lineno, f"bad event {chunk!r}, expected id:feedback")
        item_tok, fb_tok = chunk.split(":", 1)
        events.append((check_item(item_tok), _parse_feedback(fb_tok, lineno)))
    return Session(sid, prior, tuple(events))


def format_session_line(session: Session) -> str:
    prior = ",".join(str(i) for i in session.prior_positives)
    events = ",".join(f"{i}:{fb.value}" for i, fb in session.events)
    return f"{session.session_id}\tprior:{prior}\tevents:{events}"


def load_sessions(path, n_items: int | None = None) -> list[Session]:
    """Parse a session log file. Raises SessionLogError with line numbers."""
    sessions = []
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            if line.strip() == "":
                continue
            sessions.append(parse_session_line(line, lineno, n_items))
    return sessions


def save_sessions(sessions, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        for s in sessions:
            fh.write(format_session_line(s) + "\n")


def load_catalog(path) -> Catalog:
    labels = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line == "":
                continue
            fields = line.split(None, 1)
            labels.append(fields[1] if len(fields) > 1 else "")
    return Catalog(n_items=len(labels), labels=tuple(labels))


def save_catalog(catalog: Catalog, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for i in range(catalog.n_items):
            label = catalog.labels[i] if i < len(catalog.labels) else ""
            fh.write(f"{i} {label}".rstrip() + "\n")


def split_sessions(sessions, train_fraction: float):
    """Temporal prefix split: first floor(fraction * total) sessions train."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must lie in (0,1), got {train_fraction}")
    cut = int(len(sessions) * train_fraction)
    return sessions[:cut], sessions[cut:]


def generate_synthetic(
    catalog_size: int,
    n_sessions: int,
    n_clusters: int,
    seed: int,
    events_per_session: int = 24,
    prior_len: int = 10,
    in_cluster_frac: float = 0.9,
    p_click_in: float = 0.20,
    p_order_in: float = 0.005,
    p_click_order: float = 0.03,
    p_order_order: float = 0.30,
    p_click_out: float = 0.01,
    p_order_out: float = 0.002,
    order_cluster: int = 1,
    cluster_zipf: float = 1.0,
) -> list[Session]:
    """Generate sessions from a latent-cluster preference model.

    Each synthetic user belongs to a preference cluster; the items shown in
    their sessions are mostly in-cluster, with occasional items from other
    clusters that are rarely engaged. Cluster popularity follows a Zipf-like
    profile, so the clusters are deliberately imbalanced.

    One cluster (`order_cluster`, clamped into range) is order-prone: its
    users mostly order in-cluster items. The remaining clusters are
    click-prone: their users click often but rarely order. Because clicks
    are far more numerous than orders while being worth much less reward,
    item popularity by positive count is intentionally misaligned with
    reward value. Deterministic for a fixed seed.
    """
    if n_clusters < 1 or catalog_size < n_clusters:
        raise ValueError("need catalog_size >= n_clusters >= 1")
    if n_sessions < 1:
        raise ValueError("at least one session must be requested")
    rng = np.random.default_rng(seed)
    order_cluster = min(order_cluster, n_clusters - 1)

    # Contiguous item blocks per cluster.
    bounds = np.linspace(0, catalog_size, n_clusters + 1).astype(int)
    cluster_items = [np.arange(bounds[c], bounds[c + 1]) for c in range(n_clusters)]
    cluster_weights = 1.0 / np.arange(1, n_clusters + 1) ** cluster_zipf
    cluster_weights /= cluster_weights.sum()

    sessions = []
    for sid in range(n_sessions):
        cluster = int(rng.choice(n_clusters, p=cluster_weights))
        own = cluster_items[cluster]
        prior = rng.choice(own, size=min(prior_len, own.size), replace=own.size < prior_len)
        events = []
        for _ in range(events_per_session):
            if n_clusters == 1 or rng.random() < in_cluster_frac:
                item = int(rng.choice(own))
            else:
                other = int((cluster + 1 + rng.integers(n_clusters - 1)) % n_clusters)
                item = int(rng.choice(cluster_items[other]))
            in_cluster = bounds[cluster] <= item < bounds[cluster + 1]
            if not in_cluster:
                p_click, p_order = p_click_out, p_order_out
            elif cluster == order_cluster:
                p_click, p_order = p_click_order, p_order_order
            else:
                p_click, p_order = p_click_in, p_order_in
            u = rng.random()
            if u < p_click:
                fb = Feedback.CLICK
            elif u < p_click + p_order:
                fb = Feedback.ORDER
            else:
                fb = Feedback.SKIP
            events.append((item, fb))
        sessions.append(Session(sid, tuple(int(i) for i in prior), tuple(events)))
    return sessions


def item_cluster_bounds(catalog_size: int, n_clusters: int) -> np.ndarray:
    """Cluster block boundaries matching generate_synthetic's layout."""
    return np.linspace(0, catalog_size, n_clusters + 1).astype(int)
