"""Survey tie networks: similarity, reciprocity, label tables, tie-type profiles."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from .features import FeatureMatrix
from .geodyads import Dyad, DyadSeries
from .ingest import TIE_TYPES, DAY_MS, StudyConfig, SurveyTie

TARGETS = ("friend", "close_given_friend", "change")
WEEK_MS = 7 * DAY_MS


@dataclass
class TieNetwork:
    """Directed 0/1 adjacency on a fixed roster; rows exist only for respondents."""

    wave: int
    tie_type: str
    nodes: list[str]
    adjacency: np.ndarray
    respondents: frozenset

    def __post_init__(self):
        self.adjacency = np.asarray(self.adjacency, dtype=np.int8)
        n = len(self.nodes)
        if self.adjacency.shape != (n, n):
            raise ValueError("adjacency shape does not match the roster")
        if np.any(np.diag(self.adjacency)):
            raise ValueError("self-loops are not allowed")
        self.index = {v: i for i, v in enumerate(self.nodes)}
        silent = [i for i, v in enumerate(self.nodes) if v not in self.respondents]
        if silent and self.adjacency[silent].any():
            raise ValueError("ties recorded for non-respondent egos")

    def tie(self, ego, alter) -> int:
        return int(self.adjacency[self.index[ego], self.index[alter]])

    def restricted(self, nodes: Sequence[str]) -> np.ndarray:
        idx = [self.index[v] for v in nodes]
        return self.adjacency[np.ix_(idx, idx)]

    def density(self) -> float:
        n = len(self.respondents)
        if n < 2:
            return 0.0
        sub = self.restricted(sorted(self.respondents))
        return float(sub.sum()) / (n * (n - 1))


def build_networks(ties: Iterable[SurveyTie], roster: Sequence[str] | None = None) -> dict[tuple[int, str], TieNetwork]:
    """One network per (wave, tie type). A node is a respondent of a wave if
    it appears as ego in any row of that wave."""
    ties = list(ties)
    nodes = sorted(set(roster) if roster is not None else {v for t in ties for v in (t.ego, t.alter)})
    index = {v: i for i, v in enumerate(nodes)}
    waves = sorted({t.wave for t in ties})
    respondents = {w: frozenset(t.ego for t in ties if t.wave == w) for w in waves}
    nets = {}
    for w in waves:
        for tt in TIE_TYPES:
            A = np.zeros((len(nodes), len(nodes)), dtype=np.int8)
            nets[(w, tt)] = (A, respondents[w])
    for t in ties:
        if t.value:
            nets[(t.wave, t.tie_type)][0][index[t.ego], index[t.alter]] = 1
    return {k: TieNetwork(k[0], k[1], nodes, A, r) for k, (A, r) in nets.items()}


def network_similarity(A, B, mode="pairs") -> float:
    """Overlap of two directed networks on their shared respondents.

    ``mode="pairs"`` divides the number of shared ties by the number of
    ordered node pairs, ``n (n - 1)``; ``mode="standard"`` is the Jaccard
    index of the two directed tie sets.
    """
    if isinstance(A, TieNetwork) and isinstance(B, TieNetwork):
        common = sorted(A.respondents & B.respondents & set(A.nodes) & set(B.nodes))
        if not common:
            raise ValueError("networks share no respondent nodes")
        a, b = A.restricted(common), B.restricted(common)
    else:
        a, b = np.asarray(A), np.asarray(B)
        if a.shape != b.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("adjacency matrices must be square and equal in shape")
        if a.shape[0] == 0:
            raise ValueError("networks share no nodes")
    a = a.astype(bool) & ~np.eye(len(a), dtype=bool)
    b = b.astype(bool) & ~np.eye(len(b), dtype=bool)
    shared = int((a & b).sum())
    if mode == "pairs":
        n = len(a)
        return shared / (n * (n - 1)) if n > 1 else 0.0
    if mode == "standard":
        union = int((a | b).sum())
        return shared / union if union else 0.0
    raise ValueError(f"unknown similarity mode {mode!r}")


def similarity_grid(networks: dict[tuple[int, str], TieNetwork], mode="pairs") -> pd.DataFrame:
    keys = sorted(networks, key=lambda k: (TIE_TYPES.index(k[1]), k[0]))
    labels = [f"{tt}@{w}" for w, tt in keys]
    grid = np.full((len(keys), len(keys)), np.nan)
    for i, ki in enumerate(keys):
        for j, kj in enumerate(keys):
            try:
                grid[i, j] = network_similarity(networks[ki], networks[kj], mode)
            except ValueError:
                pass
    return pd.DataFrame(grid, index=labels, columns=labels)


def reciprocity(A) -> float:
    """Fraction of ties whose reverse tie is also present (0 without ties)."""
    a = np.asarray(A.adjacency if isinstance(A, TieNetwork) else A).astype(bool)
    a = a & ~np.eye(len(a), dtype=bool)
    ties = int(a.sum())
    return int((a & a.T).sum()) / ties if ties else 0.0


# ------------------------------------------------------------ label tables


@dataclass
class LabelTable:
    target: str
    rows: pd.DataFrame  # ego, alter, wave, period, dyad_a, dyad_b, label, row

    def __len__(self):
        return len(self.rows)

    def design(self, fm: FeatureMatrix):
        """``X, y, groups, periods`` aligned with the table rows."""
        r = self.rows
        X = fm.values[r["row"].to_numpy(dtype=np.int64)] if len(r) else np.zeros((0, len(fm.columns)))
        y = r["label"].to_numpy(dtype=np.int64)
        groups = (r["dyad_a"] + "|" + r["dyad_b"]).to_numpy()
        return X, y, groups, r["period"].to_numpy()


def _period_for(target, wave):
    if target == "change":
        return f"P{wave}"
    return f"P{wave - 1}"


def build_label_tables(networks: dict[tuple[int, str], TieNetwork], feature_matrix: FeatureMatrix, target: str) -> LabelTable:
    """Join directed survey labels to undirected (dyad, period) feature rows.

    friend: A^(t) with features from the period ending at wave t, t = 2, 3.
    close_given_friend: the same rows restricted to friends, labelled by the
    close-friend bit. change: 1[A^(t) != A^(t+1)] with features of period t,
    t = 1, 2. Egos that did not answer a required wave yield no rows.
    """
    if target not in TARGETS:
        raise ValueError(f"unknown target {target!r}; expected one of {TARGETS}")
    records = []
    waves = (1, 2) if target == "change" else (2, 3)
    for t in waves:
        friend = networks.get((t, "friend"))
        if friend is None:
            continue
        later = networks.get((t + 1, "friend")) if target == "change" else None
        if target == "change" and later is None:
            continue
        close = networks.get((t, "close_friend"))
        period = _period_for(target, t)
        egos = friend.respondents if later is None else friend.respondents & later.respondents
        for ego in sorted(egos):
            for alter in friend.nodes:
                if alter == ego:
                    continue
                d = Dyad.of(ego, alter)
                row = feature_matrix.row_index(d.a, d.b, period)
                if row is None:
                    continue
                a_t = friend.tie(ego, alter)
                if target == "friend":
                    label = a_t
                elif target == "close_given_friend":
                    if not a_t:
                        continue
                    label = close.tie(ego, alter) if close is not None else 0
                else:
                    label = int(a_t != later.tie(ego, alter))
                records.append((ego, alter, t, period, d.a, d.b, label, row))
    rows = pd.DataFrame(records, columns=["ego", "alter", "wave", "period", "dyad_a", "dyad_b", "label", "row"])
    return LabelTable(target, rows)


# ---------------------------------------------------------- tie profiles


def tie_class(network: TieNetwork, i, j) -> str | None:
    if i not in network.respondents or j not in network.respondents:
        return None
    a, b = network.tie(i, j), network.tie(j, i)
    if a and b:
        return "mutual"
    return "one-way" if a or b else "none"


def tie_type_distance_profile(dyad_series: Iterable[DyadSeries], network: TieNetwork, config: StudyConfig,
                              region="both_on_campus") -> pd.DataFrame:
    """Weekly median pairwise distance per tie class, inside a region.

    Weeks count from the study start. Only bins where the region series is
    1 (both devices inside the region) contribute. Classes with no such bins
    in a week get NaN.
    """
    pools: dict[tuple[int, str], list[np.ndarray]] = {}
    n_weeks = int(np.ceil((config.study_end - config.study_start) / WEEK_MS))
    for ds in dyad_series:
        cls = tie_class(network, ds.dyad.a, ds.dyad.b)
        if cls is None:
            continue
        keep = (ds.binary_series[region] == 1) & ~np.isnan(ds.distance)
        if not keep.any():
            continue
        week = (ds.grid_starts[keep] - config.study_start) // WEEK_MS
        dist = ds.distance[keep]
        for w in np.unique(week):
            pools.setdefault((int(w), cls), []).append(dist[week == w])
    rows = []
    for w in range(n_weeks):
        for cls in ("mutual", "one-way", "none"):
            parts = pools.get((w, cls))
            if parts:
                d = np.concatenate(parts)
                rows.append((w, cls, float(np.median(d)), int(d.size)))
            else:
                rows.append((w, cls, np.nan, 0))
    return pd.DataFrame(rows, columns=["week", "tie_class", "median_distance_m", "n_bins"])
