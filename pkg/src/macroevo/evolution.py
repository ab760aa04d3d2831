"""Population-based search: history buffer, context selection and the rollout scheduler.

Episodes run in batches that alternate between unguided rollouts and
rollouts driven by one provider query (one candidate per rollout). Every
result is legalized, scored by HPWL and appended to the history.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .cluster import kmeans
from .legalize import legalize
from .metrics import total_hpwl
from .netlist import Netlist, Placement, select_guidance_macros
from .providers import ProviderError
from .regions import SuggestionSet

log = logging.getLogger(__name__)

__all__ = ["Strategy", "PopulationEntry", "HistoryBuffer", "EvolutionConfig", "placement_vector",
           "kmeans", "select_context", "run", "RunResult", "Report", "summarize"]


class Strategy(str, enum.Enum):
    FIFO = "fifo"
    RANDOM = "random"
    BEST = "best"
    DIVERSE = "diverse"
    TOP_STRATIFIED = "top_stratified"

    @classmethod
    def parse(cls, s) -> "Strategy":
        if isinstance(s, cls):
            return s
        key = str(s).strip().lower().replace("-", "_").replace(" ", "_")
        aliases = {"ts": "top_stratified", "topstratified": "top_stratified"}
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise ValueError(f"unknown strategy {s!r}; expected one of {[m.value for m in cls]}") from None


@dataclass
class PopulationEntry:
    placement: Placement
    hpwl: float
    guided: bool
    episode: int
    seed: int
    candidate_index: int | None = None
    suggested: int = 0
    invalid: int = 0


class HistoryBuffer:
    """Append-only population in insertion order."""

    def __init__(self):
        self._entries: list[PopulationEntry] = []

    def append(self, e: PopulationEntry) -> None:
        self._entries.append(e)

    @property
    def entries(self) -> tuple[PopulationEntry, ...]:
        return tuple(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self):
        return iter(self._entries)

    def __getitem__(self, i):
        return self._entries[i]

    def best(self) -> PopulationEntry:
        if not self._entries:
            raise ValueError("empty history")
        return min(self._entries, key=lambda e: e.hpwl)


@dataclass(frozen=True)
class EvolutionConfig:
    episodes: int = 2000
    batch: int = 8
    context_length: int = 10
    strategy: Strategy = Strategy.TOP_STRATIFIED
    temperature: float = 0.43
    provider_candidates: int = 8
    seed: int = 0
    guidance_limit: int = 256

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy.parse(self.strategy))
        if self.context_length < 1:
            raise ValueError("context_length must be >= 1")
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")
        if self.batch < 1 or self.episodes < 0 or self.provider_candidates < 1:
            raise ValueError("batch and provider_candidates must be >= 1, episodes >= 0")

    @property
    def query_interval(self) -> int:
        return 2 * self.batch

    @property
    def expected_queries(self) -> int:
        batches = math.ceil(self.episodes / self.batch)
        return batches // 2


def placement_vector(entry, macro_order: Sequence[int]) -> np.ndarray:
    """``[x_1, y_1, ..., x_T, y_T]`` over ``macro_order``."""
    p = entry.placement if hasattr(entry, "placement") else entry
    idx = np.asarray(macro_order, dtype=np.int64)
    return np.stack([p.x[idx], p.y[idx]], axis=1).ravel()


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def _by_hpwl(entries, idx):
    # stable: ties keep insertion order
    return sorted(idx, key=lambda i: (entries[i].hpwl, i))


def cluster_population(entries, macro_order, k: int, rng) -> tuple[np.ndarray, np.ndarray]:
    vecs = np.stack([placement_vector(e, macro_order) for e in entries])
    return kmeans(vecs, k, seed=int(rng.integers(2**63)))


def rank_softmax(num: int, tau: float) -> np.ndarray:
    logits = -np.arange(num) / tau
    w = np.exp(logits - logits.max())
    return w / w.sum()


def select_context(h: HistoryBuffer, cfg: EvolutionConfig, seed=0,
                   macro_order: Sequence[int] | None = None) -> list[PopulationEntry]:
    """Choose up to ``cfg.context_length`` distinct entries as in-context examples."""
    entries = list(h)
    if not entries:
        raise ValueError("cannot select context from an empty history")
    C = cfg.context_length
    rng = _rng(seed)
    if len(entries) <= C and cfg.strategy is not Strategy.TOP_STRATIFIED:
        idx = list(range(len(entries)))
        return [entries[i] for i in (_by_hpwl(entries, idx) if cfg.strategy is Strategy.BEST else idx)]
    s = cfg.strategy
    if s is Strategy.FIFO:
        return entries[-C:]
    if s is Strategy.RANDOM:
        return [entries[int(i)] for i in rng.choice(len(entries), size=C, replace=False)]
    if s is Strategy.BEST:
        return [entries[i] for i in _by_hpwl(entries, range(len(entries)))[:C]]

    if macro_order is None:
        macro_order = _macro_order_from(entries[0].placement)
    k = min(C, len(entries))
    labels, centroids = cluster_population(entries, macro_order, k, rng)
    members = {c: _by_hpwl(entries, np.flatnonzero(labels == c).tolist()) for c in range(k)}
    nonempty = [c for c in range(k) if members[c]]

    if s is Strategy.DIVERSE:
        picked = [members[c][0] for c in nonempty]
        taken = set(picked)
        rest = [i for i in _by_hpwl(entries, range(len(entries))) if i not in taken]
        picked += rest[: C - len(picked)]
        return [entries[i] for i in _by_hpwl(entries, picked)]

    # top stratified: rank clusters by their best member
    ranked = sorted(nonempty, key=lambda c: (entries[members[c][0]].hpwl, members[c][0]))
    probs = rank_softmax(len(ranked), cfg.temperature)
    chosen = ranked[int(rng.choice(len(ranked), p=probs))]
    picked = list(members[chosen][:C])
    if len(picked) < C:
        dist = ((centroids - centroids[chosen]) ** 2).sum(axis=1)
        for c in sorted((c for c in nonempty if c != chosen), key=lambda c: (dist[c], c)):
            picked += members[c][: C - len(picked)]
            if len(picked) >= C:
                break
    return [entries[i] for i in picked]


def _macro_order_from(p: Placement) -> list[int]:
    # fallback when no netlist order is supplied: every placed node
    return [int(i) for i in np.flatnonzero(p.placed)]


@dataclass
class RunResult:
    history: HistoryBuffer
    queries: int
    errors: list[str] = field(default_factory=list)
    # (episode index of the batch start, invalid suggestions / offered) per guided batch
    fallback_series: list[tuple[int, float]] = field(default_factory=list)
    seed: int = 0

    @property
    def best_hpwl(self) -> float:
        return self.history.best().hpwl

    def best_curve(self) -> list[float]:
        out, best = [], math.inf
        for e in self.history:
            best = min(best, e.hpwl)
            out.append(best)
        return out


def episode_seed(seed: int, episode: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(episode)]).generate_state(1)[0])


def query_seed(seed: int, batch: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(batch), 1]).generate_state(1)[0])


def run(n: Netlist, placer, provider, cfg: EvolutionConfig, on_episode=None, strict: bool = False) -> RunResult:
    """Execute ``cfg.episodes`` rollouts, alternating unguided and guided batches.

    Rollout seeds depend only on (cfg.seed, episode), so a batch that falls
    back to unguided reproduces exactly what an unguided run would do there.
    With ``strict`` a provider failure propagates instead.
    """
    h = HistoryBuffer()
    sel_rng = np.random.default_rng(np.random.SeedSequence([int(cfg.seed), 0x5E1EC7]))
    macro_order = select_guidance_macros(n, cfg.guidance_limit)
    queries = 0
    errors: list[str] = []
    series: list[tuple[int, float]] = []
    batch_no = 0
    e = 0
    while e < cfg.episodes:
        size = min(cfg.batch, cfg.episodes - e)
        sets: list[SuggestionSet] = []
        if batch_no % 2 == 1 and provider is not None:
            context = select_context(h, cfg, sel_rng, macro_order)
            queries += 1
            try:
                got = provider.suggest(context, n, seed=query_seed(cfg.seed, batch_no))
                sets = [s for s in got if s]
                if not sets:
                    raise ProviderError("no parseable candidates in reply")
            except ProviderError as exc:
                if strict:
                    raise
                msg = f"batch {batch_no} (episodes {e}-{e + size - 1}): {exc}; running unguided"
                log.warning(msg)
                errors.append(msg)
                sets = []
        offered = invalid = 0
        for j in range(size):
            s = sets[j % len(sets)] if sets else None
            ep_seed = episode_seed(cfg.seed, e)
            out = placer.place(n, s, ep_seed)
            p = legalize(out.placement, n)
            entry = PopulationEntry(p, total_hpwl(n, p), s is not None, e, ep_seed,
                                    s.candidate_index if s is not None else None, out.suggested, out.invalid)
            h.append(entry)
            offered += out.suggested
            invalid += out.invalid
            if on_episode is not None:
                on_episode(entry)
            e += 1
        if sets:
            series.append((e - size, invalid / offered if offered else 0.0))
        batch_no += 1
    return RunResult(h, queries, errors, series, cfg.seed)


@dataclass
class Report:
    benchmark: str
    rows: list[dict]
    mean_best: float
    stderr_best: float | None

    def to_json(self) -> str:
        return json.dumps({"benchmark": self.benchmark, "seeds": self.rows,
                           "mean_best_hpwl": self.mean_best, "stderr_best_hpwl": self.stderr_best},
                          indent=2, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["seed", "best_hpwl", "queries", "guided", "unguided", "provider_errors"])
        for r in self.rows:
            w.writerow([r["seed"], repr(r["best_hpwl"]), r["queries"], r["guided"], r["unguided"],
                        r["provider_errors"]])
        w.writerow(["mean", repr(self.mean_best), "", "", "", ""])
        w.writerow(["stderr", "" if self.stderr_best is None else repr(self.stderr_best), "", "", "", ""])
        return buf.getvalue()

    def table_line(self, scale: float = 1.0) -> str:
        se = "n/a" if self.stderr_best is None else f"{self.stderr_best / scale:.2f}"
        return f"{self.benchmark}: {self.mean_best / scale:.2f} ± {se}"


def mean_stderr(values: Sequence[float]) -> tuple[float, float | None]:
    """Mean and standard error ``s / sqrt(k)`` with the sample (ddof=1) deviation."""
    v = np.asarray(values, dtype=float)
    if not v.size:
        raise ValueError("no values")
    if v.size < 2:
        return float(v.mean()), None
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size))


def summarize(benchmark: str, results: Sequence[RunResult]) -> Report:
    rows = []
    for r in results:
        guided = sum(1 for e in r.history if e.guided)
        rows.append({"seed": r.seed, "best_hpwl": r.best_hpwl, "queries": r.queries,
                     "guided": guided, "unguided": len(r.history) - guided,
                     "provider_errors": len(r.errors),
                     "fallback_series": [[int(a), float(b)] for a, b in r.fallback_series]})
    mean, se = mean_stderr([r["best_hpwl"] for r in rows])
    return Report(benchmark, rows, mean, se)
