"""Discrete-event simulator of the daisy-chained antenna-cluster topology.

Antennas are grouped into clusters wired in a line; only the last cluster
talks to the sink. A resource element (RE) is detected by passing a token --
the current symbol estimate plus control fields -- from cluster to cluster,
each applying its per-antenna updates. Channel rows and raw observations stay
on their node; tokens never carry them.

Time is modeled in abstract integer ticks. Clusters process one job at a time
and REs stay in order, so cluster ``c`` works on RE ``r`` while cluster
``c-1`` works on RE ``r+1``: the slot pipelines with fill delay ``C - 1`` at
unit cost. For RLS, the channel-only preprocessing runs once per coherence
block as its own pipelined job (the surrogate matrix is the handoff) with a
configurable tick cost, before the block's first data RE.

A power-save policy lets a cluster that receives an already-good estimate
(all of its per-antenna prediction-error magnitudes below a threshold) skip
its updates: ``freeze`` forwards the token unchanged, ``early_exit``
additionally marks it terminated so no later cluster touches it. The first
cluster has no chain predecessor and always processes.

The scheduler is a deterministic single-threaded event loop; detection math
reuses the exact step functions of :mod:`daisymimo.detectors`, so outputs are
bit-identical to a monolithic :func:`daisymimo.detectors.run_chain` run for
every partition of the array.
"""

from __future__ import annotations

import csv
import heapq
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import detectors
from .detectors import AsgdParams, AsgdState, EstimateVector, SgdParams
from .signal_model import ChannelMatrix

__all__ = [
    "ClusterNode",
    "CostModel",
    "PowerSavePolicy",
    "TimelineEntry",
    "TimelineReport",
    "TokenMessage",
    "TopologyConfig",
    "apply_power_save",
    "build_chain",
    "extend_chain",
    "simulate_slot",
]


@dataclass(frozen=True)
class TopologyConfig:
    """Array geometry: M antennas serving K users, split into C clusters of B."""

    m_antennas: int
    k_users: int
    c_clusters: int
    b_per_cluster: int

    def __post_init__(self):
        if self.c_clusters < 1 or self.b_per_cluster < 1:
            raise ValueError("cluster counts must be >= 1")
        if self.m_antennas != self.c_clusters * self.b_per_cluster:
            raise ValueError(
                f"M={self.m_antennas} is not C*B={self.c_clusters}*{self.b_per_cluster}"
            )

    @classmethod
    def from_clusters(cls, m: int, k: int, c: int) -> "TopologyConfig":
        if c < 1 or m % c != 0:
            raise ValueError(f"M={m} cannot be split into C={c} equal clusters")
        return cls(m_antennas=m, k_users=k, c_clusters=c, b_per_cluster=m // c)


@dataclass
class ClusterNode:
    """One cluster: B channel rows plus (per slot) its B observation samples per RE.

    CSI, observations and the preprocessing slice are node-local by contract;
    they are never placed on a :class:`TokenMessage`.
    """

    cluster_id: int
    local_csi: np.ndarray
    local_observations: Optional[np.ndarray] = None  # (R, B), set per slot
    precomp: Optional[detectors.RlsPrecomp] = None  # this cluster's slice

    @property
    def b_antennas(self) -> int:
        return self.local_csi.shape[0]

    @property
    def k_users(self) -> int:
        return self.local_csi.shape[1]


@dataclass
class TokenMessage:
    """The inter-cluster message: estimate, control fields, and (ASGD) raw iterate.

    Payload is K complex words for RLS/SGD and 2K for ASGD, which needs both
    the averaged estimate and the raw iterate downstream.
    """

    estimate: EstimateVector
    re_id: int
    aux_iterate: Optional[np.ndarray] = None
    terminated: bool = False

    @property
    def payload_complex_words(self) -> int:
        k = len(self.estimate.values)
        return 2 * k if self.aux_iterate is not None else k

    def copy(self) -> "TokenMessage":
        return TokenMessage(
            estimate=self.estimate.copy(),
            re_id=self.re_id,
            aux_iterate=None if self.aux_iterate is None else self.aux_iterate.copy(),
            terminated=self.terminated,
        )


@dataclass(frozen=True)
class PowerSavePolicy:
    """Skip rule: mode ``freeze`` or ``early_exit`` with an error-magnitude threshold.

    A cluster (other than the first) skips its updates when every one of its
    per-antenna prediction errors against the incoming state has magnitude
    strictly below ``threshold``; 0 therefore disables skipping.
    """

    mode: str
    threshold: float

    def __post_init__(self):
        if self.mode not in ("freeze", "early_exit"):
            raise ValueError(f"unknown power-save mode {self.mode!r}")
        if self.threshold < 0:
            raise ValueError("threshold must be >= 0")


def apply_power_save(mode: str, threshold: float) -> PowerSavePolicy:
    """Build the behavior modifier handed to :func:`simulate_slot`."""
    return PowerSavePolicy(mode=mode, threshold=threshold)


@dataclass(frozen=True)
class CostModel:
    """Tick costs: per cluster-RE processing step and per-cluster preprocessing job."""

    re_ticks: int = 1
    prep_ticks: int = 0

    def __post_init__(self):
        if self.re_ticks < 1 or self.prep_ticks < 0:
            raise ValueError("re_ticks must be >= 1 and prep_ticks >= 0")


@dataclass(frozen=True)
class TimelineEntry:
    cluster_id: int
    re_id: int  # -1 marks a preprocessing job
    start_tick: int
    end_tick: int
    skipped: bool = False


@dataclass
class TimelineReport:
    """Per-(cluster, RE) schedule of one slot plus its summary figures."""

    entries: list
    pipeline_delay: int
    total_ticks: int
    skipped_steps: int

    def validate(self) -> None:
        """Check pipeline causality: in-order within a cluster, r after r at c-1."""
        by_key = {(e.cluster_id, e.re_id): e for e in self.entries}
        for entry in self.entries:
            if entry.end_tick < entry.start_tick:
                raise ValueError(f"entry ends before it starts: {entry}")
            prev_re = by_key.get((entry.cluster_id, entry.re_id - 1))
            if prev_re is not None and entry.start_tick < prev_re.end_tick:
                raise ValueError(f"cluster {entry.cluster_id} ran RE {entry.re_id} out of order")
            upstream = by_key.get((entry.cluster_id - 1, entry.re_id))
            if upstream is not None and entry.start_tick < upstream.end_tick:
                raise ValueError(
                    f"cluster {entry.cluster_id} started RE {entry.re_id} before its predecessor finished"
                )

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["cluster_id", "re_id", "start_tick", "end_tick", "skipped_flag"])
            for e in self.entries:
                writer.writerow([e.cluster_id, e.re_id, e.start_tick, e.end_tick, int(e.skipped)])


def build_chain(topology: TopologyConfig, h: ChannelMatrix) -> list:
    """Partition the channel rows into C cluster nodes in antenna order."""
    if h.m_antennas != topology.m_antennas or h.k_users != topology.k_users:
        raise ValueError(
            f"channel is {h.m_antennas}x{h.k_users}, topology wants "
            f"{topology.m_antennas}x{topology.k_users}"
        )
    b = topology.b_per_cluster
    return [
        ClusterNode(cluster_id=c, local_csi=h.entries[c * b : (c + 1) * b])
        for c in range(topology.c_clusters)
    ]


def extend_chain(chain: Sequence[ClusterNode], extra_clusters: Sequence[ClusterNode]) -> list:
    """Append plug-and-play clusters; detection then covers the concatenated array."""
    merged = list(chain) + list(extra_clusters)
    if not merged:
        return []
    k = merged[0].k_users
    for node in merged:
        if node.k_users != k:
            raise ValueError(f"cluster K={node.k_users} does not match chain K={k}")
    return [
        ClusterNode(cluster_id=i, local_csi=node.local_csi)
        for i, node in enumerate(merged)
    ]


def _antenna_offsets(chain: Sequence[ClusterNode]) -> list:
    offsets, total = [], 0
    for node in chain:
        offsets.append(total)
        total += node.b_antennas
    return offsets


def _prep_cluster(node: ClusterNode, gamma_in: np.ndarray) -> np.ndarray:
    """Absorb this cluster's rows into the RLS surrogate; store local gains."""
    node.precomp = detectors.rls_preprocess(node.local_csi, gamma0=gamma_in, block_id=node.cluster_id)
    return node.precomp.gamma_final


def _probe_errors(node: ClusterNode, re_idx: int, reference: np.ndarray) -> np.ndarray:
    return node.local_observations[re_idx] - node.local_csi @ reference


def _process_re(node, algorithm, params, token, power_save, is_first_cluster):
    """Apply (or skip) one cluster's B antenna updates to a token.

    Returns ``(token_out, skipped)``. The arithmetic is delegated to the
    shared step functions so results match the monolithic chain bit for bit.
    """
    if token.terminated:
        return token.copy(), True

    if power_save is not None and not is_first_cluster:
        reference = token.aux_iterate if algorithm == "asgd" else token.estimate.values
        probe = _probe_errors(node, token.re_id, reference)
        if np.abs(probe).max() < power_save.threshold:
            out = token.copy()
            if power_save.mode == "early_exit":
                out.terminated = True
            return out, True

    y_local = node.local_observations[token.re_id]
    if algorithm == "rls":
        estimate = token.estimate
        for i in range(node.b_antennas):
            record = detectors.rls_step(
                estimate, node.local_csi[i], y_local[i], node.precomp.alphas[i], node.precomp.zs[i]
            )
            estimate = record.estimate_after
        return TokenMessage(estimate=estimate, re_id=token.re_id), False
    if algorithm == "sgd":
        estimate = token.estimate
        for i in range(node.b_antennas):
            record = detectors.sgd_step(
                estimate, node.local_csi[i], y_local[i], params.step_size(estimate.antenna_index + 1)
            )
            estimate = record.estimate_after
        return TokenMessage(estimate=estimate, re_id=token.re_id), False
    state = AsgdState(
        x=token.aux_iterate,
        s_avg=token.estimate.values,
        n=token.estimate.antenna_index,
        n0=params.n0,
    )
    for i in range(node.b_antennas):
        state = detectors.asgd_step(state, node.local_csi[i], y_local[i], params.step_size(state.n + 1))
    return TokenMessage(
        estimate=EstimateVector(state.s_avg, state.n),
        re_id=token.re_id,
        aux_iterate=state.x,
    ), False


def simulate_slot(
    chain: Sequence[ClusterNode],
    algorithm: str,
    re_batch: Sequence,
    params=None,
    s0=None,
    power_save: Optional[PowerSavePolicy] = None,
    cost: CostModel = CostModel(),
    message_log: Optional[list] = None,
):
    """Detect a batch of REs (one coherence block) over the pipelined chain.

    Every RE token traverses the clusters in order; clusters work on distinct
    REs concurrently. Returns ``(estimates, timeline)`` where ``estimates``
    holds the final :class:`EstimateVector` per RE in batch order.

    ``message_log``, when given, receives a copy of every inter-cluster token
    (chain handoffs plus the final delivery to the sink).
    """
    if algorithm not in detectors.ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}; expected one of {detectors.ALGORITHMS}")
    if algorithm == "sgd" and not isinstance(params, SgdParams):
        raise ValueError("sgd needs SgdParams")
    if algorithm == "asgd" and not isinstance(params, AsgdParams):
        raise ValueError("asgd needs AsgdParams")
    chain = list(chain)
    if not chain:
        raise ValueError("chain has no clusters")
    n_clusters = len(chain)
    n_re = len(re_batch)
    if n_re < 1:
        raise ValueError("re_batch must contain at least one resource element")
    offsets = _antenna_offsets(chain)
    m_total = offsets[-1] + chain[-1].b_antennas
    k = chain[0].k_users

    samples = np.stack([np.asarray(getattr(rv, "samples", rv)) for rv in re_batch])
    if samples.shape != (n_re, m_total):
        raise ValueError(f"observations have shape {samples.shape}, expected ({n_re}, {m_total})")
    for node, off in zip(chain, offsets):
        node.local_observations = samples[:, off : off + node.b_antennas]

    start_values = np.zeros(k, dtype=np.complex128) if s0 is None else np.asarray(
        getattr(s0, "values", s0), dtype=np.complex128
    ).copy()

    def fresh_token(re_id: int) -> TokenMessage:
        return TokenMessage(
            estimate=EstimateVector(start_values.copy(), 0),
            re_id=re_id,
            aux_iterate=start_values.copy() if algorithm == "asgd" else None,
        )

    # Deterministic event loop: jobs become ready when their upstream handoff
    # lands; a busy cluster queues them in arrival order.
    events = []  # (ready_tick, seq, cluster_idx, kind, payload)
    seq = 0
    if algorithm == "rls":
        heapq.heappush(events, (0, seq, 0, "prep", np.eye(k, dtype=np.complex128)))
        seq += 1
    for r in range(n_re):
        heapq.heappush(events, (0, seq, 0, "re", fresh_token(r)))
        seq += 1

    free_at = [0] * n_clusters
    entries = []
    outputs = [None] * n_re
    skipped_steps = 0

    while events:
        ready, _, c, kind, payload = heapq.heappop(events)
        start = max(ready, free_at[c])
        node = chain[c]
        if kind == "prep":
            gamma_out = _prep_cluster(node, payload)
            end = start + cost.prep_ticks
            entries.append(TimelineEntry(node.cluster_id, -1, start, end))
            if c + 1 < n_clusters:
                heapq.heappush(events, (end, seq, c + 1, "prep", gamma_out))
                seq += 1
        else:
            token_out, skipped = _process_re(node, algorithm, params, payload, power_save, c == 0)
            end = start + cost.re_ticks
            entries.append(TimelineEntry(node.cluster_id, payload.re_id, start, end, skipped))
            skipped_steps += int(skipped)
            if message_log is not None:
                message_log.append(token_out.copy())
            if c + 1 < n_clusters:
                heapq.heappush(events, (end, seq, c + 1, "re", token_out))
                seq += 1
            else:
                outputs[token_out.re_id] = token_out.estimate
        free_at[c] = end

    first_re = min(e.re_id for e in entries if e.re_id >= 0)
    re_starts = {
        e.cluster_id: e.start_tick for e in entries if e.re_id == first_re
    }
    pipeline_delay = re_starts[chain[-1].cluster_id] - re_starts[chain[0].cluster_id]
    report = TimelineReport(
        entries=entries,
        pipeline_delay=pipeline_delay,
        total_ticks=max(e.end_tick for e in entries),
        skipped_steps=skipped_steps,
    )
    return outputs, report
