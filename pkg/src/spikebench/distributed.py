"""Partitioning, spike exchange, and run drivers.

Columns are assigned to ranks round-robin in row-major order.  Spikes
travel as bare source ids; each rank holds, for every source that
projects onto it, that source's synapses with rank-local targets
(replicated incoming tables built at partition time), and expands
received ids through them.  One frame (possibly empty) flows along every
edge of the static communication graph every step; the empty frames
double as the step barrier.

Wire format (all little-endian):

    magic   4 bytes  "DPSN"
    version 1 byte   = 1
    sender  u16      rank of the sending side
    step    u32
    count   u32
    payload count * u32 source ids

Transports implement per-pair FIFO, reliable delivery: an in-memory
queue fabric for ranks running as threads of one process, and a TCP
stream transport (one duplex connection per coupled rank pair,
rendezvoused from a `rank host:port` cluster file).
"""

import queue
import socket
import struct
import threading
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .engine import Engine, RunMetrics, StimulusSpec
from .errors import (
    ConfigError,
    ExchangeError,
    FrameCorruptionError,
    InfeasiblePartitionError,
    ProtocolViolationError,
)
from .neurons import AdaptiveLifParams
from .network import Network
from .plasticity import StdpParams, StdpState

__all__ = [
    "PartitionMap",
    "RankPartition",
    "partition",
    "encode_frame",
    "decode_frame",
    "FRAME_MAGIC",
    "FRAME_VERSION",
    "InMemoryFabric",
    "TcpTransport",
    "Communicator",
    "parse_cluster_file",
    "run_simulation",
    "run_single_rank",
]

FRAME_MAGIC = b"DPSN"
FRAME_VERSION = 1
_HEADER = struct.Struct("<4sBHII")
HEADER_SIZE = _HEADER.size  # 15 bytes


@dataclass(frozen=True)
class PartitionMap:
    """Column -> rank assignment (round-robin over row-major column ids)."""

    n_ranks: int
    neurons_per_column: int
    column_to_rank: np.ndarray

    def rank_of_column(self, cid) -> np.ndarray:
        return self.column_to_rank[np.asarray(cid)]

    def rank_of_neuron(self, gid) -> np.ndarray:
        return self.column_to_rank[np.asarray(gid) // self.neurons_per_column]


@dataclass
class RankPartition:
    """One rank's view of the network.

    ``in_offsets[s]:in_offsets[s+1]`` indexes, for ANY global source s,
    the synapses of s that target neurons owned by this rank; targets are
    rank-local indices into ``local_gids``.  ``peer_sources[r]`` lists,
    per outgoing peer, which local sources must be announced to rank r.
    """

    rank: int
    model: str
    n_slots: int
    local_gids: np.ndarray            # int64, ascending
    local_excitatory: np.ndarray      # bool per local neuron
    source_excitatory: np.ndarray     # bool per global neuron
    in_offsets: np.ndarray            # int64, n_global + 1
    in_targets: np.ndarray            # int32, local indices
    in_weights: np.ndarray            # float64
    in_delays: np.ndarray             # int16
    out_peers: List[int] = field(default_factory=list)
    in_peers: List[int] = field(default_factory=list)
    peer_sources: Dict[int, np.ndarray] = field(default_factory=dict)
    gid_to_local: Optional[np.ndarray] = None

    @property
    def n_local(self) -> int:
        return len(self.local_gids)


def partition(net: Network, n_ranks: int, w_exc_scale: float = 1.0
              ) -> Tuple[PartitionMap, List[RankPartition]]:
    """Split the network over ``n_ranks`` ranks.

    The union of the per-rank incoming tables is exactly the full synapse
    multiset, and every per-rank structure depends only on (network,
    n_ranks), never on construction order.  ``w_exc_scale`` multiplies
    excitatory weights (the calibration knob).
    """
    spec = net.spec
    if n_ranks < 1:
        raise InfeasiblePartitionError(f"need at least one rank, got {n_ranks}")
    if n_ranks > spec.n_columns:
        raise InfeasiblePartitionError(
            f"{n_ranks} ranks exceed the {spec.n_columns} available columns"
        )
    npc = spec.neurons_per_column
    n = net.n_neurons
    column_to_rank = (np.arange(spec.n_columns) % n_ranks).astype(np.int32)
    pmap = PartitionMap(n_ranks=n_ranks, neurons_per_column=npc,
                        column_to_rank=column_to_rank)
    gids = np.arange(n, dtype=np.int64)
    neuron_rank = column_to_rank[gids // npc]
    exc = np.asarray(net.is_excitatory(gids))
    scaled_weights = np.where(
        np.repeat(exc, net.fanouts), net.weights * w_exc_scale, net.weights
    )
    n_slots = int(net.delay_steps.max()) + 1 if net.total_synapses else 2
    # ring length is a global property; all ranks must agree
    delay_hi = int(round(spec.delay_max_ms / net.dt_ms))
    n_slots = max(n_slots, delay_hi + 1)

    target_rank = neuron_rank[net.targets]
    source_of_syn = np.repeat(gids, net.fanouts)

    parts = []
    for r in range(n_ranks):
        local_mask = neuron_rank == r
        local_gids = gids[local_mask]
        gid_to_local = np.full(n, -1, dtype=np.int64)
        gid_to_local[local_gids] = np.arange(len(local_gids))

        syn_mask = target_rank == r
        syn_idx = np.flatnonzero(syn_mask)
        src = source_of_syn[syn_idx]
        # synapses are already source-ordered, so src is non-decreasing
        counts = np.bincount(src, minlength=n)
        in_offsets = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(counts, out=in_offsets[1:])
        in_targets = gid_to_local[net.targets[syn_idx]].astype(np.int32)
        in_weights = scaled_weights[syn_idx].copy()
        in_delays = net.delay_steps[syn_idx].copy()

        parts.append(RankPartition(
            rank=r,
            model=net.model,
            n_slots=n_slots,
            local_gids=local_gids,
            local_excitatory=exc[local_gids],
            source_excitatory=exc,
            in_offsets=in_offsets,
            in_targets=in_targets,
            in_weights=in_weights,
            in_delays=in_delays,
            gid_to_local=gid_to_local,
        ))

    # communication graph: rank a sends to rank b if some a-local source
    # has a synapse whose target lives on b
    if n_ranks > 1:
        source_rank_of_syn = neuron_rank[source_of_syn]
        for r, part in enumerate(parts):
            mine = source_rank_of_syn == r
            remote = mine & (target_rank != r)
            pairs = np.unique(
                np.stack([source_of_syn[remote], target_rank[remote]], axis=1), axis=0
            )
            out_peers = sorted(int(p) for p in np.unique(pairs[:, 1]))
            part.out_peers = out_peers
            for peer in out_peers:
                part.peer_sources[peer] = pairs[pairs[:, 1] == peer, 0]
        for r, part in enumerate(parts):
            part.in_peers = sorted(
                p.rank for p in parts if r in p.out_peers
            )
    return pmap, parts


def encode_frame(sender_rank: int, step: int, spikes) -> bytes:
    """Serialize one spike frame."""
    spikes = np.asarray(spikes, dtype=np.uint32)
    if spikes.size >= 2**32:
        raise ConfigError(["frame spike count exceeds u32"])
    header = _HEADER.pack(FRAME_MAGIC, FRAME_VERSION, sender_rank, step, spikes.size)
    return header + spikes.astype("<u4").tobytes()


def decode_frame(buf: bytes) -> Tuple[int, int, np.ndarray]:
    """Parse and validate one spike frame -> (sender, step, source ids)."""
    if len(buf) < HEADER_SIZE:
        raise FrameCorruptionError(f"frame shorter than the {HEADER_SIZE}-byte header")
    magic, version, sender, step, count = _HEADER.unpack_from(buf)
    if magic != FRAME_MAGIC:
        raise FrameCorruptionError(f"bad frame magic {magic!r}")
    if version != FRAME_VERSION:
        raise FrameCorruptionError(f"unsupported frame version {version}")
    expected = HEADER_SIZE + 4 * count
    if len(buf) != expected:
        raise FrameCorruptionError(
            f"frame length {len(buf)} does not match declared count {count} "
            f"(expected {expected})"
        )
    spikes = np.frombuffer(buf, dtype="<u4", offset=HEADER_SIZE).astype(np.uint32)
    return sender, step, spikes


class InMemoryFabric:
    """Loopback queue fabric for ranks running as threads."""

    def __init__(self, n_ranks: int):
        self.n_ranks = n_ranks
        self._queues = {
            (src, dst): queue.Queue()
            for src in range(n_ranks) for dst in range(n_ranks) if src != dst
        }

    def endpoint(self, rank: int) -> "InMemoryTransport":
        return InMemoryTransport(self, rank)


class InMemoryTransport:
    def __init__(self, fabric: InMemoryFabric, rank: int):
        self.fabric = fabric
        self.rank = rank

    def send(self, to_rank: int, frame: bytes) -> None:
        self.fabric._queues[(self.rank, to_rank)].put(frame)

    def recv(self, from_rank: int, timeout: float) -> bytes:
        try:
            return self.fabric._queues[(from_rank, self.rank)].get(timeout=timeout)
        except queue.Empty:
            raise ExchangeError(
                f"rank {self.rank} timed out waiting for rank {from_rank}",
                rank=from_rank,
            ) from None

    def close(self) -> None:
        pass


def parse_cluster_file(path) -> Dict[int, Tuple[str, int]]:
    """Read `rank host:port` lines into {rank: (host, port)}."""
    cluster = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                rank_s, addr = line.split()
                host, port_s = addr.rsplit(":", 1)
                cluster[int(rank_s)] = (host, int(port_s))
            except ValueError:
                raise ConfigError(
                    [f"{path}:{lineno}: expected 'rank host:port', got {line!r}"]
                ) from None
    return cluster


class TcpTransport:
    """One duplex TCP connection per coupled rank pair.

    For each pair (a, b) with a < b, b connects to a's listen address and
    announces itself with a u16 rank hello.  Frames are length-delimited
    by the header's count field.
    """

    def __init__(self, rank: int, cluster: Dict[int, Tuple[str, int]],
                 peers: List[int], timeout: float = 30.0):
        self.rank = rank
        self.timeout = timeout
        self._socks: Dict[int, socket.socket] = {}
        accept_from = sorted(p for p in peers if p > rank)
        connect_to = sorted(p for p in peers if p < rank)

        listener = None
        if accept_from:
            host, port = cluster[rank]
            listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
            listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
            listener.bind((host, port))
            listener.listen(len(accept_from))
            listener.settimeout(timeout)
        try:
            for peer in connect_to:
                self._socks[peer] = self._connect(cluster[peer], peer)
            remaining = set(accept_from)
            while remaining:
                try:
                    conn, _ = listener.accept()
                except socket.timeout:
                    raise ExchangeError(
                        f"rank {self.rank} timed out accepting peers {sorted(remaining)}",
                        rank=sorted(remaining)[0],
                    ) from None
                conn.settimeout(timeout)
                conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
                hello = self._read_exact(conn, 2, context="rank hello")
                peer = struct.unpack("<H", hello)[0]
                if peer not in remaining:
                    raise ProtocolViolationError(
                        f"unexpected hello from rank {peer} at rank {self.rank}"
                    )
                remaining.discard(peer)
                self._socks[peer] = conn
        finally:
            if listener is not None:
                listener.close()

    def _connect(self, addr, peer: int) -> socket.socket:
        deadline = time.monotonic() + self.timeout
        last_err = None
        while time.monotonic() < deadline:
            try:
                sock = socket.create_connection(addr, timeout=self.timeout)
                sock.settimeout(self.timeout)
                sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
                sock.sendall(struct.pack("<H", self.rank))
                return sock
            except OSError as err:
                last_err = err
                time.sleep(0.05)
        raise ExchangeError(
            f"rank {self.rank} could not reach rank {peer} at {addr}: {last_err}",
            rank=peer,
        )

    @staticmethod
    def _read_exact(sock: socket.socket, count: int, context: str = "frame") -> bytes:
        chunks = []
        got = 0
        while got < count:
            try:
                chunk = sock.recv(count - got)
            except socket.timeout:
                raise ExchangeError(f"timed out reading {context}") from None
            if not chunk:
                raise ExchangeError(f"peer disconnected while reading {context}")
            chunks.append(chunk)
            got += len(chunk)
        return b"".join(chunks)

    def send(self, to_rank: int, frame: bytes) -> None:
        self._socks[to_rank].sendall(frame)

    def recv(self, from_rank: int, timeout: float) -> bytes:
        sock = self._socks[from_rank]
        sock.settimeout(timeout)
        try:
            header = self._read_exact(sock, HEADER_SIZE)
            count = struct.unpack_from("<I", header, 11)[0]
            payload = self._read_exact(sock, 4 * count) if count else b""
        except ExchangeError as err:
            raise ExchangeError(
                f"rank {self.rank} lost rank {from_rank}: {err}", rank=from_rank
            ) from None
        return header + payload

    def close(self) -> None:
        for sock in self._socks.values():
            try:
                sock.close()
            except OSError:
                pass


class Communicator:
    """Per-step spike exchange for one rank over a transport."""

    def __init__(self, part: RankPartition, transport, timeout: float = 30.0):
        self.part = part
        self.transport = transport
        self.timeout = timeout
        self._last_step_from = {p: -1 for p in part.in_peers}

    def exchange(self, step: int, spiked_gids: np.ndarray) -> np.ndarray:
        """Send this step's local spikes, block for every incoming peer's
        frame for the same step, and return the union of remote spikes."""
        part = self.part
        for peer in part.out_peers:
            relevant = part.peer_sources[peer]
            outgoing = spiked_gids[np.isin(spiked_gids, relevant)] if len(spiked_gids) else spiked_gids
            self.transport.send(peer, encode_frame(part.rank, step, outgoing))
        remote = []
        for peer in part.in_peers:
            try:
                frame = self.transport.recv(peer, self.timeout)
            except ExchangeError as err:
                raise ExchangeError(
                    f"rank {part.rank} missing frame from rank {peer} at step {step}: {err}",
                    rank=peer, step=step,
                ) from None
            sender, got_step, spikes = decode_frame(frame)
            if sender != peer:
                raise ProtocolViolationError(
                    f"frame on pair ({peer}->{part.rank}) claims sender {sender}"
                )
            if got_step != step:
                raise ProtocolViolationError(
                    f"rank {part.rank} expected step {step} from rank {peer}, got {got_step}"
                )
            if got_step <= self._last_step_from[peer]:
                raise ProtocolViolationError(
                    f"non-increasing step {got_step} from rank {peer}"
                )
            self._last_step_from[peer] = got_step
            if len(spikes):
                self._validate_remote(peer, spikes)
                remote.append(spikes.astype(np.int64))
        if not remote:
            return np.empty(0, dtype=np.int64)
        return np.concatenate(remote)

    def _validate_remote(self, peer: int, spikes: np.ndarray) -> None:
        part = self.part
        n_global = len(part.in_offsets) - 1
        s64 = spikes.astype(np.int64)
        if (s64 >= n_global).any():
            bad = int(s64[s64 >= n_global][0])
            raise ProtocolViolationError(f"unknown source id {bad} from rank {peer}")
        has_local = part.in_offsets[s64 + 1] > part.in_offsets[s64]
        if not has_local.all():
            bad = int(s64[~has_local][0])
            raise ProtocolViolationError(
                f"source {bad} from rank {peer} has no synapses on rank {part.rank}"
            )


def _rank_loop(engine: Engine, comm: Optional[Communicator], n_steps: int) -> None:
    for t in range(n_steps):
        spiked = engine.step(t)
        if comm is not None and (comm.part.out_peers or comm.part.in_peers):
            remote = comm.exchange(t, spiked)
            merged = np.sort(np.concatenate([spiked, remote])) if len(remote) else spiked
        else:
            merged = spiked
        engine.deliver(t, merged)
        engine.advance()


def _make_engine(part: RankPartition, stim: StimulusSpec, dt_ms: float,
                 lif_params: Optional[AdaptiveLifParams],
                 stdp_params: Optional[StdpParams], record_raster: bool) -> Engine:
    stdp = None
    if stdp_params is not None and stdp_params.enabled:
        stdp = StdpState(part, stdp_params, dt_ms)
    return Engine(part, stim, dt_ms=dt_ms, lif_params=lif_params,
                  stdp=stdp, record_raster=record_raster)


def run_simulation(net: Network, *, seconds: float, stim: StimulusSpec,
                   n_ranks: int = 1, transport: str = "memory",
                   lif_params: Optional[AdaptiveLifParams] = None,
                   stdp_params: Optional[StdpParams] = None,
                   w_exc_scale: float = 1.0, record_raster: bool = True,
                   timeout: float = 30.0, base_port: int = 0):
    """Run the benchmark on this process with ``n_ranks`` ranks as threads.

    transport "memory" uses the loopback fabric; "tcp" opens real local
    sockets (ports allocated automatically unless ``base_port`` is set).
    Returns (merged RunMetrics, (steps, gids) raster sorted by (step, id),
    per-rank metrics list, parts).
    """
    if seconds <= 0:
        raise ConfigError([f"seconds must be > 0, got {seconds}"])
    n_steps = int(round(seconds * 1000.0 / net.dt_ms))
    pmap, parts = partition(net, n_ranks, w_exc_scale=w_exc_scale)
    engines = [
        _make_engine(p, stim, net.dt_ms, lif_params, stdp_params, record_raster)
        for p in parts
    ]

    t0 = time.perf_counter()
    if n_ranks == 1:
        _rank_loop(engines[0], None, n_steps)
        wall = time.perf_counter() - t0
        per_rank = [engines[0].metrics(seconds, wall)]
    else:
        if transport == "memory":
            fabric = InMemoryFabric(n_ranks)
            endpoints = [fabric.endpoint(r) for r in range(n_ranks)]
        elif transport == "tcp":
            cluster = _local_cluster(n_ranks, base_port)
            endpoints = _open_tcp_endpoints(parts, cluster, timeout)
        else:
            raise ConfigError([f"unknown transport {transport!r}"])
        comms = [Communicator(p, ep, timeout=timeout) for p, ep in zip(parts, endpoints)]
        failures = []

        def worker(engine, comm):
            try:
                _rank_loop(engine, comm, n_steps)
            except BaseException as err:  # propagate to the caller
                failures.append(err)

        threads = [
            threading.Thread(target=worker, args=(e, c), daemon=True)
            for e, c in zip(engines, comms)
        ]
        for th in threads:
            th.start()
        for th in threads:
            th.join()
        for ep in endpoints:
            ep.close()
        if failures:
            raise failures[0]
        wall = time.perf_counter() - t0
        per_rank = [e.metrics(seconds, wall) for e in engines]

    metrics = RunMetrics.merged(per_rank, net.n_neurons)
    steps = np.concatenate([e.raster()[0] for e in engines])
    gids = np.concatenate([e.raster()[1] for e in engines])
    order = np.lexsort((gids, steps))
    return metrics, (steps[order], gids[order]), per_rank, parts


def _local_cluster(n_ranks: int, base_port: int) -> Dict[int, Tuple[str, int]]:
    if base_port:
        return {r: ("127.0.0.1", base_port + r) for r in range(n_ranks)}
    cluster = {}
    socks = []
    for r in range(n_ranks):
        s = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        s.bind(("127.0.0.1", 0))
        cluster[r] = ("127.0.0.1", s.getsockname()[1])
        socks.append(s)
    for s in socks:
        s.close()
    return cluster


def _open_tcp_endpoints(parts: List[RankPartition],
                        cluster: Dict[int, Tuple[str, int]], timeout: float):
    """Open all ranks' TCP transports concurrently (they rendezvous)."""
    endpoints = [None] * len(parts)
    errors = []

    def opener(part):
        peers = sorted(set(part.out_peers) | set(part.in_peers))
        try:
            endpoints[part.rank] = TcpTransport(part.rank, cluster, peers, timeout=timeout)
        except BaseException as err:
            errors.append(err)

    threads = [threading.Thread(target=opener, args=(p,), daemon=True) for p in parts]
    for th in threads:
        th.start()
    for th in threads:
        th.join()
    if errors:
        raise errors[0]
    return endpoints


def run_single_rank(net: Network, *, rank: int, seconds: float, stim: StimulusSpec,
                    n_ranks: int, cluster: Dict[int, Tuple[str, int]],
                    lif_params: Optional[AdaptiveLifParams] = None,
                    stdp_params: Optional[StdpParams] = None,
                    w_exc_scale: float = 1.0, record_raster: bool = True,
                    timeout: float = 30.0):
    """Run exactly one rank of a multi-process TCP run (one CLI invocation
    per rank).  Returns (rank metrics, rank raster, part)."""
    if not 0 <= rank < n_ranks:
        raise ConfigError([f"rank {rank} outside [0, {n_ranks})"])
    n_steps = int(round(seconds * 1000.0 / net.dt_ms))
    _, parts = partition(net, n_ranks, w_exc_scale=w_exc_scale)
    part = parts[rank]
    engine = _make_engine(part, stim, net.dt_ms, lif_params, stdp_params, record_raster)
    peers = sorted(set(part.out_peers) | set(part.in_peers))
    transport = TcpTransport(rank, cluster, peers, timeout=timeout)
    comm = Communicator(part, transport, timeout=timeout)
    t0 = time.perf_counter()
    try:
        _rank_loop(engine, comm, n_steps)
    finally:
        transport.close()
    wall = time.perf_counter() - t0
    steps, gids = engine.raster()
    return engine.metrics(seconds, wall), (steps, gids), part
