"""Packet samples: pcap/raw ingestion and the multiset S of L4 payloads."""

import logging
import struct
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator, List, Optional, Sequence, Tuple

import dpkt
import networkx as nx
import numpy as np

from .automata import Nfa, class_symbols
from .constants import RAW_RECORD_HEADER
from .models import TraceFormatError, UsageError

logger = logging.getLogger(__name__)

PCAP_MAGICS = {
    b'\xd4\xc3\xb2\xa1', b'\xa1\xb2\xc3\xd4',  # microsecond, LE / BE
    b'\x4d\x3c\xb2\xa1', b'\xa1\xb2\x3c\x4d',  # nanosecond
}
PCAPNG_MAGIC = b'\x0a\x0d\x0d\x0a'
_RECORD = struct.Struct(RAW_RECORD_HEADER)


@dataclass
class TrafficSample:
    """Multiset of packet payloads: ``packets[w]`` is S(w).

    ``frames``/``skipped_frames`` describe the capture the sample came from and
    take no part in equality.
    """

    packets: Counter = field(default_factory=Counter)
    frames: int = field(default=0, compare=False)
    skipped_frames: int = field(default=0, compare=False)

    @classmethod
    def from_packets(cls, packets: Iterable[bytes]) -> 'TrafficSample':
        return cls(Counter(bytes(p) for p in packets))

    @classmethod
    def from_counts(cls, counts: Iterable[Tuple[bytes, int]]) -> 'TrafficSample':
        sample = cls()
        for packet, count in counts:
            sample.add(packet, count)
        return sample

    def add(self, packet: bytes, count: int = 1) -> None:
        if count < 0:
            raise UsageError(f'negative packet count {count}')
        if count:
            self.packets[bytes(packet)] += count

    @property
    def total_packets(self) -> int:
        return sum(self.packets.values())

    @property
    def total_bytes(self) -> int:
        return sum(len(w) * c for w, c in self.packets.items())

    def __len__(self) -> int:
        return len(self.packets)

    def __iter__(self) -> Iterator[Tuple[bytes, int]]:
        """(payload, count) pairs in byte order, so consumers are order-independent."""
        for packet in sorted(self.packets):
            yield packet, self.packets[packet]

    def __add__(self, other: 'TrafficSample') -> 'TrafficSample':
        return TrafficSample(self.packets + other.packets,
                             self.frames + other.frames,
                             self.skipped_frames + other.skipped_frames)

    def chunks(self, parts: int) -> List[List[Tuple[bytes, int]]]:
        """Split the distinct payloads round-robin into ``parts`` lists."""
        buckets: List[List[Tuple[bytes, int]]] = [[] for _ in range(max(parts, 1))]
        for i, item in enumerate(self):
            buckets[i % len(buckets)].append(item)
        return [b for b in buckets if b]


def _payload(buf: bytes) -> Optional[bytes]:
    """L4 payload of an Ethernet frame, or None when there is none to take."""
    try:
        eth = dpkt.ethernet.Ethernet(buf)
    except (dpkt.UnpackError, ValueError):
        return None
    ip = eth.data  # 802.1Q tags are unwrapped by dpkt
    if isinstance(ip, dpkt.ip.IP):
        if ip.offset:
            return None  # non-first fragment
    elif not isinstance(ip, dpkt.ip6.IP6):
        return None
    l4 = ip.data
    if not isinstance(l4, (dpkt.tcp.TCP, dpkt.udp.UDP)):
        return None
    return bytes(l4.data)


def read_pcap(path: str, max_packets: Optional[int] = None, truncate: Optional[int] = None,
              logger: Optional[logging.Logger] = None) -> TrafficSample:
    """Classic libpcap file (either byte order) with Ethernet frames -> sample of payloads.

    Frames without a TCP/UDP payload are counted in ``skipped_frames``.
    """
    logger = logger or logging.getLogger(__name__)
    if max_packets is not None and max_packets < 0:
        raise UsageError(f'max packets must be non-negative, got {max_packets}')
    if truncate is not None and truncate < 0:
        raise UsageError(f'truncation length must be non-negative, got {truncate}')
    sample = TrafficSample()
    with open(path, 'rb') as f:
        magic = f.read(4)
        f.seek(0)
        if magic == PCAPNG_MAGIC:
            raise TraceFormatError(f'{path}: pcapng is not supported, convert to classic pcap', 0)
        try:
            reader = dpkt.pcap.Reader(f)
        except (ValueError, dpkt.UnpackError) as e:
            raise TraceFormatError(f'{path}: not a pcap file ({e})', 0) from None
        if reader.datalink() != dpkt.pcap.DLT_EN10MB:
            raise TraceFormatError(
                f'{path}: unsupported link type {reader.datalink()} (only Ethernet)', 20)
        taken = 0
        for _, buf in reader:
            if max_packets is not None and taken >= max_packets:
                break
            sample.frames += 1
            payload = _payload(buf)
            if payload is None:
                sample.skipped_frames += 1
                continue
            sample.add(payload[:truncate] if truncate is not None else payload)
            taken += 1
    logger.debug('%s: %d frames, %d skipped, %d packets',
                 path, sample.frames, sample.skipped_frames, sample.total_packets)
    return sample


def write_pcap(sample: TrafficSample, path: str) -> None:
    """One Ethernet/IPv4/UDP frame per packet occurrence, timestamps 0, 1, 2, ... ms."""
    with open(path, 'wb') as f:
        writer = dpkt.pcap.Writer(f, linktype=dpkt.pcap.DLT_EN10MB)
        ts = 0
        for payload, count in sample:
            udp = dpkt.udp.UDP(sport=40000, dport=9, data=payload)
            udp.ulen = len(udp)
            ip = dpkt.ip.IP(src=b'\x0a\x00\x00\x01', dst=b'\x0a\x00\x00\x02',
                            p=dpkt.ip.IP_PROTO_UDP, data=udp)
            ip.len = len(ip)
            eth = dpkt.ethernet.Ethernet(src=b'\x02\x00\x00\x00\x00\x01',
                                         dst=b'\x02\x00\x00\x00\x00\x02',
                                         type=dpkt.ethernet.ETH_TYPE_IP, data=ip)
            frame = bytes(eth)
            for _ in range(count):
                writer.writepkt(frame, ts=ts / 1000)
                ts += 1


def read_raw(path: str) -> TrafficSample:
    """Length-prefixed records: 4-byte little-endian length, then the payload."""
    sample = TrafficSample()
    with open(path, 'rb') as f:
        data = f.read()
    offset = 0
    while offset < len(data):
        if offset + _RECORD.size > len(data):
            raise TraceFormatError(f'{path}: truncated record header', offset)
        (length,) = _RECORD.unpack_from(data, offset)
        start = offset + _RECORD.size
        if start + length > len(data):
            raise TraceFormatError(
                f'{path}: record of {length} bytes runs past the end of the file', offset)
        sample.add(data[start:start + length])
        offset = start + length
    sample.frames = sample.total_packets
    return sample


def write_raw(sample: TrafficSample, path: str) -> None:
    with open(path, 'wb') as f:
        for payload, count in sample:
            record = _RECORD.pack(len(payload)) + payload
            for _ in range(count):
                f.write(record)


def load_sample(path: str, max_packets: Optional[int] = None,
                truncate: Optional[int] = None) -> TrafficSample:
    """pcap or raw, decided by the file's magic number."""
    with open(path, 'rb') as f:
        magic = f.read(4)
    if magic in PCAP_MAGICS or magic == PCAPNG_MAGIC:
        return read_pcap(path, max_packets=max_packets, truncate=truncate)
    sample = read_raw(path)
    if max_packets is None and truncate is None:
        return sample
    limited = TrafficSample()
    for payload, count in sample:
        if max_packets is not None:
            count = min(count, max_packets - limited.total_packets)
            if count <= 0:
                break
        limited.add(payload[:truncate] if truncate is not None else payload, count)
    limited.frames = limited.total_packets
    return limited


def load_samples(paths: Sequence[str], workers: int = 1) -> TrafficSample:
    """Read several traces (in parallel when workers > 1) and merge them."""
    from .utils import parallel_map

    total = TrafficSample()
    for sample in parallel_map(load_sample, list(paths), workers):
        total = total + sample
    return total


# -- synthetic traffic --------------------------------------------------------

def _witness(nfa: Nfa, rng: np.random.Generator, distance: dict, detour: float) -> bytes:
    """Random accepted word, walking towards a final state (taking detours at random)."""
    out: dict = {}
    for src, bitmap, dst in nfa.edges():
        if dst in distance:
            out.setdefault(src, []).append((bitmap, dst))
    word = bytearray()
    q = nfa.initial
    while distance[q] > 0:
        closer = [(b, dst) for b, dst in out[q] if distance[dst] < distance[q]]
        pool = out[q] if len(word) < 32 and rng.random() < detour else closer
        bitmap, q = pool[int(rng.integers(len(pool)))]
        symbols = class_symbols(bitmap)
        word.append(symbols[int(rng.integers(len(symbols)))])
    return bytes(word)


def synthetic_sample(nfa: Nfa, n: int, match_rate: float, seed: int,
                     length: Tuple[int, int] = (16, 64),
                     alphabet: Optional[bytes] = None,
                     detour: float = 0.3) -> TrafficSample:
    """Seeded sample of ``n`` packets, about ``match_rate`` of them carrying a match.

    Matching packets are a random accepted word of ``nfa`` followed by random
    filler; the rest is random filler over ``alphabet`` (printable ASCII by
    default), which may still match by chance.
    """
    if n < 0 or not 0 <= match_rate <= 1:
        raise UsageError('need n >= 0 and match rate in [0,1]')
    rng = np.random.default_rng(seed)
    symbols = np.frombuffer(alphabet or bytes(range(0x20, 0x7f)), dtype=np.uint8)
    reverse = nfa.to_graph().reverse(copy=False)
    distance: dict = {}
    for f in nfa.finals:
        for q, d in nx.single_source_shortest_path_length(reverse, f).items():
            distance[q] = min(d, distance.get(q, d))
    if match_rate > 0 and nfa.initial not in distance:
        raise UsageError('the NFA accepts nothing, cannot synthesise matching packets')
    sample = TrafficSample()
    lo, hi = length
    for _ in range(n):
        filler = rng.choice(symbols, size=int(rng.integers(lo, hi + 1))).tobytes()
        if rng.random() < match_rate:
            witness = _witness(nfa, rng, distance, detour)
            cut = int(rng.integers(len(filler) + 1))
            sample.add(witness + filler[cut:])
        else:
            sample.add(filler)
    sample.frames = sample.total_packets
    return sample

