"""
Deployment and grid models.

A deployment is the set of radio nodes, the directed links between them on
each communication channel, and the carrier frequency of every channel. The
grid discretizes the monitored region into square pixels.
"""

from functools import cached_property
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.models.common import Point

# IEEE 802.15.4 2.4 GHz band: channels 11..26, 5 MHz apart
FIRST_CHANNEL = 11
LAST_CHANNEL = 26


def ieee_802_15_4_frequency(channel: int) -> float:
    """Carrier frequency in Hz of an IEEE 802.15.4 channel (11..26)."""
    if not FIRST_CHANNEL <= channel <= LAST_CHANNEL:
        raise ValueError(f"channel {channel} is outside {FIRST_CHANNEL}..{LAST_CHANNEL}")
    return (2405.0 + 5.0 * (channel - FIRST_CHANNEL)) * 1e6


class Link(BaseModel):
    """A directed link: transmitter, receiver and channel identifiers."""

    model_config = ConfigDict(frozen=True)

    tx: int = Field(..., ge=0, description="Transmitting node id")
    rx: int = Field(..., ge=0, description="Receiving node id")
    channel: int = Field(..., description="Channel identifier")


class Deployment(BaseModel):
    """
    Node positions, link table and channel frequencies.

    Link ids are the dense positions 0..L-1 in `links`. Links sharing the same
    (tx, rx) pair form one transmitter-receiver pair; pair ids are dense in
    order of first appearance.
    """

    model_config = ConfigDict(frozen=True)

    node_positions: list[Point] = Field(..., min_length=2)
    links: list[Link] = Field(..., min_length=1)
    channel_frequencies: dict[int, float]

    @model_validator(mode="after")
    def _check_consistency(self) -> "Deployment":
        if len(set(self.node_positions)) != len(self.node_positions):
            raise ValueError("node positions must be distinct")
        seen: set[tuple[int, int, int]] = set()
        node_count = len(self.node_positions)
        for link_id, link in enumerate(self.links):
            if link.tx >= node_count or link.rx >= node_count:
                raise ValueError(f"link {link_id} references an unknown node")
            if link.tx == link.rx:
                raise ValueError(f"link {link_id} has identical transmitter and receiver")
            if link.channel not in self.channel_frequencies:
                raise ValueError(f"link {link_id} uses channel {link.channel} with no frequency")
            key = (link.tx, link.rx, link.channel)
            if key in seen:
                raise ValueError(f"link {key} appears more than once")
            seen.add(key)
        for channel, frequency in self.channel_frequencies.items():
            if frequency <= 0:
                raise ValueError(f"channel {channel} has non-positive frequency")
        return self

    @classmethod
    def full_mesh(
        cls,
        node_positions: list[Point],
        channels: list[int],
        channel_frequencies: Optional[dict[int, float]] = None,
    ) -> "Deployment":
        """
        Build a fully connected mesh: every ordered node pair on every channel.

        Link id = pair_id * C + channel index, so a pair's channels are contiguous.
        """
        frequencies = channel_frequencies or {c: ieee_802_15_4_frequency(c) for c in channels}
        links = [
            Link(tx=tx, rx=rx, channel=channel)
            for tx in range(len(node_positions))
            for rx in range(len(node_positions))
            if tx != rx
            for channel in channels
        ]
        return cls(
            node_positions=[tuple(map(float, p)) for p in node_positions],
            links=links,
            channel_frequencies=frequencies,
        )

    @property
    def node_count(self) -> int:
        return len(self.node_positions)

    @property
    def link_count(self) -> int:
        return len(self.links)

    @cached_property
    def channels(self) -> list[int]:
        """Channel ids in order of first appearance in the link table."""
        return list(dict.fromkeys(link.channel for link in self.links))

    @cached_property
    def positions(self) -> np.ndarray:
        return np.asarray(self.node_positions, dtype=float)

    @cached_property
    def pairs(self) -> list[tuple[int, int]]:
        """Ordered (tx, rx) pairs in order of first appearance."""
        return list(dict.fromkeys((link.tx, link.rx) for link in self.links))

    @cached_property
    def link_pair_ids(self) -> np.ndarray:
        """Pair id of every link."""
        index = {pair: i for i, pair in enumerate(self.pairs)}
        return np.array([index[(link.tx, link.rx)] for link in self.links], dtype=np.int64)

    @cached_property
    def pair_links(self) -> list[list[int]]:
        """Link ids belonging to every pair, ascending."""
        grouped: list[list[int]] = [[] for _ in self.pairs]
        for link_id, pair_id in enumerate(self.link_pair_ids):
            grouped[int(pair_id)].append(link_id)
        return grouped

    @cached_property
    def link_lengths(self) -> np.ndarray:
        """Link-line length d of every link in meters."""
        pos = self.positions
        tx = np.array([link.tx for link in self.links])
        rx = np.array([link.rx for link in self.links])
        return np.linalg.norm(pos[rx] - pos[tx], axis=1)

    @cached_property
    def pair_lengths(self) -> np.ndarray:
        pos = self.positions
        tx = np.array([p[0] for p in self.pairs])
        rx = np.array([p[1] for p in self.pairs])
        return np.linalg.norm(pos[rx] - pos[tx], axis=1)

    def link_endpoints(self, link_id: int) -> tuple[np.ndarray, np.ndarray]:
        """Transmitter and receiver positions of a link."""
        link = self.links[link_id]
        return self.positions[link.tx], self.positions[link.rx]

    def pair_endpoints(self, pair_id: int) -> tuple[np.ndarray, np.ndarray]:
        tx, rx = self.pairs[pair_id]
        return self.positions[tx], self.positions[rx]

    def link_frequency(self, link_id: int) -> float:
        return self.channel_frequencies[self.links[link_id].channel]


class Grid(BaseModel):
    """
    Square-pixel discretization of the monitored region.

    Pixel n = row * cols + col has its center at
    origin + ((col + 0.5) * pixel_size, (row + 0.5) * pixel_size).
    """

    model_config = ConfigDict(frozen=True)

    origin: Point = (0.0, 0.0)
    pixel_size: float = Field(..., gt=0, description="Pixel edge length delta in meters")
    rows: int = Field(..., gt=0)
    cols: int = Field(..., gt=0)

    @classmethod
    def covering(
        cls,
        width: float,
        height: float,
        pixel_size: float,
        origin: Point = (0.0, 0.0),
    ) -> "Grid":
        """Smallest grid of the given pixel size covering a width x height rectangle."""
        cols = max(1, int(np.ceil(width / pixel_size - 1e-9)))
        rows = max(1, int(np.ceil(height / pixel_size - 1e-9)))
        return cls(origin=origin, pixel_size=pixel_size, rows=rows, cols=cols)

    @property
    def pixel_count(self) -> int:
        return self.rows * self.cols

    @property
    def width(self) -> float:
        return self.cols * self.pixel_size

    @property
    def height(self) -> float:
        return self.rows * self.pixel_size

    def index(self, row: int, col: int) -> int:
        return row * self.cols + col

    def row_col(self, n: int) -> tuple[int, int]:
        return divmod(n, self.cols)

    def pixel_center(self, n: int) -> np.ndarray:
        row, col = self.row_col(n)
        return np.array(
            [
                self.origin[0] + (col + 0.5) * self.pixel_size,
                self.origin[1] + (row + 0.5) * self.pixel_size,
            ]
        )

    @cached_property
    def centers(self) -> np.ndarray:
        """(N, 2) array of pixel centers in row-major order."""
        rows, cols = np.divmod(np.arange(self.pixel_count), self.cols)
        return np.column_stack(
            [
                self.origin[0] + (cols + 0.5) * self.pixel_size,
                self.origin[1] + (rows + 0.5) * self.pixel_size,
            ]
        )
