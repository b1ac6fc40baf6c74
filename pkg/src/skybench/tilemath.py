"""Web Mercator tile math, quadkeys, and satellite tile retrieval.

Tile indices follow the usual slippy-map scheme: x grows eastward from
lon = -180, y grows southward from lat = +85.05112878, and a tile at
zoom z splits into four children at z + 1 whose quadkey appends one
digit (0 = NW, 1 = NE, 2 = SW, 3 = SE).
"""

from __future__ import annotations

import math
import os
import tempfile
from dataclasses import dataclass
from io import BytesIO
from pathlib import Path
from typing import Callable, Protocol

import numpy as np
from PIL import Image

from .errors import (
    CorruptTile,
    InputError,
    InvalidQuadkey,
    InvalidTile,
    OutOfProjection,
    TileUnavailable,
)

TILE_SIZE = 256
MERCATOR_LAT_LIMIT = 85.05112878
TILE_URL_TEMPLATE = "https://ecn.t3.tiles.virtualearth.net/tiles/a{quadkey}.jpeg?g=1"

# (status_code, body) from a GET of the given URL.
HttpGet = Callable[[str], tuple[int, bytes]]


@dataclass(frozen=True)
class TileCoord:
    x: int
    y: int
    zoom: int

    def __post_init__(self):
        if self.zoom < 0:
            raise InputError("zoom must be non-negative")
        n = 1 << self.zoom
        if not (0 <= self.x < n and 0 <= self.y < n):
            raise InputError(
                f"tile ({self.x}, {self.y}) outside [0, {n}) at zoom {self.zoom}"
            )


def latlon_to_tile(lat: float, lon: float, zoom: int) -> TileCoord:
    """Map a WGS84 coordinate to the tile containing it.

    Uses truncation toward zero after scaling (matching the common fetch
    script); intermediate values are clamped into the valid index range,
    which only matters at the domain edges (lon = 180, lat at the limit).
    """
    if zoom < 1:
        raise InputError("zoom must be at least 1")
    if abs(lat) > MERCATOR_LAT_LIMIT:
        raise OutOfProjection(f"latitude {lat} outside +/-{MERCATOR_LAT_LIMIT}")
    if not -180.0 <= lon <= 180.0:
        raise OutOfProjection(f"longitude {lon} outside [-180, 180]")
    n = 1 << zoom
    lat_rad = math.radians(lat)
    x = int((lon + 180.0) / 360.0 * n)
    y = int((1.0 - math.log(math.tan(lat_rad) + 1.0 / math.cos(lat_rad)) / math.pi) / 2.0 * n)
    x = min(max(x, 0), n - 1)
    y = min(max(y, 0), n - 1)
    return TileCoord(x, y, zoom)


def tile_to_quadkey(tile: TileCoord) -> str:
    """Interleave x/y bits MSB-first into a quadkey of length == zoom."""
    digits = []
    for i in range(tile.zoom, 0, -1):
        mask = 1 << (i - 1)
        digit = 0
        if tile.x & mask:
            digit += 1
        if tile.y & mask:
            digit += 2
        digits.append(str(digit))
    return "".join(digits)


def quadkey_to_tile(quadkey: str) -> TileCoord:
    """Inverse of tile_to_quadkey; the empty string is the zoom-0 root tile."""
    x = y = 0
    for ch in quadkey:
        if ch not in "0123":
            raise InvalidQuadkey(f"quadkey digit {ch!r} not in 0-3")
        d = int(ch)
        x = (x << 1) | (d & 1)
        y = (y << 1) | (d >> 1)
    return TileCoord(x, y, len(quadkey))


def tile_url(quadkey: str) -> str:
    """Aerial imagery URL for a quadkey."""
    for ch in quadkey:
        if ch not in "0123":
            raise InvalidQuadkey(f"quadkey digit {ch!r} not in 0-3")
    return TILE_URL_TEMPLATE.format(quadkey=quadkey)


class TileFetcher(Protocol):
    """Returns a (256, 256, 3) uint8 array for a tile, or raises a SkybenchError."""

    def __call__(self, tile: TileCoord) -> np.ndarray: ...


def _decode_tile(body: bytes) -> np.ndarray:
    try:
        with Image.open(BytesIO(body)) as img:
            arr = np.asarray(img.convert("RGB"))
    except Exception as exc:
        raise CorruptTile(f"tile bytes failed to decode: {exc}") from exc
    if arr.shape != (TILE_SIZE, TILE_SIZE, 3):
        raise InvalidTile(f"decoded tile has shape {arr.shape}, expected 256x256 RGB")
    return arr


def http_get(url: str, timeout: float = 30.0) -> tuple[int, bytes]:
    """Default network client; imported lazily so offline use never touches it."""
    import requests

    try:
        resp = requests.get(url, timeout=timeout)
    except requests.RequestException as exc:
        raise TileUnavailable(f"GET {url} failed: {exc}") from exc
    return resp.status_code, resp.content


def cache_path(tile: TileCoord, cache_dir) -> Path:
    return Path(cache_dir) / str(tile.zoom) / f"{tile.x}_{tile.y}.jpeg"


def fetch_tile(tile: TileCoord, cache_dir, http: HttpGet | None = None) -> np.ndarray:
    """Fetch one tile, cache-first.

    Cache layout is {cache_dir}/{zoom}/{x}_{y}.jpeg holding the exact bytes
    the server returned. On a miss the tile is fetched, validated, and
    written atomically (temp file then rename) so a crash cannot leave a
    truncated cache entry.
    """
    path = cache_path(tile, cache_dir)
    if path.is_file():
        return _decode_tile(path.read_bytes())
    getter = http if http is not None else http_get
    status, body = getter(tile_url(tile_to_quadkey(tile)))
    if status != 200:
        raise TileUnavailable(f"tile {tile} returned HTTP {status}")
    arr = _decode_tile(body)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".part")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(body)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return arr


@dataclass(frozen=True)
class CachingFetcher:
    """TileFetcher backed by fetch_tile's on-disk cache."""

    cache_dir: Path
    http: HttpGet | None = None

    def __call__(self, tile: TileCoord) -> np.ndarray:
        return fetch_tile(tile, self.cache_dir, self.http)


@dataclass(frozen=True, eq=False)
class StitchedImage:
    """Square mosaic of tiles centered on a coordinate."""

    pixels: np.ndarray  # (grid*256, grid*256, 3) uint8
    center: TileCoord
    grid_size: int
    misses: tuple[tuple[int, int, int], ...]  # (x, y, zoom) of unfetchable slots


def stitch_grid(
    lat: float, lon: float, zoom: int, grid_size: int, fetcher: TileFetcher
) -> StitchedImage:
    """Assemble a grid_size x grid_size mosaic around (lat, lon).

    grid_size must be odd so the requested coordinate's tile sits in the
    center cell. Slots whose tile cannot be fetched (or whose index falls
    off the map edge) stay black and are listed in `misses`.
    """
    if grid_size < 1 or grid_size % 2 == 0:
        raise InputError("grid_size must be odd and positive")
    center = latlon_to_tile(lat, lon, zoom)
    half = grid_size // 2
    n = 1 << zoom
    side = grid_size * TILE_SIZE
    pixels = np.zeros((side, side, 3), dtype=np.uint8)
    misses: list[tuple[int, int, int]] = []
    for dy in range(-half, half + 1):
        for dx in range(-half, half + 1):
            tx, ty = center.x + dx, center.y + dy
            px = (dx + half) * TILE_SIZE
            py = (dy + half) * TILE_SIZE
            if not (0 <= tx < n and 0 <= ty < n):
                misses.append((tx, ty, zoom))
                continue
            try:
                arr = fetcher(TileCoord(tx, ty, zoom))
            except (TileUnavailable, CorruptTile, InvalidTile):
                misses.append((tx, ty, zoom))
                continue
            pixels[py : py + TILE_SIZE, px : px + TILE_SIZE] = arr
    return StitchedImage(pixels, center, grid_size, tuple(misses))


def write_png(pixels: np.ndarray, path) -> None:
    """Write an RGB or grayscale uint8 array as PNG."""
    Image.fromarray(pixels).save(Path(path), format="PNG")
