"""Tube masks over the patch grid and patch-normalized targets."""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from evprep.errors import FormatError, GeometryError

TUBE_MAGIC = b"TUBE"


@dataclass(frozen=True)
class PatchGrid:
    """Decomposition of an H x W frame into P x P patches.

    When H or W is not divisible by P the frame is conceptually
    zero-padded on the bottom/right; the padded area is excluded from
    patch statistics and losses.
    """

    patch_size: int
    height: int
    width: int

    def __post_init__(self):
        if self.patch_size <= 0:
            raise ValueError("patch size must be positive")

    @property
    def grid_h(self) -> int:
        return -(-self.height // self.patch_size)

    @property
    def grid_w(self) -> int:
        return -(-self.width // self.patch_size)

    @property
    def num_patches(self) -> int:
        return self.grid_h * self.grid_w

    @property
    def pad_h(self) -> int:
        return self.grid_h * self.patch_size - self.height

    @property
    def pad_w(self) -> int:
        return self.grid_w * self.patch_size - self.width

    def patch_slices(self, row: int, col: int) -> tuple[slice, slice]:
        """Pixel slices of one patch, clipped to the real (unpadded) frame."""
        P = self.patch_size
        return (
            slice(row * P, min((row + 1) * P, self.height)),
            slice(col * P, min((col + 1) * P, self.width)),
        )


@dataclass(frozen=True)
class TubeMask:
    """A spatial patch mask shared by every stage and bin of a sequence."""

    masked: np.ndarray
    ratio: float
    rng_seed: int

    @property
    def num_masked(self) -> int:
        return int(self.masked.sum())

    def pixel_mask(self, grid: PatchGrid) -> np.ndarray:
        """Expand the patch mask to a boolean (H, W) pixel mask."""
        full = np.repeat(
            np.repeat(self.masked, grid.patch_size, axis=0), grid.patch_size, axis=1
        )
        return full[: grid.height, : grid.width]


def sample_tube_mask(grid: PatchGrid, ratio: float, seed: int) -> TubeMask:
    """Uniform subset of exactly round(ratio * K) patches, seeded."""
    if not 0.0 <= ratio <= 1.0:
        raise ValueError("ratio must be in [0, 1]")
    K = grid.num_patches
    k = int(np.floor(ratio * K + 0.5))
    rng = np.random.default_rng(seed)
    chosen = rng.permutation(K)[:k]
    masked = np.zeros(K, dtype=bool)
    masked[chosen] = True
    return TubeMask(masked=masked.reshape(grid.grid_h, grid.grid_w), ratio=ratio, rng_seed=seed)


def apply_mask(tensor: np.ndarray, mask: TubeMask, grid: PatchGrid) -> np.ndarray:
    """Zero out masked patches and append a masked-region indicator channel.

    Input is the (2B, H, W) flattened histogram; output is (2B+1, H, W).
    """
    if tensor.ndim != 3 or tensor.shape[1:] != (grid.height, grid.width):
        raise GeometryError(
            f"tensor shape {tensor.shape} does not match {grid.height}x{grid.width} grid"
        )
    pix = mask.pixel_mask(grid)
    out = np.empty((tensor.shape[0] + 1,) + tensor.shape[1:], dtype=tensor.dtype)
    out[:-1] = tensor
    out[:-1][:, pix] = 0
    out[-1] = pix.astype(tensor.dtype)
    return out


def normalize_patches(
    target: np.ndarray, grid: PatchGrid, epsilon: float = 1e-6
) -> np.ndarray:
    """Standardize each patch with its own mean and variance.

    Edge patches that extend past the frame use only their real pixels.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if target.shape != (grid.height, grid.width):
        raise GeometryError(
            f"target shape {target.shape} does not match grid "
            f"{grid.height}x{grid.width}"
        )
    out = np.empty_like(target, dtype=np.float64)
    for row in range(grid.grid_h):
        for col in range(grid.grid_w):
            sl = grid.patch_slices(row, col)
            patch = target[sl]
            out[sl] = (patch - patch.mean()) / np.sqrt(patch.var() + epsilon)
    return out


def serialize_mask(mask: TubeMask) -> bytes:
    """Bit-packed row-major blob with a 12-byte header."""
    gh, gw = mask.masked.shape
    header = TUBE_MAGIC + struct.pack("<HHI", gw, gh, mask.rng_seed & 0xFFFFFFFF)
    return header + np.packbits(mask.masked.reshape(-1)).tobytes()


def deserialize_mask(blob: bytes) -> TubeMask:
    if len(blob) < 12 or blob[:4] != TUBE_MAGIC:
        raise FormatError("not a TUBE mask blob")
    gw, gh, seed = struct.unpack("<HHI", blob[4:12])
    bits = np.unpackbits(np.frombuffer(blob[12:], dtype=np.uint8), count=gh * gw)
    masked = bits.astype(bool).reshape(gh, gw)
    ratio = float(masked.sum()) / masked.size
    return TubeMask(masked=masked, ratio=ratio, rng_seed=seed)
