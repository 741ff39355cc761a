"""Grid geometry helpers shared by the flow and contact modules."""

from typing import NamedTuple

from .errors import RoiError


class Rect(NamedTuple):
    """Axis-aligned pixel rectangle, top-left origin."""

    x0: int
    y0: int
    width: int
    height: int

    @property
    def slices(self) -> tuple[slice, slice]:
        return (slice(self.y0, self.y0 + self.height),
                slice(self.x0, self.x0 + self.width))


def centered_square(grid_width: int, grid_height: int, side: int) -> Rect:
    """Centered `side` x `side` rectangle; raises RoiError if it does not fit."""
    if side <= 0:
        raise RoiError(f"empty roi: side {side}")
    if side > grid_width or side > grid_height:
        raise RoiError(
            f"roi out of bounds: {side}x{side} does not fit in "
            f"{grid_width}x{grid_height}"
        )
    return Rect((grid_width - side) // 2, (grid_height - side) // 2, side, side)


def check_inside(rect: Rect, grid_width: int, grid_height: int) -> Rect:
    """Validates that `rect` is non-empty and inside the grid."""
    if rect.width <= 0 or rect.height <= 0:
        raise RoiError(f"empty roi: {rect}")
    if (rect.x0 < 0 or rect.y0 < 0
            or rect.x0 + rect.width > grid_width
            or rect.y0 + rect.height > grid_height):
        raise RoiError(f"roi out of bounds: {rect} in {grid_width}x{grid_height}")
    return rect
