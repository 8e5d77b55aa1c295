"""Block-building grid world.

The agent walks a square grid (15x15 by default) and drops blocks. A target
design (the shape mask) says where blocks belong. The material is chosen once
per episode and only changes the terminal penalty.

Coordinates are ``(x, y)`` with ``x`` the column and ``y`` the row; matrices
are indexed ``k[x, y]``. Forward is ``+y``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, IllegalActionError

GRID_SIZE = 15


class Material(enum.IntEnum):
    WOOD = 0
    STONE = 1

    @property
    def penalty(self) -> int:
        return -5 if self is Material.WOOD else 10


class NestedAction(enum.IntEnum):
    F = 0
    B = 1
    L = 2
    R = 3
    FD = 4
    LD = 5
    RD = 6
    BD = 7

    @property
    def drops(self) -> bool:
        return self >= 4


# (dx, dy) per action index
MOVES = (
    (0, 1),
    (0, -1),
    (-1, 0),
    (1, 0),
    (0, 1),
    (-1, 0),
    (1, 0),
    (0, -1),
)


@dataclass(frozen=True)
class ShapeSpec:
    name: str
    mask: np.ndarray  # bool, indexed [x, y]

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=bool)
        if mask.ndim != 2 or mask.shape[0] != mask.shape[1]:
            raise ConfigError(f"shape mask must be square, got {mask.shape}")
        if not mask.any():
            raise ConfigError("shape mask has no cells")
        mask = mask.copy()
        mask.setflags(write=False)
        object.__setattr__(self, "mask", mask)

    @property
    def size(self) -> int:
        return self.mask.shape[0]

    @property
    def cell_count(self) -> int:
        return int(self.mask.sum())

    def cells(self) -> list[tuple[int, int]]:
        xs, ys = np.nonzero(self.mask)
        return [(int(x), int(y)) for x, y in zip(xs, ys)]

    def to_text(self) -> str:
        rows = []
        for y in range(self.size):
            rows.append("".join("#" if self.mask[x, y] else "." for x in range(self.size)))
        return "\n".join(rows) + "\n"


def line_shape(size: int = GRID_SIZE) -> ShapeSpec:
    mask = np.zeros((size, size), dtype=bool)
    mask[size // 2, :] = True
    return ShapeSpec("line", mask)


def zigzag_shape(size: int = GRID_SIZE) -> ShapeSpec:
    tri = (0, 1, 2, 3, 4, 3, 2, 1)
    mask = np.zeros((size, size), dtype=bool)
    for y in range(size):
        mask[3 + tri[y % len(tri)], y] = True
    return ShapeSpec("zigzag", mask)


def diamond_shape(size: int = GRID_SIZE, radius: int = 4) -> ShapeSpec:
    c = size // 2
    xs, ys = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    return ShapeSpec("diamond", np.abs(xs - c) + np.abs(ys - c) == radius)


SCENARIOS = {
    "line": line_shape,
    "zigzag": zigzag_shape,
    "diamond": diamond_shape,
}


def parse_shape(text: str, name: str = "custom", size: int = GRID_SIZE) -> ShapeSpec:
    """Parse a mask file: ``size`` lines of ``size`` characters, '#' or '.'."""
    if not text.endswith("\n"):
        raise ConfigError("shape file must end with a newline")
    lines = text[:-1].split("\n")
    if len(lines) != size:
        raise ConfigError(f"shape file needs {size} lines, got {len(lines)}")
    mask = np.zeros((size, size), dtype=bool)
    for y, line in enumerate(lines):
        if len(line) != size:
            raise ConfigError(f"line {y + 1}: expected {size} characters, got {len(line)}")
        for x, ch in enumerate(line):
            if ch == "#":
                mask[x, y] = True
            elif ch != ".":
                raise ConfigError(f"line {y + 1}: unexpected character {ch!r}")
    return ShapeSpec(name, mask)


def load_shape(path: str | Path, size: int = GRID_SIZE) -> ShapeSpec:
    path = Path(path)
    return parse_shape(path.read_text(), name=path.stem, size=size)


def get_shape(scenario: str, shape_file: str | Path | None = None) -> ShapeSpec:
    if shape_file is not None:
        return load_shape(shape_file)
    try:
        return SCENARIOS[scenario]()
    except KeyError:
        raise ConfigError(f"unknown scenario {scenario!r}") from None


@dataclass
class ArenaState:
    pos: tuple[int, int]
    k: np.ndarray
    material: Material | None
    blocks_remaining: int
    steps_taken: int = 0
    terminal: bool = False
    initial_blocks: int = field(default=0, repr=False)


class Arena:
    """Deterministic grid world; ``step`` mutates and returns ``self.state``."""

    def __init__(self, shape: ShapeSpec, max_steps: int = 500, front_cell_drop: bool = False):
        if max_steps < 1:
            raise ConfigError("max_steps must be >= 1")
        self.shape = shape
        self.size = shape.size
        self.max_steps = int(max_steps)
        self.front_cell_drop = front_cell_drop
        self._mask = shape.mask
        self.state = self.reset()

    @property
    def start(self) -> tuple[int, int]:
        c = self.size // 2
        return (c, c)

    def reset(self) -> ArenaState:
        b0 = self.shape.cell_count
        self.state = ArenaState(
            pos=self.start,
            k=np.zeros((self.size, self.size), dtype=bool),
            material=None,
            blocks_remaining=b0,
            initial_blocks=b0,
        )
        return self.state

    def set_material(self, material: Material) -> ArenaState:
        s = self.state
        if s.material is not None:
            raise IllegalActionError("material already chosen; it cannot be changed")
        if s.steps_taken != 0:
            raise IllegalActionError("material can only be chosen before the first step")
        s.material = Material(material)
        return s

    def _check_live(self):
        s = self.state
        if s.terminal:
            raise IllegalActionError("episode already terminated")
        if s.material is None:
            raise IllegalActionError("choose a material before stepping")

    def _advance_clock(self):
        s = self.state
        s.steps_taken += 1
        s.terminal = s.blocks_remaining == 0 or s.steps_taken >= self.max_steps

    def step(self, action: int) -> tuple[ArenaState, int, bool]:
        self._check_live()
        s = self.state
        dx, dy = MOVES[action]
        last = self.size - 1
        x = min(max(s.pos[0] + dx, 0), last)
        y = min(max(s.pos[1] + dy, 0), last)
        s.pos = (x, y)
        reward = 0
        if action >= 4:
            tx, ty = (x, y + 1) if self.front_cell_drop else (x, y)
            if ty <= last and not s.k[tx, ty]:
                s.k[tx, ty] = True
                s.blocks_remaining -= 1
                reward = 1 if self._mask[tx, ty] else 0
        self._advance_clock()
        return s, reward, s.terminal

    def idle(self) -> tuple[ArenaState, int, bool]:
        """Spend one step without moving or placing."""
        self._check_live()
        self._advance_clock()
        return self.state, 0, self.state.terminal

    def indicator_sum(self) -> int:
        return indicator_sum(self.state, self.shape)

    def main_reward(self) -> int:
        return main_reward(self.state, self.shape)

    def correct_placements(self) -> int:
        return int(np.count_nonzero(self.state.k & self._mask))

    def observe_main(self) -> np.ndarray:
        return observe_main(self.state, self.size)

    def observe_nested(self, a_main: Material) -> np.ndarray:
        return observe_nested(self.state, a_main, self.size)


def indicator_sum(state: ArenaState, shape: ShapeSpec) -> int:
    """Number of cells where the placement grid agrees with the design."""
    return int(np.count_nonzero(state.k == shape.mask))


def main_reward(state: ArenaState, shape: ShapeSpec) -> int:
    if not state.terminal:
        raise ValueError("main reward is only defined for a terminal state")
    if state.material is None:
        raise ValueError("main reward needs a chosen material")
    return indicator_sum(state, shape) + state.material.penalty


def observe_main(state: ArenaState, size: int = GRID_SIZE) -> np.ndarray:
    last = size - 1
    return np.array(
        [state.pos[0] / last, state.pos[1] / last, state.blocks_remaining / state.initial_blocks]
    )


def observe_nested(state: ArenaState, a_main: Material, size: int = GRID_SIZE) -> np.ndarray:
    obs = np.empty(4)
    obs[:3] = observe_main(state, size)
    obs[3] = float(Material(a_main))
    return obs
