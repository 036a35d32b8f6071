"""Shared environment machinery.

Environments are pure transition functions: an instance holds only the layout
(fixed by an EnvSpec), and `step(state, action)` maps an explicit state tuple
to a StepOutcome. That keeps them trivially enumerable, replayable, and safe
to share across runs. Rewards are the extrinsic shaping used everywhere:
-0.01 per step, +1.0 when the step advances the task automaton, +10.0 on
acceptance (the bonuses stack on the accepting step).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

from ..rng import RandomState

STEP_PENALTY = -0.01
PROGRESS_BONUS = 1.0
ACCEPT_BONUS = 10.0

GRID_ACTIONS = ("up", "down", "left", "right")
GRID_MOVES = ((-1, 0), (1, 0), (0, -1), (0, 1))

VARIANTS = ("source", "target")


class EnvError(ValueError):
    """Raised for malformed environment specifications."""


@dataclass(frozen=True)
class EnvSpec:
    """Declarative description of one environment instance.

    `parameters` holds per-environment overrides (grid size, item counts,
    explicit positions). Unknown parameter keys are rejected by the builder
    so typos fail loudly.
    """

    name: str
    variant: str = "target"
    layout_seed: int = 12
    max_steps: int = 0          # 0 = use the environment default
    parameters: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise EnvError(f"variant must be one of {VARIANTS}, "
                           f"got {self.variant!r}")
        if self.layout_seed < 0:
            raise EnvError("layout_seed must be non-negative")
        if self.max_steps < 0:
            raise EnvError("max_steps must be non-negative")

    def with_(self, **kw):
        return replace(self, **kw)

    def to_json(self):
        return {
            "name": self.name,
            "variant": self.variant,
            "layout_seed": self.layout_seed,
            "max_steps": self.max_steps,
            "parameters": dict(self.parameters),
        }

    @classmethod
    def from_json(cls, payload):
        return cls(
            name=payload["name"],
            variant=payload.get("variant", "target"),
            layout_seed=payload.get("layout_seed", 12),
            max_steps=payload.get("max_steps", 0),
            parameters=dict(payload.get("parameters", {})),
        )

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(json.load(fh))


@dataclass(frozen=True)
class StepOutcome:
    """Result of one environment step.

    `done` covers task completion and irrecoverable failure (e.g. a dead
    battery); the per-episode step budget is enforced by the training loop,
    which reports it through its own timeout flag.
    """

    state: tuple
    reward: float
    event: object  # str or None
    done: bool
    timeout: bool = False


class Environment:
    """Base class; subclasses fill in layout, dynamics, and labeling."""

    name = "abstract"
    action_names = GRID_ACTIONS

    def __init__(self, spec):
        self.spec = spec
        self._tables = None  # dense-table cache, filled by envs.tables

    @property
    def n_actions(self):
        return len(self.action_names)

    def reset(self):
        raise NotImplementedError

    def step(self, state, action):
        raise NotImplementedError

    def is_terminal(self, state):
        raise NotImplementedError

    def is_dead(self, state):
        return False

    def layout_text(self):
        raise NotImplementedError


def check_parameters(params, allowed, name):
    unknown = sorted(set(params) - set(allowed))
    if unknown:
        raise EnvError(f"{name}: unknown parameters {unknown}; "
                       f"allowed: {sorted(allowed)}")


def fractional_cells(seed, count, rows, cols, taken, stream=0):
    """Place `count` items by seeded fractional anchors scaled to the grid.

    The fractions depend only on (seed, stream), so source and target grids
    built from the same seed share structure at different scales. Collisions
    with `taken` cells are resolved by rejection, which preserves the shared
    fractions for non-colliding items.
    """
    rng = RandomState(seed, stream)
    cells = []
    occupied = set(taken)
    for _ in range(count):
        for _attempt in range(10000):
            r = int(rng.uniform() * rows)
            c = int(rng.uniform() * cols)
            if (r, c) not in occupied:
                break
        else:
            raise EnvError("could not place items on grid; too crowded")
        occupied.add((r, c))
        cells.append((r, c))
    return cells


def clamp_cell(cell, rows, cols):
    r, c = cell
    return (min(max(r, 0), rows - 1), min(max(c, 0), cols - 1))


def anchor_cell(frac, rows, cols):
    """Map a fractional (row, col) anchor to a concrete cell."""
    fr, fc = frac
    return clamp_cell((int(fr * rows), int(fc * cols)), rows, cols)


def move(cell, action, rows, cols):
    """Grid move with wall clamping; walking into a wall stays put."""
    dr, dc = GRID_MOVES[action]
    return clamp_cell((cell[0] + dr, cell[1] + dc), rows, cols)


def grid_text(rows, cols, markers, legend):
    """ASCII map: markers is {cell: single-char}, later entries win."""
    grid = [["." for _ in range(cols)] for _ in range(rows)]
    for (r, c), ch in markers.items():
        grid[r][c] = ch
    lines = [" ".join(row) for row in grid]
    lines.append("")
    lines.extend(f"{ch} = {desc}" for ch, desc in legend)
    return "\n".join(lines)


def validate_positions(cells, rows, cols, label):
    seen = set()
    for cell in cells:
        r, c = cell
        if not (0 <= r < rows and 0 <= c < cols):
            raise EnvError(f"{label}: position {cell} out of bounds "
                           f"for {rows}x{cols} grid")
        if cell in seen:
            raise EnvError(f"{label}: duplicate position {cell}")
        seen.add(cell)
