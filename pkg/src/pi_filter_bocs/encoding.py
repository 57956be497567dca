# Mapping between 22-bit design vectors and pi-filter layouts on the board grid.
#
# Bit layout of a design vector (left to right):
# - bits 1-10: five element-position pairs, in board order input port, capacitor 1, inductor, capacitor 2, output port.
#   "10" puts an element in its low slot (bottom or left candidate), "01" in its high slot (top or right candidate).
# - bits 11-22: four path triples, for the segments input-cap1, cap1-inductor, inductor-cap2, cap2-output.
#   "100" routes X then Y (A), "010" turns half way along Y (B), "001" routes Y then X (C).
#   Several set bits in a triple take the union of the selected routes;
#   "000" is a disconnection, which is replaced by a dummy conductor plane.
#
# Cells are 1-based (ix, iy) grid coordinates, ix in 1..nx along X and iy in 1..ny along Y.
import dataclasses
import itertools
from enum import Enum
from typing import Dict, FrozenSet, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np

Cell = Tuple[int, int]

N_ELEMENTS = 5
N_SEGMENTS = 4
N_VARIANTS = 3
ELEMENT_BITS = 2 * N_ELEMENTS
N_BITS = ELEMENT_BITS + N_VARIANTS * N_SEGMENTS


class EncodingError(ValueError):
    pass


class ElementKind(Enum):
    INPUT_PORT = 'input_port'
    CAP1 = 'cap1'
    INDUCTOR = 'inductor'
    CAP2 = 'cap2'
    OUTPUT_PORT = 'output_port'


# board order, left to right; also the order of the element bit pairs
ELEMENT_ORDER: List[ElementKind] = list(ElementKind)


class Slot(Enum):
    LOW = 'low'  # "10": bottom or left candidate
    HIGH = 'high'  # "01": top or right candidate


class Variant(Enum):
    A = 'A'  # X first, then Y
    B = 'B'  # half of the Y difference, then X, then the rest of Y
    C = 'C'  # Y first, then X


class Segment(Enum):
    INPUT_CAP1 = (ElementKind.INPUT_PORT, ElementKind.CAP1)
    CAP1_INDUCTOR = (ElementKind.CAP1, ElementKind.INDUCTOR)
    INDUCTOR_CAP2 = (ElementKind.INDUCTOR, ElementKind.CAP2)
    CAP2_OUTPUT = (ElementKind.CAP2, ElementKind.OUTPUT_PORT)

    @property
    def start(self) -> ElementKind:
        return self.value[0]

    @property
    def end(self) -> ElementKind:
        return self.value[1]


SEGMENT_ORDER: List[Segment] = list(Segment)

SLOT_BITS = {
    Slot.LOW: (1, 0),
    Slot.HIGH: (0, 1),
}

VARIANT_ORDER: List[Variant] = list(Variant)

# non-empty variant subsets, in the order used when inferring a subset from a cell set
VARIANT_SUBSETS: List[FrozenSet[Variant]] = [
    frozenset(c) for r in range(1, N_VARIANTS + 1) for c in itertools.combinations(VARIANT_ORDER, r)]


@dataclasses.dataclass(frozen=True)
class GridSpec:
    nx: int = 10  # cells along X
    ny: int = 15  # cells along Y
    board_w: float = 150.0  # mm along X
    board_h: float = 100.0  # mm along Y
    substrate_h: float = 1.6  # mm

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise EncodingError(f'grid needs at least 2x2 cells, got {self.nx}x{self.ny}')
        if min(self.board_w, self.board_h, self.substrate_h) <= 0:
            raise EncodingError('board dimensions must be positive')

    @property
    def cell_w(self) -> float:
        return self.board_w / self.nx

    @property
    def cell_h(self) -> float:
        return self.board_h / self.ny

    @property
    def cell_area(self) -> float:
        return self.cell_w * self.cell_h

    def contains(self, cell: Cell) -> bool:
        ix, iy = cell
        return 1 <= ix <= self.nx and 1 <= iy <= self.ny

    def check_cell(self, cell: Cell):
        if not self.contains(cell):
            raise EncodingError(f'cell {cell} is outside the {self.nx}x{self.ny} grid')

    def cell_center(self, cell: Cell) -> Tuple[float, float]:
        # center of a cell in mm, measured from the lower-left board corner
        ix, iy = cell
        return (ix - 0.5) * self.cell_w, (iy - 0.5) * self.cell_h


# Candidate cells of each element: (low slot, high slot).
@dataclasses.dataclass(frozen=True)
class ElementSlots:
    input_port: Tuple[Cell, Cell] = ((1, 4), (1, 12))
    cap1: Tuple[Cell, Cell] = ((3, 4), (3, 12))
    inductor: Tuple[Cell, Cell] = ((6, 4), (6, 12))
    cap2: Tuple[Cell, Cell] = ((8, 4), (8, 12))
    output_port: Tuple[Cell, Cell] = ((10, 4), (10, 12))

    def __post_init__(self):
        for kind in ELEMENT_ORDER:
            low, high = getattr(self, kind.value)
            if tuple(low) == tuple(high):
                raise EncodingError(f'{kind.value} has identical low and high candidate cells {low}')

    def cell(self, kind: ElementKind, slot: Slot) -> Cell:
        low, high = getattr(self, kind.value)
        return tuple(low) if slot == Slot.LOW else tuple(high)

    def check_grid(self, grid: GridSpec):
        for kind in ELEMENT_ORDER:
            for slot in Slot:
                grid.check_cell(self.cell(kind, slot))


@dataclasses.dataclass(frozen=True)
class DesignVector:
    bits: Tuple[int, ...]

    def __post_init__(self):
        bits = tuple(self.bits)
        if len(bits) != N_BITS:
            raise EncodingError(f'design vector needs {N_BITS} bits, got {len(bits)}')
        if any(b not in (0, 1) for b in bits):
            raise EncodingError(f'design vector bits must be 0 or 1: {bits}')
        object.__setattr__(self, 'bits', tuple(int(b) for b in bits))

    @classmethod
    def from_string(cls, s: str) -> 'DesignVector':
        s = s.strip()
        if len(s) != N_BITS or set(s) - {'0', '1'}:
            raise EncodingError(f'expected a {N_BITS}-character string of 0/1, got {s!r}')
        return cls(tuple(int(c) for c in s))

    @classmethod
    def from_array(cls, arr: Iterable) -> 'DesignVector':
        # exact 0/1 only; 0.6 or -1 is an error, not a rounding
        values = np.asarray(arr).reshape(-1)
        if not np.all((values == 0) | (values == 1)):
            raise EncodingError(f'design vector entries must be exactly 0 or 1: {values.tolist()}')
        return cls(tuple(int(v) for v in values))

    @classmethod
    def random(cls, rng: np.random.Generator) -> 'DesignVector':
        return cls(tuple(rng.integers(0, 2, size=N_BITS).tolist()))

    @classmethod
    def from_choices(cls, slots: Sequence[Slot], variants: Sequence[Iterable[Variant]]) -> 'DesignVector':
        # build a vector from per-element slots and per-segment variant sets (an empty set gives "000")
        if len(slots) != N_ELEMENTS or len(variants) != N_SEGMENTS:
            raise EncodingError('need 5 slots and 4 variant sets')
        bits: List[int] = []
        for slot in slots:
            bits.extend(SLOT_BITS[slot])
        for vs in variants:
            vs = {vs} if isinstance(vs, Variant) else set(vs)
            bits.extend(int(v in vs) for v in VARIANT_ORDER)
        return cls(tuple(bits))

    def __str__(self):
        return ''.join(str(b) for b in self.bits)

    def to_array(self) -> np.ndarray:
        return np.array(self.bits, dtype=np.int8)

    def element_pair(self, m: int) -> Tuple[int, int]:
        return self.bits[2 * m], self.bits[2 * m + 1]

    def path_triple(self, s: int) -> Tuple[int, int, int]:
        start = ELEMENT_BITS + N_VARIANTS * s
        return self.bits[start], self.bits[start + 1], self.bits[start + 2]


@dataclasses.dataclass(frozen=True)
class ElementPlacement:
    kind: ElementKind
    slot: Slot
    cell: Cell


@dataclasses.dataclass(frozen=True)
class PathSelection:
    segment: Segment
    variants: FrozenSet[Variant]  # empty: disconnected ("000")

    @property
    def is_disconnected(self) -> bool:
        return len(self.variants) == 0

    @property
    def is_multi_hot(self) -> bool:
        return len(self.variants) > 1


@dataclasses.dataclass(frozen=True)
class RealizedGeometry:
    placements: Tuple[ElementPlacement, ...]
    segment_cells: Tuple[FrozenSet[Cell], ...]
    dummy_flags: Tuple[bool, ...]
    paths: Tuple[PathSelection, ...] = ()  # empty for hand-built geometries; encode() infers variants then

    def placement(self, kind: ElementKind) -> ElementPlacement:
        for p in self.placements:
            if p.kind == kind:
                return p
        raise EncodingError(f'no placement for {kind.value}')

    def terminals(self, segment: Segment) -> Tuple[Cell, Cell]:
        return self.placement(segment.start).cell, self.placement(segment.end).cell

    def to_dict(self) -> Dict:
        # element cells and every conductor cell per segment, 1-based (ix, iy)
        return {
            'placements': [{'element': p.kind.value, 'slot': p.slot.value, 'cell': list(p.cell)}
                           for p in self.placements],
            'segments': [{
                'segment': segment.name.lower(),
                'variants': sorted(v.value for v in self.paths[s].variants) if self.paths else None,
                'dummy': self.dummy_flags[s],
                'cells': [list(c) for c in sorted(self.segment_cells[s])],
            } for s, segment in enumerate(SEGMENT_ORDER)],
        }

    def validate(self):
        # every segment must contain both terminals and be 4-connected, so the circuit is continuous
        if len(self.placements) != N_ELEMENTS or len(self.segment_cells) != N_SEGMENTS:
            raise EncodingError('geometry needs 5 placements and 4 segments')
        for segment, cells in zip(SEGMENT_ORDER, self.segment_cells):
            a, b = self.terminals(segment)
            if a not in cells or b not in cells:
                raise EncodingError(f'segment {segment.name} does not reach both terminals {a}, {b}')
            if not is_four_connected(cells):
                raise EncodingError(f'segment {segment.name} is not 4-connected')


@dataclasses.dataclass(frozen=True)
class Feasible:
    geometry: RealizedGeometry


@dataclasses.dataclass(frozen=True)
class OneHotViolation:
    z: int


DecodeOutcome = Union[Feasible, OneHotViolation]


# z = sum over the five element pairs of (x_{2m-1} + x_{2m} - 1)^2; path bits never contribute
def one_hot_violation(x: DesignVector) -> int:
    return sum((x.bits[2 * m] + x.bits[2 * m + 1] - 1) ** 2 for m in range(N_ELEMENTS))


def one_hot_violation_batch(bits: np.ndarray) -> np.ndarray:
    # bits: (N, 22) array of 0/1; returns z for every row
    bits = np.asarray(bits, dtype=np.int64)
    pairs = bits[:, :ELEMENT_BITS].reshape(-1, N_ELEMENTS, 2)
    return ((pairs.sum(axis=2) - 1) ** 2).sum(axis=1)


def _sign(v: int) -> int:
    return (v > 0) - (v < 0)


# Route between two cells following one of the three fixed rules.
# Returns the visited cells in order, from a to b inclusive.
def route_path(a: Cell, b: Cell, variant: Variant) -> List[Cell]:
    dx, dy = b[0] - a[0], b[1] - a[1]
    x_moves = [(_sign(dx), 0)] * abs(dx)
    y_moves = [(0, _sign(dy))] * abs(dy)
    if variant == Variant.A:
        moves = x_moves + y_moves
    elif variant == Variant.C:
        moves = y_moves + x_moves
    else:
        first = abs(dy) // 2
        moves = y_moves[:first] + x_moves + y_moves[first:]

    path = [tuple(a)]
    for mx, my in moves:
        x, y = path[-1]
        path.append((x + mx, y + my))
    return path


# Filled bounding rectangle of the two terminals, substituted for a disconnected segment.
def dummy_conductor(a: Cell, b: Cell, grid: GridSpec) -> FrozenSet[Cell]:
    grid.check_cell(a)
    grid.check_cell(b)
    xs = range(min(a[0], b[0]), max(a[0], b[0]) + 1)
    ys = range(min(a[1], b[1]), max(a[1], b[1]) + 1)
    return frozenset(itertools.product(xs, ys))


def variant_union(a: Cell, b: Cell, variants: Iterable[Variant]) -> FrozenSet[Cell]:
    cells = set()
    for v in variants:
        cells.update(route_path(a, b, v))
    return frozenset(cells)


def is_four_connected(cells: Iterable[Cell]) -> bool:
    cells = set(cells)
    if not cells:
        return False
    graph = nx.Graph()
    graph.add_nodes_from(cells)
    for x, y in cells:
        for neighbor in ((x + 1, y), (x, y + 1)):
            if neighbor in cells:
                graph.add_edge((x, y), neighbor)
    return nx.is_connected(graph)


def decode(x: DesignVector, grid: GridSpec = GridSpec(), slots: ElementSlots = ElementSlots()) -> DecodeOutcome:
    z = one_hot_violation(x)
    if z > 0:
        # not a filter at all; no geometry is built
        return OneHotViolation(z)

    placements = []
    for m, kind in enumerate(ELEMENT_ORDER):
        slot = Slot.LOW if x.element_pair(m) == SLOT_BITS[Slot.LOW] else Slot.HIGH
        cell = slots.cell(kind, slot)
        grid.check_cell(cell)
        placements.append(ElementPlacement(kind, slot, cell))
    cell_of = {p.kind: p.cell for p in placements}

    paths, segment_cells, dummy_flags = [], [], []
    for s, segment in enumerate(SEGMENT_ORDER):
        variants = frozenset(v for v, bit in zip(VARIANT_ORDER, x.path_triple(s)) if bit)
        a, b = cell_of[segment.start], cell_of[segment.end]
        if variants:
            cells = variant_union(a, b, variants)
        else:
            cells = dummy_conductor(a, b, grid)
        paths.append(PathSelection(segment, variants))
        segment_cells.append(cells)
        dummy_flags.append(not variants)

    return Feasible(RealizedGeometry(
        placements=tuple(placements),
        segment_cells=tuple(segment_cells),
        dummy_flags=tuple(dummy_flags),
        paths=tuple(paths),
    ))


def _infer_variants(a: Cell, b: Cell, cells: FrozenSet[Cell]) -> FrozenSet[Variant]:
    for subset in VARIANT_SUBSETS:
        if variant_union(a, b, subset) == cells:
            return subset
    raise EncodingError(f'cells between {a} and {b} match no route variant or union of variants')


# Inverse of decode for layouts without dummy segments.
def encode(g: RealizedGeometry, grid: GridSpec = GridSpec(), slots: ElementSlots = ElementSlots()) -> DesignVector:
    if [p.kind for p in g.placements] != ELEMENT_ORDER:
        raise EncodingError('placements must be listed in board order')
    bits: List[int] = []
    for p in g.placements:
        grid.check_cell(p.cell)
        if slots.cell(p.kind, p.slot) != tuple(p.cell):
            raise EncodingError(f'{p.kind.value} at {p.cell} is not its {p.slot.value} candidate cell')
        bits.extend(SLOT_BITS[p.slot])

    for s, segment in enumerate(SEGMENT_ORDER):
        if g.dummy_flags[s]:
            raise EncodingError(f'segment {segment.name} is a dummy conductor and has no canonical encoding')
        a, b = g.terminals(segment)
        cells = frozenset(g.segment_cells[s])
        variants: Optional[FrozenSet[Variant]] = g.paths[s].variants if g.paths else None
        if variants:
            if variant_union(a, b, variants) != cells:
                raise EncodingError(f'segment {segment.name} cells do not match variants {sorted(v.value for v in variants)}')
        else:
            variants = _infer_variants(a, b, cells)
        bits.extend(int(v in variants) for v in VARIANT_ORDER)
    return DesignVector(tuple(bits))


# All 2^5 * 3^4 = 2592 designs with one-hot elements and a single path per segment,
# in lexicographic order over (slots, variants) with LOW before HIGH and A before B before C.
def enumerate_canonical() -> Iterator[DesignVector]:
    for slot_choice in itertools.product([Slot.LOW, Slot.HIGH], repeat=N_ELEMENTS):
        for variant_choice in itertools.product(VARIANT_ORDER, repeat=N_SEGMENTS):
            yield DesignVector.from_choices(slot_choice, variant_choice)


def is_canonical(x: DesignVector) -> bool:
    return one_hot_violation(x) == 0 and all(sum(x.path_triple(s)) == 1 for s in range(N_SEGMENTS))
