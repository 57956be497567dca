# Lumped-element model of a pi filter laid out on the board:
# geometry-derived trace parasitics, a coupling bridge between the input-side and output-side nets,
# and an ABCD (chain matrix) cascade that gives S21 at a single analysis frequency.
#
# GridSpec lengths are in mm; everything in this module is converted to SI units.
import cmath
import dataclasses
import functools
import math
from typing import FrozenSet, Iterable, Sequence, Tuple

import networkx as nx
import numpy as np
from scipy.constants import epsilon_0, mu_0
from scipy.spatial.distance import cdist

from .encoding import Cell, GridSpec, RealizedGeometry, SEGMENT_ORDER

MM = 1e-3


class CircuitModelError(ValueError):
    pass


class DegenerateNetworkError(CircuitModelError):
    pass


@dataclasses.dataclass(frozen=True)
class MaterialParams:
    eps_r: float = 4.5
    mu_r: float = 1.0
    substrate_sigma: float = 1.0e-8  # S/m; the lossless model does not use it

    def __post_init__(self):
        if self.eps_r < 1 or self.mu_r < 1 or self.substrate_sigma < 0:
            raise CircuitModelError(f'invalid material parameters {self}')


@dataclasses.dataclass(frozen=True)
class CircuitParams:
    z0: float = 50.0  # port impedance, ohm
    c_shunt: float = 100e-9  # each shunt capacitor, F
    l_series: float = 10e-6  # series inductor, H
    freq: float = 10e6  # analysis frequency, Hz
    kappa_c: float = 1.0  # coupling-bridge gain

    def __post_init__(self):
        if min(self.z0, self.c_shunt, self.l_series, self.freq) <= 0 or self.kappa_c < 0:
            raise CircuitModelError(f'invalid circuit parameters {self}')

    @property
    def omega(self) -> float:
        return 2 * math.pi * self.freq


@dataclasses.dataclass(frozen=True)
class TwoPortABCD:
    a: complex
    b: complex
    c: complex
    d: complex

    @classmethod
    def identity(cls) -> 'TwoPortABCD':
        return cls(1, 0, 0, 1)

    def __matmul__(self, other: 'TwoPortABCD') -> 'TwoPortABCD':
        # cascade: self followed by other
        return TwoPortABCD(
            a=self.a * other.a + self.b * other.c,
            b=self.a * other.b + self.b * other.d,
            c=self.c * other.a + self.d * other.c,
            d=self.c * other.b + self.d * other.d,
        )

    @property
    def determinant(self) -> complex:
        return self.a * self.d - self.b * self.c


def abcd_series(z: complex) -> TwoPortABCD:
    return TwoPortABCD(1, z, 0, 1)


def abcd_shunt(y: complex) -> TwoPortABCD:
    return TwoPortABCD(1, 0, y, 1)


def abcd_chain(stages: Sequence[TwoPortABCD]) -> TwoPortABCD:
    return functools.reduce(lambda left, right: left @ right, stages, TwoPortABCD.identity())


def s21_from_abcd(m: TwoPortABCD, z0: float) -> complex:
    if z0 <= 0:
        raise CircuitModelError(f'port impedance must be positive, got {z0}')
    denominator = m.a + m.b / z0 + m.c * z0 + m.d
    if denominator == 0 or not cmath.isfinite(denominator):
        raise DegenerateNetworkError(f'degenerate network: a + b/z0 + c*z0 + d = {denominator}')
    return 2 / denominator


def to_db(s21: complex) -> float:
    magnitude = abs(s21)
    if magnitude == 0:
        raise DegenerateNetworkError('S21 is exactly zero')
    return 20 * math.log10(magnitude)


# Parallel-plate capacitance of a conductor area over the grounded backplane.
def shunt_capacitance(cells: Iterable[Cell], grid: GridSpec, mat: MaterialParams) -> float:
    n_cells = len(set(cells))
    if n_cells == 0:
        raise CircuitModelError('empty conductor cell set')
    return epsilon_0 * mat.eps_r * n_cells * grid.cell_area * MM * MM / (grid.substrate_h * MM)


# Shortest terminal-to-terminal route through the cell set, in m
# (an X step costs one cell width, a Y step one cell height).
def route_length(cells: FrozenSet[Cell], a: Cell, b: Cell, grid: GridSpec) -> float:
    graph = nx.Graph()
    graph.add_nodes_from(cells)
    for x, y in cells:
        if (x + 1, y) in cells:
            graph.add_edge((x, y), (x + 1, y), weight=grid.cell_w)
        if (x, y + 1) in cells:
            graph.add_edge((x, y), (x, y + 1), weight=grid.cell_h)
    try:
        return nx.shortest_path_length(graph, tuple(a), tuple(b), weight='weight') * MM
    except (nx.NetworkXNoPath, nx.NodeNotFound) as e:
        raise CircuitModelError(f'no conductor route from {a} to {b} through the cell set') from e


def trace_parasitics(cells: Iterable[Cell], a: Cell, b: Cell,
                     grid: GridSpec, mat: MaterialParams) -> Tuple[float, float]:
    # returns (L_trace in H, C_trace in F) of one segment conductor
    cells = frozenset(cells)
    c_trace = shunt_capacitance(cells, grid, mat)

    min_pitch = min(grid.cell_w, grid.cell_h) * MM
    length = max(route_length(cells, a, b, grid), min_pitch)
    area = len(cells) * grid.cell_area * MM * MM
    width = max(area / length, min_pitch)
    l_trace = mu_0 * mat.mu_r * grid.substrate_h * MM * length / width
    return l_trace, c_trace


# Proximity capacitance between two disjoint nets: sum over cell pairs of area / (distance + substrate height).
def bridge_capacitance(net_a: Iterable[Cell], net_b: Iterable[Cell],
                       grid: GridSpec, mat: MaterialParams, kappa_c: float) -> float:
    net_a, net_b = frozenset(net_a), frozenset(net_b)
    if not net_a or not net_b:
        raise CircuitModelError('bridge nets must be nonempty')
    if net_a & net_b:
        raise CircuitModelError(f'bridge nets overlap at {sorted(net_a & net_b)}')
    if kappa_c == 0:
        return 0.0

    centers_a = np.array([grid.cell_center(c) for c in sorted(net_a)]) * MM
    centers_b = np.array([grid.cell_center(c) for c in sorted(net_b)]) * MM
    distances = cdist(centers_a, centers_b)
    cell_area = grid.cell_area * MM * MM
    return kappa_c * epsilon_0 * mat.eps_r * float(np.sum(cell_area / (distances + grid.substrate_h * MM)))


# The filter cascade from explicit element values:
# series(L_in) . shunt(C1) . series(L_mid bypassed by the bridge) . shunt(C2) . series(L_out).
# The bridge is a lossless bypass whose admittance is in phase with the inductor's,
# so a larger bridge always lowers the effective series impedance (no LC tank resonance).
def filter_abcd(omega: float, c1: float, c2: float, l_mid: float,
                l_in: float = 0.0, l_out: float = 0.0, c_bridge: float = 0.0) -> TwoPortABCD:
    if l_mid <= 0:
        raise DegenerateNetworkError('series inductance must be positive')
    jw = 1j * omega
    y_mid = 1 / (jw * l_mid) + omega * c_bridge / 1j
    return abcd_chain([
        abcd_series(jw * l_in),
        abcd_shunt(jw * c1),
        abcd_series(1 / y_mid),
        abcd_shunt(jw * c2),
        abcd_series(jw * l_out),
    ])


# Net A runs from the input port to the inductor, net B from the inductor to the output port;
# cells shared by both belong to net A, so net B may be empty.
def split_nets(g: RealizedGeometry) -> Tuple[FrozenSet[Cell], FrozenSet[Cell]]:
    net_a = g.segment_cells[0] | g.segment_cells[1]
    return net_a, (g.segment_cells[2] | g.segment_cells[3]) - net_a


def filter_cascade(g: RealizedGeometry, grid: GridSpec, mat: MaterialParams, p: CircuitParams) -> TwoPortABCD:
    trace_l = []
    for segment, cells in zip(SEGMENT_ORDER, g.segment_cells):
        a, b = g.terminals(segment)
        l_trace, _ = trace_parasitics(cells, a, b, grid, mat)
        trace_l.append(l_trace)

    net_a, net_b = split_nets(g)
    c_net_a = shunt_capacitance(net_a, grid, mat)
    if net_b:
        c_net_b = shunt_capacitance(net_b, grid, mat)
        c_bridge = bridge_capacitance(net_a, net_b, grid, mat, p.kappa_c)
    else:
        c_net_b = c_bridge = 0.0

    return filter_abcd(
        p.omega,
        c1=p.c_shunt + c_net_a,
        c2=p.c_shunt + c_net_b,
        l_mid=trace_l[1] + p.l_series + trace_l[2],
        l_in=trace_l[0],
        l_out=trace_l[3],
        c_bridge=c_bridge,
    )


def evaluate_s21(g: RealizedGeometry, grid: GridSpec, mat: MaterialParams, p: CircuitParams) -> float:
    return to_db(s21_from_abcd(filter_cascade(g, grid, mat, p), p.z0))
