"""Two-phase grid localization.

Coarse phase: pick the four strongest beacon reports and try to resolve the
grid cell they outline. Fine phase: closed-form in-cell position from the
four corner ranges. Two degenerate layouts get dedicated handlers: the four
strongest beacons straddling two cells (pair split) and one beacon
dominating the ranking (near beacon).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, Sequence

from .channel import D_MIN_M, DEFAULT_A_DBM, rss_to_distance
from .geometry import (COORD_TOL, CellId, GeometryError, GridSpec,
                       OutOfRegionError, Point, cell_of_corners,
                       containing_cell, is_rectangle)


class FixMethod(Enum):
    REFINED = "refined"
    PAIR_SPLIT = "pair_split"
    NEAR_BEACON = "near_beacon"
    NO_FIX = "no_fix"
    # Produced only by baseline runs, never by localize().
    CENTROID = "centroid"


@dataclass(frozen=True)
class RssiReport:
    """Averaged signal strength from one beacon."""

    beacon_pos: Point
    avg_rssi_dbm: float
    sample_count: int = 1

    def __post_init__(self) -> None:
        if self.sample_count < 1:
            raise ValueError("sample_count must be >= 1")


@dataclass(frozen=True)
class EstimatorState:
    """Per-blind-node history carried between rounds."""

    n_current: float = 2.0
    last_cell: Optional[CellId] = None
    last_estimate: Optional[Point] = None

    def __post_init__(self) -> None:
        if self.n_current <= 0:
            raise ValueError("n_current must be positive")


@dataclass(frozen=True)
class Estimate:
    pos: Optional[Point]
    method: FixMethod
    cell: Optional[CellId] = None
    n_used: float = 2.0
    # True when pair-split geometry was unsupported and the weighted
    # centroid stood in.
    fallback_centroid: bool = False


@dataclass(frozen=True)
class LocalizerConfig:
    grid: GridSpec
    a_dbm: float = DEFAULT_A_DBM
    near_beacon_tau: float = 0.25
    n_min: float = 1.0
    n_max: float = 6.0
    range_d_min: float = D_MIN_M
    range_d_max: float = 120.0

    def range_of(self, rss_dbm: float, n_exp: float) -> float:
        return rss_to_distance(rss_dbm, self.a_dbm, n_exp,
                               self.range_d_min, self.range_d_max).distance_m


def select_top4(reports: Sequence[RssiReport]) -> Optional[list[RssiReport]]:
    """Four strongest reports, or None when fewer than four beacons answered.

    Ties break on beacon position, lexicographic, so selection is
    deterministic.
    """
    if len(reports) < 4:
        return None
    ordered = sorted(reports, key=lambda r: (-r.avg_rssi_dbm, r.beacon_pos))
    return ordered[:4]


def adapt_n(rss_between_beacons: float, true_dist_m: float, n_prime: float,
            a_dbm: float, n_min: float = 1.0, n_max: float = 6.0) -> float:
    """Path-loss exponent from one beacon-to-beacon link of known length.

    Ranging the link with the working exponent n_prime gives an apparent
    length; the ratio of log-lengths rescales n_prime toward the exponent
    that actually produced the measurement. Exact in one step on noiseless
    input. The apparent length is computed unclamped on purpose: clamping
    would silently cap the recoverable exponent.
    """
    if true_dist_m <= 0:
        raise ValueError("true_dist_m must be positive")
    if n_prime <= 0:
        raise ValueError("n_prime must be positive")
    log_d = math.log(true_dist_m)
    if log_d == 0.0:
        raise ValueError("a 1 m link cannot calibrate the exponent")
    log_d_apparent = (a_dbm - rss_between_beacons) / (10.0 * n_prime) * math.log(10.0)
    n = n_prime * log_d_apparent / log_d
    return min(max(n, n_min), n_max)


def refine_in_cell(corner_distances: Sequence[tuple[Point, float]],
                   clamp: bool = True, tol: float = COORD_TOL) -> Point:
    """Closed-form position inside a rectangle from its four corner ranges.

    Each opposite-corner-column pair yields one x equation and each
    corner-row pair one y equation; averaging the two of each makes the
    result exact whenever the four distances are mutually consistent.
    The estimate is clamped to the rectangle unless clamp is False.
    """
    if len(corner_distances) != 4:
        raise GeometryError("refine_in_cell needs four corners")
    pts = [p for p, _ in corner_distances]
    if not is_rectangle(pts, tol):
        raise GeometryError("corners do not form a rectangle")
    x_lo = min(p[0] for p in pts)
    x_hi = max(p[0] for p in pts)
    y_lo = min(p[1] for p in pts)
    y_hi = max(p[1] for p in pts)
    if x_hi - x_lo <= tol or y_hi - y_lo <= tol:
        raise GeometryError("degenerate rectangle")

    def corner(px: float, py: float) -> float:
        for p, d in corner_distances:
            if abs(p[0] - px) <= tol and abs(p[1] - py) <= tol:
                return d
        raise GeometryError("missing corner")

    d1 = corner(x_lo, y_hi)
    d2 = corner(x_hi, y_hi)
    d3 = corner(x_hi, y_lo)
    d4 = corner(x_lo, y_lo)
    x = 0.5 * (x_lo + x_hi - ((d1 * d1 + d4 * d4) - (d2 * d2 + d3 * d3))
               / (2.0 * (x_lo - x_hi)))
    y = 0.5 * (y_hi + y_lo - ((d1 * d1 + d2 * d2) - (d3 * d3 + d4 * d4))
               / (2.0 * (y_hi - y_lo)))
    if clamp:
        x = min(max(x, x_lo), x_hi)
        y = min(max(y, y_lo), y_hi)
    return Point(x, y)


# The three perfect matchings of four items, applied after sorting reports
# by beacon position.
_PAIRINGS = (((0, 1), (2, 3)), ((0, 2), (1, 3)), ((0, 3), (1, 2)))


def pair_split_estimate(reports: Sequence[RssiReport], n_used: float,
                        a_dbm: float, d_min: float = D_MIN_M,
                        d_max: float = 120.0,
                        tol: float = COORD_TOL) -> Optional[Point]:
    """Straddling-cells handler.

    Splits the four reports into the two pairs with the most similar
    signal strengths, then laterates one axis per pair: a pair sharing a y
    coordinate fixes x, a pair sharing an x coordinate fixes y. Returns
    None when the chosen pairs do not supply both axes (collinear beacons,
    diagonal pairs); the caller falls back to a weighted centroid.
    """
    if len(reports) != 4:
        raise ValueError("pair_split_estimate needs exactly four reports")
    ordered = sorted(reports, key=lambda r: r.beacon_pos)
    best_cost = math.inf
    best = _PAIRINGS[0]
    for pairing in _PAIRINGS:
        cost = sum(abs(ordered[a].avg_rssi_dbm - ordered[b].avg_rssi_dbm)
                   for a, b in pairing)
        if cost < best_cost:
            best_cost = cost
            best = pairing
    x_est: Optional[float] = None
    y_est: Optional[float] = None
    for a, b in best:
        ra, rb = ordered[a], ordered[b]
        da = rss_to_distance(ra.avg_rssi_dbm, a_dbm, n_used, d_min, d_max).distance_m
        db = rss_to_distance(rb.avg_rssi_dbm, a_dbm, n_used, d_min, d_max).distance_m
        pa, pb = ra.beacon_pos, rb.beacon_pos
        if abs(pa[1] - pb[1]) <= tol and abs(pa[0] - pb[0]) > tol:
            est = 0.5 * (pa[0] + pb[0]) + (da * da - db * db) / (2.0 * (pb[0] - pa[0]))
            if x_est is None:
                x_est = est
        elif abs(pa[0] - pb[0]) <= tol and abs(pa[1] - pb[1]) > tol:
            est = 0.5 * (pa[1] + pb[1]) + (da * da - db * db) / (2.0 * (pb[1] - pa[1]))
            if y_est is None:
                y_est = est
    if x_est is None or y_est is None:
        return None
    return Point(x_est, y_est)


def near_beacon_estimate(max_report: RssiReport, state: EstimatorState,
                         n_used: float, a_dbm: float, grid: GridSpec,
                         d_min: float = D_MIN_M,
                         d_max: float = 120.0) -> Point:
    """Dominant-beacon handler.

    The blind node sits on a circle of the ranged radius around the
    loudest beacon; history picks the direction along it. Preference:
    last position estimate, then the last resolved cell's center, then no
    direction at all (the beacon position itself). Always lands inside
    the region.
    """
    r = rss_to_distance(max_report.avg_rssi_dbm, a_dbm, n_used,
                        d_min, d_max).distance_m
    anchor = max_report.beacon_pos
    target = state.last_estimate
    if target is None and state.last_cell is not None:
        target = grid.cell_center(state.last_cell)
    if target is None:
        return grid.clamp(anchor)
    vx = target[0] - anchor[0]
    vy = target[1] - anchor[1]
    norm = math.hypot(vx, vy)
    if norm <= COORD_TOL:
        return grid.clamp(anchor)
    return grid.clamp(Point(anchor[0] + r * vx / norm,
                            anchor[1] + r * vy / norm))


def weighted_centroid(reports: Sequence[RssiReport]) -> Point:
    """Beacon positions averaged with linearized-power weights."""
    if not reports:
        raise ValueError("weighted_centroid needs at least one report")
    wsum = wx = wy = 0.0
    for r in reports:
        w = 10.0 ** (r.avg_rssi_dbm / 10.0)
        wsum += w
        wx += w * r.beacon_pos[0]
        wy += w * r.beacon_pos[1]
    return Point(wx / wsum, wy / wsum)


def _cell_or_none(p: Point, grid: GridSpec) -> Optional[CellId]:
    try:
        return containing_cell(p, grid)
    except OutOfRegionError:
        return None


def localize(reports: Sequence[RssiReport], state: EstimatorState,
             config: LocalizerConfig) -> tuple[Estimate, EstimatorState]:
    """One localization round: select, dispatch, estimate, update history.

    Dispatch order: fewer than four reports is NoFix; a top-4 outlining a
    single grid cell refines inside it; otherwise a dominant beacon
    (ranged distance under near_beacon_tau cell spacings) is handled by
    direction recovery; everything else pair-splits, with the weighted
    centroid as the safety net. Degenerate geometry degrades, it never
    aborts.
    """
    n = state.n_current
    top4 = select_top4(reports)
    if top4 is None:
        return Estimate(None, FixMethod.NO_FIX, None, n), state

    grid = config.grid
    positions = [r.beacon_pos for r in top4]
    if is_rectangle(positions):
        try:
            cell = cell_of_corners(positions, grid)
            pairs = [(r.beacon_pos, config.range_of(r.avg_rssi_dbm, n))
                     for r in top4]
            pos = refine_in_cell(pairs)
            est = Estimate(pos, FixMethod.REFINED, cell, n)
            return est, replace(state, last_cell=cell, last_estimate=pos)
        except GeometryError:
            # A rectangle wider than one cell, or off the lattice; treat
            # it like the non-rectangle cases below.
            pass

    strongest = top4[0]
    r_near = config.range_of(strongest.avg_rssi_dbm, n)
    if r_near < config.near_beacon_tau * grid.spacing_m:
        pos = near_beacon_estimate(strongest, state, n, config.a_dbm, grid,
                                   config.range_d_min, config.range_d_max)
        cell = _cell_or_none(pos, grid)
        est = Estimate(pos, FixMethod.NEAR_BEACON, cell, n)
        new_state = replace(state, last_estimate=pos,
                            last_cell=cell if cell is not None else state.last_cell)
        return est, new_state

    fallback = False
    pos = pair_split_estimate(top4, n, config.a_dbm,
                              config.range_d_min, config.range_d_max)
    if pos is None:
        pos = weighted_centroid(top4)
        fallback = True
    cell = _cell_or_none(pos, grid)
    est = Estimate(pos, FixMethod.PAIR_SPLIT, cell, n, fallback_centroid=fallback)
    new_state = replace(state, last_estimate=pos,
                        last_cell=cell if cell is not None else state.last_cell)
    return est, new_state
