"""Deterministic discrete-event scenario runs.

Binds the channel, lattice, protocol machines and estimator into
reproducible rounds: one heap-ordered event queue per round, zero
propagation delay, FIFO among same-time events, every reception sampled
through the channel from a single seeded stream.
"""

from __future__ import annotations

import heapq
import itertools
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Union

import numpy as np

from . import channel as chan
from . import estimator as est
from . import geometry as geo
from . import protocol as proto


class ScenarioError(ValueError):
    """Invalid scenario description; the message names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


@dataclass(frozen=True)
class Static:
    point: geo.Point


@dataclass(frozen=True)
class Waypoints:
    # (position, dwell in whole rounds); the node is frozen within a round.
    points: tuple[tuple[geo.Point, int], ...]


@dataclass(frozen=True)
class LatticeSweep:
    nx: int = 25
    ny: int = 25


Trajectory = Union[Static, Waypoints, LatticeSweep]


@dataclass(frozen=True)
class EstimatorSettings:
    n_initial: float = 2.0
    near_beacon_tau: float = 0.25
    adapt: bool = False
    calibration_beacons: tuple[int, int] = (0, 1)
    n_min: float = 1.0
    n_max: float = 6.0


@dataclass(frozen=True)
class ProtocolSettings:
    accum_count: int = proto.DEFAULT_ACCUM_COUNT
    inter_test_gap_ms: float = proto.DEFAULT_INTER_TEST_GAP_MS
    response_window_ms: float = proto.DEFAULT_RESPONSE_WINDOW_MS
    ack_timeout_ms: float = proto.DEFAULT_ACK_TIMEOUT_MS
    round_interval_ms: float = 1000.0


@dataclass(frozen=True)
class Scenario:
    grid: geo.GridSpec = geo.GridSpec()
    channel: chan.ChannelParams = chan.ChannelParams()
    estimator: EstimatorSettings = EstimatorSettings()
    protocol: ProtocolSettings = ProtocolSettings()
    trajectory: Trajectory = Static(geo.Point(2.0, 2.0))
    rounds: int = 1
    seed: int = 0
    quantize_rssi: bool = False

    def validate(self) -> None:
        if self.rounds < 1:
            raise ScenarioError("rounds", "must be >= 1")
        if self.protocol.round_interval_ms <= 0:
            raise ScenarioError("protocol.round_interval_ms", "must be positive")
        if self.protocol.accum_count < 1:
            raise ScenarioError("protocol.accum_count", "must be >= 1")
        e = self.estimator
        if e.n_initial <= 0:
            raise ScenarioError("estimator.n_initial", "must be positive")
        if not 0 < e.near_beacon_tau < 1:
            raise ScenarioError("estimator.near_beacon_tau", "must be in (0, 1)")
        if not 0 < e.n_min <= e.n_max:
            raise ScenarioError("estimator.n_min", "need 0 < n_min <= n_max")
        if e.adapt:
            n_beacons = self.grid.cols * self.grid.rows
            a, b = e.calibration_beacons
            if a == b or not (0 <= a < n_beacons and 0 <= b < n_beacons):
                raise ScenarioError("estimator.calibration_beacons",
                                    "need two distinct beacon ids on the lattice")
            if abs(_calibration_length(self) - 1.0) <= geo.COORD_TOL:
                raise ScenarioError("estimator.calibration_beacons",
                                    "a 1 m link cannot calibrate the exponent")
        if isinstance(self.trajectory, LatticeSweep):
            t = self.trajectory
            if t.nx < 1 or t.ny < 1:
                raise ScenarioError("trajectory", "sweep needs nx, ny >= 1")
            if self.rounds != t.nx * t.ny:
                raise ScenarioError("rounds",
                                    f"must equal nx*ny = {t.nx * t.ny} for a lattice sweep")
        for i, p in enumerate(self.positions()):
            xmin, ymin, xmax, ymax = self.grid.bounds()
            if not (xmin <= p[0] <= xmax and ymin <= p[1] <= ymax):
                raise ScenarioError("trajectory",
                                    f"point {i} at ({p[0]}, {p[1]}) outside the lattice hull")
            for b in geo.build_lattice(self.grid):
                if geo.dist(p, b.pos) <= geo.COORD_TOL:
                    raise ScenarioError("trajectory",
                                        f"point {i} coincides with beacon {b.id}")

    def positions(self) -> list[geo.Point]:
        """Blind-node position for each round."""
        t = self.trajectory
        if isinstance(t, Static):
            return [t.point] * self.rounds
        if isinstance(t, LatticeSweep):
            return sweep_points(self.grid, t.nx, t.ny)
        out: list[geo.Point] = []
        for p, dwell in t.points:
            out.extend([p] * dwell)
        if not out:
            raise ScenarioError("trajectory.points", "must not be empty")
        if len(out) < self.rounds:
            out.extend([out[-1]] * (self.rounds - len(out)))
        return out[:self.rounds]


def _axis_samples(start: float, width: float, count: int, spacing: float) -> list[float]:
    step = width / count
    out = []
    for i in range(count):
        c = start + (i + 0.5) * step
        rel = (c - start) / spacing
        if abs(rel - round(rel)) * spacing <= geo.COORD_TOL:
            # Sample would sit exactly on a beacon line; pull it a quarter
            # step into the lower cell to keep it cell-interior.
            c -= 0.25 * step
        out.append(c)
    return out


def sweep_points(grid: geo.GridSpec, nx: int, ny: int) -> list[geo.Point]:
    """Row-major sample grid over the lattice hull, inset half a step."""
    xmin, ymin, xmax, ymax = grid.bounds()
    xs = _axis_samples(xmin, xmax - xmin, nx, grid.spacing_m)
    ys = _axis_samples(ymin, ymax - ymin, ny, grid.spacing_m)
    return [geo.Point(x, y) for y in ys for x in xs]


@dataclass(frozen=True)
class RoundRecord:
    round_index: int
    true_pos: geo.Point
    estimate: est.Estimate
    error_m: Optional[float]  # absent when there is no fix
    n_used: float


def _calibration_length(s: Scenario) -> float:
    beacons = geo.build_lattice(s.grid)
    a, b = s.estimator.calibration_beacons
    return geo.dist(beacons[a].pos, beacons[b].pos)


def run_scenario(s: Scenario, trace: Optional[list[str]] = None) -> list[RoundRecord]:
    """Run every round through the full message protocol and estimator."""
    return _run(s, trace, baseline=False)


def run_baseline(s: Scenario, trace: Optional[list[str]] = None) -> list[RoundRecord]:
    """Same rounds and RNG stream, but each fix is the weighted centroid
    of the four strongest reports. Comparison curve only."""
    return _run(s, trace, baseline=True)


def _run(s: Scenario, trace: Optional[list[str]], baseline: bool) -> list[RoundRecord]:
    s.validate()
    rng = np.random.Generator(np.random.PCG64(s.seed))
    beacons = geo.build_lattice(s.grid)
    machines = {f"b{b.id}": proto.BeaconNodeMachine(f"b{b.id}", b.pos)
                for b in beacons}
    cfg = est.LocalizerConfig(
        grid=s.grid,
        a_dbm=s.channel.a_dbm,
        near_beacon_tau=s.estimator.near_beacon_tau,
        n_min=s.estimator.n_min,
        n_max=s.estimator.n_max,
        range_d_max=s.channel.d_max_m,
    )
    state = est.EstimatorState(n_current=s.estimator.n_initial)
    cal_length = _calibration_length(s) if s.estimator.adapt else None

    records = []
    for idx, true_pos in enumerate(s.positions()):
        t0 = idx * s.protocol.round_interval_ms
        if cal_length is not None:
            meas = chan.sample_rss(cal_length, s.channel, rng)
            if meas is not None:
                rss = float(meas.register_dbm) if s.quantize_rssi else meas.rss_dbm
                n_new = est.adapt_n(rss, cal_length, state.n_current,
                                    s.channel.a_dbm, s.estimator.n_min,
                                    s.estimator.n_max)
                state = replace(state, n_current=n_new)
        reports = _protocol_round(s, true_pos, machines, rng, t0, trace)
        if baseline:
            estimate = _centroid_estimate(reports, state.n_current, s.grid)
        else:
            estimate, state = est.localize(reports, state, cfg)
        err = geo.dist(estimate.pos, true_pos) if estimate.pos is not None else None
        records.append(RoundRecord(idx, true_pos, estimate, err, estimate.n_used))
    return records


def _protocol_round(s: Scenario, blind_pos: geo.Point,
                    machines: dict[str, proto.BeaconNodeMachine],
                    rng: np.random.Generator, t0: float,
                    trace: Optional[list[str]]) -> list[est.RssiReport]:
    p = s.protocol
    blind = proto.BlindNodeMachine(
        "m0", accum_count=p.accum_count,
        inter_test_gap_ms=p.inter_test_gap_ms,
        response_window_ms=p.response_window_ms,
        ack_timeout_ms=p.ack_timeout_ms,
    )
    heap: list[tuple[float, int, str, object, Optional[float]]] = []
    seq = itertools.count()

    def push(t: float, dst: str, payload: object, rssi: Optional[float]) -> None:
        heapq.heappush(heap, (t, next(seq), dst, payload, rssi))

    def send(t: float, src_id: str, src_pos: geo.Point, msg: proto.Message) -> None:
        blind_sent = src_id == blind.id
        if trace is not None:
            dst = proto.BROADCAST if blind_sent else blind.id
            trace.append(proto.format_trace_line(t, src_id, dst, msg))
        if blind_sent:
            # Broadcast; each beacon measures its own reception.
            for bid, bm in machines.items():
                meas = chan.sample_rss(geo.dist(src_pos, bm.pos), s.channel, rng)
                if meas is not None:
                    push(t, bid, msg, _level(meas, s))
        else:
            meas = chan.sample_rss(geo.dist(src_pos, blind_pos), s.channel, rng)
            if meas is not None:
                push(t, blind.id, msg, _level(meas, s))

    push(t0, blind.id, proto.StartRound(), None)
    while heap:
        t, _, dst, payload, rssi = heapq.heappop(heap)
        if dst == blind.id:
            blind, emissions = proto.blind_step(blind, payload, t)
            for out, t_send in emissions:
                if isinstance(out, proto.TimerFired):
                    push(t_send, blind.id, out, None)
                else:
                    send(t_send, blind.id, blind_pos, out)
        else:
            machine, outgoing = proto.beacon_step(machines[dst], payload, rssi, t)
            machines[dst] = machine
            for out in outgoing:
                send(t, dst, machine.pos, out)
    return list(blind.collected)


def _level(meas: chan.RssMeasurement, s: Scenario) -> float:
    return float(meas.register_dbm) if s.quantize_rssi else meas.rss_dbm


def _centroid_estimate(reports: list[est.RssiReport], n_current: float,
                       grid: geo.GridSpec) -> est.Estimate:
    top4 = est.select_top4(reports)
    if top4 is None:
        return est.Estimate(None, est.FixMethod.NO_FIX, None, n_current)
    pos = est.weighted_centroid(top4)
    try:
        cell = geo.containing_cell(pos, grid)
    except geo.OutOfRegionError:
        cell = None
    return est.Estimate(pos, est.FixMethod.CENTROID, cell, n_current)


# Scenario files are JSON with this exact shape; unknown keys are rejected.

_TOP_KEYS = {"rng", "seed", "grid", "channel", "estimator", "protocol",
             "trajectory", "rounds", "quantize_rssi"}
_GRID_KEYS = {"origin", "spacing_m", "cols", "rows"}
_CHANNEL_KEYS = {"a_dbm", "n_exp", "sigma_dbm", "rssi_offset_dbm",
                 "reception_radius_m"}
_ESTIMATOR_KEYS = {"n_initial", "near_beacon_tau", "adapt",
                   "calibration_beacons", "n_min", "n_max"}
_PROTOCOL_KEYS = {"accum_count", "inter_test_gap_ms", "response_window_ms",
                  "ack_timeout_ms", "round_interval_ms"}


def _reject_unknown(d: dict, allowed: set[str], path: str) -> None:
    for key in d:
        if key not in allowed:
            where = f"{path}.{key}" if path else key
            raise ScenarioError(where, "unknown key")


def _number(d: dict, key: str, path: str, default: float) -> float:
    v = d.get(key, default)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioError(f"{path}.{key}", "expected a number")
    return float(v)


def _integer(d: dict, key: str, path: str, default: int) -> int:
    v = d.get(key, default)
    if isinstance(v, bool) or not isinstance(v, int):
        raise ScenarioError(f"{path}.{key}", "expected an integer")
    return v


def _boolean(d: dict, key: str, path: str, default: bool) -> bool:
    v = d.get(key, default)
    if not isinstance(v, bool):
        raise ScenarioError(f"{path}.{key}", "expected true or false")
    return v


def _point(v: object, path: str) -> geo.Point:
    if (not isinstance(v, (list, tuple)) or len(v) != 2
            or any(isinstance(c, bool) or not isinstance(c, (int, float)) for c in v)):
        raise ScenarioError(path, "expected [x, y]")
    return geo.Point(float(v[0]), float(v[1]))


def _parse_trajectory(v: object) -> Trajectory:
    if not isinstance(v, dict):
        raise ScenarioError("trajectory", "expected an object")
    kind = v.get("kind")
    if kind == "static":
        _reject_unknown(v, {"kind", "point"}, "trajectory")
        if "point" not in v:
            raise ScenarioError("trajectory.point", "required for static")
        return Static(_point(v["point"], "trajectory.point"))
    if kind == "waypoints":
        _reject_unknown(v, {"kind", "points"}, "trajectory")
        raw = v.get("points")
        if not isinstance(raw, list) or not raw:
            raise ScenarioError("trajectory.points", "expected a non-empty list")
        points = []
        for i, item in enumerate(raw):
            where = f"trajectory.points[{i}]"
            if not isinstance(item, dict):
                raise ScenarioError(where, "expected an object")
            _reject_unknown(item, {"point", "dwell_rounds"}, where)
            if "point" not in item:
                raise ScenarioError(f"{where}.point", "required")
            dwell = _integer(item, "dwell_rounds", where, 1)
            if dwell < 1:
                raise ScenarioError(f"{where}.dwell_rounds", "must be >= 1")
            points.append((_point(item["point"], f"{where}.point"), dwell))
        return Waypoints(tuple(points))
    if kind == "lattice_sweep":
        _reject_unknown(v, {"kind", "nx", "ny"}, "trajectory")
        return LatticeSweep(_integer(v, "nx", "trajectory", 25),
                            _integer(v, "ny", "trajectory", 25))
    raise ScenarioError("trajectory.kind",
                        "expected static, waypoints or lattice_sweep")


def scenario_from_dict(data: dict) -> Scenario:
    """Build a validated Scenario from parsed configuration data."""
    if not isinstance(data, dict):
        raise ScenarioError("", "scenario must be an object")
    _reject_unknown(data, _TOP_KEYS, "")
    rng_name = data.get("rng", "pcg64")
    if rng_name != "pcg64":
        raise ScenarioError("rng", "only pcg64 is supported")

    g = data.get("grid", {})
    if not isinstance(g, dict):
        raise ScenarioError("grid", "expected an object")
    _reject_unknown(g, _GRID_KEYS, "grid")
    origin = _point(g["origin"], "grid.origin") if "origin" in g else geo.Point(0.0, 0.0)
    try:
        grid = geo.GridSpec(origin=origin,
                            spacing_m=_number(g, "spacing_m", "grid", 4.0),
                            cols=_integer(g, "cols", "grid", 3),
                            rows=_integer(g, "rows", "grid", 3))
    except geo.GeometryError as exc:
        raise ScenarioError("grid", str(exc)) from exc

    c = data.get("channel", {})
    if not isinstance(c, dict):
        raise ScenarioError("channel", "expected an object")
    _reject_unknown(c, _CHANNEL_KEYS, "channel")
    try:
        channel_params = chan.ChannelParams(
            a_dbm=_number(c, "a_dbm", "channel", chan.DEFAULT_A_DBM),
            n_exp=_number(c, "n_exp", "channel", 2.0),
            sigma_dbm=_number(c, "sigma_dbm", "channel", 0.0),
            rssi_offset_dbm=_number(c, "rssi_offset_dbm", "channel",
                                    chan.DEFAULT_RSSI_OFFSET_DBM),
            reception_radius_m=_number(c, "reception_radius_m", "channel", 30.0),
        )
    except ValueError as exc:
        raise ScenarioError("channel", str(exc)) from exc

    e = data.get("estimator", {})
    if not isinstance(e, dict):
        raise ScenarioError("estimator", "expected an object")
    _reject_unknown(e, _ESTIMATOR_KEYS, "estimator")
    cal = e.get("calibration_beacons", [0, 1])
    if (not isinstance(cal, (list, tuple)) or len(cal) != 2
            or any(isinstance(x, bool) or not isinstance(x, int) for x in cal)):
        raise ScenarioError("estimator.calibration_beacons",
                            "expected [id, id]")
    estimator_settings = EstimatorSettings(
        n_initial=_number(e, "n_initial", "estimator", 2.0),
        near_beacon_tau=_number(e, "near_beacon_tau", "estimator", 0.25),
        adapt=_boolean(e, "adapt", "estimator", False),
        calibration_beacons=(cal[0], cal[1]),
        n_min=_number(e, "n_min", "estimator", 1.0),
        n_max=_number(e, "n_max", "estimator", 6.0),
    )

    p = data.get("protocol", {})
    if not isinstance(p, dict):
        raise ScenarioError("protocol", "expected an object")
    _reject_unknown(p, _PROTOCOL_KEYS, "protocol")
    protocol_settings = ProtocolSettings(
        accum_count=_integer(p, "accum_count", "protocol", proto.DEFAULT_ACCUM_COUNT),
        inter_test_gap_ms=_number(p, "inter_test_gap_ms", "protocol",
                                  proto.DEFAULT_INTER_TEST_GAP_MS),
        response_window_ms=_number(p, "response_window_ms", "protocol",
                                   proto.DEFAULT_RESPONSE_WINDOW_MS),
        ack_timeout_ms=_number(p, "ack_timeout_ms", "protocol",
                               proto.DEFAULT_ACK_TIMEOUT_MS),
        round_interval_ms=_number(p, "round_interval_ms", "protocol", 1000.0),
    )

    if "trajectory" not in data:
        raise ScenarioError("trajectory", "required")
    trajectory = _parse_trajectory(data["trajectory"])

    scenario = Scenario(
        grid=grid,
        channel=channel_params,
        estimator=estimator_settings,
        protocol=protocol_settings,
        trajectory=trajectory,
        rounds=_integer(data, "rounds", "", 1),
        seed=_integer(data, "seed", "", 0),
        quantize_rssi=_boolean(data, "quantize_rssi", "", False),
    )
    scenario.validate()
    return scenario


def parse_scenario(text: str) -> Scenario:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError("", f"not valid JSON: {exc}") from exc
    return scenario_from_dict(data)


def load_scenario(path: Union[str, Path]) -> Scenario:
    return parse_scenario(Path(path).read_text(encoding="utf-8"))
