"""Circular-orbit propagation, ground-station geometry, and visibility windows.

Satellites move on uniform circular orbits; the Earth is a rotating sphere.
All positions are expressed in an Earth-centered inertial frame whose x-axis
points at the ground meridian of longitude 0 at t=0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import CONSTANTS


class GeometryError(ValueError):
    """Raised for invalid orbital geometry inputs."""


@dataclass(frozen=True)
class OrbitPlane:
    altitude_m: float
    inclination_rad: float
    raan_rad: float
    num_sats: int
    phase_offset_rad: float = 0.0

    def __post_init__(self):
        if self.altitude_m <= 0:
            raise GeometryError(f"altitude must be positive, got {self.altitude_m}")
        if self.num_sats < 2:
            raise GeometryError(f"need at least 2 satellites, got {self.num_sats}")

    @property
    def radius_m(self) -> float:
        return CONSTANTS.earth_radius_m + self.altitude_m

    @property
    def period_s(self) -> float:
        return orbital_period(self.altitude_m)


@dataclass(frozen=True)
class GroundStation:
    latitude_rad: float
    longitude_rad: float
    min_elevation_rad: float = math.radians(10.0)

    def __post_init__(self):
        if abs(self.latitude_rad) > math.pi / 2:
            raise GeometryError("latitude out of range")
        if not 0 <= self.min_elevation_rad < math.pi / 2:
            raise GeometryError("min elevation must be in [0, pi/2)")


@dataclass(frozen=True)
class EciPosition:
    x: float
    y: float
    z: float
    time_s: float

    @property
    def vec(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    @property
    def norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)


@dataclass(frozen=True)
class VisibilityWindow:
    sat_id: int
    start_s: float
    end_s: float

    def __post_init__(self):
        if self.start_s >= self.end_s:
            raise GeometryError("window start must precede end")


def orbital_speed(altitude_m: float) -> float:
    """Circular-orbit speed at the given altitude, m/s."""
    if altitude_m < 0:
        raise GeometryError(f"altitude must be non-negative, got {altitude_m}")
    return math.sqrt(CONSTANTS.mu / (CONSTANTS.earth_radius_m + altitude_m))


def orbital_period(altitude_m: float) -> float:
    """Orbital period at the given altitude, seconds."""
    if altitude_m < 0:
        raise GeometryError(f"altitude must be non-negative, got {altitude_m}")
    r = CONSTANTS.earth_radius_m + altitude_m
    return 2.0 * math.pi * r / orbital_speed(altitude_m)


def _plane_basis(plane: OrbitPlane) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal in-plane basis: node direction and the 90-deg-ahead direction."""
    co, so = math.cos(plane.raan_rad), math.sin(plane.raan_rad)
    ci, si = math.cos(plane.inclination_rad), math.sin(plane.inclination_rad)
    # ascending-node direction and its in-plane orthogonal (argument of latitude 90 deg)
    u0 = np.array([co, so, 0.0])
    u1 = np.array([-so * ci, co * ci, si])
    return u0, u1


def propagate_arg_of_latitude(plane: OrbitPlane, sat_index: int, time_s) -> np.ndarray:
    if not 0 <= sat_index < plane.num_sats:
        raise IndexError(f"satellite index {sat_index} out of range for K_p={plane.num_sats}")
    t = np.asarray(time_s, dtype=float)
    return (
        plane.phase_offset_rad
        + 2.0 * math.pi * sat_index / plane.num_sats
        + 2.0 * math.pi * t / plane.period_s
    )


def propagate_vec(plane: OrbitPlane, sat_index: int, time_s) -> np.ndarray:
    """ECI position(s) of one satellite; vectorized over time_s, shape (..., 3)."""
    u = propagate_arg_of_latitude(plane, sat_index, time_s)
    u0, u1 = _plane_basis(plane)
    r = plane.radius_m
    return r * (np.cos(u)[..., None] * u0 + np.sin(u)[..., None] * u1)


def propagate(plane: OrbitPlane, sat_index: int, time_s: float) -> EciPosition:
    """ECI position of one satellite at a scalar time."""
    p = propagate_vec(plane, sat_index, float(time_s))
    return EciPosition(p[0], p[1], p[2], float(time_s))


def gs_position_vec(gs: GroundStation, time_s) -> np.ndarray:
    """ECI position(s) of the station on the rotating Earth; shape (..., 3)."""
    t = np.asarray(time_s, dtype=float)
    lon = gs.longitude_rad + CONSTANTS.earth_rotation_rate * t
    clat = math.cos(gs.latitude_rad)
    slat = math.sin(gs.latitude_rad)
    r = CONSTANTS.earth_radius_m
    return r * np.stack(
        [clat * np.cos(lon), clat * np.sin(lon), slat * np.ones_like(lon)], axis=-1
    )


def gs_position(gs: GroundStation, time_s: float) -> EciPosition:
    p = gs_position_vec(gs, float(time_s))
    return EciPosition(p[0], p[1], p[2], float(time_s))


def _segment_clears_earth(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """True where the chord a--b does not intersect the Earth sphere."""
    ab = b - a
    denom = np.sum(ab * ab, axis=-1)
    # parameter of the closest approach to the Earth's center along the segment
    s = np.clip(-np.sum(a * ab, axis=-1) / np.where(denom == 0, 1.0, denom), 0.0, 1.0)
    closest = a + s[..., None] * ab
    return np.linalg.norm(closest, axis=-1) > CONSTANTS.earth_radius_m


def _elevation_ok(sat: np.ndarray, station: np.ndarray, min_elevation_rad) -> np.ndarray:
    rel = sat - station
    rng = np.linalg.norm(rel, axis=-1)
    up = station / np.linalg.norm(station, axis=-1, keepdims=True)
    sin_el = np.sum(rel * up, axis=-1) / rng
    return np.arcsin(np.clip(sin_el, -1.0, 1.0)) >= min_elevation_rad


def has_los(a: EciPosition, b: EciPosition, min_elevation_rad: float = 0.0) -> bool:
    """Line-of-sight predicate.

    Satellite pairs only need the chord between them to clear the Earth;
    a position on the surface (a ground station) additionally imposes the
    elevation mask. Both positions must carry the same timestamp.
    """
    if a.time_s != b.time_s:
        raise ValueError(f"timestamps differ: {a.time_s} vs {b.time_s}")
    surface = CONSTANTS.earth_radius_m * (1.0 + 1e-9)
    a_ground = a.norm <= surface
    b_ground = b.norm <= surface
    if a_ground and b_ground:
        raise ValueError("LOS between two ground points is not modeled")
    if not a_ground and not b_ground:
        return bool(_segment_clears_earth(a.vec, b.vec))
    sat, station = (a.vec, b.vec) if b_ground else (b.vec, a.vec)
    return bool(_elevation_ok(sat, station, min_elevation_rad))


def _gs_los_mask(plane: OrbitPlane, sat_index: int, gs: GroundStation, times: np.ndarray) -> np.ndarray:
    sats = propagate_vec(plane, sat_index, times)
    stations = gs_position_vec(gs, times)
    return _elevation_ok(sats, stations, gs.min_elevation_rad)


def _los_at(plane, sat_index, gs, t: float) -> bool:
    return bool(_gs_los_mask(plane, sat_index, gs, np.asarray([t]))[0])


def _bisect_edge(plane, sat_index, gs, t_lo, t_hi, rising: bool, tol_s: float = 1.0) -> float:
    """Refine a LOS transition in (t_lo, t_hi] to within tol_s."""
    while t_hi - t_lo > tol_s:
        mid = 0.5 * (t_lo + t_hi)
        if _los_at(plane, sat_index, gs, mid) == rising:
            t_hi = mid
        else:
            t_lo = mid
    return t_hi if rising else t_lo


def visibility_windows(
    plane: OrbitPlane,
    sat_index: int,
    gs: GroundStation,
    t_start: float,
    t_end: float,
    step_s: float = 5.0,
) -> list[VisibilityWindow]:
    """Maximal LOS intervals of one satellite to the station within [t_start, t_end]."""
    if t_start >= t_end:
        return []
    if step_s <= 0:
        raise GeometryError("step must be positive")
    times = np.arange(t_start, t_end + step_s, step_s)
    times[-1] = min(times[-1], t_end)
    mask = _gs_los_mask(plane, sat_index, gs, times)

    windows = []
    i = 0
    n = len(times)
    while i < n:
        if not mask[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and mask[j + 1]:
            j += 1
        start = times[i]
        if i > 0:
            start = _bisect_edge(plane, sat_index, gs, times[i - 1], times[i], rising=True)
        end = times[j]
        if j + 1 < n:
            end = _bisect_edge(plane, sat_index, gs, times[j], times[j + 1], rising=False)
        start = max(start, t_start)
        end = min(end, t_end)
        if start < end:
            windows.append(VisibilityWindow(sat_index, float(start), float(end)))
        i = j + 1
    return windows


def next_visibility(
    plane: OrbitPlane,
    sat_index: int,
    gs: GroundStation,
    t: float,
    step_s: float = 5.0,
    horizon_s: float | None = None,
) -> VisibilityWindow:
    """First window with end > t, scanning forward chunk by chunk.

    A polar-ish LEO plane always revisits a mid-latitude station within a day,
    so the default horizon is generous rather than unbounded.
    """
    if horizon_s is None:
        horizon_s = 5 * 86400.0
    chunk = max(4 * plane.period_s, 600.0)
    t0 = t
    while t0 < t + horizon_s:
        for w in visibility_windows(plane, sat_index, gs, t0, t0 + chunk, step_s):
            if w.end_s > t:
                return w
        # back up slightly so a window straddling the chunk edge is not split
        t0 += chunk - 2 * step_s
    raise GeometryError(
        f"no visibility window for satellite {sat_index} within {horizon_s} s after t={t}"
    )
