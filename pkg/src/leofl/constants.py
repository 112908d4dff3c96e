"""Physical constants used throughout the simulator."""

from dataclasses import dataclass


@dataclass(frozen=True)
class PhysicalConstants:
    mu: float = 3.98e14  # geocentric gravitational constant, m^3/s^2
    earth_radius_m: float = 6.371e6
    boltzmann: float = 1.380649e-23  # J/K
    light_speed: float = 299_792_458.0  # m/s
    earth_rotation_rate: float = 7.2921159e-5  # sidereal, rad/s


CONSTANTS = PhysicalConstants()
