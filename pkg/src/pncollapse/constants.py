"""Physical constants in SI units (CODATA 2018, exact where defined)."""

G = 6.674300000e-11          # m^3 kg^-1 s^-2
C = 2.997924580e8            # m s^-1
HBAR = 1.054571817e-34       # J s
M_SUN = 1.988470000e30       # kg, IAU nominal solar mass parameter / G

__all__ = ["G", "C", "HBAR", "M_SUN"]
