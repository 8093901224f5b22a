"""
Run configuration files.

The format is INI as read by :mod:`configparser`: ``[section]`` headers
followed by ``key = value`` lines; ``#`` and ``;`` start comments.  Every
physical quantity carries its unit in the key name (``radius_m``,
``mass_kg``, ``sigma_m`` ...).  Vectors are comma-separated.  Unknown
sections or keys are rejected.

Sections and keys (defaults in :data:`SCHEMA`):

``[run]``        seed
``[body]``       shape, radius_m, separation_m, lobe_radius_m, semi_axes_m,
                 mass_kg, n_points, placement_seed
``[kernel]``     family, sigma_m, kappa_tt, kappa_rot, kappa_mix,
                 G_m3_per_kg_s2, c_m_per_s, hbar_J_s, table_r_m, table_g_per_m
``[hilbert]``    kind (orientation-basis | spin-rep | rotor-model), j,
                 theta_rad, axis, constrained_axis, initial_weight, cell_m
``[channels]``   dp, rot, mixed
``[integrator]`` method, t_s, t_char, n_steps, omega_rad_per_s
``[mc]``         n_traj, scheme, record_every
``[rates]``      batch_csv
``[estimate]``   pulsar_mass_kg, pulsar_radius_m, pulsar_nu_Hz,
                 rotor_mass_kg, rotor_radius_m, rotor_omega_rad_per_s
``[gauge]``      nt, nx, dt_s, dx_m
"""

import configparser
import hashlib
import io
from dataclasses import dataclass

import numpy as np

from .constants import C, G, HBAR, M_SUN
from .errors import ConfigError


def _vec(s):
    if s.strip().lower() in ("", "none"):
        return None
    try:
        return tuple(float(v) for v in s.split(","))
    except ValueError as exc:
        raise ConfigError(f"bad vector {s!r}") from exc


def _bool(s):
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"bad boolean {s!r}")


def _opt_float(s):
    return None if s.strip().lower() in ("", "none") else float(s)


SCHEMA = {
    "run": {"seed": (int, "1")},
    "body": {"shape": (str, "dumbbell"), "radius_m": (float, "1.0"), "separation_m": (float, "2.0"),
             "lobe_radius_m": (float, "0.0"), "semi_axes_m": (_vec, "1.0, 1.0, 1.0"),
             "mass_kg": (float, "2.0"), "n_points": (int, "2"), "placement_seed": (int, "0")},
    "kernel": {"family": (str, "regularized-coulomb"), "sigma_m": (float, "0.1"),
               "kappa_tt": (float, "1.0"), "kappa_rot": (float, "0.0"), "kappa_mix": (float, "0.0"),
               "G_m3_per_kg_s2": (float, repr(G)), "c_m_per_s": (float, repr(C)),
               "hbar_J_s": (float, repr(HBAR)), "table_r_m": (_vec, "none"),
               "table_g_per_m": (_vec, "none")},
    "hilbert": {"kind": (str, "orientation-basis"), "j": (float, "1"), "theta_rad": (float, repr(np.pi / 2)),
                "axis": (_vec, "0, 0, 1"), "constrained_axis": (_vec, "none"),
                "initial_weight": (float, "0.5"), "cell_m": (_opt_float, "none")},
    "channels": {"dp": (_bool, "true"), "rot": (_bool, "true"), "mixed": (_bool, "true")},
    "integrator": {"method": (str, "exact-exponential"), "t_s": (_opt_float, "none"),
                   "t_char": (float, "3.0"), "n_steps": (int, "200"), "omega_rad_per_s": (float, "0.0")},
    "mc": {"n_traj": (int, "10000"), "scheme": (str, "joint"), "record_every": (int, "0")},
    "rates": {"batch_csv": (str, "")},
    "estimate": {"pulsar_mass_kg": (float, repr(2 * M_SUN)), "pulsar_radius_m": (float, "1e4"),
                 "pulsar_nu_Hz": (float, "700.0"), "rotor_mass_kg": (float, "1.0"),
                 "rotor_radius_m": (float, "85e-9"), "rotor_omega_rad_per_s": (float, "3.8e10")},
    "gauge": {"nt": (int, "4"), "nx": (int, "4"), "dt_s": (float, "1.0"), "dx_m": (float, "1.0")},
}

# The Monte-Carlo cross-check runs a reduced-unit rotor by default.
UNRAVEL_DEFAULTS = """
[body]
shape = dumbbell
separation_m = 2.0
mass_kg = 2.0
n_points = 2
[kernel]
sigma_m = 0.1
kappa_rot = 0.05
kappa_mix = 0.05
G_m3_per_kg_s2 = 1.0
c_m_per_s = 1.0
hbar_J_s = 1.0
[hilbert]
kind = rotor-model
j = 1
initial_weight = 0.02
cell_m = 0.05
"""

COMMAND_DEFAULTS = {"unravel": UNRAVEL_DEFAULTS}


@dataclass(frozen=True)
class RunConfig:
    """Parsed and validated configuration with its canonical text and hash."""

    values: dict
    text: str

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.text.encode()).hexdigest()

    def __getitem__(self, section):
        return self.values[section]

    def kernel_spec(self):
        from .noise_kernels import KernelSpec

        k = self.values["kernel"]
        tr, tg = k["table_r_m"] or (), k["table_g_per_m"] or ()
        return KernelSpec(k["family"], k["sigma_m"], k["kappa_tt"], k["kappa_rot"], k["kappa_mix"],
                          k["G_m3_per_kg_s2"], k["c_m_per_s"], k["hbar_J_s"], tuple(tr), tuple(tg))

    def body(self):
        from .core_model import discretize_primitive

        b = self.values["body"]
        params = {"mass": b["mass_kg"], "radius": b["radius_m"], "separation": b["separation_m"],
                  "lobe_radius": b["lobe_radius_m"], "semi_axes": b["semi_axes_m"]}
        return discretize_primitive(b["shape"], params, b["n_points"], b["placement_seed"])


def _read(parser, text, origin):
    try:
        parser.read_string(text, source=origin)
    except configparser.Error as exc:
        raise ConfigError(f"{origin}: {exc}") from exc


def load_config(path=None, text: str | None = None, command: str | None = None,
                seed: int | None = None) -> RunConfig:
    """Parse a config file (or text) on top of the defaults for ``command``."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    if command in COMMAND_DEFAULTS:
        _read(parser, COMMAND_DEFAULTS[command], "<defaults>")
    user = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    user.optionxform = str
    if path is not None:
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if text:
        _read(user, text, str(path or "<text>"))
    for sec in user.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"unknown section [{sec}]")
        for key in user[sec]:
            if key not in SCHEMA[sec]:
                raise ConfigError(f"unknown key {key!r} in [{sec}]")
        if not parser.has_section(sec):
            parser.add_section(sec)
        for key, val in user[sec].items():
            parser[sec][key] = val
    if seed is not None:
        if not parser.has_section("run"):
            parser.add_section("run")
        parser["run"]["seed"] = str(int(seed))
    values, canon = {}, io.StringIO()
    for sec, keys in SCHEMA.items():
        values[sec] = {}
        canon.write(f"[{sec}]\n")
        for key, (conv, default) in keys.items():
            raw = parser.get(sec, key, fallback=default) if parser.has_section(sec) else default
            try:
                values[sec][key] = conv(raw)
            except (ValueError, ConfigError) as exc:
                raise ConfigError(f"[{sec}] {key}: cannot parse {raw!r}") from exc
            canon.write(f"{key} = {raw.strip()}\n")
    return RunConfig(values, canon.getvalue())
