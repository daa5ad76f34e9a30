"""
Pipeline configuration: one INI file, one section per module.

``DEFAULT_CONFIG`` below is the documented default; any key may be
overridden in a user file passed with ``--config``.
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .modal import BaselineMode
from .ssi import SSIParams, Tolerances

DEFAULT_CONFIG = """\
[campaign]
# analysis window in seconds and minimum per-channel coverage
window = 3600
coverage = 0.95
# response channels used by SSI (empty: every channel not in input_channels)
channels =
# base station used as measured input by CMIF
input_channels = S942.x, S942.y, S942.z

[ssi]
# block rows; empty means ceil(2 * rate / f_min) capped at 200
block_rows =
f_min = 0.5
# model orders as start:stop:step (stop excluded)
orders = 2:42:2
# stability tolerances between consecutive orders (fractions)
df = 0.01
dxi = 0.05
mac = 0.95
# poles contributing less than significance/sqrt(N) to the covariances are noise
significance = 3
distance_cap = 0.02
# empty: one third of the tested orders
min_count =
max_damping = 0.2

[cmif]
nfft = 4096
overlap = 0.5
min_prominence = 0.5
band = 0.5, 10

[tracking]
# baseline modes label = frequency in Hz
baseline = f1: 1.0281, f2: 1.2813, f3: 4.0524, f4: 4.4858
# optional shapes, one line per label (comma-separated real ordinates)
shapes =
f_tol = 0.05
mac_min = 0.8

[environment]
temperature =
max_lag = 12
regime_split =
mode = f1

[events]
channel = S942.x
sta = 1.0
lta = 60.0
on = 4.0
off = 1.5
teleseism_band = 0.04, 1.0
teleseism_k = 5.0
teleseism_window = 30
regional_window = 5
catalog =

[tilt]
x = S2.x
y = S2.y
height = 37.0
cutoff = 0.5
output_rate = 1.0

[spectrogram]
channel = S942.x
nfft = 4096
hop = 2048
fmax = 25

[simulate]
scenario = default
hours = 2
rate = 100
seed = 0
snr = 10
start = 2017-11-20T00:00:00Z
"""


def _floats(text: str) -> list:
    return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]


def _keys(text: str) -> list:
    return [v.strip() for v in text.split(",") if v.strip()]


def _optional(sec, key, cast):
    raw = sec.get(key, "").strip()
    return cast(raw) if raw else None


def _orders(text: str) -> tuple:
    parts = [int(p) for p in text.split(":")]
    if len(parts) == 1:
        return tuple(range(2, parts[0] + 1, 2))
    if len(parts) not in (2, 3):
        raise ConfigurationError(f"bad orders spec {text!r}")
    return tuple(range(*parts))


@dataclass
class PipelineConfig:
    parser: configparser.ConfigParser
    source: str = "<defaults>"

    def section(self, name):
        return self.parser[name]

    def get(self, section, key, fallback=None):
        return self.parser.get(section, key, fallback=fallback)

    def getfloat(self, section, key):
        try:
            return self.parser.getfloat(section, key)
        except ValueError as exc:
            raise ConfigurationError(f"[{section}] {key}: {exc}") from None

    def getint(self, section, key):
        try:
            return self.parser.getint(section, key)
        except ValueError as exc:
            raise ConfigurationError(f"[{section}] {key}: {exc}") from None

    def keys(self, section, key) -> list:
        return _keys(self.parser.get(section, key, fallback=""))

    def floats(self, section, key) -> list:
        try:
            return _floats(self.parser.get(section, key, fallback=""))
        except ValueError as exc:
            raise ConfigurationError(f"[{section}] {key}: {exc}") from None

    def ssi_params(self) -> SSIParams:
        s = self.parser["ssi"]
        try:
            return SSIParams(
                block_rows=_optional(s, "block_rows", int),
                orders=_orders(s.get("orders")),
                tolerances=Tolerances(float(s["df"]), float(s["dxi"]), float(s["mac"]),
                                      float(s["significance"])),
                distance_cap=float(s["distance_cap"]),
                min_count=_optional(s, "min_count", int),
                max_damping=float(s["max_damping"]),
                f_min=float(s["f_min"]),
            )
        except (KeyError, ValueError) as exc:
            raise ConfigurationError(f"[ssi]: {exc}") from None

    def baseline(self) -> list:
        t = self.parser["tracking"]
        shapes = {}
        for line in t.get("shapes", "").splitlines():
            if ":" in line:
                label, vals = line.split(":", 1)
                shapes[label.strip()] = np.array(_floats(vals), dtype=complex)
        modes = []
        for item in _keys(t.get("baseline", "")):
            if ":" not in item:
                raise ConfigurationError(f"[tracking] baseline entry {item!r} needs label: f")
            label, f = item.split(":", 1)
            modes.append(BaselineMode(label.strip(), float(f), shapes.get(label.strip())))
        if not modes:
            raise ConfigurationError("[tracking] baseline is empty")
        return modes

    def digest(self, extra: dict | None = None) -> str:
        """SHA-256 over the canonical (sorted) configuration plus ``extra``."""
        h = hashlib.sha256()
        for sec in sorted(self.parser.sections()):
            for k, v in sorted(self.parser[sec].items()):
                h.update(f"[{sec}]{k}={v}\n".encode())
        for k, v in sorted((extra or {}).items()):
            h.update(f"{k}={v}\n".encode())
        return h.hexdigest()

    def as_dict(self) -> dict:
        return {sec: dict(self.parser[sec]) for sec in self.parser.sections()}


def load_config(path=None) -> PipelineConfig:
    parser = configparser.ConfigParser(interpolation=None)
    parser.read_string(DEFAULT_CONFIG)
    source = "<defaults>"
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigurationError(f"config file {path} does not exist")
        user = configparser.ConfigParser(interpolation=None)
        try:
            user.read(path)
        except configparser.Error as exc:
            raise ConfigurationError(f"{path}: {exc}") from None
        for sec in user.sections():
            if not parser.has_section(sec):
                raise ConfigurationError(f"{path}: unknown section [{sec}]")
            unknown = sorted(set(user[sec]) - set(parser[sec]))
            if unknown:
                raise ConfigurationError(f"{path}: unknown key(s) in [{sec}]: {', '.join(unknown)}")
        parser.read_dict(user)
        source = str(path)
    return PipelineConfig(parser, source)
