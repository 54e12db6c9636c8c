"""Problem definition: every fixed parameter of a mission, in SI base units.

A :class:`Scenario` is immutable after construction and is the single source
of truth for units (watts, meters, seconds, hertz, bits).  Decibel figures
from data sheets must be converted before they get here; nothing downstream
ever sees a dB value.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, fields, replace

import numpy as np


class EhModel(enum.Enum):
    """RF-to-DC harvester model: ideal linear or saturating sigmoid."""

    LINEAR = "linear"
    NONLINEAR = "nonlinear"


class ScenarioError(ValueError):
    """A scenario field violates its documented range."""


_POSITION_FIELDS = ("w_s", "w_d", "q_I", "q_F")


@dataclass(frozen=True)
class Scenario:
    """All fixed parameters of one source -> relay -> destination mission.

    Positions are 2-D ground-plane coordinates in meters; the relay flies at
    fixed altitude ``H``.  ``sigma_u2`` is the effective noise power that
    normalizes the uplink SNR; the value 1.0 reproduces the unnormalized
    link-budget convention, smaller values model an explicit receiver noise
    floor.
    """

    w_s: tuple[float, float] = (5.0, 0.0)
    w_d: tuple[float, float] = (15.0, 0.0)
    q_I: tuple[float, float] = (0.0, 10.0)
    q_F: tuple[float, float] = (20.0, 10.0)
    H: float = 10.0               # altitude, m
    V_max: float = 20.0           # max speed, m/s
    T: float = 100.0              # mission duration, s
    N: int = 200                  # number of slots
    P_s: float = 5.0              # source transmit power, W
    P_c: float = 1e-6             # backscatter circuit power, W
    B: float = 1e6                # bandwidth, Hz
    S: float = 2e6                # demanded data, bits
    sigma: float = 0.5            # caching coefficient in [0, 1]
    omega0: float = 1e-3          # reference channel gain at 1 m, linear
    alpha: float = 2.0            # path-loss exponent
    sigma_d2: float = 1e-12       # destination noise power, W
    sigma_u2: float = 1.0         # uplink SNR normalization, W
    mu: float = 0.9               # linear-EH efficiency
    Xi: float = 2.8e-3            # harvester saturation power, W
    beta: float = 1500.0          # harvester circuit constant
    nu: float = 0.0022            # harvester circuit constant
    eta_max: float = 0.5          # backscatter coefficient ceiling
    eh_model: EhModel = EhModel.LINEAR
    epsilon: float = 1e-4         # outer-loop relative convergence threshold

    def __post_init__(self):
        for name in _POSITION_FIELDS:
            value = getattr(self, name)
            arr = tuple(float(v) for v in value)
            if len(arr) != 2 or not all(math.isfinite(v) for v in arr):
                raise ScenarioError(f"{name} must be a finite 2-D position")
            object.__setattr__(self, name, arr)
        if isinstance(self.eh_model, str):
            object.__setattr__(self, "eh_model", EhModel(self.eh_model.lower()))
        object.__setattr__(self, "N", int(self.N))
        self._validate()

    def _validate(self):
        def positive(name):
            if not getattr(self, name) > 0:
                raise ScenarioError(f"{name} must be strictly positive")

        for name in ("T", "H", "P_s", "P_c", "B", "omega0", "sigma_d2",
                     "sigma_u2", "Xi", "beta", "nu", "epsilon"):
            positive(name)
        if self.N < 1:
            raise ScenarioError("N must be at least 1")
        if not 0.0 <= self.sigma <= 1.0:
            raise ScenarioError("sigma out of range [0, 1]")
        if not 0.0 < self.eta_max < 1.0:
            raise ScenarioError("eta_max out of range (0, 1)")
        if not 0.0 < self.mu <= 1.0:
            raise ScenarioError("mu out of range (0, 1]")
        if self.alpha < 2.0:
            raise ScenarioError("alpha must be >= 2")
        if self.S < 0.0:
            raise ScenarioError("S must be nonnegative")
        if self.V_max < 0.0:
            raise ScenarioError("V_max must be nonnegative")
        gap = math.dist(self.q_I, self.q_F)
        limit = self.N * self.V_max * self.delta_t
        # small absolute slack so q_I == q_F with V_max == 0 validates cleanly
        if gap > limit + 1e-9:
            raise ScenarioError(
                f"endpoints unreachable: |q_F - q_I| = {gap:.3f} m exceeds "
                f"V_max * T = {limit:.3f} m")

    @property
    def delta_t(self) -> float:
        """Slot duration T / N, seconds."""
        return self.T / self.N

    @property
    def ws(self) -> np.ndarray:
        return np.asarray(self.w_s)

    @property
    def wd(self) -> np.ndarray:
        return np.asarray(self.w_d)

    def with_overrides(self, **kw) -> "Scenario":
        """Copy with replaced fields (re-validated)."""
        return replace(self, **kw)


def default_scenario() -> Scenario:
    """Baseline mission used throughout the test and experiment suites.

    Geometry and radio constants follow the common urban-microcell setup:
    -30 dB reference gain (omega0 = 1e-3) and a -90 dBm destination noise
    floor (sigma_d2 = 1e-12 W).  100 s mission in 200 half-second slots.
    """
    return Scenario()


def _format_value(name: str, value) -> str:
    if name in _POSITION_FIELDS:
        return f"{value[0]!r}, {value[1]!r}"
    if isinstance(value, EhModel):
        return value.value
    if isinstance(value, float):
        return repr(value)
    return str(value)


def save_scenario(sc: Scenario, path) -> None:
    """Write a scenario as flat ``key = value`` text, one field per line."""
    lines = [f"{f.name} = {_format_value(f.name, getattr(sc, f.name))}"
             for f in fields(Scenario)]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def parse_kv_text(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines; '#' starts a comment, blanks ignored."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ScenarioError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def scenario_from_mapping(kv: dict[str, str]) -> Scenario:
    """Build a validated scenario from string key/value pairs."""
    known = {f.name: f for f in fields(Scenario)}
    kwargs = {}
    for key, value in kv.items():
        if key not in known:
            raise ScenarioError(f"unknown scenario key {key!r}")
        if key in _POSITION_FIELDS:
            parts = [p for p in value.replace(",", " ").split() if p]
            if len(parts) != 2:
                raise ScenarioError(f"{key} must hold two coordinates, got {value!r}")
            kwargs[key] = (float(parts[0]), float(parts[1]))
        elif key == "eh_model":
            try:
                kwargs[key] = EhModel(value.lower())
            except ValueError:
                raise ScenarioError(f"eh_model must be linear or nonlinear, got {value!r}")
        elif key == "N":
            kwargs[key] = int(value)
        else:
            try:
                kwargs[key] = float(value)
            except ValueError:
                raise ScenarioError(f"{key}: cannot parse {value!r} as a number")
    return Scenario(**kwargs)


def load_scenario(path) -> Scenario:
    """Load and validate a scenario from a flat key/value config file."""
    with open(path) as fh:
        text = fh.read()
    return scenario_from_mapping(parse_kv_text(text))
