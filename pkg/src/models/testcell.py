"""

*** TestCell.py ***

Contains:
Lumped-parameter (2R2C) thermal model of the test cell and the generator of
RICO-schema datasets

Model:
    State x = [T_room, T_wall, a_1..a_4]   [°C]
    Actuators 1-2 are heaters (EC3, SB43), 3-4 coolers (B46, SB47). An enabled actuator
    relaxes toward its set point with a first-order lag and exchanges heat with the
    room through its coupling gain; a disabled one ("off" or free fall) is decoupled
    and relaxes toward the room.

    C_r dT_room/dt = G_rw (T_wall - T_room) + sum_on g_j (a_j - T_room)
    C_w dT_wall/dt = G_rw (T_room - T_wall) + G_wo (T_out - T_wall)
    tau da_j/dt    = sp_j - a_j        (enabled)
                   = T_room - a_j      (disabled)

    Explicit Euler, dt = 1 min, 240 steps per series. Within a phase every series starts
    from the state reached by the previous one (acquisition is continuous).

External dependencies:
numpy       -Numpy Python extension. http://numpy.org/

Internal dependencies:
dataio      -SeriesRecord
seeding     -Per-phase seed derivation

Changelog:
Date          Name              Change
__ _          __ _              ____ _
04/09/2024    Workbench team    Initial release
20/09/2024    Workbench team    Adds excluded-series emulation and chained phases
14/10/2024    Workbench team    Sensor noise default 0.02 °C so every trend class occurs

References:
Short       Author,Year         Title
___ _       _________ _         ___ _
[Bacher11]  Bacher/Madsen,2011  Identifying suitable models for the heat dynamics of buildings

"""
# Imports
import logging
import math
from dataclasses import asdict, dataclass

import numpy as np

from src.utils.dataio import SeriesRecord
from src.utils.errors import InvalidConfig, UnstableIntegration
from src.utils.seeding import derive_seed, numpy_rng
from src.utils.seriestools import SERIES_LENGTH

logger = logging.getLogger(__name__)

OFF = float("nan")
DT_MINUTES = 1.0
STATE_LIMIT = 200.0     # [°C]
N_ACTUATORS = 4


@dataclass(frozen=True)
class PhasePlan:
    phase: int
    n_series: int
    free_fall_minutes: int = 0
    n_excluded: int = 0


DEFAULT_PHASE_PLAN = (
    PhasePlan(phase=1, n_series=83),
    PhasePlan(phase=2, n_series=0, free_fall_minutes=60),
    PhasePlan(phase=3, n_series=6),
    PhasePlan(phase=4, n_series=58),
)


def _levels(values):
    return tuple(OFF if v is None or (isinstance(v, float) and math.isnan(v)) else float(v) for v in values)


@dataclass(frozen=True)
class SimConfig:
    """Physical parameters of the test cell. Off set points are nan (None in JSON)."""
    phase_plan: tuple = DEFAULT_PHASE_PLAN
    heater_levels: tuple = (OFF, 20.0, 40.0, 60.0)     # [°C]
    cooler_levels: tuple = (OFF, 10.0, 15.0)           # [°C]
    room_capacitance: float = 5.0e5                    # [J/K]
    wall_capacitance: float = 5.0e6                    # [J/K]
    g_room_wall: float = 150.0                         # [W/K]
    g_wall_outdoor: float = 50.0                       # [W/K]
    actuator_gains: tuple = (60.0, 60.0, 60.0, 60.0)   # [W/K]
    actuator_tau: float = 10.0                         # [min]
    outdoor_temp: float = 5.0                          # [°C]
    initial_temp: float = 20.0                         # [°C]
    noise_std: float = 0.02                            # [°C]
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "phase_plan", tuple(
            p if isinstance(p, PhasePlan) else PhasePlan(**p) for p in self.phase_plan))
        object.__setattr__(self, "heater_levels", _levels(self.heater_levels))
        object.__setattr__(self, "cooler_levels", _levels(self.cooler_levels))
        object.__setattr__(self, "actuator_gains", tuple(float(g) for g in self.actuator_gains))
        self._validate()

    def _validate(self):
        for name in ("room_capacitance", "wall_capacitance", "g_room_wall", "g_wall_outdoor", "actuator_tau"):
            if not getattr(self, name) > 0:
                raise InvalidConfig(f"{name} must be strictly positive, got {getattr(self, name)}")
        if len(self.actuator_gains) != N_ACTUATORS or any(g < 0 for g in self.actuator_gains):
            raise InvalidConfig(f"actuator_gains needs {N_ACTUATORS} non-negative values")
        if not self.heater_levels or not self.cooler_levels:
            raise InvalidConfig("heater_levels and cooler_levels cannot be empty")
        if self.noise_std < 0:
            raise InvalidConfig("noise_std cannot be negative")
        seen = set()
        for p in self.phase_plan:
            if p.phase not in (1, 2, 3, 4) or p.phase in seen:
                raise InvalidConfig(f"phase ids must be unique values in 1..4, got {p.phase}")
            seen.add(p.phase)
            if p.n_series < 0 or not 0 <= p.n_excluded <= p.n_series:
                raise InvalidConfig(f"phase {p.phase}: need 0 <= n_excluded <= n_series")
            if p.free_fall_minutes not in (0, 60):
                raise InvalidConfig(f"phase {p.phase}: free_fall_minutes must be 0 or 60")

        # Euler stability bounds at dt = 1 min
        dt = DT_MINUTES * 60.0
        room_rate = dt * (self.g_room_wall + sum(self.actuator_gains)) / self.room_capacitance
        wall_rate = dt * (self.g_room_wall + self.g_wall_outdoor) / self.wall_capacitance
        if room_rate >= 1.0 or wall_rate >= 1.0 or DT_MINUTES / self.actuator_tau > 1.0:
            raise InvalidConfig(
                f"explicit Euler unstable at dt=1 min (room {room_rate:.3f}, wall {wall_rate:.3f}, "
                f"actuator {DT_MINUTES / self.actuator_tau:.3f}; all must be < 1)")

    def phase(self, phase_id):
        for p in self.phase_plan:
            if p.phase == phase_id:
                return p
        raise InvalidConfig(f"phase {phase_id} not in the phase plan")

    def to_dict(self):
        data = asdict(self)
        data["heater_levels"] = [None if math.isnan(v) else v for v in self.heater_levels]
        data["cooler_levels"] = [None if math.isnan(v) else v for v in self.cooler_levels]
        return data

    @classmethod
    def from_dict(cls, data):
        return cls(**data)


class ThermalTestCell(object):
    """
    Test cell thermal state and its explicit Euler propagation.

    Atributos:
        x (np.ndarray): [T_room, T_wall, a_1..a_4] [°C]
        setpoints (np.ndarray): actuator set points [°C], nan = off
        enabled (np.ndarray): actuator enabled mask
    """
    def __init__(self, cfg, room_temp=None, wall_temp=None):
        self.cfg = cfg
        room = cfg.initial_temp if room_temp is None else room_temp
        wall = room if wall_temp is None else wall_temp
        self.x = np.array([room, wall] + [room] * N_ACTUATORS, dtype=np.float64)
        self.setpoints = np.full(N_ACTUATORS, OFF)
        self.enabled = np.zeros(N_ACTUATORS, dtype=bool)
        self.gains = np.array(cfg.actuator_gains)
        self.dt = DT_MINUTES * 60.0         # [s]

        #_______Historical_________#
        self.hist_room = []
        self.hist_wall = []

    def set_actuators(self, setpoints, enabled=True):
        self.setpoints = np.array(setpoints, dtype=np.float64)
        self.enabled = np.isfinite(self.setpoints) & bool(enabled)

    def dynamics(self, x):
        """Time derivative of the state [°C/s]."""
        room, wall, act = x[0], x[1], x[2:]
        cfg = self.cfg
        heat_act = np.sum(np.where(self.enabled, self.gains * (act - room), 0.0))        # [W]
        room_dot = (cfg.g_room_wall * (wall - room) + heat_act) / cfg.room_capacitance
        wall_dot = (cfg.g_room_wall * (room - wall) + cfg.g_wall_outdoor * (cfg.outdoor_temp - wall)) / cfg.wall_capacitance
        target = np.where(self.enabled, np.nan_to_num(self.setpoints), room)
        act_dot = (target - act) / (cfg.actuator_tau * 60.0)
        return np.concatenate(([room_dot, wall_dot], act_dot))

    def euler_update(self):
        self.x = self.x + self.dt * self.dynamics(self.x)
        if not np.all(np.abs(self.x) <= STATE_LIMIT):
            raise UnstableIntegration(f"thermal state left +/-{STATE_LIMIT} °C: {self.x[:2]}")

    def save_data(self):
        self.hist_room.append(float(self.x[0]))
        self.hist_wall.append(float(self.x[1]))

    def run_series(self, setpoints, free_fall_minutes=0):
        """
        Integrates one 240-minute series and returns the noise-free room temperature.
        Sample t is the state at minute t; the final state is kept for the next series.
        """
        start = len(self.hist_room)
        self.set_actuators(setpoints, enabled=True)
        for minute in range(SERIES_LENGTH):
            if free_fall_minutes and minute == SERIES_LENGTH - free_fall_minutes:
                self.set_actuators(setpoints, enabled=False)
            self.save_data()
            self.euler_update()
        return np.array(self.hist_room[start:])


def draw_setpoints(cfg, rng):
    """One set point combination, uniform over each actuator's level set."""
    heaters = [cfg.heater_levels[rng.integers(len(cfg.heater_levels))] for _ in range(2)]
    coolers = [cfg.cooler_levels[rng.integers(len(cfg.cooler_levels))] for _ in range(2)]
    return tuple(heaters + coolers)


def simulate_phase(cfg, phase):
    """
    Generates the series of one phase.

    Deterministic in (cfg, phase): the phase generator is seeded with
    derive_seed(cfg.seed, "phase", phase).
    """
    plan = cfg.phase(phase)
    rng = numpy_rng(derive_seed(cfg.seed, "phase", phase))
    cell = ThermalTestCell(cfg)
    excluded = set()
    if plan.n_excluded:
        excluded = set(rng.choice(plan.n_series, size=plan.n_excluded, replace=False).tolist())

    records = []
    for step in range(plan.n_series):
        setpoints = draw_setpoints(cfg, rng)
        clean = cell.run_series(setpoints, plan.free_fall_minutes)
        noise = rng.normal(0.0, cfg.noise_std, SERIES_LENGTH) if cfg.noise_std > 0 else np.zeros(SERIES_LENGTH)
        records.append(SeriesRecord(phase=phase, step=step, flag=0 if step in excluded else 1,
                                    setpoints=setpoints, values=clean + noise))
    logger.info(f"Simulated phase {phase}: {plan.n_series} series ({plan.n_excluded} flagged excluded, "
                f"free fall {plan.free_fall_minutes} min)")
    return records


def generate_rico_like(cfg=SimConfig()):
    """Concatenates simulate_phase over the phase plan."""
    records = []
    for plan in cfg.phase_plan:
        records.extend(simulate_phase(cfg, plan.phase))
    return records
