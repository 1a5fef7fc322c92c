"""Scenario files: ``[flow] [plate] [ic] [run]`` sections of ``key = value`` lines.

Example::

    [flow]
    U = 2.0
    [run]
    T = 1.0

Every key is optional; unknown sections or keys are rejected with their line
number.  Defaults are the ``*Config`` field defaults below (desk-scale grid:
33x33 plate on the unit square, 64x64x32 flow box with the plate spacing).
"""
from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional, Union

import numpy as np

from . import plate as pl
from .errors import ConfigurationError
from .flow import FlowDomain, FlowParams
from .operators import CoupledState
from .plate import PlateDomain, PlateModel


@dataclass(frozen=True)
class FlowConfig:
    U: float = 2.0
    mu: float = 0.0
    nx: int = 64
    ny: int = 64
    nz: int = 32
    hz: Optional[float] = None           # default: plate spacing
    sponge_width: int = 8
    sponge_strength: float = 20.0
    sponge: bool = True
    coupled: bool = True


@dataclass(frozen=True)
class PlateConfig:
    nx: int = 33
    ny: int = 33
    lx: float = 1.0
    ly: float = 1.0
    model: str = "linear"
    law: str = "cubic"                   # kirchhoff: "cubic" (c s^3) or "linear" (c s)
    coeff: float = 1.0
    f0: float = 0.0                      # von Karman prestress F0 = f0 |x - centre|^2 / 2
    kappa: float = 1.0
    gamma: float = 0.0
    damping: float = 0.0


@dataclass(frozen=True)
class ICConfig:
    kind: str = "mode"                   # zero | mode | sine | random | snapshot
    amplitude: float = 0.01
    file: str = ""


@dataclass(frozen=True)
class RunConfig:
    T: float = 1.0
    dt: Union[float, str] = "auto"
    safety: float = 0.5
    stride: int = 0                      # snapshot every `stride` steps; 0: initial and final only
    output: str = "out"
    seed: int = 42


SECTIONS = {"flow": FlowConfig, "plate": PlateConfig, "ic": ICConfig, "run": RunConfig}
IC_KINDS = ("zero", "mode", "sine", "random", "snapshot")


def _linear_law(c):
    return lambda s: c * s


def _cubic_law(c):
    return lambda s: c * s ** 3


@dataclass(frozen=True)
class Scenario:
    flow: FlowConfig = field(default_factory=FlowConfig)
    plate: PlateConfig = field(default_factory=PlateConfig)
    ic: ICConfig = field(default_factory=ICConfig)
    run: RunConfig = field(default_factory=RunConfig)
    base_dir: str = field(default=".", compare=False)

    def __post_init__(self):
        f, r = self.flow, self.run
        FlowParams(f.U, f.mu)          # U, mu constraints
        if not r.T > 0:
            raise ConfigurationError("T must be positive")
        if r.dt != "auto" and not (isinstance(r.dt, float) and r.dt > 0):
            raise ConfigurationError("dt must be 'auto' or a positive number")
        if not 0 < r.safety <= 1:
            raise ConfigurationError("safety must lie in (0, 1]")
        if r.stride < 0:
            raise ConfigurationError("stride must be >= 0")
        if self.ic.kind not in IC_KINDS:
            raise ConfigurationError(f"unknown ic kind {self.ic.kind!r}; expected one of {IC_KINDS}")
        if self.plate.law not in ("cubic", "linear"):
            raise ConfigurationError("plate law must be 'cubic' or 'linear'")
        if self.ic.kind == "snapshot" and not self.snapshot_path().is_file():
            raise ConfigurationError(f"snapshot file not found: {self.snapshot_path()}")
        self.flow_domain()             # geometry constraints
        self.plate_model()

    # -- builders -------------------------------------------------------
    def plate_domain(self) -> PlateDomain:
        p = self.plate
        return PlateDomain(p.nx, p.ny, p.lx, p.ly)

    def flow_domain(self) -> FlowDomain:
        f = self.flow
        return FlowDomain.around(self.plate_domain(), f.nx, f.ny, f.nz, f.hz, f.sponge_width, f.sponge_strength)

    def flow_params(self) -> FlowParams:
        return FlowParams(self.flow.U, self.flow.mu)

    def plate_model(self) -> PlateModel:
        p = self.plate
        kw = dict(damping_k=p.damping)
        if p.model == "linear":
            return PlateModel("linear", **kw)
        if p.model == "kirchhoff":
            if p.law == "cubic":
                c = p.coeff
                return PlateModel.kirchhoff(_cubic_law(c), lambda s: 0.25 * c * s ** 4, **kw)
            c = p.coeff
            return PlateModel.kirchhoff(_linear_law(c), lambda s: 0.5 * c * s ** 2, **kw)
        if p.model == "vonkarman":
            F0 = None
            if p.f0:
                X, Y = self.plate_domain().coords()
                F0 = 0.5 * p.f0 * ((X - p.lx / 2) ** 2 + (Y - p.ly / 2) ** 2)
            return PlateModel.vonkarman(F0, **kw)
        if p.model == "berger":
            return PlateModel.berger(p.kappa, p.gamma, **kw)
        raise ConfigurationError(f"unknown plate model {p.model!r}")

    def system(self):
        from .timestep import CoupledSystem
        return CoupledSystem(self.flow_domain(), self.flow_params(), self.plate_model(),
                             coupled=self.flow.coupled, sponge=self.flow.sponge)

    def snapshot_path(self) -> Path:
        p = Path(self.ic.file)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def initial_state(self) -> CoupledState:
        fd = self.flow_domain()
        dom = fd.plate
        kind, a = self.ic.kind, self.ic.amplitude
        y = CoupledState.zeros(fd)
        if kind == "mode":
            y.u[...] = a * pl.first_mode(dom)
        elif kind == "sine":
            X, Y = dom.coords()
            y.u[...] = a * np.sin(np.pi * X / dom.lx) ** 2 * np.sin(np.pi * Y / dom.ly) ** 2
        elif kind == "random":
            r = CoupledState.random(fd, np.random.default_rng(self.run.seed), smooth=True)
            y = (a / max(np.max(np.abs(r.u)), 1e-300)) * r
        elif kind == "snapshot":
            from .snapshots import read_snapshot
            snap, _t = read_snapshot(self.snapshot_path())
            if snap.phi.shape != fd.shape or snap.u.shape != dom.shape:
                raise ConfigurationError("snapshot grid does not match the scenario grid")
            y = snap
        return y

    def resolved_dt(self) -> float:
        if self.run.dt == "auto":
            from .timestep import cfl_dt
            return cfl_dt(self.flow_domain(), self.flow.U, self.run.safety)
        return float(self.run.dt)

    @property
    def T(self):
        return self.run.T

    @property
    def stride(self):
        return self.run.stride

    def refined(self, levels: int = 1) -> "Scenario":
        """Same physical set-up with every spacing halved ``levels`` times."""
        sc = self
        for _ in range(levels):
            f, p = sc.flow, sc.plate
            hz = None if f.hz is None else f.hz / 2
            dt = sc.run.dt if sc.run.dt == "auto" else sc.run.dt / 2
            sc = dataclasses.replace(
                sc, flow=dataclasses.replace(f, nx=2 * f.nx, ny=2 * f.ny, nz=2 * f.nz, hz=hz,
                                             sponge_width=2 * f.sponge_width),
                plate=dataclasses.replace(p, nx=2 * p.nx - 1, ny=2 * p.ny - 1),
                run=dataclasses.replace(sc.run, dt=dt))
        return sc


def level_scenario(level: int, **sections) -> Scenario:
    """Grid family sharing the unit-square plate and the 2x2x1 flow box.

    Level 2 is the default desk-scale grid; each level halves every spacing.
    ``sections`` override fields, e.g. ``flow={"U": 0.5}``.
    """
    k = 2 ** level
    base = {"flow": dict(nx=16 * k, ny=16 * k, nz=8 * k, sponge_width=2 * k),
            "plate": dict(nx=8 * k + 1, ny=8 * k + 1), "ic": {}, "run": {}}
    for name, over in sections.items():
        base[name].update(over)
    return Scenario(**{name: SECTIONS[name](**base[name]) for name in SECTIONS})


# ---------------------------------------------------------------------------
# text format

def _convert(cls, key, raw, line):
    ftype = {f.name: f.type for f in fields(cls)}[key]
    default = {f.name: f.default for f in fields(cls)}[key]
    raw = raw.strip()
    try:
        if key == "dt":
            return "auto" if raw.lower() == "auto" else float(raw)
        if key == "hz":
            return None if raw.lower() in ("", "auto", "none") else float(raw)
        if isinstance(default, bool):
            low = raw.lower()
            if low in ("true", "yes", "on", "1"):
                return True
            if low in ("false", "no", "off", "0"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw
    except ValueError:
        raise ConfigurationError(f"line {line}: bad value {raw!r} for {key} ({ftype})") from None


def _line_of(lines, section, key):
    current = None
    for no, text in enumerate(lines, 1):
        s = text.strip()
        if s.startswith("[") and s.endswith("]"):
            current = s[1:-1].strip()
        elif current == section and "=" in s and s.split("=", 1)[0].strip().lower() == key:
            return no
    return 0


def parse_text(text: str, base_dir: str = ".") -> Scenario:
    lines = text.splitlines()
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"),
                                   delimiters=("=",), empty_lines_in_values=False)
    cp.optionxform = str.lower
    try:
        cp.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigurationError(f"line {exc.lineno}: expected a [section] header") from None
    except configparser.ParsingError as exc:
        no = exc.errors[0][0] if exc.errors else 0
        raise ConfigurationError(f"line {no}: syntax error, expected 'key = value'") from None
    except configparser.Error as exc:
        no = getattr(exc, "lineno", 0)
        raise ConfigurationError(f"line {no}: {exc.message.splitlines()[0]}") from None
    values = {}
    for section in cp.sections():
        if section not in SECTIONS:
            no = _line_of(lines, section, "") or next(
                (i for i, t in enumerate(lines, 1) if t.strip() == f"[{section}]"), 0)
            raise ConfigurationError(f"line {no}: unknown section [{section}]")
        cls = SECTIONS[section]
        names = {f.name.lower(): f.name for f in fields(cls)}
        kw = {}
        for key, raw in cp.items(section):
            no = _line_of(lines, section, key)
            if key not in names:
                raise ConfigurationError(f"line {no}: unknown key {key!r} in [{section}]")
            kw[names[key]] = _convert(cls, names[key], raw, no)
        values[section] = cls(**kw)
    return Scenario(**values, base_dir=base_dir)


def parse_scenario(path) -> Scenario:
    path = Path(path)
    return parse_text(path.read_text(), base_dir=str(path.parent))


def serialize(sc: Scenario) -> str:
    out = []
    for name in SECTIONS:
        out.append(f"[{name}]")
        for f in fields(SECTIONS[name]):
            v = getattr(getattr(sc, name), f.name)
            if v is None:
                v = "auto"
            elif isinstance(v, float):
                v = repr(v)
            elif isinstance(v, bool):
                v = "true" if v else "false"
            out.append(f"{f.name} = {v}")
        out.append("")
    return "\n".join(out)
