"""Experiment configuration read from a key-value text file."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

from ..errors import ConfigError, DomainError
from ..grids import Grid3
from ..keyvalue import get_float, get_floats, get_int, get_list, parse_key_values, read_key_values, subsection
from ..potential_lab import Potential, gaussian, potential_from_mapping, square_well

SUITES = (
    "ray_anchors", "plancherel", "inverse_identity", "algebra_laws", "resonance_scan",
    "structure_equivalence", "wave_operator", "scattering", "lp_bounds", "weighted_bounds", "multilinear",
)

DEFAULT_TOLERANCES = {
    "ray_origin": 1e-4,
    "ray_tail": 1e-2,
    "plancherel_refinement": 0.10,
    "inverse_residual": 1e-10,
    "inverse_crosscheck": 1e-6,
    "associativity": 1e-12,
    "identity": 1e-12,
    "born_quadrature": 1e-8,
    "critical_coupling": 0.02,
    "neumann_onset": 0.10,
    "structure_vs_oracle": 2e-2,
    "structure_vs_time": 3e-2,
    "isometry": 1e-3,
    "intertwining": 5e-3,
    "kernel_vs_time": 3e-2,
    "identity_scattering": 1e-12,
    "scattering_agreement": 5e-2,
    "leakage": 1e-4,
    "unitarity": 2e-2,
    "born_amplitude": 0.05,
    "refinement": 0.25,
    "bilinear": 1e-10,
}


@dataclass(frozen=True)
class GridSpec:
    extent: float
    n: int

    @property
    def grid(self) -> Grid3:
        return Grid3(self.extent, self.n)


@dataclass(frozen=True)
class ExperimentConfig:
    """Settings for a verification run; every field has a desk-scale default."""

    potential: Potential = field(default_factory=lambda: gaussian(0.2, 1.0))
    suites: tuple[str, ...] = ()
    out_dir: Path = Path("wavescatter-out")
    seed: int = 0
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    # kernel route: support lattice, refined lattice, output grid (aligned with the support lattice)
    support: GridSpec = GridSpec(3.0, 12)
    support_refined: GridSpec = GridSpec(3.2, 16)
    support_threshold: float = 1e-4
    output: GridSpec = GridSpec(8.0, 32)
    output_refined: GridSpec = GridSpec(8.0, 40)
    eta_k_max: float = 4.6
    eta_radii: int = 32
    eta_order: int = 17
    # time-limit oracle
    box: GridSpec = GridSpec(24.0, 96)
    T: float = 4.0
    dt: float = 1.0 / 16
    intertwining_s: float = 1.0
    # structure route
    f_grid: GridSpec = GridSpec(10.0, 100)
    structure_order: int = 23
    structure_dt: float = 0.2
    # test packet for cross-route comparisons
    packet_sigma: float = 1.5
    packet_k0: tuple[float, float, float] = (2.0, 0.0, 0.0)
    packet_center: tuple[float, float, float] = (0.3, -0.2, 0.1)
    # randomized families for the norm suites
    n_functions: int = 16
    weighted_betas: tuple[float, ...] = (0.25, 0.5, 0.75)
    weighted_alpha: float = 1.4
    # resonance scan: unit family V_c = c * resonance_unit
    resonance_unit: Potential = field(default_factory=lambda: square_well(1.0, 1.0))
    resonance_grid: GridSpec = GridSpec(1.2, 12)
    resonance_c_max: float = 4.0
    resonance_points: int = 41
    # multilinear suite
    multilinear_box: GridSpec = GridSpec(24.0, 64)
    multilinear_box_refined: GridSpec = GridSpec(24.0, 96)
    multilinear_times: tuple[float, ...] = (8.0, 16.0, 32.0)
    multilinear_dt: float = 1.0 / 8

    def __post_init__(self):
        bad = [s for s in self.suites if s not in SUITES]
        if bad:
            raise ConfigError(f"unknown suites {bad}; registered: {', '.join(SUITES)}")
        for k, v in self.tolerances.items():
            if not v > 0:
                raise ConfigError(f"tolerance {k!r} must be positive")
        if self.dt <= 0 or self.T <= 0:
            raise ConfigError("time step and horizon must be positive")

    def tol(self, name: str) -> float:
        return float(self.tolerances[name])

    def with_overrides(self, **kw) -> "ExperimentConfig":
        return replace(self, **kw)


def _grid_spec(m: dict, key: str, default: GridSpec) -> GridSpec:
    sub = subsection(m, key)
    spec = GridSpec(get_float(sub, "extent", default.extent), get_int(sub, "n", default.n))
    try:
        spec.grid
    except DomainError as exc:
        raise ConfigError(f"{key}: {exc}") from exc
    return spec


def _potential(m: dict, prefix: str, default: Potential, base_dir: Path) -> Potential:
    sub = subsection(m, prefix)
    if not sub:
        return default
    try:
        return potential_from_mapping(sub, base_dir)
    except DomainError as exc:
        raise ConfigError(f"{prefix}: {exc}") from exc


def config_from_mapping(m: dict[str, str], base_dir: Path = Path(".")) -> ExperimentConfig:
    d = ExperimentConfig()
    tols = dict(DEFAULT_TOLERANCES)
    for k, v in subsection(m, "tol").items():
        if k not in tols:
            raise ConfigError(f"unknown tolerance {k!r}")
        tols[k] = get_float({k: v}, k)
    kw = dict(
        potential=_potential(m, "potential", d.potential, base_dir),
        suites=get_list(m, "suites", ()),
        out_dir=Path(m.get("out_dir", str(d.out_dir))),
        seed=get_int(m, "seed", d.seed),
        tolerances=tols,
        support=_grid_spec(m, "grid.support", d.support),
        support_refined=_grid_spec(m, "grid.support_refined", d.support_refined),
        support_threshold=get_float(m, "grid.support_threshold", d.support_threshold),
        output=_grid_spec(m, "grid.output", d.output),
        output_refined=_grid_spec(m, "grid.output_refined", d.output_refined),
        eta_k_max=get_float(m, "eta.k_max", d.eta_k_max),
        eta_radii=get_int(m, "eta.radii", d.eta_radii),
        eta_order=get_int(m, "eta.order", d.eta_order),
        box=_grid_spec(m, "time.box", d.box),
        T=get_float(m, "time.T", d.T),
        dt=get_float(m, "time.dt", d.dt),
        intertwining_s=get_float(m, "time.intertwining_s", d.intertwining_s),
        f_grid=_grid_spec(m, "structure.f_grid", d.f_grid),
        structure_order=get_int(m, "structure.order", d.structure_order),
        structure_dt=get_float(m, "structure.dt", d.structure_dt),
        packet_sigma=get_float(m, "packet.sigma", d.packet_sigma),
        packet_k0=tuple(get_floats(m, "packet.k0", d.packet_k0)),
        packet_center=tuple(get_floats(m, "packet.center", d.packet_center)),
        n_functions=get_int(m, "norms.functions", d.n_functions),
        weighted_betas=tuple(get_floats(m, "norms.betas", d.weighted_betas)),
        weighted_alpha=get_float(m, "norms.alpha", d.weighted_alpha),
        resonance_unit=_potential(m, "resonance.potential", d.resonance_unit, base_dir),
        resonance_grid=_grid_spec(m, "resonance.grid", d.resonance_grid),
        resonance_c_max=get_float(m, "resonance.c_max", d.resonance_c_max),
        resonance_points=get_int(m, "resonance.points", d.resonance_points),
        multilinear_box=_grid_spec(m, "multilinear.box", d.multilinear_box),
        multilinear_box_refined=_grid_spec(m, "multilinear.box_refined", d.multilinear_box_refined),
        multilinear_times=tuple(get_floats(m, "multilinear.times", d.multilinear_times)),
        multilinear_dt=get_float(m, "multilinear.dt", d.multilinear_dt),
    )
    if len(kw["packet_k0"]) != 3 or len(kw["packet_center"]) != 3:
        raise ConfigError("packet.k0 and packet.center need three components")
    return ExperimentConfig(**kw)


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    return config_from_mapping(read_key_values(path), path.parent)


def parse_config(text: str, base_dir: Path = Path(".")) -> ExperimentConfig:
    return config_from_mapping(parse_key_values(text), base_dir)
