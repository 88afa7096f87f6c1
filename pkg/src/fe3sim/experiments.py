"""Run configurations and the five experiment runners behind the command line.

Each runner returns an :class:`ExperimentOutput`: named CSV tables, optional
gnuplot data blocks and the scalar ``results`` that reference records are
checked against.  Nothing here draws random numbers.
"""

from __future__ import annotations

import csv
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dynamics, entanglement, sensing, spin_core, thermo
from .constants import MAX_TOTAL_SPIN

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

EXPERIMENTS = ("spectrum", "magnetization", "negativity", "dynamics", "sensing")

# slope tolerance (normalized magnetization per Tesla) for finite-temperature plateaus
FINITE_T_PLATEAU_SLOPE = 2e-3

DEFAULTS = {
    "spectrum": {"b_z": 0.0, "dump_hamiltonian": False},
    "magnetization": {
        "temperatures": [0.02, 1.8, 5.0, 10.0, 20.0, 50.0],
        "b_range": [0.0, 120.0, 601],
    },
    "negativity": {
        "field_sweep_temperatures": [0.5, 1.0, 5.0, 10.0, 20.0],
        "b_range": [0.0, 110.0, 221],
        "temperature_sweep_fields": [0.0, 10.0, 20.0, 30.0],
        "t_range": [0.5, 80.0, 160],
    },
    "dynamics": {
        "dicke_k": [0, 1, 2, 3],
        "b_x": [1.0, 5.0],
        "theta_window": dynamics.DEFAULT_WINDOW_THETA,
        "samples": dynamics.DEFAULT_SAMPLES,
    },
    "sensing": {
        "dicke_k": [0, 1, 2, 3],
        "b_x": [1.0, 5.0],
        "n_seq_max": 6,
        "tau": sensing.DEFAULT_TAU,
        "prune_threshold": 0.0,
        "delta_b": sensing.DEFAULT_DELTA_B,
    },
}
MODEL_KEYS = ("j_coupling", "g_factor")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    experiment: str
    model: spin_core.ModelParameters = field(default_factory=spin_core.ModelParameters)
    block: dict = field(default_factory=dict)
    output_dir: Path = Path("out")

    def as_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "model": {k: getattr(self.model, k) for k in MODEL_KEYS},
            self.experiment: self.block,
            "output_dir": str(self.output_dir),
        }


def _grid(value, name: str) -> np.ndarray:
    if not isinstance(value, (list, tuple)) or len(value) != 3:
        raise ConfigError(f"{name} must be [start, stop, points]")
    start, stop, n = value
    if int(n) != n or n < 1 or stop < start:
        raise ConfigError(f"{name} must be an ascending, non-empty range")
    return np.linspace(float(start), float(stop), int(n))


def _sorted_list(values, name: str) -> list:
    if not isinstance(values, (list, tuple)) or not values:
        raise ConfigError(f"{name} must be a non-empty list")
    vals = list(values)
    if vals != sorted(vals):
        raise ConfigError(f"{name} must be sorted ascending")
    return vals


def _parse_override(text: str):
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form section.key=value")
    key, raw = text.split("=", 1)
    try:
        value = tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw
    return key.strip().split("."), value


def build_config(experiment: str, config_file=None, overrides=(), output_dir=None) -> RunConfig:
    """Merge defaults, an optional TOML file and ``section.key=value`` overrides."""
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}")
    data = {}
    if config_file is not None:
        try:
            data = tomllib.loads(Path(config_file).read_text())
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError(f"cannot read config {config_file}: {exc}") from exc
    for path, value in (_parse_override(o) for o in overrides):
        node = data
        for part in path[:-1]:
            node = node.setdefault(part, {})
        node[path[-1]] = value

    declared = data.pop("experiment", experiment)
    if declared != experiment:
        raise ConfigError(f"config declares experiment {declared!r}, command is {experiment!r}")
    others = [e for e in EXPERIMENTS if e != experiment and e in data]
    if others:
        raise ConfigError(f"config must contain exactly one experiment block; found extra {others}")
    model_block = data.pop("model", {})
    unknown_model = set(model_block) - set(MODEL_KEYS)
    if unknown_model:
        raise ConfigError(f"unknown model keys: {sorted(unknown_model)}")
    block = dict(DEFAULTS[experiment])
    user_block = data.pop(experiment, {})
    unknown = set(user_block) - set(block)
    if unknown:
        raise ConfigError(f"unknown {experiment} keys: {sorted(unknown)}")
    block.update(user_block)
    out = output_dir or data.pop("output_dir", "out")
    data.pop("output_dir", None)
    if data:
        raise ConfigError(f"unknown top-level keys: {sorted(data)}")
    try:
        model = spin_core.ModelParameters(**model_block)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    cfg = RunConfig(experiment, model, block, Path(out))
    _validate_block(cfg)
    return cfg


def _validate_block(cfg: RunConfig) -> None:
    b = cfg.block
    if cfg.experiment == "magnetization":
        ts = _sorted_list(b["temperatures"], "temperatures")
        if min(ts) <= 0:
            raise ConfigError("temperatures must be positive")
        if _grid(b["b_range"], "b_range")[0] < 0:
            raise ConfigError("b_range must be non-negative")
    elif cfg.experiment == "negativity":
        ts = _sorted_list(b["field_sweep_temperatures"], "field_sweep_temperatures")
        if _grid(b["t_range"], "t_range")[0] <= 0 or min(ts) <= 0:
            raise ConfigError("temperatures must be positive")
        _grid(b["b_range"], "b_range")
        _sorted_list(b["temperature_sweep_fields"], "temperature_sweep_fields")
    elif cfg.experiment in ("dynamics", "sensing"):
        ks = _sorted_list(b["dicke_k"], "dicke_k")
        if not all(isinstance(k, int) and 0 <= k <= 15 for k in ks):
            raise ConfigError("dicke_k entries must be integers in 0..15")
        _sorted_list(b["b_x"], "b_x")
        if cfg.experiment == "dynamics" and (b["theta_window"] <= 0 or b["samples"] < 2):
            raise ConfigError("theta_window must be positive and samples >= 2")
        if cfg.experiment == "sensing":
            if not isinstance(b["n_seq_max"], int) or b["n_seq_max"] < 1:
                raise ConfigError("n_seq_max must be a positive integer")
            if b["n_seq_max"] > 6 and b["prune_threshold"] == 0:
                raise ConfigError("n_seq_max above 6 requires a pruning threshold")
            if b["tau"] <= 0 or b["delta_b"] <= 0:
                raise ConfigError("tau and delta_b must be positive")


@dataclass
class Table:
    header: list
    rows: list


@dataclass
class ExperimentOutput:
    tables: dict = field(default_factory=dict)
    blocks: dict = field(default_factory=dict)  # gnuplot file name -> list of (title, Table)
    results: dict = field(default_factory=dict)
    extra_json: dict = field(default_factory=dict)


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return f"{float(x):.12g}"


def write_csv(path: Path, table: Table) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(table.header)
        for row in table.rows:
            w.writerow([fmt(v) for v in row])


def write_gnuplot(path: Path, blocks) -> None:
    """Blocks separated by two blank lines so gnuplot ``index`` can pick them."""
    with open(path, "w") as fh:
        for i, (title, table) in enumerate(blocks):
            if i:
                fh.write("\n\n")
            fh.write(f"# {title}\n# {' '.join(table.header)}\n")
            for row in table.rows:
                fh.write(" ".join(fmt(v) for v in row) + "\n")


def _label(x: float) -> str:
    return f"{x:g}"


def run_spectrum(cfg: RunConfig) -> ExperimentOutput:
    p = cfg.model.replace(b_z=float(cfg.block["b_z"]))
    h = spin_core.build_hamiltonian_z(p)
    d = spin_core.diagonalize(h)
    labels = spin_core.match_kambe(d.eigenvalues, p)
    out = ExperimentOutput()
    out.tables["eigenvalues"] = Table(
        ["index", "energy_k", "s_total"],
        [(i, e, s) for i, (e, (s, _)) in enumerate(zip(d.eigenvalues, labels))],
    )
    p0 = cfg.model.replace(b_z=0.0)
    d0 = spin_core.diagonalize(spin_core.build_hamiltonian_z(p0))
    report = spin_core.sector_analysis(d0, p0)
    out.tables["sectors"] = Table(
        ["s_total", "s_total_z", "kambe_energy_k", "multiplicity"],
        [(e.s_total, e.s_total_z, e.kambe_energy, e.multiplicity) for e in report.entries],
    )
    crossings = spin_core.ground_state_crossings(p0, b_max=110.0)
    out.tables["crossings"] = Table(
        ["s_total_z_below", "numerical_tesla", "closed_form_tesla"],
        [(m, b, spin_core.level_crossing_field(m, p0)) for m, b in crossings],
    )
    if cfg.block["dump_hamiltonian"]:
        rows, cols = np.nonzero(h)
        out.tables["hamiltonian"] = Table(
            ["row", "col", "re", "im"],
            [(int(r), int(c), h[r, c].real, h[r, c].imag) for r, c in zip(rows, cols)],
        )
    res = {f"multiplicity_{int(2 * e.s_total)}_2": e.multiplicity for e in report.entries}
    res["total_states"] = report.total_states()
    res["ground_energy_k"] = float(d0.eigenvalues[0])
    res["first_crossing_tesla"] = crossings[0][1] if crossings else float("nan")
    res["saturation_field_tesla"] = crossings[-1][1] if crossings else float("nan")
    out.results = res
    return out


def run_magnetization(cfg: RunConfig) -> ExperimentOutput:
    p = cfg.model
    b = _grid(cfg.block["b_range"], "b_range")
    temps = cfg.block["temperatures"]
    curves = thermo.magnetization_curves(p, temps, b)
    out = ExperimentOutput()
    rows, blocks, plateau_rows = [], [], []
    for c in curves:
        curve_rows = [(bb, c.temperature, m, mn) for bb, m, mn in c.rows()]
        rows.extend(curve_rows)
        blocks.append((f"T = {_label(c.temperature)} K", Table(["b_tesla", "t_kelvin", "m_sz", "m_normalized"], curve_rows)))
        tol = 1e-4 if c.temperature <= 0.05 else FINITE_T_PLATEAU_SLOPE
        for pl in thermo.detect_plateaus(c, slope_tol=tol):
            plateau_rows.append((c.temperature, pl.b_start, pl.b_end, pl.value))
    stair = thermo.ground_state_staircase(p, b)
    blocks.append(("T = 0 (ground-state staircase)",
                   Table(["b_tesla", "m_normalized"], list(zip(b, stair)))))
    out.tables["magnetization"] = Table(["b_tesla", "t_kelvin", "m_sz", "m_normalized"], rows)
    out.tables["plateaus"] = Table(["t_kelvin", "b_start", "b_end", "m_normalized"], plateau_rows)
    out.blocks["magnetization.dat"] = blocks
    out.results = magnetization_anchors(p)
    return out


def magnetization_anchors(p: spin_core.ModelParameters) -> dict:
    """Plateau values at 0.02 K on plateau interiors and the 1.8 K plateau count below 60 T."""
    res = {}
    edges = [0.0] + [spin_core.level_crossing_field(s, p) for s in spin_core.ALLOWED_TOTAL_SPINS[:-1]]
    edges.append(edges[-1] + 10.0)
    for s, lo, hi in zip(spin_core.ALLOWED_TOTAL_SPINS, edges[:-1], edges[1:]):
        mid = 0.5 * (lo + hi)
        d = spin_core.diagonalize(spin_core.build_hamiltonian_z(p.replace(b_z=mid)))
        res[f"plateau_{int(2 * s)}_15"] = thermo.thermal_sz(d, 0.02) / MAX_TOTAL_SPIN
    curve = thermo.magnetization_curve(p, 1.8, np.linspace(0.0, 60.0, 601))
    res["plateau_count_T1.8_below_60T"] = len(
        thermo.detect_plateaus(curve, slope_tol=FINITE_T_PLATEAU_SLOPE))
    return res


def negativity_anchors(p: spin_core.ModelParameters) -> dict:
    res = {
        "n_bip_B0_T1": entanglement.bipartite_thermal(p.replace(b_z=0.0), 1.0),
        "n_bip_B10_T1": entanglement.bipartite_thermal(p.replace(b_z=10.0), 1.0),
    }
    for b in (0.0, 10.0, 30.0):
        res[f"threshold_bip_B{b:g}"] = entanglement.threshold_temperature(
            p.replace(b_z=b), "bipartite", (1.0, 60.0))
    res["threshold_trip_B10"] = entanglement.threshold_temperature(
        p.replace(b_z=10.0), "tripartite", (1.0, 150.0))
    return res


def run_negativity(cfg: RunConfig) -> ExperimentOutput:
    p = cfg.model
    blk = cfg.block
    b_grid = _grid(blk["b_range"], "b_range")
    t_grid = _grid(blk["t_range"], "t_range")
    header = ["b_tesla", "t_kelvin", "n_bip", "n_trip"]
    field_rows = list(entanglement.negativity_sweep(p, b_grid, blk["field_sweep_temperatures"]))
    temp_rows = list(entanglement.negativity_sweep(p, blk["temperature_sweep_fields"], t_grid))
    out = ExperimentOutput()
    out.tables["negativity_field_sweep"] = Table(header, field_rows)
    out.tables["negativity_temperature_sweep"] = Table(header, temp_rows)
    out.blocks["negativity_field.dat"] = [
        (f"T = {_label(t)} K", Table(header, [r for r in field_rows if r[1] == t]))
        for t in blk["field_sweep_temperatures"]
    ]
    out.blocks["negativity_temperature.dat"] = [
        (f"B = {_label(b)} T", Table(header, [r for r in temp_rows if r[0] == b]))
        for b in blk["temperature_sweep_fields"]
    ]
    out.results = negativity_anchors(p)
    return out


def run_dynamics(cfg: RunConfig) -> ExperimentOutput:
    blk = cfg.block
    theta = dynamics.default_theta_grid(blk["theta_window"], blk["samples"])
    out = ExperimentOutput()
    correlations = []
    for k in blk["dicke_k"]:
        for bx in blk["b_x"]:
            rec = dynamics.magnetization_trace(k, cfg.model.replace(b_x=float(bx), b_z=0.0), theta)
            out.tables[f"dynamics_k{k}_bx{_label(bx)}"] = Table(
                ["theta", "t_ps", "sz1", "sz3", "sz2"],
                list(zip(rec.theta, rec.t_ps, rec.sz1, rec.sz3, rec.sz2)),
            )
            correlations.append((k, bx, rec.sensor_readout_correlation()))
    out.tables["dynamics_correlations"] = Table(["dicke_k", "b_x", "pearson_sz1_sz3"], correlations)
    out.results = {"min_sensor_readout_correlation": min(c for *_, c in correlations)}
    return out


def run_sensing(cfg: RunConfig) -> ExperimentOutput:
    blk = cfg.block
    n_max = int(blk["n_seq_max"])
    out = ExperimentOutput()
    betas = []
    protocols = []
    for k in blk["dicke_k"]:
        for bx in blk["b_x"]:
            pc = sensing.ProtocolConfig(
                b_x=float(bx), dicke_k=int(k), n_seq=n_max, tau_list=(float(blk["tau"]),) * n_max,
                prune_threshold=float(blk["prune_threshold"]), model=cfg.model,
            )
            seq = sensing.fisher_scaling(pc, blk["delta_b"])
            nan = float("nan")
            out.tables[f"sensing_k{k}_bx{_label(bx)}"] = Table(
                ["n_seq", "f_value", "inverse_f", "alpha", "beta", "residual", "pruning_remainder"],
                [(e.n_seq, e.f_value, e.inverse,
                  nan if e.alpha is None else e.alpha,
                  nan if e.beta is None else e.beta,
                  nan if e.residual is None else e.residual,
                  e.pruning_remainder) for e in seq],
            )
            if seq[-1].beta is not None:
                betas.append(seq[-1].beta)
            protocols.append(pc.as_dict())
    out.extra_json["protocols"] = protocols
    out.results = {"min_beta": min(betas) if betas else float("nan")}
    return out


RUNNERS = {
    "spectrum": run_spectrum,
    "magnetization": run_magnetization,
    "negativity": run_negativity,
    "dynamics": run_dynamics,
    "sensing": run_sensing,
}
