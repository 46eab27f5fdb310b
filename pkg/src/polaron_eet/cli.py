"""Command-line front end: dynamics, crossover, bath and sweep runs from a JSON config.

Every run writes headered CSV data files and one ``<prefix>_manifest.json``.
Data files depend only on the config and the package version; wall time and
warnings live in the manifest.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import math
import sys
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .bath import (
    BathModel,
    ThermalState,
    propagator_phi,
    propagator_phi_tilde,
    renormalization_B,
    spatial_kernel,
    spectral_density,
)
from .bloch import PolaronQuantities, SystemModel, build_generator
from .correlations import DEFAULT_TOL, response
from .crossover import DEFAULT_BRACKET, NoCrossoverError, solve_Tc_approx, solve_Tc_full
from .dynamics import BlochVector, RegimeError, SingularGeneratorError, evolve, resonant_xi_squared, steady_state
from .mathkit import QuadratureError

__all__ = ["main", "load_config", "RunConfig", "ConfigError", "EXIT_OK", "EXIT_CONFIG", "EXIT_NUMERIC", "EXIT_PARTIAL"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_PARTIAL = 4

NUMERIC_ERRORS = (QuadratureError, FloatingPointError, SingularGeneratorError, RegimeError, ArithmeticError)

DYNAMICS_COLUMNS = ["t", "alpha_x_lab", "alpha_y_lab", "alpha_z", "alpha_x_polaron", "alpha_y_polaron"]


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x) + 0.0
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _mu(value) -> float:
    return math.inf if isinstance(value, str) else float(value)


def _json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _schema() -> dict:
    text = resources.files("polaron_eet").joinpath("config_schema.json").read_text(encoding="utf-8")
    return json.loads(text)


@dataclass(frozen=True)
class RunConfig:
    system: SystemModel
    bath: BathModel
    temperatures: tuple[float, ...]
    regime: str
    t_max: float
    n_points: int
    initial_state: BlochVector
    tolerance: float
    threads: int
    out_dir: Path
    prefix: str
    raw: dict

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_max, self.n_points)


def load_config(path, overrides: dict | None = None) -> RunConfig:
    """Parse, schema-validate and apply command-line overrides."""
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_dict(raw, overrides)


def config_from_dict(raw: dict, overrides: dict | None = None) -> RunConfig:
    raw = json.loads(json.dumps(raw))
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    if "tol" in overrides:
        raw["tolerance"] = overrides["tol"]
    if "threads" in overrides:
        raw["threads"] = overrides["threads"]
    if "regime" in overrides:
        raw["regime"] = overrides["regime"]
    if "out" in overrides:
        raw.setdefault("output", {})["directory"] = str(overrides["out"])
    try:
        jsonschema.validate(raw, _schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config error at {where}: {exc.message}") from exc
    sysd, bathd = raw["system"], raw["bath"]
    temps = raw["temperature"]
    temps = tuple(float(t) for t in (temps if isinstance(temps, list) else [temps]))
    timed = raw.get("time", {})
    outd = raw.get("output", {})
    try:
        system = SystemModel(sysd.get("epsilon", 0.0), sysd["V"])
        bath = BathModel(bathd["alpha"], bathd["omega_c"], bathd.get("dimension", 3), _mu(bathd.get("mu", 0.0)))
        a0 = BlochVector(*raw.get("initial_state", [0.0, 0.0, 1.0]))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"config error: {exc}") from exc
    if sum(x * x for x in a0.as_array()) > 1.0 + 1e-12:
        raise ConfigError("initial_state lies outside the Bloch ball")
    return RunConfig(
        system=system,
        bath=bath,
        temperatures=temps,
        regime=raw.get("regime", "auto"),
        t_max=float(timed.get("t_max", 30.0)),
        n_points=int(timed.get("n_points", 301)),
        initial_state=a0,
        tolerance=float(raw.get("tolerance", DEFAULT_TOL)),
        threads=int(raw.get("threads", 1)),
        out_dir=Path(outd.get("directory", ".")),
        prefix=outd.get("prefix", "run"),
        raw=raw,
    )


def _telemetry(system, bath, thermal, gen=None) -> dict:
    pq = gen.polaron if gen is not None else PolaronQuantities.evaluate(system, bath, thermal)
    out = {"temperature": thermal.temperature, "B": pq.B, "V_R": pq.V_R, "eta": pq.eta}
    if gen is not None:
        out.update(gen.telemetry.as_dict())
        out["regime"] = gen.regime
        out["validity_warnings"] = gen.telemetry.warnings()
    return out


def _map(fn, items, threads):
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _tag(value: float) -> str:
    return format(value, "g").replace("+", "")


# dynamics


def cmd_dynamics(cfg: RunConfig) -> tuple[int, dict]:
    def run(T):
        thermal = ThermalState(T)
        gen = build_generator(cfg.regime, cfg.system, cfg.bath, thermal, cfg.tolerance)
        return gen, evolve(gen, cfg.initial_state, cfg.times)

    results = _map(run, list(cfg.temperatures), cfg.threads)
    files, points = [], []
    for T, (gen, traj) in zip(cfg.temperatures, results):
        lab = traj.to_lab()
        name = f"{cfg.prefix}_T{_tag(T)}.csv"
        rows = zip(traj.times, lab.ax, lab.ay, lab.az, traj.ax, traj.ay)
        _write_csv(cfg.out_dir / name, DYNAMICS_COLUMNS, rows)
        files.append(name)
        tel = _telemetry(cfg.system, cfg.bath, gen.thermal, gen)
        tel.update(method=traj.method, rates=gen.rates.as_dict(),
                   steady_state_polaron=None if traj.steady is None else traj.steady.as_array().tolist())
        if gen.regime == "resonant":
            tel["xi_squared"] = resonant_xi_squared(gen)
        points.append(tel)
    return EXIT_OK, {"files": files, "points": points}


# crossover

CROSSOVER_COLUMNS = [
    "axis", "value", "omega_c", "mu", "T_c_full", "T_c_approx", "residual_full", "residual_approx",
    "relative_difference", "status", "phi0", "x", "y", "T0", "Tx", "Ty",
]


def cmd_crossover(cfg: RunConfig) -> tuple[int, dict]:
    spec = cfg.raw.get("crossover")
    if spec is None:
        raise ConfigError("crossover run needs a 'crossover' block")
    if cfg.system.epsilon != 0.0:
        raise ConfigError("crossover temperature is defined at epsilon = 0 only")
    axis = spec["axis"]
    bracket = tuple(spec.get("bracket", DEFAULT_BRACKET))
    if not bracket[0] < bracket[1]:
        raise ConfigError("crossover bracket must be increasing")
    with_approx = spec.get("approx", True)
    if axis == "omega_c":
        series = [_mu(m) for m in spec.get("series", [cfg.bath.mu])]
        points = [(w, m, w) for m in series for w in spec["values"]]
    else:
        series = [float(w) for w in spec.get("series", [cfg.bath.omega_c])]
        points = [(w, 1.0 / v if v > 0 else math.inf, v) for w in series for v in spec["values"]]
    for w, _, _ in points:
        if not w > 0:
            raise ConfigError("omega_c values must be > 0")

    def run(point):
        w, m, value = point
        bath = BathModel(cfg.bath.alpha, w, cfg.bath.dimension, m)
        row = {"axis": axis, "value": value, "omega_c": w, "mu": m}
        try:
            full = solve_Tc_full(cfg.system, bath, bracket, cfg.tolerance)
        except NoCrossoverError as exc:
            row["status"] = f"{exc.state} everywhere"
            return row, None
        except NUMERIC_ERRORS as exc:
            row["status"] = f"error: {exc}"
            return row, exc
        row.update(T_c_full=full.T_c, residual_full=full.residual, status="ok")
        row.update({k: full.diagnostics[k] for k in ("phi0", "x", "y", "T0", "Tx", "Ty")})
        if with_approx and bath.dimension == 3:
            try:
                approx = solve_Tc_approx(cfg.system, bath, bracket)
                row.update(T_c_approx=approx.T_c, residual_approx=approx.residual,
                           relative_difference=abs(approx.T_c - full.T_c) / full.T_c)
            except NoCrossoverError as exc:
                row["status"] = f"approx {exc.state} everywhere"
        return row, None

    results = _map(run, points, cfg.threads)
    nan = float("nan")
    rows = [[r.get(c, nan) for c in CROSSOVER_COLUMNS] for r, _ in results]
    name = f"{cfg.prefix}_crossover.csv"
    _write_csv(cfg.out_dir / name, CROSSOVER_COLUMNS, rows)
    failures = [str(e) for _, e in results if e is not None]
    return (EXIT_PARTIAL if failures else EXIT_OK), {"files": [name], "failures": failures,
                                                    "points": [r for r, _ in results]}


# bath

SPECTRUM_COLUMNS = ["omega", "J", "F", "gamma_xx", "S_xx", "gamma_yy", "S_yy"]
PROPAGATOR_COLUMNS = [
    "tau", "phi_re", "phi_im", "phi_tilde_numeric", "phi_tilde_analytic", "phi_tilde_difference", "B",
]


def cmd_bath(cfg: RunConfig) -> tuple[int, dict]:
    grid = cfg.raw.get("bath_grid", {})
    omegas = np.linspace(-grid.get("omega_max", 20.0), grid.get("omega_max", 20.0), grid.get("n_omega", 41))
    taus = np.linspace(0.0, grid.get("tau_max", 10.0), grid.get("n_tau", 51))
    with_responses = grid.get("responses", True)
    bath, tol = cfg.bath, cfg.tolerance
    files, points = [], []
    for T in cfg.temperatures:
        thermal = ThermalState(T)
        B = renormalization_B(bath, thermal)
        w_pos = np.abs(omegas)
        J = np.array([spectral_density(w, bath) for w in w_pos]) * np.sign(omegas)
        F = np.asarray(spatial_kernel(w_pos, bath), dtype=float)

        def spectrum_row(w):
            if not with_responses:
                return [math.nan] * 4
            g_xx, s_xx = response(w, "xx", bath, thermal, tol)
            g_yy, s_yy = response(w, "yy", bath, thermal, tol)
            return [g_xx, s_xx, g_yy, s_yy]

        resp = _map(spectrum_row, list(omegas), cfg.threads)
        spec_name = f"{cfg.prefix}_T{_tag(T)}_spectrum.csv"
        _write_csv(cfg.out_dir / spec_name, SPECTRUM_COLUMNS,
                   ([w, j, f, *r] for w, j, f, r in zip(omegas, J, F, resp)))

        phi = np.asarray(propagator_phi(taus, bath, thermal, method="numeric", tol=tol), dtype=complex)
        pt_num = np.asarray(propagator_phi_tilde(taus, bath, thermal, method="numeric", tol=tol), dtype=float)
        if bath.dimension == 3:
            pt_an = np.asarray(propagator_phi_tilde(taus, bath, thermal, method="analytic"), dtype=float)
        else:
            pt_an = np.full_like(pt_num, math.nan)
        diff = pt_num - pt_an
        prop_name = f"{cfg.prefix}_T{_tag(T)}_propagator.csv"
        _write_csv(cfg.out_dir / prop_name, PROPAGATOR_COLUMNS,
                   ([t, p.real, p.imag, a, b_, d, B] for t, p, a, b_, d in zip(taus, phi, pt_num, pt_an, diff)))
        files += [spec_name, prop_name]
        phi_zero = float(np.real(propagator_phi(0.0, bath, thermal, method="numeric", tol=tol)))
        points.append({
            "temperature": T,
            "B": B,
            "phi_at_zero": phi_zero,
            "B_squared_minus_exp_phi0": B * B - math.exp(-phi_zero),
            "max_phi_tilde_difference": float(np.nanmax(np.abs(diff))) if bath.dimension == 3 else None,
        })
    return EXIT_OK, {"files": files, "points": points}


# sweep

SWEEP_KEYS = ("temperature", "epsilon", "V", "alpha", "omega_c", "mu", "dimension")
SWEEP_RESULTS = [
    "regime", "status", "B", "V_R", "eta", "steady_ax", "steady_ay", "steady_az",
    "eig0_re", "eig0_im", "eig1_re", "eig1_im", "eig2_re", "eig2_im", "xi_squared", "amplitude",
]


def _sort_eigs(q):
    return sorted(q, key=lambda z: (round(z.imag, 12), round(z.real, 12)))


def cmd_sweep(cfg: RunConfig) -> tuple[int, dict]:
    spec = cfg.raw.get("sweep")
    if spec is None:
        raise ConfigError("sweep run needs a 'sweep' block")
    grid = spec["grid"]
    keys = [k for k in SWEEP_KEYS if k in grid]
    size = math.prod(len(grid[k]) for k in keys)
    limit = spec.get("max_points", 10000)
    if size > limit:
        raise ConfigError(f"sweep grid has {size} points, above max_points = {limit}")
    base = {
        "temperature": cfg.temperatures[0], "epsilon": cfg.system.epsilon, "V": cfg.system.V,
        "alpha": cfg.bath.alpha, "omega_c": cfg.bath.omega_c, "mu": cfg.bath.mu, "dimension": cfg.bath.dimension,
    }
    combos = [dict(base, **dict(zip(keys, vals))) for vals in itertools.product(*(grid[k] for k in keys))]
    for c in combos:
        c["mu"] = _mu(c["mu"])

    def run(p):
        out = {}
        try:
            system = SystemModel(p["epsilon"], p["V"])
            bath = BathModel(p["alpha"], p["omega_c"], int(p["dimension"]), p["mu"])
            thermal = ThermalState(p["temperature"])
            gen = build_generator(cfg.regime, system, bath, thermal, cfg.tolerance)
        except NUMERIC_ERRORS + (ValueError,) as exc:
            return {"status": f"error: {exc}"}, exc
        pq = gen.polaron
        out.update(regime=gen.regime, B=pq.B, V_R=pq.V_R, eta=pq.eta,
                   amplitude=4.0 * pq.V_R**2 / pq.eta**2 if pq.eta > 0 else 0.0)
        status = "ok"
        try:
            s = steady_state(gen)
            out.update(steady_ax=s.ax, steady_ay=s.ay, steady_az=s.az)
        except SingularGeneratorError:
            status = "singular"
        for i, z in enumerate(_sort_eigs(np.linalg.eigvals(gen.M))):
            out[f"eig{i}_re"], out[f"eig{i}_im"] = z.real, z.imag
        if system.epsilon == 0.0 and gen.regime in ("resonant", "full"):
            v_r, r = pq.V_R, gen.rates
            out["xi_squared"] = 8.0 * v_r * (2.0 * v_r + r.lambda_3) - (r.Gamma_z - r.Gamma_y) ** 2
        out["status"] = status
        out["_telemetry"] = gen.telemetry.as_dict()
        return out, None

    results = _map(run, combos, cfg.threads)
    nan = float("nan")
    header = list(keys) + SWEEP_RESULTS
    rows = [[p[k] for k in keys] + [r.get(c, nan) for c in SWEEP_RESULTS] for p, (r, _) in zip(combos, results)]
    name = f"{cfg.prefix}_sweep.csv"
    _write_csv(cfg.out_dir / name, header, rows)
    failures = [f"{ {k: p[k] for k in keys} }: {e}" for p, (_, e) in zip(combos, results) if e is not None]
    points = [dict({k: p[k] for k in keys}, **r.get("_telemetry", {})) for p, (r, _) in zip(combos, results)]
    code = EXIT_OK if not failures else (EXIT_PARTIAL if len(failures) < len(combos) else EXIT_NUMERIC)
    return code, {"files": [name], "failures": failures, "points": points}


COMMANDS = {"dynamics": cmd_dynamics, "crossover": cmd_crossover, "bath": cmd_bath, "sweep": cmd_sweep}


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="polaron-eet", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="JSON run configuration")
        s.add_argument("--out", help="output directory (overrides output.directory)")
        s.add_argument("--tol", type=float, help="quadrature tolerance (overrides tolerance)")
        s.add_argument("--threads", type=int, help="worker threads for independent points")
        s.add_argument("--regime", choices=["auto", "resonant", "full", "weak", "high_temperature"])
    return p


def run(command: str, cfg: RunConfig) -> tuple[int, dict]:
    """Execute one command and write its manifest; returns (exit code, manifest)."""
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    error = None
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            code, payload = COMMANDS[command](cfg)
        except ConfigError:
            raise
        except NUMERIC_ERRORS as exc:
            code, payload, error = EXIT_NUMERIC, {"files": []}, f"{type(exc).__name__}: {exc}"
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    messages = sorted({str(w.message) for w in caught})
    for point in payload.get("points", []):
        messages.extend(point.get("validity_warnings", []))
    manifest = {
        "command": command,
        "version": __version__,
        "regime": cfg.regime,
        "config": cfg.raw,
        "exit_code": code,
        "error": error,
        "wall_time_s": time.perf_counter() - start,
        "warnings": sorted(set(messages)),
        "alpha_y_frame_note": "alpha_x_lab, alpha_y_lab = B * polaron-frame values",
        **payload,
    }
    path = cfg.out_dir / f"{cfg.prefix}_manifest.json"
    path.write_text(json.dumps(_json_safe(manifest), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return code, manifest


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.tol is not None and not args.tol > 0:
        print("error: --tol must be > 0", file=sys.stderr)
        return EXIT_CONFIG
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    overrides = {"tol": args.tol, "threads": args.threads, "regime": args.regime, "out": args.out}
    try:
        cfg = load_config(args.config, overrides)
        code, manifest = run(args.command, cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if manifest.get("error"):
        print(f"numerical failure: {manifest['error']}", file=sys.stderr)
    for f in manifest.get("failures", []):
        print(f"point failed: {f}", file=sys.stderr)
    print(json.dumps({"exit_code": code, "files": manifest.get("files", [])}))
    return code


if __name__ == "__main__":
    sys.exit(main())
