"""Batch front door: parse flags and configs, run experiments, write artifacts.

Every run is a pure function of ``(config, seed)``: rerunning writes
byte-identical CSV and plot-data files (the manifest's wall time is the one
deliberate exception).  Outputs land in the ``--out`` directory together
with ``manifest.json`` recording inputs, library versions, seed and wall
time, and -- for the entropy-style reports -- two-column plot data plus a
generated gnuplot script, never a GUI.

Parameter precedence, highest first:

1. command-line flag,
2. value in the ``--config`` JSON file,
3. built-in default.

Exit codes: 0 success, 2 configuration error (bad flags, bad JSON, unknown
keys, invalid parameter values), 3 budget refusal.
"""

from __future__ import annotations

import argparse
import json
import platform
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .crofton import TomographFamily, crofton_integral, volb_chain_check, write_volb_csv
from .entropy import BarcodeSequence, Schedule, entropy_report
from .errors import BarlabError, BudgetExceeded, ConfigParse
from .gridfilt import grid_action_complex, grid_sequence, max_feasible_n
from .persistence import write_barcode_csv
from .synthetic import SyntheticLaw, generate, write_sequence_csv
from .twist import (
    TwistMapSpec,
    count_periodic_points,
    horizontal_circle,
    iterate_curve,
    length_growth_rate,
    periodic_orbits,
    vertical_circle,
    write_orbits_csv,
)

__all__ = ["ExperimentConfig", "main", "run"]


# ---------------------------------------------------------------------------
# flag/config value parsing (all raise ConfigParse on malformed input)
# ---------------------------------------------------------------------------

def _parse_int_list(value) -> tuple[int, ...]:
    """Accept ``"2:6"`` (inclusive range), ``"1,3,5"``, or a JSON list."""
    if isinstance(value, (list, tuple)):
        try:
            return tuple(int(v) for v in value)
        except (TypeError, ValueError) as exc:
            raise ConfigParse(f"expected integers, got {value!r}") from exc
    text = str(value)
    try:
        if ":" in text:
            lo, hi = text.split(":")
            lo, hi = int(lo), int(hi)
            if hi < lo:
                raise ValueError(f"empty range {text!r}")
            return tuple(range(lo, hi + 1))
        return tuple(int(t) for t in text.split(","))
    except ValueError as exc:
        raise ConfigParse(f"cannot parse integer list {text!r}") from exc


def _parse_float_list(value) -> tuple[float, ...]:
    if isinstance(value, (list, tuple)):
        try:
            return tuple(float(v) for v in value)
        except (TypeError, ValueError) as exc:
            raise ConfigParse(f"expected numbers, got {value!r}") from exc
    try:
        return tuple(float(t) for t in str(value).split(","))
    except ValueError as exc:
        raise ConfigParse(f"cannot parse number list {value!r}") from exc


def _parse_schedule(value) -> Schedule:
    """``constant:EPS`` | ``power:EPS[:P]`` | ``exponential:EPS:ETA`` |
    ``explicit:K=EPS,K=EPS,...``"""
    if isinstance(value, Schedule):
        return value
    parts = str(value).split(":")
    kind, args = parts[0], parts[1:]
    try:
        if kind == "constant" and len(args) == 1:
            return Schedule.constant(float(args[0]))
        if kind == "power" and len(args) in (1, 2):
            p = float(args[1]) if len(args) == 2 else 1.0
            return Schedule.power(float(args[0]), p)
        if kind == "exponential" and len(args) == 2:
            return Schedule.exponential(float(args[0]), float(args[1]))
        if kind == "explicit" and len(args) == 1:
            pairs = (item.split("=") for item in args[0].split(","))
            return Schedule.explicit({int(k): float(v) for k, v in pairs})
    except (TypeError, ValueError) as exc:
        raise ConfigParse(f"cannot parse schedule {value!r}") from exc
    raise ConfigParse(
        f"cannot parse schedule {value!r}; expected constant:EPS, power:EPS[:P], "
        "exponential:EPS:ETA, or explicit:K=EPS,..."
    )


def _load_config_file(path) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigParse(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigParse(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigParse(f"config {path} must hold a JSON object")
    return data


@dataclass(frozen=True)
class ExperimentConfig:
    """A fully resolved run: subcommand plus its parameters.

    ``params`` holds raw (string or JSON) values exactly as resolved from
    flags and config file; runners parse them, so a config round-trips
    through the manifest unchanged.
    """

    subcommand: str
    params: dict
    seed: int = 0
    out: str = "out"
    budget: int = 300_000

    def param(self, key, parser=None):
        value = self.params.get(key)
        if value is None or parser is None:
            return value
        return parser(value)


# ---------------------------------------------------------------------------
# runners (one per subcommand; return list of artifact file names)
# ---------------------------------------------------------------------------

def _spec(cfg: ExperimentConfig) -> TwistMapSpec:
    try:
        return TwistMapSpec(K=float(cfg.params.get("K", 0.0)))
    except (TypeError, ValueError) as exc:
        raise ConfigParse(f"bad K value {cfg.params.get('K')!r}") from exc


def _run_orbits(cfg: ExperimentConfig, out: Path) -> list[str]:
    spec = _spec(cfg)
    k = int(cfg.params.get("k", 1))
    m_list = _parse_int_list(cfg.params.get("m", "0"))
    records = []
    for m in m_list:
        records.extend(periodic_orbits(spec, k, m_range=(m,), seed=cfg.seed))
    write_orbits_csv(records, out / "orbits.csv")
    return ["orbits.csv"]


def _run_barcode(cfg: ExperimentConfig, out: Path) -> list[str]:
    spec = _spec(cfg)
    k = int(cfg.params.get("k", 2))
    m = int(cfg.params.get("m", 0))
    n = cfg.params.get("n")
    n = int(n) if n is not None else max_feasible_n(k, cfg.budget)
    grid = grid_action_complex(spec, k=k, m=m, n=n, budget=cfg.budget)
    write_barcode_csv(grid.barcode, out / "barcode.csv", with_multiplicity=True)
    summary = {
        "K": spec.K,
        "k": k,
        "m": m,
        "n": grid.n,
        "n_cells": grid.n_cells,
        "modulus": grid.modulus,
        "gamma_proxy": grid.gamma_proxy(),
        "infinite_by_degree": {str(d): c for d, c in sorted(grid.infinite_by_degree.items())},
    }
    (out / "grid.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return ["barcode.csv", "grid.json"]


def _write_gnuplot_script(out: Path, data_files: list[Path], eps_grid) -> str:
    lines = [
        "set terminal pngcairo size 900,600",
        "set output 'counts.png'",
        "set xlabel 'iterate k'",
        "set ylabel 'bars longer than threshold'",
        "set logscale y 2",
        "set key left top",
    ]
    plots = ", \\\n  ".join(
        "'%s' using 1:2 with linespoints title 'eps = %.6g'" % (p.name, e)
        for p, e in zip(data_files, eps_grid)
    )
    lines.append("plot \\\n  " + plots)
    (out / "plot.gp").write_text("\n".join(lines) + "\n")
    return "plot.gp"


def _entropy_artifacts(out: Path, seq: BarcodeSequence, cfg: ExperimentConfig,
                       eps_grid, schedule: Schedule | None,
                       window=None) -> list[str]:
    report = entropy_report(seq, eps_grid, schedule=schedule, window=window)
    report.write_json(out / "report.json")
    report.write_csv(out / "counts.csv")
    data_files = report.write_plot_data(out)
    script = _write_gnuplot_script(out, data_files, eps_grid)
    return ["report.json", "counts.csv", script] + [p.name for p in data_files]


def _grid_inputs(cfg: ExperimentConfig):
    ks = _parse_int_list(cfg.params.get("ks", "2:6"))
    eps_grid = _parse_float_list(cfg.params.get("eps_grid", "0.8,0.4,0.2,0.1"))
    window = cfg.params.get("window")
    window = tuple(_parse_int_list(window)) if window is not None else None
    if window is not None and len(window) != 2:
        raise ConfigParse(f"window must have two entries, got {window}")
    return ks, eps_grid, window


def _run_entropy(cfg: ExperimentConfig, out: Path) -> list[str]:
    spec = _spec(cfg)
    ks, eps_grid, window = _grid_inputs(cfg)
    seq, grids = grid_sequence(spec, ks, m=int(cfg.params.get("m", 0)), budget=cfg.budget)
    grid_meta = {
        str(k): {"n": g.n, "modulus": g.modulus, "n_cells": g.n_cells}
        for k, g in grids.items()
    }
    (out / "grids.json").write_text(json.dumps(grid_meta, indent=2, sort_keys=True) + "\n")
    schedule = cfg.param("schedule", _parse_schedule)
    return ["grids.json"] + _entropy_artifacts(out, seq, cfg, eps_grid, schedule, window)


def _run_sequential(cfg: ExperimentConfig, out: Path) -> list[str]:
    if cfg.params.get("schedule") is None:
        raise ConfigParse("sequential requires a schedule (--schedule)")
    return _run_entropy(cfg, out)


def _run_crofton(cfg: ExperimentConfig, out: Path) -> list[str]:
    spec = _spec(cfg)
    k = int(cfg.params.get("k", 8))
    quadrature = int(cfg.params.get("quadrature", 1000))
    family = TomographFamily(horizontal_circle(0.0, 4))
    curve = vertical_circle(0.25)
    result = crofton_integral(spec, k, family, quadrature, curve=curve)
    rows = [
        "k[steps],integral[count],length[lift],ratio[1],y_variation[lift],quadrature_n[nodes],max_jump[count],resolved[bool]",
        "%d,%.12g,%.12g,%.12g,%.12g,%d,%d,%d"
        % (result.k, result.integral, result.length, result.ratio,
           result.y_variation, result.quadrature_n, result.max_jump,
           int(result.resolved)),
    ]
    (out / "crofton.csv").write_text("\n".join(rows) + "\n")
    artifacts = ["crofton.csv"]
    if cfg.params.get("schedule") is not None:
        ks = _parse_int_list(cfg.params.get("ks", "1:8"))
        report = volb_chain_check(spec, ks, _parse_schedule(cfg.params["schedule"]),
                                  family, curve=curve)
        write_volb_csv(report, out / "volb.csv")
        artifacts.append("volb.csv")
    return artifacts


def _run_gamma(cfg: ExperimentConfig, out: Path) -> list[str]:
    spec = _spec(cfg)
    ks = _parse_int_list(cfg.params.get("ks", "1:3"))
    threshold = float(cfg.params.get("threshold", 0.5))
    rows = ["k[steps],orbits[count],points[count],hyperbolic_orbits[count],hyperbolic_points[count],elliptic[count],degenerate[count],exceeds_homology[bool],gamma_proxy[action],n[grid]"]
    proxies = {}
    for k in sorted(set(ks)):
        census = count_periodic_points(spec, k)
        n = min(128, max_feasible_n(k, cfg.budget))
        grid = grid_action_complex(spec, k=k, m=0, n=n, budget=cfg.budget)
        proxies[k] = grid.gamma_proxy()
        rows.append(
            "%d,%d,%d,%d,%d,%d,%d,%d,%.12g,%d"
            % (k, census.total_orbits, census.points_total, census.hyperbolic,
               census.hyperbolic_points, census.elliptic, census.degenerate,
               int(census.exceeds_homology()), proxies[k], n)
        )
    (out / "gamma.csv").write_text("\n".join(rows) + "\n")
    # measured no-shrinking property: min of the series against a fraction
    # of its first value; violations are listed, never suppressed
    first = proxies[min(proxies)]
    floor = threshold * first
    violations = [k for k, v in proxies.items() if v < floor]
    verdict = {
        "threshold": threshold,
        "first_k": min(proxies),
        "first_value": first,
        "min_value": min(proxies.values()),
        "satisfied": not violations,
        "violations": violations,
    }
    (out / "gamma.json").write_text(json.dumps(verdict, indent=2, sort_keys=True) + "\n")
    return ["gamma.csv", "gamma.json"]


def _run_synthetic(cfg: ExperimentConfig, out: Path) -> list[str]:
    kind = cfg.params.get("law")
    if kind is None:
        raise ConfigParse("synthetic requires a law (--law)")
    kwargs = {}
    if cfg.params.get("c") is not None:
        kwargs["c"] = float(cfg.params["c"])
    if cfg.params.get("period") is not None:
        kwargs["period"] = int(cfg.params["period"])
    if cfg.params.get("eps") is not None:
        kwargs["eps"] = float(cfg.params["eps"])
    if cfg.params.get("n") is not None:
        kwargs["n"] = int(cfg.params["n"])
    try:
        law = SyntheticLaw(kind=str(kind), seed=cfg.seed, **kwargs)
    except BarlabError:
        raise
    except TypeError as exc:
        raise ConfigParse(f"bad synthetic parameters: {exc}") from exc
    seq = generate(law, int(cfg.params.get("kmax", 10)))
    write_sequence_csv(seq, out / "sequence.csv")
    eps_grid = _parse_float_list(cfg.params.get("eps_grid", "0.5,0.25,0.125"))
    schedule = cfg.param("schedule", _parse_schedule)
    window = cfg.params.get("window")
    window = tuple(_parse_int_list(window)) if window is not None else None
    return ["sequence.csv"] + _entropy_artifacts(out, seq, cfg, eps_grid, schedule, window)


def _run_report(cfg: ExperimentConfig, out: Path) -> list[str]:
    """Aggregate run: curve growth, grid entropy, crossing integral, census."""
    spec = _spec(cfg)
    artifacts = []

    growth = iterate_curve(spec, vertical_circle(0.25), int(cfg.params.get("curve_k", 6)))
    h, poly = length_growth_rate(growth)

    sub = ExperimentConfig("entropy", dict(cfg.params), cfg.seed, str(out), cfg.budget)
    artifacts += _run_entropy(sub, out)
    report = json.loads((out / "report.json").read_text())

    crofton_cfg = ExperimentConfig(
        "crofton",
        {"K": cfg.params.get("K", 0.0), "k": cfg.params.get("k", 4),
         "quadrature": cfg.params.get("quadrature", 200)},
        cfg.seed, str(out), cfg.budget,
    )
    artifacts += _run_crofton(crofton_cfg, out)
    ratio = float((out / "crofton.csv").read_text().strip().split("\n")[1].split(",")[3])

    gamma_cfg = ExperimentConfig(
        "gamma",
        {"K": cfg.params.get("K", 0.0), "ks": cfg.params.get("gamma_ks", "1:3"),
         "threshold": cfg.params.get("threshold", 0.5)},
        cfg.seed, str(out), cfg.budget,
    )
    artifacts += _run_gamma(gamma_cfg, out)

    index = {
        "K": spec.K,
        "curve_growth_rate": h,
        "curve_poly_correction": poly,
        "barcode_entropy": report["barcode_entropy"],
        "crofton_ratio": ratio,
        "gamma_verdict": json.loads((out / "gamma.json").read_text()),
    }
    (out / "index.json").write_text(json.dumps(index, indent=2, sort_keys=True) + "\n")
    return artifacts + ["index.json"]


_RUNNERS = {
    "orbits": _run_orbits,
    "barcode": _run_barcode,
    "entropy": _run_entropy,
    "sequential": _run_sequential,
    "crofton": _run_crofton,
    "gamma": _run_gamma,
    "synthetic": _run_synthetic,
    "report": _run_report,
}


def run(config: ExperimentConfig) -> Path:
    """Execute one resolved experiment; returns the artifact directory."""
    if config.subcommand not in _RUNNERS:
        raise ConfigParse(f"unknown subcommand {config.subcommand!r}")
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    artifacts = _RUNNERS[config.subcommand](config, out)
    manifest = {
        "subcommand": config.subcommand,
        "inputs": {k: v for k, v in sorted(config.params.items()) if v is not None},
        "seed": config.seed,
        "budget": config.budget,
        "versions": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "barlab": __version__,
        },
        "wall_time_s": round(time.perf_counter() - t0, 3),
        "artifacts": sorted(artifacts),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return out


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

_COMMON = {
    "K": dict(type=str, help="kick strength of the map"),
    "ks": dict(type=str, help="iterate list, e.g. 2:6 or 1,2,4"),
    "k": dict(type=str, help="single iterate count"),
    "m": dict(type=str, help="winding class (orbits: list allowed)"),
    "n": dict(type=str, help="grid resolution / law parameter n"),
    "eps_grid": dict(type=str, help="comma-separated decreasing thresholds"),
    "schedule": dict(type=str, help="constant:EPS | power:EPS[:P] | exponential:EPS:ETA | explicit:K=EPS,..."),
    "window": dict(type=str, help="fit window, e.g. 2:6"),
    "quadrature": dict(type=str, help="quadrature node count"),
    "threshold": dict(type=str, help="no-shrinking fraction for the gamma series"),
    "law": dict(type=str, help="synthetic law kind"),
    "c": dict(type=str, help="bits per iterate (exponential law)"),
    "period": dict(type=str, help="period (almost-periodic law)"),
    "eps": dict(type=str, help="perturbation scale (almost-periodic law)"),
    "kmax": dict(type=str, help="largest iterate to generate"),
    "curve_k": dict(type=str, help="curve iterations for the growth fit"),
    "gamma_ks": dict(type=str, help="iterate list for the census block"),
}

_SUBCOMMAND_FLAGS = {
    "orbits": ["K", "k", "m"],
    "barcode": ["K", "k", "m", "n"],
    "entropy": ["K", "ks", "m", "eps_grid", "schedule", "window"],
    "sequential": ["K", "ks", "m", "eps_grid", "schedule", "window"],
    "crofton": ["K", "k", "quadrature", "ks", "schedule"],
    "gamma": ["K", "ks", "threshold"],
    "synthetic": ["law", "c", "period", "eps", "n", "kmax", "eps_grid", "schedule", "window"],
    "report": ["K", "ks", "m", "eps_grid", "window", "k", "quadrature", "gamma_ks", "threshold", "curve_k"],
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="barlab",
        description="Barcode-growth laboratory: deterministic batch experiments.",
        epilog="Precedence: command-line flag > config-file value > default.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name, keys in _SUBCOMMAND_FLAGS.items():
        p = sub.add_parser(name)
        p.add_argument("--config", type=str, default=None, help="JSON config file")
        p.add_argument("--seed", type=int, default=None, help="reproducibility seed")
        p.add_argument("--out", type=str, default=None, help="artifact directory")
        p.add_argument("--budget", type=int, default=None, help="grid cell budget")
        for key in keys:
            p.add_argument(f"--{key.replace('_', '-')}", dest=key, default=None,
                           **_COMMON[key])
    return parser


def _resolve(args: argparse.Namespace) -> ExperimentConfig:
    file_values = _load_config_file(args.config) if args.config else {}
    keys = _SUBCOMMAND_FLAGS[args.subcommand]
    reserved = {"seed", "out", "budget"}
    unknown = set(file_values) - set(keys) - reserved
    if unknown:
        raise ConfigParse(
            f"unknown config keys for {args.subcommand}: {sorted(unknown)}"
        )
    params = {}
    for key in keys:
        flag = getattr(args, key)
        value = flag if flag is not None else file_values.get(key)
        if value is not None:
            params[key] = value

    def pick(name, default):
        flag = getattr(args, name)
        return flag if flag is not None else file_values.get(name, default)

    try:
        seed = int(pick("seed", 0))
        budget = int(pick("budget", 300_000))
    except (TypeError, ValueError) as exc:
        raise ConfigParse(f"seed and budget must be integers: {exc}") from exc
    return ExperimentConfig(
        subcommand=args.subcommand,
        params=params,
        seed=seed,
        out=str(pick("out", "out")),
        budget=budget,
    )


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        out = run(_resolve(args))
    except BudgetExceeded as exc:
        print(f"budget refusal: {exc}", file=sys.stderr)
        return 3
    except BarlabError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
