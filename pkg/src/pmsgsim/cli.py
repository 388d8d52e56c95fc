"""Command-line front end.

    pmsgsim run CONFIG [--set section.key=value]... [--out DIR] [--gnuplot]
    pmsgsim compare BASELINE_DIR SUPPORTED_DIR
    pmsgsim sweep CONFIG --vary section.key=start:stop:step [--baseline DIR] [--out DIR]

CONFIG is a path to a scenario file or the name of a shipped scenario
(``reference``, ``reference_normal``, ``high_support``).

Exit codes: 0 ok, 2 parse error, 3 validation error, 4 run failure,
5 I/O error, 6 comparison mismatch or missing report.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from importlib import resources
from pathlib import Path

from .config import (ConfigError, ConfigParseError, ScenarioConfig, dump_ini, load_config,
                     reference_config)
from .sim import (ComparisonError, ScenarioReport, SimulationError, compare_runs,
                  simulate)

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_CONFIG = 3
EXIT_RUN = 4
EXIT_IO = 5
EXIT_COMPARE = 6

CSV_NAME = "timeseries.csv"
REPORT_NAME = "report.json"
CONFIG_NAME = "config.ini"
PLOT_NAME = "plots.gp"


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def shipped_scenarios() -> list[str]:
    root = resources.files("pmsgsim.scenarios")
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".ini"))


def resolve_config(source: str, overrides=()) -> ScenarioConfig:
    """Load ``source`` as a file, falling back to a shipped scenario name."""
    try:
        if not Path(source).exists() and source in shipped_scenarios():
            return reference_config(source, overrides)
        return load_config(source, overrides)
    except ConfigParseError as exc:
        raise CliError(EXIT_PARSE, f"parse error: {exc}") from None
    except ConfigError as exc:
        raise CliError(EXIT_CONFIG, f"invalid configuration: {exc}") from None


# -- output -------------------------------------------------------------------

def _prepare_dir(out: Path) -> None:
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write to {out}: {exc}") from None


def _report_dict(report: ScenarioReport, status: str, message: str = "") -> dict:
    data = report.as_dict() if report is not None else {}
    data["status"] = status
    if message:
        data["message"] = message
    return data


def write_report(path: Path, data: dict) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def read_report(run_dir: Path) -> ScenarioReport:
    path = Path(run_dir) / REPORT_NAME
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise CliError(EXIT_COMPARE, f"missing report: {path}") from None
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(EXIT_COMPARE, f"unreadable report {path}: {exc}") from None
    if data.get("status") != "ok":
        raise CliError(EXIT_COMPARE, f"{path}: run did not complete")
    names = {f.name for f in dataclasses.fields(ScenarioReport)}
    return ScenarioReport(**{k: v for k, v in data.items() if k in names})


def gnuplot_script(csv_name: str = CSV_NAME) -> str:
    panels = [
        (2, "PCC voltage [pu]"),
        (3, "DC-link voltage [V]"),
        (4, "Active power [W]"),
        (5, "Reactive power [var]"),
        (6, "Grid current RMS [A]"),
        (7, "Rotor speed [rad/s]"),
    ]
    lines = [
        "# gnuplot -p plots.gp",
        'set datafile separator ","',
        "set key off",
        "set grid",
        'set xlabel "t [s]"',
        f"set multiplot layout {len(panels)},1",
    ]
    for col, title in panels:
        lines.append(f'set ylabel "{title}"')
        lines.append(f'plot "{csv_name}" using 1:{col} every ::1 with lines')
    lines.append("unset multiplot")
    return "\n".join(lines) + "\n"


def execute(cfg: ScenarioConfig, out: Path, gnuplot: bool = False) -> ScenarioReport:
    """Run ``cfg`` and write its artifacts into ``out``.

    On a failed run the partial series and a failure report are still
    written before CliError(EXIT_RUN) is raised.
    """
    _prepare_dir(out)
    try:
        (out / CONFIG_NAME).write_text(dump_ini(cfg))
        if gnuplot:
            (out / PLOT_NAME).write_text(gnuplot_script())
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write to {out}: {exc}") from None
    try:
        result = simulate(cfg)
    except SimulationError as exc:
        try:
            if exc.series is not None:
                exc.series.to_csv(out / CSV_NAME)
            write_report(out / REPORT_NAME, {"status": "failed", "message": str(exc),
                                              "config_hash": cfg.digest()})
        except OSError:
            pass
        raise CliError(EXIT_RUN, f"run failed: {exc}") from None
    try:
        result.series.to_csv(out / CSV_NAME)
        write_report(out / REPORT_NAME, _report_dict(result.report, "ok"))
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write to {out}: {exc}") from None
    return result.report


def _fmt(value) -> str:
    if value is None:
        return "n/a"
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


# -- commands -----------------------------------------------------------------

def cmd_run(args) -> int:
    cfg = resolve_config(args.config, args.set)
    out = Path(args.out)
    report = execute(cfg, out, args.gnuplot)
    print(f"wrote {out / CSV_NAME}")
    for key in ("sag_depth_pu", "v_dc_max_dev_pu", "p_ss", "q_peak"):
        print(f"{key} = {_fmt(getattr(report, key))}")
    return EXIT_OK


def comparison(baseline: ScenarioReport, supported: ScenarioReport) -> dict:
    try:
        pct = compare_runs(baseline, supported)
    except ComparisonError as exc:
        raise CliError(EXIT_COMPARE, f"runs are not comparable: {exc}") from None
    return {
        "baseline_sag_depth_pu": baseline.sag_depth_pu,
        "supported_sag_depth_pu": supported.sag_depth_pu,
        "baseline_sag_pu": max(1.0 - baseline.sag_depth_pu, 0.0),
        "supported_sag_pu": max(1.0 - supported.sag_depth_pu, 0.0),
        "improvement_pct": pct,
    }


def cmd_compare(args) -> int:
    result = comparison(read_report(Path(args.baseline)), read_report(Path(args.supported)))
    for key, value in result.items():
        print(f"{key} = {_fmt(value)}")
    return EXIT_OK


def parse_vary(text: str) -> tuple[str, list[float]]:
    """``section.key=start:stop:step`` -> (key, values), stop inclusive."""
    try:
        key, rng = text.split("=", 1)
        start, stop, step = (float(p) for p in rng.split(":"))
    except ValueError:
        raise CliError(EXIT_PARSE, f"--vary {text!r} is not of the form key=start:stop:step") from None
    if step <= 0 or stop < start or not all(map(math.isfinite, (start, stop, step))):
        raise CliError(EXIT_PARSE, f"--vary {text!r}: need step > 0 and stop >= start")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return key.strip(), [start + i * step for i in range(n)]


def cmd_sweep(args) -> int:
    key, values = parse_vary(args.vary)
    configs = [resolve_config(args.config, [*args.set, f"{key}={v!r}"]) for v in values]
    baseline = read_report(Path(args.baseline)) if args.baseline else None
    out = Path(args.out)
    _prepare_dir(out)
    dirs = [out / f"{key}={v:g}" for v in values]

    def one(i):
        return execute(configs[i], dirs[i])

    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        reports = list(pool.map(one, range(len(values))))

    rows = []
    for v, d, rep in zip(values, dirs, reports):
        pct = comparison(baseline, rep)["improvement_pct"] if baseline else None
        rows.append((v, d.name, rep.sag_depth_pu, rep.v_dc_max_dev_pu, pct))
        print(f"{key}={v:g}  sag_depth_pu={_fmt(rep.sag_depth_pu)}  "
              f"v_dc_max_dev_pu={_fmt(rep.v_dc_max_dev_pu)}  improvement_pct={_fmt(pct)}")
    try:
        with open(out / "sweep.csv", "w") as fh:
            fh.write(f"{key},run_dir,sag_depth_pu,v_dc_max_dev_pu,improvement_pct\n")
            for row in rows:
                fh.write(",".join("" if x is None else (x if isinstance(x, str) else repr(x))
                                  for x in row) + "\n")
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write sweep summary: {exc}") from None
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pmsgsim", description="Direct-drive PMSG wind turbine grid-support simulator.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one scenario")
    run.add_argument("config", help="scenario file or shipped scenario name")
    run.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                     help="override a parameter, e.g. fault.r_fault=0.1")
    run.add_argument("--out", default="run", help="output directory (default: ./run)")
    run.add_argument("--gnuplot", action="store_true", help="also write plots.gp")
    run.set_defaults(func=cmd_run)

    cmp_ = sub.add_parser("compare", help="sag improvement of a supported run over a baseline")
    cmp_.add_argument("baseline", help="run directory of the turbine-disconnected run")
    cmp_.add_argument("supported", help="run directory of the supported run")
    cmp_.set_defaults(func=cmd_compare)

    sweep = sub.add_parser("sweep", help="run a scenario over a range of one parameter")
    sweep.add_argument("config")
    sweep.add_argument("--vary", required=True, metavar="KEY=START:STOP:STEP")
    sweep.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    sweep.add_argument("--baseline", help="baseline run directory for improvement_pct")
    sweep.add_argument("--out", default="sweep")
    sweep.add_argument("--jobs", type=int, default=1, help="worker threads")
    sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"pmsgsim: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
