"""Command-line surface: INI configs in, deterministic CSV/JSON out.

    berryion <berry|protocol|readout|cat|feasibility|sweep> --config cfg.ini
             [--out DIR] [--workers K] [--svg]

Exit codes: 0 success, 2 config error, 3 numeric-contract violation; on
failure a single JSON error object is written to stderr.  Dynamics
configs are dimensionless (g_a = 1, times as Omega*T/pi); feasibility
configs take frequencies in Hz and times in seconds.  Reruns of the same
config produce byte-identical CSV/JSON, independent of the worker count.
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .bosonic import TruncationError
from .evolve import Schedule
from .hilbert import NumericsError, QSpace
from .model import Couplings, TrapParams, QUARTER_HANNAY_R
from .phases import LoopSpec, berry_phase_analytic, eigenstate_loop, wilson_loop_phase, wrap_angle
from .protocol import (
    BE9_PARAMS,
    CA40_PARAMS,
    analytic_readout,
    feasibility_check,
    measure_berry_adiabatic,
    run_cat,
    run_phase_reversal,
    run_fock_superposition,
    run_readout,
)
from .bosonic import coherent_state

SCHEMA_VERSION = 1
COMMANDS = ("berry", "protocol", "readout", "cat", "feasibility", "sweep")


class ConfigError(ValueError):
    pass


def _fmt(x) -> str:
    """Full-precision scientific notation, 17 significant digits."""
    return f"{float(x):.16e}"


def write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) if isinstance(v, (int, float, np.floating)) else str(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def write_json(path: Path, payload: dict) -> None:
    payload = {"schema_version": SCHEMA_VERSION, **payload}
    path.write_text(json.dumps(payload, sort_keys=True, indent=2, default=float) + "\n")


def write_svg(csv_path: Path) -> None:
    """Minimal deterministic polyline chart of a CSV (first column is x)."""
    rows = csv_path.read_text().strip().splitlines()
    header = rows[0].split(",")
    try:
        data = np.array([[float(v) for v in r.split(",")] for r in rows[1:]])
    except ValueError:
        return  # non-numeric table; nothing to plot
    if data.size == 0 or data.shape[1] < 2:
        return
    w, h, pad = 640, 400, 50
    x = data[:, 0]
    xr = (x.min(), x.max() if x.max() > x.min() else x.min() + 1)
    ys = data[:, 1:]
    finite = ys[np.isfinite(ys)]
    if finite.size == 0:
        return
    yr = (finite.min(), finite.max() if finite.max() > finite.min() else finite.min() + 1)
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b", "#e377c2"]

    def sx(v):
        return pad + (v - xr[0]) / (xr[1] - xr[0]) * (w - 2 * pad)

    def sy(v):
        return h - pad - (v - yr[0]) / (yr[1] - yr[0]) * (h - 2 * pad)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}">',
        f'<rect width="{w}" height="{h}" fill="white"/>',
        f'<line x1="{pad}" y1="{h-pad}" x2="{w-pad}" y2="{h-pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{h-pad}" stroke="black"/>',
    ]
    for j in range(ys.shape[1]):
        col = ys[:, j]
        pts = " ".join(
            f"{sx(xv):.2f},{sy(yv):.2f}" for xv, yv in zip(x, col) if np.isfinite(yv)
        )
        color = colors[j % len(colors)]
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        parts.append(
            f'<text x="{w - pad + 4}" y="{pad + 14 * j + 10}" font-size="10" fill="{color}">{header[j + 1]}</text>'
        )
    parts.append("</svg>")
    csv_path.with_suffix(".svg").write_text("\n".join(parts) + "\n")


def _load_config(path: str) -> configparser.ConfigParser:
    cp = configparser.ConfigParser()
    read = cp.read(path)
    if not read:
        raise ConfigError(f"config file not found or unreadable: {path}")
    return cp


def _get(cp, section, key, cast, default=None):
    if not cp.has_section(section) and default is None:
        raise ConfigError(f"missing [{section}] section")
    if not cp.has_option(section, key):
        if default is None:
            raise ConfigError(f"missing key {key!r} in [{section}]")
        return default
    raw = cp.get(section, key)
    try:
        if cast is bool:
            return raw.strip().lower() in ("1", "true", "yes", "on")
        return cast(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from exc


def _floats(raw: str) -> list[float]:
    return [float(v) for v in raw.replace(";", ",").split(",") if v.strip()]


def _ints(raw: str) -> list[int]:
    return [int(v) for v in raw.replace(";", ",").split(",") if v.strip()]


def _space_from(cp) -> QSpace:
    return QSpace(
        fock_dim=_get(cp, "space", "fock_dim", int, 32),
        internal_dim=_get(cp, "space", "internal_dim", int, 2),
        trunc_margin=_get(cp, "space", "trunc_margin", int, 6),
    )


def _couplings_from(cp) -> Couplings:
    g_a = _get(cp, "couplings", "g_a", float, 1.0)
    if cp.has_option("couplings", "g_b"):
        return Couplings(g_a=g_a, g_b=_get(cp, "couplings", "g_b", float))
    sinh2 = _get(cp, "couplings", "sinh2_r", float, 0.25)
    return Couplings.from_squeezing(float(np.arcsinh(math.sqrt(sinh2))), g_a=g_a)


def _schedule_from(cp, c: Couplings, cycles_default: int = 2, flip: bool = True) -> Schedule:
    omega_t_over_pi = _get(cp, "schedule", "omega_t_over_pi", float, 60.0)
    cycles = _get(cp, "schedule", "cycles", int, cycles_default)
    return Schedule(
        T=omega_t_over_pi * math.pi / c.Omega,
        cycles=cycles,
        ramp=_get(cp, "schedule", "ramp", str, "smoothstep"),
        steps_per_cycle=_get(cp, "schedule", "steps_per_cycle", int, 3000),
        flip_after_cycle=(cycles // 2 - 1 if cycles >= 2 else None) if flip else None,
    )


def cmd_berry(cp, out: Path, workers: int, svg: bool) -> int:
    space = _space_from(cp)
    n_values = _ints(_get(cp, "berry", "n_values", str, "0,1,2,3,4,5"))
    r_values = _floats(_get(cp, "berry", "r_values", str, f"0.2,{QUARTER_HANNAY_R!r}"))
    samples = _get(cp, "berry", "loop_samples", int, 1000)
    adiabatic_n = set(_ints(_get(cp, "berry", "adiabatic_n_values", str, "0,1,2")))
    do_adiabatic = _get(cp, "berry", "adiabatic", bool, True)
    base_omega_t = _get(cp, "berry", "base_omega_t_over_pi", float, 60.0) * math.pi
    steps = _get(cp, "berry", "steps_per_cycle", int, 3000)
    rows = []
    for r in r_values:
        for n in n_values:
            analytic = berry_phase_analytic(n, r)
            loop = eigenstate_loop(n, +1, LoopSpec(r=r, samples=samples), space)
            wilson = wilson_loop_phase(loop)
            res_w = abs(wrap_angle(wilson - analytic))
            if do_adiabatic and n in adiabatic_n:
                ad = measure_berry_adiabatic(n, r, space, Omega_T_base=base_omega_t, steps_base=steps)
                g_ad, res_a = ad["gamma"], abs(ad["residual"])
            else:
                g_ad, res_a = float("nan"), float("nan")
            rows.append([n, r, analytic, wilson, g_ad, res_w, res_a])
    write_csv(out / "berry.csv", ["n", "r", "gamma_analytic", "gamma_wilson", "gamma_adiabatic", "res_wilson", "res_adiabatic"], rows)
    write_json(out / "berry_summary.json", {
        "command": "berry",
        "max_res_wilson": max(r[5] for r in rows),
        "rows": len(rows),
    })
    if svg:
        write_svg(out / "berry.csv")
    return 0


def _protocol_payload(report, c, sched) -> dict:
    return {
        "target_fidelity": report.target_fidelity,
        "raw_target_fidelity": report.raw_target_fidelity,
        "global_phase": report.global_phase,
        "vacuum_phase_removed": report.vacuum_phase_removed,
        "leakage_max": report.leakage_max,
        "omega_T": c.Omega * sched.T,
        "cycles": sched.cycles,
        "sector_ledger": [
            {
                "sector": s.sector,
                "weight": s.weight,
                "measured_phase": s.measured_phase,
                "predicted_phase": s.predicted_phase,
                "residual": s.residual,
            }
            for s in report.phase_ledger
        ],
    }


def cmd_protocol(cp, out: Path, workers: int, svg: bool) -> int:
    space = _space_from(cp)
    c = _couplings_from(cp)
    sched = _schedule_from(cp, c)
    variant = _get(cp, "protocol", "variant", str, "coherent")
    alpha = _get(cp, "protocol", "alpha", float, 1.0)
    ramp_sq = _get(cp, "protocol", "ramp_squeezing", bool, True)
    vac = _get(cp, "protocol", "vacuum_phase_correction", bool, True)
    if variant == "coherent":
        report = run_phase_reversal(alpha, c, sched, space, ramp_squeezing=ramp_sq, vacuum_correction=vac)
    elif variant == "fock01":
        report = run_fock_superposition(c, sched, space, ramp_squeezing=ramp_sq, vacuum_correction=vac)
    else:
        raise ConfigError(f"unknown protocol variant {variant!r} (coherent or fock01)")
    payload = {"command": "protocol", "variant": variant, "alpha": alpha, **_protocol_payload(report, c, sched)}
    write_json(out / "protocol_summary.json", payload)
    rows = [[s.sector, s.weight, s.measured_phase, s.predicted_phase, s.residual] for s in report.phase_ledger]
    write_csv(out / "protocol_sectors.csv", ["sector", "weight", "measured_phase", "predicted_phase", "residual"], rows)
    return 0


def cmd_readout(cp, out: Path, workers: int, svg: bool) -> int:
    space = _space_from(cp)
    alpha = _get(cp, "readout", "alpha", float, 1.0)
    omega0 = _get(cp, "readout", "omega0", float, 1.0)
    t_max = _get(cp, "readout", "t_max_over_pi", float, 4.0) * math.pi / omega0
    samples = _get(cp, "readout", "samples", int, 160)
    branch = _get(cp, "readout", "branch", str, "berry")
    if branch == "berry":
        final = coherent_state(-alpha, "g", space)
    elif branch == "none":
        final = coherent_state(alpha, "g", space)
    else:
        raise ConfigError(f"unknown readout branch {branch!r} (berry or none)")
    times = np.linspace(0.0, t_max, samples)
    p_sim = run_readout(final, alpha, omega0, times, space)
    p_an = analytic_readout(final, alpha, omega0, times, space)
    rows = [[t, ps, pa] for t, ps, pa in zip(times, p_sim, p_an)]
    write_csv(out / "readout.csv", ["t", "p_e_sim", "p_e_analytic"], rows)
    write_json(out / "readout_summary.json", {
        "command": "readout",
        "branch": branch,
        "alpha": alpha,
        "max_abs_deviation": float(np.max(np.abs(p_sim - p_an))),
        "max_p_e": float(np.max(p_sim)),
        "vacuum_overlap_with_displaced": float(math.exp(-4 * abs(alpha) ** 2)),
    })
    if svg:
        write_svg(out / "readout.csv")
    return 0


def cmd_cat(cp, out: Path, workers: int, svg: bool) -> int:
    cp_space = QSpace(
        fock_dim=_get(cp, "space", "fock_dim", int, 32),
        internal_dim=3,
        trunc_margin=_get(cp, "space", "trunc_margin", int, 6),
    )
    c = _couplings_from(cp)
    sched = _schedule_from(cp, c)
    alpha = _get(cp, "cat", "alpha", float, 1.0)
    report = run_cat(alpha, c, sched, cp_space)
    payload = {
        "command": "cat",
        "alpha": alpha,
        "branch_relative_phase": report.branch_relative_phase,
        **_protocol_payload(report, c, sched),
    }
    write_json(out / "cat_summary.json", payload)
    return 0


def cmd_feasibility(cp, out: Path, workers: int, svg: bool) -> int:
    preset = _get(cp, "feasibility", "preset", str, "")
    if preset:
        if preset not in ("be9", "ca40"):
            raise ConfigError(f"unknown feasibility preset {preset!r}")
        tp = BE9_PARAMS if preset == "be9" else CA40_PARAMS
        T = _get(cp, "feasibility", "t_cycle_s", float, 1e-5 if preset == "be9" else 1e-4)
    else:
        two_pi = 2 * math.pi
        tp = TrapParams(
            eta12=_get(cp, "feasibility", "eta12", float),
            eta34=_get(cp, "feasibility", "eta34", float),
            Omega12=two_pi * _get(cp, "feasibility", "rabi12_hz", float),
            Omega34=two_pi * _get(cp, "feasibility", "rabi34_hz", float),
            nu=two_pi * _get(cp, "feasibility", "trap_hz", float),
            omega0=two_pi * _get(cp, "feasibility", "splitting_hz", float),
            T_motional=_get(cp, "feasibility", "t_motional_s", float),
            T_internal=_get(cp, "feasibility", "t_internal_s", float),
        )
        T = _get(cp, "feasibility", "t_cycle_s", float)
    cycles = _get(cp, "feasibility", "cycles", int, 2)
    rep = feasibility_check(tp, T, cycles=cycles)
    write_json(out / "feasibility.json", {
        "command": "feasibility",
        "preset": preset or None,
        "dynamical_timescale_s": rep.dynamical_timescale,
        "adiabaticity_ratio": rep.adiabaticity_ratio,
        "motional_margin": rep.motional_margin,
        "motional_margin_total": rep.motional_margin_total,
        "internal_margin": rep.internal_margin,
        "closure_m": rep.closure_m,
        "closure_residual": rep.closure_residual,
        "adjusted_T_s": rep.adjusted_T,
        "adjusted_residual": rep.adjusted_residual,
        "lamb_dicke_ratio": rep.lamb_dicke_ratio,
        "lamb_dicke_claimed": rep.lamb_dicke_claimed,
        "p3_squeezed_one": rep.p3_squeezed_one,
        "verdict": rep.verdict,
    })
    return 0


def _sweep_one(args: tuple) -> tuple:
    """Worker entry: one protocol run of the sweep (deterministic, stateless)."""
    idx, alpha, fock_dim, omega_t_over_pi, steps = args
    space = QSpace(fock_dim=fock_dim)
    c = Couplings.from_squeezing(QUARTER_HANNAY_R)
    sched = Schedule(
        T=omega_t_over_pi * math.pi / c.Omega,
        cycles=2,
        steps_per_cycle=steps,
        flip_after_cycle=0,
    )
    rep = run_phase_reversal(alpha, c, sched, space)
    return (idx, alpha, omega_t_over_pi, rep.target_fidelity, rep.raw_target_fidelity, rep.leakage_max)


def cmd_sweep(cp, out: Path, workers: int, svg: bool) -> int:
    fock_dim = _get(cp, "space", "fock_dim", int, 32)
    param = _get(cp, "sweep", "param", str, "alpha")
    steps = _get(cp, "sweep", "steps_per_cycle", int, 2000)
    if param == "alpha":
        values = _floats(_get(cp, "sweep", "values", str))
        omega_t = _get(cp, "sweep", "omega_t_over_pi", float, 60.0)
        tasks = [(i, v, fock_dim, omega_t, steps) for i, v in enumerate(values)]
    elif param == "omega_t_over_pi":
        values = _floats(_get(cp, "sweep", "values", str))
        alpha = _get(cp, "sweep", "alpha", float, 1.0)
        tasks = [(i, alpha, fock_dim, v, steps) for i, v in enumerate(values)]
    else:
        raise ConfigError(f"sweep param must be alpha or omega_t_over_pi, got {param!r}")
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_one, tasks))
    else:
        results = [_sweep_one(t) for t in tasks]
    results.sort(key=lambda row: row[0])
    rows = [[alpha, om, fid, raw, leak] for _, alpha, om, fid, raw, leak in results]
    write_csv(out / "sweep.csv", ["alpha", "omega_t_over_pi", "target_fidelity", "raw_target_fidelity", "leakage_max"], rows)
    write_json(out / "sweep_summary.json", {"command": "sweep", "param": param, "rows": len(rows)})
    if svg:
        write_svg(out / "sweep.csv")
    return 0


HANDLERS = {
    "berry": cmd_berry,
    "protocol": cmd_protocol,
    "readout": cmd_readout,
    "cat": cmd_cat,
    "feasibility": cmd_feasibility,
    "sweep": cmd_sweep,
}


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="berryion", description=__doc__)
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True)
    parser.add_argument("--out", default=".")
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--svg", action="store_true")
    args = parser.parse_args(argv)
    out = Path(args.out)
    try:
        cp = _load_config(args.config)
        out.mkdir(parents=True, exist_ok=True)
        return HANDLERS[args.command](cp, out, max(1, args.workers), args.svg)
    except (ConfigError, configparser.Error, ValueError) as exc:
        print(json.dumps({"error": {"type": "config", "message": str(exc)}}), file=sys.stderr)
        return 2
    except (NumericsError, TruncationError) as exc:
        print(json.dumps({"error": {"type": "numeric", "message": str(exc)}}), file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
