"""Command-line surface: subcommands, config loading, manifest runner.

Numeric submodules are imported inside the command bodies so that `--threads`
can pin the BLAS pool before numpy first loads. Exit codes: 0 success,
2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import json
import os
import sys
import time
from pathlib import Path

import click

EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _set_threads(n: int) -> None:
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                "NUMEXPR_NUM_THREADS", "VECLIB_MAXIMUM_THREADS"):
        os.environ[var] = str(n)


def _parse_set(pairs) -> dict:
    """KEY=VALUE options; VALUE parsed as JSON, falling back to raw string."""
    out = {}
    for item in pairs:
        if "=" not in item:
            raise click.UsageError(f"--set needs KEY=VALUE, got {item!r}")
        key, _, val = item.partition("=")
        try:
            out[key] = json.loads(val)
        except json.JSONDecodeError:
            out[key] = val
    return out


def _parse_grid(pairs) -> dict:
    """KEY=START:STOP:N[:log] axes, or KEY=[json list]."""
    import numpy as np

    out = {}
    for item in pairs:
        if "=" not in item:
            raise click.UsageError(f"--grid needs KEY=SPEC, got {item!r}")
        key, _, spec = item.partition("=")
        if spec.startswith("["):
            out[key] = [float(v) for v in json.loads(spec)]
            continue
        parts = spec.split(":")
        if len(parts) not in (3, 4):
            raise click.UsageError(
                f"grid spec {spec!r} is not START:STOP:N[:log]")
        a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
        if len(parts) == 4 and parts[3] == "log":
            sign = -1.0 if a < 0 else 1.0
            if a * b <= 0:
                raise click.UsageError("log grid endpoints must share a sign")
            vals = sign * np.geomspace(abs(a), abs(b), n)
        else:
            vals = np.linspace(a, b, n)
        out[key] = [float(v) for v in vals]
    return out


def _load_config_file(path) -> dict:
    from .errors import ConfigInvalid

    if path is None:
        raise ConfigInvalid("config", "a --config file is required")
    p = Path(path)
    if not p.exists():
        raise ConfigInvalid("config", f"no such file: {p}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as e:
        raise ConfigInvalid("config", f"not valid JSON: {e}")


def _model_from(config: dict):
    from .model import load_config

    return load_config(config)


def _tag(combo: dict) -> str:
    if not combo:
        return "single"
    return "_".join(f"{k}{v:+.6g}" if isinstance(v, float) else f"{k}{v}"
                    for k, v in sorted(combo.items()))


def _require_seed(seeds, what: str):
    from .errors import MissingInput

    if not seeds:
        raise MissingInput(f"{what} needs a solution file via --seed-file")
    return seeds[0]


def _load_pulse(seeds, config):
    """Pulse solution from the first seed file, or computed fresh."""
    from . import shooting
    from .io import load_solution

    if seeds:
        sol, params = load_solution(seeds[0])
        return sol, params
    params, _bump = _model_from(config)
    return shooting.find_stationary_pulse(params), params


def _bump_with(bump, **overrides):
    from dataclasses import replace

    from .errors import ConfigInvalid
    from .model import HeterogeneityBump

    if bump is None:
        missing = {"epsilon", "d"} - set(overrides)
        if missing:
            raise ConfigInvalid("bump", f"config has no bump and the command "
                                        f"did not supply {sorted(missing)}")
        return HeterogeneityBump(**overrides)
    return replace(bump, **overrides) if overrides else bump


# ------------------------------------------------------------- command cores
# Every core has the same shape: core(config, opts, seeds, layout) -> summary
# fragment. Grid axes arrive as scalar entries inside opts (one task per
# combination); file outputs land inside the layout directories.

def _core_simulate(config: dict, opts: dict, seeds, layout) -> dict:
    import numpy as np

    from . import spectral
    from .io import write_json17, write_table_csv
    from .model import solve_background

    params, bump = _model_from(config)
    overrides = {k: opts[k] for k in ("epsilon", "d", "gamma", "center")
                 if k in opts}
    if bump is not None or overrides:
        bump = _bump_with(bump, **overrides)

    t_end = float(opts.get("t_end", 2000.0))
    dt = float(opts.get("dt", 2e-3))
    sample_dt = float(opts.get("sample_dt", 0.5))

    if seeds:
        from .io import load_solution
        sol, seed_params = load_solution(seeds[0])
        if abs(seed_params.domain_length - params.domain_length) > 1e-12 or \
                seed_params.n_modes != params.n_modes:
            from .errors import ConfigInvalid
            raise ConfigInvalid("seed", "seed grid differs from config grid")
        state = sol.state
    else:
        from . import shooting
        state = shooting.find_stationary_pulse(params).state

    if "offset" in opts and bump is not None:
        u_bar = solve_background(params, params.kappa1_base).u_bar
        pos, _ = spectral.track_pulse(state, params, u_bar)
        target = bump.resolved_center(params.domain_length) - float(opts["offset"])
        state = spectral.translate(state, target - pos, params.domain_length)

    traj = spectral.run_collision(state, params, bump, t_end, sample_dt, dt=dt)
    tag = opts.get("tag", _tag({k: v for k, v in opts.items()
                                if k in ("epsilon", "d")}))
    csv_path = write_table_csv(
        ["t", "position", "velocity"],
        np.column_stack([traj.t, traj.position, traj.velocity]).tolist(),
        layout["trajectories"] / f"sim_{tag}.csv")
    fin = traj.final_state
    state_path = write_json17(
        {"time": fin.time, "coeffs_re": fin.coeffs.real,
         "coeffs_im": fin.coeffs.imag},
        layout["trajectories"] / f"sim_{tag}_final.json")
    frag = {"trajectory": str(csv_path), "final_state": str(state_path),
            "final_position": float(traj.position[-1])}

    if bump is not None and "free_speed" in opts:
        from .outcomes import ClassifyThresholds, classify
        th = ClassifyThresholds(
            window=float(opts.get("window", 0.25 * params.domain_length)),
            free_speed=float(opts["free_speed"]),
            t_settle=float(opts.get("t_settle", 200.0)))
        out = classify(traj, bump, th, domain_length=params.domain_length)
        frag["outcome"] = {"kind": out.kind, "pin_location": out.pin_location,
                           "period": out.period}
    return frag


def _core_solve(config: dict, opts: dict, seeds, layout) -> dict:
    from . import shooting

    params, bump = _model_from(config)
    kind_names = {
        "steady": shooting.STEADY,
        "traveling": shooting.STEADY_TRAVELING,
        "periodic": shooting.TIME_PERIODIC,
        "periodic-traveling": shooting.PERIODIC_TRAVELING,
    }
    kind = kind_names.get(str(opts.get("kind", "steady")))
    if kind is None:
        from .errors import ConfigInvalid
        raise ConfigInvalid("kind", f"unknown solution kind {opts.get('kind')!r}")

    kappa1 = None
    if bump is not None:
        from .model import kappa1_field
        kappa1 = kappa1_field(params, bump)

    if seeds:
        from .io import load_solution
        seed_sol, _ = load_solution(seeds[0])
        seed_state = seed_sol.state
        U0, beta0 = seed_sol.U, seed_sol.beta
    else:
        base = shooting.find_stationary_pulse(params, kappa1=kappa1)
        seed_state, U0, beta0 = base.state, 0.0, None
        if kind == shooting.STEADY:
            frag = _describe_solution(base, params, bump, opts, layout)
            return frag
    if kind == shooting.STEADY_TRAVELING and abs(U0) < 1e-12:
        stat = shooting.ConvergedSolution(
            state=seed_state, kind=shooting.STEADY, U=0.0, beta=None,
            residual=0.0, parameter_tag=None, iterations=0)
        seed_state, U0 = shooting.traveling_seed(stat, params,
                                                 opts.get("U0"))

    target = shooting.ShootingTarget(
        kind=kind, U_guess=float(opts.get("U0", U0 or 0.0)),
        beta_guess=(float(opts["beta0"]) if "beta0" in opts else beta0))
    sol = shooting.solve(seed_state, target, params, kappa1,
                         dt_hint=float(opts.get("dt", 5e-3)))
    return _describe_solution(sol, params, bump, opts, layout)


def _describe_solution(sol, params, bump, opts, layout) -> dict:
    from . import shooting
    from .io import save_solution

    extra = {}
    if opts.get("stability", True):
        kappa1 = None
        if bump is not None:
            from .model import kappa1_field
            kappa1 = kappa1_field(params, bump)
        from .continuation import count_unstable
        spec = shooting.stability(sol, params, kappa1,
                                  n_requested=int(opts.get("n_eig", 6)),
                                  horizon=float(opts.get("horizon", 1.0)))
        extra["eigenvalues"] = [{"re": ev.real, "im": ev.imag}
                                for ev in spec.eigenvalues]
        extra["n_unstable"] = count_unstable(spec.eigenvalues)
    tag = opts.get("tag", sol.kind.lower())
    path = save_solution(sol, layout["root"] / f"solution_{tag}.json",
                         params, bump=bump, extra=extra)
    return {"solution": str(path), "kind": sol.kind, "U": sol.U,
            "beta": sol.beta, "residual": sol.residual, **extra}


def _core_continue(config: dict, opts: dict, seeds, layout) -> dict:
    from . import continuation
    from .io import load_solution, write_branch_csv

    params, bump = _model_from(config)
    parameter = str(opts.get("parameter", "kappa1"))
    sol, seed_params = load_solution(_require_seed(seeds, "continue"))

    if parameter == "kappa1":
        start_param = float(opts.get("start_param", params.kappa1_base))
    elif parameter == "epsilon":
        if bump is None:
            from .errors import ConfigInvalid
            raise ConfigInvalid("bump", "epsilon continuation needs a bump")
        start_param = float(opts.get("start_param", bump.epsilon))
    else:
        from .errors import ConfigInvalid
        raise ConfigInvalid("parameter", f"unknown parameter {parameter!r}")

    step = continuation.StepControl(
        initial=float(opts.get("step", 2e-4)),
        min=float(opts.get("step_min", 1e-7)),
        max=float(opts.get("step_max", 1e-3)))
    rng = opts.get("param_range")
    stop = continuation.StopRules(
        param_range=(tuple(float(v) for v in rng) if rng
                     else (-float("inf"), float("inf"))),
        max_points=int(opts.get("max_points", 400)))
    branch = continuation.continue_branch(
        sol, parameter, params, start_param=start_param,
        direction=float(opts.get("direction", 1.0)), step=step, stop=stop,
        bump=bump, n_eig=int(opts.get("n_eig", 6)),
        with_stability=bool(opts.get("stability", True)),
        dt_hint=float(opts.get("dt", 5e-3)))
    tag = opts.get("tag", f"{parameter}_{_tag({})}")
    path = write_branch_csv(branch.to_rows(),
                            layout["branches"] / f"{tag}.csv")
    events = [{"kind": e.kind, "param": e.param, "point_index": e.point_index,
               "note": e.note} for e in branch.events]
    return {"branch": str(path), "n_points": len(branch.points),
            "closed": branch.closed, "events": events,
            "param_span": [min(p.param for p in branch.points),
                           max(p.param for p in branch.points)]}


def _core_hiop_atlas(config: dict, opts: dict, seeds, layout) -> dict:
    from . import continuation
    from .io import load_solution, write_branch_csv, write_json17

    params, bump = _model_from(config)
    d = float(opts.get("d", bump.d if bump is not None else 0.05))
    gamma = float(opts.get("gamma", bump.gamma if bump is not None else 100.0))
    rng = opts.get("epsilon_range", (-0.035866, 0.012))
    seed_states = []
    for path in seeds:
        sol, _ = load_solution(path)
        seed_states.append((Path(path).stem, sol.state))
    if not seed_states:
        from .errors import MissingInput
        raise MissingInput("hiop-atlas needs at least one --seed-file")

    step = continuation.StepControl(
        initial=float(opts.get("step", 2e-4)),
        min=float(opts.get("step_min", 1e-7)),
        max=float(opts.get("step_max", 1e-3)))
    stop = continuation.StopRules(max_points=int(opts.get("max_points", 400)))
    atlas = continuation.hiop_atlas(
        params, seed_states, tuple(float(v) for v in rng), bump_d=d,
        bump_gamma=gamma, step=step, stop_extra=stop,
        with_stability=bool(opts.get("stability", True)),
        dt_hint=float(opts.get("dt", 5e-3)))
    written = []
    for br in atlas["branches"]:
        path = write_branch_csv(br.to_rows(),
                                layout["branches"] / f"atlas_{br.label}.csv")
        written.append(str(path))
    hubs_path = write_json17({"hubs": atlas["hubs"],
                              "failures": [str(f) for f in atlas["failures"]]},
                             layout["root"] / "atlas_hubs.json")
    return {"branches": written, "hubs": str(hubs_path),
            "n_branches": len(atlas["branches"]),
            "n_failures": len(atlas["failures"])}


def _core_reduced(config: dict, opts: dict, seeds, layout) -> dict:
    import numpy as np

    from . import reduced
    from .io import write_json17, write_table_csv

    params, bump = _model_from(config)
    task = str(opts.get("task", "summary"))
    d = float(opts.get("d", bump.d if bump is not None else 0.05))
    pulse, pulse_params = _load_pulse(seeds, config)
    sys_r = reduced.build_reduced(pulse, pulse_params, d=d)

    if task == "summary":
        doc = {"C1": sys_r.C1, "C2": sys_r.C2, "tau_hat": sys_r.tau_hat,
               "alpha_plus": sys_r.alpha_plus, "free_speed": sys_r.free_speed(),
               "pen_bound": sys_r.pen_bound(), "M0": sys_r.M0,
               "tail": {"a": sys_r.tail.a, "b": sys_r.tail.b,
                        "zero_spacing": sys_r.tail.zero_spacing()}}
        path = write_json17(doc, layout["diagrams"] / "reduced_summary.json")
        return {"summary": str(path), **doc}

    if task == "landmarks":
        marks = reduced.nonsaddle_threshold_landmarks(sys_r.C1, sys_r.kappa3)
        path = write_json17(marks, layout["diagrams"] / "reduced_landmarks.json")
        return {"landmarks": str(path), **marks}

    if task == "critical-points":
        eps = float(opts["epsilon"])
        pts = reduced.critical_points(sys_r, eps)
        rows = [[c.index, c.p, c.D, c.kind, c.eigenvalues[0].real,
                 c.eigenvalues[0].imag] for c in pts]
        path = write_table_csv(["index", "p", "D", "kind", "eig_re", "eig_im"],
                               rows, layout["diagrams"] / "critical_points.csv")
        return {"critical_points": str(path), "n": len(pts)}

    if task == "orbit":
        from .outcomes import classify_reduced
        eps = float(opts["epsilon"])
        traj = reduced.pulse_orbit(sys_r, eps, t_end=opts.get("t_end"))
        out = classify_reduced(sys_r, traj)
        path = write_table_csv(
            ["t", "p", "alpha"],
            np.column_stack([traj.t, traj.p, traj.alpha]).tolist(),
            layout["trajectories"] / f"orbit_eps{eps:+.6g}.csv")
        return {"orbit": str(path), "outcome": out.kind,
                "pin_location": out.pin_location, "period": out.period}

    if task == "transitions":
        grid = opts.get("epsilon_grid")
        if grid is None:
            from .errors import MissingInput
            raise MissingInput("transitions task needs an epsilon grid")
        rows, events = reduced.transition_scan(
            sys_r, [float(v) for v in grid],
            refine_tol=float(opts.get("refine_tol", 1e-7)))
        path = write_table_csv(["epsilon", "outcome"], rows,
                               layout["diagrams"] / "transitions.csv")
        ev_path = write_json17({"events": events},
                               layout["diagrams"] / "transition_events.json")
        return {"table": str(path), "events_file": str(ev_path),
                "events": events}

    if task == "basin":
        from .io import export_figure_data
        eps = float(opts["epsilon"])
        span = float(opts.get("p_span", 0.12))
        a_span = float(opts.get("alpha_span", 2.5 * sys_r.alpha_plus))
        res = int(opts.get("resolution", 41))
        part = reduced.basin_boundary(
            sys_r, eps, ((-span, span), (-a_span, a_span)),
            resolution=(res, res))
        part_doc = {
            "labels": part["labels"].tolist(),
            "p_grid": part["p_grid"], "alpha_grid": part["alpha_grid"],
            "boundary": {k: v.points for k, v in part["boundary"].items()},
            "reverse_destination": {k: str(v) for k, v in
                                    part["reverse_destination"].items()},
        }
        raw = write_json17(part_doc, layout["diagrams"] / "basin.json")
        files = export_figure_data("basin", {"partition": part_doc},
                                   layout["diagrams"], stem="basin")
        return {"basin": str(raw), "files": [str(f) for f in files]}

    from .errors import ConfigInvalid
    raise ConfigInvalid("task", f"unknown reduced task {task!r}")


def _core_phase(config: dict, opts: dict, seeds, layout) -> dict:
    from . import reduced
    from .io import export_figure_data, write_json17, write_phase_csv
    from .outcomes import phase_diagram

    params, bump = _model_from(config)
    dynamics = str(opts.get("dynamics", "ode"))
    grid = opts.get("epsilon_grid")
    if grid is None:
        from .errors import MissingInput
        raise MissingInput("phase needs an epsilon grid "
                           "(--grid epsilon=... or parameter_grid)")
    d_vals = opts.get("d_grid") or [float(opts.get(
        "d", bump.d if bump is not None else 0.05))]

    if dynamics == "ode":
        pulse, pulse_params = _load_pulse(seeds, config)
        sys_r = reduced.build_reduced(pulse, pulse_params, d=float(d_vals[0]))
        diagram = phase_diagram("ode", [float(v) for v in d_vals],
                                [float(v) for v in grid], sys=sys_r,
                                refine=bool(opts.get("refine", True)))
    elif dynamics == "pde":
        runner = _pde_phase_runner(config, opts, seeds, layout)
        diagram = phase_diagram("pde", [float(v) for v in d_vals],
                                [float(v) for v in grid], pde_runner=runner,
                                refine=bool(opts.get("refine", False)))
    else:
        from .errors import ConfigInvalid
        raise ConfigInvalid("dynamics", f"unknown dynamics {dynamics!r}")

    csv_path = write_phase_csv(diagram["rows"],
                               layout["diagrams"] / f"phase_{dynamics}.csv")
    meta_path = write_json17(
        {"boundaries": diagram["boundaries"],
         "admissible_epsilon": diagram["admissible_epsilon"]},
        layout["diagrams"] / f"phase_{dynamics}_boundaries.json")
    files = export_figure_data("phase", {
        "rows": diagram["rows"], "boundaries": diagram["boundaries"],
        "admissible_epsilon": diagram["admissible_epsilon"]},
        layout["diagrams"], stem=f"phase_{dynamics}_fig")
    return {"table": str(csv_path), "boundaries": str(meta_path),
            "files": [str(f) for f in files],
            "n_rows": len(diagram["rows"]),
            "boundary_events": diagram["boundaries"]}


def _pde_phase_runner(config, opts, seeds, layout):
    """Collision pipeline as a (d, epsilon) -> Outcome callable."""
    import numpy as np

    from . import spectral
    from .model import solve_background
    from .outcomes import ClassifyThresholds, classify

    params, bump = _model_from(config)
    pulse, pulse_params = _load_pulse(seeds, config)
    u_bar = solve_background(params, params.kappa1_base).u_bar
    t_end = float(opts.get("t_end", 4000.0))
    dt = float(opts.get("dt", 4e-3))
    sample_dt = float(opts.get("sample_dt", 1.0))
    offset = float(opts.get("offset", 0.25 * params.domain_length))
    free_speed = float(opts["free_speed"])
    th = ClassifyThresholds(
        window=float(opts.get("window", 0.25 * params.domain_length)),
        free_speed=free_speed, t_settle=float(opts.get("t_settle", 200.0)))

    def runner(d, epsilon):
        b = _bump_with(bump, epsilon=float(epsilon), d=float(d))
        pos, _ = spectral.track_pulse(pulse.state, params, u_bar)
        target = b.resolved_center(params.domain_length) - offset
        state = spectral.translate(pulse.state, target - pos,
                                   params.domain_length)
        traj = spectral.run_collision(state, params, b, t_end, sample_dt,
                                      dt=dt)
        return classify(traj, b, th, domain_length=params.domain_length)

    return runner


def _core_export(config: dict, opts: dict, seeds, layout) -> dict:
    import csv as _csv

    from .errors import MissingInput
    from .io import export_figure_data

    kind = opts.get("kind")
    if kind is None:
        raise MissingInput("export needs --set kind=...")
    inputs = {}
    if kind in ("snaking", "isola", "hiop"):
        branches = []
        for path in seeds:
            with open(path) as fh:
                rows = []
                for row in _csv.DictReader(fh):
                    rows.append({
                        "param": float(row["param"]),
                        "norm": float(row["norm"]),
                        "n_unstable": (int(row["n_unstable"])
                                       if row.get("n_unstable") else ""),
                        "barcode": row.get("barcode", "")})
            branches.append(rows)
        if not branches:
            raise MissingInput(f"{kind} export needs branch CSVs as seed files")
        inputs["branches"] = branches
    elif kind == "phase":
        path = _require_seed(seeds, "phase export")
        with open(path) as fh:
            rows = [{"d": float(r["d"]), "epsilon": float(r["epsilon"]),
                     "outcome": r["outcome"],
                     "pin_location": (float(r["pin_location"])
                                      if r["pin_location"] else None),
                     "period": (float(r["period"]) if r["period"] else None)}
                    for r in _csv.DictReader(fh)]
        inputs["rows"] = rows
    elif kind in ("transition", "basin"):
        path = _require_seed(seeds, f"{kind} export")
        doc = json.loads(Path(path).read_text())
        inputs = {"partition": doc} if kind == "basin" else doc
    files = export_figure_data(kind, inputs, layout["diagrams"],
                               stem=opts.get("stem"))
    return {"files": [str(f) for f in files]}


_CORES = {
    "simulate": _core_simulate,
    "solve": _core_solve,
    "continue": _core_continue,
    "hiop-atlas": _core_hiop_atlas,
    "reduced": _core_reduced,
    "phase": _core_phase,
    "export": _core_export,
}


# ---------------------------------------------------------------- run engine

def _expand_grid(grid: dict) -> list[dict]:
    from itertools import product

    axes = {k: list(v) for k, v in grid.items()}
    if not axes:
        return [{}]
    keys = sorted(axes)
    return [dict(zip(keys, combo)) for combo in product(*(axes[k]
                                                          for k in keys))]


def run_tasks(command: str, config: dict, grid: dict, opts: dict, seeds,
              outdir, *, collect_errors: bool = True) -> dict:
    """Run one core over a grid; collect per-task failures; write summary."""
    from .errors import PulsekitError
    from .io import TOOL_VERSION, config_hash, manifest_layout, write_json17

    core = _CORES.get(command)
    if core is None:
        from .errors import ConfigInvalid
        raise ConfigInvalid("command", f"unknown command {command!r}")
    layout = manifest_layout(outdir)
    combos = _expand_grid(grid)
    tasks, failures = [], []
    t0 = time.time()
    for combo in combos:
        tag = _tag(combo)
        task_opts = {**opts, **combo, "tag": opts.get("tag", tag)}
        try:
            frag = core(config, task_opts, seeds, layout)
            tasks.append({"tag": tag, "grid_point": combo, "status": "ok",
                          **frag})
        except PulsekitError as e:
            if not collect_errors:
                raise
            failures.append({"tag": tag, "grid_point": combo,
                             "error": f"{type(e).__name__}: {e}"})
    summary = {
        "command": command,
        "config_hash": config_hash(config),
        "tool_version": TOOL_VERSION,
        "n_tasks": len(combos),
        "tasks": tasks,
        "failures": failures,
    }
    write_json17(summary, layout["summary"])
    write_json17({"elapsed_seconds": time.time() - t0},
                 layout["root"] / "timing.json")
    return summary


def run_manifest(manifest, outdir=None) -> dict:
    """Execute a manifest: validate config, expand the grid, run the command.

    List-valued parameter_grid entries become sweep axes; scalar entries are
    passed through as fixed task options.
    """
    from .io import ExperimentManifest

    if not isinstance(manifest, ExperimentManifest):
        manifest = ExperimentManifest.from_file(manifest)
    _model_from(manifest.config)  # validate before any work
    grid = {k: v for k, v in manifest.parameter_grid.items()
            if isinstance(v, (list, tuple))}
    opts = {k: v for k, v in manifest.parameter_grid.items()
            if not isinstance(v, (list, tuple))}
    if manifest.wall_clock_budget is not None:
        opts.setdefault("wall_clock_budget", manifest.wall_clock_budget)
    out = Path(outdir) if outdir is not None else Path(manifest.output_dir)
    summary = run_tasks(manifest.command, manifest.config, grid, opts,
                        [Path(p) for p in manifest.seed_files], out)
    summary["manifest_hash"] = manifest.config_digest
    status = "ok"
    if summary["failures"]:
        status = "failed" if not summary["tasks"] else "partial"
    summary["status"] = status
    return summary


# ------------------------------------------------------------------ click UI

class _Ctx:
    def __init__(self):
        self.config = None
        self.out = Path("out")
        self.seeds = []


@click.group()
@click.option("--config", type=click.Path(), default=None,
              help="model/bump configuration JSON")
@click.option("--out", type=click.Path(), default="out", show_default=True,
              help="output directory")
@click.option("--threads", type=int, default=1, show_default=True,
              help="BLAS/OpenMP thread count (fixed for reproducibility)")
@click.option("--seed-file", "seed_files", type=click.Path(), multiple=True,
              help="solution/branch files used as seeds (repeatable)")
@click.pass_context
def main(ctx, config, out, threads, seed_files):
    """Pulse dynamics toolkit: simulation, shooting, continuation, reduction."""
    _set_threads(threads)
    obj = _Ctx()
    obj.config = config
    obj.out = Path(out)
    obj.seeds = [Path(p) for p in seed_files]
    ctx.obj = obj


def _invoke(ctx, command, grid_pairs, set_pairs, extra_opts=None):
    from .errors import ConfigInvalid, PulsekitError

    obj = ctx.obj
    try:
        config = _load_config_file(obj.config)
        grid = _parse_grid(grid_pairs)
        opts = _parse_set(set_pairs)
        if extra_opts:
            opts.update({k: v for k, v in extra_opts.items() if v is not None})
        summary = run_tasks(command, config, grid, opts, obj.seeds, obj.out,
                            collect_errors=bool(grid))
    except ConfigInvalid as e:
        click.echo(f"config error: {e}", err=True)
        sys.exit(EXIT_CONFIG)
    except PulsekitError as e:
        click.echo(f"{type(e).__name__}: {e}", err=True)
        sys.exit(EXIT_NUMERIC)
    click.echo(json.dumps({"n_tasks": summary["n_tasks"],
                           "n_failed": len(summary["failures"]),
                           "out": str(obj.out)}))
    if summary["n_tasks"] and not summary["tasks"]:
        sys.exit(EXIT_NUMERIC)


_GRID = click.option("-g", "--grid", "grid_pairs", multiple=True,
                     help="sweep axis KEY=START:STOP:N[:log]")
_SET = click.option("-s", "--set", "set_pairs", multiple=True,
                    help="fixed option KEY=VALUE (VALUE parsed as JSON)")


@main.command()
@_GRID
@_SET
@click.option("--t-end", type=float, default=None, help="integration time")
@click.option("--epsilon", type=float, default=None, help="bump amplitude")
@click.pass_context
def simulate(ctx, grid_pairs, set_pairs, t_end, epsilon):
    """Integrate the PDE and record the pulse track."""
    _invoke(ctx, "simulate", grid_pairs, set_pairs,
            {"t_end": t_end, "epsilon": epsilon})


@main.command()
@_GRID
@_SET
@click.option("--kind", type=click.Choice(["steady", "traveling", "periodic",
                                           "periodic-traveling"]),
              default="steady", show_default=True)
@click.pass_context
def solve(ctx, grid_pairs, set_pairs, kind):
    """Newton-Krylov solve for one solution class."""
    _invoke(ctx, "solve", grid_pairs, set_pairs, {"kind": kind})


@main.command("continue")
@_GRID
@_SET
@click.option("--parameter", type=click.Choice(["kappa1", "epsilon"]),
              default="kappa1", show_default=True)
@click.option("--direction", type=float, default=1.0, show_default=True)
@click.option("--max-points", type=int, default=None)
@click.pass_context
def continue_cmd(ctx, grid_pairs, set_pairs, parameter, direction, max_points):
    """Continue a solution branch in kappa1 or in the bump amplitude."""
    _invoke(ctx, "continue", grid_pairs, set_pairs,
            {"parameter": parameter, "direction": direction,
             "max_points": max_points})


@main.command("hiop-atlas")
@_GRID
@_SET
@click.pass_context
def hiop_atlas_cmd(ctx, grid_pairs, set_pairs):
    """Continue every seed over the bump-amplitude range; label and link."""
    _invoke(ctx, "hiop-atlas", grid_pairs, set_pairs)


@main.command()
@_GRID
@_SET
@click.option("--task", type=click.Choice(["summary", "landmarks",
                                           "critical-points", "orbit",
                                           "transitions", "basin"]),
              default="summary", show_default=True)
@click.option("--epsilon", type=float, default=None)
@click.pass_context
def reduced(ctx, grid_pairs, set_pairs, task, epsilon):
    """Projected two-variable pulse dynamics: forcing, orbits, manifolds."""
    _invoke(ctx, "reduced", grid_pairs, set_pairs,
            {"task": task, "epsilon": epsilon})


@main.command()
@_GRID
@_SET
@click.option("--dynamics", type=click.Choice(["ode", "pde"]), default="ode",
              show_default=True)
@click.pass_context
def phase(ctx, grid_pairs, set_pairs, dynamics):
    """Outcome diagram over (d, epsilon) with refined boundaries."""
    opts = {"dynamics": dynamics}
    grid = _parse_grid(grid_pairs)
    if "epsilon" in grid:
        opts["epsilon_grid"] = grid.pop("epsilon")
    if "d" in grid:
        opts["d_grid"] = grid.pop("d")
    pairs = [f"{k}=[{','.join(str(v) for v in vs)}]" for k, vs in grid.items()]
    _invoke(ctx, "phase", tuple(pairs), set_pairs, opts)


@main.command()
@_SET
@click.option("--kind", type=click.Choice(["snaking", "isola", "hiop",
                                           "phase", "transition", "basin"]),
              required=True)
@click.pass_context
def export(ctx, set_pairs, kind):
    """Re-emit stored results as plot-ready CSV + JSON sidecars."""
    _invoke(ctx, "export", (), set_pairs, {"kind": kind})


@main.command()
@click.argument("manifest", type=click.Path(exists=True))
@click.pass_context
def run(ctx, manifest):
    """Execute an experiment manifest and write its summary."""
    from .errors import ConfigInvalid, PulsekitError

    try:
        summary = run_manifest(manifest, ctx.obj.out if ctx.obj.out !=
                               Path("out") else None)
    except ConfigInvalid as e:
        click.echo(f"config error: {e}", err=True)
        sys.exit(EXIT_CONFIG)
    except PulsekitError as e:
        click.echo(f"{type(e).__name__}: {e}", err=True)
        sys.exit(EXIT_NUMERIC)
    click.echo(json.dumps({"status": summary["status"],
                           "n_tasks": summary["n_tasks"],
                           "n_failed": len(summary["failures"])}))
    if summary["status"] == "failed":
        sys.exit(EXIT_NUMERIC)


if __name__ == "__main__":
    main()
