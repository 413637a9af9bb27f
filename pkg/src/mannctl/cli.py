"""Command-line entry point: ``mannctl {run,compare,estimation,sweep,list-scenarios}``.

Configuration comes from an optional JSON file (``--config``) with flags
layered on top. Exit codes: 0 success, 1 configuration error, 2 when any run
produced a non-finite state.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .controller import ControllerConfig
from .estimation import EstimationConfig, run_experiment
from .metrics import (DEG, hidden_layer_diag, reduction_pct, riccati_scaling_sweep, run_metrics, scalar_plant,
                      summarize)
from .nn import NnGains
from .numerics import NonFiniteState, NumericsError
from .scenario import (SCENARIOS, CommandSpec, PlantModel, Scenario, UncertaintySchedule, b747_plant,
                       get_scenario)
from .simulation import VARIANTS, record_diagnostics, simulate, variant_config

__all__ = ["main", "ConfigError", "RunConfig", "load_config", "trajectory_table", "write_csv"]


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


# ---------------------------------------------------------------- config


@dataclass
class RunConfig:
    scenario: Scenario
    variants: tuple[str, ...] = ()
    seeds: tuple[int, ...] = (0,)
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    horizon: float | None = None
    step: float = 1e-3
    out: Path = Path("out")
    parallel: int = 1
    plot: bool = False
    traces: bool = False
    estimation: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)


def _obj(v, path: str) -> dict:
    if not isinstance(v, dict):
        raise ConfigError(path, "expected an object")
    return v


def _float(v, path: str, positive: bool = False) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(path, "expected a finite number")
    if positive and v <= 0:
        raise ConfigError(path, "must be positive")
    return float(v)


def _int(v, path: str, minimum: int | None = None) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(path, "expected an integer")
    if minimum is not None and v < minimum:
        raise ConfigError(path, f"must be >= {minimum}")
    return v


def _floats(v, path: str) -> tuple[float, ...]:
    if not isinstance(v, list):
        raise ConfigError(path, "expected a list of numbers")
    return tuple(_float(x, f"{path}[{i}]") for i, x in enumerate(v))


def _matrix(v, path: str) -> np.ndarray:
    if not isinstance(v, list) or not v:
        raise ConfigError(path, "expected a non-empty list of rows")
    rows = [_floats(r if isinstance(r, list) else [r], f"{path}[{i}]") for i, r in enumerate(v)]
    if len({len(r) for r in rows}) != 1:
        raise ConfigError(path, "rows have different lengths")
    return np.array(rows)


def parse_seeds(text: str) -> tuple[int, ...]:
    """``"7"``, ``"0-19"`` or ``"1,4,10-12"``."""
    out: list[int] = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:
            a, b = part.split("-", 1) if not part.startswith("-") else part[1:].split("-", 1)
            lo, hi = int(a), int(b)
            if hi < lo:
                raise ValueError(f"empty seed range {part!r}")
            out.extend(range(lo, hi + 1))
        else:
            out.append(int(part))
    if not out:
        raise ValueError("no seeds given")
    return tuple(out)


def _seeds(v, path: str) -> tuple[int, ...]:
    if isinstance(v, str):
        try:
            return parse_seeds(v)
        except ValueError as exc:
            raise ConfigError(path, str(exc)) from None
    if isinstance(v, int) and not isinstance(v, bool):
        return (v,)
    if isinstance(v, list) and v:
        return tuple(_int(s, f"{path}[{i}]", 0) for i, s in enumerate(v))
    raise ConfigError(path, "expected a seed, a list of seeds or a range string")


def _variants(v, path: str) -> tuple[str, ...]:
    items = v.split(",") if isinstance(v, str) else v
    if not isinstance(items, list | tuple) or not items:
        raise ConfigError(path, "expected a variant name or list of names")
    out = []
    for i, name in enumerate(items):
        name = str(name).strip()
        if name not in VARIANTS:
            raise ConfigError(f"{path}[{i}]", f"unknown variant {name!r}; choose from {', '.join(VARIANTS)}")
        out.append(name)
    return tuple(out)


def _controller(d: dict, path: str) -> ControllerConfig:
    d = _obj(d, path)
    known = {f.name for f in fields(ControllerConfig)}
    kw = {}
    for key, val in d.items():
        p = f"{path}.{key}"
        if key not in known:
            raise ConfigError(p, "unknown controller field")
        if key == "gains":
            g = _obj(val, p)
            bad = set(g) - {"gamma_w", "gamma_v", "kappa"}
            if bad:
                raise ConfigError(f"{p}.{sorted(bad)[0]}", "unknown gain")
            try:
                kw[key] = NnGains(**{k: _float(x, f"{p}.{k}") for k, x in g.items()})
            except ValueError as exc:
                raise ConfigError(p, str(exc)) from None
        elif key in ("enable_info_term", "enable_error_term", "memory_enabled", "nn_enabled"):
            if not isinstance(val, bool):
                raise ConfigError(p, "expected true or false")
            kw[key] = val
        elif key in ("N", "n_s", "lyapunov_rhs_factor", "seed"):
            kw[key] = _int(val, p)
        else:
            kw[key] = _float(val, p)
    try:
        return ControllerConfig(**kw)
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from None


def _scenario(v, path: str) -> Scenario:
    if isinstance(v, str):
        if v not in SCENARIOS:
            raise ConfigError(path, f"unknown scenario {v!r}; known: {', '.join(sorted(SCENARIOS))}")
        return SCENARIOS[v]
    d = _obj(v, path)
    base = SCENARIOS["b747-nominal"]
    if "base" in d:
        base = _scenario(d["base"], f"{path}.base")
    plant = base.plant
    if "plant" in d:
        p = _obj(d["plant"], f"{path}.plant")
        try:
            plant = PlantModel(_matrix(p.get("A"), f"{path}.plant.A"), _matrix(p.get("B"), f"{path}.plant.B"),
                               _matrix(p.get("B_r"), f"{path}.plant.B_r"))
        except (NumericsError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"{path}.plant", str(exc)) from None
    schedule = base.schedule
    if "schedule" in d:
        s = _obj(d["schedule"], f"{path}.schedule")
        sp = f"{path}.schedule"
        try:
            schedule = UncertaintySchedule(
                name=str(s.get("name", d.get("name", "custom"))),
                jump_times=_floats(s.get("jump_times", []), f"{sp}.jump_times"),
                cf_const=_floats(s.get("cf_const", [0.0]), f"{sp}.cf_const"),
                cf_norm=_floats(s.get("cf_norm", [0.0]), f"{sp}.cf_norm"),
                sq_gain=_float(s.get("sq_gain", 0.0), f"{sp}.sq_gain"),
                sq_base=_float(s.get("sq_base", 1.0), f"{sp}.sq_base"),
                offset=_float(s.get("offset", 0.1), f"{sp}.offset"),
                sq_mode=str(s.get("sq_mode", "norm")),
            )
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(sp, str(exc)) from None
    cmd = base.command
    if "command" in d:
        c = _obj(d["command"], f"{path}.command")
        cp = f"{path}.command"
        try:
            cmd = CommandSpec(
                kind=str(c.get("kind", "step")),
                amplitude=_float(c.get("amplitude", math.pi / 180.0), f"{cp}.amplitude"),
                period=_float(c.get("period", 20.0), f"{cp}.period"),
                phase=_float(c.get("phase", 0.0), f"{cp}.phase"),
            )
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(cp, str(exc)) from None
    horizon = _float(d.get("horizon", base.horizon), f"{path}.horizon", positive=True)
    edges = [0.0, *[t for t in schedule.jump_times if 0.0 < t < horizon], horizon]
    epochs = tuple(zip(edges[:-1], edges[1:]))
    return Scenario(str(d.get("name", schedule.name)), plant, schedule, cmd, horizon, epochs)


def load_config(path: str | None, args: argparse.Namespace | None = None) -> RunConfig:
    """Read the JSON file (if any) and apply command-line overrides."""
    raw: dict = {}
    if path:
        try:
            raw = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError("$", f"cannot read {path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError("$", f"invalid JSON ({exc.msg} at line {exc.lineno})") from None
        _obj(raw, "$")
    known = {"scenario", "variant", "variants", "seed", "seeds", "controller", "horizon", "step", "out",
             "parallel", "estimation", "sweep", "plot", "traces"}
    for key in raw:
        if key not in known:
            raise ConfigError(f"$.{key}", "unknown key")

    a = args or argparse.Namespace()
    opt = lambda name: getattr(a, name, None)  # noqa: E731

    scen_src = opt("scenario") or raw.get("scenario", "b747-ex1")
    scenario = _scenario(scen_src, "--scenario" if opt("scenario") else "$.scenario")

    if opt("variant"):
        variants = _variants(",".join(opt("variant")), "--variant")
    elif "variants" in raw or "variant" in raw:
        key = "variants" if "variants" in raw else "variant"
        variants = _variants(raw[key], f"$.{key}")
    else:
        variants = ()

    if opt("seeds") is not None:
        seeds = _seeds(opt("seeds"), "--seeds")
    elif opt("seed") is not None:
        seeds = (int(opt("seed")),)
    elif "seeds" in raw or "seed" in raw:
        key = "seeds" if "seeds" in raw else "seed"
        seeds = _seeds(raw[key], f"$.{key}")
    else:
        seeds = (0,)

    controller = _controller(raw.get("controller", {}), "$.controller")

    horizon = opt("horizon") if opt("horizon") is not None else raw.get("horizon")
    if horizon is not None:
        horizon = _float(horizon, "$.horizon", positive=True)
    step = _float(opt("step") if opt("step") is not None else raw.get("step", 1e-3), "$.step", positive=True)
    parallel = _int(opt("parallel") if opt("parallel") is not None else raw.get("parallel", 1), "$.parallel", 1)
    out = os.environ.get("MANNCTL_OUT") or opt("out") or raw.get("out", "out")
    return RunConfig(
        scenario=scenario, variants=variants, seeds=seeds, controller=controller, horizon=horizon, step=step,
        out=Path(out), parallel=parallel, plot=bool(opt("plot") or raw.get("plot", False)),
        traces=bool(opt("traces") or raw.get("traces", False)),
        estimation=_obj(raw.get("estimation", {}), "$.estimation"), sweep=_obj(raw.get("sweep", {}), "$.sweep"),
    )


# ---------------------------------------------------------------- output


def _fmt(x: float) -> str:
    return repr(float(x))


def trajectory_table(traj, cfg: ControllerConfig) -> tuple[list[str], np.ndarray]:
    """Column names and values of the trajectory CSV."""
    ch = traj.channels
    n = ch["x"].shape[1]
    cols: list[tuple[str, np.ndarray]] = [("t", traj.t)]
    cols += [(f"x{i}", ch["x"][:, i]) for i in range(n)]
    cols += [(f"xref{i}", ch["x_ref"][:, i]) for i in range(n)]
    cols += [("e_norm", ch["e_norm"]), ("alpha_deg", ch["alpha"] * DEG), ("s_deg", ch["s"] * DEG)]
    m = ch["u"].shape[1]
    for name in ("u", "u_bl", "u_ad"):
        cols += [(name, ch[name][:, 0])] if m == 1 else [(f"{name}{c}", ch[name][:, c]) for c in range(m)]
    cols += [("v", ch["v"]), ("f_true", ch["f_true"]), ("f_hat", ch["f_hat"])]
    cols += list(hidden_layer_diag(traj, cfg.c_w).items())
    N = ch["hidden"].shape[1]
    ns = ch["mu"].shape[1] // N
    cols += [(f"mem_{j}_{k}", ch["mu"][:, j * ns + k]) for j in range(N) for k in range(ns)]
    return [c[0] for c in cols], np.column_stack([c[1] for c in cols])


def write_csv(path: Path, header, rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else _fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def write_json(path: Path, body: dict) -> None:
    """JSON with the only time-dependent field isolated in ``header``."""
    doc = {"header": {"tool": "mannctl", "version": __version__,
                      "created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")},
           **body}
    path.write_text(json.dumps(doc, indent=2, sort_keys=False) + "\n")


def _cfg_dict(cfg: ControllerConfig) -> dict:
    d = {f.name: getattr(cfg, f.name) for f in fields(cfg)}
    g = cfg.gains
    d["gains"] = {"gamma_w": g.gamma_w, "gamma_v": g.gamma_v, "kappa": g.kappa}
    return d


def _scenario_dict(sc: Scenario) -> dict:
    s = sc.schedule
    return {"name": sc.name, "horizon": sc.horizon, "epochs": [list(e) for e in sc.epochs],
            "schedule": {"jump_times": list(s.jump_times), "cf_const": list(s.cf_const),
                         "cf_norm": list(s.cf_norm), "sq_gain": s.sq_gain, "sq_base": s.sq_base,
                         "offset": s.offset, "sq_mode": s.sq_mode},
            "command": {"kind": sc.command.kind, "amplitude": sc.command.amplitude,
                        "period": sc.command.period, "phase": sc.command.phase}}


# ---------------------------------------------------------------- runs


def _epochs(sc: Scenario, horizon: float) -> list[tuple[float, float]]:
    eps = [(a, min(b, horizon)) for a, b in sc.epochs if a < horizon]
    return eps or [(0.0, horizon)]


def _one_run(job) -> dict:
    """Simulate one (variant, seed) pair; writes files when ``out`` is given."""
    sc, base, variant, seed, horizon, step, out, traces, plot = job
    plant = sc.plant
    cfg = variant_config(base.with_(seed=seed), variant, plant.n, plant.m)
    T = sc.horizon if horizon is None else horizon
    rec = {"scenario": sc.name, "variant": variant, "seed": seed, "N": cfg.N}
    try:
        res = simulate(sc, cfg, horizon=T, step=step)
    except NonFiniteState as exc:
        rec.update(status="nonfinite", t_fail=exc.t)
        return rec
    traj = record_diagnostics(res)
    met = run_metrics(traj, _epochs(sc, T), sc.schedule.jump_times)
    rec.update(status="ok", metrics=met.as_dict())
    if out is not None:
        stem = f"{sc.name}_{variant}_{seed}"
        if traces:
            header, table = trajectory_table(traj, cfg)
            write_csv(out / f"{stem}.csv", header, table.tolist())
        write_json(out / f"{stem}.json", {"scenario": _scenario_dict(sc), "variant": variant, "seed": seed,
                                          "step": step, "controller": _cfg_dict(cfg), "status": "ok",
                                          "metrics": met.as_dict()})
        if plot:
            from .plotting import plot_run
            plot_run(traj, out / f"{stem}.png", stem, sc.schedule.jump_times, cfg.c_w)
    return rec


def _map(fn, jobs, parallel: int):
    if parallel <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=parallel) as ex:
        return list(ex.map(fn, jobs))


_METRIC_HEADER = ["scenario", "variant", "seed", "N", "status", "peak_overall_deg", "peak_disturbed_deg",
                  "settling_disturbed_s", "final_error", "max_error_norm", "bounded", "max_mu_fro"]


def _metric_rows(records, n_epochs: int):
    header = list(_METRIC_HEADER)
    header += [f"peak_ep{k}_deg" for k in range(n_epochs)] + [f"settle_ep{k}_s" for k in range(n_epochs)]
    rows = []
    for r in records:
        row = [r["scenario"], r["variant"], str(r["seed"]), str(r["N"]), r["status"]]
        m = r.get("metrics")
        if m is None:
            row += ["nan"] * (len(header) - len(row))
        else:
            row += [m["peak_overall_deg"], m["peak_disturbed_deg"], m["settling_disturbed_s"], m["final_error"],
                    m["max_error_norm"], str(m["bounded"]).lower(), m["max_mu_fro"]]
            row += m["peak_deviation_deg"] + m["settling_time_s"]
        rows.append(row)
    return header, rows


def _jobs(rc: RunConfig, out: Path | None, traces: bool):
    return [(rc.scenario, rc.controller, v, s, rc.horizon, rc.step, out, traces, rc.plot)
            for v in rc.variants for s in rc.seeds]


def cmd_run(rc: RunConfig) -> int:
    rc.out.mkdir(parents=True, exist_ok=True)
    records = _map(_one_run, _jobs(rc, rc.out, True), rc.parallel)
    T = rc.scenario.horizon if rc.horizon is None else rc.horizon
    header, rows = _metric_rows(records, len(_epochs(rc.scenario, T)))
    write_csv(rc.out / f"{rc.scenario.name}_metrics.csv", header, rows)
    failed = [r for r in records if r["status"] != "ok"]
    for r in records:
        if r["status"] == "ok":
            m = r["metrics"]
            print(f"{r['scenario']} {r['variant']} seed={r['seed']}: peak {m['peak_disturbed_deg']:.4f} deg, "
                  f"settling {m['settling_disturbed_s']:.3f} s")
        else:
            print(f"{r['scenario']} {r['variant']} seed={r['seed']}: non-finite state at t={r['t_fail']:.4f}",
                  file=sys.stderr)
    return 2 if failed else 0


def compare_report(rc: RunConfig, records) -> dict:
    T = rc.scenario.horizon if rc.horizon is None else rc.horizon
    epochs = _epochs(rc.scenario, T)
    rep = {"scenario": rc.scenario.name, "seeds": list(rc.seeds), "epochs": [list(e) for e in epochs],
           "variants": {}, "reductions": {}}
    by_var: dict[str, list] = {v: [] for v in rc.variants}
    for r in records:
        if r["status"] == "ok":
            by_var[r["variant"]].append(r["metrics"])
    for v, ms in by_var.items():
        if not ms:
            rep["variants"][v] = {"completed": 0}
            continue
        rep["variants"][v] = {
            "completed": len(ms),
            "peak_deviation_deg": [summarize([m["peak_deviation_deg"][k] for m in ms]) for k in range(len(epochs))],
            "settling_time_s": [summarize([m["settling_time_s"][k] for m in ms]) for k in range(len(epochs))],
            "peak_disturbed_deg": summarize([m["peak_disturbed_deg"] for m in ms]),
            "settling_disturbed_s": summarize([m["settling_disturbed_s"] for m in ms]),
        }
    ok = [v for v in rc.variants if rep["variants"][v].get("completed")]
    if "mann" in ok:
        for base in ok:
            if base == "mann":
                continue
            b, m = rep["variants"][base], rep["variants"]["mann"]
            rep["reductions"][base] = {
                "peak_disturbed_pct": reduction_pct(b["peak_disturbed_deg"]["median"],
                                                    m["peak_disturbed_deg"]["median"]),
                "peak_per_epoch_pct": [reduction_pct(bb["median"], mm["median"]) for bb, mm in
                                       zip(b["peak_deviation_deg"], m["peak_deviation_deg"])],
                "settling_disturbed_pct": reduction_pct(b["settling_disturbed_s"]["median"],
                                                        m["settling_disturbed_s"]["median"]),
            }
    return rep


def cmd_compare(rc: RunConfig) -> int:
    if len(rc.variants) < 2:
        raise ConfigError("$.variants", "compare needs at least two variants")
    rc.out.mkdir(parents=True, exist_ok=True)
    out = rc.out if (rc.traces or rc.plot) else None
    records = _map(_one_run, _jobs(rc, out, rc.traces), rc.parallel)
    rep = compare_report(rc, records)
    T = rc.scenario.horizon if rc.horizon is None else rc.horizon
    header, rows = _metric_rows(records, len(_epochs(rc.scenario, T)))
    write_csv(rc.out / f"compare_{rc.scenario.name}.csv", header, rows)
    write_json(rc.out / f"compare_{rc.scenario.name}.json", {"controller": _cfg_dict(rc.controller),
                                                            "step": rc.step, **rep})
    if rc.plot:
        from .plotting import plot_compare
        plot_compare(rep, rc.out / f"compare_{rc.scenario.name}.png")
    for v, s in rep["variants"].items():
        if s.get("completed"):
            print(f"{v:16s} peak {s['peak_disturbed_deg']['median']:.4f} deg  "
                  f"settling {s['settling_disturbed_s']['median']:.3f} s  ({s['completed']} runs)")
    for base, red in rep["reductions"].items():
        print(f"mann vs {base}: peak reduction {red['peak_disturbed_pct']:.1f}%, "
              f"settling reduction {red['settling_disturbed_pct']:.1f}%")
    return 2 if any(r["status"] != "ok" for r in records) else 0


def _estimation_job(job):
    seed, cfg, c, kw = job
    r = run_experiment(seed, cfg, c=c, **kw)
    r.pop("trace")
    return r


def estimation_settings(d: dict) -> tuple[EstimationConfig, float, dict]:
    d = _obj(d, "$.estimation")
    cfg_keys = {"eps", "horizon", "step", "gamma_w", "gamma_v", "alpha", "c_w", "n_s"}
    exp_keys = {"n", "N", "delta_bar", "t_on", "duration"}
    kw_cfg, kw_exp, c = {}, {}, 2.0
    for key, val in d.items():
        p = f"$.estimation.{key}"
        if key in ("n_s", "n", "N"):
            v = _int(val, p, 1)
        elif key == "c":
            c = _float(val, p)
            continue
        elif key in cfg_keys | exp_keys:
            v = _float(val, p)
        elif key == "seeds":
            continue
        else:
            raise ConfigError(p, "unknown estimation field")
        (kw_cfg if key in cfg_keys else kw_exp)[key] = v
    try:
        return EstimationConfig(**kw_cfg), c, kw_exp
    except ValueError as exc:
        raise ConfigError("$.estimation", str(exc)) from None


def cmd_estimation(rc: RunConfig, seeds: tuple[int, ...]) -> int:
    cfg, c, kw = estimation_settings(rc.estimation)
    rc.out.mkdir(parents=True, exist_ok=True)
    rows = _map(_estimation_job, [(s, cfg, c, kw) for s in seeds], rc.parallel)
    ratios = [r["ratio"] for r in rows]
    passed = sum(r["pass"] for r in rows)
    hist, edges = np.histogram(np.clip(ratios, 0.0, 1.0), bins=20, range=(0.0, 1.0))
    header = ["seed", "max_e", "max_e_m", "e_bl_max", "delta_m_est", "bound", "ratio", "pass"]
    write_csv(rc.out / "estimation.csv", header,
              [[str(r["seed"]), r["max_e"], r["max_e_m"], r["e_bl_max"], r["delta_m_est"], r["bound"], r["ratio"],
                str(r["pass"]).lower()] for r in rows])
    body = {"settings": {**cfg.__dict__, "c": c, **kw}, "runs": len(rows), "passed": passed,
            "pass_rate": passed / len(rows), "ratio": summarize(ratios),
            "histogram": {"edges": edges.tolist(), "counts": hist.tolist()}}
    body["settings"]["x0"] = "per seed"
    body["settings"]["d_s"] = "per seed"
    write_json(rc.out / "estimation_report.json", body)
    if rc.plot:
        from .plotting import plot_ratio_hist
        plot_ratio_hist(ratios, rc.out / "estimation_ratio.png")
    print(f"memory-augmented estimation: {passed}/{len(rows)} runs within bound, "
          f"median ratio {body['ratio']['median']:.3f} (q1 {body['ratio']['q1']:.3f}, q3 {body['ratio']['q3']:.3f})")
    return 0


def cmd_sweep(rc: RunConfig, kv_arg: str | None) -> int:
    d = rc.sweep
    if kv_arg:
        try:
            kv = tuple(float(x) for x in kv_arg.split(","))
        except ValueError:
            raise ConfigError("--kv", "expected comma-separated numbers") from None
    else:
        kv = _floats(d.get("K_v", [1.0, 10.0, 100.0, 1000.0, 10000.0]), "$.sweep.K_v")
    if len(kv) < 4 or any(k <= 0 for k in kv):
        raise ConfigError("$.sweep.K_v", "need at least four positive values")
    kind = d.get("plant", "b747")
    if kind == "b747":
        plant = b747_plant()
    elif kind == "scalar":
        plant = scalar_plant(_float(d.get("a", 0.0), "$.sweep.a"), _float(d.get("b", 1.0), "$.sweep.b"))
    else:
        raise ConfigError("$.sweep.plant", "expected 'b747' or 'scalar'")
    K_r = _float(d.get("K_r", 1.0), "$.sweep.K_r", positive=True)
    table = riccati_scaling_sweep(plant, kv, K_r=K_r, rhs_factor=rc.controller.lyapunov_rhs_factor)
    rc.out.mkdir(parents=True, exist_ok=True)
    write_csv(rc.out / "riccati_sweep.csv", ["K_v", "lambda_min", "lambda_max", "pb_norm"], table.rows())
    write_json(rc.out / "riccati_sweep.json", {"plant": kind, "K_r": K_r, **table.as_dict()})
    if rc.plot:
        from .plotting import plot_sweep
        plot_sweep(table, rc.out / "riccati_sweep.png")
    print(f"{'K_v':>10s} {'lambda_min':>14s} {'lambda_max':>14s} {'||PB||_F':>14s}")
    for row in table.rows():
        print(f"{row[0]:10.4g} {row[1]:14.6g} {row[2]:14.6g} {row[3]:14.6g}")
    print(f"slopes: lambda_min {table.slope_min:.4f}, lambda_max {table.slope_max:.4f}, "
          f"||PB||_F {table.slope_pb:.4f}")
    return 0


def cmd_list() -> int:
    for name in sorted(SCENARIOS):
        s = SCENARIOS[name].schedule
        print(f"{name:14s} jumps={list(s.jump_times)} cf_const={list(s.cf_const)} cf_norm={list(s.cf_norm)}")
    return 0


# ---------------------------------------------------------------- entry


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mannctl", description="Memory-augmented NN adaptive control simulator")
    p.add_argument("--version", action="version", version=f"mannctl {__version__}")
    sub = p.add_subparsers(dest="verb", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON configuration file")
        sp.add_argument("--out", help="output directory (MANNCTL_OUT overrides)")
        sp.add_argument("--parallel", type=int, help="worker processes")
        sp.add_argument("--plot", action="store_true", help="also render PNG figures")

    for verb in ("run", "compare"):
        sp = sub.add_parser(verb)
        common(sp)
        sp.add_argument("--scenario")
        sp.add_argument("--variant", action="append", help="variant name; repeat or comma-separate")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--seeds", help="e.g. 0-19 or 1,5,9")
        sp.add_argument("--horizon", type=float)
        sp.add_argument("--step", type=float)
        if verb == "compare":
            sp.add_argument("--traces", action="store_true", help="write per-run trajectory CSVs")
    sp = sub.add_parser("estimation")
    common(sp)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--seeds", help="default 0-99")
    sp = sub.add_parser("sweep")
    common(sp)
    sp.add_argument("--kv", help="comma-separated K_v values")
    sub.add_parser("list-scenarios")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.verb == "list-scenarios":
        return cmd_list()
    try:
        rc = load_config(args.config, args)
        if args.verb == "run":
            rc.variants = rc.variants or ("mann",)
            return cmd_run(rc)
        if args.verb == "compare":
            rc.variants = rc.variants or ("mann", "nn", "nn_equal_params")
            return cmd_compare(rc)
        if args.verb == "estimation":
            if args.seeds is not None or args.seed is not None:
                seeds = rc.seeds
            else:
                seeds = _seeds(rc.estimation.get("seeds", "0-99"), "$.estimation.seeds")
            return cmd_estimation(rc, seeds)
        return cmd_sweep(rc, args.kv)
    except ConfigError as exc:
        print(f"config error at {exc}", file=sys.stderr)
        return 1
    except NumericsError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
