"""Command line: ``declab run|sweep|cosmo-run <config>``.

Exit codes: 0 success, 2 config parse/validation failure, 3 model too large
or unsupported for the requested engine.
"""

from __future__ import annotations

import argparse
import itertools
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import analysis, cosmo
from .errors import ConfigError, DeclabError, IntegrationFailure, TooManySites, UnsupportedSupport
from .oracle import MAX_SITES
from .scenario import _Source, load_json, parse_generator, parse_scenario

EXIT_OK, EXIT_CONFIG, EXIT_ENGINE = 0, 2, 3
SERIES_HEADER = ("t", "total", "sum_d", "re_sum_nd", "im_sum_nd", "abs_coherence")
SWEEP_HEADER = ("M", "N", "seed", "class", "t_D", "gamma", "mean_tail")
MODE_HEADER = ("eta", "f1", "f2", "g1", "g2", "wronskian_residual", "decaying_ratio")


class EngineError(DeclabError):
    pass


def fmt(x) -> str:
    if x is None:
        return ""
    return "%.17g" % x


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(r if isinstance(r, str) else fmt(r) for r in row) + "\n")


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_json(path: Path, payload) -> None:
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        json.dump(_clean(payload), fh, sort_keys=True, indent=2)
        fh.write("\n")


def svg_polyline(xs, ys, title: str, width: int = 640, height: int = 360) -> str:
    """Minimal SVG line plot with a frame and axis labels."""
    xs, ys = np.asarray(xs, float), np.asarray(ys, float)
    pad = 40
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = 0.0, float(max(ys.max(), 1e-300))
    sx = (width - 2 * pad) / ((x1 - x0) or 1.0)
    sy = (height - 2 * pad) / ((y1 - y0) or 1.0)
    pts = " ".join(
        "%.2f,%.2f" % (pad + (x - x0) * sx, height - pad - (y - y0) * sy) for x, y in zip(xs, ys)
    )
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">\n'
        f'<rect x="{pad}" y="{pad}" width="{width - 2 * pad}" height="{height - 2 * pad}" '
        'fill="none" stroke="black"/>\n'
        f'<polyline fill="none" stroke="steelblue" stroke-width="1" points="{pts}"/>\n'
        f'<text x="{width / 2}" y="{pad - 10}" text-anchor="middle">{title}</text>\n'
        f'<text x="{pad}" y="{height - 10}">{x0:.4g}</text>\n'
        f'<text x="{width - pad}" y="{height - 10}" text-anchor="end">{x1:.4g}</text>\n'
        f'<text x="5" y="{pad + 4}">{y1:.3g}</text>\n'
        f'<text x="5" y="{height - pad}">0</text>\n'
        "</svg>\n"
    )


def _compute_series(scn, times, engine):
    model, dec = scn.model, scn.decomposition
    if engine == "oracle" and model.num_sites > MAX_SITES:
        raise EngineError(f"{model.num_sites} sites exceeds the dense engine limit of {MAX_SITES}")
    try:
        return analysis.series_for(model, dec, times, scn.observable, engine)
    except (TooManySites, UnsupportedSupport) as exc:
        raise EngineError(str(exc)) from None


def evaluate(scn, engine: str = "closedform"):
    """Series, verdict and (for ``both``) the engine disagreement for one scenario.

    With ``both`` the dense cross-check is skipped, with a warning, when the
    model is too large for it; the agreement is then ``None``.
    """
    if scn.times is not None:
        times = scn.times
        window = (float(times[0]), float(times[-1]))
    else:
        window = analysis.decomposition_window(scn.model, scn.decomposition, scn.window_factor)
        times = np.linspace(window[0], window[1], scn.points)
    primary = "oracle" if engine == "oracle" else "closedform"
    series = _compute_series(scn, times, primary)
    agreement = None
    if engine == "both" and scn.model.num_sites > MAX_SITES:
        print(
            f"warning: {scn.model.num_sites} sites exceeds the dense engine limit of {MAX_SITES}; "
            "oracle cross-check skipped",
            file=sys.stderr,
        )
    elif engine == "both":
        other = _compute_series(scn, times, "oracle")
        agreement = float(np.max(np.abs(series.total - other.total)))
    verdict = analysis.classify_dynamics(series, window, **scn.thresholds)
    return series, verdict, primary, agreement, window


def series_rows(series):
    c = series.nondiag_part
    for i in range(len(series)):
        yield (series.times[i], series.total[i], series.diag_part, c[i].real, c[i].imag, abs(c[i]))


def run_scenario(config_path, out_dir=".", engine="closedform", seed_override=None) -> dict:
    text = Path(config_path).read_text(encoding="utf-8")
    data, src = load_json(text)
    scn = parse_scenario(data, src, seed_override)
    series, verdict, primary, agreement, window = evaluate(scn, engine)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    names = {"series_csv": "series.csv", "verdict_json": "verdict.json", **scn.outputs}
    write_csv(out / names["series_csv"], SERIES_HEADER, series_rows(series))
    payload = verdict.to_dict()
    payload["engine"] = primary
    payload["window"] = list(window)
    payload["gamma"] = analysis.decomposition_gamma(scn.model, scn.decomposition)
    if agreement is not None:
        payload["oracle_agreement_max_abs_err"] = agreement
    write_json(out / names["verdict_json"], payload)
    svg = names.get("svg")
    if svg:
        svg_name = "plot.svg" if svg is True else str(svg)
        (out / svg_name).write_text(
            svg_polyline(series.times, np.abs(series.sum_nd), "|sum_nd(t)|"), encoding="utf-8"
        )
    return payload


def _sweep_point(args):
    data, engine = args
    scn = parse_scenario(data, _Source(json.dumps(data)))
    series, verdict, _, _, window = evaluate(scn, engine)
    t_d = verdict.t_D
    if t_d is None:
        e = analysis.envelope(series)
        sel = series.times <= window[1] + 1e-12
        t_d, _ = analysis._first_crossing_linear(series.times[sel], e[sel], analysis.E_INV)
    gamma = analysis.decomposition_gamma(scn.model, scn.decomposition)
    return (
        str(scn.model.M),
        str(scn.model.N),
        "" if scn.generator.seed is None else str(scn.generator.seed),
        verdict.verdict.value,
        t_d,
        gamma,
        verdict.envelope_stats.get("mean_tail"),
    )


def sweep_points(data: dict, src, seed_override=None) -> list[dict]:
    """Expand ``sweep`` axes (M, N, seed) over the ``template`` scenario in a fixed order."""
    if "template" not in data or "sweep" not in data:
        raise src.error(None, "sweep config needs 'template' and 'sweep'")
    template, axes = data["template"], data["sweep"]
    if not isinstance(template.get("model"), dict) or "M" not in template["model"]:
        raise src.error("template", "sweep template needs a generator model with M and N")
    unknown = set(axes) - {"M", "N", "seed"}
    if unknown:
        raise src.error("sweep", f"unknown sweep axes {sorted(unknown)}")
    base = template["model"]
    Ms = [int(x) for x in axes.get("M", [base["M"]])]
    Ns = [int(x) for x in axes.get("N", [base["N"]])]
    seeds = axes.get("seed", [base.get("seed")])
    if seed_override is not None:
        seeds = [int(seed_override)]
    points = []
    for M, N, seed in itertools.product(Ms, Ns, seeds):
        point = json.loads(json.dumps(template))
        point["model"].update({"M": M, "N": N, "seed": seed})
        parse_generator(point["model"], src)
        points.append(point)
    return points


def resolve_workers(workers) -> int:
    if workers is None:
        env = os.environ.get("DECLAB_WORKERS")
        workers = int(env) if env else 1
    return max(1, int(workers))


def sweep(config_path, out_dir=".", engine="closedform", workers=None, seed_override=None):
    text = Path(config_path).read_text(encoding="utf-8")
    data, src = load_json(text)
    points = sweep_points(data, src, seed_override)
    for p in points:
        parse_scenario(p, src)
    jobs = [(p, engine) for p in points]
    n = resolve_workers(workers)
    if n == 1 or len(jobs) == 1:
        rows = [_sweep_point(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=n) as pool:
            rows = list(pool.map(_sweep_point, jobs))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    name = data.get("outputs", {}).get("sweep_csv", "sweep.csv")
    write_csv(out / name, SWEEP_HEADER, rows)
    return rows


def _scale_factor(spec, src) -> cosmo.ScaleFactorModel:
    kind = spec.get("kind") if isinstance(spec, dict) else None
    try:
        if kind == "minkowski":
            return cosmo.ScaleFactorModel.minkowski()
        if kind in ("desitter", "de_sitter"):
            return cosmo.ScaleFactorModel.de_sitter(float(spec.get("H", 1.0)))
        if kind == "tabulated":
            return cosmo.ScaleFactorModel.tabulated(spec["etas"], spec["a"])
    except (KeyError, ValueError, TypeError) as exc:
        raise src.error("model", f"invalid background: {exc}") from None
    raise src.error("model", "model.kind must be minkowski, desitter or tabulated")


def cosmo_run(config_path, out_dir=".", seed_override=None) -> dict:
    text = Path(config_path).read_text(encoding="utf-8")
    data, src = load_json(text)
    model = _scale_factor(data.get("model"), src)
    try:
        ks = [float(k) for k in data["k"]]
        eta0 = float(data["eta0"])
        eta1 = None if data.get("eta1") is None else float(data["eta1"])
        steps = int(data.get("steps", 10_000))
        n_samples = int(data.get("n_samples", 100_000))
        seed = int(data.get("seed", 0) if seed_override is None else seed_override)
        stride = max(1, int(data.get("stride", 1)))
    except (KeyError, ValueError, TypeError) as exc:
        raise src.error(None, f"cosmo-run config: {exc}") from None
    if not ks or any(not k > 0 for k in ks):
        raise src.error("k", "k must be a non-empty list of positive wavenumbers")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    results = []
    if eta1 is None and model.kind != "desitter":
        raise src.error(None, "eta1 is required unless the background is de Sitter")
    for i, k in enumerate(ks):
        end = cosmo.default_end(k, model) if eta1 is None else eta1
        traj = cosmo.fix_phase(cosmo.evolve_mode(k, model, eta0, end, steps), end)
        res = traj.wronskian_residual()
        dec = np.abs(traj.f2) + np.abs(traj.g1)
        grow = np.abs(traj.f1) + np.abs(traj.g2)
        ratio = dec / grow
        idx = np.arange(0, len(traj), stride)
        if idx[-1] != len(traj) - 1:
            idx = np.append(idx, len(traj) - 1)
        rows = (
            (traj.etas[j], traj.f1[j], traj.f2[j], traj.g1[j], traj.g2[j], res[j], ratio[j])
            for j in idx
        )
        write_csv(out / f"mode_k{i}.csv", MODE_HEADER, rows)
        rep = cosmo.classical_ensemble_compare(
            k, model, end, n_samples, seed + i, eta0=eta0, trajectory=traj
        )
        final = traj.state(len(traj) - 1)
        entry = rep.to_dict()
        entry.update(
            {
                "max_abs_wronskian_residual": float(np.max(np.abs(res))),
                "commutator_coefficient": cosmo.commutator_coefficient(final),
                "decaying_ratio": cosmo.classicality_diagnostics(final).ratio,
                "csv": f"mode_k{i}.csv",
            }
        )
        results.append(entry)
    payload = {"model": model.kind, "eta0": eta0, "eta1": eta1, "steps": steps, "modes": results}
    write_json(out / data.get("outputs", {}).get("ensemble_json", "ensemble.json"), payload)
    return payload


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="declab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("run", "sweep", "cosmo-run"):
        sp = sub.add_parser(name)
        sp.add_argument("config")
        sp.add_argument("--out-dir", default=".")
        sp.add_argument("--seed-override", type=int, default=None)
        if name != "cosmo-run":
            sp.add_argument("--engine", choices=("oracle", "closedform", "both"), default="closedform")
        if name == "sweep":
            sp.add_argument("--workers", type=int, default=None)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            payload = run_scenario(args.config, args.out_dir, args.engine, args.seed_override)
            print(f"{payload['class']} t_D={payload['t_D']}")
        elif args.command == "sweep":
            rows = sweep(args.config, args.out_dir, args.engine, args.workers, args.seed_override)
            print(f"{len(rows)} sweep points written")
        else:
            payload = cosmo_run(args.config, args.out_dir, args.seed_override)
            print(f"{len(payload['modes'])} modes written")
    except ConfigError as exc:
        print(f"declab: {args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (EngineError, IntegrationFailure) as exc:
        print(f"declab: {exc}", file=sys.stderr)
        return EXIT_ENGINE
    except DeclabError as exc:
        print(f"declab: {args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"declab: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
