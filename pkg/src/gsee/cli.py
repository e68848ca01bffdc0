"""Experiment runner: reproducible seeded experiments emitting CSV tables
and PNG figures from one validated config file."""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from . import acdf as _acdf
from . import baselines as _bl
from . import filters as _flt
from . import hamiltonian as _ham
from . import plotting as _plot
from . import sampler as _smp
from . import search as _srch

CLI_DIM_GUARD = 1 << 16  # largest blessed statevector (8-site Hubbard)


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Config schema.  Strict: unknown sections or keys are rejected outright.
# ---------------------------------------------------------------------------

_SCHEMA = {
    "model": {
        "kind": str,
        "sites": int,
        "t": (int, float),
        "u": (int, float),
        "boundary": str,
        "filling": list,
        "atoms": list,
    },
    "algorithm": {
        "epsilon": (int, float),
        "eta": (int, float, str),
        "failure_prob": (int, float),
        "degree_policy": str,
        "backend": (str, dict),
        "norm_bound": (int, float),
    },
    "acdf": {
        "delta": (int, float),
        "degree": int,
        "samples": int,
        "grid_points": int,
        "eta": (int, float),
    },
    "sweep": {
        "deltas": list,
        "samples": int,
        "seeds": int,
        "estimator": str,
    },
    "qpe": {
        "overlaps": list,
        "depth": int,
        "tolerance": (int, float),
        "trials": int,
        "our_trials": int,
        "our_samples": int,
        "repeats_factor": (int, float),
    },
    "filter": {
        "degree": int,
        "delta": (int, float),
    },
    "cost": {
        "methods": list,
        "epsilon": (int, float),
        "eta": (int, float),
        "tau": (int, float),
        "order": int,
        "c_trotter": (int, float),
    },
    "output": {
        "directory": str,
        "formats": list,
    },
    "seed": int,
    "threads": int,
}

_BACKEND_KEYS = {"kind": str, "order": int, "steps_per_tau": int}


def load_config(path) -> dict:
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    for section, value in raw.items():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section {section!r}")
        spec = _SCHEMA[section]
        if isinstance(spec, dict):
            if not isinstance(value, dict):
                raise ConfigError(f"section {section!r} must be a mapping")
            for key, item in value.items():
                if key not in spec:
                    raise ConfigError(f"unknown key {section}.{key}")
                if not isinstance(item, spec[key]):
                    raise ConfigError(f"{section}.{key} has type {type(item).__name__}")
        else:
            if not isinstance(value, spec):
                raise ConfigError(f"{section} has type {type(value).__name__}")
    backend = raw.get("algorithm", {}).get("backend")
    if isinstance(backend, dict):
        for key, item in backend.items():
            if key not in _BACKEND_KEYS:
                raise ConfigError(f"unknown key algorithm.backend.{key}")
            if not isinstance(item, _BACKEND_KEYS[key]):
                raise ConfigError(f"algorithm.backend.{key} has type {type(item).__name__}")
    return raw


def _flatten(cfg: dict, prefix: str = "") -> list[tuple[str, object]]:
    out = []
    for key in sorted(cfg):
        value = cfg[key]
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            out.extend(_flatten(value, name + "."))
        else:
            out.append((name, value))
    return out


def _csv_header(cfg: dict, extra: dict | None = None) -> str:
    lines = [f"# {k}={v}" for k, v in _flatten(cfg)]
    lines.extend(f"# {k}={v}" for k, v in (extra or {}).items())
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Model resolution
# ---------------------------------------------------------------------------


@dataclass
class ResolvedModel:
    H: _ham.SparseHermitian | None
    state: _ham.StateVector
    decomposition: _ham.SpectralDecomposition
    tau: float
    measure: _ham.SpectralMeasure
    ground_energy: float
    terms: list | None = None

    def backend(self, backend_cfg) -> object:
        kind = backend_cfg if isinstance(backend_cfg, str) else backend_cfg.get("kind", "exact")
        if kind == "exact":
            return _smp.ExactBackend(self.decomposition)
        if kind == "trotter":
            if self.terms is None:
                raise ConfigError("trotter backend needs a Hamiltonian with a term decomposition")
            order = backend_cfg.get("order", 2) if isinstance(backend_cfg, dict) else 2
            steps = backend_cfg.get("steps_per_tau", 1) if isinstance(backend_cfg, dict) else 1
            return _smp.TrotterBackend(self.terms, order=order, steps_per_tau=steps)
        raise ConfigError(f"unknown backend kind {kind!r}")


def resolve_model(cfg: dict) -> ResolvedModel:
    model = cfg.get("model")
    if not model or "kind" not in model:
        raise ConfigError("config needs a model section with a kind")
    kind = model["kind"]
    if kind == "atoms":
        atoms = model.get("atoms")
        if not atoms:
            raise ConfigError("atoms model needs an atoms list of [position, weight] pairs")
        positions = np.array([a[0] for a in atoms], dtype=float)
        weights = np.array([a[1] for a in atoms], dtype=float)
        measure = _ham.SpectralMeasure(positions, weights)
        dim = 1 << max(1, int(math.ceil(math.log2(max(len(atoms), 2)))))
        diag = np.zeros(dim)
        diag[: len(atoms)] = positions
        H = _ham.SparseHermitian.from_triplets(dim, np.arange(dim), np.arange(dim), diag.astype(complex))
        amps = np.zeros(dim, dtype=complex)
        amps[: len(atoms)] = np.sqrt(weights)
        state = _ham.StateVector(amps)
        decomp = _ham.spectral_decompose(H, degeneracy_tol=1e-12)
        return ResolvedModel(H, state, decomp, 1.0, measure, float(positions[0]))
    if kind == "hubbard":
        filling = model.get("filling")
        spec = _ham.HubbardSpec(
            sites=model.get("sites", 2),
            t=model.get("t", 1.0),
            u=model.get("u", 4.0),
            boundary=model.get("boundary", "open"),
            filling=tuple(filling) if filling else None,
        )
        if (1 << spec.n_qubits) > CLI_DIM_GUARD:
            raise ConfigError(
                f"{spec.sites} sites need {1 << spec.n_qubits} amplitudes; the CLI guard is {CLI_DIM_GUARD}"
            )
        H = _ham.build_hubbard(spec)
        state = _ham.hartree_fock_state(spec)
        if H.dim <= _ham.DENSE_EIG_CUTOFF:
            decomp = _ham.spectral_decompose(H)
        else:
            decomp = _ham.sector_decompose(H, spec)
        bound = cfg.get("algorithm", {}).get("norm_bound") or _ham.spectral_radius(H)
        tau = _ham.select_tau(bound=bound)
        measure = _ham.overlap_distribution(decomp, state, tau)
        return ResolvedModel(
            H, state, decomp, tau, measure, decomp.ground_energy(), terms=_ham.hubbard_terms(spec)
        )
    raise ConfigError(f"unknown model kind {kind!r}")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_acdf(cfg: dict, out_dir: Path, seed: int, threads: int) -> int:
    section = cfg.get("acdf")
    if not section or "delta" not in section:
        raise ConfigError("acdf command needs an acdf section with delta")
    model = resolve_model(cfg)
    delta = float(section["delta"])
    degree = section.get("degree", _flt.heuristic_degree(delta))
    samples = section.get("samples", 3000)
    grid_points = section.get("grid_points", 2000)
    filt = _flt.build_filter(degree, delta)
    backend = model.backend(cfg.get("algorithm", {}).get("backend", "exact"))

    batch = _srch.draw_batch_chunked(
        model.state, model.H, filt, samples, model.tau, backend, seed, threads=threads
    )
    xs = np.linspace(-_srch.SEARCH_WINDOW, _srch.SEARCH_WINDOW, grid_points)
    gbar = _acdf.g_bar(xs, batch, filt)
    acdf_exact = _acdf.exact_acdf(model.measure, filt, xs)
    cdf_exact = _acdf.exact_cdf(model.measure, xs)

    ground_x = model.tau * model.ground_energy
    meta = {"tau": model.tau, "d": degree, "delta": delta, "samples": samples, "seed": seed,
            "ground_x": ground_x}
    csv_path = out_dir / "acdf_trace.csv"
    with open(csv_path, "w") as fh:
        fh.write(_csv_header(cfg, meta))
        fh.write("x,re_gbar,im_gbar,exact_acdf,exact_cdf\n")
        for x, g, a, c in zip(xs, gbar, acdf_exact, cdf_exact):
            fh.write(f"{float(x)!r},{float(g.real)!r},{float(g.imag)!r},{float(a)!r},{float(c)!r}\n")
    _plot.acdf_figure(
        out_dir / "acdf_trace.png", xs, gbar.real, acdf_exact, cdf_exact,
        ground_x=ground_x, eta=section.get("eta"),
    )
    print(f"acdf trace: {len(xs)} points, d={degree}, delta={delta}, tau={model.tau!r}")
    print(f"wrote {csv_path} and {csv_path.with_suffix('.png')}")
    return 0


def cmd_estimate(cfg: dict, out_dir: Path, seed: int, threads: int) -> int:
    algo = cfg.get("algorithm")
    if not algo or "epsilon" not in algo:
        raise ConfigError("estimate command needs algorithm.epsilon")
    model = resolve_model(cfg)
    eta = algo.get("eta", "auto")
    if eta == "auto":
        eta = float(model.measure.weights[0])
    failure_prob = algo.get("failure_prob", 0.1)
    policy = algo.get("degree_policy", "certified")
    backend = model.backend(algo.get("backend", "exact"))
    config = _srch.derive_parameters(algo["epsilon"], eta, failure_prob, model.tau, policy)
    lam, report = _srch.estimate_ground_energy(
        model.H, model.state, algo["epsilon"], eta, failure_prob, backend, seed, config=config
    )
    block = report.format_block()
    (out_dir / "report.txt").write_text(block)
    sys.stdout.write(block)
    print(f"oracle lambda_0={model.ground_energy!r} error={abs(lam - model.ground_energy)!r}")
    return 0


def cmd_sweep(cfg: dict, out_dir: Path, seed: int, threads: int) -> int:
    section = cfg.get("sweep")
    if not section or not section.get("deltas"):
        raise ConfigError("sweep command needs a sweep section with a non-empty deltas list")
    model = resolve_model(cfg)
    samples = section.get("samples", 1800)
    n_seeds = section.get("seeds", 10)
    estimator = section.get("estimator", "heuristic")
    if estimator not in ("heuristic", "certified"):
        raise ConfigError(f"unknown estimator {estimator!r}")
    eta = float(model.measure.weights[0])
    backend = model.backend(cfg.get("algorithm", {}).get("backend", "exact"))

    rows = []
    for delta in section["deltas"]:
        delta = float(delta)
        epsilon = delta / model.tau
        degree = _flt.heuristic_degree(delta)
        filt = _flt.build_filter(degree, delta)
        errors, totals, maxima = [], [], []
        for k in range(n_seeds):
            run_seed = np.random.SeedSequence((seed, int(round(1e9 * delta)), k))
            if estimator == "heuristic":
                batch = _srch.draw_batch_chunked(
                    model.state, model.H, filt, samples, model.tau, backend, run_seed, threads=threads
                )
                est = _srch.heuristic_estimate(batch, filt, eta, model.tau)
            else:
                config = _srch.derive_parameters(epsilon, eta, 0.1, model.tau)
                est, report = _srch.estimate_ground_energy(
                    model.H, model.state, epsilon, eta, 0.1, backend, run_seed, config=config
                )
                batch = None
            if batch is not None:
                totals.append(model.tau * float(np.sum(np.abs(batch.js))))
                maxima.append(model.tau * float(np.max(np.abs(batch.js))))
            else:
                totals.append(report.total_evolution_time)
                maxima.append(report.max_evolution_time)
            errors.append(abs(est - model.ground_energy))
        rows.append(
            {
                "delta": delta,
                "epsilon": epsilon,
                "d": degree,
                "mean_error": float(np.mean(errors)),
                "frac_within_eps": float(np.mean(np.asarray(errors) <= epsilon)),
                "total_evolution_time": float(np.mean(totals)),
                "max_evolution_time": float(np.mean(maxima)),
            }
        )

    csv_path = out_dir / "sweep.csv"
    with open(csv_path, "w") as fh:
        fh.write(_csv_header(cfg, {"seed": seed}))
        keys = list(rows[0].keys())
        fh.write(",".join(keys) + "\n")
        for row in rows:
            fh.write(",".join(repr(row[k]) for k in keys) + "\n")
        if len(rows) >= 2:
            eps = np.log([r["epsilon"] for r in rows])
            for label, field in (
                ("slope_total", "total_evolution_time"),
                ("slope_max", "max_evolution_time"),
                ("slope_error", "mean_error"),
            ):
                slope = float(np.polyfit(eps, np.log([r[field] for r in rows]), 1)[0])
                fh.write(f"# {label}={slope!r}\n")
    _plot.sweep_figure(
        out_dir / "sweep.png",
        [r["epsilon"] for r in rows],
        [r["total_evolution_time"] for r in rows],
        [r["max_evolution_time"] for r in rows],
        [r["mean_error"] for r in rows],
    )
    print(f"sweep over {len(rows)} deltas x {n_seeds} seeds written to {csv_path}")
    return 0


def cmd_qpe_compare(cfg: dict, out_dir: Path, seed: int, threads: int) -> int:
    section = cfg.get("qpe")
    if not section or not section.get("overlaps"):
        raise ConfigError("qpe-compare needs a qpe section with an overlaps list")
    model = resolve_model(cfg)
    overlaps = [float(p) for p in section["overlaps"]]
    depth = section.get("depth", 300)
    tolerance = section.get("tolerance", 0.04)
    trials = section.get("trials", 200)
    our_trials = section.get("our_trials", min(trials, 50))
    our_samples = section.get("our_samples", 200_000)
    factor = section.get("repeats_factor", 6.0)

    ground = model.decomposition.ground_vector()
    x0 = model.tau * model.ground_energy
    delta = 4.0 / depth
    filt = _flt.build_filter(depth, delta)
    rng = np.random.default_rng(np.random.SeedSequence((seed, 17)))

    curves = {name: ([], []) for name in ("qpe-fixed", "qpe-scaled", "this-work")}
    for p0 in overlaps:
        state = _bl.tune_overlap(model.state, ground, p0)
        measure = _ham.overlap_distribution(model.decomposition, state, model.tau)
        repeats = math.ceil(factor / p0)
        dist_fixed = _bl.qpe_distribution(measure, depth, model.tau)
        dist_scaled = _bl.qpe_distribution(measure, math.ceil(depth * overlaps[0] / p0), model.tau)
        for name, dist in (("qpe-fixed", dist_fixed), ("qpe-scaled", dist_scaled)):
            errs = np.array(
                [abs(_bl.qpe_min_estimate(dist, repeats, rng) * model.tau - x0) for _ in range(trials)]
            )
            curves[name][0].append(float(errs.mean()))
            curves[name][1].append(float(np.mean(errs > tolerance)))
        backend = _smp.ExactBackend(model.decomposition)
        errs = []
        for k in range(our_trials):
            run_seed = np.random.SeedSequence((seed, int(round(1e6 * p0)), k))
            batch = _srch.draw_batch_chunked(
                state, model.H, filt, our_samples, model.tau, backend, run_seed, threads=threads
            )
            est = _srch.heuristic_estimate(batch, filt, p0, model.tau)
            errs.append(abs(est * model.tau - x0))
        errs = np.array(errs)
        curves["this-work"][0].append(float(errs.mean()))
        curves["this-work"][1].append(float(np.mean(errs > tolerance)))

    csv_path = out_dir / "qpe_compare.csv"
    with open(csv_path, "w") as fh:
        fh.write(_csv_header(cfg, {"seed": seed, "tau": model.tau}))
        fh.write("p0,method,mean_error,failure_rate\n")
        for i, p0 in enumerate(overlaps):
            for name in curves:
                fh.write(f"{p0!r},{name},{curves[name][0][i]!r},{curves[name][1][i]!r}\n")
    _plot.qpe_compare_figure(out_dir / "qpe_compare.png", overlaps, curves)
    print(f"qpe comparison over p0={overlaps} written to {csv_path}")
    return 0


def cmd_filter_inspect(cfg: dict, out_dir: Path, seed: int, threads: int,
                       degree: int | None = None, delta: float | None = None,
                       check: str | None = None) -> int:
    if check is not None:
        filt = _flt.load_filter(check)
        sym = np.max(np.abs(filt.coeffs - np.conj(filt.coeffs[::-1])))
        js = filt.js[filt.js != 0]
        decay = np.abs(filt.coeffs[filt.js != 0]) * np.pi * np.abs(js) - (1.0 + filt.eps_bound)
        worst = float(np.max(decay))
        print(f"checked {check}: conj_symmetry_residual={sym!r} decay_margin={-worst!r}")
        if worst > 1e-12 or sym > 1e-12:
            print("filter file violates its bounds", file=sys.stderr)
            return 1
        return 0
    section = cfg.get("filter", {})
    degree = degree if degree is not None else section.get("degree")
    delta = delta if delta is not None else section.get("delta")
    if degree is None or delta is None:
        raise ConfigError("filter-inspect needs filter.degree and filter.delta (or flags)")
    filt = _flt.build_filter(int(degree), float(delta))
    path = out_dir / f"filter_d{degree}.txt"
    _flt.save_filter(filt, path)
    reloaded = _flt.load_filter(path)
    roundtrip = np.array_equal(reloaded.coeffs, filt.coeffs) and reloaded.eps_achieved == filt.eps_achieved
    print(f"d={degree} delta={delta!r}")
    print(f"eps_achieved={filt.eps_achieved!r}")
    print(f"eps_bound={filt.eps_bound!r}")
    print(f"l1_norm={filt.l1_norm!r}")
    print(f"coefficient_decay_bound=pass")
    print(f"roundtrip={'pass' if roundtrip else 'FAIL'}")
    _plot.filter_figure(out_dir / f"filter_d{degree}.png", filt)
    return 0 if roundtrip else 1


def cmd_cost_model(cfg: dict, out_dir: Path, seed: int, threads: int) -> int:
    section = cfg.get("cost")
    if not section:
        raise ConfigError("cost-model needs a cost section")
    methods = section.get("methods", list(_bl.COST_METHODS[:3]))
    epsilon = section.get("epsilon", 1e-3)
    eta = section.get("eta", 0.5)
    tau = section.get("tau", 1.0)
    extras = {"order": section.get("order", 2), "c_trotter": section.get("c_trotter", 1.0)}
    blocks = []
    for method in methods:
        report = _bl.cost_model(method, epsilon, eta, tau, extras)
        blocks.append(report.format_block())
    text = "\n".join(blocks)
    (out_dir / "cost_model.txt").write_text(text)
    sys.stdout.write(text)
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

_COMMANDS = {
    "acdf": cmd_acdf,
    "estimate": cmd_estimate,
    "sweep": cmd_sweep,
    "qpe-compare": cmd_qpe_compare,
    "filter-inspect": cmd_filter_inspect,
    "cost-model": cmd_cost_model,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="gsee", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("config", help="path to the YAML/JSON experiment config")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out-dir", default=None, help="override output.directory")
        p.add_argument("--threads", type=int, default=None, help="sampling worker threads")
        if name == "filter-inspect":
            p.add_argument("--degree", type=int, default=None)
            p.add_argument("--delta", type=float, default=None)
            p.add_argument("--check", default=None, help="verify an exported filter file")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        seed = args.seed if args.seed is not None else cfg.get("seed", 0)
        threads = args.threads if args.threads is not None else cfg.get("threads", 1)
        out_dir = Path(args.out_dir or cfg.get("output", {}).get("directory", "out"))
        out_dir.mkdir(parents=True, exist_ok=True)
        kwargs = {}
        if args.command == "filter-inspect":
            kwargs = {"degree": args.degree, "delta": args.delta, "check": args.check}
        return _COMMANDS[args.command](cfg, out_dir, seed, threads, **kwargs)
    except (ConfigError, _ham.HamiltonianError, _flt.FilterError, _acdf.AcdfError,
            _srch.SearchError, _smp.SamplerError, _bl.BaselineError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
