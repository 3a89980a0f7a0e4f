"""Command line experiment runner.

Each subcommand reads a JSON config, runs one pipeline, and writes its
artifacts (reports as JSON lines, traces and summaries as CSV, optional
static SVG plots) into the output directory.  Identical (config, seed)
pairs produce byte-identical CSV and JSON outputs: floats are formatted
at 17 significant digits, map keys are sorted, and every file embeds the
config digest and the effective seed.

Exit codes: 0 all checks pass (estimate-level shortfalls only warn),
1 a parameter-free inequality failed, 2 a user-supplied constant failed,
64 the config is malformed, 65 a numeric pipeline step broke down.

Heavy imports happen after flag parsing so that --threads can pin the
BLAS pool sizes before numpy loads; see the lazy package __init__.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

EXIT_OK = 0
EXIT_THEOREM = 1
EXIT_CONSTANT = 2
EXIT_SCHEMA = 64
EXIT_NUMERIC = 65

_PROVENANCES = ["exact", "user-supplied", "estimated lower bound", "probed"]
_MODEL_KINDS = ["block", "double_well", "gaussian_grid", "ising", "random_dominated", "two_point"]
_COST_KINDS = ["metric", "squared_metric", "zero_one"]

_MODEL_SCHEMA = {
    "oneOf": [
        {"type": "string", "minLength": 1},
        {
            "type": "object",
            "properties": {
                "kind": {"enum": _MODEL_KINDS},
                "params": {"type": "object"},
                "seed": {"type": "integer", "minimum": 0},
            },
            "required": ["kind"],
            "additionalProperties": False,
        },
    ]
}

_MEASURE_SCHEMA = {
    "oneOf": [
        {
            "type": "object",
            "properties": {"kind": {"const": "component"}, "index": {"type": "integer", "minimum": 0}},
            "required": ["kind", "index"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {"kind": {"const": "point"}, "state": {"type": "integer", "minimum": 0}},
            "required": ["kind", "state"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {"kind": {"const": "stationary"}},
            "required": ["kind"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {"kind": {"const": "uniform"}},
            "required": ["kind"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {
                "kind": {"const": "mass"},
                "values": {"type": "array", "items": {"type": "number"}, "minItems": 1},
            },
            "required": ["kind", "values"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {"kind": {"const": "random"}, "seed": {"type": "integer", "minimum": 0}},
            "required": ["kind"],
            "additionalProperties": False,
        },
    ]
}

_CONSTANT_SCHEMA = {
    "type": "object",
    "properties": {
        "value": {"type": "number", "exclusiveMinimum": 0},
        "provenance": {"enum": _PROVENANCES},
    },
    "required": ["value"],
    "additionalProperties": False,
}

_CONSTANTS_SCHEMA = {
    "type": "object",
    "properties": {
        "C": _CONSTANT_SCHEMA,
        "C_prime": _CONSTANT_SCHEMA,
        "C_talagrand": _CONSTANT_SCHEMA,
        "C_poincare": _CONSTANT_SCHEMA,
    },
    "additionalProperties": False,
}

_ALPHA_SCHEMA = {
    "type": "object",
    "properties": {
        "scale": {"type": "number", "exclusiveMinimum": 0},
        "exponent": {"type": "number", "minimum": 1},
        "provenance": {"enum": _PROVENANCES},
        "calibrate": {"type": "boolean"},
        "certified": {"type": "boolean"},
        "safety": {"type": "number", "minimum": 1},
    },
    "additionalProperties": False,
}

_TIMES_SCHEMA = {
    "oneOf": [
        {"type": "array", "items": {"type": "number"}, "minItems": 2},
        {
            "type": "object",
            "properties": {
                "stop": {"type": "number", "exclusiveMinimum": 0},
                "num": {"type": "integer", "minimum": 2},
            },
            "required": ["stop", "num"],
            "additionalProperties": False,
        },
    ]
}

_WINDOW_SCHEMA = {
    "type": "object",
    "properties": {"lo": {"type": "number"}, "hi": {"type": "number"}},
    "required": ["lo", "hi"],
    "additionalProperties": False,
}


def _schema(experiment: str, extra: dict, required=()) -> dict:
    props = {
        "experiment": {"const": experiment},
        "seed": {"type": "integer", "minimum": 0},
        "out": {"type": "string"},
    }
    props.update(extra)
    return {
        "type": "object",
        "properties": props,
        "required": ["experiment", *required],
        "additionalProperties": False,
    }


SCHEMAS = {
    "verify": _schema(
        "verify",
        {
            "model": _MODEL_SCHEMA,
            "mu": _MEASURE_SCHEMA,
            "constants": _CONSTANTS_SCHEMA,
            "alpha": _ALPHA_SCHEMA,
            "cost": {"enum": _COST_KINDS},
            "probes": {"type": "integer", "minimum": 1},
        },
        required=("model", "mu"),
    ),
    "evolve": _schema(
        "evolve",
        {
            "model": _MODEL_SCHEMA,
            "mu0": _MEASURE_SCHEMA,
            "times": _TIMES_SCHEMA,
            "constants": _CONSTANTS_SCHEMA,
            "estimate_c_prime": {
                "type": "object",
                "properties": {
                    "starts": {"type": "integer", "minimum": 1},
                    "max_iter": {"type": "integer", "minimum": 1},
                },
                "additionalProperties": False,
            },
            "dissipation": {"type": "boolean"},
        },
        required=("model", "mu0", "times"),
    ),
    "transport": _schema(
        "transport",
        {
            "model": _MODEL_SCHEMA,
            "mu": _MEASURE_SCHEMA,
            "cost": {"enum": _COST_KINDS},
            "alpha": _ALPHA_SCHEMA,
            "probes": {"type": "integer", "minimum": 1},
        },
        required=("model", "mu", "cost"),
    ),
    "concentration": _schema(
        "concentration",
        {
            "model": _MODEL_SCHEMA,
            "mu0": _MEASURE_SCHEMA,
            "f": {
                "oneOf": [
                    {"const": "coordinate"},
                    {"type": "array", "items": {"type": "number"}, "minItems": 1},
                ]
            },
            "horizon": {"type": "number", "exclusiveMinimum": 0},
            "count": {"type": "integer", "minimum": 1},
            "thresholds": {
                "type": "array",
                "items": {"type": "number", "exclusiveMinimum": 0},
                "minItems": 1,
            },
            "C": _CONSTANT_SCHEMA,
            "probes": {"type": "integer", "minimum": 1},
        },
        required=("model", "mu0", "f", "horizon", "count"),
    ),
    "constants": _schema(
        "constants",
        {
            "model": _MODEL_SCHEMA,
            "estimate": {
                "type": "object",
                "properties": {
                    "mode": {"enum": ["lsi", "mlsi"]},
                    "starts": {"type": "integer", "minimum": 1},
                    "max_iter": {"type": "integer", "minimum": 1},
                    "parent": {"type": "boolean"},
                },
                "additionalProperties": False,
            },
        },
        required=("model",),
    ),
    "bimodal": _schema(
        "bimodal",
        {
            "separation": {"type": "number", "minimum": 0},
            "window": _WINDOW_SCHEMA,
            "n": {"type": "integer", "minimum": 3},
        },
        required=("separation",),
    ),
    "sweep": _schema(
        "sweep",
        {
            "separations": {
                "type": "array",
                "items": {"type": "number", "minimum": 0},
                "minItems": 1,
            },
            "window": _WINDOW_SCHEMA,
            "n": {"type": "integer", "minimum": 3},
        },
        required=("separations",),
    ),
}


class _SchemaProblem(Exception):
    pass


class _PipelineFailure(Exception):
    def __init__(self, operation: str, cause: Exception):
        super().__init__(f"numeric failure in {operation}: {cause}")
        self.operation = operation
        self.cause = cause


def _step(operation: str, fn, *args, **kwargs):
    """Run one pipeline stage, naming it if the numerics give out."""
    from .errors import MixlabError

    try:
        return fn(*args, **kwargs)
    except MixlabError as exc:
        raise _PipelineFailure(operation, exc) from exc


def _load_config(path: str) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise _SchemaProblem(f"cannot read config {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise _SchemaProblem(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise _SchemaProblem(f"config {path}: top level must be an object")
    return doc


def _validate(config: dict, experiment: str, path: str) -> None:
    import jsonschema

    validator = jsonschema.Draft202012Validator(SCHEMAS[experiment])
    errors = list(validator.iter_errors(config))
    if errors:
        best = jsonschema.exceptions.best_match(errors)
        raise _SchemaProblem(f"config {path}: {best.json_path}: {best.message}")


# ---------------------------------------------------------------------------
# config interpretation (bad values here are configuration errors, exit 64)


def _interpret_model(doc, base_dir: Path):
    from .models import ModelSpec

    if isinstance(doc, str):
        model_path = Path(doc)
        if not model_path.is_absolute():
            model_path = base_dir / model_path
        try:
            loaded = json.loads(model_path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise _SchemaProblem(f"cannot load model file {model_path}: {exc}") from exc
        doc = loaded
    spec = ModelSpec.from_dict(doc)
    try:
        return spec, spec.build()
    except TypeError as exc:
        from .errors import ConfigurationError

        raise ConfigurationError(f"bad parameters for model {spec.kind!r}: {exc}") from exc


def _interpret_measure(doc: dict, gm, seed: int):
    import numpy as np

    from .errors import ConfigurationError
    from .measures import FiniteMeasure
    from .rng import random_probability, stream

    kind = doc["kind"]
    if kind == "component":
        idx = doc["index"]
        if idx >= gm.m:
            raise ConfigurationError(f"component index {idx} out of range for m={gm.m}")
        return gm.mix.components[idx]
    if kind == "point":
        state = doc["state"]
        if state >= gm.space.size:
            raise ConfigurationError(f"state {state} out of range for n={gm.space.size}")
        mass = np.zeros(gm.space.size)
        mass[state] = 1.0
        return FiniteMeasure(gm.space, mass)
    if kind == "stationary":
        return gm.mix.parent
    if kind == "uniform":
        return FiniteMeasure(gm.space, np.full(gm.space.size, 1.0 / gm.space.size))
    if kind == "mass":
        return FiniteMeasure(gm.space, np.asarray(doc["values"], dtype=float))
    # random draw on the stationary support, so divergences stay finite
    rng = stream(int(doc.get("seed", seed)), "cli-measure")
    mass = np.zeros(gm.space.size)
    on = np.flatnonzero(gm.mix.parent.mass > 0)
    mass[on] = random_probability(rng, on.size)
    return FiniteMeasure(gm.space, mass)


def _interpret_constants(doc: dict | None) -> dict:
    from .reports import PROVENANCE_USER, Constant

    out = {}
    for name, entry in (doc or {}).items():
        out[name] = Constant(name, float(entry["value"]), entry.get("provenance", PROVENANCE_USER))
    return out


def _interpret_cost(kind: str, gm):
    from .transport import CostMatrix

    return CostMatrix.from_state_metric(gm.space, kind=kind)


def _interpret_alpha(doc: dict, gm, cost, seed: int, probes: int):
    from .errors import ConfigurationError
    from .inequalities import calibrate_alpha, tv_alpha
    from .reports import PROVENANCE_EXACT, PROVENANCE_PROBED, PROVENANCE_USER
    from .transport import AlphaFunction

    if doc.get("certified"):
        return tv_alpha(gm, cost), PROVENANCE_EXACT
    if doc.get("calibrate"):
        alpha = calibrate_alpha(
            gm,
            cost,
            seed=seed,
            probes=probes,
            exponent=float(doc.get("exponent", 2.0)),
            safety=float(doc.get("safety", 1.25)),
        )
        return alpha, doc.get("provenance", PROVENANCE_PROBED)
    if "scale" not in doc:
        raise ConfigurationError("alpha needs either calibrate=true or an explicit scale")
    alpha = AlphaFunction.power(float(doc["scale"]), float(doc.get("exponent", 2.0)))
    return alpha, doc.get("provenance", PROVENANCE_USER)


def _interpret_times(doc):
    import numpy as np

    if isinstance(doc, dict):
        return np.linspace(0.0, float(doc["stop"]), int(doc["num"]))
    return np.asarray(doc, dtype=float)


def _interpret_f(doc, gm):
    import numpy as np

    from .errors import ConfigurationError

    if doc == "coordinate":
        if gm.space.coords is None:
            raise ConfigurationError("f='coordinate' needs a space with coordinates")
        return np.asarray(gm.space.coords, dtype=float)
    return np.asarray(doc, dtype=float)


# ---------------------------------------------------------------------------
# artifact writing


class _Run:
    """Shared context: effective config, digest, output paths, plot flag."""

    def __init__(self, experiment, config, seed, out_dir, plots):
        from .serialize import digest

        self.experiment = experiment
        self.config = config
        self.seed = seed
        self.out = Path(out_dir)
        self.plots = plots
        effective = {k: v for k, v in config.items() if k != "out"}
        effective["seed"] = seed
        self.digest = digest(effective)

    @property
    def preamble(self) -> str:
        return f"config_digest={self.digest} seed={self.seed}"

    @property
    def header(self) -> dict:
        return {"config_digest": self.digest, "seed": self.seed}

    def path(self, name: str) -> Path:
        return self.out / name

    def write_reports(self, reports) -> None:
        from .reports import reports_to_csv, reports_to_jsonl

        reports_to_jsonl(self.path("reports.jsonl"), reports, header=self.header)
        reports_to_csv(self.path("summary.csv"), reports, preamble=self.preamble)

    def write_model(self, gm, spec=None) -> None:
        from .serialize import generator_mixture_to_dict, write_json

        doc = dict(self.header)
        if spec is not None:
            doc["model_spec"] = spec.to_dict()
        doc["model"] = generator_mixture_to_dict(gm)
        write_json(self.path("model.json"), doc)

    def write_values(self, name: str, values: dict) -> None:
        from .serialize import write_json

        doc = dict(self.header)
        doc.update(values)
        write_json(self.path(name), doc)

    def figure(self):
        import matplotlib

        matplotlib.use("Agg")
        matplotlib.rcParams["svg.hashsalt"] = self.digest
        import matplotlib.pyplot as plt

        return plt

    def save_figure(self, plt, fig, name: str) -> None:
        fig.text(0.01, 0.01, self.preamble, fontsize=5, color="0.55")
        fig.savefig(self.path(name), format="svg", metadata={"Date": None})
        plt.close(fig)


# ---------------------------------------------------------------------------
# pipelines; each returns the reports that drive the exit code


def _run_verify(run: _Run, base_dir: Path):
    from .inequalities import verify_corollaries, verify_reweighted_lsi, verify_reweighted_ti
    from .transport import CostMatrix

    cfg = run.config
    spec, gm = _interpret_model(cfg["model"], base_dir)
    mu = _interpret_measure(cfg["mu"], gm, run.seed)
    constants = _interpret_constants(cfg.get("constants"))
    probes = int(cfg.get("probes", 200))

    reports = _step("verify_reweighted_lsi", verify_reweighted_lsi, mu, gm, constants, seed=run.seed)
    c_metric = None
    if gm.space.metric is not None:
        c_metric = CostMatrix.from_state_metric(gm.space, kind="metric")
    reports += _step(
        "verify_corollaries", verify_corollaries, mu, gm, c_metric, constants, seed=run.seed
    )
    if "alpha" in cfg:
        cost = _interpret_cost(cfg.get("cost", "zero_one"), gm)
        alpha, provenance = _interpret_alpha(cfg["alpha"], gm, cost, run.seed, probes)
        reports += _step(
            "verify_reweighted_ti",
            verify_reweighted_ti,
            mu,
            gm,
            cost,
            alpha,
            seed=run.seed,
            probes=probes,
            alpha_provenance=provenance,
        )
    run.write_reports(reports)
    run.write_model(gm, spec)
    return reports


def _run_evolve(run: _Run, base_dir: Path):
    from .dynamics import dissipation_check, evolve, metastability_report
    from .reports import PROVENANCE_ESTIMATE, Constant
    from .serialize import write_csv

    cfg = run.config
    spec, gm = _interpret_model(cfg["model"], base_dir)
    mu0 = _interpret_measure(cfg["mu0"], gm, run.seed)
    times = _interpret_times(cfg["times"])
    constants = _interpret_constants(cfg.get("constants"))

    trace = _step("evolve", evolve, gm.parent_generator, mu0, times, mixture=gm)
    reports = []
    c_prime = constants.get("C_prime")
    if c_prime is None and "estimate_c_prime" in cfg:
        from .dirichlet import estimate_lsi_constant

        opts = cfg["estimate_c_prime"]
        est = max(
            _step(
                "estimate_c_prime",
                estimate_lsi_constant,
                gen,
                "mlsi",
                seed=run.seed,
                starts=int(opts.get("starts", 16)),
                max_iter=int(opts.get("max_iter", 10_000)),
            ).value
            for gen in gm.component_generators
        )
        c_prime = Constant("C_prime", est, PROVENANCE_ESTIMATE)
    if c_prime is not None:
        reports += _step("metastability_report", metastability_report, trace, c_prime, seed=run.seed)
    if cfg.get("dissipation"):
        reports += _step("dissipation_check", dissipation_check, trace, gm.parent_generator)

    header, rows = trace.csv_rows()
    write_csv(run.path("trace.csv"), header, rows, preamble=run.preamble)
    run.write_reports(reports)
    run.write_model(gm, spec)
    if run.plots:
        plt = run.figure()
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(trace.times, trace.kl_t, label="KL(mu_t || pi)")
        if trace.has_mixture_diagnostics:
            ax.plot(trace.times, trace.kl_hull_t, label="KL(mu_t || hull)")
            ax.plot(trace.times, trace.delta_t, label="delta(t)")
        ax.set_xlabel("t")
        ax.set_yscale("log")
        ax.legend()
        run.save_figure(plt, fig, "trace.svg")
    return reports


def _run_transport(run: _Run, base_dir: Path):
    from .inequalities import verify_reweighted_ti
    from .reports import make_report
    from .serialize import coupling_to_csv, potentials_to_csv
    from .transport import dual_to_hull, ot_cost, ot_to_hull

    cfg = run.config
    spec, gm = _interpret_model(cfg["model"], base_dir)
    mu = _interpret_measure(cfg["mu"], gm, run.seed)
    cost = _interpret_cost(cfg["cost"], gm)
    probes = int(cfg.get("probes", 200))

    sol = _step("ot_cost", ot_cost, mu, gm.mix.parent, cost)
    hull = _step("ot_to_hull", ot_to_hull, mu, gm.mix, cost)
    dual = _step("dual_to_hull", dual_to_hull, mu, gm.mix, cost)
    dig = run.digest
    reports = [
        make_report(
            "transport_hull_dominated",
            hull.value,
            sol.value,
            inputs_digest=dig,
            note="the stationary mixture is itself a hull point",
        ),
        make_report(
            "transport_strong_duality",
            abs(dual.value - hull.value),
            1e-6 * (1.0 + abs(hull.value)),
            inputs_digest=dig,
            note="independently solved dual vs primal hull program",
        ),
    ]
    if "alpha" in cfg:
        alpha, provenance = _interpret_alpha(cfg["alpha"], gm, cost, run.seed, probes)
        reports += _step(
            "verify_reweighted_ti",
            verify_reweighted_ti,
            mu,
            gm,
            cost,
            alpha,
            seed=run.seed,
            probes=probes,
            alpha_provenance=provenance,
        )
    coupling_to_csv(run.path("coupling.csv"), hull.coupling, preamble=run.preamble)
    potentials_to_csv(run.path("potentials.csv"), hull.f, hull.g, preamble=run.preamble)
    run.write_values(
        "values.json",
        {
            "cost": cost.kind,
            "transport_to_parent": sol.value,
            "transport_to_hull": hull.value,
            "dual_to_hull": dual.value,
            "lambda_hat": hull.lambda_hat.mass,
        },
    )
    run.write_reports(reports)
    run.write_model(gm, spec)
    return reports


def _run_concentration(run: _Run, base_dir: Path):
    from .dynamics import concentration_experiment
    from .serialize import write_csv

    cfg = run.config
    spec, gm = _interpret_model(cfg["model"], base_dir)
    mu0 = _interpret_measure(cfg["mu0"], gm, run.seed)
    f = _interpret_f(cfg["f"], gm)
    C = None
    if "C" in cfg:
        C = _interpret_constants({"C": cfg["C"]})["C"]

    result = _step(
        "concentration_experiment",
        concentration_experiment,
        gm,
        mu0,
        f,
        float(cfg["horizon"]),
        int(cfg["count"]),
        run.seed,
        C,
        thresholds=cfg.get("thresholds"),
        probes=int(cfg.get("probes", 200)),
    )
    rows = [
        (r, emp, b, s, bool(p))
        for r, emp, b, s, p in zip(
            result.thresholds, result.empirical, result.bounds, result.slacks, result.passes
        )
    ]
    write_csv(
        run.path("concentration.csv"),
        ("threshold", "empirical", "bound", "slack", "pass"),
        rows,
        preamble=run.preamble,
    )
    run.write_values("values.json", result.to_dict())
    run.write_reports(result.reports)
    run.write_model(gm, spec)
    if run.plots:
        plt = run.figure()
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.semilogy(result.thresholds, result.empirical, "o-", label="empirical tail")
        ax.semilogy(result.thresholds, result.bounds, "s--", label="deviation bound")
        ax.set_xlabel("threshold r")
        ax.legend()
        run.save_figure(plt, fig, "concentration.svg")
    return list(result.reports)


def _run_constants(run: _Run, base_dir: Path):
    from .dirichlet import estimate_lsi_constant, spectral_gap
    from .inequalities import exact_component_poincare

    cfg = run.config
    spec, gm = _interpret_model(cfg["model"], base_dir)
    values = {
        "parent_gap": _step("spectral_gap", spectral_gap, gm.parent_generator),
        "component_gaps": [
            _step(f"spectral_gap[{i}]", spectral_gap, gen)
            for i, gen in enumerate(gm.component_generators)
        ],
    }
    poincare = _step("exact_component_poincare", exact_component_poincare, gm)
    values["C_poincare"] = {"value": poincare.value, "provenance": poincare.provenance}
    if "estimate" in cfg:
        opts = cfg["estimate"]
        mode = opts.get("mode", "mlsi")
        kwargs = {
            "seed": run.seed,
            "starts": int(opts.get("starts", 16)),
            "max_iter": int(opts.get("max_iter", 10_000)),
        }
        per_component = [
            _step(f"estimate_lsi_constant[{i}]", estimate_lsi_constant, gen, mode, **kwargs)
            for i, gen in enumerate(gm.component_generators)
        ]
        key = "C" if mode == "lsi" else "C_prime"
        values[key] = {
            "value": max(e.value for e in per_component),
            "provenance": per_component[0].provenance,
            "mode": mode,
            "per_component": [e.value for e in per_component],
        }
        if opts.get("parent"):
            est = _step(
                "estimate_lsi_constant[parent]",
                estimate_lsi_constant,
                gm.parent_generator,
                mode,
                mixture=gm.mix,
                **kwargs,
            )
            values[f"parent_{key}"] = {"value": est.value, "provenance": est.provenance, "mode": mode}
    run.write_values("constants.json", values)
    run.write_model(gm, spec)
    for name in ("parent_gap", "C_poincare"):
        print(f"{name} = {values[name]}")
    return []


def _run_bimodal(run: _Run, base_dir: Path):
    from .continuum import Grid1D, two_mode_report

    cfg = run.config
    grid = None
    if "window" in cfg:
        grid = Grid1D(float(cfg["window"]["lo"]), float(cfg["window"]["hi"]), int(cfg.get("n", 801)))
    study = _step("two_mode_report", two_mode_report, float(cfg["separation"]), grid=grid, n=int(cfg.get("n", 801)))
    doc = study.to_dict()
    doc.pop("reports")
    run.write_values("values.json", doc)
    run.write_reports(study.reports)
    if run.plots:
        import numpy as np

        plt = run.figure()
        x = study.grid.points()
        fig, ax = plt.subplots(figsize=(6, 4))
        pi_mass = study.mixture.mix.parent.mass
        mu_mass = study.mixture.mix.reweighted(np.asarray([0.75, 0.25])).mass
        ax.plot(x, pi_mass / study.grid.h, label="stationary density")
        ax.plot(x, mu_mass / study.grid.h, label="test density")
        ax.set_xlabel("x")
        ax.legend()
        run.save_figure(plt, fig, "densities.svg")
    return list(study.reports)


def _run_sweep(run: _Run, base_dir: Path):
    from .continuum import Grid1D, two_mode_report
    from .serialize import write_csv

    cfg = run.config
    grid = None
    if "window" in cfg:
        grid = Grid1D(float(cfg["window"]["lo"]), float(cfg["window"]["hi"]), int(cfg.get("n", 801)))
    rows = []
    reports = []
    for sep in cfg["separations"]:
        study = _step(
            f"two_mode_report[m={sep:g}]",
            two_mode_report,
            float(sep),
            grid=grid,
            n=int(cfg.get("n", 801)),
        )
        rows.append(
            (
                study.separation,
                study.kl,
                study.fi,
                float(study.lambda_star[0]),
                float(study.lambda_star[1]),
                study.kl_hull,
                study.w2sq_hull,
            )
        )
        reports += list(study.reports)
    write_csv(
        run.path("sweep.csv"),
        ("m", "kl", "fi", "lambda1", "lambda2", "kl_hull", "w2sq_hull"),
        rows,
        preamble=run.preamble,
    )
    run.write_reports(reports)
    if run.plots:
        plt = run.figure()
        fig, ax = plt.subplots(figsize=(6, 4))
        ms = [r[0] for r in rows]
        ax.semilogy(ms, [max(r[1], 1e-300) for r in rows], "o-", label="KL(mu || pi)")
        ax.semilogy(ms, [max(r[2], 1e-300) for r in rows], "s--", label="FI(mu || pi)")
        ax.set_xlabel("mode separation m")
        ax.legend()
        run.save_figure(plt, fig, "sweep.svg")
    return reports


_PIPELINES = {
    "verify": _run_verify,
    "evolve": _run_evolve,
    "transport": _run_transport,
    "concentration": _run_concentration,
    "constants": _run_constants,
    "bimodal": _run_bimodal,
    "sweep": _run_sweep,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mixlab",
        description="Mixture decomposition experiments: verify inequalities, "
        "evolve chains, solve transport programs, and reproduce the "
        "two-mode benchmark.",
    )
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name, helptext in (
        ("verify", "check the reweighted inequalities on one instance"),
        ("evolve", "integrate the master equation and check relaxation bounds"),
        ("transport", "solve the hull transport programs and their dual"),
        ("concentration", "compare trajectory tail frequencies with the deviation bound"),
        ("constants", "compute spectral gaps and estimate functional constants"),
        ("bimodal", "run the symmetric two-mode benchmark at one separation"),
        ("sweep", "run the two-mode benchmark over a list of separations"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True, help="path to the JSON experiment config")
        p.add_argument("--out", default=None, help="output directory (default from config)")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--plots", action="store_true", help="also write static SVG plots")
        p.add_argument("--threads", type=int, default=None, help="pin BLAS thread-pool size")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.threads is not None and args.threads >= 1:
        for var in (
            "OMP_NUM_THREADS",
            "OPENBLAS_NUM_THREADS",
            "MKL_NUM_THREADS",
            "NUMEXPR_NUM_THREADS",
        ):
            os.environ[var] = str(args.threads)

    try:
        config = _load_config(args.config)
        _validate(config, args.experiment, args.config)
    except _SchemaProblem as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA

    seed = args.seed if args.seed is not None else int(config.get("seed", 0))
    out_dir = args.out or config.get("out") or f"{args.experiment}_out"
    os.makedirs(out_dir, exist_ok=True)
    run = _Run(args.experiment, config, seed, out_dir, args.plots)
    base_dir = Path(args.config).resolve().parent

    from .errors import MixlabError
    from .reports import failure_severity

    try:
        reports = _PIPELINES[args.experiment](run, base_dir)
    except _SchemaProblem as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except _PipelineFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except MixlabError as exc:
        # raised while interpreting config values (bad model parameters etc.)
        print(f"error: config {args.config}: {exc}", file=sys.stderr)
        return EXIT_SCHEMA

    worst = EXIT_OK
    for report in reports:
        print(report.summary_line())
        severity = failure_severity(report)
        if severity == "theorem_failure":
            worst = EXIT_THEOREM
        elif severity == "constant_failure" and worst != EXIT_THEOREM:
            worst = EXIT_CONSTANT
        elif severity == "estimate_warning":
            print(
                f"warning: {report.name} fell short with estimated constants",
                file=sys.stderr,
            )
    print(f"artifacts written to {run.out} (config digest {run.digest})")
    return worst


if __name__ == "__main__":
    sys.exit(main())
