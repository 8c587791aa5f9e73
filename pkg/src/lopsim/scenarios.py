"""Scenario configs, the experiments they run, and the reports they produce."""

from __future__ import annotations

import copy
import csv
import io
import json
import math
import time
from collections.abc import Callable
from dataclasses import dataclass, field
from importlib import resources

import jsonschema
import numpy as np

from . import __version__
from .fock import FockSpace, PureState, fidelity, make_basis_state, random_state
from .gates import (
    CNOT_MATRIX,
    NS_SUCCESS_PROBABILITY,
    DualRailQubit,
    PolarizationQubit,
    csign_branch,
    cnot_polarization_branches,
    logical_matrix,
    logical_readout,
    logical_state,
    logical_vector,
    ns_gate,
    phase_aligned_error,
)
from .interferometer import (
    BeamSplitter,
    apply_element,
    apply_mode_unitary,
    permanent,
    permanent_naive,
    random_circuit,
)
from .measurement import make_rng
from .teleport import (
    LOSS_THRESHOLD_PER_GATE,
    make_resource,
    memory_cycle,
    single_cycle_survival,
    teleport_branches,
)

SCHEMA_VERSION = 1

# Success probability the CSIGN contract states for the two-NS construction.
CSIGN_STATED_PROBABILITY = 0.125
CNOT_STATED_PROBABILITY = 0.25

DEFAULTS: dict[str, dict] = {
    "ns_demo": {"trials": 1000},
    "csign_demo": {"superpositions": 5},
    "cnot_demo": {"superpositions": 5},
    "hom_scan": {"points": 33, "theta_min": 0.0, "theta_max": math.pi / 2},
    "teleport_scan": {"n_values": [1, 2, 3], "amplitudes": [[0.6, 0.0], [0.0, 0.8]]},
    "memory_scan": {"cycles": 10, "per_cycle_loss": 0.05, "trajectories": 1000,
                    "amplitudes": [[0.6, 0.0], [0.0, 0.8]]},
    "kernel_crosscheck": {"circuits": 100, "max_modes": 5, "max_photons": 4, "depth": 10,
                          "max_permanent_size": 6},
}

KINDS = tuple(DEFAULTS)


class ScenarioError(ValueError):
    """Config file is unreadable or violates the schema."""


def load_schema() -> dict:
    return json.loads(resources.files("lopsim").joinpath("scenario.schema.json").read_text())


@dataclass(frozen=True)
class Scenario:
    name: str
    kind: str
    seed: int
    parameters: dict = field(default_factory=dict)
    version: int = SCHEMA_VERSION

    def to_dict(self) -> dict:
        return {"version": self.version, "name": self.name, "kind": self.kind,
                "seed": self.seed, "parameters": copy.deepcopy(self.parameters)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> Scenario:
        validate(data)
        params = copy.deepcopy(DEFAULTS[data["kind"]])
        params.update(copy.deepcopy(data.get("parameters", {})))
        return cls(name=data["name"], kind=data["kind"], seed=data["seed"],
                   parameters=params, version=data["version"])

    @classmethod
    def from_json(cls, text: str) -> Scenario:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
        return cls.from_dict(data)


def validate(data) -> None:
    """Raise :class:`ScenarioError` naming the offending field."""
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        msgs = []
        for err in errors:
            where = "/".join(str(p) for p in err.absolute_path) or "<root>"
            msgs.append(f"{where}: {err.message}")
        raise ScenarioError("; ".join(msgs))


def load_scenario(path) -> Scenario:
    with open(path) as fh:
        return Scenario.from_json(fh.read())


@dataclass
class Report:
    scenario: dict
    results: dict = field(default_factory=dict)
    series: dict = field(default_factory=dict)
    events: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def check(self, name: str, value: float, expected: float, tolerance: float, note: str = ""):
        ok = bool(abs(value - expected) <= tolerance)
        entry = {"value": float(value), "expected": float(expected),
                 "tolerance": float(tolerance), "ok": ok}
        if note:
            entry["note"] = note
        self.results[name] = entry

    def add_series(self, name: str, columns: list[str], rows: list[list]):
        self.series[name] = {"columns": list(columns), "rows": [list(r) for r in rows]}

    @property
    def ok(self) -> bool:
        return all(r["ok"] for r in self.results.values())

    def payload(self) -> dict:
        """Everything except timing metadata."""
        return {"scenario": self.scenario, "results": self.results,
                "series": self.series, "events": self.events}

    def to_dict(self) -> dict:
        return {**self.payload(), "metadata": self.metadata}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def emit_figure_data(report: Report, series: str) -> str:
    """CSV text for one series: header row, then rows at full double precision."""
    if series not in report.series:
        available = ", ".join(sorted(report.series)) or "none"
        raise KeyError(f"unknown series {series!r}; available: {available}")
    data = report.series[series]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(data["columns"])
    for row in data["rows"]:
        writer.writerow(["" if v is None else repr(float(v)) if isinstance(v, float) else v
                         for v in row])
    return buf.getvalue()


def _complex_list(pairs) -> list[complex]:
    return [complex(re, im) for re, im in pairs]


# ---------------------------------------------------------------------------
# experiments


def _ns_demo(sc: Scenario, rep: Report):
    p = sc.parameters
    rng = make_rng(sc.seed)
    space = FockSpace(1, 2)
    inputs = []
    if "amplitudes" in p:
        a = np.array(_complex_list(p["amplitudes"]))
        inputs.append(a / np.linalg.norm(a))
    for _ in range(p["trials"]):
        a = rng.normal(size=3) + 1j * rng.normal(size=3)
        inputs.append(a / np.linalg.norm(a))
    probs, fids = [], []
    for a in inputs:
        s = PureState(space, {(k,): a[k] for k in range(3)})
        want = PureState(space, {(0,): a[0], (1,): a[1], (2,): -a[2]})
        r = ns_gate(s, 0)
        probs.append(r.success_probability)
        fids.append(fidelity(r.output_state, want))
    worst = max(probs, key=lambda x: abs(x - NS_SUCCESS_PROBABILITY))
    rep.check("success_probability_worst", worst, NS_SUCCESS_PROBABILITY, 1e-9)
    rep.check("fidelity_min", min(fids), 1.0, 1e-9)
    rep.add_series("ns", ["trial", "success_probability", "fidelity"],
                   [[i, pr, f] for i, (pr, f) in enumerate(zip(probs, fids))])


def _csign_demo(sc: Scenario, rep: Report):
    qa, qb = DualRailQubit(0, 1), DualRailQubit(2, 3)
    k = logical_matrix(lambda s: csign_branch(s, qa, qb), [qa, qb])
    target = np.diag([1, 1, 1, -1]).astype(complex)
    probs = [float(np.linalg.norm(k[:, j]) ** 2) for j in range(4)]
    rng = make_rng(sc.seed)
    fids = []
    for _ in range(sc.parameters["superpositions"]):
        a = rng.normal(size=4) + 1j * rng.normal(size=4)
        a /= np.linalg.norm(a)
        out = k @ a
        probs.append(float(np.linalg.norm(out) ** 2))
        fids.append(abs(np.vdot(target @ a, out)) ** 2 / np.linalg.norm(out) ** 2)
    rep.check("logical_matrix_error", phase_aligned_error(k, target), 0.0, 1e-9)
    if fids:
        rep.check("superposition_fidelity_min", min(fids), 1.0, 1e-9)
    spread = max(probs) - min(probs)
    rep.check("success_probability_spread", spread, 0.0, 1e-9)
    rep.check("ns_herald_product", probs[0], NS_SUCCESS_PROBABILITY ** 2, 1e-9,
              note="two independent NS heralds")
    rep.check("success_probability", probs[0], CSIGN_STATED_PROBABILITY, 1e-9,
              note="stated contract value")
    rep.add_series("csign", ["input", "success_probability"],
                   [[format(j, "02b"), probs[j]] for j in range(4)])


def _cnot_demo(sc: Scenario, rep: Report):
    c, t = PolarizationQubit(0, 1), PolarizationQubit(2, 3)
    rng = make_rng(sc.seed)
    inputs = [{format(j, "02b"): 1.0} for j in range(4)]
    inputs.append({"00": 1.0, "10": 1.0})
    for _ in range(sc.parameters["superpositions"]):
        a = rng.normal(size=4) + 1j * rng.normal(size=4)
        inputs.append({format(j, "02b"): a[j] for j in range(4)})
    totals, fids, rows = [], [], []
    for amps in inputs:
        s = logical_state([c, t], amps)
        vin = logical_vector(s, [c, t])
        want = CNOT_MATRIX @ vin
        branches = cnot_polarization_branches(s, c, t)
        totals.append(branches[0].success_probability)
        for b in branches:
            v = logical_vector(b.output_state, [c, t])
            fids.append(abs(np.vdot(want, v)) ** 2 / (np.vdot(v, v).real * np.vdot(want, want).real))
        if len(amps) == 1:
            (bits,) = amps
            probs, _ = logical_readout(branches[0].output_state, [c, t])
            out = max(probs, key=probs.get)
            rows.append([bits, out, probs[out]])
    worst = max(totals, key=lambda x: abs(x - CNOT_STATED_PROBABILITY))
    rep.check("success_probability_worst", worst, CNOT_STATED_PROBABILITY, 1e-9)
    rep.check("fidelity_min", min(fids), 1.0, 1e-9)
    rep.add_series("truth_table", ["input", "output", "probability"], rows)


def hom_coincidence(theta: float) -> float:
    s = make_basis_state(FockSpace(2, 2), (1, 1))
    return abs(apply_element(s, BeamSplitter(theta, 0.0, 0, 1)).amplitude((1, 1))) ** 2


def _hom_scan(sc: Scenario, rep: Report):
    p = sc.parameters
    thetas = np.linspace(p["theta_min"], p["theta_max"], p["points"])
    rows = [[float(th), hom_coincidence(float(th))] for th in thetas]
    rep.add_series("hom", ["theta", "coincidence_probability"], rows)
    rep.check("coincidence_at_balanced", hom_coincidence(math.pi / 4), 0.0, 1e-12)
    # |1,1> keeps amplitude cos^2 - sin^2
    err = max(abs(c - math.cos(2 * th) ** 2) for th, c in rows)
    rep.check("closed_form_deviation", err, 0.0, 1e-12)


def _teleport_scan(sc: Scenario, rep: Report):
    p = sc.parameters
    q = DualRailQubit(0, 1)
    a = _complex_list(p["amplitudes"])
    s = logical_state([q], {"0": a[0], "1": a[1]})
    vin = logical_vector(s, [q])
    rows, fids, unheralded = [], [], 0
    for n in sorted(p["n_values"]):
        branches = teleport_branches(s, q, make_resource(n))
        total = branches[0].success_probability
        rows.append([n, total, 1 - total])
        for b in branches:
            if b.success:
                v = logical_vector(b.output_state, b.output_qubits)
                fids.append(abs(np.vdot(vin, v)) ** 2 / np.vdot(v, v).real)
            elif b.measured_value not in ("0", "1"):
                unheralded += 1
        rep.check(f"success_probability_n{n}", total, n / (n + 1), 1e-9)
    rep.check("fidelity_min", min(fids), 1.0, 1e-9)
    rep.check("unheralded_failures", unheralded, 0, 0)
    rep.add_series("teleport", ["n", "success_probability", "failure_probability"], rows)


def _memory_scan(sc: Scenario, rep: Report):
    p = sc.parameters
    a = _complex_list(p["amplitudes"])
    logical = logical_state([DualRailQubit(0, 1)], {"0": a[0], "1": a[1]})
    mem = memory_cycle(logical, p["cycles"], p["per_cycle_loss"], sc.seed, p["trajectories"])
    rep.add_series("memory", ["cycle", "mean_fidelity", "survival_fraction"],
                   [list(r) for r in mem.rows()])
    survivors = [f for f in mem.min_fidelity if f is not None]
    if survivors:
        rep.check("fidelity_min", min(survivors), 1.0, 1e-9)
    expected = single_cycle_survival(p["per_cycle_loss"]) ** p["cycles"]
    sigma = math.sqrt(expected * (1 - expected) / p["trajectories"])
    rep.check("final_survival_fraction", mem.survival_fraction[-1], expected, 3 * sigma,
              note="analytic at-most-one-loss-per-cycle model, 3 sigma")
    dead = p["trajectories"] - round(mem.survival_fraction[-1] * p["trajectories"])
    if dead:
        rep.events.append({"kind": "uncorrectable", "trajectories": dead})
    rep.events.append({"kind": "annotation",
                       "loss_below_per_gate_threshold": p["per_cycle_loss"] < LOSS_THRESHOLD_PER_GATE})
    rep.series["loss_locations"] = {"columns": ["location", "count"],
                                    "rows": [[k, v] for k, v in mem.loss_locations.items()]}


def _kernel_crosscheck(sc: Scenario, rep: Report):
    p = sc.parameters
    rng = make_rng(sc.seed)
    worst = 0.0
    rows = []
    for i in range(p["circuits"]):
        m = int(rng.integers(2, p["max_modes"] + 1))
        n = int(rng.integers(1, p["max_photons"] + 1))
        c = random_circuit(m, p["depth"], rng)
        s = random_state(FockSpace(m, n), rng, photons=n)
        a, b = c.apply(s), apply_mode_unitary(s, c.mode_matrix())
        d = max((abs(a.amplitude(o) - b.amplitude(o)) for o in set(a.amplitudes) | set(b.amplitudes)),
                default=0.0)
        worst = max(worst, d)
        rows.append([i, m, n, d])
    rep.check("path_deviation_max", worst, 0.0, 1e-10)
    rel = 0.0
    for size in range(p["max_permanent_size"] + 1):
        mat = rng.normal(size=(size, size)) + 1j * rng.normal(size=(size, size))
        ref = permanent_naive(mat)
        rel = max(rel, abs(permanent(mat) - ref) / max(abs(ref), 1e-300))
    rep.check("permanent_relative_error_max", rel, 0.0, 1e-10)
    rep.add_series("kernel", ["circuit", "modes", "photons", "max_deviation"], rows)


RUNNERS: dict[str, Callable[[Scenario, Report], None]] = {
    "ns_demo": _ns_demo,
    "csign_demo": _csign_demo,
    "cnot_demo": _cnot_demo,
    "hom_scan": _hom_scan,
    "teleport_scan": _teleport_scan,
    "memory_scan": _memory_scan,
    "kernel_crosscheck": _kernel_crosscheck,
}


def run_scenario(sc: Scenario) -> Report:
    rep = Report(scenario=sc.to_dict())
    start = time.perf_counter()
    RUNNERS[sc.kind](sc, rep)
    rep.metadata = {"runtime_seconds": time.perf_counter() - start, "lopsim_version": __version__}
    return rep
