"""``qpgsim`` command line: scenario runs, validation suites and truth tables.

Parameters come from a flat JSON config (``--config``) and ``--key value``
overrides; overrides win.  ``--sweep key=v1,v2`` (repeatable) runs the
cartesian product of the listed values, rows in sweep order.

Exit codes: 0 all checks pass, 1 a physics check failed, 2 bad config,
3 numerical convergence failure.
"""

from __future__ import annotations

import argparse
import io
import itertools
import json
import logging
import math
import sys
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from . import cavity, gates, ion_full, ion_gate
from .core import StateVector, state_fidelity
from .errors import ConvergenceError, ParameterError, QpgError

EXIT_OK, EXIT_PHYSICS, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
STATE_TOL = 1e-8
_REQUIRED = object()


class ConfigError(Exception):
    """Bad configuration; maps to exit code 2."""


# ---------------------------------------------------------------------------
# key schemas


def _to_bool(v):
    if isinstance(v, bool):
        return v
    if isinstance(v, str) and v.strip().lower() in ("true", "1", "yes", "on"):
        return True
    if isinstance(v, str) and v.strip().lower() in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _to_int(v):
    if isinstance(v, bool):
        raise ValueError("boolean given where an integer is expected")
    if isinstance(v, float) and not v.is_integer():
        raise ValueError(f"not an integer: {v!r}")
    return int(v)


def _to_float(v):
    if isinstance(v, bool):
        raise ValueError("boolean given where a number is expected")
    x = float(v)
    if not math.isfinite(x):
        raise ValueError(f"not finite: {v!r}")
    return x


def _list_of(conv):
    def parse(v):
        items = v.split(",") if isinstance(v, str) else list(v)
        items = [i.strip() if isinstance(i, str) else i for i in items if i != ""]
        if not items:
            raise ValueError("empty list")
        return [conv(i) for i in items]

    parse.is_list = True
    return parse


_floats = _list_of(_to_float)
_strs = _list_of(str)

ION_TAIL = {
    "phi": (_to_float, 0.0),
    "g0": (_to_float, 1.0),
    "n_max": (_to_int, 6),
    "n_sel": (_to_int, 0),
}
SCHEMAS = {
    ("ion", "run"): {
        "eta": (_to_float, _REQUIRED),
        "omega": (_to_float, _REQUIRED),
        "delta": (_to_float, _REQUIRED),
        **ION_TAIL,
    },
    ("ion", "validate"): {
        "eta": (_to_float, _REQUIRED),
        "delta": (_to_float, _REQUIRED),
        **ION_TAIL,
        "ratios": (_floats, [0.2, 0.1, 0.05]),
        "dt": (_to_float, 2 * math.pi / 200),
        "pad": (_to_int, 10),
        "tol_conv": (_to_float, 1e-6),
        "compensation": (str, "calibrated"),
        "beams": (_strs, ["I", "II"]),
    },
    ("cavity", "run"): {
        "omega_ig": (_to_float, _REQUIRED),
        "delta_big": (_to_float, _REQUIRED),
        "omega_ei": (_to_float, 1.0),
        "n_max": (_to_int, 2),
        "compensate_stark": (_to_bool, True),
    },
    ("gates", "truth-table"): {},
}
SCHEMAS[("cavity", "validate")] = {
    **SCHEMAS[("cavity", "run")],
    "deltas": (_floats, [10.0, 30.0, 100.0]),
}


def _is_list(conv) -> bool:
    return getattr(conv, "is_list", False)


def _coerce(schema, key, value):
    if key not in schema:
        raise ConfigError(f"unknown key {key!r} (allowed: {', '.join(sorted(schema)) or 'none'})")
    conv = schema[key][0]
    try:
        return conv(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key!r}: {exc}") from None


def resolve_params(schema, config: dict, overrides: dict) -> dict:
    """Defaults, then config, then overrides; required keys must end up set."""
    merged = {}
    for source in (config, overrides):
        for k, v in source.items():
            merged[k] = _coerce(schema, k, v)
    out = {}
    for k, (_, default) in schema.items():
        if k in merged:
            out[k] = merged[k]
        elif default is _REQUIRED:
            raise ConfigError(f"missing required key {k!r}")
        else:
            out[k] = list(default) if isinstance(default, list) else default
    return out


def parse_sweeps(schema, specs) -> list:
    sweeps = []
    for spec in specs or []:
        if "=" not in spec:
            raise ConfigError(f"sweep must look like KEY=v1,v2,...: {spec!r}")
        key, _, values = spec.partition("=")
        key = key.strip()
        if key not in schema:
            raise ConfigError(f"unknown sweep key {key!r}")
        if _is_list(schema[key][0]):
            raise ConfigError(f"list-valued key {key!r} cannot be swept")
        if any(key == k for k, _ in sweeps):
            raise ConfigError(f"key {key!r} swept twice")
        vals = [_coerce(schema, key, v.strip()) for v in values.split(",") if v.strip()]
        if not vals:
            raise ConfigError(f"sweep over {key!r} has no values")
        sweeps.append((key, vals))
    return sweeps


def load_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a flat JSON object")
    for k, v in data.items():
        if isinstance(v, dict):
            raise ConfigError(f"config must be flat; key {k!r} holds an object")
    return data


def parse_overrides(tokens) -> dict:
    """``--key value`` pairs left over by argparse."""
    out = {}
    it = iter(tokens)
    for tok in it:
        if not tok.startswith("--") or len(tok) <= 2:
            raise ConfigError(f"unexpected argument {tok!r}")
        key, eq, val = tok[2:].partition("=")
        if not eq:
            try:
                val = next(it)
            except StopIteration:
                raise ConfigError(f"override {tok} needs a value") from None
        out[key.replace("-", "_")] = val
    return out


# ---------------------------------------------------------------------------
# number formatting


def fmt_float(x) -> str:
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"non-finite value {x!r} in report")
    return format(x, ".17g")


def to_json(obj, indent=0) -> str:
    """Deterministic JSON with every float written to 17 significant digits."""
    pad, inner = "  " * indent, "  " * (indent + 1)
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {to_json(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(to_json(v) for v in obj) + "]"
        items = [inner + to_json(v, indent + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _csv_cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return fmt_float(v)
    if isinstance(v, (list, tuple)):
        return ";".join(_csv_cell(x) for x in v)
    s = str(v)
    if any(c in s for c in ',"\n'):
        s = '"' + s.replace('"', '""') + '"'
    return s


# ---------------------------------------------------------------------------
# scenarios


@dataclass
class PointResult:
    params: dict
    rows: list
    passed: bool
    extra: dict


ION_RUN_COLUMNS = (
    "scenario", "eta", "omega", "delta", "n_sel", "t_gate", "omega_eff", "fidelity", "leakage", "pass",
)
ION_VALIDATE_COLUMNS = (
    "scenario", "eta", "omega", "delta", "ratio", "t_gate", "t_gate_effective", "omega_eff",
    "omega_eff_full", "gate_fidelity", "infidelity", "gate_fidelity_effective_time",
    "max_leakage", "n_steps", "dt", "convergence_change",
)
CAVITY_RUN_COLUMNS = (
    "scenario", "omega_ei", "omega_ig", "delta_big", "n_max", "t_gate", "omega_eff", "fidelity",
    "amp_00_re", "amp_00_im", "amp_01_re", "amp_01_im", "amp_10_re", "amp_10_im",
    "amp_11_re", "amp_11_im", "pass",
)
CAVITY_VALIDATE_COLUMNS = (
    "scenario", "delta_big", "compensate_stark", "t_gate", "fidelity", "uncompensated_fidelity",
    "conditional_phase", "gate_fidelity", "max_intermediate", "intermediate_bound", "bound_ok",
)
GATES_COLUMNS = ("section", "label", "dd", "du", "ud", "uu")


def _ion_params(d: dict) -> ion_gate.IonGateParams:
    return ion_gate.IonGateParams(
        eta=d["eta"], omega=d["omega"], delta=d["delta"], phi=d["phi"], g0=d["g0"],
        n_max=d["n_max"], n_sel=d["n_sel"],
    )


def prepare_ion_run(d):
    return _ion_params(d)


def run_ion(d, p: ion_gate.IonGateParams) -> PointResult:
    u, rep = ion_gate.qpg_unitary(p)
    sp = p.space
    idx = ion_gate.computational_indices(sp, p.n_sel)
    inputs = [(lab, np.eye(4)[k]) for k, lab in enumerate(gates.LABELS)]
    inputs.append(("uniform", np.full(4, 0.5)))
    rows = []
    for name, coeffs in inputs:
        amps = np.zeros(sp.dim, dtype=complex)
        amps[idx] = coeffs
        psi = StateVector(sp, amps)
        out = u @ psi
        ideal_amps = np.zeros(sp.dim, dtype=complex)
        ideal_amps[idx] = ion_gate.QPG_DIAGONAL * coeffs
        fid = state_fidelity(out, StateVector(sp, ideal_amps))
        leak = float(1.0 - np.sum(np.abs(out.amplitudes[idx]) ** 2))
        rows.append({
            "scenario": name, "eta": p.eta, "omega": p.omega, "delta": p.delta, "n_sel": p.n_sel,
            "t_gate": rep.t_gate, "omega_eff": rep.omega_eff, "fidelity": fid,
            "leakage": max(leak, 0.0), "pass": fid >= 1.0 - STATE_TOL,
        })
    extra = {
        "raw_local_phases": list(rep.raw_local_phases),
        "correction": list(rep.correction),
        "compensation": asdict(rep.compensation),
        "residual": rep.residual,
    }
    return PointResult(d, rows, all(r["pass"] for r in rows), extra)


def prepare_ion_validate(d):
    if not d["ratios"]:
        raise ConfigError("ratios must not be empty")
    out = []
    for r in d["ratios"]:
        base = ion_gate.IonGateParams(
            eta=d["eta"], omega=r * d["delta"], delta=d["delta"], phi=d["phi"], g0=d["g0"],
            n_max=d["n_max"], n_sel=d["n_sel"],
        )
        out.append(ion_full.FullIonParams(
            base, dt=d["dt"], pad=d["pad"], tol_conv=d["tol_conv"],
            beams=tuple(d["beams"]), compensation=d["compensation"],
        ))
    return out


def run_ion_validate(d, fulls) -> PointResult:
    reports = [ion_full.validate_effective(f) for f in fulls]
    verdict = ion_full.strictly_decreasing(r.infidelity for r in reports) if len(reports) > 1 else None
    rows = []
    for ratio, r in zip(d["ratios"], reports):
        rows.append({
            "scenario": f"ratio={fmt_float(ratio)}", "eta": r.eta, "omega": r.omega,
            "delta": r.delta, "ratio": r.ratio, "t_gate": r.t_gate,
            "t_gate_effective": r.t_gate_effective, "omega_eff": r.omega_eff,
            "omega_eff_full": r.omega_eff_full, "gate_fidelity": r.gate_fidelity,
            "infidelity": r.infidelity,
            "gate_fidelity_effective_time": r.gate_fidelity_effective_time,
            "max_leakage": max(r.leakage), "n_steps": r.n_steps, "dt": r.dt,
            "convergence_change": r.convergence[-1][1],
        })
    extra = {
        "monotonic": "n/a" if verdict is None else ("pass" if verdict else "fail"),
        "details": [
            {
                "ratio": r.ratio,
                "compensation": asdict(r.compensation),
                "state_fidelities": list(r.state_fidelities),
                "leakage": list(r.leakage),
                "raw_local_phases": list(r.raw_local_phases),
                "convergence": [list(c) for c in r.convergence],
            }
            for r in reports
        ],
    }
    return PointResult(d, rows, verdict is not False, extra)


def _cavity_params(d):
    return cavity.CavityParams(
        omega_ig=d["omega_ig"], delta_big=d["delta_big"], omega_ei=d["omega_ei"],
        n_max=d["n_max"], compensate_stark=d["compensate_stark"],
    )


def prepare_cavity(d):
    p = _cavity_params(d)
    cavity.pi_pulse_time(p)  # rejects a vanishing effective coupling up front
    return p


def run_cavity(d, p: cavity.CavityParams) -> PointResult:
    t = cavity.pi_pulse_time(p)
    inputs = [(n, np.eye(4)[k]) for k, n in enumerate(("00", "01", "10", "11"))]
    inputs.append(("uniform", np.full(4, 0.5)))
    target_sign = np.array([1.0, 1.0, 1.0, -1.0])
    rows = []
    for name, coeffs in inputs:
        out = cavity.cavity_qpg(p, cavity.logical_state(p, coeffs))
        ideal = cavity.logical_state(p, target_sign * coeffs)
        fid = state_fidelity(out, ideal)
        amps = cavity.logical_amplitudes(out)
        row = {
            "scenario": name, "omega_ei": p.omega_ei, "omega_ig": p.omega_ig,
            "delta_big": p.delta_big, "n_max": p.n_max, "t_gate": t,
            "omega_eff": cavity.effective_omega(p), "fidelity": fid,
        }
        for lab, a in zip(("00", "01", "10", "11"), amps):
            row[f"amp_{lab}_re"] = _clean(a.real)
            row[f"amp_{lab}_im"] = _clean(a.imag)
        row["pass"] = fid >= 1.0 - STATE_TOL and float(np.max(np.abs(amps - target_sign * coeffs))) < 1e-10
        rows.append(row)
    return PointResult(d, rows, all(r["pass"] for r in rows), {})


def _clean(x: float, eps: float = 1e-14) -> float:
    # suppress rounding noise so reports are stable across BLAS builds
    return 0.0 if abs(x) < eps else float(x)


def prepare_cavity_validate(d):
    p = prepare_cavity(d)
    for x in d["deltas"]:
        if x <= 0:
            raise ConfigError(f"deltas must be positive, got {x}")
    return p


def run_cavity_validate(d, p) -> PointResult:
    rep = cavity.validate_adiabatic(p, deltas=tuple(d["deltas"]))
    rows = []
    for pt in rep.sweep:
        rows.append({
            "scenario": f"delta_big={fmt_float(pt.delta_big)}", "delta_big": pt.delta_big,
            "compensate_stark": p.compensate_stark, "t_gate": pt.t_gate, "fidelity": pt.fidelity,
            "uncompensated_fidelity": pt.uncompensated_fidelity,
            "conditional_phase": pt.conditional_phase, "gate_fidelity": pt.gate_fidelity,
            "max_intermediate": pt.max_intermediate,
            "intermediate_bound": pt.intermediate_bound,
            "bound_ok": pt.max_intermediate < pt.intermediate_bound,
        })
    extra = {
        "monotonic": "n/a" if rep.increasing is None else ("pass" if rep.increasing else "fail"),
        "configured_point": asdict(rep.point),
    }
    return PointResult(d, rows, rep.increasing is not False, extra)


def _real(x: complex) -> float:
    return _clean(complex(x).real)


def run_gates(d, _p) -> PointResult:
    qpg, cnot = gates.ideal_qpg(), gates.ideal_cnot()
    corrected, rep = gates.cnot_from_qpg(qpg)
    rows = []
    for section, m in (
        ("qpg", qpg.matrix), ("cnot", cnot.matrix), ("rotation_on_target", gates.on_target(rep.rotation).matrix),
        ("recipe", rep.composition), ("corrected", corrected.matrix),
    ):
        # row k lists the image of basis state k (truth-table reading)
        for k, lab in enumerate(gates.LABELS):
            col = m[:, k]
            if np.max(np.abs(col.imag)) > 1e-14:
                raise QpgError("truth tables are expected to be real")
            rows.append({"section": section, "label": lab, **{l: _real(c) for l, c in zip(gates.LABELS, col)}})
    for name, val in rep.phases.items():
        rows.append({"section": "phase", "label": name, "dd": val, "du": "", "ud": "", "uu": ""})
    rows.append({"section": "fit", "label": "distance", "dd": rep.fit.distance, "du": "", "ud": "", "uu": ""})
    extra = {"phases": rep.phases, "distance": rep.fit.distance}
    return PointResult(d, rows, rep.fit.equivalent, extra)


COMMANDS = {
    ("ion", "run"): (prepare_ion_run, run_ion, ION_RUN_COLUMNS),
    ("ion", "validate"): (prepare_ion_validate, run_ion_validate, ION_VALIDATE_COLUMNS),
    ("cavity", "run"): (prepare_cavity, run_cavity, CAVITY_RUN_COLUMNS),
    ("cavity", "validate"): (prepare_cavity_validate, run_cavity_validate, CAVITY_VALIDATE_COLUMNS),
    ("gates", "truth-table"): (lambda d: None, run_gates, GATES_COLUMNS),
}


# ---------------------------------------------------------------------------
# report assembly


def render_json(command, base, sweeps, points) -> str:
    doc = {
        "command": " ".join(command),
        "params": base,
        "sweep": [{"key": k, "values": v} for k, v in sweeps],
        "points": [
            {"index": i, "params": pt.params, "pass": pt.passed, "rows": pt.rows, **pt.extra}
            for i, pt in enumerate(points)
        ],
        "pass": all(pt.passed for pt in points),
    }
    return to_json(doc) + "\n"


def render_csv(command, base, sweeps, points, columns) -> str:
    buf = io.StringIO()
    buf.write(f"# command={' '.join(command)}\n")
    for k, v in base.items():
        buf.write(f"# param {k}={_csv_cell(v)}\n")
    for k, v in sweeps:
        buf.write(f"# sweep {k}={_csv_cell(v)}\n")
    for i, pt in enumerate(points):
        for key in ("monotonic",):
            if key in pt.extra:
                buf.write(f"# point {i} {key}={pt.extra[key]}\n")
    buf.write(f"# pass={_csv_cell(all(pt.passed for pt in points))}\n")
    buf.write(",".join(columns) + "\n")
    multi = len(points) > 1
    for i, pt in enumerate(points):
        for row in pt.rows:
            cells = []
            for c in columns:
                v = row[c]
                if c == "scenario" and multi:
                    v = f"p{i}/{v}"
                cells.append(_csv_cell(v))
            buf.write(",".join(cells) + "\n")
    return buf.getvalue()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qpgsim", description=__doc__.splitlines()[0], allow_abbrev=False
    )
    sub = parser.add_subparsers(dest="scheme", required=True)
    for scheme, actions in (("ion", ("run", "validate")), ("cavity", ("run", "validate")), ("gates", ("truth-table",))):
        sp = sub.add_parser(scheme, allow_abbrev=False)
        acts = sp.add_subparsers(dest="action", required=True)
        for action in actions:
            ap = acts.add_parser(
                action, allow_abbrev=False, description="extra --key value pairs override config entries"
            )
            ap.add_argument("--config", help="flat JSON config file")
            ap.add_argument("--out", help="report path (default: stdout)")
            ap.add_argument("--format", choices=("json", "csv"), default="json")
            ap.add_argument("--sweep", action="append", metavar="KEY=LIST", help="comma-separated values; repeatable")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(format="qpgsim: %(message)s", stream=sys.stderr)
    parser = build_parser()
    try:
        args, rest = parser.parse_known_args(argv)
    except SystemExit as exc:  # argparse already printed usage
        return EXIT_CONFIG if exc.code else EXIT_OK
    command = (args.scheme, args.action)
    prepare, execute, columns = COMMANDS[command]
    schema = SCHEMAS[command]

    try:
        base = resolve_params(schema, load_config(args.config), parse_overrides(rest))
        sweeps = parse_sweeps(schema, args.sweep)
        points = []
        keys = [k for k, _ in sweeps]
        for combo in itertools.product(*[v for _, v in sweeps]):
            d = dict(base)
            d.update(zip(keys, combo))
            points.append(d)
        # validate every point before any computation
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            prepared = [prepare(d) for d in points]
    except (ConfigError, ParameterError) as exc:
        print(f"qpgsim: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for w in caught:
        print(f"qpgsim: warning: {w.message}", file=sys.stderr)

    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            results = [execute(d, p) for d, p in zip(points, prepared)]
    except ConvergenceError as exc:
        print(f"qpgsim: convergence failure: {exc}", file=sys.stderr)
        for dt, change in exc.diagnostics:
            print(f"qpgsim:   dt={fmt_float(dt)} change={fmt_float(change)}", file=sys.stderr)
        return EXIT_NUMERIC
    except (QpgError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"qpgsim: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC

    if args.format == "json":
        text = render_json(command, base, sweeps, results)
    else:
        text = render_csv(command, base, sweeps, results, columns)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK if all(r.passed for r in results) else EXIT_PHYSICS


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
