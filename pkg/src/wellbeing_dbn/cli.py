"""Command-line workflows.

Every artifact embeds the fully resolved run configuration: JSON outputs
under a ``run`` key, CSV outputs as a leading ``# run: {...}`` comment.
The ``created_at`` timestamp is the only field that differs between
otherwise identical runs; ``--no-timestamp`` drops it.

Exit status: 0 on success, 1 on validation/model errors, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .core import DEFAULT_N_BINS
from .data import Dataset, generate_synthetic, parse_event_log, score_trust, score_wellbeing, write_event_log
from .dbn.inference import BeliefState, EventInput, filter_sequence, forward_simulate, summarize, write_trajectory_csv
from .dbn.model import (
    INPUTS,
    StructureCandidate,
    default_structure,
    load_model,
    load_structure,
    model_to_dict,
    save_json,
)
from .dbn.reference import reference_model
from .decision import (
    InfluenceDiagram,
    UtilitySpec,
    cost_sensitivity_sweep,
    optimal_policy,
    policy_table,
    thresholds,
    voi_report,
    write_sweep_csv,
)
from .errors import UsageError, WellbeingDbnError
from .learning.estimation import estimate_cpds
from .learning.selection import evaluate_accuracy, select_structure
from .learning.stats import pearson_r, welch_t_test

OUTPUT_DIR_ENV = "WELLBEING_DBN_OUTPUT_DIR"

DEFAULTS: dict[str, dict] = {
    "synth": {"model": None, "participants": 300, "events": 4, "seed": 0, "n_bins": DEFAULT_N_BINS, "out": "synthetic.csv"},
    "learn": {"data": None, "structure": None, "alpha": 1.0, "n_bins": DEFAULT_N_BINS, "out": "model.json"},
    "eval": {
        "data": None, "structure": None, "candidates": [], "alpha": 1.0, "n_bins": DEFAULT_N_BINS,
        "folds": 5, "iterations": 100, "seed": 0, "out": "eval.json",
    },
    "filter": {"model": None, "data": None, "out": "beliefs.csv"},
    "simulate": {
        "model": None, "script": None, "events": 10, "contributor": "R", "a_R": "R_PLUS", "a_O": None,
        "alignment": "AL1", "intention": None, "n_bins": DEFAULT_N_BINS, "out": "trajectory.csv",
    },
    "policy": {"model": None, "utility": "wellbeing", "cost": 0.0, "evidence": [], "evidence_var": [], "n_bins": DEFAULT_N_BINS, "out": "policy.json"},
    "voi": {"model": None, "utility": "wellbeing", "cost": 0.0, "evidence": [], "n_bins": DEFAULT_N_BINS, "out": "voi.json"},
    "sweep": {
        "model": None, "costs": "0:1:0.1", "evidence_var": None, "evidence": [], "n_bins": DEFAULT_N_BINS, "out": "sweep.csv",
    },
    "stats": {"data": None, "n_bins": DEFAULT_N_BINS, "out": "stats.json"},
}


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--out", help="output path")
    p.add_argument("--no-timestamp", action="store_true", help="omit the created_at field from outputs")
    p.add_argument("--workers", type=int, help="worker-count hint for independent work units")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wellbeing-dbn", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="sample a synthetic event log")
    _add_common(p)
    p.add_argument("--model", help="model JSON (default: built-in reference model)")
    p.add_argument("--participants", type=int)
    p.add_argument("--events", type=int, help="events per participant")
    p.add_argument("--seed", type=int)
    p.add_argument("--n-bins", type=int)

    p = sub.add_parser("learn", help="estimate CPDs from an event log")
    _add_common(p)
    p.add_argument("--data", help="event-log CSV")
    p.add_argument("--structure", help="structure JSON (default: built-in structure)")
    p.add_argument("--alpha", type=float)
    p.add_argument("--n-bins", type=int)

    p = sub.add_parser("eval", help="cross-validated accuracy and log-likelihood report")
    _add_common(p)
    p.add_argument("--data")
    p.add_argument("--structure")
    p.add_argument("--candidates", nargs="+", help="structure JSONs to compare by held-out log-likelihood")
    p.add_argument("--alpha", type=float)
    p.add_argument("--n-bins", type=int)
    p.add_argument("--folds", type=int)
    p.add_argument("--iterations", type=int)
    p.add_argument("--seed", type=int)

    p = sub.add_parser("filter", help="belief trace for every event of an event log")
    _add_common(p)
    p.add_argument("--model")
    p.add_argument("--data")

    p = sub.add_parser("simulate", help="expected states over a scripted run of events")
    _add_common(p)
    p.add_argument("--model")
    p.add_argument("--script", help="JSON list of events; overrides the repeated-event flags")
    p.add_argument("--events", type=int)
    p.add_argument("--contributor", choices=["R", "O"])
    p.add_argument("--a-R", dest="a_R", choices=list(INPUTS["a_R"].states))
    p.add_argument("--a-O", dest="a_O", choices=list(INPUTS["a_O"].states))
    p.add_argument("--alignment", choices=list(INPUTS["al"].states))
    p.add_argument("--intention", choices=["I_MINUS", "I_PLUS"])
    p.add_argument("--n-bins", type=int)

    for name, helptext in (("policy", "optimal action tables"), ("voi", "value of information per chance node")):
        p = sub.add_parser(name, help=helptext)
        _add_common(p)
        p.add_argument("--model")
        p.add_argument("--utility", choices=list(UtilitySpec.KINDS))
        p.add_argument("--cost", type=float)
        p.add_argument("--evidence", nargs="+", metavar="VAR=VALUE")
        p.add_argument("--n-bins", type=int)
        if name == "policy":
            p.add_argument("--evidence-var", nargs="+", help="variables to tabulate the policy over")

    p = sub.add_parser("sweep", help="trade-off policy across yielding costs")
    _add_common(p)
    p.add_argument("--model")
    p.add_argument("--costs", help="start:stop:step or comma list")
    p.add_argument("--evidence-var")
    p.add_argument("--evidence", nargs="+", metavar="VAR=VALUE")
    p.add_argument("--n-bins", type=int)

    p = sub.add_parser("stats", help="t-tests and correlations on an event log")
    _add_common(p)
    p.add_argument("--data")
    p.add_argument("--n-bins", type=int)
    return parser


def resolve_config(args: argparse.Namespace) -> dict:
    cmd = args.command
    config = dict(DEFAULTS[cmd])
    if args.config:
        doc = json.loads(Path(args.config).read_text())
        section = doc.get(cmd, doc) if isinstance(doc, dict) else {}
        unknown = set(section) - set(config) - {"workers"} - set(DEFAULTS)
        if unknown:
            raise UsageError(f"unknown config keys for {cmd}: {sorted(unknown)}")
        config.update({k: v for k, v in section.items() if k in config or k == "workers"})
    for key, value in vars(args).items():
        if key in ("command", "config", "no_timestamp") or value is None:
            continue
        config[key] = value
    config.setdefault("workers", 1)
    return config


def _out_path(path: str) -> Path:
    p = Path(path)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not p.is_absolute():
        p = Path(base) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _run_info(cmd: str, config: dict, timestamp: bool) -> dict:
    info = {"command": cmd, "version": __version__, "config": config}
    if timestamp:
        info["created_at"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    return info


def _write_json(doc: dict, path: Path) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=False) + "\n")


def _csv_comment(run: dict) -> str:
    return "run: " + json.dumps(run, sort_keys=True, separators=(",", ":"))


def _load_model(config: dict):
    if config.get("model"):
        return load_model(config["model"])
    return reference_model(config.get("n_bins", DEFAULT_N_BINS))


def _structure(path: str | None, n_bins: int) -> StructureCandidate:
    return load_structure(path) if path else default_structure(n_bins)


def _parse_evidence(items, cim: InfluenceDiagram) -> dict[str, int]:
    ev = {}
    for item in items or []:
        if "=" not in item:
            raise UsageError(f"evidence must look like VAR=VALUE, got {item!r}")
        name, value = item.split("=", 1)
        ev[name] = cim.variable(name).index_of(int(value) if value.lstrip("-").isdigit() else value)
    return ev


def _parse_costs(spec) -> list[float]:
    if isinstance(spec, list):
        return [float(c) for c in spec]
    if ":" in spec:
        start, stop, step = (float(x) for x in spec.split(":"))
        if step <= 0:
            raise UsageError("cost step must be > 0")
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + k * step, 12) for k in range(n)]
    return [float(c) for c in spec.split(",") if c.strip()]


def _event_from_doc(d: dict) -> EventInput:
    def idx(name, key):
        v = d.get(key)
        return None if v is None else INPUTS[name].index_of(v)

    intention = d.get("intention")
    if isinstance(intention, str):
        intention = ("I_MINUS", "I_PLUS").index(intention)
    return EventInput(
        d["contributor"],
        a_R=idx("a_R", "a_R"),
        a_O=idx("a_O", "a_O"),
        alignment=idx("al", "alignment"),
        intention=intention,
        prev_a_O=idx("a_O_prev", "prev_a_O"),
        observed=d.get("observed", {}),
    )


# -- commands ----------------------------------------------------------------


def cmd_synth(config, run):
    model = _load_model(config)
    ds = generate_synthetic(model, config["participants"], config["events"], config["seed"])
    out = _out_path(config["out"])
    write_event_log(ds, out, _csv_comment(run))
    return out


def _require(config, *keys):
    missing = [k for k in keys if not config.get(k)]
    if missing:
        raise UsageError(f"missing required option(s): {', '.join('--' + k.replace('_', '-') for k in missing)}")


def cmd_learn(config, run):
    _require(config, "data")
    ds = parse_event_log(config["data"], config["n_bins"])
    model = estimate_cpds(ds, _structure(config["structure"], config["n_bins"]), config["alpha"])
    doc = model_to_dict(model)
    doc["run"] = run
    out = _out_path(config["out"])
    save_json(doc, out)
    return out


def cmd_eval(config, run):
    _require(config, "data")
    ds = parse_event_log(config["data"], config["n_bins"])
    structure = _structure(config["structure"], config["n_bins"])
    report = evaluate_accuracy(
        ds, structure, config["folds"], config["iterations"], config["seed"], config["alpha"], config["workers"]
    ).to_dict()
    if config["candidates"]:
        cands = [load_structure(p) for p in config["candidates"]]
        sel = select_structure(cands, ds, config["folds"], config["alpha"], config["seed"], config["workers"])
        report["structure_selection"] = {
            "winner": sel.winner.structure_id,
            "mean_heldout_loglik": dict(sel.scores),
        }
    report["run"] = run
    out = _out_path(config["out"])
    _write_json(report, out)
    return out


def cmd_filter(config, run):
    _require(config, "model", "data")
    model = load_model(config["model"])
    ds = parse_event_log(config["data"], model.n_bins)
    out = _out_path(config["out"])
    with open(out, "w", newline="") as fh:
        fh.write(f"# {_csv_comment(run)}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["participant_id", "ride", "event", "event_index", "E_w", "E_t", "P_I_plus", "E_wO", "MAP_w", "MAP_t"])
        for records, events in zip(ds.sequences, ds.event_sequences()):
            for rec, belief in zip(records, filter_sequence(model, events)):
                p = summarize(belief)
                writer.writerow([
                    rec.participant_id, rec.ride, rec.event, p.event_index,
                    repr(p.E_w), repr(p.E_t), repr(p.P_I_plus), repr(p.E_wO),
                    belief.map_value("w"), belief.map_value("t"),
                ])
    return out


def cmd_simulate(config, run):
    model = _load_model(config)
    if config.get("script"):
        script = [_event_from_doc(d) for d in json.loads(Path(config["script"]).read_text())]
    else:
        doc = {k: config[k] for k in ("contributor", "a_R", "a_O", "alignment", "intention")}
        if doc["contributor"] == "O":
            doc.update(a_R=None, alignment=None)
        else:
            doc["a_O"] = None
        script = [_event_from_doc(doc)] * config["events"]
    points = forward_simulate(BeliefState.initial(model), script, model)
    out = _out_path(config["out"])
    write_trajectory_csv(points, out, _csv_comment(run))
    return out


def _cim(config, model):
    cost = config.get("cost", 0.0) or 0.0
    return InfluenceDiagram(model, UtilitySpec(config["utility"], cost if config["utility"] == "tradeoff" else 0.0))


def _decision_doc(d):
    return {"action": d.label, "eu_yield": d.eu_yield, "eu_unyield": d.eu_unyield}


def cmd_policy(config, run):
    model = _load_model(config)
    cim = _cim(config, model)
    ev = _parse_evidence(config["evidence"], cim)
    doc = {"utility": config["utility"], "evidence": ev, "policy": _decision_doc(optimal_policy(cim, ev)), "tables": {}}
    for var in config["evidence_var"] or []:
        rows = policy_table(cim, var, ev)
        doc["tables"][var] = {
            "rows": [
                {"value": r.label, "lower": r.lower, "upper": r.upper, **_decision_doc(r.decision)} for r in rows
            ],
            "thresholds": [{"lower": lo, "upper": hi, "action": a} for lo, hi, a in thresholds(rows)],
        }
    doc["run"] = run
    out = _out_path(config["out"])
    _write_json(doc, out)
    return out


def cmd_voi(config, run):
    model = _load_model(config)
    cim = _cim(config, model)
    ev = _parse_evidence(config["evidence"], cim)
    doc = {"utility": config["utility"], "evidence": ev, "voi": voi_report(cim, ev), "run": run}
    out = _out_path(config["out"])
    _write_json(doc, out)
    return out


def cmd_sweep(config, run):
    model = _load_model(config)
    cim = InfluenceDiagram(model, UtilitySpec("tradeoff", 0.0))
    ev = _parse_evidence(config["evidence"], cim)
    rows = cost_sensitivity_sweep(cim, _parse_costs(config["costs"]), config["evidence_var"], ev, config["workers"])
    out = _out_path(config["out"])
    write_sweep_csv(rows, out, _csv_comment(run))
    return out


def _test_doc(a, b, label_a, label_b):
    doc = {"groups": [label_a, label_b], "n": [len(a), len(b)]}
    try:
        t, df, p2 = welch_t_test(a, b, "two")
        doc.update(t=t, df=df, p_two_tail=p2, p_one_tail=welch_t_test(a, b, "one")[2])
    except (WellbeingDbnError, ArithmeticError) as exc:
        doc["error"] = str(exc)
    return doc


def study_statistics(ds: Dataset) -> dict:
    """Group comparisons behind the default structure's edges."""
    rec = ds.records()
    w = {id(r): score_wellbeing(r.responses) for r in rec}
    t = {id(r): score_trust(r.responses) for r in rec}
    o_events = [r for r in rec if r.contributor == "O"]
    r_events = [r for r in rec if r.contributor == "R"]

    def split(events, attr, values, score):
        return [[score[id(r)] for r in events if getattr(r, attr) == v] for v in values]

    out = {
        "wellbeing_by_robot_action": _test_doc(*split(o_events, "a_O", (1, 0), w), "O_PLUS", "O_MINUS"),
        "trust_by_av_action": _test_doc(*split(r_events, "a_R", (1, 0), t), "R_PLUS", "R_MINUS"),
        "wellbeing_by_intention": _test_doc(*split(r_events, "intention", (1, 0), w), "I_PLUS", "I_MINUS"),
        "wellbeing_by_alignment": _test_doc(*split(r_events, "alignment", (1, 0), w), "AL1", "AL0"),
        "trust_by_alignment": _test_doc(*split(r_events, "alignment", (1, 0), t), "AL1", "AL0"),
    }
    xs, ys = [t[id(r)] for r in rec], [w[id(r)] for r in rec]
    try:
        r, p = pearson_r(xs, ys)
        out["trust_wellbeing_correlation"] = {"r": r, "df": len(xs) - 2, "p": p}
    except (WellbeingDbnError, ArithmeticError) as exc:
        out["trust_wellbeing_correlation"] = {"error": str(exc)}
    return out


def cmd_stats(config, run):
    _require(config, "data")
    ds = parse_event_log(config["data"], config["n_bins"])
    doc = study_statistics(ds)
    doc["run"] = run
    out = _out_path(config["out"])
    _write_json(doc, out)
    return out


COMMANDS = {
    "synth": cmd_synth,
    "learn": cmd_learn,
    "eval": cmd_eval,
    "filter": cmd_filter,
    "simulate": cmd_simulate,
    "policy": cmd_policy,
    "voi": cmd_voi,
    "sweep": cmd_sweep,
    "stats": cmd_stats,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        config = resolve_config(args)
        info = _run_info(args.command, config, not args.no_timestamp)
        out = COMMANDS[args.command](config, info)
    except UsageError as exc:
        print(f"{args.command}: usage error: {exc}", file=sys.stderr)
        return 2
    except (WellbeingDbnError, OSError, json.JSONDecodeError) as exc:
        print(f"{args.command}: error: {exc}", file=sys.stderr)
        return 1
    print(out)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
