"""Command line front end: ``cvd <subcommand> --config cfg.json``.

Exit codes: 0 success, 1 a numeric guard tripped, 2 the config is invalid.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import analytic
from .config import ExperimentConfig, diagnostics, parse_config
from .errors import ConfigError, CvdError, GuardError, InvalidLambda
from .fock import make_tmss_pairs
from .loss import (first_order_trajectories, infidelity_scan, posterior_confirmation_run)
from .purification import protocol_run
from .qnd import (noise_sigma, sample_homodyne, sde_ensemble, signal_slope, feasibility_window)
from .reproduce import checks_csv, checks_json, reference_checks

COMMANDS = ("analytic", "simulate-protocol", "simulate-loss", "simulate-qnd", "feasibility",
            "reproduce-paper", "validate")


def _clean(obj):
    # strict JSON: NaN/inf become null
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    return obj


def _csv(columns, rows, meta) -> str:
    buf = io.StringIO()
    for k, v in meta.items():
        buf.write(f"# {k}={v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([repr(float(row[c])) if isinstance(row[c], (float, np.floating)) else row[c]
                    for c in columns])
    return buf.getvalue()


class Emitter:
    """Writes named tables into the output directory in the requested format."""

    def __init__(self, out_dir: Path, fmt: str, meta: dict):
        self.out_dir = out_dir
        self.fmt = fmt
        self.meta = meta
        self.written = []

    def table(self, name: str, columns, rows, extra: dict | None = None):
        if self.fmt == "csv":
            text = _csv(columns, rows, self.meta)
        else:
            body = {"columns": list(columns), "rows": rows, "meta": self.meta}
            if extra:
                body.update(extra)
            text = json.dumps(_clean(body), indent=2, sort_keys=True) + "\n"
        self._write(f"{name}.{self.fmt}", text)

    def document(self, name: str, payload: dict):
        """A JSON-native report; in CSV mode its scalar fields become one row."""
        if self.fmt == "json":
            body = dict(payload, meta=self.meta)
            self._write(f"{name}.json", json.dumps(_clean(body), indent=2, sort_keys=True) + "\n")
        else:
            scalars = {k: v for k, v in payload.items() if not isinstance(v, (dict, list))}
            self._write(f"{name}.csv", _csv(list(scalars), [scalars], self.meta))

    def _write(self, fname, text):
        self.out_dir.mkdir(parents=True, exist_ok=True)
        path = self.out_dir / fname
        path.write_text(text)
        self.written.append(path)


def cmd_analytic(cfg: ExperimentConfig, em: Emitter):
    p = cfg.protocol
    rep = analytic.analytic_report(p["m"], cfg.squeeze, cfg.loss_params, p["j_max"],
                                   p["tail_tol"])
    rows = [dict(zip(analytic.REPORT_COLUMNS, (r.j, r.f_j, r.p_j, r.E_out_bits, r.gamma_j,
                                               r.p_prime_j))) for r in rep.rows]
    em.table("analytic", analytic.REPORT_COLUMNS, rows,
             {"E_pair_bits": rep.E_pair_bits, "tail": rep.tail})
    yt = analytic.asymptotic_yield(p["m_list"], cfg.squeeze)
    em.table("yield", ("m", "yield_bits_per_pair", "limit_bits"),
             [{"m": m, "yield_bits_per_pair": y, "limit_bits": yt.limit} for m, y in yt.rows])
    loss = cfg.loss_params
    s = cfg.squeeze
    em.document("bounds", {
        "double_jump_bound": analytic.double_jump_bound(p["m"], s, loss),
        "double_jump_small": analytic.small_noise_valid(p["m"], s, loss, cfg.run["threshold"]),
        "asymmetric_bound": analytic.asymmetric_bound(s, loss.eta_a, loss.tau),
        "asymmetric_small": analytic.asymmetric_valid(s, loss.eta_a, loss.tau,
                                                      cfg.run["threshold"]),
    })


def cmd_protocol(cfg: ExperimentConfig, em: Emitter):
    summ = protocol_run(cfg.protocol_params, cfg.run["n_shots"], cfg.seed)
    em.table("protocol_histogram", ("j", "count", "p_emp", "p_analytic"), summ.histogram)
    d = summ.to_dict()
    d.pop("histogram")
    em.document("protocol_summary", d)


def cmd_loss(cfg: ExperimentConfig, em: Emitter):
    pp, loss, j = cfg.protocol_params, cfg.loss_params, cfg.protocol["j"]
    guard = cfg.loss["guard"]
    if loss.x_a <= guard and loss.x_b <= guard:
        ket0 = make_tmss_pairs(pp.squeeze.lam, pp.m, pp.j_max, pp.tail_tol)
        terms = first_order_trajectories(ket0, loss, guard)
        em.table("trajectories", ("jumps", "weight"),
                 [{"jumps": ";".join(f"{s}{i}" for s, i in t.jumps) or "none",
                   "weight": t.weight} for t in terms])
    scan = infidelity_scan(pp, loss, cfg.loss["tau_scan"], j)
    from .loss import SCAN_COLUMNS, POSTERIOR_COLUMNS
    em.table("loss_scan", SCAN_COLUMNS, scan.rows, {"slope": scan.slope})
    post = posterior_confirmation_run(pp, loss, cfg.run["n_shots"], cfg.seed)
    em.table("posterior", POSTERIOR_COLUMNS, post.per_j, {"accept_total": post.accept_total})
    em.table("posterior_events", ("shot", "j_a", "j_b", "accepted"),
             [dict(zip(("shot", "j_a", "j_b", "accepted"), e)) for e in post.events])


def cmd_qnd(cfg: ExperimentConfig, em: Emitter):
    cav = cfg.cavity_params
    slope = signal_slope(cav)
    rows = []
    sample_id = 0
    for k, n in enumerate(cfg.cavity["n_tot"]):
        ens = sample_homodyne(cav, n, cfg.run["n_shots"], cfg.seed + k)
        for x, ni in zip(ens.x_t, ens.n_inferred):
            rows.append({"sample_id": sample_id, "x_t": float(x), "n_true": n,
                         "n_inferred": int(ni)})
            sample_id += 1
    em.table("homodyne", ("sample_id", "x_t", "n_true", "n_inferred"), rows)
    n_traj = cfg.cavity["sde_trajectories"]
    if n_traj >= 2 and cav.gamma * cav.t_meas >= 5:
        sde_rows = []
        for k, n in enumerate(cfg.cavity["n_tot"]):
            n1, n2 = n - n // 2, n // 2
            xs = sde_ensemble(cav, n1, n2, n_traj, cfg.seed + (k + 1) * n_traj)
            var = float(xs.var(ddof=1))
            sde_rows.append({
                "n_tot": n, "n1": n1, "n2": n2, "sde_mean": float(xs.mean()),
                "sde_mean_se": float(xs.std(ddof=1) / math.sqrt(n_traj)),
                "model_mean": slope * n, "sde_var": var,
                "sde_var_se": var * math.sqrt(2.0 / (n_traj - 1)),
                "model_var": noise_sigma(cav) ** 2})
        em.table("sde_validation", tuple(sde_rows[0]), sde_rows)


def cmd_feasibility(cfg: ExperimentConfig, em: Emitter):
    rep = feasibility_window(cfg.cavity_params, cfg.n_bar)
    em.document("feasibility", rep.to_dict())


def cmd_reproduce(cfg: ExperimentConfig, em: Emitter):
    checks = reference_checks(cfg.seed)
    if em.fmt == "csv":
        em._write("reference_values.csv", checks_csv(checks, em.meta))
    else:
        em._write("reference_values.json", checks_json(checks, em.meta) + "\n")
    failed = [c.name for c in checks if not c.passed]
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name} = {c.value:.6g}")
    return failed


HANDLERS = {"analytic": cmd_analytic, "simulate-protocol": cmd_protocol,
            "simulate-loss": cmd_loss, "simulate-qnd": cmd_qnd,
            "feasibility": cmd_feasibility, "reproduce-paper": cmd_reproduce}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cvd", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", type=Path, help="JSON config (defaults: reference parameter set)")
    ap.add_argument("--seed", type=int, help="override run.seed")
    ap.add_argument("--out", type=Path, default=Path("cvd_out"), help="output directory")
    ap.add_argument("--format", choices=("csv", "json"), default="csv")
    ap.add_argument("--for", dest="for_command", choices=COMMANDS[:-1],
                    help="validate: restrict checks to one subcommand")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = args.config.read_text() if args.config else ""
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 2
    try:
        cfg = parse_config(text, seed=args.seed)
        cfg.squeeze  # r = inf style failures surface here
    except (ConfigError, InvalidLambda, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    if args.command == "validate":
        warns = diagnostics(cfg, args.for_command)
        for w in warns:
            print(f"warning: {w}")
        print(f"config ok (hash {cfg.hash()}, {len(warns)} warning(s))")
        return 0

    for w in diagnostics(cfg, args.command):
        print(f"warning: {w}", file=sys.stderr)
    em = Emitter(args.out, args.format, cfg.meta())
    try:
        result = HANDLERS[args.command](cfg, em)
    except GuardError as exc:
        print(f"guard {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except CvdError as exc:
        print(f"error {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    for path in em.written:
        print(path)
    if args.command == "reproduce-paper" and result:
        print(f"{len(result)} check(s) failed: {', '.join(result)}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
