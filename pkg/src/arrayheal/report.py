"""Plot-ready CSV series, figures and a text summary from persisted artifacts."""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import numpy as np

from . import plotting, tables
from .calibration import reference_voltages, unit_errors
from .pipeline import KINDS, Layout, _require

REPORT_FILES = ("train_errors", "test_errors", "q_monitor", "pair_qsums", "triple_q",
                "current_errors")


def _error_series(table: tables.PhasorTable, calibration):
    ref = reference_voltages(calibration, table.unit_ids, table.reference)
    eps_a, eps_p = unit_errors(table.units, ref)
    return eps_a, eps_p


def _write_unit_errors(path: Path, table: tables.PhasorTable, eps_a, eps_p) -> None:
    ids = table.unit_ids
    header = (["t_s"] + [f"amplitude_{u}" for u in ids] + [f"phase_rad_{u}" for u in ids]
              + [f"eps_a_{u}" for u in ids] + [f"eps_p_rad_{u}" for u in ids])
    body = np.column_stack([table.t, table.amplitude, table.phase, eps_a, eps_p])
    tables.write_csv(path, header, ([float(v) for v in row] for row in body))


def emit_report(out_dir) -> dict[str, Path]:
    """Write ``report/<name>.csv`` and ``report/<name>.png`` for every series plus summary.txt."""
    lay = Layout(Path(out_dir))
    rep = lay.report_dir
    rep.mkdir(parents=True, exist_ok=True)
    calibration = tables.read_calibration(_require(lay.calibration, "report"))
    written: dict[str, Path] = {}

    for segment in ("train", "test"):
        table = tables.read_phasors(_require(lay.phasors(segment), "report"))
        eps_a, eps_p = _error_series(table, calibration)
        name = f"{segment}_errors"
        _write_unit_errors(rep / f"{name}.csv", table, eps_a, eps_p)
        plotting.unit_errors_figure(rep / f"{name}.png", table.t, table.unit_ids,
                                    table.amplitude, table.phase, eps_a, eps_p,
                                    f"{segment} record: unit readings and errors")
        written[name] = rep / f"{name}.csv"
        if segment == "test":
            test = table

    q = {k: tables.read_qseries(_require(lay.qseries(k), "report")) for k in KINDS}
    tables.write_csv(rep / "q_monitor.csv",
                     ("t_s", "q_amplitude", "threshold_amplitude", "q_phase", "threshold_phase"),
                     ((float(t), float(q["amplitude"].values[i]), q["amplitude"].threshold,
                       float(q["phase"].values[i]), q["phase"].threshold)
                      for i, t in enumerate(test.t)))
    plotting.q_monitor_figure(rep / "q_monitor.png", test.t,
                              {k: (q[k].values, q[k].threshold) for k in KINDS})
    written["q_monitor"] = rep / "q_monitor.csv"

    pairs: dict[str, list] = defaultdict(list)
    for line, row in tables.read_rows(_require(lay.pair_scores, "report"),
                                   ("kind", "rank", "unit_a", "unit_b", "q_sum")):
        pairs[row["kind"]].append((f"{row['unit_a']}+{row['unit_b']}",
                                   tables.parse_float(lay.pair_scores, line, "q_sum", row["q_sum"])))
    tables.write_csv(rep / "pair_qsums.csv", ("kind", "rank", "pair", "q_sum"),
                     ((k, i, p, v) for k in pairs for i, (p, v) in enumerate(pairs[k], 1)))
    plotting.pair_sums_figure(rep / "pair_qsums.png", dict(pairs))
    written["pair_qsums"] = rep / "pair_qsums.csv"

    traces: dict[str, dict[str, tuple[list, float]]] = defaultdict(dict)
    for line, row in tables.read_rows(_require(lay.triple_q, "report"),
                                   ("kind", "unit", "row", "q", "threshold")):
        per_unit = traces[row["kind"]].setdefault(row["unit"], ([], 0.0))
        per_unit[0].append(tables.parse_float(lay.triple_q, line, "q", row["q"]))
        traces[row["kind"]][row["unit"]] = (per_unit[0], tables.parse_float(
            lay.triple_q, line, "threshold", row["threshold"]))
    ref_pairs = {}
    for _, row in tables.read_rows(lay.identification, ("kind", "unit", "reference_pair")):
        if row["reference_pair"] == "1":
            ref_pairs.setdefault(row["kind"], []).append(row["unit"])
    kinds = [k for k in KINDS if k in traces]
    columns = [(k, u) for k in kinds for u in traces[k]]
    header = ["t_s"]
    for k, u in columns:
        header += [f"q_{k}_{u}", f"threshold_{k}_{u}"]
    tables.write_csv(rep / "triple_q.csv", header,
                     ([float(t)] + [v for k, u in columns
                                    for v in (float(traces[k][u][0][i]), traces[k][u][1])]
                      for i, t in enumerate(test.t)))
    if kinds:
        plotting.triple_q_figure(
            rep / "triple_q.png", test.t,
            {k: {u: (np.asarray(q), lim) for u, (q, lim) in traces[k].items()} for k in kinds},
            {k: "+".join(ref_pairs.get(k, [])) for k in kinds})
    written["triple_q"] = rep / "triple_q.csv"

    healed_rows = tables.read_rows(_require(lay.healed, "report"), ("t_s",))
    cols = ("t_s", "conv_eps_a", "conv_eps_p_rad", "healed_eps_a", "healed_eps_p_rad")
    h = np.array([[tables.parse_float(lay.healed, line, c, row[c]) for c in cols]
                  for line, row in healed_rows]).reshape(-1, len(cols))
    tables.write_csv(rep / "current_errors.csv", cols, ([float(v) for v in r] for r in h))
    plotting.current_errors_figure(rep / "current_errors.png", *h.T)
    written["current_errors"] = rep / "current_errors.csv"

    summary = [lay.identification_text.read_text(encoding="utf-8").rstrip(), ""]
    summary.append("calibration: worst nonlinearity "
                   f"{max(r.nonlinearity for r in calibration.rows):.3g}, worst phase std "
                   f"{max(r.phase_std for r in calibration.rows):.3g} rad")
    if h.size:
        summary.append(f"all units:     worst |eps_A| {np.abs(h[:, 1]).max():.4%}, "
                       f"worst |eps_P| {np.abs(h[:, 2]).max():.3g} rad")
        summary.append(f"abnormal out:  worst |eps_A| {np.abs(h[:, 3]).max():.4%}, "
                       f"worst |eps_P| {np.abs(h[:, 4]).max():.3g} rad")
    (rep / "summary.txt").write_text("\n".join(summary) + "\n", encoding="utf-8")
    written["summary"] = rep / "summary.txt"
    return written
