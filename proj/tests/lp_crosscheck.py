"""Solve exported horizon LPs with SciPy's HiGHS and compare objectives with
the embedded solver. Usage: lp_crosscheck.py <drbem binary> <work dir>."""

import json
import math
import pathlib
import re
import subprocess
import sys

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import coo_matrix

TERM = re.compile(r"([+-])\s*([0-9.eE+-]+)\s+(\S+)")


def parse_lp(text):
    """Reader for the CPLEX-LP subset written by export-lp."""
    section = None
    cols, cost = {}, {}
    rows = []  # (sense, rhs, [(col, coef)])
    bounds = {}
    pending = ""

    def col(name):
        if name not in cols:
            cols[name] = len(cols)
        return cols[name]

    def terms(body):
        body = body.strip()
        if body and body[0] not in "+-":
            body = "+ " + body
        return [(col(n), (1.0 if s == "+" else -1.0) * float(v)) for s, v, n in TERM.findall(body)]

    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("\\"):
            continue
        key = line.lower()
        if key in ("minimize", "subject to", "bounds", "end"):
            if section == "obj" and pending:
                for c, v in terms(pending.split(":", 1)[1]):
                    cost[c] = cost.get(c, 0.0) + v
            pending = ""
            section = {"minimize": "obj", "subject to": "rows", "bounds": "bounds", "end": None}[key]
            continue
        if section == "obj":
            pending += " " + line
        elif section == "rows":
            pending += " " + line
            m = re.search(r"(<=|>=|=)\s*(\S+)\s*$", pending)
            if m:
                body = pending[: m.start()].split(":", 1)[1]
                rows.append((m.group(1), float(m.group(2)), terms(body)))
                pending = ""
        elif section == "bounds":
            parts = line.split()
            if len(parts) == 2 and parts[1] == "free":
                bounds[col(parts[0])] = (None, None)
            elif len(parts) == 3 and parts[1] == ">=":
                bounds[col(parts[0])] = (float(parts[2]), None)
            elif len(parts) == 5:
                lo = None if parts[0] == "-inf" else float(parts[0])
                bounds[col(parts[2])] = (lo, float(parts[4]))
            else:
                raise ValueError("unsupported bound line: " + line)
    n = len(cols)
    c = np.zeros(n)
    for j, v in cost.items():
        c[j] = v
    ub_r, ub_c, ub_v, b_ub = [], [], [], []
    eq_r, eq_c, eq_v, b_eq = [], [], [], []
    for sense, rhs, ts in rows:
        if sense == "=":
            i = len(b_eq)
            b_eq.append(rhs)
            for j, v in ts:
                eq_r.append(i), eq_c.append(j), eq_v.append(v)
        else:
            sign = 1.0 if sense == "<=" else -1.0
            i = len(b_ub)
            b_ub.append(sign * rhs)
            for j, v in ts:
                ub_r.append(i), ub_c.append(j), ub_v.append(sign * v)
    a_ub = coo_matrix((ub_v, (ub_r, ub_c)), shape=(len(b_ub), n)).tocsr()
    a_eq = coo_matrix((eq_v, (eq_r, eq_c)), shape=(len(b_eq), n)).tocsr()
    bnd = [bounds.get(j, (0.0, None)) for j in range(n)]
    return c, a_ub, np.array(b_ub), a_eq, np.array(b_eq), bnd


def main():
    binary, work = sys.argv[1], pathlib.Path(sys.argv[2])
    work.mkdir(parents=True, exist_ok=True)
    cfg = work / "crosscheck.json"
    cfg.write_text(json.dumps({"seeds": [11], "generator": {"training_days": 90}, "output_dir": "lp"}))
    worst = 0.0
    for method in ("cep", "olp", "adr"):
        for hour in (0, 7, 31):
            subprocess.run([binary, "export-lp", "--config", str(cfg), "--method", method,
                            "--hour", str(hour), "--solve"], check=True, capture_output=True)
            stem = work / "lp" / f"horizon_h{hour}_{method}"
            ours = json.loads(stem.with_suffix(".solution.json").read_text())["objective"]
            c, a_ub, b_ub, a_eq, b_eq, bnd = parse_lp(stem.with_suffix(".lp").read_text())
            res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq, bounds=bnd, method="highs")
            if res.status != 0:
                print(f"{method} hour {hour}: HiGHS status {res.status}: {res.message}")
                return 1
            rel = abs(res.fun - ours) / max(1.0, abs(res.fun))
            worst = max(worst, rel)
            print(f"{method} hour {hour}: embedded {ours:.10g} highs {res.fun:.10g} rel {rel:.2e}")
    print(f"worst relative difference {worst:.2e}")
    return 0 if worst <= 1e-5 else 1


if __name__ == "__main__":
    sys.exit(main())
