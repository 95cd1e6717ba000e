"""Consolidated summary of a run directory: ``summary.md`` plus PNG figures."""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .outputs import read_csv  # noqa: E402

__all__ = ["ReportError", "EXPECTED", "build_report", "check_table"]

EXPECTED = ("classify.json", "diagnostics.json", "solve.json")


class ReportError(ValueError):
    pass


def _load(directory: Path):
    found = {}
    for name in EXPECTED:
        p = directory / name
        if p.exists():
            found[name] = json.loads(p.read_text())
    return found


def _row(name, status, detail=""):
    return {"check": name, "status": status, "detail": detail}


def _num(v):
    return "n/a" if v is None else f"{v:.4g}"


def _mark(ok):
    if ok is None:
        return "n/a"
    return "pass" if ok else "FAIL"


def check_table(found: dict) -> list:
    rows = []
    cl = found.get("classify.json")
    if cl is None:
        rows.append(_row("classification", "not run"))
    else:
        v = cl["verdict"]
        rows.append(_row("classification", _mark(v["label"] != "Unsupported"), v["label"]))
        rows.append(_row("non-degeneracy (A2)", _mark(cl["nondegeneracy"]["passed"]),
                         f"min eigenvalue {cl['nondegeneracy']['value']:.4g}"))
        rows.append(_row("exponential recurrence (A5)", _mark(cl["recurrence"]["passed"]),
                         f"radial limsup {cl['recurrence']['limsup']:.4g}"))
    dg = found.get("diagnostics.json")
    if dg is None:
        rows.append(_row("diagnostics", "not run"))
    else:
        mix = dg["mixing"]
        rows.append(_row("mixing rate > 0", _mark(not mix["non_mixing"]), f"rate {_num(mix['rate'])} CI [{', '.join(_num(v) for v in mix['rate_ci'])}]"))
        lm = dg["lmgf"]
        rows.append(_row("lmgf stabilised in T", _mark(lm["stabilized"]), f"gap {lm['stabilization_gap']:.3g}"))
        rows.append(_row("lmgf convex on grid", _mark(lm["convex"])))
        sc = lm.get("sign_check")
        rows.append(_row("lmgf sign check", sc["status"] if sc else "n/a"))
        cmp_ = dg.get("lmgf_mean_comparison")
        if cmp_:
            rows.append(_row("H'(0) vs mu-average", _mark(cmp_["agrees"]),
                             f"{cmp_['derivative_at_zero']:.5g} vs {cmp_['mu_average']:.5g}"))
    sv = found.get("solve.json")
    if sv is None:
        rows.append(_row("solve", "not run"))
    else:
        rows.append(_row("solve", "done", f"{len(sv['estimates'])} point(s)"))
        cc = sv.get("crosschecks")
        if cc is None:
            rows.append(_row("cross-checks", "not run"))
        else:
            rows.append(_row("semigroup identity", _mark(cc["semigroup"]["passed"]),
                             f"residual {cc['semigroup']['residual']:.3g}"))
            rows.append(_row("ball representation", _mark(cc["dirichlet"]["passed"]),
                             f"residual {cc['dirichlet']['residual']:.3g}"))
            rows.append(_row("growth scan bounded", _mark(cc["growth"]["bounded"]), f"C = {cc['growth']['C']:.4g}"))
            cen = cc["centering"]
            if "skipped" in cen:
                rows.append(_row("centering", "n/a", cen["skipped"]))
            else:
                rows.append(_row("centering", _mark(cen["passed"]), f"{cen['mean']:.3g} +- {cen['stderr']:.2g}"))
        orc = sv.get("oracle")
        if orc is None:
            rows.append(_row("finite-difference oracle", "not run"))
        elif "skipped" in orc:
            rows.append(_row("finite-difference oracle", "n/a", orc["skipped"]))
        else:
            rows.append(_row("finite-difference oracle", _mark(orc["passed"]), f"n = {orc['n']}"))
    return rows


def _floats(rows, cols):
    return [np.array([float(r[c]) for r in rows]) for c in cols]


def _fig_tv(directory, figdir):
    p = directory / "tv_decay.csv"
    if not p.exists():
        return None
    _, rows = read_csv(p)
    t, v, floor = _floats(rows, (0, 1, 2))
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.semilogy(t, np.maximum(v, 1e-6), "o-", label="TV estimate")
    ax.semilogy(t, np.maximum(floor, 1e-6), "k:", label="noise floor")
    ax.set_xlabel("t")
    ax.set_ylabel("total variation")
    ax.legend()
    fig.tight_layout()
    out = figdir / "tv_decay.png"
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out


def _fig_lmgf(directory, figdir):
    p = directory / "lmgf.csv"
    if not p.exists():
        return None
    _, rows = read_csv(p)
    b, T, H, se = _floats(rows, (0, 1, 2, 3))
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for tv in np.unique(T):
        m = T == tv
        ax.errorbar(b[m], H[m], yerr=3 * se[m], marker="o", capsize=2, label=f"T = {tv:g}")
    ax.axhline(0, color="0.6", lw=0.8)
    ax.set_xlabel("beta")
    ax.set_ylabel("H_T(beta)")
    ax.legend()
    fig.tight_layout()
    out = figdir / "lmgf.png"
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out


def _fig_simple(directory, figdir, name, ylabel, logy=False):
    p = directory / f"{name}.csv"
    if not p.exists():
        return None
    header, rows = read_csv(p)
    t = _floats(rows, (0,))[0]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for k in range(1, len(header)):
        if header[k].endswith("stderr"):
            continue
        y = _floats(rows, (k,))[0]
        se = _floats(rows, (k + 1,))[0] if k + 1 < len(header) and header[k + 1].endswith("stderr") else None
        if logy:
            y = np.where(y > 0, y, np.nan)
        ax.errorbar(t, y, yerr=None if se is None else 3 * se, marker="o", capsize=2, label=header[k])
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel(ylabel)
    ax.legend()
    fig.tight_layout()
    out = figdir / f"{name}.png"
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out


def _fig_solution(directory, figdir):
    p = directory / "solve.csv"
    if not p.exists():
        return None
    header, rows = read_csv(p)
    x, u, se = _floats(rows, (0, header.index("value"), header.index("stderr")))
    fig, ax = plt.subplots(figsize=(5, 3.5))
    g = directory / "oracle_grid.csv"
    if g.exists():
        _, grows = read_csv(g)
        gx, gu = _floats(grows, (0, 1))
        ax.plot(gx, gu, "-", color="0.4", lw=1, label="finite differences")
    ax.errorbar(x, u, yerr=3 * se, fmt="o", capsize=3, label="Monte Carlo (3 s.e.)")
    ax.set_xlabel("x1")
    ax.set_ylabel("u")
    ax.legend()
    fig.tight_layout()
    out = figdir / "solution.png"
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out


def build_report(directory) -> Path:
    directory = Path(directory)
    if not directory.is_dir():
        raise ReportError(f"{directory} is not a directory; expected one containing {', '.join(EXPECTED)}")
    found = _load(directory)
    if not found:
        raise ReportError(f"no run outputs in {directory}; expected any of: {', '.join(EXPECTED)}")
    figdir = directory / "figures"
    figdir.mkdir(exist_ok=True)
    figs = [
        _fig_tv(directory, figdir),
        _fig_lmgf(directory, figdir),
        _fig_simple(directory, figdir, "exp_moments", "E exp(gamma |X_t|)"),
        _fig_simple(directory, figdir, "deviation", "deviation probability", logy=True),
        _fig_solution(directory, figdir),
    ]
    rows = check_table(found)
    stamp = next(iter(found.values()))
    lines = [
        "# fkpoisson run summary",
        "",
        f"config hash `{stamp.get('config_hash')}`, seed {stamp.get('seed')}",
        "",
        "| check | status | detail |",
        "|---|---|---|",
    ]
    lines += [f"| {r['check']} | {r['status']} | {r['detail']} |" for r in rows]
    sv = found.get("solve.json")
    if sv:
        lines += ["", "## Solution estimates", "", "| x | u | stderr | T | tail bound |", "|---|---|---|---|---|"]
        for e in sv["estimates"]:
            lines.append(f"| {e['x']} | {e['value']:.6g} | {e['stderr']:.3g} | {e['T']:.4g} | {e['tail_bound']:.3g} |")
    shown = [f for f in figs if f is not None]
    if shown:
        lines += ["", "## Figures", ""]
        lines += [f"![{f.stem}](figures/{f.name})" for f in shown]
    missing = [n for n in EXPECTED if n not in found]
    if missing:
        lines += ["", "Not run: " + ", ".join(missing)]
    out = directory / "summary.md"
    out.write_text("\n".join(lines) + "\n")
    return out
