"""Command-line entry point: ``nlshier <command> ...``.

Every command writes its structured outputs and a ``manifest.json`` into
``--out``.  ``nlshier rerun <manifest>`` replays a run into a fresh directory
and compares file digests.

Exit codes: 0 success, 1 verification mismatch, 2 usage error,
3 numeric abort, 4 internal tool error.
"""

from __future__ import annotations

import argparse
import json
import sys
import tempfile
import time
import traceback
from argparse import Namespace
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import appendix, hierarchy as H, io, norms, solutions as S, spectral as sp
from .diffpoly import CONJ, NEG_CONJ, SubstitutionRule, is_total_derivative, substitute, to_json, to_pretty
from .gaussian import parse_coefficient

EXIT_OK, EXIT_MISMATCH, EXIT_USAGE, EXIT_ABORT, EXIT_TOOL = 0, 1, 2, 3, 4


class UsageError(ValueError):
    pass


def _int_list(text):
    """'1,3,5' or '1..8' or '1..1024:pow2'."""
    text = str(text)
    if ".." in text:
        lo, hi = text.split("..")
        pow2 = hi.endswith(":pow2")
        lo, hi = int(lo), int(hi.split(":")[0])
        if pow2:
            out, v = [], max(lo, 1)
            while v <= hi:
                out.append(v)
                v *= 2
            return out
        return list(range(lo, hi + 1))
    return [int(v) for v in text.split(",") if v.strip()]


def _float_list(text):
    return [float(v) for v in str(text).split(",") if v.strip()]


def _rule(name):
    try:
        return SubstitutionRule.parse(name)
    except (ValueError, KeyError) as e:
        raise UsageError(f"bad substitution {name!r}") from e


def _say(msg=""):
    print(msg, flush=True)


# tables ---------------------------------------------------------------

def resolve_table(spec: str, lam=None):
    """Table by built-in name or file path; returns (table, rule, input_path or None).

    Built-ins: ``hierarchy-jJ[:neg_conj]``, ``torus-jJ``, ``soliton-jJ``
    (with ``lam`` giving the free parameters of the fitted family).
    """
    path = Path(spec)
    if path.suffix == ".json" or path.exists():
        if not path.exists():
            raise UsageError(f"table file {spec} not found")
        data = json.loads(path.read_text())
        return H.CoefficientTable.from_json(data), NEG_CONJ if data.get("rule") == "neg_conj" else CONJ, path
    name, _, opt = spec.partition(":")
    kind, _, jtext = name.rpartition("-j")
    if not jtext.isdigit() or int(jtext) < 1:
        raise UsageError(f"unknown table {spec!r}")
    j = int(jtext)
    if kind == "hierarchy":
        rule = _rule(opt or "conj")
        return H.extract_coefficients(H.nls_hierarchy_equation(j, rule)), rule, None
    if kind == "torus":
        return S.torus_table(j, 1 if S.torus_plane_wave_solves(j) else -1), CONJ, None
    if kind == "soliton":
        fam = S.fit_equation_for_ansatz(j)
        lams = list(lam or [])
        if len(lams) != len(fam.free_params):
            raise UsageError(f"soliton-j{j} needs {len(fam.free_params)} --lam values")
        return fam.table(*[Fraction(v).limit_denominator(10 ** 6) for v in lams]), NEG_CONJ, None
    raise UsageError(f"unknown table {spec!r}")


# generate -------------------------------------------------------------

def cmd_generate(a, out: Path):
    files = []
    if sum(x is not None for x in (a.j, a.flow, a.fitted_soliton, a.torus)) != 1:
        raise UsageError("give exactly one of --j, --flow, --fitted-soliton, --torus")
    if a.flow is not None:
        if a.flow < 0:
            raise UsageError("--flow must be nonnegative")
        alpha = H.SYMBOLIC if a.alpha == "symbolic" else parse_coefficient(a.alpha)
        eq = H.flow_equation(H.FlowSpec(a.flow, alpha))
        text = eq.pretty()
        io.write_json(out / "flow.json", {"n": a.flow, "alpha": str(a.alpha),
                                          "q_rhs": to_json(eq.rhs), "r_rhs": to_json(eq.r_rhs)})
        files.append("flow.json")
    elif a.fitted_soliton is not None:
        fam = S.fit_equation_for_ansatz(a.fitted_soliton)
        io.write_json(out / "family.json", fam.to_json())
        files.append("family.json")
        lines = [f"{'fixed' if not any(v[i] for v in fam.nullspace) else 'free'}  {d['monomial']}: "
                 f"{d['constant']} + " + " + ".join(f"({p}) {n}" for p, n in zip(d["per_param"], fam.free_params))
                 for i, d in enumerate(fam.to_json()["terms"])]
        text = "\n".join(lines)
        if a.lam:
            table = fam.table(*[Fraction(v).limit_denominator(10 ** 6) for v in a.lam])
            io.write_json(out / "table.json", dict(table.to_json(), rule="neg_conj"))
            files.append("table.json")
            text += "\nF = " + to_pretty(table.to_polynomial())
    else:
        if a.j is not None:
            if a.j < 1:
                raise UsageError("--j must be positive")
            rule = _rule(a.substitute)
            eq = H.nls_hierarchy_equation(a.j, rule)
            table = H.extract_coefficients(eq)
            text = eq.pretty() if rule == CONJ else f"i u_t + {('-', '')[a.j % 2]}u_{'x' * 2 * a.j} = " \
                + to_pretty(table.to_polynomial())
            rule_name = "neg_conj" if rule == NEG_CONJ else "conj"
        else:
            table = resolve_table(f"torus-j{a.torus}")[0]
            text = "F = " + to_pretty(table.to_polynomial())
            rule_name = "conj"
        back = H.CoefficientTable.from_json(json.loads(table.dumps()))
        if back != table:
            raise RuntimeError("coefficient table does not round-trip")
        io.write_json(out / "table.json", dict(table.to_json(), rule=rule_name))
        files.append("table.json")
    (out / "equation.txt").write_text(text + "\n")
    files.append("equation.txt")
    _say(text)
    return EXIT_OK, files


# verify ---------------------------------------------------------------

def _verify_appendix(a):
    rows = []
    fixes = {(e.kind, e.n): e for e in appendix.errata()}
    for (kind, n), line in sorted(appendix.load(corrected=True).items()):
        if kind == "density":
            ok = is_total_derivative(H.conserved_density(n) - line.value)
        else:
            ok = H.flow_equation(H.FlowSpec(n - 1)).rhs == line.value
        note = f"erratum: {fixes[kind, n].field} {fixes[kind, n].old!r} -> {fixes[kind, n].new!r}" \
            if (kind, n) in fixes else ""
        rows.append((f"{kind} n={n}", ok, note))
    return rows


def _verify_structure(a):
    rows = []
    for n in range(1, a.max_n + 1):
        rep = H.validate_Y_structure(n)
        for name, ok in rep.checks.items():
            rows.append((f"Y_{n} {name}", ok, rep.counterexamples.get(name, "")))
    for j in range(1, a.max_j + 1):
        table = H.extract_coefficients(H.nls_hierarchy_equation(j))
        ok = table.is_nls_pattern()
        rows.append((f"equation j={j} NLS-like form", ok, f"{len(table.entries)} terms"))
    return rows


def _verify_soliton(a, out: Path):
    j = a.j
    fam = S.fit_equation_for_ansatz(j)
    rows = [(f"j={j} particular solution, symbolic residual", not S.symbolic_residual(j, fam.polynomial(
        *[0] * len(fam.nullspace))).terms, "")]
    for i, vec in enumerate(fam.nullspace):
        acc = S.SechExpr({})
        for key, c in zip(fam.basis, vec):
            acc = acc + S.monomial_on_soliton(key).scale(c)
        rows.append((f"j={j} direction {fam.free_params[i]}, symbolic residual", not acc.terms, ""))
    grid = sp.Grid(a.L, a.M)
    lams = a.lam or [0.0] * len(fam.nullspace)
    table = fam.table(*[Fraction(v).limit_denominator(10 ** 6) for v in lams])
    ans = S.AnsatzField.soliton(j, N=a.N, omega=a.omega)
    res = S.residual_norm(table, ans, grid, 0.0, relative=True)
    rows.append((f"j={j} numeric residual at lambda={lams}, M={a.M}", res <= a.tol, f"{res:.3e}"))
    sweep = []
    M = 128
    while M <= a.M:
        sweep.append((M, S.residual_norm(table, ans, sp.Grid(a.L, M), 0.0, relative=True)))
        M *= 2
    io.write_csv(out / "residual.csv", ["resolution", "residual"], sweep)
    io.write_json(out / "family.json", fam.to_json())
    return rows


def cmd_verify(a, out: Path):
    if a.scope == "appendix":
        rows, files = _verify_appendix(a), []
    elif a.scope == "structure":
        rows, files = _verify_structure(a), []
    else:
        rows, files = _verify_soliton(a, out), ["residual.csv", "family.json"]
    width = max(len(r[0]) for r in rows)
    for name, ok, note in rows:
        _say(f"{name:<{width}}  {'PASS' if ok else 'MISMATCH'}  {note}".rstrip())
    io.write_csv(out / "verify.csv", ["item", "status", "note"],
                 [(n, "PASS" if ok else "MISMATCH", note) for n, ok, note in rows])
    files.append("verify.csv")
    return (EXIT_OK if all(r[1] for r in rows) else EXIT_MISMATCH), files


# simulate -------------------------------------------------------------

def _initial(a, table):
    j = table.j
    if a.ic == "soliton":
        grid = sp.Grid(a.L or 80.0, a.M or 2048)
        exact = S.AnsatzField.soliton(j, N=a.N, omega=a.omega)
    elif a.ic == "plane-wave":
        grid = sp.Grid.torus(a.M or 16)
        exact = S.AnsatzField.plane_wave(j, s=a.s, N=a.N, a=a.amplitude)
    elif a.ic == "random":
        grid = sp.Grid(a.L, a.M or 1024) if a.L else sp.Grid.torus(a.M or 1024)
        return sp.random_smooth_data(grid, a.max_mode, a.amplitude, a.seed), None
    else:
        raise UsageError(f"unknown initial condition {a.ic!r}")
    return sp.FieldState(grid, exact.value(grid.x, 0.0)), exact


def _plots(out: Path, traj, drift):
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        _say("matplotlib not available; skipping plots")
        return []
    g = traj.states[0].grid
    fig, ax = plt.subplots(figsize=(6, 4))
    img = np.array([np.abs(s.values) for s in traj.states])
    ax.imshow(img, aspect="auto", origin="lower",
              extent=(g.x[0], g.x[-1], traj.times[0], traj.times[-1]))
    ax.set_xlabel("x")
    ax.set_ylabel("t")
    ax.set_title("|u(x, t)|")
    fig.savefig(out / "modulus.png", dpi=100)
    plt.close(fig)
    files = ["modulus.png"]
    if drift.labels:
        fig, ax = plt.subplots(figsize=(6, 4))
        for lab, vals in zip(drift.labels, drift.values):
            rel = [abs(v - vals[0]) / (abs(vals[0]) + 1e-300) for v in vals]
            ax.semilogy(drift.times, np.maximum(rel, 1e-18), label=lab)
        ax.set_xlabel("t")
        ax.set_ylabel("relative drift")
        ax.legend()
        fig.savefig(out / "drift.png", dpi=100)
        plt.close(fig)
        files.append("drift.png")
    return files


def cmd_simulate(a, out: Path):
    table, rule, _ = resolve_table(a.table, a.lam)
    if a.rule:
        rule = _rule(a.rule)
    u0, exact = _initial(a, table)
    dt = a.dt
    selection = None
    if dt is None:
        selection = sp.select_dt(table, u0, a.T, a.dt0, a.dt_tol)
        dt = selection.dt
    cfg = sp.SimConfig(dt=dt, T=a.T, snapshot_stride=a.stride)
    traj = sp.integrate(table, u0, cfg)
    labels = [f"I{n}" for n in a.monitor]
    dens = [substitute(H.conserved_density(n), rule) for n in a.monitor]
    drift = sp.conserved_scan(dens, traj, labels)
    g = u0.grid
    summary = {"table": a.table, "j": table.j, "ic": a.ic, "dt": traj.dt, "steps": traj.steps,
               "T": a.T, "M": g.M, "L": g.L, "drift": dict(zip(labels, map(float, drift.drift))),
               "l2_initial": u0.l2(), "l2_final": traj.final.l2()}
    if selection:
        summary["dt_selection"] = [{"dt": d, "change": c} for d, c in selection.history]
    if exact is not None:
        err = max(sp.l2_distance(s.values, exact.value(g.x, s.time), g) for s in traj.states)
        summary["max_error_vs_exact"] = err
    io.write_json(out / "summary.json", summary)
    header = ["t"] + [f"{lab}_{part}" for lab in labels for part in ("re", "im")]
    io.write_csv(out / "drift.csv", header,
                 [[t] + [f for v in vals for f in (v.real, v.imag)] for t, vals in drift.rows()])
    io.write_csv(out / "snapshots.csv", ["t", "x", "re", "im"],
                 [(s.time, x, v.real, v.imag) for s in traj.states for x, v in zip(g.x, s.values)])
    files = ["summary.json", "drift.csv", "snapshots.csv"]
    for lab, d in zip(labels, drift.drift):
        _say(f"drift {lab}: {d:.3e}")
    if exact is not None:
        _say(f"max L2 error vs exact solution: {summary['max_error_vs_exact']:.3e}")
    _say(f"dt = {traj.dt:.6g}, steps = {traj.steps}")
    if a.plot:
        _plots(out, traj, drift)  # images are not part of the reproducible outputs
    return EXIT_OK, files


# illposed -------------------------------------------------------------

def _simulated_separation(j, s, n, N, r, M, dt):
    from .norms import NormSpec, norm
    grid = sp.Grid.torus(M)
    table = resolve_table(f"torus-j{j}")[0]
    sep = S.illposedness_separation(j, s, n, N)
    finals = []
    for amp in (1.0, 1.0 + 1.0 / n):
        ans = S.AnsatzField.plane_wave(j, s=s, N=N, a=amp)
        u0 = sp.FieldState(grid, ans.value(grid.x, 0.0))
        finals.append(sp.integrate(table, u0, sp.SimConfig(dt=dt, T=sep.t_n, snapshot_stride=10 ** 9)).final)
    diff = sp.FieldState(grid, finals[1].values - finals[0].values)
    return norm(diff, NormSpec("fourier-lebesgue-Hsr", s=s, r=r))


def cmd_illposed(a, out: Path):
    if a.kind == "torus-plane-wave":
        if not S.torus_plane_wave_solves(a.j):
            _say(f"note: for odd j = {a.j} the plane wave solves the equation with nonlinearity -|u|^2 d^{2 * a.j - 2} u")
        header = ["n", "t_n", "norm_at_0", "norm_at_tn", "norm_at_0_exact", "norm_at_tn_exact"]
        if a.simulate:
            header += ["simulated_norm_at_tn", "abs_difference"]
        rows = []
        for n in _int_list(a.n):
            sep = S.illposedness_separation(a.j, a.s, n, a.N)
            row = [n, sep.t_n, sep.norm_at_0, sep.norm_at_tn,
                   str(sep.norm_at_0_exact or ""), str(sep.norm_at_tn_exact or "")]
            if a.simulate:
                sim = _simulated_separation(a.j, a.s, n, a.N, a.r, a.M, a.dt)
                row += [sim, abs(sim - sep.norm_at_tn)]
            rows.append(row)
            _say("  ".join(str(v) if not isinstance(v, float) else f"{v:.12g}" for v in row))
        io.write_csv(out / "separation.csv", header, rows)
        return EXIT_OK, ["separation.csv"]
    rows = []
    for N in _int_list(a.N_list):
        if N <= a.N0:
            continue  # the constellations coincide
        for k, triples in sorted(S.c3_constellations(N, a.N0).items()):
            if k != N:
                continue
            for k1, k2, k3 in triples:
                n3, res = S.c3_resonant_symbol(k1, k2, k3)
                rows.append([N, k1, k2, k3, str(n3), res, str(n3 / N ** 2)])
    for r in rows:
        _say("  ".join(map(str, r)))
    io.write_csv(out / "c3_symbol.csv", ["N", "k1", "k2", "k3", "n3", "resonance", "n3_over_N2"], rows)
    return EXIT_OK, ["c3_symbol.csv"]


# probe ----------------------------------------------------------------

def cmd_probe(a, out: Path):
    rep = norms.probe_estimate(a.estimate, a.j, a.samples, a.seed, tuple(a.lambdas))
    io.write_json(out / "probe.json", rep.to_json())
    for e in rep.lambda_sweep:
        _say(f"lambda={e['lambda']:<3} max={e['max_ratio']:.6g} median={e['median_ratio']:.6g}")
    _say(f"sweep {'bounded' if rep.bounded else 'GROWS'}; window bias {rep.window_bias:.3g}")
    return (EXIT_OK if rep.bounded else EXIT_MISMATCH), ["probe.json"]


COMMANDS = {"generate": cmd_generate, "verify": cmd_verify, "simulate": cmd_simulate,
            "illposed": cmd_illposed, "probe": cmd_probe}


# parser ---------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="nlshier", description="NLS hierarchy toolkit")
    sub = p.add_subparsers(dest="command", required=True)
    subs = {}

    def add(name, **kw):
        s = sub.add_parser(name, **kw)
        s.add_argument("--out", default="nlshier-out", help="output directory")
        s.add_argument("--config", help="JSON file of option defaults")
        subs[name] = s
        return s

    g = add("generate", help="generate hierarchy equations and coefficient tables")
    g.add_argument("--j", type=int)
    g.add_argument("--flow", type=int)
    g.add_argument("--fitted-soliton", type=int)
    g.add_argument("--torus", type=int)
    g.add_argument("--alpha", default="symbolic")
    g.add_argument("--substitute", default="conj", help="conj or neg_conj")
    g.add_argument("--lam", type=_float_list)

    v = add("verify", help="check generated algebra against reference data")
    v.add_argument("scope", choices=("appendix", "structure", "soliton"))
    v.add_argument("--max-n", type=int, default=12)
    v.add_argument("--max-j", type=int, default=4)
    v.add_argument("--j", type=int, default=2)
    v.add_argument("--lam", type=_float_list)
    v.add_argument("--N", type=float, default=1.0)
    v.add_argument("--omega", type=float, default=1.0)
    v.add_argument("--L", type=float, default=80.0)
    v.add_argument("--M", type=int, default=2048)
    v.add_argument("--tol", type=float, default=1e-8)

    s = add("simulate", help="integrate an equation from an initial condition")
    s.add_argument("--table", required=True)
    s.add_argument("--lam", type=_float_list)
    s.add_argument("--rule", help="substitution used for monitored densities")
    s.add_argument("--ic", default="soliton", choices=("soliton", "plane-wave", "random"))
    s.add_argument("--N", type=float, default=1.0)
    s.add_argument("--omega", type=float, default=1.0)
    s.add_argument("--s", type=float, default=0.0)
    s.add_argument("--amplitude", type=float, default=None)
    s.add_argument("--max-mode", type=int, default=6)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--L", type=float)
    s.add_argument("--M", type=int)
    s.add_argument("--dt", type=float, help="time step; chosen by self-convergence when omitted")
    s.add_argument("--dt0", type=float, default=1e-3)
    s.add_argument("--dt-tol", type=float, default=1e-6)
    s.add_argument("--T", type=float, default=0.1)
    s.add_argument("--monitor", type=_int_list, default=[1, 3])
    s.add_argument("--stride", type=int, default=10)
    s.add_argument("--plot", action="store_true")

    i = add("illposed", help="ill-posedness tables")
    i.add_argument("kind", choices=("torus-plane-wave", "c3-symbol"))
    i.add_argument("--j", type=int, default=2)
    i.add_argument("--s", type=float, default=0.0)
    i.add_argument("--r", type=float, default=2.0)
    i.add_argument("--n", default="1..8")
    i.add_argument("--N", type=int, default=1, help="plane-wave frequency")
    i.add_argument("--N-list", default="2..1024:pow2", help="c3-symbol frequencies, each above N0")
    i.add_argument("--N0", type=int, default=1)
    i.add_argument("--simulate", action="store_true")
    i.add_argument("--M", type=int, default=16)
    i.add_argument("--dt", type=float, default=0.005)

    pr = add("probe", help="empirical ratio probes for space-time estimates")
    pr.add_argument("estimate", choices=norms.ESTIMATES)
    pr.add_argument("--j", type=int, default=2)
    pr.add_argument("--samples", type=int, default=100)
    pr.add_argument("--seed", type=int, default=0)
    pr.add_argument("--lambdas", type=_float_list, default=[1.0, 2.0, 4.0, 8.0])

    r = sub.add_parser("rerun", help="replay a run manifest and compare outputs")
    r.add_argument("manifest")
    r.add_argument("--out", help="directory for the replay (default: a temporary one)")
    return p, subs


def _params(a) -> dict:
    return {k: v for k, v in vars(a).items() if k not in ("out", "config")}


def execute(command: str, params: dict, out: Path) -> tuple[int, RunManifest]:
    out.mkdir(parents=True, exist_ok=True)
    a = Namespace(**params)
    man = io.RunManifest(command, params)
    table = params.get("table")
    if table and Path(table).exists():
        man.inputs[table] = io.sha256(table)
    t0 = time.perf_counter()
    code, files = COMMANDS[command](a, out)
    man.wall_clock = time.perf_counter() - t0
    man.record_outputs(out, files)
    man.write(out)
    return code, man


RunManifest = io.RunManifest


def _rerun(a) -> int:
    man = RunManifest.read(a.manifest)
    for path, digest in man.inputs.items():
        if not Path(path).exists() or io.sha256(path) != digest:
            _say(f"input {path} changed since the original run")
            return EXIT_MISMATCH
    out = Path(a.out) if a.out else Path(tempfile.mkdtemp(prefix="nlshier-rerun-"))
    _, new = execute(man.command, man.params, out)
    ok = True
    for name, digest in sorted(man.outputs.items()):
        same = new.outputs.get(name) == digest
        ok &= same
        _say(f"{name}: {'identical' if same else 'DIFFERS'}")
    _say(f"replay written to {out}")
    return EXIT_OK if ok else EXIT_MISMATCH


def main(argv=None) -> int:
    parser, subs = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        a = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    if a.command != "rerun" and a.config:
        try:
            cfg = json.loads(Path(a.config).read_text())
        except (OSError, json.JSONDecodeError) as e:
            _say(f"usage error: cannot read config: {e}")
            return EXIT_USAGE
        subs[a.command].set_defaults(**{k.replace("-", "_"): v for k, v in cfg.items()})
        a = parser.parse_args(argv)
    try:
        if a.command == "rerun":
            return _rerun(a)
        if a.command == "simulate" and a.amplitude is None:
            a.amplitude = 0.05 if a.ic == "random" else 1.0
        code, _ = execute(a.command, _params(a), Path(a.out))
        return code
    except (UsageError, ValueError) as e:
        _say(f"usage error: {e}")
        return EXIT_USAGE
    except sp.NumericAbort as e:
        _say(f"numeric abort: {e}")
        return EXIT_ABORT
    except Exception:
        traceback.print_exc()
        _say("tool error")
        return EXIT_TOOL


if __name__ == "__main__":
    sys.exit(main())
