"""Named, reproducible experiments with CSV/JSON output.

    ctcsim list
    ctcsim run <scenario> [--config FILE] [--set k=v]... [--seed S] [--out DIR]
    ctcsim sweep <scenario> --axis k=lo:hi:step [--config FILE] [--set k=v]... [--out DIR]

Worker count comes from the CTCSIM_WORKERS environment variable.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from ._parallel import n_workers, pmap
from .deutsch import (FixedPointConfig, NoSolution, NotConverged, grandfather_unitary, info_paradox_unitary,
                      otc_break, solve_fixed_point)
from .qcore import DensityMatrix, ket, trace_distance


class UnknownScenario(KeyError):
    pass


class InvalidConfig(ValueError):
    pass


def _literal(text: str):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def load_defaults() -> dict[str, dict]:
    cp = configparser.ConfigParser()
    cp.optionxform = str
    cp.read_string(resources.files("ctcsim.data").joinpath("scenarios.ini").read_text())
    return {s: {k: _literal(v) for k, v in cp[s].items()} for s in cp.sections()}


def parse_grid(text: str) -> np.ndarray:
    """Inclusive grid from ``lo:hi:step``."""
    try:
        lo, hi, step = (float(x) for x in text.split(":"))
    except ValueError as e:
        raise InvalidConfig(f"grid must be lo:hi:step, got {text!r}") from e
    if not all(map(math.isfinite, (lo, hi, step))) or step <= 0 or hi < lo:
        raise InvalidConfig(f"bad grid {text!r}")
    n = int(round((hi - lo) / step)) + 1
    return lo + step * np.arange(n)


@dataclass
class ScenarioConfig:
    scenario: str
    params: dict = field(default_factory=dict)
    seed: int = 0
    out: str | None = None

    def resolved(self) -> dict:
        defaults = load_defaults()
        if self.scenario not in defaults:
            raise UnknownScenario(self.scenario)
        base = dict(defaults[self.scenario])
        for k, v in self.params.items():
            if k not in base:
                raise InvalidConfig(f"unknown key {k!r} for {self.scenario}")
            kind = type(base[k])
            try:
                base[k] = kind(v) if kind is not int else int(float(v)) if float(v).is_integer() else _bad(k, v)
            except (TypeError, ValueError) as e:
                raise InvalidConfig(f"{k}={v!r}: expected {kind.__name__}") from e
        return base


def _bad(k, v):
    raise InvalidConfig(f"{k}={v!r}: expected an integer")


@dataclass
class ScenarioResult:
    scenario: str
    params: dict
    scalars: dict
    tables: dict = field(default_factory=dict)  # name -> (header, rows)
    metadata: dict = field(default_factory=dict)

    def to_json(self) -> str:
        body = {"scenario": self.scenario, "params": self.params, "scalars": self.scalars,
                "metadata": self.metadata, "tables": sorted(self.tables)}
        return json.dumps(body, sort_keys=True, indent=2, default=_jsonable)

    def table_csv(self, name: str) -> str:
        header, rows = self.tables[name]
        return to_csv(header, rows)


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(type(x))


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(x) for x in r])
    return buf.getvalue()


def _cplx(prefix: str, z: complex) -> dict:
    return {f"{prefix}_re": float(np.real(z)), f"{prefix}_im": float(np.imag(z))}


def _matrix_scalars(prefix: str, M: np.ndarray) -> dict:
    out = {}
    for (i, j), v in np.ndenumerate(M):
        if np.iscomplexobj(M):
            out.update(_cplx(f"{prefix}_{i}{j}", v))
        else:
            out[f"{prefix}_{i}{j}"] = float(v)
    return out


# ---------------------------------------------------------------- scenarios

def _sc_paradox(U, p, seed):
    rho1 = DensityMatrix.from_ket(ket(str(p["rho1"])))
    sol = solve_fixed_point(U, rho1, FixedPointConfig(tol=p["tol"]))
    mix = DensityMatrix.maximally_mixed(sol.rho_ctc.dims)
    s = {"residual": sol.residual, "iterations": sol.iterations, "method": sol.method,
         "td_to_mixed": trace_distance(sol.rho_ctc, mix)}
    s.update(_matrix_scalars("rho_ctc", sol.rho_ctc.data))
    return s, {}, {"tol": p["tol"]}


def sc_grandfather(p, seed):
    return _sc_paradox(grandfather_unitary(), p, seed)


def sc_info_paradox(p, seed):
    return _sc_paradox(info_paradox_unitary(), p, seed)


def sc_otc_bell(p, seed):
    from .gaussianctc import otc_break_gaussian, two_mode_squeezed
    bell = DensityMatrix.from_ket(np.array([1, 0, 0, 1]) / np.sqrt(2))
    out = otc_break(bell, [0])
    target = DensityMatrix.maximally_mixed((2, 2))
    s = {"td_dm": trace_distance(out, target)}
    g = otc_break_gaussian(two_mode_squeezed(p["r"]), [0])
    s["gaussian_cross_block_max"] = float(np.abs(g.cov[:2, 2:]).max())
    s.update(_matrix_scalars("cov", g.cov))
    return s, {}, {"truncation": "none"}


def sc_brun_audit(p, seed):
    from .nlbox import audit_fixtures, load_fixtures
    fx = load_fixtures()
    if p["fixture"] != "all":
        if p["fixture"] not in fx:
            raise InvalidConfig(f"unknown fixture {p['fixture']!r}")
        fx = {p["fixture"]: fx[p["fixture"]]}
    reps = audit_fixtures(fx)
    rows = []
    for name, rep in reps.items():
        gap = max((w.distance for w in rep.witnesses), default=0.0)
        rows.append([name, fx[name].box, rep.verdict.value, len(rep.witnesses), gap])
    s = {f"verdict_{r[0]}": r[2] for r in rows}
    s.update({f"gap_{r[0]}": r[4] for r in rows})
    from .nlbox import EPS_BALL, GAP_THRESHOLD
    return (s, {"audit": (["fixture", "box", "verdict", "witnesses", "max_gap"], rows)},
            {"gap_threshold": GAP_THRESHOLD, "eps_ball": EPS_BALL})


def sc_gisin(p, seed):
    from .nlbox import NotApplicable, builtin_box, gisin_experiment, load_fixtures
    fx = load_fixtures()
    if p["fixture"] not in fx:
        raise InvalidConfig(f"unknown fixture {p['fixture']!r}")
    f = fx[p["fixture"]]
    r = gisin_experiment(builtin_box(f.box), f.ontology, p["trials"], seed)
    if r is NotApplicable:
        return {"applicable": 0}, {}, {"reason": "fewer than two settings"}
    return ({"applicable": 1, "success": r.success, "stderr": r.stderr, "analytic": r.analytic,
             "trials": r.trials}, {}, {"rng": "PCG64/SeedSequence"})


def sc_ctc_bs_gaussian(p, seed):
    from .gaussianctc import BsParams, GaussianPrep, ctc_beamsplitter_moments
    bs = BsParams(p["eta"], p["phi"])
    m = ctc_beamsplitter_moments(bs, GaussianPrep(complex(p["alpha_re"], p["alpha_im"]), p["r"]))
    s = _cplx("mean", m.v) | _cplx("vv", m.vv) | _cplx("vdv", m.vdv) | _cplx("phase", m.phase)
    s.update(_matrix_scalars("cov", m.state.cov))
    return s, {}, {"rails": "closed form, N -> infinity"}


def sc_ctc_bs_photon(p, seed):
    from .fockctc import fock_simulate, photon_ctc_stats
    a = photon_ctc_stats(p["eta"], p["phi"])
    b = fock_simulate(p["eta"], p["phi"], p["N"])
    return ({"g2": a["g2"], "mean_n": a["mean_n"], "g2_finite_N": b["g2"], "mean_n_finite_N": b["mean_n"]},
            {}, {"N": p["N"], "tail_bound": (1 - p["eta"]) ** (p["N"] / 2)})


def sc_otc_hup(p, seed):
    from .gaussianctc import hup_demo, otc_variances
    h = hup_demo(p["M"], p["r"])
    vq, vp = otc_variances(p["M"], p["r"])
    return ({"var_q": h.var_q_a, "var_p": h.var_p_c, "product_std": h.product_std,
             "ancilla_mean_n": h.mean_photons_ancilla, "closed_var_squeezed": vq, "closed_var_anti": vp},
            {}, {"truncation": "none, Gaussian covariance is exact"})


def sc_spod(p, seed):
    from .fockctc import SpodParams, spod_exact_stats, spod_montecarlo, spod_stats
    sp = SpodParams(p["chi"], p["N"])
    a, e = spod_stats(sp), spod_exact_stats(sp)
    s = {"mean_n": a["mean_n"], "g2": a["g2"], "mean_n_exact": e["mean_n"], "g2_exact": e["g2"]}
    if p["trials"] > 0:
        mc = spod_montecarlo(sp, p["trials"], seed)
        s.update({"mc_mean_n": mc.mean_n, "mc_g2": mc.g2, "mc_stderr_mean": mc.stderr_mean,
                  "mc_stderr_g2": mc.stderr_g2})
    return s, {}, {"rng": "PCG64/SeedSequence"}


def sc_eventop_g2(p, seed):
    from .eventop import CommutatorKernel, Contracted, Direct, Truncated, eo_g2
    k = CommutatorKernel.gaussian(p["kappa"])
    method = {"contracted": Contracted(), "direct": Direct(p["direct_N"]),
              "truncated": Truncated(p["X"] or None)}.get(p["method"])
    if method is None:
        raise InvalidConfig(f"unknown method {p['method']!r}")
    rows, tails = [], []
    for eta in parse_grid(p["eta_grid"]):
        g2, tail = eo_g2(float(eta), k, method, return_tail=True)
        tails.append(tail)
        rows.append([float(eta), g2, 8 * eta * (1 - eta) / (2 - eta)])
    dev = max(abs(r[1] - r[2]) for r in rows)
    return ({"max_dev_from_deutsch": dev, "points": len(rows)},
            {"g2": (["eta", "g2", "g2_deutsch"], rows)}, {"max_tail_bound": max(tails)})


def sc_eventop_wigner(p, seed):
    from .eventop import CommutatorKernel, eo_gaussian_moments
    from .gaussianctc import BsParams, GaussianPrep
    m = eo_gaussian_moments(BsParams(p["eta"], np.pi / 2), GaussianPrep(r=p["r"]),
                            CommutatorKernel.gaussian(p["kappa"]))
    q, pp, W = m.wigner(p["extent"], p["resolution"])
    rows = [[float(q[i]), float(pp[j]), float(W[i, j])] for i in range(len(q)) for j in range(len(pp))]
    return (_matrix_scalars("cov", m.state.cov), {"wigner": (["q", "p", "W"], rows)},
            {"tail_bound": m.tail_bound})


def sc_gravity(p, seed):
    from .eventop import gravity_scenario
    g = gravity_scenario(p["h"], p["sigma_t"])
    return {k: v for k, v in g.items() if k != "h"}, {}, {"kappa_convention": "kappa^2 = delta_t^2 / (8 sigma_t^2)"}


def sc_rel_cnot(p, seed):
    from .relcirc import GaussianEnvelope, lorentz_overlap, relativistic_cnot
    z = lorentz_overlap(GaussianEnvelope(p["sigma"], p["k0"], v=p["v"]), GaussianEnvelope(p["sigma"], p["k0"]),
                        p["dx"])
    val = relativistic_cnot(p["alpha"], p["v"], p["dx"], p["sigma"], p["k0"])
    return ({"IZ": val, "abs_zeta": abs(z), "ideal": 1 - 2 * p["alpha"] ** 2}, {},
            {"overlap": "closed-form Gaussian integral"})


REGISTRY = {
    "grandfather": sc_grandfather,
    "info-paradox": sc_info_paradox,
    "otc-bell": sc_otc_bell,
    "brun-audit": sc_brun_audit,
    "gisin": sc_gisin,
    "ctc-bs-gaussian": sc_ctc_bs_gaussian,
    "ctc-bs-photon": sc_ctc_bs_photon,
    "otc-hup": sc_otc_hup,
    "spod": sc_spod,
    "eventop-g2": sc_eventop_g2,
    "eventop-wigner": sc_eventop_wigner,
    "gravity": sc_gravity,
    "rel-cnot": sc_rel_cnot,
}


def run(cfg: ScenarioConfig) -> ScenarioResult:
    if cfg.scenario not in REGISTRY:
        raise UnknownScenario(cfg.scenario)
    params = cfg.resolved()
    scalars, tables, meta = REGISTRY[cfg.scenario](params, cfg.seed)
    meta = {"version": __version__, "seed": cfg.seed, "workers": n_workers(), **meta}
    res = ScenarioResult(cfg.scenario, params, scalars, tables, meta)
    if cfg.out:
        write_result(res, Path(cfg.out))
    return res


def write_result(res: ScenarioResult, out: Path, stem: str | None = None):
    out.mkdir(parents=True, exist_ok=True)
    stem = stem or res.scenario
    (out / f"{stem}.json").write_text(res.to_json() + "\n")
    for name in res.tables:
        (out / f"{stem}_{name}.csv").write_text(res.table_csv(name))


def sweep(cfg: ScenarioConfig, axis: str | None = None) -> tuple[list[ScenarioResult], str]:
    """Run one scenario per axis point; returns the results and a merged CSV."""
    if not axis:
        res = run(cfg)
        keys = sorted(k for k, v in res.scalars.items() if not isinstance(v, str))
        return [res], to_csv(keys, [[res.scalars[k] for k in keys]])
    try:
        key, grid = axis.split("=", 1)
    except ValueError as e:
        raise InvalidConfig(f"axis must be key=lo:hi:step, got {axis!r}") from e
    base = cfg.resolved()
    if key not in base or isinstance(base[key], str):
        raise InvalidConfig(f"axis {key!r} is not a numeric parameter of {cfg.scenario}")
    values = parse_grid(grid)
    if isinstance(base[key], int):
        values = np.unique(np.round(values).astype(int))

    def one(v):
        params = dict(cfg.params)
        params[key] = v.item()
        return run(ScenarioConfig(cfg.scenario, params, cfg.seed, None))

    results = pmap(one, list(values))
    keys = sorted(k for k, v in results[0].scalars.items() if not isinstance(v, str))
    rows = [[r.params[key]] + [r.scalars[k] for k in keys] for r in results]
    merged = to_csv([key] + keys, rows)
    if cfg.out:
        out = Path(cfg.out)
        for r in results:
            write_result(r, out, f"{cfg.scenario}_{key}={_fmt(r.params[key])}")
        (out / f"{cfg.scenario}_sweep_{key}.csv").write_text(merged)
    return results, merged


# ---------------------------------------------------------------- entry point

def read_config_file(path: str, scenario: str) -> dict:
    """key = value pairs from ``[scenario]`` (or ``[params]``) of an INI file."""
    cp = configparser.ConfigParser()
    cp.optionxform = str
    if not cp.read(path):
        raise InvalidConfig(f"cannot read config file {path!r}")
    for sec in (scenario, "params"):
        if cp.has_section(sec):
            return dict(cp[sec].items())
    raise InvalidConfig(f"{path!r} has no [{scenario}] or [params] section")


def _parse_sets(items) -> dict:
    out = {}
    for it in items or []:
        if "=" not in it:
            raise InvalidConfig(f"--set expects k=v, got {it!r}")
        k, v = it.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ctcsim", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)
    sub.add_parser("list", help="print the scenario registry")
    for name in ("run", "sweep"):
        sp = sub.add_parser(name)
        sp.add_argument("scenario")
        sp.add_argument("--config", metavar="FILE", help="INI file with a [scenario] section; --set wins")
        sp.add_argument("--set", action="append", metavar="K=V", default=[])
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", default=None)
        if name == "sweep":
            sp.add_argument("--axis", default=None, metavar="K=LO:HI:STEP")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.cmd == "list":
        defaults = load_defaults()
        for name in REGISTRY:
            print(f"{name}: " + ", ".join(f"{k}={v}" for k, v in defaults[name].items()))
        return 0
    try:
        params = read_config_file(args.config, args.scenario) if args.config else {}
        params.update(_parse_sets(args.set))
        cfg = ScenarioConfig(args.scenario, params, args.seed, args.out)
        if args.cmd == "run":
            print(run(cfg).to_json())
        else:
            _, merged = sweep(cfg, args.axis)
            sys.stdout.write(merged)
    except (UnknownScenario, InvalidConfig) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (NotConverged, NoSolution) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
