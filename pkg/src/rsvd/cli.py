"""Batch driver: ``rsvd verify|evolve|duality|limit``.

Configuration comes from an optional TOML file (``--config``) with command-line
flags taking precedence.  Tables are written as CSV (17 significant digits) or
JSON.  Every subcommand exits with status 1 when a tolerance is violated and 2
on configuration or domain errors.
"""

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
import tomli_w

from .dynamics import (
    darboux_experiment,
    duality_experiment,
    f1_dual_hamiltonian,
    integrate_canonical,
    phi1_hamiltonian,
)
from .errors import ConfigError, DomainExit, DomainViolation, RSVDError
from .matgroup import (
    bracket_from_gradients,
    decompose_kb,
    free_hamiltonian,
    gradients,
    master_function,
    random_sl,
)
from .models import (
    DualPoint,
    actions_F_red,
    actions_phi_dual,
    ham_phi1_red,
    ham_rational,
    rational_potential,
)
from .reduction import (
    ReducedPoint,
    build_params,
    domain_check,
    make_rng,
    moduli_closed_form,
    moduli_oracle,
    moduli_split_form,
    reconstruct,
    relative_main_residual,
    sample_domain,
)

TOL_ENV = "RSVD_TOL_OVERRIDE"

DEFAULT_TOLERANCES = {
    "decomposition": 1e-10,
    "involutivity": 1e-6,
    "oracle": 1e-10,
    "split_form": 1e-10,
    "reconstruction_residual": 1e-10,
    "reconstruction_fixed_point": 1e-9,
    "hamiltonian": 1e-9,
    "darboux": 1e-6,
    "darboux_multi": 1e-5,
    "duality_lambda": 1e-9,
    "duality_theta": 1e-7,
    "evolve_energy": 1e-8,
    "evolve_energy_stormer": 1e-5,
    "limit_slope": 0.1,
}


@dataclass
class RunConfig:
    n: int = 2
    u: float = 0.1
    v: float = 0.3
    mu: float = math.log(2)
    seed: int = 42
    t_end: float = 1.0
    dt: float = 1e-3
    lam: list = None
    theta: list = None
    phat: list = None
    qhat: list = None
    output: str = None
    format: str = "csv"
    method: str = "rk4"
    ladder: list = field(default_factory=lambda: [1e-1, 1e-2, 1e-3, 1e-4])

    def validate(self):
        if not isinstance(self.n, int) or isinstance(self.n, bool) or not 1 <= self.n <= 8:
            raise ConfigError(f"n must be an integer in [1, 8], got {self.n!r}")
        for name in ("u", "v", "mu", "t_end", "dt"):
            if not isinstance(getattr(self, name), (int, float)) or not math.isfinite(getattr(self, name)):
                raise ConfigError(f"{name} must be a finite number")
        if self.mu <= 0:
            raise ConfigError(f"mu must be positive, got {self.mu}")
        if self.dt <= 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if self.t_end < 0:
            raise ConfigError("t_end must be non-negative")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"format must be csv or json, got {self.format!r}")
        if self.method not in ("rk4", "stormer-split"):
            raise ConfigError(f"method must be rk4 or stormer-split, got {self.method!r}")
        if self.lam is not None and self.phat is not None:
            raise ConfigError("give either lambda or phat, not both")
        for name in ("lam", "theta", "phat", "qhat"):
            val = getattr(self, name)
            if val is not None and len(val) != self.n:
                raise ConfigError(f"{_key(name)} must have n = {self.n} entries, got {len(val)}")
        if not self.ladder or any(r <= 0 for r in self.ladder):
            raise ConfigError("ladder must be a non-empty list of positive numbers")
        return self

    @property
    def params(self):
        return build_params(self.n, self.u, self.v, self.mu)


def _key(name):
    return "lambda" if name == "lam" else name


def _attr(key):
    return "lam" if key == "lambda" else key


def parse_config_text(text):
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc
    names = {f.name for f in fields(RunConfig)}
    cfg = RunConfig()
    for key, val in raw.items():
        attr = _attr(key.replace("-", "_"))
        if attr not in names:
            raise ConfigError(f"unknown config key {key!r}")
        setattr(cfg, attr, val)
    return cfg.validate()


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config_text(fh.read())


def serialize_config(cfg):
    """Normalized TOML text; ``parse_config_text`` inverts it."""
    out = {}
    for f in fields(RunConfig):
        val = getattr(cfg, f.name)
        if val is None:
            continue
        if isinstance(val, (list, tuple)):
            val = [float(x) for x in val]
        elif f.type is float or f.name in ("u", "v", "mu", "t_end", "dt"):
            val = float(val)
        out[_key(f.name)] = val
    return tomli_w.dumps(out)


def _floats(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def build_parser():
    parser = argparse.ArgumentParser(prog="rsvd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="FILE", help="TOML file; flags override its values")
    common.add_argument("--n", type=int, help="number of particles, 1..8 (default 2)")
    common.add_argument("--u", type=float, help="coupling u (default 0.1)")
    common.add_argument("--v", type=float, help="coupling v (default 0.3)")
    common.add_argument("--mu", type=float, help="coupling mu > 0 (default ln 2)")
    common.add_argument("--seed", type=int, help="seed for domain sampling (default 42)")
    common.add_argument("--t-end", dest="t_end", type=float, help="integration horizon (default 1)")
    common.add_argument("--dt", type=float, help="fixed time step (default 1e-3)")
    common.add_argument("--lambda", dest="lam", type=_floats, metavar="L1,..", help="initial lambda; sampled if omitted")
    common.add_argument("--theta", type=_floats, metavar="T1,..", help="initial theta; sampled if omitted")
    common.add_argument("--phat", type=_floats, metavar="P1,..", help="initial phat; selects the dual chart")
    common.add_argument("--qhat", type=_floats, metavar="Q1,..", help="initial qhat on the dual chart")
    common.add_argument("--output", metavar="PATH", help="write the table here instead of stdout")
    common.add_argument("--format", choices=["csv", "json"], help="table format (default csv)")
    common.add_argument("--method", choices=["rk4", "stormer-split"], help="integrator for evolve (default rk4)")
    common.add_argument("--ladder", type=_floats, metavar="R1,..", help="scale values for limit")
    # negative control for the duality report; not part of the public interface
    common.add_argument("--flip-sign", action="store_true", help=argparse.SUPPRESS)
    for name, text in [
        ("verify", "run the invariant suites at the configured n"),
        ("evolve", "integrate a reduced Hamiltonian and write the trajectory"),
        ("duality", "action-angle duality and Darboux checks"),
        ("limit", "convergence of the scaled family to the rational limit"),
    ]:
        sub.add_parser(name, parents=[common], help=text)
    return parser


def config_from_args(args):
    cfg = load_config(args.config) if args.config else RunConfig()
    updates = {}
    for f in fields(RunConfig):
        val = getattr(args, f.name, None)
        if val is not None:
            updates[f.name] = val
    return replace(cfg, **updates).validate()


def tolerances():
    """Defaults, overridden by ``RSVD_TOL_OVERRIDE`` (``name=value,...`` or a bare number for all)."""
    tol = dict(DEFAULT_TOLERANCES)
    spec = os.environ.get(TOL_ENV, "").strip()
    if not spec:
        return tol
    try:
        if "=" not in spec:
            return {k: float(spec) for k in tol}
        for item in spec.split(","):
            name, val = item.split("=")
            name = name.strip()
            if name not in tol:
                raise ConfigError(f"{TOL_ENV}: unknown suite {name!r}")
            tol[name] = float(val)
    except ValueError as exc:
        raise ConfigError(f"{TOL_ENV}: {exc}") from exc
    return tol


# -- table output ------------------------------------------------------------


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    return x


def render_table(columns, rows, fmt, meta=None):
    if fmt == "json":
        doc = {"columns": list(columns), "rows": [[_jsonable(v) for v in row] for row in rows]}
        if meta:
            doc["meta"] = {k: _jsonable(v) for k, v in meta.items()}
        return json.dumps(doc, indent=1) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def emit(cfg, columns, rows, meta=None):
    text = render_table(columns, rows, cfg.format, meta)
    if cfg.output:
        with open(cfg.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        try:
            sys.stdout.write(text)
            sys.stdout.flush()
        except BrokenPipeError:
            # reader went away (e.g. piped into head); silence the interpreter's flush at exit
            os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())


# -- initial points ----------------------------------------------------------


def initial_point(cfg, p, rng):
    if cfg.phat is not None:
        ph = np.array(cfg.phat, dtype=float)
        rep = domain_check("phat", ph, p)
        if not rep:
            raise DomainViolation(f"phat violates {rep.violation}")
        qh = np.array(cfg.qhat, dtype=float) if cfg.qhat is not None else rng.uniform(0, 2 * np.pi, cfg.n)
        return DualPoint(ph, qh)
    if cfg.lam is not None:
        lam = np.array(cfg.lam, dtype=float)
        rep = domain_check("lambda", lam, p)
        if not rep:
            raise DomainViolation(f"lambda violates {rep.violation}")
    else:
        lam = sample_domain("lambda", p, rng)
    theta = np.array(cfg.theta, dtype=float) if cfg.theta is not None else rng.uniform(0, 2 * np.pi, cfg.n)
    return ReducedPoint(lam, theta)


# -- verify --------------------------------------------------------------------


def _suite_decomposition(cfg, p, rng):
    worst = 0.0
    for _ in range(200):
        g = random_sl(cfg.n, rng)
        mp = decompose_kb(g)
        worst = max(worst, np.abs(mp.k @ mp.b - g).max(), np.abs(mp.k.conj().T @ mp.k - np.eye(2 * cfg.n)).max())
    return worst


def _suite_involutivity(cfg, p, rng):
    worst = 0.0
    for _ in range(2):
        g = random_sl(cfg.n, rng)
        for fam in ("F", "Phi"):
            grads = [gradients(master_function(fam, l), g) for l in (1, 2, 3)]
            for i in range(3):
                for j in range(i + 1, 3):
                    worst = max(worst, abs(bracket_from_gradients(grads[i], grads[j])))
    return worst


def _domain_samples(cfg, p, rng, count):
    return [ReducedPoint(sample_domain("lambda", p, rng), rng.uniform(0, 2 * np.pi, cfg.n)) for _ in range(count)]


def verify_suites(cfg, tol):
    p = cfg.params
    rng = make_rng(cfg.seed)
    results = []

    def record(name, err, tol_name=None):
        t = tol[tol_name or name]
        results.append((name, float(err), t, bool(err <= t)))

    record("decomposition", _suite_decomposition(cfg, p, rng))
    record("involutivity", _suite_involutivity(cfg, p, rng))

    samples = _domain_samples(cfg, p, rng, 100)
    oracle = split = resid = fixed = ham = 0.0
    for rp in samples:
        rec = reconstruct(rp, p)
        Lf = rec.frame.Lambda_full
        cf = moduli_closed_form(Lf, p)
        oracle = max(oracle, np.max(np.abs(moduli_oracle(Lf, p) - cf) / np.abs(cf)))
        split = max(split, np.max(np.abs(moduli_split_form(rp.lam, p) - cf) / np.abs(cf)))
        t = rec.triple
        resid = max(resid, relative_main_residual(t, p))
        I = np.diag(np.r_[np.ones(cfg.n), -np.ones(cfg.n)])
        fixed = max(
            fixed,
            np.abs(rec.Q @ rec.w_tilde - rec.w_tilde).max(),
            np.abs(t.L @ I @ t.w - t.w).max(),
            # eigvalsh errors scale with |Omega|, not with each eigenvalue
            np.max(np.abs(np.linalg.eigvalsh(t.Omega) - np.sort(Lf))) / Lf.max(),
        )
        h = ham_phi1_red(rp, p)
        ham = max(ham, abs(h - free_hamiltonian("Phi", 1, t)) / max(1.0, abs(h)))
    record("oracle", oracle)
    record("split_form", split)
    record("reconstruction_residual", resid)
    record("reconstruction_fixed_point", fixed)
    record("hamiltonian", ham)

    dev = 0.0
    for rp in _domain_samples(cfg, p, rng, 2):
        dev = max(dev, darboux_experiment(rp, p, 0.1, 1e-4).max_deviation)
    record("darboux", dev, "darboux" if cfg.n == 1 else "darboux_multi")

    lam_dev = th_dev = 0.0
    for rp in _domain_samples(cfg, p, rng, 2):
        for l in (1, 2):
            rep = duality_experiment(rp, p, l, 1.0)
            lam_dev = max(lam_dev, rep.lambda_deviation)
            th_dev = max(th_dev, rep.theta_deviation)
    record("duality_lambda", lam_dev)
    record("duality_theta", th_dev)
    return results


def cmd_verify(cfg):
    tol = tolerances()
    results = verify_suites(cfg, tol)
    rows = [(name, err, t, "PASS" if ok else "FAIL") for name, err, t, ok in results]
    columns = ["suite", "max_error", "tolerance", "status"]
    if cfg.output:
        emit(cfg, columns, rows)
    for name, err, t, status in rows:
        print(f"{name:28s} {err:12.3e} <= {t:8.1e}  {status}", file=sys.stderr if not cfg.output else sys.stdout)
    failed = [r[0] for r in rows if r[3] == "FAIL"]
    if failed:
        print("FAILED suites: " + ", ".join(failed), file=sys.stderr)
        return 1
    return 0


# -- evolve --------------------------------------------------------------------


def cmd_evolve(cfg):
    p = cfg.params
    rng = make_rng(cfg.seed)
    start = initial_point(cfg, p, rng)
    dual = isinstance(start, DualPoint)
    H = f1_dual_hamiltonian(p) if dual else phi1_hamiltonian(p)
    traj = integrate_canonical(H, start, cfg.t_end, cfg.dt, method=cfg.method)
    kind = "phat" if dual else "lambda"
    names = ("phat", "qhat") if dual else ("lambda", "theta")
    n = cfg.n
    columns = ["t"] + [f"{names[0]}_{j + 1}" for j in range(n)] + [f"{names[1]}_{j + 1}" for j in range(n)]
    columns += ["H"] + (["Phi1", "domain_margin"] if dual else ["F1", "Phi2", "domain_margin"])
    rows = []
    for t, s, h in zip(traj.times, traj.states, traj.monitors["H"]):
        q, a = (s.phat, s.qhat) if dual else (s.lam, s.theta)
        margin = domain_check(kind, q, p).margin
        if dual:
            mon = [actions_phi_dual(1, q), margin]
        else:
            mon = [actions_F_red(1, q), free_hamiltonian("Phi", 2, reconstruct(s, p).triple), margin]
        rows.append([t, *q, *a, h, *mon])
    emit(cfg, columns, rows)
    tol = tolerances()["evolve_energy" if cfg.method == "rk4" else "evolve_energy_stormer"]
    drift = float(np.max(np.abs(traj.monitors["H"] - traj.monitors["H"][0])))
    if drift > tol:
        print(f"energy drift {drift:.3e} exceeds {tol:.1e}", file=sys.stderr)
        return 1
    return 0


# -- duality -------------------------------------------------------------------


def cmd_duality(cfg, sign=1):
    p = cfg.params
    rng = make_rng(cfg.seed)
    rp = initial_point(cfg, p, rng)
    if isinstance(rp, DualPoint):
        raise ConfigError("duality runs on the (lambda, theta) chart; give --lambda/--theta")
    tol = tolerances()
    columns = ["check", "l", "j", "lambda", "slope_expected", "slope_measured", "deviation", "tolerance", "status"]
    rows = []
    ok = True
    for l in (1, 2):
        rep = duality_experiment(rp, p, l, cfg.t_end)
        lam_ok = rep.lambda_deviation <= tol["duality_lambda"]
        th_ok = rep.theta_deviation <= tol["duality_theta"]
        ok &= lam_ok and th_ok
        for j in range(cfg.n):
            measured = rep.measured_slope[j] if rep.measured_slope is not None else float("nan")
            rows.append(["slope", l, j + 1, rp.lam[j], rep.expected_slope[j], measured,
                         rep.theta_deviation, tol["duality_theta"], "PASS" if th_ok else "FAIL"])
        rows.append(["lambda_constant", l, 0, float("nan"), float("nan"), float("nan"),
                     rep.lambda_deviation, tol["duality_lambda"], "PASS" if lam_ok else "FAIL"])
    t_end = min(cfg.t_end, 0.1)
    darb = darboux_experiment(rp, p, t_end, 1e-4, sign=sign)
    dtol = tol["darboux"] if cfg.n == 1 else tol["darboux_multi"]
    d_ok = darb.max_deviation <= dtol
    ok &= d_ok
    rows.append(["darboux", 1, 0, float("nan"), float("nan"), float("nan"),
                 darb.max_deviation, dtol, "PASS" if d_ok else "FAIL"])
    emit(cfg, columns, rows)
    return 0 if ok else 1


# -- limit -----------------------------------------------------------------------


def expected_limit_order(p):
    """First order generically; the O(r) term is proportional to ``v - u`` and vanishes when ``u == v``."""
    return 2 if p.u == p.v else 1


def cmd_limit(cfg):
    p = cfg.params
    rng = make_rng(cfg.seed)
    rp = initial_point(cfg, p, rng)
    if isinstance(rp, DualPoint):
        raise ConfigError("limit runs on the (lambda, theta) chart")
    H0 = ham_rational(rp, p, 0)
    V0 = rational_potential(rp.lam, p)
    ladder = sorted(cfg.ladder, reverse=True)
    errs = [abs(ham_rational(rp, p, r) - H0) for r in ladder]
    if len(ladder) > 1 and all(e > 0 for e in errs):
        slope = float(np.polyfit(np.log(ladder), np.log(errs), 1)[0])
    else:
        slope = float("nan")
    order = expected_limit_order(p)
    band = tolerances()["limit_slope"]
    rows = [[r, ham_rational(rp, p, r), H0, V0, e, slope] for r, e in zip(ladder, errs)]
    rows.append([0.0, H0, H0, V0, 0.0, slope])
    columns = ["r", "H_r", "H0", "V0", "abs_err", "fitted_slope"]
    emit(cfg, columns, rows, meta={"expected_order": order, "band": band})
    if not abs(slope - order) <= band:
        print(f"fitted slope {slope:.4f} outside [{order - band}, {order + band}]", file=sys.stderr)
        return 1
    return 0


LIST_FLAGS = ("--lambda", "--theta", "--phat", "--qhat", "--ladder")


def _attach_negative_lists(argv):
    # argparse reads "-0.4,-1.3" as an option; glue numeric list values onto their flag
    out = []
    it = iter(argv)
    for tok in it:
        if tok in LIST_FLAGS:
            nxt = next(it, None)
            if nxt is not None and nxt.startswith("-") and len(nxt) > 1 and (nxt[1].isdigit() or nxt[1] == "."):
                out.append(f"{tok}={nxt}")
                continue
            out.append(tok)
            if nxt is not None:
                out.append(nxt)
        else:
            out.append(tok)
    return out


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(_attach_negative_lists(sys.argv[1:] if argv is None else list(argv)))
    try:
        cfg = config_from_args(args)
        if args.command == "verify":
            return cmd_verify(cfg)
        if args.command == "evolve":
            return cmd_evolve(cfg)
        if args.command == "duality":
            return cmd_duality(cfg, sign=-1 if args.flip_sign else 1)
        if args.command == "limit":
            return cmd_limit(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DomainExit as exc:
        print(f"domain exit: {exc}", file=sys.stderr)
        return 2
    except RSVDError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
