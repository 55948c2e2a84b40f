"""``diropt`` command line: rates, certificates, example curves and capacity checks.

Exit codes: 0 ok, 2 validation, 3 resource budget or exact mode refused,
4 outside a closed form's validity domain, 1 anything else.
"""
from __future__ import annotations

import argparse
import json
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, io
from .channel import (
    ChannelModel, CostTable, InputPolicy, channel_spectrum_estimate, compose_channel_joint,
    feedback_info_rate,
)
from .directed import DEFAULT_QUANTILE, rate_delayk, spectrum_estimate
from .errors import (
    BudgetExceededError, DomainError, ExactModeUnavailableError, ValidationError,
)
from .gauss import GaussMarkovParams, gauss_curve
from .models import JointMarkovModel, MarkovSourceModel, TestChannelModel, compose_joint
from .optimality import (
    DistortionTable, expected_distortion, synthesize_cost, synthesize_distortion, verify_cost,
    verify_distortion,
)
from .stock import build_chain, max_distortion, stock_rate

EXIT_OK, EXIT_ERROR, EXIT_VALIDATION, EXIT_BUDGET, EXIT_DOMAIN = 0, 1, 2, 3, 4


def fmt(v) -> str:
    """9 significant digits; fixed notation for ``1e-3 <= |v| < 1e6``."""
    v = float(v)
    if v == 0:
        return "0"
    if not np.isfinite(v):
        return str(v)
    if 1e-3 <= abs(v) < 1e6:
        s = f"{v:.{max(0, 8 - int(np.floor(np.log10(abs(v)))))}f}"
        if "." in s:
            s = s.rstrip("0").rstrip(".")
        return s
    mant, exp = f"{v:.8e}".split("e")
    mant = mant.rstrip("0").rstrip(".")
    return f"{mant}e{int(exp)}"


def _rounded(obj):
    """Round every float in a JSON-like tree to its printed 9-digit value."""
    if isinstance(obj, float):
        return float(fmt(obj)) if np.isfinite(obj) else str(obj)
    if isinstance(obj, dict):
        return {k: _rounded(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_rounded(v) for v in obj]
    if isinstance(obj, np.generic):
        return _rounded(obj.item())
    return obj


def to_json(obj) -> str:
    return json.dumps(_rounded(obj), indent=1, sort_keys=True) + "\n"


def to_csv(header, rows) -> str:
    lines = [",".join(header)]
    lines += [",".join(fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def _parse_grid(text: str) -> np.ndarray:
    try:
        lo, hi, steps = text.split(":")
        lo, hi, steps = float(lo), float(hi), int(steps)
    except ValueError:
        raise ValidationError(f"curve must be Dmin:Dmax:steps, got {text!r}") from None
    if steps < 1 or hi < lo:
        raise ValidationError(f"curve {text!r} needs steps >= 1 and Dmin <= Dmax")
    return np.linspace(lo, hi, steps)


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ValidationError(f"expected a comma-separated list of numbers, got {text!r}") from None


# -- commands ------------------------------------------------------------------
# Each returns (output text, {"inputs": [...], "seed": ...}).


def _load_joint(args) -> JointMarkovModel:
    model = io.load_model(args.model)
    if args.test_channel:
        test = io.load_model(args.test_channel)
        if not isinstance(model, MarkovSourceModel) or not isinstance(test, TestChannelModel):
            raise ValidationError("--test-channel needs a source model and a test-channel file")
        return compose_joint(model, test)
    if not isinstance(model, JointMarkovModel):
        raise ValidationError(
            f"{args.model}: expected a joint model (or a source with --test-channel), "
            f"found {type(model).__name__}"
        )
    return model


def _mc_requested(args) -> bool:
    if args.mc is None:
        return False
    if args.seed is None:
        raise ValidationError("Monte-Carlo runs need an explicit --seed")
    return True


def cmd_rate(args):
    joint = _load_joint(args)
    rp = rate_delayk(joint, args.delay)
    result = rp.to_dict()
    result["model_hash"] = io.model_hash(joint)
    if _mc_requested(args):
        n, trials = args.mc
        mc = spectrum_estimate(joint, args.delay, n, trials, args.quantile, args.seed, args.workers)
        result["monte_carlo"] = mc.to_dict()
    return to_json(result), _inputs(args.model, args.test_channel)


def cmd_verify(args):
    table = io.load(args.table)
    if isinstance(table, DistortionTable):
        joint = _load_joint(args)
        cert = verify_distortion(joint, args.delay, table, args.tol)
    elif isinstance(table, CostTable):
        cj = _channel_joint(args.model, args.policy)
        cert = verify_cost(cj, table, args.tol)
    else:
        raise ValidationError(f"{args.table}: expected a distortion or cost table")
    return to_json(cert.to_dict()), _inputs(args.model, args.test_channel, args.policy, args.table)


def cmd_synthesize(args):
    if args.policy:
        cj = _channel_joint(args.model, args.policy)
        table = synthesize_cost(cj, args.scale, args.offset)
    else:
        joint = _load_joint(args)
        table = synthesize_distortion(joint, args.delay, args.scale, lambda key: args.offset)
    text = json.dumps(io.to_document(table), indent=1) + "\n"
    return text, _inputs(args.model, args.test_channel, args.policy)


def cmd_stock(args):
    chain = build_chain(_floats(args.p), _floats(args.q))
    grid = np.array([args.D]) if args.D is not None else _parse_grid(args.curve)
    d_max = max_distortion(chain)
    bad = grid[(grid < 0) | (grid > d_max)]
    if bad.size:
        raise DomainError(
            f"D = {fmt(bad[0])} lies outside the validity range [0, {fmt(d_max)}] "
            f"(epsilon bound {fmt(chain.epsilon_bound())})"
        )
    rows = [(D, stock_rate(chain, float(D))) for D in grid]
    return to_csv(("D", "R_bits"), rows), _inputs()


def cmd_gauss(args):
    if args.D is not None and args.D <= 0:
        raise DomainError(f"distortion must be positive, got {args.D}")
    grid = np.array([args.D]) if args.D is not None else _parse_grid(args.curve)
    if np.any(grid <= 0):
        raise DomainError("every distortion on the curve must be positive")
    params = GaussMarkovParams(args.var, args.rho, args.a, args.b, float(grid[0]))
    rows = gauss_curve(params, grid, oracle=args.oracle)
    header = ("D", "R_bits", "R_oracle_bits") if args.oracle else ("D", "R_bits")
    return to_csv(header, rows), _inputs()


def _channel_joint(channel_path, policy_path):
    if not policy_path:
        raise ValidationError("a channel model needs an input policy file (--policy)")
    channel, policy = io.load_model(channel_path), io.load_model(policy_path)
    if not isinstance(channel, ChannelModel) or not isinstance(policy, InputPolicy):
        raise ValidationError("expected a channel file and an input-policy file")
    return compose_channel_joint(channel, policy)


def cmd_capacity(args):
    cj = _channel_joint(args.channel, args.policy)
    result = {}
    if cj.exact:
        result = feedback_info_rate(cj).to_dict()
    elif args.mc is None:
        raise ExactModeUnavailableError(
            "the output process is not finite-order Markov; rerun with --mc N TRIALS --seed S"
        )
    if _mc_requested(args):
        n, trials = args.mc
        mc = channel_spectrum_estimate(cj, n, trials, 1.0 - args.quantile, args.seed, args.workers)
        result["monte_carlo"] = mc.to_dict()
    result["label"] = "rate achieved by this policy"
    if args.cost:
        cost = io.load(args.cost)
        if not isinstance(cost, CostTable):
            raise ValidationError(f"{args.cost}: expected a cost table")
        cert = verify_cost(cj, cost, args.tol)
        result["certificate"] = cert.to_dict()
        if cert.optimal:
            result["label"] = "capacity at cost constraint"
    return to_json(result), _inputs(args.channel, args.policy, args.cost)


def cmd_fixtures(args):
    from .catalog import write_fixtures

    paths = write_fixtures(args.directory)
    return "".join(f"{p.name},{io.file_hash(p)}\n" for p in paths), _inputs()


def cmd_check_manifest(args):
    report = check_manifest(args.manifest)
    if not report["ok"]:
        raise ValidationError("manifest does not match: " + "; ".join(report["problems"]))
    return to_json(report), _inputs()


# -- manifests -----------------------------------------------------------------


def _inputs(*paths) -> list[str]:
    return [p for p in paths if p]


def build_manifest(argv, inputs, seed, output_text, wall_time) -> dict:
    import hashlib

    return {
        "command": list(argv),
        "inputs": {str(p): io.file_hash(p) for p in inputs},
        "seed": seed,
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "wall_time_s": round(wall_time, 6),
        "output_sha256": hashlib.sha256(output_text.encode()).hexdigest(),
    }


def check_manifest(path) -> dict:
    """Compare a sidecar manifest with the output and inputs currently on disk."""
    import hashlib

    path = Path(path)
    manifest = json.loads(path.read_text())
    problems = []
    out = Path(str(path).removesuffix(".manifest.json"))
    if not out.is_file():
        problems.append(f"output {out} is missing")
    elif hashlib.sha256(out.read_bytes()).hexdigest() != manifest["output_sha256"]:
        problems.append(f"output {out} changed")
    for name, digest in manifest["inputs"].items():
        if not Path(name).is_file() or io.file_hash(name) != digest:
            problems.append(f"input {name} changed or missing")
    return {"manifest": str(path), "ok": not problems, "problems": problems}


# -- argument parsing ----------------------------------------------------------


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _add_common(p, mc=False):
    p.add_argument("-o", "--out", help="write output here (manifest goes to OUT.manifest.json)")
    if mc:
        p.add_argument("--mc", nargs=2, type=_positive_int, metavar=("N", "TRIALS"),
                       help="add a Monte-Carlo spectrum estimate with block length N")
        p.add_argument("--quantile", type=float, default=DEFAULT_QUANTILE,
                       help="spectrum quantile (default %(default)s)")
        p.add_argument("--seed", type=int, help="required with --mc")
        p.add_argument("--workers", type=_positive_int,
                       help="parallel Monte-Carlo workers (env DIROPT_WORKERS)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="diropt", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"diropt {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rate", help="k-delay directed-information rate of a joint model")
    p.add_argument("model")
    p.add_argument("--test-channel", help="compose MODEL (a source) with this test channel")
    p.add_argument("-k", "--delay", type=_positive_int, default=1)
    _add_common(p, mc=True)
    p.set_defaults(func=cmd_rate)

    p = sub.add_parser("verify", help="certify a distortion or cost table")
    p.add_argument("model", help="joint / source model, or a channel model for cost tables")
    p.add_argument("table")
    p.add_argument("--test-channel")
    p.add_argument("--policy", help="input policy (cost tables)")
    p.add_argument("-k", "--delay", type=_positive_int, default=1)
    p.add_argument("--tol", type=float, default=1e-9)
    _add_common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("synthesize", help="distortion (or cost) table under which the model is optimal")
    p.add_argument("model")
    p.add_argument("--test-channel")
    p.add_argument("--policy", help="input policy; synthesizes a cost table for a channel")
    p.add_argument("-k", "--delay", type=_positive_int, default=1)
    p.add_argument("--scale", type=float, default=1.0, help="c (distortion) or lambda (cost)")
    p.add_argument("--offset", type=float, default=0.0, help="constant d0")
    _add_common(p)
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("stock", help="stock-prediction rate-distortion curve")
    p.add_argument("--p", required=True, help="up-probabilities, comma separated")
    p.add_argument("--q", required=True, help="down-probabilities, comma separated")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--D", type=float)
    g.add_argument("--curve", metavar="DMIN:DMAX:STEPS")
    _add_common(p)
    p.set_defaults(func=cmd_stock)

    p = sub.add_parser("gauss", help="Gauss-Markov feed-forward rate-distortion curve")
    p.add_argument("--var", type=float, default=1.0)
    p.add_argument("--rho", type=float, default=0.0)
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--b", type=float, default=0.0)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--D", type=float)
    g.add_argument("--curve", metavar="DMIN:DMAX:STEPS")
    p.add_argument("--oracle", action="store_true", help="add a Blahut-Arimoto column")
    _add_common(p)
    p.set_defaults(func=cmd_gauss)

    p = sub.add_parser("capacity", help="directed-information rate of a channel under a feedback policy")
    p.add_argument("channel")
    p.add_argument("policy")
    p.add_argument("--cost", help="cost table to certify")
    p.add_argument("--tol", type=float, default=1e-9)
    _add_common(p, mc=True)
    p.set_defaults(func=cmd_capacity)

    p = sub.add_parser("fixtures", help="write the example model files")
    p.add_argument("directory")
    _add_common(p)
    p.set_defaults(func=cmd_fixtures)

    p = sub.add_parser("check-manifest", help="validate a manifest against its output and inputs")
    p.add_argument("manifest")
    _add_common(p)
    p.set_defaults(func=cmd_check_manifest)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    start = time.perf_counter()
    try:
        text, inputs = args.func(args)
    except (BudgetExceededError, ExactModeUnavailableError) as exc:
        return _fail(EXIT_BUDGET, exc)
    except DomainError as exc:
        return _fail(EXIT_DOMAIN, exc)
    except ValidationError as exc:
        return _fail(EXIT_VALIDATION, exc)
    except Exception as exc:  # noqa: BLE001 - reported, mapped to exit 1
        return _fail(EXIT_ERROR, exc)
    manifest = build_manifest(["diropt", *argv], inputs, getattr(args, "seed", None), text,
                              time.perf_counter() - start)
    if args.out:
        Path(args.out).write_text(text)
        Path(f"{args.out}.manifest.json").write_text(json.dumps(manifest, indent=1) + "\n")
    else:
        sys.stdout.write(text)
        sys.stderr.write("manifest: " + json.dumps(manifest, sort_keys=True) + "\n")
    return EXIT_OK


def _fail(code, exc) -> int:
    sys.stderr.write(f"diropt: error: {exc}\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
