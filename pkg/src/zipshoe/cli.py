"""``zipshoe`` command line: build, verify, refine and export.

Exit status is 0 when every check passes, 1 when a verification fails and
2 for configuration or usage errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import conjugacy, horseshoe_model as hm, stability, symbolic_core as sc
from .errors import ConfigError, PerturbationTooLargeError, ZipshoeError
from .reports import Report, dumps_stable

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
COMMANDS = ("build", "verify", "refine", "orbits", "entropy", "conjugacy", "perturb", "demo")


@dataclass
class RunConfig:
    command: str
    params: hm.HorseshoeParams
    depth: int = 3
    seed: int = 0
    out: str | None = None
    format: str = "json"
    options: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.depth < 0:
            raise ConfigError("depth must be nonnegative")
        if self.format not in ("json", "csv"):
            raise ConfigError(f"unknown format {self.format!r}")


# ------------------------------------------------------------------ export

def export(obj, fmt: str = "json", path: str | None = None) -> str:
    """Serialize ``obj`` deterministically; write it to ``path`` when given."""
    if fmt == "json":
        text = dumps_stable(obj)
    elif fmt == "csv":
        if isinstance(obj, hm.RefinementTree):
            text = obj.to_csv()
        elif isinstance(obj, list):
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            for row in obj:
                w.writerow([format(v, ".17g") if isinstance(v, float) else v for v in row])
            text = buf.getvalue()
        else:
            raise ConfigError(f"{type(obj).__name__} has no CSV form")
    else:
        raise ConfigError(f"unknown format {fmt!r}")
    if path is not None:
        try:
            Path(path).write_text(text)
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return text


def _emit(cfg: RunConfig, obj, fmt: str | None = None) -> None:
    text = export(obj, fmt or cfg.format, cfg.out)
    if cfg.out is None:
        sys.stdout.write(text)


# ---------------------------------------------------------------- commands

def _model(cfg: RunConfig, check: bool = True) -> hm.HorseshoeModel:
    return hm.build_horseshoe(cfg.params, check=check)


def _cmd_build(cfg: RunConfig) -> int:
    _emit(cfg, _model(cfg).to_dict(), "json")
    return EXIT_OK


def _cmd_verify(cfg: RunConfig) -> int:
    model = _model(cfg, check=False)
    rep = Report("verify")
    for problem in cfg.params.violations():
        rep.add("parameters", False, witness=problem)
    rep.extend(hm.verify_assumption1(model))
    mu = cfg.options.get("mu") or 1.0 / cfg.params.alpha
    rep.extend(hm.verify_cones(model, mu, tuple(cfg.options.get("aperture") or hm.DEFAULT_APERTURE)))
    _emit(cfg, rep.to_dict(), "json")
    if not rep.passed:
        sys.stderr.write(rep.summary() + "\n")
    return EXIT_OK if rep.passed else EXIT_FAIL


def _cmd_refine(cfg: RunConfig) -> int:
    tree = hm.refine(_model(cfg), cfg.depth)
    _emit(cfg, tree if cfg.format == "csv" else tree.to_dict())
    return EXIT_OK


def _cmd_orbits(cfg: RunConfig) -> int:
    n = cfg.options.get("period") or 1
    model = _model(cfg)
    sys_ = model.zip_system
    points = sc.enumerate_periodic(sys_, n)
    words = np.array([[model.index(s) for s in p.right_tail * n][:n] for p in points], dtype=np.int64)
    x, y, follows, res = conjugacy.periodic_orbits(model, words)
    rows = []
    for p, w, xi, yi, ok, r in zip(points, words, x, y, follows, res):
        word = " ".join(model.labels[i] for i in w)
        rows.append({"word": word, "sequence": str(p), "point": [float(xi), float(yi)],
                     "residual": float(r), "follows_word": bool(ok)})
    good = bool(np.all(follows) and np.all(res <= conjugacy.RESIDUAL_TOL))
    if cfg.format == "csv":
        table = [("word", "x", "y", "residual")] + [(r["word"], *r["point"], r["residual"]) for r in rows]
        _emit(cfg, table)
    else:
        _emit(cfg, {"period": n, "count": len(rows), "expected": (2 * cfg.params.N) ** n,
                    "orbits": rows})
    return EXIT_OK if good and len(rows) == (2 * cfg.params.N) ** n else EXIT_FAIL


def _cmd_entropy(cfg: RunConfig) -> int:
    h = conjugacy.entropy_estimate(_model(cfg), max(cfg.depth, 1))
    text = f"{h:.7f}\n"
    if cfg.out:
        export({"depth": max(cfg.depth, 1), "entropy": h, "log_2N": math.log(2 * cfg.params.N)},
               "json", cfg.out)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_conjugacy(cfg: RunConfig) -> int:
    model = _model(cfg)
    if cfg.options.get("mutant"):
        model = hm.swap_labels(model, "2", "2p") if cfg.params.N >= 2 else hm.swap_labels(model, "1", "1p")
    rep = conjugacy.conjugacy_check(model, cfg.depth, cfg.options.get("samples") or 1000, cfg.seed)
    _emit(cfg, rep.info, "json")
    return EXIT_OK if rep.passed else EXIT_FAIL


def _cmd_perturb(cfg: RunConfig) -> int:
    model = _model(cfg)
    eta = cfg.options.get("eta", 1e-3)
    shape = stability.Shape("sin2pi", cfg.options.get("c1", 1.0), cfg.options.get("c2", 1.0))
    try:
        pm = stability.perturb(model, eta, shape)
    except PerturbationTooLargeError as exc:
        _emit(cfg, {"eta": eta, "passed": False, "error": str(exc)}, "json")
        return EXIT_FAIL
    ver = stability.verify_perturbed(pm, cfg.options.get("mu") or stability.PERTURBED_MU)
    match = stability.match_conjugacy(model, pm, cfg.depth)
    _emit(cfg, {"eta": eta, "shape": shape.to_dict(), "displacement": stability.strip_displacement(model, pm),
                "verification": ver.to_dict(), "match": match.to_dict(),
                "passed": ver.passed and match.passed}, "json")
    return EXIT_OK if ver.passed and match.passed else EXIT_FAIL


def doubling_codes(depth: int, samples: int, seed: int) -> list[dict]:
    """Itineraries of ``x -> 2x mod 1`` for seeded rational points.

    Each point is coded as ``(overline{a} . s_0 s_1 ...)`` with
    ``s_i = floor(2 f^i(x))``; the record also confirms that coding
    ``f(x)`` gives the zip shift of the code of ``x``.
    """
    zs = sc.ZipSystem.doubling()
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(samples):
        q = int(rng.integers(3, 1000)) | 1
        x = Fraction(int(rng.integers(0, q)), q)

        def code(v: Fraction, n: int) -> tuple[str, ...]:
            sym = []
            for _ in range(n):
                v *= 2
                sym.append("1" if v >= 1 else "0")
                v -= int(v)
            return tuple(sym)

        cx = code(x, depth + 1)
        fx = (2 * x) % 1
        seq = sc.ZipSequence(("a",), (), cx, ("0",))
        shifted = sc.shift(zs, seq).window(-1, depth + 1)
        agrees = shifted == ("a",) + code(fx, depth)
        out.append({"x": f"{x.numerator}/{x.denominator}", "code": " ".join(cx), "shift_ok": agrees})
    return out


def _cmd_demo(cfg: RunConfig) -> int:
    name = cfg.options.get("name") or "doubling"
    if name != "doubling":
        raise ConfigError(f"unknown demo {name!r}")
    rows = doubling_codes(max(cfg.depth, 1), cfg.options.get("samples") or 8, cfg.seed)
    _emit(cfg, {"demo": "doubling", "system": sc.ZipSystem.doubling().to_dict(), "points": rows}, "json")
    return EXIT_OK if all(r["shift_ok"] for r in rows) else EXIT_FAIL


_DISPATCH = {
    "build": _cmd_build, "verify": _cmd_verify, "refine": _cmd_refine, "orbits": _cmd_orbits,
    "entropy": _cmd_entropy, "conjugacy": _cmd_conjugacy, "perturb": _cmd_perturb, "demo": _cmd_demo,
}


def run(cfg: RunConfig) -> int:
    """Dispatch one command; errors become exit codes with a message on stderr."""
    try:
        return _DISPATCH[cfg.command](cfg)
    except ConfigError as exc:
        sys.stderr.write(f"zipshoe: configuration error: {exc}\n")
        return EXIT_CONFIG
    except OSError as exc:
        sys.stderr.write(f"zipshoe: {exc}\n")
        return EXIT_CONFIG
    except ZipshoeError as exc:
        sys.stderr.write(f"zipshoe: {type(exc).__name__}: {exc}\n")
        return EXIT_FAIL


# ------------------------------------------------------------------ parsing

def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("model")
    g.add_argument("--N", type=int, default=None, help="fold count (default 2)")
    g.add_argument("--eps", type=float, default=None, help="stretch excess over 2N (default 0.1)")
    g.add_argument("--y_a", "--y-a", dest="y_a", type=float, default=None)
    g.add_argument("--y_b", "--y-b", dest="y_b", type=float, default=None)
    g.add_argument("--config", help="model config JSON file")
    o = common.add_argument_group("output")
    o.add_argument("--out", help="write to this file instead of stdout")
    o.add_argument("--format", choices=("json", "csv"), default="json")
    o.add_argument("--seed", type=int, default=0)

    p = argparse.ArgumentParser(prog="zipshoe", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("build", parents=[common], help="dump the model")
    v = sub.add_parser("verify", parents=[common], help="strip-mapping and cone checks")
    v.add_argument("--mu", type=float, default=None, help="growth constant (default 1/alpha)")
    v.add_argument("--aperture", type=float, nargs=2, default=None, metavar=("MU_H", "MU_V"))
    r = sub.add_parser("refine", parents=[common], help="export the refinement tree")
    r.add_argument("--depth", type=int, default=3)
    o = sub.add_parser("orbits", parents=[common], help="symbolic and geometric periodic points")
    o.add_argument("--period", type=int, default=1)
    e = sub.add_parser("entropy", parents=[common], help="entropy from word counts")
    e.add_argument("--depth", type=int, default=5)
    c = sub.add_parser("conjugacy", parents=[common], help="commuting-diagram check")
    c.add_argument("--depth", type=int, default=8)
    c.add_argument("--samples", type=int, default=1000)
    c.add_argument("--mutant", action="store_true", help="swap labels 2 and 2p first")
    q = sub.add_parser("perturb", parents=[common], help="perturbation experiment")
    q.add_argument("--eta", type=float, default=1e-3)
    q.add_argument("--depth", type=int, default=6)
    q.add_argument("--mu", type=float, default=None)
    q.add_argument("--c1", type=float, default=1.0)
    q.add_argument("--c2", type=float, default=1.0)
    d = sub.add_parser("demo", parents=[common], help="worked examples")
    d.add_argument("name", choices=("doubling",))
    d.add_argument("--depth", type=int, default=8)
    d.add_argument("--samples", type=int, default=8)
    return p


def _params(ns: argparse.Namespace) -> hm.HorseshoeParams:
    data: dict = {}
    if ns.config:
        try:
            data = json.loads(Path(ns.config).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read {ns.config}: {exc.strerror or exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{ns.config} is not valid JSON: {exc}") from exc
    for key in ("N", "eps", "y_a", "y_b"):
        if getattr(ns, key) is not None:
            data[key] = getattr(ns, key)
    data.setdefault("N", 2)
    params = hm.HorseshoeParams.from_dict(data)
    if params.N < 1 or not params.eps > 0:
        raise ConfigError("N must be >= 1 and eps positive")
    return params


def config_from_args(argv: list[str] | None = None) -> RunConfig:
    ns = _parser().parse_args(argv)
    options = {k: getattr(ns, k) for k in ("mu", "aperture", "period", "samples", "mutant",
                                            "eta", "c1", "c2", "name") if hasattr(ns, k)}
    return RunConfig(ns.command, _params(ns), getattr(ns, "depth", 3), ns.seed, ns.out,
                     ns.format, options)


def main(argv: list[str] | None = None) -> int:
    try:
        cfg = config_from_args(argv)
    except ConfigError as exc:
        sys.stderr.write(f"zipshoe: configuration error: {exc}\n")
        return EXIT_CONFIG
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
