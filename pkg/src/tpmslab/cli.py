"""Command-line front end: ``tpmslab <command> ...``.

Exit codes: 0 success, 2 usage or domain error, 3 numerical failure (a JSON
diagnostic is printed on stderr).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import re
import sys
import tempfile
import time

from . import __version__
from .errors import DomainError, InvalidBracket, TPMSError, UnsupportedFamily
from .families import FAMILY_NAMES, GYROID_A, FamilyId, SurfaceSpec, family_domain
from .parallel import default_workers
from .svg import line_plot

log = logging.getLogger("tpmslab")

RATIO_FAMILIES = ("rPD", "H", "tP")
DEFAULT_LEVEL = {"H": 5, "rPD": 5, "tP": 6, "tD": 6, "tCLP": 5}

# keys accepted in a --config file (flags override them)
CONFIG_KEYS = {"level": int, "steps": int, "workers": int, "out": str, "theta": float,
               "tol": float, "stages": int, "extrapolate": int}


class UsageError(Exception):
    pass


def _sig(x):
    return float(f"{x:.12g}")


def parse_range(text: str) -> tuple[float, float]:
    m = re.fullmatch(r"\s*([-+]?[0-9.eE+-]+?)\s*\.\.\s*([-+]?[0-9.eE+-]+)\s*", text)
    if not m:
        raise UsageError(f"range must look like lo..hi, got {text!r}")
    lo, hi = float(m.group(1)), float(m.group(2))
    if not lo < hi:
        raise UsageError(f"empty range {text!r}")
    return lo, hi


def _protect_negative_ranges(argv):
    # argparse would read "-1.9..1.9" as an option; a leading space keeps it positional
    return [" " + a if re.match(r"^-[0-9.]+\.\.", a) else a for a in argv]


def _atomic_write(path: str, text: str) -> str:
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _read_config(path: str) -> dict:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in CONFIG_KEYS:
                raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                out[key] = CONFIG_KEYS[key](value)
            except ValueError:
                raise UsageError(f"{path}:{lineno}: bad value for {key}") from None
    return out


def _spec(name: str, a, theta=None) -> SurfaceSpec:
    if name not in FAMILY_NAMES:
        raise UsageError(f"unknown family {name!r}; choose from {', '.join(FAMILY_NAMES)}")
    return SurfaceSpec.from_name(name, a, theta)


def _family_range(name: str, text: str) -> tuple[FamilyId, float, float]:
    if name not in FAMILY_NAMES or name == "gyroid":
        raise UsageError(f"unknown family {name!r}")
    fam = FamilyId(name)
    lo, hi = parse_range(text)
    dlo, dhi = family_domain(fam)
    if not (dlo < lo and hi < dhi):
        raise DomainError(f"range {lo}..{hi} leaves the parameter domain ({dlo}, {dhi}) of {name}")
    return fam, lo, hi


def _level(args, family: str) -> int:
    return args.level if args.level is not None else DEFAULT_LEVEL.get(family, 5)


# commands ---------------------------------------------------------------------------------


def cmd_scan_lattice(args) -> dict:
    from .lattice import _local_extrema, ratio_curve

    if args.family not in RATIO_FAMILIES:
        raise UsageError(f"scan-lattice supports {', '.join(RATIO_FAMILIES)}")
    fam, lo, hi = _family_range(args.family, args.range)
    if args.steps < 2:
        raise UsageError("steps must be at least 2")
    curve = ratio_curve(fam, lo, hi, args.steps, workers=args.workers)
    grid = [a for a, _ in curve.samples]
    vals = [r for _, r in curve.samples]
    extrema = _local_extrema(grid, vals, fam, 1e-6) if len(grid) >= 3 else []
    _atomic_write(os.path.join(args.out, "ratio.csv"), curve.to_csv())
    names = {"rPD": "A/C", "H": "B/D", "tP": "E/F"}
    svg = line_plot([(grid, vals, names[fam.value])],
                    [(x, y, f"{kind} a={x:.6g}") for x, y, kind in extrema],
                    title=f"{fam.value}: lattice ratio {names[fam.value]}", ylabel=names[fam.value])
    _atomic_write(os.path.join(args.out, "ratio.svg"), svg)
    return {"family": fam.value, "steps": args.steps,
            "extrema": [{"a": _sig(x), "ratio": _sig(y), "kind": k} for x, y, k in extrema]}


def cmd_spectrum(args) -> dict:
    from .spectrum import morse_index_nullity

    spec = _spec(args.family, args.a, args.theta)
    report = morse_index_nullity(spec, _level(args, spec.family.value), stages=args.stages)
    data = report.to_dict()
    if args.family == "gyroid":
        data["family"] = "gyroid"
    _atomic_write(os.path.join(args.out, "spectrum.json"), _dump(data))
    return data


def find_instants(family: FamilyId, lo: float, hi: float, steps: int, level: int,
                  stages=None, workers=1, extrapolate_from=None) -> tuple[list, list]:
    """Spectral instants (classified where a lattice ratio exists) and ratio extrema."""
    from .lattice import classify_instant, scan_ratio_extrema
    from .spectrum import scan_index_jumps

    spectral = scan_index_jumps(family, lo, hi, steps, level, stages=stages, workers=workers,
                                extrapolate_from=extrapolate_from)
    ratio_fam = FamilyId.tP if family is FamilyId.tD else family
    extrema = []
    if ratio_fam.value in RATIO_FAMILIES:
        extrema = scan_ratio_extrema(ratio_fam, lo, hi, coarse_steps=max(64, steps), workers=workers)
        for inst in spectral:
            inst.classification = classify_instant(ratio_fam, inst.a_star)
            if family is FamilyId.tD:
                inst.extras["classified_with"] = "tP"
    return spectral, extrema


def cmd_find_instants(args) -> dict:
    fam, lo, hi = _family_range(args.family, args.range)
    level = _level(args, fam.value)
    ex = getattr(args, "extrapolate", None)
    if ex is not None and not 4 <= ex < level:
        raise UsageError("--extrapolate must name a level >= 4 below --level")
    spectral, extrema = find_instants(fam, lo, hi, args.steps, level, args.stages, args.workers, ex)
    data = {
        "family": fam.value, "range": [_sig(lo), _sig(hi)], "level": level, "steps": args.steps,
        "instants": [i.to_dict() for i in spectral],
        "ratio_extrema": [i.to_dict() for i in extrema],
    }
    _atomic_write(os.path.join(args.out, "instants.json"), _dump(data))
    # index as a step function of a, sampled on the scan grid plus the instants
    from .spectrum import morse_index_nullity

    pts = sorted({lo, hi} | {i.bracket[0] for i in spectral} | {i.bracket[1] for i in spectral})
    idx = [morse_index_nullity(SurfaceSpec(fam, a), level, args.stages, eigenvalues=False).morse_index
           for a in pts]
    svg = line_plot([(pts, idx, "Morse index")],
                    [(i.a_star, (i.index_before + i.index_after) / 2,
                      f"{'odd' if i.index_jump % 2 else 'even'} a={i.a_star:.5g}") for i in spectral],
                    title=f"{fam.value}: Morse index", ylabel="index", step=True)
    _atomic_write(os.path.join(args.out, "index.svg"), svg)
    return data


def _parse_region(text):
    if text is None:
        return None
    kind, _, rest = text.partition(":")
    try:
        nums = [float(x) for x in rest.split(",")]
    except ValueError:
        raise UsageError(f"bad region {text!r}") from None
    if kind == "disk" and len(nums) == 3:
        return ("disk", complex(nums[0], nums[1]), nums[2])
    if kind == "rect" and len(nums) == 4:
        return ("rect", *nums)
    raise UsageError("region must be disk:cx,cy,r or rect:x0,x1,y0,y1")


def cmd_mesh(args) -> dict:
    from .geometry import gyroid_angle, mean_curvature_residual, surface_patch

    theta = args.theta
    if args.family == "gyroid":
        if theta is None:
            theta, res = gyroid_angle()
            log.info("gyroid associate angle theta = %.6f (residual %.2e)", theta, res)
        spec = SurfaceSpec.gyroid(theta)
    else:
        if args.a is None:
            raise UsageError(f"{args.family} needs a parameter value")
        spec = _spec(args.family, args.a, theta)
    level = args.level if args.level is not None else 4
    mesh = surface_patch(spec, _parse_region(args.region), level)
    path = _atomic_write(os.path.join(args.out, "patch.obj"), mesh.to_obj())
    return {"family": args.family, "a": _sig(spec.a), "theta": _sig(spec.theta), "level": level,
            "vertices": len(mesh.vertices), "faces": len(mesh.faces),
            "mean_curvature_residual": _sig(mean_curvature_residual(mesh)), "obj": path}


def cmd_gyroid_angle(args) -> dict:
    from .geometry import gyroid_angle

    bracket = parse_range(args.bracket)
    theta, res = gyroid_angle(bracket, tol=args.tol if args.tol is not None else 1e-6)
    data = {"theta": _sig(theta), "degrees": _sig(math.degrees(theta)), "residual": float(f"{res:.3g}"),
            "bracket": [_sig(x) for x in bracket]}
    _atomic_write(os.path.join(args.out, "gyroid.json"), _dump(data))
    return data


def build_report(level: int = 4, scans: bool = False, workers: int = 1) -> dict:
    """Every headline number in one dictionary."""
    from .geometry import gyroid_angle, period_lattice
    from .lattice import lattice_basis_closed_form, lattices_equivalent, scan_ratio_extrema
    from .spectrum import morse_index_nullity

    out = {"ratio_minima": {}, "morse_table": [], "period_check": [], "gyroid": {}}
    for fam, lo, hi in (("rPD", 0.2, 3.0), ("H", 0.2, 0.95), ("tP", 10.0, 60.0)):
        ext = scan_ratio_extrema(fam, lo, hi, 64, workers=workers)
        out["ratio_minima"][fam] = [_sig(e.a_star) for e in ext if e.extremum_kind == "minimum"]
    for name, a in (("tCLP", 0.0), ("tP", 14.0), ("tD", 14.0), ("H", 0.1), ("H", 0.5), ("H", 0.9),
                    ("rPD", 0.1), ("rPD", 0.5)):
        r = morse_index_nullity(SurfaceSpec.from_name(name, a), level, eigenvalues=False)
        out["morse_table"].append({"family": name, "a": a, "level": level,
                                   "index": r.morse_index, "nullity": r.nullity})
    for name, a in (("rPD", 1.0), ("H", 0.5), ("tP", 14.0)):
        spec = SurfaceSpec.from_name(name, a)
        ok, err = lattices_equivalent(period_lattice(spec)[1].generators,
                                      lattice_basis_closed_form(spec).generators)
        out["period_check"].append({"family": name, "a": a, "equivalent": ok, "gram_error": float(f"{err:.3g}")})
    theta, res = gyroid_angle()
    out["gyroid"] = {"theta": _sig(theta), "residual": float(f"{res:.3g}")}
    if scans:
        out["instants"] = {}
        for fam, lo, hi, ex in (("H", 0.2, 0.95, None), ("rPD", 0.2, 3.0, None), ("tP", 2.5, 60.0, 5)):
            f = FamilyId(fam)
            spectral, _ = find_instants(f, lo, hi, 16, DEFAULT_LEVEL[fam], workers=workers, extrapolate_from=ex)
            out["instants"][fam] = [i.to_dict() for i in spectral]
    return out


def cmd_report(args) -> dict:
    data = build_report(args.level if args.level is not None else 4, args.scans, args.workers)
    _atomic_write(os.path.join(args.out, "report.json"), _dump(data))
    return data


# parser --------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=None, help="output directory (default: current)")
    common.add_argument("--workers", type=int, default=None,
                        help="worker processes (default: TPMSLAB_WORKERS or core count)")
    common.add_argument("--config", default=None, help="key=value file; flags take precedence")
    common.add_argument("--level", type=int, default=None, help="mesh level")
    common.add_argument("--stages", type=int, default=None, help="grading stages (default level + 2)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="tpmslab", description="Genus-3 TPMS families: lattices, spectra, meshes.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("scan-lattice", parents=[common], help="ratio curve with extrema (CSV + SVG)")
    s.add_argument("family")
    s.add_argument("range", help="lo..hi")
    s.add_argument("steps", type=int)
    s.set_defaults(func=cmd_scan_lattice)

    s = sub.add_parser("spectrum", parents=[common], help="Morse index and nullity (JSON)")
    s.add_argument("family")
    s.add_argument("a", type=float, nargs="?", default=None)
    s.add_argument("--theta", type=float, default=None)
    s.set_defaults(func=cmd_spectrum)

    s = sub.add_parser("find-instants", parents=[common], help="degeneracy instants (JSON + SVG)")
    s.add_argument("family")
    s.add_argument("range", help="lo..hi")
    s.add_argument("--steps", type=int, default=None)
    s.add_argument("--extrapolate", type=int, default=None, metavar="LEVEL",
                   help="repeat the scan at this coarser level and extrapolate in 1/dimension")
    s.set_defaults(func=cmd_find_instants)

    s = sub.add_parser("mesh", parents=[common], help="surface patch (OBJ)")
    s.add_argument("family")
    s.add_argument("a", type=float, nargs="?", default=None)
    s.add_argument("--theta", type=float, default=None)
    s.add_argument("--region", default=None, help="disk:cx,cy,r or rect:x0,x1,y0,y1")
    s.set_defaults(func=cmd_mesh)

    s = sub.add_parser("gyroid-angle", parents=[common], help="associate angle of the gyroid (JSON)")
    s.add_argument("--bracket", default="0.1..1.4707963267948966")
    s.add_argument("--tol", type=float, default=None)
    s.set_defaults(func=cmd_gyroid_angle)

    s = sub.add_parser("report", parents=[common], help="all headline numbers (JSON)")
    s.add_argument("--scans", action="store_true", help="include the spectral family scans (slow)")
    s.set_defaults(func=cmd_report)
    return p


def _apply_config(args):
    cfg = _read_config(args.config) if args.config else {}
    for key, value in cfg.items():
        if getattr(args, key, None) is None and hasattr(args, key):
            setattr(args, key, value)
    if args.out is None:
        args.out = "."
    if args.workers is None:
        args.workers = default_workers()
    if getattr(args, "steps", 0) is None:
        args.steps = 16
    if args.workers < 1:
        raise UsageError("--workers must be positive")
    if args.level is not None and args.level < 2:
        raise UsageError("--level must be at least 2")


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(_protect_negative_ranges(argv))
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose or args.command == "mesh" else logging.WARNING,
                        format="%(message)s", stream=sys.stderr)
    try:
        _apply_config(args)
        t0 = time.perf_counter()
        result = args.func(args)
        log.debug("%s finished in %.1f s", args.command, time.perf_counter() - t0)
    except (UsageError, DomainError, UnsupportedFamily, InvalidBracket) as e:
        print(f"tpmslab: error: {e}", file=sys.stderr)
        return 2
    except TPMSError as e:
        diag = {"error": type(e).__name__, "message": str(e)}
        for attr in ("value", "error_estimate"):
            v = getattr(e, attr, None)
            if v is not None:
                diag[attr] = repr(v)
        print(json.dumps(diag, sort_keys=True), file=sys.stderr)
        return 3
    sys.stdout.write(_dump(result))
    return 0


if __name__ == "__main__":
    sys.exit(main())
