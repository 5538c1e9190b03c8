"""Command-line front end.

Subcommands:

  solve           run the full pipeline (anchor, truncate, discretize, dp,
                  lift) and report prices plus verified revenue
  brute           exhaustive search over an explicit price grid
  eval            evaluate a given price vector (exact or Monte Carlo)
  discretize      emit the restricted instance produced by the grid stage
  verify-anchors  compute the anchor for a tagged instance and check its
                  guarantees
  compare         run dp, brute and (when applicable) the iid single-price
                  route on one instance and print a CSV gap table

Exit codes: 0 success, 2 input error (bad arguments, malformed JSON,
unsupported instance), 3 resource limit (grids or state space too large
for exact arithmetic at the requested parameters).

All reports are JSON with sorted keys so identical inputs give
byte-identical output.  Exact rationals are rendered as "p/q" strings;
floats use Python's shortest round-trip repr.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from fractions import Fraction
from pathlib import Path

from .anchoring import alpha_regular, beta_mhr, verify_mhr_anchor, verify_regular_anchor
from .discretization import back_map_prices, full_discretize, value_grid_bound, vertical_round
from .distributions import Instance, TieBreak, load_instance
from .dp import DEFAULT_STATE_CAP, run_dp
from .iid import single_price_mhr
from .oracle import brute_force_optimum, exact_revenue, monte_carlo_revenue
from .reductions import PriceVector, lift_solution_mhr, lift_solution_regular, truncate_values_mhr, truncate_values_regular
from .util import (
    AnchoringError,
    ConvergenceError,
    ResourceLimitError,
    is_infinite,
    parse_number,
    rational_str,
    to_fraction,
)

# exhaustive gap check on the restricted grid only while k2**n stays tiny
_GAP_BRUTE_CAP = 4_096
_DEFAULT_SAMPLES = 100_000


def _render(x):
    """JSON-safe scalar: Fraction -> "p/q", inf -> "inf", floats/ints pass through."""
    if isinstance(x, Fraction):
        return rational_str(x)
    if is_infinite(x):
        return "inf"
    return x


def _render_prices(pv) -> list:
    return [_render(p) for p in pv]


def _emit(payload, out_path) -> None:
    text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    sys.stdout.write(text)
    if out_path:
        Path(out_path).write_text(text)


def _load(path: str) -> Instance:
    return load_instance(Path(path).read_text())


def _apply_tie_break(inst: Instance, flag) -> Instance:
    if flag is None:
        return inst
    return Instance(inst.items, TieBreak(flag), inst.shape)


def _resolved_class(inst: Instance, flag):
    if flag == "none":
        return None
    return flag if flag is not None else inst.shape


def practical_delta(r: float) -> Fraction:
    """Largest dyadic rational in [0.4, 0.8] times the admissible horizontal
    bound for declared value ratio r; small denominators keep grid-point
    rationals cheap.  The theorem-grade (epsilon/8)^8 value is recorded in
    the report provenance instead of being materialized."""
    if r < 1:
        raise ValueError("value ratio must be >= 1")
    target = 0.8 * value_grid_bound(r)
    for k in range(2, 64):
        num = int(target * (1 << k))
        if num >= 1:
            return Fraction(num, 1 << k)
    raise ResourceLimitError("declared value ratio too large for a practical value grid")


def practical_price_eps(price_ratio: float) -> Fraction:
    """Dyadic price-grid epsilon sized so the geometric price grid holds
    roughly two dozen points over the given ratio."""
    if price_ratio <= 1.0:
        return Fraction(1, 4)
    e = math.sqrt(max(1.0 - price_ratio ** (-1.0 / 24.0), 1e-9))
    e = min(max(e, 1.0 / 64.0), 0.45)
    return Fraction(int(e * 64), 64)


def _anchor_stage(inst: Instance, cls, eps: Fraction):
    """Anchor + truncate for a tagged instance.  Returns the working
    instance, a lift closure mapping grid prices back to admissible ones,
    anchor metadata, and optional price-window overrides."""
    n = inst.n
    if cls == "mhr":
        anchor = beta_mhr(inst)
        te = min(eps, Fraction(24, 100))
        work = truncate_values_mhr(inst, anchor.beta, te)
        info = {
            "kind": "mhr",
            "beta": _render(anchor.beta),
            "eta": anchor.eta,
            "truncation_eps": _render(te),
        }
        return work, (lambda pv: lift_solution_mhr(pv, anchor.beta, te)), info, None, None
    if cls == "regular":
        anchor = alpha_regular(inst)
        te = min(eps, Fraction(9, 10))
        work = truncate_values_regular(inst, anchor.alpha, te)
        info = {
            "kind": "regular",
            "alpha": _render(anchor.alpha),
            "c1": _render(anchor.c1),
            "c2": _render(anchor.c2),
            "truncation_eps": _render(te),
        }
        p_lo = te * anchor.alpha / n**4
        p_hi = 2 * n**2 * anchor.alpha / te**2
        return work, (lambda pv: lift_solution_regular(pv, anchor.alpha, te, n)), info, p_lo, p_hi
    if cls is not None:
        raise ValueError(f"unknown distribution class {cls!r}")
    if not inst.all_discrete:
        raise ValueError(
            "instances with cdf-oracle items need an explicit class tag "
            "(--class mhr or --class regular); nothing is inferred"
        )
    return inst, None, None, None, None


def _grid_stage(work: Instance, eps: Fraction, args, p_lo, p_hi):
    bounds = [(it.u_min, it.u_max) for it in work.items]
    u_min = min(b[0] for b in bounds)
    u_max = max(b[1] for b in bounds)
    if to_fraction(u_min) <= 0:
        raise ValueError(
            "instance has mass at values <= 0; tag it (--class mhr|regular) so "
            "truncation can lift the support off zero"
        )
    r = float(to_fraction(u_max) / to_fraction(u_min))
    delta = to_fraction(args.delta) if args.delta is not None else practical_delta(r)
    price_eps = (
        to_fraction(args.price_eps) if args.price_eps is not None else practical_price_eps(r)
    )
    ri = full_discretize(
        work,
        eps,
        delta=delta,
        price_eps=price_eps,
        price_lo=p_lo,
        price_hi=p_hi,
        value_grid_cap=args.value_cap,
    )
    if not ri.is_materialized:
        raise ResourceLimitError(
            "exact grids do not fit: the restricted instance needs "
            f"{ri.provenance.get('k1_grid')} value points and "
            f"{ri.provenance.get('k2_grid')} prices; rerun with a coarser "
            "--delta/--price-eps or supply discrete items"
        )
    return ri


def _evaluate(inst: Instance, pv: PriceVector, args):
    """Exact revenue when every item is discrete, Monte Carlo otherwise."""
    if inst.all_discrete:
        return exact_revenue(inst, pv), None
    mc = monte_carlo_revenue(inst, pv, samples=args.samples, seed=args.seed)
    return None, mc


def _grid_gap_line(rounded, dp_prices, dp_revenue):
    """Compare the dp result against the exhaustive optimum on the rounded
    restricted instance whenever that search is cheap."""
    k2, n = len(rounded.price_set), rounded.n
    if k2**n > _GAP_BRUTE_CAP:
        return None, None
    _, best = brute_force_optimum(rounded.instance, rounded.price_set)
    achieved = exact_revenue(rounded.instance, dp_prices)
    if achieved >= best:
        return None, rational_str(best)
    gap = (
        f"grid gap: dp prices earn {rational_str(achieved)} on the rounded grid "
        f"versus exhaustive optimum {rational_str(best)} "
        f"(shortfall {rational_str(best - achieved)} from mass rounding at M units)"
    )
    return gap, rational_str(best)


def _solve_dp(inst: Instance, args) -> dict:
    eps = to_fraction(args.epsilon)
    if not 0 < eps < 1:
        raise ValueError("--epsilon must lie in (0, 1)")
    cls = _resolved_class(inst, args.klass)
    work, lift, anchor_info, p_lo, p_hi = _anchor_stage(inst, cls, eps)
    ri = _grid_stage(work, eps, args, p_lo, p_hi)
    m_vert = -(-ri.price_ratio.numerator // ri.price_ratio.denominator)
    rounded = vertical_round(ri, m_vert, work.n)
    m_override = args.m_override**3 if args.m_override else None
    result = run_dp(rounded, M=m_override, state_cap=args.state_cap)
    gap_line, grid_best = _grid_gap_line(rounded, result.prices, result.predicted_revenue)

    pv = back_map_prices(result.prices, ri.delta)
    if lift is not None:
        pv = lift(pv)
    exact, mc = _evaluate(inst, pv, args)

    provenance = dict(ri.provenance)
    provenance.update(
        {
            "class": cls,
            "anchor": anchor_info,
            "epsilon": _render(eps),
            "theorem_delta": _render((eps / 8) ** 8),
            "theorem_price_eps": _render((eps / 8) ** 8 / 4),
            "M": result.M,
            "m_vertical": int(m_vert),
            "state_cap": args.state_cap,
        }
    )
    if grid_best is not None:
        provenance["grid_optimum"] = grid_best
    report = {
        "solver": "dp",
        "tie_break": inst.tie_break.value,
        "prices": _render_prices(pv),
        "grid_prices": _render_prices(result.prices),
        "predicted_revenue": _render(result.predicted_revenue),
        "exact_revenue": _render(exact) if exact is not None else None,
        "mc_revenue": mc,
        "gap_line": gap_line,
        "layers": [{"item": i, "states": s} for i, s in enumerate(result.layer_sizes)],
        "provenance": provenance,
    }
    return report


def _solve_brute(inst: Instance, args) -> dict:
    eps = to_fraction(args.epsilon)
    if not 0 < eps < 1:
        raise ValueError("--epsilon must lie in (0, 1)")
    cls = _resolved_class(inst, args.klass)
    work, lift, anchor_info, p_lo, p_hi = _anchor_stage(inst, cls, eps)
    ri = _grid_stage(work, eps, args, p_lo, p_hi)
    best_pv, best_rev = brute_force_optimum(ri.instance, ri.price_set)
    pv = back_map_prices(best_pv, ri.delta)
    if lift is not None:
        pv = lift(pv)
    exact, mc = _evaluate(inst, pv, args)
    provenance = dict(ri.provenance)
    provenance.update({"class": cls, "anchor": anchor_info, "epsilon": _render(eps)})
    return {
        "solver": "brute",
        "tie_break": inst.tie_break.value,
        "prices": _render_prices(pv),
        "grid_prices": _render_prices(best_pv),
        "predicted_revenue": _render(best_rev),
        "exact_revenue": _render(exact) if exact is not None else None,
        "mc_revenue": mc,
        "gap_line": None,
        "layers": None,
        "provenance": provenance,
    }


def _solve_iid(inst: Instance, args) -> dict:
    cls = _resolved_class(inst, args.klass)
    if cls != "mhr":
        raise ValueError("--solver iid needs an mhr-tagged instance")
    first = inst.items[0]
    if any(it != first for it in inst.items):
        raise ValueError("--solver iid needs identical items")
    eps = float(to_fraction(args.epsilon))
    price, mode = single_price_mhr(first, inst.n, eps, force_fast_path=args.force_fast_path)
    report = {
        "solver": "iid",
        "tie_break": inst.tie_break.value,
        "mode": mode,
        "provenance": {"class": cls, "epsilon": _render(to_fraction(args.epsilon)), "n": inst.n},
    }
    if price is None:
        report.update({"prices": None, "exact_revenue": None, "mc_revenue": None})
        report["gap_line"] = (
            "FallBack: n is below the single-price threshold for this epsilon; "
            "run the dp solver instead"
        )
        return report
    pv = PriceVector((price,) * inst.n)
    exact, mc = _evaluate(inst, pv, args)
    report.update(
        {
            "prices": _render_prices(pv),
            "exact_revenue": _render(exact) if exact is not None else None,
            "mc_revenue": mc,
            "gap_line": None,
        }
    )
    return report


_SOLVERS = {"dp": _solve_dp, "brute": _solve_brute, "iid": _solve_iid}


def _cmd_solve(args) -> int:
    inst = _apply_tie_break(_load(args.instance), args.tie_break)
    report = _SOLVERS[args.solver](inst, args)
    _emit(report, args.out)
    return 0


def _price_float(p) -> float:
    if isinstance(p, str):
        return math.inf if p == "inf" else float(Fraction(p))
    return float(p)


def _revenue_number(report):
    if report.get("exact_revenue") is not None:
        return float(Fraction(report["exact_revenue"]))
    mc = report.get("mc_revenue")
    return float(mc["estimate"]) if mc else None


def _cmd_compare(args) -> int:
    inst = _apply_tie_break(_load(args.instance), args.tie_break)
    rows = []
    for name in ("dp", "brute", "iid"):
        try:
            report = _SOLVERS[name](inst, args)
        except (ValueError, ResourceLimitError):
            if name == "iid":
                continue  # inapplicable instance; dp/brute failures must surface
            raise
        prices = report.get("prices")
        # floats keep the CSV legible; exact values live in the solve reports
        label = (
            ";".join(repr(_price_float(p)) for p in prices)
            if prices
            else report.get("mode", "")
        )
        rows.append((name, label, _revenue_number(report)))
    best = max((r[2] for r in rows if r[2] is not None), default=None)
    lines = ["solver,prices,revenue,gap"]
    for name, label, rev in rows:
        if rev is None:
            lines.append(f"{name},{label},,")
        else:
            lines.append(f"{name},{label},{rev!r},{best - rev!r}")
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if args.out:
        Path(args.out).write_text(text)
    return 0


def _cmd_brute(args) -> int:
    inst = _apply_tie_break(_load(args.instance), args.tie_break)
    grid = tuple(parse_number(tok) for tok in args.grid.split(","))
    pv, rev = brute_force_optimum(inst, grid)
    _emit(
        {
            "prices": _render_prices(pv),
            "revenue": _render(rev),
            "grid": [_render(g) for g in sorted({to_fraction(g) for g in grid})],
            "tie_break": inst.tie_break.value,
        },
        args.out,
    )
    return 0


def _cmd_eval(args) -> int:
    inst = _apply_tie_break(_load(args.instance), args.tie_break)
    pv = PriceVector(tuple(parse_number(tok) for tok in args.prices.split(",")))
    if len(pv) != inst.n:
        raise ValueError(f"expected {inst.n} prices, got {len(pv)}")
    payload = {
        "prices": _render_prices(pv),
        "tie_break": inst.tie_break.value,
        "exact_revenue": None,
        "mc_revenue": None,
    }
    if inst.all_discrete:
        # an infinitely priced item never wins, so drop it and stay exact
        kept = [(it, p) for it, p in zip(inst.items, pv) if not is_infinite(p)]
        if not kept:
            payload["exact_revenue"] = "0"
        else:
            sub = Instance(tuple(it for it, _ in kept), inst.tie_break)
            sub_pv = PriceVector(tuple(p for _, p in kept))
            payload["exact_revenue"] = _render(exact_revenue(sub, sub_pv))
    else:
        payload["mc_revenue"] = monte_carlo_revenue(
            inst, pv, samples=args.samples, seed=args.seed
        )
    _emit(payload, args.out)
    return 0


def _cmd_discretize(args) -> int:
    inst = _apply_tie_break(_load(args.instance), args.tie_break)
    eps = to_fraction(args.epsilon)
    cls = _resolved_class(inst, args.klass)
    work, _, anchor_info, p_lo, p_hi = _anchor_stage(inst, cls, eps)
    try:
        ri = _grid_stage(work, eps, args, p_lo, p_hi)
    except ResourceLimitError:
        # fall through to the symbolic description rather than failing
        bounds = [(it.u_min, it.u_max) for it in work.items]
        r = float(to_fraction(max(b[1] for b in bounds)) / to_fraction(min(b[0] for b in bounds)))
        ri = full_discretize(
            work,
            eps,
            delta=to_fraction(args.delta) if args.delta is not None else practical_delta(r),
            price_eps=(
                to_fraction(args.price_eps)
                if args.price_eps is not None
                else practical_price_eps(r)
            ),
            price_lo=p_lo,
            price_hi=p_hi,
            value_grid_cap=0,
        )
    provenance = dict(ri.provenance)
    provenance.update({"class": cls, "anchor": anchor_info, "epsilon": _render(eps)})
    payload = {
        "materialized": ri.is_materialized,
        "delta": _render(ri.delta),
        "tie_break": work.tie_break.value,
        "provenance": provenance,
    }
    if ri.is_materialized:
        payload["support"] = [_render(v) for v in ri.support]
        payload["price_set"] = [_render(p) for p in ri.price_set]
        payload["items"] = [
            {"masses": [_render(m) for m in it.masses]} for it in ri.instance.items
        ]
    _emit(payload, args.out)
    return 0


def _cmd_verify_anchors(args) -> int:
    inst = _apply_tie_break(_load(args.instance), args.tie_break)
    cls = _resolved_class(inst, args.klass)
    if cls == "mhr":
        anchor = beta_mhr(inst)
        eps = float(to_fraction(args.epsilon)) if args.epsilon is not None else 0.1
        result = verify_mhr_anchor(inst, anchor, eps=eps, samples=args.samples, seed=args.seed)
        payload = {
            "class": "mhr",
            "anchor": {"beta": _render(anchor.beta), "eta": anchor.eta},
            "epsilon": eps,
            "result": result,
        }
    elif cls == "regular":
        anchor = alpha_regular(inst)
        eps = float(to_fraction(args.epsilon)) if args.epsilon is not None else 0.5
        result = verify_regular_anchor(inst, anchor, eps=eps, samples=args.samples, seed=args.seed)
        payload = {
            "class": "regular",
            "anchor": {
                "alpha": _render(anchor.alpha),
                "c1": _render(anchor.c1),
                "c2": _render(anchor.c2),
            },
            "epsilon": eps,
            "result": result,
        }
    else:
        raise ValueError("verify-anchors needs a class tag (instance shape or --class)")
    _emit(_jsonify(payload), args.out)
    return 0


def _jsonify(obj):
    if isinstance(obj, Fraction):
        return rational_str(obj)
    if isinstance(obj, dict):
        return {k: _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if is_infinite(obj):
        return "inf"
    return obj


def _add_common(p: argparse.ArgumentParser, *, samples=False, klass=False) -> None:
    p.add_argument("instance", help="path to an instance JSON file")
    p.add_argument("--tie-break", choices=["lowest", "highest"], default=None)
    p.add_argument("--out", default=None, help="also write the report to this file")
    if samples:
        p.add_argument("--samples", type=int, default=_DEFAULT_SAMPLES)
        p.add_argument("--seed", type=int, default=0)
    if klass:
        p.add_argument(
            "--class",
            dest="klass",
            choices=["mhr", "regular", "none"],
            default=None,
            help="override the instance's distribution-class tag",
        )


def _add_grid_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epsilon", default="1/10", help="target accuracy in (0,1)")
    p.add_argument("--delta", default=None, help="horizontal grid ratio parameter")
    p.add_argument("--price-eps", default=None, help="price grid parameter")
    p.add_argument(
        "--value-cap",
        type=int,
        default=20_000,
        help="maximum number of value-grid points to materialize",
    )


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--solver", choices=["dp", "brute", "iid"], default="dp")
    p.add_argument("--state-cap", type=int, default=DEFAULT_STATE_CAP)
    p.add_argument("--m-override", type=int, default=None, help="use M = (this value)^3 units")
    p.add_argument("--force-fast-path", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="unitdemand", description="unit-demand pricing solver toolkit"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="full pipeline: anchor, discretize, dp, lift, verify")
    _add_common(p, samples=True, klass=True)
    _add_grid_flags(p)
    _add_solver_flags(p)
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("brute", help="exhaustive search over an explicit price grid")
    _add_common(p)
    p.add_argument("--grid", required=True, help="comma-separated candidate prices")
    p.set_defaults(func=_cmd_brute)

    p = sub.add_parser("eval", help="evaluate one price vector")
    _add_common(p, samples=True)
    p.add_argument("--prices", required=True, help="comma-separated prices, one per item")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("discretize", help="emit the restricted instance for the grid stage")
    _add_common(p, klass=True)
    _add_grid_flags(p)
    p.set_defaults(func=_cmd_discretize)

    p = sub.add_parser("verify-anchors", help="check anchor guarantees for a tagged instance")
    _add_common(p, samples=True, klass=True)
    p.add_argument("--epsilon", default=None)
    p.set_defaults(func=_cmd_verify_anchors)

    p = sub.add_parser("compare", help="dp vs brute vs iid gap table (CSV)")
    _add_common(p, samples=True, klass=True)
    _add_grid_flags(p)
    _add_solver_flags(p)
    p.set_defaults(func=_cmd_compare)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if not exc.code else 2
    try:
        return args.func(args)
    except json.JSONDecodeError as exc:
        print(
            f"error: malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}",
            file=sys.stderr,
        )
        return 2
    except (ResourceLimitError, ConvergenceError) as exc:
        print(f"error: resource limit: {exc}", file=sys.stderr)
        return 3
    except (AnchoringError, ValueError, TypeError, KeyError, ZeroDivisionError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
