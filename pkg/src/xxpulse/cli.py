"""Command-line interface: ``xxpulse <command> [options]``.

Files use MHz and microseconds; every float is written with 17 significant
digits so outputs are byte-identical across reruns.  Exit status is 0 on
success, 1 on a numerical failure and 2 on bad input.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import analysis, demod
from .model import (MHZ_TO_RAD_S, PARITIES, TWO_PI, ChainValidationError, ConvergenceError,
                    FourierPulse, GateSpec, PulseBasis, StabilizationSpec, five_ion_chain,
                    generate_chain, load_chain, save_chain)
from .synthesis import EntanglementError, NullSpaceError, synthesize, synthesize_step_pulse

logger = logging.getLogger("xxpulse")

EXIT_OK, EXIT_NUMERICAL, EXIT_INPUT = 0, 1, 2
BUILTIN_CHAIN = "builtin"


class InputError(Exception):
    pass


def fmt(x):
    return format(float(x), ".17g")


def write_csv(path, header, rows):
    lines = [",".join(header)]
    lines += [",".join(v if isinstance(v, str) else fmt(v) if isinstance(v, float) else str(v)
                       for v in row) for row in rows]
    Path(path).write_text("\n".join(lines) + "\n")


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _chain(args):
    if args.chain == BUILTIN_CHAIN:
        return five_ion_chain()
    return load_chain(args.chain)


def _outdir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _basis(args, tau_s=None):
    tau = args.tau_us * 1e-6 if tau_s is None else tau_s
    return PulseBasis(tau, args.na, args.parity, args.first_index)


def _gate(args, chain):
    gate = GateSpec(args.pair[0], args.pair[1])
    gate.check_chain(chain)
    return gate


# --- commands -----------------------------------------------------------------

def cmd_synthesize(args):
    chain = _chain(args)
    gate = _gate(args, chain)
    basis = _basis(args)
    res = synthesize(chain, gate, basis, StabilizationSpec(args.stab_order, args.project))
    out = _outdir(args)
    pulse = res.pulse
    write_csv(out / "amplitudes.csv", ["n", "a_n_mhz"],
              [(fmt(n), float(a) / MHZ_TO_RAD_S) for n, a in zip(basis.harmonic_numbers(), pulse.amplitudes)])
    t = np.linspace(0.0, basis.tau, args.samples)
    write_csv(out / "pulse.csv", ["t_us", "g_mhz"],
              [(float(ti) * 1e6, float(gi) / MHZ_TO_RAD_S) for ti, gi in zip(t, pulse(t))])
    chi_quad = analysis.chi(pulse, chain, gate)
    meta = {
        "pair": [gate.ion_i, gate.ion_j],
        "tau_us": args.tau_us,
        "basis_size": args.na,
        "parity": args.parity,
        "first_index": args.first_index,
        "stab_order": args.stab_order,
        "chi_projection": args.project,
        "lambda_max": res.lambda_max,
        "gamma": res.norm_gamma,
        "null_dimension": res.null_dimension,
        "null_space_residual": res.residual,
        "relative_null_space_residual": res.residual / res.norm_gamma,
        "chi_matrix": res.chi,
        "chi_quadrature": chi_quad,
        "peak_mhz": pulse.peak() / MHZ_TO_RAD_S,
        "analytic_bound_mhz": analysis.power_lower_bound(chain, gate, basis.tau) / 1e6,
        "chain_label": chain.label,
    }
    write_json(out / "metadata.json", meta)
    print(f"N0={res.null_dimension} chi={chi_quad:.12g} peak={meta['peak_mhz'] * 1e3:.6g} kHz "
          f"residual={meta['relative_null_space_residual']:.3g}")


def _load_pulse_dir(path):
    path = Path(path)
    meta_file, amp_file = path / "metadata.json", path / "amplitudes.csv"
    for f in (meta_file, amp_file):
        if not f.is_file():
            raise FileNotFoundError(f"missing pulse file: {f}")
    meta = json.loads(meta_file.read_text())
    amps = np.loadtxt(amp_file, delimiter=",", skiprows=1, ndmin=2)[:, 1] * MHZ_TO_RAD_S
    basis = PulseBasis(meta["tau_us"] * 1e-6, meta["basis_size"], meta["parity"], meta["first_index"])
    return FourierPulse(basis, amps)


def cmd_demodulate(args):
    pulse = _load_pulse_dir(args.pulse_dir)
    dem = demod.demodulate(pulse, args.convention)
    out = Path(args.out) if args.out else Path(args.pulse_dir) / "demod.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    dem.to_csv(out)
    err = demod.reconstruction_error(pulse, dem)
    print(f"N_z={dem.num_zeros} relative_error={err:.3g}")


def cmd_scan(args):
    chain = _chain(args)
    gate = _gate(args, chain)
    basis = _basis(args)
    orders = args.orders if args.orders else list(range(args.k_max + 1))
    pulses = {}
    for k in orders:
        pulses[k] = synthesize(chain, gate, basis, StabilizationSpec(k)).pulse
        logger.info("K=%d synthesized", k)
    half = args.grid_khz * 1e3
    step = args.grid_step_hz
    grid = step * np.arange(-int(round(half / step)), int(round(half / step)) + 1)
    eps = args.epsilon or [1e-3]
    res = analysis.drift_scan(pulses, chain, gate, grid, eps)
    out = _outdir(args)
    rows = [(float(df), str(k), float(v)) for k in sorted(res.infidelity)
            for df, v in zip(res.delta_f_hz, res.infidelity[k])]
    write_csv(out / "scan.csv", ["delta_f_hz", "K", "infidelity"], rows)
    write_json(out / "widths.json", res.widths)
    for w in res.widths:
        flag = " (clipped at grid edge)" if w["clipped"] else ""
        print(f"K={w['K']} eps={w['epsilon']:g} width={w['width_hz'] / 1e3:.4g} kHz{flag}")


def cmd_bound(args):
    chain = _chain(args)
    tau = args.tau_us * 1e-6
    mu = None
    if args.mu_min_mhz is not None or args.mu_max_mhz is not None:
        if args.mu_min_mhz is None or args.mu_max_mhz is None:
            raise InputError("--mu-min-mhz and --mu-max-mhz must be given together")
        mu = (args.mu_min_mhz * MHZ_TO_RAD_S, args.mu_max_mhz * MHZ_TO_RAD_S)
    n = chain.num_ions
    table = []
    for i in range(1, n + 1):
        for j in range(1, i):
            b = analysis.power_lower_bound(chain, GateSpec(i, j), tau, mu)
            table.append({"i": i, "j": j, "bound_khz": b / 1e3})
    for row in table:
        print(f"({row['i']},{row['j']}) {row['bound_khz']:.3f} kHz")
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        write_json(out, {"tau_us": args.tau_us, "bounds": table})


def cmd_step(args):
    chain = _chain(args)
    gate = _gate(args, chain)
    res = synthesize_step_pulse(chain, gate, args.segments, args.mu_mhz * MHZ_TO_RAD_S, args.half_periods)
    p = res.pulse
    out = _outdir(args)
    edges = p.edges
    write_csv(out / "step.csv", ["segment", "t_start_us", "t_end_us", "omega_over_2pi_mhz"],
              [(str(k + 1), float(edges[k]) * 1e6, float(edges[k + 1]) * 1e6, float(a) / MHZ_TO_RAD_S)
               for k, a in enumerate(p.amplitudes)])
    write_json(out / "metadata.json", {
        "pair": [gate.ion_i, gate.ion_j], "segments": args.segments, "mu_mhz": args.mu_mhz,
        "half_periods": args.half_periods, "tau_us": p.tau * 1e6, "parity": p.parity,
        "peak_mhz": p.peak() / MHZ_TO_RAD_S, "chi_quadrature": analysis.chi(p, chain, gate),
        "null_space_residual": res.residual})
    print(f"tau={p.tau * 1e6:.6g} us parity={p.parity} peak={p.peak() / TWO_PI / 1e3:.6g} kHz")


def cmd_chain_gen(args):
    chain = generate_chain(args.ions, args.radial_mhz * MHZ_TO_RAD_S, args.axial_ratio,
                           args.prefactor, args.spacing)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_chain(chain, out)
    print(f"wrote {chain.num_ions}-ion chain to {out}")


def cmd_sk(args):
    desc = analysis.sk_compensation(args.theta)
    text = json.dumps(desc, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)


# --- parser ---------------------------------------------------------------------

def _add_common(p, pulse=True):
    p.add_argument("--chain", default=BUILTIN_CHAIN,
                   help="chain JSON file (default: the bundled five-ion chain)")
    if pulse:
        p.add_argument("--pair", nargs=2, type=int, default=[1, 3], metavar=("I", "J"))
        p.add_argument("--tau-us", type=float, default=300.0)
        p.add_argument("--na", type=int, default=1000, help="basis size N_A")
        p.add_argument("--parity", choices=PARITIES, default="negative")
        p.add_argument("--first-index", type=int, default=1)


def build_parser():
    parser = argparse.ArgumentParser(prog="xxpulse", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synthesize", help="power-optimal pulse for one pair")
    _add_common(p)
    p.add_argument("--stab-order", type=int, default=0)
    p.add_argument("--project", type=int, default=0, help="chi-sensitive directions to remove")
    p.add_argument("--samples", type=int, default=3001)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("demodulate", help="amplitude/detuning split of a synthesized pulse")
    p.add_argument("pulse_dir", help="directory written by 'synthesize'")
    p.add_argument("--convention", choices=demod.CONVENTIONS, default="i")
    p.add_argument("--out", default=None, help="CSV path (default: <pulse_dir>/demod.csv)")
    p.set_defaults(func=cmd_demodulate)

    p = sub.add_parser("scan", help="infidelity vs uniform drift for several K")
    _add_common(p)
    p.add_argument("--k-max", type=int, default=8)
    p.add_argument("--orders", type=int, nargs="+", default=None)
    p.add_argument("--grid-khz", type=float, default=20.0, help="half-width of the drift grid")
    p.add_argument("--grid-step-hz", type=float, default=50.0)
    p.add_argument("--epsilon", type=float, action="append")
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("bound", help="analytic peak-power lower bounds for all pairs")
    _add_common(p, pulse=False)
    p.add_argument("--tau-us", type=float, default=300.0)
    p.add_argument("--mu-min-mhz", type=float)
    p.add_argument("--mu-max-mhz", type=float)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("step", help="fixed-detuning step pulse")
    _add_common(p, pulse=False)
    p.add_argument("--pair", nargs=2, type=int, default=[1, 3], metavar=("I", "J"))
    p.add_argument("--segments", type=int, default=11)
    p.add_argument("--mu-mhz", type=float, default=2.396)
    p.add_argument("--half-periods", type=int, default=1434)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_step)

    p = sub.add_parser("chain-gen", help="synthetic chain JSON")
    p.add_argument("--ions", type=int, required=True)
    p.add_argument("--radial-mhz", type=float, default=4.6)
    p.add_argument("--axial-ratio", type=float, default=0.088)
    p.add_argument("--prefactor", type=float, default=0.15)
    p.add_argument("--spacing", choices=("harmonic", "uniform"), default="uniform")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_chain_gen)

    p = sub.add_parser("sk", help="SK compensation sequence for XX(theta)")
    p.add_argument("theta", type=float, help="gate angle in radians")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_sk)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (NullSpaceError, EntanglementError, ConvergenceError, demod.DegenerateZeroError,
            np.linalg.LinAlgError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except FileNotFoundError as exc:
        name = exc.filename if exc.filename else str(exc)
        print(f"error: file not found: {name}", file=sys.stderr)
        return EXIT_INPUT
    except (InputError, ChainValidationError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
