"""Command-line front end: run a scenario, calibrate its noise level, sweep a
parameter, or regenerate golden fixtures. Emits plain CSV plot data."""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np
import yaml

from .link import (BITS_STREAM, NOISE_STREAM, RunReport, frame_rng,
                   run_scenario)
from .phy import FrameConfig, build_frame, demap_qpsk
from .scenario import ConfigError, Scenario, load_scenario

FLOAT_FMT = "%.9g"


def _fmt(x: float) -> str:
    return FLOAT_FMT % x


# ---------------------------------------------------------------------------
# report emission

def emit_report(report: RunReport | None, out_dir: str | Path,
                noise_points: list[tuple[float, RunReport]] | None = None) -> list[Path]:
    """Write metrics.csv, channel_trace.csv, constellation.csv and config.echo.

    Pass report=None with no points for headers-only files.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise SystemExit(f"cannot create output directory {out}: {exc}")
    points = noise_points
    if points is None:
        points = [] if report is None else [(report.scenario.noise_power, report)]

    written = []

    lines = ["mode,user,noise_power,ber,per,evm_db"]
    for noise, rep in points:
        for mode, mres in rep.mode_results.items():
            for u, m in enumerate(mres.metrics):
                lines.append(",".join([mode, str(u), _fmt(noise), _fmt(m.ber),
                                       _fmt(m.per), _fmt(m.evm_db)]))
    written.append(_write(out / "metrics.csv", lines))

    lines = ["subcarrier"]
    if points:
        rep = points[-1][1]
        k = rep.scenario.n_users
        hybrid = next((m for name, m in rep.mode_results.items()
                       if name != "analog_only"), None)
        header = ["subcarrier"]
        cols = []
        for u in range(k):
            header.append(f"user{u}_nonprecoded_mag")
            cols.append(np.abs(rep.h_tilde_trace[:, u, u]))
            header.append(f"user{u}_precoded_mag")
            trace = (hybrid.g_traces[u] if hybrid is not None and
                     hybrid.g_traces[u] is not None else None)
            cols.append(trace if trace is not None
                        else np.full(rep.h_tilde_trace.shape[0], np.nan))
        lines = [",".join(header)]
        for i in range(rep.h_tilde_trace.shape[0]):
            lines.append(",".join([str(i)] + [_fmt(c[i]) for c in cols]))
    written.append(_write(out / "channel_trace.csv", lines))

    lines = ["i,q,user,mode"]
    for _, rep in points[-1:]:
        for mode, mres in rep.mode_results.items():
            for u, samples in enumerate(mres.constellations):
                for s in samples:
                    lines.append(",".join([_fmt(s.real), _fmt(s.imag),
                                           str(u), mode]))
    written.append(_write(out / "constellation.csv", lines))

    echo: dict = {}
    if report is not None:
        echo = dict(report.scenario.raw)
        echo["_channel_checksum"] = report.channel_checksum
        echo["_beams"] = [
            {"tx_phi_deg": tx.phi_deg, "rx_phi_deg": rx.phi_deg}
            for tx, rx in report.beams]
    written.append(_write(out / "config.echo",
                          yaml.safe_dump(echo, sort_keys=True).splitlines()))
    return written


def _write(path: Path, lines: list[str]) -> Path:
    try:
        path.write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise SystemExit(f"cannot write {path}: {exc}")
    return path


# ---------------------------------------------------------------------------
# calibration

def calibrate_noise(sc: Scenario, target_evm_db: float = -5.5,
                    frames: int = 8, iters: int = 18,
                    lo: float = 1e-12, hi: float = 1.0) -> float:
    """Bisect noise_power so the analog-only mean EVM hits the target."""
    def analog_evm(noise: float) -> float:
        probe = dataclasses.replace(sc, noise_power=noise,
                                    modes=("analog_only",), frames=frames)
        rep = run_scenario(probe)
        return float(np.mean([m.evm_db for m in
                              rep.mode_results["analog_only"].metrics]))

    if analog_evm(lo) > target_evm_db:
        return lo          # interference floor already above the target
    for _ in range(iters):
        mid = np.sqrt(lo * hi)
        if analog_evm(mid) < target_evm_db:
            lo = mid
        else:
            hi = mid
    return float(np.sqrt(lo * hi))


# ---------------------------------------------------------------------------
# goldens

GOLDEN_SEED = 20260824


def write_goldens(sc: Scenario, out_dir: str | Path) -> list[Path]:
    """Reference vectors for the pinned seed: tx samples, one rx stream,
    first-codeword LLRs and decoded bits.

    Complex sample files are little-endian float32, interleaved I/Q.
    """
    from .link import acquire_beams, design_precoder, realize_channel
    from .channel import transmit
    from .ldpc import N_CODED
    from .phy import receive_frame

    sc = dataclasses.replace(sc, seed=GOLDEN_SEED, frames=1)
    h = realize_channel(sc)
    f_a, combiners, _ = acquire_beams(sc, h)
    from .channel import reduce_channel
    h_tilde = reduce_channel(h, f_a, combiners)
    f_d, alpha = design_precoder("rzf", h_tilde, sc, f_a)
    cfg = FrameConfig(n_users=sc.n_users, n_chains=f_a.n_chains,
                      codewords_per_user=sc.codewords_per_frame)
    rng = frame_rng(sc.seed, BITS_STREAM, 0)
    bits = [rng.integers(0, 2, size=(sc.codewords_per_frame, 336),
                         dtype=np.uint8) for _ in range(sc.n_users)]
    frame = build_frame(bits, f_a, f_d, alpha, cfg)
    x = np.pad(frame.samples, ((0, 0), (0, 128)))
    rx = transmit(x, h, noise_power=sc.noise_power,
                  rng=frame_rng(sc.seed, NOISE_STREAM, 0))
    stream0 = combiners[0].weights @ rx[0]
    res = receive_frame(stream0, cfg, frame.layout, 0,
                        sc.ue.size * sc.noise_power)
    llrs = demap_qpsk(res.eq_symbols[1:].reshape(-1),
                      max(res.noise_var_est, 1e-12))[:N_CODED]

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    paths.append(_write_iq(out / "tx_antenna0.iq", frame.samples[0]))
    paths.append(_write_iq(out / "rx_user0_combined.iq", stream0))
    p = out / "llrs_codeword0.f32"
    np.asarray(llrs, dtype="<f4").tofile(p)
    paths.append(p)
    p = out / "decoded_bits_user0.u8"
    res.info_bits.astype(np.uint8).tofile(p)
    paths.append(p)
    return paths


def _write_iq(path: Path, samples: np.ndarray) -> Path:
    inter = np.empty(2 * len(samples), dtype="<f4")
    inter[0::2] = samples.real
    inter[1::2] = samples.imag
    inter.tofile(path)
    return path


# ---------------------------------------------------------------------------
# argument handling

def _apply_overrides(sc: Scenario, args) -> Scenario:
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.frames is not None:
        changes["frames"] = args.frames
    if getattr(args, "mode", None):
        changes["modes"] = ("analog_only", "rzf") if args.mode == "both" \
            else (args.mode,)
    return dataclasses.replace(sc, **changes) if changes else sc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hybridsim",
        description="Multi-user hybrid beamforming link simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, mode_flag=True):
        p.add_argument("--config", required=True, help="scenario file")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--frames", type=int, default=None)
        if mode_flag:
            p.add_argument("--mode",
                           choices=["analog_only", "zf", "rzf", "both"],
                           default=None)

    common(sub.add_parser("run", help="run the scenario and emit reports"))
    p = sub.add_parser("calibrate",
                       help="bisect noise_power against a target analog EVM")
    common(p, mode_flag=False)
    p.add_argument("--target-evm-db", type=float, default=-5.5)
    p = sub.add_parser("sweep", help="sweep noise power or gamma")
    common(p)
    p.add_argument("--param", choices=["noise", "gamma"], default="noise")
    p.add_argument("--values", required=True,
                   help="comma-separated parameter values")
    p = sub.add_parser("goldens", help="regenerate golden fixtures")
    common(p, mode_flag=False)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        sc = load_scenario(args.config)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    sc = _apply_overrides(sc, args)

    if args.command == "run":
        report = run_scenario(sc)
        for path in emit_report(report, args.out):
            print(f"wrote {path}")
        for mode, mres in report.mode_results.items():
            for u, m in enumerate(mres.metrics):
                print(f"{mode} user {u}: ber={m.ber:.3e} per={m.per:.3f} "
                      f"evm={m.evm_db:.2f} dB")
    elif args.command == "calibrate":
        noise = calibrate_noise(sc, target_evm_db=args.target_evm_db)
        print(f"calibrated noise_power: {noise:.6e}")
    elif args.command == "sweep":
        values = [float(v) for v in args.values.split(",")]
        points = []
        for v in values:
            if args.param == "noise":
                sc_v = dataclasses.replace(sc, noise_power=v)
            else:
                sc_v = dataclasses.replace(sc, gamma=v)
            points.append((v, run_scenario(sc_v)))
        for path in emit_report(points[-1][1], args.out, noise_points=points):
            print(f"wrote {path}")
    elif args.command == "goldens":
        for path in write_goldens(sc, args.out):
            print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
