"""Command-line entry point: ``zakofdm {sweep,run-otfs,run-ofdm,overhead,selftest}``."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from dataclasses import asdict

from . import ofdm_modem, otfs_modem
from .dd_core import DDGrid
from .link_mcs import MCS_TABLE, ChannelSpec, LinkConfigError, OFDMLink, OTFSLink, run_link
from .sweep import SweepConfigError, SweepSpec, run_sweep, write_outputs

EXIT_CONFIG = 2
CONFIG_ERRORS = (
    SweepConfigError,
    LinkConfigError,
    ofdm_modem.ConfigError,
    otfs_modem.InfeasibleLayoutError,
    otfs_modem.EstimationWindowError,
)

log = logging.getLogger("zakofdm")


def _global_flags(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--seed", type=int, default=d(None), help="master seed")
    p.add_argument("--frames", type=int, default=d(None), help="frames per candidate")
    p.add_argument("--threads", type=int, default=d(1), help="worker processes")
    p.add_argument("--bler-gate", type=float, default=d(None), help="reliability gate on BLER")
    p.add_argument("--paper-scale", action="store_true", default=d(False), help="full-size numerology")
    p.add_argument("--log-level", default=d("WARNING"), help="logging level (stderr)")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="zakofdm", description=__doc__)
    _global_flags(p, suppress=False)
    sub = p.add_subparsers(dest="cmd", required=True)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)

    s = sub.add_parser("sweep", parents=[common], help="per-cell SE search over a config grid")
    s.add_argument("config", help="YAML sweep config")
    s.add_argument("--out", required=True, help="output CSV path")
    s.add_argument("--search", choices=("exact", "pruned"), default=None)
    s.add_argument("--snr-db", type=float, default=None, help="override SNR (inf disables noise)")

    for name, wf in (("run-otfs", "otfs"), ("run-ofdm", "ofdm")):
        r = sub.add_parser(name, parents=[common], help=f"single {wf.upper()} configuration at one cell")
        r.add_argument("--tau-us", type=float, default=0.0)
        r.add_argument("--nu-hz", type=float, default=0.0)
        r.add_argument("--snr-db", type=float, default=12.0)
        r.add_argument("--mcs", type=int, default=1, help=f"MCS id 0..{len(MCS_TABLE) - 1}")
        r.add_argument("--channel", choices=("veh_a", "identity"), default="veh_a")
        if wf == "otfs":
            r.add_argument("--nu-p-khz", type=float, default=6.0)
            r.add_argument("--pdr-db", type=float, default=-5.0)
            r.add_argument("--layout", choices=tuple(otfs_modem.VARIANT_WIDTH), default="narrow")
            r.add_argument("--pdr-mode", choices=("frame", "symbol"), default="frame")
            r.add_argument("--alpha", type=float, default=0.1)
            r.add_argument("--tail", type=int, default=0)
        else:
            r.add_argument("--delta-f-khz", type=float, default=30.0)
            r.add_argument("--dmrs", type=int, default=2)
            r.add_argument("--boost-db", type=float, default=0.0)
            r.add_argument("--critical", action="store_true", help="FFT size = subcarriers")

    o = sub.add_parser("overhead", parents=[common], help="overhead arithmetic and tables")
    o.add_argument("--zak-strip", type=float, help="strip width (s or Hz)")
    o.add_argument("--period", type=float, help="period in the same unit")
    o.add_argument("--cp", type=float, help="CP length (s); with --delta-f prints CP overhead")
    o.add_argument("--delta-f", type=float, help="subcarrier spacing (Hz)")

    sub.add_parser("selftest", parents=[common], help="run the built-in oracle checks")
    return p


def _pct(x: float) -> str:
    return f"{100 * x:.4g}%"


def overhead_tables() -> str:
    """CP and pilot overhead versus Doppler spread and versus delay spread."""
    lines = ["# CP-OFDM overhead vs Doppler spread (t_cp = 4.7 us fixed)"]
    lines.append("doppler_khz,delta_f_khz,dmrs_per_slot,cp,pilot,total")
    for nu in (1, 2, 3, 4):
        df = 15e3 * 2 ** math.ceil(math.log2(nu))
        dmrs = min(4, nu)
        cp = ofdm_modem.cp_overhead(df, 4.7e-6)
        total = ofdm_modem.ofdm_overhead(df, 4.7e-6, dmrs)
        lines.append(f"{nu},{df / 1e3:g},{dmrs},{_pct(cp)},{_pct(total - cp)},{_pct(total)}")
    lines.append("")
    lines.append("# CP-OFDM overhead vs delay spread (delta_f = 15 kHz, t_cp = delay spread)")
    lines.append("delay_us,dmrs_comb,cp,pilot,total")
    for tau in (1.15, 2.3, 3.5, 4.7):
        # frequency pilot spacing at most half the coherence bandwidth 1 / tau
        comb = max(1, min(12, int(1.0 / (2 * tau * 1e-6 * 15e3))))
        cp = ofdm_modem.cp_overhead(15e3, tau * 1e-6)
        total = ofdm_modem.ofdm_overhead(15e3, tau * 1e-6, 1, freq_comb=comb)
        lines.append(f"{tau:g},{comb},{_pct(cp)},{_pct(total - cp)},{_pct(total)}")
    lines.append("")
    lines.append("# Zak-OTFS strip overhead 2 * spread / period")
    lines.append("axis,spread,period,overhead")
    lines.append(f"delay,2.5us,200us,{_pct(ofdm_modem.zak_strip_overhead(2.5e-6, 200e-6))}")
    lines.append(f"doppler,1kHz,160kHz,{_pct(ofdm_modem.zak_strip_overhead(1e3, 160e3))}")
    return "\n".join(lines)


def _cmd_overhead(a) -> int:
    printed = False
    if (a.zak_strip is None) != (a.period is None):
        raise SweepConfigError("--zak-strip and --period go together")
    if a.zak_strip is not None:
        print(_pct(ofdm_modem.zak_strip_overhead(a.zak_strip, a.period)))
        printed = True
    if (a.cp is None) != (a.delta_f is None):
        raise SweepConfigError("--cp and --delta-f go together")
    if a.cp is not None:
        print(_pct(ofdm_modem.cp_overhead(a.delta_f, a.cp)))
        printed = True
    if not printed:
        print(overhead_tables())
    return 0


def _base_spec(a) -> SweepSpec:
    return SweepSpec.paper() if a.paper_scale else SweepSpec.desk()


def _cmd_run(a, waveform: str) -> int:
    spec = _base_spec(a)
    if not 0 <= a.mcs < len(MCS_TABLE):
        raise SweepConfigError(f"MCS id must be 0..{len(MCS_TABLE) - 1}")
    mcs = MCS_TABLE[a.mcs]
    tau, nu = a.tau_us * 1e-6, a.nu_hz
    if waveform == "otfs":
        try:
            grid = DDGrid.from_bandwidth(spec.bw_otfs, spec.duration, a.nu_p_khz * 1e3)
        except ValueError as e:
            raise SweepConfigError(str(e)) from None
        layout = otfs_modem.build_layout(grid, tau, a.layout, tail=a.tail)
        cfg = otfs_modem.OTFSConfig(grid, layout, a.pdr_db, mcs, a.alpha, a.alpha, a.pdr_mode)
        link = OTFSLink(cfg)
    else:
        cfg = ofdm_modem.OFDMConfig.nr(
            spec.bw_ofdm, spec.duration, a.delta_f_khz * 1e3, a.dmrs, a.boost_db, mcs, critical=a.critical
        )
        link = OFDMLink(cfg, spec.duration)
    channel = ChannelSpec(tau, nu, a.snr_db, model=a.channel)
    frames = a.frames if a.frames is not None else spec.n_frames
    seed = a.seed if a.seed is not None else spec.seed
    gate = a.bler_gate if a.bler_gate is not None else spec.bler_gate
    res = run_link(waveform, link, channel, frames, seed, gate)
    print(json.dumps(asdict(res), indent=2, default=str))
    return 0


def _cmd_sweep(a) -> int:
    spec = SweepSpec.from_yaml(a.config, paper_scale=a.paper_scale)
    try:
        spec = spec.with_overrides(
            seed=a.seed, n_frames=a.frames, bler_gate=a.bler_gate, search=a.search, snr_db=a.snr_db
        )
    except ValueError as e:
        raise SweepConfigError(str(e)) from None
    if a.threads < 1:
        raise SweepConfigError("--threads must be >= 1")
    t0 = time.perf_counter()
    result = run_sweep(spec, threads=a.threads)
    out = write_outputs(result, a.out)
    log.warning("wrote %s (%d cells) in %.1f s", out, len(result.cells), time.perf_counter() - t0)
    return 0


def _cmd_selftest(a) -> int:
    from .selftest import run_all

    ok = True
    for name, passed, detail in run_all(seed=a.seed or 0):
        print(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")
        ok &= passed
    return 0 if ok else 1


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    a = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(a.log_level).upper(), logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if a.cmd == "sweep":
            return _cmd_sweep(a)
        if a.cmd == "run-otfs":
            return _cmd_run(a, "otfs")
        if a.cmd == "run-ofdm":
            return _cmd_run(a, "ofdm")
        if a.cmd == "overhead":
            return _cmd_overhead(a)
        return _cmd_selftest(a)
    except CONFIG_ERRORS as e:
        print(f"zakofdm: config error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
