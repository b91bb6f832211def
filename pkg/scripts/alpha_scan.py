"""OTFS BLER per MCS for the fixed pulse spread and a period-adaptive rule.

The adaptive rule picks alpha so the Gaussian window falls to 1e-3 at half a
period: alpha = -ln(1e-3) / (pi (P/2)^2) with P = M on delay, N on Doppler.

    python scripts/alpha_scan.py --frames 40
"""

import argparse
import math

from zakofdm import otfs_modem
from zakofdm.dd_core import DDGrid
from zakofdm.link_mcs import MCS_TABLE, ChannelSpec, OTFSLink, run_link

CELLS = ((0.0, 800.0), (4.7e-6, 2000.0), (0.0, 0.0), (4.7e-6, 0.0))


def period_rule(period: int, eps: float = 1e-3) -> float:
    return -math.log(eps) / (math.pi * (period / 2) ** 2)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--frames", type=int, default=40)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--nu-p-khz", type=float, nargs="+", default=[8.0, 14.0, 24.0])
    ap.add_argument("--mcs", type=int, nargs="+", default=[2, 3, 4, 5])
    a = ap.parse_args()

    print("tau_us nu_hz nu_p_khz M N mode alpha_tau alpha_nu bler_per_mcs")
    for tau, nu in CELLS:
        for nu_p in a.nu_p_khz:
            g = DDGrid.from_bandwidth(168e3, 1e-3, nu_p * 1e3)
            if not otfs_modem.crystallization_check(tau, 2 * nu, g):
                continue
            lay = otfs_modem.build_layout(g, tau, "narrow")
            for mode, (at, an) in (("fixed", (0.1, 0.1)), ("rule", (period_rule(g.M), period_rule(g.N)))):
                blers = []
                for m in a.mcs:
                    cfg = otfs_modem.OTFSConfig(g, lay, -5.0, MCS_TABLE[m], at, an, "frame")
                    r = run_link("otfs", OTFSLink(cfg), ChannelSpec(tau, nu, 12.0), a.frames, a.seed)
                    blers.append(f"m{m}:{r.bler:.2f}")
                print(f"{tau * 1e6:g} {nu:g} {g.nu_p / 1e3:.3f} {g.M} {g.N} {mode} {at:.4f} {an:.4f} {' '.join(blers)}", flush=True)


if __name__ == "__main__":
    main()
