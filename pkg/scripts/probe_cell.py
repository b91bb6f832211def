"""Genie versus estimated channel BLER for OTFS at one cell.

Both receivers see the same frames; the genie uses the true effective DD
filter, the other the point-pilot estimate. Separates estimation loss from
channel-limited loss.

    python scripts/probe_cell.py --tau-us 4.7 --nu-hz 2000 --nu-p-khz 6 8 --mcs 2 3 4
"""

import argparse

import numpy as np

from zakofdm import ldpc, otfs_modem
from zakofdm.channel import NoiseSpec, add_awgn, apply_dd_channel, effective_dd_filter, noise_variance
from zakofdm.dd_core import DDGrid, forward_zak
from zakofdm.link_mcs import MCS_TABLE, ChannelSpec, OTFSLink, frame_streams, info_bits_for, interleaver
from zakofdm.qam import qam_demap, qam_map


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--tau-us", type=float, default=4.7)
    ap.add_argument("--nu-hz", type=float, default=2000.0)
    ap.add_argument("--snr-db", type=float, default=12.0)
    ap.add_argument("--bw-khz", type=float, default=168.0)
    ap.add_argument("--nu-p-khz", type=float, nargs="+", default=[6.0, 8.0])
    ap.add_argument("--mcs", type=int, nargs="+", default=[2, 3, 4])
    ap.add_argument("--pdr-db", type=float, default=-5.0)
    ap.add_argument("--alpha", type=float, default=0.1)
    ap.add_argument("--frames", type=int, default=60)
    ap.add_argument("--seed", type=int, default=1)
    a = ap.parse_args()

    tau, nu, alpha = a.tau_us * 1e-6, a.nu_hz, a.alpha
    ch = ChannelSpec(tau, nu, a.snr_db)
    s2 = noise_variance(a.snr_db)
    print("nu_p_khz M N mcs bler_est bler_genie")
    for nu_p in a.nu_p_khz:
        g = DDGrid.from_bandwidth(a.bw_khz * 1e3, 1e-3, nu_p * 1e3)
        lay = otfs_modem.build_layout(g, tau, "narrow")
        l_min, l_max = otfs_modem.full_doppler_window(g)
        for m in a.mcs:
            mcs = MCS_TABLE[m]
            cfg = otfs_modem.OTFSConfig(g, lay, a.pdr_db, mcs, alpha, alpha, "frame")
            link = OTFSLink(cfg)
            a_p, a_d = cfg.amplitudes()
            k = info_bits_for(link)
            errs = {"est": 0, "genie": 0}
            for f in range(a.frames):
                ch_rng, data_rng, noise_seed = frame_streams(a.seed, f)
                paths = ch.draw(ch_rng)
                u = data_rng.integers(0, 2, k, dtype=np.uint8)
                c = ldpc.encode(u, mcs.code_rate, link.n_coded)
                perm = interleaver(c.size)
                s = otfs_modem.modulate(cfg, qam_map(c[perm], mcs.bits_per_symbol))
                Y = forward_zak(add_awgn(apply_dd_channel(s, g, paths, alpha, alpha), NoiseSpec(a.snr_db, noise_seed)), g)
                filters = {
                    "est": otfs_modem.estimate_channel(
                        Y, lay, a_p, lay.strip[1], l_max, k_min=lay.strip[0], threshold=4 * s2 / a_p**2, l_min=l_min
                    ),
                    "genie": effective_dd_filter(paths, g, alpha, alpha),
                }
                for name, h in filters.items():
                    eq = otfs_modem.lsmr_equalize(Y, h, lay, s2, pilot_amplitude=a_p, data_amplitude=a_d)
                    x_u, sinr = otfs_modem.unbias(eq.symbols)
                    llr = np.empty(c.size)
                    llr[perm] = qam_demap(x_u, sinr, mcs.bits_per_symbol)
                    u_hat, ok = ldpc.decode(llr, mcs.code_rate)
                    errs[name] += int(not ok or not np.array_equal(u_hat, u))
            print(f"{g.nu_p / 1e3:.3f} {g.M} {g.N} {m} {errs['est'] / a.frames:.3f} {errs['genie'] / a.frames:.3f}", flush=True)


if __name__ == "__main__":
    main()
