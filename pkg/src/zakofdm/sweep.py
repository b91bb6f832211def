"""Per-cell configuration search over a (tau_max, nu_max) grid for both waveforms."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from . import ofdm_modem, otfs_modem
from .dd_core import DDGrid
from .link_mcs import MCS_TABLE, ChannelSpec, LinkConfigError, LinkResult, OFDMLink, OTFSLink, run_link

log = logging.getLogger(__name__)

WAVEFORMS = ("otfs", "ofdm")
SEARCH_MODES = ("exact", "pruned")
CSV_COLUMNS = (
    "tau_max_us",
    "nu_max_hz",
    "se_otfs",
    "se_ofdm",
    "ratio",
    "otfs_infeasible",
    "ofdm_infeasible",
    "best_otfs_config",
    "best_ofdm_config",
    "otfs_bler",
    "otfs_bler_lo",
    "otfs_bler_hi",
    "ofdm_bler",
    "ofdm_bler_lo",
    "ofdm_bler_hi",
    "otfs_evaluated",
    "ofdm_evaluated",
)


class SweepConfigError(ValueError):
    pass


def _eng(x: float) -> float:
    # drop unit-conversion rounding so 1.17e-6 s prints as 1.17 us
    return float(f"{x:.12g}")


@dataclass(frozen=True)
class OTFSSearch:
    nu_p: tuple[float, ...] = (1e3, 2e3, 4e3, 6e3, 8e3, 12e3, 14e3, 24e3)
    pdr_db: tuple[float, ...] = (-15.0, -10.0, -5.0, 0.0)
    layouts: tuple[str, ...] = ("narrow", "medium", "wide")
    mcs: tuple[int, ...] = tuple(range(len(MCS_TABLE)))
    alpha: float = 0.1
    tail: int = 0
    pdr_mode: str = "frame"
    est_threshold: float = 4.0


@dataclass(frozen=True)
class OFDMSearch:
    delta_f: tuple[float, ...] = (15e3, 30e3, 60e3)
    boost_db: tuple[float, ...] = (-6.0, -4.0, -2.0, 0.0, 2.0, 4.0, 6.0)
    dmrs: tuple[int, ...] = (1, 2, 3, 4)
    mcs: tuple[int, ...] = tuple(range(len(MCS_TABLE)))
    critical: bool = False


@dataclass(frozen=True)
class SweepSpec:
    tau_max_list: tuple[float, ...] = (0.0, 1.17e-6, 4.7e-6)
    nu_max_list: tuple[float, ...] = (0.0, 800.0, 2000.0)
    snr_db: float = 12.0
    duration: float = 1e-3
    bw_otfs: float = 168e3
    bw_ofdm: float = 180e3
    otfs_search: OTFSSearch = field(default_factory=OTFSSearch)
    ofdm_search: OFDMSearch = field(default_factory=OFDMSearch)
    n_frames: int = 200
    seed: int = 0
    bler_gate: float = 0.1
    doppler_model: str = "jakes"
    search: str = "pruned"

    def __post_init__(self):
        lists = {
            "tau_max_list": self.tau_max_list,
            "nu_max_list": self.nu_max_list,
            "otfs nu_p": self.otfs_search.nu_p,
            "otfs pdr_db": self.otfs_search.pdr_db,
            "otfs layouts": self.otfs_search.layouts,
            "otfs mcs": self.otfs_search.mcs,
            "ofdm delta_f": self.ofdm_search.delta_f,
            "ofdm boost_db": self.ofdm_search.boost_db,
            "ofdm dmrs": self.ofdm_search.dmrs,
            "ofdm mcs": self.ofdm_search.mcs,
        }
        for name, values in lists.items():
            if len(values) == 0:
                raise SweepConfigError(f"{name} must not be empty")
        if not 0 < self.bler_gate < 1:
            raise SweepConfigError(f"bler_gate must lie in (0, 1), got {self.bler_gate}")
        if self.n_frames < 1:
            raise SweepConfigError("n_frames must be positive")
        if self.search not in SEARCH_MODES:
            raise SweepConfigError(f"search must be one of {SEARCH_MODES}")
        if any(t < 0 for t in self.tau_max_list) or any(v < 0 for v in self.nu_max_list):
            raise SweepConfigError("spreads must be non-negative")
        bad = [m for m in (*self.otfs_search.mcs, *self.ofdm_search.mcs) if not 0 <= m < len(MCS_TABLE)]
        if bad:
            raise SweepConfigError(f"unknown MCS ids {bad}")
        unknown = set(self.otfs_search.layouts) - set(otfs_modem.VARIANT_WIDTH)
        if unknown:
            raise SweepConfigError(f"unknown layout variants {sorted(unknown)}")

    @classmethod
    def desk(cls) -> "SweepSpec":
        return cls()

    @classmethod
    def paper(cls) -> "SweepSpec":
        return cls(
            tau_max_list=(0.0, 1.17e-6, 2.34e-6, 4.16e-6, 4.7e-6),
            nu_max_list=(0.0, 100.0, 400.0, 800.0, 1200.0, 1600.0, 2000.0),
            bw_otfs=672e3,
            bw_ofdm=720e3,
            otfs_search=OTFSSearch(pdr_db=(-15.0, -10.0, -5.0, 0.0, 5.0, 10.0, 15.0)),
        )

    def with_overrides(self, **kw) -> "SweepSpec":
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw)

    # config files use engineering units so every number reads as written
    def to_dict(self) -> dict:
        o, f = self.otfs_search, self.ofdm_search
        return {
            "tau_max_us": [_eng(t * 1e6) for t in self.tau_max_list],
            "nu_max_hz": list(self.nu_max_list),
            "snr_db": self.snr_db,
            "duration_ms": _eng(self.duration * 1e3),
            "bw_otfs_khz": _eng(self.bw_otfs / 1e3),
            "bw_ofdm_khz": _eng(self.bw_ofdm / 1e3),
            "n_frames": self.n_frames,
            "seed": self.seed,
            "bler_gate": self.bler_gate,
            "doppler_model": self.doppler_model,
            "search": self.search,
            "otfs": {
                "nu_p_khz": [_eng(v / 1e3) for v in o.nu_p],
                "pdr_db": list(o.pdr_db),
                "layouts": list(o.layouts),
                "mcs": list(o.mcs),
                "alpha": o.alpha,
                "tail": o.tail,
                "pdr_mode": o.pdr_mode,
                "est_threshold": o.est_threshold,
            },
            "ofdm": {
                "delta_f_khz": [_eng(v / 1e3) for v in f.delta_f],
                "boost_db": list(f.boost_db),
                "dmrs": list(f.dmrs),
                "mcs": list(f.mcs),
                "critical": f.critical,
            },
        }

    @classmethod
    def from_dict(cls, d: dict, base: "SweepSpec | None" = None) -> "SweepSpec":
        """Missing keys fall back to ``base`` (desk defaults when ``None``)."""
        base = base or cls.desk()
        known = {
            "tau_max_us", "nu_max_hz", "snr_db", "duration_ms", "bw_otfs_khz", "bw_ofdm_khz",
            "n_frames", "seed", "bler_gate", "doppler_model", "search", "otfs", "ofdm", "scale",
        }
        unknown = set(d) - known
        if unknown:
            raise SweepConfigError(f"unknown config keys {sorted(unknown)}")

        def floats(key, scale=1.0, src=d):
            try:
                return tuple(float(v) * scale for v in src[key])
            except (TypeError, ValueError) as e:
                raise SweepConfigError(f"{key}: {e}") from None

        try:
            o_in, f_in = d.get("otfs", {}) or {}, d.get("ofdm", {}) or {}
            o = base.otfs_search
            o = replace(
                o,
                nu_p=floats("nu_p_khz", 1e3, o_in) if "nu_p_khz" in o_in else o.nu_p,
                pdr_db=floats("pdr_db", src=o_in) if "pdr_db" in o_in else o.pdr_db,
                layouts=tuple(o_in.get("layouts", o.layouts)),
                mcs=tuple(int(m) for m in o_in.get("mcs", o.mcs)),
                alpha=float(o_in.get("alpha", o.alpha)),
                tail=int(o_in.get("tail", o.tail)),
                pdr_mode=str(o_in.get("pdr_mode", o.pdr_mode)),
                est_threshold=float(o_in.get("est_threshold", o.est_threshold)),
            )
            f = base.ofdm_search
            f = replace(
                f,
                delta_f=floats("delta_f_khz", 1e3, f_in) if "delta_f_khz" in f_in else f.delta_f,
                boost_db=floats("boost_db", src=f_in) if "boost_db" in f_in else f.boost_db,
                dmrs=tuple(int(v) for v in f_in.get("dmrs", f.dmrs)),
                mcs=tuple(int(m) for m in f_in.get("mcs", f.mcs)),
                critical=bool(f_in.get("critical", f.critical)),
            )
            return replace(
                base,
                tau_max_list=floats("tau_max_us", 1e-6) if "tau_max_us" in d else base.tau_max_list,
                nu_max_list=floats("nu_max_hz") if "nu_max_hz" in d else base.nu_max_list,
                snr_db=float(d.get("snr_db", base.snr_db)),
                duration=float(d["duration_ms"]) * 1e-3 if "duration_ms" in d else base.duration,
                bw_otfs=float(d["bw_otfs_khz"]) * 1e3 if "bw_otfs_khz" in d else base.bw_otfs,
                bw_ofdm=float(d["bw_ofdm_khz"]) * 1e3 if "bw_ofdm_khz" in d else base.bw_ofdm,
                n_frames=int(d.get("n_frames", base.n_frames)),
                seed=int(d.get("seed", base.seed)),
                bler_gate=float(d.get("bler_gate", base.bler_gate)),
                doppler_model=str(d.get("doppler_model", base.doppler_model)),
                search=str(d.get("search", base.search)),
                otfs_search=o,
                ofdm_search=f,
            )
        except (TypeError, ValueError) as e:
            if isinstance(e, SweepConfigError):
                raise
            raise SweepConfigError(str(e)) from None

    @classmethod
    def from_yaml(cls, path: str | Path, paper_scale: bool = False) -> "SweepSpec":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise SweepConfigError(f"cannot read {path}: {e}") from None
        try:
            d = yaml.safe_load(text) or {}
        except yaml.YAMLError as e:
            raise SweepConfigError(f"{path}: {e}") from None
        if not isinstance(d, dict):
            raise SweepConfigError(f"{path}: top level must be a mapping")
        scale = d.get("scale", "paper" if paper_scale else "desk")
        if paper_scale:
            scale = "paper"
        if scale not in ("desk", "paper"):
            raise SweepConfigError(f"scale must be desk or paper, got {scale!r}")
        base = cls.paper() if scale == "paper" else cls.desk()
        return cls.from_dict(d, base)


def doppler_spread(nu_max: float) -> float:
    """Two-sided Doppler spread of a symmetric (Jakes or +/- max) spectrum."""
    return 2.0 * nu_max


def otfs_candidates(spec: SweepSpec, tau_max: float, nu_max: float) -> list[OTFSLink]:
    s = spec.otfs_search
    out = []
    for nu_p in s.nu_p:
        try:
            grid = DDGrid.from_bandwidth(spec.bw_otfs, spec.duration, nu_p)
        except ValueError as e:
            log.debug("skip nu_p=%g: %s", nu_p, e)
            continue
        if not otfs_modem.crystallization_check(tau_max, doppler_spread(nu_max), grid):
            log.debug("skip nu_p=%g: not crystallized for (%g, %g)", grid.nu_p, tau_max, nu_max)
            continue
        for variant in s.layouts:
            try:
                layout = otfs_modem.build_layout(grid, tau_max, variant, tail=s.tail)
            except otfs_modem.InfeasibleLayoutError as e:
                log.debug("skip: %s", e)
                continue
            for pdr in s.pdr_db:
                for m in s.mcs:
                    cfg = otfs_modem.OTFSConfig(
                        grid, layout, pdr, MCS_TABLE[m], s.alpha, s.alpha, s.pdr_mode
                    )
                    out.append(OTFSLink(cfg, est_threshold=s.est_threshold))
    return out


def ofdm_candidates(spec: SweepSpec, tau_max: float, nu_max: float) -> list[OFDMLink]:
    s = spec.ofdm_search
    out = []
    for df in s.delta_f:
        for count in s.dmrs:
            for boost in s.boost_db:
                for m in s.mcs:
                    try:
                        cfg = ofdm_modem.OFDMConfig.nr(
                            spec.bw_ofdm, spec.duration, df, count, boost, MCS_TABLE[m], critical=s.critical
                        )
                    except ofdm_modem.ConfigError as e:
                        log.debug("skip ofdm df=%g dmrs=%d: %s", df, count, e)
                        continue
                    out.append(OFDMLink(cfg, spec.duration))
    return out


def cell_seed(spec: SweepSpec, tau_max: float, nu_max: float) -> int:
    """Seed shared by both waveforms and all candidates of a cell."""
    ss = np.random.SeedSequence([spec.seed, round(tau_max * 1e12), round(nu_max * 1e3)])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def describe(config: dict) -> str:
    return ";".join(f"{k}={_fmt(v) if isinstance(v, float) else v}" for k, v in config.items())


@dataclass(frozen=True)
class CellOutcome:
    waveform: str
    best: LinkResult | None
    candidates: int
    evaluated: int

    @property
    def se(self) -> float:
        return self.best.effective_se if self.best is not None else 0.0

    @property
    def infeasible(self) -> bool:
        return self.best is None


def _potential(link) -> float:
    from .link_mcs import info_bits_for

    k = info_bits_for(link)
    return k / link.resource if k > 0 else 0.0


def optimize_cell(spec: SweepSpec, tau_max: float, nu_max: float, waveform: str) -> CellOutcome:
    """Highest effective SE over the waveform's search set at one grid cell.

    ``search="exact"`` visits candidates in decreasing potential SE; the first
    one that clears the BLER gate is the argmax because effective SE equals
    potential SE whenever the gate is met. ``search="pruned"`` also assumes
    BLER grows with MCS index inside one (non-MCS) configuration.
    """
    if waveform not in WAVEFORMS:
        raise SweepConfigError(f"unknown waveform {waveform!r}")
    cands = otfs_candidates(spec, tau_max, nu_max) if waveform == "otfs" else ofdm_candidates(spec, tau_max, nu_max)
    channel = ChannelSpec(tau_max, nu_max, spec.snr_db, doppler_model=spec.doppler_model)
    seed = cell_seed(spec, tau_max, nu_max)
    pot = [_potential(c) for c in cands]
    evaluated = 0

    def evaluate(link) -> LinkResult | None:
        nonlocal evaluated
        evaluated += 1
        try:
            return run_link(waveform, link, channel, spec.n_frames, seed, spec.bler_gate, stop_on_fail=True)
        except LinkConfigError as e:
            log.debug("skip candidate: %s", e)
            return None

    best: LinkResult | None = None
    if spec.search == "exact":
        order = sorted((i for i in range(len(cands)) if pot[i] > 0), key=lambda i: (-pot[i], i))
        for i in order:
            res = evaluate(cands[i])
            if res is not None and res.feasible:
                best = res
                break
    else:
        groups: dict[tuple, list[int]] = {}
        for i, c in enumerate(cands):
            key = tuple((k, v) for k, v in c.describe().items() if k != "mcs")
            groups.setdefault(key, []).append(i)
        for idx in groups.values():
            for i in sorted(idx, key=lambda i: (pot[i], i)):
                if pot[i] <= 0 or (best is not None and pot[i] <= best.effective_se):
                    continue
                res = evaluate(cands[i])
                if res is None or not res.feasible:
                    break
                best = res
    log.info(
        "%s tau=%.3gus nu=%gHz: se=%.4g after %d/%d candidates",
        waveform, tau_max * 1e6, nu_max, best.effective_se if best else 0.0, evaluated, len(cands),
    )
    return CellOutcome(waveform, best, len(cands), evaluated)


@dataclass(frozen=True)
class CellRecord:
    tau_max: float
    nu_max: float
    otfs: CellOutcome
    ofdm: CellOutcome

    @property
    def ratio(self) -> float:
        if self.ofdm.se > 0:
            return self.otfs.se / self.ofdm.se
        return math.inf if self.otfs.se > 0 else math.nan


@dataclass(frozen=True)
class SweepResult:
    spec: SweepSpec
    cells: tuple[CellRecord, ...]

    def cell(self, tau_max: float, nu_max: float) -> CellRecord:
        for c in self.cells:
            if math.isclose(c.tau_max, tau_max, abs_tol=1e-12) and math.isclose(c.nu_max, nu_max, abs_tol=1e-9):
                return c
        raise KeyError((tau_max, nu_max))


def _task(args) -> CellOutcome:
    spec, tau, nu, wf = args
    return optimize_cell(spec, tau, nu, wf)


def run_sweep(spec: SweepSpec, threads: int = 1) -> SweepResult:
    """Every (cell, waveform) is an independent task with its own seed, so the
    result does not depend on ``threads`` or scheduling order."""
    tasks = [(spec, tau, nu, wf) for tau in spec.tau_max_list for nu in spec.nu_max_list for wf in WAVEFORMS]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            outcomes = list(ex.map(_task, tasks))
    else:
        outcomes = [_task(t) for t in tasks]
    cells = []
    for j in range(0, len(tasks), 2):
        _, tau, nu, _ = tasks[j]
        cells.append(CellRecord(tau, nu, outcomes[j], outcomes[j + 1]))
    return SweepResult(spec, tuple(cells))


def _fmt(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    s = f"{x:.6g}"
    return "0" if s == "-0" else s


def _bler_fields(o: CellOutcome) -> list[str]:
    if o.best is None:
        return ["", "", ""]
    lo, hi = o.best.bler_ci
    return [_fmt(o.best.bler), _fmt(lo), _fmt(hi)]


def to_csv(result: SweepResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for c in result.cells:
        w.writerow(
            [
                _fmt(c.tau_max * 1e6),
                _fmt(c.nu_max),
                _fmt(c.otfs.se),
                _fmt(c.ofdm.se),
                _fmt(c.ratio),
                str(c.otfs.infeasible).lower(),
                str(c.ofdm.infeasible).lower(),
                describe(c.otfs.best.config) if c.otfs.best else "",
                describe(c.ofdm.best.config) if c.ofdm.best else "",
                *_bler_fields(c.otfs),
                *_bler_fields(c.ofdm),
                str(c.otfs.evaluated),
                str(c.ofdm.evaluated),
            ]
        )
    return buf.getvalue()


def metadata(spec: SweepSpec) -> dict:
    """Run description written next to the CSV: spec plus snapped numerology."""
    snapped = []
    for nu_p in spec.otfs_search.nu_p:
        try:
            g = DDGrid.from_bandwidth(spec.bw_otfs, spec.duration, nu_p)
        except ValueError as e:
            snapped.append({"nu_p_requested_hz": nu_p, "error": str(e)})
            continue
        snapped.append({"nu_p_requested_hz": nu_p, "nu_p_hz": g.nu_p, "M": g.M, "N": g.N})
    return {
        "spec": spec.to_dict(),
        "otfs_numerology": snapped,
        "dmrs_interpretation": "dmrs = DMRS symbols per 14-symbol slot at positions "
        + json.dumps({k: list(v) for k, v in ofdm_modem.DMRS_POSITIONS.items()}),
        "crystallization": "nu_p > 2 nu_max and tau_p > tau_max",
        "ratio_sentinel": "inf when only OFDM is infeasible, nan when both are",
        "csv_columns": list(CSV_COLUMNS),
    }


def write_outputs(result: SweepResult, out: str | Path) -> Path:
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8", newline="") as fh:
        fh.write(to_csv(result))
    meta = out.with_name(out.name + ".meta.json")
    meta.write_text(json.dumps(metadata(result.spec), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return out
