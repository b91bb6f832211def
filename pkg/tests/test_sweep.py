import math
from dataclasses import replace

import pytest
import yaml

from zakofdm.sweep import (
    CSV_COLUMNS,
    OFDMSearch,
    OTFSSearch,
    SweepConfigError,
    SweepSpec,
    doppler_spread,
    ofdm_candidates,
    optimize_cell,
    otfs_candidates,
    run_sweep,
    to_csv,
    write_outputs,
)


def test_spec_validation():
    with pytest.raises(SweepConfigError):
        SweepSpec(tau_max_list=())
    with pytest.raises(SweepConfigError):
        SweepSpec(bler_gate=1.0)
    with pytest.raises(SweepConfigError):
        SweepSpec(search="greedy")
    with pytest.raises(SweepConfigError):
        SweepSpec(otfs_search=OTFSSearch(mcs=(9,)))


def test_dict_round_trip():
    for spec in (SweepSpec.desk(), SweepSpec.paper()):
        again = SweepSpec.from_dict(spec.to_dict(), spec)
        assert again.to_dict() == spec.to_dict()


def test_yaml_loading(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("tau_max_us: [1.17]\nnu_max_hz: [100]\notfs:\n  pdr_db: [0]\n")
    spec = SweepSpec.from_yaml(p)
    assert spec.tau_max_list == pytest.approx((1.17e-6,))
    assert spec.otfs_search.pdr_db == (0.0,)
    assert spec.bw_otfs == 168e3
    assert SweepSpec.from_yaml(p, paper_scale=True).bw_otfs == 672e3


@pytest.mark.parametrize("text", ["bogus: 1\n", "- 1\n", "tau_max_us: [a]\n", "n_frames: 0\n", "x: [\n"])
def test_yaml_errors(tmp_path, text):
    p = tmp_path / "bad.yaml"
    p.write_text(text)
    with pytest.raises(SweepConfigError):
        SweepSpec.from_yaml(p)


def test_crystallization_filters_candidates():
    spec = SweepSpec.desk()
    nu_ps = {c.cfg.grid.nu_p for c in otfs_candidates(spec, 4.7e-6, 2000.0)}
    assert nu_ps and min(nu_ps) > doppler_spread(2000.0)
    assert all(c.cfg.grid.tau_p > 4.7e-6 for c in otfs_candidates(spec, 4.7e-6, 2000.0))


def test_candidate_counts():
    spec = SweepSpec.desk()
    assert len(ofdm_candidates(spec, 0.0, 0.0)) == 3 * 4 * 7 * 9


def test_single_candidate_search(tiny_spec):
    spec = replace(
        tiny_spec,
        otfs_search=replace(tiny_spec.otfs_search, mcs=(1,)),
        ofdm_search=replace(tiny_spec.ofdm_search, mcs=(1,)),
    )
    for wf in ("otfs", "ofdm"):
        out = optimize_cell(spec, 0.0, 0.0, wf)
        assert out.candidates == 1 and out.evaluated == 1
        assert out.best.config["mcs"] == 1


def test_exact_and_pruned_agree(tiny_spec):
    for wf in ("otfs", "ofdm"):
        a = optimize_cell(replace(tiny_spec, search="exact"), 0.0, 0.0, wf)
        b = optimize_cell(replace(tiny_spec, search="pruned"), 0.0, 0.0, wf)
        assert a.se == b.se


def test_dominated_candidate_never_changes_max(tiny_spec):
    base = optimize_cell(tiny_spec, 0.0, 0.0, "otfs").se
    more = replace(tiny_spec, otfs_search=replace(tiny_spec.otfs_search, layouts=("narrow", "wide")))
    assert optimize_cell(more, 0.0, 0.0, "otfs").se == base


def test_noiseless_one_cell_sweep(tiny_spec, tmp_path):
    res = run_sweep(replace(tiny_spec, snr_db=math.inf))
    text = to_csv(res)
    lines = text.splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert len(lines) == 2
    assert math.isfinite(res.cells[0].ratio)
    out = write_outputs(res, tmp_path / "o" / "s.csv")
    assert out.read_text() == text
    meta = yaml.safe_load((tmp_path / "o" / "s.csv.meta.json").read_text())
    assert meta["ratio_sentinel"]


def test_sweep_deterministic(tiny_spec):
    assert to_csv(run_sweep(tiny_spec)) == to_csv(run_sweep(tiny_spec))


def test_threads_do_not_change_output(tiny_spec):
    spec = replace(tiny_spec, nu_max_list=(0.0, 500.0))
    assert to_csv(run_sweep(spec, threads=1)) == to_csv(run_sweep(spec, threads=2))


def test_permuting_grid_permutes_rows(tiny_spec):
    a = replace(tiny_spec, nu_max_list=(0.0, 500.0))
    b = replace(tiny_spec, nu_max_list=(500.0, 0.0))
    ra, rb = to_csv(run_sweep(a)).splitlines(), to_csv(run_sweep(b)).splitlines()
    assert ra[0] == rb[0] and sorted(ra[1:]) == sorted(rb[1:]) and ra[1:] != rb[1:]


def test_infeasible_sentinels(tiny_spec):
    res = run_sweep(replace(tiny_spec, snr_db=-20.0))
    c = res.cells[0]
    assert c.otfs.infeasible and c.ofdm.infeasible and math.isnan(c.ratio)
    row = to_csv(res).splitlines()[1].split(",")
    assert row[4] == "nan" and row[5] == row[6] == "true"
