import json
import math
from pathlib import Path

import numpy as np
import pytest

from imaxent.mixtures import mixture
from imaxent.reference import save_reference
from imaxent.simulate import (PitHistogram, SimConfig, SimResult, draws_csv, emit, json_text,
                              load_result, pit_hist_csv, pit_marginal_histogram, replicate_pits,
                              run_simulation, summary_csv)

DATA = Path(__file__).parent / "data"


def _small_result():
    cfg = SimConfig(density_id=1, n=10, replications=3, methods=("ad", "ns2"), histograms=False)
    draws = {"ad": np.array([0.5, 0.25, 1.0]), "ns2": np.array([0.75, np.nan, 0.125])}
    edges = {"ad": np.array([False, True, False]), "ns2": np.array([False, False, False])}
    h = PitHistogram(b=0.5, edges=np.linspace(0, 1, 5), density=np.array([0.5, 1.5, 1.5, 0.5]),
                     ref_density=np.array([0.75, 1.25, 1.25, 0.75]), pooled_m2=0.0625)
    return SimResult(config=cfg, draws=draws, edge_flags=edges, histograms={"ad": h})


def test_config_validation():
    assert SimConfig(1, 10, methods=("ns:2", "cvm:0:0.001")).methods == ("ns2", "ad")
    for kwargs in (dict(density_id=7), dict(n=1), dict(replications=0), dict(workers=0),
                   dict(methods=("ad", "ad:0.001")), dict(methods=("bogus",)),
                   dict(kernel="triangle")):
        base = dict(density_id=1, n=10)
        base.update(kwargs)
        with pytest.raises(ValueError):
            SimConfig(**base)


def test_single_replication_is_deterministic():
    cfg = SimConfig(2, 12, replications=1, methods=("ad", "ns2"), master_seed=5)
    a, b = run_simulation(cfg), run_simulation(cfg)
    assert json_text(a) == json_text(b)
    assert all(a.draws[m].size == 1 for m in cfg.methods)


def test_worker_count_invariance():
    base = dict(density_id=4, n=15, replications=25, methods=("ad", "ns4"), master_seed=9)
    one = run_simulation(SimConfig(workers=1, **base))
    four = run_simulation(SimConfig(workers=4, **base))
    for fn in (summary_csv, draws_csv, pit_hist_csv):
        assert fn(one) == fn(four)


def test_seed_changes_draws():
    a = run_simulation(SimConfig(1, 10, replications=5, methods=("ad",), master_seed=1,
                                 histograms=False))
    b = run_simulation(SimConfig(1, 10, replications=5, methods=("ad",), master_seed=2,
                                 histograms=False))
    assert not np.array_equal(a.draws["ad"], b.draws["ad"])


def test_summary_invariants():
    res = run_simulation(SimConfig(6, 20, replications=30, methods=("ad", "ns2", "m2")))
    for s in res.summary():
        assert s.count + s.failures == 30
        assert np.all(np.diff(s.quantiles) >= 0)
        assert s.quantiles[0] <= s.mean <= s.quantiles[-1]
    assert res.summary()[2].sd == pytest.approx(np.std(res.draws["m2"], ddof=1))


def test_empty_method_list_gives_header_only_csv(tmp_path):
    res = run_simulation(SimConfig(1, 10, replications=2, methods=()))
    paths = emit(res, "csv", tmp_path)
    assert [p.name for p in paths] == ["summary.csv", "draws.csv", "pit_hist.csv"]
    for p in paths:
        assert len(p.read_text().splitlines()) == 1


def test_golden_files(tmp_path):
    emit(_small_result(), "csv", tmp_path)
    for name in ("summary", "draws", "pit_hist"):
        assert (tmp_path / f"{name}.csv").read_bytes() == (DATA / f"golden_{name}.csv").read_bytes()


def test_json_round_trip(tmp_path):
    res = run_simulation(SimConfig(3, 12, replications=4, methods=("ad", "cvm:1:0.001")))
    p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
    emit(res, "json", p1)
    again = load_result(p1)
    emit(again, "json", p2)
    assert p1.read_bytes() == p2.read_bytes()
    assert summary_csv(again) == summary_csv(res)
    # failures survive as null
    emit(_small_result(), "json", p1)
    assert json.loads(p1.read_text())["draws"]["ns2"][1] is None
    assert math.isnan(load_result(p1).draws["ns2"][1])


def test_emit_errors(tmp_path):
    with pytest.raises(ValueError, match="format"):
        emit(_small_result(), "xml", tmp_path / "x")
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError):
        emit(_small_result(), "csv", blocker)


def test_missing_reference_path_raises(tmp_path):
    cfg = SimConfig(1, 10, replications=1, ref_source=str(tmp_path / "nope.json"))
    with pytest.raises(FileNotFoundError):
        run_simulation(cfg)


def test_reference_path_n_mismatch(tmp_path, ref100):
    path = save_reference(ref100, tmp_path / "ref.json")
    with pytest.raises(ValueError, match="n=100"):
        run_simulation(SimConfig(1, 10, replications=1, ref_source=str(path)))
    res = run_simulation(SimConfig(1, 100, replications=1, methods=("ad",), ref_source=str(path),
                                   histograms=False))
    assert math.isfinite(res.draws["ad"][0])


def test_histogram_huge_bandwidth_concentrates_at_half(ref100):
    pits = replicate_pits(mixture(1), 100, 1e8, 100, seed=0)
    h = pit_marginal_histogram(pits, ref100)
    # 1/2 is a bin edge for 50 bins, so the mass sits in the two bins touching it
    mass = h.density * np.diff(h.edges)
    assert mass[24] + mass[25] == pytest.approx(1.0)
    assert h.edges[25] == 0.5
    assert h.density.size == 50 and h.ref_density.size == 50
    assert np.sum(h.ref_density * np.diff(h.edges)) == pytest.approx(1.0, abs=1e-9)


def test_histogram_second_moment_straddles_reference(ref100):
    # Var V_1 falls with b: the KDFE min-MISE bandwidth 0.3147 lies below the
    # m2-matching bandwidth (about 0.53), so its PITs are more dispersed than l_n
    c = pit_marginal_histogram(replicate_pits(mixture(1), 100, 0.3147, 100, seed=0), ref100)
    wide = pit_marginal_histogram(replicate_pits(mixture(1), 100, 1.0, 100, seed=0), ref100)
    assert c.pooled_m2 > ref100.central_moments[2] > wide.pooled_m2


def test_histogram_at_median_ad_bandwidth_is_closer_to_reference(ref100):
    # 0.4712 is the reported median AD bandwidth, 0.3147 the min-MISE KDFE bandwidth
    ad = pit_marginal_histogram(replicate_pits(mixture(1), 100, 0.4712, 100, seed=0), ref100)
    c = pit_marginal_histogram(replicate_pits(mixture(1), 100, 0.3147, 100, seed=0), ref100)
    assert ad.sup_distance() < c.sup_distance()


def test_histogram_errors():
    with pytest.raises(ValueError):
        pit_marginal_histogram([])
    pits = replicate_pits(mixture(1), 10, 0.5, 2, seed=0) + replicate_pits(mixture(1), 10, 0.7, 2, 0)
    with pytest.raises(ValueError, match="different"):
        pit_marginal_histogram(pits)
    with pytest.raises(ValueError, match="overlay"):
        pit_marginal_histogram(pits[:2]).sup_distance()


def test_simulation_histograms_use_median_bandwidth():
    res = run_simulation(SimConfig(1, 10, replications=11, methods=("ad",)))
    h = res.histograms["ad"]
    assert h.b == pytest.approx(float(np.median(res.draws["ad"])))
    assert h.ref_density is not None
