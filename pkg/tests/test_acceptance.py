"""Acceptance criteria 1-12, each at its stated tolerance.

Every test reports one PASS/FAIL line (also repeated in the terminal summary).
Criteria 9 and 10 share one sweep at fraction 0.3; both take a few minutes.
"""

import datetime as dt
import itertools
import math
import time

import numpy as np
import pytest
from brute_force import eps_nondominated, pareto_nondominated
from conftest import TEN_DAY_INFLOW
from ten_day_expected import (
    DEMAND_FIRST_OBJECTIVES,
    DEMAND_FIRST_ROWS,
    MEF_FIRST_OBJECTIVES,
    MEF_FIRST_ROWS,
)

from resopt import cli, fixtures
from resopt.analysis import (
    hypervolume,
    hypervolume_exact,
    hypervolume_mc,
    lower_median,
    pareto_filter,
    sensitivity_sweep,
)
from resopt.hydroseries import DailySeries, annual_totals, monthly_totals, water_year_day
from resopt.moea import EpsilonArchive, Individual, Problem, RunConfig, evolve
from resopt.objectives import EvalConfig, objectives_of_trace
from resopt.reservoir import Formulation, PolicyParams, ReservoirConfig, simulate
from resopt.synthgen import GenConfig, fit, generate
from resopt.thresholds import FloodThreshold, MefSchedule, flood_threshold, moefcc, percent_of_maf

MF, DF = Formulation.MEF_FIRST, Formulation.DEMAND_FIRST
EPS4 = (50.0, 50.0, 0.01, 0.01)


# --- 1. mass balance -----------------------------------------------------------

def random_simulation(rng):
    cap = rng.uniform(50, 6000)
    cfg = ReservoirConfig(
        mef=MefSchedule(rng.uniform(0, 0.05 * cap, 365), "random"),
        flood=FloodThreshold(rng.uniform(1, cap)),
        demand=rng.uniform(0, 0.05 * cap, 365),
        elevation_storage=((0.0, rng.uniform(1, 50)), (cap, rng.uniform(60, 150))),
        live_capacity=cap,
        hp_release_cap=rng.uniform(0.01, 0.1) * cap,
        max_inflow=rng.uniform(0, 0.3 * cap),
    )
    k = int(rng.integers(1, 4))
    p = PolicyParams(tuple(rng.uniform(-1, 1, k)), tuple(rng.uniform(1e-3, 1, k)))
    n = int(rng.integers(1, 1200))
    q = rng.gamma(0.5, 0.05 * cap, n) * (rng.random(n) > 0.1)
    start = dt.date(1990, 1, 1) + dt.timedelta(days=int(rng.integers(0, 5000)))
    form = MF if rng.random() < 0.5 else DF
    return cfg, DailySeries(start, q), rng.uniform(0, cap), form, p


def test_c1_mass_balance(verdict):
    rng = np.random.default_rng(1001)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        cfg, series, s0, form, p = random_simulation(rng)
        tr = simulate(series, s0, form, p, cfg)
        sq = math.fsum(series.values)
        out = math.fsum(np.concatenate([tr.efr, tr.dr, tr.hpr, tr.ewr]))
        worst = max(worst, abs(tr.storage[-1] - s0 - sq + out) / max(1.0, sq))
    secs = time.perf_counter() - t0
    verdict(1, worst <= 1e-9 and secs < 30,
            f"max relative imbalance {worst:.2e} (limit 1e-9), {secs:.1f} s (limit 30 s)")


# --- 2. ε-archive oracle ---------------------------------------------------------

def archive_points(rng, n=200):
    scale = np.array(EPS4) * rng.uniform(2, 8, 4)
    pts = rng.uniform(0, 1, (n, 4)) * scale
    pts[:, 1] = scale[1] - pts[:, 0] * scale[1] / scale[0] + rng.normal(0, EPS4[1], n)
    return pts


def test_c2_eps_archive(verdict):
    rng = np.random.default_rng(2002)
    sets = [archive_points(rng) for _ in range(100)]
    t0 = time.perf_counter()
    kept = []
    for pts in sets:
        a = EpsilonArchive(EPS4)
        for i, p in enumerate(pts):
            a.insert(Individual(np.array([float(i)]), p))
        kept.append(sorted(int(m.genome[0]) for m in a))
    secs = time.perf_counter() - t0
    mismatches = sum(k != eps_nondominated(p.tolist(), EPS4) for k, p in zip(kept, sets))
    verdict(2, mismatches == 0 and secs < 10,
            f"{mismatches}/100 sets differ from brute force, archive time {secs:.2f} s (limit 10 s)")


# --- 3. Pareto sort oracle -------------------------------------------------------

def test_c3_pareto_sort(verdict):
    rng = np.random.default_rng(3003)
    mismatches = 0
    for i in range(100):
        # half the sets sit on a coarse grid so ties and duplicates occur
        pts = rng.integers(0, 8, (200, 4)).astype(float) if i % 2 else rng.random((200, 4))
        if np.flatnonzero(pareto_filter(pts)).tolist() != pareto_nondominated(pts.tolist()):
            mismatches += 1
    verdict(3, mismatches == 0, f"{mismatches}/100 sets differ from the O(n^2) filter")


# --- 4. hypervolume --------------------------------------------------------------

def union_volume(boxes, ref):
    """Inclusion-exclusion volume of the union of boxes [p, ref]."""
    total = 0.0
    for r in range(1, len(boxes) + 1):
        for sub in itertools.combinations(boxes, r):
            total += (-1) ** (r + 1) * float(np.prod(ref - np.max(sub, axis=0)))
    return total


def test_c4_hypervolume(verdict):
    hand = [
        (hypervolume([(1, 3), (3, 1)], (4, 4)), 5.0),
        (hypervolume([(1, 1)], (2, 2)), 1.0),
        (hypervolume([(1, 2, 3)], (4, 4, 4)), 6.0),
        # two boxes of volume 8 and 3 overlapping in a box of volume 2
        (hypervolume([(1, 1, 1), (2, 0, 2)], (3, 3, 3)), 8.0 + 3.0 - 2.0),
    ]
    hand_err = max(abs(a - b) for a, b in hand)
    rng = np.random.default_rng(4004)
    z_worst = 0.0
    for _ in range(5):
        boxes = rng.uniform(0, 1, (5, 4))
        ref = np.full(4, 1.2)
        exact = union_volume(boxes, ref)
        assert hypervolume_exact(boxes, ref) == pytest.approx(exact, rel=1e-12)
        est, se = hypervolume_mc(boxes, ref)
        z_worst = max(z_worst, abs(est - exact) / se)
    verdict(4, hand_err <= 1e-12 and z_worst <= 3.0,
            f"hand cases max error {hand_err:.1e} (limit 1e-12), "
            f"4D Monte Carlo worst |z| {z_worst:.2f} (limit 3)")


# --- 5. generator statistics ---------------------------------------------------------

def test_c5_generator(verdict):
    hist = fixtures.ns_like_inflow()
    t0 = time.perf_counter()
    model = fit(hist)
    gc = GenConfig(seed=0, realizations=500, years=10)
    ens = generate(model, gc)
    same = np.array_equal(ens.flows, generate(model, gc).flows)
    _, h = monthly_totals(hist)
    s = np.vstack([monthly_totals(ens.realization(j))[1] for j in range(ens.n_realizations)])
    secs = time.perf_counter() - t0
    mean_err = np.abs(s.mean(0) / h.mean(0) - 1).max()
    sd_err = np.abs(s.std(0, ddof=1) / h.std(0, ddof=1) - 1).max()
    floor_ok = ens.flows.min() >= gc.jitter_floor
    verdict(5, mean_err <= 0.05 and sd_err <= 0.15 and floor_ok and same and secs < 120,
            f"worst monthly mean error {mean_err:.3f} (limit 0.05), sd error {sd_err:.3f} "
            f"(limit 0.15), floor {'held' if floor_ok else 'violated'}, "
            f"rerun {'identical' if same else 'differs'}, {secs:.1f} s (limit 120 s)")


# --- 6. MoEF&CC thresholds ---------------------------------------------------------------

def test_c6_moefcc(verdict):
    # year 2000 + k flows 10(k+1) + (day % 7), so 2000 is the driest and sits at rank 9/(9+1)
    values, d = [], dt.date(2000, 6, 1)
    while d < dt.date(2009, 6, 1):
        values.append(10.0 * (d.year - 2000 + (d.month >= 6)) + d.toordinal() % 7)
        d += dt.timedelta(days=1)
    sched = moefcc(DailySeries(dt.date(2000, 6, 1), values))
    band = {6: 0.30, 7: 0.30, 8: 0.30, 9: 0.30, 10: 0.25, 4: 0.25, 5: 0.25}
    expected = np.empty(365)
    d = dt.date(2000, 6, 1)
    while d < dt.date(2001, 6, 1):
        expected[water_year_day(d)] = band.get(d.month, 0.20) * (10.0 + d.toordinal() % 7)
        d += dt.timedelta(days=1)
    ok = sched.method == "moefcc:2000" and np.array_equal(sched.values, expected)
    verdict(6, ok, f"selected {sched.method}, "
                   f"{int(np.sum(sched.values != expected))} of 365 days differ from the hand schedule")


# --- 7. percent of MAF ------------------------------------------------------------------

def test_c7_percent_of_maf(verdict):
    hist = fixtures.ns_like_inflow()
    maf = math.fsum(annual_totals(hist).values()) / len(annual_totals(hist))
    errs = {f: abs(math.fsum(percent_of_maf(hist, f).values) / (f * maf) - 1)
            for f in (0.3, 0.4, 0.5, 0.6, 0.7, 0.8)}
    worst = max(errs.values())
    verdict(7, worst <= 1e-3, f"worst relative error of the annual sum {worst:.2e} (limit 1e-3)")


# --- 8. ten-day objective oracle -------------------------------------------------------------

def test_c8_ten_day(verdict, ten_day_cfg, ten_day_inflow):
    flux_err, obj_err, energy_err = 0.0, 0.0, 0.0
    for form, rows, objs in ((MF, MEF_FIRST_ROWS, MEF_FIRST_OBJECTIVES),
                             (DF, DEMAND_FIRST_ROWS, DEMAND_FIRST_OBJECTIVES)):
        tr = simulate(ten_day_inflow, 50.0, form, PolicyParams((0.5,), (0.5,)), ten_day_cfg)
        got = np.column_stack([tr.storage, tr.efr, tr.dr, tr.hpr, tr.ewr, tr.head])
        flux_err = max(flux_err, np.abs(got - np.array(rows)).max())
        o = objectives_of_trace(tr, ten_day_cfg).as_tuple()
        energy_err = max(energy_err, abs(o[0] - objs[0]))
        obj_err = max(obj_err, max(abs(a - b) for a, b in zip(o[1:], objs[1:])))
    assert len(TEN_DAY_INFLOW) == 10
    verdict(8, flux_err <= 1e-9 and obj_err <= 1e-9 and energy_err <= 1e-6,
            f"trace error {flux_err:.1e}, objective error {obj_err:.1e} (limit 1e-9), "
            f"energy error {energy_err:.1e} GWh (limit 1e-6)")


# --- 9 and 10. directional reproduction ---------------------------------------------------------

@pytest.fixture(scope="module")
def ns_scenario():
    hist = fixtures.ns_like_inflow()
    ens = generate(fit(hist), GenConfig(seed=7, realizations=200, years=10))
    cfg = ReservoirConfig(mef=percent_of_maf(hist, 0.3),
                          flood=flood_threshold(fixtures.ns_like_releases(hist)),
                          demand=fixtures.ns_like_demand(),
                          elevation_storage=fixtures.NS_LIKE_HEAD_CURVE).with_max_inflow(ens.flows)
    ec = EvalConfig(ens, sample_size=20)
    rc = RunConfig(nfe=2000, seeds=(1, 2, 3))
    return hist, cfg, ec, rc


def sweep(ns_scenario, fraction):
    hist, cfg, ec, rc = ns_scenario
    t0 = time.perf_counter()
    rows = sensitivity_sweep([fraction], hist, cfg, ec, rc, EPS4)
    return {r.formulation: r for r in rows}, time.perf_counter() - t0


@pytest.fixture(scope="module")
def sweep_low(ns_scenario):
    return sweep(ns_scenario, 0.3)


def medians(row):
    o = row.strategies.objective_matrix()
    return lower_median(o[:, 0]), lower_median(o[:, 2])


@pytest.mark.slow
def test_c9_mef_priority(verdict, sweep_low):
    rows, secs = sweep_low
    hp_mf, ef_mf = medians(rows[MF])
    hp_df, ef_df = medians(rows[DF])
    gap, ratio = ef_mf - ef_df, hp_mf / hp_df
    verdict(9, gap >= 10 and 0.85 <= ratio <= 1.15 and secs <= 600,
            f"median J_EF {ef_mf:.2f} vs {ef_df:.2f} (gap {gap:.2f}, needs >= 10), "
            f"median J_hp ratio {ratio:.3f} (needs [0.85, 1.15]), {secs:.0f} s (limit 600 s)")


@pytest.mark.slow
def test_c10_fraction_sensitivity(verdict, ns_scenario, sweep_low):
    low, _ = sweep_low
    high, _ = sweep(ns_scenario, 0.8)
    parts, ok = [], True
    for form in (MF, DF):
        a, b = low[form].summary(), high[form].summary()
        band = max(2.0, a["mef_rel_seed_spread"], b["mef_rel_seed_spread"])
        drop = a["mef_rel_pct_median"] - b["mef_rel_pct_median"]
        ok &= drop > band
        parts.append(f"{form.value} {a['mef_rel_pct_median']:.2f} -> {b['mef_rel_pct_median']:.2f} "
                     f"(drop {drop:.2f}, band {band:.2f})")
    verdict(10, ok, "; ".join(parts))


# --- 11. MOEA sanity ----------------------------------------------------------------------------

def test_c11_convex_toy(verdict):
    toy = Problem(np.array([-1.0]), np.array([2.0]), 2,
                  lambda g, key: (g[0] ** 2, (g[0] - 1.0) ** 2))
    r = evolve(toy, (0.01, 0.01), RunConfig(nfe=5000), seed=11)
    theta = r.archive.genomes()[:, 0]
    ref = np.array([1.1, 1.1])
    # the front is f2 = (1 - sqrt(f1))^2 on [0, 1]; its dominated area up to (r, r) is r^2 - 1/6
    front_hv = ref[0] * ref[1] - 1.0 / 6.0
    rel = abs(hypervolume(r.archive.objectives(), ref) / front_hv - 1)
    inside = bool(np.all((theta >= -0.05) & (theta <= 1.05)))
    verdict(11, inside and rel <= 0.05,
            f"theta in [{theta.min():.4f}, {theta.max():.4f}] (needs [-0.05, 1.05]), "
            f"HV off the analytic front by {100 * rel:.2f}% (limit 5%), {len(theta)} members")


# --- 12. determinism across thread counts -------------------------------------------------------

TOY = """
[generator]
realizations = 100
years = 4
[optimization]
nfe = 200
population_size = 20
seeds = [1, 2]
checkpoint_interval = 50
hv_samples = 20000
[evaluation]
sample_size = 5
"""


def test_c12_threads(verdict, tmp_path):
    cfg = tmp_path / "toy.toml"
    cfg.write_text(TOY)
    assert cli.main(["gen", "--config", str(cfg), "--out", str(tmp_path / "one")]) == 0
    (tmp_path / "eight").mkdir()
    (tmp_path / "eight" / "ensemble.bin").write_bytes((tmp_path / "one" / "ensemble.bin").read_bytes())
    for name, threads in (("one", "1"), ("eight", "8")):
        assert cli.main(["optimize", "--config", str(cfg), "--out", str(tmp_path / name),
                         "--threads", threads]) == 0

    def archives(out):
        # per-seed archives, merged sets and HV trajectories of both formulations
        return {p.relative_to(out).as_posix(): p.read_bytes()
                for p in sorted((out / "optimize").glob("*/*.csv"))}
    a, b = archives(tmp_path / "one"), archives(tmp_path / "eight")
    verdict(12, len(a) == 8 and a == b,
            f"{len(a)} archive files, {'byte-identical' if a == b else 'different'} "
            f"for --threads 1 and --threads 8")
