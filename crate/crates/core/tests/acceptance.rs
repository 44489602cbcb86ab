//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on failure.

mod common;

use std::time::Instant;

use common::{perturbed_grid, random_position, random_sites, random_vertices, sorted};
use insq_core::engine::{network_influential_neighbor_set, NetQueryState, QueryConfig, QueryState};
use insq_core::exec::{par_map, Exec};
use insq_core::geometry::{voronoi_builds, Point, SiteId, VoronoiIndex};
use insq_core::network::{
    network_voronoi_builds, sampled_neighboring_cells, NetworkVoronoi, SiteDistanceTable,
};
use insq_core::scenario::{generate_random, GenerateParams, DEFAULT_K};
use insq_core::sim::{
    brute_force_oracle, compare_runs, metrics_csv, reports_jsonl, run_simulation, DiffReport,
    OracleTick, QueryPosition, RunOutput, Trajectory,
};
use insq_core::{load_scenario, save_scenario, Mode, Scenario, TickEvent, TickReport};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Check {
    name: &'static str,
    pass: bool,
    detail: String,
}

struct Verified {
    scenario: Scenario,
    run: RunOutput,
    oracle: Vec<OracleTick>,
    diff: DiffReport,
}

fn verify(s: Scenario) -> Verified {
    let run = run_simulation(&s).expect("run");
    let oracle = brute_force_oracle(&s).expect("oracle");
    let diff = compare_runs(&run.reports, &oracle).expect("equal lengths");
    Verified {
        scenario: s,
        run,
        oracle,
        diff,
    }
}

fn plane_scenarios() -> Vec<Scenario> {
    (0..50u64)
        .map(|i| {
            let i_ = i as usize;
            generate_random(&GenerateParams {
                mode: Mode::Plane,
                n: [50, 200, 1000][i_ % 3],
                grid: None,
                k: [1, 5, 10][(i_ / 3) % 3],
                rho: [1.0, 1.6, 2.0][(i_ / 9) % 3],
                ticks: 2000,
                seed: 1000 + i,
            })
            .expect("feasible")
        })
        .collect()
}

fn network_scenarios() -> Vec<Scenario> {
    (0..20u64)
        .map(|i| {
            let side = 8 + (12 * i as u32) / 19;
            generate_random(&GenerateParams {
                mode: Mode::Network,
                n: (10 + 2 * i as usize).min(50),
                grid: Some((side, side)),
                k: [1, 3, 5][i as usize % 3],
                rho: [1.0, 1.6][i as usize % 2],
                ticks: 1000,
                seed: 2000 + i,
            })
            .expect("feasible")
        })
        .collect()
}

fn oracle_change_ticks(oracle: &[OracleTick]) -> Vec<u64> {
    oracle
        .windows(2)
        .filter(|w| sorted(w[0].knn.clone()) != sorted(w[1].knn.clone()))
        .map(|w| w[1].t)
        .collect()
}

fn event_ticks(reports: &[TickReport]) -> Vec<u64> {
    reports
        .iter()
        .filter(|r| r.event != TickEvent::None)
        .map(|r| r.t)
        .collect()
}

fn equivalence(name: &'static str, runs: &[Verified]) -> Check {
    let bad: Vec<String> = runs
        .iter()
        .filter(|v| !v.diff.mismatched_ticks.is_empty())
        .map(|v| {
            format!(
                "seed {} at ticks {:?}",
                v.scenario.seed,
                &v.diff.mismatched_ticks[..v.diff.mismatched_ticks.len().min(5)]
            )
        })
        .collect();
    let ticks: usize = runs.iter().map(|v| v.diff.total_ticks).sum();
    let changes: usize = runs.iter().map(|v| v.diff.oracle_changes).sum();
    Check {
        name,
        pass: bad.is_empty() && runs.iter().all(|v| v.oracle.len() == v.run.reports.len()),
        detail: if bad.is_empty() {
            format!(
                "{} scenarios, {ticks} ticks, {changes} kNN changes, 0 mismatches",
                runs.len()
            )
        } else {
            bad.join("; ")
        },
    }
}

fn safe_region_iff() -> Check {
    let instances: Vec<u64> = (0..20).collect();
    let violations: Vec<usize> = par_map(Exec::Parallel, &instances, |&i| {
        let n = 20 + 10 * i as usize;
        let k = 1 + (i as usize % 10);
        let sites = random_sites(n, 3000 + i);
        let index = VoronoiIndex::build(&sites).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(i);
        let q0 = Point::new(rng.random(), rng.random());
        let state = QueryState::init(&index, &q0, QueryConfig::new(k, 1.0).unwrap()).unwrap();
        let knn = sorted(state.knn().to_vec());
        let mut bad = 0;
        for j in 0..10_000 {
            // half the samples near q0, where the cell boundary is
            let x = if j % 2 == 0 {
                Point::new(
                    q0.x + rng.random_range(-0.15..0.15),
                    q0.y + rng.random_range(-0.15..0.15),
                )
            } else {
                Point::new(rng.random_range(-0.1..1.1), rng.random_range(-0.1..1.1))
            };
            let valid = state.validate(&index, &x).valid;
            let same = sorted(common::brute_knn(&sites, &x, k)) == knn;
            if valid != same {
                bad += 1;
            }
        }
        bad
    });
    let total: usize = violations.iter().sum();
    Check {
        name: "safe-region iff (knn precedes IS <=> kNN unchanged)",
        pass: total == 0,
        detail: format!("20 instances x 10000 points, {total} violations"),
    }
}

fn mis_within_ins() -> Check {
    let instances: Vec<u64> = (0..10).collect();
    let results: Vec<(usize, usize, usize)> = par_map(Exec::Parallel, &instances, |&i| {
        let side = 6 + (i as u32 % 5);
        let g = perturbed_grid(side, side, 4000 + i);
        let sites = random_vertices(&g, 8 + i as usize, 4100 + i);
        let ids: Vec<SiteId> = sites.iter().map(|v| v.site()).collect();
        let nv = NetworkVoronoi::build(&g, &sites).unwrap();
        let table = SiteDistanceTable::new(&g, &ids).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(i);
        let (mut cells, mut checked, mut bad) = (0, 0, 0);
        for j in 0..5 {
            let k = 1 + (i as usize + j) % 5;
            let q = random_position(&g, &mut rng);
            let knn = table.knn_at(&g, &q, k).unwrap();
            let ins = network_influential_neighbor_set(&nv, &knn).unwrap();
            for cell in sampled_neighboring_cells(&g, &table, &knn, 24).unwrap() {
                cells += 1;
                for s in cell {
                    checked += 1;
                    if !knn.contains(&s) && !ins.contains(&s) {
                        bad += 1;
                    }
                }
            }
        }
        (cells, checked, bad)
    });
    let cells: usize = results.iter().map(|r| r.0).sum();
    let checked: usize = results.iter().map(|r| r.1).sum();
    let bad: usize = results.iter().map(|r| r.2).sum();
    Check {
        name: "neighboring order-k cells within knn + INS (networks)",
        pass: bad == 0 && cells > 0,
        detail: format!(
            "10 instances, {cells} neighboring cells, {checked} sites checked, {bad} violations"
        ),
    }
}

/// Replays each network scenario with the engine directly so every
/// validation's search trace can be checked against the cached subnetwork.
fn subnetwork_confinement(scenarios: &[Scenario]) -> (usize, usize) {
    let results = par_map(Exec::Parallel, scenarios, |s| {
        let graph = s.build_graph().unwrap();
        let insq_core::scenario::TrajectorySpec::Network(path) = &s.trajectory else {
            unreachable!()
        };
        let insq_core::scenario::SiteSet::Network(sites) = &s.sites else {
            unreachable!()
        };
        let tr = Trajectory::network(&graph, path, s.speed).unwrap();
        let nv = NetworkVoronoi::build(&graph, sites).unwrap();
        let at = |t| match tr.position_at(t) {
            QueryPosition::Network(p) => p,
            QueryPosition::Plane(_) => unreachable!(),
        };
        let mut state = NetQueryState::init(&graph, &nv, &at(0), s.config().unwrap()).unwrap();
        let (mut searches, mut escapes) = (0, 0);
        for t in 1..tr.tick_count(s.ticks) {
            let q = at(t);
            let (_, visited) = state.validate_traced(&graph, &q);
            searches += 1;
            if !visited
                .iter()
                .all(|v| state.subnetwork().graph().has_vertex(*v))
            {
                escapes += 1;
            }
            state.tick(&graph, &nv, &q).unwrap();
        }
        (searches, escapes)
    });
    (
        results.iter().map(|r| r.0).sum(),
        results.iter().map(|r| r.1).sum(),
    )
}

fn restricted_verdicts(runs: &[Verified], confinement: (usize, usize)) -> Check {
    let valid: usize = runs
        .iter()
        .map(|v| {
            v.run
                .reports
                .iter()
                .filter(|r| r.t > 0 && r.valid_before_update)
                .count()
        })
        .sum();
    let unsound: usize = runs.iter().map(|v| v.diff.unsound_valid_ticks.len()).sum();
    Check {
        name: "restricted-subnetwork verdicts agree with full graph",
        pass: unsound == 0 && confinement.1 == 0,
        detail: format!(
            "{valid} valid verdicts, {unsound} disagreements; {} searches, {} left the subnetwork",
            confinement.0, confinement.1
        ),
    }
}

fn build_counts() -> (bool, String) {
    // sequential on purpose: the build counters are process-wide
    let mut ok = true;
    let mut details = Vec::new();
    for s in [
        plane_scenarios().swap_remove(4),
        network_scenarios().swap_remove(3),
    ] {
        let (p0, n0) = (voronoi_builds(), network_voronoi_builds());
        let run = run_simulation(&s).unwrap();
        let (p1, n1) = (voronoi_builds(), network_voronoi_builds());
        let builds = (p1 - p0) + (n1 - n0);
        ok &= builds == 1 && run.diagram_builds == 1;
        details.push(format!("{} run: {builds} build", s.mode));
    }
    (ok, details.join(", "))
}

fn efficiency(plane: &[Verified], network: &[Verified]) -> Check {
    let (builds_ok, builds) = build_counts();
    let all: Vec<&Verified> = plane.iter().chain(network).collect();
    let single_build = all.iter().all(|v| v.run.diagram_builds == 1);
    let mut over_budget = 0;
    for v in &all {
        let r = &v.run.reports;
        if r[0].comparisons > r[0].knn.len() + r[0].is_set.len() {
            over_budget += 1;
        }
        for w in r.windows(2) {
            if w[1].comparisons > w[0].knn.len() + w[0].is_set.len() {
                over_budget += 1;
            }
        }
    }
    let rho_one: Vec<&&Verified> = all.iter().filter(|v| v.scenario.rho == 1.0).collect();
    let exact_events = rho_one
        .iter()
        .all(|v| event_ticks(&v.run.reports) == oracle_change_ticks(&v.oracle));
    let recompute_excess = all
        .iter()
        .filter(|v| v.diff.engine_recomputes > v.diff.oracle_changes)
        .count();
    let recomputes: usize = all.iter().map(|v| v.diff.engine_recomputes).sum();
    let changes: usize = all.iter().map(|v| v.diff.oracle_changes).sum();
    Check {
        name: "efficiency (builds, comparisons, rho=1 events, recomputes)",
        pass: builds_ok && single_build && over_budget == 0 && exact_events && recompute_excess == 0,
        detail: format!(
            "{builds}; {} runs with 1 build each; {over_budget} ticks over |knn|+|IS|; \
             rho=1 events == oracle changes in {}/{} runs; {recomputes} recomputes vs {changes} changes",
            all.len(),
            rho_one.iter().filter(|v| event_ticks(&v.run.reports) == oracle_change_ticks(&v.oracle)).count(),
            rho_one.len()
        ),
    }
}

fn configuration() -> Check {
    let cfg = QueryConfig::new(5, 1.6).unwrap();
    let s = generate_random(&GenerateParams {
        mode: Mode::Plane,
        n: 100,
        grid: None,
        k: 5,
        rho: 1.6,
        ticks: 300,
        seed: 42,
    })
    .unwrap();
    let run = run_simulation(&s).unwrap();
    let r_sizes_ok = run
        .reports
        .iter()
        .all(|r| r.prefetch.len() == 8 && r.knn.len() == 5);
    let net_default = Scenario::empty(Mode::Network);
    Check {
        name: "configuration (k=5, rho=1.6 gives |R|=8; network default k=5)",
        pass: cfg.prefetch_size() == 8 && r_sizes_ok && net_default.k == 5 && DEFAULT_K == 5,
        detail: format!(
            "|R| = {}, run prefetch sizes all 8: {r_sizes_ok}, network default k = {}",
            cfg.prefetch_size(),
            net_default.k
        ),
    }
}

fn determinism() -> Check {
    let dir = std::env::temp_dir().join(format!("insq-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let mut ok = true;
    let mut sizes = Vec::new();
    for (name, s) in [
        ("plane", plane_scenarios().swap_remove(13)),
        ("network", network_scenarios().swap_remove(7)),
    ] {
        let path = dir.join(format!("{name}.json"));
        std::fs::write(&path, save_scenario(&s)).unwrap();
        let outputs: Vec<(String, String)> = (0..2)
            .map(|_| {
                let loaded = load_scenario(&std::fs::read(&path).unwrap()).unwrap();
                let run = run_simulation(&loaded).unwrap();
                (metrics_csv(&run.reports), reports_jsonl(&run.reports))
            })
            .collect();
        ok &= outputs[0] == outputs[1];
        ok &= save_scenario(&load_scenario(&std::fs::read(&path).unwrap()).unwrap())
            == std::fs::read(&path).unwrap();
        sizes.push(format!(
            "{name}: {} + {} bytes identical",
            outputs[0].0.len(),
            outputs[0].1.len()
        ));
    }
    let _ = std::fs::remove_dir_all(&dir);
    Check {
        name: "determinism (byte-identical metrics and reports)",
        pass: ok,
        detail: sizes.join(", "),
    }
}

fn main() {
    let started = Instant::now();
    let mut checks = Vec::new();

    let t = Instant::now();
    let plane = par_map(Exec::Parallel, &plane_scenarios(), |s| verify(s.clone()));
    checks.push(equivalence("oracle equivalence (plane)", &plane));
    let plane_secs = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let net_scenarios = network_scenarios();
    let network = par_map(Exec::Parallel, &net_scenarios, |s| verify(s.clone()));
    checks.push(equivalence("oracle equivalence (network)", &network));
    let network_secs = t.elapsed().as_secs_f64();

    checks.push(safe_region_iff());
    checks.push(mis_within_ins());
    checks.push(restricted_verdicts(
        &network,
        subnetwork_confinement(&net_scenarios),
    ));
    checks.push(efficiency(&plane, &network));
    checks.push(configuration());
    checks.push(determinism());

    println!();
    for c in &checks {
        println!(
            "{} {}: {}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    let failed = checks.iter().filter(|c| !c.pass).count();
    println!(
        "\n{} of {} criteria passed in {:.1}s (plane runs {plane_secs:.1}s, network runs {network_secs:.1}s)",
        checks.len() - failed,
        checks.len(),
        started.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
