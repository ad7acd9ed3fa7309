//! Acceptance criteria. Each criterion prints one PASS or FAIL line; the
//! binary exits nonzero if any criterion fails.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dca::annealer::ScriptedProposer;
use dca::evaluation::{aggregate, LandscapeSpec, OracleSpec, ReplayFixture, ReplayOracle};
use dca::harness::{
    brute_force_optimum, replay_verify, run_experiment, run_phase1_only, FixtureSet, RunConfig,
};
use dca::trace::Decision;
use dca::{
    acceptance_probability, run_phase1, run_phase2, AddOutcome, Assignment, ConstraintGraph,
    Element, Phase1Config, Phase2Config, RankConstraint,
};

const TABLE1_2: &str = include_str!("../fixtures/table1_2.replay");
const TABLE3: &str = include_str!("../fixtures/table3.replay");
const TABLE3_MOVES: &str = include_str!("../fixtures/table3.moves");

const X0: &str = "11 2 3 10 9 6 4 5 7 8";
const X34: &str = "2 3 5 4 8 10 11 9 6 7";
const X44: &str = "5 4 2 3 7 6 8 10 11 9";
const G12: [(Element, Element); 12] = [
    (10, 11),
    (11, 9),
    (2, 3),
    (3, 10),
    (3, 6),
    (6, 10),
    (4, 10),
    (5, 4),
    (4, 7),
    (7, 10),
    (4, 8),
    (8, 10),
];
const TOL: f64 = 5e-6;

type Outcome = std::result::Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn a(s: &str) -> Assignment {
    s.parse().unwrap()
}

fn ensure(ok: bool, msg: impl Into<String>) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, limit: Duration) -> std::result::Result<(), String> {
    ensure(
        elapsed < limit,
        format!("took {:.2?}, limit {:.0?}", elapsed, limit),
    )
}

fn replay_phase1() -> dca::Phase1Result {
    let o = ReplayOracle::new("table1_2", ReplayFixture::parse(TABLE1_2).unwrap());
    run_phase1(&a(X0), &o, ConstraintGraph::new(), &Phase1Config::default()).unwrap()
}

fn g12() -> ConstraintGraph {
    let mut g = ConstraintGraph::new();
    for (u, v) in G12 {
        g.try_add(RankConstraint::new(u, v)).unwrap();
    }
    g
}

/// Violated pairs, counted directly from ranks.
fn count_violations(x: &Assignment, edges: &[(Element, Element)]) -> usize {
    let pos: HashMap<Element, usize> = x
        .as_slice()
        .iter()
        .enumerate()
        .map(|(i, &e)| (e, i))
        .collect();
    edges.iter().filter(|(u, v)| pos[u] > pos[v]).count()
}

fn criterion_1() -> Outcome {
    let t = Instant::now();
    let r = replay_phase1();
    let elapsed = t.elapsed();
    let got: BTreeSet<_> = r.graph.edges().map(|c| c.key()).collect();
    let want: BTreeSet<_> = G12.into_iter().collect();
    ensure(got == want, format!("constraints {got:?}"))?;
    let brackets = r.not_induced().count();
    ensure(
        brackets == 4,
        format!("{brackets} bracketed non-inductions"),
    )?;
    ensure(r.best == a(X34), format!("best {}", r.best))?;
    ensure(
        r.best_estimate.mean == -3.12261,
        format!("mean {}", r.best_estimate.mean),
    )?;
    within(elapsed, Duration::from_secs(1))?;
    Ok(format!(
        "12 constraints, 4 brackets, best {X34} at -3.12261 in {elapsed:.2?}"
    ))
}

fn criterion_2() -> Outcome {
    let r = replay_phase1();
    let sweep = |e: Element| r.sweeps.iter().find(|s| s.element == e).unwrap();
    let fresh = |e: Element| -> Vec<usize> {
        sweep(e)
            .tested
            .iter()
            .filter(|(_, p)| p.fresh)
            .map(|(&k, _)| k)
            .collect()
    };
    let last = |e: Element| *sweep(e).tested.keys().max().unwrap();

    ensure(
        last(11) == 5 && sweep(11).stop_rank == Some(5),
        "element 11 stop",
    )?;
    let s9 = sweep(9);
    ensure(
        fresh(9) == vec![1, 2, 3, 6],
        format!("element 9 fresh ranks {:?}", fresh(9)),
    )?;
    ensure(
        !s9.tested[&4].fresh && !s9.tested[&5].fresh && s9.tested.len() == 6,
        "element 9 reuse of ranks 4-5",
    )?;
    ensure(s9.stop_rank == Some(6), "element 9 stop")?;
    ensure(
        last(6) == 4 && sweep(6).stop_rank == Some(4),
        "element 6 stop",
    )?;
    ensure(
        last(7) == 6 && sweep(7).stop_rank == Some(6),
        "element 7 stop",
    )?;
    let ids: Vec<_> = r
        .trace
        .iter()
        .filter(|t| !t.cached)
        .map(|t| t.test_id)
        .collect();
    ensure(
        ids == (0..36).collect::<Vec<_>>(),
        format!("fresh test ids {ids:?}"),
    )?;
    ensure(
        r.evaluations_used == 36,
        format!("{} evaluations", r.evaluations_used),
    )?;
    let distinct: BTreeSet<_> = r.trace.iter().map(|t| t.assignment.clone()).collect();
    ensure(
        distinct.len() == 36,
        format!("{} distinct assignments", distinct.len()),
    )?;
    Ok("sweeps 11/9/6/7 stop at ranks 5/6/4/6; 36 evaluations, tests 0-35".into())
}

fn criterion_3() -> Outcome {
    let p39 = acceptance_probability(-3.05126, -3.05799, 0.07).unwrap();
    let p45 = acceptance_probability(-2.95471, -2.96470, 0.01).unwrap();
    let p41 = acceptance_probability(-3.04399, -3.11263, 0.05).unwrap();
    ensure((p39 - 0.90833).abs() <= TOL, format!("test 39: {p39}"))?;
    ensure((p45 - 0.36825).abs() <= TOL, format!("test 45: {p45}"))?;
    // row-consistent value from first principles
    let row = (-(3.11263_f64 - 3.04399) / 0.05).exp();
    ensure(
        (p41 - row).abs() <= 1e-12,
        format!("test 41: {p41} vs {row}"),
    )?;
    ensure((p41 - 0.25340).abs() <= TOL, format!("test 41: {p41}"))?;
    let report = replay_verify(&FixtureSet::shipped()).map_err(|e| e.to_string())?;
    ensure(
        report.discrepancies.len() == 1 && report.discrepancies[0].starts_with("test 41"),
        format!("discrepancies {:?}", report.discrepancies),
    )?;
    Ok(format!(
        "p39 {p39:.5}, p45 {p45:.5}, p41 {p41:.5} = exp(-0.06864/0.05) \
         (the stated literal 0.25345 is off by {:.1e}); test-41 note in replay report",
        (p41 - 0.25345).abs()
    ))
}

fn criterion_4() -> Outcome {
    let t = Instant::now();
    let p1 = replay_phase1();
    let o = ReplayOracle::new("table3", ReplayFixture::parse(TABLE3).unwrap());
    let cfg = Phase2Config {
        seed: dca::harness::replay_verify::REPLAY_SEED,
        start_test_id: Some(p1.best_test_id),
        first_test_id: p1.next_test_id,
        ..Default::default()
    };
    let mut script = ScriptedProposer::parse(TABLE3_MOVES).unwrap();
    let p2 = run_phase2(&p1.best, &o, &p1.graph, &cfg, &mut script).unwrap();
    let elapsed = t.elapsed();

    let decision = |id| {
        p2.trace
            .iter()
            .find(|r| r.test_id == id)
            .and_then(|r| r.anneal)
            .map(|n| n.decision)
    };
    ensure(
        decision(39) == Some(Decision::AcceptedWorse),
        format!("test 39 {:?}", decision(39)),
    )?;
    ensure(
        decision(41) == Some(Decision::RejectedWorse),
        format!("test 41 {:?}", decision(41)),
    )?;
    ensure(
        decision(45) == Some(Decision::RejectedWorse),
        format!("test 45 {:?}", decision(45)),
    )?;
    ensure(p2.best == a(X44), format!("best {}", p2.best))?;
    ensure(
        p2.best_estimate.mean == -2.95471,
        format!("mean {}", p2.best_estimate.mean),
    )?;
    let v_end = count_violations(&p2.best, &G12);
    let v_start = count_violations(&a(X34), &G12);
    ensure(
        v_end == 0 && g12().violations(&p2.best).unwrap() == 0,
        "X44 violations",
    )?;
    ensure(
        v_start == 2 && g12().violations(&a(X34)).unwrap() == 2,
        "X34 violations",
    )?;
    within(elapsed, Duration::from_secs(1))?;
    Ok(format!(
        "39 a, 41 r, 45 r; best {X44} at -2.95471; violations 2 -> 0 in {elapsed:.2?}"
    ))
}

fn random_perm(n: u32, rng: &mut ChaCha8Rng) -> Vec<u32> {
    let mut v: Vec<u32> = (1..=n).collect();
    v.shuffle(rng);
    v
}

fn landscape(target: Vec<u32>, sigma: f64) -> LandscapeSpec {
    LandscapeSpec {
        kind: dca::evaluation::landscape::LandscapeKind::TargetDisplacement,
        target,
        weights: BTreeMap::new(),
        sigma,
    }
}

fn criterion_5() -> Outcome {
    let t = Instant::now();
    let mut optimal = 0;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 4 + (seed % 3) as u32;
        let spec = landscape(random_perm(n, &mut rng), 0.0);
        let start = Assignment::new(random_perm(n, &mut rng)).unwrap();
        let cfg = RunConfig::new(
            start,
            OracleSpec::Exact {
                landscape: spec.clone(),
            },
            seed,
        );
        let full = run_experiment(&cfg, None).map_err(|e| e.to_string())?;
        let (_, p1) = run_phase1_only(&cfg, None).map_err(|e| e.to_string())?;
        let brute = brute_force_optimum(spec.build().unwrap().as_ref(), None).unwrap();
        ensure(
            full.summary.best_mean >= p1.best_mean,
            format!(
                "seed {seed}: {} below phase-1 {}",
                full.summary.best_mean, p1.best_mean
            ),
        )?;
        if full.summary.best_mean == brute.mean {
            optimal += 1;
        }
    }
    let elapsed = t.elapsed();
    ensure(
        optimal >= 90,
        format!("global optimum in {optimal}/100 runs"),
    )?;
    within(elapsed, Duration::from_secs(60))?;
    Ok(format!(
        "global optimum in {optimal}/100 runs, never below phase 1, {elapsed:.2?}"
    ))
}

fn criterion_6() -> Outcome {
    let t = Instant::now();
    let sigma = 0.06 * 1000f64.sqrt();
    let mut improvements = Vec::new();
    let mut worst_margin = f64::INFINITY;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = landscape(random_perm(10, &mut rng), sigma);
        let start = Assignment::new(random_perm(10, &mut rng)).unwrap();
        let land = spec.build().unwrap();

        let mut sample_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let mut values: Vec<f64> = (0..100_000)
            .map(|_| {
                let x = Assignment::new(random_perm(10, &mut sample_rng)).unwrap();
                land.true_fitness(&x).unwrap()
            })
            .collect();
        values.sort_by(f64::total_cmp);
        let (lo, hi) = (values[0], values[values.len() - 1]);
        let threshold = hi - 0.001 * (hi - lo);
        let percentile = values[99_900];

        let mut cfg = RunConfig::new(start, OracleSpec::Synthetic { landscape: spec }, seed);
        cfg.phase1.tau = 4.0;
        cfg.phase2.t0 = 2.0;
        cfg.phase2.dt = 0.01;
        cfg.phase2.steps = 199;
        cfg.phase2.n_games_hi = 2000;
        let exp = run_experiment(&cfg, None).map_err(|e| e.to_string())?;
        if seed == 0 {
            let se = exp.phase1.trace[1].se;
            ensure((se - 0.06).abs() < 0.006, format!("se at 1000 games {se}"))?;
        }
        let f = land.true_fitness(&exp.summary.best).unwrap();
        let f1 = land.true_fitness(&exp.summary.phase1_best).unwrap();
        ensure(
            f >= threshold && f >= percentile,
            format!("seed {seed}: true fitness {f}, range threshold {threshold}, 99.9th percentile {percentile}"),
        )?;
        worst_margin = worst_margin.min(f - threshold);
        improvements.push(f - f1);
    }
    improvements.sort_by(f64::total_cmp);
    let median = (improvements[9] + improvements[10]) / 2.0;
    ensure(
        median >= 0.0,
        format!("median phase-2 improvement {median}"),
    )?;
    let elapsed = t.elapsed();
    within(elapsed, Duration::from_secs(600))?;
    Ok(format!(
        "20/20 seeds within top 0.1% (worst margin {worst_margin:.3}); median phase-2 gain {median}; {elapsed:.2?}"
    ))
}

fn two_pass(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Kahn's algorithm over the core edge set.
fn is_acyclic(g: &ConstraintGraph) -> bool {
    let mut indeg: BTreeMap<Element, usize> = BTreeMap::new();
    let mut out: BTreeMap<Element, Vec<Element>> = BTreeMap::new();
    for c in g.edges() {
        indeg.entry(c.before).or_default();
        *indeg.entry(c.after).or_default() += 1;
        out.entry(c.before).or_default().push(c.after);
    }
    let mut ready: Vec<Element> = indeg
        .iter()
        .filter(|(_, &d)| d == 0)
        .map(|(&e, _)| e)
        .collect();
    let mut seen = 0;
    while let Some(e) = ready.pop() {
        seen += 1;
        for &f in out.get(&e).into_iter().flatten() {
            let d = indeg.get_mut(&f).unwrap();
            *d -= 1;
            if *d == 0 {
                ready.push(f);
            }
        }
    }
    seen == indeg.len()
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    let mut worst = 0.0f64;
    for _ in 0..200 {
        let n = rng.random_range(2..5000);
        let center = rng.random_range(-8.0..-1.0);
        let xs: Vec<f64> = (0..n)
            .map(|_| center + rng.random_range(-4.0..4.0))
            .collect();
        let e = aggregate(&xs).unwrap();
        let (m, se) = two_pass(&xs);
        worst = worst
            .max(((e.mean - m) / m).abs())
            .max(((e.se - se) / se).abs());
    }
    ensure(
        worst <= 1e-12,
        format!("aggregate relative error {worst:e}"),
    )?;

    let mut g = ConstraintGraph::new();
    let mut outcomes: BTreeMap<String, usize> = BTreeMap::new();
    for _ in 0..10_000 {
        let u = rng.random_range(1..=150);
        let v = rng.random_range(1..=150);
        if u == v {
            continue;
        }
        let implied_reverse = g.reaches(v, u);
        let o = g.try_add(RankConstraint::new(u, v)).unwrap();
        ensure(
            implied_reverse == (o == AddOutcome::CycleRejected),
            format!("{u} < {v}: {o:?} with reverse implied {implied_reverse}"),
        )?;
        ensure(is_acyclic(&g), format!("cycle after {u} < {v}"))?;
        *outcomes.entry(format!("{o:?}")).or_default() += 1;
    }

    for _ in 0..10_000 {
        let n = rng.random_range(2..=12);
        let x = Assignment::new(random_perm(n, &mut rng)).unwrap();
        let e = rng.random_range(1..=n);
        let r = rng.random_range(1..=n as usize);
        let home = x.rank_of(e).unwrap().get();
        let y = x.insertion_move(e, r).unwrap();
        ensure(y.rank_of(e).unwrap().get() == r, "moved element rank")?;
        let rest = |z: &Assignment| {
            z.as_slice()
                .iter()
                .copied()
                .filter(|&k| k != e)
                .collect::<Vec<_>>()
        };
        ensure(rest(&x) == rest(&y), "relative order of the others")?;
        ensure(
            y.insertion_move(e, home).unwrap() == x,
            format!("round trip {x} via {e}@{r}"),
        )?;
        if let Some(mv) = x.insertion_diff(&y).unwrap() {
            ensure(x.apply(&mv).unwrap() == y, "descriptor replays the move")?;
        } else {
            ensure(x == y, "no descriptor for a real move")?;
        }
    }

    let spec = landscape(vec![5, 3, 1, 2, 4, 7, 6], 1.5);
    let mut cfg = RunConfig::new(
        a("1 2 3 4 5 6 7"),
        OracleSpec::Synthetic { landscape: spec },
        2024,
    );
    cfg.phase1.n_games = 300;
    cfg.phase1.n_games_baseline = 600;
    cfg.phase2.n_games_hi = 1200;
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    run_experiment(&cfg, Some(d1.path())).map_err(|e| e.to_string())?;
    run_experiment(&cfg, Some(d2.path())).map_err(|e| e.to_string())?;
    for f in [
        "trace.jsonl",
        "trace.csv",
        "constraints.edges",
        "constraints.dot",
    ] {
        let b1 = std::fs::read(d1.path().join(f)).unwrap();
        ensure(
            !b1.is_empty() && b1 == std::fs::read(d2.path().join(f)).unwrap(),
            format!("{f} differs"),
        )?;
    }
    Ok(format!(
        "aggregate rel. error {worst:.1e}; 10^4 edges acyclic {outcomes:?}; 10^4 round trips; traces byte-identical"
    ))
}

fn main() -> std::process::ExitCode {
    let criteria: [Criterion; 7] = [
        ("constraint-set replay", criterion_1),
        ("sweep-boundary replay", criterion_2),
        ("acceptance-probability law", criterion_3),
        ("phase-2 scripted replay", criterion_4),
        ("brute-force equivalence", criterion_5),
        ("noisy recovery", criterion_6),
        ("statistics and invariants", criterion_7),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.into_iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|p| Err(format!("panicked: {:?}", p.downcast_ref::<String>())));
        match outcome {
            Ok(detail) => println!("PASS criterion {} ({name}): {detail}", i + 1),
            Err(why) => {
                println!("FAIL criterion {} ({name}): {why}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    if failed.is_empty() {
        println!("acceptance: all 7 criteria passed");
        std::process::ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::ExitCode::FAILURE
    }
}
