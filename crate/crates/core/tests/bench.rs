use std::f64::consts::PI;

use covpath::bench::{aggregate, compute_metrics, run_suite, EpisodeResult, SuiteMap};
use covpath::episode::{run_episode, Episode, EpisodeConfig, StepRecord, Task};
use covpath::planners::PlannerKind;
use covpath::worldmodel::WorldMap;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn record(t: f64, x: f64, y: f64, heading: f64, coverage: f64) -> StepRecord {
    StepRecord {
        t,
        x,
        y,
        heading,
        a_v: 0.0,
        a_w: 0.0,
        a_new: 0.0,
        r_area: 0.0,
        r_tv_g: 0.0,
        r_tv_i: 0.0,
        r_coll: 0.0,
        r_const: 0.0,
        r_total: 0.0,
        collided: 0,
        coverage,
    }
}

#[test]
fn spiral_length_and_turns() {
    // Archimedean spiral r = b * theta over three turns
    let b = 0.1;
    let turns = 3.0;
    let n = 20_000;
    let records: Vec<StepRecord> = (0..=n)
        .map(|k| {
            let th = turns * 2.0 * PI * k as f64 / n as f64;
            let r = b * th;
            let (dx, dy) = (b * th.cos() - r * th.sin(), b * th.sin() + r * th.cos());
            record(k as f64, r * th.cos(), r * th.sin(), dy.atan2(dx), k as f64 / n as f64)
        })
        .collect();
    let m = compute_metrics(&records, 0.99);
    let th = turns * 2.0 * PI;
    let exact = 0.5 * b * (th * (1.0 + th * th).sqrt() + (th + (1.0 + th * th).sqrt()).ln());
    assert!((m.path_length - exact).abs() / exact < 0.005, "{} vs {exact}", m.path_length);
    // the tangent turns a bit more than the polar angle
    let tangent_turn = th + (th.atan() - 0.0);
    assert!((m.full_rotations - tangent_turn / (2.0 * PI)).abs() < 1e-3);
    assert!((m.t90.unwrap() - 0.9 * n as f64).abs() < 1e-6);
}

fn suite() -> (Vec<SuiteMap>, EpisodeConfig) {
    let cfg = EpisodeConfig::for_task(Task::Mowing);
    let maps = [40, 56]
        .iter()
        .map(|&n| SuiteMap::new(format!("room-{n}"), WorldMap::empty_room(n, n, 0.0375), &cfg).unwrap())
        .collect();
    (maps, cfg)
}

fn strip(results: &[EpisodeResult]) -> Vec<(String, u64, Option<f64>, f64)> {
    results.iter().map(|r| (r.map.clone(), r.seed, r.metrics.t99, r.metrics.path_length)).collect()
}

#[test]
fn suite_order_and_aggregate_do_not_depend_on_input_order() {
    let (mut maps, cfg) = suite();
    let factory = |_| PlannerKind::Bsa.controller();
    let a = run_suite(&maps, &cfg, &factory, &[0, 1], 1, false);
    maps.reverse();
    let b = run_suite(&maps, &cfg, &factory, &[1, 0], 2, false);
    assert_eq!(strip(&a), strip(&b));

    let mut shuffled = a.clone();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(1));
    assert_eq!(aggregate(&a), aggregate(&shuffled));
}

#[test]
fn one_episode_table_equals_the_episode() {
    let (maps, cfg) = suite();
    let results = run_suite(&maps[..1], &cfg, &|_| PlannerKind::Bsa.controller(), &[4], 1, false);
    let rows = aggregate(&results);
    assert_eq!(rows.len(), 2);

    let mut c = PlannerKind::Bsa.controller();
    let out = run_episode(Episode::new(cfg.clone(), maps[0].arena.clone(), 4), c.as_mut());
    let m = compute_metrics(&out.records, cfg.reward.goal_coverage);
    for row in &rows {
        assert_eq!(row.episodes, 1);
        assert_eq!(row.t99_mean, m.t99);
        assert_eq!(row.t99_std, Some(0.0));
        assert_eq!(row.path_length_mean, Some(m.path_length));
        assert_eq!(row.full_rotations_mean, Some(m.full_rotations));
    }
}
