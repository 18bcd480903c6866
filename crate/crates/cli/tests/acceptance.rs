//! Acceptance suite. Each criterion prints one PASS/FAIL line; the process
//! exits nonzero if any criterion fails.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::sync::Arc;
use std::time::Instant;

use covpath::belief::{BeliefState, CoverageSpec, Knowledge};
use covpath::bench::{run_suite, EpisodeResult, SuiteMap};
use covpath::dynamics::{self, Action, DynamicsConfig, DynamicsState};
use covpath::episode::{Arena, Episode, EpisodeConfig, Task};
use covpath::grid::Grid;
use covpath::lidar::{cast_rays, LidarConfig};
use covpath::mapgen::{generate_map_seeded, GeneratedMap, MapGenParams};
use covpath::obsbuilder::{MapPyramid, MultiScaleConfig};
use covpath::planners::tsp::{solve_open_tour, CostTable, TspConfig};
use covpath::planners::PlannerKind;
use covpath::reward::total_variation;
use covpath::worldmodel::{clearance_cells, wrap_angle, NoCollisions, Pose, WorldMap};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------- TV

fn naive_tv(g: &Grid<f64>) -> f64 {
    let mut sum = 0.0;
    for i in 0..g.width() - 1 {
        for j in 0..g.height() - 1 {
            let c = *g.get(i, j);
            let dx = *g.get(i + 1, j) - c;
            let dy = *g.get(i, j + 1) - c;
            sum += (dx * dx + dy * dy).sqrt();
        }
    }
    sum
}

fn tv_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let g = Grid::from_fn(32, 32, |_, _| if rng.random_bool(0.5) { 1.0 } else { 0.0 });
        worst = worst.max((total_variation(&g) - naive_tv(&g)).abs());
    }
    let mut single = Grid::new(3, 3, 0.0);
    single.set(1, 1, 1.0);
    let center = total_variation(&single);
    let mut big = Grid::new(33, 33, 0.0);
    big.set(16, 16, 1.0);
    let center_big = total_variation(&big);
    let secs = start.elapsed().as_secs_f64();
    check(
        worst <= 1e-9 && center == 2.0 + SQRT_2 && center_big == 2.0 + SQRT_2 && secs < 1.0,
        format!("max |err| {worst:.1e}, center cell {center}, {secs:.3} s"),
    )
}

// ------------------------------------------- random-policy episodes

struct EpisodeStats {
    steps: usize,
    conservation_errors: usize,
    monotone_errors: usize,
    worst_area_ratio: f64,
    area_violations: usize,
    tv_bound_violations: usize,
    tv_exact_violations: usize,
    worst_tv_excess: f64,
}

/// TV in meters of a set of cells given as a mask.
fn mask_tv(mask: &Grid<bool>, res: f64) -> f64 {
    naive_tv(&mask.map(|&b| if b { 1.0 } else { 0.0 })) * res
}

/// TV of one rasterized footprint: the largest boundary a single move can
/// open or close beyond the sides of the swept strip.
fn footprint_tv(radius: f64, res: f64) -> f64 {
    let r = radius / res;
    let n = (2.0 * r).ceil() as usize + 4;
    let c = n as f64 / 2.0;
    let disc = Grid::from_fn(n, n, |x, y| (x as f64 + 0.5 - c).hypot(y as f64 + 0.5 - c) < r);
    mask_tv(&disc, res)
}

fn random_episode(map_seed: u64, slack: f64) -> EpisodeStats {
    let cfg = EpisodeConfig::for_task(Task::Mowing);
    let g = generate_map_seeded(map_seed, &MapGenParams::for_task(Task::Mowing));
    let res = g.map.resolution();
    let arena = Arc::new(Arena::new(Arc::new(g.map), &cfg).expect("arena"));
    let mut ep = Episode::new(cfg.clone(), arena, map_seed);
    let mut rng = ChaCha8Rng::seed_from_u64(map_seed ^ 0x5eed);
    let cell = res * res;
    let d = cfg.dynamics;
    let lambda = cfg.reward.lambda_area;
    // one extra row of cells across the swept width
    let eps = res / (d.v_max * d.dt);

    let mut shadow = ep.belief().coverage().clone();
    let mut sum_cells = (ep.records()[0].a_new / cell).round() as u64;
    let mut s = EpisodeStats {
        steps: 0,
        conservation_errors: 0,
        monotone_errors: 0,
        worst_area_ratio: 0.0,
        area_violations: 0,
        tv_bound_violations: 0,
        tv_exact_violations: 0,
        worst_tv_excess: f64::MIN,
    };
    let (w, h) = (shadow.width(), shadow.height());
    let mut prev_fraction = ep.coverage_fraction();
    let mut prev_cells = ep.belief().covered_cells();
    while !ep.status().is_done() {
        let v_prev = ep.total_variation();
        let r = ep
            .step(Action::new(rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)))
            .expect("running episode");
        s.steps += 1;
        for &i in &r.new_cells {
            if shadow.data()[i] {
                s.monotone_errors += 1;
            }
            shadow.data_mut()[i] = true;
        }
        sum_cells += (r.record.a_new / cell).round() as u64;
        let cells = ep.belief().covered_cells();
        if cells < prev_cells || ep.coverage_fraction() < prev_fraction {
            s.monotone_errors += 1;
        }
        if cells != prev_cells + r.new_cells.len() as u64 {
            s.conservation_errors += 1;
        }
        if s.steps % 250 == 0 && shadow != *ep.belief().coverage() {
            s.monotone_errors += 1;
        }
        prev_cells = cells;
        prev_fraction = ep.coverage_fraction();

        let ratio = r.reward.r_area / lambda;
        s.worst_area_ratio = s.worst_area_ratio.max(ratio);
        if r.reward.r_area < 0.0 || r.reward.r_area > lambda * (1.0 + eps) {
            s.area_violations += 1;
        }
        let dv = (ep.total_variation() - v_prev).abs();
        s.worst_tv_excess = s.worst_tv_excess.max(dv - 2.0 * r.distance);
        if dv > 2.0 * r.distance + slack + 1e-9 {
            s.tv_bound_violations += 1;
        }
        if !r.new_cells.is_empty() {
            let mut new = Grid::new(w, h, false);
            for &i in &r.new_cells {
                new.data_mut()[i] = true;
            }
            if dv > mask_tv(&new, res) + 1e-9 {
                s.tv_exact_violations += 1;
            }
        } else if dv != 0.0 {
            s.tv_exact_violations += 1;
        }
    }
    if sum_cells != ep.belief().covered_cells() || shadow != *ep.belief().coverage() {
        s.conservation_errors += 1;
    }
    if ep.belief().covered_cells() != ep.belief().coverage().count_true() as u64 {
        s.conservation_errors += 1;
    }
    s
}

fn random_episodes() -> (Vec<EpisodeStats>, f64) {
    let cfg = EpisodeConfig::for_task(Task::Mowing);
    let slack = footprint_tv(cfg.dynamics.agent_radius, 0.0375);
    ((0..100u64).into_par_iter().map(|s| random_episode(s, slack)).collect(), slack)
}

fn coverage_conservation(stats: &[EpisodeStats]) -> Outcome {
    let steps: usize = stats.iter().map(|s| s.steps).sum();
    let cons: usize = stats.iter().map(|s| s.conservation_errors).sum();
    let mono: usize = stats.iter().map(|s| s.monotone_errors).sum();
    check(
        cons == 0 && mono == 0 && stats.len() == 100,
        format!("{} episodes, {steps} steps, {cons} conservation and {mono} monotonicity errors", stats.len()),
    )
}

fn reward_bounds(stats: &[EpisodeStats], slack: f64) -> Outcome {
    let area: usize = stats.iter().map(|s| s.area_violations).sum();
    let tv: usize = stats.iter().map(|s| s.tv_bound_violations).sum();
    let exact: usize = stats.iter().map(|s| s.tv_exact_violations).sum();
    let worst_area = stats.iter().map(|s| s.worst_area_ratio).fold(0.0, f64::max);
    let worst_tv = stats.iter().map(|s| s.worst_tv_excess).fold(f64::MIN, f64::max);
    check(
        area == 0 && tv == 0 && exact == 0,
        format!(
            "max r_area/lambda {worst_area:.3}, max |dV|-2d {worst_tv:.3} m vs slack {slack:.3} m; violations: area {area}, dV {tv}, dV>TV(new) {exact}"
        ),
    )
}

// ------------------------------------------------- frontier pyramid

fn random_belief(seed: u64) -> BeliefState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let task = if seed % 2 == 0 { Task::Mowing } else { Task::Exploration };
    let cfg = EpisodeConfig::for_task(task);
    let g = generate_map_seeded(seed, &MapGenParams::for_task(task));
    let mut belief = BeliefState::new(&g.map);
    let (ex, ey) = g.map.extent();
    let spec = CoverageSpec { ..cfg.coverage };
    for _ in 0..rng.random_range(1..30) {
        let p = Pose::new(rng.random_range(0.1..ex - 0.1), rng.random_range(0.1..ey - 0.1), rng.random_range(-PI..PI));
        if g.map.cell_at(p.x, p.y).is_some_and(|(x, y)| !g.map.is_obstacle(x, y)) {
            let scan = cast_rays(&g.map, &p, &cfg.lidar).expect("inside map");
            belief.integrate_scan(&p, &scan, &cfg.lidar);
            belief.update_coverage(&[p], &spec, &g.map);
        }
    }
    belief
}

fn frontier_persistence() -> Outcome {
    let cfg = MultiScaleConfig::default();
    let mut mismatches = 0usize;
    let mut compared = 0usize;
    let mut nonempty = 0usize;
    for seed in 0..100 {
        let belief = random_belief(seed);
        let cov = belief.coverage();
        let obs = belief.obstacles();
        let (w, h) = (cov.width(), cov.height());
        // fine frontier points from the definition
        let fine = Grid::from_fn(w, h, |x, y| {
            !*cov.get(x, y) && *obs.get(x, y) != Knowledge::Obstacle && cov.neighbors8(x, y).any(|(a, b)| *cov.get(a, b))
        });
        if fine != belief.frontier_cells() {
            mismatches += 1;
        }
        if fine.count_true() > 0 {
            nonempty += 1;
        }
        let pyramid = MapPyramid::build(&belief, &cfg);
        let base = (cfg.finest_resolution / belief.resolution()).round().max(1.0) as usize;
        for (level, coarse) in pyramid.frontier.iter().enumerate() {
            let f = base * cfg.factor.pow(level as u32);
            let (cw, ch) = (w.div_ceil(f), h.div_ceil(f));
            if coarse.width() != cw || coarse.height() != ch {
                mismatches += 1;
                continue;
            }
            for cy in 0..ch {
                for cx in 0..cw {
                    let any = (cy * f..((cy + 1) * f).min(h)).any(|y| (cx * f..((cx + 1) * f).min(w)).any(|x| *fine.get(x, y)));
                    compared += 1;
                    if any != *coarse.get(cx, cy) {
                        mismatches += 1;
                    }
                }
            }
        }
    }
    check(
        mismatches == 0 && nonempty > 90,
        format!("100 beliefs ({nonempty} with frontier), {compared} coarse cells, {mismatches} mismatches"),
    )
}

// ------------------------------------------------------------ lidar

/// First obstacle along a ray found by sampling every res/64. When two
/// samples land in diagonal cells, the shared corner decides which of the
/// two side cells the segment crossed.
fn sampled_range(map: &WorldMap, x: f64, y: f64, angle: f64, max_range: f64) -> f64 {
    let res = map.resolution();
    let step = res / 64.0;
    let (c, s) = (angle.cos(), angle.sin());
    let blocked = |cell: Option<(usize, usize)>| cell.is_none_or(|(cx, cy)| map.is_obstacle(cx, cy));
    let mut prev = map.cell_at(x, y);
    let mut t = 0.0;
    while t < max_range {
        let cell = map.cell_at(x + t * c, y + t * s);
        if let (Some(a), Some(b)) = (prev, cell) {
            let (dx, dy) = (b.0 as i64 - a.0 as i64, b.1 as i64 - a.1 as i64);
            if dx.abs() == 1 && dy.abs() == 1 {
                let (ox, oy) = map.origin();
                let corner_x = ox + (a.0 as f64 + 0.5 + dx as f64 / 2.0) * res;
                let corner_y = oy + (a.1 as f64 + 0.5 + dy as f64 / 2.0) * res;
                let (px, py) = (x + (t - step) * c, y + (t - step) * s);
                let cross = c * (corner_y - py) - s * (corner_x - px);
                // corner to the left of the ray: the ray stays below it
                let side_x = if (cross > 0.0) == (dx * dy > 0) { (b.0, a.1) } else { (a.0, b.1) };
                if cross != 0.0 && blocked(Some(side_x)) {
                    return t - step;
                }
            }
        }
        if blocked(cell) {
            return t;
        }
        prev = cell;
        t += step;
    }
    max_range
}

fn rotate_pose(map: &WorldMap, p: &Pose) -> Pose {
    let (ox, oy) = map.origin();
    let side = map.height() as f64 * map.resolution();
    Pose::new(ox + side - (p.y - oy), oy + (p.x - ox), p.heading + FRAC_PI_2)
}

fn raycast_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let maps: Vec<GeneratedMap> = (0..20)
        .map(|s| {
            let task = if s % 2 == 0 { Task::Mowing } else { Task::Exploration };
            generate_map_seeded(500 + s, &MapGenParams::for_task(task))
        })
        .collect();
    let configs = [LidarConfig::mowing(), LidarConfig::exploration_omni()];
    let (mut worst, mut worst_rot, mut rays) = (0.0f64, 0.0f64, 0usize);
    let mut pairs = 0;
    while pairs < 1000 {
        let m = rng.random_range(0..maps.len());
        let map = &maps[m].map;
        let (ex, ey) = map.extent();
        let pose = Pose::new(rng.random_range(0.0..ex), rng.random_range(0.0..ey), rng.random_range(-PI..PI));
        let Some((cx, cy)) = map.cell_at(pose.x, pose.y) else { continue };
        if map.is_obstacle(cx, cy) {
            continue;
        }
        pairs += 1;
        let lidar = &configs[m % 2];
        let scan = cast_rays(map, &pose, lidar).expect("inside map");
        for (off, &range) in lidar.angle_offsets().iter().zip(&scan.ranges) {
            let want = sampled_range(map, pose.x, pose.y, pose.heading + off, lidar.max_range);
            worst = worst.max((range - want).abs());
            rays += 1;
        }
        let rotated = map.rotated_ccw();
        let rscan = cast_rays(&rotated, &rotate_pose(map, &pose), lidar).expect("inside map");
        for (a, b) in scan.ranges.iter().zip(&rscan.ranges) {
            worst_rot = worst_rot.max((a - b).abs());
        }
    }
    let res = 0.0375;
    check(
        worst <= res && worst_rot <= res,
        format!("{pairs} poses, {rays} rays: max error {worst:.5} m, rotated max diff {worst_rot:.5} m"),
    )
}

// ------------------------------------------------------- kinematics

fn closed_form_arc(p: &Pose, v: f64, w: f64, t: f64) -> Pose {
    if w.abs() < 1e-9 {
        return Pose::new(p.x + v * t * p.heading.cos(), p.y + v * t * p.heading.sin(), p.heading);
    }
    let r = v / w;
    let th = p.heading + w * t;
    Pose::new(p.x + r * (th.sin() - p.heading.sin()), p.y - r * (th.cos() - p.heading.cos()), th)
}

/// Body twist of each substep recovered from consecutive poses.
fn substep_twists(start: Pose, path: &[Pose], h: f64) -> Vec<(f64, f64)> {
    let mut prev = start;
    path.iter()
        .map(|p| {
            let dth = wrap_angle(p.heading - prev.heading);
            let w = dth / h;
            let (dx, dy) = (p.x - prev.x, p.y - prev.y);
            let mid = prev.heading + dth / 2.0;
            let half = dth / 2.0;
            let sinc = if half.abs() < 1e-9 { 1.0 } else { half.sin() / half };
            let v = (dx * mid.cos() + dy * mid.sin()) / (h * sinc);
            prev = *p;
            (v, w)
        })
        .collect()
}

fn kinematics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_arc = 0.0f64;
    for _ in 0..10_000 {
        let dt = rng.random_range(0.01..2.0);
        let cfg = DynamicsConfig::first_order(0.5, 1.0, dt, 0.1);
        let a = Action::new(rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0));
        let (v, w) = (a.linear * cfg.v_max, a.angular * cfg.w_max);
        let start = Pose::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-PI..PI));
        let mut s = DynamicsState::new(start);
        dynamics::step(&mut s, a, &cfg, &NoCollisions);
        let want = closed_form_arc(&start, v, w, dt);
        let err = (s.pose.x - want.x).hypot(s.pose.y - want.y);
        worst_arc = worst_arc.max(err).max(wrap_angle(s.pose.heading - want.heading).abs());
    }

    // caps and acceleration limits, checked on the recovered substep twists
    let mut limit_violations = 0usize;
    let mut substeps = 0usize;
    for run in 0..200 {
        let cfg = DynamicsConfig::higher_order(0.26, 1.0, if run % 2 == 0 { 0.5 } else { 0.1 }, 0.15);
        let h = cfg.dt / cfg.substeps() as f64;
        let mut s = DynamicsState::new(Pose::new(0.0, 0.0, 0.0));
        let (mut pv, mut pw) = (0.0, 0.0);
        for _ in 0..50 {
            let a = Action::new(rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0));
            let start = s.pose;
            let out = dynamics::step(&mut s, a, &cfg, &NoCollisions);
            for (v, w) in substep_twists(start, &out.path, h) {
                substeps += 1;
                let tol = 1e-7;
                if v.abs() > cfg.v_max + tol
                    || w.abs() > cfg.w_max + tol
                    || (v - pv).abs() > cfg.a_lin_max * h + tol
                    || (w - pw).abs() > cfg.a_ang_max * h + tol
                {
                    limit_violations += 1;
                }
                (pv, pw) = (v, w);
            }
        }
    }

    // action delay: from rest, the first substep that moves the robot
    let mut delay_errors = 0usize;
    let mut worst_delay = 0.0f64;
    for trial in 0..200 {
        let cfg = DynamicsConfig::higher_order(0.26, 1.0, [0.5, 0.1, 0.2][trial % 3], 0.15);
        let h = cfg.dt / cfg.substeps() as f64;
        let mut s = DynamicsState::new(Pose::new(1.0, 1.0, 0.3));
        for _ in 0..rng.random_range(0..5) {
            dynamics::step(&mut s, Action::ZERO, &cfg, &NoCollisions);
        }
        let issued = s.time;
        let a = Action::new(rng.random_range(0.2..=1.0), rng.random_range(-1.0..=1.0));
        let mut first = None;
        let mut action = a;
        while first.is_none() && s.time < issued + 1.0 {
            let before = s.pose;
            let step_start = s.time;
            let out = dynamics::step(&mut s, action, &cfg, &NoCollisions);
            action = a;
            let mut prev = before;
            for (k, p) in out.path.iter().enumerate() {
                if (p.x - prev.x).abs() > 0.0 || (p.y - prev.y).abs() > 0.0 || p.heading != prev.heading {
                    // motion starts at the beginning of this substep
                    first = Some(step_start + k as f64 * h);
                    break;
                }
                prev = *p;
            }
        }
        match first {
            Some(t) => {
                let off = (t - issued - cfg.action_delay).abs();
                worst_delay = worst_delay.max(off);
                if off > h + 1e-9 {
                    delay_errors += 1;
                }
            }
            None => delay_errors += 1,
        }
    }
    check(
        worst_arc <= 1e-6 && limit_violations == 0 && delay_errors == 0,
        format!(
            "10000 arcs max error {worst_arc:.1e}; {substeps} substeps, {limit_violations} limit violations; delay max offset {:.0} ms, {delay_errors} errors",
            worst_delay * 1000.0
        ),
    )
}

// ----------------------------------------------------------- mapgen

/// Traversable cells: no obstacle cell center closer than the clearance.
fn brute_cspace(map: &WorldMap, radius: f64) -> Grid<bool> {
    let k = clearance_cells(radius, map.resolution());
    let ki = k.ceil() as i64;
    let (w, h) = (map.width() as i64, map.height() as i64);
    let mut offsets = Vec::new();
    for dy in -ki..=ki {
        for dx in -ki..=ki {
            if ((dx * dx + dy * dy) as f64) < k * k {
                offsets.push((dx, dy));
            }
        }
    }
    Grid::from_fn(w as usize, h as usize, |x, y| {
        offsets.iter().all(|&(dx, dy)| {
            let (a, b) = (x as i64 + dx, y as i64 + dy);
            a >= 0 && b >= 0 && a < w && b < h && !map.is_obstacle(a as usize, b as usize)
        })
    })
}

fn components4(mask: &Grid<bool>) -> usize {
    let mut seen = Grid::new(mask.width(), mask.height(), false);
    let mut count = 0;
    for start in 0..mask.len() {
        if !mask.data()[start] || seen.data()[start] {
            continue;
        }
        count += 1;
        let mut stack = vec![start];
        seen.data_mut()[start] = true;
        while let Some(i) = stack.pop() {
            let (x, y) = mask.coords(i);
            for (a, b) in mask.neighbors4(x, y) {
                let j = mask.index(a, b);
                if mask.data()[j] && !seen.data()[j] {
                    seen.data_mut()[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    count
}

/// Problems found in one generated map.
fn map_problems(task: Task, seed: u64) -> Vec<String> {
    let params = MapGenParams::for_task(task);
    let g = generate_map_seeded(seed, &params);
    let map = &g.map;
    let res = map.resolution();
    let mut out = Vec::new();

    let again = generate_map_seeded(seed, &params);
    if again.map != g.map || again.obstacles != g.obstacles || again.floorplan != g.floorplan {
        out.push("not deterministic".into());
    }

    let (lo, hi) = params.side_range;
    let interior = (map.width() - 2) as f64 * res;
    if map.width() != map.height() || interior < lo - res || interior > hi + res || (g.side - interior).abs() > 1e-9 {
        out.push(format!("side {interior:.3} outside [{lo}, {hi}]"));
    }

    if components4(&brute_cspace(map, task.agent_radius())) != 1 {
        out.push("free space not connected at clearance".into());
    }

    // each disc owns exactly the cells whose centers lie within its radius
    let mut disc_cell = Grid::new(map.width(), map.height(), false);
    for o in &g.obstacles {
        let (gx, gy) = ((o.x - map.origin().0) / res, (o.y - map.origin().1) / res);
        let r = o.radius / res;
        for y in 0..map.height() {
            for x in 0..map.width() {
                if (x as f64 + 0.5 - gx).hypot(y as f64 + 0.5 - gy) <= r {
                    if !map.is_obstacle(x, y) {
                        out.push("disc cell left free".into());
                    }
                    disc_cell.set(x, y, true);
                }
            }
        }
    }
    for (i, a) in g.obstacles.iter().enumerate() {
        for b in &g.obstacles[i + 1..] {
            let gap = (a.x - b.x).hypot(a.y - b.y) - a.radius - b.radius;
            if gap < 0.6 {
                out.push(format!("disc gap {gap:.3}"));
            }
        }
        // gap to the nearest wall cell square
        let reach = ((a.radius + 0.6) / res).ceil() as i64 + 2;
        let (cx, cy) = map.cell_at(a.x, a.y).expect("disc inside map");
        for dy in -reach..=reach {
            for dx in -reach..=reach {
                let (x, y) = (cx as i64 + dx, cy as i64 + dy);
                if x < 0 || y < 0 || x >= map.width() as i64 || y >= map.height() as i64 {
                    continue;
                }
                let (x, y) = (x as usize, y as usize);
                if map.is_obstacle(x, y) && !disc_cell.get(x, y) {
                    let (wx, wy) = map.cell_center(x, y);
                    let ddx = ((wx - a.x).abs() - res / 2.0).max(0.0);
                    let ddy = ((wy - a.y).abs() - res / 2.0).max(0.0);
                    let gap = ddx.hypot(ddy) - a.radius;
                    if gap < 0.6 - 1e-9 {
                        out.push(format!("wall gap {gap:.3}"));
                    }
                }
            }
        }
    }

    if let Some(fp) = &g.floorplan {
        if !(0.6..=1.2).contains(&fp.door_width) {
            out.push(format!("door width {}", fp.door_width));
        }
        for wall in &fp.walls {
            // a row of cells through the wall center line
            let across = ((wall.position - map.origin().0) / res).floor() as usize;
            for seg in &wall.segments {
                let Some((s, e)) = seg.door else { continue };
                let width = e - s;
                if !(0.6 - 1e-9..=1.2 + 1e-9).contains(&width) {
                    out.push(format!("door opening {width:.3}"));
                }
                let free = (0..map.width())
                    .filter(|&b| {
                        let cb = (b as f64 + 0.5) * res;
                        cb >= s && cb < e
                    })
                    .filter(|&b| {
                        let (x, y) = if wall.vertical { (across, b) } else { (b, across) };
                        !map.is_obstacle(x, y)
                    })
                    .count();
                let measured = free as f64 * res;
                if (measured - width).abs() > res + 1e-9 {
                    out.push(format!("door raster {measured:.3} vs {width:.3}"));
                }
            }
        }
    }
    out
}

fn map_generator() -> Outcome {
    let mut summary = Vec::new();
    let mut failures = 0;
    for task in [Task::Mowing, Task::Exploration] {
        let problems: Vec<(u64, Vec<String>)> = (0..1000u64)
            .into_par_iter()
            .map(|s| (s, map_problems(task, s)))
            .filter(|(_, p)| !p.is_empty())
            .collect();
        failures += problems.len();
        summary.push(format!("{task}: {} bad seeds", problems.len()));
        for (s, p) in problems.iter().take(3) {
            summary.push(format!("seed {s}: {}", p.join("; ")));
        }
    }
    check(failures == 0, summary.join(", "))
}

// --------------------------------------------------------- planners

fn brute_force_open_tour(costs: &CostTable, start: usize) -> f64 {
    fn go(costs: &CostTable, cur: usize, rest: &mut Vec<usize>, acc: f64, best: &mut f64) {
        if acc >= *best {
            return;
        }
        if rest.is_empty() {
            *best = acc;
            return;
        }
        for k in 0..rest.len() {
            let n = rest.swap_remove(k);
            go(costs, n, rest, acc + costs.cost(cur, n), best);
            rest.push(n);
            let last = rest.len() - 1;
            rest.swap(k, last);
        }
    }
    let mut rest: Vec<usize> = (0..costs.len()).filter(|&i| i != start).collect();
    let mut best = f64::INFINITY;
    go(costs, start, &mut rest, 0.0, &mut best);
    best
}

/// Small instances: Euclidean points and shortest-path costs between cells
/// of random obstacle grids.
fn tsp_instances() -> Vec<CostTable> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut out = Vec::new();
    for k in 0..600 {
        let n = 2 + k % 8;
        if k % 2 == 0 {
            let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.random_range(0.0..10.0), rng.random_range(0.0..10.0))).collect();
            out.push(CostTable::from_fn(n, |i, j| (pts[i].0 - pts[j].0).hypot(pts[i].1 - pts[j].1)));
        } else {
            let g = Grid::from_fn(24, 24, |_, _| rng.random_bool(0.8));
            let free: Vec<usize> = (0..g.len()).filter(|&i| g.data()[i]).collect();
            let nodes: Vec<usize> = (0..n).map(|_| free[rng.random_range(0..free.len())]).collect();
            let dist: Vec<Vec<f64>> = nodes
                .iter()
                .map(|&s| {
                    let (d, _) = covpath::planners::astar::Dijkstra::run(&g, g.coords(s), f64::INFINITY, |_| false);
                    nodes.iter().map(|&t| d.cost[t]).collect()
                })
                .collect();
            if dist.iter().flatten().all(|c| c.is_finite()) {
                out.push(CostTable::from_fn(n, |i, j| dist[i][j]));
            }
        }
    }
    out
}

fn suite_maps(cfg: &EpisodeConfig) -> Vec<SuiteMap> {
    (0..50u64)
        .map(|s| {
            let g = generate_map_seeded(s, &MapGenParams::for_task(Task::Mowing));
            SuiteMap::new(format!("mowing-{s:04}"), g.map, cfg).expect("arena")
        })
        .collect()
}

fn planner_results() -> (Vec<EpisodeResult>, Vec<EpisodeResult>, f64) {
    let start = Instant::now();
    let cfg = EpisodeConfig::for_task(Task::Mowing);
    let maps = suite_maps(&cfg);
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    let run = |kind: PlannerKind| run_suite(&maps, &cfg, &move |_| kind.controller(), &[0], jobs, false);
    let bsa = run(PlannerKind::Bsa);
    let tsp = run(PlannerKind::TspOnline);
    (bsa, tsp, start.elapsed().as_secs_f64())
}

fn planner_completeness(bsa: &[EpisodeResult], tsp: &[EpisodeResult], suite_secs: f64) -> Outcome {
    let start = Instant::now();
    let cfg = TspConfig::default();
    let instances = tsp_instances();
    let mut worst = 1.0f64;
    for costs in &instances {
        let tour = solve_open_tour(costs, 0, &cfg, &mut 0);
        let mut sorted = tour.clone();
        sorted.sort();
        if sorted != (0..costs.len()).collect::<Vec<_>>() || tour[0] != 0 {
            return Err("tour is not a permutation starting at the root".into());
        }
        let opt = brute_force_open_tour(costs, 0);
        let ratio = if opt > 0.0 { costs.path_cost(&tour) / opt } else { 1.0 };
        worst = worst.max(ratio);
    }
    let secs = suite_secs + start.elapsed().as_secs_f64();
    let low = |r: &[EpisodeResult]| r.iter().filter(|e| e.metrics.final_coverage < 0.99).count();
    let min = |r: &[EpisodeResult]| r.iter().map(|e| e.metrics.final_coverage).fold(1.0, f64::min);
    check(
        low(bsa) == 0 && low(tsp) == 0 && bsa.len() == 50 && tsp.len() == 50 && worst <= 1.15 && secs < 600.0,
        format!(
            "BSA min coverage {:.4}, online TSP min {:.4} on 50 maps; {} TSP instances worst ratio {worst:.4}; {secs:.0} s",
            min(bsa),
            min(tsp),
            instances.len()
        ),
    )
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn planner_ordering(bsa: &[EpisodeResult], tsp: &[EpisodeResult]) -> Outcome {
    // maps where both planners reach 99%
    let pairs: Vec<(f64, f64)> = bsa
        .iter()
        .zip(tsp)
        .filter(|(a, b)| a.map == b.map)
        .filter_map(|(a, b)| Some((a.metrics.t99?, b.metrics.t99?)))
        .collect();
    let mb = median(pairs.iter().map(|p| p.0).collect());
    let mt = median(pairs.iter().map(|p| p.1).collect());
    let wins = pairs.iter().filter(|p| p.0 < p.1).count();
    check(
        pairs.len() >= 20 && mb < mt,
        format!(
            "median T99 BSA {:.1} min vs online TSP {:.1} min over {} maps; BSA faster on {wins}",
            mb / 60.0,
            mt / 60.0,
            pairs.len()
        ),
    )
}

// -------------------------------------------------------------- CLI

fn run_cli(bin: &str, args: &[&str]) -> Result<(), String> {
    let out = Command::new(bin).args(args).output().map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{bin} {args:?} failed: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

fn read(dir: &Path, name: &str) -> Result<Vec<u8>, String> {
    std::fs::read(dir.join(name)).map_err(|e| format!("{name}: {e}"))
}

fn cli_determinism() -> Outcome {
    let gen = env!("CARGO_BIN_EXE_covpath-gen");
    let bench = env!("CARGO_BIN_EXE_covpath-bench");
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (maps_a, maps_b) = (tmp.path().join("maps_a"), tmp.path().join("maps_b"));
    for dir in [&maps_a, &maps_b] {
        run_cli(gen, &["--task", "mowing", "--seed", "3", "--count", "3", "--out-dir", dir.to_str().unwrap()])?;
    }
    for f in ["mowing-0000.map", "mowing-0001.map", "mowing-0002.map", "manifest.jsonl"] {
        if read(&maps_a, f)? != read(&maps_b, f)? {
            return Err(format!("generated {f} differs"));
        }
    }
    let mut outputs = Vec::new();
    for (run, jobs) in [(0, "1"), (1, "1"), (2, "2")] {
        let out = tmp.path().join(format!("out{run}"));
        run_cli(
            bench,
            &[
                "run",
                "--task",
                "mowing",
                "--controller",
                "bsa",
                "--maps",
                maps_a.to_str().unwrap(),
                "--seeds",
                "2",
                "--jobs",
                jobs,
                "--out",
                out.to_str().unwrap(),
            ],
        )?;
        outputs.push((read(&out, "episodes.csv")?, read(&out, "summary.csv")?));
    }
    let same = outputs.windows(2).all(|w| w[0] == w[1]);
    check(
        same && !outputs[0].0.is_empty(),
        format!("3 runs (jobs 1, 1, 2): episodes.csv {} bytes, identical: {same}", outputs[0].0.len()),
    )
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report = |name: &str, outcome: Outcome| {
        match &outcome {
            Ok(d) => println!("PASS  {name:<24} {d}"),
            Err(d) => println!("FAIL  {name:<24} {d}"),
        }
        failed += outcome.is_err() as usize;
    };
    report("tv-oracle", tv_oracle());
    let (episodes, slack) = random_episodes();
    report("coverage-conservation", coverage_conservation(&episodes));
    report("frontier-persistence", frontier_persistence());
    report("raycast-oracle", raycast_oracle());
    report("kinematics", kinematics());
    report("map-generator", map_generator());
    let (bsa, tsp, secs) = planner_results();
    report("planner-completeness", planner_completeness(&bsa, &tsp, secs));
    report("planner-ordering", planner_ordering(&bsa, &tsp));
    report("reward-bounds", reward_bounds(&episodes, slack));
    report("cli-determinism", cli_determinism());
    if failed == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria failed");
        ExitCode::FAILURE
    }
}
