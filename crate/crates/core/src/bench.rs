//! Coverage metrics, multi-map evaluation and CSV artifacts.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::io;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::episode::{run_episode, Arena, Controller, Episode, EpisodeConfig, EpisodeError, Status, StepRecord};
use crate::worldmodel::{wrap_angle, WorldMap};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageMetrics {
    /// Seconds until 90% / 99% of the coverable area was covered.
    pub t90: Option<f64>,
    pub t99: Option<f64>,
    pub path_length: f64,
    /// Accumulated |heading change| in full turns.
    pub full_rotations: f64,
    pub collisions: u32,
    pub collisions_per_minute: f64,
    pub collisions_per_meter: f64,
    pub duration: f64,
    pub final_coverage: f64,
    pub reached_goal: bool,
}

/// Time at which coverage first reaches `level`, interpolated between the
/// two records around the crossing.
pub fn time_to_coverage(records: &[StepRecord], level: f64) -> Option<f64> {
    let k = records.iter().position(|r| r.coverage >= level)?;
    if k == 0 {
        return Some(records[0].t);
    }
    let (a, b) = (&records[k - 1], &records[k]);
    let span = b.coverage - a.coverage;
    if span <= 0.0 {
        return Some(b.t);
    }
    Some(a.t + (level - a.coverage) / span * (b.t - a.t))
}

fn rate(count: u32, per: f64) -> f64 {
    if count == 0 {
        0.0
    } else if per > 0.0 {
        count as f64 / per
    } else {
        f64::INFINITY
    }
}

/// Metrics of one episode log. `goal` is the coverage fraction that counts
/// as done.
pub fn compute_metrics(records: &[StepRecord], goal: f64) -> CoverageMetrics {
    let mut path_length = 0.0;
    let mut turned = 0.0;
    for w in records.windows(2) {
        path_length += (w[1].x - w[0].x).hypot(w[1].y - w[0].y);
        turned += wrap_angle(w[1].heading - w[0].heading).abs();
    }
    let collisions = records.iter().map(|r| r.collided as u32).sum();
    let duration = records.last().map_or(0.0, |r| r.t) - records.first().map_or(0.0, |r| r.t);
    let t99 = time_to_coverage(records, 0.99);
    CoverageMetrics {
        t90: time_to_coverage(records, 0.9),
        t99,
        path_length,
        full_rotations: turned / TAU,
        collisions,
        collisions_per_minute: rate(collisions, duration / 60.0),
        collisions_per_meter: rate(collisions, path_length),
        duration,
        final_coverage: records.last().map_or(0.0, |r| r.coverage),
        reached_goal: time_to_coverage(records, goal).is_some(),
    }
}

/// A map prepared for evaluation.
#[derive(Clone, Debug)]
pub struct SuiteMap {
    pub name: String,
    pub arena: Arc<Arena>,
}

impl SuiteMap {
    pub fn new(name: impl Into<String>, world: WorldMap, cfg: &EpisodeConfig) -> Result<Self, EpisodeError> {
        Ok(Self {
            name: name.into(),
            arena: Arc::new(Arena::new(Arc::new(world), cfg)?),
        })
    }
}

/// Builds a fresh controller for an episode seed.
pub type ControllerFactory = dyn Fn(u64) -> Box<dyn Controller + Send> + Sync;

#[derive(Clone, Debug)]
pub struct EpisodeResult {
    pub map: String,
    pub seed: u64,
    pub controller: String,
    pub status: Status,
    pub controller_finished: bool,
    pub metrics: CoverageMetrics,
    pub records: Option<Vec<StepRecord>>,
}

/// Runs every (map, seed) pair on up to `jobs` threads. Results come back
/// sorted by map name, then seed, whatever the input order.
pub fn run_suite(
    maps: &[SuiteMap],
    cfg: &EpisodeConfig,
    controller: &ControllerFactory,
    seeds: &[u64],
    jobs: usize,
    keep_records: bool,
) -> Vec<EpisodeResult> {
    let mut work: Vec<(&SuiteMap, u64)> = maps.iter().flat_map(|m| seeds.iter().map(move |&s| (m, s))).collect();
    work.sort_by(|a, b| a.0.name.cmp(&b.0.name).then(a.1.cmp(&b.1)));
    let run = |&(map, seed): &(&SuiteMap, u64)| {
        let mut c = controller(seed);
        let name = c.name().to_string();
        let outcome = run_episode(Episode::new(cfg.clone(), map.arena.clone(), seed), c.as_mut());
        EpisodeResult {
            map: map.name.clone(),
            seed,
            controller: name,
            status: outcome.status,
            controller_finished: outcome.controller_finished,
            metrics: compute_metrics(&outcome.records, cfg.reward.goal_coverage),
            records: keep_records.then_some(outcome.records),
        }
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build().expect("thread pool");
    pool.install(|| work.par_iter().map(run).collect())
}

/// Mean and sample standard deviation; `None` without data.
fn mean_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (Some(mean), Some(var.sqrt()))
}

/// One line of the summary table: a map, or the `Total` over maps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub map: String,
    pub episodes: usize,
    pub reached_goal: usize,
    pub t90_mean: Option<f64>,
    pub t90_std: Option<f64>,
    pub t99_mean: Option<f64>,
    pub t99_std: Option<f64>,
    pub path_length_mean: Option<f64>,
    pub path_length_std: Option<f64>,
    pub full_rotations_mean: Option<f64>,
    pub full_rotations_std: Option<f64>,
    pub collisions_per_minute_mean: Option<f64>,
    pub collisions_per_meter_mean: Option<f64>,
}

/// Per-map mean ± std over seeds, plus a `Total` row. Times, lengths and
/// rotations add up over maps (their spreads add in quadrature); collision
/// rates are averaged. A total time is only given when every map has one.
pub fn aggregate(results: &[EpisodeResult]) -> Vec<AggregateRow> {
    let mut by_map: BTreeMap<&str, Vec<&EpisodeResult>> = BTreeMap::new();
    for r in results {
        by_map.entry(&r.map).or_default().push(r);
    }
    let mut rows: Vec<AggregateRow> = by_map
        .into_iter()
        .map(|(map, eps)| {
            let col = |f: &dyn Fn(&CoverageMetrics) -> Option<f64>| -> Vec<f64> { eps.iter().filter_map(|e| f(&e.metrics)).collect() };
            let (t90_mean, t90_std) = mean_std(&col(&|m| m.t90));
            let (t99_mean, t99_std) = mean_std(&col(&|m| m.t99));
            let (path_length_mean, path_length_std) = mean_std(&col(&|m| Some(m.path_length)));
            let (full_rotations_mean, full_rotations_std) = mean_std(&col(&|m| Some(m.full_rotations)));
            AggregateRow {
                map: map.to_string(),
                episodes: eps.len(),
                reached_goal: eps.iter().filter(|e| e.metrics.reached_goal).count(),
                t90_mean,
                t90_std,
                t99_mean,
                t99_std,
                path_length_mean,
                path_length_std,
                full_rotations_mean,
                full_rotations_std,
                collisions_per_minute_mean: mean_std(&col(&|m| Some(m.collisions_per_minute))).0,
                collisions_per_meter_mean: mean_std(&col(&|m| Some(m.collisions_per_meter))).0,
            }
        })
        .collect();
    if rows.is_empty() {
        return rows;
    }
    let sum = |mean: fn(&AggregateRow) -> Option<f64>, std: fn(&AggregateRow) -> Option<f64>| {
        let means: Option<Vec<f64>> = rows.iter().map(mean).collect();
        let stds: Option<Vec<f64>> = rows.iter().map(std).collect();
        (
            means.map(|m| m.iter().sum::<f64>()),
            stds.map(|s| s.iter().map(|v| v * v).sum::<f64>().sqrt()),
        )
    };
    let avg = |f: fn(&AggregateRow) -> Option<f64>| mean_std(&rows.iter().filter_map(f).collect::<Vec<_>>()).0;
    let (t90_mean, t90_std) = sum(|r| r.t90_mean, |r| r.t90_std);
    let (t99_mean, t99_std) = sum(|r| r.t99_mean, |r| r.t99_std);
    let (path_length_mean, path_length_std) = sum(|r| r.path_length_mean, |r| r.path_length_std);
    let (full_rotations_mean, full_rotations_std) = sum(|r| r.full_rotations_mean, |r| r.full_rotations_std);
    let total = AggregateRow {
        map: "Total".to_string(),
        episodes: rows.iter().map(|r| r.episodes).sum(),
        reached_goal: rows.iter().map(|r| r.reached_goal).sum(),
        t90_mean,
        t90_std,
        t99_mean,
        t99_std,
        path_length_mean,
        path_length_std,
        full_rotations_mean,
        full_rotations_std,
        collisions_per_minute_mean: avg(|r| r.collisions_per_minute_mean),
        collisions_per_meter_mean: avg(|r| r.collisions_per_meter_mean),
    };
    rows.push(total);
    rows
}

/// Flat per-episode line of the results CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub map: String,
    pub seed: u64,
    pub controller: String,
    pub status: String,
    pub reached_goal: bool,
    pub t90: Option<f64>,
    pub t99: Option<f64>,
    pub path_length: f64,
    pub full_rotations: f64,
    pub collisions: u32,
    pub collisions_per_minute: f64,
    pub collisions_per_meter: f64,
    pub duration: f64,
    pub final_coverage: f64,
}

impl From<&EpisodeResult> for EpisodeRow {
    fn from(r: &EpisodeResult) -> Self {
        let m = &r.metrics;
        Self {
            map: r.map.clone(),
            seed: r.seed,
            controller: r.controller.clone(),
            status: format!("{:?}", r.status),
            reached_goal: m.reached_goal,
            t90: m.t90,
            t99: m.t99,
            path_length: m.path_length,
            full_rotations: m.full_rotations,
            collisions: m.collisions,
            collisions_per_minute: m.collisions_per_minute,
            collisions_per_meter: m.collisions_per_meter,
            duration: m.duration,
            final_coverage: m.final_coverage,
        }
    }
}

fn write_rows<W: io::Write, T: Serialize>(writer: W, rows: impl IntoIterator<Item = T>) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_episodes_csv<W: io::Write>(writer: W, results: &[EpisodeResult]) -> csv::Result<()> {
    write_rows(writer, results.iter().map(EpisodeRow::from))
}

pub fn write_summary_csv<W: io::Write>(writer: W, rows: &[AggregateRow]) -> csv::Result<()> {
    write_rows(writer, rows)
}

pub fn write_trace_csv<W: io::Write>(writer: W, records: &[StepRecord]) -> csv::Result<()> {
    write_rows(writer, records)
}

pub fn read_trace_csv<R: io::Read>(reader: R) -> csv::Result<Vec<StepRecord>> {
    csv::Reader::from_reader(reader).deserialize().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

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
    fn t90_at_exact_step() {
        let recs: Vec<_> = (0..=120).map(|k| record(k as f64 * 0.5, 0.0, 0.0, 0.0, (k as f64 / 100.0 * 0.9).min(1.0))).collect();
        let m = compute_metrics(&recs, 0.99);
        assert!((m.t90.unwrap() - 50.0).abs() < 1e-9);
        assert!(m.t90 <= m.t99);
    }

    #[test]
    fn interpolates_between_steps() {
        let recs = vec![record(0.0, 0.0, 0.0, 0.0, 0.8), record(1.0, 0.0, 0.0, 0.0, 1.0)];
        assert!((time_to_coverage(&recs, 0.9).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn stationary_episode_never_reaches_goal() {
        let recs: Vec<_> = (0..50).map(|k| record(k as f64, 1.0, 1.0, 0.3, 0.01)).collect();
        let m = compute_metrics(&recs, 0.99);
        assert_eq!(m.t90, None);
        assert!(!m.reached_goal);
        assert_eq!(m.path_length, 0.0);
        assert_eq!(m.full_rotations, 0.0);
        assert_eq!(m.collisions_per_meter, 0.0);
    }

    #[test]
    fn rotations_unwrap_heading() {
        let recs: Vec<_> = (0..=40).map(|k| record(k as f64, 0.0, 0.0, wrap_angle(k as f64 * 0.5), 0.0)).collect();
        let m = compute_metrics(&recs, 0.99);
        assert!((m.full_rotations - 20.0 / TAU).abs() < 1e-9);
    }

    #[test]
    fn trace_round_trip_keeps_column_names() {
        let recs = vec![record(0.0, 1.0, 2.0, 0.5, 0.1), record(0.5, 1.1, 2.0, 0.5, 0.2)];
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &recs).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,x,y,heading,a_v,a_w,A_new,r_area,r_tv_g,r_tv_i,r_coll,r_const,r_total,collided,coverage\n"));
        assert_eq!(read_trace_csv(buf.as_slice()).unwrap(), recs);
    }
}
