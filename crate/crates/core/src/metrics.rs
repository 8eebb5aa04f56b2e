//! Truth-matched tracking metrics: track-finding efficiency, fake rate, hit
//! purity and hit efficiency, plus segment-level efficiency/purity.
//!
//! A track is correct when at least [`DEFAULT_PURITY_CUT`] of its hits come
//! from one particle that left hits on at least [`DEFAULT_MIN_LAYERS`]
//! modules. Each particle is credited once; further tracks matching it are
//! clones and count as fakes (they are also reported separately).

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;

use serde::Serialize;

use crate::doublets::DoubletGraph;
use crate::error::{Error, Result};
use crate::event::{Event, TruthParticle};
use crate::tracks::TrackCandidate;

pub const DEFAULT_MIN_LAYERS: usize = 3;
pub const DEFAULT_PURITY_CUT: f64 = 0.7;

/// Reported full-detector figures (LHCb VELO simulation). Not reproducible
/// with the toy detector; kept for reference in reports only.
pub const REFERENCE_TRACK_EFFICIENCY: f64 = 0.97;
pub const REFERENCE_FAKE_RATE: f64 = 0.043;

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn require_truth(event: &Event) -> Result<()> {
    if event.has_truth() {
        Ok(())
    } else {
        Err(Error::MissingTruth)
    }
}

/// Particles whose hits span at least `min_layers` distinct modules.
pub fn acceptance_filter(event: &Event, min_layers: usize) -> Result<Vec<TruthParticle>> {
    require_truth(event)?;
    Ok(event
        .particles
        .iter()
        .filter(|p| {
            let modules: BTreeSet<usize> =
                p.hit_ids.iter().map(|&h| event.hits[h].module).collect();
            modules.len() >= min_layers
        })
        .cloned()
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackMatch {
    pub track: usize,
    pub n_hits: usize,
    /// Majority particle; `None` when no hit carries truth.
    pub particle: Option<i64>,
    pub matched_hits: usize,
    pub hit_purity: f64,
    pub hit_efficiency: f64,
    pub correct: bool,
    pub clone: bool,
}

pub fn match_tracks(
    tracks: &[TrackCandidate],
    event: &Event,
    purity_cut: f64,
) -> Result<Vec<TrackMatch>> {
    let accepted: BTreeSet<i64> = acceptance_filter(event, DEFAULT_MIN_LAYERS)?
        .iter()
        .map(|p| p.id)
        .collect();
    let left: HashMap<i64, usize> = event
        .particles
        .iter()
        .map(|p| (p.id, p.hit_ids.len()))
        .collect();

    let mut matches: Vec<TrackMatch> = tracks
        .iter()
        .enumerate()
        .map(|(track, t)| {
            let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
            for &h in &t.hit_ids {
                if let Some(p) = event.hits[h].truth_id {
                    *counts.entry(p).or_default() += 1;
                }
            }
            // most hits wins; ties go to the smaller particle id
            let best =
                counts
                    .iter()
                    .fold(None, |best: Option<(i64, usize)>, (&p, &c)| match best {
                        Some((_, bc)) if bc >= c => best,
                        _ => Some((p, c)),
                    });
            let (particle, matched_hits) = best.map_or((None, 0), |(p, c)| (Some(p), c));
            let hit_purity = ratio(matched_hits, t.hit_ids.len());
            let hit_efficiency = particle
                .and_then(|p| left.get(&p))
                .map_or(0.0, |&n| ratio(matched_hits, n));
            TrackMatch {
                track,
                n_hits: t.hit_ids.len(),
                particle,
                matched_hits,
                hit_purity,
                hit_efficiency,
                correct: particle.is_some_and(|p| accepted.contains(&p))
                    && hit_purity >= purity_cut,
                clone: false,
            }
        })
        .collect();

    // one credit per particle: most matched hits, then purity, then first track
    let mut credited: BTreeMap<i64, usize> = BTreeMap::new();
    for (i, m) in matches.iter().enumerate().filter(|(_, m)| m.correct) {
        let p = m.particle.expect("correct tracks have a particle");
        match credited.get(&p) {
            Some(&j)
                if (matches[j].matched_hits, matches[j].hit_purity)
                    >= (m.matched_hits, m.hit_purity) => {}
            _ => {
                credited.insert(p, i);
            }
        }
    }
    let winners: BTreeSet<usize> = credited.into_values().collect();
    for (i, m) in matches.iter_mut().enumerate() {
        if m.correct && !winners.contains(&i) {
            m.correct = false;
            m.clone = true;
        }
    }
    Ok(matches)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinVariable {
    /// Angle between the particle direction and the beam (z) axis, radians.
    PolarAngle,
    HitMultiplicity,
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct BinSpec {
    pub variable: BinVariable,
    /// Ascending edges; bin `k` is `[edges[k], edges[k+1])`.
    pub edges: Vec<f64>,
}

impl BinSpec {
    fn value(&self, p: &TruthParticle) -> f64 {
        match self.variable {
            BinVariable::PolarAngle => {
                let [dx, dy, dz] = p.direction;
                (dx * dx + dy * dy).sqrt().atan2(dz)
            }
            BinVariable::HitMultiplicity => p.hit_ids.len() as f64,
        }
    }

    fn bin_of(&self, v: f64) -> Option<usize> {
        self.edges.windows(2).position(|w| w[0] <= v && v < w[1])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinnedEfficiency {
    pub lo: f64,
    pub hi: f64,
    pub n_gen_acc: usize,
    pub n_track_corr: usize,
    pub eff_track: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub n_gen_acc: usize,
    pub n_track_all: usize,
    pub n_track_corr: usize,
    pub n_track_fake: usize,
    pub n_clones: usize,
    pub eff_track: f64,
    pub fake_rate: f64,
    /// Per correct track.
    pub hit_purity: Vec<f64>,
    pub hit_efficiency: Vec<f64>,
    pub e_pure: f64,
    pub e_eff: f64,
    pub binned: Option<Vec<BinnedEfficiency>>,
}

pub fn compute_report(
    matches: &[TrackMatch],
    accepted: &[TruthParticle],
    bins: Option<&BinSpec>,
) -> MetricsReport {
    let correct: Vec<&TrackMatch> = matches.iter().filter(|m| m.correct).collect();
    let n_track_all = matches.len();
    let n_track_corr = correct.len();
    let hit_purity: Vec<f64> = correct.iter().map(|m| m.hit_purity).collect();
    let hit_efficiency: Vec<f64> = correct.iter().map(|m| m.hit_efficiency).collect();

    let binned = bins.map(|spec| {
        let found: BTreeSet<i64> = correct.iter().filter_map(|m| m.particle).collect();
        let mut rows: Vec<BinnedEfficiency> = spec
            .edges
            .windows(2)
            .map(|w| BinnedEfficiency {
                lo: w[0],
                hi: w[1],
                n_gen_acc: 0,
                n_track_corr: 0,
                eff_track: 0.0,
            })
            .collect();
        for p in accepted {
            if let Some(k) = spec.bin_of(spec.value(p)) {
                rows[k].n_gen_acc += 1;
                rows[k].n_track_corr += usize::from(found.contains(&p.id));
            }
        }
        for r in &mut rows {
            r.eff_track = ratio(r.n_track_corr, r.n_gen_acc);
        }
        rows
    });

    MetricsReport {
        n_gen_acc: accepted.len(),
        n_track_all,
        n_track_corr,
        n_track_fake: n_track_all - n_track_corr,
        n_clones: matches.iter().filter(|m| m.clone).count(),
        eff_track: ratio(n_track_corr, accepted.len()),
        fake_rate: ratio(n_track_all - n_track_corr, n_track_all),
        e_pure: mean(&hit_purity),
        e_eff: mean(&hit_efficiency),
        hit_purity,
        hit_efficiency,
        binned,
    }
}

/// Segment (doublet) level: a doublet is true when both hits come from the
/// same particle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SegmentMetrics {
    pub n_true: usize,
    pub n_active: usize,
    pub n_true_active: usize,
    pub efficiency: f64,
    pub purity: f64,
}

impl SegmentMetrics {
    fn from_counts(n_true: usize, n_active: usize, n_true_active: usize) -> Self {
        SegmentMetrics {
            n_true,
            n_active,
            n_true_active,
            efficiency: ratio(n_true_active, n_true),
            purity: ratio(n_true_active, n_active),
        }
    }
}

pub fn true_doublets(event: &Event, graph: &DoubletGraph) -> Result<Vec<bool>> {
    require_truth(event)?;
    Ok(graph
        .doublets
        .iter()
        .map(
            |d| match (event.hits[d.hit_a].truth_id, event.hits[d.hit_b].truth_id) {
                (Some(a), Some(b)) => a == b,
                _ => false,
            },
        )
        .collect())
}

pub fn segment_metrics(
    event: &Event,
    graph: &DoubletGraph,
    active: &[bool],
) -> Result<SegmentMetrics> {
    if active.len() != graph.len() {
        return Err(Error::Dimension {
            expected: graph.len(),
            got: active.len(),
        });
    }
    let truth = true_doublets(event, graph)?;
    let n_true = truth.iter().filter(|&&t| t).count();
    let n_active = active.iter().filter(|&&a| a).count();
    let n_true_active = truth.iter().zip(active).filter(|(&t, &a)| t && a).count();
    Ok(SegmentMetrics::from_counts(n_true, n_active, n_true_active))
}

/// One line of the per-event CSV report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventMetrics {
    pub event: String,
    pub tracks: MetricsReport,
    pub segments: SegmentMetrics,
}

pub const REPORT_CSV_HEADER: &str = "event,n_gen_acc,n_track_all,n_track_corr,n_track_fake,n_clones,\
eff_track,fake_rate,e_pure,e_eff,n_seg_true,n_seg_active,n_seg_true_active,seg_efficiency,seg_purity";

/// Batch totals: counts summed, rates recomputed from the sums, hit
/// purity/efficiency averaged over all correct tracks.
pub fn summarize(rows: &[EventMetrics]) -> EventMetrics {
    let sum = |f: fn(&EventMetrics) -> usize| rows.iter().map(f).sum::<usize>();
    let n_gen_acc = sum(|r| r.tracks.n_gen_acc);
    let n_track_all = sum(|r| r.tracks.n_track_all);
    let n_track_corr = sum(|r| r.tracks.n_track_corr);
    let hit_purity: Vec<f64> = rows
        .iter()
        .flat_map(|r| r.tracks.hit_purity.iter().copied())
        .collect();
    let hit_efficiency: Vec<f64> = rows
        .iter()
        .flat_map(|r| r.tracks.hit_efficiency.iter().copied())
        .collect();
    EventMetrics {
        event: "summary".into(),
        tracks: MetricsReport {
            n_gen_acc,
            n_track_all,
            n_track_corr,
            n_track_fake: n_track_all - n_track_corr,
            n_clones: sum(|r| r.tracks.n_clones),
            eff_track: ratio(n_track_corr, n_gen_acc),
            fake_rate: ratio(n_track_all - n_track_corr, n_track_all),
            e_pure: mean(&hit_purity),
            e_eff: mean(&hit_efficiency),
            hit_purity,
            hit_efficiency,
            binned: None,
        },
        segments: SegmentMetrics::from_counts(
            sum(|r| r.segments.n_true),
            sum(|r| r.segments.n_active),
            sum(|r| r.segments.n_true_active),
        ),
    }
}

/// Header, one row per event, then the summary row.
pub fn write_report_csv(rows: &[EventMetrics], w: &mut impl Write) -> std::io::Result<()> {
    writeln!(w, "{REPORT_CSV_HEADER}")?;
    let summary = summarize(rows);
    for r in rows.iter().chain(std::iter::once(&summary)) {
        let (t, s) = (&r.tracks, &r.segments);
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.event,
            t.n_gen_acc,
            t.n_track_all,
            t.n_track_corr,
            t.n_track_fake,
            t.n_clones,
            t.eff_track,
            t.fake_rate,
            t.e_pure,
            t.e_eff,
            s.n_true,
            s.n_active,
            s.n_true_active,
            s.efficiency,
            s.purity
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::event_from_points;

    /// Attaches particles built from the hits' truth ids.
    fn with_particles(mut ev: Event) -> Event {
        let mut by_particle: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
        for h in &ev.hits {
            if let Some(p) = h.truth_id {
                by_particle.entry(p).or_default().push(h.id);
            }
        }
        ev.particles = by_particle
            .into_iter()
            .map(|(id, hit_ids)| TruthParticle {
                id,
                origin: [0.0; 3],
                direction: [0.0, 0.0, 1.0],
                hit_ids,
            })
            .collect();
        ev
    }

    fn track(hit_ids: Vec<usize>) -> TrackCandidate {
        TrackCandidate {
            hit_ids,
            doublet_ids: vec![],
        }
    }

    /// Particle 0 leaves one hit on each of 10 modules (ids 0..10); particle
    /// 1 likewise (ids 10..20).
    fn two_long_particles() -> Event {
        let pts: Vec<_> = (0..20)
            .map(|i| (0.0, 0.0, i % 10, (i / 10) as i64))
            .collect();
        with_particles(event_from_points(&pts, 10.0))
    }

    #[test]
    fn acceptance_boundary() {
        let ev = with_particles(event_from_points(
            &[
                (0.0, 0.0, 0, 1),
                (0.0, 0.0, 1, 1),
                (0.0, 0.0, 2, 1),
                (1.0, 0.0, 0, 2),
                (1.0, 0.0, 1, 2),
            ],
            10.0,
        ));
        let acc = acceptance_filter(&ev, 3).unwrap();
        assert_eq!(acc.iter().map(|p| p.id).collect::<Vec<_>>(), vec![1]);
        assert_eq!(acceptance_filter(&ev, 2).unwrap().len(), 2);
        let bare = event_from_points(&[(0.0, 0.0, 0, 1)], 10.0);
        assert!(matches!(
            acceptance_filter(&bare, 3),
            Err(Error::MissingTruth)
        ));
    }

    #[test]
    fn seventy_percent_is_inclusive() {
        let ev = two_long_particles();
        // 7 hits of particle 0 and 3 of particle 1
        let t = track((0..7).chain(17..20).collect());
        let m = &match_tracks(&[t], &ev, DEFAULT_PURITY_CUT).unwrap()[0];
        assert!(m.correct);
        assert_eq!(m.particle, Some(0));
        assert!((m.hit_purity - 0.7).abs() < 1e-15);
        assert!((m.hit_efficiency - 0.7).abs() < 1e-15);

        let t = track((0..6).chain(16..20).collect());
        let m = &match_tracks(&[t], &ev, DEFAULT_PURITY_CUT).unwrap()[0];
        assert!(!m.correct && !m.clone);
    }

    #[test]
    fn clones_count_as_fakes() {
        let ev = two_long_particles();
        let tracks = [
            track((0..5).collect()),
            track((0..10).collect()),
            track((10..20).collect()),
        ];
        let m = match_tracks(&tracks, &ev, DEFAULT_PURITY_CUT).unwrap();
        // the longer track takes the credit for particle 0
        assert!(m[0].clone && !m[0].correct);
        assert!(m[1].correct && m[2].correct);
        let acc = acceptance_filter(&ev, 3).unwrap();
        let r = compute_report(&m, &acc, None);
        assert_eq!(
            (r.n_track_all, r.n_track_corr, r.n_track_fake, r.n_clones),
            (3, 2, 1, 1)
        );
        assert_eq!(r.eff_track, 1.0);
        assert!((r.fake_rate - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn out_of_acceptance_particle_is_not_correct() {
        let ev = with_particles(event_from_points(
            &[(0.0, 0.0, 0, 4), (0.0, 0.0, 1, 4)],
            10.0,
        ));
        let m = match_tracks(&[track(vec![0, 1])], &ev, DEFAULT_PURITY_CUT).unwrap();
        assert!(!m[0].correct);
        assert_eq!(m[0].hit_purity, 1.0);
    }

    #[test]
    fn report_arithmetic() {
        let accepted: Vec<TruthParticle> = (0..5)
            .map(|id| TruthParticle {
                id,
                origin: [0.0; 3],
                direction: [0.0, 0.0, 1.0],
                hit_ids: vec![],
            })
            .collect();
        let mk = |i: usize, correct: bool| TrackMatch {
            track: i,
            n_hits: 3,
            particle: Some(i as i64),
            matched_hits: 3,
            hit_purity: 1.0,
            hit_efficiency: 1.0,
            correct,
            clone: false,
        };
        let all: Vec<_> = (0..5).map(|i| mk(i, true)).collect();
        let r = compute_report(&all, &accepted, None);
        assert_eq!((r.eff_track, r.fake_rate), (1.0, 0.0));
        let four: Vec<_> = (0..5).map(|i| mk(i, i != 3)).collect();
        let r = compute_report(&four, &accepted, None);
        assert!((r.eff_track - 0.8).abs() < 1e-15 && (r.fake_rate - 0.2).abs() < 1e-15);
        assert_eq!(r.hit_purity.len(), 4);

        let empty = compute_report(&[], &[], None);
        assert_eq!(
            (empty.eff_track, empty.fake_rate, empty.e_pure),
            (0.0, 0.0, 0.0)
        );
    }

    #[test]
    fn binned_by_polar_angle_and_multiplicity() {
        let p = |id: i64, direction: [f64; 3], n: usize| TruthParticle {
            id,
            origin: [0.0; 3],
            direction,
            hit_ids: (0..n).collect(),
        };
        let s = 0.5f64.sqrt();
        let accepted = vec![
            p(0, [0.0, 0.0, 1.0], 3),
            p(1, [s, 0.0, s], 4),
            p(2, [0.0, s, s], 4),
        ];
        let matched = TrackMatch {
            track: 0,
            n_hits: 4,
            particle: Some(1),
            matched_hits: 4,
            hit_purity: 1.0,
            hit_efficiency: 1.0,
            correct: true,
            clone: false,
        };
        let spec = BinSpec {
            variable: BinVariable::PolarAngle,
            edges: vec![0.0, 0.5, 1.0],
        };
        let bins = compute_report(std::slice::from_ref(&matched), &accepted, Some(&spec))
            .binned
            .unwrap();
        assert_eq!((bins[0].n_gen_acc, bins[0].n_track_corr), (1, 0));
        assert_eq!((bins[1].n_gen_acc, bins[1].n_track_corr), (2, 1));
        assert_eq!(bins[1].eff_track, 0.5);

        let spec = BinSpec {
            variable: BinVariable::HitMultiplicity,
            edges: vec![3.0, 4.0, 5.0],
        };
        let bins = compute_report(&[matched], &accepted, Some(&spec))
            .binned
            .unwrap();
        assert_eq!(
            bins.iter().map(|b| b.n_gen_acc).collect::<Vec<_>>(),
            vec![1, 2]
        );
    }

    #[test]
    fn segment_counts() {
        // particle 0 on modules 0,1,2; a noise-free crossing hit of particle 1 on module 1
        let ev = with_particles(event_from_points(
            &[
                (0.0, 0.0, 0, 0),
                (0.0, 0.0, 1, 0),
                (0.0, 0.0, 2, 0),
                (5.0, 0.0, 1, 1),
            ],
            10.0,
        ));
        let g = DoubletGraph::build(&ev, 0, 1e-9, 1).unwrap();
        let truth = true_doublets(&ev, &g).unwrap();
        assert_eq!(truth.iter().filter(|&&t| t).count(), 2);
        let active: Vec<bool> = (0..g.len()).map(|i| truth[i] || i == 0).collect();
        let s = segment_metrics(&ev, &g, &active).unwrap();
        assert_eq!(s.efficiency, 1.0);
        assert!((s.purity - ratio(2, s.n_active)).abs() < 1e-15);
        assert!(segment_metrics(&ev, &g, &[]).is_err());
    }

    #[test]
    fn csv_has_summary_row() {
        let ev = two_long_particles();
        let m = match_tracks(&[track((0..10).collect())], &ev, DEFAULT_PURITY_CUT).unwrap();
        let acc = acceptance_filter(&ev, 3).unwrap();
        let row = EventMetrics {
            event: "e0".into(),
            tracks: compute_report(&m, &acc, None),
            segments: SegmentMetrics::from_counts(18, 9, 9),
        };
        let mut out = Vec::new();
        write_report_csv(&[row.clone(), row], &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], REPORT_CSV_HEADER);
        assert!(lines[3].starts_with("summary,4,2,2,0,0,0.5,0,1,1,36,18,18,0.5,1"));
    }
}
