//! Candidate segments between consecutive modules and the angular couplings
//! between segments that share a middle hit.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::event::Event;

/// Oriented segment from `hit_a` to `hit_b`, one binary variable of the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Doublet {
    pub id: usize,
    pub hit_a: usize,
    pub hit_b: usize,
    pub seg: [f64; 3],
    pub length: f64,
}

/// Two adjacent doublets `i` (ending at the shared hit) and `j` (starting there).
#[derive(Debug, Clone, PartialEq)]
pub struct TripletCoupling {
    pub i: usize,
    pub j: usize,
    pub cos_theta: f64,
    pub f: bool,
    pub dp_weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DoubletGraph {
    pub doublets: Vec<Doublet>,
    pub couplings: Vec<TripletCoupling>,
    pub epsilon: f64,
    pub lambda: u32,
    /// Number of hits in the source event.
    pub n_hits: usize,
}

impl DoubletGraph {
    pub fn build(event: &Event, max_skip: usize, epsilon: f64, lambda: u32) -> Result<Self> {
        let doublets = build_doublets(event, max_skip);
        let couplings = build_couplings(&doublets, epsilon, lambda)?;
        Ok(DoubletGraph {
            doublets,
            couplings,
            epsilon,
            lambda,
            n_hits: event.n_hits(),
        })
    }

    pub fn len(&self) -> usize {
        self.doublets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doublets.is_empty()
    }

    /// Couplings whose step weight is on.
    pub fn aligned(&self) -> impl Iterator<Item = &TripletCoupling> {
        self.couplings.iter().filter(|c| c.f)
    }
}

/// All ordered hit pairs whose module indices differ by `1..=1 + max_skip`.
pub fn build_doublets(event: &Event, max_skip: usize) -> Vec<Doublet> {
    let mut by_module: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for hit in &event.hits {
        by_module.entry(hit.module).or_default().push(hit.id);
    }

    let mut doublets = Vec::new();
    for (&module, starts) in &by_module {
        for &a in starts {
            let ha = &event.hits[a];
            for step in 1..=1 + max_skip {
                let Some(ends) = by_module.get(&(module + step)) else {
                    continue;
                };
                for &b in ends {
                    let hb = &event.hits[b];
                    let seg = [hb.x - ha.x, hb.y - ha.y, hb.z - ha.z];
                    let length = norm(&seg);
                    doublets.push(Doublet {
                        id: doublets.len(),
                        hit_a: a,
                        hit_b: b,
                        seg,
                        length,
                    });
                }
            }
        }
    }
    doublets
}

/// Step weight: on iff `cos_theta >= 1 - epsilon`.
pub fn angular_step(cos_theta: f64, epsilon: f64) -> Result<bool> {
    let c = checked_cos(cos_theta)?;
    if !(epsilon >= 0.0) {
        return Err(Error::Domain {
            what: "epsilon must be non-negative",
            value: epsilon,
        });
    }
    Ok(c >= 1.0 - epsilon)
}

/// Smooth weight `cos^lambda(theta) / (r_i + r_j)`.
pub fn dp_angular_weight(cos_theta: f64, r_i: f64, r_j: f64, lambda: u32) -> Result<f64> {
    let c = checked_cos(cos_theta)?;
    for r in [r_i, r_j] {
        if !(r > 0.0) {
            return Err(Error::Domain {
                what: "segment length must be positive",
                value: r,
            });
        }
    }
    Ok(c.powi(lambda as i32) / (r_i + r_j))
}

fn checked_cos(cos_theta: f64) -> Result<f64> {
    const BAND: f64 = 1e-12;
    if !(-1.0 - BAND..=1.0 + BAND).contains(&cos_theta) {
        return Err(Error::Domain {
            what: "cos(theta) outside [-1, 1]",
            value: cos_theta,
        });
    }
    Ok(cos_theta.clamp(-1.0, 1.0))
}

pub fn build_couplings(
    doublets: &[Doublet],
    epsilon: f64,
    lambda: u32,
) -> Result<Vec<TripletCoupling>> {
    let mut outgoing: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for d in doublets {
        outgoing.entry(d.hit_a).or_default().push(d.id);
    }

    let mut couplings = Vec::new();
    for di in doublets {
        let Some(next) = outgoing.get(&di.hit_b) else {
            continue;
        };
        for &j in next {
            let dj = &doublets[j];
            let cos_theta = (dot(&di.seg, &dj.seg) / (di.length * dj.length)).clamp(-1.0, 1.0);
            couplings.push(TripletCoupling {
                i: di.id,
                j,
                cos_theta,
                f: angular_step(cos_theta, epsilon)?,
                dp_weight: dp_angular_weight(cos_theta, di.length, dj.length, lambda)?,
            });
        }
    }
    Ok(couplings)
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: &[f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::event_from_points;
    use crate::toy::{generate_event, ToyConfig};

    #[test]
    fn doublet_counts_small_toys() {
        let ev = generate_event(&ToyConfig::new(3, 2, 5)).unwrap();
        assert_eq!(build_doublets(&ev, 0).len(), 8);
        let ev = generate_event(&ToyConfig::new(4, 4, 5)).unwrap();
        assert_eq!(build_doublets(&ev, 0).len(), 48);
        let ev = generate_event(&ToyConfig::new(1, 7, 5)).unwrap();
        assert!(build_doublets(&ev, 0).is_empty());
    }

    #[test]
    fn skips_reach_further_modules() {
        let ev = generate_event(&ToyConfig::new(4, 2, 5)).unwrap();
        // 3 gaps of 1, 2 gaps of 2
        assert_eq!(build_doublets(&ev, 1).len(), 3 * 4 + 2 * 4);
        for d in build_doublets(&ev, 1) {
            assert!(d.seg[2] > 0.0 && d.length > 0.0);
        }
    }

    #[test]
    fn step_function() {
        assert!(angular_step(1.0, 1e-5).unwrap());
        assert!(angular_step(1.0 - 1e-5, 1e-5).unwrap());
        assert!(!angular_step(0.01f64.cos(), 1e-5).unwrap());
        assert!(angular_step(1.0 + 5e-13, 0.0).unwrap());
        assert!(matches!(angular_step(1.1, 1e-5), Err(Error::Domain { .. })));
    }

    #[test]
    fn smooth_weight() {
        assert_eq!(dp_angular_weight(1.0, 1.0, 1.0, 7).unwrap(), 0.5);
        assert_eq!(dp_angular_weight(0.0, 1.0, 1.0, 2).unwrap(), 0.0);
        let w = dp_angular_weight(0.1f64.cos(), 2.0, 2.0, 16).unwrap();
        assert!((w - 0.1f64.cos().powi(16) / 4.0).abs() < 1e-15);
        assert!((w - 0.230_748_235_809_354_5).abs() < 1e-15);
        assert!(dp_angular_weight(1.0, 0.0, 1.0, 1).is_err());
    }

    #[test]
    fn straight_track_single_coupling() {
        let ev = event_from_points(
            &[(0.0, 0.0, 0, 0), (1.0, 2.0, 1, 0), (2.0, 4.0, 2, 0)],
            10.0,
        );
        let g = DoubletGraph::build(&ev, 0, 1e-5, 1).unwrap();
        assert_eq!(g.couplings.len(), 1);
        assert!(g.couplings[0].f);
        assert_eq!((g.couplings[0].i, g.couplings[0].j), (0, 1));
    }

    #[test]
    fn bent_triplet_is_uncoupled() {
        // second segment rotated by 0.5 rad in the xz-plane
        let (s, c) = 0.5f64.sin_cos();
        let ev = event_from_points(
            &[
                (0.0, 0.0, 0, 0),
                (0.0, 0.0, 1, 0),
                (10.0 * s / c, 0.0, 2, 0),
            ],
            10.0,
        );
        let g = DoubletGraph::build(&ev, 0, 1e-5, 1).unwrap();
        assert_eq!(g.couplings.len(), 1);
        assert!((g.couplings[0].cos_theta - c).abs() < 1e-12);
        assert!(!g.couplings[0].f);
    }

    #[test]
    fn disjoint_tracks_enumerated() {
        // two separate tracks that never share a hit in the doublet graph:
        // modules (0,1,2) for track 0, modules (5,6,7) for track 1
        let ev = event_from_points(
            &[
                (0.0, 0.0, 0, 0),
                (1.0, 1.0, 1, 0),
                (2.0, 2.0, 2, 0),
                (-3.0, 6.0, 5, 1),
                (-3.5, 7.0, 6, 1),
                (-4.0, 8.0, 7, 1),
            ],
            10.0,
        );
        let g = DoubletGraph::build(&ev, 0, 1e-5, 1).unwrap();
        // brute-force oracle: every ordered pair of doublets with a shared middle hit
        let mut expect = 0;
        for a in &g.doublets {
            for b in &g.doublets {
                if a.hit_b == b.hit_a {
                    expect += 1;
                }
            }
        }
        assert_eq!(g.couplings.len(), expect);
        assert_eq!(g.aligned().count(), 2);
    }

    #[test]
    fn epsilon_two_turns_everything_on() {
        let ev = generate_event(&ToyConfig::new(4, 3, 8)).unwrap();
        let g = DoubletGraph::build(&ev, 0, 2.0, 1).unwrap();
        assert!(g.couplings.iter().all(|c| c.f));
        // no reverse duplicates
        let mut pairs: Vec<_> = g.couplings.iter().map(|c| (c.i, c.j)).collect();
        pairs.sort_unstable();
        pairs.dedup();
        assert_eq!(pairs.len(), g.couplings.len());
        assert!(g
            .couplings
            .iter()
            .all(|c| g.doublets[c.i].hit_b == g.doublets[c.j].hit_a));
    }
}
