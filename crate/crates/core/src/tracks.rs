//! Active doublets to track candidates.
//!
//! A track is a connected component of active doublets joined through shared
//! hits; bifurcations merge into a single candidate.

use std::collections::VecDeque;
use std::io::Write;

use crate::doublets::DoubletGraph;
use crate::error::{Error, Result};
use crate::event::Event;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrackCandidate {
    /// Sorted by module, then hit id.
    pub hit_ids: Vec<usize>,
    pub doublet_ids: Vec<usize>,
}

impl TrackCandidate {
    pub fn len(&self) -> usize {
        self.hit_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hit_ids.is_empty()
    }
}

pub fn build_tracks(
    event: &Event,
    graph: &DoubletGraph,
    active: &[bool],
) -> Result<Vec<TrackCandidate>> {
    if active.len() != graph.len() {
        return Err(Error::Dimension {
            expected: graph.len(),
            got: active.len(),
        });
    }
    let n_hits = event.n_hits();
    // hit -> active doublets touching it
    let mut touching: Vec<Vec<usize>> = vec![Vec::new(); n_hits];
    for d in graph.doublets.iter().filter(|d| active[d.id]) {
        touching[d.hit_a].push(d.id);
        touching[d.hit_b].push(d.id);
    }

    let mut seen_hit = vec![false; n_hits];
    let mut seen_doublet = vec![false; graph.len()];
    let mut tracks = Vec::new();
    for start in 0..n_hits {
        if seen_hit[start] || touching[start].is_empty() {
            continue;
        }
        let mut hits = Vec::new();
        let mut doublets = Vec::new();
        let mut queue = VecDeque::from([start]);
        seen_hit[start] = true;
        while let Some(h) = queue.pop_front() {
            hits.push(h);
            for &d in &touching[h] {
                if std::mem::replace(&mut seen_doublet[d], true) {
                    continue;
                }
                doublets.push(d);
                let dbl = &graph.doublets[d];
                let other = if dbl.hit_a == h { dbl.hit_b } else { dbl.hit_a };
                if !std::mem::replace(&mut seen_hit[other], true) {
                    queue.push_back(other);
                }
            }
        }
        hits.sort_unstable_by_key(|&h| (event.hits[h].module, h));
        doublets.sort_unstable();
        tracks.push(TrackCandidate {
            hit_ids: hits,
            doublet_ids: doublets,
        });
    }
    Ok(tracks)
}

/// One line per track, comma-separated hit ids.
pub fn write_tracks(tracks: &[TrackCandidate], w: &mut impl Write) -> std::io::Result<()> {
    for t in tracks {
        let ids: Vec<String> = t.hit_ids.iter().map(usize::to_string).collect();
        writeln!(w, "{}", ids.join(","))?;
    }
    Ok(())
}
