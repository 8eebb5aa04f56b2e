//! Hits, truth particles and events, with their JSON and CSV file formats.
//!
//! After ingestion hit ids are dense: `event.hits[i].id == i`. Ids found in a
//! file that are not already dense are remapped and the originals kept in
//! [`Event::original_ids`], so that writing the event back reproduces the file
//! contents.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on the z position shared by hits of one module.
pub const MODULE_Z_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Hit {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub module: usize,
    pub truth_id: Option<i64>,
}

impl Hit {
    pub fn position(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthParticle {
    pub id: i64,
    pub origin: [f64; 3],
    pub direction: [f64; 3],
    pub hit_ids: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub hits: Vec<Hit>,
    pub particles: Vec<TruthParticle>,
    pub geometry_id: String,
    /// Ids as they appeared in the source file, when they had to be remapped.
    pub original_ids: Option<Vec<u64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventFormat {
    Json,
    Csv,
}

impl FromStr for EventFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(EventFormat::Json),
            "csv" => Ok(EventFormat::Csv),
            other => Err(Error::Config(format!("unknown event format '{other}'"))),
        }
    }
}

impl Event {
    /// Builds an event from hits whose ids are not necessarily dense.
    ///
    /// Particle `hit_ids` refer to the raw ids and are remapped alongside.
    pub fn from_raw(
        raw_hits: Vec<(u64, Hit)>,
        mut particles: Vec<TruthParticle>,
        geometry_id: String,
    ) -> Result<Self> {
        let mut index = HashMap::with_capacity(raw_hits.len());
        for (pos, (raw, _)) in raw_hits.iter().enumerate() {
            if index.insert(*raw, pos).is_some() {
                return Err(Error::DuplicateHitId(*raw));
            }
        }
        let dense = raw_hits
            .iter()
            .enumerate()
            .all(|(pos, (raw, _))| *raw == pos as u64);

        for p in &mut particles {
            for h in &mut p.hit_ids {
                *h = *index.get(&(*h as u64)).ok_or_else(|| {
                    Error::InvalidEvent(format!("particle {} references unknown hit {h}", p.id))
                })?;
            }
        }
        let original_ids = (!dense).then(|| raw_hits.iter().map(|(raw, _)| *raw).collect());
        let hits = raw_hits
            .into_iter()
            .enumerate()
            .map(|(pos, (_, mut hit))| {
                hit.id = pos;
                hit
            })
            .collect();

        let event = Event {
            hits,
            particles,
            geometry_id,
            original_ids,
        };
        event.validate()?;
        Ok(event)
    }

    /// Number of hits in the event.
    pub fn n_hits(&self) -> usize {
        self.hits.len()
    }

    pub fn has_truth(&self) -> bool {
        !self.particles.is_empty()
    }

    /// Id of hit `i` as it should appear on disk.
    pub fn external_id(&self, i: usize) -> u64 {
        match &self.original_ids {
            Some(ids) => ids[i],
            None => i as u64,
        }
    }

    /// Checks the structural invariants of an event.
    pub fn validate(&self) -> Result<()> {
        for (pos, hit) in self.hits.iter().enumerate() {
            if hit.id != pos {
                return Err(Error::InvalidEvent(format!(
                    "hit at position {pos} carries id {}",
                    hit.id
                )));
            }
            if ![hit.x, hit.y, hit.z].iter().all(|v| v.is_finite()) {
                return Err(Error::InvalidEvent(format!(
                    "hit {pos} has a non-finite coordinate"
                )));
            }
        }

        // every module sits at a single z, increasing with the module index
        let mut module_z: BTreeMap<usize, (usize, f64)> = BTreeMap::new();
        for hit in &self.hits {
            let (first, z) = *module_z.entry(hit.module).or_insert((hit.id, hit.z));
            if (hit.z - z).abs() > MODULE_Z_TOLERANCE {
                return Err(Error::ModuleMismatch {
                    hit: hit.id,
                    module: hit.module,
                    z: hit.z,
                    expected: self.hits[first].z,
                });
            }
        }
        let layers: Vec<_> = module_z.iter().collect();
        for pair in layers.windows(2) {
            let (&m0, &(_, z0)) = pair[0];
            let (&m1, &(_, z1)) = pair[1];
            if z1 <= z0 {
                return Err(Error::InvalidEvent(format!(
                    "module {m1} (z = {z1}) is not downstream of module {m0} (z = {z0})"
                )));
            }
        }

        let mut seen = HashMap::new();
        for p in &self.particles {
            if seen.insert(p.id, ()).is_some() {
                return Err(Error::InvalidEvent(format!(
                    "duplicate particle id {}",
                    p.id
                )));
            }
            let norm = p.direction.iter().map(|d| d * d).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidEvent(format!(
                    "particle {} direction has norm {norm}",
                    p.id
                )));
            }
            for &h in &p.hit_ids {
                let hit = self.hits.get(h).ok_or_else(|| {
                    Error::InvalidEvent(format!("particle {} references unknown hit {h}", p.id))
                })?;
                if hit.truth_id != Some(p.id) {
                    return Err(Error::InvalidEvent(format!(
                        "particle {} lists hit {h} whose truth id is {:?}",
                        p.id, hit.truth_id
                    )));
                }
            }
        }
        Ok(())
    }

    /// Sorted list of distinct module indices present in the event.
    pub fn modules(&self) -> Vec<usize> {
        let mut m: Vec<_> = self.hits.iter().map(|h| h.module).collect();
        m.sort_unstable();
        m.dedup();
        m
    }
}

#[derive(Serialize, Deserialize)]
struct HitRecord {
    id: u64,
    x: f64,
    y: f64,
    z: f64,
    module: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    truth_id: Option<i64>,
}

#[derive(Serialize, Deserialize)]
struct EventRecord {
    hits: Vec<HitRecord>,
    #[serde(default)]
    particles: Vec<ParticleRecord>,
    #[serde(default)]
    geometry_id: String,
}

#[derive(Serialize, Deserialize)]
struct ParticleRecord {
    id: i64,
    origin: [f64; 3],
    direction: [f64; 3],
    hit_ids: Vec<u64>,
}

pub fn read_event(path: impl AsRef<Path>, format: EventFormat) -> Result<Event> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    match format {
        EventFormat::Json => read_json(reader, path),
        EventFormat::Csv => read_csv(reader, path),
    }
}

pub fn write_event(event: &Event, path: impl AsRef<Path>, format: EventFormat) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    match format {
        EventFormat::Json => write_json(event, &mut w),
        EventFormat::Csv => write_csv(event, &mut w),
    }
    .and_then(|_| w.flush())
    .map_err(|e| Error::io(path, e))
}

/// Parses an event from a JSON string.
pub fn event_from_json(text: &str) -> Result<Event> {
    read_json(text.as_bytes(), Path::new("<string>"))
}

pub fn event_to_json(event: &Event) -> String {
    let mut buf = Vec::new();
    write_json(event, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

fn read_json(reader: impl std::io::Read, path: &Path) -> Result<Event> {
    let record: EventRecord = serde_json::from_reader(reader).map_err(|e| Error::Parse {
        location: format!("{}:{}:{}", path.display(), e.line(), e.column()),
        message: e.to_string(),
    })?;
    let hits = record
        .hits
        .into_iter()
        .map(|h| {
            (
                h.id,
                Hit {
                    id: 0,
                    x: h.x,
                    y: h.y,
                    z: h.z,
                    module: h.module,
                    truth_id: h.truth_id,
                },
            )
        })
        .collect();
    let particles = record
        .particles
        .into_iter()
        .map(|p| TruthParticle {
            id: p.id,
            origin: p.origin,
            direction: p.direction,
            hit_ids: p.hit_ids.into_iter().map(|h| h as usize).collect(),
        })
        .collect();
    Event::from_raw(hits, particles, record.geometry_id)
}

fn write_json(event: &Event, w: &mut impl Write) -> std::io::Result<()> {
    let record = EventRecord {
        hits: event
            .hits
            .iter()
            .map(|h| HitRecord {
                id: event.external_id(h.id),
                x: h.x,
                y: h.y,
                z: h.z,
                module: h.module,
                truth_id: h.truth_id,
            })
            .collect(),
        particles: event
            .particles
            .iter()
            .map(|p| ParticleRecord {
                id: p.id,
                origin: p.origin,
                direction: p.direction,
                hit_ids: p.hit_ids.iter().map(|&h| event.external_id(h)).collect(),
            })
            .collect(),
        geometry_id: event.geometry_id.clone(),
    };
    serde_json::to_writer_pretty(&mut *w, &record)?;
    writeln!(w)
}

const CSV_HEADER: [&str; 6] = ["id", "x", "y", "z", "module", "truth_id"];

fn read_csv(reader: impl std::io::Read, path: &Path) -> Result<Event> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| csv_error(path, &e))?.clone();
    if header.iter().map(str::trim).ne(CSV_HEADER.iter().copied()) {
        return Err(Error::Parse {
            location: format!("{}:1", path.display()),
            message: format!("expected header '{}'", CSV_HEADER.join(",")),
        });
    }

    let mut hits = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(path, &e))?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(i).unwrap_or("").trim();
        let parse_err = |i: usize, message: String| Error::Parse {
            location: format!("{}:{line}:{}", path.display(), CSV_HEADER[i]),
            message,
        };
        let num = |i: usize| -> Result<f64> {
            field(i)
                .parse::<f64>()
                .map_err(|e| parse_err(i, format!("'{}': {e}", field(i))))
        };
        let id = field(0)
            .parse::<u64>()
            .map_err(|e| parse_err(0, format!("'{}': {e}", field(0))))?;
        let module = field(4)
            .parse::<usize>()
            .map_err(|e| parse_err(4, format!("'{}': {e}", field(4))))?;
        let truth_id = match field(5) {
            "" => None,
            s => Some(
                s.parse::<i64>()
                    .map_err(|e| parse_err(5, format!("'{s}': {e}")))?,
            ),
        };
        hits.push((
            id,
            Hit {
                id: 0,
                x: num(1)?,
                y: num(2)?,
                z: num(3)?,
                module,
                truth_id,
            },
        ));
    }
    Event::from_raw(hits, Vec::new(), String::new())
}

fn csv_error(path: &Path, e: &csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::Parse {
        location: format!("{}:{line}", path.display()),
        message: e.to_string(),
    }
}

fn write_csv(event: &Event, w: &mut impl Write) -> std::io::Result<()> {
    writeln!(w, "{}", CSV_HEADER.join(","))?;
    for h in &event.hits {
        let truth = h.truth_id.map(|t| t.to_string()).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{}",
            event.external_id(h.id),
            fmt_real(h.x),
            fmt_real(h.y),
            fmt_real(h.z),
            h.module,
            truth
        )?;
    }
    Ok(())
}

/// Decimal rendering with 17 significant digits, exact under re-parsing.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}
