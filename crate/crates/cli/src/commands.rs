use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use trackhhl::classical::{calibrate_threshold, solve_least_squares, RelaxedSolution};
use trackhhl::doublets::DoubletGraph;
use trackhhl::event::{read_event, write_event, Event, EventFormat};
use trackhhl::hhl::{self, plan_registers, resource_report, HhlMode, ResourceReport};
use trackhhl::ising::{assemble, pad_system, CouplingMode, Hyperparams};
use trackhhl::linalg::norm2;
use trackhhl::metrics::{
    acceptance_filter, compute_report, match_tracks, segment_metrics, summarize, write_report_csv,
    EventMetrics, DEFAULT_MIN_LAYERS, DEFAULT_PURITY_CUT,
};
use trackhhl::studies::{run_kappa_study, run_sparsity_study, write_study_csv, SweepGrid};
use trackhhl::toy::{generate_batch, generate_event, ToyConfig};
use trackhhl::tracks::{build_tracks, write_tracks, TrackCandidate};

use crate::config::{RunConfig, SolverMode};
use crate::error::CliError;

fn extension(format: EventFormat) -> &'static str {
    match format {
        EventFormat::Json => "json",
        EventFormat::Csv => "csv",
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::data(format!("cannot create {}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::data(format!("cannot create {}: {e}", dir.display())))
}

fn print_json(value: &impl Serialize) -> Result<(), CliError> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| CliError::data(e.to_string()))?;
    writeln!(out)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct ManifestEntry {
    file: String,
    seed: u64,
    n_hits: usize,
}

pub fn generate(cfg: &RunConfig) -> Result<(), CliError> {
    let dir = cfg
        .output
        .as_deref()
        .ok_or_else(|| CliError::config("generate needs --output <dir>"))?;
    let events = generate_batch(&cfg.toy, cfg.n_events)?;
    create_dir(dir)?;
    let mut entries = Vec::with_capacity(events.len());
    for (k, ev) in events.iter().enumerate() {
        let file = format!("event_{k:05}.{}", extension(cfg.format));
        write_event(ev, dir.join(&file), cfg.format)?;
        entries.push(ManifestEntry {
            file,
            seed: cfg.toy.rng_seed.wrapping_add(k as u64),
            n_hits: ev.n_hits(),
        });
    }
    let manifest = json!({
        "geometry_id": cfg.toy.geometry()?.id(),
        "toy": cfg.toy,
        "format": cfg.format,
        "n_events": entries.len(),
        "events": entries,
    });
    let mut w = create(&dir.join("manifest.json"))?;
    serde_json::to_writer_pretty(&mut w, &manifest).map_err(|e| CliError::data(e.to_string()))?;
    writeln!(w)?;
    w.flush()?;
    print_json(&manifest)
}

/// Event files under `input` (a file, or every file of the chosen format in a
/// directory, sorted by name), or a generated toy batch when no input is set.
fn load_events(cfg: &RunConfig) -> Result<Vec<(String, Event)>, CliError> {
    let Some(input) = &cfg.input else {
        return Ok(generate_batch(&cfg.toy, cfg.n_events)?
            .into_iter()
            .enumerate()
            .map(|(k, ev)| (format!("event_{k:05}"), ev))
            .collect());
    };
    let meta = fs::metadata(input)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", input.display())))?;
    let files: Vec<(PathBuf, EventFormat)> = if meta.is_dir() {
        let ext = extension(cfg.format);
        let mut files: Vec<PathBuf> = fs::read_dir(input)?
            .map(|entry| entry.map(|e| e.path()))
            .collect::<io::Result<_>>()?;
        files.retain(|p| {
            p.extension().is_some_and(|e| e == ext)
                && p.file_name().is_some_and(|n| n != "manifest.json")
        });
        files.sort();
        files.into_iter().map(|p| (p, cfg.format)).collect()
    } else {
        let format = match input.extension().and_then(|e| e.to_str()) {
            Some("csv") => EventFormat::Csv,
            Some("json") => EventFormat::Json,
            _ => cfg.format,
        };
        vec![(input.clone(), format)]
    };
    files
        .into_par_iter()
        .map(|(path, format)| {
            let name = path.file_stem().map_or_else(
                || path.display().to_string(),
                |s| s.to_string_lossy().into_owned(),
            );
            let ev = read_event(&path, format)
                .map_err(|e| CliError::from(e).with_context(path.display().to_string()))?;
            Ok((name, ev))
        })
        .collect()
}

struct Reconstruction {
    name: String,
    n_doublets: usize,
    solution: RelaxedSolution,
    tracks: Vec<TrackCandidate>,
    metrics: Option<EventMetrics>,
}

fn solve_event(
    graph: &DoubletGraph,
    hp: &Hyperparams,
    mode: SolverMode,
) -> trackhhl::Result<RelaxedSolution> {
    if graph.is_empty() {
        return Ok(RelaxedSolution::new(vec![], 0.0, hp.threshold));
    }
    let system = assemble(graph, hp, CouplingMode::Step)?;
    let hhl_mode = match mode {
        SolverMode::Classical => return solve_least_squares(&system),
        SolverMode::HhlOracle => HhlMode::SpectralOracle,
        SolverMode::HhlCircuit => HhlMode::FullCircuit,
    };
    let padded = pad_system(&system);
    let plan = plan_registers(&padded)?;
    let result = hhl::solve(&padded, &plan, hhl_mode)?;
    let residual = norm2(&system.gradient(&result.s_quantum)?);
    Ok(RelaxedSolution::new(
        result.s_quantum,
        residual,
        hp.threshold,
    ))
}

fn reconstruct_event(
    name: String,
    ev: &Event,
    cfg: &RunConfig,
) -> trackhhl::Result<Reconstruction> {
    let graph = DoubletGraph::build(ev, 0, cfg.hp.epsilon, cfg.hp.lambda)?;
    let solution = solve_event(&graph, &cfg.hp, cfg.mode)?;
    let tracks = build_tracks(ev, &graph, &solution.active)?;
    let metrics = if ev.has_truth() {
        let matches = match_tracks(&tracks, ev, DEFAULT_PURITY_CUT)?;
        let accepted = acceptance_filter(ev, DEFAULT_MIN_LAYERS)?;
        Some(EventMetrics {
            event: name.clone(),
            tracks: compute_report(&matches, &accepted, None),
            segments: segment_metrics(ev, &graph, &solution.active)?,
        })
    } else {
        None
    };
    // dumps use the ids of the source file
    let tracks = tracks
        .into_iter()
        .map(|t| TrackCandidate {
            hit_ids: t
                .hit_ids
                .iter()
                .map(|&h| ev.external_id(h) as usize)
                .collect(),
            doublet_ids: t.doublet_ids,
        })
        .collect();
    Ok(Reconstruction {
        name,
        n_doublets: graph.len(),
        solution,
        tracks,
        metrics,
    })
}

pub fn reconstruct(cfg: &RunConfig) -> Result<(), CliError> {
    let events = load_events(cfg)?;
    let results: Vec<Reconstruction> = events
        .into_par_iter()
        .map(|(name, ev)| {
            reconstruct_event(name.clone(), &ev, cfg)
                .map_err(|e| CliError::from(e).with_context(name))
        })
        .collect::<Result<_, _>>()?;

    let rows: Vec<EventMetrics> = results.iter().filter_map(|r| r.metrics.clone()).collect();
    if let Some(dir) = &cfg.output {
        create_dir(dir)?;
        for r in &results {
            let mut w = create(&dir.join(format!("{}.solution.txt", r.name)))?;
            r.solution.write_dump(&mut w)?;
            w.flush()?;
            let mut w = create(&dir.join(format!("{}.tracks.txt", r.name)))?;
            write_tracks(&r.tracks, &mut w)?;
            w.flush()?;
        }
        let mut w = create(&dir.join("metrics.csv"))?;
        write_report_csv(&rows, &mut w)?;
        w.flush()?;
    }

    let summary = (!rows.is_empty()).then(|| summarize(&rows));
    print_json(&json!({
        "mode": cfg.mode,
        "threshold": cfg.hp.threshold,
        "n_events": results.len(),
        "events": results.iter().map(|r| json!({
            "event": r.name,
            "n_doublets": r.n_doublets,
            "n_active": r.solution.n_active(),
            "n_tracks": r.tracks.len(),
            "active": r.solution.active,
        })).collect::<Vec<_>>(),
        "summary": summary.map(|s| json!({
            "segment_efficiency": s.segments.efficiency,
            "segment_purity": s.segments.purity,
            "eff_track": s.tracks.eff_track,
            "fake_rate": s.tracks.fake_rate,
            "e_pure": s.tracks.e_pure,
            "e_eff": s.tracks.e_eff,
            "n_clones": s.tracks.n_clones,
        })),
    }))
}

pub fn calibrate(cfg: &RunConfig) -> Result<(), CliError> {
    let events: Vec<Event> = load_events(cfg)?.into_iter().map(|(_, ev)| ev).collect();
    let cal = calibrate_threshold(&events, &cfg.hp)?;
    print_json(&json!({
        "threshold": cal.threshold,
        "n_events": events.len(),
        "n_used": cal.midpoints.len(),
        "skipped": cal.skipped,
        "hyperparams": cfg.hp,
    }))
}

/// `a:b` (inclusive) or a single value; `a > b` is an empty range.
pub fn parse_range(text: &str) -> Result<Vec<u64>, String> {
    let parse = |s: &str| {
        s.trim()
            .parse::<u64>()
            .map_err(|_| format!("invalid range bound '{s}'"))
    };
    match text.split_once(':') {
        Some((a, b)) => Ok((parse(a)?..=parse(b)?).collect()),
        None => Ok(vec![parse(text)?]),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Study {
    Sparsity,
    Kappa,
}

fn write_to(
    output: Option<&Path>,
    body: impl FnOnce(&mut dyn Write) -> io::Result<()>,
) -> Result<(), CliError> {
    match output {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                create_dir(parent)?;
            }
            let mut w = create(path)?;
            body(&mut w)?;
            w.flush()?;
        }
        None => body(&mut io::stdout().lock())?,
    }
    Ok(())
}

pub fn study(
    which: Study,
    grid: &SweepGrid,
    hp: &Hyperparams,
    output: Option<&Path>,
) -> Result<(), CliError> {
    let records = match which {
        Study::Sparsity => run_sparsity_study(grid, hp)?,
        Study::Kappa => run_kappa_study(grid, hp)?,
    };
    write_to(output, |w| write_study_csv(&records, &mut &mut *w))
}

pub fn hhl_report(
    layers: &[usize],
    particles: &[usize],
    seed: u64,
    hp: &Hyperparams,
    mode: Option<SolverMode>,
    output: Option<&Path>,
) -> Result<(), CliError> {
    let points: Vec<(usize, usize)> = layers
        .iter()
        .flat_map(|&l| particles.iter().map(move |&p| (l, p)))
        .collect();
    let rows = points
        .par_iter()
        .map(|&(l, p)| -> trackhhl::Result<ResourceReport> {
            let ev = generate_event(&ToyConfig::new(l, p, seed))?;
            let graph = DoubletGraph::build(&ev, 0, hp.epsilon, hp.lambda)?;
            let system = pad_system(&assemble(&graph, hp, CouplingMode::Step)?);
            let plan = plan_registers(&system)?;
            let report = resource_report(&plan);
            Ok(match mode {
                Some(SolverMode::HhlOracle) => {
                    report.with_result(&hhl::solve(&system, &plan, HhlMode::SpectralOracle)?)
                }
                Some(SolverMode::HhlCircuit) => {
                    report.with_result(&hhl::solve(&system, &plan, HhlMode::FullCircuit)?)
                }
                _ => report,
            })
        })
        .collect::<trackhhl::Result<Vec<_>>>()?;
    write_to(output, |w| {
        writeln!(w, "layers,particles,{}", ResourceReport::CSV_HEADER)?;
        for ((l, p), r) in points.iter().zip(&rows) {
            writeln!(w, "{l},{p},{}", r.csv_row())?;
        }
        Ok(())
    })
}
