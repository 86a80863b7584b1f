//! Report emission: a deterministic JSON report, a cost/accuracy CSV of
//! Pareto points, and optional per-episode JSON Lines.

use super::{EpisodeRecord, RunReport};
use crate::error::{Error, Result};
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

/// Paths written by `emit_report`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportFiles {
    pub report: PathBuf,
    pub pareto: PathBuf,
    pub episodes: Option<PathBuf>,
}

/// Writes `report.json` and `pareto.csv` (plus `episodes.jsonl` when asked)
/// under `out_dir`. Output bytes depend only on the report contents.
pub fn emit_report(
    report: &RunReport,
    out_dir: &Path,
    include_episodes: bool,
) -> Result<ReportFiles> {
    std::fs::create_dir_all(out_dir)?;
    let report_path = out_dir.join("report.json");
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    std::fs::write(&report_path, json)?;

    let pareto_path = out_dir.join("pareto.csv");
    emit_pareto(std::slice::from_ref(report), &pareto_path)?;

    let episodes_path = if include_episodes {
        let path = out_dir.join("episodes.jsonl");
        write_episodes(&report.episodes, &path)?;
        Some(path)
    } else {
        None
    };

    Ok(ReportFiles {
        report: report_path,
        pareto: pareto_path,
        episodes: episodes_path,
    })
}

/// One `(strategy, avg_total_tokens, accuracy)` row per report, in the given
/// order.
pub fn emit_pareto(reports: &[RunReport], path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::Dataset {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    writer
        .write_record(["strategy", "avg_total_tokens", "accuracy"])
        .map_err(|e| Error::Dataset {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
    for report in reports {
        writer
            .write_record([
                report.strategy.label(),
                format!("{}", report.cost.avg_total_per_example),
                format!("{}", report.accuracy),
            ])
            .map_err(|e| Error::Dataset {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
    }
    writer.flush()?;
    Ok(())
}

fn write_episodes(episodes: &[EpisodeRecord], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut writer = std::io::BufWriter::new(file);
    for episode in episodes {
        let line = serde_json::to_string(episode)?;
        writeln!(writer, "{line}")?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads a report back; inverse of `emit_report` for `report.json`.
pub fn read_report(path: &Path) -> Result<RunReport> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Reads stored episodes for metric recomputation.
pub fn read_episodes(path: &Path) -> Result<Vec<EpisodeRecord>> {
    let file = std::fs::File::open(path)?;
    let mut episodes = Vec::new();
    for (lineno, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let episode: EpisodeRecord = serde_json::from_str(&line).map_err(|e| Error::Dataset {
            path: path.display().to_string(),
            message: format!("line {}: {e}", lineno + 1),
        })?;
        episodes.push(episode);
    }
    Ok(episodes)
}
