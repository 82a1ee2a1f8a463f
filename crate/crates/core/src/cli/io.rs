//! Trajectory CSV files, evaluation point files and small output helpers.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::fbm::TrajectorySet;

use super::config::{check_schema_version, Sidecar};
use super::CliError;

/// Shortest round-tripping decimal form.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        ryu::Buffer::new().format_finite(v).to_owned()
    } else if v.is_nan() {
        "NaN".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

pub fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

/// Writes rows as comma-separated values with a header and LF endings.
pub fn write_table(path: &Path, header: &[String], rows: &[Vec<f64>]) -> Result<(), CliError> {
    let mut w = create(path)?;
    write_rows(&mut w, header, rows).map_err(|e| CliError::io(path, e))?;
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_rows<W: Write>(w: &mut W, header: &[String], rows: &[Vec<f64>]) -> std::io::Result<()> {
    writeln!(w, "{}", header.join(","))?;
    for r in rows {
        let line: Vec<String> = r.iter().map(|&v| fmt_f64(v)).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).expect("reports always serialize");
    writeln!(w).and_then(|_| w.flush()).map_err(|e| CliError::io(path, e))
}

/// One row per grid time: `t,path_0,...,path_{n-1}`.
pub fn write_trajectories(path: &Path, trajs: &TrajectorySet) -> Result<(), CliError> {
    let mut w = create(path)?;
    let mut header = String::from("t");
    for i in 0..trajs.n_paths() {
        header.push_str(&format!(",path_{i}"));
    }
    let io = |e| CliError::io(path, e);
    writeln!(w, "{header}").map_err(io)?;
    let mut buf = ryu::Buffer::new();
    let mut line = String::new();
    for k in 0..trajs.grid.len() {
        line.clear();
        line.push_str(buf.format(trajs.grid.time(k)));
        for p in trajs.paths() {
            line.push(',');
            line.push_str(buf.format(p[k]));
        }
        line.push('\n');
        w.write_all(line.as_bytes()).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Reads a trajectory CSV and its sidecar, checking that they agree.
pub fn read_trajectories(path: &Path) -> Result<(Sidecar, TrajectorySet), CliError> {
    let side_path = sidecar_path(path);
    let text = std::fs::read_to_string(&side_path)
        .map_err(|e| CliError::format(format!("cannot read sidecar {}: {e}", side_path.display())))?;
    let side: Sidecar = serde_json::from_str(&text)
        .map_err(|e| CliError::format(format!("malformed sidecar {}: {e}", side_path.display())))?;
    check_schema_version(&side.schema_version)?;
    side.grid.validate().map_err(|e| CliError::format(format!("sidecar grid: {e}")))?;

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| CliError::format(format!("cannot read {}: {e}", path.display())))?;
    let header = reader.headers().map_err(|e| CliError::format(format!("bad header: {e}")))?.clone();
    let expected_width = side.n_paths + 1;
    let header_ok = header.len() == expected_width
        && &header[0] == "t"
        && header.iter().skip(1).enumerate().all(|(i, h)| h == format!("path_{i}"));
    if !header_ok {
        return Err(CliError::format(format!(
            "header does not match t,path_0,...,path_{} from the sidecar",
            side.n_paths.saturating_sub(1)
        )));
    }

    let grid = side.grid;
    let mut paths = vec![Vec::with_capacity(grid.len()); side.n_paths];
    let mut k = 0;
    for rec in reader.records() {
        let row = k + 2;
        let rec = rec.map_err(|e| CliError::format_at(format!("unreadable row: {e}"), row))?;
        if rec.len() != expected_width {
            return Err(CliError::format_at(format!("expected {expected_width} fields, got {}", rec.len()), row));
        }
        if k >= grid.len() {
            return Err(CliError::format_at(format!("more than n_steps + 1 = {} rows", grid.len()), row));
        }
        let vals = parse_floats(&rec).map_err(|m| CliError::format_at(m, row))?;
        if (vals[0] - grid.time(k)).abs() > 1e-9 * grid.t_max.max(1.0) {
            return Err(CliError::format_at(format!("time {} does not match grid time {}", vals[0], grid.time(k)), row));
        }
        for (p, v) in paths.iter_mut().zip(&vals[1..]) {
            p.push(*v);
        }
        k += 1;
    }
    if k != grid.len() {
        return Err(CliError::format(format!("expected {} rows, found {k}", grid.len())));
    }
    let trajs = TrajectorySet::from_rows(grid, side.hurst, side.seed, side.generator_tag, paths)
        .map_err(|e| CliError::format(e.to_string()))?;
    Ok((side, trajs))
}

fn parse_floats(rec: &csv::StringRecord) -> Result<Vec<f64>, String> {
    rec.iter()
        .map(|f| f.trim().parse::<f64>().map_err(|_| format!("{f:?} is not a number")))
        .collect()
}

/// Numeric rows of a points file with their 1-based line numbers. Lines
/// starting with `#` are skipped, and so is a non-numeric first line.
pub fn read_points(path: &Path) -> Result<Vec<(usize, Vec<f64>)>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::format(format!("cannot read points file {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| CliError::format(format!("points file: {e}")))?;
        let line = rec.position().map_or(i + 1, |p| p.line() as usize);
        match parse_floats(&rec) {
            Ok(v) => rows.push((line, v)),
            Err(_) if i == 0 => continue,
            Err(m) => return Err(CliError::format_at(m, line)),
        }
    }
    Ok(rows)
}
