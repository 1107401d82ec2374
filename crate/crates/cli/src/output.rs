//! Energy series, grid snapshots and particle dumps.
//!
//! Floats are written as `{:.16e}` (17 significant digits), which
//! round-trips every `f64` exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use epmesh_core::{DiagnosticsRecord, ParticleSet, ScalarField};
use thiserror::Error;

pub const ENERGY_HEADER: &str = "t,hamiltonian,px,py,mass,fp_iters,cg_iters";

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: malformed snapshot: {message}")]
    Format { path: PathBuf, message: String },
    #[error("no diagnostics records to write")]
    Empty,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> OutputError + '_ {
    move |source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn energy_line(r: &DiagnosticsRecord) -> String {
    format!(
        "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{}",
        r.time, r.hamiltonian, r.total_momentum.x, r.total_momentum.y, r.total_mass, r.fp_iterations, r.cg_iterations
    )
}

/// Streams diagnostics rows to `energy.csv`, flushing after each row.
pub struct EnergyWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl EnergyWriter {
    pub fn create(path: &Path) -> Result<Self, OutputError> {
        let mut out = BufWriter::new(File::create(path).map_err(io_err(path))?);
        writeln!(out, "{ENERGY_HEADER}").map_err(io_err(path))?;
        Ok(Self {
            path: path.to_path_buf(),
            out,
        })
    }

    pub fn write(&mut self, r: &DiagnosticsRecord) -> Result<(), OutputError> {
        writeln!(self.out, "{}", energy_line(r)).map_err(io_err(&self.path))?;
        self.out.flush().map_err(io_err(&self.path))
    }
}

pub fn write_energy_csv(records: &[DiagnosticsRecord], path: &Path) -> Result<(), OutputError> {
    if records.is_empty() {
        return Err(OutputError::Empty);
    }
    let mut w = EnergyWriter::create(path)?;
    for r in records {
        w.write(r)?;
    }
    Ok(())
}

/// Text snapshot: `# nx ny t name`, then one grid row (fixed `j`) per line.
pub fn write_snapshot(field: &ScalarField, time: f64, name: &str, path: &Path) -> Result<(), OutputError> {
    let grid = field.grid();
    let mut out = BufWriter::new(File::create(path).map_err(io_err(path))?);
    let mut text = format!("# {} {} {:.16e} {}\n", grid.nx(), grid.ny(), time, name);
    for row in field.values().chunks(grid.nx()) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        text.push_str(&line.join(" "));
        text.push('\n');
    }
    out.write_all(text.as_bytes()).map_err(io_err(path))?;
    out.flush().map_err(io_err(path))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub nx: usize,
    pub ny: usize,
    pub time: f64,
    pub name: String,
    pub values: Vec<f64>,
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot, OutputError> {
    let bad = |message: &str| OutputError::Format {
        path: path.to_path_buf(),
        message: message.to_string(),
    };
    let reader = BufReader::new(File::open(path).map_err(io_err(path))?);
    let mut lines = reader.lines();
    let header = lines.next().ok_or_else(|| bad("empty file"))?.map_err(io_err(path))?;
    let fields: Vec<&str> = header.trim_start_matches('#').split_whitespace().collect();
    if fields.len() < 3 {
        return Err(bad("short header"));
    }
    let nx: usize = fields[0].parse().map_err(|_| bad("nx"))?;
    let ny: usize = fields[1].parse().map_err(|_| bad("ny"))?;
    let time: f64 = fields[2].parse().map_err(|_| bad("time"))?;
    let name = fields.get(3).unwrap_or(&"").to_string();
    let mut values = Vec::with_capacity(nx * ny);
    for line in lines {
        let line = line.map_err(io_err(path))?;
        for tok in line.split_whitespace() {
            values.push(tok.parse::<f64>().map_err(|_| bad("value"))?);
        }
    }
    if values.len() != nx * ny {
        return Err(bad("value count does not match nx*ny"));
    }
    Ok(Snapshot {
        nx,
        ny,
        time,
        name,
        values,
    })
}

/// Binary graymap (`P5`, max-gray 255) of a non-negative field scaled to its
/// maximum. The top image row is the largest `y`.
pub fn write_pgm(field: &ScalarField, path: &Path) -> Result<(), OutputError> {
    let grid = field.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    let max = field.max_abs();
    let mut bytes = format!("P5\n{nx} {ny}\n255\n").into_bytes();
    for j in (0..ny).rev() {
        for &v in &field.values()[j * nx..(j + 1) * nx] {
            let g = if max > 0.0 { (v.abs() / max * 255.0).round() } else { 0.0 };
            bytes.push(g.clamp(0.0, 255.0) as u8);
        }
    }
    std::fs::write(path, bytes).map_err(io_err(path))
}

/// `beta,x,y,mx,my,D`.
pub fn write_particles_csv(particles: &ParticleSet, path: &Path) -> Result<(), OutputError> {
    let mut out = BufWriter::new(File::create(path).map_err(io_err(path))?);
    writeln!(out, "beta,x,y,mx,my,D").map_err(io_err(path))?;
    for (b, ((x, m), d)) in particles
        .positions()
        .iter()
        .zip(particles.momenta())
        .zip(particles.masses())
        .enumerate()
    {
        writeln!(out, "{b},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}", x.x, x.y, m.x, m.y, d).map_err(io_err(path))?;
    }
    out.flush().map_err(io_err(path))
}

pub fn snapshot_stem(step: usize) -> String {
    format!("snap_{step:06}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use epmesh_core::GridSpec;
    use nalgebra::Vector2;

    fn record(t: f64) -> DiagnosticsRecord {
        DiagnosticsRecord {
            time: t,
            hamiltonian: 1.0 / 3.0,
            total_momentum: Vector2::new(1e-17, -2.5),
            total_mass: std::f64::consts::PI,
            grid_mass: 1.0,
            fp_iterations: 2,
            cg_iterations: 17,
        }
    }

    #[test]
    fn single_record_csv_has_two_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("energy.csv");
        write_energy_csv(&[record(0.0)], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], ENERGY_HEADER);
        let cols: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(cols.len(), 7);
        assert_eq!(cols[1].parse::<f64>().unwrap(), 1.0 / 3.0);
        assert_eq!(cols[4].parse::<f64>().unwrap(), std::f64::consts::PI);
        assert!(matches!(write_energy_csv(&[], &path), Err(OutputError::Empty)));
    }

    #[test]
    fn snapshot_round_trips_bitwise() {
        let g = GridSpec::periodic_square(8).unwrap();
        let f = ScalarField::from_fn(g, |x| (x.x * 1.7).sin() * (x.y + 0.1).exp() / 3.0);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.txt");
        write_snapshot(&f, 0.2448, "speed", &path).unwrap();
        let s = read_snapshot(&path).unwrap();
        assert_eq!((s.nx, s.ny, s.name.as_str()), (8, 8, "speed"));
        assert_eq!(s.time, 0.2448);
        for (a, b) in s.values.iter().zip(f.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn zero_field_graymap_is_black() {
        let g = GridSpec::periodic_square(8).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("z.pgm");
        write_pgm(&ScalarField::zeros(g), &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let header = b"P5\n8 8\n255\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(bytes.len(), header.len() + 64);
        assert!(bytes[header.len()..].iter().all(|&b| b == 0));
    }

    #[test]
    fn graymap_peak_is_white() {
        let g = GridSpec::periodic_square(8).unwrap();
        let mut f = ScalarField::zeros(g);
        f.values_mut()[0] = 2.0;
        f.values_mut()[1] = 1.0;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.pgm");
        write_pgm(&f, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let body = &bytes[bytes.len() - 64..];
        // node (0,0) sits in the bottom image row
        assert_eq!(body[56], 255);
        assert_eq!(body[57], 128);
    }

    #[test]
    fn malformed_snapshot_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.txt");
        std::fs::write(&path, "# 8 8 0.0 x\n1 2 3\n").unwrap();
        assert!(matches!(read_snapshot(&path), Err(OutputError::Format { .. })));
    }
}
