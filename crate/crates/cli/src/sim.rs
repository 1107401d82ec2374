//! Run orchestration: initial state, time loop, files.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use epmesh_core::diagnostics::record;
use epmesh_core::{run, Model, Observer, Recorder, StepEvent};
use thiserror::Error;

use crate::config::{
    GridSection, IcSpec, ModelName, ModelSection, OutputSection, ParticleSection, SimConfig,
    TimeSection,
};
use crate::init::initial_particles;
use crate::output::{snapshot_stem, write_particles_csv, write_pgm, write_snapshot, EnergyWriter, OutputError};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error(transparent)]
    Solver(#[from] epmesh_core::Error),
    #[error(transparent)]
    Output(#[from] OutputError),
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub steps: usize,
    pub recorder: Recorder,
    pub out_dir: PathBuf,
}

impl RunSummary {
    pub fn initial_energy(&self) -> f64 {
        self.recorder.records[0].hamiltonian
    }

    pub fn final_energy(&self) -> f64 {
        self.recorder.records.last().map(|r| r.hamiltonian).unwrap_or(f64::NAN)
    }

    pub fn energy_drift(&self) -> f64 {
        self.recorder.energy_drift()
    }
}

/// Writes the energy series and the scheduled snapshots.
struct FileObserver<'a> {
    cfg: &'a SimConfig,
    dir: PathBuf,
    energy: EnergyWriter,
    error: Option<OutputError>,
}

impl FileObserver<'_> {
    fn write(&mut self, event: &StepEvent<'_>) -> Result<(), OutputError> {
        let rec = record(event.model, event.particles, event.state, event.time, event.report);
        self.energy.write(&rec)?;
        if !self.cfg.is_snapshot_step(event.step) {
            return Ok(());
        }
        let stem = snapshot_stem(event.step);
        let speed = event.state.velocity.magnitude();
        write_snapshot(&speed, event.time, "speed", &self.dir.join(format!("{stem}.txt")))?;
        write_pgm(&speed, &self.dir.join(format!("{stem}.pgm")))?;
        if self.cfg.output.dump_components {
            let ux = event.state.velocity.map(|v| v.x);
            write_snapshot(&ux, event.time, "ux", &self.dir.join(format!("{stem}_ux.txt")))?;
            write_pgm(&ux, &self.dir.join(format!("{stem}_ux.pgm")))?;
        }
        if self.cfg.output.dump_particles {
            write_particles_csv(event.particles, &self.dir.join(format!("particles_{:06}.csv", event.step)))?;
        }
        Ok(())
    }
}

impl Observer for FileObserver<'_> {
    fn observe(&mut self, event: &StepEvent<'_>) -> Result<(), String> {
        self.write(event).map_err(|e| {
            let msg = e.to_string();
            self.error = Some(e);
            msg
        })
    }
}

/// Runs `cfg` to `t_end`, writing `energy.csv` and snapshots into `out_dir`.
pub fn run_simulation(cfg: &SimConfig, out_dir: &Path) -> Result<RunSummary, SimError> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|source| OutputError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let grid = cfg.grid_spec();
    let step = cfg.step_config();
    let model = Model::new(cfg.model_spec(), grid, step.cg_options())?;
    let particles = initial_particles(cfg)?;
    let n_steps = cfg.n_steps();

    let mut recorder = Recorder::new();
    let mut files = FileObserver {
        cfg,
        dir: out_dir.to_path_buf(),
        energy: EnergyWriter::create(&out_dir.join("energy.csv"))?,
        error: None,
    };
    let result = run(&model, particles, &step, n_steps, &mut [&mut recorder, &mut files]);
    if let Some(e) = files.error.take() {
        return Err(e.into());
    }
    result?;
    Ok(RunSummary {
        steps: n_steps,
        recorder,
        out_dir: out_dir.to_path_buf(),
    })
}

/// Steps whose times match the reference figures (`t ≈ 0, 0.24, 0.41, 0.92`).
pub const FIGURE_STEPS: [usize; 4] = [0, 12, 20, 45];

/// The colliding-lines EP-Diff experiment on a `(128/scale)²` grid:
/// `α = 0.3133`, `dt = 0.0204`, 16 particles per cell, `t ∈ [0, 1]`.
pub fn demo_config(scale: usize, out_dir: PathBuf) -> Result<SimConfig, crate::config::ConfigError> {
    if scale == 0 || 128 % scale != 0 || 128 / scale < epmesh_core::grid::MIN_NODES {
        return Err(crate::config::ConfigError::Invalid {
            key: "scale",
            message: format!("must divide 128 and leave at least 8 nodes, got {scale}"),
        });
    }
    let n = 128 / scale;
    let cfg = SimConfig {
        model: ModelSection {
            kind: ModelName::EpDiff,
            alpha: 0.3133,
            g: None,
            depth_force: Default::default(),
        },
        grid: GridSection {
            lx: 2.0 * PI,
            ly: 2.0 * PI,
            nx: n,
            ny: n,
        },
        particles: ParticleSection::default(),
        time: TimeSection {
            dt: 0.0204,
            t_end: 1.0,
            fp_tol: 1e-9,
            fp_max_iter: 50,
            cg_tol: 1e-9,
            cg_max_iter: 500,
        },
        output: OutputSection {
            dir: out_dir,
            snapshot_stride: 0,
            snapshot_steps: FIGURE_STEPS.to_vec(),
            dump_particles: false,
            dump_components: false,
        },
        ic: demo_ic(),
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Two finite strips, the right one shifted along y so the collision is
/// off-centre.
pub fn demo_ic() -> IcSpec {
    IcSpec::TwoLines {
        amplitude: 1.0,
        width: 0.2,
        separation: PI / 2.0,
        length: Some(PI),
        offset: 0.6,
    }
}
