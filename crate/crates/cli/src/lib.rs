//! `aep-decomp` driver: runs a scenario in one mode and writes CSV artifacts
//! plus a JSON manifest.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use aep_core::farfield::{
    pmm_isolated, radiate, radiate_at, steering_weights, synthesize, AngleGrid, FarFieldPattern,
    GridLayout, ScanPlane,
};
use aep_core::io;
use aep_core::metrics::{current_spectrum, main_lobe_mse, scaling_benchmark, Method, MseReport};
use aep_core::mom::{oracle_unknowns, CurrentDistribution, ORACLE_MAX_UNKNOWNS};
use aep_core::pipeline::{
    run_decomposed, run_oracle, ArrayModel, DecomposedRun, OracleRun, PathTiming,
};
use aep_core::scenario::Scenario;
use aep_core::{ArrayLattice, ElementMesh, Error, Result};
use clap::{Parser, ValueEnum};
use serde::Serialize;

/// Samples below this level (dB re. the oracle peak) are left out of the
/// phase comparison, where the phase of a near-null is meaningless.
pub const PHASE_MASK_DB: f64 = -30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Oracle,
    Estimate,
    Compare,
    Synthesize,
    Bench,
}

#[derive(Debug, Parser)]
#[command(
    name = "aep-decomp",
    version,
    about = "Active element patterns of planar dipole arrays from 1-D solves"
)]
pub struct Args {
    #[arg(value_enum)]
    pub mode: Mode,
    /// Scenario TOML file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `output_dir` from the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also dump impedance matrices, currents and transfer magnitudes.
    #[arg(long)]
    pub dump_z: bool,
    /// Angular step of the pattern cut; overrides `grid_step_deg`.
    #[arg(long)]
    pub grid_step_deg: Option<f64>,
}

/// Process exit status for an error.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config { .. } | Error::InvalidParameter(_) => 2,
        Error::NumericalFailure { .. }
        | Error::SingularGeometry(_)
        | Error::DegenerateNormalization { .. }
        | Error::DegenerateRegion(_) => 3,
        Error::SizeGuard { .. } => 4,
        Error::Io { .. } | Error::Csv(_) => 1,
    }
}

/// Resolves the scenario from the config file and command-line overrides.
pub fn load_scenario(args: &Args) -> Result<Scenario> {
    let mut scenario = match Scenario::from_file(&args.config) {
        Err(Error::Io { path, source }) => {
            return Err(Error::Config {
                field: "--config".into(),
                message: format!("cannot read {}: {source}", path.display()),
            })
        }
        other => other?,
    };
    if let Some(step) = args.grid_step_deg {
        scenario.check_grid_step(step)?;
        scenario.grid_step_deg = step;
    }
    if let Some(out) = &args.out {
        scenario.output_dir = out.clone();
    }
    Ok(scenario)
}

/// What a run produced.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub out_dir: PathBuf,
    /// Paths relative to `out_dir`, in write order.
    pub artifacts: Vec<String>,
    /// Human-readable summary.
    pub summary: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    mode: Mode,
    dump_z: bool,
    scenario: &'a Scenario,
    artifacts: &'a [String],
}

/// Output directory that records every file written to it.
struct Outputs {
    root: PathBuf,
    written: Vec<String>,
}

impl Outputs {
    fn new(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root).map_err(|source| Error::Io {
            path: root.to_path_buf(),
            source,
        })?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn file(&mut self, rel: &str) -> Result<PathBuf> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|source| Error::Io {
                path: parent.to_path_buf(),
                source,
            })?;
        }
        self.written.push(rel.to_string());
        Ok(path)
    }
}

/// Runs `args.mode` and writes all artifacts.
pub fn run(args: &Args) -> Result<RunReport> {
    let scenario = load_scenario(args)?;
    run_scenario(args.mode, &scenario, args.dump_z)
}

pub fn run_scenario(mode: Mode, scenario: &Scenario, dump_z: bool) -> Result<RunReport> {
    let model = scenario.model()?;
    if matches!(mode, Mode::Oracle | Mode::Compare | Mode::Synthesize) {
        let unknowns = oracle_unknowns(&model.lattice, &model.element);
        if unknowns > ORACLE_MAX_UNKNOWNS {
            return Err(Error::SizeGuard {
                unknowns,
                limit: ORACLE_MAX_UNKNOWNS,
            });
        }
    }
    let mut out = Outputs::new(&scenario.output_dir)?;
    let summary = match mode {
        Mode::Oracle => mode_oracle(scenario, &model, dump_z, &mut out)?,
        Mode::Estimate => mode_estimate(scenario, &model, dump_z, &mut out)?,
        Mode::Compare => mode_compare(scenario, &model, dump_z, &mut out)?,
        Mode::Synthesize => mode_synthesize(scenario, &model, &mut out)?,
        Mode::Bench => mode_bench(scenario, &mut out)?,
    };
    let path = out.file("summary.txt")?;
    io::write_text(&path, &summary)?;
    let manifest_path = out.root.join("manifest.json");
    out.written.push("manifest.json".into());
    let manifest = Manifest {
        tool: "aep-decomp",
        version: env!("CARGO_PKG_VERSION"),
        mode,
        dump_z,
        scenario,
        artifacts: &out.written,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    io::write_text(&manifest_path, &(json + "\n"))?;
    Ok(RunReport {
        out_dir: out.root,
        artifacts: out.written,
        summary,
    })
}

fn cut_grid(scenario: &Scenario) -> Result<Arc<AngleGrid>> {
    Ok(Arc::new(scenario.plane().cut(scenario.grid_step_deg)?))
}

/// One pattern per port on `grid`.
pub fn aeps(
    currents: &[CurrentDistribution],
    lattice: &ArrayLattice,
    element: &ElementMesh,
    grid: &Arc<AngleGrid>,
) -> Result<Vec<FarFieldPattern>> {
    currents
        .iter()
        .map(|j| radiate(j, lattice, element, grid))
        .collect()
}

fn isolated_pattern(
    iso: &CurrentDistribution,
    model: &ArrayModel,
    grid: &Arc<AngleGrid>,
) -> Result<FarFieldPattern> {
    radiate_at(
        iso,
        &[aep_core::Vector3::zeros()],
        &model.element,
        model.lattice.frequency(),
        grid,
    )
}

fn port_file(dir: &str, lattice: &ArrayLattice, k: usize) -> Result<String> {
    let (u, v) = lattice.port_coords(k)?;
    Ok(format!("{dir}/aep_u{u:02}_v{v:02}.csv"))
}

fn write_aeps(
    out: &mut Outputs,
    dir: &str,
    lattice: &ArrayLattice,
    patterns: &[FarFieldPattern],
) -> Result<()> {
    for (i, p) in patterns.iter().enumerate() {
        let path = out.file(&port_file(dir, lattice, i + 1)?)?;
        io::write_pattern(&path, p)?;
    }
    Ok(())
}

fn write_timings(out: &mut Outputs, rows: &[(&str, PathTiming)]) -> Result<()> {
    let mut text = String::from("path,fill_ms,factor_ms,solve_ms,algebra_ms,total_ms\n");
    let ms = |d: std::time::Duration| d.as_secs_f64() * 1e3;
    for (name, t) in rows {
        let _ = writeln!(
            text,
            "{name},{},{},{},{},{}",
            ms(t.solve.fill),
            ms(t.solve.factor),
            ms(t.solve.solve),
            ms(t.algebra),
            ms(t.total())
        );
    }
    let path = out.file("timings.csv")?;
    io::write_text(&path, &text)
}

fn header(scenario: &Scenario, mode: &str) -> String {
    format!(
        "aep-decomp {mode}: {}x{} dipoles, dx {} λ, dy {} λ, {} GHz, m = {}, load {}{:+}j Ω\n",
        scenario.nx,
        scenario.ny,
        scenario.dx_wavelengths,
        scenario.dy_wavelengths,
        scenario.frequency_hz / 1e9,
        scenario.segments_per_element,
        scenario.load_impedance_ohms[0],
        scenario.load_impedance_ohms[1],
    )
}

fn oracle_outputs(
    model: &ArrayModel,
    dump_z: bool,
    out: &mut Outputs,
    grid: &Arc<AngleGrid>,
) -> Result<(OracleRun, Vec<FarFieldPattern>)> {
    let run = run_oracle(model)?;
    let patterns = aeps(&run.currents, &model.lattice, &model.element, grid)?;
    write_aeps(out, "aep_oracle", &model.lattice, &patterns)?;
    let spectrum = current_spectrum(&run.currents, &model.lattice)?;
    io::write_spectrum(&out.file("spectrum_oracle.csv")?, &spectrum)?;
    if dump_z {
        io::write_matrix(&out.file("dump/z_oracle.csv")?, &run.impedance.entries)?;
        io::write_currents(&out.file("dump/currents_oracle.csv")?, &run.currents)?;
    }
    Ok((run, patterns))
}

fn estimate_outputs(
    model: &ArrayModel,
    dump_z: bool,
    out: &mut Outputs,
    grid: &Arc<AngleGrid>,
) -> Result<(DecomposedRun, Vec<FarFieldPattern>, FarFieldPattern)> {
    let run = run_decomposed(model)?;
    let patterns = aeps(&run.estimates, &model.lattice, &model.element, grid)?;
    write_aeps(out, "aep_estimated", &model.lattice, &patterns)?;
    let iso = isolated_pattern(&run.isolated, model, grid)?;
    io::write_pattern(&out.file("aep_isolated.csv")?, &iso)?;
    let spectrum = current_spectrum(&run.estimates, &model.lattice)?;
    io::write_spectrum(&out.file("spectrum_estimated.csv")?, &spectrum)?;
    if dump_z {
        io::write_matrix(&out.file("dump/z_axis_u.csv")?, &run.impedance_u.entries)?;
        io::write_matrix(&out.file("dump/z_axis_v.csv")?, &run.impedance_v.entries)?;
        io::write_currents(
            &out.file("dump/currents_isolated.csv")?,
            std::slice::from_ref(&run.isolated),
        )?;
        io::write_currents(&out.file("dump/currents_axis_u.csv")?, &run.axis_u)?;
        io::write_currents(&out.file("dump/currents_axis_v.csv")?, &run.axis_v)?;
        io::write_currents(&out.file("dump/currents_estimated.csv")?, &run.estimates)?;
        io::write_transfer(&out.file("dump/transfer.csv")?, &run.transfer)?;
    }
    Ok((run, patterns, iso))
}

fn mode_oracle(
    scenario: &Scenario,
    model: &ArrayModel,
    dump_z: bool,
    out: &mut Outputs,
) -> Result<String> {
    let grid = cut_grid(scenario)?;
    let (run, _) = oracle_outputs(model, dump_z, out, &grid)?;
    write_timings(out, &[("oracle", run.timing)])?;
    let mut s = header(scenario, "oracle");
    let _ = writeln!(
        s,
        "{} ports, {} unknowns, {} AEP files",
        model.lattice.len(),
        run.impedance.dim(),
        run.currents.len()
    );
    Ok(s)
}

fn mode_estimate(
    scenario: &Scenario,
    model: &ArrayModel,
    dump_z: bool,
    out: &mut Outputs,
) -> Result<String> {
    let grid = cut_grid(scenario)?;
    let (run, _, _) = estimate_outputs(model, dump_z, out, &grid)?;
    write_timings(out, &[("decomposed", run.timing)])?;
    let mut s = header(scenario, "estimate");
    let _ = writeln!(
        s,
        "{} ports estimated from 1-D solves of {} and {} elements",
        run.estimates.len(),
        model.lattice.nx(),
        model.lattice.ny()
    );
    Ok(s)
}

/// Largest normalized co-polar dB difference and the largest co-polar phase
/// difference (degrees) over samples within [`PHASE_MASK_DB`] of the
/// reference peak.
pub fn pattern_errors(reference: &FarFieldPattern, test: &FarFieldPattern) -> (f64, f64) {
    let (a, b) = (reference.co_pol_db(), test.co_pol_db());
    let mag = a
        .iter()
        .zip(&b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    let phase = reference
        .e_theta()
        .iter()
        .zip(test.e_theta())
        .zip(&a)
        .filter(|(_, &db)| db >= PHASE_MASK_DB)
        .map(|((r, t), _)| wrap_deg((t.arg() - r.arg()).to_degrees()).abs())
        .fold(0.0, f64::max);
    (mag, phase)
}

fn wrap_deg(x: f64) -> f64 {
    let y = (x + 180.0).rem_euclid(360.0) - 180.0;
    if y == -180.0 {
        180.0
    } else {
        y
    }
}

/// Corner, edge and center ports as `(u, v)`, duplicates removed.
pub fn six_port_selection(nx: usize, ny: usize) -> Vec<(usize, usize)> {
    let (cx, cy) = (nx.div_ceil(2), ny.div_ceil(2));
    let mut ports = Vec::new();
    for p in [(1, 1), (cx, 1), (nx, 1), (1, cy), (cx, cy), (nx, ny)] {
        if !ports.contains(&p) {
            ports.push(p);
        }
    }
    ports
}

fn mode_compare(
    scenario: &Scenario,
    model: &ArrayModel,
    dump_z: bool,
    out: &mut Outputs,
) -> Result<String> {
    let grid = cut_grid(scenario)?;
    let lattice = &model.lattice;
    let (orun, opat) = oracle_outputs(model, dump_z, out, &grid)?;
    let (erun, epat, iso) = estimate_outputs(model, dump_z, out, &grid)?;

    let mut rows = String::from("port,u,v,max_mag_err_db,max_phase_err_deg\n");
    let mut worst = (0.0f64, 0.0f64);
    for (i, (o, e)) in opat.iter().zip(&epat).enumerate() {
        let (u, v) = lattice.port_coords(i + 1)?;
        let (mag, phase) = pattern_errors(o, e);
        worst = (worst.0.max(mag), worst.1.max(phase));
        let _ = writeln!(rows, "{},{u},{v},{mag},{phase}", i + 1);
    }
    io::write_text(&out.file("compare_summary.csv")?, &rows)?;

    let scan = grid.scan_deg().expect("cut grid");
    let iso_db = iso.co_pol_db();
    let mut six = String::from("u,v,scan_deg,oracle_db,estimated_db,isolated_db\n");
    for (u, v) in six_port_selection(lattice.nx(), lattice.ny()) {
        let k = lattice.port_index(u, v)? - 1;
        let (o, e) = (opat[k].co_pol_db(), epat[k].co_pol_db());
        for (i, s) in scan.iter().enumerate() {
            let _ = writeln!(six, "{u},{v},{s},{},{},{}", o[i], e[i], iso_db[i]);
        }
    }
    io::write_text(&out.file("six_ports.csv")?, &six)?;

    let so = current_spectrum(&orun.currents, lattice)?;
    let se = current_spectrum(&erun.estimates, lattice)?;
    let dev = so.max_deviation(&se)?;
    write_timings(out, &[("oracle", orun.timing), ("decomposed", erun.timing)])?;

    let mut s = header(scenario, "compare");
    let _ = writeln!(s, "{} ports compared", lattice.len());
    let _ = writeln!(s, "max AEP magnitude error  {:.4} dB", worst.0);
    let _ = writeln!(
        s,
        "max AEP phase error      {:.3} deg (samples above {PHASE_MASK_DB} dB)",
        worst.1
    );
    let _ = writeln!(s, "current spectrum max dev {dev:.4} dB");
    Ok(s)
}

/// MSE rows for one steering angle: proposed and PMM-isolated against
/// the reference.
#[derive(Debug, Clone)]
pub struct SteerResult {
    pub steer_deg: f64,
    pub reference: FarFieldPattern,
    pub proposed: FarFieldPattern,
    pub pmm: FarFieldPattern,
    pub mse: [MseReport; 2],
}

/// Synthesizes reference, proposed and PMM-isolated patterns for every
/// steering angle (scan angles in `plane`) and scores the main lobe.
pub fn steering_study(
    lattice: &ArrayLattice,
    plane: ScanPlane,
    steers_deg: &[f64],
    taper: Option<&[f64]>,
    reference_aeps: &[FarFieldPattern],
    proposed_aeps: &[FarFieldPattern],
    isolated: &FarFieldPattern,
) -> Result<Vec<SteerResult>> {
    if steers_deg.is_empty() {
        return Err(Error::Config {
            field: "steer_thetas_deg".into(),
            message: "steering list is empty".into(),
        });
    }
    steers_deg
        .iter()
        .map(|&steer| {
            let dir = plane.direction(steer);
            let w = steering_weights(lattice, dir.theta_deg, dir.phi_deg, taper)?;
            let reference = synthesize(reference_aeps, &w)?;
            let proposed = synthesize(proposed_aeps, &w)?;
            let pmm = pmm_isolated(isolated, lattice, &w)?;
            let mse = [
                main_lobe_mse(
                    &reference,
                    &proposed,
                    dir.theta_deg,
                    dir.phi_deg,
                    Method::Proposed,
                )?,
                main_lobe_mse(
                    &reference,
                    &pmm,
                    dir.theta_deg,
                    dir.phi_deg,
                    Method::PmmIsolated,
                )?,
            ];
            Ok(SteerResult {
                steer_deg: steer,
                reference,
                proposed,
                pmm,
                mse,
            })
        })
        .collect()
}

/// `steer_deg,method,region_start_deg,region_end_deg,mse_db2`, grouped by
/// method.
pub fn mse_table(results: &[SteerResult]) -> String {
    let mut text = String::from("steer_deg,method,region_start_deg,region_end_deg,mse_db2\n");
    for slot in 0..2 {
        for r in results {
            let m = &r.mse[slot];
            let _ = writeln!(
                text,
                "{},{},{},{},{}",
                r.steer_deg, m.method, m.region_scan_deg.0, m.region_scan_deg.1, m.mse_db2
            );
        }
    }
    text
}

fn steer_tag(steer: f64) -> String {
    format!("steer_{steer:+.1}")
}

fn mode_synthesize(scenario: &Scenario, model: &ArrayModel, out: &mut Outputs) -> Result<String> {
    if scenario.steer_thetas_deg.is_empty() {
        return Err(Error::Config {
            field: "steer_thetas_deg".into(),
            message: "synthesize needs at least one steering angle".into(),
        });
    }
    let lattice = &model.lattice;
    let grid = cut_grid(scenario)?;
    let orun = run_oracle(model)?;
    let erun = run_decomposed(model)?;
    let opat = aeps(&orun.currents, lattice, &model.element, &grid)?;
    let epat = aeps(&erun.estimates, lattice, &model.element, &grid)?;
    let iso = isolated_pattern(&erun.isolated, model, &grid)?;
    let amplitudes = scenario.taper.amplitudes(lattice);
    let plane = scenario.plane();
    let results = steering_study(
        lattice,
        plane,
        &scenario.steer_thetas_deg,
        Some(&amplitudes),
        &opat,
        &epat,
        &iso,
    )?;
    for r in &results {
        let tag = steer_tag(r.steer_deg);
        io::write_pattern(&out.file(&format!("synth/{tag}_oracle.csv"))?, &r.reference)?;
        io::write_pattern(
            &out.file(&format!("synth/{tag}_proposed.csv"))?,
            &r.proposed,
        )?;
        io::write_pattern(&out.file(&format!("synth/{tag}_pmm.csv"))?, &r.pmm)?;
    }
    io::write_text(&out.file("mse_vs_steering.csv")?, &mse_table(&results))?;

    if scenario.uv_points > 0 {
        let uv_grid = Arc::new(AngleGrid::uv(scenario.uv_points)?);
        let uv = match uv_grid.layout() {
            GridLayout::UV { uv } => uv.clone(),
            _ => unreachable!("u-v grid"),
        };
        let ouv = aeps(&orun.currents, lattice, &model.element, &uv_grid)?;
        let euv = aeps(&erun.estimates, lattice, &model.element, &uv_grid)?;
        let iuv = isolated_pattern(&erun.isolated, model, &uv_grid)?;
        for &steer in &scenario.steer_thetas_deg {
            let dir = plane.direction(steer);
            let w = steering_weights(lattice, dir.theta_deg, dir.phi_deg, Some(&amplitudes))?;
            let reference = synthesize(&ouv, &w)?.total_db();
            let tag = steer_tag(steer);
            io::write_uv_map(&out.file(&format!("uv/{tag}_oracle.csv"))?, &uv, &reference)?;
            for (name, test) in [
                ("proposed", synthesize(&euv, &w)?),
                ("pmm", pmm_isolated(&iuv, lattice, &w)?),
            ] {
                let err: Vec<f64> = test
                    .total_db()
                    .iter()
                    .zip(&reference)
                    .map(|(t, r)| t - r)
                    .collect();
                io::write_uv_map(&out.file(&format!("uv/{tag}_error_{name}.csv"))?, &uv, &err)?;
            }
        }
    }

    let mut s = header(scenario, "synthesize");
    let _ = writeln!(
        s,
        "{:>9}  {:>14}  {:>14}",
        "steer deg", "proposed dB²", "pmm-iso dB²"
    );
    for r in &results {
        let _ = writeln!(
            s,
            "{:>9.1}  {:>14.6}  {:>14.6}",
            r.steer_deg, r.mse[0].mse_db2, r.mse[1].mse_db2
        );
    }
    Ok(s)
}

fn mode_bench(scenario: &Scenario, out: &mut Outputs) -> Result<String> {
    let setup = scenario.bench_setup()?;
    let report = scaling_benchmark(&scenario.bench_ladder(), &setup)?;
    io::write_bench(&out.file("bench.csv")?, &report)?;
    io::write_bench_breakdown(&out.file("bench_breakdown.csv")?, &report)?;
    let mut s = header(scenario, "bench");
    let _ = writeln!(
        s,
        "{:>7}  {:>8}  {:>8}  {:>12}  {:>12}  {:>8}",
        "size", "unk dec", "unk ref", "t dec ms", "t ref ms", "speedup"
    );
    for r in &report.rows {
        let _ = writeln!(
            s,
            "{:>7}  {:>8}  {:>8}  {:>12.3}  {:>12.3}  {:>8.2}",
            format!("{}x{}", r.nx, r.ny),
            r.unknowns_decomp,
            r.unknowns_oracle,
            r.decomp.total().as_secs_f64() * 1e3,
            r.oracle.total().as_secs_f64() * 1e3,
            r.speedup()
        );
    }
    for (nx, ny, why) in &report.skipped {
        let _ = writeln!(s, "skipped {nx}x{ny}: {why}");
    }
    let fmt = |e: Option<f64>| e.map_or("n/a".to_string(), |v| format!("{v:.2}"));
    let _ = writeln!(
        s,
        "fitted exponent vs nx·ny: decomposed {}, reference {}",
        fmt(report.decomp_exponent),
        fmt(report.oracle_exponent)
    );
    Ok(s)
}
