//! Self-checks run by `wgdelay verify` and by the acceptance target.
//!
//! Each criterion measures a handful of quantities and compares them with
//! fixed bounds. The measured values are reported alongside the verdict so a
//! failure shows how far off the computation is.

use std::collections::BTreeMap;
use std::time::Instant;

use num_complex::Complex64;
use serde::Serialize;

use crate::exec::Execution;
use crate::numerics::diff::Stencil;
use crate::oracles::{analytic_phase_delay, square_well_1d, SquareWell};
use crate::scattering::{born_smatrix, compute_sweep, ew_delay, solve_smatrix};
use crate::scenario::{Scenario, SpectralSummary, Stationary};
use crate::spectral::{channel_resolved_delay, fiber_grid_for, forward_transform, inverse_transform, ChannelWavepacket};
use crate::timedomain::{full_propagate, sample_packet, GridState, PropagationLimits, SojournRecord, SplitStep};
use crate::waveguide::{compute_coupling, LongitudinalProfile, PotentialSpec, TransverseProfile, XGrid};
use crate::{Error, Result};

/// One measured quantity with its admissible range.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: &str, value: f64, max: f64) -> Self {
        Self {
            name: name.into(),
            value,
            min: None,
            max: Some(max),
            passed: value <= max,
        }
    }

    pub fn within(name: &str, value: f64, min: f64, max: f64) -> Self {
        Self {
            name: name.into(),
            value,
            min: Some(min),
            max: Some(max),
            passed: value >= min && value <= max,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CriterionReport {
    pub criterion: u8,
    pub title: &'static str,
    pub checks: Vec<Check>,
    /// Set when the computation itself failed.
    pub error: Option<String>,
    pub seconds: f64,
}

impl CriterionReport {
    pub fn passed(&self) -> bool {
        self.error.is_none() && self.checks.iter().all(|c| c.passed)
    }

    /// One-line human summary.
    pub fn line(&self) -> String {
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        let body = match &self.error {
            Some(e) => format!("error: {e}"),
            None => self
                .checks
                .iter()
                .map(|c| {
                    let mark = if c.passed { "" } else { " (!)" };
                    format!("{}={:.3e}{mark}", c.name, c.value)
                })
                .collect::<Vec<_>>()
                .join(", "),
        };
        format!("[{verdict}] criterion {}: {}: {body}", self.criterion, self.title)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub passed: bool,
    pub criteria: Vec<CriterionReport>,
    /// Config hash of every scenario that was used.
    pub scenarios: BTreeMap<String, String>,
}

/// Suites accepted by [`run_suite`] and the criteria they contain.
pub const SUITES: [(&str, &[u8]); 7] = [
    ("free", &[1]),
    ("oracle", &[2]),
    ("multichannel", &[3]),
    ("spectral", &[4, 5]),
    ("born", &[6]),
    ("hygiene", &[7]),
    ("all", &[1, 2, 3, 4, 5, 6, 7]),
];

pub fn suite_criteria(suite: &str) -> Result<&'static [u8]> {
    SUITES
        .iter()
        .find(|(n, _)| *n == suite)
        .map(|(_, c)| *c)
        .ok_or_else(|| {
            let names: Vec<&str> = SUITES.iter().map(|(n, _)| *n).collect();
            Error::InvalidArgument(format!("unknown suite `{suite}`; expected one of {}", names.join(", ")))
        })
}

/// Scenarios the criteria run on: a free guide, a diagonal square well and
/// a coupled guide with two open channels.
#[derive(Clone, Debug)]
pub struct ScenarioSet {
    pub free: Scenario,
    pub square_well: Scenario,
    pub two_channel: Scenario,
}

impl ScenarioSet {
    pub fn builtin() -> Result<Self> {
        Ok(Self {
            free: Scenario::builtin("free")?,
            square_well: Scenario::builtin("square_well")?,
            two_channel: Scenario::builtin("two_channel")?,
        })
    }

    /// Loads `free.toml`, `square_well.toml` and `two_channel.toml` from `dir`.
    pub fn from_dir(dir: &std::path::Path) -> Result<Self> {
        Ok(Self {
            free: Scenario::load(&dir.join("free.toml"))?,
            square_well: Scenario::load(&dir.join("square_well.toml"))?,
            two_channel: Scenario::load(&dir.join("two_channel.toml"))?,
        })
    }
}

/// Results of one scenario, computed on first use and shared between criteria.
pub struct ScenarioRun {
    pub scenario: Scenario,
    pub packet: ChannelWavepacket,
    pub stationary: Stationary,
    pub summary: SpectralSummary,
    pub record: Option<SojournRecord>,
    /// Wall time of the stationary and spectral stages.
    pub stationary_seconds: f64,
    pub time_seconds: f64,
}

impl ScenarioRun {
    pub fn new(scenario: &Scenario, exec: Execution) -> Result<Self> {
        let start = Instant::now();
        let packet = scenario.packet()?;
        let stationary = scenario.stationary(exec)?;
        let summary = scenario.spectral_summary(&packet, &stationary)?;
        Ok(Self {
            scenario: scenario.clone(),
            packet,
            stationary,
            summary,
            record: None,
            stationary_seconds: start.elapsed().as_secs_f64(),
            time_seconds: 0.0,
        })
    }

    pub fn record(&mut self, exec: Execution) -> Result<&SojournRecord> {
        if self.record.is_none() {
            let start = Instant::now();
            let rec = self.scenario.time_delay(&self.packet, &self.summary, &self.stationary.basis, exec)?;
            self.time_seconds = start.elapsed().as_secs_f64();
            self.record = Some(rec);
        }
        Ok(self.record.as_ref().expect("just computed"))
    }
}

/// Lazily evaluated scenario runs.
pub struct Workbench {
    pub set: ScenarioSet,
    pub exec: Execution,
    runs: BTreeMap<&'static str, ScenarioRun>,
}

impl Workbench {
    pub fn new(set: ScenarioSet, exec: Execution) -> Self {
        Self {
            set,
            exec,
            runs: BTreeMap::new(),
        }
    }

    pub fn run(&mut self, key: &'static str) -> Result<&mut ScenarioRun> {
        if !self.runs.contains_key(key) {
            let scenario = match key {
                "free" => &self.set.free,
                "square_well" => &self.set.square_well,
                _ => &self.set.two_channel,
            };
            let run = ScenarioRun::new(scenario, self.exec)?;
            self.runs.insert(key, run);
        }
        Ok(self.runs.get_mut(key).expect("inserted above"))
    }

    fn hashes(&self, criteria: &[u8]) -> BTreeMap<String, String> {
        let mut out = BTreeMap::new();
        let uses = |c: u8, k: &str| match k {
            "free" => c == 1 || c == 4,
            "square_well" => matches!(c, 2 | 4 | 5 | 7),
            _ => matches!(c, 3..=7),
        };
        for (k, s) in [
            ("free", &self.set.free),
            ("square_well", &self.set.square_well),
            ("two_channel", &self.set.two_channel),
        ] {
            if criteria.iter().any(|&c| uses(c, k)) {
                out.insert(s.name.clone(), s.config_hash());
            }
        }
        out
    }

    pub fn criterion(&mut self, n: u8) -> CriterionReport {
        let start = Instant::now();
        let (title, result) = match n {
            1 => ("free-case null test", criterion_free(self)),
            2 => ("single-channel square-well oracle", criterion_square_well(self)),
            3 => ("multichannel consistency", criterion_multichannel(self)),
            4 => ("spectral-transform unitarity", criterion_transform(self)),
            5 => ("commutator identity", criterion_commutator(self)),
            6 => ("Born-order scaling", criterion_born(self)),
            7 => ("numerical hygiene", criterion_hygiene(self)),
            _ => ("unknown", Err(Error::InvalidArgument(format!("no criterion {n}")))),
        };
        let (checks, error) = match result {
            Ok(c) => (c, None),
            Err(e) => (Vec::new(), Some(e.to_string())),
        };
        CriterionReport {
            criterion: n,
            title,
            checks,
            error,
            seconds: start.elapsed().as_secs_f64(),
        }
    }
}

pub fn run_suite(suite: &str, set: ScenarioSet, exec: Execution, mut progress: impl FnMut(&CriterionReport)) -> Result<SuiteReport> {
    let criteria = suite_criteria(suite)?;
    let mut bench = Workbench::new(set, exec);
    let mut reports = Vec::new();
    for &n in criteria {
        let r = bench.criterion(n);
        progress(&r);
        reports.push(r);
    }
    Ok(SuiteReport {
        suite: suite.into(),
        passed: reports.iter().all(|r| r.passed()),
        criteria: reports,
        scenarios: bench.hashes(criteria),
    })
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Zero potential: `S = I` exactly and every delay vanishes.
pub fn criterion_free(bench: &mut Workbench) -> Result<Vec<Check>> {
    let start = Instant::now();
    let exec = bench.exec;
    let run = bench.run("free")?;
    let mut deviation: f64 = 0.0;
    for s in run.stationary.sweep.iter() {
        let m = s.matrix();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let id = if i == j { 1.0 } else { 0.0 };
                deviation = deviation.max((m[(i, j)] - id).norm());
            }
        }
    }
    let rec = run.record(exec)?;
    Ok(vec![
        Check::at_most("max|S-I|", deviation, 0.0),
        Check::at_most("max|tau_r|", max_abs(&rec.delay), 1e-8),
        Check::at_most("max|tau_free|", max_abs(&rec.free_delay), 1e-8),
        Check::at_most("seconds", start.elapsed().as_secs_f64(), 30.0),
    ])
}

/// The one-dimensional well hidden in a transversally constant box potential.
pub fn square_well_of(potential: &PotentialSpec) -> Result<SquareWell> {
    match potential {
        PotentialSpec::Separable(t) => match (&t.transverse, &t.longitudinal) {
            (TransverseProfile::Constant { value }, LongitudinalProfile::Box { amplitude, half_width, center })
                if *center == 0.0 =>
            {
                Ok(SquareWell {
                    depth: -value * amplitude,
                    half_width: *half_width,
                })
            }
            _ => Err(Error::InvalidArgument("the oracle needs a centred box times a constant".into())),
        },
        _ => Err(Error::InvalidArgument("the oracle needs a single separable term".into())),
    }
}

/// `int |g(xi)|^2 (d delta_even/d lambda + d delta_odd/d lambda) d xi` for a
/// right-moving packet in channel 1, by direct quadrature over its samples.
pub fn analytic_delay_quadrature(packet: &ChannelWavepacket, well: &SquareWell) -> Result<f64> {
    let c = packet
        .component(0)
        .filter(|_| packet.components.len() == 1)
        .ok_or_else(|| Error::InvalidArgument("the oracle needs a packet in channel 1 only".into()))?;
    let (mut num, mut den) = (0.0, 0.0);
    for (i, z) in c.samples.iter().enumerate() {
        let w = z.norm_sqr();
        if w == 0.0 {
            continue;
        }
        let xi = c.xi(i);
        if xi <= 0.0 {
            return Err(Error::InvalidArgument("the oracle needs a right-moving packet".into()));
        }
        num += w * analytic_phase_delay(well, xi)?.diagonal();
        den += w;
    }
    Ok(num / den)
}

pub fn criterion_square_well(bench: &mut Workbench) -> Result<Vec<Check>> {
    let start = Instant::now();
    let exec = bench.exec;
    let run = bench.run("square_well")?;
    let well = square_well_of(&run.scenario.potential)?;
    let nu = run.stationary.basis.threshold(0);
    let mut amp_err: f64 = 0.0;
    for s in run.stationary.sweep.iter() {
        let o = square_well_1d(&well, (s.energy() - nu).sqrt());
        for (got, want) in [
            (s.transmission(0, 0), o.transmission),
            (s.reflection(0, 0), o.reflection),
            (s.entry((0, crate::scattering::Direction::Left), (0, crate::scattering::Direction::Left)), o.transmission),
        ] {
            amp_err = amp_err.max((got - want).norm());
        }
    }
    let analytic = analytic_delay_quadrature(&run.packet, &well)?;
    let ew = run.summary.ew.value;
    let rec = run.record(exec)?;
    let tau = rec.delay_at_max_radius();
    let tau_free = rec.free_delay_at_max_radius();
    Ok(vec![
        Check::at_most("amplitude_error", amp_err, 1e-8),
        Check::at_most("ew_vs_analytic", rel(ew, analytic), 1e-2),
        Check::at_most("tau_rmax_vs_ew", rel(tau, ew), 2e-2),
        Check::at_most("tau_rmax_vs_free", rel(tau, tau_free), 2e-2),
        Check::at_most("seconds", start.elapsed().as_secs_f64(), 300.0),
    ])
}

/// Largest Hermiticity residual of the second-order delay matrix on the
/// scenario sweep and on a sweep with half the energy step.
pub fn hermiticity_halving(scenario: &Scenario, st: &Stationary, exec: Execution) -> Result<(f64, f64)> {
    let coarse = ew_delay(&st.sweep, Stencil::Second)?.max_hermiticity_residual();
    let fine_sweep = compute_sweep(
        &st.coupling,
        &st.basis,
        st.range.0,
        st.range.1,
        2 * st.points - 1,
        &scenario.solver.options,
        exec,
    )?;
    let fine = ew_delay(&fine_sweep, Stencil::Second)?.max_hermiticity_residual();
    Ok((coarse, fine))
}

pub fn criterion_multichannel(bench: &mut Workbench) -> Result<Vec<Check>> {
    let start = Instant::now();
    let exec = bench.exec;
    let run = bench.run("two_channel")?;
    let st = &run.stationary;
    let (lo, hi) = run.packet.energy_support(&st.basis)?;
    let open = st.basis.thresholds().iter().filter(|&&t| t < lo).count();
    let straddles = st.basis.interval_of(lo) != st.basis.interval_of(hi);
    let (coarse, fine) = hermiticity_halving(&run.scenario, st, exec)?;
    let channel = run.packet.components[0].channel;
    if run.packet.components.len() != 1 {
        return Err(Error::InvalidArgument("the channel-resolved check needs a single-channel packet".into()));
    }
    let resolved = channel_resolved_delay(&run.summary.fiber, &st.sweep, &st.delay, channel, &run.scenario.spectral)?;
    let ew = run.summary.ew.value;
    let unitarity = st.sweep.max_unitarity_residual();
    let reciprocity = st.sweep.max_reciprocity_residual();
    let rec = run.record(exec)?;
    let tau = rec.delay_at_max_radius();
    Ok(vec![
        Check::within("open_channels", if straddles { f64::NAN } else { open as f64 }, 2.0, 2.0),
        Check::at_most("unitarity", unitarity, 1e-6),
        Check::at_most("reciprocity", reciprocity, 1e-6),
        Check::within("hermiticity_halving_ratio", coarse / fine, 3.5, 4.5),
        Check::at_most("tau_rmax_vs_ew", rel(tau, ew), 5e-2),
        Check::at_most("channel_resolved_vs_ew", rel(resolved.re, ew), 1e-6),
        Check::at_most("seconds", start.elapsed().as_secs_f64(), 900.0),
    ])
}

/// Parseval defect and relative round-trip error of the spectral transform.
pub fn transform_defects(scenario: &Scenario, packet: &ChannelWavepacket) -> Result<(f64, f64)> {
    let basis = scenario.basis()?;
    let opts = &scenario.spectral;
    let grid = fiber_grid_for(packet, &basis, opts)?;
    let fiber = forward_transform(packet, &basis, grid, opts)?;
    let norm = packet.norm_sqr();
    let parseval = (fiber.norm_sqr() - norm).abs() / norm;
    let back = inverse_transform(&fiber, &basis, opts)?;
    let mut diff = 0.0;
    for c in &packet.components {
        let other = back.component(c.channel);
        for (i, z) in c.samples.iter().enumerate() {
            let w = other.map(|o| o.value_at(c.xi(i), opts.packet_points)).unwrap_or_default();
            diff += (w - z).norm_sqr() * c.xi_step;
        }
    }
    for o in &back.components {
        if packet.component(o.channel).is_none() {
            diff += o.norm_sqr();
        }
    }
    Ok((parseval, (diff / norm).sqrt()))
}

pub fn criterion_transform(bench: &mut Workbench) -> Result<Vec<Check>> {
    let (mut parseval, mut round_trip): (f64, f64) = (0.0, 0.0);
    let mut count = 0;
    for s in [&bench.set.free, &bench.set.square_well, &bench.set.two_channel] {
        for (_, p) in s.catalog_packets()? {
            let (a, b) = transform_defects(s, &p)?;
            parseval = parseval.max(a);
            round_trip = round_trip.max(b);
            count += 1;
        }
    }
    Ok(vec![
        Check::at_most("parseval", parseval, 1e-8),
        Check::at_most("round_trip", round_trip, 1e-6),
        Check::within("packets", count as f64, 1.0, f64::INFINITY),
    ])
}

pub fn criterion_commutator(bench: &mut Workbench) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for key in ["square_well", "two_channel"] {
        let run = bench.run(key)?;
        let c: Complex64 = run.summary.commutator;
        out.push(Check::at_most(&format!("{key}_commutator_vs_ew"), rel(c.re, run.summary.ew.value), 1e-4));
    }
    Ok(out)
}

/// `max_lambda ||S - S_Born||_F` for the scenario potential scaled by `factor`,
/// over `count` energies spread across the packet's fiber grid.
pub fn born_deviation(scenario: &Scenario, factor: f64, count: usize) -> Result<f64> {
    let basis = scenario.basis()?;
    let potential = scenario.potential.scaled(factor);
    let grid = XGrid::symmetric(scenario.solver_extent(), scenario.solver.dx)?;
    let coupling = compute_coupling(&potential, &basis, &grid, scenario.solver.quadrature_order)?;
    let fiber_grid = fiber_grid_for(&scenario.packet()?, &basis, &scenario.spectral)?;
    let mut worst: f64 = 0.0;
    for k in 0..count {
        let e = fiber_grid.start + (fiber_grid.end() - fiber_grid.start) * (k as f64 + 0.5) / count as f64;
        let exact = solve_smatrix(&coupling, &basis, e, &scenario.solver.options)?;
        let born = born_smatrix(&coupling, &basis, e)?;
        worst = worst.max((exact.matrix() - born.matrix()).norm());
    }
    Ok(worst)
}

/// Coupling strengths, relative to the scenario, at which Born scaling is measured.
pub const BORN_FACTORS: (f64, f64) = (0.25, 0.125);

pub fn criterion_born(bench: &mut Workbench) -> Result<Vec<Check>> {
    let s = &bench.set.two_channel;
    let a = born_deviation(s, BORN_FACTORS.0, 7)?;
    let b = born_deviation(s, BORN_FACTORS.1, 7)?;
    Ok(vec![Check::within("born_halving_ratio", a / b, 3.5, 4.5)])
}

fn l2_distance(a: &GridState, b: &GridState) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.amplitudes.iter().zip(&b.amplitudes) {
        for (u, v) in x.iter().zip(y) {
            s += (u - v).norm_sqr();
        }
    }
    (s * a.grid.step).sqrt()
}

/// Errors of the split-step propagation from `t_start` to `t_end` with steps
/// `dt`, `dt/2`, `dt/4`, measured against a `dt/8` reference.
pub fn strang_errors(scenario: &Scenario, t_start: f64, t_end: f64, exec: Execution) -> Result<[f64; 3]> {
    let basis = scenario.basis()?;
    let packet = scenario.packet()?;
    let setup = scenario.time_setup(&basis, &packet)?;
    let channels = setup.channels().to_vec();
    let initial = sample_packet(&packet, &basis, &setup.grid, &channels, t_start, exec)?;
    let limits = PropagationLimits {
        norm_tolerance: scenario.time.options.norm_tolerance,
        leak_tolerance: scenario.time.options.leak_tolerance,
    };
    let dt = scenario.time.options.dt;
    let base_steps = ((t_end - t_start) / dt).round() as usize;
    let mut finals = Vec::new();
    for refine in [1usize, 2, 4, 8] {
        let prop = SplitStep::new(&setup.coupling, &basis, &setup.grid, dt / refine as f64, &channels)?;
        let mut state = initial.clone();
        full_propagate(&mut state, &prop, base_steps * refine, &limits, |_| true)?;
        finals.push(state);
    }
    let reference = &finals[3];
    Ok([
        l2_distance(&finals[0], reference),
        l2_distance(&finals[1], reference),
        l2_distance(&finals[2], reference),
    ])
}

pub fn criterion_hygiene(bench: &mut Workbench) -> Result<Vec<Check>> {
    let exec = bench.exec;
    let mut drift: f64 = 0.0;
    let (tau, t0, scenario) = {
        let run = bench.run("square_well")?;
        let rec = run.record(exec)?;
        drift = drift.max(rec.run.norm_drift);
        (rec.delay_at_max_radius(), rec.run.preparation.t0, run.scenario.clone())
    };
    {
        let run = bench.run("two_channel")?;
        drift = drift.max(run.record(exec)?.run.norm_drift);
    }
    // the window around the collision, where the splitting error is largest
    let errors = strang_errors(&bench.set.two_channel, -1.0, 1.0, exec)?;
    let order = (errors[0] / errors[1]).log2();

    let mut doubled = scenario.clone();
    doubled.time.options.t0 = Some(2.0 * t0);
    let run = bench.run("square_well")?;
    let rec = doubled.time_delay(&run.packet, &run.summary, &run.stationary.basis, exec)?;
    let change = rel(rec.delay_at_max_radius(), tau);
    Ok(vec![
        Check::at_most("norm_drift", drift, 1e-10),
        Check::within("strang_order", order, 1.8, 2.2),
        Check::at_most("t0_doubling_change", change, 1e-4),
    ])
}
