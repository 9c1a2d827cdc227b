//! Scenario files: one TOML document describing a waveguide, a potential, an
//! incoming packet and the numerical settings of every stage.
//!
//! [`Scenario::validate`] rejects inconsistent settings before any work is
//! done and names the violated condition in the error message.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::exec::Execution;
use crate::scattering::{compute_sweep, ew_delay, EwDelayMatrix, SMatrixSweep, SolverOptions};
use crate::spectral::{
    commutator_delay, ew_expectation, fiber_grid_for, forward_transform, inverse_transform, apply_smatrix,
    ChannelWavepacket, EwExpectation, FiberVector, PacketSpec, SpectralOptions,
};
use crate::timedomain::{default_radii, time_delay, SojournRecord, TimeDomainOptions, TimeDomainSetup};
use crate::waveguide::{compute_coupling, CouplingMatrix, PotentialSpec, TransverseBasis, XGrid};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveguideConfig {
    /// Width `L` of the cross-section `(0, L)`.
    pub width: f64,
    /// Transverse modes kept in the channel expansion.
    pub modes: usize,
}

/// Energy sweep of the stationary stage. Without explicit bounds the sweep
/// spans the fiber grids of all packets plus a margin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub lambda_min: Option<f64>,
    pub lambda_max: Option<f64>,
    /// Energy spacing; ignored when `points` is given.
    pub energy_step: f64,
    pub points: Option<usize>,
    /// Extra energy added on both sides of the automatic range.
    pub margin: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            lambda_min: None,
            lambda_max: None,
            energy_step: 0.01,
            points: None,
            margin: 0.05,
        }
    }
}

/// Longitudinal grid and matching settings of the S-matrix solver.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSolverConfig")]
pub struct SolverConfig {
    /// Half-length of the coupling grid; derived from the potential when absent.
    pub extent: Option<f64>,
    pub dx: f64,
    /// Gauss-Legendre nodes for transverse matrix elements.
    pub quadrature_order: usize,
    #[serde(flatten)]
    pub options: SolverOptions,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            extent: None,
            dx: 0.02,
            quadrature_order: 64,
            options: SolverOptions::default(),
        }
    }
}

/// Time-domain settings plus the radii at which sojourn times are reported.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTimeConfig")]
pub struct TimeConfig {
    /// Largest radius; `X/2` when absent.
    pub r_max: Option<f64>,
    pub radius_count: usize,
    #[serde(flatten)]
    pub options: TimeDomainOptions,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self {
            r_max: None,
            radius_count: 8,
            options: TimeDomainOptions::default(),
        }
    }
}

// `flatten` switches off `deny_unknown_fields`, so the flattened options are
// collected as a table first and then read strictly.
fn strict<T: serde::de::DeserializeOwned>(rest: toml::Table) -> std::result::Result<T, String> {
    T::deserialize(toml::Value::Table(rest)).map_err(|e| e.to_string().trim_end().to_string())
}

#[derive(Deserialize)]
struct RawSolverConfig {
    extent: Option<f64>,
    dx: Option<f64>,
    quadrature_order: Option<usize>,
    #[serde(flatten)]
    rest: toml::Table,
}

impl TryFrom<RawSolverConfig> for SolverConfig {
    type Error = String;

    fn try_from(raw: RawSolverConfig) -> std::result::Result<Self, String> {
        let d = SolverConfig::default();
        Ok(Self {
            extent: raw.extent,
            dx: raw.dx.unwrap_or(d.dx),
            quadrature_order: raw.quadrature_order.unwrap_or(d.quadrature_order),
            options: strict(raw.rest)?,
        })
    }
}

#[derive(Deserialize)]
struct RawTimeConfig {
    r_max: Option<f64>,
    radius_count: Option<usize>,
    #[serde(flatten)]
    rest: toml::Table,
}

impl TryFrom<RawTimeConfig> for TimeConfig {
    type Error = String;

    fn try_from(raw: RawTimeConfig) -> std::result::Result<Self, String> {
        Ok(Self {
            r_max: raw.r_max,
            radius_count: raw.radius_count.unwrap_or(TimeConfig::default().radius_count),
            options: strict(raw.rest)?,
        })
    }
}

/// Thresholds used to flag results in summaries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub unitarity: f64,
    pub reciprocity: f64,
    /// Relative agreement of the commutator and Eisenbud-Wigner expectations.
    pub commutator: f64,
    /// Relative agreement of the time-domain delay with the stationary one.
    pub delay_agreement: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            unitarity: 1e-6,
            reciprocity: 1e-6,
            commutator: 1e-4,
            delay_agreement: 0.02,
        }
    }
}

/// An additional named packet, used by consistency checks over many packets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogPacket {
    pub name: String,
    pub packet: Vec<PacketSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub output_dir: Option<String>,
    pub waveguide: WaveguideConfig,
    pub potential: PotentialSpec,
    /// Components of the incoming packet, one per occupied channel.
    pub packet: Vec<PacketSpec>,
    #[serde(default)]
    pub catalog: Vec<CatalogPacket>,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub spectral: SpectralOptions,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
}

/// Output of the stationary stage.
#[derive(Clone, Debug)]
pub struct Stationary {
    pub basis: TransverseBasis,
    pub coupling: CouplingMatrix,
    pub range: (f64, f64),
    pub points: usize,
    pub sweep: SMatrixSweep,
    pub delay: EwDelayMatrix,
}

/// Spectral-side delay quantities of one packet.
#[derive(Clone, Debug)]
pub struct SpectralSummary {
    pub fiber: FiberVector,
    pub ew: EwExpectation,
    pub commutator: Complex64,
    /// `S phi` in channel momentum representation.
    pub scattered: ChannelWavepacket,
}

const BUILTIN: [(&str, &str); 3] = [
    ("free", include_str!("../../../scenarios/free.toml")),
    ("square_well", include_str!("../../../scenarios/square_well.toml")),
    ("two_channel", include_str!("../../../scenarios/two_channel.toml")),
];

fn invariant(rule: &str, detail: String) -> Error {
    Error::Config(format!("invariant `{rule}` violated: {detail}"))
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Names of the scenarios compiled into the library.
    pub fn builtin_names() -> Vec<&'static str> {
        BUILTIN.iter().map(|(n, _)| *n).collect()
    }

    pub fn builtin(name: &str) -> Result<Self> {
        let (_, text) = BUILTIN
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| Error::Config(format!("no built-in scenario named `{name}`")))?;
        Self::from_toml_str(text)
    }

    /// SHA-256 of the canonical JSON form, ignoring the output directory.
    pub fn config_hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = None;
        let json = serde_json::to_vec(&canonical).expect("scenario serialises");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn basis(&self) -> Result<TransverseBasis> {
        TransverseBasis::new(self.waveguide.width, self.waveguide.modes)
    }

    pub fn threshold_window(&self, basis: &TransverseBasis) -> f64 {
        self.solver.options.threshold_window.unwrap_or_else(|| basis.default_threshold_window())
    }

    pub fn packet(&self) -> Result<ChannelWavepacket> {
        ChannelWavepacket::from_specs(&self.packet, self.spectral.xi_step)
    }

    /// The primary packet followed by the catalog entries.
    pub fn catalog_packets(&self) -> Result<Vec<(String, ChannelWavepacket)>> {
        let mut out = vec![("primary".to_string(), self.packet()?)];
        for c in &self.catalog {
            out.push((c.name.clone(), ChannelWavepacket::from_specs(&c.packet, self.spectral.xi_step)?));
        }
        Ok(out)
    }

    fn potential_reach(&self) -> f64 {
        match &self.potential {
            PotentialSpec::Zero => 0.0,
            PotentialSpec::GridSampled(g) => g.x_start.abs().max((g.x_start + g.x_step * (g.values.len() as f64 - 1.0)).abs()),
            p => p
                .terms()
                .iter()
                .map(|t| t.longitudinal.extent(self.solver.options.decay_cutoff))
                .fold(0.0, f64::max),
        }
    }

    pub fn solver_extent(&self) -> f64 {
        self.solver.extent.unwrap_or_else(|| (self.potential_reach() + 1.0).ceil())
    }

    pub fn coupling(&self, basis: &TransverseBasis) -> Result<CouplingMatrix> {
        let grid = XGrid::symmetric(self.solver_extent(), self.solver.dx)?;
        compute_coupling(&self.potential, basis, &grid, self.solver.quadrature_order)
    }

    /// Sweep bounds and number of energies.
    pub fn sweep_range(&self, basis: &TransverseBasis) -> Result<(f64, f64, usize)> {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (_, p) in self.catalog_packets()? {
            let g = fiber_grid_for(&p, basis, &self.spectral)?;
            lo = lo.min(g.start);
            hi = hi.max(g.end());
        }
        let lo = self.sweep.lambda_min.unwrap_or(lo - self.sweep.margin);
        let hi = self.sweep.lambda_max.unwrap_or(hi + self.sweep.margin);
        let points = self
            .sweep
            .points
            .unwrap_or_else(|| ((hi - lo) / self.sweep.energy_step).ceil() as usize + 1);
        Ok((lo, hi, points))
    }

    pub fn radii(&self) -> Vec<f64> {
        let r_max = self.time.r_max.unwrap_or(0.5 * self.time.options.extent);
        default_radii(r_max, self.time.radius_count)
    }

    pub fn validate(&self) -> Result<()> {
        let w = &self.waveguide;
        if !(w.width > 0.0 && w.width.is_finite()) {
            return Err(invariant("waveguide.width > 0", format!("width = {}", w.width)));
        }
        if w.modes == 0 {
            return Err(invariant("waveguide.modes >= 1", "no transverse modes".into()));
        }
        self.potential.validate().map_err(|e| invariant("potential is well formed", e.to_string()))?;
        if self.packet.is_empty() {
            return Err(invariant("packet has at least one component", "packet list is empty".into()));
        }
        let basis = self.basis()?;
        let window = self.threshold_window(&basis);
        for (name, specs) in std::iter::once(("primary", &self.packet)).chain(self.catalog.iter().map(|c| (c.name.as_str(), &c.packet))) {
            for s in specs {
                if s.channel == 0 || s.channel > w.modes {
                    return Err(invariant(
                        "1 <= packet.channel <= waveguide.modes",
                        format!("packet `{name}` uses channel {} with {} modes", s.channel, w.modes),
                    ));
                }
            }
            let p = ChannelWavepacket::from_specs(specs, self.spectral.xi_step)?;
            p.validate(&basis, window).map_err(|e| {
                invariant("packet energy support avoids thresholds and zero momentum", format!("packet `{name}`: {e}"))
            })?;
        }

        let sp = &self.spectral;
        if !(sp.xi_step > 0.0 && sp.energy_step > 0.0) {
            return Err(invariant("spectral steps > 0", format!("xi_step = {}, energy_step = {}", sp.xi_step, sp.energy_step)));
        }

        let sw = &self.sweep;
        if sw.points.is_none() && !(sw.energy_step > 0.0) {
            return Err(invariant("sweep.energy_step > 0", format!("energy_step = {}", sw.energy_step)));
        }
        if let Some(n) = sw.points {
            if n < 5 {
                return Err(invariant("sweep.points >= 5", format!("points = {n}")));
            }
        }
        let (lo, hi, _) = self.sweep_range(&basis)?;
        if !(hi > lo) {
            return Err(invariant("sweep.lambda_min < sweep.lambda_max", format!("range [{lo}, {hi}]")));
        }
        for (name, p) in self.catalog_packets()? {
            let g = fiber_grid_for(&p, &basis, sp)?;
            if g.start < lo || g.end() > hi {
                return Err(invariant(
                    "packet energy window within sweep range",
                    format!(
                        "packet `{name}` needs energies [{:.6}, {:.6}] but the sweep covers [{lo}, {hi}]",
                        g.start,
                        g.end()
                    ),
                ));
            }
        }

        let so = &self.solver;
        if !(so.dx > 0.0) {
            return Err(invariant("solver.dx > 0", format!("dx = {}", so.dx)));
        }
        let reach = self.potential_reach();
        if self.solver_extent() <= reach {
            return Err(invariant(
                "solver.extent exceeds the potential support",
                format!("extent = {} but the potential reaches {reach:.4}", self.solver_extent()),
            ));
        }
        if !matches!(self.potential, PotentialSpec::Zero) {
            let open_max = basis.thresholds().iter().filter(|&&t| t < hi).count();
            if open_max + so.options.closed_channels > w.modes {
                return Err(invariant(
                    "open + closed channels <= waveguide.modes",
                    format!(
                        "{open_max} open channels at lambda = {hi} plus {} closed channels exceed {} modes",
                        so.options.closed_channels, w.modes
                    ),
                ));
            }
        }

        let t = &self.time;
        let o = &t.options;
        if !(o.dx > 0.0 && o.dt > 0.0 && o.extent > 0.0) {
            return Err(invariant("time.extent, time.dx, time.dt > 0", format!("extent = {}, dx = {}, dt = {}", o.extent, o.dx, o.dt)));
        }
        let nyquist = std::f64::consts::PI / o.dx;
        if o.dt * nyquist * nyquist > std::f64::consts::PI {
            return Err(invariant(
                "time.dt <= time.dx^2 / pi",
                format!("dt = {} exceeds {:.4e}; the split-step phase would wrap at the grid momenta", o.dt, o.dx * o.dx / std::f64::consts::PI),
            ));
        }
        if let Some(r) = t.r_max {
            if !(r > 0.0) || r > 0.5 * o.extent {
                return Err(invariant("0 < r_max <= X/2", format!("r_max = {r}, X/2 = {}", 0.5 * o.extent)));
            }
        }
        if t.radius_count == 0 {
            return Err(invariant("time.radius_count >= 1", "no radii requested".into()));
        }
        if reach >= 0.5 * o.extent {
            return Err(invariant(
                "potential support within X/2",
                format!("the potential reaches {reach:.4} but X/2 = {}", 0.5 * o.extent),
            ));
        }
        if let Some(c) = o.channels {
            let top = self.packet.iter().map(|s| s.channel).max().unwrap_or(1);
            if c < top {
                return Err(invariant("time.channels covers the packet", format!("{c} channels but the packet uses channel {top}")));
            }
        }
        if let (Some(t0), Some(t1)) = (o.t0, o.t1) {
            if !(t0 < 0.0 && t1 > 0.0) {
                return Err(invariant("t0 < 0 < t1", format!("t0 = {t0}, t1 = {t1}")));
            }
        }

        let tol = &self.tolerances;
        for (name, v) in [
            ("tolerances.unitarity", tol.unitarity),
            ("tolerances.reciprocity", tol.reciprocity),
            ("tolerances.commutator", tol.commutator),
            ("tolerances.delay_agreement", tol.delay_agreement),
        ] {
            if !(v > 0.0) {
                return Err(invariant(&format!("{name} > 0"), format!("{name} = {v}")));
            }
        }
        Ok(())
    }

    /// Scattering matrices and delay matrices over the sweep range.
    pub fn stationary(&self, exec: Execution) -> Result<Stationary> {
        let basis = self.basis()?;
        let coupling = self.coupling(&basis)?;
        let (lo, hi, points) = self.sweep_range(&basis)?;
        let sweep = compute_sweep(&coupling, &basis, lo, hi, points, &self.solver.options, exec)?;
        let delay = ew_delay(&sweep, self.spectral.stencil)?;
        Ok(Stationary {
            basis,
            coupling,
            range: (lo, hi),
            points,
            sweep,
            delay,
        })
    }

    /// Eisenbud-Wigner and commutator expectations of `packet` and its scattered image.
    pub fn spectral_summary(&self, packet: &ChannelWavepacket, st: &Stationary) -> Result<SpectralSummary> {
        let grid = fiber_grid_for(packet, &st.basis, &self.spectral)?;
        let fiber = forward_transform(packet, &st.basis, grid, &self.spectral)?;
        let ew = ew_expectation(&fiber, &st.delay, &self.spectral)?;
        let commutator = commutator_delay(&fiber, &st.sweep, &self.spectral)?;
        let scattered = inverse_transform(&apply_smatrix(&fiber, &st.sweep, &self.spectral)?, &st.basis, &self.spectral)?;
        Ok(SpectralSummary {
            fiber,
            ew,
            commutator,
            scattered,
        })
    }

    pub fn time_setup(&self, basis: &TransverseBasis, packet: &ChannelWavepacket) -> Result<TimeDomainSetup> {
        TimeDomainSetup::new(&self.potential, basis, packet, &self.time.options)
    }

    /// Time-domain delay of `packet` at the scenario radii.
    pub fn time_delay(
        &self,
        packet: &ChannelWavepacket,
        summary: &SpectralSummary,
        basis: &TransverseBasis,
        exec: Execution,
    ) -> Result<SojournRecord> {
        let setup = self.time_setup(basis, packet)?;
        time_delay(packet, &summary.scattered, &self.radii(), &setup, exec)
    }
}
