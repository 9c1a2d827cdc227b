//! Straight waveguide of constant cross-section: transverse modes, thresholds,
//! potentials and their projection onto the channel basis.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::numerics::interp::lagrange_weights;
use crate::numerics::quad::gauss_legendre;
use crate::{Error, Result};

/// Default transverse quadrature order for channel projections.
pub const DEFAULT_QUADRATURE_ORDER: usize = 64;

/// Dirichlet modes of the cross-section `(0, width)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransverseBasis {
    width: f64,
    thresholds: Vec<f64>,
}

impl TransverseBasis {
    pub fn new(width: f64, mode_count: usize) -> Result<Self> {
        if !(width.is_finite() && width > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "waveguide width must be positive and finite, got {width}"
            )));
        }
        if mode_count == 0 {
            return Err(Error::InvalidArgument("at least one transverse mode is required".into()));
        }
        let thresholds = (1..=mode_count)
            .map(|a| (a as f64 * PI / width).powi(2))
            .collect();
        Ok(Self { width, thresholds })
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn mode_count(&self) -> usize {
        self.thresholds.len()
    }

    /// Thresholds in increasing order; channel `a` (zero-based) has threshold `thresholds()[a]`.
    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn threshold(&self, channel: usize) -> f64 {
        self.thresholds[channel]
    }

    /// Normalised transverse eigenfunction of channel `channel` (zero-based).
    pub fn mode(&self, channel: usize, y: f64) -> f64 {
        (2.0 / self.width).sqrt() * ((channel + 1) as f64 * PI * y / self.width).sin()
    }

    /// Default exclusion half-width around each threshold.
    pub fn default_threshold_window(&self) -> f64 {
        1e-3 * self.thresholds[0]
    }

    /// The inter-threshold interval `(lower, upper)` containing `energy`.
    /// `upper` is infinite above the last threshold of the basis.
    pub fn interval_of(&self, energy: f64) -> (f64, f64) {
        let mut lower = f64::NEG_INFINITY;
        for &t in &self.thresholds {
            if energy < t {
                return (lower, t);
            }
            lower = t;
        }
        (lower, f64::INFINITY)
    }

    /// Transverse matrix elements of `profile`, symmetric by construction.
    pub fn transverse_matrix(&self, profile: &TransverseProfile, order: usize) -> DMatrix<f64> {
        let (y, w) = gauss_legendre(order, 0.0, self.width);
        let n = self.mode_count();
        let modes: Vec<Vec<f64>> = (0..n).map(|a| y.iter().map(|&y| self.mode(a, y)).collect()).collect();
        let u: Vec<f64> = y.iter().map(|&y| profile.eval(y)).collect();
        let mut m = DMatrix::zeros(n, n);
        for a in 0..n {
            for b in a..n {
                let v: f64 = (0..y.len()).map(|k| w[k] * modes[a][k] * u[k] * modes[b][k]).sum();
                m[(a, b)] = v;
                m[(b, a)] = v;
            }
        }
        m
    }
}

/// Open channels at a given energy, with their longitudinal momenta.
#[derive(Clone, Debug, PartialEq)]
pub struct OpenChannels {
    pub energy: f64,
    pub momenta: Vec<f64>,
}

impl OpenChannels {
    pub fn count(&self) -> usize {
        self.momenta.len()
    }

    /// Dimension of the energy fiber: two directions per open channel.
    pub fn fiber_dimension(&self) -> usize {
        2 * self.momenta.len()
    }
}

/// Open channels at `energy`, rejecting energies near a threshold.
pub fn open_channels(energy: f64, basis: &TransverseBasis, window: f64) -> Result<OpenChannels> {
    if !energy.is_finite() {
        return Err(Error::InvalidArgument(format!("energy must be finite, got {energy}")));
    }
    for (a, &t) in basis.thresholds().iter().enumerate() {
        if (energy - t).abs() < window {
            return Err(Error::ThresholdProximity {
                energy,
                threshold: t,
                channel: a + 1,
                window,
            });
        }
    }
    if energy <= basis.threshold(0) {
        return Err(Error::InvalidArgument(format!(
            "energy {energy} is below the continuum threshold {}",
            basis.threshold(0)
        )));
    }
    let momenta = basis
        .thresholds()
        .iter()
        .take_while(|&&t| t < energy)
        .map(|&t| (energy - t).sqrt())
        .collect();
    Ok(OpenChannels { energy, momenta })
}

/// Longitudinal factor of a separable potential.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LongitudinalProfile {
    /// `amplitude * exp(-(x - center)^2 / (2 width^2))`
    Gaussian {
        amplitude: f64,
        width: f64,
        #[serde(default)]
        center: f64,
    },
    /// `amplitude` on `|x - center| < half_width`, half of it on the edges.
    Box {
        amplitude: f64,
        half_width: f64,
        #[serde(default)]
        center: f64,
    },
    /// `amplitude * sech^2((x - center) / width)`
    Sech2 {
        amplitude: f64,
        width: f64,
        #[serde(default)]
        center: f64,
    },
}

impl LongitudinalProfile {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            LongitudinalProfile::Gaussian { amplitude, width, center } => {
                let u = (x - center) / width;
                amplitude * (-0.5 * u * u).exp()
            }
            LongitudinalProfile::Box { amplitude, half_width, center } => {
                let d = (x - center).abs();
                let tol = 1e-12 * half_width.max(1.0);
                if (d - half_width).abs() <= tol {
                    0.5 * amplitude
                } else if d < half_width {
                    amplitude
                } else {
                    0.0
                }
            }
            LongitudinalProfile::Sech2 { amplitude, width, center } => {
                let c = ((x - center) / width).cosh();
                amplitude / (c * c)
            }
        }
    }

    pub fn amplitude(&self) -> f64 {
        match *self {
            LongitudinalProfile::Gaussian { amplitude, .. }
            | LongitudinalProfile::Box { amplitude, .. }
            | LongitudinalProfile::Sech2 { amplitude, .. } => amplitude,
        }
    }

    fn center(&self) -> f64 {
        match *self {
            LongitudinalProfile::Gaussian { center, .. }
            | LongitudinalProfile::Box { center, .. }
            | LongitudinalProfile::Sech2 { center, .. } => center,
        }
    }

    /// Distance from the origin beyond which `|v| < rel * |amplitude|`.
    pub fn extent(&self, rel: f64) -> f64 {
        let r = match *self {
            LongitudinalProfile::Gaussian { width, .. } => width * (2.0 * (1.0 / rel).ln()).sqrt(),
            LongitudinalProfile::Box { half_width, .. } => half_width,
            LongitudinalProfile::Sech2 { width, .. } => width * (1.0 / rel.sqrt()).acosh(),
        };
        self.center().abs() + r
    }

    /// Power-law decay exponent of the profile; infinite for the catalog shapes.
    pub fn decay_exponent(&self) -> f64 {
        f64::INFINITY
    }

    /// Support if the profile is compactly supported.
    pub fn compact_support(&self) -> Option<(f64, f64)> {
        match *self {
            LongitudinalProfile::Box { half_width, center, .. } => {
                Some((center - half_width, center + half_width))
            }
            _ => None,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            LongitudinalProfile::Gaussian { amplitude, width, center }
            | LongitudinalProfile::Sech2 { amplitude, width, center } => {
                amplitude.is_finite() && center.is_finite() && width.is_finite() && width > 0.0
            }
            LongitudinalProfile::Box { amplitude, half_width, center } => {
                amplitude.is_finite() && center.is_finite() && half_width.is_finite() && half_width > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid longitudinal profile {self:?}")))
        }
    }
}

/// Transverse factor of a separable potential, a function on `(0, width)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TransverseProfile {
    Constant { value: f64 },
    /// `amplitude * exp(-(y - center)^2 / (2 width^2))`
    GaussianBump { amplitude: f64, center: f64, width: f64 },
}

impl TransverseProfile {
    pub fn eval(&self, y: f64) -> f64 {
        match *self {
            TransverseProfile::Constant { value } => value,
            TransverseProfile::GaussianBump { amplitude, center, width } => {
                let u = (y - center) / width;
                amplitude * (-0.5 * u * u).exp()
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            TransverseProfile::Constant { value } => value.is_finite(),
            TransverseProfile::GaussianBump { amplitude, center, width } => {
                amplitude.is_finite() && center.is_finite() && width.is_finite() && width > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid transverse profile {self:?}")))
        }
    }
}

/// One product term `u(y) v(x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeparableTerm {
    pub transverse: TransverseProfile,
    pub longitudinal: LongitudinalProfile,
}

/// Potential values sampled on a tensor grid: Gauss-Legendre nodes across the
/// guide and a uniform grid along it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridPotential {
    /// Number of Gauss-Legendre nodes on `(0, width)` at which each row is sampled.
    pub transverse_nodes: usize,
    pub x_start: f64,
    pub x_step: f64,
    /// `values[i][k]`: potential at `x_start + i * x_step` and transverse node `k`.
    pub values: Vec<Vec<f64>>,
    /// Declared power-law decay exponent, if known.
    #[serde(default)]
    pub decay_exponent: Option<f64>,
}

impl GridPotential {
    /// Samples `spec` on the given tensor grid.
    pub fn sample(spec: &PotentialSpec, width: f64, transverse_nodes: usize, x: &XGrid) -> Result<Self> {
        let (y, _) = gauss_legendre(transverse_nodes, 0.0, width);
        let values = (0..x.len)
            .map(|i| {
                let xi = x.point(i);
                y.iter().map(|&y| spec.eval(y, xi)).collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            transverse_nodes,
            x_start: x.start,
            x_step: x.step,
            values,
            decay_exponent: None,
        })
    }

    fn validate(&self) -> Result<()> {
        if self.values.is_empty() || !(self.x_step > 0.0) {
            return Err(Error::InvalidArgument("grid-sampled potential has no samples".into()));
        }
        if self.values.iter().any(|r| r.len() != self.transverse_nodes) {
            return Err(Error::InvalidArgument(
                "every grid-sampled row must have one value per transverse node".into(),
            ));
        }
        if self.values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("grid-sampled potential contains non-finite values".into()));
        }
        Ok(())
    }
}

/// Potential on the waveguide.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialSpec {
    Zero,
    Separable(SeparableTerm),
    SumOfSeparables { terms: Vec<SeparableTerm> },
    GridSampled(GridPotential),
}

impl PotentialSpec {
    pub fn terms(&self) -> &[SeparableTerm] {
        match self {
            PotentialSpec::Separable(t) => std::slice::from_ref(t),
            PotentialSpec::SumOfSeparables { terms } => terms,
            _ => &[],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PotentialSpec::Zero => Ok(()),
            PotentialSpec::GridSampled(g) => g.validate(),
            _ => {
                for t in self.terms() {
                    t.transverse.validate()?;
                    t.longitudinal.validate()?;
                }
                Ok(())
            }
        }
    }

    /// Pointwise value. Grid-sampled potentials are not evaluated pointwise.
    pub fn eval(&self, y: f64, x: f64) -> Result<f64> {
        match self {
            PotentialSpec::GridSampled(_) => Err(Error::InvalidArgument(
                "grid-sampled potentials have no pointwise evaluator".into(),
            )),
            _ => Ok(self
                .terms()
                .iter()
                .map(|t| t.transverse.eval(y) * t.longitudinal.eval(x))
                .sum()),
        }
    }

    /// Power-law decay exponent (infinite for exponentially decaying or compact profiles).
    pub fn decay_exponent(&self) -> f64 {
        match self {
            PotentialSpec::GridSampled(g) => g.decay_exponent.unwrap_or(f64::INFINITY),
            _ => self
                .terms()
                .iter()
                .map(|t| t.longitudinal.decay_exponent())
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// The same potential multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> PotentialSpec {
        let scale_term = |t: &SeparableTerm| {
            let mut t = t.clone();
            match &mut t.longitudinal {
                LongitudinalProfile::Gaussian { amplitude, .. }
                | LongitudinalProfile::Box { amplitude, .. }
                | LongitudinalProfile::Sech2 { amplitude, .. } => *amplitude *= factor,
            }
            t
        };
        match self {
            PotentialSpec::Zero => PotentialSpec::Zero,
            PotentialSpec::Separable(t) => PotentialSpec::Separable(scale_term(t)),
            PotentialSpec::SumOfSeparables { terms } => PotentialSpec::SumOfSeparables {
                terms: terms.iter().map(scale_term).collect(),
            },
            PotentialSpec::GridSampled(g) => {
                let mut g = g.clone();
                for row in &mut g.values {
                    for v in row.iter_mut() {
                        *v *= factor;
                    }
                }
                PotentialSpec::GridSampled(g)
            }
        }
    }

    /// Longitudinal edges of compactly supported terms.
    pub fn edges(&self) -> Vec<f64> {
        let mut e: Vec<f64> = self
            .terms()
            .iter()
            .filter_map(|t| t.longitudinal.compact_support())
            .flat_map(|(a, b)| [a, b])
            .collect();
        e.sort_by(f64::total_cmp);
        e.dedup();
        e
    }
}

/// Uniform grid `start + i * step`, `i < len`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct XGrid {
    pub start: f64,
    pub step: f64,
    pub len: usize,
}

impl XGrid {
    /// `[-extent, extent]` with `x = 0` on the grid.
    pub fn symmetric(extent: f64, step: f64) -> Result<Self> {
        if !(extent > 0.0 && step > 0.0) {
            return Err(Error::InvalidArgument("grid extent and step must be positive".into()));
        }
        let half = extent / step;
        let m = half.round();
        if (half - m).abs() > 1e-8 * half.max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "grid step {step} does not divide extent {extent}"
            )));
        }
        let m = m as usize;
        Ok(Self {
            start: -(m as f64) * step,
            step,
            len: 2 * m + 1,
        })
    }

    pub fn point(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn end(&self) -> f64 {
        self.point(self.len - 1)
    }

    /// Index of the node at `x`, if `x` is (to rounding) a grid node.
    pub fn node_index(&self, x: f64) -> Option<usize> {
        let s = (x - self.start) / self.step;
        let i = s.round();
        if (s - i).abs() < 1e-8 && i >= 0.0 && (i as usize) < self.len {
            Some(i as usize)
        } else {
            None
        }
    }
}

/// Closed-form channel potential `sum_k U_k v_k(x)` for separable potentials.
#[derive(Clone, Debug)]
pub struct ChannelPotential {
    terms: Vec<(DMatrix<f64>, LongitudinalProfile)>,
    channels: usize,
}

impl ChannelPotential {
    pub fn new(spec: &PotentialSpec, basis: &TransverseBasis, order: usize) -> Self {
        let terms = spec
            .terms()
            .iter()
            .map(|t| (basis.transverse_matrix(&t.transverse, order), t.longitudinal.clone()))
            .collect();
        Self {
            terms,
            channels: basis.mode_count(),
        }
    }

    pub fn eval(&self, x: f64) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.channels, self.channels);
        for (u, v) in &self.terms {
            let s = v.eval(x);
            if s != 0.0 {
                m += u * s;
            }
        }
        m
    }

    fn truncated(&self, n: usize) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|(u, v)| (u.view((0, 0), (n, n)).into_owned(), v.clone()))
                .collect(),
            channels: n,
        }
    }
}

/// Channel coupling `V_ab(x)` sampled on a uniform longitudinal grid.
#[derive(Clone, Debug)]
pub struct CouplingMatrix {
    grid: XGrid,
    channels: usize,
    values: Vec<f64>,
    model: Option<Arc<ChannelPotential>>,
    edges: Vec<f64>,
    peak: f64,
}

impl CouplingMatrix {
    pub fn grid(&self) -> &XGrid {
        &self.grid
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn value(&self, j: usize, a: usize, b: usize) -> f64 {
        self.values[(j * self.channels + a) * self.channels + b]
    }

    pub fn matrix_at(&self, j: usize) -> DMatrix<f64> {
        let n = self.channels;
        DMatrix::from_row_slice(n, n, &self.values[j * n * n..(j + 1) * n * n])
    }

    /// Largest `|V_ab|` over the grid.
    pub fn peak(&self) -> f64 {
        self.peak
    }

    pub fn is_zero(&self) -> bool {
        self.peak == 0.0
    }

    /// Edges of compactly supported terms; solvers place cell boundaries on them.
    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn has_closed_form(&self) -> bool {
        self.model.is_some()
    }

    /// `V(x)` at an arbitrary point: exact for separable potentials, otherwise
    /// interpolated from the samples (zero outside the grid).
    pub fn eval(&self, x: f64) -> DMatrix<f64> {
        if let Some(m) = &self.model {
            return m.eval(x);
        }
        let n = self.channels;
        let mut out = DMatrix::zeros(n, n);
        if let Some((first, w)) = lagrange_weights(self.grid.start, self.grid.step, self.grid.len, x, 4) {
            for (k, wk) in w.iter().enumerate() {
                out += self.matrix_at(first + k) * *wk;
            }
        }
        out
    }

    /// Largest `|x_j|` at which some `|V_ab(x_j)| >= rel * peak`; zero for a vanishing coupling.
    pub fn matching_radius(&self, rel: f64) -> Result<f64> {
        if self.is_zero() {
            return Ok(0.0);
        }
        let n2 = self.channels * self.channels;
        let cut = rel * self.peak;
        let mut r: f64 = 0.0;
        let mut touches_edge = false;
        for j in 0..self.grid.len {
            let block = &self.values[j * n2..(j + 1) * n2];
            if block.iter().any(|v| v.abs() >= cut) {
                r = r.max(self.grid.point(j).abs());
                if j == 0 || j + 1 == self.grid.len {
                    touches_edge = true;
                }
            }
        }
        if touches_edge {
            return Err(Error::OutOfDomain(format!(
                "potential does not decay below {rel:e} of its peak inside [{}, {}]",
                self.grid.start,
                self.grid.end()
            )));
        }
        Ok(r)
    }

    /// Restriction to the first `n` channels.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.channels {
            return Err(Error::InvalidArgument(format!(
                "cannot restrict {} channels to {n}",
                self.channels
            )));
        }
        let m = self.channels;
        let mut values = Vec::with_capacity(self.grid.len * n * n);
        for j in 0..self.grid.len {
            for a in 0..n {
                for b in 0..n {
                    values.push(self.values[(j * m + a) * m + b]);
                }
            }
        }
        let peak = values.iter().fold(0.0f64, |p, v| p.max(v.abs()));
        Ok(Self {
            grid: self.grid,
            channels: n,
            values,
            model: self.model.as_ref().map(|c| Arc::new(c.truncated(n))),
            edges: self.edges.clone(),
            peak,
        })
    }

    /// Largest `|V_ab - V_ba|` over the grid.
    pub fn asymmetry(&self) -> f64 {
        let n = self.channels;
        let mut worst: f64 = 0.0;
        for j in 0..self.grid.len {
            for a in 0..n {
                for b in 0..a {
                    worst = worst.max((self.value(j, a, b) - self.value(j, b, a)).abs());
                }
            }
        }
        worst
    }
}

/// Projects `potential` onto the channels of `basis` at the nodes of `grid`.
pub fn compute_coupling(
    potential: &PotentialSpec,
    basis: &TransverseBasis,
    grid: &XGrid,
    quadrature_order: usize,
) -> Result<CouplingMatrix> {
    potential.validate()?;
    if grid.len == 0 || !(grid.step > 0.0) {
        return Err(Error::InvalidArgument("coupling grid is empty".into()));
    }
    if quadrature_order < 2 {
        return Err(Error::InvalidArgument("transverse quadrature order must be at least 2".into()));
    }
    let n = basis.mode_count();
    let (values, model) = match potential {
        PotentialSpec::Zero => (vec![0.0; grid.len * n * n], None),
        PotentialSpec::GridSampled(g) => (project_grid(g, basis, grid)?, None),
        _ => {
            let model = ChannelPotential::new(potential, basis, quadrature_order);
            let mut values = Vec::with_capacity(grid.len * n * n);
            for j in 0..grid.len {
                values.extend(model.eval(grid.point(j)).transpose().iter());
            }
            (values, Some(Arc::new(model)))
        }
    };
    let peak = values.iter().fold(0.0f64, |p, v| p.max(v.abs()));
    Ok(CouplingMatrix {
        grid: *grid,
        channels: n,
        values,
        model,
        edges: potential.edges(),
        peak,
    })
}

fn project_grid(g: &GridPotential, basis: &TransverseBasis, grid: &XGrid) -> Result<Vec<f64>> {
    g.validate()?;
    let n = basis.mode_count();
    let (y, w) = gauss_legendre(g.transverse_nodes, 0.0, basis.width());
    let modes: Vec<Vec<f64>> = (0..n).map(|a| y.iter().map(|&y| basis.mode(a, y)).collect()).collect();
    let project_row = |row: &[f64]| {
        let mut m = vec![0.0; n * n];
        for a in 0..n {
            for b in a..n {
                let v: f64 = (0..y.len()).map(|k| w[k] * modes[a][k] * row[k] * modes[b][k]).sum();
                m[a * n + b] = v;
                m[b * n + a] = v;
            }
        }
        m
    };
    let sample_grid = XGrid {
        start: g.x_start,
        step: g.x_step,
        len: g.values.len(),
    };
    let mut out = Vec::with_capacity(grid.len * n * n);
    for j in 0..grid.len {
        let x = grid.point(j);
        if let Some(i) = sample_grid.node_index(x) {
            out.extend(project_row(&g.values[i]));
            continue;
        }
        let (first, wts) = lagrange_weights(g.x_start, g.x_step, g.values.len(), x, 4).ok_or_else(|| {
            Error::OutOfDomain(format!(
                "coupling grid point {x} lies outside the sampled potential [{}, {}]",
                sample_grid.start,
                sample_grid.end()
            ))
        })?;
        let mut m = vec![0.0; n * n];
        for (k, wk) in wts.iter().enumerate() {
            for (acc, v) in m.iter_mut().zip(project_row(&g.values[first + k])) {
                *acc += wk * v;
            }
        }
        out.extend(m);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gaussian_term() -> PotentialSpec {
        PotentialSpec::Separable(SeparableTerm {
            transverse: TransverseProfile::GaussianBump { amplitude: 1.0, center: 0.9, width: 0.3 },
            longitudinal: LongitudinalProfile::Gaussian { amplitude: 2.0, width: 1.0, center: 0.0 },
        })
    }

    #[test]
    fn thresholds_for_unit_width() {
        let b = TransverseBasis::new(1.0, 3).unwrap();
        for (a, t) in b.thresholds().iter().enumerate() {
            let expect = ((a + 1) as f64 * PI).powi(2);
            assert!((t - expect).abs() < 1e-12 * expect);
        }
    }

    #[test]
    fn rejects_bad_basis() {
        assert!(TransverseBasis::new(0.0, 3).is_err());
        assert!(TransverseBasis::new(1.0, 0).is_err());
    }

    #[test]
    fn open_channel_counting() {
        let b = TransverseBasis::new(PI / 2.0, 4).unwrap();
        let o = open_channels(20.0, &b, 1e-3).unwrap();
        assert_eq!(o.count(), 2);
        assert!((o.momenta[1] - 2.0).abs() < 1e-14);
        assert!(matches!(
            open_channels(16.0005, &b, 1e-3),
            Err(Error::ThresholdProximity { channel: 2, .. })
        ));
        assert!(open_channels(3.0, &b, 1e-3).is_err());
    }

    #[test]
    fn box_edges_take_half_value() {
        let v = LongitudinalProfile::Box { amplitude: -4.0, half_width: 1.0, center: 0.0 };
        assert_eq!(v.eval(1.0), -2.0);
        assert_eq!(v.eval(-0.5), -4.0);
        assert_eq!(v.eval(1.5), 0.0);
    }

    #[test]
    fn grid_sampled_matches_separable() {
        let basis = TransverseBasis::new(PI / 2.0, 5).unwrap();
        let grid = XGrid::symmetric(8.0, 0.05).unwrap();
        let spec = gaussian_term();
        let exact = compute_coupling(&spec, &basis, &grid, 64).unwrap();
        let sampled = PotentialSpec::GridSampled(GridPotential::sample(&spec, basis.width(), 64, &grid).unwrap());
        let approx = compute_coupling(&sampled, &basis, &grid, 64).unwrap();
        for j in 0..grid.len {
            for a in 0..5 {
                for b in 0..5 {
                    assert!((exact.value(j, a, b) - approx.value(j, a, b)).abs() <= 1e-10);
                }
            }
        }
    }

    #[test]
    fn grid_sampled_outside_samples_is_rejected() {
        let basis = TransverseBasis::new(1.0, 2).unwrap();
        let small = XGrid::symmetric(2.0, 0.1).unwrap();
        let spec = gaussian_term();
        let sampled = PotentialSpec::GridSampled(GridPotential::sample(&spec, 1.0, 16, &small).unwrap());
        let big = XGrid::symmetric(4.0, 0.1).unwrap();
        assert!(matches!(
            compute_coupling(&sampled, &basis, &big, 16),
            Err(Error::OutOfDomain(_))
        ));
    }

    #[test]
    fn matching_radius_of_box() {
        let basis = TransverseBasis::new(1.0, 2).unwrap();
        let spec = PotentialSpec::Separable(SeparableTerm {
            transverse: TransverseProfile::Constant { value: 1.0 },
            longitudinal: LongitudinalProfile::Box { amplitude: -3.0, half_width: 1.0, center: 0.0 },
        });
        let c = compute_coupling(&spec, &basis, &XGrid::symmetric(4.0, 0.05).unwrap(), 32).unwrap();
        assert!((c.matching_radius(1e-12).unwrap() - 1.0).abs() < 1e-12);
        // constant transverse profile does not couple channels
        assert!(c.value(40, 0, 1).abs() < 1e-14);
    }

    #[test]
    fn constant_profile_in_wide_guide_is_identity_coupling() {
        let basis = TransverseBasis::new(3.0, 4).unwrap();
        let u = basis.transverse_matrix(&TransverseProfile::Constant { value: 1.0 }, 64);
        assert!((u - DMatrix::identity(4, 4)).amax() < 1e-13);
    }

    proptest! {
        #[test]
        fn transverse_modes_are_orthonormal(width in 0.3f64..5.0, modes in 1usize..8) {
            let basis = TransverseBasis::new(width, modes).unwrap();
            let (y, w) = gauss_legendre(64, 0.0, width);
            for a in 0..modes {
                for b in 0..modes {
                    let v: f64 = y.iter().zip(&w).map(|(&y, w)| w * basis.mode(a, y) * basis.mode(b, y)).sum();
                    let e = if a == b { 1.0 } else { 0.0 };
                    prop_assert!((v - e).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn coupling_is_symmetric(c in 0.1f64..1.4, w in 0.1f64..0.8, amp in -5.0f64..5.0, xc in -1.0f64..1.0) {
            let basis = TransverseBasis::new(1.5, 5).unwrap();
            let spec = PotentialSpec::Separable(SeparableTerm {
                transverse: TransverseProfile::GaussianBump { amplitude: 1.0, center: c, width: w },
                longitudinal: LongitudinalProfile::Sech2 { amplitude: amp, width: 0.7, center: xc },
            });
            let m = compute_coupling(&spec, &basis, &XGrid::symmetric(6.0, 0.1).unwrap(), 64).unwrap();
            prop_assert_eq!(m.asymmetry(), 0.0);
        }
    }
}
