//! Planar basin-of-attraction classification by simulation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{integrate_with, DisturbanceSignal, Flow, IntegrationOptions, Termination};
use crate::certify::{self, roa_membership};
use crate::error::{Error, Result};
use crate::tensor::{dot, OdecoSystem, Parity};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub counts: (usize, usize),
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            x_range: (-3.0, 3.0),
            y_range: (-3.0, 3.0),
            counts: (121, 121),
        }
    }
}

impl GridSpec {
    fn axis(range: (f64, f64), count: usize) -> Vec<f64> {
        if count == 1 {
            return vec![range.0];
        }
        let step = (range.1 - range.0) / (count - 1) as f64;
        (0..count).map(|i| range.0 + i as f64 * step).collect()
    }

    /// Grid spacing along each axis (zero for a single point).
    pub fn spacing(&self) -> (f64, f64) {
        let d = |r: (f64, f64), c: usize| {
            if c > 1 {
                (r.1 - r.0) / (c - 1) as f64
            } else {
                0.0
            }
        };
        (
            d(self.x_range, self.counts.0),
            d(self.y_range, self.counts.1),
        )
    }

    /// Points in row order: `x2` outer, `x1` inner.
    pub fn points(&self) -> Vec<[f64; 2]> {
        let xs = Self::axis(self.x_range, self.counts.0);
        let ys = Self::axis(self.y_range, self.counts.1);
        ys.iter()
            .flat_map(|&b| xs.iter().map(move |&a| [a, b]))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasinSettings {
    pub t_end: f64,
    pub dt: f64,
    pub eps: f64,
    pub blowup_threshold: f64,
}

impl Default for BasinSettings {
    fn default() -> Self {
        Self {
            t_end: super::DEFAULT_T_END,
            dt: super::DEFAULT_DT,
            eps: 1e-3,
            blowup_threshold: super::DEFAULT_BLOWUP_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BasinLabel {
    #[serde(rename = "conv")]
    Converged,
    #[serde(rename = "esc")]
    Escaped,
    #[serde(rename = "undec")]
    Undecided,
}

impl BasinLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            BasinLabel::Converged => "conv",
            BasinLabel::Escaped => "esc",
            BasinLabel::Undecided => "undec",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasinCell {
    pub x1: f64,
    pub x2: f64,
    pub label: BasinLabel,
}

/// Analytic ROA boundary `v_rᵀx = offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryLine {
    /// One-based mode number.
    pub mode: usize,
    pub normal: [f64; 2],
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasinGrid {
    pub grid: GridSpec,
    pub settings: BasinSettings,
    pub cells: Vec<BasinCell>,
    pub boundaries: Vec<BoundaryLine>,
}

/// Agreement between simulated labels and analytic ROA membership.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasinStats {
    pub total: usize,
    /// Cells farther than the exclusion band from every boundary line.
    pub considered: usize,
    pub agreeing: usize,
    pub converged: usize,
    pub escaped: usize,
    pub undecided: usize,
    /// Undecided cells among the considered ones (counted as disagreements).
    pub undecided_considered: usize,
    pub band: f64,
    pub agreement: f64,
}

impl BasinGrid {
    /// Compare labels against [`roa_membership`], skipping cells within `band`
    /// of any boundary line. `Converged` agrees with inside; anything else
    /// agrees with outside except `Undecided`, which never agrees.
    pub fn compare_with_analytic(&self, sys: &OdecoSystem, band: f64) -> Result<BasinStats> {
        let mut stats = BasinStats {
            total: self.cells.len(),
            considered: 0,
            agreeing: 0,
            converged: 0,
            escaped: 0,
            undecided: 0,
            undecided_considered: 0,
            band,
            agreement: 1.0,
        };
        for cell in &self.cells {
            match cell.label {
                BasinLabel::Converged => stats.converged += 1,
                BasinLabel::Escaped => stats.escaped += 1,
                BasinLabel::Undecided => stats.undecided += 1,
            }
            let x = [cell.x1, cell.x2];
            let near = self
                .boundaries
                .iter()
                .any(|b| (dot(&b.normal, &x) - b.offset).abs() < band);
            if near {
                continue;
            }
            stats.considered += 1;
            let inside = roa_membership(sys, &x)?.inside;
            let agrees = match cell.label {
                BasinLabel::Converged => inside,
                BasinLabel::Escaped => !inside,
                BasinLabel::Undecided => {
                    stats.undecided_considered += 1;
                    false
                }
            };
            if agrees {
                stats.agreeing += 1;
            }
        }
        if stats.considered > 0 {
            stats.agreement = stats.agreeing as f64 / stats.considered as f64;
        }
        Ok(stats)
    }
}

/// Analytic boundary lines `v_rᵀx = ±c_r` (even `p`) or `v_rᵀx = c_r` (odd `p`).
pub fn boundary_lines(sys: &OdecoSystem) -> Result<Vec<BoundaryLine>> {
    if sys.dim() != 2 {
        return Err(planar_only(sys.dim()));
    }
    let mut lines = Vec::new();
    for r in 0..2 {
        let v = sys.basis_vector(r);
        let normal = [v[0], v[1]];
        if let Some(c) = certify::threshold(&sys.mode(r)).map_err(|e| e.at_mode(r))? {
            lines.push(BoundaryLine {
                mode: r + 1,
                normal,
                offset: c,
            });
            if sys.parity() == Parity::Even {
                lines.push(BoundaryLine {
                    mode: r + 1,
                    normal,
                    offset: -c,
                });
            }
        }
    }
    Ok(lines)
}

fn planar_only(n: usize) -> Error {
    Error::regime(
        None,
        format!("basin grids are defined for planar systems (n = 2, got n = {n}); classify higher-dimensional slices by fixing the remaining coordinates"),
    )
}

/// Simulate every grid point and label it converged, escaped or undecided.
///
/// A cell counts as converged as soon as `‖y‖∞ ≤ eps` at a sample. Cells are
/// independent and evaluated in parallel; results keep grid order.
pub fn basin_grid(
    sys: &OdecoSystem,
    grid: &GridSpec,
    settings: &BasinSettings,
) -> Result<BasinGrid> {
    if sys.dim() != 2 {
        return Err(planar_only(sys.dim()));
    }
    if grid.counts.0 == 0 || grid.counts.1 == 0 {
        return Err(Error::InvalidArgument(
            "grid counts must be positive".into(),
        ));
    }
    if !(settings.eps > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive (got {})",
            settings.eps
        )));
    }
    let boundaries = boundary_lines(sys)?;
    let opts = IntegrationOptions {
        dt: settings.dt,
        t_end: settings.t_end,
        blowup_threshold: settings.blowup_threshold,
    };
    let eps = settings.eps;
    let none = DisturbanceSignal::None;
    let cells = grid
        .points()
        .into_par_iter()
        .map(|[x1, x2]| {
            let termination = integrate_with(sys, &[x1, x2], &opts, &none, |_, _, y| {
                if y.iter().all(|v| v.abs() <= eps) {
                    Flow::Stop
                } else {
                    Flow::Continue
                }
            })?;
            let label = match termination {
                Termination::Stopped { .. } => BasinLabel::Converged,
                Termination::BlewUp { .. } => BasinLabel::Escaped,
                Termination::Completed => BasinLabel::Undecided,
            };
            Ok(BasinCell { x1, x2, label })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BasinGrid {
        grid: *grid,
        settings: *settings,
        cells,
        boundaries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::rotation_basis;

    #[test]
    fn single_origin_cell_converges() {
        let sys =
            OdecoSystem::new(4, rotation_basis(0.5), vec![1.0, -0.5], vec![-1.0, -1.0]).unwrap();
        let grid = GridSpec {
            x_range: (0.0, 0.0),
            y_range: (0.0, 0.0),
            counts: (1, 1),
        };
        let out = basin_grid(&sys, &grid, &BasinSettings::default()).unwrap();
        assert_eq!(out.cells.len(), 1);
        assert_eq!(out.cells[0].label, BasinLabel::Converged);
    }

    #[test]
    fn globally_stable_system_all_converged() {
        let sys =
            OdecoSystem::new(4, rotation_basis(0.2), vec![-1.0, 0.0], vec![-1.0, -2.0]).unwrap();
        let grid = GridSpec {
            x_range: (-3.0, 3.0),
            y_range: (-3.0, 3.0),
            counts: (9, 9),
        };
        let settings = BasinSettings {
            dt: 1e-2,
            ..BasinSettings::default()
        };
        let out = basin_grid(&sys, &grid, &settings).unwrap();
        assert!(out.cells.iter().all(|c| c.label == BasinLabel::Converged));
        assert!(out.boundaries.is_empty());
    }

    #[test]
    fn non_planar_rejected() {
        let sys = OdecoSystem::new(
            4,
            vec![
                vec![1.0, 0.0, 0.0],
                vec![0.0, 1.0, 0.0],
                vec![0.0, 0.0, 1.0],
            ],
            vec![1.0; 3],
            vec![-1.0; 3],
        )
        .unwrap();
        assert!(matches!(
            basin_grid(&sys, &GridSpec::default(), &BasinSettings::default()),
            Err(Error::UnsupportedRegime { .. })
        ));
    }

    #[test]
    fn spacing_and_order() {
        let g = GridSpec {
            x_range: (-1.0, 1.0),
            y_range: (0.0, 2.0),
            counts: (3, 2),
        };
        assert_eq!(g.spacing(), (1.0, 2.0));
        assert_eq!(
            g.points(),
            vec![
                [-1.0, 0.0],
                [0.0, 0.0],
                [1.0, 0.0],
                [-1.0, 2.0],
                [0.0, 2.0],
                [1.0, 2.0]
            ]
        );
    }
}
