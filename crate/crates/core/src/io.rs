//! File formats: system spec JSON and CSV output.
//!
//! A system spec looks like
//!
//! ```json
//! {"n": 2, "k": 4,
//!  "basis": [[0.8660254037844387, 0.5], [-0.5, 0.8660254037844387]],
//!  "lambda": [1.0, -0.5],
//!  "kappa": [-1.0, -1.0]}
//! ```
//!
//! `basis` lists the `n` basis vectors, each as an array of `n` reals, so
//! `basis[j]` is `v_{j+1}`.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{BasinGrid, Trajectory};
use crate::tensor::OdecoSystem;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub n: usize,
    pub k: usize,
    pub basis: Vec<Vec<f64>>,
    pub lambda: Vec<f64>,
    pub kappa: Vec<f64>,
}

impl SystemSpec {
    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    /// Build the system with shape checks and column normalization only, so a
    /// non-orthonormal basis can still be reported by `validate_system`.
    pub fn to_system_unchecked(&self) -> Result<OdecoSystem> {
        if self.basis.len() != self.n {
            return Err(Error::InvalidSystem(format!(
                "n = {} but {} basis vectors were given",
                self.n,
                self.basis.len()
            )));
        }
        OdecoSystem::from_parts(
            self.k,
            self.basis.clone(),
            self.lambda.clone(),
            self.kappa.clone(),
        )
    }

    /// Build the system and require an orthonormal basis.
    pub fn to_system(&self) -> Result<OdecoSystem> {
        let sys = self.to_system_unchecked()?;
        OdecoSystem::new(
            sys.degree(),
            sys.basis().to_vec(),
            sys.lambda().to_vec(),
            sys.kappa().to_vec(),
        )
    }
}

impl From<&OdecoSystem> for SystemSpec {
    fn from(sys: &OdecoSystem) -> Self {
        Self {
            n: sys.dim(),
            k: sys.degree(),
            basis: sys.basis().to_vec(),
            lambda: sys.lambda().to_vec(),
            kappa: sys.kappa().to_vec(),
        }
    }
}

fn join(values: impl IntoIterator<Item = f64>) -> String {
    values
        .into_iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// Header `t,x1..xn,y1..yn`.
pub fn trajectory_header(n: usize) -> String {
    let xs = (1..=n).map(|i| format!("x{i}"));
    let ys = (1..=n).map(|i| format!("y{i}"));
    std::iter::once("t".to_string())
        .chain(xs)
        .chain(ys)
        .collect::<Vec<_>>()
        .join(",")
}

pub fn write_trajectory_csv<W: Write>(mut w: W, traj: &Trajectory) -> io::Result<()> {
    let n = traj.states.first().map_or(0, Vec::len);
    writeln!(w, "{}", trajectory_header(n))?;
    for ((t, x), y) in traj.times.iter().zip(&traj.states).zip(&traj.modal) {
        writeln!(
            w,
            "{},{},{}",
            t,
            join(x.iter().copied()),
            join(y.iter().copied())
        )?;
    }
    Ok(())
}

/// Rows `x1,x2,label` with label in `{conv, esc, undec}`.
pub fn write_basin_csv<W: Write>(mut w: W, grid: &BasinGrid) -> io::Result<()> {
    writeln!(w, "x1,x2,label")?;
    for cell in &grid.cells {
        writeln!(w, "{},{},{}", cell.x1, cell.x2, cell.label.as_str())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{BasinCell, BasinLabel, BasinSettings, GridSpec, Termination};

    #[test]
    fn parse_example_spec() {
        let text = r#"{"n":2,"k":4,"basis":[[1,0],[0,1]],"lambda":[1.0,-0.5],"kappa":[-1.0,-1.0]}"#;
        let spec = SystemSpec::from_json(text).unwrap();
        let sys = spec.to_system().unwrap();
        assert_eq!(sys.degree(), 4);
        assert_eq!(SystemSpec::from(&sys), spec);
        assert!(SystemSpec::from_json("{not json").is_err());
        assert!(SystemSpec::from_json(r#"{"n":2}"#).is_err());
    }

    #[test]
    fn count_mismatch_rejected() {
        let spec = SystemSpec {
            n: 3,
            k: 4,
            basis: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            lambda: vec![1.0, 1.0],
            kappa: vec![-1.0, -1.0],
        };
        assert!(spec.to_system_unchecked().is_err());
    }

    #[test]
    fn csv_layouts() {
        let traj = Trajectory {
            dt: 0.5,
            times: vec![0.0, 0.5],
            states: vec![vec![1.0, 2.0], vec![0.5, 1.0]],
            modal: vec![vec![2.0, -1.0], vec![1.0, -0.5]],
            termination: Termination::Completed,
        };
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &traj).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "t,x1,x2,y1,y2\n0,1,2,2,-1\n0.5,0.5,1,1,-0.5\n"
        );

        let grid = BasinGrid {
            grid: GridSpec::default(),
            settings: BasinSettings::default(),
            cells: vec![
                BasinCell {
                    x1: 0.0,
                    x2: 0.0,
                    label: BasinLabel::Converged,
                },
                BasinCell {
                    x1: 3.0,
                    x2: 0.0,
                    label: BasinLabel::Escaped,
                },
                BasinCell {
                    x1: 1.0,
                    x2: 0.0,
                    label: BasinLabel::Undecided,
                },
            ],
            boundaries: vec![],
        };
        let mut buf = Vec::new();
        write_basin_csv(&mut buf, &grid).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "x1,x2,label\n0,0,conv\n3,0,esc\n1,0,undec\n"
        );
    }
}
