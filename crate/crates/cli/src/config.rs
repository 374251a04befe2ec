//! TOML configuration: system definition (Rydberg parameters or explicit
//! Hamiltonian pair), synthesis problem settings, and output options.

use anyhow::{bail, Context, Result};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Deserialize;

use nonholo_core::control::HamiltonianPair;
use nonholo_core::linalg::{CMat, HermitianMatrix, UnitaryMatrix};
use nonholo_core::rydberg::{self, DipoleSpec, RydbergParams};
use nonholo_core::{ControlProblem, SubdivisionSchedule};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    pub system: SystemConfig,
    #[serde(default)]
    pub problem: ProblemConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemConfig {
    /// Two-atom Rydberg model; omitted fields take the library defaults.
    Rydberg {
        r_m: Option<f64>,
        theta: Option<f64>,
        phi: Option<f64>,
        e_a: Option<f64>,
        e_b: Option<f64>,
        gamma_au: Option<f64>,
        resonances: Option<[f64; 3]>,
        dipole: Option<DipoleConfig>,
    },
    /// Explicit Hamiltonian pair in atomic units.
    Explicit {
        h_a_re: Vec<Vec<f64>>,
        #[serde(default)]
        h_a_im: Option<Vec<Vec<f64>>>,
        h_b_re: Vec<Vec<f64>>,
        #[serde(default)]
        h_b_im: Option<Vec<Vec<f64>>>,
    },
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DipoleConfig {
    Radial {
        d_a: f64,
        d_b: f64,
    },
    Explicit {
        v_dd_re: Vec<Vec<f64>>,
        #[serde(default)]
        v_dd_im: Option<Vec<Vec<f64>>>,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    /// "cnot", "identity", or "explicit" (with target_re/target_im).
    #[serde(default = "default_target")]
    pub target: String,
    #[serde(default)]
    pub target_re: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub target_im: Option<Vec<Vec<f64>>>,
    #[serde(default = "default_fidelity_goal")]
    pub fidelity_goal: f64,
    #[serde(default = "default_max_subdivision")]
    pub max_subdivision: u32,
    #[serde(default)]
    pub rng_seed: u64,
    /// Characteristic pulse duration as a multiple of pi / ||H_a||.
    #[serde(default = "default_timing_scale_mult")]
    pub timing_scale_mult: f64,
}

fn default_target() -> String {
    "cnot".into()
}
fn default_fidelity_goal() -> f64 {
    1.0 - 1e-8
}
fn default_max_subdivision() -> u32 {
    256
}
fn default_timing_scale_mult() -> f64 {
    1.0
}

impl Default for ProblemConfig {
    fn default() -> Self {
        Self {
            target: default_target(),
            target_re: None,
            target_im: None,
            fidelity_goal: default_fidelity_goal(),
            max_subdivision: default_max_subdivision(),
            rng_seed: 0,
            timing_scale_mult: default_timing_scale_mult(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out_dir")]
    pub dir: String,
    #[serde(default = "default_true")]
    pub pulse_plot: bool,
    #[serde(default)]
    pub stark_diagram: bool,
}

fn default_out_dir() -> String {
    "out".into()
}
fn default_true() -> bool {
    true
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_out_dir(),
            pulse_plot: true,
            stark_diagram: false,
        }
    }
}

pub fn load(path: &std::path::Path) -> Result<ConfigDocument> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    let doc: ConfigDocument = toml::from_str(&text)
        .with_context(|| format!("cannot parse config file {}", path.display()))?;
    Ok(doc)
}

fn complex_matrix(re: &[Vec<f64>], im: Option<&Vec<Vec<f64>>>, what: &str) -> Result<CMat> {
    let n = re.len();
    if n == 0 || re.iter().any(|row| row.len() != n) {
        bail!("{what}: real part must be a nonempty square matrix");
    }
    if let Some(im) = im {
        if im.len() != n || im.iter().any(|row| row.len() != n) {
            bail!("{what}: imaginary part must match the real part's shape");
        }
    }
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let imv = im.map_or(0.0, |im| im[i][j]);
            m[(i, j)] = Complex64::new(re[i][j], imv);
        }
    }
    Ok(m)
}

impl ConfigDocument {
    /// The Rydberg parameters, when the system is the Rydberg model.
    pub fn rydberg_params(&self) -> Result<Option<RydbergParams>> {
        match &self.system {
            SystemConfig::Explicit { .. } => Ok(None),
            SystemConfig::Rydberg {
                r_m,
                theta,
                phi,
                e_a,
                e_b,
                gamma_au,
                resonances,
                dipole,
            } => {
                let mut p = RydbergParams::default();
                if let Some(v) = r_m {
                    p.r_m = *v;
                }
                if let Some(v) = theta {
                    p.theta = *v;
                }
                if let Some(v) = phi {
                    p.phi = *v;
                }
                if let Some(v) = e_a {
                    p.e_a = *v;
                }
                if let Some(v) = e_b {
                    p.e_b = *v;
                }
                if let Some(v) = gamma_au {
                    p.gamma_au = *v;
                }
                if let Some(v) = resonances {
                    p.resonances = *v;
                }
                match dipole {
                    None => {}
                    Some(DipoleConfig::Radial { d_a, d_b }) => {
                        p.dipole = DipoleSpec::Radial {
                            d_a: *d_a,
                            d_b: *d_b,
                        };
                    }
                    Some(DipoleConfig::Explicit { v_dd_re, v_dd_im }) => {
                        let m = complex_matrix(v_dd_re, v_dd_im.as_ref(), "v_dd")?;
                        if m.nrows() != 4 {
                            bail!("v_dd must be 4x4");
                        }
                        p.dipole = DipoleSpec::Explicit(
                            HermitianMatrix::new(m).context("v_dd is not Hermitian")?,
                        );
                    }
                }
                p.validate().context("invalid Rydberg parameters")?;
                Ok(Some(p))
            }
        }
    }

    pub fn build_pair(&self) -> Result<HamiltonianPair> {
        match &self.system {
            SystemConfig::Rydberg { .. } => {
                let params = self.rydberg_params()?.expect("rydberg mode");
                rydberg::hamiltonian_pair(&params).context("cannot build Rydberg pair")
            }
            SystemConfig::Explicit {
                h_a_re,
                h_a_im,
                h_b_re,
                h_b_im,
            } => {
                let a = complex_matrix(h_a_re, h_a_im.as_ref(), "h_a")?;
                let b = complex_matrix(h_b_re, h_b_im.as_ref(), "h_b")?;
                let h_a = HermitianMatrix::new(a).context("h_a is not Hermitian")?;
                let h_b = HermitianMatrix::new(b).context("h_b is not Hermitian")?;
                HamiltonianPair::new(h_a, h_b).context("cannot build Hamiltonian pair")
            }
        }
    }

    pub fn target_unitary(&self, dim: usize) -> Result<UnitaryMatrix> {
        match self.problem.target.as_str() {
            "cnot" => {
                if dim != 4 {
                    bail!("the cnot target needs a 4-state system, got dimension {dim}");
                }
                Ok(rydberg::cnot_target())
            }
            "identity" => Ok(UnitaryMatrix::identity(dim)),
            "explicit" => {
                let re = self
                    .problem
                    .target_re
                    .as_ref()
                    .context("target = \"explicit\" needs target_re")?;
                let m = complex_matrix(re, self.problem.target_im.as_ref(), "target")?;
                if m.nrows() != dim {
                    bail!(
                        "target dimension {} does not match system dimension {dim}",
                        m.nrows()
                    );
                }
                UnitaryMatrix::new(m).context("target is not unitary")
            }
            other => bail!("unknown target \"{other}\" (expected cnot, identity or explicit)"),
        }
    }

    pub fn build_problem(&self) -> Result<ControlProblem> {
        let pair = self.build_pair()?;
        let target = self.target_unitary(pair.dim())?;
        let mut problem =
            ControlProblem::new(pair, target).context("cannot set up the synthesis problem")?;
        // goal = 1.0 exactly is accepted here and fails in the synthesis run:
        // floating point cannot reliably reach an exact fidelity of 1.
        if !(self.problem.fidelity_goal > 0.0 && self.problem.fidelity_goal <= 1.0) {
            bail!(
                "fidelity_goal must lie in (0, 1], got {}",
                self.problem.fidelity_goal
            );
        }
        problem.fidelity_goal = self.problem.fidelity_goal;
        problem.max_subdivision = self.problem.max_subdivision;
        problem.rng_seed = self.problem.rng_seed;
        if self.problem.timing_scale_mult.is_nan() || self.problem.timing_scale_mult <= 0.0 {
            bail!("timing_scale_mult must be positive");
        }
        problem.timing_scale *= self.problem.timing_scale_mult;
        problem.schedule = SubdivisionSchedule::PowersOfTwo;
        Ok(problem)
    }
}
