//! Seeded Gaussian sensing instances `y = A x_true` with a k-sparse
//! ground truth.

use std::path::{Path, PathBuf};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AmplitudeModel {
    #[default]
    StdNormal,
    PlusMinusOne,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSpec {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub k: usize,
    /// Entry variance of `A`; `1/M` in the standard setting.
    pub variance: f64,
    #[serde(default)]
    pub amplitude_model: AmplitudeModel,
    pub seed: u64,
}

impl InstanceSpec {
    /// `N(0, 1/M)` entries, standard normal amplitudes.
    pub fn gaussian(n: usize, m: usize, k: usize, seed: u64) -> Self {
        InstanceSpec {
            n,
            m,
            k,
            variance: 1.0 / m as f64,
            amplitude_model: AmplitudeModel::StdNormal,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 {
            return Err(Error::invalid("N and M must be positive"));
        }
        if self.k > self.n {
            return Err(Error::invalid(format!(
                "sparsity k = {} exceeds N = {}",
                self.k, self.n
            )));
        }
        if !(self.variance > 0.0 && self.variance.is_finite()) {
            return Err(Error::domain("variance", self.variance, "finite value > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub a: Matrix,
    pub x_true: Vec<f64>,
    pub y: Vec<f64>,
}

/// Draws `A` row by row, then the support (uniform without replacement),
/// then the amplitudes, all from one ChaCha20 stream seeded by
/// `spec.seed`.
pub fn gen_instance(spec: &InstanceSpec) -> Result<Instance> {
    spec.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let sd = spec.variance.sqrt();
    let data: Vec<f64> = (0..spec.m * spec.n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            sd * z
        })
        .collect();
    let a = Matrix::new(spec.m, spec.n, data)?;

    let mut x_true = vec![0.0; spec.n];
    let mut support = index::sample(&mut rng, spec.n, spec.k).into_vec();
    support.sort_unstable();
    for i in support {
        x_true[i] = match spec.amplitude_model {
            AmplitudeModel::StdNormal => StandardNormal.sample(&mut rng),
            AmplitudeModel::PlusMinusOne => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
        };
    }
    let y = a.mul_vec(&x_true);
    Ok(Instance { a, x_true, y })
}

/// `<dir>/<stem>.A.txt`, `.xtrue.txt`, `.y.txt`.
pub fn instance_paths(dir: &Path, stem: &str) -> [PathBuf; 3] {
    [
        dir.join(format!("{stem}.A.txt")),
        dir.join(format!("{stem}.xtrue.txt")),
        dir.join(format!("{stem}.y.txt")),
    ]
}

pub fn write_instance(inst: &Instance, dir: &Path, stem: &str) -> Result<[PathBuf; 3]> {
    let paths = instance_paths(dir, stem);
    io::write_matrix(&paths[0], &inst.a)?;
    io::write_vector(&paths[1], &inst.x_true)?;
    io::write_vector(&paths[2], &inst.y)?;
    Ok(paths)
}

pub fn read_instance(dir: &Path, stem: &str) -> Result<Instance> {
    let paths = instance_paths(dir, stem);
    Ok(Instance {
        a: io::read_matrix(&paths[0])?,
        x_true: io::read_vector(&paths[1])?,
        y: io::read_vector(&paths[2])?,
    })
}
