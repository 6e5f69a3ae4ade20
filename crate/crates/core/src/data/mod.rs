//! Synthetic datasets with a planted signal, group builders and an on-disk container.

mod io;

pub use io::{load_dataset, save_dataset, FORMAT_VERSION, MAGIC};

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prox::GroupStructure;

/// Name recorded in metadata for the normal sampler used by the generators.
pub const SAMPLER: &str = "rand_chacha::ChaCha8Rng/rand_distr::StandardNormal";

/// Length of the planted ramp and number of groups that carry it.
const RAMP: usize = 10;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("groups of size {size} with stride {stride} do not tile 0..{n}")]
    PatternMismatch {
        n: usize,
        size: usize,
        stride: usize,
    },
    #[error("logistic data needs an even number of samples, got {0}")]
    OddSampleCount(usize),
    #[error("invalid generator settings: {0}")]
    InvalidSpec(String),
    #[error("{file}: format version {found}, expected {expected}")]
    FormatVersionMismatch {
        file: String,
        found: u32,
        expected: u32,
    },
    #[error("{file}: {reason}")]
    CorruptFile { file: String, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("metadata: {0}")]
    Meta(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Lasso,
    Logistic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub m: usize,
    pub n: usize,
    pub group_size: usize,
    /// 0 for disjoint groups, otherwise the offset between consecutive group starts.
    pub overlap_stride: usize,
    pub delta: f64,
    pub seed: u64,
    pub model: ModelKind,
}

impl GenSpec {
    pub fn lasso(m: usize, n: usize, group_size: usize, seed: u64) -> Self {
        GenSpec {
            m,
            n,
            group_size,
            overlap_stride: 0,
            delta: 0.01,
            seed,
            model: ModelKind::Lasso,
        }
    }

    pub fn logistic(m: usize, n: usize, group_size: usize, seed: u64) -> Self {
        GenSpec {
            model: ModelKind::Logistic,
            ..GenSpec::lasso(m, n, group_size, seed)
        }
    }

    pub fn validate(&self) -> Result<(), DataError> {
        if self.m == 0 || self.n == 0 {
            return Err(DataError::InvalidSpec("m and n must be positive".into()));
        }
        if self.group_size == 0 {
            return Err(DataError::InvalidSpec(
                "group size must be at least 1".into(),
            ));
        }
        if self.overlap_stride >= self.group_size {
            return Err(DataError::InvalidSpec(format!(
                "overlap stride {} must be below the group size {}",
                self.overlap_stride, self.group_size
            )));
        }
        if !(self.delta >= 0.0) || !self.delta.is_finite() {
            return Err(DataError::InvalidSpec(
                "delta must be a finite nonnegative number".into(),
            ));
        }
        if self.model == ModelKind::Logistic && !self.m.is_multiple_of(2) {
            return Err(DataError::OddSampleCount(self.m));
        }
        if u32::try_from(self.m).is_err() || u32::try_from(self.n).is_err() {
            return Err(DataError::InvalidSpec(
                "dimensions exceed the file format".into(),
            ));
        }
        Ok(())
    }

    pub fn groups(&self) -> Result<GroupStructure, DataError> {
        make_groups(self.n, self.group_size, self.overlap_stride)
    }
}

/// Penalty weights `(gamma1, gamma2)` suggested for each model flavor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaDefaults {
    pub gl: [f64; 2],
    pub sgl: [f64; 2],
    pub osgl: [f64; 2],
    pub sglr: [f64; 2],
}

/// Row count the base penalty weights below were chosen for.
pub const GAMMA_BASE_ROWS: usize = 8000;

/// Recorded in metadata next to the weights.
pub const GAMMA_RULE: &str =
    "least-squares weights (gl 5; sgl 10,10; osgl 0.1,0.1) times sqrt(m/8000); logistic weights 0.01,0.01 unscaled";

impl GammaDefaults {
    /// Whether a group survives at the optimum is decided by the correlation of the
    /// columns with the noise, which grows like `sqrt(m)`; scaling by `sqrt(m / 8000)`
    /// keeps the sparsity level. The logistic loss is an average and needs no scaling.
    pub fn for_rows(m: usize) -> Self {
        let s = (m as f64 / GAMMA_BASE_ROWS as f64).sqrt();
        GammaDefaults {
            gl: [5.0 * s, 0.0],
            sgl: [10.0 * s, 10.0 * s],
            osgl: [0.1 * s, 0.1 * s],
            sglr: [0.01, 0.01],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub format_version: u32,
    #[serde(flatten)]
    pub spec: GenSpec,
    pub sampler: String,
    pub groups: Vec<Vec<usize>>,
    pub gamma_defaults: GammaDefaults,
    pub gamma_rule: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub a: Array2<f64>,
    /// Real responses for Lasso data, `-1/+1` labels for logistic data.
    pub response: Array1<f64>,
    pub groups: GroupStructure,
    pub planted_x: Array1<f64>,
    pub meta: DatasetMeta,
}

/// Group `g` covers `[g*stride, g*stride + size)`; `stride = 0` means `stride = size`.
/// The last group must end exactly at `n`.
pub fn make_groups(n: usize, size: usize, stride: usize) -> Result<GroupStructure, DataError> {
    let stride = if stride == 0 { size } else { stride };
    let mismatch = DataError::PatternMismatch { n, size, stride };
    if size == 0 || stride > size || size > n || !(n - size).is_multiple_of(stride) {
        return Err(mismatch);
    }
    let count = (n - size) / stride + 1;
    let groups = (0..count)
        .map(|g| (g * stride..g * stride + size).collect())
        .collect();
    GroupStructure::new(n, groups).map_err(|_| mismatch)
}

/// Ramps `1, ..., min(10, size)` at the start of each of the first ten blocks of
/// `size` coordinates, zeros elsewhere. Blocks are the disjoint tiling of the
/// coordinates, so overlapping and disjoint datasets share the same signal.
pub fn planted_signal(n: usize, size: usize) -> Array1<f64> {
    let mut x = Array1::zeros(n);
    for block in 0..RAMP {
        for j in 0..size.min(RAMP) {
            let i = block * size + j;
            if i < n {
                x[i] = (j + 1) as f64;
            }
        }
    }
    x
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((m, n), || StandardNormal.sample(rng))
}

fn meta_for(spec: &GenSpec, groups: &GroupStructure) -> DatasetMeta {
    DatasetMeta {
        format_version: FORMAT_VERSION,
        spec: spec.clone(),
        sampler: SAMPLER.to_string(),
        groups: groups.groups().to_vec(),
        gamma_defaults: GammaDefaults::for_rows(spec.m),
        gamma_rule: GAMMA_RULE.to_string(),
    }
}

/// `A` standard normal (row-major draw order), then `b = A x_planted + delta * eps`.
pub fn gen_lasso_dataset(spec: &GenSpec) -> Result<Dataset, DataError> {
    if spec.model != ModelKind::Lasso {
        return Err(DataError::InvalidSpec("expected a lasso spec".into()));
    }
    spec.validate()?;
    let groups = spec.groups()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let a = gaussian_matrix(&mut rng, spec.m, spec.n);
    let planted_x = planted_signal(spec.n, spec.group_size);
    let mut response = a.dot(&planted_x);
    if spec.delta > 0.0 {
        for r in response.iter_mut() {
            let e: f64 = StandardNormal.sample(&mut rng);
            *r += spec.delta * e;
        }
    }
    Ok(Dataset {
        meta: meta_for(spec, &groups),
        a,
        response,
        groups,
        planted_x,
    })
}

/// `A` standard normal; labels `-1` for the first half of the rows and `+1` after.
pub fn gen_logistic_dataset(spec: &GenSpec) -> Result<Dataset, DataError> {
    if spec.model != ModelKind::Logistic {
        return Err(DataError::InvalidSpec("expected a logistic spec".into()));
    }
    spec.validate()?;
    let groups = spec.groups()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let a = gaussian_matrix(&mut rng, spec.m, spec.n);
    let half = spec.m / 2;
    let response = Array1::from_shape_fn(spec.m, |i| if i < half { -1.0 } else { 1.0 });
    Ok(Dataset {
        meta: meta_for(spec, &groups),
        a,
        response,
        groups,
        planted_x: Array1::zeros(spec.n),
    })
}

pub fn generate(spec: &GenSpec) -> Result<Dataset, DataError> {
    match spec.model {
        ModelKind::Lasso => gen_lasso_dataset(spec),
        ModelKind::Logistic => gen_logistic_dataset(spec),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn group_patterns() {
        let g = make_groups(20, 10, 10).unwrap();
        assert_eq!(
            g.groups(),
            &[(0..10).collect::<Vec<_>>(), (10..20).collect()]
        );
        assert!(g.disjoint());
        assert_eq!(make_groups(20, 10, 0).unwrap(), g);
        let o = make_groups(15, 10, 5).unwrap();
        assert_eq!(
            o.groups(),
            &[(0..10).collect::<Vec<_>>(), (5..15).collect()]
        );
        assert!(!o.disjoint());
        assert_eq!(make_groups(10, 10, 0).unwrap().len(), 1);
        for (n, size, stride) in [
            (25, 10, 0),
            (16, 10, 5),
            (5, 10, 0),
            (10, 0, 0),
            (20, 5, 10),
        ] {
            assert!(
                matches!(
                    make_groups(n, size, stride),
                    Err(DataError::PatternMismatch { .. })
                ),
                "{n} {size} {stride}"
            );
        }
    }

    #[test]
    fn planted_ramps() {
        let x = planted_signal(400, 10);
        for j in 0..100 {
            assert_eq!(x[j], (j % 10 + 1) as f64);
        }
        assert!(x.iter().skip(100).all(|&v| v == 0.0));
        let y = planted_signal(400, 50);
        assert_eq!(y[9], 10.0);
        assert_eq!(y[10], 0.0);
        assert_eq!(y[50], 1.0);
        assert_eq!(y.iter().filter(|&&v| v != 0.0).count(), 80);
        let short = planted_signal(12, 4);
        assert_eq!(
            short.to_vec(),
            vec![1.0, 2.0, 3.0, 4.0, 1.0, 2.0, 3.0, 4.0, 1.0, 2.0, 3.0, 4.0]
        );
    }

    #[test]
    fn noiseless_response_is_exact() {
        let mut spec = GenSpec::lasso(30, 20, 5, 3);
        spec.delta = 0.0;
        let d = gen_lasso_dataset(&spec).unwrap();
        assert_eq!(d.response, d.a.dot(&d.planted_x));
        spec.delta = 0.01;
        let noisy = gen_lasso_dataset(&spec).unwrap();
        assert_eq!(noisy.a, d.a);
        let diff = &noisy.response - &d.response;
        assert!(diff.iter().all(|v| v.abs() < 0.1) && diff.iter().any(|&v| v != 0.0));
    }

    #[test]
    fn logistic_labels() {
        let d = gen_logistic_dataset(&GenSpec::logistic(4, 6, 3, 1)).unwrap();
        assert_eq!(d.response.to_vec(), vec![-1.0, -1.0, 1.0, 1.0]);
        let big = gen_logistic_dataset(&GenSpec::logistic(100, 10, 5, 1)).unwrap();
        assert_eq!(big.response.sum(), 0.0);
        assert!(matches!(
            gen_logistic_dataset(&GenSpec::logistic(5, 6, 3, 1)),
            Err(DataError::OddSampleCount(5))
        ));
    }

    #[test]
    fn gamma_defaults_scale_with_rows() {
        let g = GammaDefaults::for_rows(800);
        let s = 0.1f64.sqrt();
        assert!((g.gl[0] - 5.0 * s).abs() < 1e-15 && g.gl[1] == 0.0);
        assert!((g.sgl[0] - 10.0 * s).abs() < 1e-14 && g.sgl[0] == g.sgl[1]);
        assert!((g.osgl[0] - 0.1 * s).abs() < 1e-16);
        assert_eq!(GammaDefaults::for_rows(32000).gl, [10.0, 0.0]);
        assert_eq!(g.sglr, [0.01, 0.01]);
        assert_eq!(GammaDefaults::for_rows(8000).gl, [5.0, 0.0]);
    }

    #[test]
    fn seeds() {
        let spec = GenSpec::lasso(20, 10, 5, 42);
        assert_eq!(
            gen_lasso_dataset(&spec).unwrap(),
            gen_lasso_dataset(&spec).unwrap()
        );
        let other = GenSpec {
            seed: 43,
            ..spec.clone()
        };
        assert_ne!(
            gen_lasso_dataset(&spec).unwrap().a,
            gen_lasso_dataset(&other).unwrap().a
        );
    }

    #[test]
    fn spec_validation() {
        let mut s = GenSpec::lasso(10, 10, 5, 0);
        s.overlap_stride = 5;
        assert!(matches!(s.validate(), Err(DataError::InvalidSpec(_))));
        s.overlap_stride = 0;
        s.delta = -1.0;
        assert!(s.validate().is_err());
        let wrong = GenSpec::logistic(10, 10, 5, 0);
        assert!(gen_lasso_dataset(&wrong).is_err());
        let tiles = GenSpec::lasso(10, 12, 5, 0);
        assert!(matches!(
            gen_lasso_dataset(&tiles),
            Err(DataError::PatternMismatch { .. })
        ));
    }

    #[test]
    fn column_statistics() {
        // Column means and variances within 5 standard errors of (0, 1), pooled over seeds.
        let (m, n, seeds) = (2000, 8, 3u64);
        for model in [ModelKind::Lasso, ModelKind::Logistic] {
            for seed in 0..seeds {
                let spec = GenSpec {
                    model,
                    ..GenSpec::lasso(m, n, 4, seed)
                };
                let a = generate(&spec).unwrap().a;
                let mf = m as f64;
                for col in a.columns() {
                    let mean = col.sum() / mf;
                    let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (mf - 1.0);
                    assert!(mean.abs() < 5.0 / mf.sqrt(), "mean {mean}");
                    assert!(
                        (var - 1.0).abs() < 5.0 * (2.0 / (mf - 1.0)).sqrt(),
                        "var {var}"
                    );
                }
            }
        }
    }
}
