//! Synthetic regression data and the diabetes benchmark.
//!
//! Generator algorithm (stable across platforms): a `ChaCha8` stream seeded
//! with `seed` draws the `n × d` inputs row-major as `U[0,1)`, then the `n`
//! noise values as standard normals scaled by `σ`.

use std::fmt;
use std::io::BufRead;
use std::path::Path;
use std::sync::Arc;

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::adversarial::{Domain, TestSet};
use crate::error::{domain, Error, Result};
use crate::seed;

pub const DEFAULT_NOISE_STD: f64 = 0.3;
pub const DIABETES_URL: &str = "https://www4.stat.ncsu.edu/~boos/var.select/diabetes.tab.txt";
pub const DIABETES_HEADER: [&str; 11] = ["AGE", "SEX", "BMI", "BP", "S1", "S2", "S3", "S4", "S5", "S6", "Y"];

type TruthFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A known regression function `f*`.
#[derive(Clone)]
pub struct Truth {
    name: String,
    f: TruthFn,
}

impl Truth {
    pub fn new(name: impl Into<String>, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    /// `sin(2π · mean(x))`; reduces to `sin(2πx)` in one dimension.
    pub fn sine_of_mean() -> Self {
        Self::new("sin(2*pi*mean(x))", |x: &[f64]| {
            let m = x.iter().sum::<f64>() / x.len() as f64;
            (2.0 * std::f64::consts::PI * m).sin()
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    pub fn as_fn(&self) -> &(dyn Fn(&[f64]) -> f64 + Sync) {
        &*self.f
    }
}

impl fmt::Debug for Truth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Truth").field(&self.name).finish()
    }
}

/// Regression sample `(X_i, Y_i)`, optionally with its generating function.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub y: Array1<f64>,
    pub truth: Option<Truth>,
    pub noise_std: f64,
    pub source: String,
    pub seed: Option<u64>,
    /// Rows are unit vectors and perturbations stay on the sphere.
    pub on_sphere: bool,
}

impl Dataset {
    pub fn new(x: Array2<f64>, y: Array1<f64>, source: impl Into<String>) -> Result<Self> {
        let ds = Self {
            x,
            y,
            truth: None,
            noise_std: 0.0,
            source: source.into(),
            seed: None,
            on_sphere: false,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.x.nrows() != self.y.len() {
            return Err(Error::Shape(format!(
                "{} inputs but {} responses",
                self.x.nrows(),
                self.y.len()
            )));
        }
        if self.x.iter().chain(self.y.iter()).any(|v| !v.is_finite()) {
            return Err(domain("dataset contains non-finite values"));
        }
        if self.on_sphere {
            for (i, row) in self.x.axis_iter(Axis(0)).enumerate() {
                if (row.dot(&row).sqrt() - 1.0).abs() > 1e-10 {
                    return Err(domain(format!("row {i} is not on the unit sphere")));
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn domain(&self) -> Domain {
        if self.on_sphere {
            Domain::Sphere
        } else {
            Domain::UnitCube
        }
    }

    /// `y_i - f*(x_i)` when the truth is known.
    pub fn residuals(&self) -> Option<Array1<f64>> {
        let truth = self.truth.as_ref()?;
        Some(
            self.x
                .axis_iter(Axis(0))
                .zip(self.y.iter())
                .map(|(r, y)| y - truth.eval(&r.to_vec()))
                .collect(),
        )
    }

    /// Test points with the truth as reference when known, the observed
    /// responses otherwise.
    pub fn as_test_set(&self) -> TestSet<'_> {
        match &self.truth {
            Some(t) => TestSet::Points {
                x: self.x.view(),
                truth: t.as_fn(),
            },
            None => TestSet::HeldOut {
                x: self.x.view(),
                y: self.y.view(),
            },
        }
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select(Axis(0), indices),
            y: self.y.select(Axis(0), indices),
            truth: self.truth.clone(),
            noise_std: self.noise_std,
            source: self.source.clone(),
            seed: self.seed,
            on_sphere: self.on_sphere,
        }
    }
}

/// Uniform inputs on `[0,1]^d`, `y = sin(2π·mean(x)) + N(0, σ²)`.
pub fn gen_synthetic(n: usize, d: usize, sigma: f64, seed: u64) -> Result<Dataset> {
    gen_with_truth(n, d, sigma, seed, Truth::sine_of_mean())
}

/// [`gen_synthetic`] with a caller-supplied regression function.
pub fn gen_with_truth(n: usize, d: usize, sigma: f64, seed: u64, truth: Truth) -> Result<Dataset> {
    if n == 0 || d == 0 {
        return Err(domain("synthetic data needs n >= 1 and d >= 1"));
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(domain(format!("noise level must be finite and >= 0, got {sigma}")));
    }
    let mut rng = seed::rng(seed);
    let x = Array2::from_shape_simple_fn((n, d), || rng.gen::<f64>());
    let y: Array1<f64> = x
        .axis_iter(Axis(0))
        .map(|r| {
            let z: f64 = rng.sample(StandardNormal);
            truth.eval(&r.to_vec()) + sigma * z
        })
        .collect();
    Ok(Dataset {
        x,
        y,
        truth: Some(truth),
        noise_std: sigma,
        source: format!("synthetic(n={n},d={d},sigma={sigma})"),
        seed: Some(seed),
        on_sphere: false,
    })
}

/// Parse the diabetes table: tab-separated, header row, 10 features then the
/// response. Features are centered per column and each row is then scaled
/// to unit Euclidean norm; the response is left unscaled.
pub fn parse_diabetes(reader: impl BufRead, source: &str) -> Result<Dataset> {
    let mut rows: Vec<[f64; 11]> = Vec::new();
    let mut saw_header = false;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split('\t').map(str::trim).collect();
        if !saw_header {
            saw_header = true;
            if fields.len() != 11 || !fields.iter().zip(DIABETES_HEADER).all(|(a, b)| a.eq_ignore_ascii_case(b)) {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("expected header `{}`", DIABETES_HEADER.join("\t")),
                });
            }
            continue;
        }
        if fields.len() != 11 {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected 11 tab-separated columns, found {}", fields.len()),
            });
        }
        let mut row = [0.0; 11];
        for (slot, field) in row.iter_mut().zip(&fields) {
            *slot = field.parse().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("not a number: `{field}`"),
            })?;
        }
        rows.push(row);
    }
    if rows.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            available: rows.len(),
        });
    }
    let n = rows.len();
    let mut x = Array2::from_shape_fn((n, 10), |(i, j)| rows[i][j]);
    let y = Array1::from_shape_fn(n, |i| rows[i][10]);
    let means = x.mean_axis(Axis(0)).expect("n >= 2");
    x -= &means;
    for (i, mut row) in x.axis_iter_mut(Axis(0)).enumerate() {
        let norm = row.dot(&row).sqrt();
        if norm == 0.0 {
            return Err(Error::Degenerate(format!("row {} equals the column means", i + 2)));
        }
        row /= norm;
    }
    let ds = Dataset {
        x,
        y,
        truth: None,
        noise_std: 0.0,
        source: format!("diabetes({source}; centered, row-normalized, raw target)"),
        seed: None,
        on_sphere: true,
    };
    ds.validate()?;
    Ok(ds)
}

/// Load from a local path, or from an http(s) URL when built with the
/// `fetch` feature.
pub fn load_diabetes(source: &str) -> Result<Dataset> {
    if source.starts_with("http://") || source.starts_with("https://") {
        return fetch(source);
    }
    let file = std::fs::File::open(Path::new(source))?;
    parse_diabetes(std::io::BufReader::new(file), source)
}

#[cfg(feature = "fetch")]
fn fetch(url: &str) -> Result<Dataset> {
    let body = ureq::get(url)
        .call()
        .map_err(|e| Error::Network(e.to_string()))?
        .into_string()
        .map_err(|e| Error::Network(e.to_string()))?;
    parse_diabetes(body.as_bytes(), url)
}

#[cfg(not(feature = "fetch"))]
fn fetch(url: &str) -> Result<Dataset> {
    Err(Error::Network(format!(
        "cannot fetch {url}: built without the `fetch` feature; download the file and pass its path"
    )))
}

/// Seeded shuffle; the test side gets `round(n · test_fraction)` points.
pub fn split_indices(n: usize, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(domain(format!("test fraction must lie in (0,1), got {test_fraction}")));
    }
    let n_test = (n as f64 * test_fraction).round() as usize;
    if n_test < 2 || n - n_test < 2 {
        return Err(Error::Size(format!(
            "splitting {n} points at fraction {test_fraction} leaves {} train / {n_test} test",
            n - n_test.min(n)
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seed::rng(seed));
    let test = idx.split_off(n - n_test);
    Ok((idx, test))
}

pub fn split(data: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let (train, test) = split_indices(data.n(), test_fraction, seed)?;
    Ok((data.subset(&train), data.subset(&test)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{mean_and_se, pearson};

    #[test]
    fn noiseless_examples() {
        let t = Truth::sine_of_mean();
        assert!((t.eval(&[0.25]) - 1.0).abs() < 1e-15);
        assert!((t.eval(&[0.25; 5]) - 1.0).abs() < 1e-15);
        let ds = gen_synthetic(20, 1, 0.0, 3).unwrap();
        for (r, y) in ds.x.rows().into_iter().zip(ds.y.iter()) {
            assert_eq!(*y, (2.0 * std::f64::consts::PI * r[0]).sin());
        }
    }

    #[test]
    fn noise_level_and_independence() {
        let n = 10_000;
        let ds = gen_synthetic(n, 2, 0.3, 11).unwrap();
        let res = ds.residuals().unwrap().to_vec();
        let (m, _) = mean_and_se(&res);
        let sd = (res.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        assert!((0.29..=0.31).contains(&sd), "sd = {sd}");
        for j in 0..2 {
            let col = ds.x.column(j).to_vec();
            assert!(pearson(&col, &res).abs() <= 3.0 / (n as f64).sqrt());
        }
    }

    #[test]
    fn generator_is_deterministic() {
        let a = gen_synthetic(50, 3, 0.3, 99).unwrap();
        let b = gen_synthetic(50, 3, 0.3, 99).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.y, b.y);
        assert!(a.x.iter().all(|v| (0.0..1.0).contains(v)));
    }

    #[test]
    fn split_examples() {
        let ds = gen_synthetic(10, 1, 0.3, 1).unwrap();
        let (tr, te) = split(&ds, 0.2, 5).unwrap();
        assert_eq!((tr.n(), te.n()), (8, 2));
        let (a, b) = split_indices(10, 0.2, 5).unwrap();
        let (a2, b2) = split_indices(10, 0.2, 5).unwrap();
        assert_eq!((a.clone(), b.clone()), (a2, b2));
        let mut all: Vec<usize> = a.into_iter().chain(b).collect();
        all.sort();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert!(matches!(split_indices(10, 0.1, 0), Err(Error::Size(_))));
        assert!(split_indices(10, 1.0, 0).is_err());
    }

    #[test]
    fn diabetes_parse_errors_carry_line_numbers() {
        let text = "AGE\tSEX\tBMI\tBP\tS1\tS2\tS3\tS4\tS5\tS6\tY\n1\t2\t3\t4\t5\t6\t7\t8\t9\t10\t11\n1\t2\t3\n";
        match parse_diabetes(text.as_bytes(), "inline") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
        let text = "AGE\tSEX\tBMI\tBP\tS1\tS2\tS3\tS4\tS5\tS6\tY\n1\t2\t3\t4\t5\t6\t7\t8\t9\tx\t11\n";
        assert!(matches!(parse_diabetes(text.as_bytes(), "inline"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_diabetes("a\tb\n".as_bytes(), "inline"), Err(Error::Parse { line: 1, .. })));
    }

    #[cfg(not(feature = "fetch"))]
    #[test]
    fn url_without_fetch_is_network_error() {
        assert!(matches!(load_diabetes(DIABETES_URL), Err(Error::Network(_))));
    }
}
