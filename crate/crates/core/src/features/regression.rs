use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::corpus::Corpus;
use crate::matrix::FeatureMatrix;
use crate::{Error, Result};

use super::FeatureExtractor;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RidgeFit {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl RidgeFit {
    /// Ridge least squares with an unpenalized intercept: the design and
    /// response are centered, `(XcᵀXc + λI) w = Xcᵀyc` is solved by Cholesky,
    /// and the intercept recovers the means.
    pub fn fit(x: &FeatureMatrix, y: &[f64], lambda: f64) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::Invalid(format!("{} rows but {} responses", x.rows(), y.len())));
        }
        if x.rows() < 2 {
            return Err(Error::Invalid("regression needs at least 2 observations".into()));
        }
        if !(lambda >= 0.0) {
            return Err(Error::Invalid(format!("ridge penalty must be >= 0, got {lambda}")));
        }
        let (n, d) = (x.rows(), x.cols());
        let mut xm = vec![0.0; d];
        for r in x.iter_rows() {
            xm.iter_mut().zip(r).for_each(|(a, v)| *a += v / n as f64);
        }
        let ym = y.iter().sum::<f64>() / n as f64;
        let xc = DMatrix::from_fn(n, d, |i, j| x.row(i)[j] - xm[j]);
        let yc = DVector::from_iterator(n, y.iter().map(|v| v - ym));
        let mut a = xc.transpose() * &xc;
        for j in 0..d {
            a[(j, j)] += lambda;
        }
        let rhs = xc.transpose() * yc;
        let scale = (0..d).map(|j| a[(j, j)]).fold(0.0, f64::max);
        let singular = || {
            Error::Singular(format!(
                "normal equations are singular at lambda = {lambda}; use a ridge penalty lambda > 0"
            ))
        };
        let chol = a.cholesky().ok_or_else(singular)?;
        // Rounding can let an exactly singular system through with a
        // vanishing pivot.
        let tiny = scale * d as f64 * f64::EPSILON * 16.0;
        if (0..d).any(|j| chol.l_dirty()[(j, j)].powi(2) <= tiny) {
            return Err(singular());
        }
        let w = chol.solve(&rhs);
        let weights: Vec<f64> = w.iter().copied().collect();
        let intercept = ym - weights.iter().zip(&xm).map(|(a, b)| a * b).sum::<f64>();
        Ok(Self { weights, intercept })
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        self.intercept + self.weights.iter().zip(row).map(|(a, b)| a * b).sum::<f64>()
    }
}

/// Exploratory regressions of per-user helpfulness (thanks per post) on the
/// pooled stylistic and affective vectors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HelpfulnessReport {
    pub users: Vec<String>,
    pub lambda: f64,
    pub stylistic_names: Vec<String>,
    pub affective_names: Vec<String>,
    pub stylistic: RidgeFit,
    pub affective: RidgeFit,
}

impl HelpfulnessReport {
    /// `block<TAB>feature<TAB>weight` rows, intercepts first.
    pub fn render(&self) -> String {
        let mut out = String::from("block\tfeature\tweight\n");
        for (block, names, fit) in [
            ("stylistic", &self.stylistic_names, &self.stylistic),
            ("affective", &self.affective_names, &self.affective),
        ] {
            out.push_str(&format!("{block}\tintercept\t{:.6}\n", fit.intercept));
            for (n, w) in names.iter().zip(&fit.weights) {
                out.push_str(&format!("{block}\t{n}\t{w:.6}\n"));
            }
        }
        out
    }
}

/// Users with at least one post (by record count) are included.
pub fn helpfulness_regression(corpus: &Corpus, extractor: &FeatureExtractor, lambda: f64) -> Result<HelpfulnessReport> {
    let by_user = corpus.posts_by_user();
    let mut users = Vec::new();
    let mut sty = Vec::new();
    let mut aff = Vec::new();
    let mut y = Vec::new();
    for u in corpus.users() {
        if u.num_posts == 0 {
            continue;
        }
        let posts = by_user.get(u.id.as_str()).map(Vec::as_slice).unwrap_or(&[]);
        let (s, a) = extractor.aggregate_user_language(posts.iter().copied());
        users.push(u.id.clone());
        sty.push(s);
        aff.push(a);
        y.push(u.num_thanks as f64 / u.num_posts as f64);
    }
    if users.len() < 2 {
        return Err(Error::Invalid(format!(
            "helpfulness regression needs at least 2 users with posts, got {}",
            users.len()
        )));
    }
    let layout = extractor.layout();
    let stylistic = RidgeFit::fit(&FeatureMatrix::from_rows(layout.stylistic.len(), &sty), &y, lambda)?;
    let affective = RidgeFit::fit(&FeatureMatrix::from_rows(layout.affective.len(), &aff), &y, lambda)?;
    Ok(HelpfulnessReport {
        users,
        lambda,
        stylistic_names: layout.stylistic,
        affective_names: layout.affective,
        stylistic,
        affective,
    })
}
