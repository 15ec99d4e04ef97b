//! Paired t-tests over small samples.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedT {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation of the differences.
    pub sd: f64,
    pub t: f64,
    pub df: f64,
}

/// Student-t CDF with `df` degrees of freedom.
pub fn t_cdf(t: f64, df: f64) -> f64 {
    if t == f64::INFINITY {
        return 1.0;
    }
    if t == f64::NEG_INFINITY {
        return 0.0;
    }
    StudentsT::new(0.0, 1.0, df).expect("df > 0").cdf(t)
}

pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// t statistic of `diffs` against `mu0`, with k−1 degrees of freedom.
///
/// Zero variance gives `t = ±∞` when the mean differs from `mu0` and `t = 0`
/// when it does not.
pub fn paired_t(diffs: &[f64], mu0: f64) -> Result<PairedT> {
    if diffs.len() < 2 {
        return Err(Error::Degenerate(format!("{} pairs; need at least 2", diffs.len())));
    }
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(Error::Degenerate("non-finite difference".into()));
    }
    let (mean, sd) = mean_sd(diffs);
    let n = diffs.len();
    let shift = mean - mu0;
    let t = if sd > 0.0 {
        shift / (sd / (n as f64).sqrt())
    } else if shift == 0.0 {
        0.0
    } else {
        shift.signum() * f64::INFINITY
    };
    Ok(PairedT {
        n,
        mean,
        sd,
        t,
        df: (n - 1) as f64,
    })
}

impl PairedT {
    pub fn p_two_sided(&self) -> f64 {
        (2.0 * t_cdf(-self.t.abs(), self.df)).min(1.0)
    }

    /// p-value for the alternative "mean below mu0".
    pub fn p_less(&self) -> f64 {
        t_cdf(self.t, self.df)
    }

    /// p-value for the alternative "mean above mu0".
    pub fn p_greater(&self) -> f64 {
        t_cdf(-self.t, self.df)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_example() {
        // d = [1, 2, 3]: mean 2, sd 1, t = 2·√3.
        let r = paired_t(&[1.0, 2.0, 3.0], 0.0).unwrap();
        assert_eq!(r.mean, 2.0);
        assert!((r.sd - 1.0).abs() < 1e-15);
        assert!((r.t - 2.0 * 3f64.sqrt()).abs() < 1e-12);
        assert_eq!(r.df, 2.0);
        // df = 2 has F(t) = 1/2 + t / (2·sqrt(2 + t²)).
        let cdf = 0.5 + r.t / (2.0 * (2.0 + r.t * r.t).sqrt());
        assert!((r.p_greater() - (1.0 - cdf)).abs() < 1e-12);
    }

    #[test]
    fn degenerate_variance() {
        let r = paired_t(&[0.0; 8], 0.0).unwrap();
        assert_eq!(r.t, 0.0);
        assert_eq!(r.p_two_sided(), 1.0);
        let r = paired_t(&[10.0; 8], 0.0).unwrap();
        assert_eq!(r.t, f64::INFINITY);
        assert_eq!(r.p_two_sided(), 0.0);
        assert!(paired_t(&[1.0], 0.0).is_err());
    }
}
