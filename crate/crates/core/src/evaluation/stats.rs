//! Small statistics helpers.

use serde::Serialize;
use statrs::function::beta::beta_reg;

use crate::{Error, Result};

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance.
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Pearson correlation of two equally long sequences.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    crate::attention::plcc(x, y, None)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    /// Two-sided.
    pub p: f64,
}

/// Welch's unequal-variance two-sample t-test.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Insufficient("t-test needs at least two values per sample".into()));
    }
    let (va, vb) = (variance(a), variance(b));
    if va == 0.0 && vb == 0.0 {
        return Err(Error::ZeroVariance("both samples"));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (sa, sb) = (va / na, vb / nb);
    let se2 = sa + sb;
    let t = (mean(a) - mean(b)) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    let p = if t == 0.0 {
        1.0
    } else {
        beta_reg(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0)
    };
    Ok(TTest { t, df, p })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_samples() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let r = welch_t_test(&a, &a).unwrap();
        assert_eq!(r.t, 0.0);
        assert_eq!(r.p, 1.0);
    }

    #[test]
    fn errors() {
        assert!(welch_t_test(&[1.0], &[1.0, 2.0]).is_err());
        assert!(matches!(welch_t_test(&[1.0, 1.0], &[2.0, 2.0]), Err(Error::ZeroVariance(_))));
    }

    #[test]
    fn hand_computed_case() {
        // means 3 and 6, variances 2.5 and 10, n = 5 each
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = [2.0, 4.0, 6.0, 8.0, 10.0];
        let r = welch_t_test(&a, &b).unwrap();
        let t = -3.0 / (2.5f64 / 5.0 + 10.0 / 5.0).sqrt();
        let df = 2.5f64.powi(2) / ((0.5f64).powi(2) / 4.0 + 2.0f64.powi(2) / 4.0);
        assert!((r.t - t).abs() < 1e-12);
        assert!((r.df - df).abs() < 1e-12);
        assert!((r.t + 1.8973665961010275).abs() < 1e-12);
        assert!((r.df - 5.882352941176471).abs() < 1e-12);
    }

    // scipy.stats.ttest_ind(a, b, equal_var=False) on the samples below
    const REFERENCE: [(f64, f64); 20] = [
        (0.26712117440538247, 0.7955834817089048),
        (-0.13157675696541482, 0.8976060474662066),
        (0.2030390312705319, 0.8426527928075258),
        (-0.41273351628649363, 0.6852859725717371),
        (-0.8853932562365433, 0.3925952242233691),
        (-0.2070385049026012, 0.8412535148422204),
        (-0.6308332627937148, 0.5387936745650345),
        (-0.9068524363959881, 0.38599410368806264),
        (-0.5776702945551032, 0.5726739032278989),
        (-0.46844569093540395, 0.6489357074487079),
        (-1.0619137826945173, 0.32614962402102476),
        (-0.8276990823219447, 0.4246605974555615),
        (-1.2176170765790322, 0.2591243219626994),
        (-1.7112493708146859, 0.11267658670664653),
        (-1.299783300689912, 0.22166165651345063),
        (-2.105530242773427, 0.07366753098008069),
        (-2.3808278796338858, 0.03643819590644729),
        (-1.4164049286830425, 0.1971964292097028),
        (-2.7979571466821587, 0.016785319765520897),
        (-2.1143477333054532, 0.06678489456009021),
    ];

    fn reference_samples(k: usize) -> (Vec<f64>, Vec<f64>) {
        let na = 5 + k % 7;
        let nb = 6 + (k * 3) % 5;
        let kf = k as f64;
        let a = (0..na).map(|i| (1.3 * i as f64 + 0.7 * kf).sin() + 0.02 * i as f64).collect();
        let b = (0..nb)
            .map(|i| (0.9 * i as f64 + 0.3 * kf).cos() * (1.0 + 0.1 * kf) + 0.08 * kf)
            .collect();
        (a, b)
    }

    #[test]
    fn matches_reference_implementation() {
        for (k, &(t, p)) in REFERENCE.iter().enumerate() {
            let (a, b) = reference_samples(k);
            let r = welch_t_test(&a, &b).unwrap();
            assert!((r.t - t).abs() < 1e-9, "{k}: t {} vs {t}", r.t);
            assert!((r.p - p).abs() < 1e-9, "{k}: p {} vs {p}", r.p);
        }
    }
}
