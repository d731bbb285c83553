use serde::{Deserialize, Serialize};

use super::forest::FeatureMatrix;
use super::GeoError;

/// Per-feature affine map fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Population standard deviation; 0 marks a constant feature.
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(train: &FeatureMatrix) -> Result<Self, GeoError> {
        if train.rows() == 0 {
            return Err(GeoError::EmptyInput);
        }
        let n = train.rows() as f64;
        let cols = train.cols();
        let mut mean = vec![0.0; cols];
        for i in 0..train.rows() {
            for (m, x) in mean.iter_mut().zip(train.row(i)) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; cols];
        for i in 0..train.rows() {
            for ((v, x), m) in var.iter_mut().zip(train.row(i)).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let scale = var.into_iter().map(|v| (v / n).sqrt()).collect();
        Ok(Self { mean, scale })
    }

    /// Constant features map to zero.
    pub fn transform(&self, x: &FeatureMatrix) -> Result<FeatureMatrix, GeoError> {
        self.check(x)?;
        let mut data = Vec::with_capacity(x.rows() * x.cols());
        for i in 0..x.rows() {
            for ((v, m), s) in x.row(i).iter().zip(&self.mean).zip(&self.scale) {
                data.push(if *s > 0.0 { (v - m) / s } else { 0.0 });
            }
        }
        FeatureMatrix::new(x.rows(), x.cols(), data)
    }

    pub fn inverse_transform(&self, x: &FeatureMatrix) -> Result<FeatureMatrix, GeoError> {
        self.check(x)?;
        let mut data = Vec::with_capacity(x.rows() * x.cols());
        for i in 0..x.rows() {
            for ((v, m), s) in x.row(i).iter().zip(&self.mean).zip(&self.scale) {
                data.push(v * s + m);
            }
        }
        FeatureMatrix::new(x.rows(), x.cols(), data)
    }

    fn check(&self, x: &FeatureMatrix) -> Result<(), GeoError> {
        if x.cols() != self.mean.len() {
            return Err(GeoError::DimMismatch { expected: self.mean.len(), found: x.cols() });
        }
        Ok(())
    }
}

/// Fit on `train`, apply the same map to both.
pub fn standardize(train: &FeatureMatrix, other: &FeatureMatrix) -> Result<(FeatureMatrix, FeatureMatrix, Standardizer), GeoError> {
    let s = Standardizer::fit(train)?;
    Ok((s.transform(train)?, s.transform(other)?, s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_points_map_to_plus_minus_one() {
        let train = FeatureMatrix::from_rows(&[[0.0], [2.0]]).unwrap();
        let other = FeatureMatrix::from_rows(&[[4.0]]).unwrap();
        let (t, o, _) = standardize(&train, &other).unwrap();
        assert_eq!(t.row(0), &[-1.0]);
        assert_eq!(t.row(1), &[1.0]);
        assert_eq!(o.row(0), &[3.0]);
    }

    #[test]
    fn constant_feature_becomes_zero() {
        let train = FeatureMatrix::from_rows(&[[5.0, 1.0], [5.0, 3.0]]).unwrap();
        let other = FeatureMatrix::from_rows(&[[7.0, 2.0]]).unwrap();
        let (t, o, s) = standardize(&train, &other).unwrap();
        assert_eq!(s.scale[0], 0.0);
        assert!(t.row(0)[0] == 0.0 && t.row(1)[0] == 0.0 && o.row(0)[0] == 0.0);
        assert!(o.row(0)[1].is_finite());
    }

    #[test]
    fn inverse_recovers_originals() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rows: Vec<Vec<f64>> = (0..40).map(|_| (0..6).map(|_| rng.random_range(-50.0..50.0)).collect()).collect();
        let x = FeatureMatrix::from_rows(&rows).unwrap();
        let s = Standardizer::fit(&x).unwrap();
        let back = s.inverse_transform(&s.transform(&x).unwrap()).unwrap();
        for i in 0..40 {
            for (a, b) in back.row(i).iter().zip(x.row(i)) {
                assert!((a - b).abs() < 1e-9);
            }
        }
        let t = s.transform(&x).unwrap();
        for j in 0..6 {
            let m: f64 = (0..40).map(|i| t.row(i)[j]).sum::<f64>() / 40.0;
            let v: f64 = (0..40).map(|i| t.row(i)[j].powi(2)).sum::<f64>() / 40.0;
            assert!(m.abs() < 1e-12 && (v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_train_is_rejected() {
        let empty = FeatureMatrix::new(0, 3, vec![]).unwrap();
        assert!(Standardizer::fit(&empty).is_err());
    }
}
