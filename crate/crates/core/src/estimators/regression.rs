use crate::error::EstimateError;

/// Closed-form ordinary least squares for `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimpleRegressionFit {
    pub intercept: f64,
    pub slope: f64,
    pub residual_sum_squares: f64,
    pub regressor_centered_sum_squares: f64,
    pub n: usize,
}

impl SimpleRegressionFit {
    pub fn fit(x: &[f64], y: &[f64]) -> Result<Self, EstimateError> {
        assert_eq!(x.len(), y.len(), "regressor and response lengths differ");
        let n = x.len();
        if n < 3 {
            return Err(EstimateError::SampleTooSmall { n1: n, n0: 0 });
        }
        let nf = n as f64;
        let x_mean = x.iter().sum::<f64>() / nf;
        let y_mean = y.iter().sum::<f64>() / nf;
        let (sxx, sxy) = x.iter().zip(y).fold((0.0, 0.0), |(sxx, sxy), (&xi, &yi)| {
            let dx = xi - x_mean;
            (sxx + dx * dx, sxy + dx * (yi - y_mean))
        });
        if !(sxx > 0.0) {
            return Err(EstimateError::DegenerateRegressor);
        }
        let slope = sxy / sxx;
        let intercept = y_mean - slope * x_mean;
        let residual_sum_squares = x
            .iter()
            .zip(y)
            .map(|(&xi, &yi)| {
                let r = yi - intercept - slope * xi;
                r * r
            })
            .sum();
        Ok(SimpleRegressionFit {
            intercept,
            slope,
            residual_sum_squares,
            regressor_centered_sum_squares: sxx,
            n,
        })
    }

    pub fn predict(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }

    /// Classical standard error of the slope.
    pub fn slope_se(&self) -> f64 {
        (self.residual_sum_squares / (self.n as f64 - 2.0) / self.regressor_centered_sum_squares)
            .sqrt()
    }
}
