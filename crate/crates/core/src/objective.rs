//! Variance contrast of the IWE and its analytic gradient.

use ndarray::Array2;

use crate::voting::ImageSet;

/// Gradient of the contrast with respect to `(vx, vy)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Gradient {
    pub d_vx: f64,
    pub d_vy: f64,
}

impl Gradient {
    pub fn norm(&self) -> f64 {
        self.d_vx.hypot(self.d_vy)
    }

    pub fn is_finite(&self) -> bool {
        self.d_vx.is_finite() && self.d_vy.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContrastReport {
    pub contrast: f64,
    pub mean: f64,
    pub grad: Gradient,
}

/// Neumaier-compensated sum.
pub(crate) fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn mean(grid: &Array2<f64>) -> f64 {
    compensated_sum(grid.iter().copied()) / grid.len() as f64
}

/// Population variance and mean of `iwe` over every grid cell.
///
/// # Panics
/// If the grid is empty.
pub fn contrast(iwe: &Array2<f64>) -> (f64, f64) {
    assert!(!iwe.is_empty(), "contrast of an empty grid");
    let mu = mean(iwe);
    let var = compensated_sum(iwe.iter().map(|&v| (v - mu) * (v - mu))) / iwe.len() as f64;
    (var, mu)
}

/// `dC/dv = 2/Np * sum((I - mean(I)) * (dI/dv - mean(dI/dv)))` per axis.
pub fn analytic_gradient(imgs: &ImageSet) -> Gradient {
    let (_, mu) = contrast(&imgs.iwe);
    gradient_with_mean(imgs, mu)
}

fn gradient_with_mean(imgs: &ImageSet, mu: f64) -> Gradient {
    let n = imgs.iwe.len() as f64;
    let axis = |deriv: &Array2<f64>| {
        let d_mu = mean(deriv);
        let s = compensated_sum(
            imgs.iwe
                .iter()
                .zip(deriv.iter())
                .map(|(&i, &d)| (i - mu) * (d - d_mu)),
        );
        2.0 * s / n
    };
    Gradient {
        d_vx: axis(&imgs.d_vx),
        d_vy: axis(&imgs.d_vy),
    }
}

/// Contrast, mean and gradient in one pass over the images.
pub fn evaluate(imgs: &ImageSet) -> ContrastReport {
    let (contrast, mean) = contrast(&imgs.iwe);
    ContrastReport {
        contrast,
        mean,
        grad: gradient_with_mean(imgs, mean),
    }
}
