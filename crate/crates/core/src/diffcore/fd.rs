use super::{DiffError, GradientVector};

/// Central-difference gradient of a scalar function, used as an independent
/// oracle for [`super::Tape::backward`].
pub fn finite_difference_gradient(
    f: &mut dyn FnMut(&[f64]) -> f64,
    x: &[f64],
    h: f64,
) -> Result<GradientVector, DiffError> {
    assert!(h > 0.0, "step size must be positive");
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let fp = f(&probe);
        probe[i] = x[i] - h;
        let fm = f(&probe);
        probe[i] = x[i];
        if !fp.is_finite() || !fm.is_finite() {
            return Err(DiffError::NonFiniteEval { coord: i });
        }
        grad.push((fp - fm) / (2.0 * h));
    }
    Ok(GradientVector(grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn product_gradient() {
        // f(a, b) = a * b at (2, 3) -> (3, 2)
        let g = finite_difference_gradient(&mut |x| x[0] * x[1], &[2.0, 3.0], 1e-6).unwrap();
        assert_relative_eq!(g.0[0], 3.0, epsilon = 1e-8);
        assert_relative_eq!(g.0[1], 2.0, epsilon = 1e-8);
    }

    #[test]
    fn sine_at_zero() {
        let g = finite_difference_gradient(&mut |x| x[0].sin(), &[0.0], 1e-6).unwrap();
        assert_relative_eq!(g.0[0], 1.0, epsilon = 1e-10);
    }

    #[test]
    fn constant_function() {
        let g = finite_difference_gradient(&mut |_| 4.0, &[1.0, 2.0], 1e-6).unwrap();
        assert_eq!(g.0, vec![0.0, 0.0]);
    }

    #[test]
    fn non_finite_eval_reported() {
        let err =
            finite_difference_gradient(&mut |x| (1.0 / x[0]).ln(), &[0.0], 1e-6).unwrap_err();
        assert!(matches!(err, DiffError::NonFiniteEval { coord: 0 }));
    }
}
