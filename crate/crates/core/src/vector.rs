//! Small dense-vector helpers over `&[f64]`.

/// Dot product.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean norm.
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Squared Euclidean norm.
pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

/// Euclidean distance.
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// `a - b`.
pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `a + s * b`.
pub fn axpy(a: &[f64], s: f64, b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

/// `s * a`.
pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| s * x).collect()
}

/// In-place `acc += s * v`.
pub fn axpy_mut(acc: &mut [f64], s: f64, v: &[f64]) {
    debug_assert_eq!(acc.len(), v.len());
    for (a, x) in acc.iter_mut().zip(v) {
        *a += s * x;
    }
}

/// Euclidean projection of `x` onto the ball of `radius` about `center`.
pub fn project_ball(x: &[f64], center: &[f64], radius: f64) -> Vec<f64> {
    let d = dist(x, center);
    if d <= radius {
        return x.to_vec();
    }
    let t = radius / d;
    center
        .iter()
        .zip(x)
        .map(|(c, xi)| c + t * (xi - c))
        .collect()
}

/// True when every entry is finite.
pub fn all_finite(x: &[f64]) -> bool {
    x.iter().all(|v| v.is_finite())
}
