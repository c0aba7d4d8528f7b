//! Small dense helpers: fixed-size matrix exponential and polynomial roots.

use num_complex::Complex;

use crate::scalar::Real;

pub type Mat<T, const N: usize> = [[T; N]; N];

pub fn identity<T: Real, const N: usize>() -> Mat<T, N> {
    let mut m = [[T::zero(); N]; N];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = T::one();
    }
    m
}

pub fn matmul<T: Real, const N: usize>(a: &Mat<T, N>, b: &Mat<T, N>) -> Mat<T, N> {
    let mut c = [[T::zero(); N]; N];
    for i in 0..N {
        for k in 0..N {
            let aik = a[i][k];
            for j in 0..N {
                c[i][j] += aik * b[k][j];
            }
        }
    }
    c
}

fn inf_norm<T: Real, const N: usize>(a: &Mat<T, N>) -> T {
    a.iter()
        .map(|row| row.iter().fold(T::zero(), |s, &v| s + v.abs()))
        .fold(T::zero(), T::max)
}

/// Matrix exponential by scaling and squaring with a truncated Taylor series.
pub fn expm<T: Real, const N: usize>(a: &Mat<T, N>) -> Mat<T, N> {
    let norm = inf_norm(a);
    let mut squarings = 0i32;
    let mut scale = T::one();
    let half = T::lit(0.5);
    while norm * scale > half {
        scale *= half;
        squarings += 1;
    }
    let mut scaled = *a;
    for row in scaled.iter_mut() {
        for v in row.iter_mut() {
            *v *= scale;
        }
    }
    // ‖A‖ ≤ 1/2, so 20 terms put the remainder far below f64 epsilon
    let mut result = identity::<T, N>();
    let mut term = identity::<T, N>();
    for k in 1..=20 {
        term = matmul(&term, &scaled);
        let inv_k = T::one() / T::from_usize(k).unwrap();
        for row in term.iter_mut() {
            for v in row.iter_mut() {
                *v *= inv_k;
            }
        }
        for i in 0..N {
            for j in 0..N {
                result[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..squarings {
        result = matmul(&result, &result);
    }
    result
}

/// Characteristic polynomial coefficients of `a`, leading 1 first
/// (Faddeev–LeVerrier).
pub fn char_poly<T: Real, const N: usize>(a: &Mat<T, N>) -> Vec<T> {
    let mut coeffs = vec![T::one()];
    let mut m = [[T::zero(); N]; N];
    let mut prev = T::one();
    for k in 1..=N {
        // M_k = A·M_{k-1} + c_{k-1}·I
        let mut next = matmul(a, &m);
        for (i, row) in next.iter_mut().enumerate() {
            row[i] += prev;
        }
        m = next;
        let am = matmul(a, &m);
        let trace = (0..N).fold(T::zero(), |s, i| s + am[i][i]);
        prev = -trace / T::from_usize(k).unwrap();
        coeffs.push(prev);
    }
    coeffs
}

/// All complex roots of a polynomial given highest power first (Aberth–Ehrlich).
pub fn poly_roots<T: Real>(coeffs: &[T]) -> Vec<Complex<T>> {
    let mut c: Vec<T> = coeffs.to_vec();
    while c.len() > 1 && c[0] == T::zero() {
        c.remove(0);
    }
    let degree = c.len() - 1;
    if degree == 0 {
        return Vec::new();
    }
    let lead = c[0];
    let monic: Vec<Complex<T>> = c.iter().map(|&v| Complex::new(v / lead, T::zero())).collect();
    let eval = |z: Complex<T>| {
        let mut p = Complex::new(T::zero(), T::zero());
        let mut dp = Complex::new(T::zero(), T::zero());
        for &ci in &monic {
            dp = dp * z + p;
            p = p * z + ci;
        }
        (p, dp)
    };
    // Cauchy bound for the initial circle
    let radius = T::one()
        + monic[1..]
            .iter()
            .map(|v| v.norm())
            .fold(T::zero(), T::max);
    let mut roots: Vec<Complex<T>> = (0..degree)
        .map(|k| {
            let angle = T::lit(0.4) + T::TAU() * T::from_usize(k).unwrap() / T::from_usize(degree).unwrap();
            Complex::from_polar(radius * T::lit(0.5), angle)
        })
        .collect();
    let tiny = T::epsilon();
    for _ in 0..500 {
        let mut moved = T::zero();
        for i in 0..degree {
            let (p, dp) = eval(roots[i]);
            if p.norm() == T::zero() {
                continue;
            }
            let ratio = p / dp;
            let mut repulsion = Complex::new(T::zero(), T::zero());
            for j in 0..degree {
                if i != j {
                    let d = roots[i] - roots[j];
                    if d.norm() > T::zero() {
                        repulsion = repulsion + Complex::new(T::one(), T::zero()) / d;
                    }
                }
            }
            let step = ratio / (Complex::new(T::one(), T::zero()) - ratio * repulsion);
            roots[i] = roots[i] - step;
            moved = moved.max(step.norm() / (T::one() + roots[i].norm()));
        }
        if moved < tiny {
            break;
        }
    }
    roots
}
