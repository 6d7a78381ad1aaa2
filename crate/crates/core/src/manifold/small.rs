//! Stack-allocated linear algebra for the integrator hot path.

use super::metric::MAX_DIM;

pub(crate) type SmallMat = [[f64; MAX_DIM]; MAX_DIM];

/// Solves `a · x = b` in place (`b` becomes `x`) by Gaussian elimination with
/// partial pivoting on the leading `n × n` block. Returns false when singular.
pub(crate) fn solve_in_place(n: usize, a: &mut SmallMat, b: &mut [f64; MAX_DIM]) -> bool {
    for col in 0..n {
        let mut piv = col;
        let mut best = a[col][col].abs();
        for row in col + 1..n {
            let v = a[row][col].abs();
            if v > best {
                best = v;
                piv = row;
            }
        }
        if best < 1e-300 {
            return false;
        }
        if piv != col {
            a.swap(piv, col);
            b.swap(piv, col);
        }
        let d = a[col][col];
        for row in col + 1..n {
            let f = a[row][col] / d;
            if f != 0.0 {
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    for row in (0..n).rev() {
        let mut s = b[row];
        for k in row + 1..n {
            s -= a[row][k] * b[k];
        }
        b[row] = s / a[row][row];
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_permuted_system() {
        let mut a = [[0.0; MAX_DIM]; MAX_DIM];
        a[0][0] = 0.0;
        a[0][1] = 2.0;
        a[1][0] = 3.0;
        a[1][1] = 1.0;
        let mut b = [0.0; MAX_DIM];
        b[0] = 4.0;
        b[1] = 5.0;
        assert!(solve_in_place(2, &mut a, &mut b));
        assert!((b[0] - 1.0).abs() < 1e-15);
        assert!((b[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn reports_singular() {
        let mut a = [[0.0; MAX_DIM]; MAX_DIM];
        a[0][0] = 1.0;
        a[0][1] = 2.0;
        a[1][0] = 2.0;
        a[1][1] = 4.0;
        let mut b = [1.0; MAX_DIM];
        assert!(!solve_in_place(2, &mut a, &mut b));
    }
}
