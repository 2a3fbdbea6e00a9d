use super::{MnaSystem, SolverError};

/// Pivots below this magnitude relative to the largest matrix entry are
/// treated as zero. Small enough that a node held only by gmin next to
/// large companion conductances still factors.
const PIVOT_EPS: f64 = 1e-20;

/// Solves `G·x = rhs` by LU factorization with partial pivoting.
///
/// Fails with [`SolverError::SingularMatrix`] naming the unknown whose
/// pivot vanished, which usually points at a floating node or a cut with no
/// conductance.
pub fn solve_linear(system: &MnaSystem) -> Result<Vec<f64>, SolverError> {
    let n = system.dimension();
    let mut a = system.g.clone();
    let mut b = system.rhs.clone();
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);

    for col in 0..n {
        let (piv, mag) = (col..n)
            .map(|r| (r, a[r * n + col].abs()))
            .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if mag <= PIVOT_EPS * scale {
            return Err(SolverError::SingularMatrix { pivot: col });
        }
        if piv != col {
            for c in 0..n {
                a.swap(col * n + c, piv * n + c);
            }
            b.swap(col, piv);
        }
        let d = a[col * n + col];
        for r in col + 1..n {
            let f = a[r * n + col] / d;
            if f == 0.0 {
                continue;
            }
            a[r * n + col] = f;
            for c in col + 1..n {
                a[r * n + c] -= f * a[col * n + c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let mut s = b[r];
        for c in r + 1..n {
            s -= a[r * n + c] * x[c];
        }
        x[r] = s / a[r * n + r];
    }
    Ok(x)
}
