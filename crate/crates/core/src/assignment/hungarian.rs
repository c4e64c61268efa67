//! Dense shortest-augmenting-path Hungarian method, O(n^3).

/// Minimum-cost perfect assignment for the `n x n` cost function `cost(i, j)`.
/// Returns `sigma` with `sigma[i]` the column of row `i`, together with the
/// row and column potentials (`u[i] + v[j] <= cost(i, j)`, tight on `sigma`).
pub(crate) fn solve<F>(n: usize, cost: F) -> (Vec<usize>, Vec<f64>, Vec<f64>)
where
    F: Fn(usize, usize) -> f64,
{
    if n == 0 {
        return (Vec::new(), Vec::new(), Vec::new());
    }
    // 1-based with a virtual column 0, as in the classical formulation.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0f64; n + 1];
    let mut used = vec![false; n + 1];
    let mut row = vec![0.0f64; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        minv.fill(f64::INFINITY);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let ui0 = u[i0];
            for j in 1..=n {
                row[j] = cost(i0 - 1, j - 1);
            }
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = row[j] - ui0 - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut sigma = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            sigma[p[j] - 1] = j - 1;
        }
    }
    // Potentials of the min-cost problem: u[i] + v[j] <= c(i, j).
    let rows = u[1..].to_vec();
    let cols = v[1..].to_vec();
    (sigma, rows, cols)
}
