//! Dense minimum-cost perfect matching (Hungarian method with potentials,
//! shortest augmenting paths), O(n^3).

use crate::{Error, Result};

/// Solves the assignment problem for the `n x n` row-major `cost` matrix.
///
/// Returns `assignment[row] = column` and the total cost of the matching.
pub fn solve_assignment(n: usize, cost: &[f64]) -> Result<(Vec<usize>, f64)> {
    if cost.len() != n * n {
        return Err(Error::Size(format!(
            "cost matrix has {} entries, expected {}",
            cost.len(),
            n * n
        )));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::Numerical("non-finite assignment cost".into()));
    }
    if n == 0 {
        return Ok((Vec::new(), 0.0));
    }

    // 1-based potentials; column 0 is the virtual root of each search.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut matched_row = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0f64; n + 1];
    let mut used = vec![false; n + 1];

    for row in 1..=n {
        matched_row[0] = row;
        let mut col0 = 0usize;
        minv.iter_mut().for_each(|m| *m = f64::INFINITY);
        used.iter_mut().for_each(|b| *b = false);
        loop {
            used[col0] = true;
            let i0 = matched_row[col0];
            let costs = &cost[(i0 - 1) * n..i0 * n];
            let ui0 = u[i0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let reduced = costs[j - 1] - ui0 - v[j];
                if reduced < minv[j] {
                    minv[j] = reduced;
                    way[j] = col0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    col1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            col0 = col1;
            if matched_row[col0] == 0 {
                break;
            }
        }
        loop {
            let col1 = way[col0];
            matched_row[col0] = matched_row[col1];
            col0 = col1;
            if col0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        assignment[matched_row[j] - 1] = j - 1;
    }
    let total = assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[i * n + j])
        .sum();
    Ok((assignment, total))
}
