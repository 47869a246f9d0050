use std::ops::RangeInclusive;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const DEFAULT_MAX_ITER: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub k: usize,
    /// Cluster id of every point, each `< k`.
    pub assignments: Vec<usize>,
    /// `k x d` centroids.
    pub centroids: Vec<Vec<f64>>,
    /// Sum of squared distances from points to their assigned centroid.
    pub inertia: f64,
    /// Lloyd iterations performed.
    pub iterations: usize,
    /// Inertia after each assignment step; non-increasing.
    pub inertia_history: Vec<f64>,
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn inertia(points: &[Vec<f64>], assignments: &[usize], centroids: &[Vec<f64>]) -> f64 {
    points
        .iter()
        .zip(assignments)
        .map(|(p, &c)| sq_dist(p, &centroids[c]))
        .sum()
}

fn check_points(points: &[Vec<f64>], k: usize) -> Result<usize> {
    if k == 0 {
        return Err(Error::Input("k must be at least 1".into()));
    }
    if points.len() < k {
        return Err(Error::Input(format!(
            "{} points cannot form {k} clusters",
            points.len()
        )));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::Input("points differ in dimensionality".into()));
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Input("points contain non-finite values".into()));
    }
    Ok(dim)
}

/// k-means++ seeding: the first center is uniform over the points, each
/// further one is drawn with probability proportional to its squared
/// distance from the nearest chosen center. When every remaining point
/// coincides with a center, the lowest unchosen index is taken.
fn seed_centers(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = points.len();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut nearest: Vec<f64> = points
        .iter()
        .map(|p| sq_dist(p, &points[chosen[0]]))
        .collect();
    while chosen.len() < k {
        let total: f64 = nearest.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in nearest.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                acc += w;
                pick = Some(i);
                if acc > target {
                    break;
                }
            }
            pick.expect("positive total implies a positive weight")
        } else {
            (0..n).find(|i| !chosen.contains(i)).expect("k <= n")
        };
        chosen.push(next);
        for (d, p) in nearest.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &points[next]));
        }
    }
    chosen
}

fn assign(points: &[Vec<f64>], centroids: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let mut total = 0.0;
    let assignments = points
        .iter()
        .map(|p| {
            let mut best = (0, f64::INFINITY);
            for (c, centroid) in centroids.iter().enumerate() {
                let d = sq_dist(p, centroid);
                if d < best.1 {
                    best = (c, d);
                }
            }
            total += best.1;
            best.0
        })
        .collect();
    (assignments, total)
}

/// Means of the assigned points. An empty cluster is moved onto the point
/// farthest from its own (new) centroid, each point used at most once.
fn update(points: &[Vec<f64>], assignments: &[usize], k: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &c) in points.iter().zip(assignments) {
        counts[c] += 1;
        sums[c].iter_mut().zip(p).for_each(|(s, v)| *s += v);
    }
    let mut centroids: Vec<Vec<f64>> = sums
        .into_iter()
        .zip(&counts)
        .map(|(s, &n)| {
            if n > 0 {
                s.into_iter().map(|v| v / n as f64).collect()
            } else {
                s
            }
        })
        .collect();
    let mut used = vec![false; points.len()];
    for c in (0..k).filter(|&c| counts[c] == 0) {
        let far = points
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .map(|(i, p)| (i, sq_dist(p, &centroids[assignments[i]])))
            .fold(None::<(usize, f64)>, |best, cur| match best {
                Some(b) if b.1 >= cur.1 => Some(b),
                _ => Some(cur),
            });
        if let Some((i, _)) = far {
            used[i] = true;
            centroids[c] = points[i].clone();
        }
    }
    centroids
}

/// k-means++ seeding followed by Lloyd iterations until the assignments
/// stop changing or `max_iter` updates have run. Deterministic for a seed.
pub fn kmeans_pp(points: &[Vec<f64>], k: usize, seed: u64, max_iter: usize) -> Result<Clustering> {
    let dim = check_points(points, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids: Vec<Vec<f64>> = seed_centers(points, k, &mut rng)
        .into_iter()
        .map(|i| points[i].clone())
        .collect();
    let (mut assignments, mut current) = assign(points, &centroids);
    let mut history = vec![current];
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        centroids = update(points, &assignments, k, dim);
        let (next, total) = assign(points, &centroids);
        history.push(total);
        current = total;
        if next == assignments {
            break;
        }
        assignments = next;
    }
    Ok(Clustering {
        k,
        assignments,
        centroids,
        inertia: current,
        iterations,
        inertia_history: history,
    })
}

/// Lowest-inertia result over several seeds; ties keep the earlier seed.
pub fn kmeans_best_of(
    points: &[Vec<f64>],
    k: usize,
    seeds: impl IntoIterator<Item = u64>,
    max_iter: usize,
) -> Result<Clustering> {
    let mut best: Option<Clustering> = None;
    for seed in seeds {
        let c = kmeans_pp(points, k, seed, max_iter)?;
        if best.as_ref().is_none_or(|b| c.inertia < b.inertia) {
            best = Some(c);
        }
    }
    best.ok_or_else(|| Error::Input("no seeds given".into()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElbowSuggestion {
    pub k: usize,
    /// `(k, inertia)` for every k tried.
    pub curve: Vec<(usize, f64)>,
}

/// Picks the interior k with the largest discrete second difference
/// `J(k-1) - 2 J(k) + J(k+1)`; ties go to the smallest k.
pub fn elbow_from_curve(curve: &[(usize, f64)]) -> Result<usize> {
    if curve.len() < 3 {
        return Err(Error::Input(format!(
            "elbow needs at least 3 values of k, got {}",
            curve.len()
        )));
    }
    let mut best = (curve[1].0, f64::NEG_INFINITY);
    for w in curve.windows(3) {
        let curvature = w[0].1 - 2.0 * w[1].1 + w[2].1;
        if curvature > best.1 {
            best = (w[1].0, curvature);
        }
    }
    Ok(best.0)
}

/// Elbow-method suggestion for the number of clusters. Runs [`kmeans_pp`]
/// with the same seed for every k in the range.
pub fn suggest_k(
    points: &[Vec<f64>],
    k_range: RangeInclusive<usize>,
    seed: u64,
) -> Result<ElbowSuggestion> {
    let (lo, hi) = (*k_range.start(), *k_range.end());
    if lo == 0 || hi > points.len() {
        return Err(Error::Input(format!(
            "k range {lo}..={hi} must lie within 1..={}",
            points.len()
        )));
    }
    if hi < lo || hi - lo < 2 {
        return Err(Error::Input(format!(
            "k range {lo}..={hi} has fewer than 3 values"
        )));
    }
    let curve = k_range
        .map(|k| kmeans_pp(points, k, seed, DEFAULT_MAX_ITER).map(|c| (k, c.inertia)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ElbowSuggestion {
        k: elbow_from_curve(&curve)?,
        curve,
    })
}
