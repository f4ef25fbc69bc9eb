//! Frame-to-frame association: OKS weight matrix, maximum-weight assignment
//! and acceptance gating.

use crate::error::Result;
use crate::skeleton::{oks, Pose, SkeletonSpec};

/// Default minimum OKS for an assigned pair to count as a match.
pub const DEFAULT_MATCH_THRESHOLD: f64 = 0.2;

/// OKS weights between previous-frame tracks (rows) and current detections (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub rows: Vec<u64>,
    pub cols: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
}

impl SimilarityMatrix {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.weights[row][col]
    }

    pub fn assign(&self) -> Vec<(usize, usize)> {
        hungarian_assign(&self.weights)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Match {
    pub track: u64,
    pub detection: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AssignmentResult {
    pub matches: Vec<Match>,
    pub unmatched_tracks: Vec<u64>,
    pub unmatched_detections: Vec<usize>,
}

pub fn build_similarity<'a, I>(
    tracks: I,
    detections: &[Pose],
    spec: &SkeletonSpec,
    visibility_threshold: f64,
) -> Result<SimilarityMatrix>
where
    I: IntoIterator<Item = (u64, &'a Pose)>,
{
    let mut rows = Vec::new();
    let mut weights = Vec::new();
    for (id, pose) in tracks {
        let row = detections
            .iter()
            .map(|d| oks(pose, d, spec, visibility_threshold))
            .collect::<Result<Vec<_>>>()?;
        rows.push(id);
        weights.push(row);
    }
    Ok(SimilarityMatrix {
        rows,
        cols: (0..detections.len()).collect(),
        weights,
    })
}

/// Maximum-total-weight one-to-one assignment of `min(rows, cols)` pairs.
///
/// Among optimal assignments the one whose row-ordered pair sequence is
/// lexicographically smallest is returned. Pairs are sorted by row.
pub fn hungarian_assign(weights: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let n_rows = weights.len();
    let n_cols = weights.first().map_or(0, Vec::len);
    if n_rows == 0 || n_cols == 0 {
        return Vec::new();
    }
    assert!(
        weights.iter().all(|r| r.len() == n_cols),
        "weight matrix rows must have equal length"
    );
    debug_assert!(weights.iter().flatten().all(|w| w.is_finite()));

    let all_rows: Vec<usize> = (0..n_rows).collect();
    let mut cols_left: Vec<usize> = (0..n_cols).collect();
    let optimum = best_total(weights, &all_rows, &cols_left);
    let max_abs = weights.iter().flatten().fold(0.0f64, |m, w| m.max(w.abs()));
    let tol = 1e-12 * (1.0 + (n_rows.max(n_cols) as f64) * max_abs);

    // Fix rows one at a time to the smallest column that still admits an optimum.
    let mut pairs = Vec::with_capacity(n_rows.min(n_cols));
    let mut fixed = 0.0;
    for r in 0..n_rows {
        if cols_left.is_empty() {
            break;
        }
        let rows_after = &all_rows[r + 1..];
        let mut chosen = None;
        for (ci, &c) in cols_left.iter().enumerate() {
            let rest: Vec<usize> = cols_left.iter().copied().filter(|&x| x != c).collect();
            let total = fixed + weights[r][c] + best_total(weights, rows_after, &rest);
            if total >= optimum - tol {
                chosen = Some(ci);
                break;
            }
        }
        if let Some(ci) = chosen {
            let c = cols_left.remove(ci);
            fixed += weights[r][c];
            pairs.push((r, c));
        }
    }
    pairs
}

/// Optimal total weight over the sub-matrix selected by `rows` x `cols`.
fn best_total(weights: &[Vec<f64>], rows: &[usize], cols: &[usize]) -> f64 {
    if rows.is_empty() || cols.is_empty() {
        return 0.0;
    }
    // The solver needs rows <= cols; transpose otherwise.
    let (pairs, transposed) = if rows.len() <= cols.len() {
        let cost: Vec<Vec<f64>> = rows
            .iter()
            .map(|&r| cols.iter().map(|&c| -weights[r][c]).collect())
            .collect();
        (min_cost_assignment(&cost), false)
    } else {
        let cost: Vec<Vec<f64>> = cols
            .iter()
            .map(|&c| rows.iter().map(|&r| -weights[r][c]).collect())
            .collect();
        (min_cost_assignment(&cost), true)
    };
    pairs
        .into_iter()
        .map(|(a, b)| {
            if transposed {
                weights[rows[b]][cols[a]]
            } else {
                weights[rows[a]][cols[b]]
            }
        })
        .sum()
}

/// Kuhn-Munkres with potentials, O(n^2 m) for an `n x m` cost matrix with `n <= m`.
/// Every row is assigned.
fn min_cost_assignment(cost: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let n = cost.len();
    let m = cost[0].len();
    debug_assert!(n <= m);
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    // p[j]: row (1-based) assigned to column j; column 0 is the virtual root.
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
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
    let mut pairs: Vec<(usize, usize)> = (1..=m).filter(|&j| p[j] != 0).map(|j| (p[j] - 1, j - 1)).collect();
    pairs.sort_unstable();
    pairs
}

/// Splits an assignment into accepted matches and the two unmatched sets.
/// Pairs weighing less than `threshold` are demoted.
pub fn gate(assignment: &[(usize, usize)], m: &SimilarityMatrix, threshold: f64) -> AssignmentResult {
    let mut track_used = vec![false; m.rows.len()];
    let mut det_used = vec![false; m.cols.len()];
    let mut matches = Vec::new();
    for &(r, c) in assignment {
        let weight = m.get(r, c);
        if weight >= threshold {
            track_used[r] = true;
            det_used[c] = true;
            matches.push(Match {
                track: m.rows[r],
                detection: m.cols[c],
                weight,
            });
        }
    }
    AssignmentResult {
        matches,
        unmatched_tracks: m
            .rows
            .iter()
            .zip(&track_used)
            .filter(|(_, &u)| !u)
            .map(|(&id, _)| id)
            .collect(),
        unmatched_detections: m
            .cols
            .iter()
            .zip(&det_used)
            .filter(|(_, &u)| !u)
            .map(|(&id, _)| id)
            .collect(),
    }
}

/// Assignment followed by gating.
pub fn associate(m: &SimilarityMatrix, threshold: f64) -> AssignmentResult {
    gate(&m.assign(), m, threshold)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::skeleton::Keypoint;
    use proptest::prelude::*;

    /// Exhaustive maximum over all injective row->column maps of size min(r, c).
    pub fn brute_force_max(w: &[Vec<f64>]) -> f64 {
        fn rec(w: &[Vec<f64>], row: usize, used: &mut Vec<bool>, slack: usize) -> f64 {
            if row == w.len() {
                return 0.0;
            }
            let mut best = f64::NEG_INFINITY;
            for c in 0..used.len() {
                if !used[c] {
                    used[c] = true;
                    best = best.max(w[row][c] + rec(w, row + 1, used, slack));
                    used[c] = false;
                }
            }
            if slack > 0 {
                best = best.max(rec(w, row + 1, used, slack - 1));
            }
            best
        }
        let cols = w[0].len();
        let slack = w.len().saturating_sub(cols);
        rec(w, 0, &mut vec![false; cols], slack)
    }

    fn total(w: &[Vec<f64>], pairs: &[(usize, usize)]) -> f64 {
        pairs.iter().map(|&(r, c)| w[r][c]).sum()
    }

    #[test]
    fn identity_dominant() {
        let w = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert_eq!(hungarian_assign(&w), vec![(0, 0), (1, 1)]);
    }

    #[test]
    fn three_by_three_against_permutations() {
        let w = vec![vec![2.0, 9.0, 1.0], vec![9.0, 8.0, 3.0], vec![1.0, 3.0, 0.0]];
        let pairs = hungarian_assign(&w);
        assert_eq!(pairs, vec![(0, 1), (1, 0), (2, 2)]);
        assert_eq!(total(&w, &pairs), 18.0);
        assert_eq!(brute_force_max(&w), 18.0);
    }

    #[test]
    fn rectangular_cases() {
        let w = vec![vec![0.3, 0.9, 0.1], vec![0.8, 0.7, 0.2]];
        let pairs = hungarian_assign(&w);
        assert_eq!(pairs.len(), 2);
        assert_eq!(pairs, vec![(0, 1), (1, 0)]);

        let t = vec![vec![0.3, 0.8], vec![0.9, 0.7], vec![0.1, 0.2]];
        let pairs = hungarian_assign(&t);
        assert_eq!(pairs, vec![(0, 1), (1, 0)]);
        assert!(hungarian_assign(&[]).is_empty());
    }

    #[test]
    fn ties_pick_lexicographically_smallest() {
        let w = vec![vec![1.0; 3]; 3];
        assert_eq!(hungarian_assign(&w), vec![(0, 0), (1, 1), (2, 2)]);
        let w = vec![vec![0.0, 0.0], vec![0.0, 0.0], vec![0.0, 0.0]];
        assert_eq!(hungarian_assign(&w), vec![(0, 0), (1, 1)]);
        // both (0,0)+(1,1) and (0,1)+(1,0) reach 2
        let w = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        assert_eq!(hungarian_assign(&w), vec![(0, 0), (1, 1)]);
    }

    #[test]
    fn negative_weights_still_fill_min_dimension() {
        let w = vec![vec![-5.0, -1.0, -3.0]];
        assert_eq!(hungarian_assign(&w), vec![(0, 1)]);
        let w = vec![vec![-2.0, -4.0], vec![-3.0, -1.0], vec![-9.0, -9.0]];
        let pairs = hungarian_assign(&w);
        assert_eq!(pairs.len(), 2);
        assert_eq!(total(&w, &pairs), brute_force_max(&w));
    }

    fn matrix(rows: Vec<u64>, weights: Vec<Vec<f64>>) -> SimilarityMatrix {
        let cols = (0..weights.first().map_or(0, Vec::len)).collect();
        SimilarityMatrix { rows, cols, weights }
    }

    #[test]
    fn gate_cases() {
        let m = matrix(vec![1, 2], vec![vec![1.0, 1.0], vec![1.0, 1.0]]);
        let r = associate(&m, 0.2);
        assert_eq!(r.matches.len(), 2);
        assert!(r.unmatched_tracks.is_empty() && r.unmatched_detections.is_empty());

        let m = matrix(vec![7], vec![vec![0.1]]);
        let r = associate(&m, 0.2);
        assert!(r.matches.is_empty());
        assert_eq!(r.unmatched_tracks, vec![7]);
        assert_eq!(r.unmatched_detections, vec![0]);

        let m = matrix(vec![3, 4], vec![vec![0.9, 0.0], vec![0.0, 0.15]]);
        let r = associate(&m, 0.2);
        assert_eq!(
            r.matches,
            vec![Match {
                track: 3,
                detection: 0,
                weight: 0.9
            }]
        );
        assert_eq!(r.unmatched_tracks, vec![4]);
        assert_eq!(r.unmatched_detections, vec![1]);
    }

    fn pose_at(cx: f64, cy: f64) -> Pose {
        let kps = (0..15)
            .map(|i| {
                Some(Keypoint::new(
                    cx + (i % 3) as f64 * 8.0,
                    cy + (i / 3) as f64 * 12.0,
                    0.9,
                    1.0,
                ))
            })
            .collect();
        Pose::from_keypoints(kps, 0.1).unwrap()
    }

    #[test]
    fn similarity_cases() {
        let spec = SkeletonSpec::posetrack();
        let p = pose_at(10.0, 10.0);
        let m = build_similarity([(1, &p)], std::slice::from_ref(&p), &spec, 0.35).unwrap();
        assert_eq!(m.weights, vec![vec![1.0]]);

        let far = pose_at(500.0, 500.0);
        let m = build_similarity([(1, &p)], &[far], &spec, 0.35).unwrap();
        assert!(m.weights[0][0] < 1e-12);

        // crossing pair: every cell equals an independent oks call
        let a0 = pose_at(0.0, 0.0);
        let b0 = pose_at(40.0, 0.0);
        let a1 = pose_at(30.0, 3.0);
        let b1 = pose_at(10.0, -3.0);
        let dets = [a1.clone(), b1.clone()];
        let m = build_similarity([(1, &a0), (2, &b0)], &dets, &spec, 0.35).unwrap();
        for (i, t) in [&a0, &b0].iter().enumerate() {
            for (j, d) in dets.iter().enumerate() {
                assert_eq!(m.weights[i][j], oks(t, d, &spec, 0.35).unwrap());
            }
        }
        let empty = build_similarity(std::iter::empty(), &dets, &spec, 0.35).unwrap();
        assert!(empty.weights.is_empty());
    }

    fn arb_matrix() -> impl Strategy<Value = Vec<Vec<f64>>> {
        (1usize..6, 1usize..6)
            .prop_flat_map(|(r, c)| proptest::collection::vec(proptest::collection::vec(0.0..1.0f64, c), r))
    }

    proptest! {
        #[test]
        fn matches_brute_force(w in arb_matrix()) {
            let pairs = hungarian_assign(&w);
            prop_assert_eq!(pairs.len(), w.len().min(w[0].len()));
            prop_assert!((total(&w, &pairs) - brute_force_max(&w)).abs() < 1e-12);
        }

        #[test]
        fn constant_shift_keeps_assignment(w in arb_matrix(), shift in -5.0..5.0f64) {
            let shifted: Vec<Vec<f64>> = w.iter().map(|r| r.iter().map(|x| x + shift).collect()).collect();
            let a = hungarian_assign(&w);
            let b = hungarian_assign(&shifted);
            // equal up to ties: the shifted assignment must also be optimal for w
            prop_assert!((total(&w, &a) - total(&w, &b)).abs() < 1e-9);
        }

        #[test]
        fn gate_partitions_inputs(w in arb_matrix(), threshold in 0.0..1.0f64) {
            let rows: Vec<u64> = (0..w.len() as u64).map(|i| i * 10 + 1).collect();
            let m = matrix(rows.clone(), w.clone());
            let r = associate(&m, threshold);
            let mut tracks: Vec<u64> = r.matches.iter().map(|x| x.track).chain(r.unmatched_tracks.iter().copied()).collect();
            tracks.sort_unstable();
            prop_assert_eq!(tracks, rows);
            let mut dets: Vec<usize> = r.matches.iter().map(|x| x.detection).chain(r.unmatched_detections.iter().copied()).collect();
            dets.sort_unstable();
            prop_assert_eq!(dets, (0..w[0].len()).collect::<Vec<_>>());
            prop_assert!(r.matches.iter().all(|x| x.weight >= threshold));
        }

        #[test]
        fn similarity_transpose(ax in 0.0..100.0f64, bx in 0.0..100.0f64, cx in 0.0..100.0f64) {
            let spec = SkeletonSpec::posetrack();
            let a = vec![pose_at(ax, 0.0), pose_at(bx, 5.0)];
            let b = vec![pose_at(cx, 2.0)];
            let m1 = build_similarity(a.iter().enumerate().map(|(i, p)| (i as u64, p)), &b, &spec, 0.35).unwrap();
            let m2 = build_similarity(b.iter().enumerate().map(|(i, p)| (i as u64, p)), &a, &spec, 0.35).unwrap();
            for i in 0..a.len() {
                prop_assert!((m1.weights[i][0] - m2.weights[0][i]).abs() < 1e-12);
            }
        }
    }
}
