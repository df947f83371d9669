/// Pairs timestamps from two sorted lists.
///
/// All candidate pairs with `|a - b| <= max_diff` are visited in order of
/// increasing difference and accepted greedily when neither index has been
/// used, which is the TUM `associate.py` convention. The result is sorted by
/// the index into `a`.
pub fn associate(a: &[f64], b: &[f64], max_diff: f64) -> Vec<(usize, usize)> {
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    let mut start = 0;
    for (i, &ta) in a.iter().enumerate() {
        while start < b.len() && b[start] < ta - max_diff {
            start += 1;
        }
        for (j, &tb) in b.iter().enumerate().skip(start) {
            if tb > ta + max_diff {
                break;
            }
            let d = (ta - tb).abs();
            if d <= max_diff {
                candidates.push((d, i, j));
            }
        }
    }
    candidates.sort_by(|x, y| {
        x.0.total_cmp(&y.0)
            .then_with(|| x.1.min(x.2).cmp(&y.1.min(y.2)))
            .then_with(|| x.1.max(x.2).cmp(&y.1.max(y.2)))
            .then_with(|| x.1.cmp(&y.1))
    });
    let mut used_a = vec![false; a.len()];
    let mut used_b = vec![false; b.len()];
    let mut pairs = Vec::new();
    for (_, i, j) in candidates {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            pairs.push((i, j));
        }
    }
    pairs.sort_unstable();
    pairs
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Exhaustive search over all partial matchings: maximize the number of
    /// pairs, then minimize total |dt|.
    fn brute_force(a: &[f64], b: &[f64], max_diff: f64) -> Vec<(usize, usize)> {
        fn rec(
            i: usize,
            a: &[f64],
            b: &[f64],
            max_diff: f64,
            used: &mut Vec<bool>,
            cur: &mut Vec<(usize, usize)>,
            best: &mut (usize, f64, Vec<(usize, usize)>),
        ) {
            if i == a.len() {
                let cost: f64 = cur.iter().map(|&(x, y)| (a[x] - b[y]).abs()).sum();
                if cur.len() > best.0 || (cur.len() == best.0 && cost < best.1) {
                    *best = (cur.len(), cost, cur.clone());
                }
                return;
            }
            rec(i + 1, a, b, max_diff, used, cur, best);
            for j in 0..b.len() {
                if !used[j] && (a[i] - b[j]).abs() <= max_diff {
                    used[j] = true;
                    cur.push((i, j));
                    rec(i + 1, a, b, max_diff, used, cur, best);
                    cur.pop();
                    used[j] = false;
                }
            }
        }
        let mut best = (0, f64::INFINITY, Vec::new());
        rec(0, a, b, max_diff, &mut vec![false; b.len()], &mut Vec::new(), &mut best);
        best.2
    }

    #[test]
    fn identical_lists_pair_fully() {
        let a = [0.0, 0.1, 0.2, 0.3];
        assert_eq!(associate(&a, &a, 0.02), vec![(0, 0), (1, 1), (2, 2), (3, 3)]);
    }

    #[test]
    fn out_of_tolerance_is_empty() {
        assert!(associate(&[0.0], &[0.5], 0.02).is_empty());
    }

    #[test]
    fn mixed_case_matches_brute_force() {
        let a = [0.0, 0.033, 0.066];
        let b = [0.001, 0.034, 0.1];
        let expected = brute_force(&a, &b, 0.02);
        assert_eq!(expected, vec![(0, 0), (1, 1)]);
        assert_eq!(associate(&a, &b, 0.02), expected);
    }

    proptest! {
        #[test]
        fn symmetric_under_swap(mut a in prop::collection::vec(0.0..2.0f64, 0..30),
                                mut b in prop::collection::vec(0.0..2.0f64, 0..30)) {
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            let ab = associate(&a, &b, 0.02);
            let mut ba: Vec<_> = associate(&b, &a, 0.02).into_iter().map(|(j, i)| (i, j)).collect();
            ba.sort_unstable();
            prop_assert_eq!(&ab, &ba);
            for &(i, j) in &ab {
                prop_assert!((a[i] - b[j]).abs() <= 0.02);
            }
        }

        #[test]
        fn well_separated_streams_match_brute_force(
            offsets in prop::collection::vec(-0.015..0.015f64, 1..7)) {
            // Frames 1/30 s apart with jitter below the tolerance: greedy is optimal.
            let a: Vec<f64> = (0..offsets.len()).map(|i| i as f64 / 30.0).collect();
            let b: Vec<f64> = a.iter().zip(&offsets).map(|(t, o)| t + o * 0.5).collect();
            prop_assert_eq!(associate(&a, &b, 0.01), brute_force(&a, &b, 0.01));
        }
    }
}
