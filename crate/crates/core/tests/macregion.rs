mod common;

use common::{log2_det_subset, members};
use misobc_core::macregion::{corner_rates, in_region, subset_bound, sum_rate};
use misobc_core::{ChannelMatrix, DecodingOrder, C64};
use proptest::prelude::*;

fn channel(k: usize, m: usize, entries: &[(f64, f64)]) -> ChannelMatrix {
    ChannelMatrix::new(k, m, entries.iter().map(|&(re, im)| C64::new(re, im)).collect()).unwrap()
}

/// `(H, q, order)` with `K <= 6`, `M <= 4`.
fn instance() -> impl Strategy<Value = (ChannelMatrix, Vec<f64>, Vec<usize>)> {
    (1usize..=6, 1usize..=4).prop_flat_map(|(k, m)| {
        (
            prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64), k * m),
            prop::collection::vec(0.0..10.0f64, k),
            Just((0..k).collect::<Vec<_>>()).prop_shuffle(),
        )
            .prop_map(move |(e, q, perm)| (channel(k, m, &e), q, perm))
    })
}

#[test]
fn subset_bound_by_hand() {
    let h = ChannelMatrix::from_real_rows(&[&[1.0]]).unwrap();
    assert!((subset_bound(&h, &[1.0], &[0]).unwrap() - 1.0).abs() < 1e-12);
    let h = ChannelMatrix::from_real_rows(&[&[1.0, 0.0], &[0.0, 1.0]]).unwrap();
    assert!((subset_bound(&h, &[1.0, 1.0], &[0, 1]).unwrap() - 2.0).abs() < 1e-12);
    assert_eq!(subset_bound(&h, &[0.0, 0.0], &[0, 1]).unwrap(), 0.0);
}

#[test]
fn scalar_corners_by_hand() {
    let h = ChannelMatrix::from_real_rows(&[&[1.0], &[1.0]]).unwrap();
    let r = corner_rates(&h, &[1.0, 1.0], &DecodingOrder::new(vec![0, 1]).unwrap()).unwrap();
    let second = 3f64.log2() - 1.0;
    assert!((r[0] - 1.0).abs() < 1e-12 && (r[1] - second).abs() < 1e-12);
    let r = corner_rates(&h, &[1.0, 1.0], &DecodingOrder::new(vec![1, 0]).unwrap()).unwrap();
    assert!((r[1] - 1.0).abs() < 1e-12 && (r[0] - second).abs() < 1e-12);
    let r = corner_rates(&h, &[0.0, 0.0], &DecodingOrder::identity(2)).unwrap();
    assert_eq!(r, vec![0.0, 0.0]);
}

#[test]
fn zero_rates_are_inside() {
    let h = ChannelMatrix::from_real_rows(&[&[0.3, 1.0], &[1.0, -0.5]]).unwrap();
    assert!(in_region(&h, &[0.0, 0.0], &[0.0, 0.0], 1e-9).unwrap());
}

#[test]
fn too_many_users_for_enumeration() {
    let rows: Vec<Vec<C64>> = (0..21).map(|_| vec![C64::new(1.0, 0.0)]).collect();
    let h = ChannelMatrix::from_rows(&rows).unwrap();
    assert!(in_region(&h, &[0.0; 21], &[0.0; 21], 1e-9).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(200) })]

    /// Corners satisfy every subset constraint, checked against an
    /// independent determinant.
    #[test]
    fn corners_satisfy_every_subset((h, q, perm) in instance()) {
        let k = h.users();
        let r = corner_rates(&h, &q, &DecodingOrder::new(perm).unwrap()).unwrap();
        prop_assert!(r.iter().all(|&x| x >= 0.0));
        for mask in 1u32..(1 << k) {
            let s = members(k, mask);
            let total: f64 = s.iter().map(|&i| r[i]).sum();
            prop_assert!(total <= log2_det_subset(&h, &q, &s) + 1e-9);
        }
        prop_assert!(in_region(&h, &q, &r, 1e-9).unwrap());
    }

    #[test]
    fn sum_rate_ignores_order((h, q, perm) in instance()) {
        let full: Vec<usize> = (0..h.users()).collect();
        let oracle = log2_det_subset(&h, &q, &full);
        let r = corner_rates(&h, &q, &DecodingOrder::new(perm).unwrap()).unwrap();
        prop_assert!((r.iter().sum::<f64>() - oracle).abs() <= 1e-10 * (1.0 + oracle));
        prop_assert!((sum_rate(&h, &q).unwrap() - oracle).abs() <= 1e-10 * (1.0 + oracle));
    }

    #[test]
    fn scaled_corner_leaves_region((h, q, perm) in instance()) {
        let r = corner_rates(&h, &q, &DecodingOrder::new(perm).unwrap()).unwrap();
        prop_assume!(r.iter().sum::<f64>() > 1e-3);
        let scaled: Vec<f64> = r.iter().map(|x| 1.01 * x).collect();
        prop_assert!(!in_region(&h, &q, &scaled, 1e-9).unwrap());
    }

    #[test]
    fn bound_grows_with_power((h, q, _) in instance(), extra in 0.0..5.0f64, pick in any::<prop::sample::Index>()) {
        let k = h.users();
        let user = pick.index(k);
        let mut more = q.clone();
        more[user] += extra;
        for mask in 1u32..(1 << k) {
            let s = members(k, mask);
            if s.contains(&user) {
                prop_assert!(subset_bound(&h, &more, &s).unwrap() >= subset_bound(&h, &q, &s).unwrap() - 1e-12);
            }
        }
    }
}
