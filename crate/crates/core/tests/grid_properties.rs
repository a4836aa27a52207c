use proptest::prelude::*;
use vortex_census::io::{decode_field, encode_field, read_field, write_field, HEADER_LEN};
use vortex_census::{circular_shift, cross_correlation_map, Field};

fn field(max_side: usize) -> impl Strategy<Value = Field> {
    (1..=max_side, 1..=max_side).prop_flat_map(|(rows, cols)| {
        prop::collection::vec(-1e3f64..1e3, rows * cols)
            .prop_map(move |data| Field::new(rows, cols, data).unwrap())
    })
}

/// Correlation by its definition, as a direct double sum.
fn correlation_by_sums(a: &Field, b: &Field) -> Field {
    let (m, n) = a.shape();
    Field::from_fn(m, n, |r, c| {
        let mut acc = 0.0;
        for i in 0..m {
            for j in 0..n {
                acc += a[(i, j)] * b.get_wrapped(i as isize - r as isize, j as isize - c as isize);
            }
        }
        acc
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn vort_bytes_round_trip(f in field(12), time in prop::option::of(-1e6f64..1e6)) {
        let f = f.with_time(time);
        let bytes = encode_field(&f);
        prop_assert_eq!(bytes.len(), HEADER_LEN + 8 * f.len());
        let back = decode_field(&bytes).unwrap();
        prop_assert_eq!(back.shape(), f.shape());
        prop_assert_eq!(back.time(), f.time());
        for (x, y) in back.data().iter().zip(f.data()) {
            prop_assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn shift_composes_and_inverts(f in field(10), a in -30isize..30, b in -30isize..30, c in -30isize..30, d in -30isize..30) {
        let twice = circular_shift(&circular_shift(&f, a, b), c, d);
        prop_assert_eq!(twice, circular_shift(&f, a + c, b + d));
        prop_assert_eq!(circular_shift(&circular_shift(&f, a, b), -a, -b), f);
    }

    #[test]
    fn correlation_peaks_at_the_applied_shift(a in field(9), dr in -20isize..20, dc in -20isize..20) {
        // out[r][c] = ⟨a, b(· − (r, c))⟩ reaches ‖a‖² where the shifted copy
        // is moved back into register, and never exceeds it.
        let b = circular_shift(&a, -dr, -dc);
        let map = cross_correlation_map(&a, &b).unwrap();
        let (m, n) = a.shape();
        let at = map[(dr.rem_euclid(m as isize) as usize, dc.rem_euclid(n as isize) as usize)];
        prop_assert!((at - a.sum_sq()).abs() <= 1e-9 * a.sum_sq().max(1.0));
        prop_assert!(map.data().iter().all(|&v| v <= at + 1e-9 * at.abs().max(1.0)));
    }

    #[test]
    fn translating_b_translates_the_map_the_other_way(a in field(8), dr in -20isize..20, dc in -20isize..20) {
        let b = a.map(|v| v * v - 0.5);
        let moved = cross_correlation_map(&a, &circular_shift(&b, dr, dc)).unwrap();
        let want = circular_shift(&cross_correlation_map(&a, &b).unwrap(), -dr, -dc);
        prop_assert!(moved.max_abs_diff(&want) <= 1e-10 * a.sum_sq().max(1.0));
    }

    #[test]
    fn correlation_matches_direct_sums(a in field(7)) {
        let b = a.map(|v| (v * 0.37).sin());
        let fast = cross_correlation_map(&a, &b).unwrap();
        let slow = correlation_by_sums(&a, &b);
        let scale = a.sum_sq().sqrt() * b.sum_sq().sqrt();
        prop_assert!(fast.max_abs_diff(&slow) <= 1e-10 * scale.max(1.0));
    }
}

#[test]
fn files_round_trip_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.vort");
    let f = Field::from_fn(5, 7, |r, c| r as f64 - 0.5 * c as f64).with_time(Some(3.25));
    write_field(&path, &f).unwrap();
    let back = read_field(&path).unwrap();
    assert_eq!(back, f);
    assert_eq!(std::fs::metadata(&path).unwrap().len() as usize, HEADER_LEN + 8 * 35);
}
