use domainsmith::ckpt::{average, read_archive, write_archive, Tensor, TensorArchive};
use domainsmith::Error;
use proptest::prelude::*;

fn archive(tensors: &[(&str, Vec<usize>, Vec<f32>)]) -> TensorArchive {
    let mut a = TensorArchive::new();
    for (name, shape, data) in tensors {
        a.insert(*name, Tensor::new(shape.clone(), data.clone()).unwrap()).unwrap();
    }
    a
}

fn constant(value: f32) -> TensorArchive {
    archive(&[
        ("decoder.w", vec![2, 3], vec![value; 6]),
        ("encoder.b", vec![4], vec![value; 4]),
        ("embed", vec![3, 2, 2], vec![value; 12]),
    ])
}

fn max_diff(a: &TensorArchive, b: &TensorArchive) -> f64 {
    a.iter()
        .flat_map(|(name, t)| {
            let u = b.get(name).unwrap();
            t.data().iter().zip(u.data()).map(|(x, y)| (*x as f64 - *y as f64).abs()).collect::<Vec<_>>()
        })
        .fold(0.0, f64::max)
}

#[test]
fn eight_checkpoints_of_one_to_eight_average_to_four_and_a_half() {
    let inputs: Vec<TensorArchive> = (1..=8).map(|k| constant(k as f32)).collect();
    let avg = average(&inputs, None).unwrap();
    for (_, t) in avg.iter() {
        assert!(t.data().iter().all(|v| (*v as f64 - 4.5).abs() <= 1e-7));
    }
    assert_eq!(avg.meta.get("average.constituents").map(|s| s.split(',').count()), Some(8));
}

#[test]
fn zero_and_two_average_to_one() {
    let avg = average(&[constant(0.0), constant(2.0)], None).unwrap();
    assert_eq!(max_diff(&avg, &constant(1.0)), 0.0);
}

#[test]
fn single_archive_is_returned_exactly() {
    let c = archive(&[("w", vec![3], vec![0.1, -7.25, 3.0e-8])]);
    let avg = average(std::slice::from_ref(&c), None).unwrap();
    assert_eq!(avg.get("w"), c.get("w"));
}

#[test]
fn mismatches_name_the_tensor() {
    let a = constant(1.0);
    let b = archive(&[
        ("decoder.w", vec![3, 2], vec![1.0; 6]),
        ("encoder.b", vec![4], vec![1.0; 4]),
        ("embed", vec![3, 2, 2], vec![1.0; 12]),
    ]);
    match average(&[a.clone(), b], None) {
        Err(Error::Compatibility { tensor, .. }) => assert_eq!(tensor, "decoder.w"),
        other => panic!("expected a compatibility error, got {other:?}"),
    }
    let c = archive(&[("decoder.w", vec![2, 3], vec![1.0; 6])]);
    assert!(matches!(average(&[a, c], None), Err(Error::Compatibility { .. })));
}

#[test]
fn bad_files_are_format_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.tarc");
    write_archive(&constant(3.0), &path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    assert!(matches!(TensorArchive::from_bytes(&bytes[..bytes.len() - 3]), Err(Error::Format(_))));
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(TensorArchive::from_bytes(&bad), Err(Error::Format(_))));
    assert!(matches!(Tensor::new(vec![2, 3], vec![0.0; 5]), Err(Error::Format(_))));
}

fn arb_archive(shapes: Vec<Vec<usize>>) -> impl Strategy<Value = TensorArchive> {
    let tensors: Vec<_> = shapes
        .into_iter()
        .enumerate()
        .map(|(i, shape)| {
            let n: usize = shape.iter().product();
            prop::collection::vec(-100.0f32..100.0, n).prop_map(move |data| (format!("t{i}"), shape.clone(), data))
        })
        .collect();
    tensors.prop_map(|ts| {
        let mut a = TensorArchive::new();
        for (name, shape, data) in ts {
            a.insert(name, Tensor::new(shape, data).unwrap()).unwrap();
        }
        a
    })
}

fn shapes() -> Vec<Vec<usize>> {
    vec![vec![3], vec![2, 2], vec![1, 2, 3]]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn round_trip_is_byte_exact(a in arb_archive(shapes())) {
        let bytes = a.to_bytes().unwrap();
        let back = TensorArchive::from_bytes(&bytes).unwrap();
        prop_assert_eq!(&back, &a);
        prop_assert_eq!(back.to_bytes().unwrap(), bytes);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.tarc");
        write_archive(&a, &path).unwrap();
        prop_assert_eq!(read_archive(&path).unwrap(), a);
    }

    #[test]
    fn repeated_archive_is_a_fixed_point(a in arb_archive(shapes()), k in 1usize..9) {
        let avg = average(&vec![a.clone(); k], None).unwrap();
        // values up to 100 in magnitude; 1e-7 relative
        prop_assert!(max_diff(&avg, &a) <= 1e-7 * 100.0);
    }

    #[test]
    fn two_point_average_is_midpoint(a in arb_archive(shapes()), b in arb_archive(shapes())) {
        let avg = average(&[a.clone(), b.clone()], None).unwrap();
        for (name, t) in avg.iter() {
            let (x, y) = (a.get(name).unwrap(), b.get(name).unwrap());
            for ((m, p), q) in t.data().iter().zip(x.data()).zip(y.data()) {
                let mid = ((*p as f64 + *q as f64) / 2.0) as f32;
                prop_assert_eq!(*m, mid);
            }
        }
    }

    #[test]
    fn scaling_commutes_with_averaging(a in arb_archive(shapes()), b in arb_archive(shapes()), alpha in -4.0f32..4.0) {
        let scaled = average(&[a.map(|v| v * alpha), b.map(|v| v * alpha)], None).unwrap();
        let avg = average(&[a, b], None).unwrap().map(|v| v * alpha);
        prop_assert!(max_diff(&scaled, &avg) <= 1e-6 * 400.0);
    }

    #[test]
    fn order_of_inputs_does_not_matter(
        archives in prop::collection::vec(arb_archive(shapes()), 2..6),
        weights in prop::collection::vec(0.1f64..3.0, 6),
    ) {
        let mut reversed = archives.clone();
        reversed.reverse();
        prop_assert_eq!(
            average(&archives, None).unwrap().to_bytes().unwrap(),
            average(&reversed, None).unwrap().to_bytes().unwrap()
        );
        let w = &weights[..archives.len()];
        let mut w_rev = w.to_vec();
        w_rev.reverse();
        let x = average(&archives, Some(w)).unwrap();
        let y = average(&reversed, Some(&w_rev)).unwrap();
        prop_assert_eq!(max_diff(&x, &y), 0.0);
    }
}
