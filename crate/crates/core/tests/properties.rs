use mlrh::boost::balance_degree;
use mlrh::data::{decode_matrix_bytes, encode_matrix, one_hot_pm, split, DType, Dataset};
use mlrh::eval::{average_precision, mean_ap, RelevanceOracle};
use mlrh::index::{hamming, knn, pack, PackedCodes};
use mlrh::linalg::{ridge_solve, sym_eigen, DenseMatrix};
use mlrh::trainer::{decode_model, encode_model, TrainedModel};
use proptest::prelude::*;

fn sign_matrix(max_rows: usize, max_cols: usize) -> impl Strategy<Value = DenseMatrix> {
    (1..=max_rows, 1..=max_cols).prop_flat_map(|(r, c)| {
        prop::collection::vec(any::<bool>(), r * c).prop_map(move |bits| {
            DenseMatrix::from_vec(r, c, bits.into_iter().map(|b| if b { 1.0 } else { -1.0 }).collect()).unwrap()
        })
    })
}

fn real_matrix(max_rows: usize, max_cols: usize) -> impl Strategy<Value = DenseMatrix> {
    (1..=max_rows, 1..=max_cols).prop_flat_map(|(r, c)| {
        prop::collection::vec(-10.0f64..10.0, r * c).prop_map(move |v| DenseMatrix::from_vec(r, c, v).unwrap())
    })
}

proptest! {
    #[test]
    fn pack_unpack_round_trip(h in sign_matrix(140, 12)) {
        let p = pack(&h).unwrap();
        prop_assert_eq!(p.unpack(), h);
        prop_assert_eq!(PackedCodes::from_bytes(&p.to_bytes()).unwrap(), p);
    }

    #[test]
    fn hamming_is_a_metric(h in sign_matrix(130, 3)) {
        prop_assume!(h.cols() == 3);
        let p = pack(&h).unwrap();
        let d = |i, j| hamming(&p, i, j).unwrap();
        prop_assert_eq!(d(0, 0), 0);
        prop_assert_eq!(d(0, 1), d(1, 0));
        prop_assert!(d(0, 2) <= d(0, 1) + d(1, 2));
        prop_assert!(d(0, 1) as usize <= h.rows());
    }

    #[test]
    fn knn_is_sorted_and_a_prefix_of_the_full_ranking(h in sign_matrix(20, 40), k in 0usize..40) {
        let p = pack(&h).unwrap();
        let k = k.min(p.len());
        let full = knn(&p, p.code(0), p.len()).unwrap();
        let top = knn(&p, p.code(0), k).unwrap();
        prop_assert_eq!(&full[..k], &top[..]);
        for w in full.windows(2) {
            prop_assert!((w[0].distance, w[0].index) < (w[1].distance, w[1].index));
        }
    }

    #[test]
    fn matrix_file_round_trip(m in real_matrix(8, 8), labels in sign_matrix(8, 8)) {
        let (back, dtype) = decode_matrix_bytes(&encode_matrix(&m, DType::F32).unwrap()).unwrap();
        prop_assert_eq!(dtype, DType::F32);
        for (a, b) in m.as_slice().iter().zip(back.as_slice()) {
            prop_assert_eq!(*a as f32 as f64, *b);
        }
        let (back, _) = decode_matrix_bytes(&encode_matrix(&labels, DType::I8).unwrap()).unwrap();
        prop_assert_eq!(back, labels);
    }

    #[test]
    fn average_precision_is_bounded(list in prop::collection::vec(any::<bool>(), 0..80)) {
        let ap = average_precision(&list);
        prop_assert!((0.0..=1.0).contains(&ap));
        prop_assert_eq!(ap == 0.0, !list.contains(&true));
        // Moving a relevant item ahead of an irrelevant one never lowers AP.
        if let Some(i) = (1..list.len()).find(|&i| list[i] && !list[i - 1]) {
            let mut better = list.clone();
            better.swap(i, i - 1);
            prop_assert!(average_precision(&better) >= ap);
        }
    }

    #[test]
    fn map_ignores_query_order(ids in prop::collection::vec(0usize..3, 4..20), rot in 0usize..20) {
        prop_assume!((0..3).all(|c| ids.contains(&c)));
        let y = one_hot_pm(&ids, 3).unwrap();
        let n = ids.len();
        let rankings: Vec<Vec<usize>> = (0..n).map(|q| (0..n).map(|i| (i + q) % n).collect()).collect();
        let base = mean_ap(&rankings, &RelevanceOracle::new(&y, &y).unwrap(), None).unwrap();
        let order: Vec<usize> = (0..n).map(|i| (i + rot) % n).collect();
        let qy = y.select_columns(&order);
        let permuted: Vec<Vec<usize>> = order.iter().map(|&q| rankings[q].clone()).collect();
        let again = mean_ap(&permuted, &RelevanceOracle::new(&qy, &y).unwrap(), None).unwrap();
        prop_assert!((base - again).abs() < 1e-12);
    }

    #[test]
    fn balance_degree_is_abs_row_sum(h in sign_matrix(1, 60)) {
        let sum: f64 = h.row(0).iter().sum();
        prop_assert_eq!(balance_degree(h.row(0)).unwrap(), sum.abs() as u64);
    }

    #[test]
    fn eigen_reconstructs(x in real_matrix(6, 6)) {
        let a = DenseMatrix::from_fn(x.rows(), x.rows(), |i, j| {
            (0..x.cols()).map(|k| x[(i, k)] * x[(j, k)]).sum()
        });
        let e = sym_eigen(&a).unwrap();
        let scale = a.max_abs().max(1.0);
        prop_assert!(e.reconstruct().sub(&a).unwrap().max_abs() <= 1e-9 * scale);
        for w in e.values.windows(2) {
            prop_assert!(w[0] <= w[1]);
        }
    }

    #[test]
    fn ridge_satisfies_its_equation(x in real_matrix(6, 10), lambda in 0.01f64..5.0) {
        let a = DenseMatrix::from_fn(x.rows(), x.rows(), |i, j| {
            (0..x.cols()).map(|k| x[(i, k)] * x[(j, k)]).sum()
        });
        let b = DenseMatrix::from_fn(x.rows(), 2, |i, j| x[(i, j % x.cols())]);
        let sol = ridge_solve(&a, lambda, &b).unwrap();
        let lhs = DenseMatrix::from_fn(x.rows(), 2, |i, j| {
            (0..x.rows()).map(|k| a[(i, k)] * sol[(k, j)]).sum::<f64>() + lambda * sol[(i, j)]
        });
        prop_assert!(lhs.sub(&b).unwrap().max_abs() <= 1e-8 * b.max_abs().max(1.0));
    }

    #[test]
    fn model_file_round_trip(p in real_matrix(6, 5)) {
        let model = TrainedModel::new(p.clone(), None, Default::default()).unwrap();
        let back = decode_model(&encode_model(&model).unwrap()).unwrap();
        prop_assert_eq!(back.bits, p.cols());
        for (a, b) in p.as_slice().iter().zip(back.p.as_slice()) {
            prop_assert_eq!(*a as f32 as f64, *b);
        }
    }

    #[test]
    fn split_partitions_the_dataset(per_class in 2usize..10, classes in 1usize..5, f in 0.05f64..0.95, seed in any::<u64>()) {
        let ids: Vec<usize> = (0..classes * per_class).map(|i| i % classes).collect();
        let y = one_hot_pm(&ids, classes).unwrap();
        let x = DenseMatrix::from_fn(2, ids.len(), |r, c| (r * 1000 + c) as f64);
        let ds = Dataset::new(x, y).unwrap();
        let target = (f * ds.len() as f64).round() as usize;
        let Ok((train, query)) = split(&ds, f, seed) else {
            // Every class keeps a training sample, so only an empty query side is refused.
            prop_assert_eq!(target, 0);
            return Ok(());
        };
        prop_assert_eq!(train.len() + query.len(), ds.len());
        // The target, less at most one per class held back for training.
        prop_assert!(query.len() <= target && target - query.len() <= classes);
        for c in 0..classes {
            let in_query = (0..query.len()).filter(|&i| query.class_of(i) == c).count() as f64;
            let exact = f * per_class as f64;
            prop_assert!((in_query - exact).abs() < 1.0 + 1e-9 || in_query == per_class as f64 - 1.0);
        }
        let mut seen: Vec<f64> = train.features().row(0).iter().chain(query.features().row(0)).copied().collect();
        seen.sort_by(f64::total_cmp);
        seen.dedup();
        prop_assert_eq!(seen.len(), ds.len());
        for c in 0..classes {
            prop_assert!((0..train.len()).any(|i| train.class_of(i) == c));
        }
    }
}
