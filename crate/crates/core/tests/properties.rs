use prodcat::forest::gini;
use prodcat::gbt::{grad_hess, leaf_weight, softmax};
use prodcat::knn::manhattan;
use prodcat::metrics::{confusion, precision_recall_f1};
use proptest::prelude::*;

fn labels(max: u8) -> impl Strategy<Value = Vec<(u8, u8)>> {
    prop::collection::vec((0..max, 0..max), 1..200)
}

proptest! {
    #[test]
    fn confusion_matches_pair_counting(pairs in labels(6)) {
        let t: Vec<String> = pairs.iter().map(|p| format!("l{}", p.0)).collect();
        let p: Vec<String> = pairs.iter().map(|p| format!("l{}", p.1)).collect();
        let cm = confusion(&t, &p).unwrap();
        prop_assert_eq!(cm.total() as usize, pairs.len());
        for (i, a) in cm.label_vocab.iter().enumerate() {
            for (j, b) in cm.label_vocab.iter().enumerate() {
                let brute = t.iter().zip(&p).filter(|(x, y)| *x == a && *y == b).count();
                prop_assert_eq!(cm.get(i, j) as usize, brute);
            }
        }
    }

    #[test]
    fn report_invariants(pairs in labels(5)) {
        let t: Vec<String> = pairs.iter().map(|p| format!("l{}", p.0)).collect();
        let p: Vec<String> = pairs.iter().map(|p| format!("l{}", p.1)).collect();
        let cm = confusion(&t, &p).unwrap();
        let r = precision_recall_f1(&cm);
        // micro precision and micro recall both equal accuracy
        let k = cm.n_classes();
        let tp: u64 = (0..k).map(|c| cm.tp(c)).sum();
        let fp: u64 = (0..k).map(|c| cm.fp(c)).sum();
        let fn_: u64 = (0..k).map(|c| cm.fn_(c)).sum();
        let acc = t.iter().zip(&p).filter(|(a, b)| a == b).count() as f64 / t.len() as f64;
        prop_assert!((tp as f64 / (tp + fp) as f64 - acc).abs() < 1e-12);
        prop_assert!((tp as f64 / (tp + fn_) as f64 - acc).abs() < 1e-12);
        prop_assert!((r.accuracy - acc).abs() < 1e-12);
        for v in [r.macro_avg.precision, r.macro_avg.recall, r.macro_avg.f1] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        // weighted F1 lies between min and max F1 over classes with support
        let supported: Vec<f64> = r.per_class.iter().filter(|c| c.support > 0).map(|c| c.scores.f1).collect();
        let lo = supported.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = supported.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(r.weighted_avg.f1 >= lo - 1e-12 && r.weighted_avg.f1 <= hi + 1e-12);
        for c in &r.per_class {
            if c.scores.precision + c.scores.recall == 0.0 {
                prop_assert_eq!(c.scores.f1, 0.0);
            }
        }
    }

    #[test]
    fn softmax_is_a_distribution(s in prop::collection::vec(-50.0f64..50.0, 1..10), shift in -100.0f64..100.0) {
        let p = softmax(&s).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let shifted: Vec<f64> = s.iter().map(|v| v + shift).collect();
        for (a, b) in p.iter().zip(softmax(&shifted).unwrap()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_matches_finite_differences(s in prop::collection::vec(-4.0f64..4.0, 2..7), pick in 0usize..100) {
        let y = pick % s.len();
        let (g, _) = grad_hess(&softmax(&s).unwrap(), y).unwrap();
        let loss = |v: &[f64]| -softmax(v).unwrap()[y].ln();
        let eps = 1e-5;
        for j in 0..s.len() {
            let mut up = s.clone();
            let mut dn = s.clone();
            up[j] += eps;
            dn[j] -= eps;
            let fd = (loss(&up) - loss(&dn)) / (2.0 * eps);
            prop_assert!((fd - g[j]).abs() <= 1e-5 * g[j].abs().max(1e-3));
        }
    }

    #[test]
    fn leaf_weight_minimises_second_order_loss(g in -10.0f64..10.0, h in 0.0f64..10.0, lambda in 0.1f64..5.0) {
        let w = leaf_weight(g, h, lambda).unwrap();
        let obj = |w: f64| g * w + 0.5 * (h + lambda) * w * w;
        let best = (-20_000..=20_000)
            .map(|i| i as f64 * 1e-3)
            .map(|v| (obj(v), v))
            .fold((f64::INFINITY, 0.0), |a, b| if b.0 < a.0 { b } else { a });
        prop_assert!(obj(w) <= best.0 + 1e-6);
        prop_assert!((w - best.1).abs() <= 1e-3);
    }

    #[test]
    fn gini_bounds(counts in prop::collection::vec(0usize..50, 1..8)) {
        prop_assume!(counts.iter().sum::<usize>() > 0);
        let k = counts.len() as f64;
        let g = gini(&counts).unwrap();
        prop_assert!(g >= -1e-12 && g <= 1.0 - 1.0 / k + 1e-12);
    }

    #[test]
    fn manhattan_triangle(a in prop::collection::vec(-1e3f64..1e3, 5), b in prop::collection::vec(-1e3f64..1e3, 5), c in prop::collection::vec(-1e3f64..1e3, 5)) {
        let ab = manhattan(&a, &b).unwrap();
        let bc = manhattan(&b, &c).unwrap();
        let ac = manhattan(&a, &c).unwrap();
        prop_assert!(ac <= ab + bc + 1e-9);
        prop_assert_eq!(ab, manhattan(&b, &a).unwrap());
    }
}
