use facelayout_core::data::is_quantized;
use facelayout_core::{iou, merge_detections, FaceBox, FaceSource, MergeConfig};
use proptest::prelude::*;

fn arb_box(source: FaceSource) -> impl Strategy<Value = FaceBox> {
    (
        0u32..150,
        0u32..150,
        8u32..50,
        8u32..50,
        -6i32..=6,
        any::<bool>(),
        any::<bool>(),
    )
        .prop_map(move |(x, y, w, h, o, oriented, mirrored)| {
            let mut b = FaceBox::new(x as f64, y as f64, w as f64, h as f64, source);
            if source == FaceSource::OrientedDetector && oriented {
                b.orientation = Some(15 * o);
            }
            b.mirrored = source == FaceSource::VjProfile && mirrored;
            b
        })
}

fn arb_inputs() -> impl Strategy<Value = (Vec<FaceBox>, Vec<FaceBox>)> {
    (
        prop::collection::vec(arb_box(FaceSource::OrientedDetector), 0..6),
        prop::collection::vec(arb_box(FaceSource::VjFrontal), 0..6),
        prop::collection::vec(arb_box(FaceSource::VjProfile), 0..6),
    )
        .prop_map(|(o, f, p)| (o, f.into_iter().chain(p).collect()))
}

proptest! {
    #[test]
    fn output_is_oriented_and_disjoint((oriented, vj) in arb_inputs(), thr in 0.1f64..0.9) {
        let cfg = MergeConfig::new(thr).unwrap();
        let out = merge_detections(&oriented, &vj, &cfg);
        prop_assert!(out.len() <= oriented.len() + vj.len());
        for (i, a) in out.iter().enumerate() {
            let o = a.orientation.expect("every output face is oriented");
            prop_assert!(is_quantized(o));
            for b in &out[i + 1..] {
                prop_assert!(iou(a, b) < thr);
            }
            // geometry always comes from one of the inputs
            prop_assert!(oriented.iter().chain(&vj).any(|s| (s.cx, s.cy, s.w, s.h) == (a.cx, a.cy, a.w, a.h)));
        }
    }

    #[test]
    fn input_order_does_not_matter((oriented, vj) in arb_inputs(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let cfg = MergeConfig::default();
        let mut rng = facelayout_core::rng::rng_for(seed, &[]);
        let (mut o2, mut v2) = (oriented.clone(), vj.clone());
        o2.shuffle(&mut rng);
        v2.shuffle(&mut rng);
        prop_assert_eq!(merge_detections(&oriented, &vj, &cfg), merge_detections(&o2, &v2, &cfg));
    }

    #[test]
    fn oriented_faces_always_survive_alone(oriented in prop::collection::vec(arb_box(FaceSource::OrientedDetector), 1..2), vj in prop::collection::vec(arb_box(FaceSource::VjFrontal), 0..6)) {
        let out = merge_detections(&oriented, &vj, &MergeConfig::default());
        prop_assert!(out.iter().any(|b| b.source == FaceSource::OrientedDetector));
    }

    #[test]
    fn iou_is_symmetric_and_bounded(a in arb_box(FaceSource::VjFrontal), b in arb_box(FaceSource::VjProfile)) {
        let v = iou(&a, &b);
        prop_assert!((0.0..=1.0).contains(&v));
        prop_assert_eq!(v, iou(&b, &a));
        prop_assert_eq!(iou(&a, &a), 1.0);
    }
}

#[test]
fn iou_hand_values() {
    let a = FaceBox::new(10.0, 10.0, 20.0, 20.0, FaceSource::VjFrontal);
    let b = FaceBox::new(20.0, 10.0, 20.0, 20.0, FaceSource::VjFrontal);
    // overlap 10x20 = 200, union 600
    assert!((iou(&a, &b) - 1.0 / 3.0).abs() < 1e-15);
    let far = FaceBox::new(100.0, 10.0, 20.0, 20.0, FaceSource::VjFrontal);
    assert_eq!(iou(&a, &far), 0.0);
    let touching = FaceBox::new(30.0, 10.0, 20.0, 20.0, FaceSource::VjFrontal);
    assert_eq!(iou(&a, &touching), 0.0);
}

#[test]
fn threshold_must_be_in_unit_interval() {
    assert!(MergeConfig::new(0.0).is_err());
    assert!(MergeConfig::new(1.5).is_err());
    assert!(MergeConfig::new(f64::NAN).is_err());
    assert!(MergeConfig::new(1.0).is_ok());
}
