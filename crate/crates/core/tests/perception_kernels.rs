use latchflow::perception::{
    identify, identify_sequential, l2_squared, normalize_image, standardize, FaceEmbedding, Gallery, Identification,
    QuantParams, EMBEDDING_DIM,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_embedding(rng: &mut impl Rng) -> FaceEmbedding {
    FaceEmbedding::new((0..EMBEDDING_DIM).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Per-component accumulation with an explicit index loop and Kahan
/// compensation, deliberately unlike the iterator fold under test.
fn l2_oracle(a: &[f64], b: &[f64]) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for i in 0..a.len() {
        let d = a[i] - b[i];
        let y = d * d - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum
}

#[test]
fn l2_agrees_with_oracle_on_1000_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..1000 {
        let (a, b) = (random_embedding(&mut rng), random_embedding(&mut rng));
        let s = l2_squared(&a, &b);
        assert!((s - l2_oracle(a.values(), b.values())).abs() <= 1e-12);
        assert_eq!(s, l2_squared(&b, &a));
        assert_eq!(l2_squared(&a, &a), 0.0);
    }
    assert_eq!(l2_squared(&FaceEmbedding::basis(0), &FaceEmbedding::basis(1)), 2.0);
}

#[test]
fn quantization_error_bound_on_10k_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..10_000 {
        let scale = 10f64.powf(rng.random_range(-4.0..1.0));
        let p = QuantParams::symmetric(scale).unwrap();
        let x = rng.random_range(-128.0 * scale..=127.0 * scale);
        let err = (x - p.dequantize(p.quantize(x))).abs();
        assert!(err <= scale / 2.0, "x={x} scale={scale} err={err}");
    }
    let p = QuantParams::symmetric(0.5).unwrap();
    assert_eq!(p.dequantize(i8::MIN), -128.0 * 0.5);
    assert_eq!(p.dequantize(i8::MAX), 127.0 * 0.5);
}

#[test]
fn normalized_images_center_on_128() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let n = rng.random_range(2..500);
        let px: Vec<u8> = (0..n).map(|_| rng.random()).collect();
        let y = standardize(&px).unwrap();
        if y.iter().all(|v| *v == 128.0) {
            continue;
        }
        let mean = y.iter().sum::<f64>() / n as f64;
        let std = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        assert!((mean - 128.0).abs() < 1.0);
        assert!((std - 128.0).abs() < 2.0);
        assert_eq!(normalize_image(&px).unwrap().len(), n);
    }
}

fn gallery_from(rng: &mut ChaCha8Rng, n: usize) -> Gallery {
    let mut g = Gallery::new();
    for i in 0..n {
        g.add(format!("p{i:03}"), random_embedding(rng));
    }
    g
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    /// Appending an entry farther than the current match never changes it.
    #[test]
    fn identify_is_scale_consistent(seed: u64, n in 1usize..20, threshold in 0.0f64..200.0, push in 0.0f64..5.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = gallery_from(&mut rng, n);
        let q = random_embedding(&mut rng);
        let before = identify(&q, &g, threshold).unwrap();
        prop_assert_eq!(&before, &identify_sequential(&q, &g, threshold).unwrap());
        if let Identification::Identity { distance, .. } = before {
            // farther entry: q shifted along one axis by more than sqrt(distance)
            let mut v = q.values().to_vec();
            v[0] += distance.sqrt() + 0.01 + push;
            g.add("aaa_far", FaceEmbedding::new(v).unwrap());
            prop_assert_eq!(identify(&q, &g, threshold).unwrap(), before);
        }
    }
}
