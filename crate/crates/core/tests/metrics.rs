mod common;

use card::image::PlanarImage;
use card::metrics::{psnr, ssim, PSNR_CAP_DB};
use common::{random_image, ssim_oracle};
use proptest::prelude::*;
use rand::seq::SliceRandom;

fn image_pair() -> impl Strategy<Value = (PlanarImage, PlanarImage)> {
    (1usize..=3, 11usize..=20, 11usize..=20, any::<u64>())
        .prop_map(|(c, h, w, seed)| (random_image(c, h, w, seed), random_image(c, h, w, seed ^ 0x5eed)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn psnr_is_symmetric((a, b) in image_pair()) {
        prop_assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
    }

    #[test]
    fn psnr_ignores_a_shared_pixel_permutation((a, b) in image_pair(), seed in any::<u64>()) {
        let mut order: Vec<usize> = (0..a.data().len()).collect();
        order.shuffle(&mut common::rng(seed));
        let permute = |img: &PlanarImage| {
            let data = order.iter().map(|&i| img.data()[i]).collect();
            PlanarImage::new(img.channels(), img.height(), img.width(), data).unwrap()
        };
        let before = psnr(&a, &b).unwrap();
        let after = psnr(&permute(&a), &permute(&b)).unwrap();
        prop_assert!((before - after).abs() < 1e-9, "{before} vs {after}");
    }

    #[test]
    fn psnr_of_identical_images_is_capped((a, _) in image_pair()) {
        prop_assert_eq!(psnr(&a, &a).unwrap(), PSNR_CAP_DB);
    }

    #[test]
    fn ssim_of_an_image_with_itself_is_one((a, _) in image_pair()) {
        prop_assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ssim_is_symmetric_and_bounded((a, b) in image_pair()) {
        let ab = ssim(&a, &b).unwrap();
        prop_assert!((ab - ssim(&b, &a).unwrap()).abs() < 1e-12);
        prop_assert!((-1.0..=1.0).contains(&ab));
    }
}

#[test]
fn ssim_matches_the_direct_formula() {
    for seed in 0..20 {
        let c = 1 + (seed as usize % 3);
        let a = random_image(c, 16 + seed as usize % 5, 12 + seed as usize % 7, seed);
        // Out-of-range values exercise the clamp.
        let b = a.map(|v| v * 1.2 - 0.1 + 0.05 * (v * 37.0).sin());
        let (got, want) = (ssim(&a, &b).unwrap(), ssim_oracle(&a, &b));
        assert!((got - want).abs() < 1e-6, "seed {seed}: {got} vs {want}");
    }
}

#[test]
fn binary_image_against_its_inverse_has_negative_ssim() {
    let mut img = PlanarImage::zeros(1, 16, 16);
    for r in 0..16 {
        for c in 0..16 {
            img.set(0, r, c, ((r + c) % 2) as f64);
        }
    }
    let inv = img.map(|v| 1.0 - v);
    assert!(ssim(&img, &inv).unwrap() < 0.0);
}

#[test]
fn metrics_reject_mismatched_or_tiny_images() {
    let a = PlanarImage::zeros(1, 16, 16);
    assert!(psnr(&a, &PlanarImage::zeros(2, 16, 16)).is_err());
    assert!(ssim(&a, &PlanarImage::zeros(1, 16, 15)).is_err());
    assert!(ssim(&PlanarImage::zeros(1, 10, 40), &PlanarImage::zeros(1, 10, 40)).is_err());
}
