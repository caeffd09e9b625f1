//! Inference path: padding for non-divisible sizes and tiled/full-frame
//! self-consistency.

mod common;

use common::bright_image;
use lltext_core::{sobel_magnitude, ImageTensor};
use lltext_nn::enhancer::{Enhancer, EnhancerConfig};
use lltext_pipeline::infer::enhance_frame;

fn desk_net(levels: usize) -> Enhancer<f64> {
    Enhancer::new(
        EnhancerConfig {
            levels,
            base_channels: 8,
            ..EnhancerConfig::default()
        },
        31,
    )
    .unwrap()
}

#[test]
fn divisible_input_is_a_single_pass() {
    let net = desk_net(2);
    let img = bright_image(64, 64);
    let edge = sobel_magnitude(&img);
    let (out, fused) = enhance_frame(&net, &img, &edge, 0, 0).unwrap();
    assert_eq!((out.height(), out.width()), (64, 64));
    assert_eq!((fused.height(), fused.width()), (64, 64));
}

#[test]
fn odd_input_is_padded_and_cropped_back() {
    let net = desk_net(3); // requires multiples of 4
    let img = bright_image(45, 50);
    let edge = sobel_magnitude(&img);
    let (out, _) = enhance_frame(&net, &img, &edge, 0, 0).unwrap();
    assert_eq!((out.height(), out.width()), (45, 50));

    // The padded pass agrees with itself on the valid region when the input
    // is embedded in a larger reflect-padded frame.
    let direct = net.forward(&reflect_to(&img, 48, 52), &reflect_gray(&edge, 48, 52)).unwrap();
    for y in 0..45 {
        for x in 0..50 {
            for c in 0..3 {
                assert!((out.get(y, x, c) - direct.enhanced.get(y, x, c)).abs() < 1e-12);
            }
        }
    }
}

fn reflect_to(img: &ImageTensor<f64>, h: usize, w: usize) -> ImageTensor<f64> {
    let mirror = |i: usize, n: usize| {
        let period = 2 * n - 2;
        let m = i % period;
        if m < n {
            m
        } else {
            period - m
        }
    };
    ImageTensor::from_fn(h, w, img.channels(), |y, x, c| {
        img.get(mirror(y, img.height()), mirror(x, img.width()), c)
    })
    .unwrap()
}

fn reflect_gray(map: &lltext_core::GrayMap<f64>, h: usize, w: usize) -> lltext_core::GrayMap<f64> {
    let mirror = |i: usize, n: usize| {
        let period = 2 * n - 2;
        let m = i % period;
        if m < n {
            m
        } else {
            period - m
        }
    };
    lltext_core::GrayMap::from_fn(h, w, |y, x| {
        map.get(mirror(y, map.height()), mirror(x, map.width()))
    })
    .unwrap()
}

#[test]
fn tiled_matches_full_frame_in_the_interior() {
    let net = desk_net(2);
    let img = bright_image(192, 192);
    let edge = sobel_magnitude(&img);
    let (full, _) = enhance_frame(&net, &img, &edge, 0, 0).unwrap();
    let (tiled, _) = enhance_frame(&net, &img, &edge, 128, 32).unwrap();
    // Mean absolute discrepancy over the blended interior.
    let mut acc = 0.0;
    let mut n = 0usize;
    for y in 8..184 {
        for x in 8..184 {
            for c in 0..3 {
                acc += (full.get(y, x, c) - tiled.get(y, x, c)).abs();
                n += 1;
            }
        }
    }
    let mad = acc / n as f64;
    assert!(mad < 0.01, "tiled/full mean abs discrepancy {mad}");
}

#[test]
fn tile_must_be_divisible_by_network_multiple() {
    let net = desk_net(3); // multiple 4
    let img = bright_image(64, 64);
    let edge = sobel_magnitude(&img);
    assert!(enhance_frame(&net, &img, &edge, 30, 8).is_err());
}
