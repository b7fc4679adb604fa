use half::f16;
use proptest::prelude::*;
use spherelight::codec::{decode, encode, packet_len, ENTRY_LEN, HEADER_LEN};
use spherelight::sampling::{merge, UnitSphereCloud};

const GOLDEN: &[u8] = include_bytes!("data/golden_packet.bin");

/// Anchor count, then per-anchor optional (color, distance).
fn arb_cloud(max_anchors: usize) -> impl Strategy<Value = UnitSphereCloud> {
    (2..=max_anchors).prop_flat_map(|n| {
        prop::collection::vec(prop::option::weighted(0.4, ([0.0f32..=1.0, 0.0f32..=1.0, 0.0f32..=1.0], 0.01f32..60.0)), n)
            .prop_map(move |slots| {
                let mut c = UnitSphereCloud::empty(n);
                for (i, s) in slots.into_iter().enumerate() {
                    if let Some((color, d)) = s {
                        c.set(i, color, d);
                    }
                }
                c
            })
    })
}

/// Clouds whose values already sit on the wire grid: colors k/255 and
/// binary16-representable distances.
fn arb_fixed_point_cloud() -> impl Strategy<Value = UnitSphereCloud> {
    (2usize..=600).prop_flat_map(|n| {
        prop::collection::vec(prop::option::of(([0u8..=255, 0u8..=255, 0u8..=255], 0x0400u16..0x7bff)), n).prop_map(
            move |slots| {
                let mut c = UnitSphereCloud::empty(n);
                for (i, s) in slots.into_iter().enumerate() {
                    if let Some((rgb, bits)) = s {
                        let color = rgb.map(|q| q as f32 / 255.0);
                        c.set(i, color, f16::from_bits(bits).to_f32());
                    }
                }
                c
            },
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn size_law(cloud in arb_cloud(4096)) {
        let bytes = encode(&cloud).unwrap();
        prop_assert_eq!(bytes.len(), 10 + 7 * cloud.initialized_count());
        prop_assert_eq!(bytes.len(), packet_len(cloud.initialized_count()));
    }

    #[test]
    fn quantization_is_a_projection(cloud in arb_cloud(1500)) {
        let once = decode(&encode(&cloud).unwrap()).unwrap();
        let twice = decode(&encode(&once).unwrap()).unwrap();
        prop_assert_eq!(&once, &twice);
        prop_assert_eq!(once.initialized_count(), cloud.initialized_count());
    }

    #[test]
    fn fixed_point_round_trip_is_exact(cloud in arb_fixed_point_cloud()) {
        prop_assert_eq!(decode(&encode(&cloud).unwrap()).unwrap(), cloud);
    }

    #[test]
    fn merge_identity_and_associativity(a in arb_cloud(64), b in arb_cloud(64), c in arb_cloud(64)) {
        let n = a.anchor_count();
        let fit = |x: &UnitSphereCloud| {
            let mut y = UnitSphereCloud::empty(n);
            for i in x.initialized_indices().filter(|&i| i < n) {
                let e = x.entry(i);
                y.set(i, e.color, e.distance);
            }
            y
        };
        let (b, c) = (fit(&b), fit(&c));
        let empty = UnitSphereCloud::empty(n);
        prop_assert_eq!(merge(&a, &empty).unwrap(), a.clone());
        prop_assert_eq!(merge(&empty, &a).unwrap(), a.clone());
        let left = merge(&merge(&a, &b).unwrap(), &c).unwrap();
        let right = merge(&a, &merge(&b, &c).unwrap()).unwrap();
        prop_assert_eq!(left, right);
    }
}

#[test]
fn golden_packet_layout() {
    let mut cloud = UnitSphereCloud::empty(5);
    cloud.set(1, [1.0, 0.0, 0.5], 1.5);
    cloud.set(4, [0.2, 0.4, 0.6], 2.25);
    assert_eq!(encode(&cloud).unwrap(), GOLDEN);

    let back = decode(GOLDEN).unwrap();
    assert_eq!(back.initialized_indices().collect::<Vec<_>>(), vec![1, 4]);
    assert_eq!(back.entry(1).color, [1.0, 0.0, 128.0 / 255.0]);
    assert_eq!(back.entry(1).distance, 1.5);
    assert_eq!(back.entry(4).color, [0.2, 0.4, 0.6]);
    assert_eq!(back.entry(4).distance, 2.25);
    assert_eq!(GOLDEN.len(), HEADER_LEN + 2 * ENTRY_LEN);
}

#[test]
fn dense_frame_savings() {
    // A fully dense 256x192 RGB-D frame: 3 color bytes + 2 depth bytes per pixel.
    let raw = 256 * 192 * 5;
    assert_eq!(raw, 245_760);
    let full = packet_len(1280);
    assert_eq!(full, 8970);
    assert!(1.0 - full as f64 / raw as f64 >= 0.963);
}
