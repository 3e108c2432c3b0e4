use std::path::Path;

use boundarykit::core::flow::{colorize_labels, STREET_PALETTE};
use boundarykit::core::LabelMap;
use boundarykit::image_io::{read_label_map, write_label_map};
use boundarykit::tensor::{read_tensor, write_tensor, Tensor};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn tensor_files_round_trip_bit_exactly(dims in prop::collection::vec(1u32..6, 1..4), seed in any::<u32>()) {
        let n: u32 = dims.iter().product();
        // arbitrary bit patterns, including subnormals and negative zero
        let data: Vec<f32> = (0..n).map(|i| f32::from_bits(seed.wrapping_mul(2654435761).wrapping_add(i.wrapping_mul(40503)) & 0x7f7f_ffff | (i & 1) << 31)).collect();
        let t = Tensor::new(dims, data).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.bwtf");
        write_tensor(&t, &p).unwrap();
        let back = read_tensor(&p).unwrap();
        prop_assert_eq!(back.dims(), t.dims());
        let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&back), bits(&t));
    }

    #[test]
    fn truncated_tensors_are_rejected(cut in 0usize..40) {
        let bytes = Tensor::new(vec![2, 2, 2], vec![0.5; 8]).unwrap().encode();
        let cut = cut.min(bytes.len() - 1);
        prop_assert!(Tensor::decode(&bytes[..cut], Path::new("t")).is_err());
    }

    #[test]
    fn colorized_labels_survive_png_round_trip(h in 1usize..20, w in 1usize..20, seed in any::<u64>()) {
        let labels = LabelMap::from_fn(h, w, 19, 255, |y, x| {
            let v = (seed >> ((y * w + x) % 60)) % 21;
            if v >= 19 { 255 } else { v as u8 }
        }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("l.png");
        write_label_map(&labels, &p).unwrap();
        let back = read_label_map(&p, 19, 255).unwrap();
        prop_assert_eq!(colorize_labels(&back, &STREET_PALETTE).unwrap(), colorize_labels(&labels, &STREET_PALETTE).unwrap());
    }
}
