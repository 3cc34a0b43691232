use ornn_core::binfmt::{read_record, write_features};
use ornn_core::data::{load_idx, split, stratified_subset, write_idx_images, write_idx_labels};
use ornn_core::{Dataset, FeatureMatrix, GrayImage, LabelVector};
use proptest::prelude::*;

fn dataset(labels: &[usize], classes: usize) -> Dataset {
    let images = labels.iter().enumerate().map(|(i, _)| GrayImage::new(2, 2, vec![i as u8; 4]).unwrap()).collect();
    Dataset::new("prop", images, LabelVector::new(labels.to_vec(), classes).unwrap()).unwrap()
}

fn labels_strategy() -> impl Strategy<Value = (Vec<usize>, usize)> {
    (2usize..5).prop_flat_map(|c| {
        (prop::collection::vec(2usize..30, c), Just(c)).prop_map(|(counts, c)| {
            let labels = counts.iter().enumerate().flat_map(|(k, &n)| std::iter::repeat_n(k, n)).collect();
            (labels, c)
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn split_is_a_stratified_partition((labels, c) in labels_strategy(), f in 0.1f64..0.9, seed in any::<u64>()) {
        let ds = dataset(&labels, c);
        let sp = split(&ds, f, seed).unwrap();
        let mut all: Vec<usize> = sp.train.iter().chain(&sp.test).copied().collect();
        all.sort();
        prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
        for k in 0..c {
            let n = labels.iter().filter(|&&l| l == k).count();
            let train = sp.train.iter().filter(|&&i| labels[i] == k).count();
            prop_assert_eq!(train, (f * n as f64).floor() as usize);
        }
        prop_assert_eq!(split(&ds, f, seed).unwrap(), sp);
    }

    #[test]
    fn subset_is_balanced_and_traceable((labels, c) in labels_strategy(), per in 1usize..3, seed in any::<u64>()) {
        let ds = dataset(&labels, c);
        let sub = stratified_subset(&ds, per * c, seed).unwrap();
        prop_assert_eq!(sub.labels().class_counts(), vec![per; c]);
        for (i, &o) in sub.origin().iter().enumerate() {
            prop_assert_eq!(sub.image(i), ds.image(o));
            prop_assert_eq!(sub.labels().get(i), labels[o]);
        }
        prop_assert!(sub.origin().windows(2).all(|w| w[0] < w[1]));
        let again = stratified_subset(&ds, per * c, seed).unwrap();
        prop_assert_eq!(again.origin(), sub.origin());
    }

    #[test]
    fn oversized_or_uneven_subsets_are_rejected((labels, c) in labels_strategy(), seed in any::<u64>()) {
        let ds = dataset(&labels, c);
        let smallest = (0..c).map(|k| labels.iter().filter(|&&l| l == k).count()).min().unwrap();
        prop_assert!(stratified_subset(&ds, (smallest + 1) * c, seed).is_err());
        prop_assert!(stratified_subset(&ds, c + 1, seed).is_err());
    }

    #[test]
    fn idx_round_trip(h in 1usize..6, w in 1usize..6, n in 1usize..10, seed in any::<u8>()) {
        let dir = tempfile::tempdir().unwrap();
        let images: Vec<GrayImage> = (0..n)
            .map(|i| GrayImage::new(h, w, (0..h * w).map(|k| (k as u8).wrapping_mul(seed).wrapping_add(i as u8)).collect()).unwrap())
            .collect();
        let labels: Vec<u8> = (0..n).map(|i| (i % 3) as u8).collect();
        write_idx_images(&dir.path().join("x"), &images).unwrap();
        write_idx_labels(&dir.path().join("y"), &labels).unwrap();
        let ds = load_idx(&dir.path().join("x"), &dir.path().join("y")).unwrap();
        prop_assert_eq!(ds.len(), n);
        for i in 0..n {
            prop_assert_eq!(ds.image(i), &images[i]);
            prop_assert_eq!(ds.labels().get(i), labels[i] as usize);
        }
    }

    #[test]
    fn feature_records_round_trip(rows in 1usize..8, cols in 1usize..8, scale in -1e3f64..1e3) {
        let data: Vec<f64> = (0..rows * cols).map(|k| ((k as f64 * scale) as f32) as f64).collect();
        let x = FeatureMatrix::new(rows, cols, data).unwrap();
        let mut buf = Vec::new();
        write_features(&mut buf, &x).unwrap();
        prop_assert_eq!(buf.len(), 16 + 4 * rows * cols);
        prop_assert_eq!(read_record(&mut buf.as_slice()).unwrap().into_features().unwrap(), x);
    }
}
