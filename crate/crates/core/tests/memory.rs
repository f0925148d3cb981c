use proptest::prelude::*;
use sct_core::memory::{self, Action, MemoryConfig, MemoryEntry, MemoryStore, SharedStore, SuccessImage, VisualFeature};
use sct_core::perturb::{rbf_weights, GaussianStream};
use sct_core::Error;

fn small() -> MemoryConfig {
    MemoryConfig {
        feature_dim: 4,
        image_width: 2,
        image_height: 2,
        entry_capacity: 6,
        image_capacity: 2,
        ..MemoryConfig::default()
    }
}

fn entry(episode: &str, step: u64, f: [f64; 4], a: f64) -> MemoryEntry {
    MemoryEntry {
        feature: VisualFeature::new(f.to_vec()).unwrap(),
        action: Action::new([a; 7]).unwrap(),
        episode_id: episode.into(),
        step_index: step,
    }
}

fn image(episode: &str, v: f64) -> SuccessImage {
    SuccessImage::new(2, 2, vec![v, 0.1, 0.2, 0.3], episode).unwrap()
}

fn record(store: &mut MemoryStore, episode: &str, steps: u64) {
    let entries = (0..steps).map(|s| entry(episode, s, [1.0, s as f64, 0.5, 0.0], 0.1)).collect();
    store.record_success(entries, image(episode, 0.9)).unwrap();
}

#[test]
fn round_trip_is_exact() {
    let mut s = MemoryStore::new(small()).unwrap();
    record(&mut s, "a", 2);
    record(&mut s, "b", 3);
    let text = memory::save_to_string(&s).unwrap();
    let back = memory::load_from_str(&text, small()).unwrap();
    assert_eq!(back, s);
    assert_eq!(memory::save_to_string(&back).unwrap(), text);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bank.jsonl");
    memory::save(&s, &path).unwrap();
    assert_eq!(memory::load(&path, small()).unwrap(), s);
}

#[test]
fn empty_file_is_an_empty_store() {
    let s = memory::load_from_str("", small()).unwrap();
    assert!(s.is_empty());
    assert!(memory::load_from_str("\n\n", small()).unwrap().is_empty());
}

#[test]
fn eviction_is_first_in_first_out() {
    let mut s = MemoryStore::new(small()).unwrap();
    record(&mut s, "a", 3);
    record(&mut s, "b", 2);
    record(&mut s, "c", 3);
    assert_eq!(s.entry_count(), 6);
    assert_eq!(s.image_count(), 2);
    assert_eq!(s.entries_for("a").count(), 1);
    assert_eq!(s.entries_for("a").next().unwrap().step_index, 2);
    let snap = s.snapshot();
    let ids: Vec<&str> = snap.images().iter().map(|i| i.episode_id()).collect();
    assert_eq!(ids, ["b", "c"]);
}

#[test]
fn snapshots_are_isolated_from_later_writes() {
    let shared = SharedStore::new(MemoryStore::new(small()).unwrap());
    shared.write(|s| record(s, "a", 2));
    let before = shared.snapshot();
    shared.write(|s| record(s, "b", 2));
    assert_eq!(before.entries().len(), 2);
    assert_eq!(shared.snapshot().entries().len(), 4);
    shared.write(|s| s.clear());
    assert_eq!(before.images().len(), 1);
}

#[test]
fn rejected_record_leaves_store_unchanged() {
    let mut s = MemoryStore::new(small()).unwrap();
    record(&mut s, "a", 2);
    let before = s.clone();
    let bad = vec![entry("b", 0, [1.0, 0.0, 0.0, 0.0], 0.1), MemoryEntry {
        feature: VisualFeature::new(vec![1.0, 0.0]).unwrap(),
        ..entry("b", 1, [1.0; 4], 0.1)
    }];
    let err = s.record_success(bad, image("b", 0.5)).unwrap_err().to_string();
    assert!(err.contains('2') && err.contains('4'), "{err}");
    assert_eq!(s, before);
    assert!(s.record_success(Vec::new(), image("c", 0.5)).is_err());
    let out_of_bounds = vec![MemoryEntry {
        action: Action::new([2.0; 7]).unwrap(),
        ..entry("d", 0, [1.0; 4], 0.0)
    }];
    assert!(s.record_success(out_of_bounds, image("d", 0.5)).is_err());
    assert_eq!(s, before);
}

#[test]
fn malformed_lines_report_their_line_number() {
    let mut s = MemoryStore::new(small()).unwrap();
    record(&mut s, "a", 2);
    let text = memory::save_to_string(&s).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_owned).collect();
    lines[2] = lines[2].replacen("\"action\":[", "\"action\":[0.1,", 1);
    match memory::load_from_str(&lines.join("\n"), small()) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
    let mut garbage = text.lines().map(str::to_owned).collect::<Vec<_>>();
    garbage.insert(2, "{not json".into());
    let err = memory::load_from_str(&garbage.join("\n"), small()).unwrap_err();
    assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    assert!(err.to_string().contains(":3:"), "{err}");
}

#[test]
fn header_dimension_mismatch_names_both_lengths() {
    let mut s = MemoryStore::new(small()).unwrap();
    record(&mut s, "a", 1);
    let text = memory::save_to_string(&s).unwrap();
    let wider = MemoryConfig { feature_dim: 9, ..small() };
    let msg = memory::load_from_str(&text, wider).unwrap_err().to_string();
    assert!(msg.contains('4') && msg.contains('9'), "{msg}");
    let bigger = MemoryConfig { image_width: 3, ..small() };
    let msg = memory::load_from_str(&text, bigger).unwrap_err().to_string();
    assert!(msg.contains("2x2") && msg.contains("3x2"), "{msg}");
}

#[test]
fn load_error_carries_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.jsonl");
    std::fs::write(&path, "{\"format\":\"other\"}\n").unwrap();
    let msg = memory::load(&path, small()).unwrap_err().to_string();
    assert!(msg.contains("broken.jsonl:1:"), "{msg}");
    assert!(memory::load(dir.path().join("missing"), small()).is_err());
}

fn random_store(seed: u64, episodes: usize) -> MemoryStore {
    let mut g = GaussianStream::new(seed);
    let mut s = MemoryStore::new(MemoryConfig { entry_capacity: 40, image_capacity: 5, ..small() }).unwrap();
    for e in 0..episodes {
        let id = format!("ep{e}");
        let entries = (0..1 + e % 4)
            .map(|k| MemoryEntry {
                feature: VisualFeature::new((0..4).map(|_| g.standard_normal() + 0.01).collect()).unwrap(),
                action: Action::new(std::array::from_fn(|_| 2.0 * g.uniform() - 1.0)).unwrap(),
                episode_id: id.clone(),
                step_index: k as u64,
            })
            .collect();
        let img = SuccessImage::new(2, 2, (0..4).map(|_| g.uniform()).collect(), id).unwrap();
        s.record_success(entries, img).unwrap();
    }
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn any_store_survives_a_round_trip(seed in any::<u64>(), episodes in 0usize..25) {
        let s = random_store(seed, episodes);
        let back = memory::load_from_str(&memory::save_to_string(&s).unwrap(), s.config().clone()).unwrap();
        prop_assert_eq!(back, s);
    }

    #[test]
    fn snapshot_kernel_weights_equal_bank_weights(seed in any::<u64>(), episodes in 0usize..25, gamma in 0.01f64..50.0) {
        let s = random_store(seed, episodes);
        let snap = s.snapshot();
        let current = VisualFeature::new(vec![0.3, -0.1, 0.7, 0.2]).unwrap();
        let a = snap.kernel_weights(&current, gamma).unwrap();
        let b = rbf_weights(&current, snap.entries(), gamma).unwrap();
        prop_assert_eq!(a.iter().map(|w| w.to_bits()).collect::<Vec<_>>(), b.iter().map(|w| w.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn capacities_are_never_exceeded(seed in any::<u64>(), episodes in 0usize..60) {
        let s = random_store(seed, episodes);
        prop_assert!(s.entry_count() <= 40 && s.image_count() <= 5);
    }
}
