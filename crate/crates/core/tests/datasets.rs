use posdelay::datasets::*;
use posdelay::SampleEvents;

/// Sum over the spikes of `a` of the distance to the nearest spike of the
/// same input in `b`, capped at `cap` when there is none.
fn one_sided(a: &[(usize, usize)], b: &[(usize, usize)], cap: f64) -> f64 {
    a.iter()
        .map(|&(t, i)| {
            b.iter().filter(|e| e.1 == i).map(|e| (e.0 as f64 - t as f64).abs()).fold(cap, f64::min)
        })
        .sum()
}

fn spike_distance(a: &[(usize, usize)], b: &[(usize, usize)]) -> f64 {
    one_sided(a, b, 10.0) + one_sided(b, a, 10.0)
}

#[test]
fn nearest_template_classifies_jittered_patterns() {
    let cfg = PatternConfig { jitter_std: 1.0, ..PatternConfig::new(20, 5, 40, 3) };
    let ds = gen_patterns(&cfg).unwrap();
    let templates = pattern_templates(&cfg);
    let correct = ds
        .samples
        .iter()
        .filter(|s| {
            let best = (0..templates.len())
                .min_by(|&x, &y| spike_distance(&s.events, &templates[x]).total_cmp(&spike_distance(&s.events, &templates[y])))
                .unwrap();
            best == s.label
        })
        .count();
    assert!(correct as f64 / ds.len() as f64 > 0.95, "{correct} / {}", ds.len());
}

#[test]
fn generators_are_deterministic_in_seed() {
    let p = PatternConfig { jitter_std: 2.0, drop_prob: 0.1, ..PatternConfig::new(8, 3, 5, 11) };
    assert_eq!(gen_patterns(&p).unwrap(), gen_patterns(&p).unwrap());
    assert_ne!(gen_patterns(&p).unwrap(), gen_patterns(&PatternConfig { seed: 12, ..p.clone() }).unwrap());
    let i = IntervalConfig::new(6, vec![5, 15, 25, 35], 5, 2);
    assert_eq!(gen_interval_task(&i).unwrap(), gen_interval_task(&i).unwrap());
}

#[test]
fn interval_gaps_stay_within_jitter() {
    let cfg = IntervalConfig::new(5, vec![5, 15, 25, 35], 30, 4);
    let ds = gen_interval_task(&cfg).unwrap();
    assert_eq!(ds.class_counts(), vec![30; 4]);
    for s in &ds.samples {
        let mut times: Vec<usize> = s.events.iter().map(|e| e.0).collect();
        times.sort_unstable();
        times.dedup();
        assert_eq!(times.len(), 2);
        assert!(times[0] <= cfg.max_onset);
        assert!((times[1] - times[0]).abs_diff(cfg.gaps[s.label]) <= cfg.jitter);
    }
}

#[test]
fn generated_dataset_round_trips_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.jsonl");
    let ds = gen_patterns(&PatternConfig { jitter_std: 1.5, drop_prob: 0.2, ..PatternConfig::new(12, 4, 6, 5) }).unwrap();
    save_events(&ds, &path).unwrap();
    assert_eq!(load_events(&path).unwrap(), ds);
    let empty = EventDataset { n_in: 3, n_classes: 2, steps: 9, split: Split::Test, samples: vec![], meta: None };
    save_events(&empty, &path).unwrap();
    assert_eq!(load_events(&path).unwrap(), empty);
}

#[test]
fn hand_written_file_parses() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/two_samples.jsonl");
    let ds = load_events(&path).unwrap();
    let expected = EventDataset {
        n_in: 3,
        n_classes: 2,
        steps: 20,
        split: Split::Test,
        samples: vec![
            SampleEvents { label: 1, events: vec![(0, 2), (4, 0), (4, 1)] },
            SampleEvents { label: 0, events: vec![] },
        ],
        meta: None,
    };
    assert_eq!(ds, expected);
}

#[test]
fn unknown_header_keys_are_rejected() {
    let text = "{\"n_in\":2,\"T\":10,\"n_classes\":2,\"bogus\":1}\n";
    let err = read_events(text.as_bytes()).unwrap_err().to_string();
    assert!(err.contains("bogus") && err.contains("line 1"), "{err}");
}

#[test]
fn splits_are_disjoint_and_deterministic() {
    let samples: Vec<SampleEvents> = (0..50).map(|k| SampleEvents { label: k % 3, events: vec![(k, 0)] }).collect();
    let ds = EventDataset { n_in: 1, n_classes: 3, steps: 60, split: Split::Train, samples, meta: None };
    let (tr, te) = ds.split(0.3, 7);
    assert_eq!((tr.len(), te.len()), (35, 15));
    assert_eq!((tr.split, te.split), (Split::Train, Split::Test));
    assert!(tr.samples.iter().all(|s| !te.samples.contains(s)));
    let mut all: Vec<_> = tr.samples.iter().chain(&te.samples).map(|s| s.events[0].0).collect();
    all.sort_unstable();
    assert_eq!(all, (0..50).collect::<Vec<_>>());
    assert_eq!(ds.split(0.3, 7), (tr.clone(), te.clone()));
    assert_ne!(ds.split(0.3, 8).1, te);
}

#[test]
fn generated_files_carry_their_provenance() {
    let cfg = IntervalConfig::new(4, vec![5, 15], 3, 9);
    let meta = gen_interval_task(&cfg).unwrap().meta.unwrap();
    assert_eq!((meta.generator.as_str(), meta.seed), ("interval", 9));
    assert_eq!(meta.config_hash, posdelay::training::config_hash(&cfg));
    assert_eq!(serde_json::from_value::<IntervalConfig>(meta.config).unwrap(), cfg);
}
