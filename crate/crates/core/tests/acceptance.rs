//! One test per acceptance criterion. Timed criteria hold a shared lock so
//! wall-clock budgets are measured without other tests competing for CPU.

mod common;

use std::sync::Mutex;
use std::time::{Duration, Instant};

use affectlab::cardiac::{cardiac_peaks, cardiac_spectrogram_image, heart_rate, pnn50};
use affectlab::data::{load_manifest, Modality};
use affectlab::dsp::{welch_psd, BandDefinition};
use affectlab::eeg::{band_psd_features, mutual_information, pairwise_entropy_features, topo_from_powers};
use affectlab::eeg::{EntropyDirection, MutualInfoEstimatorConfig, PsdConfig, TOPO_GRID};
use affectlab::embedding::StubProvider;
use affectlab::gsr::{gsr_spectrogram_image, gsr_stat_features};
use affectlab::harness::*;
use affectlab::image::RgbImage;
use affectlab::layout::{ScalpLayout, MONTAGE_14, MONTAGE_32};
use affectlab::learn::{elm_train, ElmConfig, LstmModel};
use affectlab::Error;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

static TIMING: Mutex<()> = Mutex::new(());

fn timed<T>(budget: Duration, what: &str, f: impl FnOnce() -> T) -> T {
    let _guard = TIMING.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let out = f();
    let took = start.elapsed();
    eprintln!("{what}: {took:.2?} (budget {budget:?})");
    assert!(took < budget, "{what} took {took:?}, budget {budget:?}");
    out
}

fn gaussian_pair(rho: f64, n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let c = (1.0 - rho * rho).sqrt();
    (0..n)
        .map(|_| {
            let a: f64 = StandardNormal.sample(&mut r);
            let b: f64 = StandardNormal.sample(&mut r);
            (a, rho * a + c * b)
        })
        .unzip()
}

/// Mutual information on a 32×32 equal-width histogram spanning each
/// variable's range: the plug-in sum with the Miller-Madow correction
/// `(occupied cells - occupied rows - occupied columns + 1) / 2N`.
fn histogram_mi(x: &[f64], y: &[f64]) -> f64 {
    const B: usize = 32;
    let bin = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        v.iter()
            .map(|&a| (((a - lo) / (hi - lo) * B as f64) as usize).min(B - 1))
            .collect::<Vec<_>>()
    };
    let (bx, by) = (bin(x), bin(y));
    let mut joint = vec![[0usize; B]; B];
    for (&i, &j) in bx.iter().zip(&by) {
        joint[i][j] += 1;
    }
    let n = x.len() as f64;
    let px: Vec<f64> = joint.iter().map(|r| r.iter().sum::<usize>() as f64 / n).collect();
    let py: Vec<f64> = (0..B)
        .map(|j| joint.iter().map(|r| r[j]).sum::<usize>() as f64 / n)
        .collect();
    let mut mi = 0.0;
    for i in 0..B {
        for j in 0..B {
            if joint[i][j] > 0 {
                let p = joint[i][j] as f64 / n;
                mi += p * (p / (px[i] * py[j])).ln();
            }
        }
    }
    let occupied = |v: &[f64]| v.iter().filter(|&&p| p > 0.0).count() as f64;
    let cells = joint.iter().flatten().filter(|&&c| c > 0).count() as f64;
    mi - (cells - occupied(&px) - occupied(&py) + 1.0) / (2.0 * n)
}

#[test]
fn primary_01_entropy_oracle() {
    let rhos = [0.0, 0.5, 0.9];
    let cfg = MutualInfoEstimatorConfig::default();
    let estimates = timed(Duration::from_secs(10), "entropy oracle", || {
        rhos.iter()
            .map(|&rho| {
                let (x, y) = gaussian_pair(rho, 2000, 11);
                (mutual_information(&x, &y, &cfg).unwrap(), histogram_mi(&x, &y))
            })
            .collect::<Vec<_>>()
    });
    for (rho, (parzen, hist)) in rhos.iter().zip(&estimates) {
        eprintln!("rho {rho}: parzen {parzen:.4} histogram {hist:.4}");
        assert!(
            (parzen - hist).abs() < 0.1,
            "rho {rho}: parzen {parzen} histogram {hist}"
        );
    }
    assert!(
        estimates.windows(2).all(|w| w[1].0 > w[0].0),
        "not monotone: {estimates:?}"
    );
}

fn pnn50_oracle(rr_ms: &[i64]) -> f64 {
    let over = rr_ms.windows(2).filter(|w| (w[1] - w[0]).abs() > 50).count();
    100.0 * over as f64 / (rr_ms.len() - 1) as f64
}

#[test]
fn primary_02_pnn50_exact() {
    timed(Duration::from_secs(1), "pnn50 property", || {
        let mut r = ChaCha8Rng::seed_from_u64(50);
        let mut boundary_hits = 0;
        for case in 0..1000 {
            let n = r.gen_range(2..200);
            let mut rr_ms = vec![r.gen_range(400i64..1400)];
            for _ in 1..n {
                let prev = *rr_ms.last().unwrap();
                // a third of the steps land exactly on +-50 ms
                let step = match r.gen_range(0..3) {
                    0 => {
                        if r.gen_bool(0.5) {
                            50
                        } else {
                            -50
                        }
                    }
                    _ => r.gen_range(-120i64..=120),
                };
                rr_ms.push((prev + step).clamp(300, 2000));
            }
            boundary_hits += rr_ms.windows(2).filter(|w| (w[1] - w[0]).abs() == 50).count();
            let rr: Vec<f64> = rr_ms.iter().map(|&m| m as f64 / 1000.0).collect();
            let got = pnn50(&rr).unwrap();
            let want = pnn50_oracle(&rr_ms);
            assert!((got - want).abs() < 1e-9, "case {case}: {got} vs {want} for {rr_ms:?}");
        }
        assert!(boundary_hits > 1000);
    });
}

#[test]
fn primary_03_peaks_and_heart_rate() {
    timed(Duration::from_secs(1), "pulse trains", || {
        for bpm in [60.0, 75.0, 90.0] {
            let seconds = 60.0;
            let (x, n_beats) = common::pulse_train(bpm, seconds, 128.0);
            let t = common::rec(Modality::Ppg, vec!["PPG".into()], vec![x], 128.0);
            let peaks = cardiac_peaks(&t, 0).unwrap();
            assert_eq!(peaks.len(), n_beats, "{bpm} bpm");
            let hr = heart_rate(peaks.len(), t.duration_s());
            assert!((hr - bpm).abs() <= 1.0, "{bpm} bpm estimated as {hr}");
        }
    });
}

#[test]
fn primary_04_band_power() {
    timed(Duration::from_secs(1), "band power", || {
        let fs = 128.0;
        let bands = [
            BandDefinition::new("theta", 4.0, 7.0),
            BandDefinition::new("alpha", 7.0, 13.0),
            BandDefinition::new("beta", 13.0, 30.0),
        ];
        let total = BandDefinition::new("all", 4.0, 30.0);
        let unit = welch_psd(&common::sine(10.0, 1.0, 20.0, fs), fs, 1.0, 0.5).unwrap();
        let alpha = unit.band_power(&bands[1]);
        let all = unit.band_power(&total);
        assert!(alpha / all >= 0.99, "alpha share {}", alpha / all);
        let parts: f64 = bands.iter().map(|b| unit.band_power(b)).sum();
        assert!((parts - all).abs() <= 1e-9 * all);
        for amp in [0.5, 3.0, 20.0] {
            let scaled = welch_psd(&common::sine(10.0, amp, 20.0, fs), fs, 1.0, 0.5).unwrap();
            // bands holding only leakage are compared against the total
            for b in bands.iter().chain([&total]) {
                let want = amp * amp * unit.band_power(b);
                let got = scaled.band_power(b);
                let scale = if b.name == "alpha" || b.name == "all" {
                    want
                } else {
                    amp * amp * all
                };
                assert!((got - want).abs() <= 1e-6 * scale, "{} x{amp}: {got} vs {want}", b.name);
            }
        }
    });
}

fn golden_images() -> Vec<(&'static str, RgbImage)> {
    let layout = ScalpLayout::montage_32();
    let powers: Vec<[f64; 3]> = MONTAGE_32
        .iter()
        .map(|name| {
            let [u, v] = layout.position(name).unwrap();
            [
                1.0 + v + 0.3 * u * u,
                (1.2 - v).powi(2),
                0.5 + 0.4 * (u * 3.0).sin().abs(),
            ]
        })
        .collect();
    let topo = topo_from_powers(&powers, &layout, TOPO_GRID).unwrap();
    let (pulse, _) = common::pulse_train(72.0, 30.0, 128.0);
    let ppg = common::rec(Modality::Ppg, vec!["PPG".into()], vec![pulse], 128.0);
    let cardiac = cardiac_spectrogram_image(&ppg, 0).unwrap();
    let gsr = gsr_spectrogram_image(&common::fixture_gsr()).unwrap();
    vec![
        ("topo.png", topo),
        ("cardiac_spectrogram.png", cardiac),
        ("gsr_spectrogram.png", gsr),
    ]
}

#[test]
fn primary_05_golden_images() {
    let images = timed(Duration::from_secs(5), "golden images", golden_images);
    let dir = common::golden_dir();
    let bless = std::env::var_os("AFFECTLAB_BLESS").is_some();
    for (name, img) in images {
        let path = dir.join(name);
        if bless {
            img.save_png(&path).unwrap();
            continue;
        }
        let want = RgbImage::load_png(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!((img.width, img.height), (want.width, want.height), "{name}");
        let differing = (0..img.height)
            .flat_map(|y| (0..img.width).map(move |x| (x, y)))
            .filter(|&(x, y)| img.get(x, y) != want.get(x, y))
            .count();
        assert_eq!(differing, 0, "{name}: {differing} pixels differ");
    }
}

fn noise_eeg(channels: &[&str], seconds: f64, seed: u64) -> affectlab::data::TrialRecording {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let n = (seconds * 128.0) as usize;
    let samples = channels
        .iter()
        .map(|_| (0..n).map(|_| StandardNormal.sample(&mut r)).collect())
        .collect();
    common::rec(
        Modality::Eeg,
        channels.iter().map(|s| s.to_string()).collect(),
        samples,
        128.0,
    )
}

#[test]
fn primary_06_cardinalities() {
    let mi = MutualInfoEstimatorConfig::default();
    for (montage, layout, psd, pairs) in [
        (&MONTAGE_32[..], ScalpLayout::montage_32(), 96, 496),
        (&MONTAGE_14[..], ScalpLayout::montage_14(), 42, 91),
    ] {
        let t = noise_eeg(montage, 10.0, 3);
        assert_eq!(
            band_psd_features(&t, &layout, &PsdConfig::default()).unwrap().len(),
            psd
        );
        let ce = pairwise_entropy_features(&t, &mi, EntropyDirection::default()).unwrap();
        assert_eq!(ce.len(), pairs);
    }
    assert_eq!(gsr_stat_features(&common::fixture_gsr()).unwrap().len(), 8);

    // every family through the extraction harness, with per-fold PCA
    let dir = tempfile::tempdir().unwrap();
    let cfg = SynthConfig {
        n_subjects: 4,
        trials_per_subject: 10,
        trial_length_s: 10.0,
        montage: Montage::M14,
        modalities: SynthModalities {
            face_frames: true,
            ..Default::default()
        },
        seed: 6,
        ..Default::default()
    };
    synth_generate(&cfg, dir.path()).unwrap();
    let manifest = load_manifest(&dir.path().join("manifest.json")).unwrap();
    let sets = [
        FeatureSet::Eeg,
        FeatureSet::Cardiac,
        FeatureSet::Gsr,
        FeatureSet::Face1,
        FeatureSet::Face2,
    ];
    let provider = StubProvider::new(7);
    let ds = extract_dataset(
        &manifest,
        &sets,
        &ExtractionConfig::default(),
        MissingPolicy::default(),
        &provider,
        None,
    )
    .unwrap();
    assert_eq!(ds.trials.len(), 40);
    let lens: Vec<(Family, usize)> = ds.trials[0].blocks.iter().map(|(f, b)| (*f, b.len())).collect();
    let fixed = |fam: Family| lens.iter().find(|(f, _)| *f == fam).unwrap().1;
    assert_eq!(fixed(Family::EegPsd), 42);
    assert_eq!(fixed(Family::EegEntropy), 91);
    assert_eq!(fixed(Family::GsrStats), 8);
    assert_eq!(fixed(Family::FaceGeometry), 90);

    let spec = ExperimentSpec::new(sets.to_vec(), Target::Valence, Protocol::Loso {});
    let train: Vec<&TrialFeatures> = ds.trials.iter().collect();
    let labels: Vec<usize> = train
        .iter()
        .map(|t| Target::Valence.label(t).unwrap().unwrap())
        .collect();
    let fitted = FittedPipeline::fit(&train, &labels, 2, &spec, 1).unwrap();
    let deep: Vec<_> = fitted
        .feature_widths()
        .iter()
        .filter(|(f, _)| f.kind() == FamilyKind::Embedding)
        .collect();
    assert_eq!(deep.len(), 4, "{deep:?}");
    for (f, w) in deep {
        assert_eq!(*w, 30, "{f:?}");
    }
}

#[test]
fn primary_07_lstm_gradient_check() {
    timed(Duration::from_secs(30), "lstm gradient check", || {
        let model = LstmModel::new(4, &[6, 5], 3, 21).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(22);
        let seq: Vec<Vec<f64>> = (0..7)
            .map(|_| (0..4).map(|_| r.gen_range(-1.0..1.0)).collect())
            .collect();
        // move off the initial point so no gate sits exactly at zero
        let params: Vec<f64> = model.params.iter().map(|p| p + r.gen_range(-0.3..0.3)).collect();
        let (_, grad) = model.loss_and_grad(&params, &seq, 1);
        let eps = 1e-5;
        let mut worst = 0.0f64;
        for i in 0..params.len() {
            let mut p = params.clone();
            p[i] += eps;
            let up = model.loss_at(&p, &seq, 1);
            p[i] -= 2.0 * eps;
            let down = model.loss_at(&p, &seq, 1);
            let fd = (up - down) / (2.0 * eps);
            let rel = (fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-6);
            worst = worst.max(rel);
        }
        eprintln!("max relative error {worst:e} over {} parameters", params.len());
        assert!(worst < 1e-4, "max relative error {worst}");
    });
}

fn separable(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::new();
    let mut y = Vec::new();
    while x.len() < n {
        let p: Vec<f64> = (0..5).map(|_| r.gen_range(-1.0..1.0)).collect();
        let s = p[0] + 0.5 * p[1] - 0.3 * p[2];
        if s.abs() < 0.1 {
            continue;
        }
        y.push(usize::from(s > 0.0));
        x.push(p);
    }
    (x, y)
}

#[test]
fn primary_08_elm_separable() {
    let (x, y) = separable(40, 1);
    let cfg = ElmConfig {
        hidden: 200,
        seed: 5,
        ..Default::default()
    };
    let a = elm_train(&x, &y, 2, &cfg).unwrap();
    let correct = x
        .iter()
        .zip(&y)
        .filter(|(xi, &yi)| a.predict(xi).unwrap().0 == yi)
        .count();
    assert_eq!(correct, x.len());
    let b = elm_train(&x, &y, 2, &cfg).unwrap();
    assert_eq!(a, b);
}

fn synth_dataset(dir: &std::path::Path, cfg: &SynthConfig, sets: &[FeatureSet]) -> Dataset {
    synth_generate(cfg, dir).unwrap();
    let manifest = load_manifest(&dir.join("manifest.json")).unwrap();
    extract_dataset(
        &manifest,
        sets,
        &ExtractionConfig::default(),
        MissingPolicy::default(),
        &StubProvider::new(7),
        None,
    )
    .unwrap()
}

fn eeg_only(seed: u64, effect: f64, montage: Montage, id: &str) -> SynthConfig {
    SynthConfig {
        dataset_id: id.into(),
        montage,
        effects: default_effects(effect),
        modalities: SynthModalities {
            eeg: true,
            cardiac: None,
            gsr: false,
            landmarks: false,
            face_frames: false,
        },
        seed,
        ..Default::default()
    }
}

#[test]
fn primary_09_end_to_end_loso() {
    let sets = [FeatureSet::EegPsd, FeatureSet::EegTopo];
    timed(Duration::from_secs(300), "end-to-end LOSO", || {
        let planted_dir = tempfile::tempdir().unwrap();
        let planted = synth_dataset(planted_dir.path(), &eeg_only(1, 1.0, Montage::M32, "planted"), &sets);
        let null_dir = tempfile::tempdir().unwrap();
        let null = synth_dataset(null_dir.path(), &eeg_only(2, 0.0, Montage::M32, "null"), &sets);
        assert_eq!(planted.trials.len(), 200);
        assert_eq!(null.trials.len(), 200);

        let r = run_loso(
            &[&planted],
            &ExperimentSpec::new(sets.to_vec(), Target::Valence, Protocol::Loso {}),
        )
        .unwrap();
        eprintln!("planted valence: {:.1}%", r.evaluation.accuracy);
        assert!(
            r.evaluation.accuracy >= 90.0,
            "planted effect: {:.1}%",
            r.evaluation.accuracy
        );

        let r = run_loso(
            &[&null],
            &ExperimentSpec::new(sets.to_vec(), Target::Valence, Protocol::Loso {}),
        )
        .unwrap();
        let half = 100.0 * chance_halfwidth95(0.5, r.evaluation.n_samples());
        eprintln!("zero-effect 2-class: {:.1}% (50 +/- {half:.2})", r.evaluation.accuracy);
        assert!(
            (r.evaluation.accuracy - 50.0).abs() <= half,
            "{:.1}%",
            r.evaluation.accuracy
        );

        let r = run_loso(
            &[&null],
            &ExperimentSpec::new(sets.to_vec(), Target::Emotion, Protocol::Loso {}),
        )
        .unwrap();
        let half = 100.0 * chance_halfwidth95(0.25, r.evaluation.n_samples());
        eprintln!("zero-effect 4-class: {:.1}% (25 +/- {half:.2})", r.evaluation.accuracy);
        assert!(
            (r.evaluation.accuracy - 25.0).abs() <= half,
            "{:.1}%",
            r.evaluation.accuracy
        );
    });
}

#[test]
fn primary_10_purity() {
    let small = |seed, montage, id: &str| SynthConfig {
        n_subjects: 4,
        trials_per_subject: 8,
        trial_length_s: 10.0,
        ..eeg_only(seed, 1.0, montage, id)
    };
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let sets_all = [FeatureSet::EegPsd, FeatureSet::EegTopo];
    let a = synth_dataset(dir_a.path(), &small(3, Montage::M32, "a"), &sets_all);
    let b = synth_dataset(dir_b.path(), &small(4, Montage::M14, "b"), &sets_all);

    // scoring the same experiment twice gives the same report
    let spec = ExperimentSpec::new(sets_all.to_vec(), Target::Valence, Protocol::Loso {});
    let datasets = [a.clone()];
    let first = run_experiment(&datasets, &spec).unwrap();
    let second = run_experiment(&datasets, &spec).unwrap();
    assert_eq!(first, second);
    assert_eq!(first.to_json(), second.to_json());

    // test trials are scored independently: order and duplicates do not matter
    let (test, train): (Vec<&TrialFeatures>, Vec<&TrialFeatures>) =
        a.trials.iter().partition(|t| t.subject_id == a.trials[0].subject_id);
    let labels: Vec<usize> = train
        .iter()
        .map(|t| Target::Valence.label(t).unwrap().unwrap())
        .collect();
    let fitted = FittedPipeline::fit(&train, &labels, 2, &spec, 9).unwrap();
    let alone: Vec<usize> = test.iter().map(|t| fitted.predict(t).unwrap()).collect();
    let mut batch: Vec<&TrialFeatures> = test.iter().rev().copied().collect();
    batch.extend(test.iter().copied());
    let again: Vec<usize> = batch.iter().map(|t| fitted.predict(t).unwrap()).collect();
    let n = test.len();
    assert_eq!(&again[n..], &alone[..]);
    assert_eq!(again[..n].iter().rev().copied().collect::<Vec<_>>(), alone);

    // montage-dependent features cannot cross a 32 -> 14 channel transfer
    let transfer = |sets: &[FeatureSet]| {
        let mut s = ExperimentSpec::new(
            sets.to_vec(),
            Target::Valence,
            Protocol::Transfer {
                train_sets: vec!["a".into()],
                test_set: "b".into(),
            },
        );
        s.seed = 4;
        s
    };
    let a_psd = synth_subset(&a, &[Family::EegPsd]);
    let b_psd = synth_subset(&b, &[Family::EegPsd]);
    match run_transfer(&[&a_psd], &b_psd, &transfer(&[FeatureSet::EegPsd])) {
        Err(Error::FeatureSetMismatch { block, .. }) => assert_eq!(block, "eeg_psd"),
        other => panic!("expected a feature-set mismatch, got {other:?}"),
    }
    let a_topo = synth_subset(&a, &[Family::EegTopo]);
    let b_topo = synth_subset(&b, &[Family::EegTopo]);
    let r = run_transfer(&[&a_topo], &b_topo, &transfer(&[FeatureSet::EegTopo])).unwrap();
    assert_eq!(r.evaluation.n_samples(), b.trials.len());
}

fn synth_subset(d: &Dataset, keep: &[Family]) -> Dataset {
    let mut out = d.clone();
    for t in &mut out.trials {
        t.blocks.retain(|(f, _)| keep.contains(f));
    }
    out
}
