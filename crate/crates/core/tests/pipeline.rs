use std::path::Path;

use proptest::prelude::*;

use lumiscore::config::PipelineConfig;
use lumiscore::curve::{BrightnessCurve, CurveChannel, CurveSet};
use lumiscore::midi::{notes_balanced, read_smf, write_smf};
use lumiscore::pipeline::{analyze, compose_report};
use lumiscore::synth::piecewise_linear;

fn curves(values: Vec<f64>) -> CurveSet {
    let mut set = CurveSet::new(None);
    set.insert(BrightnessCurve::new(CurveChannel::Luma, 24.0, 0.0, values).unwrap()).unwrap();
    set
}

fn knots() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.2f64..4.0, 0.0f64..=1.0), 2..10).prop_map(|steps| {
        let mut t = 0.0;
        steps
            .into_iter()
            .map(|(dt, v)| {
                let k = (t, v);
                t += dt;
                k
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn analysis_and_score_invariants(knots in knots(), seed in any::<u64>()) {
        let duration = knots.last().unwrap().0 + 1.0;
        let values = piecewise_linear(&knots, 24.0, duration);
        let cfg = PipelineConfig { seed, ..PipelineConfig::default() };
        let report = analyze(&curves(values), &cfg, Path::new("curves.csv")).unwrap();

        let segs = &report.segments;
        prop_assert_eq!(segs[0].start_idx, 0);
        prop_assert_eq!(segs.last().unwrap().end_idx, report.analysis_curve.values.len());
        for w in segs.windows(2) {
            prop_assert_eq!(w[0].end_idx, w[1].start_idx);
        }

        let score = compose_report(&report, &cfg).unwrap();
        let [low, high] = cfg.harmony.register.map(i32::from);
        for n in &score.notes {
            prop_assert!((low - 12..=high + 12).contains(&i32::from(n.pitch)), "{:?}", n);
            prop_assert!((1..=127).contains(&n.velocity));
            prop_assert!(n.onset >= 0.0 && n.duration > 0.0);
            prop_assert!(n.onset + n.duration <= score.duration + 1.0 + 1e-9);
        }
        prop_assert!(score.notes.windows(2).all(|w| w[0].onset <= w[1].onset));

        let bytes = write_smf(&score);
        let parsed = read_smf(&bytes).unwrap();
        prop_assert!(notes_balanced(&parsed.events));
        prop_assert_eq!(write_smf(&compose_report(&report, &cfg).unwrap()), bytes);
    }

    #[test]
    fn report_json_round_trips(knots in knots()) {
        let duration = knots.last().unwrap().0 + 1.0;
        let values = piecewise_linear(&knots, 24.0, duration);
        let report = analyze(&curves(values), &PipelineConfig::default(), Path::new("curves.csv")).unwrap();
        let text = report.to_json();
        let back = lumiscore::report::AnalysisReport::from_json(&text).unwrap();
        prop_assert_eq!(back.to_json(), text);
    }
}
