use camel_core::corpus::*;
use camel_core::device::*;
use camel_core::harness::*;
use camel_core::predictors::*;
use camel_core::search::*;

fn main() {
    let corpus = generate_corpus(11, 40, &SizeProfile::default()).unwrap();
    let cfg = PredictorConfig::desk(11);
    let dev = preset_device("xiaomi9").unwrap();
    let train: Corpus = Corpus { seed: 11, pages: corpus.pages.iter().enumerate().filter(|(i,_)| i % 5 != 0).map(|(_,p)| p.clone()).collect() };
    let sample: Vec<&PageDescriptor> = train.pages.iter().take(20).collect();
    let frontier = build_frontier(&dev, &sample, &[500.0, 1500.0, 3000.0], &cfg.erfs, 1).unwrap();
    let user = group_representative(UserGroup::Moderate);
    let qoe = train_qoe_predictor(&train, &user, &cfg, 1).unwrap();
    let fps = train_fps_predictor(&train, &dev, &frontier, &cfg, 1).unwrap();
    let stack = TrainedStack { qoe, fps, frontier };

    // violation window histogram across held-out sessions
    let mut hist = vec![0usize; 40];
    let mut total = 0usize;
    let mut sessions = 0usize;
    for page in corpus.pages.iter().enumerate().filter(|(i,_)| i % 5 == 0).map(|(_,p)| p) {
        for kind in GestureKind::ALL {
            for &speed in cfg.speeds.for_gesture(kind) {
                let gesture = Gesture::new(kind, speed, gesture_duration(kind)).unwrap();
                let m = run_session(page, &gesture, &user, &dev, &stack, Mode::Camel, 1.0).unwrap();
                sessions += 1;
                // recompute per-window violations from the trace
                let mut offset = 0u32;
                for (w, &f) in m.fps_trace.iter().enumerate() {
                    let slice = page.slice_at(offset).unwrap();
                    let thr = user.threshold(page, slice, kind, speed);
                    if f < thr { hist[w.min(39)] += 1; total += 1; }
                    if kind != GestureKind::Pinch {
                        offset = ((offset as f64) + speed*0.05).min((page.page_height_px-1) as f64) as u32;
                    }
                }
            }
        }
    }
    println!("sessions={sessions} total_violation_windows={total}");
    println!("first 12 window counts: {:?}", &hist[..12]);
    println!("sum w0-2={} w3+={}", hist[..3].iter().sum::<usize>(), hist[3..].iter().sum::<usize>());
}
