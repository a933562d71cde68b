use camel_core::corpus::*;
use camel_core::device::*;
use camel_core::predictors::*;
use camel_core::search::*;

fn main() {
    let corpus = generate_corpus(11, 40, &SizeProfile::default()).unwrap();
    let dev = preset_device("xiaomi9").unwrap();
    let train: Corpus = Corpus { seed: 11, pages: corpus.pages.iter().enumerate().filter(|(i,_)| i % 5 != 0).map(|(_,p)| p.clone()).collect() };
    let sample: Vec<&PageDescriptor> = train.pages.iter().take(20).collect();
    let frontier = build_frontier(&dev, &sample, &[500.0, 1500.0, 3000.0], &erf_ladder_desk(), 1).unwrap();

    for (width, epochs, lr) in [(48usize, 120usize, 3e-3), (64, 120, 3e-3), (64, 200, 2e-3), (96, 120, 2e-3)] {
        let mut cfg = PredictorConfig::desk(11);
        cfg.hidden_width = width;
        cfg.fps_training.epochs = epochs;
        cfg.fps_training.learning_rate = lr;
        let t0 = std::time::Instant::now();
        let fps = train_fps_predictor(&train, &dev, &frontier, &cfg, 1).unwrap();
        let dt = t0.elapsed().as_secs_f64();

        // held-out bias/error over frontier configs
        let model = fps.model(GestureKind::Scroll).unwrap();
        let mut bias = 0.0; let mut abs = 0.0; let mut over = 0; let mut n = 0;
        for (i, page) in corpus.pages.iter().enumerate().filter(|(i,_)| i % 5 == 0) {
            let sidx = page.slice_index_at(page.page_height_px/2).unwrap();
            let slice = &page.viewport_profiles[sidx];
            let feats = model.pipeline.features(page, sidx).unwrap();
            for &speed in &[400.0, 1200.0, 2000.0] {
                let g = Gesture::new(GestureKind::Scroll, speed, 1.0).unwrap();
                for e in &frontier.entries {
                    let prev = if i % 2 == 0 { e.config.render_placement } else { e.config.render_placement.other() };
                    let input = FpsInput { viewport_features: feats.clone(), speed_px_s: speed, config: e.config.clone(), render_cluster: prev };
                    let p = fps.predict_fps(GestureKind::Scroll, &input).unwrap();
                    let t = dev.true_fps(page, slice, &g, &e.config, prev).unwrap();
                    bias += p - t; abs += (p - t).abs(); n += 1;
                    if p > t + 0.5 { over += 1; }
                }
            }
        }
        println!("w={width} ep={epochs} lr={lr}: train {dt:.1}s/3nets  bias={:+.2} mae={:.2} over={:.0}%", bias/n as f64, abs/n as f64, 100.0*over as f64/n as f64);
    }
}
