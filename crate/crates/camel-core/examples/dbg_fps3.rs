use camel_core::corpus::*;
use camel_core::device::*;
use camel_core::neural::TrainingConfig;
use camel_core::predictors::*;
use camel_core::search::*;

fn main() {
    let corpus = generate_corpus(11, 40, &SizeProfile::default()).unwrap();
    let dev = preset_device("xiaomi9").unwrap();
    let train: Corpus = Corpus { seed: 11, pages: corpus.pages.iter().enumerate().filter(|(i,_)| i % 5 != 0).map(|(_,p)| p.clone()).collect() };
    let sample: Vec<&PageDescriptor> = train.pages.iter().take(20).collect();
    let frontier = build_frontier(&dev, &sample, &[500.0, 1500.0, 3000.0], &erf_ladder_desk(), 1).unwrap();

    for (out_dim, width, l2, epochs) in [
        (24usize, 48usize, 1e-5, 120usize),
        (12, 48, 1e-5, 120),
        (8, 48, 1e-5, 120),
        (8, 48, 1e-4, 200),
        (12, 32, 1e-4, 200),
        (8, 64, 1e-4, 200),
    ] {
        let mut cfg = PredictorConfig::desk(11);
        cfg.out_dim = out_dim;
        cfg.hidden_width = width;
        cfg.fps_training = TrainingConfig { epochs, learning_rate: 3e-3, l2_lambda: l2, batch_size: 64, seed: 11, ..Default::default() };
        let fps = train_fps_predictor(&train, &dev, &frontier, &cfg, 1).unwrap();
        let model = fps.model(GestureKind::Scroll).unwrap();
        let mut bias = 0.0; let mut abs = 0.0; let mut n = 0;
        for page in corpus.pages.iter().enumerate().filter(|(i,_)| i % 5 == 0).map(|(_,p)| p) {
            let sidx = page.slice_index_at(page.page_height_px/2).unwrap();
            let slice = &page.viewport_profiles[sidx];
            let feats = model.pipeline.features(page, sidx).unwrap();
            for &speed in &[400.0, 1200.0, 2000.0] {
                let g = Gesture::new(GestureKind::Scroll, speed, 1.0).unwrap();
                for e in &frontier.entries {
                    let input = FpsInput { viewport_features: feats.clone(), speed_px_s: speed, config: e.config.clone(), render_cluster: e.config.render_placement };
                    let p = fps.predict_fps(GestureKind::Scroll, &input).unwrap();
                    let t = dev.true_fps(page, slice, &g, &e.config, e.config.render_placement).unwrap();
                    bias += p - t; abs += (p - t).abs(); n += 1;
                }
            }
        }
        println!("out_dim={out_dim} w={width} l2={l2} ep={epochs}: held-out bias={:+.2} mae={:.2}", bias/n as f64, abs/n as f64);
    }
}
