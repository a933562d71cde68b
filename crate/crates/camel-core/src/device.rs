//! Synthetic device and user oracles: deterministic parametric models that
//! stand in for hardware measurement and human raters, supplying every
//! training label and evaluation ground truth.
//!
//! Frame cost is linear in page statistics; pipeline throughput divides work
//! between the rendering cluster, the other cluster (main-thread share) and
//! the GPU. Dynamic cluster power follows the first-order DVFS law k*f^3.

use serde::{Deserialize, Serialize};

use crate::corpus::{Gesture, GestureKind, PageDescriptor, ViewportSlice};
use crate::error::{Error, Result};
use crate::rng;
use crate::search::{Cluster, ProcessingConfiguration};

/// Weights mapping page statistics to per-frame work.
/// CPU costs are in Mcycles, GPU costs in Mcycles on the GPU clock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameCostCoeffs {
    pub base_mcycles: f64,
    pub per_dom_node: f64,
    pub per_image_fraction: f64,
    pub per_speed_kpx: f64,
    /// Fraction of render cost charged to the non-render cluster.
    pub main_thread_share: f64,
    pub gpu_base_mcycles: f64,
    pub gpu_per_mem_mb: f64,
    pub gpu_per_image_fraction: f64,
    /// Render cost normalizer for the utilization factor in the power model.
    pub reference_mcycles: f64,
}

impl Default for FrameCostCoeffs {
    fn default() -> Self {
        FrameCostCoeffs {
            base_mcycles: 0.4,
            per_dom_node: 0.0006,
            per_image_fraction: 1.0,
            per_speed_kpx: 0.3,
            main_thread_share: 0.3,
            gpu_base_mcycles: 0.3,
            gpu_per_mem_mb: 0.06,
            gpu_per_image_fraction: 0.4,
            reference_mcycles: 4.0,
        }
    }
}

/// A big.LITTLE platform with its frequency ladders and power coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceModel {
    pub name: String,
    /// Available frequencies, strictly increasing, in GHz.
    pub big_freqs_ghz: Vec<f64>,
    pub little_freqs_ghz: Vec<f64>,
    /// Available GPU frequencies, strictly increasing, in MHz.
    pub gpu_freqs_mhz: Vec<f64>,
    /// Dynamic power coefficients, W/GHz^3.
    pub kappa_big: f64,
    pub kappa_little: f64,
    /// Static power per powered cluster, W.
    pub static_big_w: f64,
    pub static_little_w: f64,
    /// Linearized GPU power, W/MHz.
    pub gpu_w_per_mhz: f64,
    /// Extra frame time charged when the render process switches cluster,
    /// as a fraction of one frame time.
    pub migration_penalty: f64,
    pub frame_cost: FrameCostCoeffs,
    pub fps_cap: f64,
    pub noise_sigma: f64,
    pub noise_seed: u64,
}

impl DeviceModel {
    pub fn validate(&self) -> Result<()> {
        for ladder in [&self.big_freqs_ghz, &self.little_freqs_ghz, &self.gpu_freqs_mhz] {
            if ladder.is_empty() || ladder.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Config(format!(
                    "device {}: frequency levels must be strictly increasing",
                    self.name
                )));
            }
        }
        if self.kappa_big <= 0.0
            || self.kappa_little <= 0.0
            || self.static_big_w <= 0.0
            || self.static_little_w <= 0.0
            || self.gpu_w_per_mhz <= 0.0
        {
            return Err(Error::Config(format!(
                "device {}: power coefficients must be positive",
                self.name
            )));
        }
        if self.fps_cap <= 0.0 {
            return Err(Error::Config(format!("device {}: fps_cap must be positive", self.name)));
        }
        Ok(())
    }

    pub fn max_big(&self) -> f64 {
        *self.big_freqs_ghz.last().unwrap()
    }

    pub fn max_little(&self) -> f64 {
        *self.little_freqs_ghz.last().unwrap()
    }

    pub fn max_gpu(&self) -> f64 {
        *self.gpu_freqs_mhz.last().unwrap()
    }

    /// The fixed configuration a stock interactive governor would run:
    /// everything at maximum, every event answered, render on big.
    pub fn governor_config(&self) -> ProcessingConfiguration {
        ProcessingConfiguration {
            erf_denominator: 1,
            big_ghz: self.max_big(),
            little_ghz: self.max_little(),
            gpu_mhz: self.max_gpu(),
            render_placement: Cluster::Big,
        }
    }

    fn check_config(&self, config: &ProcessingConfiguration) -> Result<()> {
        config.validate()?;
        let member = |ladder: &[f64], f: f64| ladder.iter().any(|&l| (l - f).abs() < 1e-9);
        if !member(&self.big_freqs_ghz, config.big_ghz) {
            return Err(Error::Domain(format!(
                "big frequency {} is not a level of device {}",
                config.big_ghz, self.name
            )));
        }
        if !member(&self.little_freqs_ghz, config.little_ghz) {
            return Err(Error::Domain(format!(
                "little frequency {} is not a level of device {}",
                config.little_ghz, self.name
            )));
        }
        if !member(&self.gpu_freqs_mhz, config.gpu_mhz) {
            return Err(Error::Domain(format!(
                "gpu frequency {} is not a level of device {}",
                config.gpu_mhz, self.name
            )));
        }
        Ok(())
    }

    fn render_cost_mcycles(&self, page: &PageDescriptor, viewport: &ViewportSlice, speed: f64) -> f64 {
        let c = &self.frame_cost;
        c.base_mcycles
            + c.per_dom_node * page.dom_node_count as f64
            + c.per_image_fraction * viewport.image_fraction
            + c.per_speed_kpx * (speed / 1000.0)
    }

    fn gpu_cost_mcycles(&self, viewport: &ViewportSlice) -> f64 {
        let c = &self.frame_cost;
        c.gpu_base_mcycles
            + c.gpu_per_mem_mb * (viewport.gpu_mem_footprint as f64 / 1.0e6)
            + c.gpu_per_image_fraction * viewport.image_fraction
    }

    /// Ground-truth FPS for a configuration. `previous_placement` is where
    /// the render process currently runs; switching costs a fraction of a
    /// frame time.
    pub fn true_fps(
        &self,
        page: &PageDescriptor,
        viewport: &ViewportSlice,
        gesture: &Gesture,
        config: &ProcessingConfiguration,
        previous_placement: Cluster,
    ) -> Result<f64> {
        self.check_config(config)?;
        let render_mc = self.render_cost_mcycles(page, viewport, gesture.speed_px_s);
        let gpu_mc = self.gpu_cost_mcycles(viewport);
        let (f_render_mhz, f_other_mhz) = match config.render_placement {
            Cluster::Big => (config.big_ghz * 1000.0, config.little_ghz * 1000.0),
            Cluster::Little => (config.little_ghz * 1000.0, config.big_ghz * 1000.0),
        };
        // Mcycles / MHz = seconds
        let mut frame_time_s = render_mc / f_render_mhz
            + self.frame_cost.main_thread_share * render_mc / f_other_mhz
            + gpu_mc / config.gpu_mhz;
        if config.render_placement != previous_placement {
            frame_time_s *= 1.0 + self.migration_penalty;
        }
        let raw_fps = 1.0 / frame_time_s;
        // Answering 1-of-N events cuts the needed pipeline rate; perceived
        // smoothness degrades by sqrt(N), less than proportionally.
        let mut fps = (raw_fps / (config.erf_denominator as f64).sqrt()).min(self.fps_cap);
        if self.noise_sigma > 0.0 {
            let z = rng::hash_gauss(self.noise_seed, &[page_key(page), config.key_hash(), 0xf5]);
            fps *= (1.0 + self.noise_sigma * z).max(0.05);
            fps = fps.min(self.fps_cap);
        }
        Ok(fps.max(1e-6))
    }

    /// Ground-truth energy over a window. Dynamic work scales with page load
    /// and divides by the event-response denominator; static power does not.
    pub fn true_energy(
        &self,
        page: &PageDescriptor,
        viewport: &ViewportSlice,
        gesture: &Gesture,
        config: &ProcessingConfiguration,
        duration_s: f64,
    ) -> Result<f64> {
        self.check_config(config)?;
        if !(duration_s >= 0.0) || !duration_s.is_finite() {
            return Err(Error::Domain(format!("duration must be nonnegative, got {duration_s}")));
        }
        let render_mc = self.render_cost_mcycles(page, viewport, gesture.speed_px_s);
        let load = (render_mc / self.frame_cost.reference_mcycles).clamp(0.15, 1.0);
        let n = f64::from(config.erf_denominator);
        let (load_big, load_little) = match config.render_placement {
            Cluster::Big => (load, load * self.frame_cost.main_thread_share),
            Cluster::Little => (load * self.frame_cost.main_thread_share, load),
        };
        let power_w = self.kappa_big * config.big_ghz.powi(3) * load_big / n
            + self.static_big_w
            + self.kappa_little * config.little_ghz.powi(3) * load_little / n
            + self.static_little_w
            + self.gpu_w_per_mhz * config.gpu_mhz * load / n;
        let mut energy = power_w * duration_s;
        if self.noise_sigma > 0.0 {
            let z = rng::hash_gauss(self.noise_seed, &[page_key(page), config.key_hash(), 0xe7]);
            energy *= (1.0 + self.noise_sigma * z).max(0.05);
        }
        Ok(energy)
    }
}

fn page_key(page: &PageDescriptor) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for b in page.id.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x100_0000_01b3);
    }
    h
}

/// One profiled observation, as written to profiling logs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRecord {
    pub page_id: String,
    pub gesture: GestureKind,
    pub speed_px_s: f64,
    pub config: ProcessingConfiguration,
    pub achieved_fps: f64,
    pub energy_j: f64,
}

// ---------------------------------------------------------------------------
// User oracle
// ---------------------------------------------------------------------------

/// Expectation band a synthetic rater belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UserGroup {
    Low,
    Moderate,
    High,
}

impl UserGroup {
    pub const ALL: [UserGroup; 3] = [UserGroup::Low, UserGroup::Moderate, UserGroup::High];

    pub fn name(self) -> &'static str {
        match self {
            UserGroup::Low => "low",
            UserGroup::Moderate => "mod",
            UserGroup::High => "high",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "low" => Ok(UserGroup::Low),
            "mod" | "moderate" => Ok(UserGroup::Moderate),
            "high" => Ok(UserGroup::High),
            other => Err(Error::Config(format!("unknown user group {other:?}"))),
        }
    }
}

/// A synthetic rater: the lowest FPS they accept is a clamped linear
/// function of content mix and interaction speed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserModel {
    pub user_id: String,
    pub group: UserGroup,
    pub base_min_fps_scroll: f64,
    pub base_min_fps_fling: f64,
    pub base_min_fps_pinch: f64,
    /// Hz added per unit image fraction; image-dominated content needs a
    /// higher update rate than dense text.
    pub content_sensitivity: f64,
    /// Hz added per 1000 px/s of interaction speed.
    pub speed_sensitivity: f64,
    pub personal_offset: f64,
    pub fps_floor: f64,
    pub fps_cap: f64,
}

impl UserModel {
    fn base(&self, gesture: GestureKind) -> f64 {
        match gesture {
            GestureKind::Scroll => self.base_min_fps_scroll,
            GestureKind::Fling => self.base_min_fps_fling,
            GestureKind::Pinch => self.base_min_fps_pinch,
        }
    }

    /// Minimum acceptable FPS for this content and speed.
    pub fn threshold(
        &self,
        _page: &PageDescriptor,
        viewport: &ViewportSlice,
        gesture: GestureKind,
        speed_px_s: f64,
    ) -> f64 {
        let raw = self.base(gesture)
            + self.content_sensitivity * viewport.image_fraction
            + self.speed_sensitivity * speed_px_s / 1000.0
            + self.personal_offset;
        raw.clamp(self.fps_floor, self.fps_cap)
    }

    pub fn accepts(
        &self,
        page: &PageDescriptor,
        viewport: &ViewportSlice,
        gesture: GestureKind,
        speed_px_s: f64,
        fps: f64,
    ) -> bool {
        fps >= self.threshold(page, viewport, gesture, speed_px_s)
    }

    /// Replays a descending FPS ladder and returns the last value accepted
    /// before the first rejection; if every rung is accepted, the ladder
    /// minimum. Rejection at the very first rung is an error.
    pub fn elicit_min_fps(
        &self,
        page: &PageDescriptor,
        viewport: &ViewportSlice,
        gesture: GestureKind,
        speed_px_s: f64,
        fps_ladder: &[f64],
    ) -> Result<f64> {
        if fps_ladder.is_empty() {
            return Err(Error::Domain("fps ladder is empty".into()));
        }
        if fps_ladder
            .iter()
            .any(|&f| !(f > 0.0) || f > self.fps_cap + 1e-9)
        {
            return Err(Error::Domain("ladder values must lie in (0, fps_cap]".into()));
        }
        if fps_ladder.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Domain("fps ladder must be strictly descending".into()));
        }
        let mut last_accepted = None;
        for &fps in fps_ladder {
            if self.accepts(page, viewport, gesture, speed_px_s, fps) {
                last_accepted = Some(fps);
            } else {
                break;
            }
        }
        last_accepted.ok_or_else(|| {
            Error::NoneAcceptable(format!(
                "user {} rejected the highest rung {}",
                self.user_id, fps_ladder[0]
            ))
        })
    }
}

/// The rater whose thresholds sit exactly on the motivating calibration
/// points: 32 Hz on the image-heavy fixture, 23 Hz on the text-heavy one,
/// both at 1000 px/s scrolling.
pub fn default_user() -> UserModel {
    UserModel {
        user_id: "user-default".into(),
        group: UserGroup::Moderate,
        base_min_fps_scroll: 20.5,
        base_min_fps_fling: 24.0,
        base_min_fps_pinch: 16.0,
        content_sensitivity: 15.0,
        speed_sensitivity: 1.0,
        personal_offset: 0.0,
        fps_floor: 5.0,
        fps_cap: 60.0,
    }
}

/// 30 raters in three expectation bands (10 low / 14 moderate / 6 high),
/// deterministic for a given seed.
pub fn preset_users(seed: u64) -> Vec<UserModel> {
    let mut rng = rng::seeded(rng::child_seed(seed, "user-presets"));
    let mut users = Vec::with_capacity(30);
    let groups = [
        (UserGroup::Low, 10usize, -6.0, 2.0),
        (UserGroup::Moderate, 14, 8.0, 18.0),
        (UserGroup::High, 6, 22.0, 30.0),
    ];
    for (group, count, lo, hi) in groups {
        for i in 0..count {
            let mut user = default_user();
            user.user_id = format!("user-{}-{i:02}", group.name());
            user.group = group;
            user.personal_offset = lo + (hi - lo) * rand::Rng::gen::<f64>(&mut rng);
            user.content_sensitivity = 15.0 + rand::Rng::gen_range(&mut rng, -2.0..2.0);
            user.speed_sensitivity = 1.0 + rand::Rng::gen_range(&mut rng, -0.3..0.3);
            users.push(user);
        }
    }
    users
}

/// A representative rater per band: offsets pinned at the band center.
pub fn group_representative(group: UserGroup) -> UserModel {
    let mut user = default_user();
    user.group = group;
    user.user_id = format!("user-{}-rep", group.name());
    user.personal_offset = match group {
        UserGroup::Low => -3.0,
        UserGroup::Moderate => 8.0,
        UserGroup::High => 22.0,
    };
    user
}

// ---------------------------------------------------------------------------
// Device presets, ladders scaled to the evaluation platforms' peak clocks.
// ---------------------------------------------------------------------------

pub fn preset_device(name: &str) -> Result<DeviceModel> {
    let dev = match name {
        "xiaomi9" => DeviceModel {
            name: "xiaomi9".into(),
            big_freqs_ghz: vec![0.8, 1.05, 1.28, 1.9, 2.84],
            little_freqs_ghz: vec![0.49, 0.672, 1.0, 1.4, 1.8],
            gpu_freqs_mhz: vec![150.0, 250.0, 450.0, 710.0],
            kappa_big: 0.35,
            kappa_little: 0.15,
            static_big_w: 0.25,
            static_little_w: 0.12,
            gpu_w_per_mhz: 0.004,
            migration_penalty: 0.10,
            frame_cost: FrameCostCoeffs::default(),
            fps_cap: 60.0,
            noise_sigma: 0.0,
            noise_seed: 0,
        },
        "pixel2" => DeviceModel {
            name: "pixel2".into(),
            big_freqs_ghz: vec![0.7, 0.9, 1.2, 1.7, 2.35],
            little_freqs_ghz: vec![0.4, 0.6, 0.9, 1.3, 1.9],
            gpu_freqs_mhz: vec![130.0, 220.0, 400.0, 650.0],
            kappa_big: 0.40,
            kappa_little: 0.17,
            static_big_w: 0.28,
            static_little_w: 0.13,
            gpu_w_per_mhz: 0.0045,
            migration_penalty: 0.10,
            frame_cost: FrameCostCoeffs {
                base_mcycles: 0.45,
                per_dom_node: 0.0007,
                ..FrameCostCoeffs::default()
            },
            fps_cap: 60.0,
            noise_sigma: 0.0,
            noise_seed: 0,
        },
        "huaweip9" => DeviceModel {
            name: "huaweip9".into(),
            big_freqs_ghz: vec![0.75, 1.0, 1.3, 1.8, 2.5],
            little_freqs_ghz: vec![0.48, 0.66, 0.95, 1.4, 1.8],
            gpu_freqs_mhz: vec![120.0, 200.0, 350.0, 560.0],
            kappa_big: 0.42,
            kappa_little: 0.18,
            static_big_w: 0.30,
            static_little_w: 0.14,
            gpu_w_per_mhz: 0.005,
            migration_penalty: 0.10,
            frame_cost: FrameCostCoeffs {
                base_mcycles: 0.5,
                per_dom_node: 0.00075,
                gpu_per_mem_mb: 0.07,
                ..FrameCostCoeffs::default()
            },
            fps_cap: 60.0,
            noise_sigma: 0.0,
            noise_seed: 0,
        },
        "odroidxu3" => DeviceModel {
            name: "odroidxu3".into(),
            big_freqs_ghz: vec![0.6, 0.8, 1.1, 1.5, 2.0],
            little_freqs_ghz: vec![0.35, 0.5, 0.75, 1.1, 1.4],
            gpu_freqs_mhz: vec![100.0, 177.0, 300.0, 480.0],
            kappa_big: 0.48,
            kappa_little: 0.20,
            static_big_w: 0.35,
            static_little_w: 0.16,
            gpu_w_per_mhz: 0.006,
            migration_penalty: 0.10,
            frame_cost: FrameCostCoeffs {
                base_mcycles: 0.55,
                per_dom_node: 0.0008,
                gpu_per_mem_mb: 0.075,
                ..FrameCostCoeffs::default()
            },
            fps_cap: 60.0,
            noise_sigma: 0.0,
            noise_seed: 0,
        },
        other => {
            return Err(Error::Config(format!(
                "unknown device preset {other:?}; available: xiaomi9, pixel2, huaweip9, odroidxu3"
            )))
        }
    };
    Ok(dev)
}

pub const PRESET_DEVICE_NAMES: [&str; 4] = ["xiaomi9", "pixel2", "huaweip9", "odroidxu3"];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{fixture_image_heavy, fixture_text_heavy, generate_corpus, Gesture};

    fn scroll(speed: f64) -> Gesture {
        Gesture::new(GestureKind::Scroll, speed, 2.0).unwrap()
    }

    fn tiny_page() -> PageDescriptor {
        let profile = crate::corpus::SizeProfile { dom_nodes: (4, 4), ..Default::default() };
        generate_corpus(3, 1, &profile).unwrap().pages.remove(0)
    }

    #[test]
    fn max_config_saturates_cap_on_tiny_page() {
        let dev = preset_device("xiaomi9").unwrap();
        let page = tiny_page();
        let fps = dev
            .true_fps(&page, &page.viewport_profiles[0], &scroll(400.0), &dev.governor_config(), Cluster::Big)
            .unwrap();
        assert_eq!(fps, 60.0);
    }

    #[test]
    fn doubling_render_frequency_raises_fps_below_saturation() {
        let dev = preset_device("xiaomi9").unwrap();
        let page = fixture_image_heavy();
        let slice = &page.viewport_profiles[0];
        let slow = ProcessingConfiguration {
            erf_denominator: 15,
            big_ghz: 1.05,
            little_ghz: 0.49,
            gpu_mhz: 250.0,
            render_placement: Cluster::Little,
        };
        let fast = ProcessingConfiguration { little_ghz: 1.0, ..slow.clone() };
        let f_slow = dev.true_fps(&page, slice, &scroll(1000.0), &slow, Cluster::Little).unwrap();
        let f_fast = dev.true_fps(&page, slice, &scroll(1000.0), &fast, Cluster::Little).unwrap();
        assert!(f_slow < 60.0 && f_fast < 60.0, "saturated: {f_slow} {f_fast}");
        assert!(f_fast > f_slow);
    }

    #[test]
    fn motivating_configs_meet_their_targets() {
        let dev = preset_device("xiaomi9").unwrap();
        let image_page = fixture_image_heavy();
        let image_cfg = ProcessingConfiguration {
            erf_denominator: 6,
            big_ghz: 1.28,
            little_ghz: 0.672,
            gpu_mhz: 250.0,
            render_placement: Cluster::Little,
        };
        let fps = dev
            .true_fps(&image_page, &image_page.viewport_profiles[0], &scroll(1000.0), &image_cfg, Cluster::Little)
            .unwrap();
        assert!(fps >= 32.0, "image-heavy fixture under its published config: {fps}");

        let text_page = fixture_text_heavy();
        let text_cfg = ProcessingConfiguration {
            erf_denominator: 15,
            big_ghz: 1.05,
            little_ghz: 0.49,
            gpu_mhz: 250.0,
            render_placement: Cluster::Little,
        };
        let fps = dev
            .true_fps(&text_page, &text_page.viewport_profiles[0], &scroll(1000.0), &text_cfg, Cluster::Little)
            .unwrap();
        assert!(fps >= 23.0, "text-heavy fixture under its published config: {fps}");

        // the text page's cheap policy starves the image page
        let cross = dev
            .true_fps(&image_page, &image_page.viewport_profiles[0], &scroll(1000.0), &text_cfg, Cluster::Little)
            .unwrap();
        assert!(cross < 32.0, "cheap policy should miss the image target: {cross}");
    }

    #[test]
    fn energy_is_linear_in_duration() {
        let dev = preset_device("pixel2").unwrap();
        let page = fixture_image_heavy();
        let slice = &page.viewport_profiles[0];
        let cfg = dev.governor_config();
        let zero = dev.true_energy(&page, slice, &scroll(800.0), &cfg, 0.0).unwrap();
        assert_eq!(zero, 0.0);
        let one = dev.true_energy(&page, slice, &scroll(800.0), &cfg, 1.0).unwrap();
        let two = dev.true_energy(&page, slice, &scroll(800.0), &cfg, 2.0).unwrap();
        assert!((two - 2.0 * one).abs() < 1e-12);
    }

    #[test]
    fn max_config_costs_strictly_more_than_min_config() {
        let dev = preset_device("odroidxu3").unwrap();
        let page = fixture_text_heavy();
        let slice = &page.viewport_profiles[0];
        let min_cfg = ProcessingConfiguration {
            erf_denominator: 1,
            big_ghz: dev.big_freqs_ghz[0],
            little_ghz: dev.little_freqs_ghz[0],
            gpu_mhz: dev.gpu_freqs_mhz[0],
            render_placement: Cluster::Big,
        };
        let e_max = dev.true_energy(&page, slice, &scroll(800.0), &dev.governor_config(), 1.0).unwrap();
        let e_min = dev.true_energy(&page, slice, &scroll(800.0), &min_cfg, 1.0).unwrap();
        assert!(e_max > e_min);
    }

    #[test]
    fn off_ladder_frequency_is_a_domain_error() {
        let dev = preset_device("xiaomi9").unwrap();
        let page = tiny_page();
        let cfg = ProcessingConfiguration {
            erf_denominator: 1,
            big_ghz: 1.111,
            little_ghz: dev.little_freqs_ghz[0],
            gpu_mhz: dev.gpu_freqs_mhz[0],
            render_placement: Cluster::Big,
        };
        match dev.true_fps(&page, &page.viewport_profiles[0], &scroll(500.0), &cfg, Cluster::Big) {
            Err(Error::Domain(_)) => {}
            other => panic!("expected domain error, got {other:?}"),
        }
    }

    #[test]
    fn fps_monotone_in_every_frequency_dimension() {
        let dev = preset_device("huaweip9").unwrap();
        let corpus = generate_corpus(51, 8, &Default::default()).unwrap();
        let gesture = scroll(1500.0);
        for page in &corpus.pages {
            let slice = &page.viewport_profiles[0];
            for placement in [Cluster::Big, Cluster::Little] {
                for &n in &[1u32, 6, 15] {
                    let base = ProcessingConfiguration {
                        erf_denominator: n,
                        big_ghz: dev.big_freqs_ghz[0],
                        little_ghz: dev.little_freqs_ghz[0],
                        gpu_mhz: dev.gpu_freqs_mhz[0],
                        render_placement: placement,
                    };
                    let mut prev = 0.0;
                    for &f in &dev.big_freqs_ghz {
                        let cfg = ProcessingConfiguration { big_ghz: f, ..base.clone() };
                        let fps = dev.true_fps(page, slice, &gesture, &cfg, placement).unwrap();
                        assert!(fps + 1e-12 >= prev);
                        prev = fps;
                    }
                    prev = 0.0;
                    for &f in &dev.little_freqs_ghz {
                        let cfg = ProcessingConfiguration { little_ghz: f, ..base.clone() };
                        let fps = dev.true_fps(page, slice, &gesture, &cfg, placement).unwrap();
                        assert!(fps + 1e-12 >= prev);
                        prev = fps;
                    }
                    prev = 0.0;
                    for &f in &dev.gpu_freqs_mhz {
                        let cfg = ProcessingConfiguration { gpu_mhz: f, ..base.clone() };
                        let fps = dev.true_fps(page, slice, &gesture, &cfg, placement).unwrap();
                        assert!(fps + 1e-12 >= prev);
                        prev = fps;
                    }
                }
            }
        }
    }

    #[test]
    fn energy_strictly_increases_in_each_frequency() {
        let dev = preset_device("xiaomi9").unwrap();
        let corpus = generate_corpus(53, 5, &Default::default()).unwrap();
        let gesture = scroll(900.0);
        for page in &corpus.pages {
            let slice = &page.viewport_profiles[0];
            let base = ProcessingConfiguration {
                erf_denominator: 2,
                big_ghz: dev.big_freqs_ghz[0],
                little_ghz: dev.little_freqs_ghz[0],
                gpu_mhz: dev.gpu_freqs_mhz[0],
                render_placement: Cluster::Little,
            };
            let mut prev = 0.0;
            for &f in &dev.big_freqs_ghz {
                let e = dev
                    .true_energy(page, slice, &gesture, &ProcessingConfiguration { big_ghz: f, ..base.clone() }, 1.0)
                    .unwrap();
                assert!(e > prev);
                prev = e;
            }
            prev = 0.0;
            for &f in &dev.gpu_freqs_mhz {
                let e = dev
                    .true_energy(page, slice, &gesture, &ProcessingConfiguration { gpu_mhz: f, ..base.clone() }, 1.0)
                    .unwrap();
                assert!(e > prev);
                prev = e;
            }
        }
    }

    #[test]
    fn oracles_are_pure_with_noise_off() {
        let dev = preset_device("pixel2").unwrap();
        let page = fixture_image_heavy();
        let slice = &page.viewport_profiles[0];
        let cfg = dev.governor_config();
        let g = scroll(1200.0);
        assert_eq!(
            dev.true_fps(&page, slice, &g, &cfg, Cluster::Big).unwrap(),
            dev.true_fps(&page, slice, &g, &cfg, Cluster::Big).unwrap()
        );
        assert_eq!(
            dev.true_energy(&page, slice, &g, &cfg, 0.05).unwrap(),
            dev.true_energy(&page, slice, &g, &cfg, 0.05).unwrap()
        );
    }

    #[test]
    fn migration_costs_frames() {
        let dev = preset_device("xiaomi9").unwrap();
        let page = fixture_image_heavy();
        let slice = &page.viewport_profiles[0];
        let cfg = ProcessingConfiguration {
            erf_denominator: 6,
            big_ghz: 1.28,
            little_ghz: 0.672,
            gpu_mhz: 250.0,
            render_placement: Cluster::Little,
        };
        let stay = dev.true_fps(&page, slice, &scroll(1000.0), &cfg, Cluster::Little).unwrap();
        let moved = dev.true_fps(&page, slice, &scroll(1000.0), &cfg, Cluster::Big).unwrap();
        assert!(moved < stay);
    }

    #[test]
    fn default_user_hits_calibrated_thresholds() {
        let user = default_user();
        let img = fixture_image_heavy();
        let txt = fixture_text_heavy();
        let t_img = user.threshold(&img, &img.viewport_profiles[0], GestureKind::Scroll, 1000.0);
        let t_txt = user.threshold(&txt, &txt.viewport_profiles[0], GestureKind::Scroll, 1000.0);
        assert!((t_img - 32.0).abs() < 1e-9, "image threshold {t_img}");
        assert!((t_txt - 23.0).abs() < 1e-9, "text threshold {t_txt}");
    }

    #[test]
    fn cap_fps_is_always_accepted_and_near_misses_rejected() {
        let img = fixture_image_heavy();
        let slice = &img.viewport_profiles[0];
        for user in preset_users(5) {
            assert!(user.accepts(&img, slice, GestureKind::Scroll, 2000.0, user.fps_cap));
            let thr = user.threshold(&img, slice, GestureKind::Scroll, 2000.0);
            assert!(!user.accepts(&img, slice, GestureKind::Scroll, 2000.0, thr - 0.1));
        }
    }

    #[test]
    fn elicit_follows_the_stopping_rule() {
        let mut user = default_user();
        let img = fixture_image_heavy();
        let slice = &img.viewport_profiles[0];
        let ladder = [60.0, 50.0, 40.0, 30.0, 20.0];

        // threshold 33: first rejection at 30, last accepted 40
        user.personal_offset = 33.0
            - user.base_min_fps_scroll
            - user.content_sensitivity * slice.image_fraction
            - user.speed_sensitivity;
        let got = user.elicit_min_fps(&img, slice, GestureKind::Scroll, 1000.0, &ladder).unwrap();
        assert_eq!(got, 40.0);

        // threshold below the ladder: everything accepted, minimum returned
        user.personal_offset = -100.0;
        let got = user.elicit_min_fps(&img, slice, GestureKind::Scroll, 1000.0, &ladder).unwrap();
        assert_eq!(got, 20.0);

        // threshold above the top rung: nothing acceptable
        user.personal_offset = 100.0;
        user.fps_cap = 100.0;
        match user.elicit_min_fps(&img, slice, GestureKind::Scroll, 1000.0, &ladder) {
            Err(Error::NoneAcceptable(_)) => {}
            other => panic!("expected none-acceptable, got {other:?}"),
        }
    }

    #[test]
    fn elicited_value_is_the_unique_boundary_rung() {
        let corpus = generate_corpus(61, 6, &Default::default()).unwrap();
        let ladder: Vec<f64> = (1..=12).rev().map(|i| i as f64 * 5.0).collect();
        for (ui, user) in preset_users(9).into_iter().enumerate() {
            let page = &corpus.pages[ui % corpus.pages.len()];
            let slice = &page.viewport_profiles[0];
            match user.elicit_min_fps(page, slice, GestureKind::Fling, 3000.0, &ladder) {
                Ok(v) => {
                    assert!(user.accepts(page, slice, GestureKind::Fling, 3000.0, v));
                    if let Some(pos) = ladder.iter().position(|&l| l == v) {
                        if pos + 1 < ladder.len() {
                            assert!(!user.accepts(page, slice, GestureKind::Fling, 3000.0, ladder[pos + 1]));
                        }
                    }
                }
                Err(Error::NoneAcceptable(_)) => {
                    assert!(!user.accepts(page, slice, GestureKind::Fling, 3000.0, ladder[0]));
                }
                Err(e) => panic!("unexpected error {e:?}"),
            }
        }
    }

    #[test]
    fn preset_population_matches_group_sizes_and_bands() {
        let users = preset_users(1);
        assert_eq!(users.len(), 30);
        let count = |g: UserGroup| users.iter().filter(|u| u.group == g).count();
        assert_eq!(count(UserGroup::Low), 10);
        assert_eq!(count(UserGroup::Moderate), 14);
        assert_eq!(count(UserGroup::High), 6);

        // mean target per group over a content/speed sample, band-ordered
        let corpus = generate_corpus(77, 20, &Default::default()).unwrap();
        let mut means = Vec::new();
        for group in UserGroup::ALL {
            let members: Vec<_> = users.iter().filter(|u| u.group == group).collect();
            let mut total = 0.0;
            let mut n = 0usize;
            for user in &members {
                for page in &corpus.pages {
                    let slice = &page.viewport_profiles[0];
                    for g in GestureKind::ALL {
                        for speed in [500.0, 1500.0, 2500.0] {
                            total += user.threshold(page, slice, g, speed);
                            n += 1;
                        }
                    }
                }
            }
            means.push(total / n as f64);
        }
        assert!(means[0] < 35.0, "low group mean {}", means[0]);
        assert!(means[1] >= 35.0 && means[1] <= 49.0, "moderate group mean {}", means[1]);
        assert!(means[2] > 49.0, "high group mean {}", means[2]);
    }

    #[test]
    fn all_presets_validate() {
        for name in PRESET_DEVICE_NAMES {
            preset_device(name).unwrap().validate().unwrap();
        }
    }
}
