#![allow(dead_code)]

use nalgebra::{Matrix3, Point2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use ground_slam::eval::{loop_closure_audit, LoopClosureAudit};
use ground_slam::estimation::{
    covariance_score, estimate_transform, least_squares_transform, EstimatorConfig, PointPairs,
};
use ground_slam::features::{Descriptor, FeatureSet, Match};
use ground_slam::geometry::normalize_angle;
use ground_slam::place_recognition::{Vocabulary, VocabularyConfig};
use ground_slam::simulation::{
    generate_world, simulate, training_documents, Extent, NoiseSpec, SimulationSpec, SyntheticSequence,
    TrajectoryShape,
};
use ground_slam::slam::{Factor, FactorKind, GroundSlam, PoseGraph, SlamConfig};
use ground_slam::Pose2;

pub const FIGURE_EIGHT_SEED: u64 = 7;

pub fn noisy() -> NoiseSpec {
    NoiseSpec {
        pixel_sigma: 0.5,
        outlier_rate: 0.05,
        ..Default::default()
    }
}

pub fn sequence(shape: TrajectoryShape, noise: NoiseSpec, seed: u64) -> SyntheticSequence {
    let mut spec = SimulationSpec::new(shape, 0.1, seed);
    spec.noise = noise;
    simulate(&spec).unwrap()
}

pub fn noisy_figure_eight(seed: u64) -> SyntheticSequence {
    sequence(TrajectoryShape::FigureEight { size: 1.0 }, noisy(), seed)
}

/// Vocabulary trained on a separate world of the same texture.
pub fn vocabulary_for(seq: &SyntheticSequence, seed: u64) -> Vocabulary {
    let e = seq.world.extent;
    let world = generate_world(Extent::new(e.min_x, e.min_y, e.max_x, e.max_y), seq.world.density, seed ^ 0xABCD)
        .unwrap();
    let docs = training_documents(&world, &seq.camera, 60, seed).unwrap();
    Vocabulary::build(&docs, &VocabularyConfig::default()).unwrap()
}

pub fn run_features<'a, I>(seq: &SyntheticSequence, vocab: &Vocabulary, config: SlamConfig, features: I) -> GroundSlam
where
    I: IntoIterator<Item = &'a FeatureSet>,
{
    let mut slam = GroundSlam::new(seq.camera.clone(), vocab.clone(), config).unwrap();
    for f in features {
        slam.process_features(f.clone()).unwrap();
    }
    slam
}

pub fn run(seq: &SyntheticSequence, vocab: &Vocabulary, config: SlamConfig) -> GroundSlam {
    run_features(seq, vocab, config, seq.feature_sets())
}

pub fn loop_closures(slam: &GroundSlam) -> Vec<(usize, usize, Pose2)> {
    slam.graph()
        .factors()
        .iter()
        .filter(|f| f.kind() == FactorKind::Loop)
        .map(|f| (f.from().unwrap(), f.to(), *f.measurement()))
        .collect()
}

pub fn overlap_radius(seq: &SyntheticSequence) -> f64 {
    seq.camera.footprint_diagonal().unwrap() / 2.0
}

pub fn audit(slam: &GroundSlam, seq: &SyntheticSequence) -> LoopClosureAudit {
    loop_closure_audit(&loop_closures(slam), &seq.truth, overlap_radius(seq), slam.config().delay).unwrap()
}

pub fn max_pose_error(estimated: &[Pose2], truth: &[Pose2]) -> (f64, f64) {
    estimated.iter().zip(truth).fold((0.0f64, 0.0f64), |(t, r), (e, g)| {
        let d = g.between(e);
        (t.max(d.translation().norm()), r.max(d.theta().abs()))
    })
}

/// Pose-graph problems shared with `tests/oracles/pose_graph.py`.
pub struct GraphCase {
    pub name: &'static str,
    pub poses: usize,
    pub factors: Vec<(usize, usize, [f64; 3], [[f64; 3]; 3])>,
    /// Final cost found by SciPy's `least_squares`.
    pub oracle_cost: f64,
}

fn diag(a: f64, b: f64, c: f64) -> [[f64; 3]; 3] {
    [[a, 0.0, 0.0], [0.0, b, 0.0], [0.0, 0.0, c]]
}

pub fn graph_cases() -> Vec<GraphCase> {
    let d = diag(30.0, 30.0, 60.0);
    let l = diag(80.0, 80.0, 150.0);
    vec![
        GraphCase {
            name: "triangle",
            poses: 3,
            factors: vec![
                (0, 1, [1.0, 0.0, 2.0], diag(10.0, 10.0, 50.0)),
                (1, 2, [1.0, 0.0, 2.1], diag(10.0, 10.0, 50.0)),
                (0, 2, [0.3, 1.2, -1.9], diag(40.0, 20.0, 100.0)),
            ],
            oracle_cost: 2.2408050585416848,
        },
        GraphCase {
            name: "square",
            poses: 4,
            factors: vec![
                (0, 1, [1.0, 0.05, 1.5], [[20.0, 3.0, 0.0], [3.0, 15.0, 1.0], [0.0, 1.0, 80.0]]),
                (1, 2, [0.95, 0.0, 1.62], diag(20.0, 15.0, 80.0)),
                (2, 3, [1.05, -0.02, 1.55], diag(20.0, 15.0, 80.0)),
                (3, 0, [0.9, 0.1, 1.7], [[200.0, -20.0, 5.0], [-20.0, 150.0, 0.0], [5.0, 0.0, 900.0]]),
            ],
            oracle_cost: 0.3978654402374169,
        },
        GraphCase {
            name: "chain_two_loops",
            poses: 5,
            factors: vec![
                (0, 1, [0.5, 0.0, 0.3], diag(100.0, 100.0, 400.0)),
                (1, 2, [0.5, 0.1, 0.3], diag(100.0, 100.0, 400.0)),
                (2, 3, [0.4, 0.0, 0.4], diag(100.0, 100.0, 400.0)),
                (3, 4, [0.5, -0.1, 0.2], diag(100.0, 100.0, 400.0)),
                (0, 3, [1.2, 0.7, 1.05], diag(50.0, 50.0, 200.0)),
                (1, 4, [1.1, 0.8, 0.85], diag(50.0, 80.0, 300.0)),
            ],
            oracle_cost: 5.002797687247658,
        },
        GraphCase {
            name: "wrapping",
            poses: 6,
            factors: vec![
                (0, 1, [0.3, 0.0, 1.0], d),
                (1, 2, [0.3, 0.0, 1.0], d),
                (2, 3, [0.3, 0.0, 1.1], d),
                (3, 4, [0.3, 0.05, 1.0], d),
                (4, 5, [0.3, 0.0, 1.0], d),
                (0, 3, [-0.05, 0.55, 3.05], l),
                (2, 5, [-0.1, 0.5, -3.1], l),
            ],
            oracle_cost: 3.290644789092086,
        },
        GraphCase {
            name: "six_random",
            poses: 6,
            factors: vec![
                (
                    0,
                    1,
                    [0.27585635888157767, 0.19994853143648345, 0.13865743811491849],
                    [
                        [8.494157572422564, 1.1041604080143572, -0.059405685155840056],
                        [1.1041604080143572, 5.711550221424433, 0.7708254401783948],
                        [-0.059405685155840056, 0.7708254401783948, 8.843054417937422],
                    ],
                ),
                (
                    1,
                    2,
                    [0.47093514603844483, 0.1128836649324157, -0.3418529557728084],
                    [
                        [8.892740864512485, -0.8274190641712768, 1.0304112161924832],
                        [-0.8274190641712768, 6.457392458481779, -0.9127444121023294],
                        [1.0304112161924832, -0.9127444121023294, 5.8060247906300555],
                    ],
                ),
                (
                    2,
                    3,
                    [0.5591829099036126, -0.06173879892914638, 0.6167740461678908],
                    [
                        [5.814805292995167, -0.47369735824919784, 1.009408679614277],
                        [-0.47369735824919784, 7.611774676274865, -1.867557941934375],
                        [1.009408679614277, -1.867557941934375, 11.778654723633059],
                    ],
                ),
                (
                    3,
                    4,
                    [0.5962541802720602, 0.018538072632283104, -0.7054868795499664],
                    [
                        [8.709150616482663, 2.7705130224810883, 0.39405188500180793],
                        [2.7705130224810883, 8.98356187021074, 0.7398597034704402],
                        [0.39405188500180793, 0.7398597034704402, 5.801927197054852],
                    ],
                ),
                (
                    4,
                    5,
                    [0.47643606564837443, 0.15033139966416803, 0.2781460409085825],
                    [
                        [7.035292384302592, -1.3234178954999545, 1.9150581429271312],
                        [-1.3234178954999545, 6.913886766807704, -0.12253650328294585],
                        [1.9150581429271312, -0.12253650328294585, 9.065859069034067],
                    ],
                ),
                (
                    0,
                    4,
                    [-0.6779403655317318, 0.5127460088138704, -2.4472402130719315],
                    [
                        [1.2554871183188778, -0.4563997422456263, -0.4248352434896149],
                        [-0.4563997422456263, 2.4924773263126934, 1.167609349286701],
                        [-0.4248352434896149, 1.167609349286701, 3.9476864213560163],
                    ],
                ),
                (
                    1,
                    5,
                    [-0.5638216710837725, 0.004905289085090914, -1.064214149025087],
                    [
                        [1.992212784339534, -1.8680595415718684, 0.01516396331798968],
                        [-1.8680595415718684, 4.566880766474773, 0.027741829117527733],
                        [0.01516396331798968, 0.027741829117527733, 1.438125051741599],
                    ],
                ),
                (
                    0,
                    5,
                    [0.055641392600288775, -0.12053544503570857, -1.2102508377583936],
                    [
                        [5.881029795865575, 3.662462438874294, 1.995965669446915],
                        [3.662462438874294, 4.758758314146524, 1.8067631923685985],
                        [1.995965669446915, 1.8067631923685985, 2.1404649488769607],
                    ],
                ),
            ],
            oracle_cost: 15.410843373979688,
        },
    ]
}

impl GraphCase {
    /// Graph with a stiff prior at the origin and poses initialized by
    /// chaining consecutive factors.
    pub fn build(&self) -> PoseGraph {
        let mut poses = vec![Pose2::identity(); self.poses];
        for &(from, to, m, _) in &self.factors {
            if to == from + 1 {
                poses[to] = poses[from].compose(&Pose2::new(m[0], m[1], m[2]));
            }
        }
        let mut graph = PoseGraph::new();
        for p in poses {
            graph.add_pose(p);
        }
        graph
            .add_factor(Factor::prior(0, Pose2::identity(), Matrix3::identity() * 1e6).unwrap())
            .unwrap();
        for &(from, to, m, info) in &self.factors {
            let m = Pose2::new(m[0], m[1], m[2]);
            let info = Matrix3::from_fn(|r, c| info[r][c]);
            let f = if to == from + 1 {
                Factor::odometry(from, to, m, info)
            } else {
                Factor::loop_closure(from, to, m, info)
            };
            graph.add_factor(f.unwrap()).unwrap();
        }
        graph
    }
}

/// Medians from `tests/oracles/robust_estimator.py` over 2000 trials.
pub const ORACLE_HUBER_MEDIAN_TRANSLATION: f64 = 5.615e-4;
pub const ORACLE_HUBER_MEDIAN_ROTATION_DEG: f64 = 9.34e-2;
pub const ORACLE_LS_MEDIAN_TRANSLATION: f64 = 1.743e-2;

/// One registration problem laid out as in the Python oracle: 50 pairs,
/// 1 mm noise, 10 destinations replaced by uniform clutter.
pub fn estimator_trial<R: Rng>(rng: &mut R) -> (PointPairs, Pose2) {
    let truth = Pose2::new(
        rng.random_range(-0.1..0.1),
        rng.random_range(-0.1..0.1),
        rng.random_range(-30f64..30.0).to_radians(),
    );
    let noise = Normal::new(0.0, 0.001).unwrap();
    let src: Vec<Point2<f64>> = (0..50)
        .map(|_| Point2::new(rng.random_range(-0.15..0.15), rng.random_range(-0.15..0.15)))
        .collect();
    let mut dst: Vec<Point2<f64>> = src
        .iter()
        .map(|p| truth.transform_point(p) + Vector2::new(noise.sample(rng), noise.sample(rng)))
        .collect();
    for i in rand::seq::index::sample(rng, 50, 10) {
        dst[i] = Point2::new(rng.random_range(-0.15..0.15), rng.random_range(-0.15..0.15));
    }
    (PointPairs::new(src, dst).unwrap(), truth)
}

#[derive(Debug)]
pub struct EstimatorStats {
    pub huber_median_translation: f64,
    pub huber_median_rotation_deg: f64,
    pub ls_median_translation: f64,
    pub huber_better_fraction: f64,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn estimator_monte_carlo(trials: usize, seed: u64) -> EstimatorStats {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = EstimatorConfig::default();
    let (mut th, mut rh, mut tl, mut better) = (Vec::new(), Vec::new(), Vec::new(), 0);
    for _ in 0..trials {
        let (pairs, truth) = estimator_trial(&mut rng);
        let huber = estimate_transform(&pairs, &cfg).unwrap().transform;
        let ls = least_squares_transform(&pairs).unwrap();
        let eh = (huber.translation() - truth.translation()).norm();
        let el = (ls.translation() - truth.translation()).norm();
        th.push(eh);
        rh.push(normalize_angle(huber.theta() - truth.theta()).abs().to_degrees());
        tl.push(el);
        better += usize::from(eh < el);
    }
    EstimatorStats {
        huber_median_translation: median(th),
        huber_median_rotation_deg: median(rh),
        ls_median_translation: median(tl),
        huber_better_fraction: better as f64 / trials as f64,
    }
}

/// Random matcher input with planted near-duplicates and exact ties.
pub fn matcher_instance<R: Rng>(rng: &mut R) -> (Vec<Descriptor>, Vec<Descriptor>, f64) {
    let train: Vec<Descriptor> = (0..rng.random_range(2..80)).map(|_| Descriptor::random(rng)).collect();
    let mut query = Vec::new();
    for _ in 0..rng.random_range(0..80) {
        let d = match rng.random_range(0..4) {
            0 => Descriptor::random(rng),
            1 => train[rng.random_range(0..train.len())],
            _ => {
                let mut d = train[rng.random_range(0..train.len())];
                for _ in 0..rng.random_range(1..60) {
                    d.flip_bit(rng.random_range(0..Descriptor::BITS as usize));
                }
                d
            }
        };
        query.push(d);
    }
    let mut train = train;
    if rng.random_bool(0.3) {
        let dup = train[0];
        train.push(dup);
    }
    let ratio = [0.5, 0.6, 0.7, 0.8, 0.9, 1.0][rng.random_range(0..6)];
    (query, train, ratio)
}

/// All-pairs reference: sort every train descriptor by (distance, index)
/// and apply the ratio test to the first two.
pub fn naive_matches(query: &[Descriptor], train: &[Descriptor], ratio: f64) -> Vec<Match> {
    let mut out = Vec::new();
    for (qi, q) in query.iter().enumerate() {
        let mut all: Vec<(u32, usize)> = train.iter().enumerate().map(|(ti, t)| (q.hamming(t), ti)).collect();
        all.sort();
        let (best, second) = (all[0], all[1]);
        if best.0 as f64 <= ratio * second.0 as f64 {
            out.push(Match {
                query_index: qi,
                train_index: best.1,
                distance: best.0,
            });
        }
    }
    out
}

/// Largest deviation of `score(c·Σ) − score(Σ)` from `log₁₀ c` over random
/// PSD matrices, alternating exact decades and random scales in 10⁻³..10³.
pub fn covariance_law_max_error(samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for i in 0..samples {
        let a = Matrix3::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let sigma = a * a.transpose() + Matrix3::identity() * 1e-6;
        let c = if i % 2 == 0 {
            10f64.powi((i / 2 % 7) as i32 - 3)
        } else {
            10f64.powf(rng.random_range(-3.0..=3.0))
        };
        let base = covariance_score(&sigma).unwrap();
        let scaled = covariance_score(&(sigma * c)).unwrap();
        worst = worst.max((scaled - base - c.log10()).abs());
    }
    worst
}
