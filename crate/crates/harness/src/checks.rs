//! The check implementations. Each one draws its own sample points from a
//! seeded stream, measures a worst-case defect and leaves the verdict to
//! the caller.

use std::f64::consts::TAU;

use affine_core::atlas::ChartId;
use affine_core::automorphism::{self, frame_lift, Diffeo};
use affine_core::catalog::{self, ManifoldEntry};
use affine_core::connection::ConnectionField;
use affine_core::flows::{self, IntegratorConfig, VectorField, VectorFieldSpec};
use affine_core::frame_bundle::{self, Frame, FrameTangent, KappaFamily};
use affine_core::geodesics;
use affine_core::killing::{self, HorizontalPath, NaturalLift};
use affine_core::{Coords, GeomError, Matrix, Point, Tangent};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::scenario::{CheckKind, CheckSpec};

/// What a check measured. `error` is set when the measurement was cut
/// short; `worst` then holds whatever is known (a Killing residual, say).
#[derive(Clone, Debug, PartialEq)]
pub struct Measurement {
    pub worst: f64,
    pub samples: usize,
    pub error: Option<String>,
}

impl Measurement {
    fn ok(worst: f64, samples: usize) -> Self {
        Self { worst, samples, error: None }
    }
}

/// Everything a check needs besides its own parameters.
pub struct Context<'a> {
    pub entry: &'a ManifoldEntry,
    pub conn: &'a ConnectionField,
    pub fields: Vec<VectorFieldSpec>,
    pub cfg: IntegratorConfig,
    pub tol_kill: f64,
}

type Outcome = Result<Measurement, Failure>;

pub fn run_check(ctx: &Context, spec: &CheckSpec, rng: &mut ChaCha8Rng) -> Measurement {
    let samples = spec.samples.unwrap_or(spec.kind.default_samples()).max(1);
    let fields: Vec<VectorFieldSpec> = match &spec.fields {
        Some(names) => names.iter().filter_map(|n| ctx.entry.field(n).cloned()).collect(),
        None => ctx.fields.clone(),
    };
    let ctx = Context { fields, ..*ctx };
    let result = match spec.kind {
        CheckKind::ChangeOfVariable => change_of_variable(&ctx, samples, rng),
        CheckKind::FieldWellDefined => field_well_defined(&ctx, samples, rng),
        CheckKind::KillingResidual => killing_residual(&ctx, samples, rng),
        CheckKind::Equivalence => equivalence(&ctx, samples, rng),
        CheckKind::HorizontalProjection => {
            let [t0, t1] = spec.t_span.unwrap_or([0.0, TAU]);
            horizontal_projection(&ctx, samples, (t0, t1), rng)
        }
        CheckKind::LiftBracket => lift_bracket(&ctx, samples, rng),
        CheckKind::KillingExtension => killing_extension(&ctx, samples, spec.horizon.unwrap_or(1.0), rng),
        CheckKind::ExtensionLinearity => extension_linearity(&ctx, samples, spec.horizon.unwrap_or(1.0), rng),
        CheckKind::AutomorphismAffine => automorphism_affine(&ctx, samples, rng),
        CheckKind::KappaPullback => kappa_pullback(&ctx, samples, rng),
        CheckKind::ExpCommutes => exp_commutes(&ctx, samples, rng),
        CheckKind::FrameHomomorphism => frame_homomorphism(&ctx, samples, rng),
        CheckKind::GramRank => gram_rank(&ctx, spec.expected_rank, rng),
        CheckKind::ParameterFlow => parameter_flow(&ctx, samples, rng),
        CheckKind::Completeness => completeness(&ctx, samples, spec.horizon.unwrap_or(1e3), rng),
    };
    result.unwrap_or_else(|e| match e {
        Failure::Geometry(e @ GeomError::NotKilling { residual }) => Measurement { worst: residual, samples, error: Some(e.to_string()) },
        Failure::Geometry(e) => Measurement { worst: f64::NAN, samples, error: Some(e.to_string()) },
        Failure::Setup(msg) => Measurement { worst: f64::NAN, samples: 0, error: Some(msg) },
    })
}

/// Why a check could not produce a measurement.
enum Failure {
    Geometry(GeomError),
    Setup(String),
}

impl From<GeomError> for Failure {
    fn from(e: GeomError) -> Self {
        Failure::Geometry(e)
    }
}

fn needs_two(kind: &str) -> Failure {
    Failure::Setup(format!("{kind} needs at least two fields"))
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Coords {
    Coords::from_fn(n, |_, _| rng.random_range(-scale..scale))
}

fn random_frame(rng: &mut ChaCha8Rng, p: &Point) -> Frame {
    let n = p.coords.len();
    loop {
        let g = Matrix::identity(n, n) + Matrix::from_fn(n, n, |_, _| rng.random_range(-0.4..0.4));
        if let Ok(f) = Frame::new(p.chart, p.coords.clone(), g) {
            return f;
        }
    }
}

fn points(ctx: &Context, rng: &mut ChaCha8Rng, k: usize) -> Vec<Point> {
    (0..k).map(|_| ctx.entry.sample_point(rng)).collect()
}

/// Ordered chart pairs whose overlaps contain sample points.
fn overlapping_pairs(ctx: &Context, rng: &mut ChaCha8Rng) -> Vec<(ChartId, ChartId)> {
    let ids: Vec<ChartId> = ctx.entry.atlas.chart_ids().collect();
    let mut out = Vec::new();
    for &a in &ids {
        for &b in &ids {
            if a != b && ctx.entry.sample_overlap(rng, a, b, ctx.cfg.rechart_margin).is_some() {
                out.push((a, b));
            }
        }
    }
    out
}

fn overlap_points(ctx: &Context, rng: &mut ChaCha8Rng, k: usize) -> Vec<(Point, ChartId)> {
    let pairs = overlapping_pairs(ctx, rng);
    if pairs.is_empty() {
        return Vec::new();
    }
    (0..k)
        .filter_map(|i| {
            let (a, b) = pairs[i % pairs.len()];
            ctx.entry.sample_overlap(rng, a, b, ctx.cfg.rechart_margin).map(|p| (p, b))
        })
        .collect()
}

fn change_of_variable(ctx: &Context, k: usize, rng: &mut ChaCha8Rng) -> Outcome {
    let n = ctx.entry.atlas.dim();
    let mut worst: f64 = 0.0;
    let pts = overlap_points(ctx, rng, k);
    for (p, to) in &pts {
        let v = random_vec(rng, n, 1.0);
        let w = random_vec(rng, n, 1.0);
        worst = worst.max(ctx.conn.change_of_variable_residual(p, &v, &w, *to)?);
    }
    Ok(Measurement::ok(worst, pts.len()))
}

fn field_well_defined(ctx: &Context, k: usize, rng: &mut ChaCha8Rng) -> Outcome {
    let mut worst: f64 = 0.0;
    let pts = overlap_points(ctx, rng, k);
    for f in &ctx.fields {
        for (p, to) in &pts {
            worst = worst.max(f.well_definedness_residual(p, *to)?);
        }
    }
    Ok(Measurement::ok(worst, pts.len() * ctx.fields.len()))
}

fn killing_residual(ctx: &Context, k: usize, rng: &mut ChaCha8Rng) -> Outcome {
    let pts = points(ctx, rng, k);
    let mut worst: f64 = 0.0;
    for f in &ctx.fields {
        for p in &pts {
            worst = worst.max(killing::killing_residual_max(ctx.conn, f, p)?);
        }
    }
    Ok(Measurement::ok(worst, pts.len() * ctx.fields.len()))
}

/// Killing residual below which a field counts as an affine symmetry.
pub const RESIDUAL_THRESHOLD: f64 = 1e-8;

/// Commutation defect below which `ξ̄` and `H_λ` count as commuting.
pub const COMMUTATION_THRESHOLD: f64 = 1e-4;

/// Counts fields on which the residual verdict and the flow-commutation
/// verdict disagree.
fn equivalence(ctx: &Context, k: usize, rng: &mut ChaCha8Rng) -> Outcome {
    let n = ctx.entry.atlas.dim();
    let pts = points(ctx, rng, k);
    let mut disagreements = 0usize;
    let mut failures = Vec::new();
    for f in &ctx.fields {
        let mut res: f64 = 0.0;
        let mut com: f64 = 0.0;
        for p in &pts {
            res = res.max(killing::killing_residual_max(ctx.conn, f, p)?);
            let frame = Frame::identity_at(p);
            for i in 0..n {
                let lambda = Coords::from_fn(n, |j, _| if i == j { 1.0 } else { 0.0 });
                com = com.max(killing::lift_commutation_defect(ctx.conn, f, &lambda, &frame, 0.1, 0.1, &ctx.cfg)?);
            }
        }
        if (res <= RESIDUAL_THRESHOLD) != (com <= COMMUTATION_THRESHOLD) {
            disagreements += 1;
            failures.push(format!("{} (residual {res:.1e}, commutation {com:.1e})", f.name()));
        }
    }
    let error = (!failures.is_empty()).then(|| format!("verdicts disagree on {}", failures.join(", ")));
    Ok(Measurement { worst: disagreements as f64, samples: pts.len() * ctx.fields.len(), error })
}

fn horizontal_projection(ctx: &Context, k: usize, t_span: (f64, f64), rng: &mut ChaCha8Rng) -> Outcome {
    let n = ctx.entry.atlas.dim();
    let mut worst: f64 = 0.0;
    for _ in 0..k {
        let p = ctx.entry.sample_point(rng);
        let frame = random_frame(rng, &p);
        let lambda = catalog::random_unit_vector(rng, n) * 0.5;
        let d = frame_bundle::horizontal_projection_defect(ctx.conn, &lambda, &frame, t_span, &ctx.cfg)?;
        worst = worst.max(d.velocity).max(d.geodesic);
    }
    Ok(Measurement::ok(worst, k))
}

fn lift_bracket(ctx: &Context, k: usize, rng: &mut ChaCha8Rng) -> Outcome {
    if ctx.fields.len() < 2 {
        return Err(needs_two("lift_bracket"));
    }
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for _ in 0..k {
        let p = ctx.entry.sample_point(rng);
        let state = random_frame(rng, &p).to_state();
        for i in 0..ctx.fields.len() {
            for j in i + 1..ctx.fields.len() {
                let (a, b) = (&ctx.fields[i], &ctx.fields[j]);
                let br = killing::bracket(a, b);
                let lhs = killing::lie_bracket_state(&NaturalLift::new(a), &NaturalLift::new(b), state.chart, &state.state)?;
                let rhs = NaturalLift::new(&br).eval(state.chart, &state.state)?;
                worst = worst.max((lhs - rhs).norm());
                count += 1;
            }
        }
    }
    Ok(Measurement::ok(worst, count))
}

fn extension_path(ctx: &Context, p: &Point, length: f64, rng: &mut ChaCha8Rng) -> HorizontalPath {
    let lambda = catalog::random_unit_vector(rng, ctx.entry.atlas.dim());
    HorizontalPath::starting_at(p.clone()).flow(lambda, length)
}

fn killing_extension(ctx: &Context, k: usize, length: f64, rng: &mut ChaCha8Rng) -> Outcome {
    let mut worst: f64 = 0.0;
    for _ in 0..k {
        let p = ctx.entry.sample_point(rng);
        let path = extension_path(ctx, &p, length, rng);
        for f in &ctx.fields {
            let seed = killing::ev_embedding(ctx.conn, f, &p)?;
            let got = killing::extend_killing(ctx.conn, &seed, &path, &ctx.cfg)?;
            let want = f.at(&got.base)?;
            worst = worst.max((got.vec - want.vec).norm());
        }
    }
    Ok(Measurement::ok(worst, k * ctx.fields.len()))
}

fn extension_linearity(ctx: &Context, k: usize, length: f64, rng: &mut ChaCha8Rng) -> Outcome {
    if ctx.fields.len() < 2 {
        return Err(needs_two("extension_linearity"));
    }
    let mut worst: f64 = 0.0;
    for i in 0..k {
        let p = ctx.entry.sample_point(rng);
        let path = extension_path(ctx, &p, length, rng);
        let a = &ctx.fields[i % ctx.fields.len()];
        let b = &ctx.fields[(i + 1) % ctx.fields.len()];
        let sa = killing::ev_embedding(ctx.conn, a, &p)?;
        let sb = killing::ev_embedding(ctx.conn, b, &p)?;
        let c = rng.random_range(-2.0..2.0);
        let ea = killing::extend_killing(ctx.conn, &sa, &path, &ctx.cfg)?;
        let eb = killing::extend_killing(ctx.conn, &sb, &path, &ctx.cfg)?;
        let ec = killing::extend_killing(ctx.conn, &sa.combine(c, &sb), &path, &ctx.cfg)?;
        if ea.base.chart != ec.base.chart || eb.base.chart != ec.base.chart {
            return Err(GeomError::NoCommonChart.into());
        }
        worst = worst.max((ec.vec - (ea.vec * c + eb.vec)).norm());
    }
    Ok(Measurement::ok(worst, k))
}

/// `exp(ξ)` for each field, certified on the given points.
fn exponentials(ctx: &Context, pts: &[Point]) -> Result<Vec<Diffeo>, GeomError> {
    ctx.fields.iter().map(|f| automorphism::exp_aut(ctx.conn, f, pts, ctx.tol_kill, &ctx.cfg)).collect()
}

fn automorphism_affine(ctx: &Context, k: usize, rng: &mut ChaCha8Rng) -> Outcome {
    let pts = points(ctx, rng, k);
    let mut worst: f64 = 0.0;
    for f in exponentials(ctx, &pts)? {
        for p in &pts {
            worst = worst.max(automorphism::affine_residual_max(&f, ctx.conn, ctx.conn, p, &ctx.cfg)?);
        }
    }
    Ok(Measurement::ok(worst, pts.len() * ctx.fields.len()))
}

fn kappa_pullback(ctx: &Context, k: usize, rng: &mut ChaCha8Rng) -> Outcome {
    let n = ctx.entry.atlas.dim();
    let pts = points(ctx, rng, k);
    let mut worst: f64 = 0.0;
    for f in exponentials(ctx, &pts)? {
        let fd = frame_lift(&f);
        for p in &pts {
            let frame = random_frame(rng, p);
            let ft = FrameTangent::new(random_vec(rng, n, 1.0), Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0)));
            worst = worst.max(automorphism::kappa_pullback_defect(ctx.conn, &fd, &frame, &ft, &ctx.cfg)?);
        }
    }
    Ok(Measurement::ok(worst, pts.len() * ctx.fields.len()))
}

fn exp_commutes(ctx: &Context, k: usize, rng: &mut ChaCha8Rng) -> Outcome {
    let n = ctx.entry.atlas.dim();
    let pts = points(ctx, rng, k);
    let mut worst: f64 = 0.0;
    for f in exponentials(ctx, &pts)? {
        for p in &pts {
            let v = Tangent::new(p.clone(), random_vec(rng, n, 0.7));
            worst = worst.max(automorphism::exp_commutes_defect(ctx.conn, &f, &v, &ctx.cfg)?);
        }
    }
    Ok(Measurement::ok(worst, pts.len() * ctx.fields.len()))
}

/// `Fr(f ∘ g)` from the Jacobian of the composite against `Fr(f) ∘ Fr(g)`
/// from the two frame lifts, for consecutive fields.
fn frame_homomorphism(ctx: &Context, k: usize, rng: &mut ChaCha8Rng) -> Outcome {
    if ctx.fields.len() < 2 {
        return Err(needs_two("frame_homomorphism"));
    }
    let pts = points(ctx, rng, k);
    let exps = exponentials(ctx, &pts)?;
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for pair in exps.windows(2) {
        let (f, g) = (&pair[0], &pair[1]);
        let fg = f.compose(g);
        for p in &pts {
            let frame = random_frame(rng, p);
            let (img, j) = fg.jacobian(&frame.base(), &ctx.cfg)?;
            let direct = Frame::new(img.chart, img.coords, j * &frame.g)?;
            let lifted = frame_lift(f).apply(&frame_lift(g).apply(&frame, &ctx.cfg)?, &ctx.cfg)?;
            worst = worst.max(automorphism::frame_distance(&ctx.entry.atlas, &direct, &lifted)?);
            count += 1;
        }
    }
    Ok(Measurement::ok(worst, count))
}

fn gram_rank(ctx: &Context, expected: Option<usize>, rng: &mut ChaCha8Rng) -> Outcome {
    let p = ctx.entry.sample_point(rng);
    let seeds = ctx.fields.iter().map(|f| killing::ev_embedding(ctx.conn, f, &p)).collect::<Result<Vec<_>, _>>()?;
    let rank = killing::gram_rank(&seeds)?;
    let expected = expected.unwrap_or(ctx.fields.len());
    let error = (rank != expected).then(|| format!("rank {rank}, expected {expected}"));
    Ok(Measurement { worst: rank.abs_diff(expected) as f64, samples: 1, error })
}

fn parameter_flow(ctx: &Context, k: usize, rng: &mut ChaCha8Rng) -> Outcome {
    let family = KappaFamily::new(ctx.conn);
    let mut worst: f64 = 0.0;
    for _ in 0..k {
        let p = ctx.entry.sample_point(rng);
        let frame = random_frame(rng, &p);
        worst = worst.max(flows::parameter_flow_derivative_defect(&family, &frame.to_state(), &ctx.cfg)?);
    }
    Ok(Measurement::ok(worst, k))
}

/// Counts seeds whose geodesic stops short of the horizon.
fn completeness(ctx: &Context, k: usize, horizon: f64, rng: &mut ChaCha8Rng) -> Outcome {
    let n = ctx.entry.atlas.dim();
    let seeds: Vec<Tangent> = (0..k)
        .map(|_| {
            let p = ctx.entry.sample_point(rng);
            Tangent::new(p, catalog::random_unit_vector(rng, n))
        })
        .collect();
    let report = geodesics::completeness_probe(ctx.conn, &seeds, horizon, &ctx.cfg);
    let failed: Vec<String> = report
        .seeds
        .iter()
        .filter_map(|s| s.failure.as_ref().map(|e| format!("stopped at t = {:.4} ({e})", s.reached)))
        .collect();
    let error = (!failed.is_empty()).then(|| format!("{} of {k} seeds: {}", failed.len(), failed.join("; ")));
    Ok(Measurement { worst: failed.len() as f64, samples: k, error })
}
