//! End-to-end pipelines behind the CLI subcommands.

use std::time::Instant;

use rayon::prelude::*;

use crate::annulus::{build_trapping_annulus, verify_annulus, Annulus, AnnulusOptions};
use crate::bernstein::{min_degree_for_tolerance, SampledField};
use crate::cycles::{
    find_cycles, multiplicity, sample_displacement, theorem1_splitting, FSource, FindOptions, LimitCycle,
    MultiplicityOptions, ReturnOptions, Section, SplittingOptions,
};
use crate::discriminant::{phi, q2_search, root_count_congruence, DiscriminantError, PhiOptions, PhiValue};
use crate::field::{unit_circle_defect, GradientCollapse, PlanarField, PolyVectorField};
use crate::flow::{integrate, FlowOptions};
use crate::poly2::{linspace, Poly2};

use super::report::{AnnulusPayload, CensusEntry, Payload, PipelineOutput, Report, RotateRow};
use super::{
    build_numeric_f, collapse_cr_norm, distance_log, CornerCurve, DistanceLogEntry, ExperimentConfig, FSpec, LabError,
    Pipeline, PortraitAssets,
};

/// Boundary probes per annulus curve.
const ANNULUS_SAMPLES: usize = 256;
/// Times the Φ window may be halved when returns fail.
const PHI_HALVINGS: usize = 6;
const DISPLACEMENT_SAMPLES: usize = 41;
const PORTRAIT_ORBITS: usize = 6;
const PORTRAIT_TIME: f64 = 12.0;
const PORTRAIT_POINTS: usize = 400;

struct Ctx {
    cfg: ExperimentConfig,
    x: PolyVectorField,
    section: Section,
    find: FindOptions,
}

impl Ctx {
    fn new(cfg: &ExperimentConfig) -> Result<Self, LabError> {
        let x = cfg.system.build()?;
        let s = cfg.section;
        let section = Section::new(&x, s.base, s.direction, s.half_length)?;
        let ret = ReturnOptions { flow: FlowOptions::with_tol(cfg.tolerances.flow), ..Default::default() };
        let find = FindOptions { ret, xtol: cfg.tolerances.xtol, ..Default::default() };
        Ok(Self { cfg: cfg.clone(), x, section, find })
    }

    fn range(&self) -> (f64, f64) {
        (self.cfg.search.range[0], self.cfg.search.range[1])
    }

    fn census(&self, cycles: &[LimitCycle]) -> Vec<CensusEntry> {
        cycles.iter().map(|c| CensusEntry::new(&c.summary(), c.tol, self.find.xtol)).collect()
    }

    /// The cycle of `X` nearest `ξ = 0`, with its multiplicity.
    fn base_cycle(&self) -> Result<LimitCycle, LabError> {
        let cycles = find_cycles(&self.x, &self.section, self.range(), self.cfg.search.seeds, &self.find);
        let mut cycle = cycles
            .into_iter()
            .min_by(|a, b| a.xi.abs().total_cmp(&b.xi.abs()))
            .ok_or_else(|| LabError::Invalid(format!("no cycle of the system on the search range {:?}", self.range())))?;
        cycle.multiplicity = Some(multiplicity(&self.x, &cycle, &MultiplicityOptions::default(), &self.find.ret)?);
        Ok(cycle)
    }

    fn section_ends(&self) -> [[f64; 2]; 2] {
        let h = self.section.half_length();
        [self.section.point(-h), self.section.point(h)]
    }

    fn orbits<F: PlanarField + ?Sized>(&self, field: &F) -> Vec<Vec<[f64; 2]>> {
        let h = 0.9 * self.section.half_length();
        linspace(-h, h, PORTRAIT_ORBITS)
            .into_par_iter()
            .filter_map(|xi| {
                integrate(field, self.section.point(xi), PORTRAIT_TIME, &self.find.ret.flow)
                    .ok()
                    .map(|o| o.uniform_polyline(PORTRAIT_POINTS))
            })
            .collect()
    }

    fn polynomial_f(&self) -> Result<Option<Poly2>, LabError> {
        Ok(match &self.cfg.params.f {
            FSpec::Exact => Some(unit_circle_defect()),
            FSpec::Literal(src) => Some(Poly2::parse(src)?),
            FSpec::Numeric => None,
        })
    }
}

/// Runs the configured pipeline. Module errors are recorded in the report
/// rather than returned, and whatever was computed before them is kept.
pub fn run_pipeline(cfg: &ExperimentConfig) -> PipelineOutput {
    let start = Instant::now();
    let mut out = PipelineOutput { report: Report::new(cfg.clone()), assets: PortraitAssets::default(), annulus: None };
    let result = Ctx::new(cfg).and_then(|ctx| {
        out.assets.section = Some(ctx.section_ends());
        match cfg.pipeline {
            Pipeline::Find => run_find(&ctx, &mut out),
            Pipeline::SplitTheorem1 => run_split(&ctx, &mut out),
            Pipeline::RotateTheorem2 => run_rotate(&ctx, &mut out),
            Pipeline::BernsteinStudy => run_bernstein(&ctx, &mut out),
            Pipeline::Annulus => run_annulus(&ctx, &mut out),
            Pipeline::Q2Search => run_q2(&ctx, &mut out),
        }
    });
    if let Err(e) = result {
        out.report.errors.push(e.to_string());
    }
    out.report.wall_clock_seconds = start.elapsed().as_secs_f64();
    out
}

fn run_find(ctx: &Ctx, out: &mut PipelineOutput) -> Result<(), LabError> {
    let mut cycles = find_cycles(&ctx.x, &ctx.section, ctx.range(), ctx.cfg.search.seeds, &ctx.find);
    let mults: Vec<_> = cycles
        .par_iter()
        .map(|c| multiplicity(&ctx.x, c, &MultiplicityOptions::default(), &ctx.find.ret))
        .collect();
    let mut multiplicities = Vec::with_capacity(mults.len());
    let mut failures = Vec::new();
    for (c, m) in cycles.iter_mut().zip(mults) {
        match m {
            Ok(m) => {
                c.multiplicity = Some(m.clone());
                multiplicities.push(Some(m));
            }
            Err(e) => {
                failures.push(format!("xi = {:e}: {e}", c.xi));
                multiplicities.push(None);
            }
        }
    }
    let (lo, hi) = ctx.range();
    let xis = linspace(lo, hi, DISPLACEMENT_SAMPLES);
    let displacement = xis
        .iter()
        .zip(sample_displacement(&ctx.x, &ctx.section, &xis, &ctx.find.ret))
        .filter_map(|(&xi, d)| d.ok().map(|d| (xi, d)))
        .collect();
    let r = &mut out.report;
    r.census = ctx.census(&cycles);
    r.check("cycle found", !cycles.is_empty(), format!("{} cycles on [{lo}, {hi}]", cycles.len()));
    r.check("multiplicity determined", failures.is_empty(), failures.join("; "));
    r.payload = Some(Payload::Find { displacement, multiplicities });
    out.assets.cycles = cycles.iter().map(|c| c.polyline.clone()).collect();
    out.assets.orbits = ctx.orbits(&ctx.x);
    Ok(())
}

fn run_split(ctx: &Ctx, out: &mut PipelineOutput) -> Result<(), LabError> {
    let p = &ctx.cfg.params;
    let rect = p.rect()?;
    let cycle = ctx.base_cycle()?;
    let numeric: Option<SampledField> = match p.f {
        FSpec::Numeric => Some(build_numeric_f(&cycle, p.window)?),
        _ => None,
    };
    let poly = ctx.polynomial_f()?;
    let source = match (&numeric, poly) {
        (Some(field), _) => FSource::Sampled { field, rect },
        (None, Some(f)) => FSource::Exact(f),
        (None, None) => unreachable!("numeric F is built above"),
    };
    let opts = SplittingOptions {
        find: ctx.find,
        range: ctx.range(),
        n_seeds: ctx.cfg.search.seeds,
        degree_cap: p.degree_cap,
        grid_density: ctx.cfg.tolerances.grid,
        multiplicity: MultiplicityOptions::default(),
    };
    let outcome = theorem1_splitting(&ctx.x, &cycle, &source, p.lambda, p.r, p.eps_target, &opts)?;
    let density = ctx.cfg.tolerances.grid;
    let log: Vec<DistanceLogEntry> = match (&numeric, &outcome.report.degree_search) {
        (Some(f), Some(search)) => {
            let degrees: Vec<usize> = search.trials.iter().map(|t| t.m).collect();
            distance_log(f, &degrees, p.lambda, rect, p.r, density)?
        }
        _ => vec![DistanceLogEntry {
            degree: None,
            cr_distance: collapse_cr_norm(&outcome.r_poly, p.lambda, rect, p.r, density),
            gap_to_limit: 0.0,
        }],
    };

    let rep = &outcome.report;
    out.report.census = ctx.census(&outcome.cycles);
    out.assets.cycles = outcome.cycles.iter().map(|c| c.polyline.clone()).collect();
    let detail: Vec<String> = rep.census.iter().map(|c| format!("{:.6}", c.radius)).collect();
    out.report.check("at least three cycles", rep.census.len() >= 3, format!("radii {}", detail.join(", ")));
    out.report.check("stability alternates", rep.alternating, "");
    out.report.check(
        "divergence positivity",
        rep.positivity,
        format!("middle exponent {:e}, terms {:?}", rep.middle_exponent, rep.divergence_terms),
    );
    let decreasing = log.windows(2).all(|w| w[1].cr_distance < w[0].cr_distance);
    let cr: Vec<String> = log.iter().map(|e| format!("{:e}", e.cr_distance)).collect();
    out.report.check("cr distance decreases with degree", decreasing, cr.join(", "));

    // The annulus is built for the field whose cycle is stable.
    let (base, base_cycle) = if rep.time_reversed {
        let xr = ctx.x.reversed();
        let c = LimitCycle::through(&xr, &ctx.section.reversed(), cycle.xi, &ctx.find.ret, ctx.find.polyline_points)?;
        let c = LimitCycle { multiplicity: cycle.multiplicity.clone(), exponent: -cycle.exponent, ..c };
        (xr, c)
    } else {
        (ctx.x.clone(), cycle)
    };
    let annulus = annulus_payload(ctx, &base, &base_cycle, Some(&outcome.perturbed), out);
    out.assets.orbits = ctx.orbits(&outcome.perturbed);
    out.report.payload = Some(Payload::Split { splitting: outcome.report, distance_log: log, annulus });
    Ok(())
}

/// Builds and verifies the annulus, recording checks; failures become errors
/// in the report without aborting the pipeline.
fn annulus_payload(
    ctx: &Ctx,
    x: &PolyVectorField,
    cycle: &LimitCycle,
    perturbed: Option<&GradientCollapse>,
    out: &mut PipelineOutput,
) -> Option<AnnulusPayload> {
    let p = &ctx.cfg.params;
    let opts = AnnulusOptions { ret: ctx.find.ret, ..Default::default() };
    let annulus = match build_trapping_annulus(x, cycle, p.lambda0, p.annulus[0], p.annulus[1], &opts) {
        Ok(a) => a,
        Err(e) => {
            out.report.errors.push(format!("annulus: {e}"));
            return None;
        }
    };
    let base = verify_annulus(x, &annulus, ANNULUS_SAMPLES);
    out.report.check(
        "annulus traps X",
        base.pass,
        format!("inward flux {:e}, escaped {}/{}", base.min_inward_flux, base.escaped, base.seeds),
    );
    out.report.check("annulus corners", base.corner_counts == [2, 2], format!("{:?}", base.corner_counts));
    let perturbed = perturbed.map(|y| {
        let v = verify_annulus(y, &annulus, ANNULUS_SAMPLES);
        out.report.check(
            "annulus traps the perturbed field",
            v.pass,
            format!("inward flux {:e}, escaped {}/{}", v.min_inward_flux, v.escaped, v.seeds),
        );
        v
    });
    out.assets.annulus = corner_curves(&annulus);
    let payload = AnnulusPayload {
        xi: [annulus.xi1, annulus.xi2],
        lambda0: p.lambda0,
        lambda0_used: [annulus.s1.lambda0, annulus.s2.lambda0],
        base,
        perturbed,
    };
    out.annulus = Some(annulus);
    Some(payload)
}

fn corner_curves(a: &Annulus) -> Vec<CornerCurve> {
    [&a.s1, &a.s2]
        .into_iter()
        .map(|c| CornerCurve { points: c.points.clone(), corners: c.corners.to_vec() })
        .collect()
}

fn run_rotate(ctx: &Ctx, out: &mut PipelineOutput) -> Result<(), LabError> {
    let p = &ctx.cfg.params;
    let cycle = ctx.base_cycle()?;
    let d = cycle.multiplicity.as_ref().map_or(1, |m| m.d);
    out.report.census = ctx.census(std::slice::from_ref(&cycle));
    let phi_opts = PhiOptions { window: p.phi_window, ret: ctx.find.ret, ..Default::default() };
    let rows: Vec<(RotateRow, Vec<Vec<[f64; 2]>>)> = p
        .sweep
        .par_iter()
        .map(|&mu| {
            let y = ctx.x.rotate_family(mu * p.lambda, p.eps);
            let mut row = RotateRow {
                multiplier: mu,
                lambda_eps: mu * p.lambda * p.eps,
                census: Vec::new(),
                phi_window: p.phi_window,
                cycles_in_window: 0,
                roots_in_window: None,
                phi: None,
                factor: None,
                factor_real_roots: None,
                boundary: None,
                error: None,
            };
            let cycles = find_cycles(&y, &ctx.section, ctx.range(), ctx.cfg.search.seeds, &ctx.find);
            row.census = cycles.iter().map(LimitCycle::summary).collect();
            match phi_shrinking(&y, &ctx.section, d as usize, &phi_opts) {
                Ok((v, w)) => {
                    row.phi_window = w;
                    row.cycles_in_window = cycles.iter().filter(|c| c.xi.abs() <= w).count();
                    row.roots_in_window = Some(
                        v.factor.roots().iter().filter(|z| z.im.abs() <= 1e-6 * w && z.re.abs() <= w).count(),
                    );
                    row.phi = Some(v.phi);
                    row.factor = Some(v.factor.coeffs().to_vec());
                    row.factor_real_roots = Some(v.census.distinct_real);
                    row.boundary = Some(v.boundary);
                }
                Err(e) => row.error = Some(e.to_string()),
            }
            (row, cycles.into_iter().map(|c| c.polyline).collect())
        })
        .collect();
    let mut table = Vec::with_capacity(rows.len());
    for (row, polylines) in rows {
        let tag = format!("λε = {:+.4}", row.lambda_eps);
        match (&row.error, row.factor_real_roots, row.phi, row.boundary) {
            (None, Some(real), Some(phi_v), Some(boundary)) => {
                let inside = row.roots_in_window.unwrap_or(0);
                out.report.check(
                    &format!("{tag}: cycles match real roots of the factor"),
                    inside == row.cycles_in_window,
                    format!(
                        "window {:e}: {} cycles, {inside} real roots inside, {real} real roots in all",
                        row.phi_window, row.cycles_in_window
                    ),
                );
                let law = boundary
                    || root_count_congruence(d as usize, phi_v.signum())
                        .map(|allowed| allowed.contains(&real))
                        .unwrap_or(false);
                out.report.check(&format!("{tag}: sign law"), law, format!("Φ = {phi_v:e}, boundary {boundary}"));
            }
            _ => out.report.errors.push(format!("{tag}: {}", row.error.clone().unwrap_or_default())),
        }
        out.assets.cycles.extend(polylines);
        table.push(row);
    }
    if d % 2 == 0 && table.len() >= 2 {
        let counts: Vec<usize> = table.iter().map(|r| r.census.len()).collect();
        let changes = counts.iter().any(|&c| c != counts[0]);
        out.report.check("even degree census changes across the sweep", changes, format!("{counts:?}"));
    }
    out.assets.orbits = ctx.orbits(&ctx.x);
    out.report.payload = Some(Payload::Rotate { base_multiplicity: d, phi_window: p.phi_window, rows: table });
    Ok(())
}

/// `Φ` on the configured window, halved until every return along the
/// samples exists (orbits of some fields escape to infinity close to the cycle).
fn phi_shrinking(
    y: &PolyVectorField,
    section: &Section,
    d: usize,
    opts: &PhiOptions,
) -> Result<(PhiValue, f64), DiscriminantError> {
    let mut o = *opts;
    let mut last = None;
    for _ in 0..=PHI_HALVINGS {
        match phi(y, section, d, &o) {
            Ok(v) => return Ok((v, o.window)),
            Err(e @ DiscriminantError::Cycle(_)) => last = Some(e),
            Err(e) => return Err(e),
        }
        o.window *= 0.5;
    }
    Err(last.expect("at least one attempt"))
}

fn run_bernstein(ctx: &Ctx, out: &mut PipelineOutput) -> Result<(), LabError> {
    let p = &ctx.cfg.params;
    let rect = p.rect()?;
    let order = p.r + 1;
    let f = match ctx.polynomial_f()? {
        Some(poly) => SampledField::from_poly(poly, order),
        None => {
            let cycle = ctx.base_cycle()?;
            out.report.census = ctx.census(std::slice::from_ref(&cycle));
            out.assets.cycles = vec![cycle.polyline.clone()];
            build_numeric_f(&cycle, p.window)?
        }
    };
    out.report.payload = Some(Payload::Bernstein { order, eps_target: p.eps_target, search: None });
    let search = min_degree_for_tolerance(&f, rect, order, p.eps_target, p.degree_cap, ctx.cfg.tolerances.grid)?;
    let best = search.accepted().max_error;
    out.report.check(
        "tolerance reached",
        true,
        format!("m = n = {} gives {best:e} <= {:e}", search.m, p.eps_target),
    );
    out.report.payload = Some(Payload::Bernstein { order, eps_target: p.eps_target, search: Some(search) });
    Ok(())
}

fn run_annulus(ctx: &Ctx, out: &mut PipelineOutput) -> Result<(), LabError> {
    let cycle = ctx.base_cycle()?;
    out.report.census = ctx.census(std::slice::from_ref(&cycle));
    out.assets.cycles = vec![cycle.polyline.clone()];
    let perturbed = ctx.polynomial_f()?.map(|f| GradientCollapse::new(&ctx.x, &f, ctx.cfg.params.lambda));
    let payload = annulus_payload(ctx, &ctx.x, &cycle, perturbed.as_ref(), out);
    out.assets.orbits = ctx.orbits(&ctx.x);
    if let Some(a) = payload {
        out.report.payload = Some(Payload::Annulus(a));
    }
    Ok(())
}

fn run_q2(ctx: &Ctx, out: &mut PipelineOutput) -> Result<(), LabError> {
    let p = &ctx.cfg.params;
    let cycle = ctx.base_cycle()?;
    let d = cycle.multiplicity.as_ref().map_or(1, |m| m.d) as usize;
    out.report.census = ctx.census(std::slice::from_ref(&cycle));
    out.assets.cycles = vec![cycle.polyline.clone()];
    let opts = PhiOptions { window: p.phi_window, ret: ctx.find.ret, ..Default::default() };
    let q2 = q2_search(&ctx.x, &ctx.section, d, p.q2_radius, p.q2_samples, ctx.cfg.seed, &opts)?;
    let best = q2.best.as_ref().map(|b| format!(", min Φ = {:e} at sample {}", b.phi, b.seed_index));
    out.report.check(
        "samples evaluated",
        p.q2_samples == 0 || !q2.samples.is_empty(),
        format!("{} of {} samples failed{}", q2.failures.len(), p.q2_samples, best.unwrap_or_default()),
    );
    out.assets.orbits = ctx.orbits(&ctx.x);
    out.report.payload = Some(Payload::Q2(q2));
    Ok(())
}
