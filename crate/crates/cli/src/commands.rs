//! Command implementations: scenario validation + criterion (`check`), the
//! full section pipeline (`section`), suspension round trips (`suspend`) and
//! the operator-identity suite (`identities`).

use std::path::Path;

use anyhow::{anyhow, Context};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use flowsect::criterion::{
    build_closed_one_form, criterion_fields, harmonicity_certificate, honda_check,
    ConstructionOutcome, Verdict,
};
use flowsect::form::KForm;
use flowsect::grid::{wrap_half, ScalarField, TorusDomain};
use flowsect::metric::MetricField;
use flowsect::projection::{
    check_proposition_bound, hodge_closed_projection, verify_homotopy_formula, BoxChart,
    ChartField, ChartForm, CylinderForm, FnField, GaussLegendre, ProductForm,
    DEFAULT_BOUND_SLACK,
};
use flowsect::scenario::Scenario;
use flowsect::section::{
    circle_map, extract_section, invariant_measure_check, periods, poincare_csv, poincare_map,
    rationalize_periods, section_csv, suspend, PoincareData,
};

use crate::config::{write_field_file, LoadedConfig, PipelineOptions};
use crate::report::{ReportBuilder, RunVerdict};

/// Exit code for a failed criterion (`check`).
pub const EXIT_CRITERION_FAIL: i32 = 2;
/// Exit code for an invalid scenario.
pub const EXIT_INVALID_SCENARIO: i32 = 3;
/// Exit code when no section could be constructed (`section`, `suspend`).
pub const EXIT_NO_SECTION: i32 = 4;
/// Exit code for config parse errors.
pub const EXIT_PARSE_ERROR: i32 = 64;

pub struct CommandOutput {
    pub exit_code: i32,
    pub report: String,
}

fn config_name(cfg: &LoadedConfig) -> String {
    cfg.path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| cfg.path.display().to_string())
}

fn require_scenario(cfg: &LoadedConfig) -> anyhow::Result<&Scenario> {
    cfg.scenario
        .as_ref()
        .ok_or_else(|| anyhow!("{}: config has no scenario sections", cfg.path.display()))
}

/// `check`: validation, criterion inequality, harmonicity certificate.
pub fn cmd_check(cfg: &LoadedConfig) -> anyhow::Result<CommandOutput> {
    let scenario = require_scenario(cfg)?;
    let mut rb = ReportBuilder::new("check", &config_name(cfg));
    let validation = scenario.validate();
    rb.validation(&validation);
    if !validation.passed() {
        return Ok(CommandOutput {
            exit_code: EXIT_INVALID_SCENARIO,
            report: rb.finish(RunVerdict::InvalidScenario.as_str(), EXIT_INVALID_SCENARIO),
        });
    }
    let criterion = criterion_fields(scenario)?;
    rb.criterion(&criterion);
    rb.harmonicity(&harmonicity_certificate(scenario)?);
    let (verdict, exit_code) = match criterion.verdict {
        Verdict::Pass => ("PASS", 0),
        Verdict::Fail => ("FAIL", EXIT_CRITERION_FAIL),
    };
    Ok(CommandOutput { exit_code, report: rb.finish(verdict, exit_code) })
}

/// `section`: the full pipeline, CSV artifacts included.
pub fn cmd_section(cfg: &LoadedConfig, out_dir: &Path) -> anyhow::Result<CommandOutput> {
    let scenario = require_scenario(cfg)?;
    let mut rb = ReportBuilder::new("section", &config_name(cfg));
    let (exit_code, verdict, _) =
        run_section_pipeline(scenario, &cfg.pipeline, out_dir, &mut rb)?;
    Ok(CommandOutput { exit_code, report: rb.finish(verdict.as_str(), exit_code) })
}

/// Shared section pipeline; appends report sections and writes CSVs.
fn run_section_pipeline(
    scenario: &Scenario,
    opts: &PipelineOptions,
    out_dir: &Path,
    rb: &mut ReportBuilder,
) -> anyhow::Result<(i32, RunVerdict, Option<PoincareData>)> {
    let validation = scenario.validate();
    rb.validation(&validation);
    if !validation.passed() {
        return Ok((EXIT_INVALID_SCENARIO, RunVerdict::InvalidScenario, None));
    }
    let criterion = criterion_fields(scenario)?;
    rb.criterion(&criterion);

    let cert = match build_closed_one_form(scenario)? {
        ConstructionOutcome::Rejected(f) => {
            rb.certificate_rejected(f.omega_norm, f.min_pairing, &f.point);
            return Ok((EXIT_NO_SECTION, RunVerdict::NoSectionConstructed, None));
        }
        ConstructionOutcome::Accepted(cert) => cert,
    };
    rb.certificate_accepted(
        cert.min_pairing,
        cert.closed.distance,
        cert.closed.d_bound,
        cert.lower_bound_check,
    );

    // rationalization and the primitive can still fail (budget, positivity)
    let constructed = (|| -> flowsect::Result<_> {
        let c = periods(&cert.closed.omega)?;
        let budget = opts.budget_factor * cert.min_pairing;
        let pd = rationalize_periods(
            &c,
            &scenario.x,
            budget,
            opts.q_max,
            opts.class_hint.as_deref(),
        )?;
        let map = circle_map(&pd, &cert.closed, scenario)?;
        let section = extract_section(&map, opts.level, scenario)?;
        Ok((pd, section))
    })();
    let (pd, section) = match constructed {
        Ok(v) => v,
        Err(e) => {
            rb.error_note(&e.to_string());
            return Ok((EXIT_NO_SECTION, RunVerdict::NoSectionConstructed, None));
        }
    };
    rb.periods(&pd);
    let honda = honda_check(&section, scenario)?;
    rb.section(section.samples.len(), section.transversality_margin, &honda);

    // evenly strided seeds from the sample cloud
    let count = opts.seeds.min(section.samples.len()).max(1);
    let seeds: Vec<Vec<f64>> = (0..count)
        .map(|i| section.samples[i * section.samples.len() / count].point.clone())
        .collect();
    let pdata = poincare_map(&seeds, scenario, &section.map, opts.level)?;
    rb.poincare(seeds.len(), &pdata.stats);

    if scenario.domain.dim() == 2 && opts.measure_arcs > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.rng_seed);
        let measure = invariant_measure_check(&section, scenario, opts.measure_arcs, &mut rng)?;
        rb.measure(&measure);
    }

    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;
    std::fs::write(out_dir.join("section.csv"), section_csv(&section))?;
    std::fs::write(out_dir.join("poincare.csv"), poincare_csv(&pdata))?;

    let verdict = if criterion.verdict == Verdict::Pass {
        RunVerdict::SectionFoundCriterionPass
    } else {
        RunVerdict::SectionFoundCriterionInconclusive
    };
    Ok((0, verdict, Some(pdata)))
}

/// `suspend`: build the mapping-torus scenario, emit it as a config with
/// data files, run the section pipeline on it and report the recovered-map
/// error.
pub fn cmd_suspend(cfg: &LoadedConfig, out_dir: &Path) -> anyhow::Result<CommandOutput> {
    let (spec, flow_resolution) = cfg
        .suspension
        .as_ref()
        .ok_or_else(|| anyhow!("{}: config has no [suspension] section", cfg.path.display()))?;
    let mut rb = ReportBuilder::new("suspend", &config_name(cfg));

    let scenario = match suspend(spec, *flow_resolution) {
        Ok(s) => s,
        Err(flowsect::Error::InvalidScenario { report }) => {
            rb.error_note(&format!("suspended scenario failed validation: {report}"));
            return Ok(CommandOutput {
                exit_code: EXIT_INVALID_SCENARIO,
                report: rb
                    .finish(RunVerdict::InvalidScenario.as_str(), EXIT_INVALID_SCENARIO),
            });
        }
        Err(e) => return Err(e.into()),
    };

    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;
    let emitted = emit_scenario_config(&scenario, out_dir)?;

    // flow-axis class is the natural hint for a suspension section
    let mut opts = cfg.pipeline.clone();
    if opts.class_hint.is_none() {
        let mut hint = vec![0i64; scenario.domain.dim()];
        hint[0] = 1;
        opts.class_hint = Some(hint);
    }
    let (exit_code, verdict, pdata) =
        run_section_pipeline(&scenario, &opts, out_dir, &mut rb)?;

    if let Some(pdata) = &pdata {
        let mut err = 0.0f64;
        for (seed, image) in pdata.seeds.iter().zip(&pdata.images) {
            let expected = spec.base.apply(&seed[1..]);
            for (a, &e) in expected.iter().enumerate() {
                err = err.max(wrap_half(image[1 + a] - e).abs());
            }
        }
        rb.suspension(err, &emitted);
    }
    Ok(CommandOutput { exit_code, report: rb.finish(verdict.as_str(), exit_code) })
}

/// Serialize a scenario into `suspended.toml` plus field data files.
fn emit_scenario_config(scenario: &Scenario, out_dir: &Path) -> anyhow::Result<String> {
    let n = scenario.domain.dim();
    let mut metric_files = Vec::new();
    for (i, comp) in scenario.metric.lower_components().iter().enumerate() {
        let name = format!("metric_{i}.dat");
        write_field_file(&out_dir.join(&name), comp)?;
        metric_files.push(name);
    }
    let mut x_files = Vec::new();
    for (a, comp) in scenario.x.components().iter().enumerate() {
        let name = format!("x_{a}.dat");
        write_field_file(&out_dir.join(&name), comp)?;
        x_files.push(name);
    }
    write_field_file(&out_dir.join("omega.dat"), &scenario.omega.components()[0])?;

    let res: Vec<String> =
        scenario.domain.resolution().iter().map(|r| r.to_string()).collect();
    let quote = |names: &[String]| -> String {
        let items: Vec<String> = names.iter().map(|f| format!("\"{f}\"")).collect();
        items.join(", ")
    };
    let doc = format!(
        "[domain]\ndim = {n}\nresolution = [{}]\n\n[metric]\nkind = \"files\"\nfiles = [{}]\n\n\
         [vector_field]\nfiles = [{}]\n\n[volume_form]\nkind = \"file\"\nfile = \"omega.dat\"\n",
        res.join(", "),
        quote(&metric_files),
        quote(&x_files),
    );
    let name = "suspended.toml";
    std::fs::write(out_dir.join(name), doc)?;
    Ok(name.to_string())
}

/// `identities`: the operator-identity suite on the configured scenario plus
/// seeded random fields.
pub fn cmd_identities(cfg: &LoadedConfig) -> anyhow::Result<CommandOutput> {
    let scenario = require_scenario(cfg)?;
    let mut rb = ReportBuilder::new("identities", &config_name(cfg));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.pipeline.rng_seed);
    let domain = scenario.domain.clone();
    let n = domain.dim();
    let mut all = true;

    let random_form = |degree: usize, rng: &mut ChaCha8Rng| -> KForm {
        let count = KForm::zero(&domain, degree).components().len();
        let comps = (0..count)
            .map(|_| ScalarField::random_band_limited(&domain, 3, 1.0, rng))
            .collect();
        KForm::from_components(&domain, degree, comps).expect("component count")
    };

    // d∘d = 0 over random band-limited forms
    {
        let flat = MetricField::flat(&domain);
        let max_n = *domain.resolution().iter().max().unwrap() as f64;
        let mut worst = 0.0f64;
        for trial in 0..100 {
            let degree = trial % n.saturating_sub(1).max(1);
            let omega = random_form(degree, &mut rng);
            let dd = omega.exterior_derivative()?.exterior_derivative()?;
            let sup = flat.sup_norm(&omega)?.max(1e-12);
            worst = worst.max(flat.sup_norm(&dd)? / (sup * max_n * max_n));
        }
        all &= rb.identity("dd_zero", worst, 1e-9);
    }

    let random_spd = random_spd_metric(&domain, &mut rng)?;
    let metrics: [(&str, &MetricField); 2] =
        [("scenario", &scenario.metric), ("random_spd", &random_spd)];

    // ⋆⋆ sign and ⋆ isometry
    for (label, g) in &metrics {
        let mut worst_sign = 0.0f64;
        let mut worst_iso = 0.0f64;
        for degree in 0..=n {
            let omega = random_form(degree, &mut rng);
            let ss = g.hodge_star(&g.hodge_star(&omega)?)?;
            let sign = if (degree * (n - degree)) % 2 == 0 { 1.0 } else { -1.0 };
            let residual = ss.sub(&omega.scaled(sign))?.max_abs_component();
            worst_sign = worst_sign.max(residual / omega.max_abs_component().max(1.0));
            if degree == 1 || degree + 1 == n {
                let a = g.sup_norm(&omega)?;
                let b = g.sup_norm(&g.hodge_star(&omega)?)?;
                worst_iso = worst_iso.max((a - b).abs() / a.max(1.0));
            }
        }
        all &= rb.identity(&format!("star_star_sign_{label}"), worst_sign, 1e-10);
        all &= rb.identity(&format!("star_isometry_{label}"), worst_iso, 1e-9);
    }

    // ⋆(i_X Ω) = (−1)^{n−1} θ_X with Ω the Riemannian volume
    for (label, g) in &metrics {
        let omega = g.volume_form();
        let canonical = omega.contract(&scenario.x)?;
        let theta = g.flat_map(&scenario.x)?;
        let sign = if (n - 1) % 2 == 0 { 1.0 } else { -1.0 };
        let residual = g
            .hodge_star(&canonical)?
            .sub(&theta.scaled(sign))?
            .max_abs_component()
            / theta.max_abs_component().max(1.0);
        all &= rb.identity(&format!("star_canonical_{label}"), residual, 1e-9);

        // norm chain ‖δ(i_X Ω)‖ = ‖dθ‖
        let delta = g.codifferential(&canonical)?;
        let chain =
            (g.sup_norm(&delta)? - g.sup_norm(&theta.exterior_derivative()?)?).abs();
        all &= rb.identity(&format!("norm_chain_{label}"), chain, 1e-8);
    }

    // projection invariants
    {
        let g = &scenario.metric;
        let theta = random_form(1, &mut rng);
        let p1 = hodge_closed_projection(&theta, g)?;
        let closed_res = g.sup_norm(&p1.omega.exterior_derivative()?)?;
        all &= rb.identity("projection_closed", closed_res, 1e-9);

        let pp = hodge_closed_projection(&p1.omega, g)?;
        all &= rb.identity(
            "projection_idempotent",
            pp.omega.sub(&p1.omega)?.max_abs_component(),
            1e-10,
        );

        let theta2 = random_form(1, &mut rng);
        let p2 = hodge_closed_projection(&theta2, g)?;
        let combo = theta.scaled(1.75).add(&theta2.scaled(-0.5))?;
        let pc = hodge_closed_projection(&combo, g)?;
        let expected = p1.omega.scaled(1.75).add(&p2.omega.scaled(-0.5))?;
        all &= rb.identity(
            "projection_linear",
            pc.omega.sub(&expected)?.max_abs_component(),
            1e-10,
        );

        let mut worst = 0.0f64;
        for _ in 0..50 {
            let theta = random_form(1, &mut rng);
            let r = check_proposition_bound(&theta, g, DEFAULT_BOUND_SLACK)?;
            worst = worst.max(r.distance - r.d_bound * (1.0 + r.slack));
        }
        all &= rb.identity("proposition_bound", worst, 1e-12);
    }

    // homotopy operator: contraction identity and norm bound
    {
        let quad = GaussLegendre::new(16);
        let chart = BoxChart::new(
            (0..n.min(2)).map(|a| (0.05 + 0.01 * a as f64, 0.45)).collect(),
            vec![6; n.min(2)],
        )
        .map_err(anyhow::Error::from)?;
        // analytic case: xi = x dy on a 2d box, center at the corner
        let xi = ChartForm {
            dim: 2,
            degree: 1,
            fields: vec![
                Box::new(FnField {
                    value: |_: &[f64]| 0.0,
                    gradient: |_: &[f64]| vec![0.0, 0.0],
                }) as Box<dyn ChartField>,
                Box::new(FnField {
                    value: |p: &[f64]| p[0],
                    gradient: |_: &[f64]| vec![1.0, 0.0],
                }),
            ],
        };
        let analytic = verify_homotopy_formula(&xi, &chart, &[0.0, 0.0], &quad)?;
        all &= rb.identity("homotopy_analytic", analytic.sup_residual, 1e-8);

        let d2 = TorusDomain::t2(32).map_err(anyhow::Error::from)?;
        let comps = (0..2)
            .map(|_| ScalarField::random_band_limited(&d2, 2, 1.0, &mut rng))
            .collect();
        let form = KForm::from_components(&d2, 1, comps).map_err(anyhow::Error::from)?;
        let chart2 =
            BoxChart::new(vec![(0.1, 0.45), (0.2, 0.55)], vec![6, 6]).map_err(anyhow::Error::from)?;
        let xi2 = ChartForm::from_torus_form(&form);
        let random_res = verify_homotopy_formula(&xi2, &chart2, &[0.2, 0.3], &quad)?;
        all &= rb.identity("homotopy_formula", random_res.sup_residual, 1e-6);

        let mut worst = 0.0f64;
        let quad8 = GaussLegendre::new(8);
        for trial in 0..50 {
            let base = BoxChart::new(vec![(0.0, 0.5), (0.0, 0.5)], vec![4, 4])
                .map_err(anyhow::Error::from)?;
            let k = 1 + trial % 2;
            let raw = ProductForm::from_fn(base, k, quad8.nodes.clone(), |_, _, _| {
                rng.gen_range(-1.0..1.0)
            });
            let cyl = CylinderForm::decompose(&raw, quad8.clone())?;
            let h = cyl.homotopy()?.sup_norm_flat()?;
            let w = cyl.sup_norm_flat()?.max(1e-12);
            worst = worst.max(h / w - 1.0);
        }
        all &= rb.identity("homotopy_norm_bound", worst, 1e-6);
    }

    let (verdict, exit_code) = if all { ("PASS", 0) } else { ("FAIL", 1) };
    Ok(CommandOutput { exit_code, report: rb.finish(verdict, exit_code) })
}

fn random_spd_metric(
    domain: &TorusDomain,
    rng: &mut ChaCha8Rng,
) -> anyhow::Result<MetricField> {
    let n = domain.dim();
    let mut entries = Vec::new();
    for _ in 0..n * n {
        entries.push(ScalarField::random_band_limited(domain, 2, 0.25, rng));
    }
    let mut lower: Vec<ScalarField> =
        (0..n * (n + 1) / 2).map(|_| ScalarField::zeros(domain)).collect();
    for p in 0..domain.len() {
        // A A^T + 0.3 I with A = I + perturbation
        let a = |i: usize, j: usize| -> f64 {
            entries[i * n + j].values()[p] + if i == j { 1.0 } else { 0.0 }
        };
        let mut slot = 0;
        for i in 0..n {
            for j in 0..=i {
                let mut s = if i == j { 0.3 } else { 0.0 };
                for k in 0..n {
                    s += a(i, k) * a(j, k);
                }
                lower[slot].values_mut()[p] = s;
                slot += 1;
            }
        }
    }
    MetricField::from_lower_components(domain, lower).map_err(anyhow::Error::from)
}
