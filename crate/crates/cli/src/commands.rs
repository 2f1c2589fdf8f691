use monopole_algebra::defosc::{
    self, BranchFamily, Signs, SolveOptions, StructureFunction, UnirrepBranch,
};
use monopole_algebra::flat_model::{self, FlatParams, FlatState};
use monopole_algebra::halfint::HalfInt;
use monopole_algebra::numgrid::{self, RecurrenceOp};
use monopole_algebra::taubnut_model::{self, Convention, L3Calibration, TaubNutSector};
use rayon::prelude::*;
use serde_json::json;

use crate::config::{Model, RunConfig};
use crate::report::Record;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum VerifyWhat {
    Algebra,
    Recurrence,
    Unirreps,
    Oracle,
}

impl VerifyWhat {
    pub fn name(self) -> &'static str {
        match self {
            VerifyWhat::Algebra => "algebra",
            VerifyWhat::Recurrence => "recurrence",
            VerifyWhat::Unirreps => "unirreps",
            VerifyWhat::Oracle => "oracle",
        }
    }
}

fn flat_params(cfg: &RunConfig) -> Result<FlatParams, CliError> {
    Ok(FlatParams::new(cfg.flat.omega, cfg.flat.charge)?)
}

/// `l` values from `|Q|` up to `l_max` in unit steps.
fn flat_ls(params: &FlatParams, l_max: f64) -> Vec<HalfInt> {
    let mut out = Vec::new();
    let mut l = params.l_min();
    while l.value() <= l_max {
        out.push(l);
        l = l + HalfInt::ONE;
    }
    out
}

fn taubnut_sectors(cfg: &RunConfig) -> Vec<TaubNutSector> {
    TaubNutSector::enumerate(cfg.n_max(), cfg.lambda_max(), &cfg.box_.nus, &cfg.box_.eps)
}

/// `(nu1, nu2, eps)` groups of the box, in config order.
fn taubnut_groups(cfg: &RunConfig) -> Vec<(f64, f64, f64)> {
    let mut out = Vec::new();
    for &(nu1, nu2) in &cfg.box_.nus {
        for &eps in &cfg.box_.eps {
            out.push((nu1, nu2, eps));
        }
    }
    out
}

fn collect<T, F>(items: Vec<T>, f: F) -> Result<Vec<Record>, CliError>
where
    T: Send + Sync,
    F: Fn(&T) -> Result<Vec<Record>, CliError> + Send + Sync,
{
    let parts: Vec<Result<Vec<Record>, CliError>> = items.par_iter().map(f).collect();
    let mut out = Vec::new();
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

pub fn spectrum(cfg: &RunConfig) -> Result<Vec<Record>, CliError> {
    match cfg.model {
        Model::Flat => {
            let params = flat_params(cfg)?;
            let mut out = Vec::new();
            for n in 0..=cfg.n_max() {
                for l in flat_ls(&params, cfg.box_.l_max) {
                    let s = FlatState::new(n, l.value(), l.value(), &params)?;
                    out.push(
                        Record::new("spectrum", "energy", format!("n={n:03} l={l}"))
                            .with("n", n)
                            .with("l", l.value())
                            .with("energy", flat_model::energy(&s, &params))
                            .with("degeneracy", l.twice() + 1),
                    );
                }
            }
            Ok(out)
        }
        Model::Taubnut => {
            let params = cfg.taubnut;
            let mut out = Vec::new();
            for p in 0..=cfg.n_max() {
                for &(nu1, nu2) in &cfg.box_.nus {
                    for e2 in [1.0, -1.0] {
                        if e2 < 0.0 && nu2 == 0.0 {
                            continue;
                        }
                        let big_n = 4.0 * f64::from(p) - 2.0 * nu1 + 2.0 * e2 * nu2 + 3.0;
                        let label = format!("p={p:03} nu1={nu1} nu2={nu2} eps2={e2:+}");
                        let sol = taubnut_model::solve_original_energy(&params, big_n, nu2)?;
                        let base = Record::new("spectrum", "energy", label.clone())
                            .with("p", p)
                            .with("nu1", nu1)
                            .with("nu2", nu2)
                            .with("eps2", e2)
                            .with("N", big_n)
                            .with("rejected", sol.rejected.len());
                        if sol.roots.is_empty() {
                            out.push(base.clone().with("energy", serde_json::Value::Null));
                        }
                        for (k, e) in sol.roots.iter().enumerate() {
                            let r =
                                taubnut_model::energy_equation_residual(&params, *e, big_n, nu2)
                                    .abs();
                            let (ep, eps_sq) = taubnut_model::metamorphosis_map(&params, *e, nu2)?;
                            let mut rec = base
                                .clone()
                                .with("energy", *e)
                                .with("e_prime", ep)
                                .with("eps_sq", eps_sq)
                                .judged(r / big_n.abs().max(1.0), cfg.tolerances.algebra);
                            rec.label = format!("{label} root={k}");
                            out.push(rec);
                        }
                    }
                }
            }
            Ok(out)
        }
    }
}

pub fn verify(cfg: &RunConfig, what: VerifyWhat) -> Result<Vec<Record>, CliError> {
    match (what, cfg.model) {
        (VerifyWhat::Algebra, Model::Flat) => flat_algebra(cfg),
        (VerifyWhat::Algebra, Model::Taubnut) => taubnut_algebra(cfg),
        (VerifyWhat::Recurrence, Model::Flat) => Err(CliError::Usage(
            "recurrence checks act on the separated Taub-NUT wavefunctions; use --model taubnut"
                .into(),
        )),
        (VerifyWhat::Recurrence, Model::Taubnut) => recurrence(cfg),
        (VerifyWhat::Unirreps, Model::Flat) => flat_unirreps(cfg),
        (VerifyWhat::Unirreps, Model::Taubnut) => taubnut_unirreps(cfg),
        (VerifyWhat::Oracle, Model::Flat) => flat_oracle(cfg),
        (VerifyWhat::Oracle, Model::Taubnut) => taubnut_oracle(cfg),
    }
}

fn state_label(s: Option<FlatState>) -> String {
    s.map(|s| s.to_string()).unwrap_or_else(|| "-".into())
}

fn flat_algebra(cfg: &RunConfig) -> Result<Vec<Record>, CliError> {
    let params = flat_params(cfg)?;
    let tol = cfg.tolerances.algebra;
    let l_extra = (cfg.box_.l_max - params.q().abs()).floor();
    if l_extra < 0.0 {
        return Ok(Vec::new());
    }
    let rep = flat_model::verify_algebra(&params, cfg.n_max(), l_extra as u32)?;
    let suite = "algebra";
    let (d1d2, form) = match cfg.convention {
        Convention::Published => (rep.d1d2_residual, "printed"),
        Convention::Corrected => (rep.d1d2_shifted_residual, "D2D1 at B+2"),
    };
    Ok(vec![
        Record::new(suite, "energy", "all states")
            .judged(rep.energy_residual, tol)
            .with("states", rep.states_checked),
        Record::new(suite, "commutator", "all states").judged(rep.commutator_residual, tol),
        Record::new(suite, "d2d1", state_label(rep.d2d1_worst)).judged(rep.d2d1_residual, tol),
        Record::new(suite, "d1d2", state_label(rep.d1d2_worst))
            .judged(d1d2, tol)
            .with("closed_form", form)
            .with("printed_residual", rep.d1d2_residual)
            .with("shifted_residual", rep.d1d2_shifted_residual),
        Record::new(suite, "phi_realization", "all states")
            .judged(rep.phi_realization_residual, tol),
    ])
}

fn calibration_record(cal: &L3Calibration) -> Record {
    let mut rec = Record::new("calibration", "l3", cal.rule.name());
    for (rule, r) in &cal.candidate_residuals {
        rec = rec.with(&format!("shape_residual[{}]", rule.name()), *r);
    }
    rec
}

fn calibrate(cfg: &RunConfig) -> Result<L3Calibration, CliError> {
    Ok(taubnut_model::calibrate_l3(
        &taubnut_sectors(cfg),
        &cfg.grid,
    )?)
}

fn taubnut_algebra(cfg: &RunConfig) -> Result<Vec<Record>, CliError> {
    let cal = calibrate(cfg)?;
    let tol = cfg.tolerances.algebra;
    let cfg_ref = cfg;
    let mut out = vec![calibration_record(&cal)];
    out.extend(collect(taubnut_groups(cfg), |&(nu1, nu2, eps)| {
        let sectors: Vec<TaubNutSector> = taubnut_sectors(cfg_ref)
            .into_iter()
            .filter(|s| s.nu1 == nu1 && s.nu2 == nu2 && s.eps == eps)
            .collect();
        let g = format!("nu1={nu1} nu2={nu2} eps={eps}");
        let rep = taubnut_model::verify_algebra_taubnut(&sectors, cal.rule, cfg_ref.convention)?;
        let worst = |s: Option<TaubNutSector>| {
            s.map(|s| format!("{g} worst {s}"))
                .unwrap_or_else(|| g.clone())
        };
        let suite = "algebra";
        let mut ratio = Record::new(suite, "d1_convention", g.clone())
            .with("sector_independent", rep.d1_ratio_sector_independent);
        if let Some((lo, hi)) = rep.d1_ratio_range {
            ratio = ratio.with("ratio_min", lo).with("ratio_max", hi);
        }
        if !rep.d1_ratio_sector_independent {
            ratio = ratio.failed();
        }
        Ok(vec![
            Record::new(suite, "energy", g.clone())
                .judged(rep.energy_residual, tol)
                .with("sectors", rep.sectors_checked),
            Record::new(suite, "commutator", g.clone()).judged(rep.commutator_residual, tol),
            Record::new(suite, "d2_chain", g.clone()).judged(rep.d2_chain_residual, tol),
            Record::new(suite, "d1_chain", worst(rep.d1_chain_worst))
                .judged(rep.d1_chain_residual, tol),
            ratio,
            Record::new(suite, "d1d2", worst(rep.d1d2_worst)).judged(rep.d1d2_residual, tol),
            Record::new(suite, "d2d1", worst(rep.d2d1_worst)).judged(rep.d2d1_residual, tol),
            Record::new(suite, "phi_realization", g.clone())
                .judged(rep.phi_realization_residual, tol),
        ])
    })?);
    Ok(out)
}

fn recurrence(cfg: &RunConfig) -> Result<Vec<Record>, CliError> {
    let cal = calibrate(cfg)?;
    let tol = cfg.tolerances.recurrence;
    let metric = cfg.taubnut;
    let mut work = Vec::new();
    for s in taubnut_sectors(cfg) {
        for op in RecurrenceOp::ALL {
            work.push((s, op));
        }
    }
    let mut out = vec![calibration_record(&cal)];
    out.extend(collect(work, |&(s, op)| {
        let pred = op.predict(&s, cal.rule.value(&s), cfg.convention)?;
        let rep = numgrid::verify_recurrence(&pred, &cfg.grid, Some(&metric))?;
        let fitted = numgrid::fitted_coefficient(&pred, &cfg.grid)?;
        Ok(vec![Record::new("recurrence", op.name(), s.to_string())
            .judged(rep.sup_rel_residual, tol)
            .with("rms_residual", rep.rms_residual)
            .with("reference_scale", rep.reference_scale)
            .with("nodes", rep.nodes_used)
            .with("coefficient", pred.coefficient)
            .with("fitted_coefficient", fitted)
            .with("annihilation", numgrid::is_annihilation(&pred))])
    })?);
    Ok(out)
}

fn branch_record(
    sf: &StructureFunction,
    b: &UnirrepBranch,
    group: &str,
    tol: f64,
    branch_tol: f64,
) -> Record {
    let boundary = sf
        .evaluate(0.0, b.u, b.energy)
        .abs()
        .max(sf.evaluate(f64::from(b.p) + 1.0, b.u, b.energy).abs());
    let positive = b.phi_values.iter().all(|v| *v > 0.0);
    let families: Vec<String> = defosc::matching_families(b, sf, branch_tol)
        .iter()
        .map(|(f, s)| format!("{}{:?}", f.name(), (s.0, s.1, s.2)))
        .collect();
    let min_phi = b.phi_values.iter().copied().fold(f64::INFINITY, f64::min);
    let mut rec = Record::new(
        "unirreps",
        "branch",
        format!("{group} E={:.12} u={:.12}", b.energy, b.u),
    )
    .judged(boundary, tol)
    .with("u", b.u)
    .with("energy", b.energy)
    .with("p", b.p)
    .with("paper_match", !families.is_empty())
    .with("families", families.join(" "))
    .with(
        "min_interior_phi",
        if min_phi.is_finite() {
            json!(min_phi)
        } else {
            json!(null)
        },
    );
    if !positive {
        rec = rec.failed();
    }
    rec
}

fn flat_unirreps(cfg: &RunConfig) -> Result<Vec<Record>, CliError> {
    let params = flat_params(cfg)?;
    let mut ms = Vec::new();
    for l in flat_ls(&params, cfg.box_.l_max) {
        let mut m = -l;
        while m <= l {
            if !ms.contains(&m) {
                ms.push(m);
            }
            m = m + HalfInt::ONE;
        }
    }
    ms.sort();
    let (p, tol, btol) = (cfg.p, cfg.tolerances.algebra, cfg.tolerances.branch);
    collect(ms, |m| {
        let sf = flat_model::build_structure_function(&params, m.value());
        let group = format!("m={}", m.value());
        let branches = defosc::solve_unirreps(&sf, p);
        let mut out: Vec<Record> = branches
            .iter()
            .map(|b| branch_record(&sf, b, &group, tol, btol))
            .collect();
        let (u, e) = defosc::paper_branch(&sf, BranchFamily::FlatM, Signs(1, 1, 1), p)?;
        let found = branches.iter().any(|b| {
            defosc::verify_branch_with_tol(b, &sf, BranchFamily::FlatM, Signs(1, 1, 1), btol)
                .unwrap_or(false)
        });
        out.push(
            Record::new("unirreps", "closed_form", group)
                .with("u", u)
                .with("energy", e)
                .with("returned", found),
        );
        Ok(out)
    })
}

fn taubnut_unirreps(cfg: &RunConfig) -> Result<Vec<Record>, CliError> {
    let (p, tol, btol) = (cfg.p, cfg.tolerances.algebra, cfg.tolerances.branch);
    collect(taubnut_groups(cfg), |&(nu1, nu2, eps)| {
        let l3 = nu1;
        let mut out = Vec::new();
        for tb in
            taubnut_model::solve_unirreps_taubnut(nu1, nu2, l3, eps, p, &SolveOptions::default())
        {
            let sf = taubnut_model::build_structure_function_taubnut(nu1, nu2, l3, tb.eps);
            let group = format!("nu1={nu1} nu2={nu2} eps={}", tb.eps);
            out.push(branch_record(&sf, &tb.branch, &group, tol, btol));
        }
        let sf = taubnut_model::build_structure_function_taubnut(nu1, nu2, l3, eps);
        let (u, e) = defosc::paper_branch(&sf, BranchFamily::TaubNut, Signs(1, 1, 1), p)?;
        let found = defosc::solve_unirreps_with(&sf, p, &SolveOptions::default())
            .iter()
            .any(|b| {
                defosc::verify_branch_with_tol(b, &sf, BranchFamily::TaubNut, Signs(1, 1, 1), btol)
                    .unwrap_or(false)
            });
        out.push(
            Record::new(
                "unirreps",
                "closed_form",
                format!("nu1={nu1} nu2={nu2} eps={eps}"),
            )
            .with("u", u)
            .with("energy", e)
            .with("returned", found)
            .with("b_at_x0", u)
            .with("note", "closed form takes -nu1 = l; B = u at x = 0"),
        );
        Ok(out)
    })
}

fn flat_oracle(cfg: &RunConfig) -> Result<Vec<Record>, CliError> {
    let params = flat_params(cfg)?;
    let count = cfg.n_max() as usize + 1;
    let (w, tol, opts) = (params.omega, cfg.tolerances.oracle, cfg.oracle);
    collect(flat_ls(&params, cfg.box_.l_max), |l| {
        let lv = l.value();
        // same radial equation as Taub-NUT with k1 = l(l+1), eps^2 = omega^2, E' = -2E
        let ev = numgrid::radial_eigenvalues_oracle(lv * (lv + 1.0), w * w, count, &opts)?;
        Ok(ev
            .iter()
            .enumerate()
            .map(|(n, ep)| {
                let got = -0.5 * ep;
                let expect = w * (2.0 * n as f64 + lv + 1.5);
                Record::new("oracle", "radial", format!("n={n:03} l={l}"))
                    .judged((got - expect).abs() / expect.abs(), tol)
                    .with("oracle", got)
                    .with("closed_form", expect)
            })
            .collect())
    })
}

fn taubnut_oracle(cfg: &RunConfig) -> Result<Vec<Record>, CliError> {
    let (tol, opts) = (cfg.tolerances.oracle, cfg.oracle);
    let count = cfg.n_max() as usize + 1;
    let mut work: Vec<(f64, f64, f64, u32)> = Vec::new();
    for (nu1, nu2, eps) in taubnut_groups(cfg) {
        for lambda in 0..=cfg.lambda_max() {
            work.push((nu1, nu2, eps, lambda));
        }
    }
    let mut out = collect(work, |&(nu1, nu2, eps, lambda)| {
        let Ok(s) = TaubNutSector::new(0, lambda, nu1, nu2, eps) else {
            return Ok(Vec::new());
        };
        let ev =
            numgrid::radial_eigenvalues_oracle(s.separation_constant(), eps * eps, count, &opts)?;
        Ok(ev
            .iter()
            .enumerate()
            .map(|(n, got)| {
                let t = TaubNutSector { n: n as u32, ..s };
                let expect = t.e_prime();
                Record::new("oracle", "radial", t.to_string())
                    .judged((got - expect).abs() / expect.abs(), tol)
                    .with("oracle", *got)
                    .with("closed_form", expect)
            })
            .collect())
    })?;
    out.extend(collect(cfg.box_.nus.clone(), |&(nu1, nu2)| {
        let ev =
            numgrid::angular_eigenvalues_oracle(nu1, nu2, cfg.lambda_max() as usize + 1, &opts)?;
        Ok(ev
            .iter()
            .enumerate()
            .map(|(lambda, got)| {
                let expect = taubnut_model::separation_constant(lambda as f64 + nu1, nu2);
                Record::new(
                    "oracle",
                    "angular",
                    format!("nu1={nu1} nu2={nu2} lambda={lambda:03}"),
                )
                .judged((got - expect).abs() / expect.abs().max(1.0), tol)
                .with("oracle", *got)
                .with("closed_form", expect)
            })
            .collect())
    })?);
    Ok(out)
}
