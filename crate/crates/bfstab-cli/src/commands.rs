use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use bfstab::kato::{kato_reduction, Contour, DEFAULT_NODES};
use bfstab::operator::{assemble_L, calibrated_coefficients};
use bfstab::reduction::{decoupling_pipeline, DECOUPLE_TOL};
use bfstab::spectrum::{figure8, unstable_band, BandMethod, FloquetSolver, BAND_TOL};
use bfstab::stokes::{coefficient_functions, stokes_expansion_with_modes, traveling_residual};
use bfstab::validation::run_all;
use bfstab::{critical_depth, depth_coefficients, FourierField};
use clap::ValueEnum;
use num_complex::Complex64;
use rayon::prelude::*;
use serde_json::json;

use crate::config::RunConfig;
use crate::output::{Cell, Table};
use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Field {
    Eta,
    Psi,
    P,
    A,
}

fn compute(e: bfstab::Error) -> Failure {
    Failure::Compute(e.to_string())
}

pub fn coeffs(cfg: &RunConfig) -> Result<Table, Failure> {
    let mut t = Table::new(
        vec![
            "h", "c_h", "gamma_h", "alpha_h", "beta_h", "delta_h", "zeta_h", "b_h", "e_11", "e_12", "e_22", "e_wb",
            "f_11", "tilde_e11", "d_h", "breve_c_h", "e_h",
        ],
        cfg.provenance("coeffs"),
    );
    for h in cfg.depth_list()? {
        let k = depth_coefficients(h);
        t.push(vec![
            k.h.into(),
            k.c_h.into(),
            k.gamma_h.into(),
            k.alpha_h.into(),
            k.beta_h.into(),
            k.delta_h.into(),
            k.zeta_h.into(),
            k.b_bold_h.into(),
            k.e_11.into(),
            k.e_12.into(),
            k.e_22.into(),
            k.e_wb.into(),
            k.f_11.into(),
            k.tilde_e11.into(),
            k.d_h.into(),
            k.breve_c_h.into(),
            k.e_h.into(),
        ]);
    }
    Ok(t)
}

pub fn critical(cfg: &RunConfig) -> Result<Table, Failure> {
    let h = critical_depth((1.0, 2.0), cfg.tol.unwrap_or(1e-12)).map_err(compute)?;
    let mut t = Table::new(vec!["h_wb"], cfg.provenance("critical-depth"));
    t.push(vec![h.value().into()]);
    Ok(t)
}

fn field_rows(t: &mut Table, f: &FourierField) {
    let m = f.modes() as i64;
    for k in -m..=m {
        let z = f.get(k);
        t.push(vec![Cell::Int(k), z.re.into(), z.im.into()]);
    }
}

pub fn stokes(cfg: &RunConfig, field: Option<Field>) -> Result<Table, Failure> {
    let h = cfg.depth()?;
    if let Some(which) = field {
        let eps = cfg.eps()?;
        let mut prov = cfg.provenance("stokes");
        prov.push(("field".into(), format!("{which:?}").to_lowercase()));
        let mut t = Table::new(vec!["mode", "re", "im"], prov);
        match which {
            Field::Eta | Field::Psi => {
                let w = stokes_expansion_with_modes(h, cfg.modes).wave(eps);
                field_rows(&mut t, if which == Field::Eta { &w.eta } else { &w.psi });
            }
            Field::P | Field::A => {
                let cf = coefficient_functions(h, eps, cfg.modes).map_err(compute)?;
                field_rows(&mut t, if which == Field::P { &cf.p_eps } else { &cf.a_eps });
            }
        }
        return Ok(t);
    }
    let ex = stokes_expansion_with_modes(h, cfg.modes);
    let mut t = Table::new(
        vec!["h", "eps", "c_h", "c2", "speed", "eta2_0", "eta2_2", "psi2_2", "residual"],
        cfg.provenance("stokes"),
    );
    for eps in cfg.eps_list()? {
        let r = traveling_residual(h, eps, cfg.modes).map_err(compute)?;
        t.push(vec![
            h.value().into(),
            eps.into(),
            ex.c0.into(),
            ex.c2.into(),
            ex.wave(eps).speed.into(),
            ex.eta2_0.into(),
            ex.eta2_2.into(),
            ex.psi2_2.into(),
            r.into(),
        ]);
    }
    Ok(t)
}

pub fn spectrum(cfg: &RunConfig, dump: Option<&Path>) -> Result<Table, Failure> {
    let (h, eps, mu) = (cfg.depth()?, cfg.eps()?, cfg.mu()?);
    let solver = FloquetSolver::new(h, eps, cfg.modes).map_err(compute)?;
    if let Some(path) = dump {
        let op = assemble_L(h, mu, cfg.modes, &solver.coeffs).map_err(compute)?;
        let mut prov = cfg.provenance("spectrum");
        prov.push(("matrix".into(), "L".into()));
        let mut t = Table::new(vec!["row", "col", "re", "im"], prov);
        let a = &op.entries;
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                let z = a[(i, j)];
                t.push(vec![Cell::Int(i as i64), Cell::Int(j as i64), z.re.into(), z.im.into()]);
            }
        }
        write_file(path, &t, crate::config::Format::Csv)?;
    }
    let report = solver.report(mu).map_err(compute)?;
    let mut t = Table::new(vec!["re", "im", "cluster_flag"], cfg.provenance("spectrum"));
    for z in &report.full {
        t.push(vec![z.re.into(), z.im.into(), Cell::Int(report.in_cluster(z) as i64)]);
    }
    t.extra = Some((
        "report",
        json!({
            "gap_ratio": report.gap_ratio,
            "max_real": report.max_real(),
            "matched": report.matched,
            "prediction": report.prediction,
        }),
    ));
    Ok(t)
}

pub fn figure(cfg: &RunConfig, samples: usize) -> Result<Table, Failure> {
    let (h, eps) = (cfg.depth()?, cfg.eps()?);
    let pts = figure8(h, eps, samples).map_err(compute)?;
    let mut prov = cfg.provenance("figure8");
    prov.push(("samples".into(), samples.to_string()));
    let mut t = Table::new(vec!["mu", "re_plus", "im_plus", "re_minus", "im_minus"], prov);
    for p in pts {
        t.push(vec![p.mu.into(), p.re_plus.into(), p.im_plus.into(), p.re_minus.into(), p.im_minus.into()]);
    }
    Ok(t)
}

pub fn band(cfg: &RunConfig) -> Result<Table, Failure> {
    let h = cfg.depth()?;
    let tol = cfg.tol.unwrap_or(BAND_TOL);
    let rows: Vec<(f64, f64, f64)> = cfg
        .eps_list()?
        .par_iter()
        .map(|&eps| {
            let a = unstable_band(h, eps, BandMethod::Analytic, cfg.modes, tol)?;
            let n = unstable_band(h, eps, BandMethod::Numeric, cfg.modes, tol)?;
            Ok((eps, a, n))
        })
        .collect::<bfstab::Result<_>>()
        .map_err(compute)?;
    let mut t = Table::new(vec!["eps", "mu_bar_analytic", "mu_bar_numeric"], cfg.provenance("band"));
    for (e, a, n) in rows {
        t.push(vec![e.into(), a.into(), n.into()]);
    }
    Ok(t)
}

fn push_matrix<const N: usize>(t: &mut Table, stage: &str, a: &nalgebra::SMatrix<Complex64, N, N>) {
    for i in 0..N {
        for j in 0..N {
            let z = a[(i, j)];
            t.push(vec![
                Cell::Text(stage.into()),
                Cell::Int(i as i64),
                Cell::Int(j as i64),
                z.re.into(),
                z.im.into(),
            ]);
        }
    }
}

pub fn reduce(cfg: &RunConfig) -> Result<Table, Failure> {
    let (h, eps, mu) = (cfg.depth()?, cfg.eps()?, cfg.mu()?);
    let cf = calibrated_coefficients(h, eps, cfg.modes).map_err(compute)?;
    let contour = Contour::for_depth(h, DEFAULT_NODES).map_err(compute)?;
    let k = kato_reduction(h, mu, &cf, &contour).map_err(compute)?;
    let st = decoupling_pipeline(&k.quadruple, cfg.tol.unwrap_or(DECOUPLE_TOL)).map_err(compute)?;
    let mut t = Table::new(vec!["stage", "row", "col", "re", "im"], cfg.provenance("reduce"));
    push_matrix(&mut t, "input", &st.input.b4);
    push_matrix(&mut t, "rescaled", &st.rescaled.b4);
    push_matrix(&mut t, "x", &st.x);
    push_matrix(&mut t, "stepped", &st.stepped.b4);
    push_matrix(&mut t, "decoupled", &st.decoupled.decoupled.b4);
    push_matrix(&mut t, "u_block", &st.decoupled.u_block);
    push_matrix(&mut t, "s_block", &st.decoupled.s_block);
    t.extra = Some(("stages", serde_json::to_value(&st).expect("stages serialize")));
    Ok(t)
}

pub fn validate(cfg: &RunConfig) -> Result<Table, Failure> {
    let results = run_all();
    let mut t = Table::new(vec!["id", "name", "passed", "detail", "seconds"], cfg.provenance("validate"));
    for r in &results {
        println!("{r}");
        t.push(vec![
            Cell::Int(r.id as i64),
            Cell::Text(r.name.into()),
            Cell::Int(r.passed as i64),
            Cell::Text(r.detail.clone()),
            r.seconds.into(),
        ]);
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        if let Some(path) = &cfg.out {
            write_file(path, &t, cfg.format)?;
        }
        return Err(Failure::Compute(format!("validation: {failed} criteria failed")));
    }
    Ok(t)
}

pub fn write_file(path: &Path, t: &Table, format: crate::config::Format) -> Result<(), Failure> {
    let f = File::create(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    t.write(format, BufWriter::new(f))
        .map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}
