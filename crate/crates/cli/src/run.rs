//! Mode dispatch: each mode writes one CSV document.

use std::io::{self, Write};

use hlmetro::estimation::{prior_sufficiency_probe, scaling_experiment, ExperimentConfig};
use hlmetro::gaussian::{pipeline_variance, variance_closed_form, ProbeSpec};
use hlmetro::homodyne::select_theta;
use hlmetro::linalg::CMatrix;
use hlmetro::metrology::{fisher_report, ConditionParams};
use hlmetro::scenarios::{
    build_linear_comb, build_two_channel, f_two_channel_closed, LinearCombConfig, Stages, TwoChannelConfig,
};
use hlmetro::TransitionResult;

use crate::config::{Config, Mode, ScenarioSpec, Sweep};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Numeric(#[from] hlmetro::Error),
    #[error("writing output: {0}")]
    Io(#[from] io::Error),
}

pub fn run<W: Write>(config: &Config, out: &mut W) -> Result<(), RunError> {
    match config.mode {
        Mode::Fisher => fisher(config, out),
        Mode::Variance => variance(config, out),
        Mode::Scaling => scaling(config, out),
        Mode::ScenarioTwoChannel | Mode::ScenarioLinearComb => scenario_dump(config, out),
        Mode::PriorProbe => prior_probe(config, out),
    }
}

fn fisher<W: Write>(cfg: &Config, out: &mut W) -> Result<(), RunError> {
    let scenario = cfg.scenario.scenario();
    let phi = scenario.phi_true();
    let phi_cl = cfg.phi_cl_or_true();
    let n_ph = cfg.photon_numbers[0];
    let probe = ProbeSpec::from_mean_photons(n_ph, 1)?;
    let tr = scenario.transition(&phi, &phi_cl)?;
    let theta = select_theta(tr.phase_checked()?, cfg.k, n_ph, cfg.branch)?.theta;
    let ell = cfg.ell.unwrap_or(((1.0 - tr.prob) * n_ph).max(0.0));
    let cond = ConditionParams::new(ell, cfg.k, n_ph)?;
    let report = fisher_report(
        |p: &[f64]| pipeline_variance(&probe, &scenario.composite(p, &phi_cl)?, 1, theta),
        |p: &[f64]| scenario.transition(p, &phi_cl)?.phase_checked(),
        &phi,
        &cond,
    )?;

    writeln!(out, "quantity,row,col,value")?;
    let l = phi.len();
    for (name, m) in [("exact", &report.exact), ("asymptotic", &report.asymptotic)] {
        for i in 0..l {
            for j in 0..l {
                writeln!(out, "{name},{},{},{:.16e}", i + 1, j + 1, m[(i, j)])?;
            }
        }
    }
    for (i, g) in report.grad_f.iter().enumerate() {
        writeln!(out, "grad_f,{},1,{g:.16e}", i + 1)?;
    }
    for (i, v) in report.eigenvector.iter().enumerate() {
        writeln!(out, "eigenvector,{},1,{v:.16e}", i + 1)?;
    }
    for (name, v) in [
        ("eigenvalue", report.eigenvalue),
        ("rho", report.rho),
        ("crb", report.crb),
        ("ell", ell),
        ("prob", tr.prob),
        ("theta", theta),
        ("N", n_ph),
        ("k", cfg.k),
    ] {
        writeln!(out, "{name},1,1,{v:.16e}")?;
    }
    Ok(())
}

fn variance<W: Write>(cfg: &Config, out: &mut W) -> Result<(), RunError> {
    let scenario = cfg.scenario.scenario();
    let phi = scenario.phi_true();
    let phi_cl = cfg.phi_cl_or_true();
    let n_ph = cfg.photon_numbers[0];
    let probe = ProbeSpec::from_mean_photons(n_ph, 1)?;
    let theta0 = select_theta(
        scenario.transition(&phi, &phi_cl)?.phase_checked()?,
        cfg.k,
        n_ph,
        cfg.branch,
    )?
    .theta;
    let (start, stop, count) = cfg.grid;

    writeln!(out, "x,pipeline,closed_form")?;
    for i in 0..count {
        let x = start + (stop - start) * i as f64 / (count - 1) as f64;
        let (p, theta) = match cfg.sweep {
            Sweep::Theta => (phi.clone(), x),
            Sweep::Phi(idx) => {
                let mut p = phi.clone();
                p[idx - 1] = x;
                (p, theta0)
            }
        };
        let u = scenario.composite(&p, &phi_cl)?;
        let pipeline = pipeline_variance(&probe, &u, 1, theta)?;
        let tr = hlmetro::network::transition(&u, 1, 1)?;
        let closed = variance_closed_form(tr.prob, tr.phase.unwrap_or(0.0), theta, probe.squeezing());
        writeln!(out, "{x:.16e},{pipeline:.16e},{closed:.16e}")?;
    }
    Ok(())
}

pub fn experiment_config(cfg: &Config) -> ExperimentConfig<f64> {
    let mut exp = ExperimentConfig::new(cfg.scenario.scenario(), cfg.photon_numbers.clone());
    exp.samples = cfg.n;
    exp.repetitions = cfg.repetitions;
    exp.k = cfg.k;
    exp.prior_scale = cfg.c;
    exp.theta_mode = cfg.theta_mode;
    exp.branch = cfg.branch;
    exp.seed = cfg.seed;
    exp
}

fn scaling<W: Write>(cfg: &Config, out: &mut W) -> Result<(), RunError> {
    let report = scaling_experiment(&experiment_config(cfg))?;
    report.write_csv(out)?;
    Ok(())
}

fn write_matrix<W: Write>(out: &mut W, name: &str, m: &CMatrix<f64>) -> io::Result<()> {
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            let z = m[(i, j)];
            writeln!(out, "{name},{},{},{:.16e},{:.16e}", i + 1, j + 1, z.re, z.im)?;
        }
    }
    Ok(())
}

fn write_stages<W: Write>(out: &mut W, stages: &Stages<f64>) -> Result<TransitionResult, RunError> {
    let composite = stages.composite()?;
    writeln!(out, "stage,row,col,re,im")?;
    write_matrix(out, "f_in", stages.f_in.matrix())?;
    write_matrix(out, "u_phi", stages.u_phi.matrix())?;
    write_matrix(out, "f_out", stages.f_out.matrix())?;
    write_matrix(out, "composite", composite.matrix())?;
    let tr = hlmetro::network::transition(&composite, 1, 1)?;
    writeln!(out, "# chi={:.16e}{:+.16e}i", tr.chi.re, tr.chi.im)?;
    writeln!(out, "# P={:.12}", tr.prob)?;
    match tr.phase {
        Some(f) => writeln!(out, "# f={f:.16e}")?,
        None => writeln!(out, "# f=undefined")?,
    }
    Ok(tr)
}

fn scenario_dump<W: Write>(cfg: &Config, out: &mut W) -> Result<(), RunError> {
    let phi_cl = cfg.phi_cl_or_true();
    match &cfg.scenario {
        ScenarioSpec::TwoChannel { phi, alpha1, alpha2 } => {
            let tc = TwoChannelConfig::new(*phi, [phi_cl[0], phi_cl[1], phi_cl[2]], *alpha1, *alpha2);
            write_stages(out, &build_two_channel(&tc)?)?;
            writeln!(out, "# omega={:.16e}", tc.omega())?;
            match f_two_channel_closed(&tc) {
                Ok(c) => {
                    writeln!(out, "# f_closed={:.16e}", c.quadrant_aware)?;
                    writeln!(out, "# f_principal={:.16e}", c.principal)?;
                    writeln!(out, "# branch_mismatch={}", c.branch_mismatch)?;
                }
                Err(hlmetro::Error::SingularDenominator) => writeln!(out, "# f_closed=undefined")?,
                Err(e) => return Err(e.into()),
            }
        }
        ScenarioSpec::LinearComb { weights, kinds, phi } => {
            let lc = LinearCombConfig {
                weights: weights.clone(),
                kinds: kinds.clone(),
                phi: phi.clone(),
                phi_cl,
            };
            write_stages(out, &build_linear_comb(&lc)?)?;
            writeln!(out, "# L={:.16e}", lc.target()?)?;
            writeln!(out, "# internal_dim={}", lc.internal_dim())?;
        }
        ScenarioSpec::PhaseShift { .. } => unreachable!("scenario modes fix their scenario"),
    }
    Ok(())
}

fn prior_probe<W: Write>(cfg: &Config, out: &mut W) -> Result<(), RunError> {
    let rows = prior_sufficiency_probe(
        &cfg.scenario.scenario(),
        &cfg.photon_numbers,
        cfg.c,
        cfg.draws,
        cfg.noise,
        cfg.seed,
    )?;
    writeln!(out, "N,max_scaled_deficit,mean_scaled_deficit")?;
    for r in rows {
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e}",
            r.mean_photons, r.max_scaled_deficit, r.mean_scaled_deficit
        )?;
    }
    Ok(())
}
