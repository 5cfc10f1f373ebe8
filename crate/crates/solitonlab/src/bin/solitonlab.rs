//! Thin CLI over the library: scenario runs, weight/profile verification,
//! decay fits on stored snapshots.
//!
//! Exit codes: 0 success, 1 check failure, 2 runtime error, 3 I/O error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use solitonlab::diagnostics::{self, DecayModel, FitOptions, RateParams, Region};
use solitonlab::error::{Error, Result};
use solitonlab::grid::RealField;
use solitonlab::io::{csv_float, read_snapshot_dir, CsvTable};
use solitonlab::profiles;
use solitonlab::scenario::{parse_scenario, run_scenario};
use solitonlab::solver::FieldData;
use solitonlab::weights::{build_ladder, certify_ladder, certify_left_weight, certify_right_weight, WeightFamily};

#[derive(Parser)]
#[command(name = "solitonlab", version, about = "gKdV/NLS multi-soliton laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a JSON scenario and write snapshots, CSVs and report.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Verify weight-family properties and ladder bounds; emit a CSV certificate.
    VerifyWeights {
        /// Right-family eta (ladder + assumptions A).
        #[arg(long)]
        eta: Option<f64>,
        /// Left-family kappa (properties 2.3-2.5).
        #[arg(long)]
        kappa: Option<f64>,
        /// Ladder depth.
        #[arg(long, default_value_t = 10)]
        nmax: usize,
        /// Output CSV (defaults to stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Verify ground-state identities: ODE residuals, derivative recursion,
    /// H^s growth ratios.
    VerifyProfiles {
        #[arg(long, default_value_t = 2)]
        p: u32,
        #[arg(long, default_value_t = 6)]
        smax: usize,
    },
    /// Fit region-wise decay rates on stored snapshots.
    FitDecay {
        #[arg(long)]
        snapshots: PathBuf,
        /// Region: left | right | soliton_<j>.
        #[arg(long)]
        region: String,
        /// Derivative order.
        #[arg(long, default_value_t = 0)]
        s: usize,
        /// Speed list c_1 < .. < c_N of the underlying run.
        #[arg(long, value_delimiter = ',', required = true)]
        speeds: Vec<f64>,
        #[arg(long, default_value_t = 1e-12)]
        floor: f64,
        #[arg(long, default_value_t = 1e-3)]
        cap: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(all_pass) => {
            if all_pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { config, out } => {
            let scenario = parse_scenario(&config)?;
            let report = run_scenario(&scenario, &out)?;
            println!("status: {}", report.status);
            for c in &report.checks {
                let verdict = match c.pass {
                    Some(true) => "pass",
                    Some(false) => "FAIL",
                    None => "measured",
                };
                println!("  [{verdict}] {} = {:.6e}", c.name, c.measured);
            }
            if report.status != "completed" {
                return Err(Error::invalid(report.status));
            }
            Ok(report.all_pass())
        }
        Command::VerifyWeights { eta, kappa, nmax, out } => {
            let mut table = CsvTable::new(&[
                "property",
                "constant_name",
                "constant_value",
                "worst_x",
                "margin",
                "pass",
            ]);
            let mut all = true;
            let mut push_cert = |cert: &solitonlab::weights::WeightCertificate, all: &mut bool| {
                for e in &cert.entries {
                    table.push(vec![
                        format!("{}:{}", cert.family, e.property),
                        e.constant_name.clone(),
                        csv_float(e.constant_value),
                        csv_float(e.worst_x),
                        csv_float(e.margin),
                        e.pass.to_string(),
                    ]);
                    *all &= e.pass;
                }
            };
            if let Some(k) = kappa {
                push_cert(&certify_left_weight(k)?, &mut all);
            }
            if let Some(e) = eta {
                push_cert(&certify_right_weight(e)?, &mut all);
                let fam = build_ladder(&WeightFamily::right(e)?, nmax, 52.0)?;
                push_cert(&certify_ladder(&fam, -20.0, 50.0)?, &mut all);
            }
            if kappa.is_none() && eta.is_none() {
                return Err(Error::invalid("give --eta and/or --kappa"));
            }
            match out {
                Some(path) => table.write(&path)?,
                None => {
                    let mut text = table.header.join(",");
                    text.push('\n');
                    for row in &table.rows {
                        text.push_str(&row.join(","));
                        text.push('\n');
                    }
                    print!("{text}");
                }
            }
            if !all {
                return Err(Error::CheckFailed("weight certificate has failing rows".into()));
            }
            Ok(true)
        }
        Command::VerifyProfiles { p, smax } => {
            let grid = solitonlab::make_grid(-40.0, 40.0, 4096)?;
            let mut all = true;
            for s in 0..=smax {
                let r = profiles::hs_recursion_residual(p, s, grid)?;
                let ok = r <= 1e-6;
                all &= ok;
                println!("recursion p={p} s={s}: residual {r:.3e} [{}]", if ok { "pass" } else { "FAIL" });
            }
            let ratio_grid = solitonlab::make_grid(-80.0, 80.0, 1024)?;
            let ratios = profiles::hs_growth_ratios(p, 8, ratio_grid)?;
            let max_ratio = ratios.iter().fold(0.0_f64, |m, v| m.max(*v));
            let ok = max_ratio.is_finite();
            all &= ok;
            println!("H^s growth ratios (s<=8): max {max_ratio:.4e}");
            if !all {
                return Err(Error::CheckFailed("profile verification failed".into()));
            }
            Ok(true)
        }
        Command::FitDecay {
            snapshots,
            region,
            s,
            speeds,
            floor,
            cap,
            out,
        } => {
            let region = parse_region(&region)?;
            let snaps = read_snapshot_dir(&snapshots)?;
            if snaps.is_empty() {
                return Err(Error::invalid("no snapshots in directory"));
            }
            let params = RateParams::defaults_for(&speeds)?;
            let opts = FitOptions {
                floor,
                cap,
                min_points: 8,
            };
            let mut table = CsvTable::new(&[
                "region", "s", "model", "rate", "r2", "x_lo", "x_hi", "t",
            ]);
            for (t, field) in &snaps {
                let u: &RealField = match field {
                    FieldData::Real(f) => f,
                    FieldData::Complex(_) => {
                        return Err(Error::invalid("fit-decay expects real snapshots"))
                    }
                };
                let mags = if s == 0 {
                    RealField::new(u.grid, u.values.iter().map(|v| v.abs()).collect())?
                } else {
                    let d = solitonlab::spectral::spectral_derivative(u, s);
                    RealField::new(u.grid, d.values.iter().map(|v| v.abs()).collect())?
                };
                match diagnostics::pointwise_decay_fit(
                    &mags,
                    *t,
                    &params,
                    &speeds,
                    region,
                    s,
                    DecayModel::Exponential,
                    &opts,
                ) {
                    Ok(fit) => {
                        println!(
                            "t={t}: {} s={s} rate={:.5} r2={:.6} [{} pts]",
                            fit.region, fit.rate, fit.r2, fit.n_points
                        );
                        table.push(vec![
                            fit.region.clone(),
                            s.to_string(),
                            "exponential".into(),
                            csv_float(fit.rate),
                            csv_float(fit.r2),
                            csv_float(fit.x_lo),
                            csv_float(fit.x_hi),
                            csv_float(*t),
                        ]);
                    }
                    Err(Error::WindowEmpty { got, need }) => {
                        println!("t={t}: window empty ({got} of {need} samples)");
                    }
                    Err(e) => return Err(e),
                }
            }
            if let Some(path) = out {
                table.write(&path)?;
            }
            Ok(true)
        }
    }
}

fn parse_region(text: &str) -> Result<Region> {
    match text {
        "left" => Ok(Region::Left),
        "right" => Ok(Region::Right),
        other => {
            if let Some(rest) = other.strip_prefix("soliton_") {
                let (j, flank) = if let Some(j) = rest.strip_suffix("_left") {
                    (j, solitonlab::diagnostics::Flank::Left)
                } else if let Some(j) = rest.strip_suffix("_right") {
                    (j, solitonlab::diagnostics::Flank::Right)
                } else {
                    return Err(Error::invalid(format!("bad region `{other}`")));
                };
                let j: usize = j
                    .parse()
                    .map_err(|_| Error::invalid(format!("bad region `{other}`")))?;
                return Ok(Region::Soliton(j, flank));
            }
            Err(Error::invalid(format!(
                "region must be left, right, or soliton_<j>_(left|right); got `{other}`"
            )))
        }
    }
}
