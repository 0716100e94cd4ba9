//! Command-line front door: function mini-language parsing, run
//! configuration, dispatch, and artifact emission.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use blochlab::bloch::BlochFunction;
use blochlab::certify::{certify_sigma, Certificate, Rational};
use blochlab::error::{Error, Result};
use blochlab::hyperbolic::{hyperbolic_radius, Domain, HyperbolicPoint};
use blochlab::martingale::build_martingale;
use blochlab::spectra::{
    alpha_average, alpha_sup_estimate, integral_means, variance_circle, variance_strip,
    VarianceEstimate,
};
use blochlab::transforms::{box_average, collar_ratio, mu_from_bloch, NAdicBox};

/// Parses the function mini-language:
/// `special:<a>`, `lacunary:<base>`, `poly:<c0,c1,...>`, `logmap`, `logz`.
pub fn parse_function_spec(spec: &str) -> Result<BlochFunction> {
    let (kind, args, args_at) = match spec.find(':') {
        Some(pos) => (&spec[..pos], Some(&spec[pos + 1..]), pos + 1),
        None => (spec, None, spec.len()),
    };
    let parse_f64 = |text: &str, at: usize| -> Result<f64> {
        text.trim().parse::<f64>().map_err(|e| Error::Parse {
            position: at,
            message: format!("bad number {text:?}: {e}"),
        })
    };
    match kind {
        "special" => {
            let a = parse_f64(
                args.ok_or(Error::Parse {
                    position: args_at,
                    message: "special needs a parameter, e.g. special:0.3".into(),
                })?,
                args_at,
            )?;
            BlochFunction::make_special(a).map_err(|e| Error::Parse {
                position: args_at,
                message: e.to_string(),
            })
        }
        "lacunary" => {
            let base: u32 = args
                .ok_or(Error::Parse {
                    position: args_at,
                    message: "lacunary needs a base, e.g. lacunary:2".into(),
                })?
                .trim()
                .parse()
                .map_err(|e| Error::Parse {
                    position: args_at,
                    message: format!("bad base: {e}"),
                })?;
            if base < 2 {
                return Err(Error::Parse {
                    position: args_at,
                    message: format!("lacunary base {base} must be >= 2"),
                });
            }
            // truncate so the largest exponent stays near 2^40
            let trunc = (40.0 * 2f64.ln() / (base as f64).ln()).floor() as u32;
            BlochFunction::lacunary(base, trunc.max(1)).map_err(|e| Error::Parse {
                position: args_at,
                message: e.to_string(),
            })
        }
        "poly" => {
            let list = args.ok_or(Error::Parse {
                position: args_at,
                message: "poly needs coefficients, e.g. poly:0,1".into(),
            })?;
            let mut coeffs = Vec::new();
            let mut at = args_at;
            for part in list.split(',') {
                coeffs.push(parse_f64(part, at)?);
                at += part.len() + 1;
            }
            BlochFunction::poly(&coeffs).map_err(|e| Error::Parse {
                position: args_at,
                message: e.to_string(),
            })
        }
        "logmap" => Ok(BlochFunction::log_map()),
        "logz" => Ok(BlochFunction::log_half_plane()),
        other => Err(Error::Parse {
            position: 0,
            message: format!(
                "unknown function kind {other:?}; expected special:<a>, lacunary:<base>, poly:<c0,c1,...>, logmap or logz"
            ),
        }),
    }
}

/// Full description of one run; artifacts embed it so a run is
/// reproducible from its own output.
#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct RunConfig {
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub function: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ball_radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub precision: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VERIFICATION_FAILED: i32 = 2;

fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Default precision: BLOCHLAB_PRECISION when set, else 53 bits.
pub fn default_precision() -> u32 {
    std::env::var("BLOCHLAB_PRECISION")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(53)
}

#[derive(Serialize)]
struct Artifact<'a, T: Serialize> {
    version: &'a str,
    config: &'a RunConfig,
    result: T,
}

fn artifact_json<T: Serialize>(config: &RunConfig, result: T) -> String {
    let mut s = serde_json::to_string_pretty(&Artifact {
        version: env!("CARGO_PKG_VERSION"),
        config,
        result,
    })
    .expect("artifact serializes");
    s.push('\n');
    s
}

fn write_out(path: Option<&Path>, content: &str) -> Result<()> {
    match path {
        Some(p) => {
            std::fs::write(p, content)?;
            Ok(())
        }
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

/// Writes a certificate as bare, versioned JSON (round-trips losslessly).
pub fn emit_certificate(cert: &Certificate, path: &Path) -> Result<()> {
    std::fs::write(path, cert.to_json())?;
    Ok(())
}

fn variance_csv(est: &VarianceEstimate) -> String {
    let mut out = String::from("parameter,value\n");
    for (p, v) in est.params.iter().zip(&est.per_step) {
        out.push_str(&format!("{},{}\n", fmt17(*p), fmt17(*v)));
    }
    out
}

/// Geometric schedule in 1 - r from 0.1 down to the target.
fn radius_schedule(r_target: f64) -> Result<Vec<f64>> {
    if !(0.0 < r_target && r_target < 1.0) {
        return Err(Error::domain(format!("radius {r_target} outside (0, 1)")));
    }
    let mut rs = Vec::new();
    let mut gap = 0.1;
    while gap > (1.0 - r_target) * 1.0000001 {
        rs.push(1.0 - gap);
        gap /= 10.0;
    }
    rs.push(r_target);
    Ok(rs)
}

fn parse_tau(text: &str) -> Result<Complex64> {
    let parts: Vec<&str> = text.split(',').collect();
    let bad = |e: std::num::ParseFloatError| Error::Parse {
        position: 0,
        message: format!("bad tau {text:?}: {e}"),
    };
    match parts.as_slice() {
        [re] => Ok(Complex64::new(re.trim().parse().map_err(bad)?, 0.0)),
        [re, im] => Ok(Complex64::new(
            re.trim().parse().map_err(bad)?,
            im.trim().parse().map_err(bad)?,
        )),
        _ => Err(Error::Parse {
            position: 0,
            message: format!("bad tau {text:?}: expected re or re,im"),
        }),
    }
}

/// Dispatches one configured run, writing its artifact. Returns the exit
/// code (0 ok, 2 verification failure); usage-level failures come back as
/// errors and map to exit 1.
pub fn run_command(config: &RunConfig) -> Result<i32> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::domain(format!("thread pool: {e}")))?;
    pool.install(|| dispatch(config))
}

fn dispatch(config: &RunConfig) -> Result<i32> {
    match config.command.as_str() {
        "certify" => {
            let r = Rational::parse(config.r.as_deref().unwrap_or("2/5"))?;
            let precision = config.precision.unwrap_or_else(default_precision);
            let grid = config.grid.unwrap_or(1000);
            let cert = certify_sigma(r, precision, grid)?;
            match &config.out {
                Some(p) => emit_certificate(&cert, p)?,
                None => print!("{}", cert.to_json()),
            }
            if cert.verified() {
                Ok(EXIT_OK)
            } else {
                eprintln!(
                    "verification failed: {}",
                    cert.failing.as_deref().unwrap_or("unknown component")
                );
                Ok(EXIT_VERIFICATION_FAILED)
            }
        }
        "variance" => {
            let spec = config
                .function
                .as_deref()
                .ok_or_else(|| Error::domain("variance needs --function"))?;
            let b = parse_function_spec(spec)?;
            let method = config.method.as_deref().unwrap_or("circle");
            let est = match method {
                "circle" => {
                    let r = config
                        .r
                        .as_deref()
                        .ok_or_else(|| Error::domain("circle method needs --r"))?
                        .parse::<f64>()
                        .map_err(|e| Error::domain(format!("bad radius: {e}")))?;
                    variance_circle(&b, &radius_schedule(r)?)?
                }
                "strip" => {
                    let h = config.h.ok_or_else(|| Error::domain("strip method needs --h"))?;
                    let hb = if b.domain() == Domain::Disk {
                        b.conjugate_exponential()?
                    } else {
                        b
                    };
                    variance_strip(&hb, h)?
                }
                other => return Err(Error::domain(format!("unknown method {other}"))),
            };
            let content = match config.out.as_deref() {
                Some(p) if p.extension().is_some_and(|e| e == "csv") => variance_csv(&est),
                _ => artifact_json(config, &est),
            };
            write_out(config.out.as_deref(), &content)?;
            Ok(EXIT_OK)
        }
        "spectrum" => {
            let spec = config
                .function
                .as_deref()
                .ok_or_else(|| Error::domain("spectrum needs --function"))?;
            let b = parse_function_spec(spec)?;
            let tau = parse_tau(config.tau.as_deref().unwrap_or("1"))?;
            let r = config
                .r
                .as_deref()
                .unwrap_or("0.999999")
                .parse::<f64>()
                .map_err(|e| Error::domain(format!("bad radius: {e}")))?;
            let value = integral_means(&b, tau, &radius_schedule(r)?)?;
            #[derive(Serialize)]
            struct SpectrumResult {
                value: String,
            }
            let content = artifact_json(config, SpectrumResult { value: fmt17(value) });
            write_out(config.out.as_deref(), &content)?;
            Ok(EXIT_OK)
        }
        "martingale" => {
            let spec = config
                .function
                .as_deref()
                .ok_or_else(|| Error::domain("martingale needs --function"))?;
            let b = parse_function_spec(spec)?;
            let hb = if b.domain() == Domain::Disk {
                b.conjugate_exponential()?
            } else {
                b
            };
            let n = config.n.unwrap_or(2);
            let depth = config.depth.unwrap_or(2);
            let h0 = config
                .h
                .unwrap_or_else(|| 1e-6 * (n as f64).powi(-(depth as i32)));
            let tree = build_martingale(&hb, n, depth, h0)?;
            let mut content = tree.to_json();
            content.push('\n');
            write_out(config.out.as_deref(), &content)?;
            Ok(EXIT_OK)
        }
        "transform" => {
            let spec = config
                .function
                .as_deref()
                .ok_or_else(|| Error::domain("transform needs --function"))?;
            let b = parse_function_spec(spec)?;
            let n = config.n.unwrap_or(2);
            let tol = config.tol.unwrap_or(1e-6);
            let box_ = NAdicBox::new(n, 0, 0)?;
            let hb = if b.domain() == Domain::Disk {
                b.conjugate_exponential()?
            } else {
                b.clone()
            };
            let mu = mu_from_bloch(&hb);
            #[derive(Serialize)]
            struct TransformResult {
                box_id: (u32, i64, i32),
                box_weighted_area: String,
                box_average: String,
                collar_ratio_s1: String,
                mu_spec: Option<serde_json::Value>,
            }
            let result = TransformResult {
                box_id: box_.id(),
                box_weighted_area: fmt17(box_.weighted_area()),
                box_average: fmt17(box_average(&hb, box_, tol)?),
                collar_ratio_s1: fmt17(collar_ratio(box_, 1.0)?),
                mu_spec: mu
                    .to_spec_json()
                    .ok()
                    .and_then(|s| serde_json::from_str(&s).ok()),
            };
            let content = artifact_json(config, result);
            write_out(config.out.as_deref(), &content)?;
            Ok(EXIT_OK)
        }
        "alpha" => {
            let radius = config
                .ball_radius
                .unwrap_or_else(|| hyperbolic_radius(0.4).expect("0.4 < 1"));
            let budget = config.budget.unwrap_or(24);
            let seed = config.seed.unwrap_or(0);
            let lower = alpha_sup_estimate(radius, budget, seed)?;
            let probe = alpha_average(
                &BlochFunction::identity(),
                HyperbolicPoint::disk(Complex64::new(0.0, 0.0))?,
                radius,
            )?;
            #[derive(Serialize)]
            struct AlphaResult {
                ball_radius: String,
                lower_bound: String,
                identity_probe: String,
            }
            let content = artifact_json(
                config,
                AlphaResult {
                    ball_radius: fmt17(radius),
                    lower_bound: fmt17(lower),
                    identity_probe: fmt17(probe),
                },
            );
            write_out(config.out.as_deref(), &content)?;
            Ok(EXIT_OK)
        }
        other => Err(Error::domain(format!("unknown command {other}"))),
    }
}
