use serde_json::{json, Value};

use conelab_core::barrier_lab::{self, admissible_parameter_search, certify, Certificate, M_CANDIDATES};
use conelab_core::cone_geometry::{cap_geometry, is_minimizing, morgan_threshold, ConeParam};
use conelab_core::elliptic_grid::AxisymGrid;
use conelab_core::fbp_minimizer::{homogeneous_extension, minimize, MinimizeConfig, Trace};
use conelab_core::ode_engine::{
    first_zero, fmt17, integrate_profile, integrate_to_pole, symmetric_solution, DEFAULT_STEP,
};
use conelab_core::stability_analysis::{
    find_critical_c0, stability_margin, stability_margin_with_step, steklov_min_quotient,
};
use conelab_core::weiss_monitor::weiss_trace;

use crate::params::{GridSpec, Params};
use crate::CliError;

pub const COMMANDS: [&str; 9] =
    ["profile", "phi0", "stability", "critical-c", "steklov", "minimize", "weiss", "barriers", "morgan"];

/// Result of one command evaluation.
#[derive(Debug, Default)]
pub struct Output {
    pub summary: String,
    pub json: Value,
    /// Values for [`columns`], used by sweeps.
    pub row: Vec<String>,
    /// Extra artifacts `(file name, contents)`.
    pub files: Vec<(String, String)>,
    /// Written only with `--plot-data`.
    pub plot: Vec<(String, String)>,
}

pub fn columns(cmd: &str) -> &'static [&'static str] {
    match cmd {
        "profile" => &["lambda", "f0", "first_zero", "ode_residual"],
        "phi0" => &["phi0", "t0", "H1", "alpha"],
        "stability" => &["phi0", "H1", "g_at_phi0", "gp_at_phi0", "margin", "stable"],
        "critical-c" => &["c0"],
        "steklov" => &["lambda", "closed_form", "iterations"],
        "minimize" => &["energy", "energy_gap", "sup_distance", "fb_mean", "vertex_touch"],
        "weiss" => &["w_min", "w_max", "variation", "monotone_violation", "homogeneous"],
        "barriers" => &["certified", "M", "phi2", "lift_gradient_margin", "lift_flux_margin"],
        "morgan" => &["threshold", "minimizing"],
        _ => &[],
    }
}

pub fn run(cmd: &str, p: &Params) -> Result<Output, CliError> {
    match cmd {
        "profile" => profile(p),
        "phi0" => phi0(p),
        "stability" => stability(p),
        "critical-c" => critical_c(p),
        "steklov" => steklov(p),
        "minimize" => minimize_cmd(p),
        "weiss" => weiss(p),
        "barriers" => barriers(p),
        "morgan" => morgan(p),
        other => Err(CliError::Usage(format!("unknown command {other:?}"))),
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt17).unwrap_or_default()
}

fn grid(p: &Params, default: (usize, usize)) -> Result<AxisymGrid, CliError> {
    let (nr, nphi) = p.get_grid("grid", default)?;
    Ok(AxisymGrid::new(nr, nphi)?)
}

fn profile(p: &Params) -> Result<Output, CliError> {
    let c = p.get("c", 0.0)?;
    let beta = p.get("beta", 1.0)?;
    let step = p.get("step", DEFAULT_STEP)?;
    let prof = match p.get_opt::<f64>("phi-max")? {
        Some(phi_max) => integrate_profile(beta, c, phi_max, step)?,
        None => integrate_to_pole(beta, c, step)?,
    };
    let zero = first_zero(&prof).ok().map(|a| a.phi);
    let residual = prof.ode_residual_max();
    let mut plot = String::from("phi,f,fp\n");
    for (a, f, fp) in prof.nodes() {
        plot.push_str(&format!("{},{},{}\n", fmt17(a.phi), fmt17(f), fmt17(fp)));
    }
    Ok(Output {
        summary: format!(
            "profile c={c} beta={beta}: f0 = {:.10}, first zero = {}",
            prof.f0,
            zero.map_or("none".into(), |z| format!("{z:.10}"))
        ),
        json: json!({"c": c, "beta": beta, "lambda": prof.lambda, "step": step, "f0": prof.f0, "first_zero": zero, "ode_residual": residual, "nodes": prof.grid().len()}),
        row: vec![fmt17(prof.lambda), fmt17(prof.f0), opt(zero), fmt17(residual)],
        files: vec![("profile.txt".into(), prof.to_text())],
        plot: vec![("profile_plot.csv".into(), plot)],
    })
}

fn phi0(p: &Params) -> Result<Output, CliError> {
    let c = p.get("c", 0.0)?;
    let sol = symmetric_solution(c)?;
    let param = ConeParam::new(c)?;
    let cap = cap_geometry(sol.phi0)?;
    Ok(Output {
        summary: format!("phi0({c}) = {:.10}", sol.phi0),
        json: json!({"c": c, "phi0": sol.phi0, "t0": sol.t0, "H1": sol.h1, "alpha": param.alpha, "delta": param.delta, "cap": cap}),
        row: vec![fmt17(sol.phi0), fmt17(sol.t0), fmt17(sol.h1), fmt17(param.alpha)],
        ..Default::default()
    })
}

fn stability(p: &Params) -> Result<Output, CliError> {
    let c = p.get("c", 0.0)?;
    let step = p.get("step", DEFAULT_STEP)?;
    let rep = stability_margin_with_step(c, step)?;
    Ok(Output {
        summary: format!("c = {c}: margin = {:.10e} ({})", rep.margin, if rep.stable { "stable" } else { "unstable" }),
        row: vec![
            fmt17(rep.phi0),
            fmt17(rep.h1),
            fmt17(rep.g_at_phi0),
            fmt17(rep.gp_at_phi0),
            fmt17(rep.margin),
            rep.stable.to_string(),
        ],
        json: serde_json::to_value(&rep).expect("report serializes"),
        ..Default::default()
    })
}

fn critical_c(p: &Params) -> Result<Output, CliError> {
    let lo = p.get("lo", 0.0)?;
    let hi = p.get("hi", 10.0)?;
    let tol = p.get("tol", 1e-6)?;
    let c0 = find_critical_c0(lo, hi, tol)?;
    let n = p.get("points", 21usize)?;
    let sweep: Vec<Value> = (0..n)
        .map(|k| lo + (hi - lo) * k as f64 / (n.max(2) - 1) as f64)
        .map(|c| stability_margin(c).map(|r| serde_json::to_value(r).expect("report serializes")))
        .collect::<Result<_, _>>()?;
    Ok(Output {
        summary: format!("c0 = {c0:.10}"),
        json: json!({"lo": lo, "hi": hi, "tol": tol, "c0": c0, "sweep": sweep}),
        row: vec![fmt17(c0)],
        ..Default::default()
    })
}

fn steklov(p: &Params) -> Result<Output, CliError> {
    let c = p.get("c", 0.2)?;
    let r_scale = p.get("r-scale", 16.0)?;
    let (ns, nphi) = p.get_grid("grid", (96, 48))?;
    let res = steklov_min_quotient(c, r_scale, ns, nphi)?;
    Ok(Output {
        summary: format!(
            "c = {c}, R = {r_scale}: min quotient = {:.10e}, closed form = {:.10e}",
            res.lambda, res.closed_form
        ),
        row: vec![fmt17(res.lambda), fmt17(res.closed_form), res.iterations.to_string()],
        json: serde_json::to_value(res).expect("result serializes"),
        ..Default::default()
    })
}

fn boundary_trace(p: &Params, c: f64) -> Result<Trace, CliError> {
    match p.get_str("boundary", "symmetric").as_str() {
        "symmetric" => Ok(Trace::symmetric(&symmetric_solution(c)?)),
        "halfspace" => Ok(Trace::clamped_cosine()),
        other => Err(CliError::Usage(format!("unknown boundary {other:?}, expected symmetric or halfspace"))),
    }
}

fn minimize_cmd(p: &Params) -> Result<Output, CliError> {
    let c = p.get("c", 0.1)?;
    let (nr, nphi) = p.get_grid("grid", (64, 64))?;
    let mut cfg = MinimizeConfig::new(c, nr, nphi)?;
    cfg.max_outer = p.get("max-outer", cfg.max_outer)?;
    let res = minimize(&cfg, &boundary_trace(p, c)?)?;
    let trace = weiss_trace(&res.field, 16)?;
    let mut out = Output {
        summary: format!(
            "c = {c}: energy = {:.10}, gap to Phi_c = {:.4e}, sup distance = {:.4e}, vertex touch = {}",
            res.energy, res.energy_gap, res.sup_distance_to_phi, res.vertex_touch
        ),
        row: vec![
            fmt17(res.energy),
            fmt17(res.energy_gap),
            fmt17(res.sup_distance_to_phi),
            opt(res.fb.mean),
            res.vertex_touch.to_string(),
        ],
        json: json!({"config": cfg, "result": res, "weiss": trace}),
        files: vec![("minimize_field.csv".into(), res.field.to_csv())],
        plot: vec![("minimize_weiss.csv".into(), trace.to_csv())],
    };
    if p.get("save-field", false)? {
        out.files.push(("minimize_field.txt".into(), res.field.to_text()));
    }
    Ok(out)
}

fn weiss(p: &Params) -> Result<Output, CliError> {
    let c = p.get("c", 0.1)?;
    let g = grid(p, (128, 128))?;
    let radii = p.get("radii", 16usize)?;
    let field = match p.get_str("source", "symmetric").as_str() {
        "symmetric" => homogeneous_extension(g, c, &boundary_trace(p, c)?)?,
        "minimize" => {
            let cfg = MinimizeConfig::new(c, g.nr, g.nphi)?;
            minimize(&cfg, &boundary_trace(p, c)?)?.field
        }
        other => return Err(CliError::Usage(format!("unknown source {other:?}, expected symmetric or minimize"))),
    };
    let t = weiss_trace(&field, radii)?;
    let (lo, hi) = t.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &w| (a.min(w), b.max(w)));
    Ok(Output {
        summary: format!(
            "W in [{lo:.8}, {hi:.8}], monotone violation = {:.3e}, homogeneous = {}",
            t.monotone_violation, t.homogeneity_flag
        ),
        row: vec![
            fmt17(lo),
            fmt17(hi),
            fmt17(t.variation()),
            fmt17(t.monotone_violation),
            t.homogeneity_flag.to_string(),
        ],
        plot: vec![("weiss_plot.csv".into(), t.to_csv())],
        json: serde_json::to_value(&t).expect("trace serializes"),
        ..Default::default()
    })
}

fn cert_row(cert: &Certificate) -> Vec<String> {
    vec![
        cert.certified().to_string(),
        fmt17(cert.m),
        opt(cert.phi2),
        opt(cert.margins.lift_gradient),
        opt(cert.margins.lift_flux),
    ]
}

fn barriers(p: &Params) -> Result<Output, CliError> {
    let n = p.get("points", barrier_lab::AUDIT_POINTS)?;
    let (nr, nphi) = p.get_grid("lift-grid", (192, 192))?;
    let lift = AxisymGrid::new(nr, nphi)?;
    if let Some(spec) = p.as_map().get("cs") {
        let cs: GridSpec = format!("c={spec}").parse()?;
        let res = admissible_parameter_search(&cs.values, n, lift)?;
        let best = res.best.as_ref();
        return Ok(Output {
            summary: match best {
                Some(b) => format!("largest certified c = {} with M = {}", b.c, b.m),
                None => "no (c, M) certified".into(),
            },
            row: best
                .map(cert_row)
                .unwrap_or_else(|| vec!["false".into(), String::new(), String::new(), String::new(), String::new()]),
            json: serde_json::to_value(&res).expect("search serializes"),
            ..Default::default()
        });
    }
    let c = p.get("c", 0.05)?;
    let ms: Vec<f64> = match p.get_opt::<f64>("m")? {
        Some(m) => vec![m],
        None => M_CANDIDATES.to_vec(),
    };
    let mut last = None;
    for m in ms {
        let cert = certify(c, m, n, lift)?;
        let done = cert.certified();
        last = Some(cert);
        if done {
            break;
        }
    }
    let cert = last.expect("at least one offset");
    Ok(Output {
        summary: format!("c = {c}, M = {}: certified = {}", cert.m, cert.certified()),
        row: cert_row(&cert),
        json: serde_json::to_value(&cert).expect("certificate serializes"),
        ..Default::default()
    })
}

fn morgan(p: &Params) -> Result<Output, CliError> {
    let k: u32 = p.get::<f64>("k", 3.0).and_then(|k| {
        if k.fract() == 0.0 && k >= 0.0 {
            Ok(k as u32)
        } else {
            Err(crate::UsageError(format!("k must be an integer, got {k}")))
        }
    })?;
    let c = p.get("c", 0.0)?;
    let threshold = morgan_threshold(k)?;
    let minimizing = is_minimizing(k, c)?;
    Ok(Output {
        summary: threshold.map_or("no threshold for k = 2 (never minimizing)".into(), |t| format!("{t:.10}")),
        json: json!({"k": k, "c": c, "threshold": threshold, "minimizing": minimizing}),
        row: vec![opt(threshold), minimizing.to_string()],
        ..Default::default()
    })
}
