use clap::{Args, ValueEnum};
use serde_json::{json, Value};

use gaussrd::cyclic::{derivative_condition, parametric_curve, thresholds_cyclic, CyclicInstance};
use gaussrd::duality::{mt_region_spec, to_remote};
use gaussrd::matching::{md_scan, threshold_thm6, threshold_thm7, MdScan, DEFAULT_SCAN_RMAX};
use gaussrd::model::json::{parse_problem, row_major, Problem, RemoteProblemFile};
use gaussrd::model::{AuxRates, DistortionCriterion, MultiterminalProblem, RemoteProblem};
use gaussrd::multiterminal::{
    best_split_lower, sum_rate_bounds, threshold_cor4, threshold_thm12, twoterm_region_curve, twoterm_sum_rate,
    zeta, SumRateOptions,
};
use gaussrd::regions::{copolymatroid_audit, region_spec, BoundMode, RegionSpec, Subset};
use gaussrd::waterfill::{alpha_spectrum, omega, water_level, WaterFillResult};

use crate::output::{bits, num, rate_line, Report, Table};
use crate::{CliError, Command, Global};

pub fn run(g: &Global, cmd: &Command) -> Result<Report, CliError> {
    match cmd {
        Command::Region(a) => region(g, a),
        Command::Sumrate(a) => sumrate(g, a),
        Command::Match(a) => matching(g, a),
        Command::Waterfill(a) => waterfill(g, a),
        Command::Transform(a) => transform(g, a),
        Command::Cyclic(a) => cyclic(g, a),
        Command::Twoterm(a) => twoterm(a),
    }
}

fn load(g: &Global) -> Result<Problem, CliError> {
    let path = g
        .input
        .as_ref()
        .ok_or_else(|| CliError::BadInput("this command needs --input".into()))?;
    let text = std::fs::read_to_string(path).map_err(|e| CliError::BadInput(format!("{}: {e}", path.display())))?;
    parse_problem(&text).map_err(|e| CliError::BadInput(format!("{}: {e}", path.display())))
}

fn load_remote(g: &Global) -> Result<RemoteProblem, CliError> {
    match load(g)? {
        Problem::Remote(p) => Ok(p),
        Problem::Multiterminal(_) => Err(CliError::BadInput("expected a remote problem file".into())),
    }
}

fn load_multiterminal(g: &Global) -> Result<MultiterminalProblem, CliError> {
    match load(g)? {
        Problem::Multiterminal(p) => Ok(p),
        Problem::Remote(_) => Err(CliError::BadInput("expected a multiterminal problem file".into())),
    }
}

fn rates(r: &[f64]) -> Result<AuxRates, CliError> {
    Ok(AuxRates::new(r.to_vec())?)
}

fn members(s: Subset, l: usize) -> String {
    s.indices(l).iter().map(|i| (i + 1).to_string()).collect::<Vec<_>>().join(" ")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Inner,
    Outer,
}

#[derive(Args, Debug)]
pub struct RegionArgs {
    /// Auxiliary rates in nats, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub rates: Vec<f64>,
    #[arg(long, value_enum, default_value_t = Mode::Inner)]
    pub mode: Mode,
    /// Determinant target for the outer bound; `|Σ_d + B|` for multiterminal files.
    #[arg(long)]
    pub theta: Option<f64>,
}

fn region(g: &Global, a: &RegionArgs) -> Result<Report, CliError> {
    let mode = match (a.mode, a.theta) {
        (Mode::Inner, _) => BoundMode::Inner,
        (Mode::Outer, Some(theta)) => BoundMode::Outer { theta },
        (Mode::Outer, None) => return Err(CliError::BadInput("--mode outer needs --theta".into())),
    };
    let r = rates(&a.rates)?;
    let spec: RegionSpec = match load(g)? {
        Problem::Remote(p) => region_spec(&p, &r, mode)?,
        Problem::Multiterminal(p) => mt_region_spec(&p, &r, mode)?,
    };
    let l = spec.l();
    let mut table = Table::new(&["subset", "members", "bound_nats", "bound_bits"]);
    for m in 1..1u32 << l {
        let v = spec.get(Subset(m));
        table.push(vec![m.to_string(), members(Subset(m), l), num(v), num(bits(v))]);
    }
    let audit = copolymatroid_audit(&spec, g.tol.unwrap_or(1e-9));
    let verdict = if audit.passed() {
        "co-polymatroid audit passed".to_string()
    } else {
        format!("co-polymatroid audit found {} violations", audit.violations.len())
    };
    let json: Value = serde_json::from_str(&spec.to_json()).map_err(|e| CliError::Io(e.to_string()))?;
    Ok(Report {
        json,
        table,
        summary: vec![verdict, rate_line("full-set bound", spec.get(Subset((1 << l) - 1)))],
    })
}

#[derive(Args, Debug)]
pub struct SumrateArgs {
    /// Per-terminal distortion caps (or the sum distortion with --cyclic).
    #[arg(long, value_delimiter = ',')]
    pub d: Option<Vec<f64>>,
    /// `LO:HI:N`, a common cap swept over `N` evenly spaced values.
    #[arg(long, conflicts_with = "d")]
    pub sweep: Option<String>,
    #[arg(long, default_value_t = 16)]
    pub starts: usize,
    /// Maximize the lower bound over diagonal splits of `Σ_Y`.
    #[arg(long)]
    pub best_split: bool,
    /// Cells per axis of the initial split grid.
    #[arg(long, default_value_t = 4)]
    pub split_grid: usize,
    /// Treat the source as cyclic shift invariant and `d` as a sum distortion.
    #[arg(long)]
    pub cyclic: bool,
    /// Noise level for --cyclic; defaults to a uniform split or just below `μ_min`.
    #[arg(long)]
    pub eps: Option<f64>,
}

fn parse_sweep(s: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::BadInput(format!("sweep `{s}` is not LO:HI:N"));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if n == 0 || !(lo.is_finite() && hi.is_finite()) {
        return Err(bad());
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    Ok((0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect())
}

fn cyclic_instance(mp: &MultiterminalProblem, eps: Option<f64>) -> Result<CyclicInstance, CliError> {
    let split = mp.split();
    let uniform = split.iter().all(|s| *s == split[0]);
    Ok(match eps {
        Some(e) => CyclicInstance::new(mp.sigma_y(), e)?,
        None if uniform => CyclicInstance::new(mp.sigma_y(), split[0])?,
        None => CyclicInstance::with_default_epsilon(mp.sigma_y())?,
    })
}

fn sumrate(g: &Global, a: &SumrateArgs) -> Result<Report, CliError> {
    let mp = load_multiterminal(g)?;
    let l = mp.l();
    let values = match (&a.d, &a.sweep) {
        (Some(d), None) => d.clone(),
        (None, Some(s)) => parse_sweep(s)?,
        _ => return Err(CliError::BadInput("give --d or --sweep".into())),
    };
    if a.cyclic {
        return sumrate_cyclic(&mp, a, &values);
    }
    let targets: Vec<Vec<f64>> = if a.d.is_some() {
        vec![values]
    } else {
        values.iter().map(|&v| vec![v; l]).collect()
    };
    let mut opts = SumRateOptions {
        starts: a.starts,
        seed: g.seed,
        ..Default::default()
    };
    if let Some(t) = g.tol {
        opts.step_tol = t;
    }
    let mut header: Vec<String> = (1..=l).map(|i| format!("d{i}")).collect();
    header.extend(["lower_nats", "upper_nats", "gap_nats", "lower_bits", "upper_bits"].map(String::from));
    let mut table = Table {
        header,
        rows: Vec::new(),
    };
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for d in &targets {
        let b = sum_rate_bounds(&mp, d, &opts)?;
        let (lower, split) = if a.best_split {
            let s = best_split_lower(mp.sigma_y(), mp.gamma(), d, a.split_grid)?;
            (s.lower.value.max(b.lower), Some(s.problem.split().to_vec()))
        } else {
            (b.lower, None)
        };
        let gap = b.upper - lower;
        let mut row: Vec<String> = d.iter().map(|v| num(*v)).collect();
        row.extend([num(lower), num(b.upper), num(gap), num(bits(lower)), num(bits(b.upper))]);
        table.push(row);
        rows.push(json!({
            "d": d,
            "lower_nats": lower,
            "upper_nats": b.upper,
            "gap_nats": gap,
            "lower_bits": bits(lower),
            "upper_bits": bits(b.upper),
            "r_upper": b.argmin_r_upper.as_slice(),
            "r_lower": b.argmin_r_lower.as_slice(),
            "best_split": split,
        }));
        summary.push(format!(
            "d = {d:?}: lower {lower:.6} / upper {:.6} nats ({:.6} / {:.6} bits)",
            b.upper,
            bits(lower),
            bits(b.upper)
        ));
    }
    Ok(Report {
        json: Value::Array(rows),
        table,
        summary,
    })
}

fn sumrate_cyclic(mp: &MultiterminalProblem, a: &SumrateArgs, values: &[f64]) -> Result<Report, CliError> {
    let ci = cyclic_instance(mp, a.eps)?;
    let th = thresholds_cyclic(&ci);
    let mut table = Table::new(&[
        "d",
        "r_star",
        "lower_nats",
        "upper_nats",
        "gap_nats",
        "lower_bits",
        "upper_bits",
        "below_threshold",
    ]);
    let mut rows = Vec::new();
    for &d in values {
        let rs = ci.r_star(d)?;
        let upper = ci.sum_rate_upper(d)?;
        let (_, lower) = ci.sum_rate_lower(d, 4.0, 400)?;
        let below = d <= th.d_th;
        table.push(vec![
            num(d),
            num(rs),
            num(lower),
            num(upper),
            num(upper - lower),
            num(bits(lower)),
            num(bits(upper)),
            below.to_string(),
        ]);
        rows.push(json!({
            "d": d,
            "r_star": rs,
            "lower_nats": lower,
            "upper_nats": upper,
            "gap_nats": upper - lower,
            "lower_bits": bits(lower),
            "upper_bits": bits(upper),
            "below_threshold": below,
        }));
    }
    Ok(Report {
        json: Value::Array(rows),
        table,
        summary: vec![format!("epsilon {}, D_th {}", ci.epsilon(), th.d_th)],
    })
}

#[derive(Args, Debug)]
pub struct MatchArgs {
    /// Sum distortion at which to run the grid check.
    #[arg(long)]
    pub d: Option<f64>,
    /// Grid points per rate axis.
    #[arg(long, default_value_t = 6)]
    pub grid: usize,
    #[arg(long, default_value_t = DEFAULT_SCAN_RMAX)]
    pub r_max: f64,
    /// Random rotations tried when estimating each `Υ_l`.
    #[arg(long, default_value_t = 0)]
    pub refine: usize,
}

fn scan_json(s: &MdScan, d: f64, a: &MatchArgs) -> Value {
    json!({
        "d": d,
        "grid": a.grid,
        "r_max": a.r_max,
        "holds": s.holds,
        "worst_violation": s.worst_violation,
        "witness": s.witness.as_slice(),
        "points_in_region": s.points_in_region,
        "pairs_checked": s.pairs_checked,
    })
}

fn opt_num(x: Option<f64>) -> String {
    x.map_or_else(String::new, num)
}

fn matching(g: &Global, a: &MatchArgs) -> Result<Report, CliError> {
    match load(g)? {
        Problem::Remote(p) => {
            let t6 = threshold_thm6(&p, a.refine, g.seed)?;
            let t7 = threshold_thm7(&p)?;
            let scan = a.d.map(|d| md_scan(&p, d, a.grid, a.r_max).map(|s| (d, s))).transpose()?;
            let mut pairs = vec![
                ("thm6_full", opt_num(t6.full)),
                ("thm6_simplified", num(t6.simplified)),
                ("thm7", num(t7.value)),
                ("tau_star", num(t7.tau_star)),
            ];
            let mut summary = vec![format!(
                "thresholds: thm6 {} (simplified {}), thm7 {}",
                opt_num(t6.full),
                t6.simplified,
                t7.value
            )];
            if let Some((d, s)) = &scan {
                pairs.push(("md_holds", s.holds.to_string()));
                pairs.push(("md_worst_violation", num(s.worst_violation)));
                summary.push(format!("grid check at D = {d}: {}", if s.holds { "holds" } else { "violated" }));
            }
            Ok(Report {
                json: json!({
                    "kind": "remote",
                    "thm6": {"full": t6.full, "simplified": t6.simplified},
                    "thm7": {"value": t7.value, "tau_star": t7.tau_star},
                    "md_scan": scan.as_ref().map(|(d, s)| scan_json(s, *d, a)),
                }),
                table: Table::pairs(&pairs),
                summary,
            })
        }
        Problem::Multiterminal(mp) => {
            let t12 = threshold_thm12(&mp)?;
            let cor4 = mp
                .diagonal_weights()
                .map(|w| threshold_cor4(mp.sigma_y(), &w))
                .transpose()?;
            let z = zeta(mp.sigma_y());
            let scan = match a.d {
                Some(d) => {
                    let t = to_remote(&mp, &DistortionCriterion::Sum(d))?;
                    let DistortionCriterion::Sum(dr) = t.criterion else {
                        unreachable!("sum criterion maps to a sum criterion")
                    };
                    Some((d, md_scan(&t.problem, dr, a.grid, a.r_max)?))
                }
                None => None,
            };
            let mut pairs = vec![("thm12", num(t12)), ("cor4", opt_num(cor4)), ("zeta", num(z))];
            let mut summary = vec![format!("thresholds: thm12 {t12}, cor4 {}", opt_num(cor4))];
            if let Some((d, s)) = &scan {
                pairs.push(("md_holds", s.holds.to_string()));
                pairs.push(("md_worst_violation", num(s.worst_violation)));
                summary.push(format!("grid check at D = {d}: {}", if s.holds { "holds" } else { "violated" }));
            }
            Ok(Report {
                json: json!({
                    "kind": "multiterminal",
                    "thm12": t12,
                    "cor4": cor4,
                    "zeta": z,
                    "md_scan": scan.as_ref().map(|(d, s)| scan_json(s, *d, a)),
                }),
                table: Table::pairs(&pairs),
                summary,
            })
        }
    }
}

#[derive(Args, Debug)]
pub struct WaterfillArgs {
    /// Floors to fill directly, without a problem file.
    #[arg(long, value_delimiter = ',', requires = "budget")]
    pub floors: Option<Vec<f64>>,
    #[arg(long)]
    pub budget: Option<f64>,
    /// Auxiliary rates for a remote problem file.
    #[arg(long, value_delimiter = ',', conflicts_with = "floors", requires = "d")]
    pub rates: Option<Vec<f64>>,
    /// Sum distortion for a remote problem file.
    #[arg(long)]
    pub d: Option<f64>,
}

fn waterfill(g: &Global, a: &WaterfillArgs) -> Result<Report, CliError> {
    let (floors, res): (Vec<f64>, WaterFillResult) = match (&a.floors, &a.rates) {
        (Some(f), _) => (f.clone(), water_level(f, a.budget.expect("clap enforces --budget"))?),
        (None, Some(r)) => {
            let p = load_remote(g)?;
            let r = rates(r)?;
            let spec = alpha_spectrum(&p, &r)?;
            let floors = spec.values.iter().map(|v| 1.0 / v).collect();
            (floors, omega(&p, &r, a.d.expect("clap enforces --d"))?)
        }
        (None, None) => return Err(CliError::BadInput("give --floors and --budget, or --rates and --d".into())),
    };
    let mut table = Table::new(&["index", "floor", "component", "raised"]);
    for (i, (f, c)) in floors.iter().zip(&res.components).enumerate() {
        table.push(vec![(i + 1).to_string(), num(*f), num(*c), res.active.contains(&i).to_string()]);
    }
    Ok(Report {
        json: json!({
            "level": res.level,
            "value": res.value,
            "floors": floors,
            "components": res.components,
            "raised": res.active,
        }),
        table,
        summary: vec![format!("water level {}, value {}", res.level, res.value)],
    })
}

#[derive(Args, Debug)]
pub struct TransformArgs {
    /// Multiterminal sum distortion to carry over.
    #[arg(long)]
    pub d: Option<f64>,
}

fn transform(g: &Global, a: &TransformArgs) -> Result<Report, CliError> {
    let mp = load_multiterminal(g)?;
    let t = to_remote(&mp, &DistortionCriterion::Sum(a.d.unwrap_or(1.0)))?;
    let DistortionCriterion::Sum(dr) = t.criterion else {
        unreachable!("sum criterion maps to a sum criterion")
    };
    let remote_d = a.d.map(|_| dr);
    let file = RemoteProblemFile::from_problem(&t.problem);
    let l = mp.l();
    let mut table = Table::new(&["quantity", "row", "col", "value"]);
    for (name, m) in [("a_tilde", &t.data.a_tilde), ("b", t.data.b_mat.matrix())] {
        for i in 0..l {
            for j in 0..l {
                table.push(vec![name.into(), (i + 1).to_string(), (j + 1).to_string(), num(m[(i, j)])]);
            }
        }
    }
    if let Some(d) = remote_d {
        table.push(vec!["remote_sum_distortion".into(), String::new(), String::new(), num(d)]);
    }
    Ok(Report {
        json: json!({
            "problem": file,
            "a_tilde": row_major(&t.data.a_tilde),
            "b": t.data.b_mat.to_row_major(),
            "remote_sum_distortion": remote_d,
        }),
        table,
        summary: vec![format!("|A~| = {}, tr B~ = {}", t.data.a_tilde_det(), t.data.b_tilde.trace())],
    })
}

#[derive(Args, Debug)]
pub struct CyclicArgs {
    #[arg(long)]
    pub eps: Option<f64>,
    /// Sum distortion at which to report `r*` and both bounds.
    #[arg(long, conflicts_with = "samples")]
    pub d: Option<f64>,
    /// Emit this many points of the parametric curve instead.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Curve start; defaults to `s(ε)`.
    #[arg(long)]
    pub r_min: Option<f64>,
    /// Curve end; defaults to `r_min + 3`.
    #[arg(long)]
    pub r_max: Option<f64>,
}

fn cyclic(g: &Global, a: &CyclicArgs) -> Result<Report, CliError> {
    let mp = load_multiterminal(g)?;
    let ci = cyclic_instance(&mp, a.eps)?;
    let th = thresholds_cyclic(&ci);
    if let Some(n) = a.samples {
        let r_min = a.r_min.unwrap_or(th.s_eps);
        let r_max = a.r_max.unwrap_or(r_min + 3.0);
        let curve = parametric_curve(&ci, r_min, r_max, n)?;
        let mut table = Table::new(&["r", "rate_nats", "rate_bits", "distortion", "certified"]);
        let mut rows = Vec::new();
        for p in &curve {
            table.push(vec![num(p.r), num(p.rate), num(bits(p.rate)), num(p.distortion), p.certified.to_string()]);
            rows.push(json!({
                "r": p.r,
                "rate_nats": p.rate,
                "rate_bits": bits(p.rate),
                "distortion": p.distortion,
                "certified": p.certified,
            }));
        }
        return Ok(Report {
            json: Value::Array(rows),
            table,
            summary: vec![format!("s(eps) = {}, D_th = {}", th.s_eps, th.d_th)],
        });
    }
    let mut pairs = vec![
        ("epsilon", num(ci.epsilon())),
        ("s_eps", num(th.s_eps)),
        ("d_th", num(th.d_th)),
    ];
    let mut obj = json!({
        "mu": ci.mu(),
        "epsilon": ci.epsilon(),
        "s_eps": th.s_eps,
        "d_th": th.d_th,
    });
    let mut summary = vec![format!("s(eps) = {}, D_th = {}", th.s_eps, th.d_th)];
    if let Some(d) = a.d {
        let upper = ci.sum_rate_upper(d)?;
        let (r_lower, lower) = ci.sum_rate_lower(d, 4.0, 400)?;
        let dc = derivative_condition(&ci, d)?;
        pairs.extend([
            ("d", num(d)),
            ("r_star", num(dc.r_star)),
            ("upper_nats", num(upper)),
            ("lower_nats", num(lower)),
            ("r_lower", num(r_lower)),
            ("derivative", num(dc.derivative)),
            ("derivative_condition", dc.satisfied.to_string()),
        ]);
        obj["d"] = json!(d);
        obj["r_star"] = json!(dc.r_star);
        obj["upper_nats"] = json!(upper);
        obj["upper_bits"] = json!(bits(upper));
        obj["lower_nats"] = json!(lower);
        obj["lower_bits"] = json!(bits(lower));
        obj["r_lower"] = json!(r_lower);
        obj["derivative"] = json!(dc.derivative);
        obj["derivative_condition"] = json!(dc.satisfied);
        summary.push(rate_line("upper", upper));
        summary.push(rate_line("lower", lower));
    }
    Ok(Report {
        json: obj,
        table: Table::pairs(&pairs),
        summary,
    })
}

#[derive(Args, Debug)]
pub struct TwotermArgs {
    #[arg(long)]
    pub sigma1: f64,
    #[arg(long)]
    pub sigma2: f64,
    #[arg(long)]
    pub rho: f64,
    #[arg(long, requires = "d2")]
    pub d1: Option<f64>,
    #[arg(long)]
    pub d2: Option<f64>,
    /// Trace the region boundary with encoder 1 or 2 held to `--d-fixed`.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2), requires = "d_fixed")]
    pub curve: Option<u8>,
    #[arg(long)]
    pub d_fixed: Option<f64>,
    #[arg(long, default_value_t = 50)]
    pub samples: usize,
}

fn twoterm(a: &TwotermArgs) -> Result<Report, CliError> {
    if let Some(which) = a.curve {
        let d = a.d_fixed.expect("clap enforces --d-fixed");
        let curve = twoterm_region_curve(a.sigma1, a.sigma2, a.rho, d, which as usize, a.samples)?;
        let mut table = Table::new(&["r1_nats", "r2_nats", "r1_bits", "r2_bits"]);
        let mut rows = Vec::new();
        for (r1, r2) in curve {
            table.push(vec![num(r1), num(r2), num(bits(r1)), num(bits(r2))]);
            rows.push(json!({"r1_nats": r1, "r2_nats": r2, "r1_bits": bits(r1), "r2_bits": bits(r2)}));
        }
        return Ok(Report {
            json: Value::Array(rows),
            table,
            summary: vec![format!("{} boundary points", a.samples)],
        });
    }
    let (Some(d1), Some(d2)) = (a.d1, a.d2) else {
        return Err(CliError::BadInput("give --d1 and --d2, or --curve with --d-fixed".into()));
    };
    let s = twoterm_sum_rate(a.sigma1, a.sigma2, a.rho, d1, d2)?;
    Ok(Report {
        json: json!({
            "in_d": s.in_d,
            "sum_rate_nats": s.value,
            "sum_rate_bits": bits(s.value),
        }),
        table: Table::pairs(&[("in_d", s.in_d.to_string()), ("sum_rate_nats", num(s.value)), ("sum_rate_bits", num(bits(s.value)))]),
        summary: vec![
            rate_line("sum rate", s.value),
            if s.in_d {
                "distortions lie in the exact region".into()
            } else {
                "distortions lie outside the region where the closed form is exact".into()
            },
        ],
    })
}
