use std::time::Instant;

use hyperkernel::kernels::{
    k_closed, k_eval, k_quadrature, k_series, laguerre_kernel_erfc, laguerre_kernel_expansion, DispatchConfig, EvalReport,
    KernelParams, LaguerreKernelParams,
};
use hyperkernel::matelem::{potential_matrix_element, potential_matrix_elements, ChannelIndices, GaussianPotential, MatrixElementEngine};
use hyperkernel::{Error, ExtReal, PrecisionContext};
use rayon::prelude::*;
use rug::Float;

use crate::grid::{parse_decimal, parse_indices, parse_list, GridValue};
use crate::output::{digits_for, fmt_real, fmt_short, Table};
use crate::potential::parse_potential;
use crate::{CliError, Command, Common, KernelGrid, Status};

pub fn context(common: &Common) -> Result<PrecisionContext, CliError> {
    let ctx = PrecisionContext::new(common.precision).map_err(|e| CliError::Usage(format!("--precision: {e}")))?;
    let tol = parse_decimal(&common.tol).ok_or_else(|| CliError::Usage(format!("--tol: '{}' is not a number", common.tol)))?;
    ctx.with_tol_ext(&Float::with_val(common.precision, &tol)).map_err(|e| CliError::Usage(format!("--tol: {e}")))
}

pub fn dispatch(cmd: &Command, ctx: &PrecisionContext, jobs: usize) -> Result<(Table, Status), CliError> {
    match cmd {
        Command::Kernel(grid) => kernel(grid, ctx),
        Command::Compare { grid, no_timing } => compare(grid, !no_timing, ctx),
        Command::CancelScan { m, p, beta, kappa } => {
            let grid = KernelGrid { m: m.clone(), p: p.clone(), beta: beta.clone(), kappa: kappa.clone() };
            cancel_scan(&grid, ctx)
        }
        Command::Laguerre { k, n1, n2, gamma } => laguerre(k, n1, n2, gamma, ctx),
        Command::Matel { potential, l1, l2, mu1, mu2, n1, n2, k, breakdown } => {
            let src = std::fs::read_to_string(potential)
                .map_err(|e| CliError::Parse(format!("{}: {e}", potential.display())))?;
            let pot = parse_potential(&src, ctx)?;
            let mut channels = Vec::new();
            for &a in &parse_indices(l1, "l1")? {
                for &b in &parse_indices(l2, "l2")? {
                    for &c in &parse_indices(mu1, "mu1")? {
                        for &d in &parse_indices(mu2, "mu2")? {
                            for &e in &parse_indices(n1, "n1")? {
                                for &f in &parse_indices(n2, "n2")? {
                                    channels.push(ChannelIndices::new(a, b, c, d, e, f));
                                }
                            }
                        }
                    }
                }
            }
            matel(&pot, &channels, *k, *breakdown, ctx, jobs)
        }
    }
}

fn status_of(e: &Error) -> Status {
    match e {
        Error::Domain(_) | Error::InvalidArgument(_) => Status::Usage,
        Error::Pole(_) | Error::Truncation { .. } | Error::Unconverged { .. } => Status::Unconverged,
    }
}

struct Point {
    m: u32,
    p: GridValue,
    beta: GridValue,
    kappa: GridValue,
}

impl Point {
    fn params(&self, ctx: &PrecisionContext) -> hyperkernel::Result<KernelParams> {
        let b = ctx.work_bits();
        KernelParams::new(
            self.m,
            Float::with_val(b, &self.p.exact),
            Float::with_val(b, &self.beta.exact),
            Float::with_val(b, &self.kappa.exact),
        )
    }

    fn cells(&self) -> Vec<String> {
        vec![self.m.to_string(), self.p.text.clone(), self.beta.text.clone(), self.kappa.text.clone()]
    }
}

fn points(grid: &KernelGrid) -> Result<Vec<Point>, CliError> {
    let ms = parse_indices(&grid.m, "m")?;
    let ps = parse_list(&grid.p, "p")?;
    let bs = parse_list(&grid.beta, "beta")?;
    let ks = parse_list(&grid.kappa, "kappa")?;
    let mut out = Vec::new();
    for &m in &ms {
        for p in &ps {
            for b in &bs {
                for k in &ks {
                    out.push(Point { m, p: p.clone(), beta: b.clone(), kappa: k.clone() });
                }
            }
        }
    }
    Ok(out)
}

fn error_status(e: &Error) -> String {
    match e {
        Error::Domain(_) | Error::InvalidArgument(_) => format!("domain error: {e}"),
        _ => format!("unconverged: {e}"),
    }
}

fn kernel(grid: &KernelGrid, ctx: &PrecisionContext) -> Result<(Table, Status), CliError> {
    let pts = points(grid)?;
    let d = digits_for(ctx.work_bits());
    let results: Vec<hyperkernel::Result<EvalReport>> = pts.par_iter().map(|pt| k_eval(&pt.params(ctx)?, ctx)).collect();
    let mut t = Table::new(&["m", "p", "beta", "kappa", "value", "method", "est_rel_err", "cancellation_ratio", "terms", "status"]);
    let mut status = Status::Converged;
    for (pt, r) in pts.iter().zip(results) {
        let mut row = pt.cells();
        match r {
            Ok(rep) => row.extend([
                fmt_real(&rep.value, d),
                rep.method.to_string(),
                fmt_short(&rep.est_rel_err),
                fmt_short(&rep.cancellation_ratio),
                rep.terms.to_string(),
                "ok".into(),
            ]),
            Err(e) => {
                status = status.max(status_of(&e));
                row.extend(["".into(), "".into(), "".into(), "".into(), "".into(), error_status(&e)]);
            }
        }
        t.push(row);
    }
    Ok((t, status))
}

fn rel_dev(a: &ExtReal, b: &ExtReal) -> Float {
    let bits = a.prec().max(b.prec());
    let diff = Float::with_val(bits, a - b).abs();
    let scale = Float::with_val(bits, b.abs_ref());
    if scale.is_zero() {
        diff
    } else {
        diff / scale
    }
}

struct Route {
    value: Option<hyperkernel::Result<EvalReport>>,
    seconds: f64,
}

fn timed(f: impl FnOnce() -> hyperkernel::Result<EvalReport>) -> Route {
    let t = Instant::now();
    let value = Some(f());
    Route { value, seconds: t.elapsed().as_secs_f64() }
}

fn compare(grid: &KernelGrid, timing: bool, ctx: &PrecisionContext) -> Result<(Table, Status), CliError> {
    let pts = points(grid)?;
    let cfg = DispatchConfig::default();
    let d = digits_for(ctx.work_bits());
    let results: Vec<hyperkernel::Result<[Route; 3]>> = pts
        .par_iter()
        .map(|pt| {
            let params = pt.params(ctx)?;
            let r = params.ratio();
            let skipped = || Route { value: None, seconds: 0.0 };
            let series = if params.kappa < params.beta { timed(|| k_series(&params, ctx)) } else { skipped() };
            let closed = if r >= cfg.switch_low && params.kappa < params.beta { timed(|| k_closed(&params, ctx)) } else { skipped() };
            let quad = timed(|| k_quadrature(&params, ctx));
            Ok([series, closed, quad])
        })
        .collect();
    let mut headers = vec!["m", "p", "beta", "kappa", "series", "closed_form", "quadrature", "max_rel_dev"];
    if timing {
        headers.extend(["series_seconds", "closed_form_seconds", "quadrature_seconds"]);
    }
    headers.push("status");
    let mut t = Table::new(&headers);
    let mut status = Status::Converged;
    for (pt, r) in pts.iter().zip(results) {
        let mut row = pt.cells();
        match r {
            Ok(routes) => {
                let mut values = Vec::new();
                let mut notes = Vec::new();
                for (route, name) in routes.iter().zip(["series", "closed_form", "quadrature"]) {
                    match &route.value {
                        None => row.push("skipped-by-dispatcher".into()),
                        Some(Ok(rep)) => {
                            row.push(fmt_real(&rep.value, d));
                            values.push(rep.value.clone());
                        }
                        Some(Err(e)) => {
                            status = status.max(status_of(e));
                            notes.push(format!("{name}: {e}"));
                            row.push("failed".into());
                        }
                    }
                }
                let mut worst = Float::new(64);
                for i in 0..values.len() {
                    for j in i + 1..values.len() {
                        let dv = rel_dev(&values[i], &values[j]);
                        if dv > worst {
                            worst = Float::with_val(64, &dv);
                        }
                    }
                }
                row.push(if values.len() >= 2 { fmt_short(&worst) } else { "".into() });
                if timing {
                    for route in &routes {
                        row.push(match route.value {
                            None => "".into(),
                            Some(_) => format!("{:.6}", route.seconds.max(1e-6)),
                        });
                    }
                }
                row.push(if notes.is_empty() { "ok".into() } else { notes.join("; ") });
            }
            Err(e) => {
                status = status.max(status_of(&e));
                row.extend(std::iter::repeat_n(String::new(), headers.len() - 5));
                row.push(error_status(&e));
            }
        }
        t.push(row);
    }
    Ok((t, status))
}

fn cancel_scan(grid: &KernelGrid, ctx: &PrecisionContext) -> Result<(Table, Status), CliError> {
    let pts = points(grid)?;
    let d = digits_for(ctx.work_bits());
    let results: Vec<hyperkernel::Result<EvalReport>> = pts.par_iter().map(|pt| k_closed(&pt.params(ctx)?, ctx)).collect();
    let mut t = Table::new(&[
        "m",
        "p",
        "beta",
        "kappa",
        "value",
        "cancellation_ratio",
        "lost_bits",
        "work_bits_used",
        "min_work_bits",
        "escalations",
        "est_rel_err",
        "status",
    ]);
    let mut status = Status::Converged;
    for (pt, r) in pts.iter().zip(results) {
        let mut row = pt.cells();
        match r {
            Ok(rep) => {
                let lost = rep.cancellation_ratio.clone().log2().to_f64().max(0.0);
                let min_bits = ctx.tol_bits() + lost.ceil() as u32 + 8;
                row.extend([
                    fmt_real(&rep.value, d),
                    fmt_short(&rep.cancellation_ratio),
                    format!("{lost:.1}"),
                    rep.work_bits_used.to_string(),
                    min_bits.to_string(),
                    rep.escalations.to_string(),
                    fmt_short(&rep.est_rel_err),
                    "ok".into(),
                ]);
            }
            Err(e) => {
                status = status.max(status_of(&e));
                row.extend(std::iter::repeat_n(String::new(), 7));
                row.push(error_status(&e));
            }
        }
        t.push(row);
    }
    Ok((t, status))
}

fn laguerre(k: &str, n1: &str, n2: &str, gamma: &str, ctx: &PrecisionContext) -> Result<(Table, Status), CliError> {
    let ks = parse_indices(k, "k")?;
    let n1s = parse_indices(n1, "n1")?;
    let n2s = parse_indices(n2, "n2")?;
    let gs = parse_list(gamma, "gamma")?;
    let mut pts = Vec::new();
    for &k in &ks {
        for &a in &n1s {
            for &b in &n2s {
                for g in &gs {
                    pts.push((k, a, b, g.clone()));
                }
            }
        }
    }
    let d = digits_for(ctx.work_bits());
    let results: Vec<hyperkernel::Result<(ExtReal, ExtReal)>> = pts
        .par_iter()
        .map(|(k, a, b, g)| {
            let params = LaguerreKernelParams::new(*k, *a, *b, Float::with_val(ctx.work_bits(), &g.exact));
            Ok((laguerre_kernel_expansion(&params, ctx)?, laguerre_kernel_erfc(&params, ctx)?))
        })
        .collect();
    let mut t = Table::new(&["k", "n1", "n2", "gamma", "expansion", "erfc", "rel_dev", "status"]);
    let mut status = Status::Converged;
    for ((k, a, b, g), r) in pts.iter().zip(results) {
        let mut row = vec![k.to_string(), a.to_string(), b.to_string(), g.text.clone()];
        match r {
            Ok((x, y)) => row.extend([fmt_real(&x, d), fmt_real(&y, d), fmt_short(&rel_dev(&y, &x)), "ok".into()]),
            Err(e) => {
                status = status.max(status_of(&e));
                row.extend(["".into(), "".into(), "".into(), error_status(&e)]);
            }
        }
        t.push(row);
    }
    Ok((t, status))
}

fn matel(
    pot: &GaussianPotential,
    channels: &[ChannelIndices],
    k: u32,
    breakdown: bool,
    ctx: &PrecisionContext,
    jobs: usize,
) -> Result<(Table, Status), CliError> {
    let d = digits_for(ctx.work_bits());
    let chunk = channels.len().div_ceil(jobs).max(1);
    let results: Vec<hyperkernel::Result<hyperkernel::matelem::MatrixElement>> = channels
        .par_chunks(chunk)
        .flat_map_iter(|part| {
            let mut engine = MatrixElementEngine::new(ctx).with_k(k);
            match potential_matrix_elements(&mut engine, pot, part) {
                Ok(v) => v.into_iter().map(Ok).collect::<Vec<_>>(),
                // one failing channel should not hide the others
                Err(_) => part
                    .iter()
                    .map(|ch| {
                        let mut engine = MatrixElementEngine::new(ctx).with_k(k);
                        potential_matrix_elements(&mut engine, pot, std::slice::from_ref(ch)).map(|mut v| v.remove(0))
                    })
                    .collect(),
            }
        })
        .collect();
    let mut headers: Vec<String> = ["l1", "l2", "mu1", "mu2", "n1", "n2", "pair12", "pair13_23"].iter().map(|s| s.to_string()).collect();
    if breakdown {
        for i in 0..pot.channels.len() {
            headers.extend([format!("A_{i}"), format!("zeta_{i}"), format!("i2_{i}"), format!("i3_{i}")]);
        }
    }
    headers.push("status".into());
    let mut t = Table { headers, rows: Vec::new() };
    let mut status = Status::Converged;
    for (ch, r) in channels.iter().zip(results) {
        let mut row: Vec<String> = [ch.l1, ch.l2, ch.mu1, ch.mu2, ch.n1, ch.n2].iter().map(|v| v.to_string()).collect();
        match r {
            Ok(me) => {
                row.push(fmt_real(&me.pair12, d));
                row.push(fmt_real(&me.pair13_23, d));
                if breakdown {
                    for c in &me.breakdown {
                        row.extend([fmt_real(&c.amplitude, d), fmt_real(&c.zeta, d), fmt_real(&c.i2, d), fmt_real(&c.i3, d)]);
                    }
                }
                row.push("ok".into());
            }
            Err(e) => {
                status = status.max(status_of(&e));
                row.extend(std::iter::repeat_n(String::new(), t.headers.len() - 7));
                row.push(error_status(&e));
            }
        }
        t.rows.push(row);
    }
    Ok((t, status))
}

/// Single-channel matrix element, exposed for callers that want the library
/// value behind one CLI row.
pub fn matel_single(
    pot: &GaussianPotential,
    ch: &ChannelIndices,
    ctx: &PrecisionContext,
) -> hyperkernel::Result<hyperkernel::matelem::MatrixElement> {
    potential_matrix_element(pot, ch, ctx)
}
