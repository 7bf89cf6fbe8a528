//! Runs a validated plan and renders its tables and summary in memory.

use serde_json::{json, Value};
use selfnorm::distributions::{slow_variation_diagnostic, SecondMoment};
use selfnorm::inequality_audit::{
    cls_truncated_bound, glz_decoupled_bound, lower_tail_bound, BoundReport, MonteCarlo,
};
use selfnorm::kernels::{check_degeneracy, check_dominance_a1prime, check_orthogonality_a2};
use selfnorm::lil::{counterexample_report, simulate_many, PathSummary};
use selfnorm::mdp::rate_curve;
use selfnorm::truncation::truncation_table;

use crate::plan::{AuditPlan, KernelCheckPlan, LilPlan, Plan, RatePlan, ZcalcPlan};

pub const RATE_HEADER: [&str; 8] = ["x_n", "reps", "hits", "p_hat", "ci_low", "ci_high", "log_rate", "oracle_p"];
pub const ZCALC_HEADER: [&str; 5] = ["component", "b", "z", "L_at_z", "residual"];
pub const LIL_HEADER: [&str; 5] = ["checkpoint", "n", "W", "ratio", "running_max"];
pub const COUNTEREXAMPLE_HEADER: [&str; 5] = ["seed", "n", "w_product", "w_remark", "factor"];
pub const AUDIT_HEADER: [&str; 9] = [
    "bound_name",
    "bound_value",
    "empirical_p",
    "std_error",
    "upper_limit",
    "exact",
    "verdict",
    "satisfied",
    "parameters",
];
pub const DEGENERACY_HEADER: [&str; 6] = ["component", "transform", "estimate", "std_error", "by_symmetry", "pass"];
pub const ORTHOGONALITY_HEADER: [&str; 4] = ["l", "k", "correlation", "std_error"];
pub const DOMINANCE_HEADER: [&str; 2] = ["component", "c"];

/// A CSV table, not yet on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub file_name: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(file_name: impl Into<String>, header: &[&'static str]) -> Self {
        Self {
            file_name: file_name.into(),
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| e.into_error().into())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Artifacts {
    pub tables: Vec<Table>,
    pub results: Value,
}

/// Shortest round-trip decimal; identical across runs and platforms.
pub fn num(x: f64) -> String {
    format!("{x}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn execute(plan: &Plan) -> Result<Artifacts, String> {
    match plan {
        Plan::Rate(p) => rate(p),
        Plan::Lil(p) => lil(p),
        Plan::Zcalc(p) => zcalc(p),
        Plan::Audit(p) => audit(p),
        Plan::KernelCheck(p) => kernel_check(p),
    }
}

fn rate(p: &RatePlan) -> Result<Artifacts, String> {
    let curve = rate_curve(&p.dist, &p.kernel, p.n, &p.x_grid, p.reps, p.seed, &p.opts).map_err(|e| e.to_string())?;
    let mut table = Table::new("rate.csv", &RATE_HEADER);
    let mut agreement = Vec::new();
    for row in &curve.rows {
        let e = &row.estimate;
        table.rows.push(vec![
            num(e.x_n),
            e.reps.to_string(),
            e.hits.to_string(),
            num(e.p_hat),
            num(e.ci_low),
            num(e.ci_high),
            opt(e.log_rate),
            opt(row.oracle.as_ref().map(|o| o.p_hat)),
        ]);
        if let Some(o) = &row.oracle {
            let combined = e.std_error + o.std_error;
            let gap = (e.p_hat - o.p_hat).abs();
            agreement.push(json!({
                "x_n": e.x_n,
                "gap": gap,
                "combined_se": combined,
                "within_tolerance": gap <= p.oracle_se * combined,
            }));
        }
    }
    Ok(Artifacts {
        tables: vec![table],
        results: json!({
            "curve": curve,
            "r_hat": curve.log_rates(),
            "strictly_increasing": curve.is_strictly_increasing(),
            "oracle_agreement": agreement,
            "oracle_se_tolerance": p.oracle_se,
        }),
    })
}

fn lil(p: &LilPlan) -> Result<Artifacts, String> {
    let paths = simulate_many(&p.dist, &p.kernel, p.n_max, p.theta, &p.seeds, p.workers).map_err(|e| e.to_string())?;
    let mut tables = Vec::new();
    for path in &paths {
        let mut t = Table::new(format!("path_{}.csv", path.seed), &LIL_HEADER);
        for (j, &n) in path.checkpoints.iter().enumerate() {
            t.rows.push(vec![
                j.to_string(),
                n.to_string(),
                opt(path.w[j]),
                opt(path.ratio[j]),
                opt(path.running_max[j]),
            ]);
        }
        tables.push(t);
    }
    let summary = PathSummary::new(&paths, p.n_min);
    let gaps: Vec<usize> = paths.iter().map(|q| q.gaps()).collect();
    let mut results = json!({
        "theta": p.theta,
        "n_max": p.n_max,
        "seeds": p.seeds,
        "summary": summary,
        "band": [p.band.0, p.band.1],
        "fraction_within_band": summary.fraction_within(p.band.0, p.band.1),
        "gaps": gaps,
    });
    if p.counterexample {
        let report = counterexample_report(p.n_max, p.theta, &p.seeds, p.workers).map_err(|e| e.to_string())?;
        let mut t = Table::new("counterexample.csv", &COUNTEREXAMPLE_HEADER);
        for r in &report.rows {
            t.rows.push(vec![
                r.seed.to_string(),
                r.n.to_string(),
                num(r.w_product),
                num(r.w_remark),
                opt(r.factor),
            ]);
        }
        tables.push(t);
        let factors: Vec<f64> = report.rows.iter().filter_map(|r| r.factor).collect();
        results["counterexample"] = json!({
            "rows": report.rows.len(),
            "notice": report.notice,
            "factor_min": factors.iter().copied().reduce(f64::min),
            "factor_max": factors.iter().copied().reduce(f64::max),
        });
    }
    Ok(Artifacts { tables, results })
}

fn zcalc(p: &ZcalcPlan) -> Result<Artifacts, String> {
    let table = truncation_table(&p.kernel, &p.dist, p.n, p.x_n, p.method).map_err(|e| e.to_string())?;
    let mut t = Table::new("zcalc.csv", &ZCALC_HEADER);
    let mut diagnostics = Vec::new();
    for (e, c) in table.entries.iter().zip(p.kernel.components()) {
        t.rows.push(vec![
            e.component.to_string(),
            num(e.b),
            num(e.z),
            num(e.l_at_z),
            num(e.residual),
        ]);
        let moment = SecondMoment::resolve(&p.dist, &c.transform, p.method).map_err(|e| e.to_string())?;
        let grid: Vec<f64> = (0..5).map(|i| e.z * f64::from(1 << i)).collect();
        diagnostics.push(slow_variation_diagnostic(&moment, &grid, p.slow_variation).map_err(|e| e.to_string())?);
    }
    Ok(Artifacts {
        tables: vec![t],
        results: json!({ "table": table, "slow_variation": diagnostics }),
    })
}

fn audit_row(r: &BoundReport) -> Vec<String> {
    let params: Vec<String> = r.parameters.iter().map(|(k, v)| format!("{k}={}", num(*v))).collect();
    vec![
        r.bound_name.clone(),
        num(r.bound_value),
        num(r.empirical_p),
        opt(r.std_error),
        num(r.upper_limit),
        r.exact.to_string(),
        serde_json::to_value(r.verdict)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default(),
        r.satisfied.to_string(),
        params.join(";"),
    ]
}

fn audit(p: &AuditPlan) -> Result<Artifacts, String> {
    let mut reports = Vec::new();
    for b in &p.lower_tail {
        reports.push(lower_tail_bound(&b.dist, b.n, b.x).map_err(|e| e.to_string())?);
    }
    for b in &p.cls {
        let mc = MonteCarlo::new(b.reps, p.seed).with_workers(p.workers);
        reports.push(cls_truncated_bound(&b.dist, &b.transform, b.n, b.b, b.v, b.s, mc).map_err(|e| e.to_string())?);
    }
    for b in &p.glz {
        let mc = MonteCarlo::new(b.reps, p.seed).with_workers(p.workers);
        reports.push(
            glz_decoupled_bound(&b.kernel, &b.dist, b.n, b.k, b.x, b.truncation.as_deref(), mc)
                .map_err(|e| e.to_string())?,
        );
    }
    let mut t = Table::new("audit.csv", &AUDIT_HEADER);
    t.rows = reports.iter().map(audit_row).collect();
    Ok(Artifacts {
        tables: vec![t],
        results: json!({
            "reports": reports,
            "all_satisfied": reports.iter().all(|r| r.satisfied),
        }),
    })
}

fn kernel_check(p: &KernelCheckPlan) -> Result<Artifacts, String> {
    let degeneracy = check_degeneracy(&p.kernel, &p.dist, p.budget, p.seed).map_err(|e| e.to_string())?;
    let orthogonality = check_orthogonality_a2(&p.kernel, &p.dist, p.n, p.x_n, p.budget, p.seed, p.method)
        .map_err(|e| e.to_string())?;
    let dominance = check_dominance_a1prime(&p.kernel, &p.probe_grid).map_err(|e| e.to_string())?;

    let mut deg = Table::new("degeneracy.csv", &DEGENERACY_HEADER);
    for v in &degeneracy {
        deg.rows.push(vec![
            v.component.to_string(),
            v.transform.clone(),
            num(v.estimate),
            num(v.std_error),
            v.by_symmetry.to_string(),
            v.pass.to_string(),
        ]);
    }
    let mut orth = Table::new("orthogonality.csv", &ORTHOGONALITY_HEADER);
    for (l, k, r, se) in orthogonality.off_diagonal() {
        orth.rows.push(vec![l.to_string(), k.to_string(), num(r), num(se)]);
    }
    let mut dom = Table::new("dominance.csv", &DOMINANCE_HEADER);
    for (l, c) in dominance.c.iter().enumerate() {
        dom.rows.push(vec![l.to_string(), num(*c)]);
    }
    Ok(Artifacts {
        tables: vec![deg, orth, dom],
        results: json!({
            "degeneracy_pass": degeneracy.iter().all(|v| v.pass),
            "a2_pass": orthogonality.pass,
            "degeneracy": degeneracy,
            "orthogonality": orthogonality,
            "dominance": dominance,
        }),
    })
}
