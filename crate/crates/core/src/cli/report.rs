//! CSV rendering. Floats use 12 significant digits.

use crate::analysis::RatioReport;

pub const RUN_HEADER: &str =
    "instance_id,policy,alpha,P,n_jobs,F,E,M,G,H,lower_bound,ratio,theorem_bound,bound_ok";

/// Formats like C's `%.12g`.
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    const DIGITS: i32 = 12;
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..DIGITS).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn run_row(r: &RatioReport) -> String {
    let m = &r.metrics;
    [
        r.instance_id.clone(),
        r.policy.clone(),
        fmt_float(r.params.alpha()),
        r.params.processors().to_string(),
        r.n_jobs.to_string(),
        fmt_float(m.flow_total),
        fmt_float(m.energy),
        fmt_float(m.makespan),
        fmt_float(m.g),
        fmt_float(m.h),
        fmt_float(r.lower_bound),
        fmt_float(r.ratio),
        r.theorem_bound.map(fmt_float).unwrap_or_default(),
        r.bound_ok.to_string(),
    ]
    .join(",")
}
