//! CSV encoding of simulation traces.

use std::fmt::Write as _;

use hinf_core::SimTrace;

pub const HEADER: &str =
    "t,x1,x2,x3,x4,rdot,xh1,xh2,xh3,xh4,xh5,e1,e2,e3,e4,y01,y02,y03,y1,w,tau";
pub const COLUMNS: usize = 21;

/// One row per grid point. `{}` on `f64` is the shortest decimal that
/// parses back to the same value.
pub fn to_csv(trace: &SimTrace) -> String {
    let mut out = String::with_capacity(trace.len() * 256);
    out.push_str(HEADER);
    out.push('\n');
    for k in 0..trace.len() {
        let x = &trace.x_a[k];
        let row = std::iter::once(trace.t[k])
            .chain(x[..4].iter().copied())
            .chain(std::iter::once(trace.rdot[k]))
            .chain(trace.x_hat[k].iter().copied())
            .chain(trace.e[k].iter().copied())
            .chain(trace.y_a[k].iter().copied())
            .chain([trace.w[k], trace.tau[k]]);
        for (i, v) in row.enumerate() {
            if i > 0 {
                out.push(',');
            }
            write!(out, "{v}").expect("writing to a string");
        }
        out.push('\n');
    }
    out
}

pub fn from_csv(text: &str) -> Result<SimTrace, String> {
    let mut lines = text.lines();
    if lines.next() != Some(HEADER) {
        return Err("missing or unexpected header".into());
    }
    let mut tr = SimTrace::default();
    for (n, line) in lines.enumerate() {
        let v: Vec<f64> = line
            .split(',')
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|e| format!("row {}: {e}", n + 1))?;
        if v.len() != COLUMNS {
            return Err(format!("row {}: expected {COLUMNS} columns, got {}", n + 1, v.len()));
        }
        tr.t.push(v[0]);
        tr.x_a.push([v[1], v[2], v[3], v[4], v[5]]);
        tr.rdot.push(v[5]);
        tr.x_hat.push([v[6], v[7], v[8], v[9], v[10]]);
        tr.e.push([v[11], v[12], v[13], v[14]]);
        tr.y_a.push([v[15], v[16], v[17], v[18]]);
        tr.w.push(v[19]);
        tr.tau.push(v[20]);
    }
    Ok(tr)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_has_all_columns() {
        assert_eq!(HEADER.split(',').count(), COLUMNS);
    }

    #[test]
    fn awkward_values_round_trip() {
        let vals = [0.1 + 0.2, -1e-300, 5e-324, 1.0 / 3.0, 12345678.901234567, -0.0];
        let mut tr = SimTrace::default();
        for (k, v) in vals.iter().enumerate() {
            tr.t.push(k as f64);
            tr.x_a.push([*v, 1.0, 2.0, 3.0, -v]);
            tr.rdot.push(-v);
            tr.x_hat.push([*v; 5]);
            tr.e.push([*v; 4]);
            tr.y_a.push([*v; 4]);
            tr.w.push(*v);
            tr.tau.push(0.25);
        }
        let back = from_csv(&to_csv(&tr)).unwrap();
        assert_eq!(back, tr);
    }

    #[test]
    fn malformed_rows_rejected() {
        assert!(from_csv("t,x\n").is_err());
        assert!(from_csv(&format!("{HEADER}\n1,2\n")).is_err());
    }
}
