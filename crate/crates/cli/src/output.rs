//! CSV / JSON tables and the metadata sidecar.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use tqem_core::sensing::SweepRow;
use tqem_core::spinbath::CoherenceCurve;

pub const COLUMNS: [&str; 12] = [
    "tau_us",
    "theta_rad",
    "p",
    "s_ideal",
    "s_noisy",
    "s_mitigated",
    "s_mitigated_std",
    "eta_mitigated",
    "eta_naqs",
    "eta_bound",
    "circuits_used",
    "shots_per_circuit",
];

/// 17 significant digits, `inf` for infinities.
pub fn real(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(real).unwrap_or_default()
}

fn shots_field(row: &SweepRow) -> String {
    row.shots_per_circuit.iter().map(u64::to_string).collect::<Vec<_>>().join(";")
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = COLUMNS.join(",");
    out.push('\n');
    for r in rows {
        let fields = [
            real(r.tau_us),
            real(r.theta_rad),
            real(r.p),
            real(r.s_ideal),
            real(r.s_noisy),
            opt(r.s_mitigated),
            opt(r.s_mitigated_std),
            opt(r.eta_mitigated),
            opt(r.eta_naqs),
            opt(r.eta_bound),
            r.circuits_used.to_string(),
            shots_field(r),
        ];
        let _ = writeln!(out, "{}", fields.join(","));
    }
    out
}

fn json_real(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!(real(x))
    }
}

pub fn sweep_json(rows: &[SweepRow]) -> String {
    let rows: Vec<Value> = rows
        .iter()
        .map(|r| {
            json!({
                "tau_us": json_real(r.tau_us),
                "theta_rad": json_real(r.theta_rad),
                "p": json_real(r.p),
                "s_ideal": json_real(r.s_ideal),
                "s_noisy": json_real(r.s_noisy),
                "s_mitigated": r.s_mitigated.map(json_real),
                "s_mitigated_std": r.s_mitigated_std.map(json_real),
                "eta_mitigated": r.eta_mitigated.map(json_real),
                "eta_naqs": r.eta_naqs.map(json_real),
                "eta_bound": r.eta_bound.map(json_real),
                "circuits_used": r.circuits_used,
                "shots_per_circuit": r.shots_per_circuit,
            })
        })
        .collect();
    let mut s = serde_json::to_string_pretty(&json!({ "columns": COLUMNS, "rows": rows })).expect("plain JSON");
    s.push('\n');
    s
}

pub fn curve_csv(curve: &CoherenceCurve) -> String {
    let mut out = String::from("tau_us,re,im,abs\n");
    for (t, w) in curve.times.iter().zip(&curve.values) {
        let _ = writeln!(out, "{},{},{},{}", real(*t), real(w.re), real(w.im), real(w.norm()));
    }
    out
}

pub fn curve_json(curve: &CoherenceCurve) -> String {
    let points: Vec<Value> = curve
        .times
        .iter()
        .zip(&curve.values)
        .map(|(t, w)| json!({ "tau_us": t, "re": w.re, "im": w.im, "abs": w.norm() }))
        .collect();
    let mut s = serde_json::to_string_pretty(&json!({ "order": curve.order, "points": points })).expect("plain JSON");
    s.push('\n');
    s
}

pub fn sha256_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn meta_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

/// Sidecar with the effective configuration, its hash, seed and version.
pub fn meta_json(command: &str, config_toml: &str, seed: u64, extra: Value) -> String {
    let mut meta = json!({
        "command": command,
        "config_sha256": sha256_hex(config_toml),
        "seed": seed,
        "version": env!("CARGO_PKG_VERSION"),
        "config": config_toml,
    });
    if let (Value::Object(m), Value::Object(e)) = (&mut meta, extra) {
        m.extend(e);
    }
    let mut s = serde_json::to_string_pretty(&meta).expect("plain JSON");
    s.push('\n');
    s
}
