//! Text model format:
//!
//! ```text
//! svm-v1 dim=<D> nsv=<K> gamma=<g> bias=<b> A=<a> B=<b> feat=<mode>,<norm|raw>,<sym|nosym>
//! <signed_coef> <v1> ... <vD>      (K lines)
//! ```
//!
//! Numbers use shortest round-trip formatting, so a reloaded model produces
//! bit-identical decision values.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use super::{Sigmoid, SvmModel};
use crate::error::{Error, Result};
use crate::features::{DiffMode, FeatureConfig};

pub const MODEL_MAGIC: &str = "svm-v1";

fn feature_tag(c: &FeatureConfig) -> String {
    format!(
        "{},{},{}",
        c.mode,
        if c.normalize { "norm" } else { "raw" },
        if c.symmetrize { "sym" } else { "nosym" }
    )
}

fn parse_feature_tag(s: &str) -> Option<FeatureConfig> {
    let mut it = s.split(',');
    let mode: DiffMode = it.next()?.parse().ok()?;
    let normalize = match it.next()? {
        "norm" => true,
        "raw" => false,
        _ => return None,
    };
    let symmetrize = match it.next()? {
        "sym" => true,
        "nosym" => false,
        _ => return None,
    };
    if it.next().is_some() {
        return None;
    }
    Some(FeatureConfig {
        mode,
        normalize,
        symmetrize,
    })
}

pub fn write_model<W: Write>(mut w: W, m: &SvmModel) -> std::io::Result<()> {
    writeln!(
        w,
        "{MODEL_MAGIC} dim={} nsv={} gamma={} bias={} A={} B={} feat={}",
        m.dim,
        m.n_support(),
        m.gamma,
        m.bias,
        m.calibration.a,
        m.calibration.b,
        feature_tag(&m.feature_config)
    )?;
    let mut line = String::new();
    for (sv, coef) in m.support_vectors.iter().zip(&m.dual_coefs) {
        line.clear();
        write!(line, "{coef}").expect("writing to String");
        for v in sv {
            write!(line, " {v}").expect("writing to String");
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn save_model(m: &SvmModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_model(&mut buf, m).map_err(|e| Error::io(path, e))?;
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<SvmModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_model(&text, &path.display().to_string())
}

pub fn parse_model(text: &str, origin: &str) -> Result<SvmModel> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));

    let (hl, header) = lines
        .next()
        .ok_or_else(|| Error::ModelVersion(format!("{origin}: empty model file")))?;
    let mut toks = header.split_whitespace();
    match toks.next() {
        Some(MODEL_MAGIC) => {}
        other => {
            return Err(Error::ModelVersion(format!(
                "{origin}: expected `{MODEL_MAGIC}` header, found `{}`",
                other.unwrap_or("")
            )))
        }
    }

    let (mut dim, mut nsv, mut gamma, mut bias, mut a, mut b, mut feat) = (None, None, None, None, None, None, None);
    for tok in toks {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| Error::format(origin, hl, format!("malformed header field `{tok}`")))?;
        let num = |v: &str| -> Result<f64> {
            v.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::format(origin, hl, format!("invalid value for `{k}`: `{v}`")))
        };
        let count = |v: &str| -> Result<usize> {
            v.parse::<usize>()
                .map_err(|_| Error::format(origin, hl, format!("invalid value for `{k}`: `{v}`")))
        };
        match k {
            "dim" => dim = Some(count(v)?),
            "nsv" => nsv = Some(count(v)?),
            "gamma" => gamma = Some(num(v)?),
            "bias" => bias = Some(num(v)?),
            "A" => a = Some(num(v)?),
            "B" => b = Some(num(v)?),
            "feat" => {
                feat = Some(
                    parse_feature_tag(v)
                        .ok_or_else(|| Error::format(origin, hl, format!("invalid feature tag `{v}`")))?,
                )
            }
            other => return Err(Error::format(origin, hl, format!("unknown header field `{other}`"))),
        }
    }
    let missing = |name: &str| Error::format(origin, hl, format!("header lacks `{name}`"));
    let dim = dim.ok_or_else(|| missing("dim"))?;
    let nsv = nsv.ok_or_else(|| missing("nsv"))?;
    let gamma = gamma.ok_or_else(|| missing("gamma"))?;
    let bias = bias.ok_or_else(|| missing("bias"))?;
    let a = a.ok_or_else(|| missing("A"))?;
    let b = b.ok_or_else(|| missing("B"))?;
    let feature_config = feat.ok_or_else(|| missing("feat"))?;
    if dim == 0 || gamma.is_nan() || gamma <= 0.0 {
        return Err(Error::format(origin, hl, "dim and gamma must be positive"));
    }

    let mut support_vectors = Vec::with_capacity(nsv);
    let mut dual_coefs = Vec::with_capacity(nsv);
    for (line_no, line) in lines.by_ref().take(nsv) {
        let vals = line
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| Error::format(origin, line_no, format!("invalid number `{t}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        if vals.len() != dim + 1 {
            return Err(Error::format(
                origin,
                line_no,
                format!("support vector line has {} values, expected {}", vals.len(), dim + 1),
            ));
        }
        dual_coefs.push(vals[0]);
        support_vectors.push(vals[1..].to_vec());
    }
    if support_vectors.len() != nsv {
        return Err(Error::format(
            origin,
            0,
            format!("truncated model: {} of {nsv} support vectors", support_vectors.len()),
        ));
    }
    if let Some((line_no, _)) = lines.next() {
        return Err(Error::format(
            origin,
            line_no,
            "unexpected data after the last support vector",
        ));
    }

    Ok(SvmModel {
        dim,
        gamma,
        bias,
        support_vectors,
        dual_coefs,
        calibration: Sigmoid { a, b },
        feature_config,
    })
}
