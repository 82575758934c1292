//! Runs an external extractor program to obtain embeddings or landmarks for
//! image files. The extractor writes its result in the `emb-v1` or `lmk-v1`
//! text format to a file path it is given on the command line.

use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::dataio::{parse_embeddings, parse_landmarks, Embedding, LandmarkSet};
use crate::error::{Error, Result};

pub const INPUT_PLACEHOLDER: &str = "{input}";
pub const OUTPUT_PLACEHOLDER: &str = "{output}";
/// Captured stderr beyond this many bytes is dropped from error reports.
pub const STDERR_LIMIT: usize = 8 * 1024;

/// A command line such as `extract --image {input} --out {output}`. The
/// template is split on whitespace; no shell is involved.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractorSpec {
    template: Vec<String>,
    /// Embedding dimension, or landmark count for landmark extractors.
    pub expected_dim: usize,
    pub timeout: Duration,
}

impl ExtractorSpec {
    pub fn new(template: &str, expected_dim: usize, timeout: Duration) -> Result<Self> {
        let argv: Vec<String> = template.split_whitespace().map(str::to_owned).collect();
        if argv.is_empty() {
            return Err(Error::InvalidParameter("empty extractor command".into()));
        }
        for ph in [INPUT_PLACEHOLDER, OUTPUT_PLACEHOLDER] {
            let n: usize = argv.iter().map(|a| a.matches(ph).count()).sum();
            if n != 1 {
                return Err(Error::InvalidParameter(format!(
                    "extractor command must contain `{ph}` exactly once, found {n}"
                )));
            }
        }
        if expected_dim == 0 {
            return Err(Error::InvalidParameter("expected dimension must be positive".into()));
        }
        if timeout.is_zero() {
            return Err(Error::InvalidParameter("timeout must be positive".into()));
        }
        Ok(ExtractorSpec {
            template: argv,
            expected_dim,
            timeout,
        })
    }

    pub fn template(&self) -> String {
        self.template.join(" ")
    }

    fn argv(&self, input: &Path, output: &Path) -> Vec<String> {
        let (i, o) = (input.to_string_lossy(), output.to_string_lossy());
        self.template
            .iter()
            .map(|a| a.replace(INPUT_PLACEHOLDER, &i).replace(OUTPUT_PLACEHOLDER, &o))
            .collect()
    }
}

fn truncate_utf8(bytes: &[u8]) -> String {
    let cut = bytes.len().min(STDERR_LIMIT);
    let mut s = String::from_utf8_lossy(&bytes[..cut]).into_owned();
    if bytes.len() > STDERR_LIMIT {
        s.push_str(" [truncated]");
    }
    s
}

/// Runs the extractor on `image` and returns the contents of its output file.
fn run(spec: &ExtractorSpec, image: &Path) -> Result<(String, String)> {
    if !image.is_file() {
        return Err(Error::io(
            image,
            std::io::Error::new(std::io::ErrorKind::NotFound, "image file not found"),
        ));
    }
    let dir = tempfile::tempdir().map_err(|e| Error::io(std::env::temp_dir(), e))?;
    let out_path = dir.path().join("extracted.txt");
    let argv = spec.argv(image, &out_path);
    let mut child = Command::new(&argv[0])
        .args(&argv[1..])
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| Error::io(PathBuf::from(&argv[0]), e))?;

    let mut stderr = child.stderr.take().expect("stderr is piped");
    let reader = thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = stderr.read_to_end(&mut buf);
        buf
    });

    let start = Instant::now();
    let status = loop {
        match child.try_wait().map_err(|e| Error::io(PathBuf::from(&argv[0]), e))? {
            Some(status) => break status,
            None if start.elapsed() >= spec.timeout => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(Error::Timeout(spec.timeout));
            }
            None => thread::sleep(Duration::from_millis(5)),
        }
    };
    let diagnostics = truncate_utf8(&reader.join().unwrap_or_default());
    if !status.success() {
        return Err(Error::Extraction {
            status: status.to_string(),
            stderr: diagnostics,
        });
    }
    let text = std::fs::read_to_string(&out_path).map_err(|e| Error::io(&out_path, e))?;
    Ok((text, diagnostics))
}

fn image_stem(image: &Path) -> String {
    image
        .file_stem()
        .map_or_else(String::new, |s| s.to_string_lossy().into_owned())
}

/// Extracts one embedding. The record's image id is the image file stem.
pub fn extract_via_process(spec: &ExtractorSpec, image: &Path) -> Result<Embedding> {
    let (text, _) = run(spec, image)?;
    let origin = format!("extractor output for {}", image.display());
    let (dim, records) = parse_embeddings(&text, &origin, None)?;
    if dim != spec.expected_dim {
        return Err(Error::Dimension {
            expected: spec.expected_dim,
            actual: dim,
        });
    }
    let mut e = match <[Embedding; 1]>::try_from(records) {
        Ok([e]) => e,
        Err(v) => {
            return Err(Error::format(
                origin,
                0,
                format!("expected one embedding, found {}", v.len()),
            ))
        }
    };
    e.image_id = image_stem(image);
    Ok(e)
}

/// Extracts one landmark set; `expected_dim` is the landmark count.
pub fn extract_landmarks_via_process(spec: &ExtractorSpec, image: &Path) -> Result<LandmarkSet> {
    let (text, _) = run(spec, image)?;
    let origin = format!("extractor output for {}", image.display());
    let (count, records) = parse_landmarks(&text, &origin, None)?;
    if count != spec.expected_dim {
        return Err(Error::Dimension {
            expected: spec.expected_dim,
            actual: count,
        });
    }
    let mut s = match <[LandmarkSet; 1]>::try_from(records) {
        Ok([s]) => s,
        Err(v) => {
            return Err(Error::format(
                origin,
                0,
                format!("expected one landmark set, found {}", v.len()),
            ))
        }
    };
    s.image_id = image_stem(image);
    Ok(s)
}

/// Extracts embeddings for many images with at most `max_processes`
/// extractors running at once. Results are in input order.
pub fn extract_batch(spec: &ExtractorSpec, images: &[PathBuf], max_processes: usize) -> Result<Vec<Result<Embedding>>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(max_processes.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot build extractor pool: {e}")))?;
    Ok(pool.install(|| images.par_iter().map(|p| extract_via_process(spec, p)).collect()))
}
