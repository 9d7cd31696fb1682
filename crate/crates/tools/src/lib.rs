//! Library side of the `uaasm` and `uansc` command-line tools.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;
use uaengine::asm::{assemble, disassemble, AsmErrors, DisasmError};
use uaengine::nsimage::{class_histogram, compile, parse_model, verify, NamespaceImage, NsError};
use uaengine::streamvm::{ImageError, VmProgram};

#[derive(Debug, Error)]
pub enum ToolError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Asm(#[from] AsmErrors),
    #[error("{0}")]
    Disasm(#[from] DisasmError),
    #[error("{0}")]
    Image(#[from] ImageError),
    #[error("{0}")]
    Namespace(#[from] NsError),
    #[error("{}", .0.join("\n"))]
    Invalid(Vec<String>),
}

fn read(path: &Path) -> Result<Vec<u8>, ToolError> {
    fs::read(path).map_err(|source| ToolError::Io {
        path: path.into(),
        source,
    })
}

fn read_text(path: &Path) -> Result<String, ToolError> {
    fs::read_to_string(path).map_err(|source| ToolError::Io {
        path: path.into(),
        source,
    })
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), ToolError> {
    fs::write(path, bytes).map_err(|source| ToolError::Io {
        path: path.into(),
        source,
    })
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "program".into(), |s| s.to_string_lossy().into_owned())
}

/// Assembles `input` into a program image at `output`.
pub fn asm_build(input: &Path, output: &Path) -> Result<VmProgram, ToolError> {
    let program = assemble(&stem(input), &read_text(input)?)?;
    write(output, &program.to_image())?;
    Ok(program)
}

/// Lists a program image as assembly.
pub fn asm_dump(input: &Path) -> Result<String, ToolError> {
    let program = VmProgram::from_image(&stem(input), &read(input)?)?;
    Ok(disassemble(&program)?)
}

/// Compiles a model file to an image at `output`. Returns the size report
/// text.
pub fn nsc_compile(model: &Path, output: &Path) -> Result<String, ToolError> {
    let model = parse_model(&read_text(model)?)?;
    let (bytes, report) = compile(&model)?;
    write(output, &bytes)?;
    let mut s = format!("{report}\n");
    for (class, n) in class_histogram(&model) {
        let _ = writeln!(s, "nodes.{class:<14}{n:>5}");
    }
    Ok(s)
}

/// Checks an image and summarizes it.
pub fn nsc_verify(image: &Path) -> Result<String, ToolError> {
    let bytes = read(image)?;
    let problems = verify(&bytes);
    if !problems.is_empty() {
        return Err(ToolError::Invalid(problems));
    }
    let img = NamespaceImage::load(bytes)?;
    Ok(format!(
        "ok nodes={} total_size={} namespaces={}",
        img.node_count(),
        img.total_size(),
        img.namespaces().join(",")
    ))
}
