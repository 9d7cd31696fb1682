//! Assembles the bundled service programs into images under OUT_DIR.

use std::path::Path;

#[path = "src/streamvm/isa.rs"]
#[allow(dead_code)]
mod isa;

#[path = "src/streamvm/image.rs"]
#[allow(dead_code)]
mod image;

#[path = "src/asm/assembler.rs"]
#[allow(dead_code)]
mod assembler;

use image::VmProgram;

fn main() {
    let out = std::env::var("OUT_DIR").expect("OUT_DIR set by cargo");
    println!("cargo:rerun-if-changed=src/streamvm/isa.rs");
    println!("cargo:rerun-if-changed=src/streamvm/image.rs");
    println!("cargo:rerun-if-changed=src/asm/assembler.rs");
    for name in ["read_node", "write_node"] {
        let src_path = format!("programs/{name}.s");
        println!("cargo:rerun-if-changed={src_path}");
        let src = std::fs::read_to_string(&src_path).expect("program source");
        let program: VmProgram = match assembler::assemble(name, &src) {
            Ok(p) => p,
            Err(errors) => panic!("{src_path}:\n{errors}"),
        };
        std::fs::write(
            Path::new(&out).join(format!("{name}.uavm")),
            program.to_image(),
        )
        .expect("write program image");
    }
}
