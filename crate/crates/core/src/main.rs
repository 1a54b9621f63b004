fn main() {
    std::process::exit(findings_ir::cli::main_with_args(std::env::args_os()));
}
