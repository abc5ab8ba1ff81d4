fn main() {
    std::process::exit(anarx_core::cli::run(std::env::args_os()));
}
