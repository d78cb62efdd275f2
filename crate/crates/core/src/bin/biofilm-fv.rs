fn main() {
    std::process::exit(biofilm_fv::cli::run_cli(std::env::args_os()));
}
