fn main() {
    std::process::exit(ccs_cli::run(std::env::args_os()));
}
