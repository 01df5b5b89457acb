fn main() {
    std::process::exit(iqbench::cli::run(std::env::args_os()));
}
