fn main() {
    std::process::exit(rvforecast::cli::run(std::env::args_os()));
}
