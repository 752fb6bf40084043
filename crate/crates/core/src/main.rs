fn main() {
    std::process::exit(icpkit::cli::cli_dispatch(std::env::args_os()));
}
