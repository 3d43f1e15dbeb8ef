fn main() {
    std::process::exit(v2xlab::cli::dispatch(std::env::args_os()));
}
