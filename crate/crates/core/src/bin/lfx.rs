fn main() {
    std::process::exit(lfx_core::cli::run(std::env::args_os()));
}
