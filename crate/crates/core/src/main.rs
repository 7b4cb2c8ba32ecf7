fn main() {
    std::process::exit(sphcap::cli::main_with_args(std::env::args_os()));
}
