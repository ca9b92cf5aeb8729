fn main() {
    std::process::exit(twofluid::harness::cli::main_with_args(std::env::args_os()));
}
