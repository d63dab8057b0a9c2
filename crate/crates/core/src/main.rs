fn main() {
    std::process::exit(gaussian_kraus::cli::main_with_args(std::env::args_os()));
}
