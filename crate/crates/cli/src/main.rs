fn main() {
    std::process::exit(qmaxent_cli::main_with_args(std::env::args_os()));
}
